//! Monte Carlo checks of the null behavior of both trajectory statistics.
//!
//! Each replication draws a fresh calibration set and a fresh trajectory from
//! the configured distributions and evaluates T1 (the threshold-count score)
//! and T2 (the rank-based z-score) exactly as [`crate::scoring`] would on real
//! deviations. Replication `k` uses its own ChaCha8 stream `k` under the master
//! seed, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, ChiSquared, Distribution, Exp, FisherF, Gamma, Normal, StudentT, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSquaredDist, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::scoring::{combine_botts, lower_tail, nearest_rank, upper_tail, w_mv, w_st};
use crate::{Error, Result};

/// A parametric family to draw deviations from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Exponential { lambda: f64 },
    /// `rate` is the inverse scale.
    Gamma { shape: f64, rate: f64 },
    ChiSquared { k: f64 },
    Normal { mean: f64, sd: f64 },
    Cauchy { location: f64, scale: f64 },
    F { d1: f64, d2: f64 },
    StudentT { nu: f64 },
    Uniform { a: f64, b: f64 },
}

/// A validated, ready-to-draw form of [`DistributionSpec`].
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    Exponential(Exp<f64>),
    Gamma(Gamma<f64>),
    ChiSquared(ChiSquared<f64>),
    Normal(Normal<f64>),
    Cauchy(Cauchy<f64>),
    F(FisherF<f64>),
    StudentT(StudentT<f64>),
    Uniform(Uniform<f64>),
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl DistributionSpec {
    pub fn sampler(&self) -> Result<Sampler> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("invalid {self:?}: {e}"));
        Ok(match *self {
            DistributionSpec::Exponential { lambda } => {
                positive("lambda", lambda)?;
                Sampler::Exponential(Exp::new(lambda).map_err(|e| bad(&e))?)
            }
            DistributionSpec::Gamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)?;
                Sampler::Gamma(Gamma::new(shape, 1.0 / rate).map_err(|e| bad(&e))?)
            }
            DistributionSpec::ChiSquared { k } => {
                positive("k", k)?;
                Sampler::ChiSquared(ChiSquared::new(k).map_err(|e| bad(&e))?)
            }
            DistributionSpec::Normal { mean, sd } => {
                positive("sd", sd)?;
                if !mean.is_finite() {
                    return Err(Error::Config(format!("mean must be finite, got {mean}")));
                }
                Sampler::Normal(Normal::new(mean, sd).map_err(|e| bad(&e))?)
            }
            DistributionSpec::Cauchy { location, scale } => {
                positive("scale", scale)?;
                if !location.is_finite() {
                    return Err(Error::Config(format!("location must be finite, got {location}")));
                }
                Sampler::Cauchy(Cauchy::new(location, scale).map_err(|e| bad(&e))?)
            }
            DistributionSpec::F { d1, d2 } => {
                positive("d1", d1)?;
                positive("d2", d2)?;
                Sampler::F(FisherF::new(d1, d2).map_err(|e| bad(&e))?)
            }
            DistributionSpec::StudentT { nu } => {
                positive("nu", nu)?;
                Sampler::StudentT(StudentT::new(nu).map_err(|e| bad(&e))?)
            }
            DistributionSpec::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::Config(format!("uniform bounds need a < b, got [{a}, {b}]")));
                }
                Sampler::Uniform(Uniform::new(a, b))
            }
        })
    }
}

impl Sampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Exponential(d) => d.sample(rng),
            Sampler::Gamma(d) => d.sample(rng),
            Sampler::ChiSquared(d) => d.sample(rng),
            Sampler::Normal(d) => d.sample(rng),
            Sampler::Cauchy(d) => d.sample(rng),
            Sampler::F(d) => d.sample(rng),
            Sampler::StudentT(d) => d.sample(rng),
            Sampler::Uniform(d) => d.sample(rng),
        }
    }

    fn draw_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    fn draw_sorted<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut v = self.draw_n(n, rng);
        v.sort_by(f64::total_cmp);
        v
    }
}

pub fn sample_distribution<R: Rng + ?Sized>(spec: &DistributionSpec, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    Ok(spec.sampler()?.draw_n(n, rng))
}

/// Sizes, families and seed for one simulation study.
///
/// `dist_v` drives stationary deviations (ADD); `dist_y` and `dist_z` drive the
/// paired moving deviations (RDD and CDD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub r_st: usize,
    pub r_mv: usize,
    pub m_st: usize,
    pub m_mv: usize,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_v: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_y: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_z: Option<DistributionSpec>,
    pub seed: u64,
}

pub const PRESETS: [&str; 4] = ["fig8", "fig9", "fig10", "fig11"];

impl SimConfig {
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        use DistributionSpec::*;
        let base = SimConfig {
            r_st: 1000,
            r_mv: 1000,
            m_st: 0,
            m_mv: 0,
            replications: 5000,
            dist_v: None,
            dist_y: None,
            dist_z: None,
            seed,
        };
        Ok(match name {
            "fig8" => SimConfig {
                m_st: 100,
                m_mv: 200,
                dist_v: Some(Exponential { lambda: 2.0 }),
                dist_y: Some(Gamma { shape: 2.0, rate: 4.0 }),
                dist_z: Some(ChiSquared { k: 8.0 }),
                ..base
            },
            "fig9" => SimConfig {
                m_st: 200,
                m_mv: 100,
                dist_v: Some(Normal { mean: 2.0, sd: 4.0 }),
                dist_y: Some(Cauchy { location: 0.0, scale: 1.0 }),
                dist_z: Some(F { d1: 8.0, d2: 18.0 }),
                ..base
            },
            "fig10" => SimConfig {
                m_st: 300,
                dist_v: Some(StudentT { nu: 2.0 }),
                ..base
            },
            "fig11" => SimConfig {
                m_mv: 200,
                dist_y: Some(Cauchy { location: 4.0, scale: 2.0 }),
                dist_z: Some(F { d1: 1.0, d2: 20.0 }),
                ..base
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}`; available presets: {}",
                    PRESETS.join(", ")
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.m_st == 0 && self.m_mv == 0 {
            return Err(Error::Config("m_st and m_mv are both zero".into()));
        }
        if self.m_st > 0 {
            if self.r_st == 0 {
                return Err(Error::Config("r_st must be positive when m_st > 0".into()));
            }
            self.dist_v.ok_or_else(|| Error::Config("dist_v required when m_st > 0".into()))?.sampler()?;
        }
        if self.m_mv > 0 {
            if self.r_mv == 0 {
                return Err(Error::Config("r_mv must be positive when m_mv > 0".into()));
            }
            self.dist_y.ok_or_else(|| Error::Config("dist_y required when m_mv > 0".into()))?.sampler()?;
            self.dist_z.ok_or_else(|| Error::Config("dist_z required when m_mv > 0".into()))?.sampler()?;
        }
        Ok(())
    }
}

/// The rng for replication or draw number `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`, 0 for a single value).
    pub stdev: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    Summary {
        n,
        mean,
        stdev: if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 },
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub t2_samples: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_samples: Option<Vec<f64>>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_summary: Option<Summary>,
    /// `(theoretical N(0,1) quantile, sorted T2 value)` at Hazen positions.
    pub qq_pairs: Vec<(f64, f64)>,
    pub qq_correlation: f64,
    /// Distance between the T2 empirical CDF and the N(0,1) CDF.
    pub ks_stat: f64,
}

impl SimResult {
    fn new(config: SimConfig, t2: Vec<f64>, t1: Option<Vec<f64>>) -> Self {
        let qq_pairs = qq_pairs(&t2);
        Self {
            summary: summarize(&t2),
            t1_summary: t1.as_deref().map(summarize),
            qq_correlation: qq_correlation(&qq_pairs),
            ks_stat: ks_statistic(&t2, normal_cdf),
            config,
            t2_samples: t2,
            t1_samples: t1,
            qq_pairs,
        }
    }
}

struct Replicate {
    t1: f64,
    t2: f64,
}

fn replicate(cfg: &SimConfig, alpha: f64, rep: u64) -> Replicate {
    let mut rng = stream_rng(cfg.seed, rep);
    let sv = cfg.dist_v.filter(|_| cfg.m_st > 0).map(|d| d.sampler().expect("validated"));
    let sy = cfg.dist_y.filter(|_| cfg.m_mv > 0).map(|d| d.sampler().expect("validated"));
    let sz = cfg.dist_z.filter(|_| cfg.m_mv > 0).map(|d| d.sampler().expect("validated"));

    // Draw order is fixed: calibration V, Y, Z, then trajectory V, Y, Z.
    let vd = sv.map(|s| s.draw_sorted(cfg.r_st, &mut rng)).unwrap_or_default();
    let yd = sy.map(|s| s.draw_sorted(cfg.r_mv, &mut rng)).unwrap_or_default();
    let zd = sz.map(|s| s.draw_sorted(cfg.r_mv, &mut rng)).unwrap_or_default();
    let vn = sv.map(|s| s.draw_n(cfg.m_st, &mut rng)).unwrap_or_default();
    let yn = sy.map(|s| s.draw_n(cfg.m_mv, &mut rng)).unwrap_or_default();
    let zn = sz.map(|s| s.draw_n(cfg.m_mv, &mut rng)).unwrap_or_default();

    let st_scores: Vec<f64> = vn.iter().map(|&v| upper_tail(&vd, v)).collect();
    let mv_scores: Vec<f64> = yn
        .iter()
        .zip(&zn)
        .map(|(&y, &z)| upper_tail(&yd, y).min(lower_tail(&zd, z)))
        .collect();
    let t2 = combine_botts(w_st(&st_scores), w_mv(&mv_scores)).expect("validated");

    let mut flagged = 0usize;
    if let Some(q) = nearest_rank(&vd, 1.0 - alpha) {
        flagged += vn.iter().filter(|&&v| v >= q).count();
    }
    if let (Some(qy), Some(qz)) = (nearest_rank(&yd, 1.0 - alpha), nearest_rank(&zd, alpha)) {
        flagged += yn.iter().zip(&zn).filter(|&(&y, &z)| y >= qy || z <= qz).count();
    }
    let t1 = flagged as f64 / (cfg.m_st + cfg.m_mv) as f64;
    Replicate { t1, t2 }
}

fn run(cfg: &SimConfig, alpha: f64) -> Result<Vec<Replicate>> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok((0..cfg.replications as u64).into_par_iter().map(|k| replicate(cfg, alpha, k)).collect())
}

pub fn simulate_t2(cfg: &SimConfig) -> Result<SimResult> {
    let reps = run(cfg, crate::scoring::DEFAULT_ALPHA)?;
    Ok(SimResult::new(cfg.clone(), reps.iter().map(|r| r.t2).collect(), None))
}

/// Like [`simulate_t2`] but also records T1 at level `alpha` from the same draws.
pub fn simulate_t1(cfg: &SimConfig, alpha: f64) -> Result<SimResult> {
    let reps = run(cfg, alpha)?;
    let t2 = reps.iter().map(|r| r.t2).collect();
    let t1 = reps.iter().map(|r| r.t1).collect();
    Ok(SimResult::new(cfg.clone(), t2, Some(t1)))
}

/// Stationary tail scores of single null deviations, each against its own
/// freshly drawn calibration set of size `r`.
pub fn null_scr_botts_st(spec: &DistributionSpec, r: usize, n: usize, seed: u64) -> Result<Vec<f64>> {
    if r == 0 || n == 0 {
        return Err(Error::Config("calibration and score counts must be positive".into()));
    }
    let s = spec.sampler()?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k);
            let d = s.draw_sorted(r, &mut rng);
            upper_tail(&d, s.draw(&mut rng))
        })
        .collect())
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
///
/// Acklam's rational approximation followed by one Halley step against the
/// erfc-based CDF; relative error is far below 1e-8 on (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };

    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Pairs each sorted sample with the N(0,1) quantile at `(i - 0.5) / n`.
pub fn qq_pairs(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.into_iter()
        .enumerate()
        .map(|(i, v)| (normal_quantile((i as f64 + 0.5) / n), v))
        .collect()
}

/// Pearson correlation of the Q-Q pairs.
pub fn qq_correlation(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Sup-norm distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Sup-norm distance between two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Approximate 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

pub const MIN_UNIFORM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinUniformCheck {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub histogram: Vec<u64>,
    /// Pearson statistic against the density `2(1 - a)`.
    pub chi_square: f64,
    /// Upper 1% point of chi-square with `bins - 1` degrees of freedom.
    pub chi_square_critical: f64,
}

impl MinUniformCheck {
    pub fn rejects(&self) -> bool {
        self.chi_square > self.chi_square_critical
    }
}

/// Moments and a binned fit of `min(U1, U2)` for independent uniforms.
pub fn min_uniform_check<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MinUniformCheck {
    let mins: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().min(rng.gen::<f64>())).collect();
    let s = summarize(&mins);
    let mut histogram = vec![0u64; MIN_UNIFORM_BINS];
    for &m in &mins {
        let b = ((m * MIN_UNIFORM_BINS as f64) as usize).min(MIN_UNIFORM_BINS - 1);
        histogram[b] += 1;
    }
    let w = 1.0 / MIN_UNIFORM_BINS as f64;
    let chi_square = histogram
        .iter()
        .enumerate()
        .map(|(k, &obs)| {
            let (lo, hi) = (k as f64 * w, (k + 1) as f64 * w);
            let expected = n as f64 * ((1.0 - lo).powi(2) - (1.0 - hi).powi(2));
            (obs as f64 - expected).powi(2) / expected
        })
        .sum();
    let chi_square_critical = ChiSquaredDist::new((MIN_UNIFORM_BINS - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.99);
    MinUniformCheck {
        n,
        mean: s.mean,
        variance: if n > 1 { s.stdev * s.stdev } else { 0.0 },
        histogram,
        chi_square,
        chi_square_critical,
    }
}

pub fn write_samples_csv<W: std::io::Write>(result: &SimResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match &result.t1_samples {
        Some(t1) => {
            w.write_record(["replication", "t2", "t1"])?;
            for (k, (t2, t1)) in result.t2_samples.iter().zip(t1).enumerate() {
                w.write_record([k.to_string(), t2.to_string(), t1.to_string()])?;
            }
        }
        None => {
            w.write_record(["replication", "t2"])?;
            for (k, t2) in result.t2_samples.iter().enumerate() {
                w.write_record([k.to_string(), t2.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_qq_csv<W: std::io::Write>(result: &SimResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theoretical", "empirical"])?;
    for (x, y) in &result.qq_pairs {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
