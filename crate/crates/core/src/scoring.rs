//! Calibration and the two trajectory statistics.
//!
//! A [`CalibrationModel`] holds the sorted ADD, RDD and CDD values observed on
//! a held-out dataset. Two scores are built on it:
//!
//! * `anom_liu`: the fraction of points whose deviation crosses the calibrated
//!   threshold (upper tail for ADD and RDD, lower tail for CDD).
//! * `anom_botts`: per-point empirical tail probabilities, centered and scaled
//!   so the result is asymptotically N(0, 1) under the null. Stationary tails
//!   are Uniform(0, 1) under the null, moving tails are the minimum of two
//!   independent uniforms (mean 1/3, variance 1/18).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{point_deviation, PointDeviation};
use crate::model::{CourseMode, MotionClass, Trajectory};
use crate::patterns::PatternModel;
use crate::{Error, Result, RunInfo, FORMAT_VERSION};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Sorted deviation samples from the calibration set plus the derived
/// thresholds. A branch with no samples has no threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
    pub alpha: f64,
    pub course_mode: CourseMode,
    pub add_samples: Vec<f64>,
    pub rdd_samples: Vec<f64>,
    pub cdd_samples: Vec<f64>,
    pub add_threshold: Option<f64>,
    pub rdd_threshold: Option<f64>,
    pub cdd_threshold: Option<f64>,
}

/// Lower nearest-rank quantile of an ascending sample: the value at 1-based
/// index `ceil(gamma * r)`, clamped to `[1, r]`.
pub fn nearest_rank(sorted: &[f64], gamma: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let r = sorted.len();
    // The slack absorbs products such as 0.95 * 100 = 95.00000000000001.
    let k = ((gamma * r as f64) - 1e-9).ceil().max(1.0) as usize;
    Some(sorted[k.min(r) - 1])
}

fn sorted_finite(mut v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::Calibration(format!("{what} sample {x} is not finite")));
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

impl CalibrationModel {
    pub fn from_samples(add: Vec<f64>, rdd: Vec<f64>, cdd: Vec<f64>, alpha: f64, course_mode: CourseMode) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParams(format!("alpha {alpha} outside (0, 1)")));
        }
        if rdd.len() != cdd.len() {
            return Err(Error::Calibration("RDD and CDD sample counts differ".into()));
        }
        if add.is_empty() && rdd.is_empty() {
            return Err(Error::Calibration("calibration set yields no deviations".into()));
        }
        let add_samples = sorted_finite(add, "ADD")?;
        let rdd_samples = sorted_finite(rdd, "RDD")?;
        let cdd_samples = sorted_finite(cdd, "CDD")?;
        Ok(Self {
            version: FORMAT_VERSION.into(),
            run: None,
            alpha,
            course_mode,
            add_threshold: nearest_rank(&add_samples, 1.0 - alpha),
            rdd_threshold: nearest_rank(&rdd_samples, 1.0 - alpha),
            cdd_threshold: nearest_rank(&cdd_samples, alpha),
            add_samples,
            rdd_samples,
            cdd_samples,
        })
    }

    pub fn r_st(&self) -> usize {
        self.add_samples.len()
    }

    pub fn r_mv(&self) -> usize {
        self.rdd_samples.len()
    }

    /// Checks the version tag, sort order and that the thresholds follow
    /// from the samples.
    pub fn check(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION.into(),
                found: self.version.clone(),
            });
        }
        let rebuilt = Self::from_samples(
            self.add_samples.clone(),
            self.rdd_samples.clone(),
            self.cdd_samples.clone(),
            self.alpha,
            self.course_mode,
        )?;
        let sorted = rebuilt.add_samples == self.add_samples
            && rebuilt.rdd_samples == self.rdd_samples
            && rebuilt.cdd_samples == self.cdd_samples;
        let thresholds = rebuilt.add_threshold == self.add_threshold
            && rebuilt.rdd_threshold == self.rdd_threshold
            && rebuilt.cdd_threshold == self.cdd_threshold;
        if !(sorted && thresholds) {
            return Err(Error::Calibration("samples unsorted or thresholds inconsistent with samples".into()));
        }
        Ok(())
    }
}

/// Computes every deviation in the calibration trajectories.
pub fn calibrate(d: &[Trajectory], model: &PatternModel, alpha: f64, mode: CourseMode) -> Result<CalibrationModel> {
    let points: Vec<_> = d.iter().flat_map(|t| t.points.iter()).collect();
    if points.is_empty() {
        return Err(Error::Calibration("calibration set is empty".into()));
    }
    let devs = points
        .par_iter()
        .map(|p| point_deviation(p, model, mode))
        .collect::<Result<Vec<_>>>()?;
    let (mut add, mut rdd, mut cdd) = (Vec::new(), Vec::new(), Vec::new());
    for dv in devs {
        match dv.motion {
            MotionClass::Stationary => add.extend(dv.add),
            MotionClass::Moving => {
                rdd.extend(dv.rdd);
                cdd.extend(dv.cdd);
            }
        }
    }
    CalibrationModel::from_samples(add, rdd, cdd, alpha, mode)
}

fn missing(branch: &str) -> Error {
    Error::Calibration(format!("no {branch} calibration samples"))
}

/// Threshold indicator: 1 when the deviation is beyond its threshold.
pub fn scr_liu(dev: &PointDeviation, cal: &CalibrationModel) -> Result<u8> {
    let hit = match dev.motion {
        MotionClass::Stationary => {
            let t = cal.add_threshold.ok_or_else(|| missing("stationary"))?;
            dev.add.ok_or(Error::ModelIncomplete("stationary point without ADD"))? > t
        }
        MotionClass::Moving => {
            let rt = cal.rdd_threshold.ok_or_else(|| missing("moving"))?;
            let ct = cal.cdd_threshold.ok_or_else(|| missing("moving"))?;
            let rdd = dev.rdd.ok_or(Error::ModelIncomplete("moving point without RDD"))?;
            let cdd = dev.cdd.ok_or(Error::ModelIncomplete("moving point without CDD"))?;
            rdd > rt || cdd < ct
        }
    };
    Ok(hit as u8)
}

/// Fraction of `sorted` at or above `x`.
pub fn upper_tail(sorted: &[f64], x: f64) -> f64 {
    let below = sorted.partition_point(|&s| s < x);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

/// Fraction of `sorted` at or below `x`.
pub fn lower_tail(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&s| s <= x) as f64 / sorted.len() as f64
}

pub fn scr_botts_st(add: f64, cal: &CalibrationModel) -> Result<f64> {
    if cal.add_samples.is_empty() {
        return Err(missing("stationary"));
    }
    Ok(upper_tail(&cal.add_samples, add))
}

pub fn scr_botts_mv(rdd: f64, cdd: f64, cal: &CalibrationModel) -> Result<f64> {
    if cal.rdd_samples.is_empty() || cal.cdd_samples.is_empty() {
        return Err(missing("moving"));
    }
    Ok(upper_tail(&cal.rdd_samples, rdd).min(lower_tail(&cal.cdd_samples, cdd)))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standardized mean of stationary tail scores; `None` for an empty slice.
pub fn w_st(scores: &[f64]) -> Option<f64> {
    (!scores.is_empty()).then(|| (mean(scores) - 0.5) / (1.0 / (12.0 * scores.len() as f64)).sqrt())
}

/// Standardized mean of moving tail scores; `None` for an empty slice.
pub fn w_mv(scores: &[f64]) -> Option<f64> {
    (!scores.is_empty()).then(|| (mean(scores) - 1.0 / 3.0) / (1.0 / (18.0 * scores.len() as f64)).sqrt())
}

/// Combines the stationary and moving z-scores into one N(0, 1) statistic.
pub fn combine_botts(w_st: Option<f64>, w_mv: Option<f64>) -> Result<f64> {
    match (w_st, w_mv) {
        (Some(s), Some(m)) => Ok((s + m) / std::f64::consts::SQRT_2),
        (Some(s), None) => Ok(s),
        (None, Some(m)) => Ok(m),
        (None, None) => Err(Error::EmptyTrajectory),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiuMoments {
    pub mean: f64,
    pub variance: f64,
    pub stdev: f64,
}

/// Limiting mean and variance of `anom_liu` under the null.
///
/// The moving-point variance term is `2a(1-a) + a^2(1-a^2)`, which omits the
/// covariance of the two threshold indicators. The exact variance of their
/// union is `(2a - a^2)(1 - a)^2`.
pub fn anom_liu_moments(m_st: usize, m_mv: usize, alpha: f64) -> Result<LiuMoments> {
    let m = (m_st + m_mv) as f64;
    if m == 0.0 {
        return Err(Error::EmptyTrajectory);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!("alpha {alpha} outside (0, 1)")));
    }
    let (st, mv) = (m_st as f64, m_mv as f64);
    let a = alpha;
    let mean = a + (mv / m) * (a - a * a);
    let variance = (st * a * (1.0 - a) + 2.0 * mv * a * (1.0 - a) + mv * a * a * (1.0 - a * a)) / (m * m);
    Ok(LiuMoments {
        mean,
        variance,
        stdev: variance.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointScore {
    pub motion: MotionClass,
    pub scr_liu: u8,
    pub scr_botts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryScore {
    pub id: String,
    pub m_st: usize,
    pub m_mv: usize,
    pub anom_liu: f64,
    pub anom_botts: f64,
    pub w_st: Option<f64>,
    pub w_mv: Option<f64>,
    /// Null mean and stdev of `anom_liu` for this trajectory's composition.
    pub liu_moments: LiuMoments,
    pub per_point: Vec<PointScore>,
}

pub fn score_deviations(id: &str, devs: &[PointDeviation], cal: &CalibrationModel) -> Result<TrajectoryScore> {
    if devs.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut per_point = Vec::with_capacity(devs.len());
    let (mut st, mut mv) = (Vec::new(), Vec::new());
    for d in devs {
        let botts = match d.motion {
            MotionClass::Stationary => {
                let s = scr_botts_st(d.add.ok_or(Error::ModelIncomplete("stationary point without ADD"))?, cal)?;
                st.push(s);
                s
            }
            MotionClass::Moving => {
                let rdd = d.rdd.ok_or(Error::ModelIncomplete("moving point without RDD"))?;
                let cdd = d.cdd.ok_or(Error::ModelIncomplete("moving point without CDD"))?;
                let s = scr_botts_mv(rdd, cdd, cal)?;
                mv.push(s);
                s
            }
        };
        per_point.push(PointScore {
            motion: d.motion,
            scr_liu: scr_liu(d, cal)?,
            scr_botts: botts,
        });
    }
    let flagged: u32 = per_point.iter().map(|p| p.scr_liu as u32).sum();
    let (w_st, w_mv) = (w_st(&st), w_mv(&mv));
    Ok(TrajectoryScore {
        id: id.to_string(),
        m_st: st.len(),
        m_mv: mv.len(),
        anom_liu: flagged as f64 / devs.len() as f64,
        anom_botts: combine_botts(w_st, w_mv)?,
        w_st,
        w_mv,
        liu_moments: anom_liu_moments(st.len(), mv.len(), cal.alpha)?,
        per_point,
    })
}

pub fn trajectory_deviations(t: &Trajectory, model: &PatternModel, mode: CourseMode) -> Result<Vec<PointDeviation>> {
    t.points.par_iter().map(|p| point_deviation(p, model, mode)).collect()
}

pub fn score_trajectory(t: &Trajectory, model: &PatternModel, cal: &CalibrationModel) -> Result<TrajectoryScore> {
    if t.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    score_deviations(&t.id, &trajectory_deviations(t, model, cal.course_mode)?, cal)
}

pub fn anom_liu(t: &Trajectory, model: &PatternModel, cal: &CalibrationModel) -> Result<f64> {
    Ok(score_trajectory(t, model, cal)?.anom_liu)
}

pub fn anom_botts(t: &Trajectory, model: &PatternModel, cal: &CalibrationModel) -> Result<f64> {
    Ok(score_trajectory(t, model, cal)?.anom_botts)
}

pub const SUMMARY_HEADER: [&str; 7] = ["id", "m_st", "m_mv", "anom_liu", "anom_botts", "mean_anom_liu", "sd_anom_liu"];

impl TrajectoryScore {
    pub fn summary_record(&self) -> [String; 7] {
        [
            self.id.clone(),
            self.m_st.to_string(),
            self.m_mv.to_string(),
            self.anom_liu.to_string(),
            self.anom_botts.to_string(),
            self.liu_moments.mean.to_string(),
            self.liu_moments.stdev.to_string(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cal(add: Vec<f64>, rdd: Vec<f64>, cdd: Vec<f64>) -> CalibrationModel {
        CalibrationModel::from_samples(add, rdd, cdd, DEFAULT_ALPHA, CourseMode::Circular).unwrap()
    }

    fn st(add: f64) -> PointDeviation {
        PointDeviation::stationary(add)
    }

    fn mv(rdd: f64, cdd: f64) -> PointDeviation {
        PointDeviation::moving(rdd, cdd, None)
    }

    #[test]
    fn nearest_rank_examples() {
        let s: Vec<f64> = (1..=100).map(|k| 0.01 * k as f64).collect();
        assert_eq!(nearest_rank(&s, 0.95), Some(s[94]));
        assert_eq!(nearest_rank(&s, 0.05), Some(s[4]));
        assert_eq!(nearest_rank(&[7.0], 0.95), Some(7.0));
        assert_eq!(nearest_rank(&[7.0], 0.05), Some(7.0));
        assert_eq!(nearest_rank(&[], 0.5), None);
    }

    #[test]
    fn calibration_thresholds() {
        let add: Vec<f64> = (1..=100).rev().map(|k| 0.01 * k as f64).collect();
        let c = cal(add, vec![], vec![]);
        assert!((c.add_threshold.unwrap() - 0.95).abs() < 1e-12);
        assert_eq!(c.rdd_threshold, None);
        c.check().unwrap();
        assert!(CalibrationModel::from_samples(vec![], vec![], vec![], 0.05, CourseMode::Circular).is_err());
        assert!(CalibrationModel::from_samples(vec![f64::NAN], vec![], vec![], 0.05, CourseMode::Circular).is_err());
    }

    #[test]
    fn check_detects_tampering() {
        let mut c = cal(vec![1.0, 2.0, 3.0], vec![], vec![]);
        c.add_threshold = Some(2.0);
        assert!(c.check().is_err());
        let mut c = cal(vec![1.0, 2.0, 3.0], vec![], vec![]);
        c.version = "0".into();
        assert!(matches!(c.check(), Err(Error::VersionMismatch { .. })));
    }

    #[test]
    fn liu_indicator_examples() {
        let c = cal(vec![1.0, 2.0], vec![1.0, 2.0], vec![-1.0, 0.5]);
        assert_eq!(scr_liu(&st(2.0), &c).unwrap(), 0);
        assert_eq!(scr_liu(&st(2.1), &c).unwrap(), 1);
        assert_eq!(scr_liu(&mv(1.5, 0.0), &c).unwrap(), 0);
        assert_eq!(scr_liu(&mv(2.5, 1.0), &c).unwrap(), 1);
        assert_eq!(scr_liu(&mv(0.0, -1.5), &c).unwrap(), 1);
        let only_st = cal(vec![1.0], vec![], vec![]);
        assert!(scr_liu(&mv(0.0, 0.0), &only_st).is_err());
    }

    #[test]
    fn botts_tail_examples() {
        let c = cal(vec![1.0, 2.0, 3.0, 4.0], vec![], vec![]);
        assert_eq!(scr_botts_st(0.0, &c).unwrap(), 1.0);
        assert_eq!(scr_botts_st(5.0, &c).unwrap(), 0.0);
        assert_eq!(scr_botts_st(2.5, &c).unwrap(), 0.5);
        assert_eq!(scr_botts_st(2.0, &c).unwrap(), 0.75);

        let rdd: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let cdd: Vec<f64> = (0..10).map(|k| k as f64 / 10.0).collect();
        let c = cal(vec![], rdd, cdd);
        assert_eq!(scr_botts_mv(-1.0, 2.0, &c).unwrap(), 1.0);
        assert_eq!(scr_botts_mv(100.0, 2.0, &c).unwrap(), 0.0);
        // Upper RDD tail 3/10, lower CDD tail 6/10.
        assert!((scr_botts_mv(7.0, 0.55, &c).unwrap() - 0.3).abs() < 1e-12);
        assert!(scr_botts_st(1.0, &c).is_err());
    }

    #[test]
    fn moments_examples() {
        let m = anom_liu_moments(69, 176, 0.05).unwrap();
        assert!((m.mean - 0.084_122_448_979_591_84).abs() < 1e-12);
        assert!((m.variance - 20.4364 / 60_025.0).abs() < 1e-12);
        let m = anom_liu_moments(40, 0, 0.05).unwrap();
        assert!((m.mean - 0.05).abs() < 1e-15);
        assert!((m.variance - 0.05 * 0.95 / 40.0).abs() < 1e-15);
        assert!(anom_liu_moments(0, 0, 0.05).is_err());
        assert!(anom_liu_moments(1, 0, 1.0).is_err());
    }

    #[test]
    fn botts_combination() {
        let c = cal(vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]);
        // Upper tail of 2.5 in {1,2,3,4} is exactly 0.5.
        let s = score_deviations("a", &[st(2.5), st(2.5)], &c).unwrap();
        assert_eq!(s.anom_botts, 0.0);
        assert_eq!(s.w_mv, None);

        // min(tail 1/3, tail 1) = 1/3 for every point.
        let s = score_deviations("b", &vec![mv(3.0, 3.0); 4], &c).unwrap();
        assert!(s.anom_botts.abs() < 1e-12);
        assert_eq!(s.w_st, None);

        let far = score_deviations("c", &vec![st(10.0); 34], &c).unwrap();
        let floor = -(12.0f64 * 34.0).sqrt() * 0.5;
        assert!((far.anom_botts - floor).abs() < 1e-12);
        assert_eq!(far.anom_liu, 1.0);

        let both = score_deviations("d", &[st(0.0), mv(100.0, 3.0)], &c).unwrap();
        let expect = (both.w_st.unwrap() + both.w_mv.unwrap()) / 2f64.sqrt();
        assert_eq!(both.anom_botts, expect);
        assert_eq!(both.anom_liu, 0.5);
        assert_eq!(both.per_point.len(), 2);

        assert!(matches!(score_deviations("e", &[], &c), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn nothing_flagged_gives_zero() {
        let c = cal(vec![1.0, 2.0, 3.0], vec![], vec![]);
        let s = score_deviations("a", &[st(0.5), st(1.5)], &c).unwrap();
        assert_eq!(s.anom_liu, 0.0);
    }

    fn arb_samples() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..10.0f64, 1..60)
    }

    proptest! {
        #[test]
        fn raising_an_add_never_helps(
            samples in arb_samples(),
            adds in prop::collection::vec(0.0..10.0f64, 1..20),
            which in any::<prop::sample::Index>(),
            bump in 0.0..5.0f64,
        ) {
            let c = cal(samples, vec![], vec![]);
            let devs: Vec<_> = adds.iter().map(|&a| st(a)).collect();
            let before = score_deviations("x", &devs, &c).unwrap();
            let mut raised = devs.clone();
            let i = which.index(raised.len());
            raised[i] = st(adds[i] + bump);
            let after = score_deviations("x", &raised, &c).unwrap();
            prop_assert!(after.anom_botts <= before.anom_botts);
            prop_assert!(after.anom_liu >= before.anom_liu);
        }

        #[test]
        fn statistics_invariant_under_increasing_transform(
            add in arb_samples(),
            rdd in arb_samples(),
            cdd_raw in arb_samples(),
            points in prop::collection::vec((any::<bool>(), 0.0..10.0f64, 0.0..10.0f64), 1..30),
        ) {
            let n = rdd.len().min(cdd_raw.len());
            let (rdd, cdd) = (rdd[..n].to_vec(), cdd_raw[..n].to_vec());
            // Slope at least 1, so distinct inputs stay distinct after rounding.
            let f = |x: f64| x + x.exp();
            let devs: Vec<_> = points.iter().map(|&(s, a, b)| if s { st(a) } else { mv(a, b - 5.0) }).collect();
            let cdd_shift: Vec<f64> = cdd.iter().map(|c| c - 5.0).collect();
            let base = cal(add.clone(), rdd.clone(), cdd_shift.clone());
            let mapped = cal(
                add.iter().map(|&x| f(x)).collect(),
                rdd.iter().map(|&x| f(x)).collect(),
                cdd_shift.iter().map(|&x| f(x)).collect(),
            );
            let devs_mapped: Vec<_> = points.iter()
                .map(|&(s, a, b)| if s { st(f(a)) } else { mv(f(a), f(b - 5.0)) })
                .collect();
            let a = score_deviations("x", &devs, &base).unwrap();
            let b = score_deviations("x", &devs_mapped, &mapped).unwrap();
            prop_assert_eq!(a.anom_liu, b.anom_liu);
            prop_assert!((a.anom_botts - b.anom_botts).abs() < 1e-12);
        }
    }
}
