use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use ais_anomaly::clustering::ClusterParams;
use ais_anomaly::ingest::{group_trajectories, parse_ais_csv, Dataset};
use ais_anomaly::metrics::{cdd_liu_metric, write_deviations_csv, TrackDeviations};
use ais_anomaly::patterns::{build_pattern_model, cluster_training_set, PatternModel, TrainingClusters};
use ais_anomaly::scoring::{
    anom_liu_moments, calibrate as calibrate_set, score_deviations, trajectory_deviations, CalibrationModel,
    TrajectoryScore, SUMMARY_HEADER,
};
use ais_anomaly::simulation::{self, SimConfig};
use ais_anomaly::{Error, MotionClass, RunInfo, FORMAT_VERSION};
use anyhow::Context;
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{CalibrateArgs, ClusterArgs, ColumnArgs, PatternsArgs, ScoreArgs, SimulateArgs};
use crate::geojson;
use crate::output::{prepare_dir, read_json, run_info, write_json, write_with};

/// Run info as a single `#` line ahead of a CSV header.
fn write_run_comment(w: &mut dyn Write, run: &RunInfo) -> anyhow::Result<()> {
    writeln!(w, "# {}", serde_json::to_string(run)?)?;
    Ok(())
}

fn config<T: Serialize>(command: &str, args: &T) -> anyhow::Result<serde_json::Value> {
    let mut v = serde_json::to_value(args)?;
    v.as_object_mut()
        .expect("args serialize to an object")
        .insert("command".into(), command.into());
    Ok(v)
}

fn load_csv(path: &Path, columns: &ColumnArgs) -> anyhow::Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let d = parse_ais_csv(BufReader::new(file), &columns.map(), &path.display().to_string())
        .with_context(|| format!("reading {}", path.display()))?;
    info!(
        "{}: {} rows, {} accepted, {} rejected",
        path.display(),
        d.provenance.total_rows,
        d.provenance.accepted,
        d.provenance.rejected
    );
    Ok(d)
}

fn load_patterns(path: &Path) -> anyhow::Result<PatternModel> {
    let m: PatternModel = read_json(path)?;
    m.check_version().with_context(|| format!("{}", path.display()))?;
    Ok(m)
}

fn write_rejections(path: &Path, run: &RunInfo, d: &Dataset) -> anyhow::Result<()> {
    write_with(path, |w| {
        write_run_comment(w, run)?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["line", "reason"])?;
        for r in &d.rejections {
            csv.write_record([r.line.to_string(), r.reason.clone()])?;
        }
        csv.flush()?;
        Ok(())
    })
}

pub fn cluster(a: &ClusterArgs) -> anyhow::Result<()> {
    let params = ClusterParams {
        eps_dist: a.eps_dist,
        eps_crs: a.eps_crs.0,
        eps_spd: a.eps_spd.0,
        n_min: a.n_min,
        course_mode: a.course_mode,
    };
    params.validate()?;
    let run = run_info(&config("cluster", a)?, &[("input", &a.input)])?;

    let d = load_csv(&a.input, &a.columns)?;
    if d.is_empty() {
        return Err(Error::EmptyDataset).with_context(|| format!("{}", a.input.display()));
    }
    let clusters = cluster_training_set(&d.points, &params)?;
    let count = |c: &Option<ais_anomaly::clustering::Clustering>| c.as_ref().map_or(0, |c| c.clusters.len());
    info!(
        "{} stationary clusters, {} moving clusters",
        count(&clusters.stationary),
        count(&clusters.moving)
    );

    prepare_dir(&a.output_dir)?;
    write_json(
        &a.output_dir.join("clusters.json"),
        &json!({
            "version": FORMAT_VERSION,
            "run": run,
            "provenance": d.provenance,
            "params": params,
            "clusters": clusters,
        }),
    )?;
    let mut gj = geojson::clusters(&clusters);
    gj["run"] = serde_json::to_value(&run)?;
    write_json(&a.output_dir.join("clusters.geojson"), &gj)?;
    write_rejections(&a.output_dir.join("rejections.csv"), &run, &d)
}

#[derive(serde::Deserialize)]
struct ClustersFile {
    version: String,
    params: ClusterParams,
    clusters: TrainingClusters,
}

pub fn patterns(a: &PatternsArgs) -> anyhow::Result<()> {
    let run = run_info(&config("patterns", a)?, &[("clusters", &a.input)])?;
    let f: ClustersFile = read_json(&a.input)?;
    if f.version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { expected: FORMAT_VERSION.into(), found: f.version })
            .with_context(|| format!("{}", a.input.display()));
    }
    let mut model = build_pattern_model(&f.clusters, &f.params, a.delta, a.seed)?;
    info!(
        "{} gravity vectors, {} sampling points",
        model.gravity_vectors.len(),
        model.sampling_points.len()
    );
    model.run = Some(run.clone());

    prepare_dir(&a.output_dir)?;
    write_json(&a.output_dir.join("patterns.json"), &model)?;
    let mut gj = geojson::patterns(&model);
    gj["run"] = serde_json::to_value(&run)?;
    write_json(&a.output_dir.join("patterns.geojson"), &gj)
}

pub fn calibrate(a: &CalibrateArgs) -> anyhow::Result<()> {
    let run = run_info(&config("calibrate", a)?, &[("input", &a.input), ("patterns", &a.patterns)])?;
    let model = load_patterns(&a.patterns)?;
    let d = load_csv(&a.input, &a.columns)?;
    if d.is_empty() {
        return Err(Error::EmptyDataset).with_context(|| format!("{}", a.input.display()));
    }
    let trajectories = group_trajectories(&d);
    let mut cal = calibrate_set(&trajectories, &model, a.alpha, model.build_params.clustering.course_mode)?;
    info!(
        "calibration samples: {} ADD, {} RDD, {} CDD",
        cal.add_samples.len(),
        cal.rdd_samples.len(),
        cal.cdd_samples.len()
    );
    cal.run = Some(run);

    prepare_dir(&a.output_dir)?;
    write_json(&a.output_dir.join("calibration.json"), &cal)
}

#[derive(Serialize)]
struct ScoreError {
    id: String,
    kind: &'static str,
    message: String,
}

#[derive(Serialize)]
struct ScoresFile<'a> {
    version: &'a str,
    run: &'a RunInfo,
    scores: &'a [TrajectoryScore],
    errors: &'a [ScoreError],
}

pub fn score(a: &ScoreArgs) -> anyhow::Result<()> {
    let run = run_info(
        &config("score", a)?,
        &[("input", &a.input), ("patterns", &a.patterns), ("calibration", &a.calibration)],
    )?;
    let model: PatternModel = read_json(&a.patterns)?;
    let cal: CalibrationModel = read_json(&a.calibration)?;
    if model.version != cal.version {
        return Err(Error::VersionMismatch { expected: model.version.clone(), found: cal.version.clone() })
            .context("pattern model and calibration model versions differ");
    }
    model.check_version().with_context(|| format!("{}", a.patterns.display()))?;
    cal.check().with_context(|| format!("{}", a.calibration.display()))?;

    let d = load_csv(&a.input, &a.columns)?;
    if d.is_empty() {
        return Err(Error::EmptyDataset).with_context(|| format!("{}", a.input.display()));
    }
    let trajectories = group_trajectories(&d);
    let mode = cal.course_mode;

    let results: Vec<_> = trajectories
        .par_iter()
        .map(|t| -> ais_anomaly::Result<(TrajectoryScore, TrackDeviations)> {
            let devs = trajectory_deviations(t, &model, mode)?;
            let score = score_deviations(&t.id, &devs, &cal)?;
            let cdd_liu = if a.cdd_liu {
                let v = t
                    .points
                    .iter()
                    .map(|p| match p.motion() {
                        MotionClass::Moving => cdd_liu_metric(p, &model, mode).map(Some),
                        MotionClass::Stationary => Ok(None),
                    })
                    .collect::<ais_anomaly::Result<Vec<_>>>()?;
                Some(v)
            } else {
                None
            };
            Ok((score, TrackDeviations { id: t.id.clone(), points: devs, cdd_liu }))
        })
        .collect();

    let mut scores = Vec::new();
    let mut deviations = Vec::new();
    let mut errors = Vec::new();
    for (t, r) in trajectories.iter().zip(results) {
        match r {
            Ok((s, dv)) => {
                scores.push(s);
                deviations.push(dv);
            }
            Err(e) => {
                log::warn!("trajectory {}: {e}", t.id);
                errors.push(ScoreError { id: t.id.clone(), kind: e.kind(), message: e.to_string() });
            }
        }
    }
    info!("scored {} trajectories, {} errors", scores.len(), errors.len());

    // Most anomalous first; ties broken by id for a stable order.
    let mut ranked: Vec<&TrajectoryScore> = scores.iter().collect();
    ranked.sort_by(|x, y| x.anom_botts.total_cmp(&y.anom_botts).then_with(|| x.id.cmp(&y.id)));

    prepare_dir(&a.output_dir)?;
    write_json(
        &a.output_dir.join("scores.json"),
        &ScoresFile { version: FORMAT_VERSION, run: &run, scores: &scores, errors: &errors },
    )?;
    write_with(&a.output_dir.join("scores.csv"), |w| {
        write_run_comment(w, &run)?;
        let mut csv = csv::Writer::from_writer(w);
        let mut header = SUMMARY_HEADER.to_vec();
        header.push("error");
        csv.write_record(&header)?;
        for s in ranked {
            let mut row = s.summary_record().to_vec();
            row.push(String::new());
            csv.write_record(&row)?;
        }
        for e in &errors {
            let mut row = vec![String::new(); SUMMARY_HEADER.len() + 1];
            row[0] = e.id.clone();
            row[SUMMARY_HEADER.len()] = e.message.clone();
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    write_with(&a.output_dir.join("deviations.csv"), |w| {
        write_run_comment(w, &run)?;
        write_deviations_csv(&deviations, w)?;
        Ok(())
    })
}

pub fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let mut inputs: Vec<(&str, &Path)> = Vec::new();
    let mut cfg = match (&a.preset, &a.config) {
        (Some(name), _) => SimConfig::preset(name, a.seed)?,
        (None, Some(path)) => {
            inputs.push(("config", path));
            let mut c: SimConfig = read_json(path)?;
            c.seed = a.seed;
            c
        }
        (None, None) => unreachable!("clap requires --preset or --config"),
    };
    if let Some(n) = a.replications {
        cfg.replications = n;
    }
    cfg.validate()?;
    let run = run_info(&config("simulate", a)?, &inputs)?;

    info!("simulating {} replications", cfg.replications);
    let result = simulation::simulate_t1(&cfg, a.alpha)?;
    let expected_liu = anom_liu_moments(cfg.m_st, cfg.m_mv, a.alpha)?;

    prepare_dir(&a.output_dir)?;
    write_with(&a.output_dir.join("t2_samples.csv"), |w| {
        write_run_comment(w, &run)?;
        simulation::write_samples_csv(&result, w)?;
        Ok(())
    })?;
    write_with(&a.output_dir.join("qq_pairs.csv"), |w| {
        write_run_comment(w, &run)?;
        simulation::write_qq_csv(&result, w)?;
        Ok(())
    })?;
    write_json(
        &a.output_dir.join("summary.json"),
        &json!({
            "version": FORMAT_VERSION,
            "run": run,
            "config": result.config,
            "alpha": a.alpha,
            "t2": result.summary,
            "t1": result.t1_summary,
            "t1_expected": expected_liu,
            "qq_correlation": result.qq_correlation,
            "ks_stat": result.ks_stat,
            "ks_critical_1pct": simulation::ks_critical_1pct(cfg.replications),
        }),
    )
}
