use std::path::PathBuf;
use std::str::FromStr;

use ais_anomaly::ingest::ColumnMap;
use ais_anomaly::CourseMode;
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ais-anomaly", version, about = "Maritime traffic pattern mining and trajectory anomaly scoring")]
pub struct Cli {
    /// Worker threads for parallel stages [default: available cores].
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a training CSV: DBSCAN on stationary reports, DBSCANSD on moving ones.
    Cluster(ClusterArgs),
    /// Summarize clusters into gravity vectors and stationary sampling points.
    Patterns(PatternsArgs),
    /// Collect deviation samples and thresholds from a held-out CSV.
    Calibrate(CalibrateArgs),
    /// Score every trajectory in a CSV.
    Score(ScoreArgs),
    /// Monte Carlo of both statistics under the null.
    Simulate(SimulateArgs),
}

/// A threshold that may be switched off with `none`.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(transparent)]
pub struct Limit(pub Option<f64>);

impl FromStr for Limit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" | "unlimited" => Ok(Limit(None)),
            _ => s.parse().map(|v| Limit(Some(v))).map_err(|e| format!("{e}: expected a number or `none`")),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ColumnArgs {
    #[arg(long, default_value = "MMSI")]
    pub col_id: String,
    #[arg(long, default_value = "BaseDateTime")]
    pub col_time: String,
    #[arg(long, default_value = "LAT")]
    pub col_lat: String,
    #[arg(long, default_value = "LON")]
    pub col_lon: String,
    #[arg(long, default_value = "SOG")]
    pub col_sog: String,
    #[arg(long, default_value = "COG")]
    pub col_cog: String,
}

impl ColumnArgs {
    pub fn map(&self) -> ColumnMap {
        ColumnMap {
            vessel_id: self.col_id.clone(),
            timestamp: self.col_time.clone(),
            lat: self.col_lat.clone(),
            lon: self.col_lon.clone(),
            speed: self.col_sog.clone(),
            course: self.col_cog.clone(),
        }
    }
}

// `output_dir` never enters the serialized config.

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    /// Training AIS CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub output_dir: PathBuf,
    /// Spatial radius in degrees.
    #[arg(long, default_value_t = 0.02)]
    pub eps_dist: f64,
    /// Course bound in degrees, or `none`.
    #[arg(long, default_value = "90")]
    pub eps_crs: Limit,
    /// Speed bound in knots, or `none`.
    #[arg(long, default_value = "2.5")]
    pub eps_spd: Limit,
    #[arg(long, default_value_t = 5)]
    pub n_min: usize,
    /// `plain` or `circular`.
    #[arg(long, default_value = "circular")]
    pub course_mode: CourseMode,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PatternsArgs {
    /// clusters.json from the cluster stage.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub output_dir: PathBuf,
    /// Band width along the mean course, degrees.
    #[arg(long, default_value_t = 0.02)]
    pub delta: f64,
    /// Seed for stationary sampling.
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    /// Held-out AIS CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// patterns.json from the patterns stage.
    #[arg(long)]
    pub patterns: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub output_dir: PathBuf,
    /// Tail probability for the thresholds.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    /// AIS CSV of trajectories to score.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub patterns: PathBuf,
    /// calibration.json from the calibrate stage.
    #[arg(long)]
    pub calibration: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub output_dir: PathBuf,
    /// Add the location-blind CDD variant to deviations.csv.
    #[arg(long)]
    pub cdd_liu: bool,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["preset", "config"])))]
pub struct SimulateArgs {
    /// fig8, fig9, fig10 or fig11.
    #[arg(long)]
    pub preset: Option<String>,
    /// SimConfig JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Overrides the preset or config replication count.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Tail probability for the threshold-count statistic.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    #[serde(skip)]
    pub output_dir: PathBuf,
}
