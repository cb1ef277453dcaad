use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcscan::{CiMethod, DiffMethod, Scenario, ThresholdKind, ThresholdPolicy, Trimming, Tuning, DEFAULT_C_PI};

#[derive(Debug, Parser)]
#[command(name = "mcscan", version, about = "Change point detection and inference for high-dimensional regression")]
pub struct Cli {
    /// Worker threads for every parallel stage.
    #[arg(long, env = "MCSCAN_THREADS", global = true)]
    pub threads: Option<usize>,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect change points.
    Detect(DetectArgs),
    /// Print the solution path and its elbow.
    Path(PathArgs),
    /// Estimate the parameter change at each change point.
    Estimate(EstimateArgs),
    /// Confidence bands for the parameter changes.
    Infer(InferArgs),
    /// Generate scenario data and evaluate detection on it.
    Simulate(SimulateArgs),
    /// Time detection over a grid of sizes.
    Bench(BenchArgs),
}

/// `auto`, `fixed:<value>`, `default` or `default:<c>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdArg(pub ThresholdKind);

impl FromStr for ThresholdArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let number = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| format!("expected a nonnegative number, got '{v}'"))
        };
        let kind = match s.split_once(':') {
            None if s == "auto" => ThresholdKind::Automatic,
            None if s == "default" => ThresholdKind::DefaultFixed { c_pi: DEFAULT_C_PI },
            Some(("fixed", v)) => ThresholdKind::Fixed(number(v)?),
            Some(("default", v)) => ThresholdKind::DefaultFixed { c_pi: number(v)? },
            _ => return Err(format!("expected auto, fixed:<v>, default or default:<c>, got '{s}'")),
        };
        Ok(Self(kind))
    }
}

/// `default` or a nonnegative number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimArg(pub Trimming);

impl FromStr for TrimArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "default" {
            return Ok(Self(Trimming::Default));
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(Self(Trimming::Value(v))),
            _ => Err(format!("expected 'default' or a nonnegative number, got '{s}'")),
        }
    }
}

/// `cv` or a nonnegative number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningArg(pub Tuning);

impl FromStr for TuningArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "cv" {
            return Ok(Self(Tuning::CrossValidated));
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(Self(Tuning::Fixed(v))),
            _ => Err(format!("expected 'cv' or a nonnegative number, got '{s}'")),
        }
    }
}

/// Comma separated list of positive integers (possibly empty).
#[derive(Debug, Clone, PartialEq)]
pub struct IndexList(pub Vec<usize>);

impl FromStr for IndexList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| v.parse::<usize>().map_err(|_| format!("expected an integer, got '{v}'")))
            .collect::<Result<_, _>>()
            .map(Self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lope,
    Clom,
    Naive,
}

impl From<MethodArg> for DiffMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lope => DiffMethod::Lope,
            MethodArg::Clom => DiffMethod::Clom,
            MethodArg::Naive => DiffMethod::Naive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CiArg {
    Gauss,
    Boot,
}

impl From<CiArg> for CiMethod {
    fn from(c: CiArg) -> Self {
        match c {
            CiArg::Gauss => CiMethod::GaussianLimit,
            CiArg::Boot => CiMethod::MultiplierBootstrap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    M1,
    M2,
    M3,
    Custom,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::M1 => Scenario::M1,
            ScenarioArg::M2 => Scenario::M2,
            ScenarioArg::M3 => Scenario::M3,
            ScenarioArg::Custom => Scenario::Custom,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectOpts {
    /// auto, fixed:<v>, default or default:<c>.
    #[arg(long, default_value = "default")]
    pub threshold: ThresholdArg,

    /// Trimming: default or a number.
    #[arg(long, default_value = "default")]
    pub trim: TrimArg,

    /// Divide each regressor by the MAD of its differenced products with y.
    #[arg(long)]
    pub standardize: bool,
}

impl DetectOpts {
    pub fn policy(&self) -> ThresholdPolicy {
        ThresholdPolicy {
            kind: self.threshold.0,
            trim: self.trim.0,
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// CSV or TSV: response in the first column, regressors after it.
    #[arg(long)]
    pub input: PathBuf,

    #[command(flatten)]
    pub detect: DetectOpts,

    /// Single change point mode (argmax over the whole sample).
    #[arg(long)]
    pub single: bool,

    /// Long-format table of the full-sample detector profile and the peaks.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, default_value = "default")]
    pub trim: TrimArg,

    #[arg(long)]
    pub standardize: bool,

    /// Long-format table of score against number of change points.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,

    /// Known change points (comma separated); detected when absent.
    #[arg(long)]
    pub change_points: Option<IndexList>,

    #[command(flatten)]
    pub detect: DetectOpts,

    #[arg(long, value_enum, default_value = "lope")]
    pub method: MethodArg,

    /// cv or a fixed value.
    #[arg(long, default_value = "cv")]
    pub lambda: TuningArg,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long)]
    pub change_points: Option<IndexList>,

    #[command(flatten)]
    pub detect: DetectOpts,

    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,

    /// Monte Carlo replicates.
    #[arg(long = "B", default_value_t = 999)]
    pub replicates: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Estimate on even rows and build bands on odd rows.
    #[arg(long)]
    pub split: bool,

    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,

    #[arg(long, value_enum, default_value = "boot")]
    pub ci: CiArg,

    #[arg(long, default_value = "cv")]
    pub lambda: TuningArg,

    #[arg(long, default_value = "cv")]
    pub eta: TuningArg,

    /// Long-format table of every band.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario config file (key = value); flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,

    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long)]
    pub p: Option<usize>,

    #[arg(long)]
    pub change_points: Option<IndexList>,

    #[arg(long)]
    pub rho: Option<f64>,

    #[arg(long)]
    pub sparsity: Option<usize>,

    #[arg(long)]
    pub gamma: Option<f64>,

    #[arg(long)]
    pub nu: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, default_value_t = 1)]
    pub reps: u64,

    /// Directory receiving one dataset and one truth file per repetition.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,

    #[command(flatten)]
    pub detect: DetectOpts,

    /// Also build bands at the true change points and report their metrics.
    #[arg(long)]
    pub infer: bool,

    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,

    #[arg(long = "B", default_value_t = 499)]
    pub replicates: usize,

    #[arg(long, value_enum, default_value = "boot")]
    pub ci: CiArg,

    #[arg(long)]
    pub split: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "500,1000,2000")]
    pub n: IndexList,

    #[arg(long, default_value = "50,200")]
    pub p: IndexList,

    #[arg(long, default_value_t = 3)]
    pub reps: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_forms() {
        assert_eq!("auto".parse::<ThresholdArg>().unwrap().0, ThresholdKind::Automatic);
        assert_eq!("fixed:2.5".parse::<ThresholdArg>().unwrap().0, ThresholdKind::Fixed(2.5));
        assert_eq!(
            "default:1.5".parse::<ThresholdArg>().unwrap().0,
            ThresholdKind::DefaultFixed { c_pi: 1.5 }
        );
        assert!("fixed:-1".parse::<ThresholdArg>().is_err());
        assert!("sometimes".parse::<ThresholdArg>().is_err());
    }

    #[test]
    fn lists_and_tuning() {
        assert_eq!("120, 240,360".parse::<IndexList>().unwrap().0, vec![120, 240, 360]);
        assert!("".parse::<IndexList>().unwrap().0.is_empty());
        assert!("1,x".parse::<IndexList>().is_err());
        assert_eq!("cv".parse::<TuningArg>().unwrap().0, Tuning::CrossValidated);
        assert_eq!("0.5".parse::<TuningArg>().unwrap().0, Tuning::Fixed(0.5));
        assert_eq!("4".parse::<TrimArg>().unwrap().0, Trimming::Value(4.0));
    }
}
