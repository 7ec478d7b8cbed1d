//! Experiment configuration. Every subcommand's flags double as a JSON
//! block, so a run can be reproduced from the config echoed in its outputs.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use indegree_core::calibration::CalibrationTarget;
use indegree_core::TesterMode;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "indegree",
    version,
    about = "Test the maximum in-degree of Bayes nets on {0,1}^n"
)]
pub struct Cli {
    /// Run the experiment described by a JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory for all output files.
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Draw ancestral samples from a model file.
    Sample(SampleArgs),
    /// Identify the support and learn a net on a graph.
    Learn(LearnArgs),
    /// Test a fixed graph, or every graph of bounded in-degree.
    Test(TestArgs),
    /// Minimax risk experiment on the hard star family.
    Minimax(MinimaxArgs),
    /// High-probability chi-square risk of the add-K estimator.
    Risk(RiskArgs),
    /// Support identification alone.
    Support(SupportArgs),
    /// Exact divergences between two model files.
    Distances(DistancesArgs),
    /// Re-run a calibration protocol.
    Calibrate(CalibrateArgs),
    /// List every graph of in-degree at most d.
    EnumerateDags(EnumerateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Learn(_) => "learn",
            Command::Test(_) => "test",
            Command::Minimax(_) => "minimax",
            Command::Risk(_) => "risk",
            Command::Support(_) => "support",
            Command::Distances(_) => "distances",
            Command::Calibrate(_) => "calibrate",
            Command::EnumerateDags(_) => "enumerate-dags",
        }
    }
}

/// `Default` for an argument block is whatever clap produces from no flags,
/// so config files and the command line share one set of defaults.
macro_rules! clap_default {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                let cmd = <$t as Args>::augment_args(clap::Command::new("defaults"));
                let matches = cmd.get_matches_from(["defaults"]);
                <$t as clap::FromArgMatches>::from_arg_matches(&matches).expect("argument defaults parse")
            }
        }
    )*};
}

clap_default!(
    LearnerArgs,
    SampleArgs,
    LearnArgs,
    TestArgs,
    MinimaxArgs,
    RiskArgs,
    SupportArgs,
    DistancesArgs,
    CalibrateArgs,
    EnumerateArgs
);

/// Learner constants.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerArgs {
    /// Accuracy parameter ε.
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    /// Support threshold constant c.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Support-identification sample multiplier.
    #[arg(long, default_value_t = 3.0)]
    pub m1_mult: f64,
    /// Learning sample multiplier.
    #[arg(long, default_value_t = 4.0)]
    pub m2_mult: f64,
    /// Smoothing K (default ⌈ln(6 · 2^(d+1) n)⌉).
    #[arg(long)]
    pub k: Option<f64>,
    /// Degree bound d used in the sample sizes (default: the graph's in-degree).
    #[arg(long)]
    pub degree: Option<usize>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleArgs {
    /// Model file (net or dense distribution).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of samples.
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnArgs {
    /// Source distribution to sample from (net or dense).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Graph to learn on (defaults to the truth's graph).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerArgs,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestArgs {
    /// Graph to test; its CPTs serve as the truth when --truth is absent.
    #[arg(long, conflicts_with = "all_degree")]
    pub graph: Option<PathBuf>,
    /// Test every graph of in-degree at most this value.
    #[arg(long)]
    pub all_degree: Option<usize>,
    /// Source distribution to sample from (net or dense).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = "hellinger", value_parser = parse_mode)]
    pub mode: TesterMode,
    /// Threshold multiplier (default: committed calibration).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Testing-stage sample multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub m_mult: f64,
    /// Amplification constant for --all-degree.
    #[arg(long, default_value_t = 2.0)]
    pub c_amp: f64,
    #[command(flatten)]
    pub learner: LearnerArgs,
}

fn parse_mode(s: &str) -> Result<TesterMode, String> {
    s.parse().map_err(|e: indegree_core::Error| e.to_string())
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Ignorant,
    Addk,
    Nearproper,
    Empirical,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimaxArgs {
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Samples per trial (default ⌊2^(n/2) / (4ε)⌋).
    #[arg(long)]
    pub m: Option<usize>,
    /// Parent bias (default 2ε / 2^(n/2)).
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = LearnerKind::Addk)]
    pub learner: LearnerKind,
    /// Smoothing for the add-K learner.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskTarget {
    Uniform,
    Geometric,
    TwoLevel,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskArgs {
    #[arg(long, value_enum, default_value_t = RiskTarget::Uniform)]
    pub target: RiskTarget,
    /// Dense distribution file; overrides --target.
    #[arg(long)]
    pub target_file: Option<PathBuf>,
    /// Alphabet size of the built-in targets.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Samples per trial (default ⌈C (|Σ|/ε) ln(|Σ|/δ)⌉).
    #[arg(long)]
    pub n_samples: Option<u64>,
    /// Sample-size constant C (default: committed calibration).
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Smoothing K (default ⌈c_K ln(1/δ)⌉).
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c_k: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Exceedance bound multiple (default C).
    #[arg(long)]
    pub bound_mult: Option<f64>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupportArgs {
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerArgs,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistancesArgs {
    #[arg(long)]
    pub p: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<PathBuf>,
    /// Mask file on q's graph; adds restricted divergences.
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateArgs {
    #[arg(long, default_value = "gamma", value_parser = parse_target)]
    pub target: CalibrationTarget,
    /// Runs (default: the budget of the committed values).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Constants file to update in place with the new record.
    #[arg(long)]
    pub update: Option<PathBuf>,
}

fn parse_target(s: &str) -> Result<CalibrationTarget, String> {
    s.parse().map_err(|e: indegree_core::Error| e.to_string())
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnumerateArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
}
