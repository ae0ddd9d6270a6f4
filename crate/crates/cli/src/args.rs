use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use ultralif::neurons::NeuronKind;

#[derive(Debug, Parser)]
#[command(
    name = "ultralif",
    version,
    about = "Ultradiscretized spiking networks: train, check, analyze"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Train one model and write metrics, summary, checkpoints and a manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Finite-difference check of the full-network gradient on the micro-net.
    Gradcheck(GradcheckArgs),
    /// Train with several fixed temperatures and optionally a learned one.
    AblateEps(AblateArgs),
    /// Tropical-limit geometry and energy reports.
    Analyze {
        #[command(subcommand)]
        analysis: Analysis,
    },
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "analysis", rename_all = "kebab-case")]
pub enum Analysis {
    /// Region count of a single hidden layer against R(h, n).
    Regions(RegionsArgs),
    /// Zonotope volume and general-position diagnostics.
    Zonotope(ZonotopeArgs),
    /// T-step spike-sequence count against R(h, n)^T.
    Temporal(TemporalArgs),
    /// Energy proxy T * mean spike rate.
    Energy(EnergyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetArg {
    Mnist,
    /// Two Gaussian blobs in the plane, for smoke runs.
    Blobs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingArg {
    Rate,
    Analog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetArg {
    /// theta - b: boundaries of the first-step spike.
    Spike,
    /// ln tau0 - b: kinks of the membrane map.
    Membrane,
}

fn parse_kind(s: &str) -> Result<NeuronKind, String> {
    s.parse().map_err(|e: ultralif::Error| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DataArgs {
    #[arg(long, value_enum, default_value_t = DatasetArg::Mnist)]
    pub dataset: DatasetArg,
    /// Directory holding the MNIST IDX files (plain or gzipped).
    #[arg(long, env = "ULTRALIF_DATA")]
    pub data_dir: Option<PathBuf>,
    /// Use the first N training samples.
    #[arg(long)]
    pub subset: Option<usize>,
    /// Use the first N test samples (default: subset / 4).
    #[arg(long)]
    pub test_subset: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, value_parser = parse_kind)]
    pub model: NeuronKind,
    #[arg(long, default_value_t = 1)]
    pub timesteps: usize,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub hidden: Vec<usize>,
}

/// Optimizer settings. Unset flags fall back to `--config`, then defaults.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainOpts {
    /// TOML file with TrainConfig keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hold epsilon fixed at this value instead of learning it.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    pub encoding: Option<EncodingArg>,
    #[arg(long)]
    pub gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub opts: TrainOpts,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Heaviside spikes in the forward pass (ultradiscretized kinds only).
    #[arg(long)]
    pub hard_spikes: bool,
    #[arg(long, value_enum, default_value_t = EncodingArg::Rate)]
    pub encoding: EncodingArg,
    #[arg(long, default_value_t = ultralif::encoding::DEFAULT_GAIN)]
    pub gain: f64,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GradcheckArgs {
    #[arg(long, value_parser = parse_kind)]
    pub model: NeuronKind,
    #[arg(long, default_value_t = 1e-5)]
    pub fd_step: f64,
    /// Failure threshold on the largest relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AblateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub opts: TrainOpts,
    /// Fixed temperatures, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub fixed: Vec<f64>,
    /// Also train with a learned temperature.
    #[arg(long)]
    pub learned: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LayerSource {
    /// Hidden width of the random layer.
    #[arg(long, default_value_t = 3)]
    pub hidden: usize,
    /// Input dimension of the random layer.
    #[arg(long, default_value_t = 2)]
    pub inputs: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Take the first hidden layer of this checkpoint instead.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OffsetArg::Spike)]
    pub offsets: OffsetArg,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RegionsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub layer: LayerSource,
    /// Grid cells per axis when the count is sampled.
    #[arg(long, default_value_t = 400)]
    pub resolution: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ZonotopeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub layer: LayerSource,
    /// Monte Carlo samples for the membership estimate (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TemporalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub layer: LayerSource,
    #[arg(long, default_value_t = 2)]
    pub timesteps: usize,
    #[arg(long, default_value_t = 400)]
    pub resolution: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EnergyArgs {
    /// summary.json of a training run.
    #[arg(long, conflicts_with_all = ["rate", "timesteps"])]
    pub summary: Option<PathBuf>,
    #[arg(long, requires = "timesteps")]
    pub rate: Option<f64>,
    #[arg(long, requires = "rate")]
    pub timesteps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Output directory (default: the manifest's directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn set_out(&mut self, out: Option<PathBuf>) {
        let slot = match self {
            Command::Train(a) => &mut a.out,
            Command::Eval(a) => &mut a.out,
            Command::Gradcheck(a) => &mut a.out,
            Command::AblateEps(a) => &mut a.out,
            Command::Analyze { analysis } => match analysis {
                Analysis::Regions(a) => &mut a.out,
                Analysis::Zonotope(a) => &mut a.out,
                Analysis::Temporal(a) => &mut a.out,
                Analysis::Energy(a) => &mut a.out,
            },
            Command::Replay(a) => &mut a.out,
        };
        *slot = out;
    }
}
