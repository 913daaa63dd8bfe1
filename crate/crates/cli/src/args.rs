use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "snn-dlbp", version, about = "Spiking dictionary learning and sparse coding experiments")]
pub struct Cli {
    /// Seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Network configuration file (flat key = value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for data-parallel stages; 1 runs sequentially.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect, analyse and generate event files.
    #[command(subcommand)]
    Events(EventsCmd),
    /// Single push-pull neuron experiments.
    #[command(subcommand)]
    Neuron(NeuronCmd),
    /// Exact versus rate-model STDP.
    #[command(subcommand)]
    Stdp(StdpCmd),
    /// Run the network on one event file.
    Simulate(SimulateArgs),
    /// Cross-check the reference LASSO solvers.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Design procedures: kernel matching, threshold pursuit, spectra.
    #[command(subcommand)]
    Tune(TuneCmd),
    /// Turn event files into descriptor rows.
    Encode(EncodeArgs),
    /// Fit and evaluate the linear readout on feature CSVs.
    Classify(ClassifyArgs),
    /// Power estimate from activity counts.
    Power(PowerArgs),
    /// Learn a dictionary with STDP and inner-loss termination.
    Train(TrainArgs),
    /// Encode, classify and estimate power from an experiment file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Subcommand)]
pub enum EventsCmd {
    /// Summary of an event file.
    Info { file: PathBuf },
    /// Windowed DFT of one pixel's spike train.
    Spectrum {
        file: PathBuf,
        /// Pixel as `x,y`.
        #[arg(long)]
        pixel: String,
        #[arg(long, default_value_t = snn_dlbp::DEFAULT_DT)]
        dt: f64,
        /// Seconds to analyse; defaults to the stream's span.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value = "spectrum.csv")]
        out: PathBuf,
    },
    /// Write a synthetic dataset directory.
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::Bars)]
        kind: SynthKind,
        /// Samples per class for bars, total samples for sparse.
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Seconds per sample.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value = "dataset")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Two classes of 16x16 bar patterns, with labels.
    Bars,
    /// 32-channel signals from a known dictionary and 4-sparse codes.
    Sparse,
}

#[derive(Debug, Subcommand)]
pub enum NeuronCmd {
    /// Signed rate against constant input current.
    ProxCurve {
        #[arg(long, default_value_t = 0.25)]
        mu: f64,
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        jmin: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        jmax: f64,
        #[arg(long, default_value_t = 81)]
        steps: usize,
        #[arg(long, default_value_t = 50.0)]
        duration: f64,
        #[arg(long, default_value_t = snn_dlbp::DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value = "curve.csv")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum StdpCmd {
    /// Scatter of pairwise against rate-model weight changes.
    Compare {
        #[arg(long, default_value_t = 300)]
        steps: usize,
        /// Grid size; must be a perfect square.
        #[arg(long, default_value_t = 10_000)]
        synapses: usize,
        #[arg(long, default_value_t = snn_dlbp::DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 0.003)]
        eta2: f64,
        /// Active trains per side.
        #[arg(long, default_value_t = 2)]
        active: usize,
        #[arg(long, default_value_t = 40.0)]
        rate_lo: f64,
        #[arg(long, default_value_t = 100.0)]
        rate_hi: f64,
        #[arg(long, default_value = "scatter.csv")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub events: PathBuf,
    /// Weight checkpoint; without it weights are drawn from the init bound.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub burn_in: f64,
    #[arg(long)]
    pub learn: bool,
    #[arg(long)]
    pub learn_window: Option<f64>,
    /// Windowed rates and inner loss per record window.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Activity counts consumed by `power`.
    #[arg(long, default_value = "activity.csv")]
    pub activity: PathBuf,
    /// Write the weights after the run.
    #[arg(long)]
    pub save_weights: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum OracleCmd {
    /// ISTA against coordinate descent on random instances.
    Check {
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        m: usize,
        #[arg(long, default_value_t = 0.25)]
        lambda1: f64,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value = "oracle.csv")]
        report: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum TuneCmd {
    /// Kernel parameters whose zero cancels the slow pole.
    Kernel {
        #[arg(long, default_value_t = 0.008)]
        tau_minus: f64,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        a_plus: f64,
    },
    /// AICc sweep over coding thresholds.
    Threshold {
        /// Dataset directory; the first `minibatch` files are used.
        #[arg(long)]
        events: PathBuf,
        /// `lo:hi:count`, log-spaced.
        #[arg(long, default_value = "0.05:0.8:12")]
        grid: String,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        minibatch: usize,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.5)]
        burn_in: f64,
        /// Keep the error layer at this threshold while sweeping.
        #[arg(long)]
        error_mu: Option<f64>,
        #[arg(long, default_value = "aicc.csv")]
        out: PathBuf,
    },
    /// Magnitude response of an STDP kernel.
    Spectrum {
        #[arg(long, default_value_t = 0.0208)]
        tau_plus: f64,
        #[arg(long, default_value_t = 0.008)]
        tau_minus: f64,
        #[arg(long, default_value_t = 1.0)]
        a_plus: f64,
        #[arg(long, default_value_t = 0.8)]
        a_minus: f64,
        /// Highest angular frequency, rad/s; defaults to 1/tau_minus.
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value = "spectrum.csv")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Global,
    Action,
    Conv,
}

#[derive(Debug, Clone, Args)]
pub struct ConvArgs {
    #[arg(long, default_value_t = 8)]
    pub patch_w: usize,
    #[arg(long, default_value_t = 8)]
    pub patch_h: usize,
    #[arg(long, default_value_t = 4)]
    pub stride: usize,
    /// Pyramid scales, comma separated.
    #[arg(long, default_value = "1,2,4")]
    pub scales: String,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long, value_enum, default_value_t = Mode::Global)]
    pub mode: Mode,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Event file or dataset directory.
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub burn_in: f64,
    #[command(flatten)]
    pub conv: ConvArgs,
    #[arg(long, default_value = "features.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub reg: f64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub report: ReportFormat,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Activity CSV written by `simulate`; rows are summed.
    #[arg(long)]
    pub trace: PathBuf,
    /// Hardware constants; defaults apply to missing keys.
    #[arg(long)]
    pub hw: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub events: PathBuf,
    /// Initial weights; without it they are drawn from the init bound.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Seconds per presentation; defaults to the longest stream.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub burn_in: f64,
    #[arg(long)]
    pub learn_window: Option<f64>,
    /// Stop-rule threshold; defaults to one spike per measured window.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub n_eps: usize,
    #[arg(long, default_value = "weights.snnw")]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "loss.csv")]
    pub loss: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Experiment file (TOML).
    pub experiment: PathBuf,
    /// Validate the experiment and its inputs without writing anything.
    #[arg(long)]
    pub dry_run: bool,
}
