use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use adaffect::data::Attribute;
use adaffect::media::TemporalWindow;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "adaffect", version, about = "Affect recognition and ad scheduling toolkit")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// JSON file overriding algorithm settings, keyed by section
    /// (cnn, mtl, shallow, svm_grid, cv, fusion, ga, preprocess, audio,
    /// video, stft, quadrant, eeg).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inter-rater agreement statistics from a ratings CSV or manifest.
    Agreement(AgreementArgs),
    /// Audio or video descriptors, or an audio spectrogram.
    ExtractAv(ExtractArgs),
    /// Filter, window, vectorize and reduce a directory of EEG epochs.
    PreprocessEeg(PreprocessArgs),
    /// Fit a classifier on a feature CSV and save it.
    Train(TrainArgs),
    /// Cross-validate a model family, or score a feature CSV with a saved model.
    Evaluate(EvaluateArgs),
    /// Weighted fusion of two posterior files.
    Fuse(FuseArgs),
    /// Ad-level arousal and valence scores from segment posteriors.
    ScoreAds(ScoreAdsArgs),
    /// Place ads at scene transitions.
    Schedule(ScheduleArgs),
    /// Write synthetic data in the formats the other subcommands read.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttributeArg {
    Valence,
    Arousal,
}

impl From<AttributeArg> for Attribute {
    fn from(a: AttributeArg) -> Self {
        match a {
            AttributeArg::Valence => Attribute::Valence,
            AttributeArg::Arousal => Attribute::Arousal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    All,
    First30,
    Last30,
    Last10,
}

impl From<WindowArg> for TemporalWindow {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::All => TemporalWindow::All,
            WindowArg::First30 => TemporalWindow::First30,
            WindowArg::Last30 => TemporalWindow::Last30,
            WindowArg::Last10 => TemporalWindow::Last10,
        }
    }
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Ratings CSV (`rater_id,item_id,attribute,score`).
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    pub ratings: Option<PathBuf>,
    /// Manifest whose header names the ratings CSV; enables expert Cohen kappa.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Restrict to one attribute.
    #[arg(long, value_enum)]
    pub attribute: Option<AttributeArg>,
    /// Also write the statistics to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AvOutput {
    Descriptors,
    Spectrogram,
    Keyframes,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// WAV input.
    #[arg(long, conflicts_with = "frames", required_unless_present = "frames")]
    pub audio: Option<PathBuf>,
    /// Directory of `frame_NNNNNN.ppm` files with an `fps.txt` sidecar.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "descriptors")]
    pub output: AvOutput,
    /// Temporal window applied to descriptor series.
    #[arg(long, value_enum, default_value = "all")]
    pub window: WindowArg,
    /// Keyframe period in seconds.
    #[arg(long, default_value_t = 3.0)]
    pub keyframe_period: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Directory of EEG binaries (`*.bin`) with JSON sidecars.
    #[arg(long)]
    pub input: PathBuf,
    /// CSV `stimulus_id,label,quadrant` giving each epoch's class.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum, default_value = "first30")]
    pub window: WindowArg,
    /// Variance fraction kept by PCA; 0 disables PCA.
    #[arg(long, default_value_t = 0.9)]
    pub retain: f64,
    /// Drop epochs not flagged clean.
    #[arg(long)]
    pub clean_only: bool,
    /// Feature CSV output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Lda,
    LinearSvm,
    RbfSvm,
    Mtl,
    Cnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssignmentArg {
    /// Use each item's quadrant column.
    Known,
    /// Use the task with the most confident score.
    MaxScore,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// How MTL maps an item to a task at prediction time.
    #[arg(long, value_enum, default_value = "max-score")]
    pub assignment: AssignmentArg,
    /// Skip the inner SVM hyperparameter search.
    #[arg(long)]
    pub no_grid: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature CSV.
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model document output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Feature CSV.
    #[arg(long)]
    pub features: PathBuf,
    /// Model family to cross-validate.
    #[arg(long, value_enum, conflicts_with = "trained", required_unless_present = "trained")]
    pub model: Option<ModelKind>,
    #[arg(long, value_enum, default_value = "max-score")]
    pub assignment: AssignmentArg,
    #[arg(long)]
    pub no_grid: bool,
    /// Saved model; writes posteriors instead of a CV report.
    #[arg(long)]
    pub trained: Option<PathBuf>,
    /// Repetitions of k-fold cross-validation.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Setting label written in the report's first column.
    #[arg(long)]
    pub setting: Option<String>,
    /// Permute labels before evaluation.
    #[arg(long)]
    pub shuffle_labels: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Posteriors of modality 1 on the evaluation items.
    #[arg(long)]
    pub p1: PathBuf,
    /// Posteriors of modality 2 on the evaluation items.
    #[arg(long)]
    pub p2: PathBuf,
    /// Training F1 of modality 1.
    #[arg(long)]
    pub f1: f64,
    /// Training F1 of modality 2.
    #[arg(long)]
    pub f2: f64,
    /// Fixed weights `a1,a2`; otherwise they are tuned by grid search.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Modality 1 posteriors on the tuning items.
    #[arg(long, requires_all = ["tune_p2", "tune_truth"])]
    pub tune_p1: Option<PathBuf>,
    #[arg(long)]
    pub tune_p2: Option<PathBuf>,
    /// Feature CSV carrying the tuning items' true labels.
    #[arg(long)]
    pub tune_truth: Option<PathBuf>,
    /// Tune on the evaluation items themselves (optimistic).
    #[arg(long, requires = "truth")]
    pub leaky: bool,
    /// Feature CSV carrying the evaluation items' true labels.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreAdsArgs {
    /// Arousal posteriors; item ids of the form `ad` or `ad:segment`.
    #[arg(long)]
    pub arousal: PathBuf,
    /// Valence posteriors with the same id convention.
    #[arg(long)]
    pub valence: PathBuf,
    /// Keep raw mean posteriors instead of min-max normalizing.
    #[arg(long)]
    pub no_normalize: bool,
    /// JSON array of `{id, asl, val}`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    Ga,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnchorArg {
    Preceding,
    Following,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// JSON array of scenes `{id, asl, val}` in program order.
    #[arg(long)]
    pub scenes: PathBuf,
    /// JSON array of ads `{id, asl, val}`.
    #[arg(long)]
    pub ads: PathBuf,
    /// Number of ads to insert.
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "ga")]
    pub method: Method,
    #[arg(long, value_enum, default_value = "preceding")]
    pub anchor: AnchorArg,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_val: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_asl: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub kind: SynthKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MediaKind {
    Tone,
    Sweep,
    CutSequence,
    StaticSequence,
}

#[derive(Debug, Subcommand)]
pub enum SynthKind {
    /// Quadrant-structured feature CSV.
    Quadrant {
        #[arg(long)]
        n_per_task: Option<usize>,
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long)]
        correlation: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Directory of EEG epochs plus `labels.csv`.
    Eeg {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        dirty_fraction: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ratings CSV for both attributes, optionally with a manifest.
    Ratings {
        #[arg(long, default_value_t = 14)]
        raters: usize,
        #[arg(long, default_value_t = 20)]
        items: usize,
        #[arg(long, default_value_t = 0.7)]
        agreement: f64,
        /// Manifest referencing the ratings, with expert labels.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// WAV clip or PPM frame directory.
    Media {
        #[arg(long, value_enum)]
        kind: MediaKind,
        /// Tone frequency, or sweep start frequency.
        #[arg(long, default_value_t = 1000.0)]
        freq: f64,
        /// Sweep end frequency.
        #[arg(long, default_value_t = 4000.0)]
        end_freq: f64,
        #[arg(long, default_value_t = 16000)]
        sample_rate: u32,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long, default_value_t = 50)]
        cut_at: usize,
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 24)]
        height: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// JSON array of random scenes or ads with scores in [0, 1].
    Scenes {
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// Id prefix, e.g. `scene` or `ad`.
        #[arg(long, default_value = "scene")]
        prefix: String,
        #[arg(long)]
        out: PathBuf,
    },
}
