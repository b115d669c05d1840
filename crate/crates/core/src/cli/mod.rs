//! The `partgnn` command-line tool.

mod commands;
mod settings;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use settings::Settings;

/// Process exit status for a usage error.
pub const EXIT_USAGE: i32 = 1;
/// Process exit status for a runtime failure.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

pub(crate) fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "partgnn", version, about = "Object-part graphs and graph-attention classification for triangle meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// key=value file; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct SamplingFlags {
    /// Accumulated-angle threshold in radians.
    #[arg(long)]
    threshold: Option<String>,
    /// Multiplier on the threshold (>= 1).
    #[arg(long)]
    threshold_scale: Option<String>,
    #[arg(long)]
    max_parts: Option<String>,
    /// Points sampled per part.
    #[arg(long)]
    points: Option<String>,
    /// Local reference frame: pca or z.
    #[arg(long)]
    lrf: Option<String>,
    /// Drop the average-angle column.
    #[arg(long)]
    no_angle_feature: bool,
    #[arg(long)]
    seed: Option<String>,
    /// Normal smoothing passes.
    #[arg(long)]
    smoothing_passes: Option<String>,
}

impl SamplingFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("threshold", self.threshold.clone()),
            ("threshold-scale", self.threshold_scale.clone()),
            ("max-parts", self.max_parts.clone()),
            ("points", self.points.clone()),
            ("lrf", self.lrf.clone()),
            ("no-angle-feature", flag(self.no_angle_feature)),
            ("seed", self.seed.clone()),
            ("smoothing-passes", self.smoothing_passes.clone()),
        ]
    }
}

fn flag(set: bool) -> Option<String> {
    set.then(|| "true".to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic four-class dataset in the class/split/*.off layout.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        per_class: Option<String>,
        #[arg(long)]
        test_per_class: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        /// none, z or so3.
        #[arg(long)]
        rotation: Option<String>,
        #[arg(long)]
        cut_probability: Option<String>,
        #[arg(long)]
        resolution: Option<String>,
        #[arg(long)]
        scale_min: Option<String>,
        #[arg(long)]
        scale_max: Option<String>,
    },
    /// Sample and featurize one mesh into a part graph.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        label: Option<String>,
        #[command(flatten)]
        sampling: SamplingFlags,
    },
    /// Featurize every mesh of a dataset directory.
    Featurize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        out: Option<String>,
        /// source<TAB>target class mapping file.
        #[arg(long)]
        mapping: Option<String>,
        #[arg(long)]
        jobs: Option<String>,
        /// Directory of cached graphs keyed by content hash.
        #[arg(long)]
        cache: Option<String>,
        #[command(flatten)]
        sampling: SamplingFlags,
    },
    /// Train a classifier on featurized graphs.
    Train {
        #[command(flatten)]
        common: Common,
        /// Featurized dataset root (train/ and optional val/).
        #[arg(long)]
        data: Option<String>,
        /// Checkpoint path.
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        log: Option<String>,
        /// Node disconnection rate in [0, 1].
        #[arg(long)]
        disconnect: Option<String>,
        /// maxpool or singlenode.
        #[arg(long)]
        pooling: Option<String>,
        #[arg(long)]
        epochs: Option<String>,
        #[arg(long)]
        lr: Option<String>,
        #[arg(long)]
        batch: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        /// adam or sgd.
        #[arg(long)]
        optimizer: Option<String>,
        /// standard, small or toy.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        stop_train_acc: Option<String>,
        #[arg(long)]
        stop_val_acc: Option<String>,
        #[arg(long)]
        threshold_scale_eval: Option<String>,
    },
    /// Evaluate a checkpoint on featurized graphs.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        checkpoint: Option<String>,
        #[arg(long)]
        split: Option<String>,
        /// Fraction of parts deleted per object.
        #[arg(long)]
        occlude: Option<String>,
        #[arg(long)]
        occlude_seed: Option<String>,
        #[arg(long)]
        threshold_scale_eval: Option<String>,
        /// Also report the majority-class baseline of the train split.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        metrics_out: Option<String>,
    },
    /// Finite-difference check of every layer and the toy model.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Part statistics for one mesh.
    Inspect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<String>,
        #[command(flatten)]
        sampling: SamplingFlags,
    },
}

/// Runs the tool with stdout and stderr; returns the exit status.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_with(argv, &mut out, &mut err)
}

pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match commands::dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.code()
        }
    }
}
