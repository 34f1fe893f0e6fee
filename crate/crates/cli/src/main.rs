//! `cepfda` command-line tool.
//!
//! Exit status: 0 on success, 1 when a computation fails numerically (for
//! example a singular within-group covariance), 2 for usage, validation and
//! file errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cepfda::spectral::{Estimator, EstimatorConfig, Span};

#[derive(Debug, Parser)]
#[command(
    name = "cepfda",
    version,
    about = "Cepstral Fisher discriminant analysis of replicated time series"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, env = "CEPFDA_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorKind {
    Multitaper,
    Direct,
    Smoothed,
}

#[derive(Debug, Clone, Args)]
struct EstimatorArgs {
    /// Log-spectral estimator.
    #[arg(long, value_enum, default_value_t = EstimatorKind::Multitaper)]
    estimator: EstimatorKind,
    /// Number of sine tapers R (multitaper only).
    #[arg(long, default_value_t = 7)]
    tapers: usize,
    /// Odd modified Daniell span (smoothed only); chosen by GCV when omitted.
    #[arg(long)]
    span: Option<usize>,
}

impl EstimatorArgs {
    fn config(&self) -> EstimatorConfig {
        EstimatorConfig::new(match self.estimator {
            EstimatorKind::Multitaper => Estimator::Multitaper { tapers: self.tapers },
            EstimatorKind::Direct => Estimator::Direct,
            EstimatorKind::Smoothed => Estimator::Smoothed {
                span: self.span.map_or(Span::Auto, Span::Fixed),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeasureKind {
    Kl,
    Chernoff,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a simulated three-group AR(2) corpus (reference design groups).
    Generate {
        /// Series per group.
        #[arg(long, default_value_t = 50)]
        per_group: usize,
        /// Series length N.
        #[arg(long, default_value_t = 500)]
        len: usize,
        /// Innovation-variance range "lo,hi".
        #[arg(long, default_value = "0.3,3", value_parser = commands::parse_range)]
        sigma2: (f64, f64),
        /// Random seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output corpus file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a discriminant model to a labeled corpus.
    #[command(group = clap::ArgGroup::new("truncation").required(true).args(["l", "cv_grid"]))]
    Train {
        /// Labeled corpus file.
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Fixed number of cepstral coefficients L.
        #[arg(long = "L", visible_alias = "l")]
        l: Option<usize>,
        /// Candidate L values for leave-one-out CV, e.g. "1..8" or "2,4,6".
        #[arg(long, value_parser = commands::parse_grid)]
        cv_grid: Option<commands::Grid>,
        /// Group priors in group order, comma separated (default: sample proportions).
        #[arg(long, value_delimiter = ',')]
        priors: Option<Vec<f64>>,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify a corpus with a fitted model.
    Classify {
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Corpus to classify (labels optional).
        #[arg(long)]
        corpus: PathBuf,
        /// Predictions file (TSV); printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave-one-out: refit on the labeled corpus without each series,
        /// using the model's estimator and L.
        #[arg(long)]
        loo: bool,
    },
    /// Run a Monte Carlo classification experiment on the AR(2) design.
    Simulate {
        /// Innovation-variance range "lo,hi".
        #[arg(long, default_value = "0.3,3", value_parser = commands::parse_range)]
        sigma2: (f64, f64),
        /// Training series per group.
        #[arg(long, default_value_t = 50)]
        per_group: usize,
        /// Test series per group.
        #[arg(long, default_value_t = 50)]
        test_per_group: usize,
        /// Series length N.
        #[arg(long, default_value_t = 500)]
        len: usize,
        /// Replicates.
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Random seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Methods, comma separated: cepstral-multitaper, cepstral-direct,
        /// cepstral-smoothed, chernoff, kl (default: all).
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Candidate L values for the cepstral methods.
        #[arg(long, default_value = "2..8", value_parser = commands::parse_grid)]
        l_grid: commands::Grid,
        /// Number of sine tapers R.
        #[arg(long, default_value_t = 7)]
        tapers: usize,
        /// Report file (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify with a Kullback-Leibler or Chernoff information measure.
    #[command(group = clap::ArgGroup::new("alpha_choice").args(["alpha", "tune"]))]
    Baseline {
        /// Labeled training corpus.
        #[arg(long)]
        train: PathBuf,
        /// Corpus to classify.
        #[arg(long)]
        test: PathBuf,
        /// Disparity measure.
        #[arg(long, value_enum, default_value_t = MeasureKind::Kl)]
        measure: MeasureKind,
        /// Chernoff alpha in (0, 1).
        #[arg(long)]
        alpha: Option<f64>,
        /// Choose the Chernoff alpha by leave-one-out CV on the training corpus.
        #[arg(long)]
        tune: bool,
        /// Predictions file (TSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert raw stride-interval files into a corpus.
    Gait {
        /// Directory with control*, als* and hunt* record files.
        #[arg(long)]
        dir: PathBuf,
        /// Output corpus file.
        #[arg(long)]
        out: PathBuf,
        /// Seconds dropped at the start.
        #[arg(long, default_value_t = 20.0)]
        start: f64,
        /// Seconds kept after the start-up period.
        #[arg(long, default_value_t = 210.0)]
        duration: f64,
        /// Output sampling rate in Hz.
        #[arg(long, default_value_t = 2.0)]
        rate: f64,
        /// Running-median window for outlier replacement (odd).
        #[arg(long, default_value_t = 11)]
        median_window: usize,
        /// Outlier threshold in standard deviations.
        #[arg(long, default_value_t = 3.0)]
        outlier_sds: f64,
        /// Fixed spline smoothing parameter (default: GCV).
        #[arg(long)]
        smoothing: Option<f64>,
        /// Fail on records that are too short instead of skipping them.
        #[arg(long)]
        strict: bool,
    },
    /// Write plot data as tab-separated tables.
    Plot {
        /// weight-functions, discriminant-scatter, log-spectra or cv-curve.
        #[arg(long)]
        kind: String,
        /// Model file (weight-functions, discriminant-scatter, cv-curve).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Corpus file (discriminant-scatter, log-spectra).
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Estimator for log-spectra.
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Frequency grid size for weight functions.
        #[arg(long, default_value_t = 256)]
        grid: usize,
        /// Output TSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: setting up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
