//! `elastic-seg`: reproducible experiments with the elastic interaction loss.
//!
//! Exit codes: 0 success, 1 a check failed (or a run diverged), 2 usage or I/O
//! error.

mod commands;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use elastic_seg::elastic_loss::{Orientation, PilParams};
use elastic_seg::spectral::Boundary;
use elastic_seg::{HeavisideKind, HeavisideSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A verification ran and did not pass.
    #[error("{0}")]
    Check(String),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] elastic_seg::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Attaches the file name to errors raised while decoding it.
    pub fn from_core(err: elastic_seg::Error, path: &Path) -> Self {
        match err {
            elastic_seg::Error::Io(source) => Self::io(path, source),
            other => Self::Input(format!("{}: {other}", path.display())),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Check(_) | Self::Core(elastic_seg::Error::Diverged { .. }) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "elastic-seg", version, about = "Elastic interaction boundary loss: phantoms, checks, training and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic vessel dataset (img_####.pgm, msk_####.pgm, manifest.csv).
    Phantom(commands::PhantomArgs),
    /// Elastic energy of a prediction against a mask.
    Energy(commands::EnergyArgs),
    /// Finite-difference verification of loss or network gradients.
    Gradcheck(commands::GradcheckArgs),
    /// Gradient flow of a probability map toward a mask, without a network.
    Evolve(commands::EvolveArgs),
    /// Train the toy network on a dataset directory.
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint (or saved predictions) on a dataset directory.
    Eval(commands::EvalArgs),
    /// Time the transform path against the direct double sum.
    Bench(commands::BenchArgs),
}

/// Elastic loss settings shared by several commands.
#[derive(Debug, Clone, Args)]
pub struct LossOptions {
    /// Weight of the predicted contour's field.
    #[arg(long, default_value_t = 0.35)]
    pub alpha: f64,
    /// Heaviside half-width.
    #[arg(long, default_value_t = 0.25)]
    pub beta: f64,
    /// Heaviside shape: hardtanh or sinusoidal.
    #[arg(long = "heaviside", default_value = "hardtanh")]
    pub kind: HeavisideKind,
    /// Overall energy scale.
    #[arg(long, default_value_t = 1.0 / (8.0 * std::f64::consts::PI))]
    pub prefactor: f64,
    /// Give both contours the same orientation (repulsive ablation).
    #[arg(long)]
    pub aligned: bool,
    /// Zero-pad to twice the size instead of wrapping around.
    #[arg(long)]
    pub zero_pad: bool,
    /// Gaussian-smooth the mask with this sigma before use.
    #[arg(long)]
    pub gt_sigma: Option<f64>,
}

impl LossOptions {
    pub fn params(&self) -> Result<PilParams, CliError> {
        let params = PilParams {
            alpha: self.alpha,
            heaviside: HeavisideSpec::new(self.beta, self.kind)?,
            prefactor: self.prefactor,
            orientation: if self.aligned { Orientation::Aligned } else { Orientation::Opposite },
            boundary: if self.zero_pad { Boundary::ZeroPadded } else { Boundary::Periodic },
            gt_sigma: self.gt_sigma,
        };
        params.validate()?;
        Ok(params)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Phantom(a) => commands::phantom(&a),
        Command::Energy(a) => commands::energy(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::Evolve(a) => commands::evolve(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(a) => commands::bench(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
