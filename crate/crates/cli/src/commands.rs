use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use elastic_seg::elastic_loss::{bench_csv, bench_paths, energy_direct, loss, PilParams, BENCH_CSV_HEADER};
use elastic_seg::evolve::{gradient_flow, shifted_init, EvolveConfig};
use elastic_seg::gradcheck::{check_loss_gradient, check_network_gradient};
use elastic_seg::metrics::{aggregate, evaluate, metrics_csv_row, METRICS_CSV_HEADER};
use elastic_seg::phantom::{generate, PhantomSpec};
use elastic_seg::pgm::Pgm;
use elastic_seg::spectral::Boundary;
use elastic_seg::toy_net::{train as train_net, LossKind, ToyNet, TrainConfig};
use elastic_seg::{ScalarField2D, SpectralPlan};

use crate::io::{self, Split};
use crate::{CliError, LossOptions};

const ORACLE_TOL: f64 = 1e-10;
const LOSS_GRAD_TOL: f64 = 1e-5;
const NET_GRAD_TOL: f64 = 1e-4;

fn plan_for(width: usize, height: usize, params: &PilParams) -> Result<SpectralPlan, CliError> {
    Ok(SpectralPlan::for_boundary(width, height, 1.0, params.boundary)?)
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// Side length in pixels.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Image i uses seed `seed + i`.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.6)]
    contrast: f64,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 6)]
    branches: usize,
}

pub fn phantom(a: &PhantomArgs) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::Input("--n must be at least 1".into()));
    }
    let base = PhantomSpec {
        width: a.size,
        height: a.size,
        n_branches: a.branches,
        contrast: a.contrast,
        noise_sigma: a.noise,
        ..PhantomSpec::default()
    };
    base.validate()?;
    io::ensure_dir(&a.out)?;
    let mut manifest = String::from("id,seed,foreground_frac\n");
    for i in 0..a.n {
        let seed = a.seed.wrapping_add(i as u64);
        let ph = generate(&base.with_seed(seed))?;
        io::write_pgm(&a.out.join(format!("img_{i:04}.pgm")), &Pgm::from_field(&ph.image, 65535))?;
        io::write_pgm(&a.out.join(format!("msk_{i:04}.pgm")), &Pgm::from_mask(&ph.mask))?;
        writeln!(manifest, "{i:04},{seed},{:.6}", ph.mask.foreground_fraction()).expect("write to string");
    }
    io::write_text(&a.out.join("manifest.csv"), &manifest)?;
    println!("wrote {} phantoms to {}", a.n, a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    /// Ground-truth mask (PGM or greyscale PNG).
    #[arg(long)]
    gt: PathBuf,
    /// Probability map (PGM or greyscale PNG), scaled to [0, 1].
    #[arg(long)]
    pred: PathBuf,
    #[command(flatten)]
    loss: LossOptions,
    /// Also evaluate the direct double sum (periodic, at most 64x64) and fail
    /// if the relative difference exceeds 1e-10.
    #[arg(long)]
    oracle: bool,
}

pub fn energy(a: &EnergyArgs) -> Result<(), CliError> {
    let params = a.loss.params()?;
    let gt = io::read_mask(&a.gt)?;
    let pred = io::read_field(&a.pred)?;
    if (gt.width(), gt.height()) != (pred.width(), pred.height()) {
        return Err(CliError::Input(format!(
            "dimension mismatch: mask is {}x{}, prediction is {}x{}",
            gt.width(),
            gt.height(),
            pred.width(),
            pred.height()
        )));
    }
    let plan = plan_for(pred.width(), pred.height(), &params)?;
    let e = loss(&gt, &pred, &params, &plan)?;
    println!("E_spectral={e:.15e}");
    if a.oracle {
        if params.boundary != Boundary::Periodic || params.gt_sigma.is_some() {
            return Err(CliError::Input("--oracle supports the plain periodic energy only".into()));
        }
        let phi = pred.map(|v| v - 0.5);
        let h = elastic_seg::field::apply_heaviside(&phi, &params.heaviside);
        let d = elastic_seg::elastic_loss::combined_field_oriented(&gt.to_field(), &h, params.alpha, params.orientation)?;
        let direct = energy_direct(&d, &plan, params.prefactor)?;
        let rel = (e - direct).abs() / e.abs().max(direct.abs()).max(f64::MIN_POSITIVE);
        println!("E_direct={direct:.15e}");
        println!("rel_diff={rel:.3e}");
        if rel > ORACLE_TOL {
            return Err(CliError::Check(format!("oracle mismatch: {rel:.3e} > {ORACLE_TOL:e}")));
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Side length of the random instances.
    #[arg(long, default_value_t = 12)]
    size: usize,
    /// Number of random instances (seeds 0..N).
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// pil, bce, dice, surface, or pil+bce:W (W = cross-entropy weight).
    #[arg(long, default_value = "pil")]
    loss: LossKind,
    /// Differentiate through the toy network's parameters instead of the
    /// probability map (tolerance 1e-4 instead of 1e-5).
    #[arg(long)]
    net: bool,
    /// Parameters sampled per network check.
    #[arg(long, default_value_t = 20)]
    params: usize,
    #[command(flatten)]
    loss_options: LossOptions,
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<(), CliError> {
    let pil = a.loss_options.params()?;
    let tol = if a.net { NET_GRAD_TOL } else { LOSS_GRAD_TOL };
    let mut worst = 0.0f64;
    for seed in 0..a.seeds {
        let err = if a.net {
            let r = check_network_gradient(a.loss, &pil, a.size, seed, a.params)?;
            println!("seed {seed}: max relative error {:.3e} ({} params, {} kink draws skipped)", r.max_error, r.checked, r.skipped);
            r.max_error
        } else {
            let err = check_loss_gradient(a.loss, &pil, a.size, seed)?;
            println!("seed {seed}: max relative error {err:.3e}");
            err
        };
        worst = worst.max(err);
    }
    println!("max_relative_error={worst:.3e} tolerance={tol:e}");
    if worst <= tol {
        println!("PASS");
        Ok(())
    } else {
        Err(CliError::Check(format!("gradient check failed: {worst:.3e} > {tol:e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Init {
    /// The mask itself, shifted, at `0.5 +/- confidence`.
    Shifted,
    /// Every pixel at 0.5.
    Uniform,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Target mask.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum, default_value_t = Init::Shifted)]
    init: Init,
    /// Horizontal shift of the shifted start, pixels.
    #[arg(long, default_value_t = 6, allow_hyphen_values = true)]
    shift: isize,
    /// Vertical shift of the shifted start, pixels.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    shift_y: isize,
    /// Distance of the shifted start from 0.5; defaults to --beta.
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    /// Relative energy change that ends the run early.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Write snap_####.pgm every this many steps (0 = never).
    #[arg(long, default_value_t = 0)]
    snapshot_every: usize,
    /// Output directory for energy.csv, final.pgm and snapshots.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    loss: LossOptions,
}

pub fn evolve(a: &EvolveArgs) -> Result<(), CliError> {
    let params = a.loss.params()?;
    let gt = io::read_mask(&a.gt)?;
    let p0 = match a.init {
        Init::Shifted => {
            let c = a.confidence.unwrap_or(params.heaviside.beta());
            if !(0.0..=0.5).contains(&c) {
                return Err(CliError::Input(format!("--confidence must lie in [0, 0.5], got {c}")));
            }
            shifted_init(&gt, a.shift, a.shift_y, c)
        }
        Init::Uniform => ScalarField2D::filled(gt.width(), gt.height(), 0.5),
    };
    let cfg = EvolveConfig {
        params,
        eta: a.eta,
        max_steps: a.steps,
        tol: a.tol,
        snapshot_every: a.snapshot_every,
    };
    let plan = plan_for(gt.width(), gt.height(), &params)?;
    io::ensure_dir(&a.out)?;
    let trace = gradient_flow(&p0, &gt, &cfg, &plan)?;

    let mut csv = String::from("step,energy\n");
    for (step, e) in trace.energies.iter().enumerate() {
        writeln!(csv, "{step},{e:.15e}").expect("write to string");
    }
    io::write_text(&a.out.join("energy.csv"), &csv)?;
    for (i, snap) in trace.snapshots.iter().enumerate() {
        let step = (i + 1) * a.snapshot_every;
        io::write_pgm(&a.out.join(format!("snap_{step:04}.pgm")), &Pgm::from_field(snap, 65535))?;
    }
    io::write_pgm(&a.out.join("final.pgm"), &Pgm::from_field(&trace.final_p, 65535))?;
    println!("steps={} final_eta={} energy={:.6e}", trace.steps, trace.final_eta, trace.energies.last().unwrap_or(&0.0));
    println!("iou={:.6}", trace.iou_final);
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory with img_*/msk_* pairs.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Train)]
    split: Split,
    /// pil, bce, dice, surface, or pil+bce:W (W = cross-entropy weight).
    #[arg(long, default_value = "pil")]
    loss: LossKind,
    /// Training epochs. The default is a desk-scale budget; the full-scale
    /// setting is 500.
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 4)]
    batch_size: usize,
    /// Seeds both the weight initialization and the batch order.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-epoch loss log (epoch,loss).
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    loss_options: LossOptions,
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let pil = a.loss_options.params()?;
    let samples = io::load_dataset(&a.data, a.split)?;
    let (w, h) = (samples[0].image.width(), samples[0].image.height());
    let data: Vec<_> = samples.into_iter().map(|s| (s.image, s.mask)).collect();
    let cfg = TrainConfig {
        loss: a.loss,
        pil,
        epochs: a.epochs,
        lr: a.lr,
        batch_size: a.batch_size,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let plan = plan_for(w, h, &pil)?;
    let mut net = ToyNet::new(a.seed);
    let log = train_net(&mut net, &data, &cfg, &plan)?;
    net.save(&a.out).map_err(|e| CliError::from_core(e, &a.out))?;
    if let Some(path) = &a.log {
        let mut csv = String::from("epoch,loss\n");
        for (i, l) in log.epoch_losses.iter().enumerate() {
            writeln!(csv, "{},{l:.15e}", i + 1).expect("write to string");
        }
        io::write_text(path, &csv)?;
    }
    println!(
        "trained {} epochs on {} images with {}; final loss {:.6e}; saved {}",
        a.epochs,
        data.len(),
        a.loss.name(),
        log.epoch_losses.last().copied().unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate.
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    model: Option<PathBuf>,
    /// Directory of saved probability maps named pred_<id>.pgm instead of a model.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    split: Split,
    /// Per-image metrics CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Value of the `method` column.
    #[arg(long, default_value = "toynet")]
    method: String,
    /// Value of the `loss` column (the checkpoint does not record it).
    #[arg(long, default_value = "unknown")]
    loss: String,
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let net = match &a.model {
        Some(path) => Some(ToyNet::load(path).map_err(|e| CliError::from_core(e, path))?),
        None => None,
    };
    let samples = io::load_dataset(&a.data, a.split)?;
    let mut csv = format!("{METRICS_CSV_HEADER}\n");
    let mut reports = Vec::with_capacity(samples.len());
    for s in &samples {
        let p = match (&net, &a.predictions) {
            (Some(net), _) => net.forward(&s.image),
            (None, Some(dir)) => io::read_field(&dir.join(format!("pred_{}.pgm", s.id)))?,
            (None, None) => unreachable!("clap requires --model or --predictions"),
        };
        let report = evaluate(&p, &s.mask, a.threshold).map_err(|e| CliError::Input(format!("image {}: {e}", s.id)))?;
        csv.push_str(&metrics_csv_row(&a.method, &a.loss, &s.id, &report));
        csv.push('\n');
        reports.push(report);
    }
    io::write_text(&a.out, &csv)?;
    let agg = aggregate(&reports)?;
    for (name, r) in [("macro", agg.macro_avg), ("micro", agg.micro)] {
        println!(
            "{name}: sens={:.6} spec={:.6} f1={:.6} auc={:.6}",
            r.sensitivity, r.specificity, r.f1, r.auc
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated square sizes.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
    sizes: Vec<usize>,
    /// Timing repeats per size; the median is reported.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Also write the CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn bench(a: &BenchArgs) -> Result<(), CliError> {
    let rows = bench_paths(&a.sizes, a.repeats)?;
    let csv = bench_csv(&rows);
    debug_assert!(csv.starts_with(BENCH_CSV_HEADER));
    print!("{csv}");
    if let Some(path) = &a.out {
        io::write_text(path, &csv)?;
    }
    Ok(())
}
