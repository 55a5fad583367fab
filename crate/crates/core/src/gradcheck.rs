//! Central finite-difference checks.
//!
//! The error measure is elementwise: `|a - n| / max(|a|, |n|, floor)` where
//! `floor = 1e-6 * max_j |n_j|` keeps entries that are zero up to rounding
//! from dominating. The reported value is the maximum over all checked entries.

use crate::baselines::bce_loss_grad;
use crate::elastic_loss::{smooth_indicator, PilParams};
use crate::field::{heaviside, BinaryMask, ScalarField2D};
use crate::phantom::SplitMix64;
use crate::spectral::{kernel_table, Boundary, SpectralPlan};
use crate::toy_net::{loss_grad, LossKind, ToyNet};
use crate::{Error, Result};

const RELATIVE_FLOOR: f64 = 1e-6;

/// Relative error of a single entry given the scale of the whole gradient.
pub fn relative_error(analytic: f64, numeric: f64, scale: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR * scale);
    if denom == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

/// Central differences of `f` at every entry of `p` with step `step`.
pub fn central_differences(p: &ScalarField2D, step: f64, mut f: impl FnMut(&ScalarField2D) -> f64) -> Vec<f64> {
    let mut probe = p.clone();
    (0..p.len())
        .map(|i| {
            let orig = p.values()[i];
            probe.values_mut()[i] = orig + step;
            let plus = f(&probe);
            probe.values_mut()[i] = orig - step;
            let minus = f(&probe);
            probe.values_mut()[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// Maximum relative error between `analytic` and central differences of `f`.
pub fn compare_with_central_differences(
    p: &ScalarField2D,
    analytic: &[f64],
    step: f64,
    f: impl FnMut(&ScalarField2D) -> f64,
) -> f64 {
    let numeric = central_differences(p, step, f);
    max_relative_error(analytic, &numeric)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n, scale))
        .fold(0.0, f64::max)
}

/// Step used when differentiating a loss with respect to the probability map.
pub const LOSS_STEP: f64 = 1e-5;
/// Step used when differentiating through the network parameters.
pub const NET_STEP: f64 = 1e-4;

/// A reproducible check instance: probabilities drawn from `[0.02, 0.98]` and
/// a disc-shaped truth that is neither empty nor full.
pub fn random_instance(size: usize, seed: u64) -> (ScalarField2D, BinaryMask) {
    let mut rng = SplitMix64::new(seed);
    let s = size as f64;
    let cx = rng.uniform(0.3 * s, 0.7 * s);
    let cy = rng.uniform(0.3 * s, 0.7 * s);
    let r = rng.uniform(0.2 * s, 0.35 * s).max(1.0);
    let gt = BinaryMask::disc(size, size, cx, cy, r);
    let p = ScalarField2D::from_fn(size, size, |_, _| 0.02 + 0.96 * rng.next_f64());
    (p, gt)
}

/// Central differences of the periodic elastic energy with respect to each
/// entry of `p`, evaluated without subtracting two nearly equal energies.
///
/// For a symmetric kernel `E(D+) - E(D-) = c <D+ - D-, K (D+ + D-)>`, and the
/// two perturbed fields differ only at the perturbed pixel, so the quotient
/// `(E(p + h e_i) - E(p - h e_i)) / 2h` reduces to one kernel row. Uses the
/// tabulated kernel rather than the transform path under test.
pub fn elastic_central_differences(
    gt: &BinaryMask,
    p: &ScalarField2D,
    params: &PilParams,
    plan: &SpectralPlan,
    step: f64,
) -> Result<Vec<f64>> {
    params.validate()?;
    p.check_dims(gt)?;
    crate::field::check_dims(plan.width(), plan.height(), p)?;
    let (w, h) = (p.width(), p.height());
    let g = match params.gt_sigma {
        Some(sigma) => smooth_indicator(gt, sigma),
        None => gt.to_field(),
    };
    let s = params.orientation.sign() * params.alpha;
    let d: Vec<f64> = g
        .values()
        .iter()
        .zip(p.values())
        .map(|(gv, pv)| gv + s * heaviside(pv - 0.5, &params.heaviside))
        .collect();
    let kernel = kernel_table(plan);
    Ok((0..w * h)
        .map(|i| {
            let (xi, yi) = (i % w, i / w);
            let phi = p.values()[i] - 0.5;
            let d_plus = g.values()[i] + s * heaviside(phi + step, &params.heaviside);
            let d_minus = g.values()[i] + s * heaviside(phi - step, &params.heaviside);
            let mut row = 0.0;
            for yj in 0..h {
                for xj in 0..w {
                    let j = yj * w + xj;
                    let sum = if j == i { d_plus + d_minus } else { 2.0 * d[j] };
                    row += kernel.get((xi + w - xj) % w, (yi + h - yj) % h) * sum;
                }
            }
            params.prefactor * (d_plus - d_minus) * row / (2.0 * step)
        })
        .collect())
}

/// Max relative error of `dL/dP` against central differences (step
/// [`LOSS_STEP`]) over every pixel. The periodic elastic term is differenced
/// with [`elastic_central_differences`]; everything else by re-evaluating the
/// loss.
pub fn check_loss_gradient(kind: LossKind, pil: &PilParams, size: usize, seed: u64) -> Result<f64> {
    let (p, gt) = random_instance(size, seed);
    let plan = SpectralPlan::for_boundary(size, size, 1.0, pil.boundary)?;
    let (_, grad) = loss_grad(kind, &p, &gt, pil, &plan)?;
    let periodic = pil.boundary == Boundary::Periodic;
    let numeric = match kind {
        LossKind::Pil if periodic => elastic_central_differences(&gt, &p, pil, &plan, LOSS_STEP)?,
        LossKind::PilBce { weight } if periodic => {
            let elastic = elastic_central_differences(&gt, &p, pil, &plan, LOSS_STEP)?;
            let bce = generic_differences(LossKind::Bce, &p, &gt, pil, &plan)?;
            elastic.iter().zip(&bce).map(|(e, b)| e + weight * b).collect()
        }
        _ => generic_differences(kind, &p, &gt, pil, &plan)?,
    };
    Ok(max_relative_error(grad.values(), &numeric))
}

fn generic_differences(
    kind: LossKind,
    p: &ScalarField2D,
    gt: &BinaryMask,
    pil: &PilParams,
    plan: &SpectralPlan,
) -> Result<Vec<f64>> {
    let mut failure = None;
    let numeric = central_differences(p, LOSS_STEP, |q| {
        let value = match kind {
            LossKind::Bce => bce_loss_grad(q, gt).map(|(l, _)| l),
            _ => loss_grad(kind, q, gt, pil, plan).map(|(l, _)| l),
        };
        value.unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::NAN
        })
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(numeric),
    }
}

/// Outcome of a network gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetCheck {
    pub max_error: f64,
    pub checked: usize,
    /// Draws rejected because `theta +/- step` switched some ReLU on or off.
    pub skipped: usize,
}

/// Relative error of the parameter gradient of `loss(net(image))` on
/// `samples` randomly drawn parameters of a freshly seeded network.
///
/// A central difference straddling a ReLU kink measures the average of two
/// one-sided slopes, not the derivative, so parameters whose perturbation
/// changes the activation pattern are redrawn (and counted as skipped).
pub fn check_network_gradient(kind: LossKind, pil: &PilParams, size: usize, seed: u64, samples: usize) -> Result<NetCheck> {
    let (image, gt) = random_instance(size, seed);
    let plan = SpectralPlan::for_boundary(size, size, 1.0, pil.boundary)?;
    let mut net = ToyNet::new(seed.wrapping_add(0x5EED));
    let cache = net.forward_cached(&image);
    let pattern = cache.relu_pattern(&net);
    let (_, grad_out) = loss_grad(kind, &cache.probabilities(), &gt, pil, &plan)?;
    let analytic = net.backward(&cache, &grad_out)?;
    let base = net.params();
    let mut rng = SplitMix64::new(seed ^ 0x9E37_79B9);
    let (mut picked, mut numeric) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    let mut skipped = 0;
    let max_draws = 50 * samples.max(1);
    for _ in 0..max_draws {
        if picked.len() == samples {
            break;
        }
        let k = rng.below(base.len());
        let mut eval = |v: f64| -> Result<(f64, bool)> {
            let mut probe = base.clone();
            probe[k] = v;
            net.set_params(&probe);
            let c = net.forward_cached(&image);
            let smooth = c.relu_pattern(&net) == pattern;
            Ok((loss_grad(kind, &c.probabilities(), &gt, pil, &plan)?.0, smooth))
        };
        let (plus, smooth_plus) = eval(base[k] + NET_STEP)?;
        let (minus, smooth_minus) = eval(base[k] - NET_STEP)?;
        if !(smooth_plus && smooth_minus) {
            skipped += 1;
            continue;
        }
        numeric.push((plus - minus) / (2.0 * NET_STEP));
        picked.push(analytic[k]);
    }
    net.set_params(&base);
    if picked.len() < samples {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: format!("only {} of {samples} parameters avoid activation kinks", picked.len()),
        });
    }
    // Scale by the full gradient so a sampled entry that is zero up to
    // rounding is not judged against itself.
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let max_error = picked
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n, scale))
        .fold(0.0, f64::max);
    Ok(NetCheck {
        max_error,
        checked: picked.len(),
        skipped,
    })
}
