//! Projected gradient flow of a probability field under the elastic force.
//!
//! No network is involved: the probability map itself is the parameter and is
//! updated as `P <- clamp(P - eta * dE/dP, 0, 1)`.

use crate::elastic_loss::{loss_and_grad, PilParams};
use crate::field::{check_probabilities, BinaryMask, ScalarField2D};
use crate::spectral::SpectralPlan;
use crate::{Error, Result};

/// Consecutive energy increases that trigger a step-size halving.
const INCREASES_BEFORE_HALVING: usize = 5;
const MIN_ETA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveConfig {
    pub params: PilParams,
    pub eta: f64,
    pub max_steps: usize,
    /// Stop once `|dE| / max(E, 1e-12)` falls below this.
    pub tol: f64,
    /// Keep a copy of `P` every this many steps; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            params: PilParams::default(),
            eta: 0.5,
            max_steps: 500,
            tol: 1e-8,
            snapshot_every: 0,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be positive, got {}", self.eta),
            });
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "max_steps",
                reason: "must be at least 1".into(),
            });
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("must be non-negative, got {}", self.tol),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveTrace {
    /// Energy before the first step followed by the energy after every step.
    pub energies: Vec<f64>,
    pub final_p: ScalarField2D,
    /// IoU of `final_p >= 0.5` against the target mask.
    pub iou_final: f64,
    pub snapshots: Vec<ScalarField2D>,
    pub steps: usize,
    /// Step size in effect at the end (smaller than requested if halved).
    pub final_eta: f64,
}

/// Runs the flow from `p0` toward `gt`.
pub fn gradient_flow(
    p0: &ScalarField2D,
    gt: &BinaryMask,
    cfg: &EvolveConfig,
    plan: &SpectralPlan,
) -> Result<EvolveTrace> {
    cfg.validate()?;
    p0.check_dims(gt)?;
    check_probabilities(p0)?;

    let mut p = p0.map(|v| v.clamp(0.0, 1.0));
    let mut current = loss_and_grad(gt, &p, &cfg.params, plan)?;
    let mut energies = vec![current.energy];
    let mut snapshots = Vec::new();
    let mut eta = cfg.eta;
    let mut increases = 0;
    let mut steps = 0;

    for step in 1..=cfg.max_steps {
        for (v, g) in p.values_mut().iter_mut().zip(current.grad_p.values()) {
            *v = (*v - eta * g).clamp(0.0, 1.0);
        }
        let next = loss_and_grad(gt, &p, &cfg.params, plan)?;
        let prev_energy = current.energy;
        energies.push(next.energy);
        steps = step;
        if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 {
            snapshots.push(p.clone());
        }

        if next.energy > prev_energy {
            increases += 1;
            if increases >= INCREASES_BEFORE_HALVING {
                eta *= 0.5;
                increases = 0;
                if eta < MIN_ETA {
                    return Err(Error::Diverged { step, min_eta: MIN_ETA });
                }
            }
        } else {
            increases = 0;
        }

        let change = (next.energy - prev_energy).abs() / next.energy.max(1e-12);
        current = next;
        if change < cfg.tol {
            break;
        }
    }

    let iou_final = iou(&p.threshold(0.5), gt)?;
    Ok(EvolveTrace {
        energies,
        final_p: p,
        iou_final,
        snapshots,
        steps,
        final_eta: eta,
    })
}

/// Intersection over union; 1 when both masks are empty.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    crate::field::check_dims(a.width(), a.height(), b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.values().iter().zip(b.values()) {
        inter += usize::from(x & y);
        union += usize::from(x | y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Initial probability map: `mask` shifted cyclically by `(dx, dy)`, mapped to
/// `0.5 +/- confidence`. With a confidence at most the Heaviside half-width
/// every pixel starts where `H'` is nonzero; a fully binary start sits on the
/// flat part of the ramp and never moves. Setting it equal to the half-width
/// makes `H(P0)` the shifted mask itself.
pub fn shifted_init(mask: &BinaryMask, dx: isize, dy: isize, confidence: f64) -> ScalarField2D {
    mask.shifted(dx, dy)
        .to_field()
        .map(|v| 0.5 + confidence * (2.0 * v - 1.0))
}
