//! Elastic interaction loss.
//!
//! The ground truth `G` and the lifted prediction `H(phi)` are superposed into
//! a single field `D = G - alpha * H(phi)`, with the prediction carrying the
//! opposite orientation so that a perfect match at `alpha = 1` annihilates
//! (`D == 0`). The energy is the nonlocal quadratic form
//!
//! ```text
//! E = c * <D, A D>,    A = (-Laplacian)^(1/2) on the periodic grid,
//!   = c / (W H) * sum_k |k| |D^(k)|^2
//! ```
//!
//! with `c` the prefactor (default `1 / (8 pi)`). `A` is applied with one FFT
//! round trip, so energy and gradient cost `O(N log N)`.
//!
//! The gradient with respect to the probability map follows from
//! `phi = P - 0.5`: `dE/dP = -2 c alpha H'(phi) * (A D)`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use crate::field::{
    apply_heaviside, apply_heaviside_deriv, check_dims, check_probabilities, BinaryMask, HeavisideSpec,
    ScalarField2D,
};
use crate::spectral::{apply_halfnorm_with, kernel_table, Boundary, SpectralPlan};
use crate::{Error, Result};

/// Largest grid (in pixels) the direct path accepts without forcing.
pub const DIRECT_MAX_PIXELS: usize = 64 * 64;

/// Sign with which the prediction enters the combined field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// `D = G - alpha H`: prediction and truth boundaries are oppositely oriented.
    #[default]
    Opposite,
    /// `D = G + alpha H`, the literal superposition. Kept for ablations; it
    /// does not vanish at a perfect match.
    Aligned,
}

impl Orientation {
    /// Sign multiplying `alpha * H` in the combined field.
    pub fn sign(self) -> f64 {
        match self {
            Self::Opposite => -1.0,
            Self::Aligned => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilParams {
    pub alpha: f64,
    pub heaviside: HeavisideSpec,
    pub prefactor: f64,
    pub orientation: Orientation,
    pub boundary: Boundary,
    /// Gaussian smoothing of the ground-truth indicator, in pixels. `None` uses the raw mask.
    pub gt_sigma: Option<f64>,
}

impl Default for PilParams {
    fn default() -> Self {
        Self {
            alpha: 0.35,
            heaviside: HeavisideSpec::default(),
            prefactor: 1.0 / (8.0 * PI),
            orientation: Orientation::Opposite,
            boundary: Boundary::Periodic,
            gt_sigma: None,
        }
    }
}

impl PilParams {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be positive, got {}", self.alpha),
            });
        }
        if !(self.prefactor > 0.0 && self.prefactor.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "prefactor",
                reason: format!("must be positive, got {}", self.prefactor),
            });
        }
        if let Some(sigma) = self.gt_sigma {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "gt_sigma",
                    reason: format!("must be positive, got {sigma}"),
                });
            }
        }
        Ok(())
    }
}

/// Energy and its gradient with respect to the probability map.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrad {
    pub energy: f64,
    pub grad_p: ScalarField2D,
}

/// `D = G - alpha * H`.
pub fn combined_field(gt: &ScalarField2D, h_phi: &ScalarField2D, alpha: f64) -> Result<ScalarField2D> {
    combined_field_oriented(gt, h_phi, alpha, Orientation::Opposite)
}

pub fn combined_field_oriented(
    gt: &ScalarField2D,
    h_phi: &ScalarField2D,
    alpha: f64,
    orientation: Orientation,
) -> Result<ScalarField2D> {
    gt.check_dims(h_phi)?;
    let s = orientation.sign() * alpha;
    let values = gt.values().iter().zip(h_phi.values()).map(|(g, h)| g + s * h).collect();
    ScalarField2D::new(gt.width(), gt.height(), values)
}

/// `prefactor / (W H) * sum_k |k| |D^(k)|^2` on the periodic grid.
pub fn energy_spectral(d: &ScalarField2D, plan: &SpectralPlan, prefactor: f64) -> Result<f64> {
    let spectrum = plan.forward(d)?;
    let sum: f64 = spectrum
        .values()
        .iter()
        .zip(plan.k_mag())
        .map(|(c, k)| k * c.norm_sqr())
        .sum();
    Ok(prefactor * sum / plan.len() as f64)
}

/// Explicit double sum `prefactor * sum_x sum_x' D(x) K(x - x') D(x')` with the
/// tabulated periodic kernel. Refuses grids above 64x64 pixels.
pub fn energy_direct(d: &ScalarField2D, plan: &SpectralPlan, prefactor: f64) -> Result<f64> {
    if d.len() > DIRECT_MAX_PIXELS {
        return Err(Error::DirectTooLarge {
            width: d.width(),
            height: d.height(),
        });
    }
    energy_direct_forced(d, plan, prefactor)
}

/// [`energy_direct`] without the size guard.
pub fn energy_direct_forced(d: &ScalarField2D, plan: &SpectralPlan, prefactor: f64) -> Result<f64> {
    check_dims(plan.width(), plan.height(), d)?;
    let kernel = kernel_table(plan);
    direct_quadratic_form(d, &tile_kernel(&kernel), prefactor)
}

/// Kernel tiled to `2W x 2H` so that `K[(y - y') mod H][(x - x') mod W]` is a
/// plain lookup at `[(y + H - y')][(x + W - x')]`.
fn tile_kernel(kernel: &ScalarField2D) -> ScalarField2D {
    let (w, h) = (kernel.width(), kernel.height());
    ScalarField2D::from_fn(2 * w, 2 * h, |x, y| kernel.get(x % w, y % h))
}

fn direct_quadratic_form(d: &ScalarField2D, tiled: &ScalarField2D, prefactor: f64) -> Result<f64> {
    let (w, h) = (d.width(), d.height());
    let tw = tiled.width();
    let dv = d.values();
    let kv = tiled.values();
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let dx = dv[y * w + x];
            if dx == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for yy in 0..h {
                let krow = &kv[(y + h - yy) * tw..];
                let drow = &dv[yy * w..(yy + 1) * w];
                for (xx, &dval) in drow.iter().enumerate() {
                    acc += krow[x + w - xx] * dval;
                }
            }
            total += dx * acc;
        }
    }
    Ok(prefactor * total)
}

/// Gaussian smoothing of a mask (separable, clamp-to-edge, truncated at 4 sigma).
pub fn smooth_indicator(mask: &BinaryMask, sigma: f64) -> ScalarField2D {
    let radius = (4.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = taps.iter().sum();
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let src = mask.to_field();
    let blur = |f: &ScalarField2D, horizontal: bool| {
        ScalarField2D::from_fn(w as usize, h as usize, |x, y| {
            let mut acc = 0.0;
            for (t, tap) in taps.iter().enumerate() {
                let o = t as isize - radius;
                let (sx, sy) = if horizontal {
                    ((x as isize + o).clamp(0, w - 1), y as isize)
                } else {
                    (x as isize, (y as isize + o).clamp(0, h - 1))
                };
                acc += tap * f.get(sx as usize, sy as usize);
            }
            acc / norm
        })
    };
    blur(&blur(&src, true), false)
}

/// Energy of the prediction `P` against the mask `G` and its gradient `dE/dP`.
///
/// `plan` must match the transform size for `params.boundary`: the field size
/// when periodic, twice the field size when zero-padded.
pub fn loss_and_grad(
    gt: &BinaryMask,
    p: &ScalarField2D,
    params: &PilParams,
    plan: &SpectralPlan,
) -> Result<EnergyGrad> {
    params.validate()?;
    p.check_dims(gt)?;
    check_probabilities(p)?;
    let (tw, th) = params.boundary.transform_dims(p.width(), p.height());
    if plan.width() != tw || plan.height() != th {
        return Err(Error::DimensionMismatch {
            expected_w: tw,
            expected_h: th,
            got_w: plan.width(),
            got_h: plan.height(),
        });
    }

    let g = match params.gt_sigma {
        Some(sigma) => smooth_indicator(gt, sigma),
        None => gt.to_field(),
    };
    let phi = p.map(|v| v - 0.5);
    let h = apply_heaviside(&phi, &params.heaviside);
    let dh = apply_heaviside_deriv(&phi, &params.heaviside);
    let d = combined_field_oriented(&g, &h, params.alpha, params.orientation)?;

    let ad = apply_halfnorm_with(&d, plan, params.boundary)?;
    let energy = match params.boundary {
        Boundary::Periodic => energy_spectral(&d, plan, params.prefactor)?,
        // <D, A D> with the cropped operator; clamp rounding below zero.
        Boundary::ZeroPadded => (params.prefactor * d.dot(&ad)).max(0.0),
    };

    let scale = 2.0 * params.prefactor * params.orientation.sign() * params.alpha;
    let grad: Vec<f64> = ad
        .values()
        .iter()
        .zip(dh.values())
        .map(|(a, hp)| scale * hp * a)
        .collect();
    Ok(EnergyGrad {
        energy,
        grad_p: ScalarField2D::new(p.width(), p.height(), grad)?,
    })
}

/// Energy only; same contract as [`loss_and_grad`].
pub fn loss(gt: &BinaryMask, p: &ScalarField2D, params: &PilParams, plan: &SpectralPlan) -> Result<f64> {
    loss_and_grad(gt, p, params, plan).map(|eg| eg.energy)
}

/// One timing row: median nanoseconds per energy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub size: usize,
    pub t_fft_ns: f64,
    pub t_direct_ns: f64,
}

impl BenchRow {
    pub fn ratio(&self) -> f64 {
        self.t_direct_ns / self.t_fft_ns
    }
}

pub const BENCH_CSV_HEADER: &str = "size,t_fft_ns,t_direct_ns,ratio";

/// Minimum wall time per repeat; short evaluations are looped until it is reached.
const BENCH_MIN_BATCH: Duration = Duration::from_millis(5);

fn time_per_call(mut f: impl FnMut() -> f64) -> f64 {
    let mut sink = 0.0;
    let mut calls = 0u64;
    let start = Instant::now();
    loop {
        sink += f();
        calls += 1;
        if start.elapsed() >= BENCH_MIN_BATCH {
            break;
        }
    }
    let elapsed = start.elapsed().as_nanos() as f64;
    std::hint::black_box(sink);
    elapsed / calls as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times the spectral and direct energy paths on square grids of each size.
///
/// Both paths get their plan and kernel table up front; only the energy
/// evaluation is timed. Runs on the calling thread.
pub fn bench_paths(sizes: &[usize], repeats: usize) -> Result<Vec<BenchRow>> {
    if repeats == 0 {
        return Err(Error::InvalidParameter {
            name: "repeats",
            reason: "must be at least 1".into(),
        });
    }
    let prefactor = 1.0 / (8.0 * PI);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let plan = SpectralPlan::new(n, n, 1.0)?;
        let mut rng = crate::phantom::SplitMix64::new(n as u64);
        let d = ScalarField2D::from_fn(n, n, |_, _| rng.next_f64() - 0.5);
        let tiled = tile_kernel(&kernel_table(&plan));
        let mut fft_times = Vec::with_capacity(repeats);
        let mut direct_times = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            fft_times.push(time_per_call(|| energy_spectral(&d, &plan, prefactor).unwrap_or(0.0)));
            direct_times.push(time_per_call(|| direct_quadratic_form(&d, &tiled, prefactor).unwrap_or(0.0)));
        }
        rows.push(BenchRow {
            size: n,
            t_fft_ns: median(fft_times),
            t_direct_ns: median(direct_times),
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{:.0},{:.0},{:.3}\n", r.size, r.t_fft_ns, r.t_direct_ns, r.ratio()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::HeavisideKind;
    use crate::phantom::SplitMix64;
    use approx::assert_abs_diff_eq;

    fn random_field(w: usize, h: usize, seed: u64) -> ScalarField2D {
        let mut rng = SplitMix64::new(seed);
        ScalarField2D::from_fn(w, h, |_, _| rng.next_f64() * 2.0 - 1.0)
    }

    fn random_mask(w: usize, h: usize, seed: u64) -> BinaryMask {
        let mut rng = SplitMix64::new(seed);
        BinaryMask::from_fn(w, h, |_, _| rng.next_f64() < 0.4)
    }

    /// Probabilities kept away from 0 and 1 so finite-difference probes stay in range.
    fn random_probs(w: usize, h: usize, seed: u64) -> ScalarField2D {
        let mut rng = SplitMix64::new(seed);
        ScalarField2D::from_fn(w, h, |_, _| 0.02 + 0.96 * rng.next_f64())
    }

    #[test]
    fn combined_field_cases() {
        let g = BinaryMask::disc(8, 8, 4.0, 4.0, 2.0).to_field();
        let d = combined_field(&g, &g, 1.0).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
        let ones = ScalarField2D::filled(2, 2, 1.0);
        let d = combined_field(&ones, &ones, 0.35).unwrap();
        assert!(d.values().iter().all(|&v| (v - 0.65).abs() < 1e-15));
        let d = combined_field(&g, &ScalarField2D::zeros(8, 8), 1.0).unwrap();
        assert_eq!(d, g);
        let aligned = combined_field_oriented(&ones, &ones, 0.35, Orientation::Aligned).unwrap();
        assert!(aligned.values().iter().all(|&v| (v - 1.35).abs() < 1e-15));
        assert!(combined_field(&g, &ones, 1.0).is_err());
    }

    #[test]
    fn energy_of_constants_is_zero() {
        let plan = SpectralPlan::new(8, 8, 1.0).unwrap();
        assert_eq!(energy_spectral(&ScalarField2D::zeros(8, 8), &plan, 1.0).unwrap(), 0.0);
        assert!(energy_spectral(&ScalarField2D::filled(8, 8, 3.0), &plan, 1.0).unwrap().abs() < 1e-12);
        assert_eq!(energy_direct(&ScalarField2D::zeros(8, 8), &plan, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn centered_square_matches_direct() {
        let plan = SpectralPlan::new(16, 16, 1.0).unwrap();
        let d = ScalarField2D::from_fn(16, 16, |x, y| f64::from(u8::from((7..10).contains(&x) && (7..10).contains(&y))));
        let pre = 1.0 / (8.0 * PI);
        let fast = energy_spectral(&d, &plan, pre).unwrap();
        let slow = energy_direct(&d, &plan, pre).unwrap();
        assert!(fast > 0.0);
        assert!((fast - slow).abs() / fast <= 1e-10);
    }

    #[test]
    fn random_fields_match_direct() {
        for (n, seeds) in [(8usize, 0..20u64), (16, 100..120)] {
            let plan = SpectralPlan::new(n, n, 1.0).unwrap();
            for seed in seeds {
                let d = random_field(n, n, seed);
                let fast = energy_spectral(&d, &plan, 0.1).unwrap();
                let slow = energy_direct(&d, &plan, 0.1).unwrap();
                assert!((fast - slow).abs() / fast <= 1e-10, "n={n} seed={seed}");
            }
        }
    }

    #[test]
    fn impulse_energy_is_kernel_origin() {
        let plan = SpectralPlan::new(8, 8, 1.0).unwrap();
        let d = ScalarField2D::from_fn(8, 8, |x, y| f64::from(u8::from((x, y) == (2, 3))));
        let k0 = kernel_table(&plan).get(0, 0);
        // kernel_table carries the 1/(WH) normalization, so K(0) = sum|k| / 64.
        assert_abs_diff_eq!(k0, plan.k_mag().iter().sum::<f64>() / 64.0, epsilon = 1e-12);
        let pre = 0.5;
        assert_abs_diff_eq!(energy_direct(&d, &plan, pre).unwrap(), pre * k0, epsilon = 1e-12);
        assert_abs_diff_eq!(energy_spectral(&d, &plan, pre).unwrap(), pre * k0, epsilon = 1e-12);
    }

    #[test]
    fn direct_size_guard() {
        let plan = SpectralPlan::new(65, 64, 1.0).unwrap();
        let d = ScalarField2D::zeros(65, 64);
        assert!(matches!(energy_direct(&d, &plan, 1.0), Err(Error::DirectTooLarge { .. })));
        assert!(energy_direct_forced(&d, &plan, 1.0).is_ok());
    }

    #[test]
    fn perfect_prediction_annihilates() {
        let plan = SpectralPlan::new(16, 16, 1.0).unwrap();
        for seed in 0..5 {
            let g = random_mask(16, 16, seed);
            let params = PilParams::with_alpha(1.0);
            let eg = loss_and_grad(&g, &g.to_field(), &params, &plan).unwrap();
            assert!(eg.energy <= 1e-10);
            assert!(eg.grad_p.max_abs() <= 1e-10);
        }
    }

    fn fd_max_rel_error(g: &BinaryMask, p: &ScalarField2D, params: &PilParams, plan: &SpectralPlan) -> f64 {
        let eg = loss_and_grad(g, p, params, plan).unwrap();
        crate::gradcheck::compare_with_central_differences(p, eg.grad_p.values(), 1e-5, |q| {
            loss(g, q, params, plan).unwrap()
        })
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let plan = SpectralPlan::new(12, 12, 1.0).unwrap();
        for kind in [HeavisideKind::HardTanh, HeavisideKind::Sinusoidal] {
            for alpha in [0.35, 1.0] {
                let params = PilParams {
                    alpha,
                    heaviside: HeavisideSpec::new(0.25, kind).unwrap(),
                    ..PilParams::default()
                };
                let g = random_mask(12, 12, 7);
                let p = random_probs(12, 12, 8);
                let err = fd_max_rel_error(&g, &p, &params, &plan);
                assert!(err <= 1e-5, "{kind:?} alpha={alpha}: {err:e}");
            }
        }
    }

    #[test]
    fn gradient_variants_match_finite_differences() {
        let g = random_mask(10, 8, 3);
        let p = random_probs(10, 8, 4);
        let variants = [
            PilParams {
                orientation: Orientation::Aligned,
                ..PilParams::default()
            },
            PilParams {
                gt_sigma: Some(1.0),
                ..PilParams::default()
            },
            PilParams {
                boundary: Boundary::ZeroPadded,
                ..PilParams::default()
            },
        ];
        for params in variants {
            let plan = SpectralPlan::for_boundary(10, 8, 1.0, params.boundary).unwrap();
            let err = fd_max_rel_error(&g, &p, &params, &plan);
            assert!(err <= 1e-5, "{params:?}: {err:e}");
        }
    }

    #[test]
    fn wrong_plan_size_is_rejected() {
        let g = random_mask(8, 8, 1);
        let p = random_probs(8, 8, 2);
        let periodic = SpectralPlan::new(8, 8, 1.0).unwrap();
        let padded = PilParams {
            boundary: Boundary::ZeroPadded,
            ..PilParams::default()
        };
        assert!(loss_and_grad(&g, &p, &padded, &periodic).is_err());
        let bad_p = ScalarField2D::filled(8, 8, 1.5);
        assert!(loss_and_grad(&g, &bad_p, &PilParams::default(), &periodic).is_err());
        let bad_alpha = PilParams::with_alpha(0.0);
        assert!(loss_and_grad(&g, &p, &bad_alpha, &periodic).is_err());
    }

    #[test]
    fn force_points_toward_the_truth() {
        let plan = SpectralPlan::new(32, 32, 1.0).unwrap();
        let g = BinaryMask::disc(32, 32, 16.0, 16.0, 4.0);
        let p = ScalarField2D::filled(32, 32, 0.5);
        let eg = loss_and_grad(&g, &p, &PilParams::default(), &plan).unwrap();
        let (mut agree, mut total) = (0, 0);
        for y in 0..32 {
            for x in 0..32 {
                let r = ((x as f64 - 16.0).powi(2) + (y as f64 - 16.0).powi(2)).sqrt();
                if (r - 4.0).abs() > 2.0 {
                    continue;
                }
                total += 1;
                let grad = eg.grad_p.get(x, y);
                if (g.get(x, y) && grad < 0.0) || (!g.get(x, y) && grad > 0.0) {
                    agree += 1;
                }
            }
        }
        assert!(agree as f64 >= 0.9 * total as f64, "{agree}/{total}");
    }

    #[test]
    fn empty_truth_pushes_prediction_down() {
        let plan = SpectralPlan::new(16, 16, 1.0).unwrap();
        let g = BinaryMask::empty(16, 16);
        let p = BinaryMask::disc(16, 16, 8.0, 8.0, 3.0).to_field().map(|v| 0.3 + 0.4 * v);
        let eg = loss_and_grad(&g, &p, &PilParams::default(), &plan).unwrap();
        assert!(eg.energy > 0.0);
        assert!(eg.grad_p.get(8, 8) > 0.0);
    }

    #[test]
    fn energy_shrinks_as_discs_overlap() {
        let plan = SpectralPlan::new(64, 64, 1.0).unwrap();
        let g = BinaryMask::disc(64, 64, 32.0, 32.0, 6.0);
        let params = PilParams::with_alpha(1.0);
        let energies: Vec<f64> = [12.0, 8.0, 4.0, 0.0]
            .iter()
            .map(|d| {
                let p = BinaryMask::disc(64, 64, 32.0 + d, 32.0, 6.0).to_field();
                loss(&g, &p, &params, &plan).unwrap()
            })
            .collect();
        for pair in energies.windows(2) {
            assert!(pair[1] < pair[0], "{energies:?}");
        }
    }

    #[test]
    fn bench_csv_format() {
        let rows = bench_paths(&[8, 16], 1).unwrap();
        let csv = bench_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("size,t_fft_ns,t_direct_ns,ratio"));
        assert_eq!(lines.count(), 2);
        assert!(bench_paths(&[8], 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn energy_nonnegative(seed in any::<u64>()) {
                let plan = SpectralPlan::new(12, 10, 1.0).unwrap();
                prop_assert!(energy_spectral(&random_field(12, 10, seed), &plan, 1.0).unwrap() >= -1e-12);
            }

            #[test]
            fn swap_symmetry_at_unit_alpha(seed in any::<u64>()) {
                let plan = SpectralPlan::new(12, 12, 1.0).unwrap();
                let g = random_mask(12, 12, seed).to_field();
                let h = random_probs(12, 12, seed ^ 0xABCD);
                let e1 = energy_spectral(&combined_field(&g, &h, 1.0).unwrap(), &plan, 1.0).unwrap();
                let e2 = energy_spectral(&combined_field(&h, &g, 1.0).unwrap(), &plan, 1.0).unwrap();
                prop_assert_eq!(e1, e2);
            }

            #[test]
            fn translation_invariant(seed in any::<u64>(), dx in -12isize..12, dy in -12isize..12) {
                let plan = SpectralPlan::new(12, 12, 1.0).unwrap();
                let g = random_mask(12, 12, seed);
                let p = random_probs(12, 12, seed.wrapping_add(1));
                let params = PilParams::default();
                let e = loss(&g, &p, &params, &plan).unwrap();
                let es = loss(&g.shifted(dx, dy), &p.shifted(dx, dy), &params, &plan).unwrap();
                prop_assert!((e - es).abs() <= 1e-10 * e.max(1e-300));
            }

            #[test]
            fn annihilation_on_random_masks(seed in any::<u64>()) {
                let plan = SpectralPlan::new(12, 12, 1.0).unwrap();
                let g = random_mask(12, 12, seed);
                let e = loss(&g, &g.to_field(), &PilParams::with_alpha(1.0), &plan).unwrap();
                prop_assert!(e <= 1e-10 * 144.0);
            }
        }
    }
}
