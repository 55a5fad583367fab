//! Fixed-size 2D FFT plan carrying the `|k|` multiplier.
//!
//! On a periodic grid the interaction kernel `1/|x - x'|` acts, up to a
//! constant, as multiplication by `2 pi |k|` in frequency space (the operator
//! `(-Laplacian)^(1/2)`). Conventions: the forward transform is unnormalized,
//! the inverse divides by `width * height`, and frequencies are measured in
//! cycles per unit length so the grid spacing enters only through `k`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::{check_dims, Dims, ScalarField2D};
use crate::{Error, Result};

const MIN_SIDE: usize = 4;
const IMAG_TOLERANCE: f64 = 1e-9;

/// How the finite image is embedded before the spectral kernel is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Cyclic convolution on the image grid itself.
    #[default]
    Periodic,
    /// Embed into a grid twice as large in each direction, filled with zeros,
    /// and crop the result. Closer to the free-space kernel.
    ZeroPadded,
}

impl Boundary {
    /// Transform size needed for a `width x height` field.
    pub fn transform_dims(self, width: usize, height: usize) -> (usize, usize) {
        match self {
            Self::Periodic => (width, height),
            Self::ZeroPadded => (2 * width, 2 * height),
        }
    }
}

/// Complex grid used as transform workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2D {
    width: usize,
    height: usize,
    values: Vec<Complex64>,
}

impl ComplexField2D {
    pub fn new(width: usize, height: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "value count does not match width * height",
            });
        }
        if let Some(index) = values.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
}

impl Dims for ComplexField2D {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

/// Precomputed transforms and `|k|` grid for one field size.
///
/// A built plan is immutable; transform calls allocate their own scratch, so
/// one plan can be shared across threads.
#[derive(Clone)]
pub struct SpectralPlan {
    width: usize,
    height: usize,
    spacing: f64,
    k_mag: Vec<f64>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("spacing", &self.spacing)
            .finish_non_exhaustive()
    }
}

/// Signed discrete frequency of bin `index` on an axis of `size` samples, in cycles per unit length.
fn frequency(index: usize, size: usize, spacing: f64) -> f64 {
    let signed = if index < size.div_ceil(2) {
        index as f64
    } else {
        index as f64 - size as f64
    };
    signed / (size as f64 * spacing)
}

impl SpectralPlan {
    pub fn new(width: usize, height: usize, spacing: f64) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "spectral plans need at least 4 samples per side",
            });
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "spacing",
                reason: format!("must be positive and finite, got {spacing}"),
            });
        }
        let mut k_mag = Vec::with_capacity(width * height);
        for j in 0..height {
            let fy = frequency(j, height, spacing);
            for i in 0..width {
                let fx = frequency(i, width, spacing);
                k_mag.push(2.0 * PI * (fx * fx + fy * fy).sqrt());
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            width,
            height,
            spacing,
            k_mag,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        })
    }

    /// Plan sized for evaluating `width x height` fields under `boundary`.
    pub fn for_boundary(width: usize, height: usize, spacing: f64, boundary: Boundary) -> Result<Self> {
        let (w, h) = boundary.transform_dims(width, height);
        Self::new(w, h, spacing)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn k_mag(&self) -> &[f64] {
        &self.k_mag
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (w, h) = (self.width, self.height);
        let (rows, cols) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        // Batched over all rows.
        rows.process(data);
        let mut columns = vec![Complex64::default(); w * h];
        for j in 0..h {
            for i in 0..w {
                columns[i * h + j] = data[j * w + i];
            }
        }
        cols.process(&mut columns);
        for i in 0..w {
            for j in 0..h {
                data[j * w + i] = columns[i * h + j];
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, f: &ScalarField2D) -> Result<ComplexField2D> {
        check_dims(self.width, self.height, f)?;
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        Ok(ComplexField2D {
            width: self.width,
            height: self.height,
            values: data,
        })
    }

    /// Inverse transform scaled by `1 / (width * height)`, keeping the real part.
    ///
    /// Fails if the discarded imaginary part exceeds `1e-9 * (max |re| + 1)`,
    /// which indicates a spectrum without conjugate symmetry.
    pub fn inverse_real(&self, spectrum: &ComplexField2D) -> Result<ScalarField2D> {
        check_dims(self.width, self.height, spectrum)?;
        let mut data = spectrum.values.clone();
        self.transform(&mut data, true);
        let norm = 1.0 / self.len() as f64;
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        let values: Vec<f64> = data
            .iter()
            .map(|c| {
                let re = c.re * norm;
                max_re = max_re.max(re.abs());
                max_im = max_im.max((c.im * norm).abs());
                re
            })
            .collect();
        if max_im > IMAG_TOLERANCE * (max_re + 1.0) {
            return Err(Error::ImaginaryResidual {
                residual: max_im,
                scale: max_re,
            });
        }
        ScalarField2D::with_spacing(self.width, self.height, self.spacing, values)
    }

    /// Multiplies a spectrum by `|k|` in place.
    pub fn multiply_k(&self, spectrum: &mut ComplexField2D) -> Result<()> {
        check_dims(self.width, self.height, spectrum)?;
        for (c, &k) in spectrum.values.iter_mut().zip(&self.k_mag) {
            *c *= k;
        }
        Ok(())
    }
}

/// `inverse_real(|k| * forward(f))`: the periodic half-Laplacian of `f`.
pub fn apply_halfnorm(f: &ScalarField2D, plan: &SpectralPlan) -> Result<ScalarField2D> {
    let mut spectrum = plan.forward(f)?;
    plan.multiply_k(&mut spectrum)?;
    plan.inverse_real(&spectrum)
}

/// Zero-padded variant of [`apply_halfnorm`]: `plan` must be twice the field size
/// in each direction. The result is cropped back to the field's dimensions.
pub fn apply_halfnorm_zero_padded(f: &ScalarField2D, plan: &SpectralPlan) -> Result<ScalarField2D> {
    let (w, h) = (f.width(), f.height());
    if plan.width() != 2 * w || plan.height() != 2 * h {
        return Err(Error::DimensionMismatch {
            expected_w: plan.width(),
            expected_h: plan.height(),
            got_w: 2 * w,
            got_h: 2 * h,
        });
    }
    let padded = ScalarField2D::from_fn(2 * w, 2 * h, |x, y| if x < w && y < h { f.get(x, y) } else { 0.0 });
    let out = apply_halfnorm(&padded, plan)?;
    Ok(ScalarField2D::from_fn(w, h, |x, y| out.get(x, y)))
}

/// Applies the half-Laplacian under the requested boundary handling.
pub fn apply_halfnorm_with(f: &ScalarField2D, plan: &SpectralPlan, boundary: Boundary) -> Result<ScalarField2D> {
    match boundary {
        Boundary::Periodic => apply_halfnorm(f, plan),
        Boundary::ZeroPadded => apply_halfnorm_zero_padded(f, plan),
    }
}

/// Real-space periodic kernel `K` with `apply_halfnorm(f) = K (*) f` (cyclic convolution).
pub fn kernel_table(plan: &SpectralPlan) -> ScalarField2D {
    let spectrum = ComplexField2D {
        width: plan.width,
        height: plan.height,
        values: plan.k_mag.iter().map(|&k| Complex64::new(k, 0.0)).collect(),
    };
    plan.inverse_real(&spectrum)
        .expect("|k| is real and even, so its inverse transform is real")
}
