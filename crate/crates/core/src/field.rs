//! Grid containers and the smoothed Heaviside lift.
//!
//! Probability maps `P` become level sets through `phi = P - 0.5`, so
//! `phi > 0` inside the predicted region. The level set is then lifted to a
//! smooth indicator `H(phi)` with half-width `beta`, either the sinusoidal
//! ramp or the piecewise-linear HardTanh ramp.

use std::f64::consts::PI;

use crate::{Error, Result};

const PROB_TOLERANCE: f64 = 1e-9;

/// Real-valued `width x height` grid stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    width: usize,
    height: usize,
    spacing: f64,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_spacing(width, height, 1.0, values)
    }

    pub fn with_spacing(width: usize, height: usize, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "width and height must be positive",
            });
        }
        if values.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "value count does not match width * height",
            });
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "spacing",
                reason: format!("must be positive and finite, got {spacing}"),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            spacing,
            values,
        })
    }

    /// Constant field. Panics on zero dimensions or a non-finite fill.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "field dimensions must be positive");
        assert!(value.is_finite(), "fill value must be finite");
        Self {
            width,
            height,
            spacing: 1.0,
            values: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Builds a field from `f(x, y)`. Panics if `f` yields a non-finite value.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values).expect("from_fn produced an invalid field")
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
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the raw values. Callers must keep every entry finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.values[y * self.width + x] = value;
    }

    pub fn same_dims<T: Dims>(&self, other: &T) -> bool {
        self.width == other.width() && self.height == other.height()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            spacing: self.spacing,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// Cyclic shift: the value at `(x, y)` moves to `(x + dx, y + dy)` modulo the size.
    pub fn shifted(&self, dx: isize, dy: isize) -> Self {
        let (w, h) = (self.width as isize, self.height as isize);
        let mut out = self.clone();
        for y in 0..h {
            for x in 0..w {
                let tx = (x + dx).rem_euclid(w) as usize;
                let ty = (y + dy).rem_euclid(h) as usize;
                out.values[ty * self.width + tx] = self.values[(y * w + x) as usize];
            }
        }
        out
    }

    /// Thresholds at `threshold` using `>=`.
    pub fn threshold(&self, threshold: f64) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| u8::from(v >= threshold)).collect(),
        }
    }

    pub(crate) fn check_dims<T: Dims>(&self, other: &T) -> Result<()> {
        check_dims(self.width, self.height, other)
    }
}

/// Anything with grid dimensions.
pub trait Dims {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
}

impl Dims for ScalarField2D {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

impl Dims for BinaryMask {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

pub(crate) fn check_dims<T: Dims>(width: usize, height: usize, other: &T) -> Result<()> {
    if width == other.width() && height == other.height() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected_w: width,
            expected_h: height,
            got_w: other.width(),
            got_h: other.height(),
        })
    }
}

/// Binary `{0, 1}` mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "mask needs positive dimensions and width * height values",
            });
        }
        if let Some(index) = values.iter().position(|&v| v > 1) {
            return Err(Error::NotBinary {
                index,
                value: f64::from(values[index]),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0; width * height]).expect("positive mask dimensions")
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(u8::from(f(x, y)));
            }
        }
        Self::new(width, height, values).expect("positive mask dimensions")
    }

    /// Filled disc of the given radius around `(cx, cy)`, measured between pixel centres.
    pub fn disc(width: usize, height: usize, cx: f64, cy: f64, radius: f64) -> Self {
        Self::from_fn(width, height, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            dx * dx + dy * dy <= radius * radius
        })
    }

    /// Accepts a real field whose entries are exactly 0 or 1.
    pub fn from_field(field: &ScalarField2D) -> Result<Self> {
        let mut values = Vec::with_capacity(field.len());
        for (index, &v) in field.values().iter().enumerate() {
            if v == 0.0 {
                values.push(0);
            } else if v == 1.0 {
                values.push(1);
            } else {
                return Err(Error::NotBinary { index, value: v });
            }
        }
        Self::new(field.width(), field.height(), values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x] == 1
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.values[y * self.width + x] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn foreground_fraction(&self) -> f64 {
        self.count() as f64 / self.len() as f64
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn to_field(&self) -> ScalarField2D {
        ScalarField2D {
            width: self.width,
            height: self.height,
            spacing: 1.0,
            values: self.values.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn shifted(&self, dx: isize, dy: isize) -> Self {
        let shifted = self.to_field().shifted(dx, dy);
        Self::from_field(&shifted).expect("shift preserves binary values")
    }
}

/// Shape of the smoothed Heaviside ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeavisideKind {
    /// `0.5 * (sin(pi * phi / (2 beta)) + 1)` on `|phi| < beta`.
    Sinusoidal,
    /// `clamp(phi / (2 beta) + 0.5, 0, 1)`.
    #[default]
    HardTanh,
}

impl std::str::FromStr for HeavisideKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sinusoidal" | "sin" => Ok(Self::Sinusoidal),
            "hardtanh" => Ok(Self::HardTanh),
            other => Err(Error::InvalidParameter {
                name: "heaviside",
                reason: format!("unknown kind `{other}` (expected sinusoidal or hardtanh)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavisideSpec {
    beta: f64,
    kind: HeavisideKind,
}

impl Default for HeavisideSpec {
    fn default() -> Self {
        Self {
            beta: 0.25,
            kind: HeavisideKind::HardTanh,
        }
    }
}

impl HeavisideSpec {
    pub fn new(beta: f64, kind: HeavisideKind) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must be positive and finite, got {beta}"),
            });
        }
        Ok(Self { beta, kind })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kind(&self) -> HeavisideKind {
        self.kind
    }
}

/// `phi = P - 0.5`. Rejects probabilities outside `[0, 1]` by more than `1e-9`.
pub fn prob_to_levelset(p: &ScalarField2D) -> Result<ScalarField2D> {
    check_probabilities(p)?;
    Ok(p.map(|v| v - 0.5))
}

pub(crate) fn check_probabilities(p: &ScalarField2D) -> Result<()> {
    match p
        .values()
        .iter()
        .position(|&v| !(-PROB_TOLERANCE..=1.0 + PROB_TOLERANCE).contains(&v))
    {
        Some(index) => Err(Error::OutOfRange {
            index,
            value: p.values()[index],
        }),
        None => Ok(()),
    }
}

/// Upper half of the ramp, `phi >= 0`. Result lies in `[0.5, 1]`.
fn upper_half(phi: f64, spec: &HeavisideSpec) -> f64 {
    let beta = spec.beta;
    if phi >= beta {
        return 1.0;
    }
    match spec.kind {
        HeavisideKind::Sinusoidal => 0.5 * ((PI * phi / (2.0 * beta)).sin() + 1.0),
        HeavisideKind::HardTanh => phi / (2.0 * beta) + 0.5,
    }
}

/// Smoothed Heaviside. Negative arguments are evaluated as `1 - H(-phi)`,
/// which makes `H(phi) + H(-phi) == 1` hold exactly in floating point.
pub fn heaviside(phi: f64, spec: &HeavisideSpec) -> f64 {
    if phi >= 0.0 {
        upper_half(phi, spec)
    } else {
        1.0 - upper_half(-phi, spec)
    }
}

/// Derivative of [`heaviside`]. At `|phi| == beta` the interior value is returned.
pub fn heaviside_deriv(phi: f64, spec: &HeavisideSpec) -> f64 {
    let beta = spec.beta;
    if phi.abs() > beta {
        return 0.0;
    }
    match spec.kind {
        HeavisideKind::Sinusoidal => (PI / (4.0 * beta)) * (PI * phi / (2.0 * beta)).cos(),
        HeavisideKind::HardTanh => 1.0 / (2.0 * beta),
    }
}

pub fn apply_heaviside(phi: &ScalarField2D, spec: &HeavisideSpec) -> ScalarField2D {
    phi.map(|v| heaviside(v, spec))
}

pub fn apply_heaviside_deriv(phi: &ScalarField2D, spec: &HeavisideSpec) -> ScalarField2D {
    phi.map(|v| heaviside_deriv(v, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sin_spec() -> HeavisideSpec {
        HeavisideSpec::new(0.25, HeavisideKind::Sinusoidal).unwrap()
    }

    fn both() -> [HeavisideSpec; 2] {
        [sin_spec(), HeavisideSpec::default()]
    }

    #[test]
    fn levelset_of_half_is_zero() {
        let p = ScalarField2D::filled(5, 4, 0.5);
        let phi = prob_to_levelset(&p).unwrap();
        assert!(phi.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn levelset_endpoints() {
        let p = ScalarField2D::from_fn(4, 4, |x, y| if (x, y) == (1, 2) { 1.0 } else { 0.0 });
        let phi = prob_to_levelset(&p).unwrap();
        assert_eq!(phi.get(1, 2), 0.5);
        assert_eq!(phi.get(0, 0), -0.5);
        assert_eq!((phi.width(), phi.height()), (4, 4));
    }

    #[test]
    fn levelset_rejects_out_of_range() {
        let p = ScalarField2D::from_fn(3, 3, |x, _| if x == 2 { 1.01 } else { 0.2 });
        assert!(matches!(prob_to_levelset(&p), Err(Error::OutOfRange { index: 2, .. })));
        let ok = ScalarField2D::filled(3, 3, 1.0 + 5e-10);
        assert!(prob_to_levelset(&ok).is_ok());
    }

    #[test]
    fn heaviside_reference_values() {
        for spec in both() {
            assert_eq!(heaviside(0.0, &spec), 0.5);
        }
        let s = sin_spec();
        assert_eq!(heaviside(0.25, &s), 1.0);
        assert_eq!(heaviside(-0.25, &s), 0.0);
        // 0.5 * (sin(pi/4) + 1)
        assert_abs_diff_eq!(heaviside(0.125, &s), 0.853_553_390_593_273_8, epsilon = 1e-15);
    }

    #[test]
    fn heaviside_deriv_reference_values() {
        assert_abs_diff_eq!(heaviside_deriv(0.0, &sin_spec()), PI, epsilon = 1e-15);
        for spec in both() {
            assert_eq!(heaviside_deriv(0.5, &spec), 0.0);
        }
        // Kink returns the interior value.
        assert_eq!(heaviside_deriv(0.25, &HeavisideSpec::default()), 2.0);
        assert_eq!(heaviside_deriv(-0.25, &HeavisideSpec::default()), 2.0);
    }

    #[test]
    fn heaviside_deriv_matches_central_differences() {
        let eps = 1e-5;
        for spec in both() {
            for phi in [-0.2, 0.0, 0.1] {
                let fd = (heaviside(phi + eps, &spec) - heaviside(phi - eps, &spec)) / (2.0 * eps);
                assert_abs_diff_eq!(heaviside_deriv(phi, &spec), fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn deriv_matches_fd_away_from_kinks() {
        let eps = 1e-5;
        for spec in both() {
            let mut phi: f64 = -1.0;
            while phi <= 1.0 {
                if (phi.abs() - spec.beta()).abs() > 2.0 * eps {
                    let fd = (heaviside(phi + eps, &spec) - heaviside(phi - eps, &spec)) / (2.0 * eps);
                    assert_abs_diff_eq!(heaviside_deriv(phi, &spec), fd, epsilon = 1e-6);
                }
                phi += 1e-3;
            }
        }
    }

    #[test]
    fn range_on_dense_sweep() {
        for spec in both() {
            for i in -10_000..=10_000 {
                let h = heaviside(i as f64 * 1e-3, &spec);
                assert!((0.0..=1.0).contains(&h));
            }
        }
    }

    #[test]
    fn hardtanh_saturates_on_binary_levelsets() {
        let mask = BinaryMask::disc(9, 9, 4.0, 4.0, 2.5);
        let phi = prob_to_levelset(&mask.to_field()).unwrap();
        for beta in [0.1, 0.25, 0.5] {
            let spec = HeavisideSpec::new(beta, HeavisideKind::HardTanh).unwrap();
            assert_eq!(apply_heaviside(&phi, &spec), mask.to_field());
        }
    }

    #[test]
    fn field_lift_matches_scalar_loop() {
        let phi = ScalarField2D::from_fn(7, 5, |x, y| ((x * 31 + y * 17) % 13) as f64 / 13.0 - 0.5);
        for spec in both() {
            let lifted = apply_heaviside(&phi, &spec);
            let deriv = apply_heaviside_deriv(&phi, &spec);
            for (i, &v) in phi.values().iter().enumerate() {
                assert_eq!(lifted.values()[i].to_bits(), heaviside(v, &spec).to_bits());
                assert_eq!(deriv.values()[i].to_bits(), heaviside_deriv(v, &spec).to_bits());
            }
        }
        let zero = ScalarField2D::zeros(3, 3);
        assert!(apply_heaviside(&zero, &sin_spec()).values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn invalid_inputs() {
        assert!(HeavisideSpec::new(0.0, HeavisideKind::HardTanh).is_err());
        assert!(HeavisideSpec::new(f64::NAN, HeavisideKind::HardTanh).is_err());
        assert!(ScalarField2D::new(2, 2, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
        assert!(ScalarField2D::new(2, 2, vec![0.0; 3]).is_err());
        assert!(ScalarField2D::with_spacing(2, 2, 0.0, vec![0.0; 4]).is_err());
        assert!(BinaryMask::new(2, 1, vec![0, 2]).is_err());
    }

    #[test]
    fn shift_round_trips() {
        let f = ScalarField2D::from_fn(5, 3, |x, y| (x + 10 * y) as f64);
        let s = f.shifted(2, -1);
        assert_eq!(s.get(2, 2), f.get(0, 0));
        assert_eq!(s.shifted(-2, 1), f);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn kinds() -> impl Strategy<Value = HeavisideSpec> {
            (0.01f64..2.0, prop::bool::ANY).prop_map(|(beta, sin)| {
                let kind = if sin { HeavisideKind::Sinusoidal } else { HeavisideKind::HardTanh };
                HeavisideSpec::new(beta, kind).unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn monotone(spec in kinds(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(heaviside(lo, &spec) <= heaviside(hi, &spec));
            }

            #[test]
            fn odd_symmetry_is_exact(spec in kinds(), phi in -3.0f64..3.0) {
                prop_assert_eq!(heaviside(phi, &spec) + heaviside(-phi, &spec), 1.0);
            }
        }
    }
}
