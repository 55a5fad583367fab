//! Browser bindings for the demo page in `www/`.
//!
//! Three interactive pieces: phantom generation, the energy and force between
//! two discs, and a step-by-step gradient flow. Every image crosses the
//! boundary as row-major RGBA bytes ready for `ImageData`.

use elastic_seg::elastic_loss::{loss_and_grad, PilParams};
use elastic_seg::evolve::{iou, shifted_init};
use elastic_seg::phantom::{generate, PhantomSpec};
use elastic_seg::{BinaryMask, ScalarField2D, SpectralPlan};
use wasm_bindgen::prelude::*;

fn js_err(e: elastic_seg::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn grey_rgba(f: &ScalarField2D) -> Vec<u8> {
    f.values()
        .iter()
        .flat_map(|&v| {
            let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            [g, g, g, 255]
        })
        .collect()
}

/// Blue for negative, white at zero, red for positive; scaled by `max |f|`.
fn diverging_rgba(f: &ScalarField2D) -> Vec<u8> {
    let scale = f.max_abs().max(f64::MIN_POSITIVE);
    f.values()
        .iter()
        .flat_map(|&v| {
            let t = (v / scale).clamp(-1.0, 1.0);
            let fade = (255.0 * (1.0 - t.abs())).round() as u8;
            if t >= 0.0 {
                [255, fade, fade, 255]
            } else {
                [fade, fade, 255, 255]
            }
        })
        .collect()
}

fn is_edge(mask: &BinaryMask, x: usize, y: usize) -> bool {
    if !mask.get(x, y) {
        return false;
    }
    let (w, h) = (mask.width(), mask.height());
    x == 0 || y == 0 || x + 1 == w || y + 1 == h || !mask.get(x - 1, y) || !mask.get(x + 1, y) || !mask.get(x, y - 1) || !mask.get(x, y + 1)
}

fn paint_edges(rgba: &mut [u8], mask: &BinaryMask, color: [u8; 3]) {
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if is_edge(mask, x, y) {
                let i = 4 * (y * mask.width() + x);
                rgba[i..i + 3].copy_from_slice(&color);
            }
        }
    }
}

/// A generated phantom.
#[wasm_bindgen]
pub struct PhantomView {
    image: ScalarField2D,
    mask: BinaryMask,
}

impl PhantomView {
    pub fn build(size: usize, seed: u32, contrast: f64, noise: f64, branches: usize) -> elastic_seg::Result<Self> {
        let spec = PhantomSpec {
            width: size,
            height: size,
            n_branches: branches,
            contrast,
            noise_sigma: noise,
            seed: u64::from(seed),
            ..PhantomSpec::default()
        };
        let ph = generate(&spec)?;
        Ok(Self {
            image: ph.image,
            mask: ph.mask,
        })
    }
}

#[wasm_bindgen]
impl PhantomView {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, seed: u32, contrast: f64, noise: f64, branches: usize) -> Result<PhantomView, JsError> {
        Self::build(size, seed, contrast, noise, branches).map_err(js_err)
    }

    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.image.width()
    }

    #[wasm_bindgen(getter, js_name = foregroundFraction)]
    pub fn foreground_fraction(&self) -> f64 {
        self.mask.foreground_fraction()
    }

    #[wasm_bindgen(js_name = imageRgba)]
    pub fn image_rgba(&self) -> Vec<u8> {
        grey_rgba(&self.image)
    }

    /// The image with the vessel outline drawn in.
    #[wasm_bindgen(js_name = overlayRgba)]
    pub fn overlay_rgba(&self) -> Vec<u8> {
        let mut rgba = grey_rgba(&self.image);
        paint_edges(&mut rgba, &self.mask, [230, 60, 40]);
        rgba
    }

    #[wasm_bindgen(js_name = maskRgba)]
    pub fn mask_rgba(&self) -> Vec<u8> {
        grey_rgba(&self.mask.to_field())
    }
}

/// Truth disc left of centre, predicted disc right of centre, `offset` apart.
/// The prediction sits at `0.5 +/- beta` so its smoothed indicator is exactly
/// the disc while the force stays nonzero.
fn disc_pair(size: usize, radius: f64, offset: f64, params: &PilParams) -> (BinaryMask, ScalarField2D) {
    let c = size as f64 / 2.0;
    let gt = BinaryMask::disc(size, size, c - offset / 2.0, c, radius);
    let pred = BinaryMask::disc(size, size, c + offset / 2.0, c, radius);
    let beta = params.heaviside.beta().min(0.5);
    (gt, pred.to_field().map(|v| 0.5 + beta * (2.0 * v - 1.0)))
}

/// Energy and force map (`-dE/dP`, red pulls probability up) for a disc pair.
#[wasm_bindgen]
pub struct DiscPair {
    energy: f64,
    rgba: Vec<u8>,
}

impl DiscPair {
    pub fn build(size: usize, radius: f64, offset: f64, alpha: f64) -> elastic_seg::Result<Self> {
        let params = PilParams::with_alpha(alpha);
        let plan = SpectralPlan::new(size, size, 1.0)?;
        let (gt, p) = disc_pair(size, radius, offset, &params);
        let eg = loss_and_grad(&gt, &p, &params, &plan)?;
        let mut rgba = diverging_rgba(&eg.grad_p.map(|g| -g));
        paint_edges(&mut rgba, &gt, [0, 0, 0]);
        paint_edges(&mut rgba, &p.threshold(0.5), [0, 150, 0]);
        Ok(Self { energy: eg.energy, rgba })
    }
}

#[wasm_bindgen]
impl DiscPair {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, radius: f64, offset: f64, alpha: f64) -> Result<DiscPair, JsError> {
        Self::build(size, radius, offset, alpha).map_err(js_err)
    }

    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> f64 {
        self.energy
    }

    #[wasm_bindgen(js_name = forceRgba)]
    pub fn force_rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
}

/// Energy of the disc pair at offsets `0, 1, ..., max_offset`.
#[wasm_bindgen(js_name = energyCurve)]
pub fn energy_curve(size: usize, radius: f64, alpha: f64, max_offset: usize) -> Result<Vec<f64>, JsError> {
    energy_curve_inner(size, radius, alpha, max_offset).map_err(js_err)
}

pub fn energy_curve_inner(size: usize, radius: f64, alpha: f64, max_offset: usize) -> elastic_seg::Result<Vec<f64>> {
    let params = PilParams::with_alpha(alpha);
    let plan = SpectralPlan::new(size, size, 1.0)?;
    (0..=max_offset)
        .map(|d| {
            let (gt, p) = disc_pair(size, radius, d as f64, &params);
            loss_and_grad(&gt, &p, &params, &plan).map(|eg| eg.energy)
        })
        .collect()
}

/// Interactive projected gradient flow toward a target mask.
#[wasm_bindgen]
pub struct Evolution {
    gt: BinaryMask,
    p: ScalarField2D,
    params: PilParams,
    plan: SpectralPlan,
    eta: f64,
    energies: Vec<f64>,
}

impl Evolution {
    /// `target`: "disc" or "two-discs"; `init`: "shifted" or "uniform".
    pub fn build(size: usize, target: &str, init: &str, shift: i32, alpha: f64, eta: f64) -> elastic_seg::Result<Self> {
        let bad = |name, reason: String| elastic_seg::Error::InvalidParameter { name, reason };
        let s = size as f64;
        let gt = match target {
            "disc" => BinaryMask::disc(size, size, s / 2.0, s / 2.0, s * 0.1),
            "two-discs" => BinaryMask::from_fn(size, size, |x, y| {
                let (x, y) = (x as f64, y as f64);
                let a = (x - 0.3 * s).powi(2) + (y - 0.35 * s).powi(2) <= (0.11 * s).powi(2);
                let b = (x - 0.68 * s).powi(2) + (y - 0.62 * s).powi(2) <= (0.13 * s).powi(2);
                a || b
            }),
            other => return Err(bad("target", format!("unknown target `{other}`"))),
        };
        let params = PilParams::with_alpha(alpha);
        params.validate()?;
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(bad("eta", format!("must be positive, got {eta}")));
        }
        let p = match init {
            "shifted" => shifted_init(&gt, shift as isize, 0, params.heaviside.beta()),
            "uniform" => ScalarField2D::filled(size, size, 0.5),
            other => return Err(bad("init", format!("unknown start `{other}`"))),
        };
        let plan = SpectralPlan::new(size, size, 1.0)?;
        let energy = loss_and_grad(&gt, &p, &params, &plan)?.energy;
        Ok(Self {
            gt,
            p,
            params,
            plan,
            eta,
            energies: vec![energy],
        })
    }

    pub fn advance(&mut self, n: usize) -> elastic_seg::Result<f64> {
        for _ in 0..n {
            let eg = loss_and_grad(&self.gt, &self.p, &self.params, &self.plan)?;
            for (v, g) in self.p.values_mut().iter_mut().zip(eg.grad_p.values()) {
                *v = (*v - self.eta * g).clamp(0.0, 1.0);
            }
            let next = loss_and_grad(&self.gt, &self.p, &self.params, &self.plan)?.energy;
            self.energies.push(next);
        }
        Ok(*self.energies.last().expect("initial energy recorded"))
    }
}

#[wasm_bindgen]
impl Evolution {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, target: &str, init: &str, shift: i32, alpha: f64, eta: f64) -> Result<Evolution, JsError> {
        Self::build(size, target, init, shift, alpha, eta).map_err(js_err)
    }

    /// Runs `n` steps and returns the energy afterwards.
    pub fn step(&mut self, n: usize) -> Result<f64, JsError> {
        self.advance(n).map_err(js_err)
    }

    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> usize {
        self.energies.len() - 1
    }

    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> f64 {
        *self.energies.last().expect("initial energy recorded")
    }

    /// Energy before the first step and after each step so far.
    pub fn energies(&self) -> Vec<f64> {
        self.energies.clone()
    }

    /// IoU of `P >= 0.5` with the target.
    pub fn iou(&self) -> f64 {
        iou(&self.p.threshold(0.5), &self.gt).unwrap_or(0.0)
    }

    /// Probability map in grey with the target outline in red.
    pub fn rgba(&self) -> Vec<u8> {
        let mut rgba = grey_rgba(&self.p);
        paint_edges(&mut rgba, &self.gt, [230, 60, 40]);
        rgba
    }
}
