//! Pixel-overlap and distance-weighted comparison losses.
//!
//! Every loss returns `(value, dL/dP)` so it can drive the same training loop
//! as the elastic loss.

use crate::field::{BinaryMask, ScalarField2D};
use crate::Result;

/// Probability clamp used by the cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy over all pixels.
pub fn bce_loss_grad(p: &ScalarField2D, gt: &BinaryMask) -> Result<(f64, ScalarField2D)> {
    p.check_dims(gt)?;
    let n = p.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(p.len());
    for (&pv, &g) in p.values().iter().zip(gt.values()) {
        let q = pv.clamp(BCE_EPS, 1.0 - BCE_EPS);
        let g = f64::from(g);
        loss -= g * q.ln() + (1.0 - g) * (1.0 - q).ln();
        grad.push(-(g / q - (1.0 - g) / (1.0 - q)) / n);
    }
    Ok((loss / n, ScalarField2D::new(p.width(), p.height(), grad)?))
}

/// Soft Dice loss `1 - (2 sum PG + s) / (sum P + sum G + s)`.
pub fn dice_loss_grad(p: &ScalarField2D, gt: &BinaryMask, smooth: f64) -> Result<(f64, ScalarField2D)> {
    p.check_dims(gt)?;
    let mut inter = 0.0;
    let mut total = 0.0;
    for (&pv, &g) in p.values().iter().zip(gt.values()) {
        let g = f64::from(g);
        inter += pv * g;
        total += pv + g;
    }
    let num = 2.0 * inter + smooth;
    let den = total + smooth;
    let grad = gt
        .values()
        .iter()
        .map(|&g| -(2.0 * f64::from(g) * den - num) / (den * den))
        .collect();
    Ok((1.0 - num / den, ScalarField2D::new(p.width(), p.height(), grad)?))
}

/// Exact Euclidean distance (in pixels) to the nearest foreground pixel.
///
/// Separable lower-envelope-of-parabolas transform, columns then rows. Only
/// finite samples enter the envelope, so squared distances stay exact
/// integers. An all-background mask yields `width + height` everywhere.
pub fn distance_transform(mask: &BinaryMask) -> ScalarField2D {
    let (w, h) = (mask.width(), mask.height());
    if mask.count() == 0 {
        return ScalarField2D::filled(w, h, (w + h) as f64);
    }
    let mut sq: Vec<f64> = mask
        .values()
        .iter()
        .map(|&v| if v == 1 { 0.0 } else { f64::INFINITY })
        .collect();

    let mut line = vec![0.0; w.max(h)];
    let mut out = vec![0.0; w.max(h)];
    let mut env = Envelope::with_capacity(w.max(h));
    for x in 0..w {
        for y in 0..h {
            line[y] = sq[y * w + x];
        }
        env.transform(&line[..h], &mut out[..h]);
        for y in 0..h {
            sq[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        line[..w].copy_from_slice(&sq[y * w..(y + 1) * w]);
        env.transform(&line[..w], &mut out[..w]);
        sq[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    ScalarField2D::new(w, h, sq.into_iter().map(f64::sqrt).collect()).expect("finite distances")
}

struct Envelope {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            vertices: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    /// `out[q] = min_p (q - p)^2 + f[p]`; infinite samples are skipped.
    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        self.vertices.clear();
        self.bounds.clear();
        let parabola = |p: usize| f[p] + (p * p) as f64;
        for q in (0..f.len()).filter(|&q| f[q].is_finite()) {
            if self.vertices.is_empty() {
                self.vertices.push(q);
                self.bounds.push(f64::NEG_INFINITY);
                continue;
            }
            loop {
                let v = *self.vertices.last().expect("non-empty envelope");
                let s = (parabola(q) - parabola(v)) / (2.0 * (q - v) as f64);
                if s <= *self.bounds.last().expect("bound per vertex") {
                    self.vertices.pop();
                    self.bounds.pop();
                    if self.vertices.is_empty() {
                        self.vertices.push(q);
                        self.bounds.push(f64::NEG_INFINITY);
                        break;
                    }
                } else {
                    self.vertices.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }
        if self.vertices.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            while k + 1 < self.vertices.len() && self.bounds[k + 1] < q as f64 {
                k += 1;
            }
            let v = self.vertices[k];
            let d = q as f64 - v as f64;
            *o = d * d + f[v];
        }
    }
}

/// Signed distance map: positive outside the mask, negative inside.
pub fn signed_distance(mask: &BinaryMask) -> ScalarField2D {
    let outside = distance_transform(mask);
    let inside = distance_transform(&mask.complement());
    let values = outside.values().iter().zip(inside.values()).map(|(o, i)| o - i).collect();
    ScalarField2D::new(mask.width(), mask.height(), values).expect("finite distances")
}

/// Surface loss `mean(P * sdf(G))`; the gradient is `sdf / N`.
pub fn surface_loss_grad(p: &ScalarField2D, gt: &BinaryMask) -> Result<(f64, ScalarField2D)> {
    p.check_dims(gt)?;
    let sdf = signed_distance(gt);
    let n = p.len() as f64;
    let loss = p.dot(&sdf) / n;
    Ok((loss, sdf.map(|v| v / n)))
}
