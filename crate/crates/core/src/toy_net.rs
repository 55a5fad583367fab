//! A three-layer convolutional segmenter with hand-written backprop and Adam.
//!
//! Architecture: `conv3x3(1->8) + ReLU`, `conv3x3(8->8) + ReLU`,
//! `conv1x1(8->1) + sigmoid`, zero "same" padding throughout. Parameters are
//! exposed as one flat vector (per layer: weights in `[out][in][ky][kx]`
//! order, then biases) so the optimizer and finite-difference checks can
//! address them uniformly.
//!
//! # Checkpoint layout
//!
//! ```text
//! magic        4 bytes  "EBL1"
//! layer_count  u32 LE
//! per layer:
//!   in_channels   u32 LE
//!   out_channels  u32 LE
//!   kernel_size   u32 LE   (1 or 3)
//!   activation    u32 LE   (0 identity, 1 relu, 2 sigmoid)
//!   weights       out*in*k*k f64 LE, [out][in][ky][kx]
//!   biases        out f64 LE
//! ```

use std::path::Path;
use std::str::FromStr;

use crate::baselines::{bce_loss_grad, dice_loss_grad, surface_loss_grad};
use crate::elastic_loss::{loss_and_grad, PilParams};
use crate::field::{BinaryMask, ScalarField2D};
use crate::phantom::SplitMix64;
use crate::spectral::SpectralPlan;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EBL1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn code(self) -> u32 {
        match self {
            Self::Identity => 0,
            Self::Relu => 1,
            Self::Sigmoid => 2,
        }
    }

    fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Self::Identity),
            1 => Ok(Self::Relu),
            2 => Ok(Self::Sigmoid),
            other => Err(Error::Checkpoint(format!("unknown activation code {other}"))),
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Relu => x.max(0.0),
            Self::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    fn deriv(self, pre: f64, out: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Sigmoid => out * (1.0 - out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize, activation: Activation) -> Self {
        assert!(kernel_size == 1 || kernel_size == 3, "kernel size must be 1 or 3");
        Self {
            in_channels,
            out_channels,
            kernel_size,
            activation,
            weights: vec![0.0; out_channels * in_channels * kernel_size * kernel_size],
            bias: vec![0.0; out_channels],
        }
    }

    /// Uniform in `+-sqrt(1 / fan_in)` for weights and biases alike.
    fn init_uniform(&mut self, rng: &mut SplitMix64) {
        let bound = (1.0 / (self.in_channels * self.kernel_size * self.kernel_size) as f64).sqrt();
        for w in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            *w = rng.uniform(-bound, bound);
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn weight_index(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * self.kernel_size + ky) * self.kernel_size + kx
    }

    /// Returns `(pre_activation, output)`, both `[out][y][x]`.
    fn forward(&self, input: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
        let plane = w * h;
        let r = (self.kernel_size / 2) as isize;
        let mut pre = vec![0.0; self.out_channels * plane];
        for o in 0..self.out_channels {
            let out = &mut pre[o * plane..(o + 1) * plane];
            out.fill(self.bias[o]);
            for i in 0..self.in_channels {
                let src = &input[i * plane..(i + 1) * plane];
                for ky in 0..self.kernel_size {
                    for kx in 0..self.kernel_size {
                        let wv = self.weights[self.weight_index(o, i, ky, kx)];
                        let (dy, dx) = (ky as isize - r, kx as isize - r);
                        let (x0, x1) = valid_range(dx, w);
                        let (y0, y1) = valid_range(dy, h);
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let orow = &mut out[y * w + x0..y * w + x1];
                            let srow = &src[sy * w + (x0 as isize + dx) as usize..];
                            for (o_px, s_px) in orow.iter_mut().zip(srow) {
                                *o_px += wv * s_px;
                            }
                        }
                    }
                }
            }
        }
        let out = pre.iter().map(|&v| self.activation.apply(v)).collect();
        (pre, out)
    }

    /// Accumulates parameter gradients into `grads` (this layer's slice) and
    /// returns the gradient with respect to the input when `need_input` is set.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        input: &[f64],
        pre: &[f64],
        out: &[f64],
        grad_out: &[f64],
        w: usize,
        h: usize,
        grads: &mut [f64],
        need_input: bool,
    ) -> Option<Vec<f64>> {
        let plane = w * h;
        let r = (self.kernel_size / 2) as isize;
        let grad_pre: Vec<f64> = grad_out
            .iter()
            .zip(pre.iter().zip(out))
            .map(|(g, (&p, &o))| g * self.activation.deriv(p, o))
            .collect();
        let (dweights, dbias) = grads.split_at_mut(self.weights.len());
        let mut grad_in = need_input.then(|| vec![0.0; self.in_channels * plane]);
        for o in 0..self.out_channels {
            let gp = &grad_pre[o * plane..(o + 1) * plane];
            dbias[o] += gp.iter().sum::<f64>();
            for i in 0..self.in_channels {
                let src = &input[i * plane..(i + 1) * plane];
                for ky in 0..self.kernel_size {
                    for kx in 0..self.kernel_size {
                        let widx = self.weight_index(o, i, ky, kx);
                        let wv = self.weights[widx];
                        let (dy, dx) = (ky as isize - r, kx as isize - r);
                        let (x0, x1) = valid_range(dx, w);
                        let (y0, y1) = valid_range(dy, h);
                        let mut acc = 0.0;
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let grow = &gp[y * w + x0..y * w + x1];
                            let start = sy * w + (x0 as isize + dx) as usize;
                            let srow = &src[start..start + (x1 - x0)];
                            for (g, s) in grow.iter().zip(srow) {
                                acc += g * s;
                            }
                            if let Some(gi) = grad_in.as_mut() {
                                let dst = &mut gi[i * plane + start..i * plane + start + (x1 - x0)];
                                for (d, g) in dst.iter_mut().zip(grow) {
                                    *d += wv * g;
                                }
                            }
                        }
                        dweights[widx] += acc;
                    }
                }
            }
        }
        grad_in
    }
}

/// Output pixels `lo..hi` whose tap at offset `d` lands inside `0..n`.
fn valid_range(d: isize, n: usize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d.max(0)).max(0) as usize;
    (lo.min(hi), hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyNet {
    layers: Vec<ConvLayer>,
}

/// Activations kept from a forward pass for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    width: usize,
    height: usize,
    /// `inputs[l]` is the input to layer `l`.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl ForwardCache {
    /// Which ReLU units were active, across all ReLU layers in order. Two
    /// parameter settings with the same pattern lie on the same smooth piece
    /// of the network function.
    pub fn relu_pattern(&self, net: &ToyNet) -> Vec<bool> {
        net.layers
            .iter()
            .zip(&self.pre)
            .filter(|(l, _)| l.activation == Activation::Relu)
            .flat_map(|(_, pre)| pre.iter().map(|&v| v > 0.0))
            .collect()
    }

    pub fn probabilities(&self) -> ScalarField2D {
        ScalarField2D::new(self.width, self.height, self.output.clone()).expect("finite network output")
    }
}

impl ToyNet {
    /// The fixed architecture with every parameter zero.
    pub fn zeros() -> Self {
        Self {
            layers: vec![
                ConvLayer::zeros(1, 8, 3, Activation::Relu),
                ConvLayer::zeros(8, 8, 3, Activation::Relu),
                ConvLayer::zeros(8, 1, 1, Activation::Sigmoid),
            ],
        }
    }

    /// Seeded uniform initialization.
    pub fn new(seed: u64) -> Self {
        let mut net = Self::zeros();
        let mut rng = SplitMix64::new(seed);
        for layer in &mut net.layers {
            layer.init_uniform(&mut rng);
        }
        net
    }

    pub fn from_layers(layers: Vec<ConvLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network needs at least one layer"));
        }
        if layers[0].in_channels != 1 || layers.last().map(|l| l.out_channels) != Some(1) {
            return Err(Error::InvalidParameter {
                name: "layers",
                reason: "network must map one channel to one channel".into(),
            });
        }
        for pair in layers.windows(2) {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::InvalidParameter {
                    name: "layers",
                    reason: "consecutive layers disagree on channel count".into(),
                });
            }
        }
        for l in &layers {
            if !(l.kernel_size == 1 || l.kernel_size == 3)
                || l.weights.len() != l.out_channels * l.in_channels * l.kernel_size * l.kernel_size
                || l.bias.len() != l.out_channels
            {
                return Err(Error::InvalidParameter {
                    name: "layers",
                    reason: "layer parameter shapes are inconsistent".into(),
                });
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "layers",
                    reason: "non-finite weight".into(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(ConvLayer::num_params).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params(), "parameter vector length");
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
    }

    pub fn forward_cached(&self, image: &ScalarField2D) -> ForwardCache {
        let (w, h) = (image.width(), image.height());
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = image.values().to_vec();
        for layer in &self.layers {
            let (p, out) = layer.forward(&current, w, h);
            inputs.push(current);
            pre.push(p);
            current = out;
        }
        ForwardCache {
            width: w,
            height: h,
            inputs,
            pre,
            output: current,
        }
    }

    /// Foreground probability map, same size as `image`.
    pub fn forward(&self, image: &ScalarField2D) -> ScalarField2D {
        self.forward_cached(image).probabilities()
    }

    /// Gradient of a scalar loss with respect to every parameter, given
    /// `grad_out = dL/dP` for the network output.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &ScalarField2D) -> Result<Vec<f64>> {
        if grad_out.width() != cache.width || grad_out.height() != cache.height {
            return Err(Error::DimensionMismatch {
                expected_w: cache.width,
                expected_h: cache.height,
                got_w: grad_out.width(),
                got_h: grad_out.height(),
            });
        }
        let mut grads = vec![0.0; self.num_params()];
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for l in &self.layers {
            offsets.push(offset);
            offset += l.num_params();
        }
        let mut upstream = grad_out.values().to_vec();
        let mut outputs: Vec<&[f64]> = cache.inputs[1..].iter().map(Vec::as_slice).collect();
        outputs.push(&cache.output);
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let slice = &mut grads[offsets[l]..offsets[l] + layer.num_params()];
            let down = layer.backward(
                &cache.inputs[l],
                &cache.pre[l],
                outputs[l],
                &upstream,
                cache.width,
                cache.height,
                slice,
                l > 0,
            );
            if let Some(d) = down {
                upstream = d;
            }
        }
        Ok(grads)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.num_params() * 8 + self.layers.len() * 16);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            for v in [l.in_channels as u32, l.out_channels as u32, l.kernel_size as u32, l.activation.code()] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for w in l.weights.iter().chain(&l.bias) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = ByteReader { bytes, pos: 0 };
        if reader.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic bytes (expected EBL1)".into()));
        }
        let count = reader.u32()? as usize;
        if count == 0 || count > 64 {
            return Err(Error::Checkpoint(format!("implausible layer count {count}")));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let in_channels = reader.u32()? as usize;
            let out_channels = reader.u32()? as usize;
            let kernel_size = reader.u32()? as usize;
            let activation = Activation::from_code(reader.u32()?)?;
            if !(kernel_size == 1 || kernel_size == 3) || in_channels == 0 || out_channels == 0 || in_channels > 4096 || out_channels > 4096 {
                return Err(Error::Checkpoint("invalid layer header".into()));
            }
            let nw = out_channels * in_channels * kernel_size * kernel_size;
            let weights = (0..nw).map(|_| reader.f64()).collect::<Result<Vec<_>>>()?;
            let bias = (0..out_channels).map(|_| reader.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(ConvLayer {
                in_channels,
                out_channels,
                kernel_size,
                activation,
                weights,
                bias,
            });
        }
        if reader.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last layer".into()));
        }
        Self::from_layers(layers).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Pil,
    Bce,
    Dice,
    Surface,
    /// Elastic loss plus `weight` times cross-entropy.
    PilBce { weight: f64 },
}

impl LossKind {
    pub fn name(&self) -> String {
        match self {
            Self::Pil => "pil".into(),
            Self::Bce => "bce".into(),
            Self::Dice => "dice".into(),
            Self::Surface => "surface".into(),
            Self::PilBce { weight } => format!("pil+bce:{weight}"),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    /// Accepts `pil`, `bce`, `dice`, `surface` and `pil+bce:W`. The combined
    /// form needs an explicit weight; plain `pil` is the weight-0 case.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "pil" => Ok(Self::Pil),
            "bce" | "ce" => Ok(Self::Bce),
            "dice" => Ok(Self::Dice),
            "surface" => Ok(Self::Surface),
            "pil+bce" => Err(Error::InvalidParameter {
                name: "loss",
                reason: "give the cross-entropy weight as pil+bce:W".into(),
            }),
            other => {
                if let Some(w) = other.strip_prefix("pil+bce:") {
                    let weight: f64 = w.parse().map_err(|_| Error::InvalidParameter {
                        name: "loss",
                        reason: format!("bad cross-entropy weight `{w}`"),
                    })?;
                    if weight >= 0.0 && weight.is_finite() {
                        return Ok(Self::PilBce { weight });
                    }
                }
                Err(Error::InvalidParameter {
                    name: "loss",
                    reason: format!("unknown loss `{s}` (expected pil, bce, dice, surface, pil+bce:W)"),
                })
            }
        }
    }
}

/// Loss value and `dL/dP` for one prediction.
pub fn loss_grad(
    kind: LossKind,
    p: &ScalarField2D,
    gt: &BinaryMask,
    pil: &PilParams,
    plan: &SpectralPlan,
) -> Result<(f64, ScalarField2D)> {
    match kind {
        LossKind::Pil => loss_and_grad(gt, p, pil, plan).map(|eg| (eg.energy, eg.grad_p)),
        LossKind::Bce => bce_loss_grad(p, gt),
        LossKind::Dice => dice_loss_grad(p, gt, 1.0),
        LossKind::Surface => surface_loss_grad(p, gt),
        LossKind::PilBce { weight } => {
            let eg = loss_and_grad(gt, p, pil, plan)?;
            let (bce, bce_grad) = bce_loss_grad(p, gt)?;
            let grad = eg
                .grad_p
                .values()
                .iter()
                .zip(bce_grad.values())
                .map(|(a, b)| a + weight * b)
                .collect();
            Ok((eg.energy + weight * bce, ScalarField2D::new(p.width(), p.height(), grad)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub pil: PilParams,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Pil,
            pil: PilParams::default(),
            epochs: 200,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 4,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("betas", "must lie in [0, 1)");
        }
        self.pil.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Mean per-image loss in each epoch, measured before that image's update.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch Adam training. Deterministic given `cfg.seed`; the batch order
/// is reshuffled each epoch from a generator seeded with `cfg.seed`.
pub fn train(
    net: &mut ToyNet,
    data: &[(ScalarField2D, BinaryMask)],
    cfg: &TrainConfig,
    plan: &SpectralPlan,
) -> Result<TrainLog> {
    cfg.validate()?;
    let first = data.first().ok_or(Error::Empty("training set"))?;
    for (image, mask) in data {
        first.0.check_dims(image)?;
        image.check_dims(mask)?;
    }

    let mut params = net.params();
    let mut adam = Adam::new(params.len(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut rng = SplitMix64::new(cfg.seed.wrapping_mul(0x2545_F491_4F6C_DD1D));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = vec![0.0; params.len()];
            for &idx in batch {
                let (image, mask) = &data[idx];
                let cache = net.forward_cached(image);
                let (loss, grad_out) = loss_grad(cfg.loss, &cache.probabilities(), mask, &cfg.pil, plan)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch });
                }
                total += loss;
                for (g, d) in grads.iter_mut().zip(net.backward(&cache, &grad_out)?) {
                    *g += d;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut params, &grads);
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            net.set_params(&params);
        }
        epoch_losses.push(total / data.len() as f64);
    }
    Ok(TrainLog { epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::relative_error;

    fn random_image(w: usize, h: usize, seed: u64) -> ScalarField2D {
        let mut rng = SplitMix64::new(seed);
        ScalarField2D::from_fn(w, h, |_, _| rng.next_f64())
    }

    #[test]
    fn zero_net_outputs_one_half() {
        let out = ToyNet::zeros().forward(&random_image(9, 7, 1));
        assert!(out.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn output_shape_and_range() {
        let net = ToyNet::new(3);
        let out = net.forward(&random_image(64, 64, 2));
        assert_eq!((out.width(), out.height()), (64, 64));
        assert!(out.values().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(net.num_params(), 8 * 9 + 8 + 8 * 8 * 9 + 8 + 8 + 1);
    }

    #[test]
    fn forward_is_deterministic() {
        let image = random_image(16, 16, 5);
        let a = ToyNet::new(9).forward(&image);
        let b = ToyNet::new(9).forward(&image);
        let bits = |f: &ScalarField2D| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    /// Direct convolution by definition, for one layer.
    #[test]
    fn conv_matches_naive_definition() {
        let mut rng = SplitMix64::new(4);
        let mut layer = ConvLayer::zeros(2, 3, 3, Activation::Identity);
        layer.init_uniform(&mut rng);
        let (w, h) = (6, 5);
        let input: Vec<f64> = (0..2 * w * h).map(|_| rng.next_f64()).collect();
        let (pre, _) = layer.forward(&input, w, h);
        for o in 0..3 {
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let mut acc = layer.bias[o];
                    for i in 0..2 {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let (sy, sx) = (y + ky - 1, x + kx - 1);
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                acc += layer.weights[layer.weight_index(o, i, ky as usize, kx as usize)]
                                    * input[i * w * h + sy as usize * w + sx as usize];
                            }
                        }
                    }
                    let got = pre[o * w * h + y as usize * w + x as usize];
                    assert!((got - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = ToyNet::new(1);
        let image = random_image(8, 8, 2);
        let cache = net.forward_cached(&image);
        let grads = net.backward(&cache, &ScalarField2D::zeros(8, 8)).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn head_bias_gradient_is_linear_in_upstream() {
        let net = ToyNet::new(1);
        let image = random_image(8, 8, 2);
        let cache = net.forward_cached(&image);
        let g1 = random_image(8, 8, 3);
        let g2 = random_image(8, 8, 4);
        let sum = ScalarField2D::from_fn(8, 8, |x, y| 2.0 * g1.get(x, y) - 0.5 * g2.get(x, y));
        let last = net.num_params() - 1;
        let b1 = net.backward(&cache, &g1).unwrap()[last];
        let b2 = net.backward(&cache, &g2).unwrap()[last];
        let bs = net.backward(&cache, &sum).unwrap()[last];
        assert!((bs - (2.0 * b1 - 0.5 * b2)).abs() < 1e-12);
    }

    /// Loss `sum(c * P)` has `grad_out = c`; compare against parameter perturbation.
    #[test]
    fn backward_matches_finite_differences_for_linear_readout() {
        let mut net = ToyNet::new(11);
        let image = random_image(8, 8, 12);
        let coeffs = random_image(8, 8, 13).map(|v| v - 0.5);
        let cache = net.forward_cached(&image);
        let grads = net.backward(&cache, &coeffs).unwrap();
        let base = net.params();
        let mut rng = SplitMix64::new(14);
        let scale = grads.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for _ in 0..20 {
            let k = rng.below(base.len());
            let mut probe = base.clone();
            probe[k] = base[k] + 1e-4;
            net.set_params(&probe);
            let plus = net.forward(&image).dot(&coeffs);
            probe[k] = base[k] - 1e-4;
            net.set_params(&probe);
            let minus = net.forward(&image).dot(&coeffs);
            let fd = (plus - minus) / 2e-4;
            assert!(relative_error(grads[k], fd, scale) <= 1e-4, "param {k}: {} vs {fd}", grads[k]);
        }
    }

    #[test]
    fn full_chain_gradients_match_finite_differences_for_every_loss() {
        for kind in [
            LossKind::Pil,
            LossKind::Bce,
            LossKind::Dice,
            LossKind::Surface,
            LossKind::PilBce { weight: 0.5 },
        ] {
            for seed in 0..3 {
                let err = crate::gradcheck::check_network_gradient(kind, &PilParams::default(), 8, seed, 20).unwrap().max_error;
                assert!(err <= 1e-4, "{kind:?} seed {seed}: {err:e}");
            }
        }
    }

    #[test]
    fn constant_input_pil_loss_vanishes() {
        let plan = SpectralPlan::new(16, 16, 1.0).unwrap();
        let data = vec![(ScalarField2D::filled(16, 16, 0.7), BinaryMask::from_fn(16, 16, |_, _| true))];
        let cfg = TrainConfig {
            pil: PilParams::with_alpha(1.0),
            epochs: 300,
            batch_size: 1,
            ..TrainConfig::default()
        };
        let mut net = ToyNet::new(2);
        let log = train(&mut net, &data, &cfg, &plan).unwrap();
        let last = *log.epoch_losses.last().unwrap();
        assert!(last <= 1e-4, "final loss {last:e}");
    }

    #[test]
    fn overfits_a_single_phantom() {
        let ph = crate::phantom::generate(&crate::phantom::PhantomSpec::default().with_seed(3)).unwrap();
        let plan = SpectralPlan::new(ph.image.width(), ph.image.height(), 1.0).unwrap();
        let data = vec![(ph.image.clone(), ph.mask.clone())];
        let cfg = TrainConfig {
            epochs: 300,
            batch_size: 1,
            ..TrainConfig::default()
        };
        let mut net = ToyNet::new(1);
        train(&mut net, &data, &cfg, &plan).unwrap();
        let f1 = crate::metrics::confusion(&net.forward(&ph.image), &ph.mask, 0.5).unwrap().f1();
        assert!(f1 >= 0.95, "F1 {f1}");
    }

    #[test]
    fn every_loss_trains_finitely_and_deterministically() {
        let spec = crate::phantom::PhantomSpec {
            width: 24,
            height: 24,
            n_branches: 3,
            ..Default::default()
        };
        let set = crate::phantom::dataset(&spec, 8, 40).unwrap();
        let data: Vec<_> = set.into_iter().map(|p| (p.image, p.mask)).collect();
        let plan = SpectralPlan::new(24, 24, 1.0).unwrap();
        for loss in [
            LossKind::Pil,
            LossKind::Bce,
            LossKind::Dice,
            LossKind::Surface,
            LossKind::PilBce { weight: 1.0 },
        ] {
            let cfg = TrainConfig {
                loss,
                epochs: 5,
                ..TrainConfig::default()
            };
            let mut a = ToyNet::new(cfg.seed);
            let log_a = train(&mut a, &data, &cfg, &plan).unwrap();
            assert!(log_a.epoch_losses.iter().all(|l| l.is_finite()), "{loss:?}");
            let mut b = ToyNet::new(cfg.seed);
            let log_b = train(&mut b, &data, &cfg, &plan).unwrap();
            assert_eq!(log_a, log_b);
            assert_eq!(a.to_bytes(), b.to_bytes());
            let other = TrainConfig { seed: 2, ..cfg };
            let mut c = ToyNet::new(other.seed);
            train(&mut c, &data, &other, &plan).unwrap();
            assert_ne!(a.to_bytes(), c.to_bytes());
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let net = ToyNet::new(21);
        let bytes = net.to_bytes();
        assert_eq!(&bytes[..4], b"EBL1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 8 + 3 * 16 + net.num_params() * 8);
        let back = ToyNet::from_bytes(&bytes).unwrap();
        let bits = |n: &ToyNet| n.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&net));
        assert_eq!(back, net);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let mut bytes = ToyNet::new(1).to_bytes();
        assert!(ToyNet::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ToyNet::from_bytes(&extra).is_err());
        bytes[0] = b'X';
        assert!(matches!(ToyNet::from_bytes(&bytes), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn loss_kind_parsing() {
        assert_eq!("pil".parse::<LossKind>().unwrap(), LossKind::Pil);
        assert_eq!("BCE".parse::<LossKind>().unwrap(), LossKind::Bce);
        assert_eq!("pil+bce:0.5".parse::<LossKind>().unwrap(), LossKind::PilBce { weight: 0.5 });
        assert!("focal".parse::<LossKind>().is_err());
        assert!("pil+bce:x".parse::<LossKind>().is_err());
        assert!("pil+bce".parse::<LossKind>().is_err());
        assert!("pil+bce:-1".parse::<LossKind>().is_err());
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = Adam::new(2, 0.1, 0.9, 0.999, 1e-8);
        let mut p = vec![1.0, -1.0];
        adam.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn training_rejects_bad_input() {
        let plan = SpectralPlan::new(8, 8, 1.0).unwrap();
        let mut net = ToyNet::new(1);
        assert!(train(&mut net, &[], &TrainConfig::default(), &plan).is_err());
        let data = vec![(random_image(8, 8, 1), BinaryMask::empty(8, 8))];
        let cfg = TrainConfig {
            lr: 0.0,
            ..TrainConfig::default()
        };
        assert!(train(&mut net, &data, &cfg, &plan).is_err());
    }
}
