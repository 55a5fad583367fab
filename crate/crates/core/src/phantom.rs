//! Seeded synthetic vessel-tree phantoms.
//!
//! A phantom is a random branching tree of thick line segments rasterized into
//! a binary mask, plus a grayscale image with the vessels brighter than the
//! background by `contrast` and additive Gaussian noise.
//!
//! All randomness comes from [`SplitMix64`] with the fixed draw order
//! documented on [`generate`], so any implementation following the same
//! recipe reproduces the same phantoms bit for bit.

use std::f64::consts::PI;

use crate::field::{BinaryMask, ScalarField2D};
use crate::{Error, Result};

/// SplitMix64 generator (64-bit state, Steele/Lea/Flood constants).
///
/// `next_f64` takes the top 53 bits, giving a uniform value in `[0, 1)`.
/// `next_gaussian` is Box-Muller on `u1 = 1 - next_f64()`, `u2 = next_f64()`
/// and returns only the cosine branch.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in `0..n` (`n > 0`).
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// Fisher-Yates shuffle driven by [`Self::below`].
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    /// Number of vessel branches including the trunk.
    pub n_branches: usize,
    /// Smallest vessel half-width in pixels.
    pub min_width: f64,
    /// Trunk half-width in pixels.
    pub max_width: f64,
    /// Vessel-to-background intensity gap, in `(0, 1]`.
    pub contrast: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            n_branches: 6,
            min_width: 1.0,
            max_width: 3.0,
            contrast: 0.6,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.width < 8 || self.height < 8 {
            return bad("width/height", "phantoms need at least 8x8 pixels");
        }
        if self.n_branches == 0 {
            return bad("n_branches", "must be at least 1");
        }
        if !(self.min_width >= 0.5 && self.min_width <= self.max_width && self.max_width.is_finite()) {
            return bad("min_width/max_width", "need 0.5 <= min_width <= max_width");
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return bad("contrast", "must lie in (0, 1]");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma", "must be non-negative");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: ScalarField2D,
    pub mask: BinaryMask,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
    half_width: f64,
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    first_segment: usize,
    segment_count: usize,
    angle: f64,
    length: f64,
    half_width: f64,
}

const SEGMENTS_PER_BRANCH: usize = 3;

/// Generates one phantom.
///
/// Draw order: trunk side, trunk offset, trunk angle jitter, trunk length;
/// then per segment of every branch one angle jitter. Each later branch draws
/// parent branch index, parent segment index, position along it, turn
/// magnitude, turn sign, length factor and width factor, then its segment
/// jitters. Noise is drawn last, one Gaussian per pixel in row-major order,
/// and only when `noise_sigma > 0`.
pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let (w, h) = (spec.width as f64, spec.height as f64);
    let mut rng = SplitMix64::new(spec.seed);
    let clamp_x = |x: f64| x.clamp(0.0, w - 1.0);
    let clamp_y = |y: f64| y.clamp(0.0, h - 1.0);

    let mut segments: Vec<Segment> = Vec::new();
    let mut branches: Vec<Branch> = Vec::new();

    let grow = |rng: &mut SplitMix64, segments: &mut Vec<Segment>, x0: f64, y0: f64, angle: f64, length: f64, hw: f64| {
        let first = segments.len();
        let step = length / SEGMENTS_PER_BRANCH as f64;
        let (mut x, mut y, mut heading) = (x0, y0, angle);
        for _ in 0..SEGMENTS_PER_BRANCH {
            heading += rng.uniform(-0.25, 0.25);
            let nx = clamp_x(x + step * heading.cos());
            let ny = clamp_y(y + step * heading.sin());
            segments.push(Segment {
                ax: x,
                ay: y,
                bx: nx,
                by: ny,
                half_width: hw,
            });
            x = nx;
            y = ny;
        }
        Branch {
            first_segment: first,
            segment_count: SEGMENTS_PER_BRANCH,
            angle,
            length,
            half_width: hw,
        }
    };

    // Trunk enters from one side, aimed roughly at the opposite side.
    let side = rng.below(4);
    let offset = rng.uniform(0.2, 0.8);
    let jitter = rng.uniform(-PI / 6.0, PI / 6.0);
    let length = rng.uniform(0.6, 0.9) * w.min(h);
    let (x0, y0, base) = match side {
        0 => (offset * (w - 1.0), 0.0, PI / 2.0),
        1 => (w - 1.0, offset * (h - 1.0), PI),
        2 => (offset * (w - 1.0), h - 1.0, -PI / 2.0),
        _ => (0.0, offset * (h - 1.0), 0.0),
    };
    let trunk = grow(&mut rng, &mut segments, x0, y0, base + jitter, length, spec.max_width);
    branches.push(trunk);

    for _ in 1..spec.n_branches {
        let parent = branches[rng.below(branches.len())];
        let seg = segments[parent.first_segment + rng.below(parent.segment_count)];
        let t = rng.uniform(0.3, 1.0);
        let sx = seg.ax + t * (seg.bx - seg.ax);
        let sy = seg.ay + t * (seg.by - seg.ay);
        let turn = rng.uniform(PI / 7.0, PI / 3.0);
        let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
        let length = parent.length * rng.uniform(0.5, 0.8);
        let hw = (parent.half_width * rng.uniform(0.6, 0.85)).max(spec.min_width);
        let branch = grow(&mut rng, &mut segments, sx, sy, parent.angle + sign * turn, length, hw);
        branches.push(branch);
    }

    let mut mask = BinaryMask::empty(spec.width, spec.height);
    for seg in &segments {
        rasterize_segment(&mut mask, seg);
    }

    let background = 0.5 * (1.0 - spec.contrast);
    let mut values: Vec<f64> = mask
        .values()
        .iter()
        .map(|&m| background + spec.contrast * f64::from(m))
        .collect();
    if spec.noise_sigma > 0.0 {
        for v in &mut values {
            *v += spec.noise_sigma * rng.next_gaussian();
        }
    }
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    let image = ScalarField2D::new(spec.width, spec.height, values)?;
    Ok(Phantom {
        image,
        mask,
        seed: spec.seed,
    })
}

/// Capsule fill (pixel centres within `half_width` of the segment) plus the
/// Bresenham centre line, which keeps thin branches 8-connected.
fn rasterize_segment(mask: &mut BinaryMask, seg: &Segment) {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let r = seg.half_width;
    let x_lo = ((seg.ax.min(seg.bx) - r).floor() as isize).max(0);
    let x_hi = ((seg.ax.max(seg.bx) + r).ceil() as isize).min(w - 1);
    let y_lo = ((seg.ay.min(seg.by) - r).floor() as isize).max(0);
    let y_hi = ((seg.ay.max(seg.by) + r).ceil() as isize).min(h - 1);
    let (dx, dy) = (seg.bx - seg.ax, seg.by - seg.ay);
    let len2 = dx * dx + dy * dy;
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let (px, py) = (x as f64 - seg.ax, y as f64 - seg.ay);
            let t = if len2 > 0.0 { ((px * dx + py * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let (ex, ey) = (px - t * dx, py - t * dy);
            if ex * ex + ey * ey <= r * r {
                mask.set(x as usize, y as usize, true);
            }
        }
    }

    let (mut x0, mut y0) = (seg.ax.round() as isize, seg.ay.round() as isize);
    let (x1, y1) = (seg.bx.round() as isize, seg.by.round() as isize);
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (adx, ady) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let mut err = adx + ady;
    loop {
        if (0..w).contains(&x0) && (0..h).contains(&y0) {
            mask.set(x0 as usize, y0 as usize, true);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= ady {
            err += ady;
            x0 += sx;
        }
        if e2 <= adx {
            err += adx;
            y0 += sy;
        }
    }
}

/// `n_images` phantoms with per-image seeds `seed + i` (wrapping).
pub fn dataset(spec_base: &PhantomSpec, n_images: usize, seed: u64) -> Result<Vec<Phantom>> {
    if n_images == 0 {
        return Err(Error::Empty("dataset needs at least one image"));
    }
    (0..n_images)
        .map(|i| generate(&spec_base.with_seed(seed.wrapping_add(i as u64))))
        .collect()
}

/// Index-parity split: even indices train, odd indices test.
pub fn split(n_images: usize) -> (Vec<usize>, Vec<usize>) {
    (0..n_images).partition(|i| i % 2 == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    #[test]
    fn splitmix_reference_sequence() {
        // Published SplitMix64 outputs for seed 1234567.
        let mut rng = SplitMix64::new(1_234_567);
        let expected = [
            6_457_827_717_110_365_317u64,
            3_203_168_211_198_807_973,
            9_817_491_932_198_370_423,
            4_593_380_528_125_082_431,
            16_408_922_859_458_223_821,
        ];
        for e in expected {
            assert_eq!(rng.next_u64(), e);
        }
    }

    #[test]
    fn uniform_range() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..10_000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
            assert!(rng.below(7) < 7);
        }
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = SplitMix64::new(99);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn clean_high_contrast_image() {
        let spec = PhantomSpec {
            contrast: 1.0,
            noise_sigma: 0.0,
            seed: 5,
            ..PhantomSpec::default()
        };
        let p = generate(&spec).unwrap();
        for (&m, &v) in p.mask.values().iter().zip(p.image.values()) {
            if m == 1 {
                assert_eq!(v, 1.0);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn same_seed_same_phantom() {
        let spec = PhantomSpec {
            seed: 42,
            ..PhantomSpec::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.mask, b.mask);
        let bits = |f: &ScalarField2D| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.image), bits(&b.image));
    }

    #[test]
    fn foreground_fraction_bounds() {
        for seed in 0..50 {
            let p = generate(&PhantomSpec::default().with_seed(seed)).unwrap();
            let frac = p.mask.foreground_fraction();
            assert!(frac > 0.01 && frac < 0.4, "seed {seed}: {frac}");
        }
    }

    fn branches_connected(mask: &BinaryMask) -> bool {
        let (w, h) = (mask.width(), mask.height());
        let Some(start) = mask.values().iter().position(|&v| v == 1) else {
            return true;
        };
        let mut seen = vec![false; w * h];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.values()[j] == 1 && !seen[j] {
                        seen[j] = true;
                        reached += 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        reached == mask.count()
    }

    #[test]
    fn tree_is_eight_connected() {
        for seed in 0..50 {
            let spec = PhantomSpec {
                min_width: 0.5,
                n_branches: 9,
                ..PhantomSpec::default().with_seed(seed)
            };
            let p = generate(&spec).unwrap();
            assert!(branches_connected(&p.mask), "seed {seed}");
        }
    }

    #[test]
    fn image_in_unit_interval() {
        let spec = PhantomSpec {
            noise_sigma: 0.5,
            seed: 8,
            ..PhantomSpec::default()
        };
        let p = generate(&spec).unwrap();
        assert!(p.image.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn dataset_and_split() {
        let base = PhantomSpec::default();
        let data = dataset(&base, 4, 10).unwrap();
        assert_eq!(data.len(), 4);
        for i in 0..4 {
            assert_eq!(data[i].seed, 10 + i as u64);
            for j in i + 1..4 {
                assert_ne!(data[i].mask, data[j].mask);
            }
        }
        assert_eq!(data, dataset(&base, 4, 10).unwrap());
        let (train, test) = split(8);
        assert_eq!(train, vec![0, 2, 4, 6]);
        assert_eq!(test, vec![1, 3, 5, 7]);
        assert!(dataset(&base, 0, 1).is_err());
    }

    #[test]
    fn invalid_specs() {
        let base = PhantomSpec::default();
        for bad in [
            PhantomSpec { contrast: 0.0, ..base.clone() },
            PhantomSpec { min_width: 4.0, ..base.clone() },
            PhantomSpec { n_branches: 0, ..base.clone() },
            PhantomSpec { noise_sigma: -1.0, ..base.clone() },
        ] {
            assert!(generate(&bad).is_err());
        }
    }
}
