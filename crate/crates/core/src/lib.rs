//! Elastic interaction boundary loss for binary segmentation.
//!
//! The predicted probability map and the ground-truth mask are treated as two
//! interacting boundaries. Their mismatch is scored by a nonlocal quadratic
//! energy whose kernel is `1/|x - x'|`; on a periodic grid that energy is a
//! `|k|`-weighted spectral sum, so both the loss and its gradient cost one FFT
//! round trip per image.
//!
//! Module map:
//!
//! - [`field`]: grids, masks and the smoothed Heaviside lift `P -> phi -> H(phi)`.
//! - [`spectral`]: fixed-size 2D FFT plan with the `|k|` multiplier.
//! - [`elastic_loss`]: energy, gradient, the `O(N^2)` direct oracle and the timing benchmark.
//! - [`baselines`]: cross-entropy, Dice and signed-distance surface losses.
//! - [`evolve`]: projected gradient flow of a probability field under the elastic force.
//! - [`toy_net`]: a three-layer convolutional segmenter with hand-written backprop and Adam.
//! - [`phantom`]: seeded synthetic vessel-tree images.
//! - [`metrics`]: sensitivity, specificity, F1 and rank-based AUC.
//! - [`pgm`]: binary PGM reading and writing.
//! - [`gradcheck`]: central finite-difference checks shared by the CLI and tests.

pub mod baselines;
pub mod elastic_loss;
mod error;
pub mod evolve;
pub mod field;
pub mod gradcheck;
pub mod metrics;
pub mod pgm;
pub mod phantom;
pub mod spectral;
pub mod toy_net;

pub use error::{Error, Result};
pub use field::{BinaryMask, HeavisideKind, HeavisideSpec, ScalarField2D};
pub use spectral::SpectralPlan;
