//! A simplified hybrid video codec with an in-loop intensity reshaper, plus
//! the analysis machinery to measure the rate-distortion gain of reshaping
//! and predict it from closed-form theory.
//!
//! The codec codes 10-bit (or 8-bit) luma in 20-frame subsequences (one
//! intra frame followed by predicted frames), with 16x16 full-search motion
//! compensation, a 4x4 orthonormal DCT, a scalar quantizer, and an adaptive
//! range coder whose suboptimality is tunable through a granularity knob.
//! The reshaper stretches the occupied intensity range to the full code
//! range before residual formation and inverts the map after
//! reconstruction, inside the prediction loop.
//!
//! Module map:
//! - [`signal`]: planes, rasters, sequences, YUV I/O, synthetic generators.
//! - [`reshaper`]: one-piece and two-piece piecewise-linear intensity maps.
//! - [`transform`]: 4x4 DCT and the quantizer ladder.
//! - [`motion`]: full-search block matching and compensation.
//! - [`entropy`]: histogram symbol models and the range coder.
//! - [`codec`]: the closed coding loop and per-frame measurements.
//! - [`analysis`]: measured vs predicted reshaping gain.
//! - [`theory`]: closed-form curves and Monte-Carlo validators.
//! - [`fixtures`]: deterministic synthetic test sequences.

// Validation guards are written `!(x > 0.0)` so NaN fails them; the
// comparison clippy suggests would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod codec;
pub mod entropy;
pub mod error;
pub mod fixtures;
pub mod motion;
pub mod reshaper;
pub mod signal;
pub mod theory;
pub mod transform;

pub use error::{Error, Result};
