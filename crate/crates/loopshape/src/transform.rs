//! 4x4 orthonormal block DCT and the uniform scalar quantizer.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::signal::Raster;

/// Transform block side in pixels.
pub const BLOCK: usize = 4;

/// QP ladder used throughout: (qp, quantization step).
pub const QP_LADDER: [(u32, f64); 7] = [
    (18, 5.0),
    (24, 10.0),
    (30, 20.0),
    (36, 40.0),
    (42, 80.0),
    (48, 160.0),
    (51, 224.0),
];

/// Ladder position whose bitrate anchors gain measurements.
pub const MID_LADDER_IDX: usize = 3;

/// Step size for a ladder QP, if present.
pub fn qstep_for_qp(qp: u32) -> Option<f64> {
    QP_LADDER.iter().find(|&&(p, _)| p == qp).map(|&(_, q)| q)
}

/// QP index paired with its positive quantization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub qp: u32,
    pub q: f64,
}

impl QuantizerSpec {
    pub fn new(qp: u32, q: f64) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::Domain(format!("quantization step {q} must be > 0")));
        }
        Ok(Self { qp, q })
    }

    /// The canonical seven-point ladder as validated specs.
    pub fn ladder() -> Vec<QuantizerSpec> {
        QP_LADDER.iter().map(|&(qp, q)| QuantizerSpec { qp, q }).collect()
    }
}

/// Orthonormal 4x4 DCT-II basis; row u holds the u-th basis vector.
fn basis() -> &'static [[f64; 4]; 4] {
    static H: OnceLock<[[f64; 4]; 4]> = OnceLock::new();
    H.get_or_init(|| {
        let mut h = [[0.0; 4]; 4];
        for (u, row) in h.iter_mut().enumerate() {
            let c = if u == 0 { 0.5 } else { (0.5f64).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = c * (std::f64::consts::PI * (2.0 * x as f64 + 1.0) * u as f64 / 8.0).cos();
            }
        }
        h
    })
}

/// Exposes the basis for orthogonality checks.
pub fn dct4_basis() -> [[f64; 4]; 4] {
    *basis()
}

/// Forward 2-D transform of one block: H * B * H^T.
pub fn dct4_forward(block: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let h = basis();
    let mut tmp = [[0.0; 4]; 4];
    // tmp = H * B
    for u in 0..4 {
        for x in 0..4 {
            let mut s = 0.0;
            for i in 0..4 {
                s += h[u][i] * block[i][x];
            }
            tmp[u][x] = s;
        }
    }
    let mut out = [[0.0; 4]; 4];
    // out = tmp * H^T
    for u in 0..4 {
        for v in 0..4 {
            let mut s = 0.0;
            for i in 0..4 {
                s += tmp[u][i] * h[v][i];
            }
            out[u][v] = s;
        }
    }
    out
}

/// Inverse 2-D transform of one block: H^T * C * H.
pub fn dct4_inverse(coeffs: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let h = basis();
    let mut tmp = [[0.0; 4]; 4];
    // tmp = H^T * C
    for x in 0..4 {
        for u in 0..4 {
            let mut s = 0.0;
            for i in 0..4 {
                s += h[i][x] * coeffs[i][u];
            }
            tmp[x][u] = s;
        }
    }
    let mut out = [[0.0; 4]; 4];
    // out = tmp * H
    for x in 0..4 {
        for y in 0..4 {
            let mut s = 0.0;
            for i in 0..4 {
                s += tmp[x][i] * h[i][y];
            }
            out[x][y] = s;
        }
    }
    out
}

/// Reconstructed coefficient value q * round(x/q), rounding half toward
/// positive infinity so the rounding residue lies in (-1/2, 1/2].
pub fn quantize(x: f64, q: f64) -> f64 {
    debug_assert!(q > 0.0, "quantization step must be > 0");
    q * codeword_index(x, q) as f64
}

/// Integer index round(x/q) handed to the entropy coder.
pub fn codeword_index(x: f64, q: f64) -> i64 {
    debug_assert!(q > 0.0, "quantization step must be > 0");
    (x / q + 0.5).floor() as i64
}

/// Blockwise forward transform of a whole frame; the output raster holds
/// coefficients in block-position order.
pub fn forward_frame(residual: &Raster) -> Raster {
    transform_frame(residual, dct4_forward)
}

/// Blockwise inverse transform of a coefficient raster.
pub fn inverse_frame(coeffs: &Raster) -> Raster {
    transform_frame(coeffs, dct4_inverse)
}

fn transform_frame(src: &Raster, f: fn(&[[f64; 4]; 4]) -> [[f64; 4]; 4]) -> Raster {
    let (w, h) = (src.width(), src.height());
    assert!(w % BLOCK == 0 && h % BLOCK == 0, "frame not a multiple of the transform size");
    let mut out = Raster::zeros(w, h);
    for by in (0..h).step_by(BLOCK) {
        for bx in (0..w).step_by(BLOCK) {
            let mut blk = [[0.0; 4]; 4];
            for (r, row) in blk.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = src.get(bx + c, by + r);
                }
            }
            let t = f(&blk);
            for (r, row) in t.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    out.set(bx + c, by + r, *v);
                }
            }
        }
    }
    out
}
