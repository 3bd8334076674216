//! Forward/backward intensity reshaping and parameter estimation.
//!
//! The forward map stretches the occupied intensity range onto the full code
//! range before residual formation; the backward map undoes it after
//! reconstruction. Outputs stay real-valued: codomain rounding is
//! deliberately not modeled, so measurements track the piecewise-linear
//! analysis exactly.

use crate::error::{Error, Result};
use crate::signal::Plane;

// ------------------------------------------------------------ one-piece ----

/// Single linear segment with clipping branches.
///
/// Breakpoints are stored as fractions of the max code value; the map
/// operates in intensity units with knees at `a*M` and `b*M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnePieceReshaper {
    a: f64,
    b: f64,
    m: f64,
    k: f64,
}

impl OnePieceReshaper {
    /// Builds a reshaper from breakpoint fractions. Requires
    /// `0 <= a < b <= 1`; the slope is `k = 1/(b-a) >= 1`.
    pub fn new(a: f64, b: f64, m: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) || !(a < b && b <= 1.0) {
            return Err(Error::Domain(format!(
                "breakpoints a={a}, b={b} must satisfy 0 <= a < b <= 1"
            )));
        }
        if m <= 0.0 {
            return Err(Error::Domain(format!("max code value {m} must be > 0")));
        }
        Ok(Self { a, b, m, k: 1.0 / (b - a) })
    }

    /// The identity map (a=0, b=1, k=1).
    pub fn identity(m: f64) -> Self {
        Self { a: 0.0, b: 1.0, m, k: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn is_identity(&self) -> bool {
        self.a == 0.0 && self.b == 1.0
    }

    /// Forward map: 0 below the support, `k(x - aM)` on it, `M` above it.
    pub fn forward(&self, x: f64) -> f64 {
        let am = self.a * self.m;
        let bm = self.b * self.m;
        if x <= am {
            0.0
        } else if x <= bm {
            self.k * (x - am)
        } else {
            self.m
        }
    }

    /// Backward map. Accepts any real input (quantization noise pushes
    /// reconstructed values outside [0, M]); the clip branches return the
    /// support bounds in intensity units, `aM` and `bM`.
    pub fn backward(&self, y: f64) -> f64 {
        if y <= 0.0 {
            self.a * self.m
        } else if y <= self.m {
            y / self.k + self.a * self.m
        } else {
            self.b * self.m
        }
    }
}

/// Result of support-based parameter estimation.
#[derive(Debug, Clone, Copy)]
pub struct EstimatedReshaper {
    pub reshaper: OnePieceReshaper,
    /// True when the content filled the code range and the estimate degraded
    /// to the identity map (no expansion possible).
    pub full_range_fallback: bool,
}

/// Estimates one-piece parameters from the histogram support of `frames`,
/// optionally widened by `margin` (a fraction of the code range) on each
/// side. Flat content is an error; full-range content degrades to the
/// identity reshaper with a warning flag so A/B runs never abort.
pub fn estimate_params(frames: &[Plane], margin: f64) -> Result<EstimatedReshaper> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames to estimate reshaper from"));
    }
    if !(0.0..0.5).contains(&margin) {
        return Err(Error::Domain(format!("margin {margin} outside [0, 0.5)")));
    }
    let m = f64::from(frames[0].max_value());
    let mut lo = u16::MAX;
    let mut hi = 0u16;
    for f in frames {
        let (flo, fhi) = f.min_max();
        lo = lo.min(flo);
        hi = hi.max(fhi);
    }
    if lo == hi {
        return Err(Error::Degenerate(format!(
            "flat content (all samples = {lo}); reshaper support undefined"
        )));
    }
    let a = (f64::from(lo) / m - margin).max(0.0);
    let b = (f64::from(hi) / m + margin).min(1.0);
    if b - a >= 1.0 {
        return Ok(EstimatedReshaper {
            reshaper: OnePieceReshaper::identity(m),
            full_range_fallback: true,
        });
    }
    Ok(EstimatedReshaper { reshaper: OnePieceReshaper::new(a, b, m)?, full_range_fallback: false })
}

// ------------------------------------------------------------ two-piece ----

/// Two linear segments with clipping branches.
///
/// The forward map rises from 0 at `a1*M` with slope `k1`, switches slope at
/// `a2*M`, and reaches `M` at `a3*M`; continuity fixes `k2` given the
/// breakpoints and `k1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPieceReshaper {
    a1: f64,
    a2: f64,
    a3: f64,
    k1: f64,
    k2: f64,
    m: f64,
}

impl TwoPieceReshaper {
    /// Builds from breakpoints and the first-segment slope. The second slope
    /// follows from continuity at `a2*M` together with the endpoint
    /// condition `forward(a3*M) = M`:
    ///
    ///   k1*(a2-a1)*M = k2*(a2-a3)*M + M
    ///
    /// Both slopes must come out positive, which requires k1*(a2-a1) < 1.
    pub fn new(a1: f64, a2: f64, a3: f64, k1: f64, m: f64) -> Result<Self> {
        if !(0.0 < a1 && a1 < a2 && a2 < a3 && a3 < 1.0) {
            return Err(Error::Domain(format!(
                "breakpoints ({a1}, {a2}, {a3}) must satisfy 0 < a1 < a2 < a3 < 1"
            )));
        }
        if k1 <= 0.0 || m <= 0.0 {
            return Err(Error::Domain(format!("k1={k1} and M={m} must be > 0")));
        }
        let rise1 = k1 * (a2 - a1);
        if rise1 >= 1.0 {
            return Err(Error::Domain(format!(
                "first segment consumes the whole codomain (k1*(a2-a1) = {rise1} >= 1)"
            )));
        }
        let k2 = (1.0 - rise1) / (a3 - a2);
        Ok(Self { a1, a2, a3, k1, k2, m })
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn breakpoints(&self) -> (f64, f64, f64) {
        (self.a1, self.a2, self.a3)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Forward image of the interior breakpoint `a2*M`; the codomain value
    /// separating the two segments.
    pub fn beta2(&self) -> f64 {
        self.k1 * (self.a2 - self.a1) * self.m
    }

    /// Four-branch forward map: 0 below `a1*M`, slope `k1` to `a2*M`, slope
    /// `k2` to `a3*M` (anchored so `forward(a3*M) = M`), then `M`.
    pub fn forward(&self, x: f64) -> f64 {
        let b1 = self.a1 * self.m;
        let b2 = self.a2 * self.m;
        let b3 = self.a3 * self.m;
        if x <= b1 {
            0.0
        } else if x <= b2 {
            self.k1 * (x - b1)
        } else if x <= b3 {
            self.k2 * (x - b3) + self.m
        } else {
            self.m
        }
    }

    /// Backward map; clip branches return the support bounds `a1*M`/`a3*M`.
    pub fn backward(&self, y: f64) -> f64 {
        let beta2 = self.beta2();
        if y <= 0.0 {
            self.a1 * self.m
        } else if y <= beta2 {
            y / self.k1 + self.a1 * self.m
        } else if y <= self.m {
            (y - self.m) / self.k2 + self.a3 * self.m
        } else {
            self.a3 * self.m
        }
    }
}
