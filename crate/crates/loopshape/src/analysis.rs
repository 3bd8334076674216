//! Rate-distortion curve handling, empirical gain measurement, slope-ratio
//! estimation, and agreement scoring between measured and predicted gains.

use crate::codec::{FrameResult, FrameType};
use crate::error::{Error, Result};

/// Piecewise-linear interpolation y(x) after sorting by x, mirroring the
/// usual numeric-library convention; queries outside the sampled span are
/// out-of-hull errors (no extrapolation, ever).
fn pl_interp(xs: &[f64], ys: &[f64], x: f64) -> Result<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.is_empty() {
        return Err(Error::EmptyInput("no points to interpolate"));
    }
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    if x < lo - 1e-12 || x > hi + 1e-12 {
        return Err(Error::OutOfHull { rate: x, lo, hi });
    }
    let x = x.clamp(lo, hi);
    let i = pts.partition_point(|p| p.0 < x);
    if i == 0 {
        return Ok(pts[0].1);
    }
    if i == pts.len() {
        return Ok(pts[pts.len() - 1].1);
    }
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    if x1 == x0 {
        return Ok(y0);
    }
    Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

// -------------------------------------------------------------- RDCurve ----

/// One frame's (rate, PSNR) operating points across the QP ladder.
#[derive(Debug, Clone)]
pub struct RDCurve {
    rates: Vec<f64>,
    psnrs: Vec<f64>,
}

impl RDCurve {
    /// Builds a curve from ladder points. Points are sorted by rate; rates
    /// are expected to increase strictly across the ladder (see
    /// `is_strictly_increasing`) but duplicates are tolerated by the
    /// interpolator so measurement sweeps never abort mid-run.
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::EmptyInput("an RD curve needs at least two points"));
        }
        if points.iter().any(|(r, p)| !r.is_finite() || !p.is_finite()) {
            return Err(Error::Domain("non-finite RD point".into()));
        }
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            rates: pts.iter().map(|p| p.0).collect(),
            psnrs: pts.iter().map(|p| p.1).collect(),
        })
    }

    /// True when successive rates strictly increase (the expected ladder
    /// behavior on non-degenerate content).
    pub fn is_strictly_increasing(&self) -> bool {
        self.rates.windows(2).all(|w| w[0] < w[1])
    }

    pub fn rate_span(&self) -> (f64, f64) {
        (self.rates[0], self.rates[self.rates.len() - 1])
    }

    /// PSNR at the given rate by piecewise-linear interpolation.
    pub fn psnr_at(&self, rate: f64) -> Result<f64> {
        pl_interp(&self.rates, &self.psnrs, rate)
    }
}

/// PSNR difference (reshaped minus base) at one evaluation rate.
pub fn measure_gain(base: &RDCurve, reshaped: &RDCurve, eval_rate: f64) -> Result<f64> {
    Ok(reshaped.psnr_at(eval_rate)? - base.psnr_at(eval_rate)?)
}

// ---------------------------------------------------------- eta estimate ----

/// One frame's (entropy, coded rate) sample.
#[derive(Debug, Clone, Copy)]
pub struct RatePoint {
    pub entropy: f64,
    pub rate: f64,
    pub qp: u32,
    pub reshaped: bool,
}

/// Slope-ratio estimate with clamp diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct EtaEstimate {
    pub eta: f64,
    /// Raw value before clamping into (0, 1].
    pub eta_raw: f64,
    pub clamped: bool,
    pub h0: f64,
    pub h1: f64,
    pub r1: f64,
}

/// Lower clamp for the slope ratio; a ratio at this floor means the coder is
/// treated as maximally suboptimal.
pub const ETA_FLOOR: f64 = 1e-9;

/// Estimates the rate-curve slope ratio from pooled (H, R) samples.
///
/// The pooled curve is read once in each direction: entropy at the observed
/// base rate `r0`, then the rate at that entropy shifted up by log2(k_hat).
/// The estimate is
///
///   eta = (r1/r0 - 1) * h0 / log2(k_hat)
///
/// clamped into (0, 1] with a diagnostic flag when clamping occurs.
pub fn estimate_eta(points: &[RatePoint], r0: f64, k_hat: f64) -> Result<EtaEstimate> {
    if points.len() < 2 {
        return Err(Error::EmptyInput("slope-ratio estimation needs pooled rate points"));
    }
    if !(k_hat > 1.0) {
        return Err(Error::Domain(format!(
            "slope ratio undefined for k_hat = {k_hat} (no range expansion)"
        )));
    }
    if !(r0 > 0.0) {
        return Err(Error::Domain(format!("base rate {r0} must be > 0")));
    }
    let hh: Vec<f64> = points.iter().map(|p| p.entropy).collect();
    let rr: Vec<f64> = points.iter().map(|p| p.rate).collect();
    let shift = k_hat.log2();
    let h0 = pl_interp(&rr, &hh, r0)?;
    let h1 = h0 + shift;
    let r1 = pl_interp(&hh, &rr, h1)?;
    let eta_raw = (r1 / r0 - 1.0) * h0 / shift;
    let eta = eta_raw.clamp(ETA_FLOOR, 1.0);
    Ok(EtaEstimate { eta, eta_raw, clamped: eta != eta_raw, h0, h1, r1 })
}

/// Closed-form PSNR gain for slope ratio `eta` and range expansion `k`:
/// 20*(1-eta)*log10(k) dB.
pub fn predict_gain(eta: f64, k: f64) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(Error::Domain(format!("expansion factor k = {k} must be >= 1")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("slope ratio eta = {eta} outside (0, 1]")));
    }
    Ok(20.0 * (1.0 - eta) * k.log10())
}

/// Cosine of the angle between two equal-length vectors.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.is_empty() || u.len() != v.len() {
        return Err(Error::Domain(format!(
            "cosine similarity needs equal nonzero lengths (got {} and {})",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("cosine similarity undefined for a zero vector".into()));
    }
    Ok(dot / (nu * nv))
}

// ----------------------------------------------------------- gain report ----

/// Per-frame outcome of the gain protocol. `None` fields mean the frame was
/// skipped for that quantity (interpolation out of hull).
#[derive(Debug, Clone, Copy)]
pub struct FrameGain {
    /// Frame index within the subsequence (P frames start at 1).
    pub frame: usize,
    pub measured: Option<f64>,
    pub eta_hat: Option<f64>,
    pub eta_clamped: bool,
    pub predicted: Option<f64>,
}

/// Subsequence-level agreement between measured and predicted gains.
#[derive(Debug, Clone)]
pub struct GainReport {
    pub k_hat: f64,
    /// Evaluation bitrate: mean base-mode P-frame rate at the mid-ladder QP.
    pub eval_rate: f64,
    pub frames: Vec<FrameGain>,
    pub mean_measured: Option<f64>,
    pub mean_predicted: Option<f64>,
    /// Cosine between measured and predicted vectors over frames where both
    /// are defined; `None` when undefined (identity reshaper, zero vectors,
    /// or no usable frames).
    pub cosine: Option<f64>,
    pub skipped_out_of_hull: usize,
}

/// Guard for lossless corner cases: interpolating PSNR across a ladder
/// needs finite values, so exact-zero MSE frames are capped here (dB).
const PSNR_CAP: f64 = 99.0;

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Runs the per-subsequence gain protocol.
///
/// `base` and `reshaped` hold one subsequence's frame results per ladder QP,
/// in ladder order. Measured gains interpolate each P frame's RD polyline at
/// the subsequence evaluation rate; predicted gains read the pooled R-H
/// scatter (both modes, all QPs, P frames) through the slope-ratio estimate.
/// With `k_hat <= 1` (identity) prediction is skipped and the cosine is
/// undefined.
pub fn gain_report(
    base: &[Vec<FrameResult>],
    reshaped: &[Vec<FrameResult>],
    k_hat: f64,
    mid_idx: usize,
) -> Result<GainReport> {
    if base.is_empty() || base.len() != reshaped.len() {
        return Err(Error::Domain(format!(
            "ladder runs differ: {} base vs {} reshaped",
            base.len(),
            reshaped.len()
        )));
    }
    if mid_idx >= base.len() {
        return Err(Error::Domain(format!("mid ladder index {mid_idx} out of range")));
    }
    let nframes = base[0].len();
    if nframes < 2 {
        return Err(Error::EmptyInput("subsequence has no P frames"));
    }
    for runs in [base, reshaped] {
        if runs.iter().any(|r| r.len() != nframes) {
            return Err(Error::Domain("ladder runs cover different frame counts".into()));
        }
    }

    let p_frames: Vec<usize> = (0..nframes)
        .filter(|&t| base[0][t].frame_type == FrameType::P)
        .collect();
    if p_frames.is_empty() {
        return Err(Error::EmptyInput("subsequence has no P frames"));
    }

    // Evaluation rate: mean base-mode P-frame rate at the mid-ladder QP.
    let eval_rate = base[mid_idx]
        .iter()
        .enumerate()
        .filter(|(t, _)| p_frames.contains(t))
        .map(|(_, fr)| fr.rate)
        .sum::<f64>()
        / p_frames.len() as f64;

    // Pooled R-H scatter from both modes across the ladder, P frames only.
    let mut pooled: Vec<RatePoint> = Vec::new();
    for (runs, reshaped_flag) in [(base, false), (reshaped, true)] {
        for per_qp in runs {
            for &t in &p_frames {
                let fr = &per_qp[t];
                pooled.push(RatePoint {
                    entropy: fr.entropy,
                    rate: fr.rate,
                    qp: fr.qp,
                    reshaped: reshaped_flag,
                });
            }
        }
    }

    let predict = k_hat > 1.0;
    let mut frames = Vec::with_capacity(p_frames.len());
    let mut skipped = 0usize;
    for &t in &p_frames {
        let polyline = |runs: &[Vec<FrameResult>]| -> Result<RDCurve> {
            let pts: Vec<(f64, f64)> =
                runs.iter().map(|per_qp| (per_qp[t].rate, per_qp[t].psnr.min(PSNR_CAP))).collect();
            RDCurve::new(&pts)
        };
        let measured = match (polyline(base)?.psnr_at(eval_rate), polyline(reshaped)?.psnr_at(eval_rate)) {
            (Ok(pb), Ok(pr)) => Some(pr - pb),
            _ => {
                skipped += 1;
                None
            }
        };

        let (eta_hat, eta_clamped, predicted) = if predict {
            let r0 = base[mid_idx][t].rate;
            match estimate_eta(&pooled, r0, k_hat) {
                Ok(est) => (Some(est.eta), est.clamped, predict_gain(est.eta, k_hat).ok()),
                Err(_) => (None, false, None),
            }
        } else {
            (None, false, None)
        };

        frames.push(FrameGain { frame: t, measured, eta_hat, eta_clamped, predicted });
    }

    let measured_vals: Vec<f64> = frames.iter().filter_map(|f| f.measured).collect();
    let predicted_vals: Vec<f64> = frames.iter().filter_map(|f| f.predicted).collect();
    let paired: (Vec<f64>, Vec<f64>) = frames
        .iter()
        .filter_map(|f| f.measured.zip(f.predicted))
        .unzip();
    let cosine = if paired.0.len() >= 2 {
        cosine_similarity(&paired.0, &paired.1).ok()
    } else {
        None
    };

    Ok(GainReport {
        k_hat,
        eval_rate,
        frames,
        mean_measured: mean(&measured_vals),
        mean_predicted: mean(&predicted_vals),
        cosine,
        skipped_out_of_hull: skipped,
    })
}
