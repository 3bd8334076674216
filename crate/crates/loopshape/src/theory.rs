//! Closed-form rate-distortion results for the reshaped coding loop, plus
//! Monte-Carlo validators for the reconstruction-error approximation and the
//! two-segment crosstalk effects.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::analysis::predict_gain;
use crate::error::{Error, Result};
use crate::reshaper::{OnePieceReshaper, TwoPieceReshaper};

/// Standard deviation of a uniform residue on a unit-width cell.
pub const SIGMA_U: f64 = 0.288_675_134_594_812_9;

/// Fixed chunk count for parallel Monte-Carlo runs. Each chunk owns an
/// independent counter-based stream, and chunk partials are summed in chunk
/// order, so results do not depend on the thread schedule.
const MC_CHUNKS: u64 = 16;

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ chunk.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_chunks<T, F>(trials: u64, seed: u64, body: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha12Rng, u64) -> T + Sync,
{
    let base = trials / MC_CHUNKS;
    let rem = trials % MC_CHUNKS;
    (0..MC_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let n = base + u64::from(c < rem);
            let mut rng = chunk_rng(seed, c);
            body(&mut rng, n)
        })
        .collect()
}

/// Standard Gaussian CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

// ---------------------------------------------------------------------------
// Input distributions for the Monte-Carlo validators
// ---------------------------------------------------------------------------

/// Finite-support intensity distribution fed to the validators.
#[derive(Debug, Clone)]
pub enum InputPmf {
    /// Equal mass on every integer intensity in `lo..=hi`.
    UniformInts { lo: u32, hi: u32 },
    /// Arbitrary finite support with explicit nonnegative weights.
    Weighted {
        values: Vec<f64>,
        probs: Vec<f64>,
        /// Inclusive prefix sums of `probs`, ending at 1.
        cum: Vec<f64>,
    },
}

impl InputPmf {
    pub fn uniform_ints(lo: u32, hi: u32) -> Result<Self> {
        if lo > hi {
            return Err(Error::Domain(format!("empty integer support [{lo}, {hi}]")));
        }
        Ok(InputPmf::UniformInts { lo, hi })
    }

    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::Domain(format!(
                "{} values vs {} weights",
                values.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("weights sum to zero".into()));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cum: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(InputPmf::Weighted { values, probs, cum })
    }

    pub fn support_bounds(&self) -> (f64, f64) {
        match self {
            InputPmf::UniformInts { lo, hi } => (f64::from(*lo), f64::from(*hi)),
            InputPmf::Weighted { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            InputPmf::UniformInts { lo, hi } => f64::from(rng.random_range(*lo..=*hi)),
            InputPmf::Weighted { values, cum, .. } => {
                let r = rng.random::<f64>();
                let idx = cum.partition_point(|&c| c <= r).min(values.len() - 1);
                values[idx]
            }
        }
    }

    /// Support points with their probabilities, for closed-form sums.
    pub fn support_probs(&self) -> Vec<(f64, f64)> {
        match self {
            InputPmf::UniformInts { lo, hi } => {
                let n = u64::from(*hi) - u64::from(*lo) + 1;
                let p = 1.0 / n as f64;
                (*lo..=*hi).map(|v| (f64::from(v), p)).collect()
            }
            InputPmf::Weighted { values, probs, .. } => {
                values.iter().copied().zip(probs.iter().copied()).collect()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Closed-form curves
// ---------------------------------------------------------------------------

/// Parameters of the closed-form rate-distortion model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    /// Bit depth of the source, bits.
    pub n: f64,
    /// Quantization step.
    pub q: f64,
    /// Reshaping slope.
    pub k: f64,
    /// Secant slope of the coder's rate-vs-entropy characteristic.
    pub m0: f64,
    /// Slope ratio: 1 for an ideal coder, below 1 when overhead is
    /// partially amortized by the entropy added through reshaping.
    pub eta: f64,
    /// Differential entropy of the transformed residue before reshaping,
    /// in bits, treated as a free parameter.
    pub h0: f64,
}

impl TheoryParams {
    pub fn new(n: f64, q: f64, k: f64, m0: f64, eta: f64, h0: f64) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::Domain(format!("step {q} must be positive")));
        }
        if !(k >= 1.0) {
            return Err(Error::Domain(format!("slope {k} below 1 compresses the range")));
        }
        if !(m0 > 1.0) {
            return Err(Error::Domain(format!("secant slope {m0} must exceed 1")));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Domain(format!("slope ratio {eta} outside (0, 1]")));
        }
        Ok(Self { n, q, k, m0, eta, h0 })
    }
}

/// Distortion of the entropy-distortion characteristic at codeword entropy
/// `h` bits for an `n`-bit source: (1/12) * 2^(-2(h-n)).
pub fn hd_curve(h: f64, n: f64) -> f64 {
    (1.0 / 12.0) * 2f64.powf(-2.0 * (h - n))
}

/// Base and reshaped distortion at coded rate `r` bits. The reshaped curve
/// sits below the base one by the constant factor k^(2(eta-1)).
pub fn rd_curves(r: f64, p: &TheoryParams) -> (f64, f64) {
    let d_base = (1.0 / 12.0) * 2f64.powf(-2.0 * (r / p.m0 - (p.n + p.h0)));
    let d_reshaped = d_base * p.k.powf(2.0 * (p.eta - 1.0));
    (d_base, d_reshaped)
}

/// Codeword-entropy increase caused by a one-piece slope `k`.
pub fn entropy_gain_one_piece(k: f64) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(Error::Domain(format!(
            "slope {k} below 1 compresses the range instead of expanding it"
        )));
    }
    Ok(k.log2())
}

/// Codeword-entropy increase of a two-segment map with segment occupancies
/// `w1`, `w2` and slopes `k1`, `k2`: 0.5 * log2(w1*k1^2 + w2*k2^2).
pub fn entropy_gain_two_piece(w1: f64, w2: f64, k1: f64, k2: f64) -> Result<f64> {
    if w1 < 0.0 || w2 < 0.0 || (w1 + w2 - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("weights ({w1}, {w2}) must be nonnegative and sum to 1")));
    }
    if !(k1 > 0.0 && k2 > 0.0) {
        return Err(Error::Domain(format!("slopes ({k1}, {k2}) must be positive")));
    }
    Ok(0.5 * (w1 * k1 * k1 + w2 * k2 * k2).log2())
}

// ---------------------------------------------------------------------------
// Reconstruction-error validation (one-piece map)
// ---------------------------------------------------------------------------

/// Monte-Carlo measurement of the reconstruction error under clipping.
#[derive(Debug, Clone, Copy)]
pub struct ReconErrorStats {
    /// Decomposition estimator: clipped trials contribute their squared
    /// distance to the clamp level, interior trials their exact conditional
    /// expectation (q/k)^2/12.
    pub decomposition_mse: f64,
    /// Plain per-trial average of the squared reconstruction error over the
    /// same draws.
    pub trial_mse: f64,
    /// Interior-only approximation (q/k)^2/12 the estimator is compared to.
    pub theory_mse: f64,
    /// |decomposition_mse / theory_mse - 1|, as a fraction.
    pub relative_error: f64,
    pub clip_low_freq: f64,
    pub clip_high_freq: f64,
    pub trials: u64,
}

/// Simulates intensity draws through the one-piece map with an additive
/// Gaussian surrogate for the quantization residue (std q/sqrt(12)), applies
/// the three-branch backward map, and compares the error decomposition
/// against the interior-only approximation.
pub fn montecarlo_recon_error(
    a: f64,
    b: f64,
    m: f64,
    q: f64,
    pmf: &InputPmf,
    trials: u64,
    seed: u64,
) -> Result<ReconErrorStats> {
    if !(a > 0.0 && a < b && b < 1.0) {
        return Err(Error::Domain(format!("breakpoints ({a}, {b}) must satisfy 0 < a < b < 1")));
    }
    if !(q > 0.0) {
        return Err(Error::Domain(format!("step {q} must be positive")));
    }
    if trials == 0 {
        return Err(Error::Domain("zero trials".into()));
    }
    let shaper = OnePieceReshaper::new(a, b, m)?;
    let (lo, hi) = pmf.support_bounds();
    if lo < 0.0 || hi > m {
        return Err(Error::Domain(format!(
            "input support [{lo}, {hi}] outside code range [0, {m}]"
        )));
    }

    let k = shaper.k();
    let theory = (q / k) * (q / k) / 12.0;
    let noise = Normal::new(0.0, q * SIGMA_U).expect("positive std");
    let (am, bm) = (a * m, b * m);

    #[derive(Default)]
    struct Partial {
        decomp: f64,
        trial: f64,
        n_low: u64,
        n_high: u64,
    }

    let partials = run_chunks(trials, seed, |rng, n| {
        let mut p = Partial::default();
        for _ in 0..n {
            let x = pmf.sample(rng);
            let y = shaper.forward(x) + noise.sample(rng);
            if y <= 0.0 {
                p.n_low += 1;
                p.decomp += (x - am) * (x - am);
            } else if y > m {
                p.n_high += 1;
                p.decomp += (bm - x) * (bm - x);
            } else {
                p.decomp += theory;
            }
            let err = shaper.backward(y) - x;
            p.trial += err * err;
        }
        p
    });

    let mut total = Partial::default();
    for p in partials {
        total.decomp += p.decomp;
        total.trial += p.trial;
        total.n_low += p.n_low;
        total.n_high += p.n_high;
    }
    let nt = trials as f64;
    let decomposition_mse = total.decomp / nt;
    Ok(ReconErrorStats {
        decomposition_mse,
        trial_mse: total.trial / nt,
        theory_mse: theory,
        relative_error: (decomposition_mse / theory - 1.0).abs(),
        clip_low_freq: total.n_low as f64 / nt,
        clip_high_freq: total.n_high as f64 / nt,
        trials,
    })
}

/// Probabilities of the three backward-map branches.
#[derive(Debug, Clone, Copy)]
pub struct ClipProbabilities {
    pub clip_low: f64,
    pub interior: f64,
    pub clip_high: f64,
}

/// Closed-form branch probabilities under the Gaussian residue surrogate:
/// the low clip sums Phi(-k(x - aM)/(q*sigma_u)) over the input PMF, the
/// high clip mirrors it around bM, and the interior takes the rest.
pub fn clipping_probability(a: f64, b: f64, m: f64, q: f64, pmf: &InputPmf) -> Result<ClipProbabilities> {
    if !(a > 0.0 && a < b && b < 1.0) {
        return Err(Error::Domain(format!("breakpoints ({a}, {b}) must satisfy 0 < a < b < 1")));
    }
    if !(q > 0.0) {
        return Err(Error::Domain(format!("step {q} must be positive")));
    }
    let k = 1.0 / (b - a);
    let (am, bm) = (a * m, b * m);
    let denom = q * SIGMA_U;
    let mut clip_low = 0.0;
    let mut clip_high = 0.0;
    for (x, p) in pmf.support_probs() {
        clip_low += std_normal_cdf(-k * (x - am) / denom) * p;
        clip_high += std_normal_cdf(-k * (bm - x) / denom) * p;
    }
    Ok(ClipProbabilities { clip_low, interior: (1.0 - clip_low - clip_high).max(0.0), clip_high })
}

// ---------------------------------------------------------------------------
// Two-segment validation
// ---------------------------------------------------------------------------

/// Monte-Carlo measurement for the two-segment map.
#[derive(Debug, Clone, Copy)]
pub struct TwoPieceMcStats {
    /// Per-trial average squared reconstruction error.
    pub mse: f64,
    /// Frequency of noise pushing a first-segment value across the interior
    /// breakpoint into the second segment's inverse.
    pub crosstalk_low_to_high: f64,
    /// The mirrored event.
    pub crosstalk_high_to_low: f64,
    pub trials: u64,
}

/// Simulates the two-segment map under the Gaussian residue surrogate and
/// counts segment-crossing events around the interior breakpoint.
pub fn montecarlo_two_piece(
    shaper: &TwoPieceReshaper,
    q: f64,
    pmf: &InputPmf,
    trials: u64,
    seed: u64,
) -> Result<TwoPieceMcStats> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("step {q} must be positive")));
    }
    if trials == 0 {
        return Err(Error::Domain("zero trials".into()));
    }
    let m = shaper.m();
    let (lo, hi) = pmf.support_bounds();
    if lo < 0.0 || hi > m {
        return Err(Error::Domain(format!(
            "input support [{lo}, {hi}] outside code range [0, {m}]"
        )));
    }
    let beta2 = shaper.beta2();
    let noise = Normal::new(0.0, q * SIGMA_U).expect("positive std");

    let partials = run_chunks(trials, seed, |rng, n| {
        let mut sq = 0.0;
        let mut lo_hi = 0u64;
        let mut hi_lo = 0u64;
        for _ in 0..n {
            let x = pmf.sample(rng);
            let y0 = shaper.forward(x);
            let y = y0 + noise.sample(rng);
            if y0 < beta2 && y > beta2 {
                lo_hi += 1;
            } else if y0 > beta2 && y < beta2 {
                hi_lo += 1;
            }
            let err = shaper.backward(y) - x;
            sq += err * err;
        }
        (sq, lo_hi, hi_lo)
    });

    let mut sq = 0.0;
    let mut lo_hi = 0u64;
    let mut hi_lo = 0u64;
    for (s, l, h) in partials {
        sq += s;
        lo_hi += l;
        hi_lo += h;
    }
    let nt = trials as f64;
    Ok(TwoPieceMcStats {
        mse: sq / nt,
        crosstalk_low_to_high: lo_hi as f64 / nt,
        crosstalk_high_to_low: hi_lo as f64 / nt,
        trials,
    })
}

// ---------------------------------------------------------------------------
// Differential-entropy estimation
// ---------------------------------------------------------------------------

/// Histogram estimate of differential entropy in bits, with the bin width
/// set from the sample spread (3.49 * std * n^(-1/3)).
pub fn differential_entropy(samples: &[f64]) -> Result<f64> {
    if samples.len() < 10_000 {
        return Err(Error::Domain(format!(
            "{} samples; histogram estimate needs at least 10000",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(Error::Degenerate("zero-variance samples".into()));
    }
    let width = 3.49 * std * n.powf(-1.0 / 3.0);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut counts: std::collections::HashMap<i64, u64> = std::collections::HashMap::new();
    for &x in samples {
        *counts.entry(((x - min) / width).floor() as i64).or_insert(0) += 1;
    }
    let mut h = 0.0;
    for &c in counts.values() {
        let p = c as f64 / n;
        h -= p * p.log2();
    }
    Ok(h + width.log2())
}

/// Differential-entropy estimates before and after scaling by `k`.
#[derive(Debug, Clone, Copy)]
pub struct EntropyShift {
    pub h0_hat: f64,
    pub h1_hat: f64,
    /// h1_hat - h0_hat; log2(k) in theory.
    pub shift: f64,
}

pub fn differential_entropy_shift(samples: &[f64], k: f64) -> Result<EntropyShift> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("scale {k} must be positive and finite")));
    }
    let h0_hat = differential_entropy(samples)?;
    let scaled: Vec<f64> = samples.iter().map(|&x| k * x).collect();
    let h1_hat = differential_entropy(&scaled)?;
    Ok(EntropyShift { h0_hat, h1_hat, shift: h1_hat - h0_hat })
}

// ---------------------------------------------------------------------------
// Reference gain table
// ---------------------------------------------------------------------------

/// One row of the reference gain table.
#[derive(Debug, Clone, Copy)]
pub struct GainTableRow {
    pub eta: f64,
    pub k: f64,
    pub dpsnr_db: f64,
}

/// Predicted PSNR gains at representative slope-ratio and slope values,
/// including the no-gain row at eta = 1.
pub fn theoretical_gain_table() -> Vec<GainTableRow> {
    [(0.95, 2.0), (0.98, 2.0), (0.95, 1.8), (0.98, 1.8), (1.0, 2.0)]
        .iter()
        .map(|&(eta, k)| GainTableRow {
            eta,
            k,
            dpsnr_db: predict_gain(eta, k).expect("table inputs are valid"),
        })
        .collect()
}
