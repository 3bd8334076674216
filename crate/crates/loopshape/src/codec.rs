//! The closed-loop encoder: reshape, predict, transform, quantize, meter,
//! reconstruct, inverse-reshape. Reconstructions (never originals) feed the
//! prediction loop, exactly as a standalone decoder would see them.

use crate::entropy::{self, SymbolModel};
use crate::error::{Error, Result};
use crate::motion::{self, MotionField};
use crate::reshaper::{estimate_params, OnePieceReshaper, TwoPieceReshaper};
use crate::signal::{psnr, Plane, Raster, Sequence};
use crate::transform::{codeword_index, forward_frame, inverse_frame, QuantizerSpec};

/// Reshaper applied inside the coding loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReshaperMode {
    Identity,
    OnePiece(OnePieceReshaper),
    TwoPiece(TwoPieceReshaper),
}

impl ReshaperMode {
    pub fn forward(&self, x: f64) -> f64 {
        match self {
            ReshaperMode::Identity => x,
            ReshaperMode::OnePiece(r) => r.forward(x),
            ReshaperMode::TwoPiece(r) => r.forward(x),
        }
    }

    pub fn backward(&self, y: f64) -> f64 {
        match self {
            ReshaperMode::Identity => y,
            ReshaperMode::OnePiece(r) => r.backward(y),
            ReshaperMode::TwoPiece(r) => r.backward(y),
        }
    }

    /// Slope the mode applies to residual amplitudes. The two-piece value is
    /// the entropy-equivalent root-mean-square slope over the occupied
    /// segments of `frame` (weights from the sample counts on each side of
    /// the interior breakpoint).
    pub fn slope_for(&self, frame: &Plane) -> f64 {
        match self {
            ReshaperMode::Identity => 1.0,
            ReshaperMode::OnePiece(r) => r.k(),
            ReshaperMode::TwoPiece(r) => {
                let (a1, a2, a3) = r.breakpoints();
                let m = r.m();
                let (lo, mid, hi) = (a1 * m, a2 * m, a3 * m);
                let mut n1 = 0u64;
                let mut n2 = 0u64;
                for &s in frame.samples() {
                    let x = f64::from(s);
                    if x > lo && x <= mid {
                        n1 += 1;
                    } else if x > mid && x <= hi {
                        n2 += 1;
                    }
                }
                let n = n1 + n2;
                if n == 0 {
                    return 1.0;
                }
                let w1 = n1 as f64 / n as f64;
                let w2 = n2 as f64 / n as f64;
                (w1 * r.k1() * r.k1() + w2 * r.k2() * r.k2()).sqrt()
            }
        }
    }
}

/// How the per-subsequence reshaper is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReshaperSelect {
    Identity,
    /// One-piece parameters from the subsequence's histogram support,
    /// widened by the margin fraction.
    Estimate { margin: f64 },
    Fixed(ReshaperMode),
}

/// Per-run codec settings.
#[derive(Debug, Clone, Copy)]
pub struct CodecConfig {
    pub quantizer: QuantizerSpec,
    pub reshaper: ReshaperSelect,
    /// Entropy-coder suboptimality knob.
    pub granularity: u32,
    pub search_range: i32,
    /// Retain per-frame codewords and motion for decode replay.
    pub keep_payload: bool,
}

impl CodecConfig {
    pub fn new(quantizer: QuantizerSpec, reshaper: ReshaperSelect, granularity: u32, search_range: i32) -> Self {
        Self { quantizer, reshaper, granularity, search_range, keep_payload: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameType {
    I,
    P,
}

impl std::fmt::Display for FrameType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FrameType::I => write!(f, "I"),
            FrameType::P => write!(f, "P"),
        }
    }
}

/// Everything a standalone decoder needs to replay one frame.
#[derive(Debug, Clone)]
pub struct FramePayload {
    pub indices: Vec<i64>,
    pub motion: Option<MotionField>,
}

/// Measurements for one coded frame.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame_type: FrameType,
    pub qp: u32,
    pub q: f64,
    /// Shannon entropy of the frame's codewords, bits/symbol.
    pub entropy: f64,
    /// Expected code length under the frame's coder model, bits/symbol.
    pub rate: f64,
    /// Byte-level bitstream length actually produced, in bits.
    pub coded_bits: u64,
    /// Symbols per frame (one per pixel).
    pub symbols: usize,
    pub mse: f64,
    pub psnr: f64,
    /// Reshaper slope applied to this frame (1 for identity).
    pub k_used: f64,
    /// Records the coarse-knob fallback when it fires.
    pub granularity_used: u32,
    pub payload: Option<FramePayload>,
}

/// One subsequence's coded frames under a fixed reshaper.
#[derive(Debug, Clone)]
pub struct SubsequenceResult {
    /// Index of the subsequence's first frame within the sequence.
    pub start_frame: usize,
    pub reshaper: ReshaperMode,
    /// Support-expansion slope of the chosen reshaper (1 for identity).
    pub k_hat: f64,
    /// True when estimation degraded to identity on full-range content.
    pub full_range_fallback: bool,
    pub frames: Vec<FrameResult>,
}

fn forward_raster(shaper: &ReshaperMode, src: &Raster) -> Raster {
    let mut out = src.clone();
    for v in out.data_mut() {
        *v = shaper.forward(*v);
    }
    out
}

/// Codes one frame against an optional reference reconstruction (original
/// domain). Returns the new reconstruction and its measurements.
pub fn encode_frame(
    current: &Plane,
    reference: Option<&Raster>,
    shaper: &ReshaperMode,
    cfg: &CodecConfig,
) -> Result<(Raster, FrameResult)> {
    if !current.is_macroblock_aligned() {
        return Err(Error::Geometry(format!(
            "frame {}x{} not padded to the macroblock grid",
            current.width(),
            current.height()
        )));
    }
    let m = f64::from(current.max_value());
    let q = cfg.quantizer.q;
    let cur = current.to_raster();
    let (w, h) = (cur.width(), cur.height());

    // Prediction in the reshaped domain. P frames predict from the motion-
    // compensated previous reconstruction; I frames use the constant
    // mid-level so every frame walks the same residual path.
    let (pred_g, motion_field, frame_type) = match reference {
        Some(refr) => {
            if refr.width() != w || refr.height() != h {
                return Err(Error::Geometry(format!(
                    "reference {}x{} vs current {w}x{h}",
                    refr.width(),
                    refr.height()
                )));
            }
            let field = motion::full_search(&cur, refr, cfg.search_range)?;
            let pred = motion::compensate(refr, &field)?;
            (forward_raster(shaper, &pred), Some(field), FrameType::P)
        }
        None => {
            (Raster::from_data(w, h, vec![m / 2.0; w * h]), None, FrameType::I)
        }
    };

    // Residual in the reshaped domain, then blockwise DCT and quantization.
    let cur_g = forward_raster(shaper, &cur);
    let mut residual = Raster::zeros(w, h);
    for i in 0..w * h {
        residual.data_mut()[i] = cur_g.data()[i] - pred_g.data()[i];
    }
    let coeffs = forward_frame(&residual);
    let indices: Vec<i64> = coeffs.data().iter().map(|&c| codeword_index(c, q)).collect();

    // Metering: entropy of the empirical codeword histogram, the coder
    // model's expected code length (the rate statistic), and the byte-level
    // bitstream length under the same model.
    let entropy_bits = entropy::measure_entropy(&indices)?;
    let model = SymbolModel::from_indices(&indices, cfg.granularity)?;
    let coded_bits = entropy::encode(&indices, &model)?;
    let rate = entropy::expected_rate(&indices, &model)?;

    // Reconstruction exactly as a decoder would: dequantize, inverse
    // transform, add the prediction, map back to the original domain.
    let rec = reconstruct(&indices, &pred_g, shaper, q, w, h);

    let mse = rec.mse(&cur);
    let result = FrameResult {
        frame_type,
        qp: cfg.quantizer.qp,
        q,
        entropy: entropy_bits,
        rate,
        coded_bits,
        symbols: indices.len(),
        mse,
        psnr: psnr(mse, m),
        k_used: shaper.slope_for(current),
        granularity_used: model.effective_granularity(),
        payload: cfg.keep_payload.then(|| FramePayload {
            indices: indices.clone(),
            motion: motion_field,
        }),
    };
    Ok((rec, result))
}

/// Decoder-side reconstruction from codewords and the reshaped-domain
/// prediction. Shared verbatim by the encoder's loop and standalone replay,
/// so encoder and decoder cannot drift.
pub fn reconstruct(
    indices: &[i64],
    pred_g: &Raster,
    shaper: &ReshaperMode,
    q: f64,
    w: usize,
    h: usize,
) -> Raster {
    let deq = Raster::from_data(w, h, indices.iter().map(|&i| i as f64 * q).collect());
    let rec_res = inverse_frame(&deq);
    let mut rec = Raster::zeros(w, h);
    for i in 0..w * h {
        rec.data_mut()[i] = shaper.backward(rec_res.data()[i] + pred_g.data()[i]);
    }
    rec
}

/// Replays a coded subsequence from payloads alone, returning the
/// reconstruction of every frame. Used to verify the closed-loop property.
pub fn decode_subsequence(
    sub: &SubsequenceResult,
    width: usize,
    height: usize,
    m: f64,
) -> Result<Vec<Raster>> {
    let mut recs: Vec<Raster> = Vec::with_capacity(sub.frames.len());
    for fr in &sub.frames {
        let payload = fr
            .payload
            .as_ref()
            .ok_or_else(|| Error::Codec("frame payload not retained; encode with keep_payload".into()))?;
        let pred_g = match (&fr.frame_type, &payload.motion) {
            (FrameType::I, _) => Raster::from_data(width, height, vec![m / 2.0; width * height]),
            (FrameType::P, Some(field)) => {
                let refr = recs.last().ok_or_else(|| Error::Codec("P frame without reference".into()))?;
                let pred = motion::compensate(refr, field)?;
                forward_raster(&sub.reshaper, &pred)
            }
            (FrameType::P, None) => {
                return Err(Error::Codec("P frame payload lacks a motion field".into()))
            }
        };
        recs.push(reconstruct(&payload.indices, &pred_g, &sub.reshaper, fr.q, width, height));
    }
    Ok(recs)
}

/// Codes a whole sequence in independent 20-frame subsequences
/// (I + 19 P), with reshaper parameters fixed per subsequence.
pub fn encode_sequence(seq: &Sequence, cfg: &CodecConfig) -> Result<Vec<SubsequenceResult>> {
    let mut out = Vec::new();
    let mut start = 0usize;
    for chunk in seq.subsequences() {
        let (shaper, full_range_fallback) = match cfg.reshaper {
            ReshaperSelect::Identity => (ReshaperMode::Identity, false),
            ReshaperSelect::Fixed(mode) => (mode, false),
            ReshaperSelect::Estimate { margin } => {
                let est = estimate_params(chunk, margin)?;
                if est.reshaper.is_identity() {
                    (ReshaperMode::Identity, est.full_range_fallback)
                } else {
                    (ReshaperMode::OnePiece(est.reshaper), false)
                }
            }
        };
        let k_hat = match shaper {
            ReshaperMode::Identity => 1.0,
            ReshaperMode::OnePiece(r) => r.k(),
            ReshaperMode::TwoPiece(r) => r.k1().max(r.k2()),
        };

        let mut frames = Vec::with_capacity(chunk.len());
        let mut reference: Option<Raster> = None;
        for plane in chunk {
            let (rec, result) = encode_frame(plane, reference.as_ref(), &shaper, cfg)?;
            frames.push(result);
            reference = Some(rec);
        }
        out.push(SubsequenceResult { start_frame: start, reshaper: shaper, k_hat, full_range_fallback, frames });
        start += chunk.len();
    }
    Ok(out)
}
