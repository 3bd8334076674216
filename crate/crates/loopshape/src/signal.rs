//! Integer luma rasters, raw 4:2:0 ingest, and synthetic test content.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Macroblock side in pixels; frame dimensions are multiples of this.
pub const MB_SIZE: usize = 16;

/// Frames per subsequence: one I frame followed by `GOP_LEN - 1` P frames.
pub const GOP_LEN: usize = 20;

// ---------------------------------------------------------------- Plane ----

/// One n-bit luma frame, row-major integer samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    bit_depth: u8,
    samples: Vec<u16>,
}

impl Plane {
    /// Builds a plane, checking sample count and the `[0, 2^n - 1]` range.
    pub fn new(width: usize, height: usize, bit_depth: u8, samples: Vec<u16>) -> Result<Self> {
        if !(bit_depth == 8 || bit_depth == 10) {
            return Err(Error::Domain(format!(
                "bit depth {bit_depth} unsupported (expected 8 or 10)"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Geometry(format!("empty geometry {width}x{height}")));
        }
        if samples.len() != width * height {
            return Err(Error::Geometry(format!(
                "sample count {} does not match {width}x{height}",
                samples.len()
            )));
        }
        let max = ((1u32 << bit_depth) - 1) as u16;
        if let Some(s) = samples.iter().find(|&&s| s > max) {
            return Err(Error::Domain(format!(
                "sample {s} exceeds max code value {max} for {bit_depth}-bit content"
            )));
        }
        Ok(Self { width, height, bit_depth, samples })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    /// Max code value M = 2^n - 1.
    pub fn max_value(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.samples[y * self.width + x]
    }

    /// True when both dimensions are macroblock multiples.
    pub fn is_macroblock_aligned(&self) -> bool {
        self.width.is_multiple_of(MB_SIZE) && self.height.is_multiple_of(MB_SIZE)
    }

    /// Pads to the next macroblock multiple by edge replication. Original
    /// samples are untouched; an already aligned plane is returned as-is.
    pub fn pad_to_macroblock(&self) -> Plane {
        if self.is_macroblock_aligned() {
            return self.clone();
        }
        let pw = self.width.div_ceil(MB_SIZE) * MB_SIZE;
        let ph = self.height.div_ceil(MB_SIZE) * MB_SIZE;
        let mut samples = Vec::with_capacity(pw * ph);
        for y in 0..ph {
            let sy = y.min(self.height - 1);
            for x in 0..pw {
                let sx = x.min(self.width - 1);
                samples.push(self.get(sx, sy));
            }
        }
        Plane { width: pw, height: ph, bit_depth: self.bit_depth, samples }
    }

    /// Real-valued copy for the coding loop.
    pub fn to_raster(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            data: self.samples.iter().map(|&s| f64::from(s)).collect(),
        }
    }

    pub fn min_max(&self) -> (u16, u16) {
        let mut lo = u16::MAX;
        let mut hi = 0u16;
        for &s in &self.samples {
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    }
}

// --------------------------------------------------------------- Raster ----

/// Real-valued working frame (reconstructions, predictions, residuals).
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "raster data length mismatch");
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with coordinates clamped to the frame rectangle.
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    /// Mean squared error against another raster of the same geometry.
    pub fn mse(&self, other: &Raster) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "raster geometry mismatch");
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        sum / self.data.len() as f64
    }
}

/// PSNR in dB for a squared error against peak code value `m`.
pub fn psnr(mse: f64, m: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        10.0 * ((m * m) / mse).log10()
    }
}

// ------------------------------------------------------------- Sequence ----

/// Ordered frames sharing one geometry.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub frames: Vec<Plane>,
    pub frame_rate: f64,
    pub name: String,
}

impl Sequence {
    pub fn new(frames: Vec<Plane>, frame_rate: f64, name: impl Into<String>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyInput("sequence has no frames"));
        }
        let (w, h, d) = (frames[0].width(), frames[0].height(), frames[0].bit_depth());
        for (i, f) in frames.iter().enumerate() {
            if f.width() != w || f.height() != h || f.bit_depth() != d {
                return Err(Error::Geometry(format!(
                    "frame {i} geometry {}x{}@{} differs from frame 0 {w}x{h}@{d}",
                    f.width(),
                    f.height(),
                    f.bit_depth()
                )));
            }
        }
        Ok(Self { frames, frame_rate, name: name.into() })
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn bit_depth(&self) -> u8 {
        self.frames[0].bit_depth()
    }

    pub fn max_value(&self) -> u16 {
        self.frames[0].max_value()
    }

    /// Groups of `GOP_LEN` frames; the last group may be shorter.
    pub fn subsequences(&self) -> impl Iterator<Item = &[Plane]> {
        self.frames.chunks(GOP_LEN)
    }
}

// ------------------------------------------------------------- YUV 4:2:0 ----

fn bytes_per_sample(bit_depth: u8) -> usize {
    if bit_depth > 8 {
        2
    } else {
        1
    }
}

/// Reads raw planar YUV 4:2:0, keeping only luma. 10-bit content is two
/// bytes per sample, little-endian, LSB-aligned.
pub fn load_yuv(path: impl AsRef<Path>, width: usize, height: usize, bit_depth: u8) -> Result<Sequence> {
    let path = path.as_ref();
    let bps = bytes_per_sample(bit_depth);
    let luma_bytes = width * height * bps;
    // 4:2:0 chroma: two quarter-size planes.
    let chroma_bytes = (width * height / 2) * bps;
    let frame_bytes = luma_bytes + chroma_bytes;

    let meta_len = std::fs::metadata(path)?.len();
    if frame_bytes == 0 || meta_len == 0 || meta_len % frame_bytes as u64 != 0 {
        return Err(Error::Geometry(format!(
            "file size {meta_len} is not a multiple of the {width}x{height} {bit_depth}-bit frame size {frame_bytes}"
        )));
    }
    let nframes = (meta_len / frame_bytes as u64) as usize;

    let mut rd = BufReader::new(File::open(path)?);
    let max = ((1u32 << bit_depth) - 1) as u16;
    let mut frames = Vec::with_capacity(nframes);
    let mut luma = vec![0u8; luma_bytes];
    let mut chroma = vec![0u8; chroma_bytes];
    for _ in 0..nframes {
        rd.read_exact(&mut luma)?;
        rd.read_exact(&mut chroma)?;
        let samples: Vec<u16> = if bps == 1 {
            luma.iter().map(|&b| u16::from(b)).collect()
        } else {
            luma.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
        };
        if let Some(&s) = samples.iter().find(|&&s| s > max) {
            return Err(Error::Domain(format!(
                "sample {s} exceeds max code value {max} for declared depth {bit_depth}"
            )));
        }
        frames.push(Plane::new(width, height, bit_depth, samples)?);
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Sequence::new(frames, 0.0, name)
}

/// Writes raw planar YUV 4:2:0 with neutral (mid-level) chroma, matching the
/// layout `load_yuv` expects, so a load/save round trip preserves luma.
pub fn save_yuv(path: impl AsRef<Path>, seq: &Sequence) -> Result<()> {
    let bps = bytes_per_sample(seq.bit_depth());
    let neutral: u16 = 1 << (seq.bit_depth() - 1);
    let chroma_samples = seq.width() * seq.height() / 2;
    let mut wr = BufWriter::new(File::create(path)?);
    for frame in &seq.frames {
        if bps == 1 {
            let bytes: Vec<u8> = frame.samples().iter().map(|&s| s as u8).collect();
            wr.write_all(&bytes)?;
            wr.write_all(&vec![neutral as u8; chroma_samples])?;
        } else {
            let mut bytes = Vec::with_capacity(frame.samples().len() * 2);
            for &s in frame.samples() {
                bytes.extend_from_slice(&s.to_le_bytes());
            }
            wr.write_all(&bytes)?;
            let c = neutral.to_le_bytes();
            let mut cb = Vec::with_capacity(chroma_samples * 2);
            for _ in 0..chroma_samples {
                cb.extend_from_slice(&c);
            }
            wr.write_all(&cb)?;
        }
    }
    wr.flush()?;
    Ok(())
}

// ------------------------------------------------------------ Synthetic ----

/// Deterministic synthetic content. Intensities are confined to a sub-range
/// `[lo, hi]` so the support-derived reshaper slope is controllable.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticKind {
    /// Static horizontal gradient from `lo` to `hi`.
    Ramp { lo: u16, hi: u16 },
    /// Textured patch translating by a fixed integer motion per frame over a
    /// lightly textured background. `innovation_sigma`, when set, adds fresh
    /// per-frame Gaussian noise on top of the translating scene.
    MovingBlock {
        lo: u16,
        hi: u16,
        patch_size: usize,
        shift: (i32, i32),
        bg_sigma: f64,
        innovation_sigma: Option<f64>,
    },
    /// Noise field. With `innovation_sigma` unset every frame is an
    /// independent uniform draw; set, frames share a static base plus
    /// per-frame Gaussian innovation. `sparkle_fraction` of pixels per frame
    /// additionally receive an intensity impulse of magnitude uniform in
    /// `sparkle_amp` with random sign.
    NoiseTexture {
        lo: u16,
        hi: u16,
        innovation_sigma: Option<f64>,
        sparkle_fraction: f64,
        sparkle_amp: (f64, f64),
    },
}

impl SyntheticKind {
    /// Independent uniform noise per frame on `[lo, hi]`.
    pub fn iid_noise(lo: u16, hi: u16) -> Self {
        SyntheticKind::NoiseTexture {
            lo,
            hi,
            innovation_sigma: None,
            sparkle_fraction: 0.0,
            sparkle_amp: (0.0, 0.0),
        }
    }

    /// Static base with per-frame Gaussian innovation.
    pub fn innovation(lo: u16, hi: u16, sigma: f64) -> Self {
        SyntheticKind::NoiseTexture {
            lo,
            hi,
            innovation_sigma: Some(sigma),
            sparkle_fraction: 0.0,
            sparkle_amp: (0.0, 0.0),
        }
    }
}

fn round_clip(v: f64, lo: u16, hi: u16) -> u16 {
    (v.round().max(f64::from(lo)).min(f64::from(hi))) as u16
}

/// Builds a deterministic synthetic sequence. Same arguments, same bytes.
pub fn make_synthetic(
    kind: &SyntheticKind,
    width: usize,
    height: usize,
    frame_count: usize,
    bit_depth: u8,
    seed: u64,
) -> Result<Sequence> {
    if !width.is_multiple_of(MB_SIZE) || !height.is_multiple_of(MB_SIZE) {
        return Err(Error::Geometry(format!(
            "synthetic geometry {width}x{height} must be a multiple of {MB_SIZE}"
        )));
    }
    if frame_count == 0 {
        return Err(Error::EmptyInput("frame_count is zero"));
    }
    let max = ((1u32 << bit_depth) - 1) as u16;
    let check_range = |lo: u16, hi: u16| -> Result<()> {
        if lo > hi || hi > max {
            return Err(Error::Domain(format!(
                "intensity range [{lo}, {hi}] invalid for {bit_depth}-bit content"
            )));
        }
        Ok(())
    };

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = width * height;
    let mut frames = Vec::with_capacity(frame_count);
    let name;

    match *kind {
        SyntheticKind::Ramp { lo, hi } => {
            check_range(lo, hi)?;
            name = "ramp";
            let span = f64::from(hi) - f64::from(lo);
            let mut samples = Vec::with_capacity(n);
            for _y in 0..height {
                for x in 0..width {
                    let t = if width > 1 { x as f64 / (width - 1) as f64 } else { 0.0 };
                    samples.push(round_clip(f64::from(lo) + t * span, lo, hi));
                }
            }
            let plane = Plane::new(width, height, bit_depth, samples)?;
            frames = vec![plane; frame_count];
        }
        SyntheticKind::MovingBlock { lo, hi, patch_size, shift, bg_sigma, innovation_sigma } => {
            check_range(lo, hi)?;
            name = "moving-block";
            if patch_size == 0 || patch_size >= width.min(height) {
                return Err(Error::Geometry(format!(
                    "patch size {patch_size} does not fit {width}x{height}"
                )));
            }
            if let Some(sigma) = innovation_sigma {
                if sigma <= 0.0 {
                    return Err(Error::Domain(format!("innovation sigma {sigma} must be > 0")));
                }
            }
            let mid = (f64::from(lo) + f64::from(hi)) / 2.0;
            let noise = Normal::new(0.0, bg_sigma.max(f64::MIN_POSITIVE)).map_err(|e| {
                Error::Domain(format!("background sigma {bg_sigma}: {e}"))
            })?;
            let bg: Vec<u16> = (0..n)
                .map(|_| round_clip(mid + noise.sample(&mut rng), lo, hi))
                .collect();
            let patch: Vec<u16> =
                (0..patch_size * patch_size).map(|_| rng.random_range(lo..=hi)).collect();
            let innovation = innovation_sigma
                .map(|sigma| Normal::new(0.0, sigma))
                .transpose()
                .map_err(|e| Error::Domain(format!("innovation sigma: {e}")))?;
            // Patch origin walks on a torus that keeps it fully inside the
            // frame, so every frame equals its predecessor translated by
            // `shift` inside the patch (plus fresh noise when enabled).
            let wrap_x = (width - patch_size) as i32;
            let wrap_y = (height - patch_size) as i32;
            for t in 0..frame_count {
                let t = t as i32;
                let x0 = (4 + shift.0 * t).rem_euclid(wrap_x) as usize;
                let y0 = (4 + shift.1 * t).rem_euclid(wrap_y) as usize;
                let mut samples = bg.clone();
                for py in 0..patch_size {
                    let row = (y0 + py) * width + x0;
                    samples[row..row + patch_size]
                        .copy_from_slice(&patch[py * patch_size..(py + 1) * patch_size]);
                }
                if let Some(dist) = &innovation {
                    for s in &mut samples {
                        *s = round_clip(f64::from(*s) + dist.sample(&mut rng), lo, hi);
                    }
                }
                frames.push(Plane::new(width, height, bit_depth, samples)?);
            }
        }
        SyntheticKind::NoiseTexture { lo, hi, innovation_sigma, sparkle_fraction, sparkle_amp } => {
            check_range(lo, hi)?;
            name = "noise-texture";
            if !(0.0..=1.0).contains(&sparkle_fraction) {
                return Err(Error::Domain(format!(
                    "sparkle fraction {sparkle_fraction} outside [0, 1]"
                )));
            }
            match innovation_sigma {
                None => {
                    for _ in 0..frame_count {
                        let samples: Vec<u16> =
                            (0..n).map(|_| rng.random_range(lo..=hi)).collect();
                        frames.push(Plane::new(width, height, bit_depth, samples)?);
                    }
                }
                Some(sigma) => {
                    if sigma <= 0.0 {
                        return Err(Error::Domain(format!("innovation sigma {sigma} must be > 0")));
                    }
                    let noise = Normal::new(0.0, sigma).map_err(|e| {
                        Error::Domain(format!("innovation sigma {sigma}: {e}"))
                    })?;
                    let base: Vec<f64> =
                        (0..n).map(|_| f64::from(rng.random_range(lo..=hi))).collect();
                    for _ in 0..frame_count {
                        let mut samples = Vec::with_capacity(n);
                        for &b in &base {
                            let mut v = b + noise.sample(&mut rng);
                            if sparkle_fraction > 0.0 && rng.random::<f64>() < sparkle_fraction {
                                let amp = rng.random_range(sparkle_amp.0..=sparkle_amp.1);
                                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                                v += sign * amp;
                            }
                            samples.push(round_clip(v, lo, hi));
                        }
                        frames.push(Plane::new(width, height, bit_depth, samples)?);
                    }
                }
            }
        }
    }

    Sequence::new(frames, 0.0, name)
}
