//! Named synthetic sequences shared by the validation suite and the CLI.
//! Every preset is deterministic, 10-bit, one 20-frame subsequence, with
//! intensity support [192, 831] so the support-derived reshaper slope lands
//! at 1023/639, about 1.6.
//!
//! The slope is kept well away from the quantizer ladder's step ratios on
//! purpose. With a slope matching a ladder ratio (2 being the worst case on
//! a dyadic ladder), a reshaped run reproduces the base run's codeword
//! streams one notch over, so both modes pay identical model penalties and
//! the coder-degradation experiment reads pure noise. At 1.6 the two modes'
//! histograms genuinely differ at every ladder point.

use crate::signal::{make_synthetic, Sequence, SyntheticKind};

pub const FIXTURE_SIDE: usize = 160;
pub const FIXTURE_FRAMES: usize = 20;
pub const FIXTURE_BIT_DEPTH: u8 = 10;
pub const FIXTURE_LO: u16 = 192;
pub const FIXTURE_HI: u16 = 831;
/// Search range matched to the presets' largest per-frame displacement.
pub const FIXTURE_SEARCH_RANGE: i32 = 8;

/// The validation presets, ordered as reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    /// Independent uniform noise per frame: memoryless, fully in the
    /// high-rate regime the gain predictor assumes.
    Iid,
    /// Static texture plus sigma-30 innovation.
    Innovation30,
    /// Sigma-12 innovation with rare large-amplitude impulses.
    Sparkle12,
    /// Sigma-30 innovation with rare large-amplitude impulses.
    Sparkle30,
    /// Translating textured patch over a calm background, plus sigma-25
    /// innovation; the only preset whose residuals are motion-dominated.
    MovingBlock,
}

impl Fixture {
    pub const ALL: [Fixture; 5] = [
        Fixture::Iid,
        Fixture::Innovation30,
        Fixture::Sparkle12,
        Fixture::Sparkle30,
        Fixture::MovingBlock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Iid => "iid",
            Fixture::Innovation30 => "innov30",
            Fixture::Sparkle12 => "sparkle12",
            Fixture::Sparkle30 => "sparkle30",
            Fixture::MovingBlock => "movblk",
        }
    }

    pub fn from_name(name: &str) -> Option<Fixture> {
        Fixture::ALL.iter().copied().find(|f| f.name() == name)
    }

    fn seed(self) -> u64 {
        match self {
            Fixture::Iid => 11,
            Fixture::Innovation30 => 13,
            Fixture::Sparkle12 => 21,
            Fixture::Sparkle30 => 22,
            Fixture::MovingBlock => 14,
        }
    }

    fn kind(self) -> SyntheticKind {
        match self {
            Fixture::Iid => SyntheticKind::iid_noise(FIXTURE_LO, FIXTURE_HI),
            Fixture::Innovation30 => SyntheticKind::innovation(FIXTURE_LO, FIXTURE_HI, 30.0),
            Fixture::Sparkle12 => SyntheticKind::NoiseTexture {
                lo: FIXTURE_LO,
                hi: FIXTURE_HI,
                innovation_sigma: Some(12.0),
                sparkle_fraction: 0.005,
                sparkle_amp: (100.0, 300.0),
            },
            Fixture::Sparkle30 => SyntheticKind::NoiseTexture {
                lo: FIXTURE_LO,
                hi: FIXTURE_HI,
                innovation_sigma: Some(30.0),
                sparkle_fraction: 0.005,
                sparkle_amp: (100.0, 300.0),
            },
            Fixture::MovingBlock => SyntheticKind::MovingBlock {
                lo: FIXTURE_LO,
                hi: FIXTURE_HI,
                patch_size: 24,
                shift: (2, -1),
                bg_sigma: 6.0,
                innovation_sigma: Some(25.0),
            },
        }
    }

    /// Whether the preset's residual statistics satisfy the noise-like,
    /// high-rate assumptions behind the per-frame gain predictor. The
    /// moving-block preset does not: motion compensation leaves residuals
    /// dominated by patch edges and the quantizer deadzone, where reshaping
    /// can lose outright.
    pub fn fits_gain_predictor(self) -> bool {
        !matches!(self, Fixture::MovingBlock)
    }

    pub fn sequence(self) -> Sequence {
        make_synthetic(
            &self.kind(),
            FIXTURE_SIDE,
            FIXTURE_SIDE,
            FIXTURE_FRAMES,
            FIXTURE_BIT_DEPTH,
            self.seed(),
        )
        .expect("preset parameters are valid")
    }
}
