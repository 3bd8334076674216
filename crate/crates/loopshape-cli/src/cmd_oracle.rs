//! Closed-form and Monte-Carlo reference tables, emitted as CSV for
//! downstream comparison and plotting.

use std::path::PathBuf;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use loopshape::reshaper::TwoPieceReshaper;
use loopshape::theory::{
    differential_entropy_shift, entropy_gain_one_piece, entropy_gain_two_piece,
    montecarlo_recon_error, montecarlo_two_piece, theoretical_gain_table, InputPmf, SIGMA_U,
};
use loopshape::transform::{dct4_inverse, QP_LADDER};

use crate::tables::{
    Table, APPENDIX_B_SCHEMA, APPENDIX_C_SCHEMA, RESIDUE_HIST_SCHEMA, TABLE1_SCHEMA, TABLE3_SCHEMA,
};
use crate::{CliError, CResult};

const M: f64 = 1023.0;

#[derive(Debug, clap::Subcommand)]
pub enum OracleCmd {
    /// Closed-form gain reference rows (slope ratio, slope, dB)
    Table1 {
        /// Output CSV path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo precision of the interior reconstruction-error law,
    /// per QP, over a breakpoint sweep
    Table3 {
        #[arg(long, default_value_t = 10_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 1000)]
        seed: u64,
        /// Step of the lower-breakpoint sweep 100..=280 (intensity units)
        #[arg(long, default_value_t = 20)]
        a_step: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Differential-entropy shift of a scaled Gaussian sample
    AppendixB {
        #[arg(long, default_value_t = 50.0)]
        sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 66)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-segment map: crosstalk frequencies over the ladder plus
    /// entropy-shift columns, and optionally the transformed-residue
    /// histogram
    AppendixC {
        /// Breakpoint fractions a1,a2,a3 of the code range
        #[arg(long, default_value = "0.1,0.45,0.9")]
        breakpoints: String,
        /// First-segment slope
        #[arg(long, default_value_t = 1.6)]
        k1: f64,
        /// Uniform input support lo,hi in intensity units
        #[arg(long, default_value = "150,880")]
        support: String,
        #[arg(long, default_value_t = 2_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the pixel-domain residue histogram here
        #[arg(long)]
        hist_out: Option<PathBuf>,
        /// Quantizer step for the histogram
        #[arg(long, default_value_t = 40.0)]
        hist_q: f64,
        /// Number of 4x4 residue blocks for the histogram
        #[arg(long, default_value_t = 16_384)]
        hist_blocks: usize,
    },
}

pub fn run(cmd: &OracleCmd) -> CResult<()> {
    match cmd {
        OracleCmd::Table1 { out } => table1(out.as_deref()),
        OracleCmd::Table3 { trials, seed, a_step, out } => {
            table3(*trials, *seed, *a_step, out.as_deref())
        }
        OracleCmd::AppendixB { sigma, k, samples, seed, out } => {
            appendix_b(*sigma, *k, *samples, *seed, out.as_deref())
        }
        OracleCmd::AppendixC {
            breakpoints,
            k1,
            support,
            trials,
            seed,
            out,
            hist_out,
            hist_q,
            hist_blocks,
        } => appendix_c(
            breakpoints,
            *k1,
            support,
            *trials,
            *seed,
            out.as_deref(),
            hist_out.as_deref(),
            *hist_q,
            *hist_blocks,
        ),
    }
}

fn table1(out: Option<&std::path::Path>) -> CResult<()> {
    let mut t = Table::create(out, TABLE1_SCHEMA, &["eta", "k", "dpsnr_db"])?;
    for row in theoretical_gain_table() {
        t.row([row.eta.to_string(), row.k.to_string(), format!("{:.2}", row.dpsnr_db)])?;
    }
    t.finish()
}

fn table3(trials: u64, seed: u64, a_step: u32, out: Option<&std::path::Path>) -> CResult<()> {
    if a_step == 0 || a_step > 180 {
        return Err(CliError::Config(format!("a_step {a_step} outside 1..=180")));
    }
    let mut t = Table::create(
        out,
        TABLE3_SCHEMA,
        &["qp", "q", "a_lo", "a_hi", "a_step", "trials", "rel_err_min_pct", "rel_err_max_pct"],
    )?;
    for (row_idx, &(qp, q)) in QP_LADDER.iter().enumerate() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut i = 0u64;
        let mut a_num = 100u32;
        while a_num <= 280 {
            let a = f64::from(a_num) / M;
            let b = 1.0 - a;
            let pmf = InputPmf::uniform_ints(a_num, 1023 - a_num)
                .map_err(|e| CliError::Analysis(e.to_string()))?;
            let stats = montecarlo_recon_error(
                a,
                b,
                M,
                q,
                &pmf,
                trials,
                seed + row_idx as u64 * 16 + i,
            )
            .map_err(|e| CliError::Analysis(e.to_string()))?;
            lo = lo.min(stats.relative_error * 100.0);
            hi = hi.max(stats.relative_error * 100.0);
            i += 1;
            a_num += a_step;
        }
        t.row([
            qp.to_string(),
            q.to_string(),
            "100".into(),
            "280".into(),
            a_step.to_string(),
            trials.to_string(),
            format!("{lo:.4}"),
            format!("{hi:.4}"),
        ])?;
    }
    t.finish()
}

fn appendix_b(
    sigma: f64,
    k: f64,
    samples: usize,
    seed: u64,
    out: Option<&std::path::Path>,
) -> CResult<()> {
    if !(sigma > 0.0) {
        return Err(CliError::Config(format!("sigma {sigma} must be positive")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal =
        Normal::new(0.0, sigma).map_err(|e| CliError::Config(format!("sigma {sigma}: {e}")))?;
    let draws: Vec<f64> = (0..samples).map(|_| normal.sample(&mut rng)).collect();
    let shift = differential_entropy_shift(&draws, k)
        .map_err(|e| CliError::Analysis(e.to_string()))?;
    let target = k.log2();
    let mut t = Table::create(
        out,
        APPENDIX_B_SCHEMA,
        &["sigma", "k", "samples", "h0_hat_bits", "h1_hat_bits", "shift_bits", "target_bits", "abs_err_bits"],
    )?;
    t.row([
        sigma.to_string(),
        k.to_string(),
        samples.to_string(),
        shift.h0_hat.to_string(),
        shift.h1_hat.to_string(),
        shift.shift.to_string(),
        target.to_string(),
        (shift.shift - target).abs().to_string(),
    ])?;
    t.finish()
}

fn parse_triple(s: &str) -> CResult<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("expected a1,a2,a3 — got {s:?}")));
    }
    let mut vals = [0f64; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("breakpoint {p:?}: {e}")))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

#[allow(clippy::too_many_arguments)]
fn appendix_c(
    breakpoints: &str,
    k1: f64,
    support: &str,
    trials: u64,
    seed: u64,
    out: Option<&std::path::Path>,
    hist_out: Option<&std::path::Path>,
    hist_q: f64,
    hist_blocks: usize,
) -> CResult<()> {
    let (a1, a2, a3) = parse_triple(breakpoints)?;
    let (lo, hi) = {
        let parts: Vec<&str> = support.split(',').collect();
        if parts.len() != 2 {
            return Err(CliError::Config(format!("expected lo,hi — got {support:?}")));
        }
        let lo: u32 = parts[0]
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("support {support:?}: {e}")))?;
        let hi: u32 = parts[1]
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("support {support:?}: {e}")))?;
        (lo, hi)
    };
    let shaper = TwoPieceReshaper::new(a1, a2, a3, k1, M)
        .map_err(|e| CliError::Config(format!("two-piece parameters: {e}")))?;
    let pmf =
        InputPmf::uniform_ints(lo, hi).map_err(|e| CliError::Config(e.to_string()))?;

    // Segment occupancies of the input under the map's breakpoints drive
    // the entropy-shift formula.
    let (w1, w2) = {
        let (mut m1, mut m2) = (0.0, 0.0);
        for (x, p) in pmf.support_probs() {
            if x < a2 * M {
                m1 += p;
            } else {
                m2 += p;
            }
        }
        let total = m1 + m2;
        (m1 / total, m2 / total)
    };
    let gain_two = entropy_gain_two_piece(w1, w2, shaper.k1(), shaper.k2())
        .map_err(|e| CliError::Analysis(e.to_string()))?;
    let gain_one_k1 =
        entropy_gain_one_piece(shaper.k1()).map_err(|e| CliError::Analysis(e.to_string()))?;

    let mut t = Table::create(
        out,
        APPENDIX_C_SCHEMA,
        &[
            "qp",
            "q",
            "k1",
            "k2",
            "w1",
            "w2",
            "mse",
            "crosstalk_low_to_high",
            "crosstalk_high_to_low",
            "entropy_gain_bits",
            "one_piece_k1_bits",
            "trials",
        ],
    )?;
    for (row_idx, &(qp, q)) in QP_LADDER.iter().enumerate() {
        let stats = montecarlo_two_piece(&shaper, q, &pmf, trials, seed + row_idx as u64)
            .map_err(|e| CliError::Analysis(e.to_string()))?;
        t.row([
            qp.to_string(),
            q.to_string(),
            shaper.k1().to_string(),
            shaper.k2().to_string(),
            w1.to_string(),
            w2.to_string(),
            stats.mse.to_string(),
            stats.crosstalk_low_to_high.to_string(),
            stats.crosstalk_high_to_low.to_string(),
            gain_two.to_string(),
            gain_one_k1.to_string(),
            trials.to_string(),
        ])?;
    }
    t.finish()?;

    if let Some(hist_path) = hist_out {
        residue_histogram(hist_path, hist_q, hist_blocks, seed)?;
    }
    Ok(())
}

/// Pixel-domain reconstruction-noise histogram: inverse-transform blocks of
/// independent uniform coefficient residues and histogram the outputs
/// against the Gaussian the central limit argument predicts.
fn residue_histogram(
    path: &std::path::Path,
    q: f64,
    blocks: usize,
    seed: u64,
) -> CResult<()> {
    if !(q > 0.0) {
        return Err(CliError::Config(format!("hist_q {q} must be positive")));
    }
    if blocks == 0 {
        return Err(CliError::Config("hist_blocks must be positive".into()));
    }
    let sigma = q * SIGMA_U;
    let span = 4.5 * sigma;
    const BINS: usize = 81;
    let width = 2.0 * span / BINS as f64;
    let mut counts = [0u64; BINS];
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = blocks * 16;
    for _ in 0..blocks {
        let mut coeffs = [[0f64; 4]; 4];
        for row in &mut coeffs {
            for v in row.iter_mut() {
                *v = (rng.random::<f64>() - 0.5) * q;
            }
        }
        let pix = dct4_inverse(&coeffs);
        for row in &pix {
            for &v in row {
                let idx = ((v + span) / width).floor();
                if (0.0..BINS as f64).contains(&idx) {
                    counts[idx as usize] += 1;
                }
            }
        }
    }
    let mut t = Table::create(
        Some(path),
        RESIDUE_HIST_SCHEMA,
        &["bin_lo", "bin_hi", "count", "density", "gaussian_density"],
    )?;
    for (i, &c) in counts.iter().enumerate() {
        let lo = -span + i as f64 * width;
        let center = lo + width / 2.0;
        let density = c as f64 / (n as f64 * width);
        let gauss = (-center * center / (2.0 * sigma * sigma)).exp()
            / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        t.row([
            lo.to_string(),
            (lo + width).to_string(),
            c.to_string(),
            density.to_string(),
            gauss.to_string(),
        ])?;
    }
    t.finish()
}
