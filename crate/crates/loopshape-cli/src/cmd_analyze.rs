//! Gain analysis over the CSV outputs of an encode run: per-frame measured
//! and predicted gain series plus a per-subsequence summary (slope, rate,
//! mean gains, cosine agreement).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use loopshape::analysis::gain_report;
use loopshape::codec::{FrameResult, FrameType};

use crate::tables::{opt, read_table, Table, FRAMES_SCHEMA, GAINS_SCHEMA, GAIN_SUMMARY_SCHEMA};
use crate::{CliError, CResult};

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    /// Directory holding the encode outputs (frames_g*.csv)
    #[arg(long)]
    pub run_dir: PathBuf,
    /// Granularities to analyze; defaults to every frames_g*.csv present
    #[arg(long)]
    pub granularity: Option<String>,
    /// QP whose base-mode rate anchors the evaluation bitrate; defaults to
    /// the middle of the QPs present
    #[arg(long)]
    pub eval_qp: Option<u32>,
}

struct ParsedRow {
    mode: usize,
    subseq: usize,
    frame: usize,
    result: FrameResult,
}

pub fn run(args: &AnalyzeArgs) -> CResult<()> {
    let granularities = match &args.granularity {
        Some(list) => list
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|e| CliError::Config(format!("granularity {p:?}: {e}")))
            })
            .collect::<CResult<Vec<u32>>>()?,
        None => discover_granularities(&args.run_dir)?,
    };
    if granularities.is_empty() {
        return Err(CliError::Io(format!(
            "{}: no frames_g*.csv files found",
            args.run_dir.display()
        )));
    }
    for &g in &granularities {
        analyze_granularity(&args.run_dir, g, args.eval_qp)?;
    }
    Ok(())
}

fn discover_granularities(dir: &Path) -> CResult<Vec<u32>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let name = entry
            .map_err(|e| CliError::Io(format!("reading {}: {e}", dir.display())))?
            .file_name();
        let name = name.to_string_lossy();
        if let Some(g) = name.strip_prefix("frames_g").and_then(|s| s.strip_suffix(".csv")) {
            if let Ok(g) = g.parse() {
                out.push(g);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn analyze_granularity(dir: &Path, g: u32, eval_qp: Option<u32>) -> CResult<()> {
    let path = dir.join(format!("frames_g{g}.csv"));
    let (header, records) = read_table(&path, FRAMES_SCHEMA)?;
    let col = |name: &str| -> CResult<usize> {
        header.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Io(format!("{}: missing column {name}", path.display()))
        })
    };
    let c_mode = col("mode")?;
    let c_qp = col("qp")?;
    let c_q = col("q")?;
    let c_subseq = col("subseq")?;
    let c_frame = col("frame")?;
    let c_type = col("frame_type")?;
    let c_entropy = col("entropy_bits")?;
    let c_rate = col("rate_bits")?;
    let c_bits = col("coded_bits")?;
    let c_symbols = col("symbols")?;
    let c_mse = col("mse")?;
    let c_psnr = col("psnr_db")?;
    let c_k = col("k_used")?;
    let c_geff = col("granularity_used")?;

    let bad = |row: usize, what: &str| {
        CliError::Io(format!("{} row {}: {what}", path.display(), row + 2))
    };
    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let num = |c: usize| -> CResult<f64> {
            rec[c].parse().map_err(|_| bad(i, "unparsable number"))
        };
        let int = |c: usize| -> CResult<usize> {
            rec[c].parse().map_err(|_| bad(i, "unparsable integer"))
        };
        let mode = match rec[c_mode].as_str() {
            "base" => 0,
            "reshaped" => 1,
            other => return Err(bad(i, &format!("unknown mode {other:?}"))),
        };
        let frame_type = match rec[c_type].as_str() {
            "I" => FrameType::I,
            "P" => FrameType::P,
            other => return Err(bad(i, &format!("unknown frame type {other:?}"))),
        };
        rows.push(ParsedRow {
            mode,
            subseq: int(c_subseq)?,
            frame: int(c_frame)?,
            result: FrameResult {
                frame_type,
                qp: rec[c_qp].parse().map_err(|_| bad(i, "unparsable qp"))?,
                q: num(c_q)?,
                entropy: num(c_entropy)?,
                rate: num(c_rate)?,
                coded_bits: rec[c_bits].parse().map_err(|_| bad(i, "unparsable bits"))?,
                symbols: int(c_symbols)?,
                mse: num(c_mse)?,
                psnr: num(c_psnr)?,
                k_used: num(c_k)?,
                granularity_used: rec[c_geff].parse().map_err(|_| bad(i, "unparsable granularity"))?,
                payload: None,
            },
        });
    }

    let mut qps: Vec<u32> = rows.iter().map(|r| r.result.qp).collect();
    qps.sort_unstable();
    qps.dedup();
    let mid_idx = match eval_qp {
        Some(qp) => qps.iter().position(|&v| v == qp).ok_or_else(|| {
            CliError::Config(format!("eval qp {qp} absent from the run (has {qps:?})"))
        })?,
        None => qps.len() / 2,
    };

    let mut subseqs: Vec<usize> = rows.iter().map(|r| r.subseq).collect();
    subseqs.sort_unstable();
    subseqs.dedup();

    let mut gains = Table::create(
        Some(&dir.join(format!("gains_g{g}.csv"))),
        GAINS_SCHEMA,
        &["granularity", "subseq", "frame", "measured_db", "predicted_db", "eta_hat", "eta_clamped"],
    )?;
    let mut summary = Table::create(
        Some(&dir.join(format!("gain_summary_g{g}.csv"))),
        GAIN_SUMMARY_SCHEMA,
        &[
            "granularity",
            "subseq",
            "k_hat",
            "eval_rate_bits",
            "frames_used",
            "skipped_out_of_hull",
            "mean_measured_db",
            "mean_predicted_db",
            "cosine",
        ],
    )?;

    for &ss in &subseqs {
        // ladder[mode][qp_idx][frame]
        let mut ladder: [Vec<Vec<FrameResult>>; 2] = [Vec::new(), Vec::new()];
        for arm in &mut ladder {
            arm.resize(qps.len(), Vec::new());
        }
        let mut per_cell: BTreeMap<(usize, usize, usize), FrameResult> = BTreeMap::new();
        for row in rows.iter().filter(|r| r.subseq == ss) {
            let qp_idx = qps.iter().position(|&v| v == row.result.qp).expect("qp collected");
            per_cell.insert((row.mode, qp_idx, row.frame), row.result.clone());
        }
        for ((mode, qp_idx, _frame), result) in per_cell {
            ladder[mode][qp_idx].push(result);
        }
        for (mode, arm) in ladder.iter().enumerate() {
            for (qp_idx, frames) in arm.iter().enumerate() {
                if frames.is_empty() {
                    return Err(CliError::Analysis(format!(
                        "subsequence {ss}: no {} rows at qp {} (both modes are required)",
                        crate::cmd_encode::MODE_NAMES[mode],
                        qps[qp_idx]
                    )));
                }
            }
        }
        let [base, reshaped] = ladder;
        let k_hat = reshaped
            .iter()
            .flat_map(|fs| fs.iter().map(|f| f.k_used))
            .fold(1.0f64, f64::max);
        let report = gain_report(&base, &reshaped, k_hat, mid_idx)
            .map_err(|e| CliError::Analysis(format!("subsequence {ss}: {e}")))?;
        for fg in &report.frames {
            gains.row([
                g.to_string(),
                ss.to_string(),
                fg.frame.to_string(),
                opt(fg.measured),
                opt(fg.predicted),
                opt(fg.eta_hat),
                (fg.eta_clamped as u8).to_string(),
            ])?;
        }
        let used = report.frames.iter().filter(|f| f.measured.is_some()).count();
        summary.row([
            g.to_string(),
            ss.to_string(),
            report.k_hat.to_string(),
            report.eval_rate.to_string(),
            used.to_string(),
            report.skipped_out_of_hull.to_string(),
            opt(report.mean_measured),
            opt(report.mean_predicted),
            opt(report.cosine),
        ])?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:+.4}")).unwrap_or_else(|| "n/a".into());
        println!(
            "g={g} subseq={ss}: k_hat {:.4}, eval rate {:.4} b/sym, mean measured {} dB, \
             mean predicted {} dB, cosine {}",
            report.k_hat,
            report.eval_rate,
            fmt(report.mean_measured),
            fmt(report.mean_predicted),
            fmt(report.cosine),
        );
    }
    gains.finish()?;
    summary.finish()
}
