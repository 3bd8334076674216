//! Run configuration: flat key=value files with include support, mirrored
//! one-to-one by command-line flags. Precedence is defaults, then config
//! file, then flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use loopshape::codec::ReshaperSelect;
use loopshape::fixtures::Fixture;
use loopshape::signal::{load_yuv, make_synthetic, Sequence, SyntheticKind};
use loopshape::transform::{qstep_for_qp, QuantizerSpec, QP_LADDER};

use crate::{CliError, CResult};

/// Which reshaper the treatment arm of an A/B run uses; the control arm is
/// always the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReshaperKind {
    Identity,
    Estimate,
}

impl ReshaperKind {
    pub fn select(self, margin: f64) -> ReshaperSelect {
        match self {
            ReshaperKind::Identity => ReshaperSelect::Identity,
            ReshaperKind::Estimate => ReshaperSelect::Estimate { margin },
        }
    }
}

impl fmt::Display for ReshaperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReshaperKind::Identity => "identity",
            ReshaperKind::Estimate => "estimate",
        })
    }
}

/// Source of the frames to encode.
#[derive(Debug, Clone)]
pub enum InputSpec {
    /// A named validation preset; geometry and seed are part of the preset.
    Fixture(Fixture),
    /// Raw planar luma file; `width`, `height`, `bit_depth` describe it.
    File(PathBuf),
    /// Parametric generator using `width`/`height`/`frames`/`bit_depth`/`seed`.
    Synthetic(SyntheticKind),
}

impl fmt::Display for InputSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSpec::Fixture(x) => write!(f, "fixture:{}", x.name()),
            InputSpec::File(p) => write!(f, "file:{}", p.display()),
            InputSpec::Synthetic(k) => write!(f, "synthetic:{k:?}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: InputSpec,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub bit_depth: u8,
    /// QP points of the run, ascending, each on the supported ladder.
    pub qp: Vec<u32>,
    pub reshaper: ReshaperKind,
    pub reshaper_margin: f64,
    /// Coder model settings to meter; the codec loop is unaffected.
    pub granularity: Vec<u32>,
    pub search_range: i32,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: InputSpec::Fixture(Fixture::Iid),
            width: 160,
            height: 160,
            frames: 20,
            bit_depth: 10,
            qp: QP_LADDER.iter().map(|&(qp, _)| qp).collect(),
            reshaper: ReshaperKind::Estimate,
            reshaper_margin: 0.0,
            granularity: vec![10, 100, 1000],
            search_range: 8,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Applies one key=value pair (from a file or a flag).
    fn apply(&mut self, key: &str, value: &str) -> CResult<()> {
        match key {
            "input" => self.input = parse_input(value)?,
            "width" => self.width = parse_num(key, value)?,
            "height" => self.height = parse_num(key, value)?,
            "frames" => self.frames = parse_num(key, value)?,
            "bit_depth" => self.bit_depth = parse_num(key, value)?,
            "qp" => self.qp = parse_list(key, value)?,
            "reshaper" => {
                self.reshaper = match value {
                    "identity" => ReshaperKind::Identity,
                    "estimate" => ReshaperKind::Estimate,
                    other => {
                        return Err(CliError::Config(format!(
                            "reshaper must be identity or estimate, got {other}"
                        )))
                    }
                }
            }
            "reshaper_margin" => self.reshaper_margin = parse_num(key, value)?,
            "granularity" => self.granularity = parse_list(key, value)?,
            "search_range" => self.search_range = parse_num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse_num(key, value)?,
            other => return Err(CliError::Config(format!("unknown config key: {other}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> CResult<()> {
        if self.qp.is_empty() {
            return Err(CliError::Config("qp list is empty".into()));
        }
        if !self.qp.windows(2).all(|w| w[0] < w[1]) {
            return Err(CliError::Config(format!(
                "qp list must be strictly ascending, got {:?}",
                self.qp
            )));
        }
        for &qp in &self.qp {
            if qstep_for_qp(qp).is_none() {
                let known: Vec<u32> = QP_LADDER.iter().map(|&(v, _)| v).collect();
                return Err(CliError::Config(format!("qp {qp} not on the ladder {known:?}")));
            }
        }
        if self.granularity.is_empty() {
            return Err(CliError::Config("granularity list is empty".into()));
        }
        if !self.granularity.windows(2).all(|w| w[0] < w[1]) {
            return Err(CliError::Config(format!(
                "granularity list must be strictly ascending, got {:?}",
                self.granularity
            )));
        }
        if self.granularity.contains(&0) {
            return Err(CliError::Config("granularity 0 is not meaningful".into()));
        }
        if !(self.bit_depth == 8 || self.bit_depth == 10) {
            return Err(CliError::Config(format!("bit_depth {} not supported", self.bit_depth)));
        }
        if self.search_range < 0 {
            return Err(CliError::Config(format!("search_range {} negative", self.search_range)));
        }
        Ok(())
    }

    pub fn quantizers(&self) -> Vec<QuantizerSpec> {
        self.qp
            .iter()
            .map(|&qp| {
                QuantizerSpec::new(qp, qstep_for_qp(qp).expect("validated"))
                    .expect("ladder step is positive")
            })
            .collect()
    }

    /// Materializes the configured input. Fixture inputs carry their own
    /// geometry and seed; the geometry keys apply to files and synthetics.
    pub fn build_sequence(&self) -> CResult<Sequence> {
        match &self.input {
            InputSpec::Fixture(f) => Ok(f.sequence()),
            InputSpec::File(path) => load_yuv(path, self.width, self.height, self.bit_depth)
                .map_err(|e| CliError::Io(format!("loading {}: {e}", path.display()))),
            InputSpec::Synthetic(kind) => make_synthetic(
                kind,
                self.width,
                self.height,
                self.frames,
                self.bit_depth,
                self.seed,
            )
            .map_err(|e| CliError::Config(format!("synthetic input: {e}"))),
        }
    }

    /// Canonical key=value rendering, echoed into the run directory so a
    /// result folder states exactly what produced it.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("input", self.input.to_string());
        push("width", self.width.to_string());
        push("height", self.height.to_string());
        push("frames", self.frames.to_string());
        push("bit_depth", self.bit_depth.to_string());
        push("qp", join(&self.qp));
        push("reshaper", self.reshaper.to_string());
        push("reshaper_margin", self.reshaper_margin.to_string());
        push("granularity", join(&self.granularity));
        push("search_range", self.search_range.to_string());
        push("out_dir", self.out_dir.display().to_string());
        push("seed", self.seed.to_string());
        out
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> CResult<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Config(format!("key {key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> CResult<Vec<T>>
where
    T::Err: fmt::Display,
{
    value.split(',').map(|part| parse_num(key, part)).collect()
}

/// Parses the `input` key. Forms:
///   fixture:NAME
///   file:PATH
///   synthetic:iid:LO,HI
///   synthetic:innovation:LO,HI,SIGMA
///   synthetic:sparkle:LO,HI,SIGMA,FRACTION,AMP_LO,AMP_HI
///   synthetic:movblk:LO,HI,PATCH,DX,DY,BG_SIGMA[,SIGMA]
pub fn parse_input(value: &str) -> CResult<InputSpec> {
    let bad = |msg: &str| CliError::Config(format!("input {value:?}: {msg}"));
    let (scheme, rest) = value.split_once(':').ok_or_else(|| bad("missing scheme"))?;
    match scheme {
        "fixture" => Fixture::from_name(rest)
            .map(InputSpec::Fixture)
            .ok_or_else(|| bad("unknown preset name")),
        "file" => Ok(InputSpec::File(PathBuf::from(rest))),
        "synthetic" => {
            let (kind, args) = rest.split_once(':').ok_or_else(|| bad("missing parameters"))?;
            let parts: Vec<&str> = args.split(',').collect();
            let num = |i: usize| -> CResult<f64> { parse_num("input", parts[i]) };
            let int = |i: usize| -> CResult<u16> { parse_num("input", parts[i]) };
            let kind = match (kind, parts.len()) {
                ("iid", 2) => SyntheticKind::iid_noise(int(0)?, int(1)?),
                ("innovation", 3) => SyntheticKind::innovation(int(0)?, int(1)?, num(2)?),
                ("sparkle", 6) => SyntheticKind::NoiseTexture {
                    lo: int(0)?,
                    hi: int(1)?,
                    innovation_sigma: Some(num(2)?),
                    sparkle_fraction: num(3)?,
                    sparkle_amp: (num(4)?, num(5)?),
                },
                ("movblk", n @ (6 | 7)) => SyntheticKind::MovingBlock {
                    lo: int(0)?,
                    hi: int(1)?,
                    patch_size: parse_num("input", parts[2])?,
                    shift: (parse_num("input", parts[3])?, parse_num("input", parts[4])?),
                    bg_sigma: num(5)?,
                    innovation_sigma: if n == 7 { Some(num(6)?) } else { None },
                },
                _ => return Err(bad("unknown synthetic kind or wrong parameter count")),
            };
            Ok(InputSpec::Synthetic(kind))
        }
        _ => Err(bad("scheme must be fixture, file, or synthetic")),
    }
}

/// Reads a key=value config file, inlining `include PATH` lines (relative
/// to the including file) in place. Later assignments win.
pub fn load_config_file(path: &Path, cfg: &mut RunConfig) -> CResult<()> {
    let mut visited = Vec::new();
    let pairs = read_pairs(path, &mut visited)?;
    for (key, value) in pairs {
        cfg.apply(&key, &value)?;
    }
    Ok(())
}

fn read_pairs(path: &Path, visited: &mut Vec<PathBuf>) -> CResult<Vec<(String, String)>> {
    let canon = path
        .canonicalize()
        .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
    if visited.contains(&canon) {
        return Err(CliError::Config(format!(
            "config include cycle through {}",
            path.display()
        )));
    }
    visited.push(canon);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!(
                "{} line {}: expected key = value, got {raw:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key == "include" {
            // Paths resolve relative to the including file.
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            pairs.extend(read_pairs(&base.join(value), visited)?);
            continue;
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    visited.pop();
    Ok(pairs)
}

/// Flag overrides collected by clap; applied after the config file.
#[derive(Debug, Default, clap::Args)]
pub struct ConfigOverrides {
    /// Input spec: fixture:NAME | file:PATH | synthetic:KIND:ARGS
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Frame count for synthetic inputs
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub bit_depth: Option<u8>,
    /// Comma-separated QP points, ascending, on the supported ladder
    #[arg(long)]
    pub qp: Option<String>,
    /// Treatment-arm reshaper: identity | estimate
    #[arg(long)]
    pub reshaper: Option<String>,
    #[arg(long)]
    pub reshaper_margin: Option<f64>,
    /// Comma-separated coder-model granularities, ascending
    #[arg(long)]
    pub granularity: Option<String>,
    #[arg(long)]
    pub search_range: Option<i32>,
    /// Directory the run writes its CSV files into
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Seed for synthetic inputs
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> CResult<()> {
        let mut pairs: BTreeMap<&str, String> = BTreeMap::new();
        if let Some(v) = &self.input {
            pairs.insert("input", v.clone());
        }
        if let Some(v) = self.width {
            pairs.insert("width", v.to_string());
        }
        if let Some(v) = self.height {
            pairs.insert("height", v.to_string());
        }
        if let Some(v) = self.frames {
            pairs.insert("frames", v.to_string());
        }
        if let Some(v) = self.bit_depth {
            pairs.insert("bit_depth", v.to_string());
        }
        if let Some(v) = &self.qp {
            pairs.insert("qp", v.clone());
        }
        if let Some(v) = &self.reshaper {
            pairs.insert("reshaper", v.clone());
        }
        if let Some(v) = self.reshaper_margin {
            pairs.insert("reshaper_margin", v.to_string());
        }
        if let Some(v) = &self.granularity {
            pairs.insert("granularity", v.clone());
        }
        if let Some(v) = self.search_range {
            pairs.insert("search_range", v.to_string());
        }
        if let Some(v) = &self.out_dir {
            pairs.insert("out_dir", v.display().to_string());
        }
        if let Some(v) = self.seed {
            pairs.insert("seed", v.to_string());
        }
        for (key, value) in pairs {
            cfg.apply(key, &value)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_input_forms() {
        assert!(matches!(parse_input("fixture:iid"), Ok(InputSpec::Fixture(Fixture::Iid))));
        assert!(matches!(parse_input("file:clip.yuv"), Ok(InputSpec::File(_))));
        assert!(parse_input("synthetic:iid:192,831").is_ok());
        assert!(parse_input("synthetic:innovation:192,831,30").is_ok());
        assert!(parse_input("synthetic:sparkle:192,831,12,0.005,100,300").is_ok());
        assert!(parse_input("synthetic:movblk:192,831,24,2,-1,6,25").is_ok());
        assert!(parse_input("synthetic:movblk:192,831,24,2,-1,6").is_ok());
        assert!(parse_input("fixture:nope").is_err());
        assert!(parse_input("synthetic:iid:1").is_err());
        assert!(parse_input("bare").is_err());
    }

    #[test]
    fn config_file_round_trip_with_include() {
        let dir = std::env::temp_dir().join(format!("loopshape-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("base.cfg"), "qp = 18,30,51\nseed = 7\n").unwrap();
        std::fs::write(
            dir.join("run.cfg"),
            "include = base.cfg\nseed = 9 # override\ngranularity = 10,100\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        load_config_file(&dir.join("run.cfg"), &mut cfg).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        assert_eq!(cfg.qp, vec![18, 30, 51]);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.granularity, vec![10, 100]);
        cfg.validate().unwrap();
    }

    #[test]
    #[allow(clippy::field_reassign_with_default)]
    fn validation_rejects_bad_ladders() {
        let mut cfg = RunConfig::default();
        cfg.qp = vec![18, 18];
        assert!(cfg.validate().is_err());
        cfg.qp = vec![19];
        assert!(cfg.validate().is_err());
        cfg.qp = vec![18, 51];
        cfg.granularity = vec![100, 10];
        assert!(cfg.validate().is_err());
    }
}
