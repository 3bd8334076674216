//! CSV emission and ingestion. Every file starts with a schema line
//! (`# schema <id>`) so consumers can check what they are reading before
//! touching the header row.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::{CliError, CResult};

pub const FRAMES_SCHEMA: &str = "loopshape.frames.v1";
pub const SUMMARY_SCHEMA: &str = "loopshape.summary.v1";
pub const GAINS_SCHEMA: &str = "loopshape.gains.v1";
pub const GAIN_SUMMARY_SCHEMA: &str = "loopshape.gain_summary.v1";
pub const TABLE1_SCHEMA: &str = "loopshape.gain_table.v1";
pub const TABLE3_SCHEMA: &str = "loopshape.recon_error.v1";
pub const APPENDIX_B_SCHEMA: &str = "loopshape.entropy_shift.v1";
pub const APPENDIX_C_SCHEMA: &str = "loopshape.two_piece.v1";
pub const RESIDUE_HIST_SCHEMA: &str = "loopshape.residue_hist.v1";

/// A CSV sink with the schema line already written.
pub struct Table {
    writer: csv::Writer<Box<dyn Write>>,
    path: String,
}

impl Table {
    /// Opens `path` (or stdout when `None`) and stamps the schema and
    /// header rows.
    pub fn create(path: Option<&Path>, schema: &str, header: &[&str]) -> CResult<Table> {
        let (mut raw, name): (Box<dyn Write>, String) = match path {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)
                        .map_err(|e| CliError::Io(format!("creating {}: {e}", parent.display())))?;
                }
                let file = File::create(p)
                    .map_err(|e| CliError::Io(format!("creating {}: {e}", p.display())))?;
                (Box::new(BufWriter::new(file)), p.display().to_string())
            }
            None => (Box::new(std::io::stdout().lock()), "<stdout>".into()),
        };
        writeln!(raw, "# schema {schema}")
            .map_err(|e| CliError::Io(format!("writing {name}: {e}")))?;
        let mut writer = csv::Writer::from_writer(raw);
        writer
            .write_record(header)
            .map_err(|e| CliError::Io(format!("writing {name}: {e}")))?;
        Ok(Table { writer, path: name })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", self.path)))
    }

    pub fn finish(mut self) -> CResult<()> {
        self.writer
            .flush()
            .map_err(|e| CliError::Io(format!("writing {}: {e}", self.path)))
    }
}

/// Renders an optional statistic; absent values become empty cells.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Reads a schema-stamped CSV, verifying the schema id, and returns its
/// records as string vectors (header excluded).
pub fn read_table(path: &Path, schema: &str) -> CResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let (first, rest) = text
        .split_once('\n')
        .ok_or_else(|| CliError::Io(format!("{}: empty file", path.display())))?;
    let found = first.trim().strip_prefix("# schema ").ok_or_else(|| {
        CliError::Io(format!("{}: missing schema line", path.display()))
    })?;
    if found != schema {
        return Err(CliError::Io(format!(
            "{}: schema {found} where {schema} was expected",
            path.display()
        )));
    }
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_round_trip() {
        let path = std::env::temp_dir().join(format!("loopshape-tbl-{}.csv", std::process::id()));
        let mut t = Table::create(Some(&path), "loopshape.test.v1", &["a", "b"]).unwrap();
        t.row(["1", "x"]).unwrap();
        t.row(["2", ""]).unwrap();
        t.finish().unwrap();
        let (header, rows) = read_table(&path, "loopshape.test.v1").unwrap();
        assert_eq!(header, vec!["a", "b"]);
        assert_eq!(rows, vec![vec!["1", "x"], vec!["2", ""]]);
        assert!(read_table(&path, "loopshape.other.v1").is_err());
        std::fs::remove_file(&path).ok();
    }
}
