//! JSON-lines and CSV writers. Every file starts with a stamp carrying the
//! format version, the build's git description and the master seed; nothing
//! time-dependent is written, so reruns are byte-identical.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;
use trapwalk_core::lab::SweepRecord;
use trapwalk_core::FORMAT_VERSION;

use crate::error::{CliError, CliResult};
use crate::GIT_DESCRIBE;

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Stamp {
    pub format_version: u32,
    pub git_describe: String,
    pub master_seed: Option<u64>,
    pub kind: String,
}

impl Stamp {
    pub fn new(kind: &str, master_seed: Option<u64>) -> Self {
        Stamp {
            format_version: FORMAT_VERSION,
            git_describe: GIT_DESCRIBE.to_string(),
            master_seed,
            kind: kind.to_string(),
        }
    }

    pub fn comment(&self) -> String {
        let seed = self.master_seed.map_or("none".to_string(), |s| s.to_string());
        format!(
            "# format_version={} git_describe={} master_seed={} kind={}",
            self.format_version, self.git_describe, seed, self.kind
        )
    }
}

fn create(path: &Path) -> CliResult<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}

/// Writes a stamp line followed by one JSON object per record.
pub fn write_jsonl<T: Serialize>(path: &Path, stamp: &Stamp, records: &[T]) -> CliResult<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", serde_json::json!({ "stamp": stamp }))?;
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a single stamped JSON document.
pub fn write_json<T: Serialize>(path: &Path, stamp: &Stamp, body: &T) -> CliResult<()> {
    let mut w = create(path)?;
    let doc = serde_json::json!({ "stamp": stamp, "result": body });
    writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
    w.flush()?;
    Ok(())
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        "NaN".into()
    }
}

pub fn sweep_csv_header(xi_grid: &[f64]) -> Vec<String> {
    let mut h = vec!["L".to_string(), "replica".into(), "logZ".into()];
    h.extend(xi_grid.iter().map(|x| format!("muA_{x}")));
    h.extend(["q50", "q90", "q99", "escape_frac"].map(String::from));
    h
}

/// Sweep summary with columns `L, replica, logZ, muA_<xi>..., q50, q90,
/// q99, escape_frac`; failed records carry `NaN`.
pub fn write_sweep_csv(path: &Path, stamp: &Stamp, xi_grid: &[f64], records: &[SweepRecord]) -> CliResult<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", stamp.comment())?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(sweep_csv_header(xi_grid))?;
    for r in records {
        let mut row = vec![num(r.scale), r.replica.to_string(), num(r.log_z)];
        for xi in xi_grid {
            let v = r.mu_a.iter().find(|m| m.xi == *xi).map_or(f64::NAN, |m| m.value);
            row.push(num(v));
        }
        for v in [r.q50, r.q90, r.q99, r.escape_fraction] {
            row.push(num(v));
        }
        c.write_record(&row)?;
    }
    c.flush()?;
    Ok(())
}

/// One row of a sweep CSV, as needed by the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scale: f64,
    pub replica: usize,
    pub log_z: f64,
    pub q90: f64,
}

/// Reads a sweep CSV; returns the master seed from the stamp and the rows.
pub fn read_sweep_csv(path: &Path) -> CliResult<(Option<u64>, Vec<CsvRow>)> {
    let f = std::fs::File::open(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let mut reader = std::io::BufReader::new(f);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let stamp = first.trim();
    if !stamp.starts_with("# format_version=") {
        return Err(CliError::validation(format!("{}: missing stamp line", path.display())));
    }
    let mut seed = None;
    for tok in stamp.trim_start_matches('#').split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            match k {
                "format_version" if v != FORMAT_VERSION.to_string() => {
                    return Err(CliError::validation(format!("unsupported format version {v}")));
                }
                "master_seed" => seed = v.parse().ok(),
                _ => {}
            }
        }
    }
    let mut c = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let headers = c.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::validation(format!("{}: missing column '{name}'", path.display())))
    };
    let (il, ir, iz, iq) = (col("L")?, col("replica")?, col("logZ")?, col("q90")?);
    let mut rows = Vec::new();
    for rec in c.records() {
        let rec = rec?;
        let f = |i: usize| -> CliResult<f64> {
            rec[i].parse().map_err(|_| CliError::validation(format!("cannot parse '{}' as a number", &rec[i])))
        };
        rows.push(CsvRow {
            scale: f(il)?,
            replica: rec[ir].parse().map_err(|_| CliError::validation("bad replica index"))?,
            log_z: f(iz)?,
            q90: f(iq)?,
        });
    }
    if rows.is_empty() {
        return Err(CliError::validation(format!("{}: no records", path.display())));
    }
    Ok((seed, rows))
}
