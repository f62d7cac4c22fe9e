//! Line-oriented text format for trap fields.
//!
//! ```text
//! TRAPFIELD version=1 d=2 alpha=2.2 gamma=0.2 lambda=0.5 r_max=64 seed=7 lo=-10,-10 hi=10,10 count=2
//! 0.5 -1.25 1.7
//! 3 4 2.5
//! ```
//!
//! Each trap line holds the centre coordinates then the radius. Floats are
//! written in shortest round-trip form, so reading a written field gives back
//! the same potential bit for bit.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use trapwalk_core::{ModelParams, Trap, TrapField, Window, FORMAT_VERSION};

use crate::error::{CliError, CliResult};

const MAGIC: &str = "TRAPFIELD";

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

pub fn write_field<W: Write>(field: &TrapField, mut w: W) -> CliResult<()> {
    let p = field.params();
    writeln!(
        w,
        "{MAGIC} version={FORMAT_VERSION} d={} alpha={:?} gamma={:?} lambda={:?} r_max={:?} seed={} lo={} hi={} count={}",
        p.d,
        p.alpha,
        p.gamma,
        p.lambda,
        field.r_max(),
        field.seed(),
        join(field.window().lo()),
        join(field.window().hi()),
        field.len()
    )?;
    let mut line = String::new();
    for t in field.traps() {
        line.clear();
        for c in &t.center {
            line.push_str(&format!("{c:?} "));
        }
        line.push_str(&format!("{:?}", t.radius));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_field(field: &TrapField, path: &Path) -> CliResult<()> {
    let f = std::fs::File::create(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(f);
    write_field(field, &mut w)?;
    w.flush()?;
    Ok(())
}

fn bad(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("field file line {line}: {msg}"))
}

fn parse_f64(line: usize, key: &str, v: &str) -> CliResult<f64> {
    v.parse().map_err(|_| bad(line, format!("{key}: cannot parse '{v}' as a number")))
}

fn parse_list(line: usize, key: &str, v: &str) -> CliResult<Vec<f64>> {
    v.split(',').map(|s| parse_f64(line, key, s)).collect()
}

pub fn read_field<R: BufRead>(r: R) -> CliResult<TrapField> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file"))??;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(bad(1, format!("expected '{MAGIC}' header")));
    }
    let mut kv = BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| bad(1, format!("malformed header field '{p}'")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(1, format!("missing header field '{k}'")));
    let version: u32 = get("version")?.parse().map_err(|_| bad(1, "bad version"))?;
    if version != FORMAT_VERSION {
        return Err(bad(1, format!("format version {version} is not supported (expected {FORMAT_VERSION})")));
    }
    let d: usize = get("d")?.parse().map_err(|_| bad(1, "bad d"))?;
    let params = ModelParams::new(
        d,
        parse_f64(1, "alpha", get("alpha")?)?,
        parse_f64(1, "gamma", get("gamma")?)?,
        parse_f64(1, "lambda", get("lambda")?)?,
    )?;
    let r_max = parse_f64(1, "r_max", get("r_max")?)?;
    let seed: u64 = get("seed")?.parse().map_err(|_| bad(1, "bad seed"))?;
    let window = Window::new(parse_list(1, "lo", get("lo")?)?, parse_list(1, "hi", get("hi")?)?)?;
    let count: usize = get("count")?.parse().map_err(|_| bad(1, "bad count"))?;

    let mut traps = Vec::with_capacity(count);
    for (k, line) in lines.enumerate() {
        let line = line?;
        let no = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| parse_f64(no, "trap", s))
            .collect::<CliResult<_>>()?;
        if vals.len() != d + 1 {
            return Err(bad(no, format!("expected {} numbers, found {}", d + 1, vals.len())));
        }
        traps.push(Trap::new(vals[..d].to_vec(), vals[d]));
    }
    if traps.len() != count {
        return Err(bad(1, format!("header announces {count} traps, file holds {}", traps.len())));
    }
    Ok(TrapField::from_traps(params, window, r_max, seed, traps)?)
}

pub fn load_field(path: &Path) -> CliResult<TrapField> {
    let f = std::fs::File::open(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    read_field(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use trapwalk_core::field::sample_field;
    use trapwalk_core::PotentialSpec;

    #[test]
    fn round_trip_is_exact() {
        let p = ModelParams::new(2, 2.2, 0.2, 0.5).unwrap();
        let f = sample_field(p, Window::centered(2, 6.3).unwrap(), 64.0, 11).unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let g = read_field(&buf[..]).unwrap();
        assert_eq!(g.len(), f.len());
        assert_eq!(g.seed(), 11);
        for x in [[0.0, 0.0], [1.3, -2.9], [-6.3, 6.3]] {
            let a = f.potential(&PotentialSpec::Raw, &x).unwrap();
            let b = g.potential(&PotentialSpec::Raw, &x).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let mut again = Vec::new();
        write_field(&g, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let ok = "TRAPFIELD version=1 d=1 alpha=1.5 gamma=0.2 lambda=0.5 r_max=4 seed=0 lo=-1 hi=1 count=1\n0 1.5\n";
        assert!(read_field(ok.as_bytes()).is_ok());
        for bad in [
            "",
            "FIELD version=1\n",
            "TRAPFIELD version=2 d=1 alpha=1.5 gamma=0.2 lambda=0.5 r_max=4 seed=0 lo=-1 hi=1 count=0\n",
            "TRAPFIELD version=1 d=1 alpha=1.5 gamma=0.2 lambda=0.5 r_max=4 seed=0 lo=-1 hi=1 count=2\n0 1.5\n",
            "TRAPFIELD version=1 d=1 alpha=1.5 gamma=0.2 lambda=0.5 r_max=4 seed=0 lo=-1 hi=1 count=1\n0 1 1.5\n",
            "TRAPFIELD version=1 d=1 alpha=0.5 gamma=0.2 lambda=0.5 r_max=4 seed=0 lo=-1 hi=1 count=0\n",
            "TRAPFIELD version=1 d=1 alpha=1.5 gamma=0.2 lambda=0.5 r_max=4 seed=0 lo=-1 hi=1 count=1\n0 0.5\n",
        ] {
            assert!(matches!(read_field(bad.as_bytes()), Err(CliError::Validation(_))), "{bad:?}");
        }
    }
}
