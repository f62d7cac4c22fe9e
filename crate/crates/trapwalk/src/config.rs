//! Strict `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! errors. Lists are comma separated.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};
use trapwalk_core::bounds::xi_tilde;
use trapwalk_core::geometry::GeometryKind;
use trapwalk_core::lab::{AlphaConfig, SweepConfig};
use trapwalk_core::{Guide, ModelParams, SmcConfig, DEFAULT_XI_GRID};

use crate::error::{CliError, CliResult};

/// Every accepted key with its default (`None` = required).
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("d", None),
    ("alpha", None),
    ("gamma", None),
    ("seed", None),
    ("lambda", Some("0.5")),
    ("dt", Some("0.001")),
    ("particles", Some("10000")),
    ("xi", Some("auto")),
    ("xi_grid", Some("0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95")),
    ("L", Some("32")),
    ("l_grid", Some("8,16,32,64")),
    ("replicas", Some("16")),
    ("r_grid", Some("4,8,12,16")),
    ("geometry", Some("hyperplane")),
    ("potential", Some("modified")),
    ("traps", Some("true")),
    ("band", Some("0")),
    ("ess_fraction", Some("0.5")),
    ("alive_tolerance", Some("1e-10")),
    ("max_time", Some("auto")),
    ("guide", Some("auto")),
    ("cube_side", Some("none")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialMode {
    Raw,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BandChoice {
    One(u32),
    All,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Config {
    pub params: ModelParams,
    pub master_seed: u64,
    pub smc: SmcConfig,
    pub xi: f64,
    pub scale: f64,
    pub l_grid: Vec<f64>,
    pub replicas: usize,
    pub r_grid: Vec<f64>,
    pub geometry: GeometryKind,
    pub potential: PotentialMode,
    pub traps: bool,
    pub band: BandChoice,
    /// SHA-256 of the configuration text.
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn nearest_key(key: &str) -> &'static str {
    KEYS.iter()
        .map(|(k, _)| *k)
        .min_by_key(|k| strsim::levenshtein(key, k))
        .unwrap_or("d")
}

struct Raw {
    values: BTreeMap<&'static str, String>,
    lines: BTreeMap<&'static str, usize>,
}

impl Raw {
    fn get(&self, key: &'static str) -> &str {
        &self.values[key]
    }

    fn err(&self, key: &'static str, msg: impl std::fmt::Display) -> CliError {
        match self.lines.get(key) {
            Some(l) => CliError::validation(format!("line {l}: {key}: {msg}")),
            None => CliError::validation(format!("{key}: {msg}")),
        }
    }

    fn num<T: std::str::FromStr>(&self, key: &'static str) -> CliResult<T> {
        let v = self.get(key);
        v.parse().map_err(|_| self.err(key, format!("cannot parse '{v}'")))
    }

    fn list(&self, key: &'static str) -> CliResult<Vec<f64>> {
        let v = self.get(key);
        let xs: Vec<f64> = v
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| self.err(key, format!("cannot parse '{v}' as a list of numbers")))?;
        if xs.is_empty() {
            return Err(self.err(key, "empty list"));
        }
        Ok(xs)
    }

    fn auto_or<T: std::str::FromStr>(&self, key: &'static str, word: &str) -> CliResult<Option<T>> {
        if self.get(key) == word {
            Ok(None)
        } else {
            self.num(key).map(Some)
        }
    }
}

pub fn parse_config(text: &str) -> CliResult<Config> {
    let mut values = BTreeMap::new();
    let mut lines = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("line {}: expected 'key = value'", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        let Some(&(key, _)) = KEYS.iter().find(|(name, _)| *name == k) else {
            return Err(CliError::validation(format!(
                "line {}: unknown key '{k}' (did you mean '{}'?)",
                no + 1,
                nearest_key(k)
            )));
        };
        if values.insert(key, v.to_string()).is_some() {
            return Err(CliError::validation(format!("line {}: key '{key}' given twice", no + 1)));
        }
        lines.insert(key, no + 1);
    }
    for (key, default) in KEYS {
        match default {
            Some(d) => {
                values.entry(key).or_insert_with(|| d.to_string());
            }
            None if !values.contains_key(key) => {
                return Err(CliError::validation(format!("missing required key '{key}'")));
            }
            None => {}
        }
    }
    let raw = Raw { values, lines };

    let params = ModelParams::new(raw.num("d")?, raw.num("alpha")?, raw.num("gamma")?, raw.num("lambda")?)?;
    let xi = match raw.auto_or::<f64>("xi", "auto")? {
        Some(x) => x,
        None => xi_tilde(&params),
    };
    if !(xi > 0.5 && xi < 1.0) {
        return Err(raw.err("xi", format!("must lie in (1/2, 1), got {xi}")));
    }
    let guide = match raw.get("guide") {
        "auto" => Guide::Auto,
        "off" => Guide::Off,
        _ => Guide::Rate(raw.num("guide")?),
    };
    let smc = SmcConfig {
        dt: raw.num("dt")?,
        n_particles: raw.num("particles")?,
        seed: 0,
        xi_grid: raw.list("xi_grid")?,
        ess_fraction: raw.num("ess_fraction")?,
        alive_tolerance: raw.num("alive_tolerance")?,
        max_time: raw.auto_or("max_time", "auto")?,
        guide,
        cube_side: raw.auto_or("cube_side", "none")?,
    };
    smc.validate()?;
    let geometry = match raw.get("geometry") {
        "hyperplane" => GeometryKind::Hyperplane,
        "ball" => GeometryKind::Ball,
        other => return Err(raw.err("geometry", format!("expected hyperplane or ball, got '{other}'"))),
    };
    let potential = match raw.get("potential") {
        "raw" => PotentialMode::Raw,
        "modified" => PotentialMode::Modified,
        other => return Err(raw.err("potential", format!("expected raw or modified, got '{other}'"))),
    };
    let traps = match raw.get("traps") {
        "true" => true,
        "false" => false,
        other => return Err(raw.err("traps", format!("expected true or false, got '{other}'"))),
    };
    let band = match raw.get("band") {
        "all" => BandChoice::All,
        _ => BandChoice::One(raw.num("band")?),
    };
    let cfg = Config {
        params,
        master_seed: raw.num("seed")?,
        smc,
        xi,
        scale: raw.num("L")?,
        l_grid: raw.list("l_grid")?,
        replicas: raw.num("replicas")?,
        r_grid: raw.list("r_grid")?,
        geometry,
        potential,
        traps,
        band,
        hash: sha256_hex(text.as_bytes()),
    };
    if !(cfg.scale > 1.0) || !cfg.scale.is_finite() {
        return Err(raw.err("L", format!("must exceed 1, got {}", cfg.scale)));
    }
    cfg.sweep().validate()?;
    cfg.alpha().validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> CliResult<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

impl Config {
    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            params: self.params,
            l_grid: self.l_grid.clone(),
            replicas: self.replicas,
            xi: self.xi,
            smc: self.smc.clone(),
            master_seed: self.master_seed,
            traps: self.traps,
            geometry: self.geometry,
        }
    }

    pub fn alpha(&self) -> AlphaConfig {
        AlphaConfig {
            params: self.params,
            r_grid: self.r_grid.clone(),
            replicas: self.replicas,
            xi: self.xi,
            smc: self.smc.clone(),
            master_seed: self.master_seed,
            traps: self.traps,
        }
    }
}

/// Default `xi_grid` as written in configuration files.
pub fn default_xi_grid() -> Vec<f64> {
    DEFAULT_XI_GRID.to_vec()
}
