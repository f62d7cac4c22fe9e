//! Subcommand definitions and their drivers.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use trapwalk_core::bounds::{chi, xi_tilde};
use trapwalk_core::field::{auto_r_max, sample_field, TRUNCATION_BUDGET};
use trapwalk_core::fit::FitInput;
use trapwalk_core::geometry::GeometryKind;
use trapwalk_core::lab::{band_resample_experiment, modified_r_max, modified_vs_raw, raw_r_max, PotentialComparison};
use trapwalk_core::smc::diagnostics;
use trapwalk_core::{
    derive_seed, fit_exponent, smc_run, theoretical_bounds, Geometry, ModelParams, Observable, PotentialSpec,
    SmcConfig, SmcResult, TrapField, Window,
};

use crate::config::{load_config, sha256_hex, BandChoice, Config, PotentialMode};
use crate::error::{CliError, CliResult};
use crate::field_io::{load_field, save_field};
use crate::manifest::ManifestBuilder;
use crate::output::{read_sweep_csv, write_json, write_jsonl, write_sweep_csv, Stamp};
use crate::parallel::{init_threads, par_alpha_curve, par_sweep};

const BAND_TAG: u64 = 0xb4d0;
const COMPARE_TAG: u64 = 0xc0e5;

#[derive(Debug, Parser)]
#[command(name = "trapwalk", version, about = "Brownian polymers among heavy-tailed Poissonian soft traps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryArg {
    Hyperplane,
    Ball,
}

impl From<GeometryArg> for GeometryKind {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Hyperplane => GeometryKind::Hyperplane,
            GeometryArg::Ball => GeometryKind::Ball,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialArg {
    Raw,
    Modified,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum ObservableArg {
    #[value(name = "fluct_q90")]
    FluctQ90,
    #[value(name = "logZ_disorder_std")]
    LogZDisorderStd,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a windowed trap field and write it as a text field file.
    SampleField {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Lower window corner, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lo: Vec<f64>,
        /// Upper window corner, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        hi: Vec<f64>,
        /// Largest radius sampled, or `auto` for the truncation budget.
        #[arg(long, default_value = "auto")]
        r_max: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the particle sampler once on a stored field.
    Simulate {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_enum, default_value = "modified")]
        potential: PotentialArg,
        #[arg(long, value_enum, default_value = "hyperplane")]
        geometry: GeometryArg,
        #[arg(long = "L")]
        scale: f64,
        /// Exponent of the modified potential; defaults to the upper bound.
        #[arg(long)]
        xi: Option<f64>,
        /// Overrides the killing rate stored in the field file.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        particles: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        cube_side: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Disorder sweep over the L grid of a configuration file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Point-to-point curve alpha(r) = -E log Z(0, y_r).
    AlphaCurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Redraw one dyadic band (or all) and record |delta log Z|.
    BandResample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Tube probability under the raw and the modified potential.
    ComparePotentials {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the closed-form exponent bounds as JSON.
    Bounds {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        gamma: f64,
        /// Defaults to the upper bound on the transversal exponent.
        #[arg(long)]
        xi: Option<f64>,
    },
    /// Fit a power law to a sweep CSV.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum, default_value = "fluct_q90")]
        observable: ObservableArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return 1;
    }
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::SampleField { d, alpha, gamma, lambda, lo, hi, r_max, seed, out } => {
            sample_field_cmd(d, alpha, gamma, lambda, lo, hi, &r_max, seed, &out)
        }
        Command::Simulate { field, potential, geometry, scale, xi, lambda, dt, particles, seed, cube_side, out } => {
            let args = SimulateArgs { potential, geometry, scale, xi, lambda, dt, particles, seed, cube_side };
            simulate_cmd(&field, &args, &out)
        }
        Command::Sweep { config, out_dir } => sweep_cmd(&load_config(&config)?, &out_dir),
        Command::AlphaCurve { config, out_dir } => alpha_cmd(&load_config(&config)?, &out_dir),
        Command::BandResample { config, out_dir } => band_cmd(&load_config(&config)?, &out_dir),
        Command::ComparePotentials { config, out_dir } => compare_cmd(&load_config(&config)?, &out_dir),
        Command::Bounds { d, alpha, gamma, xi } => bounds_cmd(d, alpha, gamma, xi),
        Command::Fit { csv, observable, out } => fit_cmd(&csv, observable, out.as_deref()),
    }
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

#[allow(clippy::too_many_arguments)]
fn sample_field_cmd(
    d: usize,
    alpha: f64,
    gamma: f64,
    lambda: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    r_max: &str,
    seed: u64,
    out: &Path,
) -> CliResult<()> {
    let canonical = format!("sample-field d={d} alpha={alpha:?} gamma={gamma:?} lambda={lambda:?} lo={lo:?} hi={hi:?} r_max={r_max} seed={seed}");
    let mut m = ManifestBuilder::start("sample-field", sha256_hex(canonical.as_bytes()), Some(seed));
    let params = ModelParams::new(d, alpha, gamma, lambda)?;
    let window = Window::new(lo, hi)?;
    let r_max = match r_max {
        "auto" => auto_r_max(&params, &window, 1.0, TRUNCATION_BUDGET)?,
        v => v.parse().map_err(|_| CliError::validation(format!("r_max must be a number or 'auto', got '{v}'")))?,
    };
    let t = Instant::now();
    let field = sample_field(params, window, r_max, seed)?;
    m.timing("sample", t.elapsed().as_secs_f64());
    ensure_dir(&parent_dir(out))?;
    save_field(&field, out)?;
    m.artifact(out);
    m.finish(&parent_dir(out))?;
    eprintln!("{} traps, r_max = {r_max}, truncation budget {:.3e}", field.len(), field.truncation_budget());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulateArgs {
    potential: PotentialArg,
    geometry: GeometryArg,
    scale: f64,
    xi: Option<f64>,
    lambda: Option<f64>,
    dt: f64,
    particles: usize,
    seed: u64,
    cube_side: Option<f64>,
}

#[derive(Serialize)]
struct SimulateRecord<'a> {
    field_seed: u64,
    traps: usize,
    potential: PotentialArg,
    geometry: GeometryArg,
    #[serde(rename = "L")]
    scale: f64,
    xi: f64,
    lambda: f64,
    result: &'a SmcResult,
    diagnostics: Vec<String>,
}

fn geometry(kind: GeometryKind, d: usize, l: f64) -> CliResult<Geometry> {
    Ok(match kind {
        GeometryKind::Hyperplane => Geometry::hyperplane(d, l)?,
        GeometryKind::Ball => Geometry::ball(d, l)?,
    })
}

fn spec_for(mode: PotentialMode, params: &ModelParams, l: f64, xi: f64) -> CliResult<PotentialSpec> {
    Ok(match mode {
        PotentialMode::Raw => PotentialSpec::Raw,
        PotentialMode::Modified => PotentialSpec::modified(params, l, xi)?,
    })
}

fn simulate_cmd(field_path: &Path, a: &SimulateArgs, out: &Path) -> CliResult<()> {
    let field_bytes = std::fs::read(field_path).map_err(|e| CliError::validation(format!("{}: {e}", field_path.display())))?;
    let canonical = format!("{}\n{}", serde_json::to_string(a)?, sha256_hex(&field_bytes));
    let mut m = ManifestBuilder::start("simulate", sha256_hex(canonical.as_bytes()), Some(a.seed));
    let mut field = load_field(field_path)?;
    if let Some(l) = a.lambda {
        field = field.with_lambda(l)?;
    }
    let params = *field.params();
    let xi = a.xi.unwrap_or_else(|| xi_tilde(&params));
    let mode = match a.potential {
        PotentialArg::Raw => PotentialMode::Raw,
        PotentialArg::Modified => PotentialMode::Modified,
    };
    let spec = spec_for(mode, &params, a.scale, xi)?;
    let geom = geometry(a.geometry.into(), params.d, a.scale)?;
    let cfg = SmcConfig { dt: a.dt, n_particles: a.particles, seed: a.seed, cube_side: a.cube_side, ..SmcConfig::default() };
    let t = Instant::now();
    let result = smc_run(&field, &spec, &geom, &cfg)?;
    m.timing("smc", t.elapsed().as_secs_f64());
    let diags = diagnostics(&result);
    for d in &diags {
        eprintln!("warning: {d}");
    }
    let rec = SimulateRecord {
        field_seed: field.seed(),
        traps: field.len(),
        potential: a.potential,
        geometry: a.geometry,
        scale: a.scale,
        xi,
        lambda: params.lambda,
        result: &result,
        diagnostics: diags,
    };
    ensure_dir(&parent_dir(out))?;
    write_jsonl(out, &Stamp::new("simulate", Some(a.seed)), &[rec])?;
    m.artifact(out);
    m.finish(&parent_dir(out))?;
    Ok(())
}

fn sweep_cmd(cfg: &Config, dir: &Path) -> CliResult<()> {
    let mut m = ManifestBuilder::start("sweep", cfg.hash.clone(), Some(cfg.master_seed));
    ensure_dir(dir)?;
    let sweep = cfg.sweep();
    let t = Instant::now();
    let records = par_sweep(&sweep)?;
    m.timing("sweep", t.elapsed().as_secs_f64());
    let failed = records.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} records failed", records.len());
    }
    let stamp = Stamp::new("sweep", Some(cfg.master_seed));
    let jsonl = dir.join("sweep.jsonl");
    let csv = dir.join("sweep.csv");
    write_jsonl(&jsonl, &stamp, &records)?;
    write_sweep_csv(&csv, &stamp, &cfg.smc.xi_grid, &records)?;
    m.artifact(&jsonl);
    m.artifact(&csv);
    m.finish(dir)?;
    Ok(())
}

fn alpha_cmd(cfg: &Config, dir: &Path) -> CliResult<()> {
    let mut m = ManifestBuilder::start("alpha-curve", cfg.hash.clone(), Some(cfg.master_seed));
    ensure_dir(dir)?;
    let t = Instant::now();
    let curve = par_alpha_curve(&cfg.alpha())?;
    m.timing("alpha_curve", t.elapsed().as_secs_f64());
    let path = dir.join("alpha_curve.json");
    write_json(&path, &Stamp::new("alpha-curve", Some(cfg.master_seed)), &curve)?;
    m.artifact(&path);
    m.finish(dir)?;
    Ok(())
}

/// Field, potential and target of a single-scale experiment.
fn single_setup(cfg: &Config, tag: u64, replica: u64) -> CliResult<(TrapField, PotentialSpec, Geometry)> {
    let geom = geometry(cfg.geometry, cfg.params.d, cfg.scale)?;
    let window = geom.required_window(cfg.smc.xi_max().max(cfg.xi));
    let spec = spec_for(cfg.potential, &cfg.params, cfg.scale, cfg.xi)?;
    let r_max = match cfg.potential {
        PotentialMode::Raw => raw_r_max(&cfg.params, &window, cfg.scale, cfg.xi)?,
        PotentialMode::Modified => modified_r_max(&spec),
    };
    let seed = derive_seed(cfg.master_seed, &[tag, replica, 0]);
    let field = if cfg.traps {
        sample_field(cfg.params, window, r_max, seed)?
    } else {
        TrapField::empty(cfg.params, window)?
    };
    Ok((field, spec, geom))
}

#[derive(Serialize)]
struct BandReport {
    #[serde(rename = "L")]
    scale: f64,
    xi: f64,
    chi: f64,
    /// `L^chi`, the scale the increments are compared against.
    reference_scale: f64,
    experiment: trapwalk_core::lab::BandResample,
}

fn band_cmd(cfg: &Config, dir: &Path) -> CliResult<()> {
    let mut m = ManifestBuilder::start("band-resample", cfg.hash.clone(), Some(cfg.master_seed));
    ensure_dir(dir)?;
    let (field, spec, geom) = single_setup(cfg, BAND_TAG, 0)?;
    let smc = SmcConfig { seed: derive_seed(cfg.master_seed, &[BAND_TAG, 0, 1]), ..cfg.smc.clone() };
    let band = match cfg.band {
        BandChoice::One(n) => Some(n),
        BandChoice::All => None,
    };
    let t = Instant::now();
    let exp = band_resample_experiment(&field, &spec, &geom, band, cfg.replicas, &smc, cfg.master_seed)?;
    m.timing("band_resample", t.elapsed().as_secs_f64());
    let c = chi(&cfg.params, cfg.xi);
    let report = BandReport { scale: cfg.scale, xi: cfg.xi, chi: c, reference_scale: cfg.scale.powf(c), experiment: exp };
    let path = dir.join("band_resample.json");
    write_json(&path, &Stamp::new("band-resample", Some(cfg.master_seed)), &report)?;
    m.artifact(&path);
    m.finish(dir)?;
    Ok(())
}

#[derive(Serialize)]
struct CompareRecord {
    replica: usize,
    field_seed: u64,
    #[serde(flatten)]
    comparison: Option<PotentialComparison>,
    error: Option<String>,
}

fn compare_cmd(cfg: &Config, dir: &Path) -> CliResult<()> {
    let mut m = ManifestBuilder::start("compare-potentials", cfg.hash.clone(), Some(cfg.master_seed));
    ensure_dir(dir)?;
    let raw_cfg = Config { potential: PotentialMode::Raw, ..cfg.clone() };
    let t = Instant::now();
    let records: Vec<CompareRecord> = (0..cfg.replicas)
        .into_par_iter()
        .map(|k| {
            let run = single_setup(&raw_cfg, COMPARE_TAG, k as u64).and_then(|(field, _, geom)| {
                let smc = SmcConfig { seed: derive_seed(cfg.master_seed, &[COMPARE_TAG, k as u64, 1]), ..cfg.smc.clone() };
                Ok((field.seed(), modified_vs_raw(&field, &geom, cfg.xi, &smc)?))
            });
            match run {
                Ok((seed, c)) => CompareRecord { replica: k, field_seed: seed, comparison: Some(c), error: None },
                Err(e) => CompareRecord {
                    replica: k,
                    field_seed: derive_seed(cfg.master_seed, &[COMPARE_TAG, k as u64, 0]),
                    comparison: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    m.timing("compare", t.elapsed().as_secs_f64());
    let path = dir.join("compare_potentials.jsonl");
    write_jsonl(&path, &Stamp::new("compare-potentials", Some(cfg.master_seed)), &records)?;
    m.artifact(&path);
    m.finish(dir)?;
    let ok: Vec<f64> = records.iter().filter_map(|r| r.comparison.map(|c| c.gap)).collect();
    if !ok.is_empty() {
        let small = ok.iter().filter(|&&g| g < 0.05).count();
        eprintln!("gap below 0.05 in {small} of {} replicas", ok.len());
    }
    Ok(())
}

fn bounds_cmd(d: usize, alpha: f64, gamma: f64, xi: Option<f64>) -> CliResult<()> {
    // lambda plays no role in the bounds
    let params = ModelParams::new(d, alpha, gamma, 0.0)?;
    let xi = xi.unwrap_or_else(|| xi_tilde(&params));
    let b = theoretical_bounds(&params, xi)?;
    let doc = serde_json::json!({ "stamp": Stamp::new("bounds", None), "result": b });
    print_json(&doc)
}

fn fit_cmd(csv: &Path, obs: ObservableArg, out: Option<&Path>) -> CliResult<()> {
    let (seed, rows) = read_sweep_csv(csv)?;
    let obs = match obs {
        ObservableArg::FluctQ90 => Observable::FluctQ90,
        ObservableArg::LogZDisorderStd => Observable::LogZDisorderStd,
    };
    let inputs: Vec<FitInput> = rows.iter().map(|r| FitInput { scale: r.scale, log_z: r.log_z, q90: r.q90 }).collect();
    let fit = fit_exponent(&inputs, obs)?;
    if !fit.excluded.is_empty() {
        eprintln!("warning: excluded L values with non-positive observable: {:?}", fit.excluded);
    }
    let stamp = Stamp::new("fit", seed);
    match out {
        Some(path) => {
            let mut m = ManifestBuilder::start("fit", sha256_hex(&std::fs::read(csv)?), seed);
            ensure_dir(&parent_dir(path))?;
            write_json(path, &stamp, &fit)?;
            m.artifact(path);
            m.finish(&parent_dir(path))?;
        }
        None => {
            let doc = serde_json::json!({ "stamp": stamp, "result": fit });
            print_json(&doc)?;
        }
    }
    Ok(())
}

/// Writes a pretty JSON document to stdout; a closed pipe is not an error.
fn print_json(doc: &serde_json::Value) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    let res = serde_json::to_writer_pretty(&mut out, doc)
        .map_err(std::io::Error::from)
        .and_then(|()| writeln!(out))
        .and_then(|()| out.flush());
    match res {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
