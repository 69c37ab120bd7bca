//! Flag and config-file resolution. Everything is validated here, before
//! any command starts computing.

use std::path::{Path, PathBuf};

use clap::Args;
use evtsir_core::fading::FadingParams;
use evtsir_core::{presets, Scenario, SeriesControl, DEFAULT_SEED};
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliResult};
use crate::output::Format;

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config: a scenario (`source`, `interferers`) plus command fields.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Named scenario; see `evtsir presets`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Branch count(s), comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    pub l: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Relative tolerance of the series evaluations.
    #[arg(long)]
    pub rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Explicit evaluation points, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub z_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub z_max: f64,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
    /// Space generated points linearly instead of logarithmically.
    #[arg(long)]
    pub linear: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// On-disk config. Flags override any field given here.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<String>,
    source: Option<FadingParams>,
    interferers: Option<Vec<FadingParams>>,
    #[serde(rename = "L")]
    l: Option<OneOrMany<usize>>,
    #[serde(rename = "Ls")]
    ls: Option<OneOrMany<usize>>,
    #[serde(rename = "gamma_T")]
    gamma_t: Option<OneOrMany<f64>>,
    nu: Option<f64>,
    reps: Option<usize>,
    seed: Option<u64>,
    z: Option<Vec<f64>>,
    rel_tol: Option<f64>,
}

/// Fully resolved run parameters. Serialized into every output header, so
/// it excludes anything that must not change the bytes (workers, paths).
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub scenario: Scenario,
    #[serde(rename = "L", skip_serializing_if = "Vec::is_empty")]
    pub l: Vec<usize>,
    #[serde(rename = "Ls", skip_serializing_if = "Vec::is_empty")]
    pub ls: Vec<usize>,
    #[serde(rename = "gamma_T", skip_serializing_if = "Vec::is_empty")]
    pub gamma_t: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub z: Vec<f64>,
    pub rel_tol: f64,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
}

impl RunConfig {
    pub fn series_control(&self) -> SeriesControl {
        SeriesControl {
            rel_tol: self.rel_tol,
            ..SeriesControl::default()
        }
    }

    pub fn header_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Command-specific fields, already taken from flags.
#[derive(Debug, Default, Clone)]
pub struct Extra {
    pub ls: Vec<usize>,
    pub gamma_t: Vec<f64>,
    pub nu: Option<f64>,
    pub reps: Option<usize>,
    pub grid: Option<GridArgs>,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn read_config(path: &Path) -> CliResult<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
}

fn preset_scenario(name: &str) -> CliResult<Scenario> {
    presets::by_name(name).ok_or_else(|| usage(format!("unknown preset '{name}' (try `evtsir presets`)")))
}

pub fn resolve(common: &CommonArgs, extra: Extra) -> CliResult<RunConfig> {
    let file = match &common.config {
        Some(path) => read_config(path)?,
        None => ConfigFile::default(),
    };
    let (preset, scenario) = match (&common.preset, &file.preset, file.source) {
        (Some(name), _, _) => (Some(name.clone()), preset_scenario(name)?),
        (None, Some(name), None) => (Some(name.clone()), preset_scenario(name)?),
        (None, Some(_), Some(_)) => return Err(usage("config gives both a preset and a scenario")),
        (None, None, Some(source)) => {
            let s = Scenario {
                source,
                interferers: file.interferers.clone().unwrap_or_default(),
            };
            (None, s)
        }
        (None, None, None) => return Err(usage("no scenario: pass --preset or a --config with `source` and `interferers`")),
    };
    scenario.validate()?;

    let pick = |flag: Vec<f64>, from_file: Option<OneOrMany<f64>>| if flag.is_empty() { from_file.map(OneOrMany::into_vec).unwrap_or_default() } else { flag };
    let l = if common.l.is_empty() { file.l.map(OneOrMany::into_vec).unwrap_or_default() } else { common.l.clone() };
    let ls = if extra.ls.is_empty() { file.ls.map(OneOrMany::into_vec).unwrap_or_default() } else { extra.ls };
    let gamma_t = pick(extra.gamma_t, file.gamma_t);
    let z = match &extra.grid {
        Some(g) => build_grid(g, file.z)?,
        None => Vec::new(),
    };
    let rel_tol = common.rel_tol.or(file.rel_tol).unwrap_or(SeriesControl::default().rel_tol);
    if !(rel_tol > 0.0 && rel_tol < 1e-2) {
        return Err(usage(format!("--rel-tol must lie in (0, 0.01), got {rel_tol}")));
    }
    let workers = common.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    Ok(RunConfig {
        preset,
        scenario,
        l,
        ls,
        gamma_t,
        nu: extra.nu.or(file.nu),
        reps: extra.reps.or(file.reps),
        seed: common.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        z,
        rel_tol,
        workers,
        out: common.out.clone(),
        format: common.format,
    })
}

fn build_grid(g: &GridArgs, from_file: Option<Vec<f64>>) -> CliResult<Vec<f64>> {
    let z = if !g.z.is_empty() {
        g.z.clone()
    } else if let Some(z) = from_file {
        z
    } else {
        if g.points == 0 {
            return Err(usage("empty z-grid: --points must be at least 1"));
        }
        if !(g.z_min > 0.0 && g.z_max >= g.z_min && g.z_max.is_finite()) {
            return Err(usage(format!("need 0 < z-min ≤ z-max, got {} and {}", g.z_min, g.z_max)));
        }
        let n = g.points;
        (0..n)
            .map(|k| {
                let t = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
                if g.linear {
                    g.z_min + t * (g.z_max - g.z_min)
                } else {
                    (g.z_min.ln() + t * (g.z_max / g.z_min).ln()).exp()
                }
            })
            .collect()
    };
    if z.is_empty() {
        return Err(usage("empty z-grid"));
    }
    if let Some(bad) = z.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(usage(format!("grid points must be positive and finite, got {bad}")));
    }
    Ok(z)
}

pub fn require_l(cfg: &RunConfig, min: usize) -> CliResult<()> {
    if cfg.l.is_empty() {
        return Err(usage("--L is required"));
    }
    if let Some(l) = cfg.l.iter().find(|&&l| l < min) {
        return Err(usage(format!("--L must be at least {min}, got {l}")));
    }
    Ok(())
}

pub fn single_l(cfg: &RunConfig) -> CliResult<Option<usize>> {
    match cfg.l.as_slice() {
        [] => Ok(None),
        [l] if *l >= 2 => Ok(Some(*l)),
        [l] => Err(usage(format!("--L must be at least 2, got {l}"))),
        _ => Err(usage("this command takes a single --L")),
    }
}

pub const DEFAULT_REPS: usize = 100_000;
pub const MIN_REPS: usize = 10_000;

pub fn reps(cfg: &RunConfig) -> CliResult<usize> {
    let reps = cfg.reps.unwrap_or(DEFAULT_REPS);
    if reps < MIN_REPS {
        return Err(usage(format!("--reps must be at least {MIN_REPS}, got {reps}")));
    }
    Ok(reps)
}
