use evtsir_core::evt::{convergence_exponent, frechet_cdf, frechet_moment, frechet_pdf, maxima_cdf};
use evtsir_core::fading::GammaApprox;
use evtsir_core::metrics::{self, FasConfig, QuadControl};
use evtsir_core::montecarlo::tag;
use evtsir_core::stats::KlOptions;
use evtsir_core::{FrechetParams, RandomStream, SeriesWorkspace};

use crate::config::{self, RunConfig};
use crate::error::{usage, CliError, CliResult};
use crate::output::{Cell, Table};

/// A finished table. `failed` rows were still written, but the process
/// should exit with the numeric-failure code.
pub struct Outcome {
    pub table: Table,
    pub failed: bool,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Outcome { table, failed: false }
    }
}

fn workspace(cfg: &RunConfig) -> CliResult<SeriesWorkspace> {
    Ok(SeriesWorkspace::new(&cfg.scenario, cfg.series_control())?)
}

fn frechet(ws: &SeriesWorkspace, l: usize) -> CliResult<FrechetParams> {
    Ok(FrechetParams::from_workspace(ws, l)?)
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Density {
    Cdf,
    Pdf,
}

/// `z, exact[, exact_max_L, asymptotic_max_L], beta_prime_approx, status`.
pub fn cdf_or_pdf(cfg: &RunConfig, which: Density) -> CliResult<Outcome> {
    let l = config::single_l(cfg)?;
    let ws = workspace(cfg)?;
    let fp = l.map(|l| frechet(&ws, l)).transpose()?;
    let approx = GammaApprox::new(&cfg.scenario);
    let mut columns = vec!["z", "exact"];
    if fp.is_some() {
        columns.extend(["exact_max_L", "asymptotic_max_L"]);
    }
    columns.extend(["beta_prime_approx", "status"]);
    let mut table = Table::new(&columns);
    let mut failed = false;
    for &z in &cfg.z {
        let (value, converged, cdf_eval) = match which {
            Density::Cdf => match ws.cdf(z) {
                Ok(r) => (r.value, r.converged, Some(r)),
                Err(evtsir_core::Error::NonConvergence { .. }) => (f64::NAN, false, None),
                Err(e) => return Err(e.into()),
            },
            Density::Pdf => match ws.pdf(z) {
                Ok(r) => (r.value, r.converged, None),
                Err(evtsir_core::Error::NonConvergence { .. }) => (f64::NAN, false, None),
                Err(e) => return Err(e.into()),
            },
        };
        failed |= !converged;
        let mut row: Vec<Cell> = vec![z.into(), value.into()];
        if let Some(fp) = &fp {
            let exact_max = match which {
                Density::Cdf => cdf_eval.map_or(f64::NAN, |r| (fp.l as f64 * (-r.survival).ln_1p()).exp()),
                Density::Pdf => match ws.cdf(z) {
                    // d/dz F^L = L F^{L-1} f
                    Ok(r) if converged => fp.l as f64 * ((fp.l - 1) as f64 * (-r.survival).ln_1p()).exp() * value,
                    _ => f64::NAN,
                },
            };
            let asym = match which {
                Density::Cdf => frechet_cdf(fp, z),
                Density::Pdf => frechet_pdf(fp, z),
            };
            row.extend([exact_max.into(), asym.into()]);
        }
        let approx = match which {
            Density::Cdf => approx.cdf(z),
            Density::Pdf => approx.pdf(z),
        };
        row.extend([approx.into(), if converged { "ok" } else { "nonconverged" }.into()]);
        table.push(row);
    }
    Ok(Outcome { table, failed })
}

/// `L, scale, shape, delta[, moment]`.
pub fn frechet_table(cfg: &RunConfig) -> CliResult<Outcome> {
    config::require_l(cfg, 2)?;
    let ws = workspace(cfg)?;
    let bound = convergence_exponent(&cfg.scenario);
    let mut columns = vec!["L", "scale", "shape", "delta"];
    if cfg.nu.is_some() {
        columns.push("moment");
    }
    let mut table = Table::new(&columns);
    for &l in &cfg.l {
        let fp = frechet(&ws, l)?;
        let mut row: Vec<Cell> = vec![l.into(), fp.scale.into(), fp.shape.into(), bound.delta.into()];
        if let Some(nu) = cfg.nu {
            row.push(frechet_moment(&fp, nu)?.into());
        }
        table.push(row);
    }
    Ok(Outcome::ok(table))
}

fn stream(cfg: &RunConfig, tag: u64) -> RandomStream {
    RandomStream::new(cfg.seed).substream(tag)
}

/// `L, gamma_T, asymptotic, exact, simulated, simulated_se`.
pub fn outage(cfg: &RunConfig) -> CliResult<Outcome> {
    config::require_l(cfg, 2)?;
    if cfg.gamma_t.is_empty() {
        return Err(usage("--gamma-t is required"));
    }
    if let Some(g) = cfg.gamma_t.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(usage(format!("--gamma-t must be positive, got {g}")));
    }
    let reps = config::reps(cfg)?;
    let ws = workspace(cfg)?;
    let st = stream(cfg, tag::OUTAGE);
    let mut table = Table::new(&["L", "gamma_T", "asymptotic", "exact", "simulated", "simulated_se"]);
    for &l in &cfg.l {
        let fp = frechet(&ws, l)?;
        for &g in &cfg.gamma_t {
            let mc = metrics::outage_exact_mc(&cfg.scenario, l, g, reps, &st, cfg.workers)?;
            table.push(vec![
                l.into(),
                g.into(),
                metrics::outage_asymptotic(&fp, g)?.into(),
                maxima_cdf(&ws, l, g)?.into(),
                mc.mean.into(),
                mc.std_err.into(),
            ]);
        }
    }
    Ok(Outcome::ok(table))
}

/// `L, asymptotic, simulated, simulated_se`.
pub fn rate(cfg: &RunConfig) -> CliResult<Outcome> {
    config::require_l(cfg, 2)?;
    let reps = config::reps(cfg)?;
    let ws = workspace(cfg)?;
    let st = stream(cfg, tag::RATE);
    let mut table = Table::new(&["L", "asymptotic", "simulated", "simulated_se"]);
    for &l in &cfg.l {
        let fp = frechet(&ws, l)?;
        let asym = metrics::ergodic_rate_asymptotic(&fp, &QuadControl::default())?;
        let mc = metrics::ergodic_rate_mc(&cfg.scenario, l, reps, &st, cfg.workers)?;
        table.push(vec![l.into(), asym.into(), mc.mean.into(), mc.std_err.into()]);
    }
    Ok(Outcome::ok(table))
}

/// `L, Ls, upper_bound, upper_bound_se, simulated, simulated_se, gap`.
pub fn fas(cfg: &RunConfig) -> CliResult<Outcome> {
    config::require_l(cfg, 2)?;
    if cfg.ls.is_empty() {
        return Err(usage("--Ls is required"));
    }
    let reps = config::reps(cfg)?;
    for &l in &cfg.l {
        for &ls in &cfg.ls {
            FasConfig { l, ls, mc_samples: reps }.validate()?;
        }
    }
    let ws = workspace(cfg)?;
    let st = stream(cfg, tag::FAS);
    let mut table = Table::new(&["L", "Ls", "upper_bound", "upper_bound_se", "simulated", "simulated_se", "gap"]);
    for &l in &cfg.l {
        let fp = frechet(&ws, l)?;
        for &ls in &cfg.ls {
            let fc = FasConfig { l, ls, mc_samples: reps };
            let ub = metrics::fas_rate_upper_bound(&fp, &fc, &st.substream(0), cfg.workers)?;
            let sim = metrics::fas_simulated_rate(&cfg.scenario, &fc, &st.substream(1), cfg.workers)?;
            table.push(vec![
                l.into(),
                ls.into(),
                ub.mean.into(),
                ub.std_err.into(),
                sim.mean.into(),
                sim.std_err.into(),
                (ub.mean - sim.mean).into(),
            ]);
        }
    }
    Ok(Outcome::ok(table))
}

/// `L, n, bins, kl, kl_raw, winsorized`.
pub fn kl(cfg: &RunConfig, opts: &KlOptions) -> CliResult<Outcome> {
    config::require_l(cfg, 2)?;
    let reps = config::reps(cfg)?;
    if !(opts.pseudo_count > 0.0) {
        return Err(usage("--pseudo-count must be positive"));
    }
    if let Some(q) = opts.winsorize {
        if !(0.0 < q && q < 1.0) {
            return Err(usage(format!("--winsorize must lie in (0, 1), got {q}")));
        }
    }
    let ws = workspace(cfg)?;
    let mut table = Table::new(&["L", "n", "bins", "kl", "kl_raw", "winsorized"]);
    for &l in &cfg.l {
        let fp = frechet(&ws, l)?;
        let r = metrics::maxima_frechet_kl(&cfg.scenario, &fp, reps, cfg.seed, cfg.workers, opts)?;
        table.push(vec![l.into(), reps.into(), r.bins.into(), r.value.into(), r.raw.into(), if r.winsorized { "yes" } else { "no" }.into()]);
    }
    Ok(Outcome::ok(table))
}

pub fn numeric(msg: impl Into<String>) -> CliError {
    CliError::Numeric(msg.into())
}
