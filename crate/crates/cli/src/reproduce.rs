//! Desk-scale regeneration of the KL table and every figure, one CSV each.

use std::path::Path;

use evtsir_core::evt::{frechet_moment, frechet_quantile, maxima_cdf};
use evtsir_core::metrics::{self, FasConfig, QuadControl};
use evtsir_core::montecarlo::{run_maxima_study, tag, MaximaStudy};
use evtsir_core::stats::{ecdf, KlOptions};
use evtsir_core::{presets, FrechetParams, RandomStream, Scenario, SeriesControl, SeriesWorkspace};
use serde_json::json;

use crate::error::{usage, CliResult};
use crate::output::{Cell, Document, Format, Table};

pub const TARGETS: [&str; 14] = [
    "table1", "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13",
];

pub struct Settings {
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
}

fn scenarios(prefix: &str) -> Vec<(String, Scenario)> {
    presets::all()
        .into_iter()
        .filter(|p| p.name.starts_with(prefix))
        .map(|p| (p.name, p.scenario))
        .collect()
}

fn workspace(s: &Scenario) -> CliResult<SeriesWorkspace> {
    Ok(SeriesWorkspace::new(s, SeriesControl::default())?)
}

/// Log grid shared by all curves of one figure.
fn shared_grid(fps: &[FrechetParams], points: usize) -> CliResult<Vec<f64>> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for fp in fps {
        lo = lo.min(frechet_quantile(fp, 0.005)?);
        hi = hi.max(frechet_quantile(fp, 0.995)?);
    }
    Ok((0..points).map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (points - 1) as f64).exp()).collect())
}

/// `preset, L, z, frechet, exact_max[, empirical_max]`.
fn cdf_curves(prefix: &str, l: usize, simulate: bool, set: &Settings) -> CliResult<Table> {
    let cases = scenarios(prefix);
    let mut fitted = Vec::new();
    for (name, s) in &cases {
        let ws = workspace(s)?;
        let fp = FrechetParams::from_workspace(&ws, l)?;
        fitted.push((name, s, ws, fp));
    }
    let grid = shared_grid(&fitted.iter().map(|f| f.3).collect::<Vec<_>>(), 60)?;
    let mut columns = vec!["preset", "L", "z", "frechet", "exact_max"];
    if simulate {
        columns.push("empirical_max");
    }
    let mut table = Table::new(&columns);
    for (name, s, ws, fp) in &fitted {
        let sorted = if simulate {
            let study = MaximaStudy {
                scenario: (*s).clone(),
                l,
                reps: set.reps,
                seed: set.seed,
            };
            let mut m = run_maxima_study(&study, set.workers)?;
            m.sort_unstable_by(f64::total_cmp);
            Some(m)
        } else {
            None
        };
        for &z in &grid {
            let mut row: Vec<Cell> = vec![name.as_str().into(), l.into(), z.into(), fp.cdf(z).into(), maxima_cdf(ws, l, z)?.into()];
            if let Some(sorted) = &sorted {
                row.push(ecdf(sorted, z)?.into());
            }
            table.push(row);
        }
    }
    Ok(table)
}

const SWEEP_L: [usize; 6] = [16, 32, 64, 128, 256, 512];

/// `preset, L, frechet_mean, simulated_mean, simulated_se`.
fn moments(prefix: &str, set: &Settings) -> CliResult<Table> {
    let mut table = Table::new(&["preset", "L", "frechet_mean", "simulated_mean", "simulated_se"]);
    for (name, s) in scenarios(prefix) {
        let ws = workspace(&s)?;
        for l in SWEEP_L {
            let fp = FrechetParams::from_workspace(&ws, l)?;
            let study = MaximaStudy {
                scenario: s.clone(),
                l,
                reps: set.reps,
                seed: set.seed,
            };
            let est = evtsir_core::montecarlo::estimate_with_se(&run_maxima_study(&study, set.workers)?)?;
            table.push(vec![name.as_str().into(), l.into(), frechet_moment(&fp, 1.0)?.into(), est.mean.into(), est.std_err.into()]);
        }
    }
    Ok(table)
}

/// `preset, L, asymptotic, simulated, simulated_se`.
fn rates(prefix: &str, set: &Settings) -> CliResult<Table> {
    let stream = RandomStream::new(set.seed).substream(tag::RATE);
    let mut table = Table::new(&["preset", "L", "asymptotic", "simulated", "simulated_se"]);
    for (name, s) in scenarios(prefix) {
        let ws = workspace(&s)?;
        for l in SWEEP_L {
            let fp = FrechetParams::from_workspace(&ws, l)?;
            let asym = metrics::ergodic_rate_asymptotic(&fp, &QuadControl::default())?;
            let mc = metrics::ergodic_rate_mc(&s, l, set.reps, &stream, set.workers)?;
            table.push(vec![name.as_str().into(), l.into(), asym.into(), mc.mean.into(), mc.std_err.into()]);
        }
    }
    Ok(table)
}

/// `preset, L, Ls, upper_bound, upper_bound_se, simulated, simulated_se`.
fn fas(prefix: &str, set: &Settings) -> CliResult<Table> {
    let stream = RandomStream::new(set.seed).substream(tag::FAS);
    let mut table = Table::new(&["preset", "L", "Ls", "upper_bound", "upper_bound_se", "simulated", "simulated_se"]);
    for (name, s) in scenarios(prefix) {
        let ws = workspace(&s)?;
        for l in [16, 32, 64, 128] {
            let fp = FrechetParams::from_workspace(&ws, l)?;
            for ls in [1, 2, 4, 8] {
                let cfg = FasConfig { l, ls, mc_samples: set.reps };
                let ub = metrics::fas_rate_upper_bound(&fp, &cfg, &stream.substream(0), set.workers)?;
                let sim = metrics::fas_simulated_rate(&s, &cfg, &stream.substream(1), set.workers)?;
                table.push(vec![
                    name.as_str().into(),
                    l.into(),
                    ls.into(),
                    ub.mean.into(),
                    ub.std_err.into(),
                    sim.mean.into(),
                    sim.std_err.into(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Rows `L`, one column per KL-table scenario.
fn table1(set: &Settings) -> CliResult<Table> {
    let cases = presets::table1();
    let mut columns = vec!["L"];
    columns.extend(cases.iter().map(|(n, _)| n.as_str()));
    let mut table = Table::new(&columns);
    let workspaces = cases.iter().map(|(_, s)| workspace(s)).collect::<CliResult<Vec<_>>>()?;
    for l in presets::TABLE1_L {
        let mut row: Vec<Cell> = vec![l.into()];
        for ((_, s), ws) in cases.iter().zip(&workspaces) {
            let fp = FrechetParams::from_workspace(ws, l)?;
            let r = metrics::maxima_frechet_kl(s, &fp, set.reps, set.seed, set.workers, &KlOptions::default())?;
            row.push(r.value.into());
        }
        table.push(row);
    }
    Ok(table)
}

pub fn build(target: &str, set: &Settings) -> CliResult<Table> {
    match target {
        "table1" => table1(set),
        "fig1" => cdf_curves("fig1-", 32, true, set),
        "fig2" => cdf_curves("fig2-", 32, true, set),
        "fig3" => cdf_curves("fig3-", 200, true, set),
        "fig4" => cdf_curves("fig4-", 200, true, set),
        "fig5" => cdf_curves("fig5-", 200, false, set),
        "fig6" => cdf_curves("fig6-", 200, false, set),
        "fig7" => moments("fig7-", set),
        "fig8" => rates("fig8-", set),
        "fig9" => rates("fig9-", set),
        "fig10" => rates("fig10-", set),
        "fig11" => fas("fig11-", set),
        "fig12" => fas("fig12-", set),
        "fig13" => fas("fig13-", set),
        other => Err(usage(format!("unknown target '{other}'; expected one of: all, {}", TARGETS.join(", ")))),
    }
}

pub fn run(target: &str, dir: &Path, format: Format, set: &Settings) -> CliResult<Vec<String>> {
    let targets: Vec<&str> = if target == "all" {
        TARGETS.to_vec()
    } else if TARGETS.contains(&target) {
        vec![target]
    } else {
        return Err(usage(format!("unknown target '{target}'; expected one of: all, {}", TARGETS.join(", "))));
    };
    std::fs::create_dir_all(dir)?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let mut written = Vec::new();
    for t in targets {
        let table = build(t, set)?;
        let config = json!({ "target": t, "reps": set.reps, "seed": set.seed });
        let doc = Document::new("reproduce", set.seed, config, table);
        let path = dir.join(format!("{t}.{ext}"));
        std::fs::write(&path, doc.render(format))?;
        written.push(path.display().to_string());
    }
    Ok(written)
}
