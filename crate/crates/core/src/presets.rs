//! Named scenarios: the KL table rows and every figure configuration.
//!
//! All mean powers are one. Where a figure fixes only some parameters the
//! remaining ones are listed in the preset description.

use crate::fading::{FadingParams, Scenario};

fn ks(kappa: f64, mu: f64, m: f64) -> FadingParams {
    FadingParams {
        kappa,
        mu,
        m,
        mean_power: 1.0,
    }
}

fn scenario(source: FadingParams, interferers: &[FadingParams]) -> Scenario {
    Scenario {
        source,
        interferers: interferers.to_vec(),
    }
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub scenario: Scenario,
}

fn preset(name: impl Into<String>, description: impl Into<String>, scenario: Scenario) -> Preset {
    Preset {
        name: name.into(),
        description: description.into(),
        scenario,
    }
}

/// Interferer shared by the CDF-variation figures.
fn probe_interferer() -> FadingParams {
    ks(2.0, 3.0, 1.0)
}

pub fn all() -> Vec<Preset> {
    let mut out = Vec::new();
    for n in 1..=3 {
        out.push(preset(
            format!("table1-rayleigh-n{n}"),
            format!("Rayleigh source, {n} i.i.d. Rayleigh interferer(s)"),
            Scenario::rayleigh(n),
        ));
    }
    out.push(preset(
        "table1-beta2",
        "source (2,3,2), interferer (2,2,3)",
        scenario(ks(2.0, 3.0, 2.0), &[ks(2.0, 2.0, 3.0)]),
    ));
    out.push(preset(
        "table1-beta3",
        "source (2,2,3), interferers (2,2,3) and (2,1,2)",
        scenario(ks(2.0, 2.0, 3.0), &[ks(2.0, 2.0, 3.0), ks(2.0, 1.0, 2.0)]),
    ));
    out.push(preset(
        "table1-beta4",
        "source (2,3,2), two i.i.d. interferers (2,2,3)",
        scenario(ks(2.0, 3.0, 2.0), &[ks(2.0, 2.0, 3.0), ks(2.0, 2.0, 3.0)]),
    ));
    out.push(preset(
        "fig1-case1",
        "source (2,2,3), interferers (2,2,3) and (2,1,2)",
        scenario(ks(2.0, 2.0, 3.0), &[ks(2.0, 2.0, 3.0), ks(2.0, 1.0, 2.0)]),
    ));
    out.push(preset(
        "fig1-case2",
        "source (2,1,2), interferers (2,1,2) and (2,1,1)",
        scenario(ks(2.0, 1.0, 2.0), &[ks(2.0, 1.0, 2.0), ks(2.0, 1.0, 1.0)]),
    ));
    for n in 1..=3 {
        out.push(preset(format!("fig2-rayleigh-n{n}"), format!("Rayleigh, {n} interferer(s)"), Scenario::rayleigh(n)));
    }
    for mu in 1..=3 {
        out.push(preset(
            format!("fig3-mu{mu}"),
            format!("source (2,{mu},1), interferer (2,3,1)"),
            scenario(ks(2.0, mu as f64, 1.0), &[probe_interferer()]),
        ));
    }
    for m in 1..=3 {
        out.push(preset(
            format!("fig4-m{m}"),
            format!("source (2,1,{m}), interferer (2,3,1)"),
            scenario(ks(2.0, 1.0, m as f64), &[probe_interferer()]),
        ));
    }
    for kappa in [1, 2, 4] {
        out.push(preset(
            format!("fig5-kappa{kappa}"),
            format!("m > mu: source ({kappa},1,3), interferer (2,3,1)"),
            scenario(ks(kappa as f64, 1.0, 3.0), &[probe_interferer()]),
        ));
        out.push(preset(
            format!("fig6-kappa{kappa}"),
            format!("mu > m: source ({kappa},3,1), interferer (2,3,1)"),
            scenario(ks(kappa as f64, 3.0, 1.0), &[probe_interferer()]),
        ));
    }
    for n in 1..=3 {
        out.push(preset(
            format!("fig7-n{n}"),
            format!("source (2,3,2), {n} i.i.d. interferer(s) (2,2,3)"),
            scenario(ks(2.0, 3.0, 2.0), &vec![ks(2.0, 2.0, 3.0); n]),
        ));
        out.push(preset(
            format!("fig8-n{n}"),
            format!("source (2,3,2), {n} i.i.d. interferer(s) (2,2,3)"),
            scenario(ks(2.0, 3.0, 2.0), &vec![ks(2.0, 2.0, 3.0); n]),
        ));
    }
    for (tag, interferer) in [("i111", ks(2.0, 1.0, 1.0)), ("i213", ks(2.0, 2.0, 3.0)), ("i331", ks(2.0, 3.0, 1.0))] {
        out.push(preset(
            format!("fig9-{tag}"),
            "source (2,1,1), one interferer as tagged (kappa,mu,m)",
            scenario(ks(2.0, 1.0, 1.0), &[interferer]),
        ));
    }
    for (tag, source) in [("s111", ks(2.0, 1.0, 1.0)), ("s232", ks(2.0, 3.0, 2.0)), ("s123", ks(1.0, 2.0, 3.0))] {
        out.push(preset(
            format!("fig10-{tag}"),
            "source as tagged (kappa,mu,m), interferer (2,2,3)",
            scenario(source, &[ks(2.0, 2.0, 3.0)]),
        ));
    }
    out.push(preset("fig11-rayleigh", "Rayleigh source, one Rayleigh interferer", Scenario::rayleigh(1)));
    out.push(preset(
        "fig12-fas",
        "source (2,3,1), interferer (2,1,1)",
        scenario(ks(2.0, 3.0, 1.0), &[ks(2.0, 1.0, 1.0)]),
    ));
    out.push(preset(
        "fig13-fas",
        "source (2,3,1), interferers (2,1,1) and (2,2,1)",
        scenario(ks(2.0, 3.0, 1.0), &[ks(2.0, 1.0, 1.0), ks(2.0, 2.0, 1.0)]),
    ));
    out
}

pub fn by_name(name: &str) -> Option<Scenario> {
    all().into_iter().find(|p| p.name == name).map(|p| p.scenario)
}

pub fn names() -> Vec<String> {
    all().into_iter().map(|p| p.name).collect()
}

/// The six KL-table scenarios in table order.
pub fn table1() -> Vec<(String, Scenario)> {
    ["table1-rayleigh-n1", "table1-rayleigh-n2", "table1-rayleigh-n3", "table1-beta2", "table1-beta3", "table1-beta4"]
        .into_iter()
        .map(|n| (n.to_string(), by_name(n).expect("table preset exists")))
        .collect()
}

/// Printed KL-table entries for `L = 20, 40, 60, 80, 100`, in the order of
/// [`table1`].
pub const TABLE1_L: [usize; 5] = [20, 40, 60, 80, 100];
pub const TABLE1_KL: [[f64; 5]; 6] = [
    [3.056835e-04, 2.401260e-04, 1.740811e-04, 1.173821e-04, 9.642496e-05],
    [6.917400e-02, 3.431374e-02, 2.289564e-02, 1.725099e-02, 1.346993e-02],
    [1.866447e-01, 1.365351e-01, 9.692215e-02, 8.344516e-02, 6.688599e-02],
    [8.416245e-02, 3.17051e-02, 2.654761e-02, 1.877953e-02, 1.041195e-02],
    [8.327871e-02, 2.096145e-02, 1.222194e-02, 1.163133e-02, 1.120306e-02],
    [4.312127e-01, 4.113886e-01, 3.745029e-01, 3.373044e-01, 2.796802e-01],
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_unique() {
        let all = all();
        for p in &all {
            p.scenario.validate().unwrap();
        }
        let mut names = names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), all.len());
        let betas: Vec<f64> = table1().iter().map(|(_, s)| s.mu_sum()).collect();
        assert_eq!(betas, vec![1.0, 2.0, 3.0, 2.0, 3.0, 4.0]);
    }
}
