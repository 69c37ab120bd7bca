//! Frozen independent oracles. Reference values were computed once with
//! mpmath at 30 digits by direct numerical integration (not by any series
//! used in this crate) and pasted here.

use evtsir_core::fading::FadingParams;
use evtsir_core::sirdist::{exact_cdf, exact_pdf, Route};
use evtsir_core::specfun::{kummer_1f1, lauricella_fd, lauricella_fd_shells, reg_inc_beta};
use evtsir_core::{Scenario, SeriesControl};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

fn ctl() -> SeriesControl {
    SeriesControl::default()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Non-integer μ everywhere and non-unit powers, so the mixture route is used.
fn odd_scenario() -> Scenario {
    Scenario::new(
        FadingParams::new(1.5, 2.5, 1.7, 2.0).unwrap(),
        vec![FadingParams::new(0.7, 1.3, 2.2, 0.8).unwrap()],
    )
    .unwrap()
}

#[test]
fn survival_matches_double_integral() {
    // P(SIR > z) = ∫ f_X(x) P(Y < x/z) dx with the closed-form fading
    // densities, integrated adaptively.
    let reference = [
        (0.1, 0.99739154140614506),
        (0.5, 0.93272112414527392),
        (1.0, 0.81192036958640198),
        (2.5, 0.53180570008319275),
        (10.0, 0.1574139420771483),
        (40.0, 0.031062083502870535),
    ];
    let s = odd_scenario();
    for (z, survival) in reference {
        let r = exact_cdf(&s, z, &ctl()).unwrap();
        assert!(r.converged);
        assert_eq!(r.route, Route::Mixture);
        assert!(rel(r.survival, survival) < 1e-10, "z={z}: {} vs {survival}", r.survival);
        assert!((r.value + r.survival - 1.0).abs() < 1e-14);
    }
}

#[test]
fn inid_rayleigh_closed_form() {
    // Exponential powers: S(z) = Π 1/(1 + zΩᵢ/Ω₀).
    let ray = |mean| FadingParams::new(0.0, 1.0, 1.0, mean).unwrap();
    let means = [0.3, 1.7, 4.0];
    let s = Scenario::new(ray(2.5), means.iter().map(|&m| ray(m)).collect()).unwrap();
    for z in [1e-3, 0.05, 0.7, 3.0, 40.0, 1e4] {
        let expected: f64 = means.iter().map(|m| 1.0 / (1.0 + z * m / 2.5)).product();
        let r = exact_cdf(&s, z, &ctl()).unwrap();
        assert!(rel(r.survival, expected) < 1e-11, "z={z}: {} vs {expected}", r.survival);
        // Density is -S'(z) = S(z) Σ (Ωᵢ/Ω₀)/(1 + zΩᵢ/Ω₀).
        let slope: f64 = means.iter().map(|m| (m / 2.5) / (1.0 + z * m / 2.5)).sum();
        let f = exact_pdf(&s, z, &ctl()).unwrap();
        assert!(rel(f.value, expected * slope) < 1e-9, "pdf z={z}: {} vs {}", f.value, expected * slope);
    }
}

#[test]
fn kummer_reference_values() {
    let reference = [
        (0.5, 1.5, 2.0, 2.3644538928052093),
        (2.5, 1.0, -3.0, -0.070645165787693005),
        (1.7, 3.2, 10.0, 1654.1380690367325),
        (3.0, 2.0, 0.25, 1.4445285937737092),
    ];
    for (a, b, x, v) in reference {
        let r = kummer_1f1(a, b, x, &ctl()).unwrap();
        assert!(rel(r.value, v) < 1e-12, "1F1({a};{b};{x}) = {} vs {v}", r.value);
    }
}

#[test]
fn incomplete_beta_reference_values() {
    let reference = [(2.5, 3.5, 0.3, 0.29675298929566638), (0.7, 1.9, 0.85, 0.98308426085237583), (10.0, 12.0, 0.45, 0.48831354307835287)];
    for (a, b, u, v) in reference {
        let got = reg_inc_beta(a, b, u).unwrap();
        assert!(rel(got, v) < 1e-13, "I_{u}({a},{b}) = {got} vs {v}");
    }
}

/// Gauss ₂F₁ by plain partial sums, run until the terms are negligible.
fn gauss_2f1(a: f64, b: f64, c: f64, x: f64) -> f64 {
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 0..200_000 {
        let k = k as f64;
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * x;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() && k > 10.0 {
            break;
        }
    }
    sum
}

#[test]
fn single_variable_case_is_gauss() {
    // Near x = 0.9 the tail needs more than the default 200 terms.
    let wide = SeriesControl {
        max_total_order: 2000,
        ..ctl()
    };
    let grid = [0.5, 1.0, 2.5];
    for &a in &grid {
        for &b in &grid {
            for &c in &grid {
                for x in [-0.5, -0.1, 0.1, 0.5, 0.9] {
                    let got = lauricella_fd(a, &[b], c, &[x], &wide).unwrap();
                    let want = gauss_2f1(a, b, c, x);
                    assert!(got.converged, "2F1({a},{b};{c};{x}): {got:?}");
                    assert!(rel(got.value, want) < 1e-10, "2F1({a},{b};{c};{x}) = {} vs {want}", got.value);
                }
            }
        }
    }
}

#[test]
fn raising_the_cap_never_moves_a_converged_result() {
    let cases: [(f64, &[f64], f64, &[f64]); 4] = [
        (0.5, &[0.5], 0.5, &[0.9]),
        (1.3, &[0.7, 2.1], 3.4, &[0.4, -0.6]),
        (2.5, &[1.0, 1.0, 0.5], 1.5, &[0.2, 0.5, 0.7]),
        (-0.5, &[2.0, 3.0], 4.0, &[0.95, 0.1]),
    ];
    for (a, b, c, x) in cases {
        let mut last: Option<f64> = None;
        for cap in [50, 200, 800, 3200] {
            let tight = SeriesControl {
                max_total_order: cap,
                ..ctl()
            };
            let r = lauricella_fd(a, b, c, x, &tight).unwrap();
            if !r.converged {
                assert!(last.is_none(), "converged at a smaller cap but not at {cap}");
                continue;
            }
            if let Some(prev) = last {
                assert!((r.value - prev).abs() <= tight.rel_tol * r.value.abs(), "cap {cap}: {} vs {prev}", r.value);
            }
            last = Some(r.value);
        }
        assert!(last.is_some(), "never converged for a={a}");
    }
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn rising(a: &BigRational, k: usize) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, j| acc * (a + q(j as i64, 1)))
}

fn factorial(k: usize) -> BigRational {
    (1..=k).fold(BigRational::one(), |acc, j| acc * q(j as i64, 1))
}

/// Full enumeration over every multi-index with total degree ≤ n.
fn brute_force_fd(a: &BigRational, b: &[BigRational], c: &BigRational, x: &[BigRational], n: usize) -> BigRational {
    fn walk(i: usize, left: usize, idx: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, dims: usize) {
        if i == dims {
            out.push(idx.clone());
            return;
        }
        for k in 0..=left {
            idx.push(k);
            walk(i + 1, left - k, idx, out, dims);
            idx.pop();
        }
    }
    let mut indices = Vec::new();
    walk(0, n, &mut Vec::new(), &mut indices, b.len());
    let mut total = BigRational::zero();
    for idx in indices {
        let deg: usize = idx.iter().sum();
        let mut term = rising(a, deg) / rising(c, deg);
        for ((&k, bi), xi) in idx.iter().zip(b).zip(x) {
            let mut xp = BigRational::one();
            for _ in 0..k {
                xp *= xi;
            }
            term = term * rising(bi, k) * xp / factorial(k);
        }
        total += term;
    }
    total
}

#[test]
fn terminating_series_are_exact() {
    // Four variables, as for two interferers; a = -n terminates at degree n.
    let b = [q(3, 2), q(1, 1), q(5, 2), q(2, 1)];
    let x = [q(1, 3), q(-2, 5), q(7, 8), q(1, 2)];
    let c = q(11, 2);
    for n in 0..=6usize {
        let a = q(-(n as i64), 1);
        let brute = brute_force_fd(&a, &b, &c, &x, n);
        // Asking for more shells than needed must not change anything.
        let shells = lauricella_fd_shells(&a, &b, &c, &x, n + 3);
        assert_eq!(brute, shells, "degree {n}");
    }
}
