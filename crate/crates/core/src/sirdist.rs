//! Exact CDF and PDF of one SIR variate `γ = X / Σᵢ Yᵢ`.
//!
//! Two independent evaluation routes are implemented.
//!
//! *Series route.* The survival function is an outer sum over `p` of
//! Lauricella `F_D^{(2N)}` values with first parameter `1-p-μ` and lower
//! parameter `1+Σμᵢ`. For integer `μ` every inner function terminates and
//! is evaluated through its re-expansion about unit argument (see
//! [`FdFamily`]), which is free of cancellation. For non-integer `μ` the
//! inner series are infinite and summed directly.
//!
//! *Mixture route.* The source power is a negative-binomial mixture of
//! `Gamma(μ+p, θ)` laws and the interferer sum a positive mixture of
//! `Gamma(Σμᵢ+j, ω)` laws with `ω = min θᵢ`; each pair contributes a
//! regularized incomplete beta. All weights are positive, so this route is
//! stable for any real parameters. It is used as a fallback and as an
//! oracle for the series route.
//!
//! The PDF uses the transformed confluent `E_D` form with the interferer of
//! smallest `θᵢ` as pivot, falling back to the mixture density.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fading::{derive_params, DerivedParams, FadingParams, Scenario};
use crate::specfun::{confluent_ed, inc_beta_pair, lgamma, ln_beta, ln_pochhammer, FdFamily, SeriesControl, ShellSeries};

/// Which evaluation produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Series,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfEval {
    /// `F(z)`.
    pub value: f64,
    /// `1 - F(z)`, computed without cancellation.
    pub survival: f64,
    /// Estimated absolute error of `value`.
    pub abs_err: f64,
    /// Estimated absolute error of `survival`.
    pub survival_err: f64,
    pub converged: bool,
    pub terms_used: usize,
    pub route: Route,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdfEval {
    pub value: f64,
    pub abs_err: f64,
    pub converged: bool,
    pub terms_used: usize,
    pub route: Route,
}

/// Evaluation counters, shared across threads.
#[derive(Debug, Default)]
pub struct Diagnostics {
    pub outer_terms: AtomicUsize,
    pub cap_hits: AtomicUsize,
    pub fallbacks: AtomicUsize,
}

/// Per-scenario state for repeated CDF/PDF evaluation.
///
/// Everything cached here depends only on the scenario and the control
/// policy, never on `z`.
#[derive(Debug)]
pub struct SeriesWorkspace {
    scenario: Scenario,
    derived: DerivedParams,
    ctl: SeriesControl,
    mu: f64,
    m: f64,
    mu_sum: f64,
    integer_mu: bool,
    /// `ln w_p`, negative-binomial weights of the source cluster count.
    ln_w: Vec<f64>,
    /// Upper bounds on `Σ_{p' > p} w_{p'}`.
    w_tail: Vec<f64>,
    mixture: OnceLock<InterfererMixture>,
    pub diagnostics: Diagnostics,
}

/// `Σᵢ Yᵢ = Σ_j π_j Gamma(Σμᵢ + j, ω)`.
#[derive(Debug)]
struct InterfererMixture {
    omega: f64,
    pi: Vec<f64>,
    /// Bounds on `Σ_{j' > j} π_{j'}`.
    pi_tail: Vec<f64>,
}

fn validate_z(z: f64) -> Result<()> {
    if z > 0.0 && !z.is_nan() {
        Ok(())
    } else {
        Err(Error::domain("SIR threshold", z))
    }
}

const WEIGHT_CAP_FACTOR: usize = 40;
const LN_NEGLIGIBLE_WEIGHT: f64 = -92.0; // ≈ ln 1e-40

/// Suffix sums of a positive sequence plus a geometric bound for what lies
/// beyond its end.
fn tails(values: &[f64], beyond: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let mut acc = beyond;
    for k in (0..values.len()).rev() {
        out[k] = acc;
        acc += values[k];
    }
    out
}

impl SeriesWorkspace {
    pub fn new(s: &Scenario, ctl: SeriesControl) -> Result<Self> {
        s.validate()?;
        ctl.validate()?;
        // Pivot: interferer with the smallest θᵢ first.
        let mut interferers = s.interferers.clone();
        interferers.sort_by(|a, b| a.theta_lambda().0.total_cmp(&b.theta_lambda().0));
        let scenario = Scenario {
            source: s.source,
            interferers,
        };
        let derived = derive_params(&scenario);
        let FadingParams { mu, m, .. } = scenario.source;
        let q = derived.theta / derived.lambda;

        // Cluster-count weights w_p = (m)_p/p! q^m (1-q)^p.
        let mut ln_w = Vec::with_capacity(ctl.max_outer_p + 1);
        if q >= 1.0 {
            ln_w.push(0.0);
        } else {
            let ln_q = q.ln();
            let ln_1mq = (derived.lambda - derived.theta).ln() - derived.lambda.ln();
            // Slowly decaying weights (q near 0) run past the series cap until
            // what is left could not matter even for tiny survivals.
            let mut lw = m * ln_q;
            for p in 0..=ctl.max_outer_p * WEIGHT_CAP_FACTOR {
                ln_w.push(lw);
                let ln_rho = ((m + p as f64) / (p as f64 + 1.0)).ln() + ln_1mq;
                // Ratios fall towards 1-q for m > 1 and rise towards it for m < 1.
                let ln_r = if m < 1.0 { ln_1mq } else { ln_rho };
                if p >= ctl.max_outer_p && ln_r < 0.0 && lw + ln_r - (-ln_r.exp()).ln_1p() < LN_NEGLIGIBLE_WEIGHT {
                    break;
                }
                lw += ln_rho;
            }
        }
        let w: Vec<f64> = ln_w.iter().map(|v| v.exp()).collect();
        let beyond = match w.len() {
            1 => 0.0,
            n => {
                let p = (n - 1) as f64;
                let rho = if m < 1.0 { 1.0 - q } else { ((m + p) / (p + 1.0)) * (1.0 - q) };
                if rho < 1.0 {
                    w[n - 1] * rho / (1.0 - rho)
                } else {
                    f64::INFINITY
                }
            }
        };
        let w_tail = tails(&w, beyond);

        Ok(SeriesWorkspace {
            mu_sum: scenario.mu_sum(),
            integer_mu: mu >= 1.0 && mu == mu.round(),
            scenario,
            derived,
            ctl,
            mu,
            m,
            ln_w,
            w_tail,
            mixture: OnceLock::new(),
            diagnostics: Diagnostics::default(),
        })
    }

    /// Scenario with interferers in pivot order.
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn control(&self) -> &SeriesControl {
        &self.ctl
    }

    fn mixture(&self) -> &InterfererMixture {
        self.mixture.get_or_init(|| {
            let d = &self.derived;
            let omega = d.theta_i.iter().copied().fold(f64::INFINITY, f64::min);
            let mut b = Vec::new();
            let mut x = Vec::new();
            let mut ln_c = 0.0;
            for (i, p) in self.scenario.interferers.iter().enumerate() {
                b.push(p.mu - p.m);
                x.push(1.0 - omega / d.theta_i[i]);
                b.push(p.m);
                x.push(1.0 - omega / d.lambda_i[i]);
                ln_c += p.mu * (omega / d.theta_i[i]).ln() + p.m * (d.theta_i[i] / d.lambda_i[i]).ln();
            }
            let x_max = x.iter().copied().fold(0.0, f64::max);
            let scale = ln_c.exp();
            let mut shells = ShellSeries::new(&b, &x);
            let mut pi = vec![scale];
            if x_max > 0.0 {
                const CAP: usize = 6000;
                for j in 1..=CAP {
                    let v = scale * shells.get(j).0;
                    pi.push(v);
                    if v < 1e-40 && v < pi[j - 1] {
                        break;
                    }
                }
            }
            let n = pi.len();
            let beyond = if n > 1 {
                let rho = (pi[n - 1] / pi[n - 2]).max(x_max);
                if rho < 1.0 {
                    pi[n - 1] * rho / (1.0 - rho)
                } else {
                    f64::INFINITY
                }
            } else {
                0.0
            };
            let pi_tail = tails(&pi, beyond);
            InterfererMixture { omega, pi, pi_tail }
        })
    }

    /// Survival `1 - F(z)` from the Lauricella series.
    pub fn series_survival(&self, z: f64) -> Result<CdfEval> {
        validate_z(z)?;
        let d = &self.derived;
        let n = d.theta_i.len();
        let mut b = Vec::with_capacity(2 * n);
        let mut x = Vec::with_capacity(2 * n);
        let mut one_minus = Vec::with_capacity(2 * n);
        let mut ln_k1 = 0.0;
        for (i, p) in self.scenario.interferers.iter().enumerate() {
            for (bi, scale) in [(p.mu - p.m, d.theta_i[i]), (p.m, d.lambda_i[i])] {
                let denom = d.theta + z * scale;
                let xi = d.theta / denom;
                b.push(bi);
                x.push(xi);
                one_minus.push(z * scale / denom);
                ln_k1 += bi * xi.ln();
            }
        }
        if z == f64::INFINITY {
            return Ok(CdfEval {
                value: 1.0,
                survival: 0.0,
                abs_err: 0.0,
                survival_err: 0.0,
                converged: true,
                terms_used: 0,
                route: Route::Series,
            });
        }
        let (mu, mu_sum) = (self.mu, self.mu_sum);
        let q = d.theta / d.lambda;
        ln_k1 += self.m * q.ln() - lgamma(mu_sum + 1.0) - lgamma(mu);
        let mut family = FdFamily::with_complements(&b, 1.0 + mu_sum, &x, &one_minus)?;

        let ctl = &self.ctl;
        let mut acc = 0.0;
        let mut err = 0.0;
        let mut prev = f64::NAN;
        let mut stall = 0;
        let mut inner_ok = true;
        let mut converged = false;
        let mut terms = 0;
        let p_max = if q >= 1.0 { 0 } else { ctl.max_outer_p };
        let ln_1mq = if q >= 1.0 { f64::NEG_INFINITY } else { ((d.lambda - d.theta) / d.lambda).ln() };
        for p in 0..=p_max {
            let pf = p as f64;
            let fd = family.eval(1.0 - pf - mu, ctl);
            inner_ok &= fd.converged;
            let ln_c1 = ln_pochhammer(self.m, p as u64).ln_abs + if p == 0 { 0.0 } else { pf * ln_1mq } + lgamma(mu_sum + mu + pf)
                - ln_pochhammer(mu, p as u64).ln_abs
                - lgamma(pf + 1.0);
            let scale = (ln_k1 + ln_c1).exp();
            let term = scale * fd.value;
            acc += term;
            err += scale * fd.est_tail;
            terms = p + 1;
            if p_max == 0 {
                converged = true;
                break;
            }
            let rho = term / prev;
            let tail = if rho < 1.0 { term * rho / (1.0 - rho) } else { f64::INFINITY };
            if tail <= ctl.rel_tol * acc {
                stall += 1;
                if stall >= ctl.stall_window {
                    err += tail;
                    converged = true;
                    break;
                }
            } else {
                stall = 0;
            }
            prev = term;
        }
        self.diagnostics.outer_terms.fetch_add(terms, Ordering::Relaxed);
        if !converged {
            self.diagnostics.cap_hits.fetch_add(1, Ordering::Relaxed);
            err += prev.abs();
        }
        let survival = acc.clamp(0.0, 1.0);
        let value = 1.0 - survival;
        // Forming F = 1 - S costs one rounding of order ε.
        let abs_err = err + f64::EPSILON * 0.5;
        Ok(CdfEval {
            value,
            survival,
            abs_err,
            survival_err: err,
            converged: converged && inner_ok && abs_err <= ctl.rel_tol * value,
            terms_used: terms,
            route: Route::Series,
        })
    }

    /// `(F, 1-F)` from the gamma-mixture representation.
    pub fn mixture_cdf(&self, z: f64) -> Result<CdfEval> {
        validate_z(z)?;
        let mix = self.mixture();
        let d = &self.derived;
        let ctl = &self.ctl;
        let tol = ctl.rel_tol;
        let denom = d.theta + z * mix.omega;
        let (x, xc) = (z * mix.omega / denom, d.theta / denom);
        // Stop rules leave headroom so accumulated tails stay within tol.
        let stop = 0.25 * tol;
        let mut acc_f = 0.0;
        let mut acc_s = 0.0;
        let mut terms = 0;
        let mut converged = false;
        let (mut err_f, mut err_s) = (0.0, 0.0);
        for (p, &ln_w) in self.ln_w.iter().enumerate() {
            let w = ln_w.exp();
            let alpha = self.mu + p as f64;
            let mut in_f = 0.0;
            let mut in_s = 0.0;
            let mut inner_done = false;
            for (j, &pi) in mix.pi.iter().enumerate() {
                let (f, s) = if x <= 0.5 {
                    inc_beta_pair(alpha, self.mu_sum + j as f64, x)
                } else {
                    let (s, f) = inc_beta_pair(self.mu_sum + j as f64, alpha, xc);
                    (f, s)
                };
                in_f += pi * f;
                in_s += pi * s;
                terms += 1;
                let rest = mix.pi_tail[j];
                // F grows and S shrinks with j.
                if rest <= stop * in_f && rest * s <= stop * in_s {
                    err_f += w * rest;
                    err_s += w * rest * s;
                    inner_done = true;
                    break;
                }
            }
            if !inner_done {
                err_f += w * mix.pi_tail[mix.pi.len() - 1];
                err_s += w * mix.pi_tail[mix.pi.len() - 1];
            }
            acc_f += w * in_f;
            acc_s += w * in_s;
            let rest = self.w_tail[p];
            // F shrinks and S grows with p.
            if rest * in_f <= stop * acc_f && rest <= stop * acc_s {
                err_f += rest * in_f;
                err_s += rest;
                converged = true;
                break;
            }
        }
        if !converged {
            self.diagnostics.cap_hits.fetch_add(1, Ordering::Relaxed);
            let rest = self.w_tail.last().copied().unwrap_or(0.0);
            err_f += rest;
            err_s += rest;
        }
        let total = acc_f + acc_s;
        let (value, survival) = (acc_f / total, acc_s / total);
        err_f += 8.0 * f64::EPSILON * value;
        err_s += 8.0 * f64::EPSILON * survival;
        Ok(CdfEval {
            value,
            survival,
            abs_err: err_f,
            survival_err: err_s,
            converged: converged && err_f <= tol * value && err_s <= tol * survival,
            terms_used: terms,
            route: Route::Mixture,
        })
    }

    /// `F(z)`, choosing the route that reaches tolerance.
    pub fn cdf(&self, z: f64) -> Result<CdfEval> {
        validate_z(z)?;
        let series = if self.integer_mu { Some(self.series_survival(z)?) } else { None };
        if let Some(r) = series {
            // Near zero the series only knows F as 1 - S, which then fails
            // the relative test and defers to the mixture.
            if r.converged {
                return Ok(r);
            }
        }
        self.diagnostics.fallbacks.fetch_add(1, Ordering::Relaxed);
        let mix = self.mixture_cdf(z)?;
        Ok(match series {
            Some(r) if !mix.converged && r.converged => r,
            _ => mix,
        })
    }

    /// Density via the transformed confluent series.
    pub fn series_pdf(&self, z: f64) -> Result<PdfEval> {
        validate_z(z)?;
        let d = &self.derived;
        let (theta, lambda, mu, m, mu_sum) = (d.theta, d.lambda, self.mu, self.m, self.mu_sum);
        let t1 = d.theta_i[0];
        let denom = theta + z * t1;
        let mut b = vec![m];
        let mut x = vec![z * t1 * (lambda - theta) / (lambda * denom)];
        for (i, p) in self.scenario.interferers.iter().enumerate().skip(1) {
            b.push(p.mu - p.m);
            x.push(theta * (d.theta_i[i] - t1) / (d.theta_i[i] * denom));
        }
        for (i, p) in self.scenario.interferers.iter().enumerate() {
            b.push(p.m);
            x.push(theta * (d.lambda_i[i] - t1) / (d.lambda_i[i] * denom));
        }
        let ed = confluent_ed(mu + mu_sum, &b, mu, mu_sum, &x, &self.ctl)?;
        let ln_prod: f64 = self
            .scenario
            .interferers
            .iter()
            .enumerate()
            .map(|(i, p)| (p.mu - p.m) * d.theta_i[i].ln() + p.m * d.lambda_i[i].ln())
            .sum();
        let ln_k5 = (m + mu_sum) * theta.ln() + lgamma(mu + mu_sum) - m * lambda.ln() - lgamma(mu) - lgamma(mu_sum) - ln_prod;
        // z^{-(1+Σμ)} (1 + θ/(zθ₁))^{-(μ+Σμ)}
        let ln_front = ln_k5 - (1.0 + mu_sum) * z.ln() - (mu + mu_sum) * (denom / (z * t1)).ln();
        let front = ln_front.exp();
        let value = front * ed.value;
        Ok(PdfEval {
            value,
            abs_err: front * ed.est_tail,
            converged: ed.converged,
            terms_used: ed.terms_used,
            route: Route::Series,
        })
    }

    /// Density of the gamma-mixture representation.
    pub fn mixture_pdf(&self, z: f64) -> Result<PdfEval> {
        validate_z(z)?;
        let mix = self.mixture();
        let d = &self.derived;
        let tol = self.ctl.rel_tol;
        let denom = d.theta + z * mix.omega;
        let (ln_x, ln_xc) = ((z * mix.omega / denom).ln(), (d.theta / denom).ln());
        let ln_jac = (d.theta * mix.omega).ln() - 2.0 * denom.ln();
        let mut acc = 0.0;
        let mut terms = 0;
        let mut converged = false;
        let mut err = 0.0;
        let mut prev_inner = f64::INFINITY;
        for (p, &ln_w) in self.ln_w.iter().enumerate() {
            let alpha = self.mu + p as f64;
            let mut inner = 0.0;
            let mut prev = f64::INFINITY;
            let mut inner_done = false;
            for (j, &pi) in mix.pi.iter().enumerate() {
                let beta = self.mu_sum + j as f64;
                let dens = ((alpha - 1.0) * ln_x + (beta - 1.0) * ln_xc - ln_beta(alpha, beta) + ln_jac).exp();
                inner += pi * dens;
                terms += 1;
                // Past the mode in j the remaining densities are smaller.
                let rest = mix.pi_tail[j] * dens;
                if dens <= prev && rest <= tol * inner {
                    err += ln_w.exp() * rest;
                    inner_done = true;
                    break;
                }
                prev = dens;
            }
            if !inner_done {
                err += ln_w.exp() * mix.pi_tail[mix.pi.len() - 1] * prev;
            }
            acc += ln_w.exp() * inner;
            let rest = self.w_tail[p] * inner;
            if inner <= prev_inner && rest <= tol * acc {
                err += rest;
                converged = true;
                break;
            }
            prev_inner = inner;
        }
        if !converged {
            self.diagnostics.cap_hits.fetch_add(1, Ordering::Relaxed);
        }
        err += 4.0 * f64::EPSILON * acc;
        Ok(PdfEval {
            value: acc,
            abs_err: err,
            converged: converged && err <= tol * acc,
            terms_used: terms,
            route: Route::Mixture,
        })
    }

    pub fn pdf(&self, z: f64) -> Result<PdfEval> {
        validate_z(z)?;
        let series = self.series_pdf(z)?;
        if series.converged {
            return Ok(series);
        }
        self.diagnostics.fallbacks.fetch_add(1, Ordering::Relaxed);
        let mix = self.mixture_pdf(z)?;
        Ok(if mix.converged || mix.abs_err < series.abs_err { mix } else { series })
    }
}

/// `F_γ(z)` for a single SIR variate.
pub fn exact_cdf(s: &Scenario, z: f64, ctl: &SeriesControl) -> Result<CdfEval> {
    SeriesWorkspace::new(s, *ctl)?.cdf(z)
}

/// `f_γ(z)` for a single SIR variate.
pub fn exact_pdf(s: &Scenario, z: f64, ctl: &SeriesControl) -> Result<PdfEval> {
    SeriesWorkspace::new(s, *ctl)?.pdf(z)
}
