//! κ-μ shadowed link model: parameters, the (θ, λ) reparameterization,
//! variate samplers and the gamma / beta-prime approximations.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{inc_beta_pair, kummer_1f1, lgamma, ln_beta, SeriesControl};

/// One κ-μ shadowed source or interferer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    pub kappa: f64,
    pub mu: f64,
    pub m: f64,
    #[serde(default = "unit_power")]
    pub mean_power: f64,
}

fn unit_power() -> f64 {
    1.0
}

impl FadingParams {
    pub fn new(kappa: f64, mu: f64, m: f64, mean_power: f64) -> Result<Self> {
        let p = FadingParams {
            kappa,
            mu,
            m,
            mean_power,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit-mean Rayleigh fading (κ = 0, μ = 1).
    pub fn rayleigh() -> Self {
        FadingParams {
            kappa: 0.0,
            mu: 1.0,
            m: 1.0,
            mean_power: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite();
        if !(ok(self.kappa) && self.kappa >= 0.0) {
            return Err(Error::domain("kappa", self.kappa));
        }
        if !(ok(self.mu) && self.mu > 0.0) {
            return Err(Error::domain("mu", self.mu));
        }
        if !(ok(self.m) && self.m > 0.0) {
            return Err(Error::domain("m", self.m));
        }
        if !(ok(self.mean_power) && self.mean_power > 0.0) {
            return Err(Error::domain("mean_power", self.mean_power));
        }
        Ok(())
    }

    /// `(θ, λ)` for this link.
    pub fn theta_lambda(&self) -> (f64, f64) {
        let theta = self.mean_power / (self.mu * (1.0 + self.kappa));
        let lambda = theta * (self.mu * self.kappa + self.m) / self.m;
        (theta, lambda)
    }
}

/// Source link plus `N ≥ 1` interferers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub source: FadingParams,
    pub interferers: Vec<FadingParams>,
}

impl Scenario {
    pub fn new(source: FadingParams, interferers: Vec<FadingParams>) -> Result<Self> {
        let s = Scenario { source, interferers };
        s.validate()?;
        Ok(s)
    }

    /// Rayleigh source against `n` i.i.d. Rayleigh interferers, unit means.
    pub fn rayleigh(n: usize) -> Self {
        Scenario {
            source: FadingParams::rayleigh(),
            interferers: vec![FadingParams::rayleigh(); n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.interferers.is_empty() {
            return Err(Error::invalid("scenario needs at least one interferer"));
        }
        self.source.validate()?;
        self.interferers.iter().try_for_each(FadingParams::validate)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    /// `Σ μᵢ` over interferers.
    pub fn mu_sum(&self) -> f64 {
        self.interferers.iter().map(|p| p.mu).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    pub theta: f64,
    pub lambda: f64,
    pub theta_i: Vec<f64>,
    pub lambda_i: Vec<f64>,
}

pub fn derive_params(s: &Scenario) -> DerivedParams {
    let (theta, lambda) = s.source.theta_lambda();
    let (theta_i, lambda_i) = s.interferers.iter().map(FadingParams::theta_lambda).unzip();
    DerivedParams {
        theta,
        lambda,
        theta_i,
        lambda_i,
    }
}

/// Density of a single κ-μ shadowed power,
/// `x^{μ-1} e^{-x/θ} ₁F₁(m; μ; (1/θ - 1/λ)x) / (Γ(μ) θ^{μ-m} λ^m)`.
pub fn power_pdf(p: &FadingParams, x: f64, ctl: &SeriesControl) -> Result<f64> {
    p.validate()?;
    if x < 0.0 {
        return Ok(0.0);
    }
    let (theta, lambda) = p.theta_lambda();
    if x == 0.0 {
        return Ok(match p.mu {
            mu if mu < 1.0 => f64::INFINITY,
            1.0 => 1.0 / (theta.powf(1.0 - p.m) * lambda.powf(p.m)),
            _ => 0.0,
        });
    }
    let arg = (1.0 / theta - 1.0 / lambda) * x;
    let hyp = kummer_1f1(p.m, p.mu, arg, ctl)?;
    if !hyp.converged {
        return Err(Error::NonConvergence {
            what: "power density 1F1",
            terms: hyp.terms_used,
            est_err: hyp.est_tail,
        });
    }
    let ln_front = (p.mu - 1.0) * x.ln() - x / theta - lgamma(p.mu) - (p.mu - p.m) * theta.ln() - p.m * lambda.ln();
    Ok(ln_front.exp() * hyp.value)
}

/// Exact sampler for one κ-μ shadowed power.
///
/// Draw the shadowing `s ~ Gamma(m, 1/m)`, a cluster count
/// `P ~ Poisson(μκs)` and return `θ · Gamma(μ + P, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct PowerSampler {
    theta: f64,
    mu: f64,
    mu_kappa: f64,
    shadow: Option<Gamma<f64>>,
    plain: Option<Gamma<f64>>,
}

impl PowerSampler {
    pub fn new(p: &FadingParams) -> Result<Self> {
        p.validate()?;
        let (theta, _) = p.theta_lambda();
        let gamma = |shape: f64, scale: f64| Gamma::new(shape, scale).map_err(|e| Error::invalid(e.to_string()));
        Ok(if p.kappa == 0.0 {
            PowerSampler {
                theta,
                mu: p.mu,
                mu_kappa: 0.0,
                shadow: None,
                // μ = 1 uses the exponential fast path below.
                plain: (p.mu != 1.0).then(|| gamma(p.mu, 1.0)).transpose()?,
            }
        } else {
            PowerSampler {
                theta,
                mu: p.mu,
                mu_kappa: p.mu * p.kappa,
                shadow: Some(gamma(p.m, 1.0 / p.m)?),
                plain: None,
            }
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = match (&self.shadow, &self.plain) {
            (None, Some(plain)) => plain.sample(rng),
            (None, None) => Exp1.sample(rng),
            (Some(shadow), _) => {
                let s = shadow.sample(rng);
                let rate = self.mu_kappa * s;
                let clusters = if rate > 0.0 {
                    Poisson::new(rate).map(|d| d.sample(rng)).unwrap_or(0.0)
                } else {
                    0.0
                };
                let shape = self.mu + clusters;
                if shape == 1.0 {
                    Exp1.sample(rng)
                } else {
                    Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
                }
            }
        };
        self.theta * g
    }
}

pub fn sample_power<R: Rng + ?Sized>(p: &FadingParams, rng: &mut R) -> Result<f64> {
    Ok(PowerSampler::new(p)?.sample(rng))
}

/// Sampler for `γ = X / Σᵢ Yᵢ`.
#[derive(Debug, Clone)]
pub struct SirSampler {
    source: PowerSampler,
    interferers: Vec<PowerSampler>,
}

impl SirSampler {
    pub fn new(s: &Scenario) -> Result<Self> {
        s.validate()?;
        Ok(SirSampler {
            source: PowerSampler::new(&s.source)?,
            interferers: s.interferers.iter().map(PowerSampler::new).collect::<Result<_>>()?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.source.sample(rng);
        let y: f64 = self.interferers.iter().map(|p| p.sample(rng)).sum();
        x / y
    }

    /// Largest of `l` independent SIR draws.
    pub fn sample_max<R: Rng + ?Sized>(&self, l: usize, rng: &mut R) -> f64 {
        (0..l).fold(0.0, |acc, _| acc.max(self.sample(rng)))
    }
}

pub fn sample_sir<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> Result<f64> {
    Ok(SirSampler::new(s)?.sample(rng))
}

/// Two-moment gamma approximation `(ψ₁, ψ₂)` (shape, scale) of one power.
pub fn gamma_match(p: &FadingParams) -> (f64, f64) {
    let FadingParams { kappa, mu, m, mean_power } = *p;
    let psi1 = m * mu * (1.0 + kappa).powi(2) / (m + mu * kappa * kappa + 2.0 * m * kappa);
    (psi1, mean_power / psi1)
}

/// Gamma approximation `(φ₁, φ₂)` of the interferer sum, matching the mean
/// and variance of the sum of per-interferer gamma approximations.
pub fn interferer_sum_match(s: &Scenario) -> (f64, f64) {
    let (mean, second) = s.interferers.iter().map(gamma_match).fold((0.0, 0.0), |(m1, m2), (a, b)| (m1 + a * b, m2 + a * b * b));
    let phi2 = second / mean;
    (mean / phi2, phi2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaApprox {
    pub psi1: f64,
    pub psi2: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl GammaApprox {
    pub fn new(s: &Scenario) -> Self {
        let (psi1, psi2) = gamma_match(&s.source);
        let (phi1, phi2) = interferer_sum_match(s);
        GammaApprox { psi1, psi2, phi1, phi2 }
    }

    /// Beta-prime SIR CDF `I_{u/(1+u)}(ψ₁, φ₁)`, `u = zφ₂/ψ₂`.
    pub fn cdf(&self, z: f64) -> f64 {
        self.cdf_pair(z).0
    }

    /// `(F, 1 - F)` without cancellation in either.
    pub fn cdf_pair(&self, z: f64) -> (f64, f64) {
        if !(z > 0.0) {
            return (0.0, 1.0);
        }
        if z == f64::INFINITY {
            return (1.0, 0.0);
        }
        let u = z * self.phi2 / self.psi2;
        // u/(1+u) and 1/(1+u) are both formed directly.
        if u <= 1.0 {
            inc_beta_pair(self.psi1, self.phi1, u / (1.0 + u))
        } else {
            let (upper, lower) = inc_beta_pair(self.phi1, self.psi1, 1.0 / (1.0 + u));
            (lower, upper)
        }
    }

    /// Density matching [`GammaApprox::cdf`].
    pub fn pdf(&self, z: f64) -> f64 {
        if !(z > 0.0 && z.is_finite()) {
            return 0.0;
        }
        let c = self.phi2 / self.psi2;
        let u = z * c;
        let ln = c.ln() + (self.psi1 - 1.0) * u.ln() - (self.psi1 + self.phi1) * u.ln_1p() - ln_beta(self.psi1, self.phi1);
        ln.exp()
    }
}

pub fn beta_prime_sir_cdf(s: &Scenario, z: f64) -> f64 {
    GammaApprox::new(s).cdf(z)
}
