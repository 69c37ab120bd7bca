//! Frechet limit of the largest of `L` i.i.d. SIR variates.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::{GammaApprox, Scenario};
use crate::roots::brent;
use crate::sirdist::SeriesWorkspace;
use crate::specfun::{lgamma, SeriesControl};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetParams {
    /// `a_L`.
    pub scale: f64,
    /// `β`.
    pub shape: f64,
    #[serde(rename = "L")]
    pub l: usize,
}

impl FrechetParams {
    pub fn new(scale: f64, shape: f64, l: usize) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain("Frechet scale", scale));
        }
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::domain("Frechet shape", shape));
        }
        Ok(FrechetParams { scale, shape, l })
    }

    /// Scale and shape of the limit law for `s` at maxima length `l`.
    pub fn for_scenario(s: &Scenario, l: usize, ctl: &SeriesControl) -> Result<Self> {
        let ws = SeriesWorkspace::new(s, *ctl)?;
        Self::from_workspace(&ws, l)
    }

    pub fn from_workspace(ws: &SeriesWorkspace, l: usize) -> Result<Self> {
        Self::new(frechet_scale_with(ws, l)?, ws.scenario().mu_sum(), l)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        frechet_cdf(self, z)
    }

    /// One Frechet variate, `a·E^{-1/β}` with `E ~ Exp(1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = Exp1.sample(rng);
        self.scale * e.powf(-1.0 / self.shape)
    }
}

/// `β = Σᵢ μᵢ`.
pub fn frechet_shape(s: &Scenario) -> f64 {
    s.mu_sum()
}

/// `a_L = F⁻¹(1 - 1/L)` from the exact SIR CDF.
pub fn frechet_scale(s: &Scenario, l: usize, ctl: &SeriesControl) -> Result<f64> {
    frechet_scale_with(&SeriesWorkspace::new(s, *ctl)?, l)
}

/// `a_L` reusing a prepared workspace.
///
/// Solves `ln S(z) = -ln L` in `ln z`, starting from the beta-prime
/// approximation and widening the bracket geometrically if needed.
pub fn frechet_scale_with(ws: &SeriesWorkspace, l: usize) -> Result<f64> {
    if l < 2 {
        return Err(Error::invalid(format!("a_L needs L ≥ 2, got {l}")));
    }
    let target = -(l as f64).ln();
    let guess = beta_prime_quantile(&GammaApprox::new(ws.scenario()), 1.0 / l as f64)?;
    let g = |t: f64| -> Result<f64> { Ok(accurate_survival(ws, t.exp())?.ln() - target) };
    let (mut lo, mut hi) = ((guess / 10.0).ln(), (guess * 10.0).ln());
    let (mut g_lo, mut g_hi) = (g(lo)?, g(hi)?);
    let mut widen = 0;
    // S is decreasing: g(lo) must be positive and g(hi) negative.
    while !(g_lo >= 0.0 && g_hi <= 0.0) {
        widen += 1;
        if widen > 20 {
            return Err(Error::BracketFailure { lo: lo.exp(), hi: hi.exp() });
        }
        if g_lo < 0.0 {
            lo -= std::f64::consts::LN_10;
            g_lo = g(lo)?;
        }
        if g_hi > 0.0 {
            hi += std::f64::consts::LN_10;
            g_hi = g(hi)?;
        }
    }
    let t = brent(g, lo, hi, 1e-11, 200)?;
    Ok(t.exp())
}

/// `S(z)` to relative tolerance. Both the scale root and `F^L` only need
/// `S`; deep in the lower tail `F` itself may miss its relative target
/// while `S` is still exact to rounding.
fn accurate_survival(ws: &SeriesWorkspace, z: f64) -> Result<f64> {
    let r = ws.cdf(z)?;
    if !(r.converged || r.survival_err <= ws.control().rel_tol * r.survival) {
        return Err(Error::NonConvergence {
            what: "SIR CDF series",
            terms: r.terms_used,
            est_err: r.survival_err,
        });
    }
    Ok(r.survival)
}

/// `z` with beta-prime survival `p`.
fn beta_prime_quantile(approx: &GammaApprox, p: f64) -> Result<f64> {
    let h = |t: f64| -> Result<f64> { Ok(approx.cdf_pair(t.exp()).1.ln() - p.ln()) };
    let (mut lo, mut hi) = (-5.0_f64, 5.0_f64);
    for _ in 0..60 {
        if h(lo)? >= 0.0 {
            break;
        }
        lo -= 5.0;
    }
    for _ in 0..60 {
        if h(hi)? <= 0.0 {
            break;
        }
        hi += 5.0;
    }
    brent(h, lo, hi, 1e-6, 200).map(f64::exp)
}

/// `exp(-(z/a)^{-β})` for `z > 0`, zero otherwise.
pub fn frechet_cdf(fp: &FrechetParams, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    (-(z / fp.scale).powf(-fp.shape)).exp()
}

pub fn frechet_pdf(fp: &FrechetParams, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let u = (z / fp.scale).powf(-fp.shape);
    fp.shape / z * u * (-u).exp()
}

pub fn frechet_quantile(fp: &FrechetParams, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain("Frechet quantile level", q));
    }
    Ok(fp.scale * (-q.ln()).powf(-1.0 / fp.shape))
}

/// `E[Z^ν] = a^ν Γ(1 - ν/β)`, finite only for `ν < β`.
pub fn frechet_moment(fp: &FrechetParams, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::domain("moment order", nu));
    }
    if nu >= fp.shape {
        return Err(Error::DivergentMoment { nu, shape: fp.shape });
    }
    Ok((nu * fp.scale.ln() + lgamma(1.0 - nu / fp.shape)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceBound {
    pub delta: f64,
    pub description: String,
}

/// Rate exponent `δ = 1/Σμᵢ` of the bound `O(L^{-δ} + L^{-1})`.
pub fn convergence_exponent(s: &Scenario) -> ConvergenceBound {
    let beta = s.mu_sum();
    let delta = 1.0 / beta;
    let description = if delta >= 1.0 {
        "O(L^-1)".to_string()
    } else {
        format!("O(L^-{delta:.6} + L^-1)")
    };
    ConvergenceBound { delta, description }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    FirstLarger,
    SecondLarger,
    Equal,
}

/// Usual stochastic order between two Frechet laws of common shape.
pub fn stochastic_compare(fp1: &FrechetParams, fp2: &FrechetParams) -> Result<Dominance> {
    if fp1.shape != fp2.shape {
        return Err(Error::ShapeMismatch(fp1.shape, fp2.shape));
    }
    Ok(match fp1.scale.total_cmp(&fp2.scale) {
        std::cmp::Ordering::Greater => Dominance::FirstLarger,
        std::cmp::Ordering::Less => Dominance::SecondLarger,
        std::cmp::Ordering::Equal => Dominance::Equal,
    })
}

/// Exact `F(z)^L`, formed as `exp(L·ln(1 - S))` to keep the tail.
pub fn maxima_cdf(ws: &SeriesWorkspace, l: usize, z: f64) -> Result<f64> {
    if z <= 0.0 {
        return Ok(0.0);
    }
    Ok((l as f64 * (-accurate_survival(ws, z)?).ln_1p()).exp())
}

/// `sup |F(z)^L - Λ(z)|` over `points` Frechet quantiles evenly spaced in
/// `[q_lo, q_hi]`.
pub fn sup_deviation(ws: &SeriesWorkspace, fp: &FrechetParams, points: usize, q_lo: f64, q_hi: f64) -> Result<f64> {
    if points < 2 || !(0.0 < q_lo && q_lo < q_hi && q_hi < 1.0) {
        return Err(Error::invalid("quantile grid needs ≥ 2 points inside (0, 1)"));
    }
    let mut worst: f64 = 0.0;
    for k in 0..points {
        let q = q_lo + (q_hi - q_lo) * k as f64 / (points - 1) as f64;
        let z = frechet_quantile(fp, q)?;
        worst = worst.max((maxima_cdf(ws, fp.l, z)? - q).abs());
    }
    Ok(worst)
}
