//! Outage probability, ergodic rate and the antenna-selection rate bound.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{frechet_cdf, FrechetParams};
use crate::fading::{Scenario, SirSampler};
use crate::montecarlo::{par_map, par_sum_sq, run_maxima_study, tag, MaximaStudy, McEstimate, RandomStream};
use crate::quad::exp_sinh;
use crate::stats::{empirical_kl_with, KlOptions, KlReport};

const MIN_REPS: usize = 10_000;

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::invalid(format!("Monte Carlo needs at least {MIN_REPS} repetitions, got {reps}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FasConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "Ls")]
    pub ls: usize,
    pub mc_samples: usize,
}

impl FasConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::invalid(format!("FAS needs L ≥ 2, got {}", self.l)));
        }
        if self.ls == 0 || self.ls > self.l {
            return Err(Error::invalid(format!("need 1 ≤ Ls ≤ L, got Ls={} L={}", self.ls, self.l)));
        }
        check_reps(self.mc_samples)
    }
}

/// `P(γ_max ≤ γ_T)` under the Frechet limit.
pub fn outage_asymptotic(fp: &FrechetParams, gamma_t: f64) -> Result<f64> {
    if !(gamma_t > 0.0) {
        return Err(Error::domain("outage threshold", gamma_t));
    }
    Ok(frechet_cdf(fp, gamma_t))
}

/// Simulated `P(max of L SIR draws ≤ γ_T)`; rep `r` uses sample index `r`.
pub fn outage_exact_mc(s: &Scenario, l: usize, gamma_t: f64, reps: usize, stream: &RandomStream, workers: usize) -> Result<McEstimate> {
    if l == 0 {
        return Err(Error::invalid("L must be at least 1"));
    }
    if !(gamma_t > 0.0) {
        return Err(Error::domain("outage threshold", gamma_t));
    }
    check_reps(reps)?;
    let sampler = SirSampler::new(s)?;
    let (hits, _) = par_sum_sq(reps, workers, |r| {
        let mut rng = stream.rng_at(r);
        f64::from(u8::from(sampler.sample_max(l, &mut rng) <= gamma_t))
    })?;
    McEstimate::proportion(hits as usize, reps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadControl {
    /// Agreement required between successive step halvings.
    pub rel_tol: f64,
    pub max_level: usize,
}

impl Default for QuadControl {
    fn default() -> Self {
        QuadControl {
            rel_tol: 1e-8,
            max_level: 12,
        }
    }
}

/// `ln(1 + e^{ln_y})` without overflow.
fn ln1p_exp(ln_y: f64) -> f64 {
    if ln_y > 40.0 {
        ln_y + (-ln_y).exp()
    } else {
        ln_y.exp().ln_1p()
    }
}

/// `E[log₂(1 + Z)]` for `Z ~ Frechet(a, β)`.
///
/// With `t = (z/a)^{-β}` the integral becomes
/// `∫₀^∞ log₂(1 + a t^{-1/β}) e^{-t} dt`, which is finite for every `β > 0`.
pub fn ergodic_rate_asymptotic(fp: &FrechetParams, ctl: &QuadControl) -> Result<f64> {
    let (ln_a, inv_beta) = (fp.scale.ln(), 1.0 / fp.shape);
    let r = exp_sinh(|t| ln1p_exp(ln_a - inv_beta * t.ln()) * (-t).exp(), 1.0, ctl.rel_tol, ctl.max_level)?;
    Ok(r.value / std::f64::consts::LN_2)
}

/// Simulated `E[log₂(1 + max of L SIR draws)]`.
pub fn ergodic_rate_mc(s: &Scenario, l: usize, reps: usize, stream: &RandomStream, workers: usize) -> Result<McEstimate> {
    if l == 0 {
        return Err(Error::invalid("L must be at least 1"));
    }
    check_reps(reps)?;
    let sampler = SirSampler::new(s)?;
    let (sum, sum_sq) = par_sum_sq(reps, workers, |r| {
        let mut rng = stream.rng_at(r);
        sampler.sample_max(l, &mut rng).log2_1p()
    })?;
    McEstimate::from_sums(sum, sum_sq, reps)
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// One draw of the `ls` largest order statistics under the limit law,
/// descending: `x_(k) = a·(E₁+…+E_k)^{-1/β}`.
pub fn sample_top_order_stats<R: Rng + ?Sized>(fp: &FrechetParams, ls: usize, rng: &mut R) -> Vec<f64> {
    let mut gamma = 0.0;
    (0..ls)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            gamma += e;
            fp.scale * gamma.powf(-1.0 / fp.shape)
        })
        .collect()
}

/// `E[Σ_{l ≤ Ls} log₂(1 + x_(l))]` under the limiting joint law.
pub fn fas_rate_upper_bound(fp: &FrechetParams, cfg: &FasConfig, stream: &RandomStream, workers: usize) -> Result<McEstimate> {
    cfg.validate()?;
    let (sum, sum_sq) = par_sum_sq(cfg.mc_samples, workers, |i| {
        let mut rng = stream.rng_at(i);
        sample_top_order_stats(fp, cfg.ls, &mut rng).into_iter().map(f64::log2_1p).sum()
    })?;
    McEstimate::from_sums(sum, sum_sq, cfg.mc_samples)
}

/// Simulated rate of keeping the `Ls` best of `L` antennas.
pub fn fas_simulated_rate(s: &Scenario, cfg: &FasConfig, stream: &RandomStream, workers: usize) -> Result<McEstimate> {
    cfg.validate()?;
    let sampler = SirSampler::new(s)?;
    let (sum, sum_sq) = par_sum_sq(cfg.mc_samples, workers, |i| {
        let mut rng = stream.rng_at(i);
        let mut draws: Vec<f64> = (0..cfg.l).map(|_| sampler.sample(&mut rng)).collect();
        if cfg.ls < cfg.l {
            draws.select_nth_unstable_by(cfg.ls - 1, |a, b| b.total_cmp(a));
        }
        draws[..cfg.ls].iter().map(|&x| x.log2_1p()).sum()
    })?;
    McEstimate::from_sums(sum, sum_sq, cfg.mc_samples)
}

/// Histogram KL between `reps` simulated maxima of `fp.l` SIR draws and as
/// many Frechet draws. The two samples use independent streams of `seed`.
pub fn maxima_frechet_kl(s: &Scenario, fp: &FrechetParams, reps: usize, seed: u64, workers: usize, opts: &KlOptions) -> Result<KlReport> {
    let study = MaximaStudy {
        scenario: s.clone(),
        l: fp.l,
        reps,
        seed,
    };
    let maxima = run_maxima_study(&study, workers)?;
    let stream = RandomStream::new(seed).substream(tag::FRECHET);
    let frechet = par_map(reps, workers, |r| fp.sample(&mut stream.rng_at(r)))?;
    empirical_kl_with(&maxima, &frechet, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::DEFAULT_SEED;

    fn fp(scale: f64, shape: f64) -> FrechetParams {
        FrechetParams::new(scale, shape, 20).unwrap()
    }

    #[test]
    fn outage_examples() {
        let p = fp(19.0, 1.0);
        assert!((outage_asymptotic(&p, 19.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(outage_asymptotic(&p, 1e300).unwrap() > 1.0 - 1e-12);
        assert!(outage_asymptotic(&p, 0.0).is_err());
    }

    #[test]
    fn rate_quadrature_properties() {
        let ctl = QuadControl::default();
        let small = ergodic_rate_asymptotic(&fp(1e-12, 2.0), &ctl).unwrap();
        assert!(small < 1e-11);
        let r5 = ergodic_rate_asymptotic(&fp(5.0, 2.0), &ctl).unwrap();
        let r10 = ergodic_rate_asymptotic(&fp(10.0, 2.0), &ctl).unwrap();
        assert!(r10 > r5);
        // Tighter tolerance moves a converged value by less than 1e-8.
        let tight = ergodic_rate_asymptotic(&fp(5.0, 2.0), &QuadControl { rel_tol: 1e-12, ..ctl }).unwrap();
        assert!(((tight - r5) / r5).abs() < 1e-8);
        // Heavy tails (β < 1) still have a finite log moment.
        assert!(ergodic_rate_asymptotic(&fp(3.0, 0.5), &ctl).unwrap().is_finite());
    }

    #[test]
    fn order_statistics_descend() {
        let stream = RandomStream::new(DEFAULT_SEED);
        let draw = sample_top_order_stats(&fp(2.0, 1.5), 6, &mut stream.rng_at(0));
        assert_eq!(draw.len(), 6);
        assert!(draw.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn fas_config_validation() {
        assert!(FasConfig { l: 8, ls: 9, mc_samples: 20_000 }.validate().is_err());
        assert!(FasConfig { l: 8, ls: 0, mc_samples: 20_000 }.validate().is_err());
        assert!(FasConfig { l: 8, ls: 4, mc_samples: 10 }.validate().is_err());
        assert!(FasConfig { l: 8, ls: 8, mc_samples: 20_000 }.validate().is_ok());
    }
}
