//! Empirical distribution tools: ECDF, Kolmogorov–Smirnov distance,
//! Freedman–Diaconis histograms and the histogram KL divergence.

use serde::Serialize;

use crate::error::{Error, Result};

/// Fraction of `sorted` that is `≤ z`.
pub fn ecdf(sorted: &[f64], z: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(sorted.partition_point(|&v| v <= z) as f64 / sorted.len() as f64)
}

fn sorted_copy(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// `sup_z |ECDF(z) - F(z)|`, checking both sides of every step.
pub fn ks_distance<F: FnMut(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(ks_distance_sorted(&sorted_copy(samples), cdf))
}

/// [`ks_distance`] for already sorted samples.
pub fn ks_distance_sorted<F: FnMut(f64) -> f64>(sorted: &[f64], mut cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        // Ties form a single step.
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let f = cdf(sorted[i]);
        worst = worst.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    worst
}

/// Two-sample KS statistic `sup |E_a - E_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (a, b) = (sorted_copy(a), sorted_copy(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let z = a[i].min(b[j]);
        while i < a.len() && a[i] <= z {
            i += 1;
        }
        while j < b.len() && b[j] <= z {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(worst)
}

/// Upper bound on the KS distance when the reference CDF is expensive.
///
/// The CDF is evaluated only at every `stride`-th order statistic. Between
/// two such points `z_a < z_b` both the ECDF and the CDF are monotone, so
/// the deviation is at most `max(F(z_b) - E(z_a), E(z_b⁻) - F(z_a))`. The
/// returned bound exceeds the true distance by at most about `stride/n`
/// plus the CDF increment across a gap.
pub fn ks_upper_bound_sorted<F: FnMut(f64) -> Result<f64>>(sorted: &[f64], stride: usize, mut cdf: F) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = sorted.len();
    let nf = n as f64;
    let stride = stride.max(1);
    let mut knots: Vec<usize> = (0..n).step_by(stride).collect();
    if *knots.last().expect("non-empty") != n - 1 {
        knots.push(n - 1);
    }
    // At knot index i: E(z⁻) ≥ (first index of value z)/n, E(z) = (last+1)/n.
    let below = |i: usize| sorted.partition_point(|&v| v < sorted[i]) as f64 / nf;
    let at = |i: usize| sorted.partition_point(|&v| v <= sorted[i]) as f64 / nf;
    let mut worst: f64 = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &i in &knots {
        let f = cdf(sorted[i])?;
        let (e_below, e_at) = (below(i), at(i));
        worst = worst.max((f - e_below).abs()).max((e_at - f).abs());
        if let Some((f_prev, e_prev)) = prev {
            // Open interval between the previous knot and this one.
            worst = worst.max(f - e_prev).max(e_below - f_prev);
        } else {
            // Left of the first sample the ECDF is zero.
            worst = worst.max(f);
        }
        prev = Some((f, e_at));
    }
    Ok(worst)
}

/// Linear-interpolation quantile of sorted data (the common "type 7").
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Freedman–Diaconis bin count `⌈(max - min) / (2·IQR·n^{-1/3})⌉`, at least 1.
pub fn fd_bins(samples: &[f64]) -> Result<usize> {
    fd_bins_sorted(&sorted_copy(samples))
}

pub fn fd_bins_sorted(sorted: &[f64]) -> Result<usize> {
    let n = sorted.len();
    if n < 4 {
        return Err(Error::invalid(format!("Freedman-Diaconis rule needs n ≥ 4, got {n}")));
    }
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    if !(iqr > 0.0) {
        return Err(Error::DegenerateSample("zero interquartile range"));
    }
    let range = sorted[n - 1] - sorted[0];
    let bins = (range * (n as f64).cbrt() / (2.0 * iqr)).ceil();
    if !bins.is_finite() {
        return Err(Error::DegenerateSample("non-finite sample range"));
    }
    Ok((bins as usize).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub counts: Vec<u64>,
    /// Number of samples offered, including any outside `[lo, hi]`.
    pub n: usize,
}

impl Histogram {
    /// Equal-width bins on `[lo, hi]`; the top edge belongs to the last bin.
    pub fn new(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi) || bins == 0 {
            return Err(Error::invalid("histogram needs lo < hi and at least one bin"));
        }
        let mut counts = vec![0u64; bins];
        for &x in samples {
            if let Some(k) = bin_index(x, lo, hi, bins) {
                counts[k] += 1;
            }
        }
        Ok(Histogram {
            lo,
            hi,
            bins,
            counts,
            n: samples.len(),
        })
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> Option<usize> {
    if !(x >= lo && x <= hi) {
        return None;
    }
    let k = ((x - lo) / (hi - lo) * bins as f64).floor();
    Some((k as usize).min(bins - 1))
}

/// Non-empty bins as `(bin, count)`, ascending. Used when `bins` is too
/// large for a dense count vector (heavy tails make this common).
fn sparse_counts(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(usize, u64)> {
    let mut idx: Vec<usize> = samples.iter().filter_map(|&x| bin_index(x, lo, hi, bins)).collect();
    idx.sort_unstable();
    let mut out: Vec<(usize, u64)> = Vec::new();
    for k in idx {
        match out.last_mut() {
            Some((b, c)) if *b == k => *c += 1,
            _ => out.push((k, 1)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlOptions {
    /// Count substituted for an empty reference bin.
    pub pseudo_count: f64,
    /// Clip both samples to this upper quantile of their union before
    /// binning. Off by default.
    pub winsorize: Option<f64>,
}

impl Default for KlOptions {
    fn default() -> Self {
        KlOptions {
            pseudo_count: 0.5,
            winsorize: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlReport {
    /// Divergence, clamped at zero.
    pub value: f64,
    /// Unclamped sum.
    pub raw: f64,
    pub bins: usize,
    pub winsorized: bool,
}

/// Histogram estimate of `D(P‖Q)` from equal-size samples.
pub fn empirical_kl(p_samples: &[f64], q_samples: &[f64]) -> Result<f64> {
    Ok(empirical_kl_with(p_samples, q_samples, &KlOptions::default())?.value)
}

pub fn empirical_kl_with(p_samples: &[f64], q_samples: &[f64], opts: &KlOptions) -> Result<KlReport> {
    let n = p_samples.len();
    if n != q_samples.len() {
        return Err(Error::invalid(format!("sample sizes differ: {} vs {}", n, q_samples.len())));
    }
    if n < 100 {
        return Err(Error::invalid(format!("KL estimate needs n ≥ 100, got {n}")));
    }
    if !(opts.pseudo_count > 0.0) {
        return Err(Error::invalid("pseudo-count must be positive"));
    }
    let mut p = sorted_copy(p_samples);
    let mut q = sorted_copy(q_samples);
    if let Some(level) = opts.winsorize {
        if !(0.0 < level && level < 1.0) {
            return Err(Error::domain("winsorization level", level));
        }
        let mut union = [p.as_slice(), q.as_slice()].concat();
        union.sort_unstable_by(f64::total_cmp);
        let cap = quantile_sorted(&union, level);
        for v in p.iter_mut().chain(q.iter_mut()) {
            *v = v.min(cap);
        }
    }
    let w = match (fd_bins_sorted(&p), fd_bins_sorted(&q)) {
        (Ok(a), Ok(b)) => a.max(b),
        (Ok(a), Err(_)) | (Err(_), Ok(a)) => a,
        (Err(e), Err(_)) => return Err(e),
    };
    let lo = p[0].min(q[0]);
    let hi = p[n - 1].max(q[n - 1]);
    if !(lo < hi) {
        return Err(Error::DegenerateSample("both samples are constant and equal"));
    }
    let u = sparse_counts(&p, lo, hi, w);
    let v = sparse_counts(&q, lo, hi, w);
    let nf = n as f64;
    let mut raw = 0.0;
    let mut j = 0;
    for &(bin, count) in &u {
        while j < v.len() && v[j].0 < bin {
            j += 1;
        }
        let vc = if j < v.len() && v[j].0 == bin { v[j].1 as f64 } else { opts.pseudo_count };
        let uc = count as f64;
        raw += uc / nf * (uc / vc).ln();
    }
    debug_assert!(raw >= -1e-6, "histogram KL went negative: {raw}");
    Ok(KlReport {
        value: raw.max(0.0),
        raw,
        bins: w,
        winsorized: opts.winsorize.is_some(),
    })
}
