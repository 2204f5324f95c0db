//! Small descriptive statistics shared by the analysis modules.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Unbiased (n−1) variance; `None` below two values.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some(ss / (xs.len() - 1) as f64)
}

pub fn sample_std(xs: &[f64]) -> Option<f64> {
    sample_variance(xs).map(libm::sqrt)
}

/// Population (n) variance; `None` for an empty slice.
pub fn population_variance(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank ((i+1) + j) / 2
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: xs.len(),
        });
    }
    let mx = mean(xs).unwrap_or(0.0);
    let my = mean(ys).unwrap_or(0.0);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("correlation"));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: xs.len(),
        });
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Least-squares slope of `ys` on `xs` with non-negative weights.
pub fn weighted_slope(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<f64> {
    let sw: f64 = ws.iter().sum();
    if sw <= 0.0 || xs.len() != ys.len() || xs.len() != ws.len() {
        return None;
    }
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxy += w * (x - mx) * (y - my);
        sxx += w * (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Linear-interpolated quantile of already sorted data, `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Two-sided percentile interval.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// True when the two intervals do not overlap.
    pub fn separated_from(&self, other: &Interval) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }
}

/// Nonparametric bootstrap over one or more independent samples.
///
/// `statistic` receives one resample per input sample and may return
/// `None` when undefined on that resample; such resamples are skipped.
pub fn bootstrap_interval<F>(
    samples: &[&[f64]],
    resamples: usize,
    level: f64,
    seed: u64,
    mut statistic: F,
) -> Option<Interval>
where
    F: FnMut(&[Vec<f64>]) -> Option<f64>,
{
    if samples.iter().any(|s| s.is_empty()) || resamples == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buffers: Vec<Vec<f64>> = samples.iter().map(|s| alloc::vec![0.0; s.len()]).collect();
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for (buf, s) in buffers.iter_mut().zip(samples) {
            for slot in buf.iter_mut() {
                *slot = s[rng.gen_range(0..s.len())];
            }
        }
        if let Some(v) = statistic(&buffers) {
            if v.is_finite() {
                stats.push(v);
            }
        }
    }
    if stats.is_empty() {
        return None;
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Some(Interval {
        lo: quantile_sorted(&stats, alpha)?,
        hi: quantile_sorted(&stats, 1.0 - alpha)?,
    })
}

/// Bootstrap interval for the mean of one sample.
pub fn bootstrap_mean(xs: &[f64], resamples: usize, level: f64, seed: u64) -> Option<Interval> {
    bootstrap_interval(&[xs], resamples, level, seed, |b| mean(&b[0]))
}

/// Bootstrap interval for `mean(a) − mean(b)` with independent resampling.
pub fn bootstrap_mean_difference(a: &[f64], b: &[f64], resamples: usize, level: f64, seed: u64) -> Option<Interval> {
    bootstrap_interval(&[a, b], resamples, level, seed, |s| Some(mean(&s[0])? - mean(&s[1])?))
}

/// Bootstrap interval for `(k_a / n_a) / (k_b / n_b)`. Resampling 0/1
/// indicators with replacement is drawing a binomial count, so no
/// per-element resampling is needed.
pub fn bootstrap_proportion_ratio(
    a: (usize, usize),
    b: (usize, usize),
    resamples: usize,
    level: f64,
    seed: u64,
) -> Option<Interval> {
    if a.1 == 0 || b.1 == 0 || resamples == 0 {
        return None;
    }
    let binomial = |(k, n): (usize, usize)| Binomial::new(n as u64, k as f64 / n as f64).ok();
    let (da, db) = (binomial(a)?, binomial(b)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let ka = da.sample(&mut rng) as f64 / a.1 as f64;
        let kb = db.sample(&mut rng) as f64 / b.1 as f64;
        if kb > 0.0 {
            stats.push(ka / kb);
        }
    }
    if stats.is_empty() {
        return None;
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Some(Interval {
        lo: quantile_sorted(&stats, alpha)?,
        hi: quantile_sorted(&stats, 1.0 - alpha)?,
    })
}
