//! Per-user beauty aggregates and network-level mixing metrics.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{GraphSnapshot, TemporalGraph, UserId, Week};
use crate::stats;

/// Mean user beauty keyed by dense user index; `None` for users without
/// photos in the considered range.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BeautyProfiles {
    values: Vec<Option<f64>>,
}

impl BeautyProfiles {
    pub fn from_values(values: Vec<Option<f64>>) -> Self {
        BeautyProfiles { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.values.get(index).copied().flatten()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// `(index, beauty)` for every profiled user, in index order.
    pub fn profiled(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.map(|b| (i, b)))
    }

    pub fn profiled_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Overall mean beauty b̄(i) of every user.
pub fn overall_profiles(g: &TemporalGraph) -> BeautyProfiles {
    BeautyProfiles::from_values(
        g.users()
            .iter()
            .map(|u| {
                let n = u.photos.len();
                (n > 0).then(|| u.photos.iter().map(|p| p.beauty).sum::<f64>() / n as f64)
            })
            .collect(),
    )
}

/// Cumulative mean beauty b̄^w(i) over weeks ≤ `w` of every user.
pub fn profiles_through(g: &TemporalGraph, w: Week) -> BeautyProfiles {
    BeautyProfiles::from_values(g.users().iter().map(|u| u.photos_through(w).mean()).collect())
}

/// Mean beauty of `id`'s photos, optionally restricted to weeks ≤ `up_to`.
/// `Ok(None)` when no photo falls in range.
pub fn user_beauty(g: &TemporalGraph, id: UserId, up_to: Option<Week>) -> Result<Option<f64>> {
    let u = g.record(id)?;
    Ok(match up_to {
        Some(w) => u.photos_through(w).mean(),
        None => {
            let n = u.photos.len();
            (n > 0).then(|| u.photos.iter().map(|p| p.beauty).sum::<f64>() / n as f64)
        }
    })
}

/// Mean beauty b^w(i) of photos uploaded during week `w` only.
pub fn weekly_beauty(g: &TemporalGraph, id: UserId, w: Week) -> Result<Option<f64>> {
    Ok(g.record(id)?.photos_in(w).mean())
}

/// All beauty aggregates of one user.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BeautyProfile {
    pub user: UserId,
    pub overall: f64,
    /// b^t per active week.
    pub weekly: Vec<(Week, f64)>,
    /// b̄^t at each active week.
    pub cumulative: Vec<(Week, f64)>,
}

pub fn beauty_profile(g: &TemporalGraph, id: UserId) -> Result<Option<BeautyProfile>> {
    let u = g.record(id)?;
    if u.photos.is_empty() {
        return Ok(None);
    }
    let mut weekly = Vec::with_capacity(u.weekly().len());
    let mut cumulative = Vec::with_capacity(u.weekly().len());
    let (mut c, mut s) = (0u32, 0.0);
    for x in u.weekly() {
        weekly.push((x.week, x.sum / f64::from(x.count)));
        c += x.count;
        s += x.sum;
        cumulative.push((x.week, s / f64::from(c)));
    }
    Ok(Some(BeautyProfile {
        user: id,
        overall: s / f64::from(c),
        weekly,
        cumulative,
    }))
}

pub(crate) fn check_resource(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let mut total = 0.0;
    for &x in values {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::InvalidValue(x));
        }
        total += x;
    }
    if total == 0.0 {
        return Err(Error::AllZero);
    }
    Ok(total)
}

/// Gini index, mean-absolute-difference form Σ|xi−xj| / (2 n² x̄),
/// evaluated in O(n log n) via the sorted-rank identity.
pub fn gini(values: &[f64]) -> Result<f64> {
    let total = check_resource(values)?;
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let weighted: f64 = v
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x)
        .sum();
    Ok((weighted / (n * total)).max(0.0))
}

/// Cumulative (population share, resource share) over ascending values,
/// from (0, 0) to (1, 1).
pub fn lorenz_curve(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let total = check_resource(values)?;
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut points = Vec::with_capacity(n + 1);
    points.push((0.0, 0.0));
    let mut acc = 0.0;
    for (i, x) in v.iter().enumerate() {
        acc += x;
        let share = if i + 1 == n { 1.0 } else { acc / total };
        points.push(((i + 1) as f64 / n as f64, share));
    }
    Ok(points)
}

/// Gini as one minus twice the trapezoidal area under a Lorenz curve.
pub fn gini_from_lorenz(points: &[(f64, f64)]) -> f64 {
    let area: f64 = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    1.0 - 2.0 * area
}

/// Half-open equal-width bin of a value in [0, 1]; the last bin is closed.
pub fn bin_index(value: f64, bins: usize) -> usize {
    let b = libm::floor(value * bins as f64);
    if b <= 0.0 {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumBin {
    pub index: usize,
    pub center: f64,
    /// Mean over the bin's users of their mean out-neighbor beauty.
    pub b_nn: f64,
    pub count: usize,
    /// Population variance of the per-user neighbor means in the bin.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumCurve {
    pub bins: usize,
    /// Non-empty bins in ascending order.
    pub points: Vec<SpectrumBin>,
}

impl SpectrumCurve {
    pub fn population(&self) -> usize {
        self.points.iter().map(|p| p.count).sum()
    }

    /// Spearman correlation between bin center and b_nn.
    pub fn rank_trend(&self) -> Result<f64> {
        let ks: Vec<f64> = self.points.iter().map(|p| p.center).collect();
        let bs: Vec<f64> = self.points.iter().map(|p| p.b_nn).collect();
        stats::spearman_rho(&ks, &bs)
    }

    /// Population-weighted least-squares slope of b_nn on the bin center.
    pub fn weighted_slope(&self) -> Option<f64> {
        let ks: Vec<f64> = self.points.iter().map(|p| p.center).collect();
        let bs: Vec<f64> = self.points.iter().map(|p| p.b_nn).collect();
        let ws: Vec<f64> = self.points.iter().map(|p| p.count as f64).collect();
        stats::weighted_slope(&ks, &bs, &ws)
    }
}

/// Mean profiled out-neighbor beauty of `index`, if any neighbor is profiled.
pub fn out_neighbor_mean(s: &GraphSnapshot, p: &BeautyProfiles, index: usize) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for &j in s.out_neighbors(index) {
        if let Some(b) = p.get(j as usize) {
            sum += b;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Average out-neighbor beauty as a function of own beauty, over `bins`
/// equal-width bins. Users whose followees are all unprofiled are left out.
pub fn correlation_spectrum(s: &GraphSnapshot, p: &BeautyProfiles, bins: usize) -> SpectrumCurve {
    let bins = bins.max(1);
    let mut members: Vec<Vec<f64>> = alloc::vec![Vec::new(); bins];
    for i in 0..s.node_count() {
        let Some(own) = p.get(i) else { continue };
        if let Some(nn) = out_neighbor_mean(s, p, i) {
            members[bin_index(own, bins)].push(nn);
        }
    }
    let points = members
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(index, m)| SpectrumBin {
            index,
            center: (index as f64 + 0.5) / bins as f64,
            b_nn: stats::mean(m).unwrap_or(0.0),
            count: m.len(),
            variance: stats::population_variance(m).unwrap_or(0.0),
        })
        .collect();
    SpectrumCurve { bins, points }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Threshold {
    Mean,
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IllusionReport {
    pub threshold: f64,
    /// Fraction of profiled users strictly above the threshold.
    pub global_fraction: f64,
    /// `(index, fraction of profiled followees above the threshold)` for
    /// every user with at least one profiled followee.
    pub neighbor_fractions: Vec<(usize, f64)>,
    /// Share of those users whose neighbor fraction exceeds the global one.
    pub share: f64,
}

impl IllusionReport {
    pub fn excess(&self) -> f64 {
        self.share - self.global_fraction
    }
}

pub fn majority_illusion(s: &GraphSnapshot, p: &BeautyProfiles, threshold: Threshold) -> Result<IllusionReport> {
    let values: Vec<f64> = p.profiled().map(|(_, b)| b).collect();
    if values.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = match threshold {
        // Clamping keeps the mean of identical values exact.
        Threshold::Mean => stats::mean(&values).unwrap_or(lo).clamp(lo, hi),
        Threshold::Median => stats::median(&values).unwrap_or(lo),
        Threshold::Fixed(t) => t,
    };
    let above = values.iter().filter(|&&b| b > threshold).count();
    let global_fraction = above as f64 / values.len() as f64;

    let mut neighbor_fractions = Vec::new();
    let mut exceeding = 0usize;
    for i in 0..s.node_count() {
        let (mut n, mut k) = (0usize, 0usize);
        for &j in s.out_neighbors(i) {
            if let Some(b) = p.get(j as usize) {
                n += 1;
                if b > threshold {
                    k += 1;
                }
            }
        }
        if n == 0 {
            continue;
        }
        let f = k as f64 / n as f64;
        if f > global_fraction {
            exceeding += 1;
        }
        neighbor_fractions.push((i, f));
    }
    let share = if neighbor_fractions.is_empty() {
        0.0
    } else {
        exceeding as f64 / neighbor_fractions.len() as f64
    };
    Ok(IllusionReport {
        threshold,
        global_fraction,
        neighbor_fractions,
        share,
    })
}

/// Uniformly permutes beauty values among profiled users; unprofiled users
/// stay unprofiled and the topology is untouched.
pub fn shuffle_null_model(p: &BeautyProfiles, seed: u64) -> BeautyProfiles {
    let slots: Vec<usize> = p.profiled().map(|(i, _)| i).collect();
    let mut values: Vec<f64> = p.profiled().map(|(_, b)| b).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    values.shuffle(&mut rng);
    let mut out = alloc::vec![None; p.len()];
    for (slot, v) in slots.into_iter().zip(values) {
        out[slot] = Some(v);
    }
    BeautyProfiles::from_values(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    In,
    Out,
}

/// Spearman correlation between degree and user beauty over profiled users.
pub fn degree_beauty_correlation(s: &GraphSnapshot, p: &BeautyProfiles, direction: Direction) -> Result<f64> {
    let mut degrees = Vec::new();
    let mut beauties = Vec::new();
    for (i, b) in p.profiled() {
        if i >= s.node_count() {
            break;
        }
        let d = match direction {
            Direction::In => s.in_degree(i),
            Direction::Out => s.out_degree(i),
        };
        degrees.push(d as f64);
        beauties.push(b);
    }
    stats::spearman_rho(&degrees, &beauties)
}
