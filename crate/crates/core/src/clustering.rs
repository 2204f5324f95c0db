//! User classes from K-means over (beauty, favorites per photo, followers).

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{TemporalGraph, UserId};
use crate::metrics::BeautyProfiles;
use crate::stats;

pub const MAX_ITERATIONS: usize = 300;

/// Log-transformed, min-max normalized features of users with photos.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UserFeatures {
    pub users: Vec<UserId>,
    /// Dense graph index of each user.
    pub indices: Vec<usize>,
    /// Raw `(beauty, favorites per photo, followers)` before transform.
    pub raw: Vec<[f64; 3]>,
    pub points: Vec<[f64; 3]>,
    /// Dimensions whose range collapsed; their coordinates are all 0.
    pub degenerate: [bool; 3],
}

/// `(log(1+x) − min) / (max − min)` per dimension over the population.
pub fn log_min_max(raw: &[[f64; 3]]) -> (Vec<[f64; 3]>, [bool; 3]) {
    let logged: Vec<[f64; 3]> = raw.iter().map(|r| r.map(libm::log1p)).collect();
    min_max(&logged)
}

pub fn min_max<const D: usize>(xs: &[[f64; D]]) -> (Vec<[f64; D]>, [bool; D]) {
    let mut lo = [f64::INFINITY; D];
    let mut hi = [f64::NEG_INFINITY; D];
    for x in xs {
        for d in 0..D {
            lo[d] = lo[d].min(x[d]);
            hi[d] = hi[d].max(x[d]);
        }
    }
    let mut degenerate = [false; D];
    for d in 0..D {
        degenerate[d] = hi[d].partial_cmp(&lo[d]) != Some(core::cmp::Ordering::Greater);
    }
    let points = xs
        .iter()
        .map(|x| {
            let mut p = [0.0; D];
            for d in 0..D {
                if !degenerate[d] {
                    p[d] = ((x[d] - lo[d]) / (hi[d] - lo[d])).clamp(0.0, 1.0);
                }
            }
            p
        })
        .collect();
    (points, degenerate)
}

/// Features of every profiled user: mean beauty, favorites received per
/// photo and final follower count.
pub fn features(g: &TemporalGraph, p: &BeautyProfiles) -> UserFeatures {
    let mut users = Vec::new();
    let mut indices = Vec::new();
    let mut raw = Vec::new();
    for (i, u) in g.users().iter().enumerate() {
        let Some(b) = p.get(i) else { continue };
        if u.photos.is_empty() {
            continue;
        }
        users.push(u.id);
        indices.push(i);
        raw.push([
            b,
            u.favorites_received.len() as f64 / u.photos.len() as f64,
            u.follows_in.len() as f64,
        ]);
    }
    let (points, degenerate) = log_min_max(&raw);
    UserFeatures {
        users,
        indices,
        raw,
        points,
        degenerate,
    }
}

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for d in 0..D {
        let t = a[d] - b[d];
        s += t * t;
    }
    s
}

fn nearest<const D: usize>(p: &[f64; D], centroids: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KMeans<const D: usize> {
    #[cfg_attr(feature = "serde", serde(with = "serde_arrays"))]
    pub centroids: Vec<[f64; D]>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    pub iterations: usize,
    /// WCSS after each assignment step.
    pub trace: Vec<f64>,
}

#[cfg(feature = "serde")]
mod serde_arrays {
    use alloc::vec::Vec;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const D: usize>(v: &[[f64; D]], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = v.iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, const D: usize>(d: De) -> Result<Vec<[f64; D]>, De::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        rows.into_iter()
            .map(|r| {
                r.try_into()
                    .map_err(|_| serde::de::Error::custom("centroid has the wrong dimension"))
            })
            .collect()
    }
}

impl<const D: usize> KMeans<D> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = alloc::vec![0; self.k()];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }
}

fn kmeans_plus_plus<const D: usize>(points: &[[f64; D]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; D]> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = points[pick];
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations from a seeded k-means++ start. Stops when assignments
/// no longer change or after [`MAX_ITERATIONS`]. An empty cluster is
/// re-seeded with the point farthest from its current centroid.
pub fn kmeans<const D: usize>(points: &[[f64; D]], k: usize, seed: u64) -> Result<KMeans<D>> {
    let n = points.len();
    if k == 0 {
        return Err(Error::InvalidConfig(alloc::string::String::from(
            "K must be at least 1",
        )));
    }
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let mut assignments = alloc::vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        let mut wcss = 0.0;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (best, d) = nearest(p, &centroids);
            wcss += d;
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        trace.push(wcss);
        if !changed || iterations >= MAX_ITERATIONS {
            break;
        }

        let mut sums = alloc::vec![[0.0; D]; k];
        let mut counts = alloc::vec![0usize; k];
        for (&a, p) in assignments.iter().zip(points) {
            counts[a] += 1;
            for d in 0..D {
                sums[a][d] += p[d];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..D {
                    centroids[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .max_by(|&i, &j| {
                    let di = dist2(&points[i], &centroids[assignments[i]]);
                    let dj = dist2(&points[j], &centroids[assignments[j]]);
                    di.total_cmp(&dj).then(j.cmp(&i))
                })
                .unwrap_or(0);
            centroids[c] = points[far];
            counts[assignments[far]] -= 1;
            assignments[far] = c;
            counts[c] = 1;
        }
    }
    let wcss = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| dist2(p, &centroids[a]))
        .sum();
    Ok(KMeans {
        centroids,
        assignments,
        wcss,
        iterations,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapPoint {
    pub k: usize,
    pub log_w: f64,
    pub expected_log_w: f64,
    pub gap: f64,
    /// `sd · sqrt(1 + 1/B)` over the reference log-dispersions.
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapResult {
    pub k: usize,
    pub points: Vec<GapPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Number of uniform reference data sets.
    pub references: usize,
    pub seed: u64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            k_min: 2,
            k_max: 10,
            references: 10,
            seed: 0,
        }
    }
}

fn log_dispersion(w: f64) -> f64 {
    libm::log(w.max(f64::MIN_POSITIVE))
}

fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^ (x >> 33)
}

/// Gap statistic with uniform references drawn from the data's bounding
/// box. Selects the smallest K with `Gap(K) ≥ Gap(K+1) − s(K+1)`, or
/// `k_max` if none qualifies.
pub fn gap_statistic<const D: usize>(points: &[[f64; D]], cfg: GapConfig) -> Result<GapResult> {
    if cfg.k_min == 0 || cfg.k_max < cfg.k_min {
        return Err(Error::InvalidConfig(alloc::string::String::from("empty K range")));
    }
    if cfg.k_max > points.len() {
        return Err(Error::TooManyClusters {
            k: cfg.k_max,
            n: points.len(),
        });
    }
    let mut lo = [f64::INFINITY; D];
    let mut hi = [f64::NEG_INFINITY; D];
    for p in points {
        for d in 0..D {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let b = cfg.references.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let references: Vec<Vec<[f64; D]>> = (0..b)
        .map(|_| {
            (0..points.len())
                .map(|_| {
                    let mut p = [0.0; D];
                    for d in 0..D {
                        p[d] = lo[d] + (hi[d] - lo[d]) * rng.gen::<f64>();
                    }
                    p
                })
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    for k in cfg.k_min..=cfg.k_max {
        let log_w = log_dispersion(kmeans(points, k, derive_seed(cfg.seed, k as u64, 0))?.wcss);
        let mut ref_logs = Vec::with_capacity(b);
        for (r, data) in references.iter().enumerate() {
            let m = kmeans(data, k, derive_seed(cfg.seed, k as u64, r as u64 + 1))?;
            ref_logs.push(log_dispersion(m.wcss));
        }
        let expected = stats::mean(&ref_logs).unwrap_or(0.0);
        let sd = libm::sqrt(stats::population_variance(&ref_logs).unwrap_or(0.0));
        out.push(GapPoint {
            k,
            log_w,
            expected_log_w: expected,
            gap: expected - log_w,
            s: sd * libm::sqrt(1.0 + 1.0 / b as f64),
        });
    }
    let k = out
        .windows(2)
        .find(|w| w[0].gap >= w[1].gap - w[1].s)
        .map_or(cfg.k_max, |w| w[0].k);
    Ok(GapResult { k, points: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ClusterLabel {
    LowQuality,
    ForlornBeauty,
    Regular,
    Superstar,
}

impl ClusterLabel {
    pub fn name(&self) -> &'static str {
        match self {
            ClusterLabel::LowQuality => "LowQuality",
            ClusterLabel::ForlornBeauty => "ForlornBeauty",
            ClusterLabel::Regular => "Regular",
            ClusterLabel::Superstar => "Superstar",
        }
    }
}

/// Names four `(beauty, favorites per photo, connectivity)` centroids:
/// the most connected is Superstar; of the rest the most beautiful is
/// ForlornBeauty and the least beautiful LowQuality; the remaining one is
/// Regular. Ties prefer higher favorites per photo, then lower cluster
/// index. Returns `None` unless there are exactly four centroids.
pub fn label_clusters(centroids: &[[f64; 3]]) -> Option<[ClusterLabel; 4]> {
    if centroids.len() != 4 {
        return None;
    }
    let by = |dim: usize, ascending: bool| {
        move |a: &usize, b: &usize| {
            let (x, y) = (centroids[*a], centroids[*b]);
            let primary = if ascending {
                y[dim].total_cmp(&x[dim])
            } else {
                x[dim].total_cmp(&y[dim])
            };
            primary.then(x[1].total_cmp(&y[1])).then(b.cmp(a))
        }
    };
    let mut remaining: Vec<usize> = (0..4).collect();
    let mut labels = [ClusterLabel::Regular; 4];

    let take = |remaining: &mut Vec<usize>, dim: usize, ascending: bool| {
        let best = remaining.iter().copied().max_by(by(dim, ascending)).expect("non-empty");
        remaining.retain(|&c| c != best);
        best
    };
    labels[take(&mut remaining, 2, false)] = ClusterLabel::Superstar;
    labels[take(&mut remaining, 0, false)] = ClusterLabel::ForlornBeauty;
    labels[take(&mut remaining, 0, true)] = ClusterLabel::LowQuality;
    labels[remaining[0]] = ClusterLabel::Regular;
    Some(labels)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<[f64; 3]>,
    pub assignments: Vec<usize>,
    pub labels: Option<[ClusterLabel; 4]>,
}

impl ClusterModel {
    pub fn from_kmeans(m: KMeans<3>) -> Self {
        let labels = label_clusters(&m.centroids);
        ClusterModel {
            k: m.k(),
            centroids: m.centroids,
            assignments: m.assignments,
            labels,
        }
    }

    pub fn label_of(&self, cluster: usize) -> Option<ClusterLabel> {
        self.labels.map(|l| l[cluster])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn k_one_is_the_mean() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]];
        let m = kmeans(&pts, 1, 0).unwrap();
        assert!((m.centroids[0][0] - 1.0).abs() < 1e-12);
        assert!((m.centroids[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_pairs_are_recovered() {
        let pts = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [5.0, 5.0, 5.0], [5.0, 5.0, 5.0]];
        for seed in 0..10 {
            let m = kmeans(&pts, 2, seed).unwrap();
            let mut c = m.centroids.clone();
            c.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert_eq!(c, vec![[0.0; 3], [5.0; 3]]);
            assert_eq!(m.wcss, 0.0);
        }
    }

    #[test]
    fn k_equal_n_has_zero_dispersion() {
        let pts = [[0.1], [0.5], [0.9], [0.3]];
        let m = kmeans(&pts, 4, 1).unwrap();
        assert_eq!(m.wcss, 0.0);
        assert_eq!(kmeans(&pts, 5, 1), Err(Error::TooManyClusters { k: 5, n: 4 }));
    }

    #[test]
    fn table_two_centroids_are_labeled_like_the_table() {
        let c = [
            [0.17, 0.00, 0.06],
            [0.42, 0.01, 0.10],
            [0.25, 0.01, 0.21],
            [0.42, 0.15, 0.35],
        ];
        assert_eq!(
            label_clusters(&c).unwrap(),
            [
                ClusterLabel::LowQuality,
                ClusterLabel::ForlornBeauty,
                ClusterLabel::Regular,
                ClusterLabel::Superstar
            ]
        );
    }

    #[test]
    fn labeling_rule_application() {
        let c = [[0.1, 0.0, 0.0], [0.9, 0.0, 0.1], [0.5, 0.05, 0.5], [0.3, 0.01, 0.2]];
        assert_eq!(
            label_clusters(&c).unwrap(),
            [
                ClusterLabel::LowQuality,
                ClusterLabel::ForlornBeauty,
                ClusterLabel::Superstar,
                ClusterLabel::Regular
            ]
        );
    }

    #[test]
    fn identical_centroids_label_deterministically() {
        let c = [[0.3, 0.1, 0.2]; 4];
        let l = label_clusters(&c).unwrap();
        assert_eq!(l, label_clusters(&c).unwrap());
        let mut sorted = l;
        sorted.sort();
        assert_eq!(
            sorted,
            [
                ClusterLabel::LowQuality,
                ClusterLabel::ForlornBeauty,
                ClusterLabel::Regular,
                ClusterLabel::Superstar
            ]
        );
        assert_eq!(label_clusters(&c[..3]), None);
    }

    #[test]
    fn normalization_cases() {
        let (p, deg) = log_min_max(&[[0.5, 2.0, 10.0]]);
        assert_eq!(p, vec![[0.0; 3]]);
        assert_eq!(deg, [true; 3]);

        let (p, deg) = log_min_max(&[[0.1, 0.0, 1.0], [0.5, 0.5, 100.0], [0.3, 0.25, 3.0]]);
        assert_eq!(deg, [false; 3]);
        assert_eq!(p[1], [1.0; 3]);
        assert_eq!(p[0], [0.0; 3]);
    }

    #[test]
    fn min_max_is_idempotent() {
        let xs = [[0.2, 5.0], [0.4, 1.0], [0.9, 3.0]];
        let (once, _) = min_max(&xs);
        let (twice, _) = min_max(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn favs_per_photo_feature() {
        use crate::graph::{FavoriteEvent, GraphBuilder, PhotoEvent, PhotoId};
        let mut b = GraphBuilder::new();
        for k in 0..4 {
            b.add_photo(PhotoEvent {
                owner: UserId(1),
                photo: PhotoId(k),
                t: 0,
                beauty: 0.5,
            })
            .unwrap();
        }
        for a in [2, 3] {
            b.add_favorite(FavoriteEvent {
                actor: UserId(a),
                photo: PhotoId(0),
                t: 1,
            })
            .unwrap();
        }
        let (g, _) = b.build().unwrap();
        let f = features(&g, &crate::metrics::overall_profiles(&g));
        assert_eq!(f.users, vec![UserId(1)]);
        assert_eq!(f.raw[0][1], 0.5);
        assert_eq!(f.degenerate, [true; 3]);
    }
}
