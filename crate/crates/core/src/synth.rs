//! Seeded synthetic event streams with planted effects, plus brute-force
//! reference implementations used to cross-check the fast paths.
//!
//! Generative rules:
//!
//! * User quality `q` is a normal draw clipped to [0, 1]; with probability
//!   `beauty_tail` an exponential excess is added. Photo beauty is
//!   `q + shift + noise`, clipped to [0, 1].
//! * Attractiveness `a` is Pareto with tail exponent `degree_exponent − 1`.
//!   `q` and `a` are coupled through a Gaussian copula whose correlation is
//!   calibrated so the Spearman correlation between expected in-degree and
//!   `q` hits `degree_beauty_rho`.
//! * Out-degrees follow a discrete power law with exponent
//!   `degree_exponent` and minimum `min_out_degree`. Half of a user's
//!   follows happen in the join week, the rest in uniformly drawn later
//!   weeks. Targets are drawn proportionally to attractiveness among
//!   already-joined users. With probability `assortativity` a draw instead
//!   picks a quality level with weight `exp(−(ln q_j − ln p)² / 2h²)`, where
//!   `p = q · (1 + taste)` is the user's preferred level and `h` is
//!   `assortative_width`, scaled by the level's mean attractiveness, then a
//!   user at that level uniformly. The
//!   copula correlation is refined until planned in-degree reaches the
//!   target rank correlation with quality.
//! * Influence: in the week after a user creates links, photo beauty shifts
//!   by `influence_strength · max(0, mean q of the new followees − q)`.
//! * Activity alternates between upload weeks and idle spells of mean
//!   length `dormancy_weeks`, with long-run upload fraction `activity`.
//! * Churn: every week after joining a user leaves for good with
//!   probability `base_churn · (1 + churn_imbalance_strength · |δ|)`, where δ is
//!   the relative gap between the mean quality of current followees and `q`.
//! * Superstars (the most attractive `superstar_fraction` of users) get
//!   [`SUPERSTAR_BOOST`] times more attractiveness and favorites and a
//!   quality uplift of one and a half standard deviations.
//! * Favorites per photo are Poisson with a mean proportional to the
//!   owner's attractiveness and quality; actors are uniform.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{
    FavoriteEvent, FollowEvent, GraphBuilder, GraphSnapshot, GroupEvent, GroupId, IngestWarning, PhotoEvent, PhotoId,
    TemporalGraph, UserId, SECONDS_PER_WEEK,
};
use crate::metrics::{self, BeautyProfiles, SpectrumBin, SpectrumCurve};
use crate::stats;

pub const SUPERSTAR_BOOST: f64 = 5.0;
const MAX_OUT_DEGREE: usize = 1000;
const MAX_DRAWS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_weeks: u32,
    /// Mean uploads in a week with activity; at least 1.
    pub photos_per_week: f64,
    /// Long-run fraction of weeks with uploads while not churned.
    pub activity: f64,
    /// Mean length in weeks of an idle spell; needs
    /// `activity · dormancy_weeks ≥ 1 − activity`.
    pub dormancy_weeks: f64,
    pub beauty_mean: f64,
    pub beauty_sd: f64,
    /// Probability of an exponential right-tail excess on `q`.
    pub beauty_tail: f64,
    pub beauty_tail_scale: f64,
    pub photo_noise: f64,
    pub degree_exponent: f64,
    pub min_out_degree: usize,
    pub degree_beauty_rho: f64,
    pub assortativity: f64,
    /// Standard deviation of the relative offset of a user's preferred
    /// followee quality from their own.
    pub taste_sd: f64,
    /// Kernel width on the log-quality scale.
    pub assortative_width: f64,
    pub influence_strength: f64,
    pub base_churn: f64,
    /// Relative uplift of the churn hazard per unit of `|δ|`.
    pub churn_imbalance_strength: f64,
    pub superstar_fraction: f64,
    pub favorites_per_photo: f64,
    pub groups_per_user: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 2000,
            n_weeks: 52,
            photos_per_week: 2.0,
            activity: 0.8,
            dormancy_weeks: 8.0,
            beauty_mean: 0.26,
            beauty_sd: 0.08,
            beauty_tail: 0.0,
            beauty_tail_scale: 0.1,
            photo_noise: 0.01,
            degree_exponent: 2.5,
            min_out_degree: 6,
            degree_beauty_rho: 0.25,
            assortativity: 0.3,
            taste_sd: 0.06,
            assortative_width: 0.05,
            influence_strength: 0.0,
            base_churn: 0.005,
            churn_imbalance_strength: 0.0,
            superstar_fraction: 0.02,
            favorites_per_photo: 0.5,
            groups_per_user: 2.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<&str> = Vec::new();
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if self.n_users < 2 {
            bad.push("n_users");
        }
        if self.n_weeks == 0 {
            bad.push("n_weeks");
        }
        if !(self.photos_per_week.is_finite() && self.photos_per_week >= 1.0) {
            bad.push("photos_per_week");
        }
        if !prob(self.activity) || self.activity == 0.0 {
            bad.push("activity");
        }
        if !(self.dormancy_weeks >= 1.0 && self.dormancy_weeks.is_finite())
            || self.activity * self.dormancy_weeks < 1.0 - self.activity
        {
            bad.push("dormancy_weeks");
        }
        if !prob(self.beauty_mean) {
            bad.push("beauty_mean");
        }
        if !nonneg(self.beauty_sd) {
            bad.push("beauty_sd");
        }
        if !prob(self.beauty_tail) {
            bad.push("beauty_tail");
        }
        if !(self.beauty_tail_scale.is_finite() && self.beauty_tail_scale > 0.0) {
            bad.push("beauty_tail_scale");
        }
        if !nonneg(self.photo_noise) {
            bad.push("photo_noise");
        }
        if !(self.degree_exponent.is_finite() && self.degree_exponent > 1.0) {
            bad.push("degree_exponent");
        }
        if self.min_out_degree == 0 {
            bad.push("min_out_degree");
        }
        if !(self.degree_beauty_rho.is_finite() && self.degree_beauty_rho.abs() < 1.0) {
            bad.push("degree_beauty_rho");
        }
        if !prob(self.assortativity) {
            bad.push("assortativity");
        }
        if !nonneg(self.taste_sd) {
            bad.push("taste_sd");
        }
        if !(self.assortative_width.is_finite() && self.assortative_width > 0.0) {
            bad.push("assortative_width");
        }
        if !nonneg(self.influence_strength) {
            bad.push("influence_strength");
        }
        if !prob(self.base_churn) {
            bad.push("base_churn");
        }
        if !nonneg(self.churn_imbalance_strength) {
            bad.push("churn_imbalance_strength");
        }
        if !prob(self.superstar_fraction) {
            bad.push("superstar_fraction");
        }
        if !nonneg(self.favorites_per_photo) {
            bad.push("favorites_per_photo");
        }
        if !nonneg(self.groups_per_user) {
            bad.push("groups_per_user");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid fields: {}", bad.join(", "))))
        }
    }
}

/// The four ingest streams, each sorted by timestamp.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventStreams {
    pub follows: Vec<FollowEvent>,
    pub photos: Vec<PhotoEvent>,
    pub favorites: Vec<FavoriteEvent>,
    pub groups: Vec<GroupEvent>,
}

impl EventStreams {
    /// Ingests the streams into a temporal graph.
    pub fn build_graph(&self) -> Result<(TemporalGraph, Vec<IngestWarning>)> {
        let mut b = GraphBuilder::new();
        for e in &self.follows {
            b.add_follow(*e)?;
        }
        for e in &self.photos {
            b.add_photo(*e)?;
        }
        for e in &self.favorites {
            b.add_favorite(*e)?;
        }
        for e in &self.groups {
            b.add_group(*e)?;
        }
        b.build()
    }
}

/// Latent per-user parameters behind a generated population.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Population {
    pub quality: Vec<f64>,
    pub attractiveness: Vec<f64>,
    pub out_degree: Vec<usize>,
    pub join_week: Vec<u32>,
    /// Sorted weeks of each user's planned follows.
    pub link_weeks: Vec<Vec<u32>>,
    pub superstar: Vec<bool>,
    /// Week in which the user churned, if any.
    pub churn_week: Vec<Option<u32>>,
    /// Copula correlation selected by calibration.
    pub copula_r: f64,
}

fn mix(seed: u64, stream: u64, index: u64) -> u64 {
    let mut x = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, stream, index))
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
}

/// Pareto(1, γ−1) through its survival function, computed from the upper
/// normal tail to keep precision for large z.
fn pareto_from_normal(z: f64, exponent: f64) -> f64 {
    let tail = 0.5 * libm::erfc(z / core::f64::consts::SQRT_2);
    libm::pow(tail.max(1e-300), -1.0 / (exponent - 1.0))
}

struct Latent {
    z_a: Vec<f64>,
    eps: Vec<f64>,
    tail: Vec<f64>,
    superstar: Vec<bool>,
}

fn quality_from(cfg: &SynthConfig, l: &Latent, r: f64) -> Vec<f64> {
    let s = libm::sqrt(1.0 - r * r);
    (0..cfg.n_users)
        .map(|i| {
            let z = r * l.z_a[i] + s * l.eps[i];
            let mut q = cfg.beauty_mean + cfg.beauty_sd * z + l.tail[i];
            if l.superstar[i] {
                q += 1.5 * cfg.beauty_sd;
            }
            q.clamp(0.0, 1.0)
        })
        .collect()
}

/// Bisection on the copula correlation so that Spearman(simulated
/// in-degree, q) matches the target. Latent draws are held fixed, which
/// makes the objective monotone up to ties.
fn calibrate(cfg: &SynthConfig, l: &Latent, indegree: &[f64]) -> f64 {
    let target = cfg.degree_beauty_rho;
    let rho = |r: f64| stats::spearman_rho(indegree, &quality_from(cfg, l, r)).unwrap_or(0.0);
    let (mut lo, mut hi) = (-0.999, 0.999);
    if rho(hi) <= target {
        return hi;
    }
    if rho(lo) >= target {
        return lo;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if rho(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

struct Sampler {
    cumulative: Vec<f64>,
}

impl Sampler {
    fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Sampler { cumulative }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Option<usize> {
        let total = *self.cumulative.last()?;
        if total.is_nan() || total <= 0.0 {
            return None;
        }
        let x = rng.gen::<f64>() * total;
        Some(
            self.cumulative
                .partition_point(|&c| c <= x)
                .min(self.cumulative.len() - 1),
        )
    }
}

/// Half of the follows in the join week, the rest uniformly later.
fn follow_weeks(cfg: &SynthConfig, join: u32, d: usize, i: usize) -> Vec<u32> {
    let mut rng = rng_for(cfg.seed, 5, i as u64);
    let mut weeks: Vec<u32> = (0..d)
        .map(|k| {
            if k < d.div_ceil(2) || join + 1 >= cfg.n_weeks {
                join
            } else {
                rng.gen_range(join + 1..cfg.n_weeks)
            }
        })
        .collect();
    weeks.sort_unstable();
    weeks
}

/// Poisson in-degrees under attractiveness-proportional targeting, where
/// a link created in week `w` can only reach users who joined by `w`.
fn simulated_indegree(
    cfg: &SynthConfig,
    attractiveness: &[f64],
    join_week: &[u32],
    link_weeks: &[Vec<u32>],
) -> Vec<f64> {
    let weeks = cfg.n_weeks as usize;
    let mut links = vec![0.0; weeks];
    for lw in link_weeks {
        for &w in lw {
            links[w as usize] += 1.0;
        }
    }
    let mut joined = vec![0.0; weeks];
    for (a, &j) in attractiveness.iter().zip(join_week) {
        joined[j as usize] += a;
    }
    let mut acc = 0.0;
    let mut per_unit = vec![0.0; weeks];
    for w in 0..weeks {
        acc += joined[w];
        per_unit[w] = if acc > 0.0 { links[w] / acc } else { 0.0 };
    }
    // reach[t]: expected links per unit attractiveness from weeks ≥ t.
    let mut reach = vec![0.0; weeks + 1];
    for w in (0..weeks).rev() {
        reach[w] = reach[w + 1] + per_unit[w];
    }
    let mut sim = rng_for(cfg.seed, 1, 0);
    attractiveness
        .iter()
        .zip(join_week)
        .map(|(a, &j)| poisson(&mut sim, a * reach[j as usize]) as f64)
        .collect()
}

fn population(cfg: &SynthConfig) -> (Population, Vec<f64>, Latent) {
    let n = cfg.n_users;
    let mut rng = rng_for(cfg.seed, 0, 0);
    let z_a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let exp = Exp::new(1.0 / cfg.beauty_tail_scale).expect("validated scale");
    let tail: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let e: f64 = exp.sample(&mut rng);
            if u < cfg.beauty_tail {
                e
            } else {
                0.0
            }
        })
        .collect();
    let taste: Vec<f64> = (0..n)
        .map(|_| cfg.taste_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let max_out = (n - 1).min(MAX_OUT_DEGREE);
    let out_degree: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = 1.0 - rng.gen::<f64>();
            let d = libm::floor(cfg.min_out_degree as f64 * libm::pow(u, -1.0 / (cfg.degree_exponent - 1.0)));
            (d.min(max_out as f64) as usize).max(cfg.min_out_degree.min(max_out))
        })
        .collect();
    let join_span = (cfg.n_weeks / 4).max(1);
    let join_week: Vec<u32> = (0..n).map(|_| rng.gen_range(0..join_span)).collect();

    let n_super = libm::round(cfg.superstar_fraction * n as f64) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z_a[b].total_cmp(&z_a[a]).then(a.cmp(&b)));
    let mut superstar = vec![false; n];
    for &i in order.iter().take(n_super) {
        superstar[i] = true;
    }
    let attractiveness: Vec<f64> = (0..n)
        .map(|i| {
            let a = pareto_from_normal(z_a[i], cfg.degree_exponent);
            if superstar[i] {
                a * SUPERSTAR_BOOST
            } else {
                a
            }
        })
        .collect();

    let latent = Latent {
        z_a,
        eps,
        tail,
        superstar: superstar.clone(),
    };
    let link_weeks: Vec<Vec<u32>> = (0..n)
        .map(|i| follow_weeks(cfg, join_week[i], out_degree[i], i))
        .collect();
    let indegree = simulated_indegree(cfg, &attractiveness, &join_week, &link_weeks);
    let copula_r = if cfg.degree_beauty_rho == 0.0 {
        0.0
    } else {
        calibrate(cfg, &latent, &indegree)
    };
    let quality = quality_from(cfg, &latent, copula_r);
    (
        Population {
            quality,
            attractiveness,
            out_degree,
            join_week,
            link_weeks,
            superstar,
            churn_week: vec![None; n],
            copula_r,
        },
        taste,
        latent,
    )
}

fn week_time(rng: &mut ChaCha8Rng, week: u32) -> i64 {
    i64::from(week) * SECONDS_PER_WEEK + rng.gen_range(0..SECONDS_PER_WEEK)
}

fn kernel(gap: f64, width: f64) -> f64 {
    libm::exp(-gap * gap / (2.0 * width * width))
}

const QUALITY_BINS: usize = 400;
const LOG_FLOOR: f64 = -6.907_755_278_982_137;

fn log_quality(q: f64) -> f64 {
    libm::log(q).max(LOG_FLOOR)
}

/// Two-stage assortative sampler over log-quality bins: a non-empty bin
/// with probability `ā_b · K(ln c_b − ln p)`, where `ā_b` is the mean
/// attractiveness of its members, then a member uniformly.
struct Assortative {
    centers: Vec<f64>,
    appeal: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl Assortative {
    fn new(pop: &Population) -> Self {
        let step = -LOG_FLOOR / QUALITY_BINS as f64;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); QUALITY_BINS];
        for (j, &q) in pop.quality.iter().enumerate() {
            let b = ((log_quality(q) - LOG_FLOOR) / step) as usize;
            members[b.min(QUALITY_BINS - 1)].push(j);
        }
        members.retain(|m| !m.is_empty());
        let centers = members
            .iter()
            .map(|m| m.iter().map(|&j| log_quality(pop.quality[j])).sum::<f64>() / m.len() as f64)
            .collect();
        let appeal = members
            .iter()
            .map(|m| m.iter().map(|&j| pop.attractiveness[j]).sum::<f64>() / m.len() as f64)
            .collect();
        Assortative {
            centers,
            appeal,
            members,
        }
    }

    fn for_preference(&self, preferred: f64, width: f64) -> Sampler {
        let p = log_quality(preferred);
        let nearest = self
            .centers
            .iter()
            .map(|&c| (c - p).abs())
            .fold(f64::INFINITY, f64::min);
        // Relative to the nearest bin so that the weights cannot all underflow.
        Sampler::new(
            &self
                .centers
                .iter()
                .zip(&self.appeal)
                .map(|(&c, &a)| {
                    let gap = (c - p).abs();
                    a * kernel(libm::sqrt(gap * gap - nearest * nearest), width)
                })
                .collect::<Vec<_>>(),
        )
    }

    fn draw(&self, bins: &Sampler, rng: &mut ChaCha8Rng) -> Option<usize> {
        let b = bins.draw(rng)?;
        let m = &self.members[b];
        Some(m[rng.gen_range(0..m.len())])
    }
}

struct Samplers {
    plain: Sampler,
    assortative: Option<Assortative>,
}

/// Follow plan of one user: `(week, target)` in week order.
fn plan_follows(
    cfg: &SynthConfig,
    pop: &Population,
    weeks: &[u32],
    preferred: f64,
    samplers: &Samplers,
    i: usize,
) -> Vec<(u32, usize)> {
    let mut rng = rng_for(cfg.seed, 2, i as u64);
    let d = weeks.len();
    let bins = samplers
        .assortative
        .as_ref()
        .map(|a| a.for_preference(preferred, cfg.assortative_width));
    let mut chosen: Vec<usize> = Vec::with_capacity(d);
    let mut plan = Vec::with_capacity(d);
    for &w in weeks {
        let valid = |j: &usize| *j != i && pop.join_week[*j] <= w && !chosen.contains(j);
        let target = match (&samplers.assortative, &bins) {
            (Some(a), Some(bins)) if rng.gen::<f64>() < cfg.assortativity => {
                (0..MAX_DRAWS).filter_map(|_| a.draw(bins, &mut rng)).find(valid)
            }
            _ => (0..MAX_DRAWS).filter_map(|_| samplers.plain.draw(&mut rng)).find(valid),
        };
        if let Some(j) = target {
            chosen.push(j);
            plan.push((w, j));
        }
    }
    plan
}

struct UserStreams {
    follows: Vec<(i64, usize)>,
    photos: Vec<(i64, f64)>,
    churn_week: Option<u32>,
}

fn simulate_user(cfg: &SynthConfig, pop: &Population, plan: &[(u32, usize)], i: usize) -> UserStreams {
    let mut rng = rng_for(cfg.seed, 3, i as u64);
    let q = pop.quality[i];
    let join = pop.join_week[i];
    let mut out = UserStreams {
        follows: Vec::new(),
        photos: Vec::new(),
        churn_week: None,
    };
    let (mut next, mut nb_sum, mut nb_n) = (0usize, 0.0, 0usize);
    let mut last_new: Option<f64> = None;
    let wake = 1.0 / cfg.dormancy_weeks;
    let sleep = (1.0 - cfg.activity) * wake / cfg.activity;
    let mut active = true;
    for w in join..cfg.n_weeks {
        let delta = if nb_n > 0 && q > 0.0 {
            (nb_sum / nb_n as f64) / q - 1.0
        } else {
            0.0
        };
        let u: f64 = rng.gen();
        if w > join && u < cfg.base_churn * (1.0 + cfg.churn_imbalance_strength * delta.abs()) {
            out.churn_week = Some(w);
            break;
        }

        let shift = last_new.map_or(0.0, |m| cfg.influence_strength * (m - q).max(0.0));
        let flip: f64 = rng.gen();
        if w == join {
            active = true;
        } else if active {
            active = flip >= sleep;
        } else {
            active = flip < wake;
        }
        let extra = poisson(&mut rng, cfg.photos_per_week - 1.0);
        if active {
            for _ in 0..=extra {
                let noise: f64 = rng.sample(StandardNormal);
                let t = week_time(&mut rng, w);
                let b = (q + shift + cfg.photo_noise * noise).clamp(0.0, 1.0);
                out.photos.push((t, b));
            }
        }

        let (mut new_sum, mut new_n) = (0.0, 0usize);
        while next < plan.len() && plan[next].0 == w {
            let j = plan[next].1;
            out.follows.push((week_time(&mut rng, w), j));
            new_sum += pop.quality[j];
            new_n += 1;
            next += 1;
        }
        nb_sum += new_sum;
        nb_n += new_n;
        last_new = (new_n > 0).then(|| new_sum / new_n as f64);
    }
    out
}

const REFINE_ROUNDS: usize = 3;
const REFINE_TOLERANCE: f64 = 0.005;

/// Plans every user's follows. Assortative targeting reshapes in-degree,
/// so the copula correlation is rescaled until the Spearman correlation
/// between planned in-degree and quality is within tolerance of the target.
fn refine(cfg: &SynthConfig, pop: &mut Population, taste: &[f64], latent: &Latent) -> Vec<Vec<(u32, usize)>> {
    let n = cfg.n_users;
    let mut round = 0;
    loop {
        let preferred: Vec<f64> = pop.quality.iter().zip(taste).map(|(q, t)| q * (1.0 + t)).collect();
        let samplers = Samplers {
            plain: Sampler::new(&pop.attractiveness),
            assortative: (cfg.assortativity > 0.0).then(|| Assortative::new(pop)),
        };
        let plans: Vec<Vec<(u32, usize)>> = (0..n)
            .map(|i| plan_follows(cfg, pop, &pop.link_weeks[i], preferred[i], &samplers, i))
            .collect();
        if cfg.degree_beauty_rho == 0.0 || round == REFINE_ROUNDS {
            return plans;
        }
        let mut indegree = vec![0.0; n];
        for plan in &plans {
            for &(_, j) in plan {
                indegree[j] += 1.0;
            }
        }
        let rho = stats::spearman_rho(&indegree, &pop.quality).unwrap_or(0.0);
        let target = cfg.degree_beauty_rho;
        if (rho - target).abs() <= REFINE_TOLERANCE || rho * target <= 0.0 {
            return plans;
        }
        pop.copula_r = (pop.copula_r * target / rho).clamp(-0.999, 0.999);
        pop.quality = quality_from(cfg, latent, pop.copula_r);
        round += 1;
    }
}

/// Generates the four event streams and the latent population behind them.
pub fn generate_with_population(cfg: &SynthConfig) -> Result<(EventStreams, Population)> {
    cfg.validate()?;
    let n = cfg.n_users;
    let (mut pop, taste, latent) = population(cfg);
    let plans = refine(cfg, &mut pop, &taste, &latent);
    let end = i64::from(cfg.n_weeks) * SECONDS_PER_WEEK;

    let mut streams = EventStreams::default();
    let mut owners: Vec<(usize, i64)> = Vec::new();
    for (i, plan) in plans.iter().enumerate() {
        let mut user = simulate_user(cfg, &pop, plan, i);
        pop.churn_week[i] = user.churn_week;
        for (t, j) in user.follows {
            streams.follows.push(FollowEvent {
                src: UserId(i as u64),
                dst: UserId(j as u64),
                t,
            });
        }
        user.photos.sort_by_key(|p| p.0);
        for (t, beauty) in user.photos {
            let photo = PhotoId(streams.photos.len() as u64);
            streams.photos.push(PhotoEvent {
                owner: UserId(i as u64),
                photo,
                t,
                beauty,
            });
            owners.push((i, t));
        }
    }

    let mean_a = pop.attractiveness.iter().sum::<f64>() / n as f64;
    let mean_q = (pop.quality.iter().sum::<f64>() / n as f64).max(f64::EPSILON);
    let mut rng = rng_for(cfg.seed, 4, 0);
    for (k, &(owner, t)) in owners.iter().enumerate() {
        let boost = if pop.superstar[owner] { SUPERSTAR_BOOST } else { 1.0 };
        let mean =
            cfg.favorites_per_photo * (pop.attractiveness[owner] / mean_a) * (pop.quality[owner] / mean_q) * boost;
        for _ in 0..poisson(&mut rng, mean) {
            let mut actor = rng.gen_range(0..n - 1);
            if actor >= owner {
                actor += 1;
            }
            let ft = (t + rng.gen_range(0..2 * SECONDS_PER_WEEK)).min(end - 1);
            streams.favorites.push(FavoriteEvent {
                actor: UserId(actor as u64),
                photo: PhotoId(k as u64),
                t: ft,
            });
        }
    }

    let n_groups = (n / 50).max(1) as u64;
    for i in 0..n {
        let last = pop.churn_week[i].unwrap_or(cfg.n_weeks);
        let join = pop.join_week[i];
        for _ in 0..poisson(&mut rng, cfg.groups_per_user) {
            let w = rng.gen_range(join..last.max(join + 1));
            streams.groups.push(GroupEvent {
                member: UserId(i as u64),
                group: GroupId(rng.gen_range(0..n_groups)),
                t: week_time(&mut rng, w),
            });
        }
    }

    streams.follows.sort_by_key(|e| (e.t, e.src, e.dst));
    streams.photos.sort_by_key(|e| (e.t, e.photo));
    streams.favorites.sort_by_key(|e| (e.t, e.photo, e.actor));
    streams.groups.sort_by_key(|e| (e.t, e.member, e.group));
    Ok((streams, pop))
}

pub fn generate(cfg: &SynthConfig) -> Result<EventStreams> {
    generate_with_population(cfg).map(|(s, _)| s)
}

/// Erdős–Rényi directed graph over users `0..n` with edge probability `p`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> GraphSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    GraphSnapshot::from_edges((0..n as u64).map(UserId).collect(), &edges)
}

/// Uniform random profiles, with each user unprofiled with probability
/// `missing`.
pub fn random_profiles(n: usize, missing: f64, seed: u64) -> BeautyProfiles {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BeautyProfiles::from_values(
        (0..n)
            .map(|_| {
                let m: f64 = rng.gen();
                let b: f64 = rng.gen();
                (m >= missing).then_some(b)
            })
            .collect(),
    )
}

/// `per_cluster` isotropic normal points around each center, in center
/// order, with their true cluster index.
pub fn gaussian_blobs<const D: usize>(
    centers: &[[f64; D]],
    per_cluster: usize,
    sd: f64,
    seed: u64,
) -> (Vec<[f64; D]>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(centers.len() * per_cluster);
    let mut labels = Vec::with_capacity(centers.len() * per_cluster);
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..per_cluster {
            let mut p = *c;
            for x in p.iter_mut() {
                *x += sd * rng.sample::<f64, _>(StandardNormal);
            }
            points.push(p);
            labels.push(k);
        }
    }
    (points, labels)
}

/// Reference correlation spectrum: for each user, scan every other user
/// for an edge and average the profiled followees' beauty.
pub fn oracle_spectrum(s: &GraphSnapshot, p: &BeautyProfiles, bins: usize) -> SpectrumCurve {
    let bins = bins.max(1);
    let n = s.node_count();
    let edges: Vec<(usize, usize)> = s.edges().collect();
    let mut sums = vec![0.0; bins];
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for i in 0..n {
        let Some(own) = p.get(i) else { continue };
        let (mut total, mut count) = (0.0, 0usize);
        for j in 0..n {
            if !edges.contains(&(i, j)) {
                continue;
            }
            if let Some(b) = p.get(j) {
                total += b;
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        let mut bin = 0;
        while bin + 1 < bins && own >= (bin + 1) as f64 / bins as f64 {
            bin += 1;
        }
        let nn = total / count as f64;
        sums[bin] += nn;
        values[bin].push(nn);
    }
    let mut points = Vec::new();
    for bin in 0..bins {
        let m = values[bin].len();
        if m == 0 {
            continue;
        }
        let mean = sums[bin] / m as f64;
        let variance = values[bin].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
        points.push(SpectrumBin {
            index: bin,
            center: (bin as f64 + 0.5) / bins as f64,
            b_nn: mean,
            count: m,
            variance,
        });
    }
    SpectrumCurve { bins, points }
}

/// Reference distance-two candidates: every pair of edges `u → v`, `v → c`
/// with `c ≠ u` and no edge `u → c`, counted per distinct `v`.
pub fn oracle_candidates(s: &GraphSnapshot, u: usize) -> Vec<(usize, u32)> {
    let edges: Vec<(usize, usize)> = s.edges().collect();
    let mut counts = vec![0u32; s.node_count()];
    for &(a, v) in &edges {
        if a != u {
            continue;
        }
        for &(b, c) in &edges {
            if b == v && c != u && !edges.contains(&(u, c)) {
                counts[c] += 1;
            }
        }
    }
    counts.into_iter().enumerate().filter(|&(_, k)| k > 0).collect()
}

/// Reference Gini: Σᵢ Σⱼ |xᵢ − xⱼ| / (2 n² x̄).
pub fn oracle_gini(values: &[f64]) -> Result<f64> {
    let total = metrics::check_resource(values)?;
    let n = values.len() as f64;
    let mut pairs = 0.0;
    for &a in values {
        for &b in values {
            pairs += (a - b).abs();
        }
    }
    Ok(pairs / (2.0 * n * total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{correlation_spectrum, gini};
    use crate::recommend::candidates;

    fn small() -> SynthConfig {
        SynthConfig {
            n_users: 300,
            n_weeks: 20,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn streams_ingest_without_warnings() {
        let s = generate(&small()).unwrap();
        assert!(s.photos.iter().all(|e| (0.0..=1.0).contains(&e.beauty)));
        let (g, warnings) = s.build_graph().unwrap();
        assert!(warnings.is_empty());
        assert_eq!(g.photo_count(), s.photos.len());
        assert!(g.last_week().unwrap().0 < 20);
    }

    #[test]
    fn invalid_config_lists_fields() {
        let cfg = SynthConfig {
            n_users: 1,
            activity: 1.5,
            base_churn: -0.1,
            ..SynthConfig::default()
        };
        match generate(&cfg) {
            Err(Error::InvalidConfig(msg)) => {
                assert!(msg.contains("n_users"));
                assert!(msg.contains("activity"));
                assert!(msg.contains("base_churn"));
                assert!(!msg.contains("beauty_sd"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn influence_does_not_change_the_event_skeleton() {
        let (a, _) = generate_with_population(&small()).unwrap();
        let (b, _) = generate_with_population(&SynthConfig {
            influence_strength: 0.5,
            ..small()
        })
        .unwrap();
        assert_eq!(a.follows, b.follows);
        assert_eq!(a.photos.len(), b.photos.len());
        assert!(a.photos.iter().zip(&b.photos).all(|(x, y)| y.beauty >= x.beauty));
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle_gini(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((oracle_gini(&[0.0, 0.0, 0.0, 1.0]).unwrap() - 0.75).abs() < 1e-12);

        let s = GraphSnapshot::from_edges((0..5).map(UserId).collect(), &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 4)]);
        assert_eq!(oracle_candidates(&s, 0), vec![(3, 2), (4, 1)]);
        assert!(oracle_candidates(&s, 3).is_empty());

        // complete bipartite {0,1,2} → {3,4,5}, plus 6 → 0: 6 reaches each
        // of 3,4,5 through the single intermediary 0
        let mut e = Vec::new();
        for a in 0..3 {
            for b in 3..6 {
                e.push((a, b));
            }
        }
        e.push((6, 0));
        let s = GraphSnapshot::from_edges((0..7).map(UserId).collect(), &e);
        assert_eq!(oracle_candidates(&s, 6), vec![(3, 1), (4, 1), (5, 1)]);
        assert!(oracle_candidates(&s, 0).is_empty());

        let empty = GraphSnapshot::from_edges(Vec::new(), &[]);
        assert!(oracle_spectrum(&empty, &BeautyProfiles::from_values(Vec::new()), 100)
            .points
            .is_empty());
    }

    #[test]
    fn oracles_match_fast_paths() {
        for seed in 0..5 {
            let s = random_graph(50, 0.08, seed);
            let p = random_profiles(50, 0.1, seed + 100);
            assert_eq!(oracle_spectrum(&s, &p, 100), correlation_spectrum(&s, &p, 100));
            for u in 0..50 {
                assert_eq!(oracle_candidates(&s, u), candidates(&s, u));
            }
            let v: Vec<f64> = p.profiled().map(|(_, b)| b).collect();
            assert!((oracle_gini(&v).unwrap() - gini(&v).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn blobs_have_requested_shape() {
        let (pts, labels) = gaussian_blobs(&[[0.0, 0.0], [10.0, 10.0]], 5, 0.1, 3);
        assert_eq!(pts.len(), 10);
        assert_eq!(labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }
}
