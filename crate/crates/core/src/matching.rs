//! Matching experiments on the weekly timeline.
//!
//! A (user, week) pair is the experimental unit. Treatment and control
//! groups are built from link creations (`build_groups_q4`) or from the
//! beauty imbalance between a user and their followees
//! (`build_groups_q5`), balanced by greedily pruning the control group
//! until every covariate's standardized bias is within
//! [`SB_THRESHOLD`], and compared on next-week beauty or inactivity.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Link, TemporalGraph, UserId, UserRecord, Week};
use crate::stats::{self, Interval};

pub const COVARIATE_COUNT: usize = 11;

pub const COVARIATE_NAMES: [&str; COVARIATE_COUNT] = [
    "indegree",
    "outdegree",
    "photos_uploaded",
    "group_memberships",
    "favorites_given",
    "favorites_received",
    "average_photo_beauty",
    "weeks_since_join",
    "neighbors_photos_uploaded",
    "neighbors_average_beauty",
    "new_neighbors_photos_uploaded",
];

/// Which covariates the balancing procedure must bring under
/// [`SB_THRESHOLD`].
pub type CovariateMask = [bool; COVARIATE_COUNT];

pub const ALL_COVARIATES: CovariateMask = [true; COVARIATE_COUNT];

/// Index of `neighbors_average_beauty` in [`COVARIATE_NAMES`].
pub const NEIGHBOR_BEAUTY: usize = 9;

/// Balance is reached when every |SB| is at most this value.
pub const SB_THRESHOLD: f64 = 0.25;
/// Minimum final number of followees for an eligible user.
pub const MIN_OUT_LINKS: usize = 10;
/// Minimum number of distinct upload weeks, both for eligibility and as
/// the prior activity required before an observation week.
pub const MIN_ACTIVE_WEEKS: usize = 12;

/// Covariates measured at the start of the observation week, in the
/// order of [`COVARIATE_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovariateVector(pub [f64; COVARIATE_COUNT]);

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Instance {
    pub user: UserId,
    pub week: Week,
    pub covariates: CovariateVector,
}

impl Instance {
    fn key(&self) -> (Week, UserId) {
        (self.week, self.user)
    }
}

/// Users with at least [`MIN_OUT_LINKS`] followees overall and uploads in
/// at least [`MIN_ACTIVE_WEEKS`] distinct weeks.
pub fn eligible_users(g: &TemporalGraph) -> Vec<UserId> {
    g.users().iter().filter(|u| is_eligible(u)).map(|u| u.id).collect()
}

fn is_eligible(u: &UserRecord) -> bool {
    u.follows_out.len() >= MIN_OUT_LINKS && u.active_weeks() >= MIN_ACTIVE_WEEKS
}

/// b̄^w: mean beauty of all photos in weeks ≤ `w`.
fn cumulative_beauty(g: &TemporalGraph, index: usize, w: Week) -> Option<f64> {
    g.user(index).photos_through(w).mean()
}

fn mean_beauty_of(g: &TemporalGraph, links: &[Link], w: Week) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for l in links {
        if let Some(b) = cumulative_beauty(g, l.other as usize, w) {
            sum += b;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NeighborSet {
    /// All followees at the start of the week.
    Full,
    /// Followees added during the week.
    New,
}

/// Mean cumulative-until-`w` beauty over a user's followees; followees
/// without photos are skipped, and `None` means nothing was left.
pub fn neighbor_mean_beauty(g: &TemporalGraph, id: UserId, w: Week, set: NeighborSet) -> Result<Option<f64>> {
    let u = g.record(id)?;
    let links = match set {
        NeighborSet::Full => u.follows_out_before(w),
        NeighborSet::New => u.follows_out_in(w),
    };
    Ok(mean_beauty_of(g, links, w))
}

/// δ such that `own · (1 + δ) = neighbors`; undefined for zero own beauty.
pub fn imbalance_delta(own: f64, neighbors: f64) -> Option<f64> {
    (own > 0.0).then(|| neighbors / own - 1.0)
}

/// Covariates of `id` at the start of week `w`. `Ok(None)` when the user
/// has no photo before `w`, so average beauty is undefined.
pub fn covariates(g: &TemporalGraph, id: UserId, w: Week) -> Result<Option<CovariateVector>> {
    let index = g.index_of(id).ok_or(Error::UnknownUser(id.0))?;
    Ok(covariates_at(g, index, w))
}

fn covariates_at(g: &TemporalGraph, index: usize, w: Week) -> Option<CovariateVector> {
    let u = g.user(index);
    let own = u.photos_before(w);
    let own_beauty = own.mean()?;

    let neighbors = u.follows_out_before(w);
    let (mut n_photos, mut b_sum, mut b_n) = (0.0, 0.0, 0usize);
    for l in neighbors {
        let t = g.user(l.other as usize).photos_before(w);
        n_photos += f64::from(t.count);
        if let Some(b) = t.mean() {
            b_sum += b;
            b_n += 1;
        }
    }
    let neighbor_photos = if neighbors.is_empty() {
        0.0
    } else {
        n_photos / neighbors.len() as f64
    };
    let neighbor_beauty = if b_n > 0 { b_sum / b_n as f64 } else { 0.0 };

    let new = u.follows_out_in(w);
    let new_photos = if new.is_empty() {
        0.0
    } else {
        new.iter()
            .map(|l| f64::from(g.user(l.other as usize).photos_before(w).count))
            .sum::<f64>()
            / new.len() as f64
    };

    Some(CovariateVector([
        u.in_degree_before(w) as f64,
        neighbors.len() as f64,
        f64::from(own.count),
        u.groups_before(w) as f64,
        u.favorites_given_before(w) as f64,
        u.favorites_received_before(w) as f64,
        own_beauty,
        f64::from(w.0.saturating_sub(u.join_week.0)),
        neighbor_photos,
        neighbor_beauty,
        new_photos,
    ]))
}

/// Candidate observation weeks of an eligible user: weeks with an upload
/// preceded by at least [`MIN_ACTIVE_WEEKS`] other upload weeks.
fn observation_weeks(u: &UserRecord) -> impl Iterator<Item = Week> + '_ {
    u.weekly().iter().skip(MIN_ACTIVE_WEEKS).map(|x| x.week)
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Groups {
    pub treated: Vec<Instance>,
    pub control: Vec<Instance>,
    /// Classified instances dropped because covariates were undefined.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LinkVariant {
    /// At least one link to a higher-beauty user.
    Any,
    /// Exactly `n` links to higher-beauty users.
    ExactlyN(u32),
    /// At least one higher link, and the new followees' mean beauty is at
    /// least `(1 + α)` times the user's own.
    Alpha(f64),
}

/// Groups built from link creations: treated users followed someone with
/// higher cumulative beauty than their own during the week, control users
/// created links only towards equal or lower beauty.
pub fn build_groups_q4(g: &TemporalGraph, variant: LinkVariant) -> Groups {
    let mut groups = Groups::default();
    for (index, u) in g.users().iter().enumerate() {
        if !is_eligible(u) {
            continue;
        }
        for w in observation_weeks(u) {
            let created = u.follows_out_in(w);
            if created.is_empty() {
                continue;
            }
            let Some(own) = cumulative_beauty(g, index, w) else {
                continue;
            };
            let (mut classified, mut higher, mut sum) = (0u32, 0u32, 0.0);
            for l in created {
                // Targets without photos up to `w` cannot be compared.
                if let Some(b) = cumulative_beauty(g, l.other as usize, w) {
                    classified += 1;
                    sum += b;
                    if b > own {
                        higher += 1;
                    }
                }
            }
            if classified == 0 {
                continue;
            }
            let treated = match variant {
                LinkVariant::Any => higher >= 1,
                LinkVariant::ExactlyN(n) => higher == n,
                LinkVariant::Alpha(alpha) => higher >= 1 && sum / f64::from(classified) >= (1.0 + alpha) * own,
            };
            let control = higher == 0;
            if !treated && !control {
                continue;
            }
            match covariates_at(g, index, w) {
                Some(c) => {
                    let inst = Instance {
                        user: u.id,
                        week: w,
                        covariates: c,
                    };
                    if treated {
                        groups.treated.push(inst);
                    } else {
                        groups.control.push(inst);
                    }
                }
                None => groups.skipped += 1,
            }
        }
    }
    groups.treated.sort_by_key(Instance::key);
    groups.control.sort_by_key(Instance::key);
    groups
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImbalanceBands {
    /// Control when |δ| ≤ this.
    pub control_max: f64,
    /// Treated when δ ≥ this.
    pub treated_min: f64,
}

impl Default for ImbalanceBands {
    fn default() -> Self {
        ImbalanceBands {
            control_max: 0.1,
            treated_min: 0.3,
        }
    }
}

/// Groups built from the imbalance δ between a user's cumulative beauty
/// and the mean cumulative beauty of their followees at the start of the
/// week.
pub fn build_groups_q5(g: &TemporalGraph, bands: ImbalanceBands) -> Groups {
    let mut groups = Groups::default();
    for (index, u) in g.users().iter().enumerate() {
        if !is_eligible(u) {
            continue;
        }
        for w in observation_weeks(u) {
            let Some(own) = cumulative_beauty(g, index, w) else {
                continue;
            };
            let Some(nb) = mean_beauty_of(g, u.follows_out_before(w), w) else {
                continue;
            };
            let Some(delta) = imbalance_delta(own, nb) else {
                continue;
            };
            let treated = delta >= bands.treated_min;
            let control = delta.abs() <= bands.control_max;
            if !treated && !control {
                continue;
            }
            match covariates_at(g, index, w) {
                Some(c) => {
                    let inst = Instance {
                        user: u.id,
                        week: w,
                        covariates: c,
                    };
                    if treated {
                        groups.treated.push(inst);
                    } else {
                        groups.control.push(inst);
                    }
                }
                None => groups.skipped += 1,
            }
        }
    }
    groups.treated.sort_by_key(Instance::key);
    groups.control.sort_by_key(Instance::key);
    groups
}

fn column(instances: &[Instance], c: usize) -> impl Iterator<Item = f64> + '_ {
    instances.iter().map(move |i| i.covariates.0[c])
}

/// `(mean_t − mean_c) / sd_t` for covariate `covariate`, with the sample
/// standard deviation of the treated group. A zero-variance treated group
/// yields 0 when the means agree and [`Error::Unbalanceable`] otherwise.
pub fn standardized_bias(treated: &[Instance], control: &[Instance], covariate: usize) -> Result<f64> {
    if treated.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: treated.len(),
        });
    }
    if control.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let t: Vec<f64> = column(treated, covariate).collect();
    let mean_t = stats::mean(&t).unwrap_or(0.0);
    let mean_c = column(control, covariate).sum::<f64>() / control.len() as f64;
    let sd = stats::sample_std(&t).unwrap_or(0.0);
    if sd == 0.0 {
        // Means of identical values may differ in the last ulp.
        let scale = mean_t.abs().max(mean_c.abs()).max(1.0);
        if (mean_t - mean_c).abs() <= 1e-12 * scale {
            return Ok(0.0);
        }
        return Err(Error::Unbalanceable(covariate));
    }
    Ok((mean_t - mean_c) / sd)
}

pub fn standardized_biases(treated: &[Instance], control: &[Instance]) -> Result<[f64; COVARIATE_COUNT]> {
    let mut out = [0.0; COVARIATE_COUNT];
    for (c, slot) in out.iter_mut().enumerate() {
        *slot = standardized_bias(treated, control, c)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchedGroups {
    pub treated: Vec<Instance>,
    pub control: Vec<Instance>,
    pub control_seed_size: usize,
    pub sb_before: [f64; COVARIATE_COUNT],
    pub sb_after: [f64; COVARIATE_COUNT],
    pub iterations: usize,
}

fn cmp_on(c: usize) -> impl Fn(&Instance, &Instance) -> Ordering {
    move |a, b| {
        a.covariates.0[c]
            .total_cmp(&b.covariates.0[c])
            .then_with(|| a.key().cmp(&b.key()))
    }
}

/// Removes `ceil(1%)` (at least one) of the control units with the highest
/// (`highest = true`) or lowest values of covariate `c`.
fn prune(control: &mut Vec<Instance>, c: usize, highest: bool) {
    let len = control.len();
    if len == 0 {
        return;
    }
    let k = (len.div_ceil(100)).max(1).min(len);
    let cmp = cmp_on(c);
    if highest {
        control.select_nth_unstable_by(len - k, &cmp);
        control.truncate(len - k);
    } else {
        if k < len {
            control.select_nth_unstable_by(k - 1, &cmp);
        }
        control.drain(..k);
    }
}

/// Greedy balancing: while some covariate has |SB| above the threshold,
/// prune the control units that most contribute to each such mismatch.
///
/// Fails with [`Error::BalanceRestart`] if the control group shrinks below
/// the treated group before convergence.
pub fn balance(treated: &[Instance], control_seed: Vec<Instance>) -> Result<MatchedGroups> {
    balance_on(treated, control_seed, &ALL_COVARIATES)
}

/// [`balance`] restricted to the covariates selected by `mask`. Biases of
/// the other covariates are still reported, as NaN when undefined.
pub fn balance_on(treated: &[Instance], control_seed: Vec<Instance>, mask: &CovariateMask) -> Result<MatchedGroups> {
    if treated.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: treated.len(),
        });
    }
    if control_seed.len() < 2 * treated.len() {
        return Err(Error::ControlTooSmall {
            treated: treated.len(),
            control: control_seed.len(),
        });
    }
    let control_seed_size = control_seed.len();
    let mut control = control_seed;
    let sb_before = masked_biases(treated, &control, mask)?;
    let mut sb = sb_before;
    let mut iterations = 0;
    loop {
        let unbalanced: Vec<usize> = (0..COVARIATE_COUNT)
            .filter(|&c| mask[c] && sb[c].abs() > SB_THRESHOLD)
            .collect();
        if unbalanced.is_empty() {
            break;
        }
        iterations += 1;
        for c in unbalanced {
            // SB < 0: control mean too high, drop the highest values.
            prune(&mut control, c, sb[c] < 0.0);
        }
        if control.len() < treated.len() {
            return Err(Error::BalanceRestart {
                treated: treated.len(),
                control: control.len(),
            });
        }
        sb = masked_biases(treated, &control, mask)?;
    }
    control.sort_by_key(Instance::key);
    Ok(MatchedGroups {
        treated: treated.to_vec(),
        control,
        control_seed_size,
        sb_before,
        sb_after: sb,
        iterations,
    })
}

fn masked_biases(treated: &[Instance], control: &[Instance], mask: &CovariateMask) -> Result<[f64; COVARIATE_COUNT]> {
    let mut out = [0.0; COVARIATE_COUNT];
    for (c, slot) in out.iter_mut().enumerate() {
        *slot = match standardized_bias(treated, control, c) {
            Ok(v) => v,
            Err(e) if mask[c] => return Err(e),
            Err(_) => f64::NAN,
        };
    }
    Ok(out)
}

/// Per-instance next-week beauty ratios `b^{w+1} / b̄^w`.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeltaB {
    pub ratios: Vec<f64>,
    /// Instances without uploads in week w+1.
    pub no_next_week: usize,
    /// Instances whose prior beauty is zero or undefined.
    pub zero_prior: usize,
}

impl DeltaB {
    pub fn mean(&self) -> Option<f64> {
        stats::mean(&self.ratios)
    }
}

pub fn outcome_delta_b(g: &TemporalGraph, instances: &[Instance]) -> DeltaB {
    let mut out = DeltaB::default();
    for inst in instances {
        let Some(index) = g.index_of(inst.user) else {
            out.zero_prior += 1;
            continue;
        };
        let u = g.user(index);
        let prior = u.photos_through(inst.week).mean().unwrap_or(0.0);
        if prior <= 0.0 {
            out.zero_prior += 1;
            continue;
        }
        match u.photos_in(inst.week.next()).mean() {
            Some(next) => out.ratios.push(next / prior),
            None => out.no_next_week += 1,
        }
    }
    out
}

/// Indicators of "no upload in weeks w+1..=w+n" for uncensored instances;
/// instances whose horizon runs past the last observed week are counted
/// separately.
pub fn inactivity_indicators(g: &TemporalGraph, instances: &[Instance], n: u32) -> (Vec<f64>, usize) {
    let last = g.last_week().map_or(0, |w| w.0);
    let mut flags = Vec::with_capacity(instances.len());
    let mut censored = 0;
    for inst in instances {
        let Some(index) = g.index_of(inst.user) else { continue };
        let end = inst.week.0 + n;
        if end > last {
            censored += 1;
            continue;
        }
        let uploads = g.user(index).photos_between(inst.week.next(), Week(end)).count;
        flags.push(if uploads == 0 { 1.0 } else { 0.0 });
    }
    (flags, censored)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InactivityRatio {
    pub horizon: u32,
    pub p_treated: f64,
    pub p_control: f64,
    pub ratio: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub censored: usize,
}

/// Ratio of the fractions of treated and control instances with no upload
/// for `n` weeks after their observation week.
pub fn outcome_inactivity(
    g: &TemporalGraph,
    treated: &[Instance],
    control: &[Instance],
    n: u32,
) -> Result<InactivityRatio> {
    if n == 0 {
        return Err(Error::InvalidConfig(String::from(
            "inactivity horizon must be at least one week",
        )));
    }
    let (t, ct) = inactivity_indicators(g, treated, n);
    let (c, cc) = inactivity_indicators(g, control, n);
    if t.is_empty() || c.is_empty() {
        return Err(Error::TooFew {
            needed: 1,
            got: t.len().min(c.len()),
        });
    }
    let p_treated = stats::mean(&t).unwrap_or(0.0);
    let p_control = stats::mean(&c).unwrap_or(0.0);
    if p_control == 0.0 {
        return Err(Error::ZeroDenominator("inactivity ratio"));
    }
    Ok(InactivityRatio {
        horizon: n,
        p_treated,
        p_control,
        ratio: p_treated / p_control,
        n_treated: t.len(),
        n_control: c.len(),
        censored: ct + cc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ExperimentKind {
    Q4Any,
    Q4ExactlyN { n: u32 },
    Q4Alpha { alpha: f64 },
    Q5 { control_max: f64, treated_min: f64 },
}

impl ExperimentKind {
    pub fn label(&self) -> String {
        match self {
            ExperimentKind::Q4Any => String::from("q4_any"),
            ExperimentKind::Q4ExactlyN { n } => format!("q4_exactly_{n}"),
            ExperimentKind::Q4Alpha { alpha } => format!("q4_alpha_{alpha}"),
            ExperimentKind::Q5 { .. } => String::from("q5"),
        }
    }

    /// Covariates that must be balanced. Q5 treatment is defined by the
    /// ratio of neighbor to own beauty, so neighbor beauty is reported but
    /// not balanced.
    pub fn balanced_covariates(&self) -> CovariateMask {
        let mut mask = ALL_COVARIATES;
        if let ExperimentKind::Q5 { .. } = self {
            mask[NEIGHBOR_BEAUTY] = false;
        }
        mask
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Inactivity horizons in weeks; may be empty.
    pub horizons: Vec<u32>,
    pub seed: u64,
    pub bootstrap: usize,
    pub level: f64,
    pub balance: bool,
    /// Seed control group size as a multiple of the treated size; `None`
    /// uses every control candidate.
    pub control_ratio: Option<f64>,
    pub max_restarts: usize,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            horizons: Vec::new(),
            seed: 0,
            bootstrap: 1000,
            level: 0.95,
            balance: true,
            control_ratio: None,
            max_restarts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovariateBalance {
    pub name: String,
    /// Whether balancing constrained this covariate.
    pub matched: bool,
    pub sb_before: f64,
    pub sb_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutcomeSummary {
    pub n: usize,
    pub no_next_week: usize,
    pub zero_prior: usize,
    pub mean: Option<f64>,
    pub ci: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Difference {
    pub estimate: Option<f64>,
    pub ci: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InactivitySummary {
    pub horizon: u32,
    pub p_treated: Option<f64>,
    pub p_control: Option<f64>,
    pub ratio: Option<f64>,
    pub ci: Option<Interval>,
    pub n_treated: usize,
    pub n_control: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentReport {
    pub experiment: String,
    pub treated_candidates: usize,
    pub control_candidates: usize,
    pub skipped: usize,
    pub treated: usize,
    pub control_seed: usize,
    pub control: usize,
    pub balanced: bool,
    pub restarts: usize,
    pub iterations: usize,
    pub failure: Option<String>,
    pub covariates: Vec<CovariateBalance>,
    pub delta_b_treated: Option<OutcomeSummary>,
    pub delta_b_control: Option<OutcomeSummary>,
    pub delta_b_difference: Option<Difference>,
    pub inactivity: Vec<InactivitySummary>,
}

fn summarize(d: &DeltaB, spec: &ExperimentSpec, seed: u64) -> OutcomeSummary {
    OutcomeSummary {
        n: d.ratios.len(),
        no_next_week: d.no_next_week,
        zero_prior: d.zero_prior,
        mean: d.mean(),
        ci: stats::bootstrap_mean(&d.ratios, spec.bootstrap, spec.level, seed),
    }
}

/// Draws a random subset of `k` elements, returned in canonical order.
fn sample(items: &[Instance], k: usize, rng: &mut ChaCha8Rng) -> Vec<Instance> {
    if k >= items.len() {
        return items.to_vec();
    }
    let mut v: Vec<Instance> = items.choose_multiple(rng, k).copied().collect();
    v.sort_by_key(Instance::key);
    v
}

/// Builds groups, balances them (restarting with fresh seed control groups
/// on failure) and measures the outcomes.
pub fn run_experiment(g: &TemporalGraph, spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let groups = match spec.kind {
        ExperimentKind::Q4Any => build_groups_q4(g, LinkVariant::Any),
        ExperimentKind::Q4ExactlyN { n } => build_groups_q4(g, LinkVariant::ExactlyN(n)),
        ExperimentKind::Q4Alpha { alpha } => build_groups_q4(g, LinkVariant::Alpha(alpha)),
        ExperimentKind::Q5 {
            control_max,
            treated_min,
        } => build_groups_q5(
            g,
            ImbalanceBands {
                control_max,
                treated_min,
            },
        ),
    };
    run_on_groups(g, spec, groups)
}

pub fn run_on_groups(g: &TemporalGraph, spec: &ExperimentSpec, groups: Groups) -> Result<ExperimentReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut report = ExperimentReport {
        experiment: spec.kind.label(),
        treated_candidates: groups.treated.len(),
        control_candidates: groups.control.len(),
        skipped: groups.skipped,
        treated: 0,
        control_seed: 0,
        control: 0,
        balanced: false,
        restarts: 0,
        iterations: 0,
        failure: None,
        covariates: Vec::new(),
        delta_b_treated: None,
        delta_b_control: None,
        delta_b_difference: None,
        inactivity: Vec::new(),
    };

    // The seed control group must be at least twice the treated group; a
    // uniform subsample of the treated candidates keeps their distribution.
    let treated = if spec.balance && groups.control.len() < 2 * groups.treated.len() {
        sample(&groups.treated, groups.control.len() / 2, &mut rng)
    } else {
        groups.treated.clone()
    };
    report.treated = treated.len();
    if treated.len() < 2 || groups.control.is_empty() {
        report.failure = Some(format!(
            "not enough instances: {} treated, {} control",
            treated.len(),
            groups.control.len()
        ));
        return Ok(report);
    }

    let seed_size = match spec.control_ratio {
        Some(r) => ((r * treated.len() as f64) as usize).max(2 * treated.len()),
        None => groups.control.len(),
    };

    let mask = spec.kind.balanced_covariates();
    let matched = if spec.balance {
        let mut attempt = 0;
        loop {
            let seed_group = sample(&groups.control, seed_size, &mut rng);
            match balance_on(&treated, seed_group, &mask) {
                Ok(m) => break Some(m),
                Err(Error::BalanceRestart { .. })
                    if attempt < spec.max_restarts && seed_size < groups.control.len() =>
                {
                    attempt += 1;
                    report.restarts = attempt;
                }
                Err(e) => {
                    report.failure = Some(format!("{e}"));
                    break None;
                }
            }
        }
    } else {
        let control = sample(&groups.control, seed_size, &mut rng);
        let sb = masked_biases(&treated, &control, &[false; COVARIATE_COUNT]).unwrap_or([f64::NAN; COVARIATE_COUNT]);
        Some(MatchedGroups {
            treated: treated.clone(),
            control_seed_size: control.len(),
            control,
            sb_before: sb,
            sb_after: sb,
            iterations: 0,
        })
    };
    let Some(m) = matched else { return Ok(report) };

    report.balanced = spec.balance;
    report.control_seed = m.control_seed_size;
    report.control = m.control.len();
    report.iterations = m.iterations;
    report.covariates = COVARIATE_NAMES
        .iter()
        .enumerate()
        .map(|(c, name)| CovariateBalance {
            name: String::from(*name),
            matched: mask[c],
            sb_before: m.sb_before[c],
            sb_after: m.sb_after[c],
        })
        .collect();

    let dt = outcome_delta_b(g, &m.treated);
    let dc = outcome_delta_b(g, &m.control);
    let base = spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    report.delta_b_treated = Some(summarize(&dt, spec, base ^ 1));
    report.delta_b_control = Some(summarize(&dc, spec, base ^ 2));
    report.delta_b_difference = Some(Difference {
        estimate: dt.mean().zip(dc.mean()).map(|(a, b)| a - b),
        ci: stats::bootstrap_mean_difference(&dt.ratios, &dc.ratios, spec.bootstrap, spec.level, base ^ 3),
    });

    for &h in &spec.horizons {
        let (t, _) = inactivity_indicators(g, &m.treated, h);
        let (c, _) = inactivity_indicators(g, &m.control, h);
        let p_t = stats::mean(&t);
        let p_c = stats::mean(&c);
        let ratio = match (p_t, p_c) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        let count = |xs: &[f64]| xs.iter().filter(|&&x| x > 0.0).count();
        let ci = stats::bootstrap_proportion_ratio(
            (count(&t), t.len()),
            (count(&c), c.len()),
            spec.bootstrap,
            spec.level,
            base ^ (16 + u64::from(h)),
        );
        report.inactivity.push(InactivitySummary {
            horizon: h,
            p_treated: p_t,
            p_control: p_c,
            ratio,
            ci: if ratio.is_some() { ci } else { None },
            n_treated: t.len(),
            n_control: c.len(),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{FollowEvent, GraphBuilder, PhotoEvent, PhotoId, SECONDS_PER_WEEK};
    use alloc::vec;

    const W: i64 = SECONDS_PER_WEEK;

    fn inst(values: &[(usize, f64)], user: u64) -> Instance {
        let mut c = [0.0; COVARIATE_COUNT];
        for &(k, v) in values {
            c[k] = v;
        }
        Instance {
            user: UserId(user),
            week: Week(0),
            covariates: CovariateVector(c),
        }
    }

    fn on_first(xs: &[f64], offset: u64) -> Vec<Instance> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| inst(&[(0, x)], offset + i as u64))
            .collect()
    }

    #[test]
    fn standardized_bias_examples() {
        let sb = |t: &[f64], c: &[f64]| standardized_bias(&on_first(t, 0), &on_first(c, 100), 0);
        assert_eq!(sb(&[1.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((sb(&[0.0, 2.0], &[1.0, 1.5]).unwrap() - (-0.25 / libm::sqrt(2.0))).abs() < 1e-12);
        assert!((sb(&[0.0, 2.0], &[1.0, 1.5]).unwrap() + 0.1768).abs() < 1e-4);
        assert_eq!(sb(&[5.0, 5.0], &[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(sb(&[5.0, 5.0], &[4.0, 5.0, 5.0]), Err(Error::Unbalanceable(0)));
        assert!(matches!(sb(&[5.0], &[4.0]), Err(Error::TooFew { .. })));
    }

    #[test]
    fn balance_of_balanced_groups_is_identity() {
        let t = on_first(&[1.0, 2.0, 3.0], 0);
        let c = on_first(&[1.0, 2.0, 3.0, 1.0, 2.0, 3.0], 100);
        let m = balance(&t, c.clone()).unwrap();
        assert_eq!(m.iterations, 0);
        assert_eq!(m.control, c);
    }

    #[test]
    fn balance_prunes_outliers() {
        let t: Vec<Instance> = (0..20)
            .map(|i| inst(&[(0, (i % 5) as f64), (1, 1.0 + (i % 3) as f64)], i))
            .collect();
        let mut c: Vec<Instance> = (0..200)
            .map(|i| inst(&[(0, (i % 5) as f64), (1, 1.0 + (i % 3) as f64)], 1000 + i))
            .collect();
        // Pollute covariate 0 with extreme values.
        for (k, x) in c.iter_mut().take(30).enumerate() {
            x.covariates.0[0] = 100.0 + k as f64;
        }
        let seed_ids: Vec<UserId> = c.iter().map(|i| i.user).collect();
        let m = balance(&t, c).unwrap();
        assert!(m.iterations > 0);
        assert!(m.sb_before[0] < -SB_THRESHOLD);
        assert!(m.sb_after.iter().all(|s| s.abs() <= SB_THRESHOLD));
        assert!(m.control.len() >= t.len());
        assert!(m.control.iter().all(|i| seed_ids.contains(&i.user)));
        assert_eq!(m.treated, t);
    }

    #[test]
    fn balance_rejects_small_seed() {
        let t = on_first(&[1.0, 2.0, 3.0], 0);
        let c = on_first(&[1.0, 2.0, 3.0], 100);
        assert_eq!(balance(&t, c), Err(Error::ControlTooSmall { treated: 3, control: 3 }));
    }

    #[test]
    fn balance_signals_restart_when_unbalanceable_by_pruning() {
        // Control spread symmetrically far from the treated values on one
        // covariate and far in the opposite direction on another.
        let t: Vec<Instance> = (0..10)
            .map(|i| inst(&[(0, 10.0 + (i % 2) as f64), (1, (i % 2) as f64)], i))
            .collect();
        let c: Vec<Instance> = (0..40)
            .map(|i| {
                let x = i as f64;
                inst(&[(0, x), (1, 40.0 - x)], 100 + i)
            })
            .collect();
        assert!(matches!(balance(&t, c), Err(Error::BalanceRestart { .. })));
    }

    #[test]
    fn prune_quantum() {
        let mut c = on_first(&(0..250).map(f64::from).collect::<Vec<_>>(), 0);
        prune(&mut c, 0, true);
        assert_eq!(c.len(), 247);
        assert!(c.iter().all(|i| i.covariates.0[0] < 247.0));
        prune(&mut c, 0, false);
        assert_eq!(c.len(), 244);
        assert!(c.iter().all(|i| i.covariates.0[0] >= 3.0));
        let mut one = on_first(&[1.0], 0);
        prune(&mut one, 0, false);
        assert!(one.is_empty());
    }

    struct Fixture {
        b: GraphBuilder,
        next_photo: u64,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture {
                b: GraphBuilder::new(),
                next_photo: 0,
            }
        }
        fn photo(&mut self, owner: u64, week: i64, beauty: f64) {
            self.next_photo += 1;
            self.b
                .add_photo(PhotoEvent {
                    owner: UserId(owner),
                    photo: PhotoId(self.next_photo),
                    t: week * W + 10,
                    beauty,
                })
                .unwrap();
        }
        fn follow(&mut self, src: u64, dst: u64, week: i64) {
            self.b
                .add_follow(FollowEvent {
                    src: UserId(src),
                    dst: UserId(dst),
                    t: week * W + 20,
                })
                .unwrap();
        }
        fn build(self) -> TemporalGraph {
            self.b.build().unwrap().0
        }
    }

    /// Users 1..=2 are eligible: 10 background followees (ids 100..) and
    /// uploads in weeks 0..=15.
    fn eligible_pair(f: &mut Fixture, b1: f64, b2: f64) {
        for k in 0..10 {
            f.follow(1, 100 + k, 0);
            f.follow(2, 100 + k, 0);
        }
        for w in 0..16 {
            f.photo(1, w, b1);
            f.photo(2, w, b2);
        }
    }

    #[test]
    fn eligibility_thresholds() {
        let mut f = Fixture::new();
        // 9 followees, 20 active weeks
        for k in 0..9 {
            f.follow(1, 100 + k, 0);
        }
        for w in 0..20 {
            f.photo(1, w, 0.5);
        }
        // 10 followees, 12 active weeks
        for k in 0..10 {
            f.follow(2, 100 + k, 0);
        }
        for w in 0..12 {
            f.photo(2, w, 0.5);
        }
        // 100 followees, 11 active weeks
        for k in 0..100 {
            f.follow(3, 200 + k, 0);
        }
        for w in 0..11 {
            f.photo(3, w, 0.5);
        }
        let g = f.build();
        assert_eq!(eligible_users(&g), vec![UserId(2)]);
    }

    #[test]
    fn covariate_examples() {
        let mut f = Fixture::new();
        for w in 0..3 {
            f.photo(1, w + 5, 0.3);
        }
        f.follow(1, 2, 5);
        f.follow(1, 3, 6);
        f.photo(2, 5, 0.2);
        f.photo(3, 5, 0.6);
        f.follow(4, 1, 6);
        f.follow(1, 4, 9);
        let g = f.build();
        let c = covariates(&g, UserId(1), Week(9)).unwrap().unwrap().0;
        assert_eq!(c[0], 1.0); // indegree
        assert_eq!(c[1], 2.0); // outdegree before week 9
        assert_eq!(c[2], 3.0); // photos in weeks 5..=7
        assert!((c[6] - 0.3).abs() < 1e-12);
        assert_eq!(c[7], 4.0); // join week 5, w = 9
        assert_eq!(c[8], 1.0);
        assert!((c[9] - 0.4).abs() < 1e-12);
        assert_eq!(c[10], 0.0); // user 4 has no photos
        assert_eq!(covariates(&g, UserId(1), Week(5)).unwrap(), None);
    }

    #[test]
    fn neighbor_mean_examples() {
        let mut f = Fixture::new();
        f.photo(2, 0, 0.2);
        f.photo(3, 0, 0.6);
        f.follow(1, 2, 0);
        f.follow(1, 3, 0);
        f.follow(5, 4, 0);
        f.follow(5, 3, 0);
        f.follow(6, 7, 0);
        let g = f.build();
        let nm = |u, w, set| neighbor_mean_beauty(&g, UserId(u), Week(w), set).unwrap();
        assert!((nm(1, 1, NeighborSet::Full).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(nm(5, 1, NeighborSet::Full), Some(0.6));
        assert_eq!(nm(1, 0, NeighborSet::Full), None);
        assert!((nm(1, 0, NeighborSet::New).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(nm(6, 1, NeighborSet::Full), None);
    }

    #[test]
    fn q4_classification() {
        let mut f = Fixture::new();
        eligible_pair(&mut f, 0.3, 0.5);
        // m (b=0.5) and n (b=0.5)
        for w in 0..16 {
            f.photo(50, w, 0.5);
            f.photo(51, w, 0.5);
        }
        f.follow(1, 50, 14); // 0.3 -> 0.5: treated
        f.follow(2, 51, 14); // 0.5 -> 0.5: control
        f.follow(1, 60, 15); // target without photos: ignored
        let g = f.build();
        let groups = build_groups_q4(&g, LinkVariant::Any);
        assert_eq!(groups.treated.len(), 1);
        assert_eq!(groups.treated[0].user, UserId(1));
        assert_eq!(groups.treated[0].week, Week(14));
        assert_eq!(groups.control.len(), 1);
        assert_eq!(groups.control[0].user, UserId(2));
        // weeks without link creation are in neither group
        assert!(groups.treated.iter().chain(&groups.control).all(|i| i.week == Week(14)));

        let exactly_two = build_groups_q4(&g, LinkVariant::ExactlyN(2));
        assert!(exactly_two.treated.is_empty());
        assert_eq!(exactly_two.control.len(), 1);
        let alpha = build_groups_q4(&g, LinkVariant::Alpha(0.5));
        assert_eq!(alpha.treated.len(), 1);
        let alpha = build_groups_q4(&g, LinkVariant::Alpha(1.0));
        assert!(alpha.treated.is_empty());
    }

    #[test]
    fn q5_classification() {
        let mut f = Fixture::new();
        eligible_pair(&mut f, 0.4, 0.4);
        for k in 0..10 {
            f.follow(3, 100 + k, 0);
        }
        for w in 0..16 {
            f.photo(3, w, 0.4);
        }
        for w in 0..16 {
            f.photo(100, w, 0.52);
            f.photo(101, w, 0.40);
            f.photo(102, w, 0.48);
        }
        let g = f.build();
        // Followees with photos: only 100..=102, so each user's neighbor
        // mean is (0.52 + 0.40 + 0.48) / 3 = 0.4667 (δ ≈ 0.167, excluded).
        let groups = build_groups_q5(&g, ImbalanceBands::default());
        assert!(groups.treated.is_empty() && groups.control.is_empty());

        assert!((imbalance_delta(0.4, 0.52).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(imbalance_delta(0.4, 0.4), Some(0.0));
        assert!((imbalance_delta(0.4, 0.48).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(imbalance_delta(0.0, 0.4), None);
    }

    #[test]
    fn q5_groups_follow_delta_bands() {
        let mut f = Fixture::new();
        for (user, target) in [(1u64, 100u64), (2, 101), (3, 102)] {
            for k in 0..9 {
                f.follow(user, 200 + k, 0);
            }
            f.follow(user, target, 0);
            for w in 0..14 {
                f.photo(user, w, 0.4);
            }
        }
        f.photo(100, 0, 0.6); // δ = 0.5 -> treated
        f.photo(101, 0, 0.4); // δ = 0 -> control
        f.photo(102, 0, 0.48); // δ = 0.2 -> excluded
        let g = f.build();
        let groups = build_groups_q5(&g, ImbalanceBands::default());
        let users = |v: &[Instance]| {
            let mut u: Vec<u64> = v.iter().map(|i| i.user.0).collect();
            u.dedup();
            u
        };
        assert_eq!(users(&groups.treated), vec![1]);
        assert_eq!(users(&groups.control), vec![2]);
        assert_eq!(groups.treated.len(), 2); // weeks 12 and 13
    }

    #[test]
    fn delta_b_examples() {
        let mut f = Fixture::new();
        f.photo(1, 0, 0.4);
        f.photo(1, 1, 0.5);
        f.photo(2, 0, 0.4);
        f.photo(2, 1, 0.4);
        f.photo(3, 0, 0.4);
        let g = f.build();
        let at = |u| Instance {
            user: UserId(u),
            week: Week(0),
            covariates: CovariateVector([0.0; COVARIATE_COUNT]),
        };
        let d = outcome_delta_b(&g, &[at(1)]);
        assert!((d.mean().unwrap() - 1.25).abs() < 1e-12);
        let d = outcome_delta_b(&g, &[at(2), at(3)]);
        assert_eq!(d.mean(), Some(1.0));
        assert_eq!(d.no_next_week, 1);
    }

    #[test]
    fn delta_b_mean_of_ratios() {
        let mut f = Fixture::new();
        f.photo(1, 0, 0.5);
        f.photo(1, 1, 0.55);
        f.photo(2, 0, 0.5);
        f.photo(2, 1, 0.45);
        let g = f.build();
        let at = |u| Instance {
            user: UserId(u),
            week: Week(0),
            covariates: CovariateVector([0.0; COVARIATE_COUNT]),
        };
        assert!((outcome_delta_b(&g, &[at(1), at(2)]).mean().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inactivity_examples() {
        let mut f = Fixture::new();
        for u in 1..=8 {
            f.photo(u, 0, 0.5);
        }
        // treated 1..=4: users 1, 2 inactive; control 5..=8: user 5 inactive
        for u in [3, 4, 6, 7, 8] {
            f.photo(u, 1, 0.5);
        }
        f.photo(99, 10, 0.5);
        let g = f.build();
        let at = |u| Instance {
            user: UserId(u),
            week: Week(0),
            covariates: CovariateVector([0.0; COVARIATE_COUNT]),
        };
        let t: Vec<Instance> = (1..=4).map(at).collect();
        let c: Vec<Instance> = (5..=8).map(at).collect();
        let r = outcome_inactivity(&g, &t, &c, 1).unwrap();
        assert_eq!(r.p_treated, 0.5);
        assert_eq!(r.p_control, 0.25);
        assert_eq!(r.ratio, 2.0);
        assert_eq!(outcome_inactivity(&g, &t, &t, 1).unwrap().ratio, 1.0);
        let active: Vec<Instance> = [3, 4].into_iter().map(at).collect();
        assert_eq!(
            outcome_inactivity(&g, &t, &active, 1),
            Err(Error::ZeroDenominator("inactivity ratio"))
        );
        // horizon past the last observed week is censored
        let (flags, censored) = inactivity_indicators(&g, &t, 11);
        assert!(flags.is_empty());
        assert_eq!(censored, 4);
    }

    #[test]
    fn groups_are_disjoint() {
        let mut f = Fixture::new();
        eligible_pair(&mut f, 0.3, 0.5);
        for w in 0..16 {
            f.photo(50, w, 0.4);
        }
        f.follow(1, 50, 13);
        f.follow(2, 50, 13);
        let g = f.build();
        let groups = build_groups_q4(&g, LinkVariant::Any);
        for t in &groups.treated {
            assert!(!groups.control.iter().any(|c| c.key() == t.key()));
        }
        assert_eq!(groups.treated.len() + groups.control.len(), 2);
    }

    #[test]
    fn runner_reports_too_few_instances() {
        let g = GraphBuilder::new().build().unwrap().0;
        let r = run_experiment(&g, &ExperimentSpec::new(ExperimentKind::Q4Any)).unwrap();
        assert!(r.failure.is_some());
        assert!(!r.balanced);
        assert_eq!(r.experiment, "q4_any");
    }

    #[test]
    fn runner_with_synthetic_groups() {
        let mut f = Fixture::new();
        for u in 1..=30u64 {
            f.photo(u, 0, 0.4);
            f.photo(u, 1, if u <= 10 { 0.5 } else { 0.4 });
        }
        let g = f.build();
        let at = |u: u64| Instance {
            user: UserId(u),
            week: Week(0),
            covariates: CovariateVector([(u % 3) as f64; COVARIATE_COUNT]),
        };
        let groups = Groups {
            treated: (1..=10).map(at).collect(),
            control: (11..=30).map(at).collect(),
            skipped: 0,
        };
        let mut spec = ExperimentSpec::new(ExperimentKind::Q4Any);
        spec.bootstrap = 200;
        spec.horizons = vec![1];
        let r = run_on_groups(&g, &spec, groups).unwrap();
        assert!(r.balanced);
        let t = r.delta_b_treated.unwrap();
        assert!((t.mean.unwrap() - 1.25).abs() < 1e-12);
        assert_eq!(r.delta_b_control.unwrap().mean, Some(1.0));
        assert!((r.delta_b_difference.unwrap().estimate.unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(r.covariates.len(), COVARIATE_COUNT);
        assert_eq!(r.inactivity.len(), 1);
    }
}
