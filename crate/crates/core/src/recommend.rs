//! Distance-two link recommendation: common neighbors versus the beauty
//! band rule, and the metrics used to compare them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{GraphSnapshot, UserId};
use crate::metrics::BeautyProfiles;

pub const DEFAULT_BAND: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Rule {
    #[cfg_attr(feature = "serde", serde(rename = "CN"))]
    CommonNeighbors,
    #[cfg_attr(feature = "serde", serde(rename = "BB"))]
    BeautyBand,
}

impl Rule {
    pub fn code(&self) -> &'static str {
        match self {
            Rule::CommonNeighbors => "CN",
            Rule::BeautyBand => "BB",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Recommendation {
    pub recipient: UserId,
    pub candidate: UserId,
    pub rule: Rule,
    pub score: f64,
}

/// Users reachable through a directed two-path `u → v → c` that `u` does
/// not already follow, with the number of distinct intermediaries `v`.
/// Sorted by candidate index.
pub fn candidates(s: &GraphSnapshot, u: usize) -> Vec<(usize, u32)> {
    let direct = s.out_neighbors(u);
    let mut reached: Vec<u32> = Vec::new();
    for &v in direct {
        reached.extend_from_slice(s.out_neighbors(v as usize));
    }
    // Each intermediary contributes each endpoint once (adjacency is
    // deduplicated), so run lengths count distinct intermediaries.
    reached.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < reached.len() {
        let c = reached[i];
        let mut j = i + 1;
        while j < reached.len() && reached[j] == c {
            j += 1;
        }
        if c as usize != u && direct.binary_search(&c).is_err() {
            out.push((c as usize, (j - i) as u32));
        }
        i = j;
    }
    out
}

/// The candidate with most common intermediaries; ties go to the smallest
/// user id.
pub fn recommend_cn(s: &GraphSnapshot, u: usize) -> Option<Recommendation> {
    candidates(s, u)
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| s.id(b.0).cmp(&s.id(a.0))))
        .map(|(c, count)| Recommendation {
            recipient: s.id(u),
            candidate: s.id(c),
            rule: Rule::CommonNeighbors,
            score: f64::from(count),
        })
}

/// Whether `candidate` beauty lies within `±band` (relative) of `own`.
pub fn in_band(own: f64, candidate: f64, band: f64) -> bool {
    (1.0 - band) * own <= candidate && candidate <= (1.0 + band) * own
}

/// The highest-beauty candidate whose beauty is within `±band` of the
/// recipient's; ties go to the smallest user id. Candidates without a
/// profile are skipped.
pub fn recommend_bb(s: &GraphSnapshot, p: &BeautyProfiles, u: usize, band: f64) -> Result<Option<Recommendation>> {
    let own = p.get(u).ok_or(Error::NoProfile(s.id(u).0))?;
    Ok(candidates(s, u)
        .into_iter()
        .filter_map(|(c, _)| p.get(c).map(|b| (c, b)))
        .filter(|&(_, b)| in_band(own, b, band))
        .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| s.id(b.0).cmp(&s.id(a.0))))
        .map(|(c, b)| Recommendation {
            recipient: s.id(u),
            candidate: s.id(c),
            rule: Rule::BeautyBand,
            score: b,
        }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecEvaluation {
    /// Mean beauty of recommended users.
    pub b_recs: f64,
    /// Mean of recipient beauty over recommended beauty.
    pub b_ratio: f64,
    /// Mean favorites received by recommended users.
    pub fav_recs: f64,
    /// Fraction of recommendations pointing into the forlorn-beauty class.
    pub p_forlorn: f64,
    pub count: usize,
}

/// Evaluates recommendations. `favorites` and `forlorn` are indexed like
/// `s` and `p`.
pub fn evaluate(
    s: &GraphSnapshot,
    recs: &[Recommendation],
    p: &BeautyProfiles,
    favorites: &[f64],
    forlorn: &[bool],
) -> Result<RecEvaluation> {
    if recs.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let (mut b_recs, mut b_ratio, mut fav, mut forl) = (0.0, 0.0, 0.0, 0usize);
    for r in recs {
        let ui = s.index_of(r.recipient).ok_or(Error::UnknownUser(r.recipient.0))?;
        let ri = s.index_of(r.candidate).ok_or(Error::UnknownUser(r.candidate.0))?;
        let bu = p.get(ui).ok_or(Error::NoProfile(r.recipient.0))?;
        let br = p.get(ri).ok_or(Error::NoProfile(r.candidate.0))?;
        if br <= 0.0 {
            return Err(Error::ZeroDenominator("beauty ratio"));
        }
        b_recs += br;
        b_ratio += bu / br;
        fav += favorites.get(ri).copied().unwrap_or(0.0);
        if forlorn.get(ri).copied().unwrap_or(false) {
            forl += 1;
        }
    }
    let n = recs.len() as f64;
    Ok(RecEvaluation {
        b_recs: b_recs / n,
        b_ratio: b_ratio / n,
        fav_recs: fav / n,
        p_forlorn: forl as f64 / n,
        count: recs.len(),
    })
}
