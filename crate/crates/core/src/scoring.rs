//! Beauty scores from three-way quality classifier outputs, and the
//! statistics used to validate a scorer against human ratings.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::PhotoId;
use crate::stats;

pub use crate::stats::spearman_rho;

const TRIPLE_TOLERANCE: f64 = 1e-6;

/// Softmax output of a low / medium / high quality classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityTriple {
    p_low: f64,
    p_medium: f64,
    p_high: f64,
}

impl QualityTriple {
    pub fn new(p_low: f64, p_medium: f64, p_high: f64) -> Result<Self> {
        for p in [p_low, p_medium, p_high] {
            if !(-TRIPLE_TOLERANCE..=1.0 + TRIPLE_TOLERANCE).contains(&p) || p.is_nan() {
                return Err(Error::ProbabilityOutOfRange(p));
            }
        }
        let sum = p_low + p_medium + p_high;
        if (sum - 1.0).abs() > TRIPLE_TOLERANCE {
            return Err(Error::TripleNotNormalized(sum));
        }
        Ok(QualityTriple {
            p_low,
            p_medium,
            p_high,
        })
    }

    pub fn p_low(&self) -> f64 {
        self.p_low
    }

    pub fn p_medium(&self) -> f64 {
        self.p_medium
    }

    pub fn p_high(&self) -> f64 {
        self.p_high
    }

    /// The triple with low and high probabilities exchanged.
    pub fn swapped(&self) -> Self {
        QualityTriple {
            p_low: self.p_high,
            p_medium: self.p_medium,
            p_high: self.p_low,
        }
    }
}

/// Scalar photo quality in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct BeautyScore(f64);

impl BeautyScore {
    pub fn new(s: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&s) {
            Ok(BeautyScore(s))
        } else {
            Err(Error::BeautyOutOfRange(s))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Half the margin of the high over the low probability, shifted into
/// [0, 1]. The medium probability does not contribute.
pub fn beauty_score(q: &QualityTriple) -> BeautyScore {
    let s = 0.5 * (q.p_high - q.p_low + 1.0);
    BeautyScore(s.clamp(0.0, 1.0))
}

/// Maps a score onto the 1..=5 absolute category scale using five
/// equal-width bins; the top bin is closed.
pub fn rescale_to_5pt(s: BeautyScore) -> u8 {
    let grade = libm::floor(s.0 * 5.0) as i64 + 1;
    grade.clamp(1, 5) as u8
}

/// One human judgement on the five-point scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HumanRating {
    pub item: u64,
    pub rater: u64,
    pub grade: u8,
}

impl HumanRating {
    pub fn new(item: u64, rater: u64, grade: i64) -> Result<Self> {
        if !(1..=5).contains(&grade) {
            return Err(Error::InvalidGrade(grade));
        }
        Ok(HumanRating {
            item,
            rater,
            grade: grade as u8,
        })
    }
}

/// Complete item × rater grade matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    pub items: Vec<u64>,
    pub raters: Vec<u64>,
    /// `grades[item][rater]`
    pub grades: Vec<Vec<f64>>,
}

impl RatingMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::IncompleteRatings(format!("rows must all have {width} raters")));
        }
        Ok(RatingMatrix {
            items: (0..rows.len() as u64).collect(),
            raters: (0..width as u64).collect(),
            grades: rows,
        })
    }

    /// Pivots individual ratings; every item must be rated by every rater
    /// exactly once.
    pub fn from_ratings(ratings: &[HumanRating]) -> Result<Self> {
        let mut cells: BTreeMap<(u64, u64), u8> = BTreeMap::new();
        for r in ratings {
            if cells.insert((r.item, r.rater), r.grade).is_some() {
                return Err(Error::IncompleteRatings(format!(
                    "item {} rated twice by rater {}",
                    r.item, r.rater
                )));
            }
        }
        let mut items: Vec<u64> = ratings.iter().map(|r| r.item).collect();
        let mut raters: Vec<u64> = ratings.iter().map(|r| r.rater).collect();
        items.sort_unstable();
        items.dedup();
        raters.sort_unstable();
        raters.dedup();
        let mut grades = Vec::with_capacity(items.len());
        for &item in &items {
            let mut row = Vec::with_capacity(raters.len());
            for &rater in &raters {
                let g = cells
                    .get(&(item, rater))
                    .ok_or_else(|| Error::IncompleteRatings(format!("item {item} has no grade from rater {rater}")))?;
                row.push(f64::from(*g));
            }
            grades.push(row);
        }
        Ok(RatingMatrix { items, raters, grades })
    }

    /// Mean grade per item.
    pub fn item_means(&self) -> Vec<f64> {
        self.grades.iter().map(|row| stats::mean(row).unwrap_or(0.0)).collect()
    }
}

/// Cronbach's α with raters as the scale components:
/// `k/(k−1) · (1 − Σ var(rater column) / var(item totals))`, sample
/// variances over items.
pub fn cronbach_alpha(m: &RatingMatrix) -> Result<f64> {
    let n_items = m.grades.len();
    let k = m.grades.first().map_or(0, Vec::len);
    if k < 2 {
        return Err(Error::TooFew { needed: 2, got: k });
    }
    if n_items < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: n_items,
        });
    }
    let mut rater_var_sum = 0.0;
    for j in 0..k {
        let column: Vec<f64> = m.grades.iter().map(|row| row[j]).collect();
        rater_var_sum += stats::sample_variance(&column).unwrap_or(0.0);
    }
    let totals: Vec<f64> = m.grades.iter().map(|row| row.iter().sum()).collect();
    let total_var = stats::sample_variance(&totals).unwrap_or(0.0);
    if total_var == 0.0 {
        return Err(Error::ZeroVariance("Cronbach's alpha"));
    }
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - rater_var_sum / total_var))
}

/// Mean human score per tenth of the predicted range, `[0, 0.1)`, …,
/// `[0.9, 1.0]`; `None` marks an empty bucket.
pub fn decile_curve(predicted: &[f64], human: &[f64]) -> Result<[Option<f64>; 10]> {
    if predicted.len() != human.len() {
        return Err(Error::LengthMismatch(predicted.len(), human.len()));
    }
    let mut sums = [0.0; 10];
    let mut counts = [0usize; 10];
    for (&p, &h) in predicted.iter().zip(human) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BeautyOutOfRange(p));
        }
        let b = (libm::floor(p * 10.0) as usize).min(9);
        sums[b] += h;
        counts[b] += 1;
    }
    let mut out = [None; 10];
    for b in 0..10 {
        if counts[b] > 0 {
            out[b] = Some(sums[b] / counts[b] as f64);
        }
    }
    Ok(out)
}

/// Source of photo beauty when the input carries none.
pub trait Scorer {
    fn triple(&self, photo: PhotoId) -> QualityTriple;

    fn score(&self, photo: PhotoId) -> BeautyScore {
        beauty_score(&self.triple(photo))
    }
}

/// Deterministic stand-in for a trained classifier: the triple is a pure
/// function of `(seed, photo)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticScorer {
    pub seed: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl Scorer for SyntheticScorer {
    fn triple(&self, photo: PhotoId) -> QualityTriple {
        let h1 = splitmix64(self.seed ^ splitmix64(photo.0));
        let h2 = splitmix64(h1);
        let h3 = splitmix64(h2);
        let unit = |h: u64| ((h >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
        let (a, b, c) = (unit(h1), unit(h2), unit(h3));
        let sum = a + b + c;
        QualityTriple {
            p_low: a / sum,
            p_medium: b / sum,
            p_high: c / sum,
        }
    }
}
