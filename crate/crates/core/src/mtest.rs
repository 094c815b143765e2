//! Multiple testing: cutoff classification, ξ-guided selection, the
//! a-priori error rates of a randomly chosen hypothesis and the subset bound.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::mc::{self, McEstimate, SimRng};
use crate::rb::EvidenceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Classification {
    Accepted,
    Rejected,
    Unclassified,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Accepted => "accepted",
            Self::Rejected => "rejected",
            Self::Unclassified => "unclassified",
        })
    }
}

/// Rejection and acceptance cutoffs, `0 < q_r <= 1 <= q_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffPair {
    pub q_r: f64,
    pub q_a: f64,
}

impl CutoffPair {
    pub fn new(q_r: f64, q_a: f64) -> Result<Self> {
        if !(q_r > 0.0 && q_r <= 1.0) {
            return invalid(format!("q_R must lie in (0, 1], got {q_r}"));
        }
        if !(q_a >= 1.0 && q_a.is_finite()) {
            return invalid(format!("q_A must be finite and at least 1, got {q_a}"));
        }
        Ok(Self { q_r, q_a })
    }

    pub fn unit() -> Self {
        Self { q_r: 1.0, q_a: 1.0 }
    }

    pub fn verdict(&self, rb: f64) -> Classification {
        if rb > self.q_a {
            Classification::Accepted
        } else if rb < self.q_r {
            Classification::Rejected
        } else {
            Classification::Unclassified
        }
    }
}

pub fn classify(records: &[EvidenceRecord], cutoffs: CutoffPair) -> Result<Vec<Classification>> {
    let cutoffs = CutoffPair::new(cutoffs.q_r, cutoffs.q_a)?;
    Ok(records.iter().map(|r| cutoffs.verdict(r.rb)).collect())
}

/// Verdicts crossed with the truth of each null hypothesis.
///
/// Rows are accepted / rejected / unclassified, columns are "null true" and
/// "null false".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 2]; 3],
}

impl ConfusionMatrix {
    pub fn tabulate(verdicts: &[Classification], null_true: &[bool]) -> Result<Self> {
        if verdicts.len() != null_true.len() {
            return invalid(format!(
                "{} verdicts but {} truth labels",
                verdicts.len(),
                null_true.len()
            ));
        }
        let mut m = Self::default();
        for (v, &t) in verdicts.iter().zip(null_true) {
            m.counts[Self::row(*v)][usize::from(!t)] += 1;
        }
        Ok(m)
    }

    fn row(v: Classification) -> usize {
        match v {
            Classification::Accepted => 0,
            Classification::Rejected => 1,
            Classification::Unclassified => 2,
        }
    }

    pub fn get(&self, verdict: Classification, null_true: bool) -> usize {
        self.counts[Self::row(verdict)][usize::from(!null_true)]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// True nulls that were rejected.
    pub fn false_positives(&self) -> usize {
        self.get(Classification::Rejected, true)
    }

    /// False nulls that were accepted.
    pub fn false_negatives(&self) -> usize {
        self.get(Classification::Accepted, false)
    }

    pub fn true_nulls(&self) -> usize {
        (0..3).map(|r| self.counts[r][0]).sum()
    }

    pub fn false_nulls(&self) -> usize {
        (0..3).map(|r| self.counts[r][1]).sum()
    }

    pub fn unclassified(&self) -> usize {
        self.counts[2][0] + self.counts[2][1]
    }

    pub fn misclassified(&self) -> usize {
        self.false_positives() + self.false_negatives()
    }

    /// Verdict-by-truth layout with one row per verdict.
    pub fn write_csv<W: Write>(&self, out: W, cutoffs: CutoffPair) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["decision", "null_true", "null_false"])?;
        let labels = [
            format!("accept (q_A={})", cutoffs.q_a),
            format!("reject (q_R={})", cutoffs.q_r),
            "not classified".to_string(),
        ];
        for (label, row) in labels.iter().zip(&self.counts) {
            w.write_record([label.clone(), row[0].to_string(), row[1].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Effect-detection layout: "positive" means a nonzero effect, i.e. a
    /// false null, and a rejection is a positive classification.
    pub fn write_detection_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["truth", "classified_positive", "classified_negative", "not_classified", "total"])?;
        let row = |null_true: bool| {
            let pos = self.get(Classification::Rejected, null_true);
            let neg = self.get(Classification::Accepted, null_true);
            let unc = self.get(Classification::Unclassified, null_true);
            [pos, neg, unc, pos + neg + unc]
        };
        let (p, n) = (row(false), row(true));
        for (label, r) in [("true_positive", p), ("true_negative", n)] {
            w.write_record(std::iter::once(label.to_string()).chain(r.iter().map(|c| c.to_string())))?;
        }
        let tot: Vec<String> = (0..4).map(|j| (p[j] + n[j]).to_string()).collect();
        w.write_record(std::iter::once("total".to_string()).chain(tot))?;
        w.flush()?;
        Ok(())
    }
}

/// Hypotheses picked by the ξ-guided algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Selection {
    pub accepted: Vec<usize>,
    pub rejected: Vec<usize>,
}

/// Accept at most `floor(k ξ)` of the hypotheses with rb > 1, strongest
/// first, and reject at most `floor(k (1 - ξ))` of those with rb < 1, most
/// decisive evidence against first.
pub fn mt_select(records: &[EvidenceRecord], xi: f64) -> Result<Selection> {
    if !(0.0..=1.0).contains(&xi) {
        return invalid(format!("ξ must lie in [0, 1], got {xi}"));
    }
    let k = records.len();
    // Guard against xi*k landing a hair under an integer.
    let cap = |p: f64| ((k as f64) * p + 1e-9).floor() as usize;

    let mut favour: Vec<usize> = (0..k).filter(|&i| records[i].rb > 1.0).collect();
    favour.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        rb.strength
            .total_cmp(&ra.strength)
            .then(rb.rb.total_cmp(&ra.rb))
            .then(a.cmp(&b))
    });
    favour.truncate(cap(xi));

    let mut against: Vec<usize> = (0..k).filter(|&i| records[i].rb < 1.0).collect();
    against.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        ra.strength
            .total_cmp(&rb.strength)
            .then(ra.rb.total_cmp(&rb.rb))
            .then(a.cmp(&b))
    });
    against.truncate(cap(1.0 - xi));

    favour.sort_unstable();
    against.sort_unstable();
    Ok(Selection { accepted: favour, rejected: against })
}

/// A model that can simulate data from the conditional prior given a
/// hypothesized value and report the resulting relative belief ratios.
pub trait NullSimulator: Sync {
    fn hypotheses(&self) -> usize;

    /// RB of hypothesis `i` for data generated with `ψ_i = ψ_0i`.
    fn rb_under_null(&self, i: usize, rng: &mut SimRng) -> f64;

    /// RB of hypothesis `i` for data generated with `ψ_i = ψ_0i ± offset`,
    /// the sign chosen with equal probability.
    fn rb_under_alternative(&self, i: usize, offset: f64, rng: &mut SimRng) -> f64;

    /// All `k` RBs for one data set generated with every null true.
    fn rb_all_under_null(&self, rng: &mut SimRng) -> Vec<f64> {
        (0..self.hypotheses()).map(|i| self.rb_under_null(i, rng)).collect()
    }
}

fn pick(k: usize, rng: &mut SimRng) -> usize {
    use rand::Rng;
    rng.random_range(0..k)
}

/// Prior probability that a randomly chosen hypothesis yields a false
/// positive, `k^{-1} Σ M(RB_i < q_R | ψ_0i)`.
pub fn fp_rate_mc<S: NullSimulator + ?Sized>(
    sim: &S,
    q_r: f64,
    draws: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<McEstimate> {
    if !(q_r > 0.0 && q_r <= 1.0) {
        return invalid(format!("q_R must lie in (0, 1], got {q_r}"));
    }
    let k = sim.hypotheses();
    mc::mc_mean(seed, draws, workers, |rng| {
        let i = pick(k, rng);
        f64::from(u8::from(sim.rb_under_null(i, rng) < q_r))
    })
}

/// Prior probability that a randomly chosen hypothesis yields a false
/// negative at the alternatives `ψ_0i ± offset`.
pub fn fn_rate_mc<S: NullSimulator + ?Sized>(
    sim: &S,
    q_a: f64,
    offset: f64,
    draws: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<McEstimate> {
    if !(q_a >= 1.0) {
        return invalid(format!("q_A must be at least 1, got {q_a}"));
    }
    if !(offset >= 0.0 && offset.is_finite()) {
        return invalid(format!("alternative offset must be nonnegative, got {offset}"));
    }
    let k = sim.hypotheses();
    mc::mc_mean(seed, draws, workers, |rng| {
        let i = pick(k, rng);
        f64::from(u8::from(sim.rb_under_alternative(i, offset, rng) > q_a))
    })
}

/// Binomial coefficient as f64 (exact for the ranges used here).
pub fn choose(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn choose_u64(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u64, |acc, j| acc * (n - j) as u64 / (j + 1) as u64)
}

/// Prior probability that a random `l`-subset of the hypotheses contains at
/// least one false positive when every null is true.
pub fn at_least_one_fp<S: NullSimulator + ?Sized>(
    sim: &S,
    l: usize,
    q_r: f64,
    draws: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<McEstimate> {
    let k = sim.hypotheses();
    if !(1..=k).contains(&l) {
        return invalid(format!("subset size must lie in 1..={k}, got {l}"));
    }
    if !(q_r > 0.0 && q_r <= 1.0) {
        return invalid(format!("q_R must lie in (0, 1], got {q_r}"));
    }
    let total = choose(k, l);
    mc::mc_mean(seed, draws, workers, |rng| {
        let j = sim.rb_all_under_null(rng).iter().filter(|&&r| r < q_r).count();
        1.0 - choose(k - j, l) / total
    })
}

/// `S_{l,k}`: number of `l`-subsets of the events containing at least one
/// that occurred, by direct enumeration.
pub fn s_lk_enumerated(occurred: &[bool], l: usize) -> u64 {
    let k = occurred.len();
    let mut count = 0;
    for mask in 0u32..(1u32 << k) {
        if mask.count_ones() as usize != l {
            continue;
        }
        if (0..k).any(|i| mask & (1 << i) != 0 && occurred[i]) {
            count += 1;
        }
    }
    count
}

/// `S_{l,k}` from the decomposition over the events Δ(i) that exactly `i`
/// of the events occur:
/// `C(k,l) Σ_{i<k} I_Δ(k-i) - Σ_{i=l}^{k-1} C(i,l) I_Δ(k-i)`.
pub fn s_lk_identity(occurred: &[bool], l: usize) -> u64 {
    let k = occurred.len();
    let exactly = occurred.iter().filter(|&&b| b).count();
    let mut s = 0u64;
    let mut sub = 0u64;
    for i in 0..k {
        if exactly == k - i {
            s += choose_u64(k, l);
            if i >= l {
                sub += choose_u64(i, l);
            }
        }
    }
    s - sub
}

pub const LEMMA1_MAX_EVENTS: usize = 12;

/// Subset-averaged probability that at least one of `l` randomly chosen
/// events occurs, computed exactly from a matrix of event indicators (one row
/// per equally weighted draw).
pub fn lemma1_exact(indicators: &[Vec<bool>], l: usize) -> Result<f64> {
    let Some(k) = indicators.first().map(Vec::len) else {
        return invalid("need at least one draw");
    };
    if k > LEMMA1_MAX_EVENTS {
        return invalid(format!("exact enumeration supports at most {LEMMA1_MAX_EVENTS} events, got {k}"));
    }
    if !(1..=k).contains(&l) {
        return invalid(format!("subset size must lie in 1..={k}, got {l}"));
    }
    if indicators.iter().any(|r| r.len() != k) {
        return invalid("indicator rows have unequal lengths");
    }
    let denom = choose_u64(k, l) as f64;
    let total: f64 = indicators.iter().map(|r| s_lk_enumerated(r, l) as f64 / denom).sum();
    Ok(total / indicators.len() as f64)
}
