//! Relative belief ratios on a discretized scalar parameter.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

const SUM_TOL: f64 = 1e-10;

/// Partition of the real line into `2T + 1` interior cells of width `delta`
/// centred on `center`, plus a left and a right tail.
///
/// Cell indices run left to right: `0` is the left tail, `1..=2T+1` are the
/// interior cells `t = -T..=T`, and `2T + 2` is the right tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub center: f64,
    pub delta: f64,
    pub t_max: usize,
}

impl Grid {
    pub fn new(center: f64, delta: f64, t_max: usize) -> Result<Self> {
        if !center.is_finite() {
            return invalid(format!("grid center must be finite, got {center}"));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return invalid(format!("grid width must be positive and finite, got {delta}"));
        }
        Ok(Self { center, delta, t_max })
    }

    /// Grid whose interior spans `(center - half_range, center + half_range)`,
    /// i.e. `T = ceil(half_range / delta - 1/2)`.
    pub fn spanning(center: f64, delta: f64, half_range: f64) -> Result<Self> {
        if !(half_range.is_finite() && half_range > 0.0) {
            return invalid(format!("grid half range must be positive, got {half_range}"));
        }
        let t = (half_range / delta - 0.5).ceil().max(0.0);
        Self::new(center, delta, t as usize)
    }

    pub fn n_cells(&self) -> usize {
        2 * self.t_max + 3
    }

    /// Index of the cell containing the center (`t = 0`).
    pub fn null_index(&self) -> usize {
        self.t_max + 1
    }

    pub fn index_of_t(&self, t: i64) -> Option<usize> {
        let tm = self.t_max as i64;
        (-tm..=tm).contains(&t).then(|| (t + tm + 1) as usize)
    }

    /// Interior offset `t` of a cell, `None` for the two tails.
    pub fn t_of(&self, index: usize) -> Option<i64> {
        (1..=2 * self.t_max + 1)
            .contains(&index)
            .then(|| index as i64 - self.t_max as i64 - 1)
    }

    /// `(lower, upper]` bounds of a cell, with infinite ends for the tails.
    pub fn bounds(&self, index: usize) -> (f64, f64) {
        let edge = |s: f64| self.center + s * self.delta;
        let half = self.t_max as f64 + 0.5;
        match self.t_of(index) {
            Some(t) => (edge(t as f64 - 0.5), edge(t as f64 + 0.5)),
            None if index == 0 => (f64::NEG_INFINITY, edge(-half)),
            None => (edge(half), f64::INFINITY),
        }
    }

    /// Cell midpoint; tails report the midpoint of the next cell outwards.
    pub fn midpoint(&self, index: usize) -> f64 {
        let t = match self.t_of(index) {
            Some(t) => t,
            None if index == 0 => -(self.t_max as i64) - 1,
            None => self.t_max as i64 + 1,
        };
        self.center + t as f64 * self.delta
    }

    pub fn locate(&self, value: f64) -> usize {
        let s = (value - self.center) / self.delta;
        // cells are closed on the right: (t - 1/2, t + 1/2]
        let t = (s - 0.5).ceil() as i64;
        let tm = self.t_max as i64;
        if t < -tm {
            0
        } else if t > tm {
            self.n_cells() - 1
        } else {
            (t + tm + 1) as usize
        }
    }

    /// Masses of every cell under a distribution, given a function returning
    /// the probability of an interval `(a, b]` (with infinite ends allowed).
    pub fn masses(&self, interval: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.n_cells())
            .map(|i| {
                let (a, b) = self.bounds(i);
                interval(a, b).max(0.0)
            })
            .collect()
    }

    /// Tie-break key for estimates: smaller `|t|` first, then the negative side.
    fn tie_key(&self, index: usize) -> (u64, u8) {
        let t = match self.t_of(index) {
            Some(t) => t,
            None if index == 0 => -(self.t_max as i64) - 1,
            None => self.t_max as i64 + 1,
        };
        (t.unsigned_abs(), u8::from(t > 0))
    }
}

/// Prior and posterior probability vectors over the cells of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBelief {
    grid: Option<Grid>,
    prior: Vec<f64>,
    posterior: Vec<f64>,
}

impl DiscreteBelief {
    /// Belief over an arbitrary finite partition (no grid geometry).
    pub fn new(prior: Vec<f64>, posterior: Vec<f64>) -> Result<Self> {
        validate(&prior, &posterior)?;
        Ok(Self { grid: None, prior, posterior })
    }

    pub fn on_grid(grid: Grid, prior: Vec<f64>, posterior: Vec<f64>) -> Result<Self> {
        if prior.len() != grid.n_cells() {
            return invalid(format!(
                "grid has {} cells but {} masses were supplied",
                grid.n_cells(),
                prior.len()
            ));
        }
        validate(&prior, &posterior)?;
        Ok(Self { grid: Some(grid), prior, posterior })
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn posterior(&self) -> &[f64] {
        &self.posterior
    }

    pub fn len(&self) -> usize {
        self.prior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prior.is_empty()
    }

    /// Relative belief ratio of every cell; `None` where the prior vanishes.
    pub fn ratios(&self) -> Vec<Option<f64>> {
        self.prior
            .iter()
            .zip(&self.posterior)
            .map(|(&p, &q)| (p > 0.0).then(|| q / p))
            .collect()
    }

    fn tie_key(&self, index: usize) -> (u64, u8) {
        match &self.grid {
            Some(g) => g.tie_key(index),
            None => (index as u64, 0),
        }
    }
}

fn validate(prior: &[f64], posterior: &[f64]) -> Result<()> {
    if prior.is_empty() {
        return invalid("a belief needs at least one cell");
    }
    if prior.len() != posterior.len() {
        return invalid(format!(
            "prior has {} cells, posterior has {}",
            prior.len(),
            posterior.len()
        ));
    }
    for (name, v) in [("prior", prior), ("posterior", posterior)] {
        if v.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return invalid(format!("{name} masses must be finite and nonnegative"));
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return invalid(format!("{name} masses sum to {s}, not 1"));
        }
    }
    if let Some(cell) = (0..prior.len()).find(|&i| prior[i] == 0.0 && posterior[i] > 0.0) {
        return Err(Error::UndefinedEvidence { cell });
    }
    Ok(())
}

/// Evidence summary for one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvidenceRecord {
    pub rb: f64,
    pub strength: f64,
    pub cell_index: usize,
}

fn check_cell(belief: &DiscreteBelief, cell: usize) -> Result<f64> {
    if cell >= belief.len() {
        return invalid(format!("cell {cell} out of range (belief has {} cells)", belief.len()));
    }
    let p = belief.prior[cell];
    if p <= 0.0 {
        return Err(Error::UndefinedEvidence { cell });
    }
    Ok(belief.posterior[cell] / p)
}

/// Relative belief ratio of a cell: posterior mass over prior mass.
pub fn rb_at(belief: &DiscreteBelief, cell: usize) -> Result<f64> {
    check_cell(belief, cell)
}

/// Posterior probability of the cells whose ratio does not exceed that of
/// `cell` (ties included).
pub fn strength_at(belief: &DiscreteBelief, cell: usize) -> Result<f64> {
    let r = check_cell(belief, cell)?;
    let s: f64 = belief
        .prior
        .iter()
        .zip(&belief.posterior)
        .filter(|(&p, _)| p > 0.0)
        .filter(|(&p, &q)| q / p <= r)
        .map(|(_, &q)| q)
        .sum();
    Ok(s.min(1.0))
}

pub fn evidence(belief: &DiscreteBelief, cell: usize) -> Result<EvidenceRecord> {
    Ok(EvidenceRecord {
        rb: rb_at(belief, cell)?,
        strength: strength_at(belief, cell)?,
        cell_index: cell,
    })
}

/// Cell maximizing the relative belief ratio.
pub fn rb_estimate(belief: &DiscreteBelief) -> usize {
    let ratios = belief.ratios();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in ratios.iter().enumerate() {
        let Some(r) = *r else { continue };
        best = match best {
            None => Some((i, r)),
            Some((j, s)) if r > s || (r == s && belief.tie_key(i) < belief.tie_key(j)) => Some((i, r)),
            keep => keep,
        };
    }
    best.map(|(i, _)| i).unwrap_or(0)
}

/// The `gamma` relative belief credible region: cells with ratio at least
/// `c = inf{c : posterior(rb > c) <= gamma}`.
pub fn credible_region(belief: &DiscreteBelief, gamma: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&gamma) {
        return invalid(format!("credible content must lie in [0, 1], got {gamma}"));
    }
    let mut cells: Vec<(f64, f64)> = belief
        .prior
        .iter()
        .zip(&belief.posterior)
        .filter(|(&p, &q)| p > 0.0 && q > 0.0)
        .map(|(&p, &q)| (q / p, q))
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Walk the distinct ratios downwards; mass_above is posterior(rb > current).
    let mut threshold = cells.first().map_or(f64::INFINITY, |c| c.0);
    let mut mass_above = 0.0;
    let mut i = 0;
    while i < cells.len() {
        let r = cells[i].0;
        if mass_above > gamma + 1e-12 {
            break;
        }
        threshold = r;
        while i < cells.len() && cells[i].0 == r {
            mass_above += cells[i].1;
            i += 1;
        }
    }
    Ok((0..belief.len())
        .filter(|&j| {
            let (p, q) = (belief.prior[j], belief.posterior[j]);
            p > 0.0 && q > 0.0 && q / p >= threshold
        })
        .collect())
}
