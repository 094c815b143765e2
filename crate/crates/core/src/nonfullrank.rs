//! Regression with `k + 1 > n` through the Moore-Penrose parametrization.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::mc::{self, SimRng};
use crate::mtest::{classify, Classification, ConfusionMatrix, CutoffPair};
use crate::rb::{EvidenceRecord, Grid};
use crate::regression::{conjugate_update, numerical_rank, spd_inverse, t_cell_belief, RegressionPrior, RANK_TOL};
use crate::specfun::t_interval;

/// Predictor columns split into a basis `X1` and the dependent rest `X2 = X1 B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSplit {
    pub x1: DMatrix<f64>,
    pub x2: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Original column indices of `X1`, then of `X2`.
    pub permutation: Vec<usize>,
}

impl BasisSplit {
    pub fn l(&self) -> usize {
        self.x1.ncols()
    }

    pub fn k(&self) -> usize {
        self.permutation.len()
    }

    /// Reorders a vector given in split order back to the original columns.
    pub fn to_original(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (pos, &orig) in self.permutation.iter().enumerate() {
            out[orig] = v[pos];
        }
        out
    }

    pub fn to_split(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), self.permutation.iter().map(|&j| v[j]))
    }

    fn matrix_to_original(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let k = self.k();
        let mut out = DMatrix::zeros(k, k);
        for (a, &ia) in self.permutation.iter().enumerate() {
            for (b, &ib) in self.permutation.iter().enumerate() {
                out[(ia, ib)] = m[(a, b)];
            }
        }
        out
    }

    /// `(I_l  B)'`, the map from `ω` to `β^MP` in split order.
    pub fn lift(&self) -> DMatrix<f64> {
        let l = self.l();
        let mut out = DMatrix::zeros(self.k(), l);
        out.view_mut((0, 0), (l, l)).fill_with_identity();
        out.view_mut((l, 0), (self.k() - l, l)).copy_from(&self.b.transpose());
        out
    }

    /// `I_l + BB'`.
    pub fn gram(&self) -> DMatrix<f64> {
        DMatrix::identity(self.l(), self.l()) + &self.b * self.b.transpose()
    }
}

/// Picks the first columns, in order, that add a new direction; the count
/// must match the numerical rank.
pub fn split_basis(x: &DMatrix<f64>) -> Result<BasisSplit> {
    let k = x.ncols();
    if k == 0 || x.nrows() == 0 {
        return invalid("predictor block is empty");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("predictor block has non-finite entries");
    }
    let rank = numerical_rank(x);
    if rank == 0 {
        return Err(Error::RankDeficient { rank: 0, required: 1 });
    }
    let scale = x.column_iter().map(|c| c.norm()).fold(0.0, f64::max);

    let mut q: Vec<DVector<f64>> = Vec::with_capacity(rank);
    let mut basis = Vec::with_capacity(rank);
    let mut rest = Vec::new();
    for j in 0..k {
        let mut v = x.column(j).clone_owned();
        for _ in 0..2 {
            for u in &q {
                let c = u.dot(&v);
                v.axpy(-c, u, 1.0);
            }
        }
        let norm = v.norm();
        if q.len() < rank && norm > 1e3 * RANK_TOL * scale {
            q.push(v / norm);
            basis.push(j);
        } else {
            rest.push(j);
        }
    }
    if basis.len() != rank {
        return Err(Error::RankDeficient { rank: basis.len(), required: rank });
    }

    let x1 = x.select_columns(&basis);
    let x2 = x.select_columns(&rest);
    let g_inv = spd_inverse(&x1.tr_mul(&x1), "X1'X1")?;
    let b = &g_inv * x1.tr_mul(&x2);
    let mut permutation = basis;
    permutation.extend(rest);
    Ok(BasisSplit { x1, x2, b, permutation })
}

/// Minimum-norm coefficients producing the same linear predictor as `beta`
/// (original column order): `(I_l B)' (I_l + BB')⁻¹ (β_{1:l} + B β_{l+1:k})`.
pub fn mp_solution(beta: &DVector<f64>, split: &BasisSplit) -> Result<DVector<f64>> {
    if beta.len() != split.k() {
        return invalid(format!("coefficient vector has {} entries, expected {}", beta.len(), split.k()));
    }
    let l = split.l();
    let s = split.to_split(beta);
    let rhs = s.rows(0, l) + &split.b * s.rows(l, split.k() - l);
    let omega = split.gram().cholesky().ok_or(Error::NotPositiveDefinite("I + BB'"))?.solve(&rhs);
    Ok(split.to_original(&(split.lift() * omega)))
}

/// Posterior of `β^MP` (original column order) and of `1/σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct MpPosterior {
    pub beta_mp_mean: DVector<f64>,
    pub scale_mp: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub shape: f64,
    pub rate: f64,
    /// Posterior mean of the intercept.
    pub beta0_mean: f64,
    /// Prior covariance of `β^MP` given `σ² = 1`, `Σ0(B)`, original order.
    pub prior_scale: DMatrix<f64>,
}

impl MpPosterior {
    pub fn dof(&self) -> f64 {
        2.0 * self.shape
    }

    /// Location and scale of the marginal posterior t of coordinate `i`.
    pub fn marginal(&self, i: usize) -> (f64, f64) {
        (self.beta_mp_mean[i], (2.0 * self.rate * self.scale_mp[(i, i)] / self.dof()).sqrt())
    }

    /// Scale of the marginal prior `(λ0² α2 σ_ii(B) / α1)^{1/2} t_{2α1}`.
    pub fn prior_marginal_scale(&self, prior: &RegressionPrior, i: usize) -> f64 {
        (prior.alpha2 * self.prior_scale[(i, i)] / prior.alpha1).sqrt()
    }
}

/// Conjugate posterior in the full-rank reparametrization
/// `X* = (1, X1 + X2 B')` with coefficients `(β0, ω)`.
pub fn mp_posterior(split: &BasisSplit, y: &DVector<f64>, prior: &RegressionPrior) -> Result<MpPosterior> {
    let n = split.x1.nrows();
    if y.len() != n {
        return invalid(format!("design has {n} rows but y has {} entries", y.len()));
    }
    let l = split.l();
    let w = &split.x1 + &split.x2 * split.b.transpose();
    let mut xs = DMatrix::from_element(n, l + 1, 1.0);
    xs.view_mut((0, 1), (n, l)).copy_from(&w);

    let lam_inv2 = 1.0 / (prior.lambda0 * prior.lambda0);
    let gram = split.gram();
    let mut precision = DMatrix::zeros(l + 1, l + 1);
    precision[(0, 0)] = lam_inv2;
    precision.view_mut((1, 1), (l, l)).copy_from(&(&gram * lam_inv2));

    let (post, _) = conjugate_update(&xs, y, &precision, prior.alpha1, prior.alpha2)?;
    let lift = split.lift();
    let omega = post.beta_mean.rows(1, l).clone_owned();
    let omega_scale = post.scale.view((1, 1), (l, l)).clone_owned();
    let scale_mp = &lift * &omega_scale * lift.transpose();

    let g1 = split.x1.tr_mul(&split.x1);
    let g1_inv = spd_inverse(&g1, "X1'X1")?;
    let d = (&gram + &g1_inv * lam_inv2)
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite("I + BB' + λ0⁻²(X1'X1)⁻¹"))?;
    let e = spd_inverse(&(&gram * &g1 * &gram + &gram * lam_inv2), "E")?;

    let gram_inv = spd_inverse(&gram, "I + BB'")?;
    let prior_scale = &lift * gram_inv * lift.transpose() * (prior.lambda0 * prior.lambda0);

    Ok(MpPosterior {
        beta_mp_mean: split.to_original(&(&lift * omega)),
        scale_mp: split.matrix_to_original(&scale_mp),
        d,
        e,
        shape: post.shape,
        rate: post.rate,
        beta0_mean: post.beta_mean[0],
        prior_scale: split.matrix_to_original(&prior_scale),
    })
}

/// Relative belief ratio of the cell `(-δ/2, δ/2]` for coordinate `i`.
pub fn rb_mp_zero_cell(post: &MpPosterior, prior: &RegressionPrior, i: usize, delta: f64) -> Result<f64> {
    if i >= post.beta_mp_mean.len() {
        return invalid(format!("coordinate {i} out of range"));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return invalid(format!("δ must be positive, got {delta}"));
    }
    let (loc, s) = post.marginal(i);
    let s0 = post.prior_marginal_scale(prior, i);
    let h = 0.5 * delta;
    let num = t_interval((-h - loc) / s, (h - loc) / s, post.dof());
    let den = t_interval(-h / s0, h / s0, 2.0 * prior.alpha1);
    if den <= 0.0 {
        return Err(Error::UndefinedEvidence { cell: 0 });
    }
    Ok(num / den)
}

/// Evidence records for every coordinate of `β^MP` on grids of width `delta`.
pub fn analyze_mp(post: &MpPosterior, prior: &RegressionPrior, delta: f64) -> Result<Vec<EvidenceRecord>> {
    (0..post.beta_mp_mean.len())
        .map(|i| {
            let (loc, s) = post.marginal(i);
            let s0 = post.prior_marginal_scale(prior, i);
            let grid = crate::regression::coefficient_grid(loc, s, s0, 2.0 * prior.alpha1, delta)?;
            let belief = t_cell_belief(grid, loc, s, post.dof(), s0, 2.0 * prior.alpha1)?;
            crate::rb::evidence(&belief, grid.null_index())
        })
        .collect()
}

/// Null grid helper for callers that want the full discretized belief.
pub fn mp_grid(post: &MpPosterior, prior: &RegressionPrior, i: usize, delta: f64) -> Result<Grid> {
    let (loc, s) = post.marginal(i);
    crate::regression::coefficient_grid(loc, s, post.prior_marginal_scale(prior, i), 2.0 * prior.alpha1, delta)
}

/// Columns 2..l+1 of the `(l+1)`-dimensional Helmert matrix, each row
/// repeated `m` times, scaled to unit norm.
pub fn helmert_design(l: usize, m: usize) -> Result<DMatrix<f64>> {
    if l == 0 || m == 0 {
        return invalid("Helmert design needs l ≥ 1 and m ≥ 1");
    }
    let n = m * (l + 1);
    let mut x = DMatrix::zeros(n, l);
    for j in 0..l {
        let c = ((j + 1) as f64 * (j + 2) as f64 * m as f64).sqrt().recip();
        for base in 0..=l {
            let v = if base <= j {
                c
            } else if base == j + 1 {
                -((j + 1) as f64) * c
            } else {
                0.0
            };
            for r in 0..m {
                x[(base * m + r, j)] = v;
            }
        }
    }
    Ok(x)
}

fn unit_normal_column(rows: usize, rng: &mut SimRng) -> DVector<f64> {
    loop {
        let z = DVector::from_fn(rows, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = z.norm();
        if norm > 0.0 {
            return z / norm;
        }
    }
}

fn check_blocks(l: usize, l1: usize, l2: usize, k: usize) -> Result<()> {
    if k < l || l1 > l || l2 > k - l {
        return invalid(format!("incompatible blocks: l = {l}, l1 = {l1}, l2 = {l2}, k = {k}"));
    }
    if l2 > 0 && l1 == 0 {
        return invalid("B1 has columns but no rows (l1 = 0 < l2)");
    }
    if k - l - l2 > 0 && l == l1 {
        return invalid("B2 has columns but no rows (l1 = l)");
    }
    Ok(())
}

/// Block-diagonal `B = diag(B1, B2)` with unit-norm Gaussian columns;
/// `B1` is `l1 × l2` and `B2` is `(l-l1) × (k-l-l2)`.
pub fn generate_block_b(l: usize, l1: usize, l2: usize, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_blocks(l, l1, l2, k)?;
    let mut rng = mc::substream(seed, 0);
    Ok(block_b(l, l1, l2, k, &mut rng))
}

fn block_b(l: usize, l1: usize, l2: usize, k: usize, rng: &mut SimRng) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(l, k - l);
    for j in 0..l2 {
        b.view_mut((0, j), (l1, 1)).copy_from(&unit_normal_column(l1, rng));
    }
    for j in l2..(k - l) {
        b.view_mut((l1, j), (l - l1, 1)).copy_from(&unit_normal_column(l - l1, rng));
    }
    b
}

/// Parameters of the sparse rank-deficient simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Example5Config {
    pub l: usize,
    pub l1: usize,
    pub l2: usize,
    pub m: usize,
    pub k: usize,
    pub effect: f64,
    pub sigma: f64,
    pub prior: RegressionPrior,
    pub delta: f64,
    pub cutoffs: CutoffPair,
}

impl Example5Config {
    /// `l = 10, l1 = 5, l2 = 2, m = 2`, effects 4, `σ = 1`,
    /// `λ0² = 4, α1 = 11, α2 = 12`, unit cutoffs. With `k = 10` there is no
    /// `X2` and `l2` drops to 0.
    pub fn paper(k: usize, delta: f64) -> Self {
        Self {
            l: 10,
            l1: 5,
            l2: 2.min(k.saturating_sub(10)),
            m: 2,
            k,
            effect: 4.0,
            sigma: 1.0,
            prior: RegressionPrior { lambda0: 2.0, alpha1: 11.0, alpha2: 12.0, elicitation: None },
            delta,
            cutoffs: CutoffPair { q_r: 1.0, q_a: 1.0 },
        }
    }

    /// Whether each original coefficient is truly zero.
    pub fn null_true(&self) -> Vec<bool> {
        (0..self.k)
            .map(|i| !(i < self.l1 || (i >= self.l && i < self.l + self.l2)))
            .collect()
    }
}

/// One simulated data set of the sparse design.
#[derive(Debug, Clone, PartialEq)]
pub struct Example5Run {
    pub records: Vec<EvidenceRecord>,
    pub verdicts: Vec<Classification>,
    pub confusion: ConfusionMatrix,
}

/// Generates `B` and `y` for `seed`, then classifies every coordinate of
/// `β^MP` by its central-cell relative belief ratio.
pub fn run_example5_sim(cfg: &Example5Config, seed: u64) -> Result<Example5Run> {
    check_blocks(cfg.l, cfg.l1, cfg.l2, cfg.k)?;
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return invalid(format!("σ must be positive, got {}", cfg.sigma));
    }
    let x1 = helmert_design(cfg.l, cfg.m)?;
    let mut rng = mc::substream(seed, 0);
    let b = block_b(cfg.l, cfg.l1, cfg.l2, cfg.k, &mut rng);
    let x2 = &x1 * &b;
    let n = x1.nrows();
    let mut x = DMatrix::zeros(n, cfg.k);
    x.view_mut((0, 0), (n, cfg.l)).copy_from(&x1);
    x.view_mut((0, cfg.l), (n, cfg.k - cfg.l)).copy_from(&x2);

    let null_true = cfg.null_true();
    let beta = DVector::from_iterator(cfg.k, null_true.iter().map(|&t| if t { 0.0 } else { cfg.effect }));
    let mut noise = mc::substream(seed, 1);
    let y = &x * &beta + DVector::from_fn(n, |_, _| cfg.sigma * noise.sample::<f64, _>(StandardNormal));

    let split = split_basis(&x)?;
    let post = mp_posterior(&split, &y, &cfg.prior)?;
    let records = analyze_mp(&post, &cfg.prior, cfg.delta)?;
    let verdicts = classify(&records, cfg.cutoffs)?;
    let confusion = ConfusionMatrix::tabulate(&verdicts, &null_true)?;
    Ok(Example5Run { records, verdicts, confusion })
}
