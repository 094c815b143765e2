//! Conjugate normal / inverse-gamma regression with `Σ0 = λ0² I`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::mc::{self, McEstimate, SimRng};
use crate::mtest::NullSimulator;
use crate::rb::{self, DiscreteBelief, EvidenceRecord, Grid};
use crate::specfun::{gamma_cdf_unchecked, gamma_quantile, ln_gamma, ln_t_pdf, norm_quantile, t_interval, GammaParams};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

const CENTER_TOL: f64 = 1e-12;

/// `X = (1, x_1, ..., x_k)`, optionally standardized so that `1'x_i = 0` and
/// `||x_i|| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    standardized: bool,
    centers: Vec<f64>,
    scales: Vec<f64>,
}

impl DesignMatrix {
    /// Wraps a matrix whose first column is the intercept, as is.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        check_intercept(&x)?;
        let k = x.ncols() - 1;
        let standardized = (1..=k).all(|j| {
            let c = x.column(j);
            c.sum().abs() <= 1e-9 && (c.norm_squared() - 1.0).abs() <= 1e-9
        });
        Ok(Self { x, standardized, centers: vec![0.0; k], scales: vec![1.0; k] })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Column means removed during standardization.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Norms of the centered columns.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of predictors, excluding the intercept.
    pub fn k(&self) -> usize {
        self.x.ncols() - 1
    }
}

fn check_intercept(x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return invalid("design matrix is empty");
    }
    if x.column(0).iter().any(|&v| v != 1.0) {
        return invalid("first design column must be the all-ones intercept");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("design matrix has non-finite entries");
    }
    Ok(())
}

/// Centers every non-intercept column and scales it to unit Euclidean norm.
pub fn standardize(x_raw: &DMatrix<f64>) -> Result<DesignMatrix> {
    check_intercept(x_raw)?;
    let n = x_raw.nrows() as f64;
    let k = x_raw.ncols() - 1;
    let mut x = x_raw.clone();
    let mut centers = Vec::with_capacity(k);
    let mut scales = Vec::with_capacity(k);
    for j in 1..=k {
        let mut col = x.column_mut(j);
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if norm <= CENTER_TOL * (1.0 + mean.abs()) {
            return Err(Error::DegeneratePredictor { column: j });
        }
        col /= norm;
        centers.push(mean);
        scales.push(norm);
    }
    Ok(DesignMatrix { x, standardized: true, centers, scales })
}

/// `y - c` for the a priori centering constant `c`.
pub fn center_response(y: &DVector<f64>, c: f64) -> DVector<f64> {
    y.add_scalar(-c)
}

/// Inputs to the elicitation of a regression prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Elicitation {
    pub m0: f64,
    pub s1: f64,
    pub s2: f64,
    pub gamma_vc: f64,
    pub tau0: f64,
}

/// `β | σ² ~ N(0, σ² λ0² I)`, `1/σ² ~ gamma_rate(α1, α2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionPrior {
    pub lambda0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub elicitation: Option<Elicitation>,
}

impl RegressionPrior {
    pub fn new(lambda0: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        for (name, v) in [("λ0", lambda0), ("α1", alpha1), ("α2", alpha2)] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(Self { lambda0, alpha1, alpha2, elicitation: None })
    }

    pub fn gamma(&self) -> GammaParams {
        GammaParams { shape: self.alpha1, rate: self.alpha2 }
    }

    /// Scale of the marginal prior `{(α2/α1) λ0²}^{1/2} t_{2α1}` of a coefficient.
    pub fn marginal_scale(&self) -> f64 {
        (self.alpha2 / self.alpha1).sqrt() * self.lambda0
    }

    pub fn marginal_dof(&self) -> f64 {
        2.0 * self.alpha1
    }
}

/// `τ0 = (1 + max ||x||²)^{1/2}` over the observed predictor rows.
pub fn tau0(x: &DesignMatrix) -> f64 {
    let k = x.k();
    let m = x.matrix();
    let max = (0..x.n())
        .map(|r| m.view((r, 1), (1, k)).norm_squared())
        .fold(0.0, f64::max);
    (1.0 + max).sqrt()
}

/// `λ0 = m0 / (s2 τ0)`.
pub fn elicit_lambda0(m0: f64, s2: f64, tau0: f64) -> Result<f64> {
    for (name, v) in [("m0", m0), ("s2", s2), ("τ0", tau0)] {
        if !(v.is_finite() && v > 0.0) {
            return invalid(format!("{name} must be positive and finite, got {v}"));
        }
    }
    Ok(m0 / (s2 * tau0))
}

const ALPHA1_RANGE: (f64, f64) = (1e-3, 1e6);
const SOLVER_TOL: f64 = 1e-8;

fn check_gamma_vc(g: f64) -> Result<()> {
    if !(g > 0.0 && g < 1.0) {
        return invalid(format!("virtual-certainty probability must lie in (0, 1), got {g}"));
    }
    Ok(())
}

/// `(α1, α2)` making `(s1/z, s2/z)` a central `γ` interval for `σ`, with
/// `z = Φ⁻¹((1+γ)/2)`.
pub fn solve_gamma_hyperparams(s1: f64, s2: f64, gamma_vc: f64) -> Result<GammaParams> {
    if !(s1.is_finite() && s1 > 0.0 && s2.is_finite() && s1 < s2) {
        return invalid(format!("need 0 < s1 < s2, got ({s1}, {s2})"));
    }
    check_gamma_vc(gamma_vc)?;
    let upper = 0.5 * (1.0 + gamma_vc);
    let lower = 0.5 * (1.0 - gamma_vc);
    let z = norm_quantile(upper);
    let ratio = (s1 / s2).powi(2);

    // α2 from the upper equation; the lower equation's residual then
    // decreases in α1.
    let alpha2_for = |a1: f64| -> Result<f64> {
        let q = gamma_quantile(upper, GammaParams { shape: a1, rate: 1.0 })?;
        Ok(q * s1 * s1 / (z * z))
    };
    let residual = |a1: f64| -> Result<f64> {
        let q = gamma_quantile(upper, GammaParams { shape: a1, rate: 1.0 })?;
        Ok(gamma_cdf_unchecked(q * ratio, GammaParams { shape: a1, rate: 1.0 }) - lower)
    };

    let (mut lo, mut hi) = (ALPHA1_RANGE.0.ln(), ALPHA1_RANGE.1.ln());
    let r_lo = residual(lo.exp())?;
    let r_hi = residual(hi.exp())?;
    if r_hi > 0.0 {
        return Err(Error::NonConvergence { what: "gamma hyperparameter solver (α1 beyond 1e6; s1 too close to s2)", residual: r_hi });
    }
    if r_lo < 0.0 {
        return Err(Error::NonConvergence { what: "gamma hyperparameter solver (α1 below 1e-3)", residual: r_lo });
    }
    let mut best = (f64::INFINITY, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid.exp())?;
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r.abs() <= SOLVER_TOL && hi - lo < 1e-12 {
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    if best.0 > SOLVER_TOL {
        return Err(Error::NonConvergence { what: "gamma hyperparameter solver", residual: best.0 });
    }
    let alpha1 = best.1.exp();
    Ok(GammaParams { shape: alpha1, rate: alpha2_for(alpha1)? })
}

/// How the two gamma equations are solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GammaSolver {
    /// Bisection on `log α1` to a residual of 1e-8.
    Exact,
    /// Move `α1` from 1 in steps of `step` until the lower-equation residual
    /// is within `tol`; `step = 0.01`, `tol = 1e-3` gives the published
    /// diabetes values.
    Stepwise { step: f64, tol: f64 },
}

impl GammaSolver {
    pub const PUBLISHED: GammaSolver = GammaSolver::Stepwise { step: 0.01, tol: 1e-3 };

    pub fn solve(self, s1: f64, s2: f64, gamma_vc: f64) -> Result<GammaParams> {
        match self {
            GammaSolver::Exact => solve_gamma_hyperparams(s1, s2, gamma_vc),
            GammaSolver::Stepwise { step, tol } => solve_gamma_stepwise(s1, s2, gamma_vc, step, tol),
        }
    }
}

const MAX_STEPS: usize = 10_000_000;

/// The fixed-step iteration: raise `α1` while the lower equation's left side
/// exceeds `(1-γ)/2 + tol`, lower it while it falls short by more than `tol`.
pub fn solve_gamma_stepwise(s1: f64, s2: f64, gamma_vc: f64, step: f64, tol: f64) -> Result<GammaParams> {
    if !(s1.is_finite() && s1 > 0.0 && s2.is_finite() && s1 < s2) {
        return invalid(format!("need 0 < s1 < s2, got ({s1}, {s2})"));
    }
    check_gamma_vc(gamma_vc)?;
    if !(step > 0.0 && step < 1.0 && tol > 0.0 && tol < 0.5) {
        return invalid(format!("stepwise solver needs 0 < step < 1 and 0 < tol < 0.5, got ({step}, {tol})"));
    }
    let upper = 0.5 * (1.0 + gamma_vc);
    let lower = 0.5 * (1.0 - gamma_vc);
    let z = norm_quantile(upper);
    let ratio = (s1 / s2).powi(2);
    let unit = |a1: f64| GammaParams { shape: a1, rate: 1.0 };
    let residual = |a1: f64| -> Result<f64> {
        let q = gamma_quantile(upper, unit(a1))?;
        Ok(gamma_cdf_unchecked(q * ratio, unit(a1)) - lower)
    };
    let start = 1.0;
    let mut r = residual(start)?;
    let dir = if r > 0.0 { 1.0 } else { -1.0 };
    let mut a1 = start;
    for i in 1..=MAX_STEPS {
        if r.abs() <= tol {
            let q = gamma_quantile(upper, unit(a1))?;
            return Ok(GammaParams { shape: a1, rate: q * s1 * s1 / (z * z) });
        }
        a1 = start + dir * step * i as f64;
        if a1 <= 0.0 || a1 > ALPHA1_RANGE.1 {
            break;
        }
        r = residual(a1)?;
    }
    Err(Error::NonConvergence { what: "stepwise gamma hyperparameter solver", residual: r })
}

/// Full elicitation of `(λ0, α1, α2)`.
pub fn elicit_regression(e: Elicitation, solver: GammaSolver) -> Result<RegressionPrior> {
    check_gamma_vc(e.gamma_vc)?;
    let lambda0 = elicit_lambda0(e.m0, e.s2, e.tau0)?;
    let g = solver.solve(e.s1, e.s2, e.gamma_vc)?;
    let mut prior = RegressionPrior::new(lambda0, g.shape, g.rate)?;
    prior.elicitation = Some(e);
    Ok(prior)
}

/// Scales `λ0` by `factor > 1`, keeping `(α1, α2)`.
pub fn inflate_prior(prior: &RegressionPrior, factor: f64) -> Result<RegressionPrior> {
    if !(factor.is_finite() && factor > 1.0) {
        return invalid(format!("inflation factor must exceed 1, got {factor}"));
    }
    Ok(RegressionPrior { lambda0: prior.lambda0 * factor, ..*prior })
}

/// Least-squares pieces of a full-rank fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub b: DVector<f64>,
    pub rss: f64,
    pub xtx: DMatrix<f64>,
    pub xtx_inv: DMatrix<f64>,
}

pub(crate) fn numerical_rank(x: &DMatrix<f64>) -> usize {
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

pub(crate) fn spd_inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let inv = m.clone().cholesky().ok_or(Error::NotPositiveDefinite(what))?.inverse();
    Ok(0.5 * (&inv + inv.transpose()))
}

pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    if x.nrows() != y.len() {
        return invalid(format!("design has {} rows but y has {} entries", x.nrows(), y.len()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("response has non-finite entries");
    }
    let p = x.ncols();
    let rank = numerical_rank(x);
    if rank < p {
        return Err(Error::RankDeficient { rank, required: p });
    }
    let xtx = x.tr_mul(x);
    let xtx_inv = spd_inverse(&xtx, "X'X")?;
    let b = &xtx_inv * x.tr_mul(y);
    let rss = (y - x * &b).norm_squared();
    Ok(LeastSquares { b, rss, xtx, xtx_inv })
}

/// Posterior `β | y, σ² ~ N(β(X,y), σ² Σ(X))`, `1/σ² | y ~ gamma_rate(shape, rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionPosterior {
    pub beta_mean: DVector<f64>,
    pub scale: DMatrix<f64>,
    pub shape: f64,
    pub rate: f64,
}

impl RegressionPosterior {
    pub fn dof(&self) -> f64 {
        2.0 * self.shape
    }

    /// `α2(X,y)`, twice the gamma rate.
    pub fn alpha2_xy(&self) -> f64 {
        2.0 * self.rate
    }

    /// Location and scale of the marginal `β_i(X,y) + s_i t_{n+2α1}`.
    pub fn marginal(&self, i: usize) -> (f64, f64) {
        let s = (self.alpha2_xy() * self.scale[(i, i)] / self.dof()).sqrt();
        (self.beta_mean[i], s)
    }
}

/// Conjugate update of `N(0, σ² P0⁻¹)` × `gamma_rate(α1, α2)` on a full-rank design.
pub(crate) fn conjugate_update(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    prior_precision: &DMatrix<f64>,
    alpha1: f64,
    alpha2: f64,
) -> Result<(RegressionPosterior, LeastSquares)> {
    let ls = least_squares(x, y)?;
    let scale = spd_inverse(&(&ls.xtx + prior_precision), "X'X + Σ0⁻¹")?;
    let xty = &ls.xtx * &ls.b;
    let beta_mean = &scale * &xty;
    // (Xb)'(I - XΣX')Xb = b'X'Xb - (X'Xb)'Σ(X'Xb)
    let shrink = (ls.b.dot(&xty) - xty.dot(&beta_mean)).max(0.0);
    let a2 = ls.rss + shrink + 2.0 * alpha2;
    let n = x.nrows() as f64;
    let post = RegressionPosterior { beta_mean, scale, shape: 0.5 * (n + 2.0 * alpha1), rate: 0.5 * a2 };
    Ok((post, ls))
}

pub fn posterior(x: &DesignMatrix, y: &DVector<f64>, prior: &RegressionPrior) -> Result<RegressionPosterior> {
    let p = x.k() + 1;
    let precision = DMatrix::identity(p, p) / (prior.lambda0 * prior.lambda0);
    Ok(conjugate_update(x.matrix(), y, &precision, prior.alpha1, prior.alpha2)?.0)
}

/// Which closed form of the relative belief ratio at 0 to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Eq17Form {
    /// The formula as printed, with the factor `(α2(X,y)σ_ii / (α2² λ0²))^{-1/2}`.
    #[default]
    Published,
    /// The exact ratio of the marginal posterior and prior t densities at 0,
    /// whose last factor is `(α2(X,y)σ_ii / (2α2 λ0²))^{-1/2}`.
    DensityRatio,
}

/// Ratio at 0 of the density of `loc + s t_ν` to that of `s0 t_ν0`.
pub fn t_density_ratio_at_zero(loc: f64, s: f64, dof: f64, s0: f64, dof0: f64) -> f64 {
    let ln_post = ln_t_pdf(-loc / s, dof) - s.ln();
    let ln_prior = ln_t_pdf(0.0, dof0) - s0.ln();
    (ln_post - ln_prior).exp()
}

/// Relative belief ratio of `β_i` at 0.
pub fn rb_beta_zero(post: &RegressionPosterior, prior: &RegressionPrior, i: usize, form: Eq17Form) -> Result<f64> {
    if i >= post.beta_mean.len() {
        return invalid(format!("coefficient index {i} out of range 0..{}", post.beta_mean.len()));
    }
    let (loc, s) = post.marginal(i);
    match form {
        Eq17Form::DensityRatio => Ok(t_density_ratio_at_zero(loc, s, post.dof(), prior.marginal_scale(), prior.marginal_dof())),
        Eq17Form::Published => {
            let nu = post.dof();
            let a1 = prior.alpha1;
            let spread = post.alpha2_xy() * post.scale[(i, i)];
            let ln_c = ln_gamma(0.5 * (nu + 1.0)) + ln_gamma(a1) - ln_gamma(a1 + 0.5) - ln_gamma(0.5 * nu);
            let kernel = -0.5 * (nu + 1.0) * (loc * loc / spread).ln_1p();
            let tail = -0.5 * (spread / (prior.alpha2 * prior.alpha2 * prior.lambda0 * prior.lambda0)).ln();
            Ok((ln_c + kernel + tail).exp())
        }
    }
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= s);
    v
}

/// Prior and posterior cell masses of a coefficient whose marginals are
/// `s0 t_ν0` and `loc + s t_ν`.
pub fn t_cell_belief(grid: Grid, loc: f64, s: f64, dof: f64, s0: f64, dof0: f64) -> Result<DiscreteBelief> {
    if grid.center != 0.0 {
        return invalid("coefficient grids must be centred at 0");
    }
    let prior = normalized(grid.masses(|a, b| t_interval(a / s0, b / s0, dof0)));
    let post = normalized(grid.masses(|a, b| t_interval((a - loc) / s, (b - loc) / s, dof)));
    DiscreteBelief::on_grid(grid, prior, post)
}

/// Discretized prior and posterior of `β_i` on `grid` (centred at 0).
pub fn rb_beta_discretized(post: &RegressionPosterior, prior: &RegressionPrior, i: usize, grid: Grid) -> Result<DiscreteBelief> {
    if i >= post.beta_mean.len() {
        return invalid(format!("coefficient index {i} out of range 0..{}", post.beta_mean.len()));
    }
    let (loc, s) = post.marginal(i);
    t_cell_belief(grid, loc, s, post.dof(), prior.marginal_scale(), prior.marginal_dof())
}

/// Grid of width `delta` at 0 covering the central 99.9% prior interval and
/// the posterior out to 8 scale units.
pub fn coefficient_grid(loc: f64, s: f64, s0: f64, dof0: f64, delta: f64) -> Result<Grid> {
    let prior_q = crate::specfun::student_t_quantile(0.9995, dof0)? * s0;
    Grid::spanning(0.0, delta, prior_q.max(loc.abs() + 8.0 * s))
}

/// One row of a coefficient report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientReport {
    pub variable: String,
    /// Midpoint of the cell maximizing the discretized ratio.
    pub rb_estimate: f64,
    pub rb_at_zero: f64,
    /// Strength of the central cell on the discretized grid.
    pub strength: f64,
    pub posterior_mean: f64,
}

impl CoefficientReport {
    pub fn record(&self) -> EvidenceRecord {
        EvidenceRecord { rb: self.rb_at_zero, strength: self.strength, cell_index: 0 }
    }
}

/// Relative belief estimates, ratios at 0 and strengths for every coefficient.
pub fn analyze(
    post: &RegressionPosterior,
    prior: &RegressionPrior,
    names: &[String],
    delta: f64,
    form: Eq17Form,
) -> Result<Vec<CoefficientReport>> {
    let p = post.beta_mean.len();
    if names.len() != p {
        return invalid(format!("{} names for {p} coefficients", names.len()));
    }
    (0..p)
        .map(|i| {
            let (loc, s) = post.marginal(i);
            let grid = coefficient_grid(loc, s, prior.marginal_scale(), prior.marginal_dof(), delta)?;
            let belief = rb_beta_discretized(post, prior, i, grid)?;
            let est = rb::rb_estimate(&belief);
            Ok(CoefficientReport {
                variable: names[i].clone(),
                rb_estimate: grid.midpoint(est),
                rb_at_zero: rb_beta_zero(post, prior, i, form)?,
                strength: rb::strength_at(&belief, grid.null_index())?,
                posterior_mean: loc,
            })
        })
        .collect()
}

/// Prior-data conflict tail probabilities, checked hierarchically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConflictCheck {
    /// Check of the prior on σ² via `||y - Xb||²`.
    pub sigma: McEstimate,
    /// Check of the prior on β via `b`, given `||y - Xb||²`.
    pub beta: McEstimate,
}

impl ConflictCheck {
    /// First stage of the hierarchy whose tail probability falls below `level`.
    pub fn flagged(&self, level: f64) -> Option<&'static str> {
        if self.sigma.value < level {
            Some("sigma")
        } else if self.beta.value < level {
            Some("beta")
        } else {
            None
        }
    }
}

fn ln_f_pdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let ln_beta = ln_gamma(0.5 * d1) + ln_gamma(0.5 * d2) - ln_gamma(0.5 * (d1 + d2));
    0.5 * (d1 * (d1 * x).ln() + d2 * d2.ln() - (d1 + d2) * (d1 * x + d2).ln()) - x.ln() - ln_beta
}

fn gamma_dist(shape: f64, rate: f64) -> Gamma<f64> {
    Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters")
}

fn chi2(dof: f64) -> ChiSquared<f64> {
    ChiSquared::new(dof).expect("positive degrees of freedom")
}

/// Tail probabilities of the observed `(b, ||y - Xb||²)` under the prior
/// predictive, each measured by the prior predictive density of the
/// statistic checked: `M(m(D) ≤ m(d_obs))`.
///
/// * σ²: the density of `||y-Xb||²`, a scaled `F(n-k-1, 2α1)`.
/// * β: the density of `b` given `||y-Xb||²`, a multivariate t that decreases
///   in `Q = b'(λ0² I + (X'X)⁻¹)⁻¹ b`, so the tail is `M(Q ≥ Q_obs)`.
pub fn conflict_check(
    x: &DesignMatrix,
    y: &DVector<f64>,
    prior: &RegressionPrior,
    draws: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<ConflictCheck> {
    let n = x.n();
    let p = x.k() + 1;
    if n <= p {
        return invalid(format!("conflict checks need n > k + 1, got n = {n}, k + 1 = {p}"));
    }
    let ls = least_squares(x.matrix(), y)?;
    let nu = (n - p) as f64;
    let (a1, a2) = (prior.alpha1, prior.alpha2);

    let f_obs = ls.rss * a1 / (a2 * nu);
    let d_obs = ln_f_pdf(f_obs, nu, 2.0 * a1);
    let tau = gamma_dist(a1, a2);
    let chi_nu = chi2(nu);
    let sigma = mc::mc_mean(seed, draws, workers, |rng| {
        let rss = chi_nu.sample(rng) / tau.sample(rng);
        let f = rss * a1 / (a2 * nu);
        f64::from(u8::from(ln_f_pdf(f, nu, 2.0 * a1) <= d_obs))
    })?;

    let lam2 = prior.lambda0 * prior.lambda0;
    let v = DMatrix::identity(p, p) * lam2 + &ls.xtx_inv;
    let q = ls.b.dot(&(spd_inverse(&v, "λ0² I + (X'X)⁻¹")? * &ls.b));
    let a = a1 + 0.5 * nu;
    let c = a2 + 0.5 * ls.rss;
    let pf = p as f64;
    let tau_c = gamma_dist(a, c);
    let chi_p = chi2(pf);
    let beta = mc::mc_mean(seed ^ 0x5bd1_e995, draws, workers, |rng| {
        let qs = chi_p.sample(rng) / tau_c.sample(rng);
        f64::from(u8::from(qs >= q))
    })?;
    Ok(ConflictCheck { sigma, beta })
}

/// How a simulated data set is scored at `β_i = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RegressionEvidence {
    Closed(Eq17Form),
    /// Central cell `(-δ/2, δ/2]`.
    Discretized { delta: f64 },
}

/// Prior-predictive simulator of `(b, ||y - Xb||²)` for the slope hypotheses
/// `β_i = 0`, `i = 1..k`.
#[derive(Debug, Clone)]
pub struct RegressionSimulator {
    prior: RegressionPrior,
    evidence: RegressionEvidence,
    n: usize,
    p: usize,
    /// Cholesky factor of `(X'X)⁻¹`.
    chol_inv: DMatrix<f64>,
    /// `Σ X'X`, mapping `b` to `β(X,y)`.
    shrink: DMatrix<f64>,
    /// `X'X - X'X Σ X'X`.
    quad: DMatrix<f64>,
    sii: Vec<f64>,
}

impl RegressionSimulator {
    pub fn new(x: &DesignMatrix, prior: &RegressionPrior, evidence: RegressionEvidence) -> Result<Self> {
        let n = x.n();
        let p = x.k() + 1;
        if n <= p {
            return invalid(format!("simulation needs n > k + 1, got n = {n}, k + 1 = {p}"));
        }
        if x.k() == 0 {
            return invalid("no slope coefficients to test");
        }
        if let RegressionEvidence::Discretized { delta } = evidence {
            if !(delta.is_finite() && delta > 0.0) {
                return invalid(format!("δ must be positive, got {delta}"));
            }
        }
        let xm = x.matrix();
        let rank = numerical_rank(xm);
        if rank < p {
            return Err(Error::RankDeficient { rank, required: p });
        }
        let xtx = xm.tr_mul(xm);
        let xtx_inv = spd_inverse(&xtx, "X'X")?;
        let chol_inv = xtx_inv.cholesky().ok_or(Error::NotPositiveDefinite("(X'X)⁻¹"))?.l();
        let lam2 = prior.lambda0 * prior.lambda0;
        let scale = spd_inverse(&(&xtx + DMatrix::identity(p, p) / lam2), "X'X + Σ0⁻¹")?;
        let shrink = &scale * &xtx;
        let quad = &xtx - &xtx * &shrink;
        let quad = 0.5 * (&quad + quad.transpose());
        let sii = (0..p).map(|i| scale[(i, i)]).collect();
        Ok(Self { prior: *prior, evidence, n, p, chol_inv, shrink, quad, sii })
    }

    /// Relative belief ratio at 0 for coefficient `j` from sufficient statistics.
    pub fn rb_from_stats(&self, j: usize, b: &DVector<f64>, rss: f64) -> f64 {
        let loc = self.shrink.row(j).transpose().dot(b);
        let a2 = rss + b.dot(&(&self.quad * b)).max(0.0) + 2.0 * self.prior.alpha2;
        let nu = self.n as f64 + 2.0 * self.prior.alpha1;
        let post = RegressionPosterior {
            beta_mean: DVector::from_element(1, loc),
            scale: DMatrix::from_element(1, 1, self.sii[j]),
            shape: 0.5 * nu,
            rate: 0.5 * a2,
        };
        match self.evidence {
            RegressionEvidence::Closed(form) => rb_beta_zero(&post, &self.prior, 0, form).expect("index 0 exists"),
            RegressionEvidence::Discretized { delta } => {
                let (loc, s) = post.marginal(0);
                let h = 0.5 * delta;
                let s0 = self.prior.marginal_scale();
                let num = t_interval((-h - loc) / s, (h - loc) / s, nu);
                let den = t_interval(-h / s0, h / s0, self.prior.marginal_dof());
                num / den
            }
        }
    }

    /// Data `(b, ||y-Xb||²)` given `β` with coefficient `j` replaced by `value`.
    fn simulate(&self, j: usize, value: f64, rng: &mut SimRng) -> (DVector<f64>, f64) {
        let tau = gamma_dist(self.prior.alpha1, self.prior.alpha2).sample(rng);
        let sd = tau.recip().sqrt();
        let mut beta = DVector::from_fn(self.p, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            sd * self.prior.lambda0 * z
        });
        beta[j] = value;
        let z = DVector::from_fn(self.p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = beta + &self.chol_inv * z * sd;
        let rss = chi2((self.n - self.p) as f64).sample(rng) / tau;
        (b, rss)
    }
}

impl NullSimulator for RegressionSimulator {
    fn hypotheses(&self) -> usize {
        self.p - 1
    }

    fn rb_under_null(&self, i: usize, rng: &mut SimRng) -> f64 {
        let (b, rss) = self.simulate(i + 1, 0.0, rng);
        self.rb_from_stats(i + 1, &b, rss)
    }

    fn rb_under_alternative(&self, i: usize, offset: f64, rng: &mut SimRng) -> f64 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let (b, rss) = self.simulate(i + 1, sign * offset, rng);
        self.rb_from_stats(i + 1, &b, rss)
    }
}

/// Prior error rates for the slope hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionBias {
    pub fp_rate: McEstimate,
    pub fn_rate: McEstimate,
}

/// False-positive rate at `q_R` and false-negative rate at `q_A` for
/// alternatives `β_i = ±δ/2`, averaged over the slopes.
#[allow(clippy::too_many_arguments)]
pub fn regression_bias_mc(
    x: &DesignMatrix,
    prior: &RegressionPrior,
    delta: f64,
    evidence: RegressionEvidence,
    q_r: f64,
    q_a: f64,
    draws: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<RegressionBias> {
    if !(delta.is_finite() && delta > 0.0) {
        return invalid(format!("δ must be positive, got {delta}"));
    }
    let sim = RegressionSimulator::new(x, prior, evidence)?;
    let fp_rate = crate::mtest::fp_rate_mc(&sim, q_r, draws, seed, workers)?;
    let fn_rate = crate::mtest::fn_rate_mc(&sim, q_a, 0.5 * delta, draws, seed ^ 0x2545_f491_4f6c_dd1d, workers)?;
    Ok(RegressionBias { fp_rate, fn_rate })
}

/// Centering constant subtracted from the diabetes response.
pub const DIABETES_CENTER: f64 = 150.0;

/// The standardized diabetes design and centred response.
pub fn diabetes_problem() -> Result<(DesignMatrix, DVector<f64>, Vec<String>)> {
    let d = crate::data::diabetes();
    let x = standardize(&d.with_intercept())?;
    let y = center_response(&d.y, DIABETES_CENTER);
    let mut names = vec!["constant".to_string()];
    names.extend(d.names.iter().cloned());
    Ok((x, y, names))
}
