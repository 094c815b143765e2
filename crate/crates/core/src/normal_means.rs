//! k normal means with known σ and a conjugate normal prior.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::mc::{self, McEstimate, SimRng};
use crate::mtest::{ConfusionMatrix, CutoffPair, NullSimulator};
use crate::rb::{self, DiscreteBelief, EvidenceRecord, Grid};
use crate::specfun::{norm_cdf, norm_interval, norm_quantile};

/// Group means of `k` samples of size `n` from `N(μ_i, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalMeansModel {
    pub n: usize,
    pub sigma: f64,
    pub xbar: Vec<f64>,
}

impl NormalMeansModel {
    pub fn new(n: usize, sigma: f64, xbar: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return invalid("group sample size must be positive");
        }
        check_sigma(sigma)?;
        if xbar.is_empty() {
            return invalid("at least one group mean is required");
        }
        if xbar.iter().any(|x| !x.is_finite()) {
            return invalid("group means must be finite");
        }
        Ok(Self { n, sigma, xbar })
    }

    pub fn k(&self) -> usize {
        self.xbar.len()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return invalid(format!("σ must be positive and finite, got {sigma}"));
    }
    Ok(())
}

/// `μ_i ~ N(μ0, λ0² σ²)` independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalMeansPrior {
    pub mu0: f64,
    pub lambda0: f64,
}

impl NormalMeansPrior {
    pub fn new(mu0: f64, lambda0: f64) -> Result<Self> {
        if !mu0.is_finite() {
            return invalid(format!("μ0 must be finite, got {mu0}"));
        }
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return invalid(format!("λ0 must be positive and finite, got {lambda0}"));
        }
        Ok(Self { mu0, lambda0 })
    }

    /// Grid of width `delta` centred at μ0 whose interior spans the central
    /// 99% prior interval, i.e. `(m_l, m_u)` for an elicited prior.
    pub fn default_grid(&self, sigma: f64, delta: f64) -> Result<Grid> {
        Grid::spanning(self.mu0, delta, self.lambda0 * sigma * norm_quantile(0.995))
    }
}

/// Elicit `(μ0, λ0)` from an interval `(m_l, m_u)` believed to contain every
/// mean with probability `gamma_vc`.
pub fn elicit_normal(m_l: f64, m_u: f64, sigma: f64, gamma_vc: f64) -> Result<NormalMeansPrior> {
    if !(m_l.is_finite() && m_u.is_finite()) || m_l >= m_u {
        return invalid(format!("need finite m_l < m_u, got ({m_l}, {m_u})"));
    }
    check_sigma(sigma)?;
    if !(gamma_vc > 0.0 && gamma_vc < 1.0) {
        return invalid(format!("virtual certainty must lie in (0, 1), got {gamma_vc}"));
    }
    let z = norm_quantile((1.0 + gamma_vc) / 2.0);
    NormalMeansPrior::new((m_l + m_u) / 2.0, (m_u - m_l) / (2.0 * sigma * z))
}

fn posterior_params(xbar: f64, n: usize, sigma: f64, prior: NormalMeansPrior) -> (f64, f64) {
    let nf = n as f64;
    let l2 = prior.lambda0 * prior.lambda0;
    let mean = (nf * xbar + prior.mu0 / l2) / (nf + 1.0 / l2);
    let sd = prior.lambda0 * sigma / (nf * l2 + 1.0).sqrt();
    (mean, sd)
}

/// Posterior mean and standard deviation of `μ_i`.
pub fn posterior_mean_params(model: &NormalMeansModel, prior: NormalMeansPrior, i: usize) -> Result<(f64, f64)> {
    let Some(&x) = model.xbar.get(i) else {
        return invalid(format!("hypothesis {i} out of range (k = {})", model.k()));
    };
    Ok(posterior_params(x, model.n, model.sigma, prior))
}

fn check_grid(grid: &Grid, prior: NormalMeansPrior) -> Result<()> {
    if (grid.center - prior.mu0).abs() > 1e-12 * (1.0 + prior.mu0.abs()) {
        return invalid(format!("grid must be centred at μ0 = {}, got {}", prior.mu0, grid.center));
    }
    Ok(())
}

/// Prior masses of the grid cells.
pub fn prior_cell_masses(grid: &Grid, prior: NormalMeansPrior, sigma: f64) -> Vec<f64> {
    let s = prior.lambda0 * sigma;
    grid.masses(|a, b| norm_interval((a - prior.mu0) / s, (b - prior.mu0) / s))
}

/// Masses of the grid cells under `N(mean, sd²)`.
pub fn normal_cell_masses(grid: &Grid, mean: f64, sd: f64) -> Vec<f64> {
    grid.masses(|a, b| norm_interval((a - mean) / sd, (b - mean) / sd))
}

/// Discretized prior and posterior of `μ_i`, with the evidence for the
/// central cell `(μ0 - δ/2, μ0 + δ/2]`.
pub fn rb_cells(
    model: &NormalMeansModel,
    prior: NormalMeansPrior,
    i: usize,
    grid: &Grid,
) -> Result<(DiscreteBelief, EvidenceRecord)> {
    check_grid(grid, prior)?;
    let (mean, sd) = posterior_mean_params(model, prior, i)?;
    let belief = DiscreteBelief::on_grid(
        *grid,
        prior_cell_masses(grid, prior, model.sigma),
        normal_cell_masses(grid, mean, sd),
    )?;
    let record = rb::evidence(&belief, grid.null_index())?;
    Ok((belief, record))
}

/// Evidence for every `H_0i : μ_i ∈ (μ0 - δ/2, μ0 + δ/2]`.
pub fn analyze(model: &NormalMeansModel, prior: NormalMeansPrior, grid: &Grid) -> Result<Vec<EvidenceRecord>> {
    (0..model.k()).map(|i| rb_cells(model, prior, i, grid).map(|(_, r)| r)).collect()
}

/// Probability the prior puts on the central cell, `2Φ(δ/2λ0σ) - 1`.
pub fn null_cell_prior(delta: f64, lambda0: f64, sigma: f64) -> f64 {
    let h = delta / (2.0 * lambda0 * sigma);
    norm_interval(-h, h)
}

/// Largest attainable relative belief ratio for the central cell.
pub fn max_rb(delta: f64, lambda0: f64, sigma: f64) -> f64 {
    1.0 / null_cell_prior(delta, lambda0, sigma)
}

/// RB of the central cell of width `delta` for a group mean `xbar`.
pub fn rb_null_cell(xbar: f64, n: usize, sigma: f64, prior: NormalMeansPrior, delta: f64) -> f64 {
    let (m, s) = posterior_params(xbar, n, sigma, prior);
    let h = delta / 2.0;
    norm_interval((prior.mu0 - h - m) / s, (prior.mu0 + h - m) / s) / null_cell_prior(delta, prior.lambda0, sigma)
}

/// Continuous RB at μ0: posterior density over prior density.
pub fn rb_density_at_null(xbar: f64, n: usize, sigma: f64, prior: NormalMeansPrior) -> f64 {
    let (m, s) = posterior_params(xbar, n, sigma, prior);
    let z = (prior.mu0 - m) / s;
    prior.lambda0 * sigma / s * (-0.5 * z * z).exp()
}

/// `a_n(q)`: half-width, in standardized units, of the region where the
/// continuous RB at μ0 exceeds `q`.
pub fn a_n(q: f64, n: usize, lambda0: f64) -> f64 {
    let c = n as f64 * lambda0 * lambda0;
    if q * q <= c + 1.0 {
        ((1.0 + 1.0 / c) * ((c + 1.0) / (q * q)).ln()).max(0.0).sqrt()
    } else {
        0.0
    }
}

/// `M(RB(μ0 | x) < q_R | μ0) = 2(1 - Φ(a_n(q_R)))`.
pub fn bias_against(n: usize, lambda0: f64, q_r: f64) -> Result<f64> {
    if !(q_r > 0.0 && q_r <= 1.0) {
        return invalid(format!("q_R must lie in (0, 1], got {q_r}"));
    }
    check_n_lambda(n, lambda0)?;
    Ok(2.0 * norm_cdf(-a_n(q_r, n, lambda0)))
}

/// `M(RB(μ0 | x) > q_A | μ0 ± δ/2)`.
pub fn bias_favor(n: usize, lambda0: f64, delta_over_sigma: f64, q_a: f64) -> Result<f64> {
    if !(q_a >= 1.0 && q_a.is_finite()) {
        return invalid(format!("q_A must be finite and at least 1, got {q_a}"));
    }
    if !(delta_over_sigma >= 0.0 && delta_over_sigma.is_finite()) {
        return invalid(format!("δ/σ must be nonnegative, got {delta_over_sigma}"));
    }
    check_n_lambda(n, lambda0)?;
    if q_a * q_a > n as f64 * lambda0 * lambda0 + 1.0 {
        return Ok(0.0);
    }
    let a = a_n(q_a, n, lambda0);
    let c = (n as f64).sqrt() * delta_over_sigma / 2.0;
    Ok(norm_interval(c - a, c + a))
}

fn check_n_lambda(n: usize, lambda0: f64) -> Result<()> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    if !(lambda0.is_finite() && lambda0 > 0.0) {
        return invalid(format!("λ0 must be positive and finite, got {lambda0}"));
    }
    Ok(())
}

/// How μ is drawn "at the null" in discretized error-rate simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NullDraw {
    /// μ equal to μ0 (and μ0 ± δ/2 for the alternatives).
    Point,
    /// μ from the prior conditioned on the central cell.
    CellConditional,
}

/// Which relative belief ratio the simulator evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MeansEvidence {
    /// Density ratio at μ0, the quantity behind the closed-form biases.
    Continuous,
    /// Ratio for the central cell of width `delta`.
    Discretized { delta: f64 },
}

/// Prior-predictive simulator for the means model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeansSimulator {
    pub k: usize,
    pub n: usize,
    pub sigma: f64,
    pub prior: NormalMeansPrior,
    pub evidence: MeansEvidence,
    pub null_draw: NullDraw,
}

impl MeansSimulator {
    pub fn new(k: usize, n: usize, sigma: f64, prior: NormalMeansPrior, evidence: MeansEvidence, null_draw: NullDraw) -> Result<Self> {
        if k == 0 || n == 0 {
            return invalid("k and n must be positive");
        }
        check_sigma(sigma)?;
        if let MeansEvidence::Discretized { delta } = evidence {
            if !(delta > 0.0 && delta.is_finite()) {
                return invalid(format!("δ must be positive, got {delta}"));
            }
        }
        if null_draw == NullDraw::CellConditional && evidence == MeansEvidence::Continuous {
            return invalid("a cell-conditional null needs a discretized analysis");
        }
        Ok(Self { k, n, sigma, prior, evidence, null_draw })
    }

    pub fn rb(&self, xbar: f64) -> f64 {
        match self.evidence {
            MeansEvidence::Continuous => rb_density_at_null(xbar, self.n, self.sigma, self.prior),
            MeansEvidence::Discretized { delta } => rb_null_cell(xbar, self.n, self.sigma, self.prior, delta),
        }
    }

    fn xbar_given(&self, mu: f64, rng: &mut SimRng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        mu + self.sigma / (self.n as f64).sqrt() * z
    }

    /// μ from the prior restricted to the central cell.
    pub fn draw_null_mu(&self, rng: &mut SimRng) -> f64 {
        match (self.null_draw, self.evidence) {
            (NullDraw::CellConditional, MeansEvidence::Discretized { delta }) => {
                let s = self.prior.lambda0 * self.sigma;
                let h = delta / (2.0 * s);
                let lo = norm_cdf(-h);
                let u = lo + rng.random::<f64>() * (1.0 - 2.0 * lo);
                self.prior.mu0 + s * norm_quantile(u.clamp(lo, 1.0 - lo).max(f64::MIN_POSITIVE))
            }
            _ => self.prior.mu0,
        }
    }
}

impl NullSimulator for MeansSimulator {
    fn hypotheses(&self) -> usize {
        self.k
    }

    fn rb_under_null(&self, _i: usize, rng: &mut SimRng) -> f64 {
        let mu = self.draw_null_mu(rng);
        self.rb(self.xbar_given(mu, rng))
    }

    fn rb_under_alternative(&self, _i: usize, offset: f64, rng: &mut SimRng) -> f64 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        self.rb(self.xbar_given(self.prior.mu0 + sign * offset, rng))
    }
}

/// Discretized analogue of the false-positive bias: `M(RB < q_R | null)`.
pub fn discretized_bias_against(
    n: usize,
    sigma: f64,
    prior: NormalMeansPrior,
    delta: f64,
    q_r: f64,
    null_draw: NullDraw,
    draws: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<McEstimate> {
    let sim = MeansSimulator::new(1, n, sigma, prior, MeansEvidence::Discretized { delta }, null_draw)?;
    crate::mtest::fp_rate_mc(&sim, q_r, draws, seed, workers)
}

/// Discretized analogue of the false-negative bias at `μ0 ± δ/2`.
pub fn discretized_bias_favor(
    n: usize,
    sigma: f64,
    prior: NormalMeansPrior,
    delta: f64,
    q_a: f64,
    draws: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<McEstimate> {
    let sim = MeansSimulator::new(1, n, sigma, prior, MeansEvidence::Discretized { delta }, NullDraw::Point)?;
    crate::mtest::fn_rate_mc(&sim, q_a, delta / 2.0, draws, seed, workers)
}

/// Prior of `kΞ`: binomial with success probability `2Φ(δ/2λ0σ) - 1`.
pub fn xi_prior_pmf(k: usize, delta: f64, lambda0: f64, sigma: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return invalid("k must be positive");
    }
    if !(delta > 0.0 && lambda0 > 0.0 && sigma > 0.0) {
        return invalid("δ, λ0 and σ must be positive");
    }
    Ok(binomial_pmf(k, null_cell_prior(delta, lambda0, sigma)))
}

fn ln_binomial_pmf(k: usize, p: f64) -> Vec<f64> {
    use crate::specfun::ln_gamma;
    let kf = k as f64;
    (0..=k)
        .map(|j| {
            let jf = j as f64;
            let ln_c = ln_gamma(kf + 1.0) - ln_gamma(jf + 1.0) - ln_gamma(kf - jf + 1.0);
            let a = if j == 0 { 0.0 } else { jf * p.ln() };
            let b = if j == k { 0.0 } else { (kf - jf) * (-p).ln_1p() };
            ln_c + a + b
        })
        .collect()
}

fn binomial_pmf(k: usize, p: f64) -> Vec<f64> {
    ln_binomial_pmf(k, p).into_iter().map(f64::exp).collect()
}

/// Distribution of the number of successes in independent Bernoulli(p_i).
pub fn poisson_binomial(ps: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; ps.len() + 1];
    f[0] = 1.0;
    for (m, &p) in ps.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            f[j] = f[j] * (1.0 - p) + f[j - 1] * p;
        }
        f[0] *= 1.0 - p;
    }
    f
}

/// How the posterior of Ξ is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum XiMethod {
    /// Sample every μ_i from its posterior and count central-cell members.
    MonteCarlo,
    /// Poisson-binomial recursion over the central-cell posterior masses.
    Exact,
}

/// Relative belief inference for the proportion Ξ of true nulls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiInference {
    /// Support points `0, 1/k, ..., 1`.
    pub xi: Vec<f64>,
    pub prior: Vec<f64>,
    pub posterior: Vec<f64>,
    /// `None` where the prior mass is zero in floating point.
    pub rb: Vec<Option<f64>>,
    pub estimate: f64,
    pub estimate_index: usize,
}

impl XiInference {
    pub fn k(&self) -> usize {
        self.xi.len() - 1
    }
}

/// Posterior pmf, relative belief ratio and estimate of Ξ.
pub fn xi_posterior_rb(
    model: &NormalMeansModel,
    prior: NormalMeansPrior,
    delta: f64,
    method: XiMethod,
    mc_draws: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<XiInference> {
    if !(delta > 0.0 && delta.is_finite()) {
        return invalid(format!("δ must be positive, got {delta}"));
    }
    let k = model.k();
    let h = delta / 2.0;
    let ps: Vec<f64> = model
        .xbar
        .iter()
        .map(|&x| {
            let (m, s) = posterior_params(x, model.n, model.sigma, prior);
            norm_interval((prior.mu0 - h - m) / s, (prior.mu0 + h - m) / s)
        })
        .collect();
    let posterior = match method {
        XiMethod::Exact => poisson_binomial(&ps),
        XiMethod::MonteCarlo => {
            if mc_draws == 0 {
                return invalid("Monte Carlo needs at least one draw");
            }
            let blocks = mc_draws.div_ceil(mc::BLOCK);
            let counts = mc::replicate(seed, blocks, workers, |b, rng| {
                let mut hist = vec![0u64; k + 1];
                for _ in 0..mc::BLOCK.min(mc_draws - b * mc::BLOCK) {
                    let c = ps.iter().filter(|&&p| rng.random::<f64>() < p).count();
                    hist[c] += 1;
                }
                hist
            })?;
            let mut total = vec![0u64; k + 1];
            for hist in counts {
                for (t, c) in total.iter_mut().zip(hist) {
                    *t += c;
                }
            }
            total.into_iter().map(|c| c as f64 / mc_draws as f64).collect()
        }
    };
    let ln_prior = ln_binomial_pmf(k, null_cell_prior(delta, prior.lambda0, model.sigma));
    let rb: Vec<Option<f64>> = ln_prior
        .iter()
        .zip(&posterior)
        .map(|(&lp, &q)| {
            (lp.exp() > 0.0).then(|| if q > 0.0 { (q.ln() - lp).exp() } else { 0.0 })
        })
        .collect();
    let mut best = 0;
    for j in 0..=k {
        if let Some(r) = rb[j] {
            if rb[best].is_none_or(|b| r > b) {
                best = j;
            }
        }
    }
    Ok(XiInference {
        xi: (0..=k).map(|j| j as f64 / k as f64).collect(),
        prior: ln_prior.into_iter().map(f64::exp).collect(),
        posterior,
        rb,
        estimate: best as f64 / k as f64,
        estimate_index: best,
    })
}

/// Data set of group means drawn at the given true means.
pub fn simulate_xbar(true_means: &[f64], n: usize, sigma: f64, rng: &mut SimRng) -> Vec<f64> {
    let se = sigma / (n as f64).sqrt();
    true_means
        .iter()
        .map(|&mu| mu + se * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Simulate one data set and cross-tabulate the verdicts against the truth
/// (a null is true when its mean lies in the central cell).
pub fn simulate_confusion(
    true_means: &[f64],
    n: usize,
    sigma: f64,
    prior: NormalMeansPrior,
    grid: &Grid,
    cutoffs: CutoffPair,
    seed: u64,
) -> Result<ConfusionMatrix> {
    let mut rng = mc::substream(seed, 0);
    let model = NormalMeansModel::new(n, sigma, simulate_xbar(true_means, n, sigma, &mut rng))?;
    let records = analyze(&model, prior, grid)?;
    let verdicts = crate::mtest::classify(&records, cutoffs)?;
    let (lo, hi) = grid.bounds(grid.null_index());
    let truth: Vec<bool> = true_means.iter().map(|&m| m > lo && m <= hi).collect();
    ConfusionMatrix::tabulate(&verdicts, &truth)
}

/// Outcome of the optimality check for the acceptance rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceComparison {
    /// `M(RB > q_A | H0)` for the relative belief rule.
    pub rb_null_acceptance: McEstimate,
    /// Same quantity for the calibrated competitor.
    pub competitor_null_acceptance: McEstimate,
    /// Unconditional prior probability of acceptance, relative belief rule.
    pub rb_acceptance: McEstimate,
    /// Unconditional prior probability of acceptance, competitor.
    pub competitor_acceptance: McEstimate,
    pub competitor_threshold: f64,
}

/// Compare the relative belief acceptance rule `RB > q_A` with a rule that
/// accepts when the posterior probability of the central cell under a
/// working prior `N(μ0 + shift, λ0²σ²)` exceeds a threshold calibrated to
/// give at least the same acceptance probability when the null is true.
pub fn compare_acceptance_rules(
    n: usize,
    sigma: f64,
    prior: NormalMeansPrior,
    delta: f64,
    q_a: f64,
    shift: f64,
    draws: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<AcceptanceComparison> {
    let sim = MeansSimulator::new(1, n, sigma, prior, MeansEvidence::Discretized { delta }, NullDraw::CellConditional)?;
    let working = NormalMeansPrior::new(prior.mu0 + shift, prior.lambda0)?;
    let h = delta / 2.0;
    let competitor = |xbar: f64| {
        let (m, s) = posterior_params(xbar, n, sigma, working);
        norm_interval((prior.mu0 - h - m) / s, (prior.mu0 + h - m) / s)
    };

    // Calibration sample under the null.
    let null_xbar = mc::replicate(seed, draws, workers, |_, rng| {
        let mu = sim.draw_null_mu(rng);
        sim.xbar_given(mu, rng)
    })?;
    let rb_hits = null_xbar.iter().filter(|&&x| sim.rb(x) > q_a).count();
    let mut stats: Vec<f64> = null_xbar.iter().map(|&x| competitor(x)).collect();
    stats.sort_by(|a, b| b.total_cmp(a));
    let threshold = if rb_hits == 0 {
        f64::INFINITY
    } else {
        // accept the rb_hits largest values: threshold just below the rb_hits-th
        let t = stats[rb_hits - 1];
        t - 1e-15 * t.abs().max(1e-300)
    };
    let bern = |hits: usize| McEstimate::from_moments(hits as f64, hits as f64, draws);
    let comp_hits = stats.iter().filter(|&&s| s > threshold).count();

    let seed2 = seed ^ 0x9e37_79b9_7f4a_7c15;
    let pair = mc::replicate(seed2, draws, workers, |_, rng| {
        let mu = prior.mu0 + prior.lambda0 * sigma * rng.sample::<f64, _>(StandardNormal);
        let x = sim.xbar_given(mu, rng);
        (sim.rb(x) > q_a, competitor(x) > threshold)
    })?;
    let a = pair.iter().filter(|p| p.0).count();
    let b = pair.iter().filter(|p| p.1).count();
    Ok(AcceptanceComparison {
        rb_null_acceptance: bern(rb_hits),
        competitor_null_acceptance: bern(comp_hits),
        rb_acceptance: bern(a),
        competitor_acceptance: bern(b),
        competitor_threshold: threshold,
    })
}
