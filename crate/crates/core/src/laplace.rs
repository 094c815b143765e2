//! Laplace priors on the means: elicitation, the soft-threshold MAP
//! estimator, and relative belief analysis under the Laplace prior.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::mc;
use crate::mtest::{Classification, ConfusionMatrix};
use crate::normal_means::simulate_xbar;
use crate::rb::{self, DiscreteBelief, EvidenceRecord, Grid};
use crate::specfun::{integrate, laplace_std_cdf, laplace_std_quantile, laplace_std_sf, norm_cdf};

/// Independent Laplace priors with mean μ0 and variance λ0²σ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacePrior {
    pub mu0: f64,
    pub lambda0: f64,
}

impl LaplacePrior {
    pub fn new(mu0: f64, lambda0: f64) -> Result<Self> {
        if !mu0.is_finite() {
            return invalid(format!("μ0 must be finite, got {mu0}"));
        }
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return invalid(format!("λ0 must be positive and finite, got {lambda0}"));
        }
        Ok(Self { mu0, lambda0 })
    }
}

pub fn elicit_laplace(m_l: f64, m_u: f64, sigma: f64, gamma_vc: f64) -> Result<LaplacePrior> {
    if !(m_l.is_finite() && m_u.is_finite()) || m_l >= m_u {
        return invalid(format!("need finite m_l < m_u, got ({m_l}, {m_u})"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return invalid(format!("σ must be positive and finite, got {sigma}"));
    }
    if !(gamma_vc > 0.0 && gamma_vc < 1.0) {
        return invalid(format!("virtual certainty must lie in (0, 1), got {gamma_vc}"));
    }
    let g = laplace_std_quantile((1.0 + gamma_vc) / 2.0)?;
    LaplacePrior::new((m_l + m_u) / 2.0, (m_u - m_l) / (2.0 * sigma * g))
}

/// Half-width `√2 σ / (λ0 n)` of the MAP dead zone.
pub fn map_threshold(n: usize, sigma: f64, lambda0: f64) -> f64 {
    SQRT_2 * sigma / (lambda0 * n as f64)
}

/// Posterior mode of μ_i: `x̄` soft-thresholded towards μ0.
pub fn laplace_map(xbar: f64, n: usize, sigma: f64, prior: LaplacePrior) -> Result<f64> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    let h = map_threshold(n, sigma, prior.lambda0);
    let d = xbar - prior.mu0;
    Ok(if d > h {
        xbar - h
    } else if d < -h {
        xbar + h
    } else {
        prior.mu0
    })
}

/// `M(MAP = μ0 | μ0) = 2Φ(√2 / (λ0 √n)) - 1`.
pub fn map_exact_zero_prob(n: usize, lambda0: f64) -> Result<f64> {
    if n == 0 || !(lambda0 > 0.0) {
        return invalid("n and λ0 must be positive");
    }
    Ok(2.0 * norm_cdf(SQRT_2 / (lambda0 * (n as f64).sqrt())) - 1.0)
}

/// Simulate group means at `true_means`, call `μ_i = μ0` exactly when the
/// MAP estimate equals μ0, and cross-tabulate against `true_means == μ0`.
pub fn lasso_confusion_sim(n: usize, sigma: f64, prior: LaplacePrior, true_means: &[f64], seed: u64) -> Result<ConfusionMatrix> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    let mut rng = mc::substream(seed, 0);
    let xbar = simulate_xbar(true_means, n, sigma, &mut rng);
    let verdicts = xbar
        .iter()
        .map(|&x| {
            laplace_map(x, n, sigma, prior).map(|m| {
                if m == prior.mu0 {
                    Classification::Accepted
                } else {
                    Classification::Rejected
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<bool> = true_means.iter().map(|&m| m == prior.mu0).collect();
    ConfusionMatrix::tabulate(&verdicts, &truth)
}

/// Prior cell masses under the Laplace prior.
pub fn prior_cell_masses(grid: &Grid, prior: LaplacePrior, sigma: f64) -> Vec<f64> {
    let s = prior.lambda0 * sigma;
    grid.masses(|a, b| {
        let (za, zb) = ((a - prior.mu0) / s, (b - prior.mu0) / s);
        if za >= 0.0 {
            laplace_std_sf(za) - laplace_std_sf(zb)
        } else {
            laplace_std_cdf(zb) - laplace_std_cdf(za)
        }
    })
}

/// Posterior cell masses by quadrature of the unnormalized posterior density.
pub fn posterior_cell_masses(grid: &Grid, xbar: f64, n: usize, sigma: f64, prior: LaplacePrior) -> Result<Vec<f64>> {
    let mode = laplace_map(xbar, n, sigma, prior)?;
    let se = sigma / (n as f64).sqrt();
    let rate = SQRT_2 / (prior.lambda0 * sigma);
    let log_dens = |mu: f64| -0.5 * ((xbar - mu) / se).powi(2) - rate * (mu - prior.mu0).abs();
    let peak = log_dens(mode);
    let f = |mu: f64| (log_dens(mu) - peak).exp();

    // Beyond this distance from the mode the integrand is below e^-800.
    let reach = 40.0 * se + rate * se * se;
    let (lo_cut, hi_cut) = (mode - reach, mode + reach);
    let mut masses: Vec<f64> = (0..grid.n_cells())
        .map(|i| {
            let (a, b) = grid.bounds(i);
            let (a, b) = (a.max(lo_cut), b.min(hi_cut));
            if b <= a {
                return 0.0;
            }
            // split at μ0 and the mode so the kink is a panel edge
            let mut cuts = vec![a, b];
            for c in [prior.mu0, mode] {
                if c > a && c < b {
                    cuts.push(c);
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.windows(2).map(|w| integrate(&f, w[0], w[1], 1e-13 * se)).sum()
        })
        .collect();
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    Ok(masses)
}

/// Evidence for `μ_i` in the central cell under the Laplace prior.
pub fn rb_cells(xbar: f64, n: usize, sigma: f64, prior: LaplacePrior, grid: &Grid) -> Result<(DiscreteBelief, EvidenceRecord)> {
    if (grid.center - prior.mu0).abs() > 1e-12 * (1.0 + prior.mu0.abs()) {
        return invalid(format!("grid must be centred at μ0 = {}", prior.mu0));
    }
    let belief = DiscreteBelief::on_grid(
        *grid,
        prior_cell_masses(grid, prior, sigma),
        posterior_cell_masses(grid, xbar, n, sigma, prior)?,
    )?;
    let rec = rb::evidence(&belief, grid.null_index())?;
    Ok((belief, rec))
}
