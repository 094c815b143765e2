//! Subcommands other than `reproduce`.

use std::fs::File;
use std::path::Path;

use nalgebra::DVector;
use relbel_core::data::{read_dataset, read_group_means, Dataset};
use relbel_core::laplace::elicit_laplace;
use relbel_core::mtest::{classify, mt_select, CutoffPair};
use relbel_core::nonfullrank::{analyze_mp, mp_posterior, split_basis};
use relbel_core::normal_means::{self as nm, NormalMeansModel, NormalMeansPrior, NullDraw, XiMethod};
use relbel_core::regression::{self as reg, DesignMatrix, Elicitation, Eq17Form, GammaSolver, RegressionEvidence, RegressionPrior};
use relbel_core::{EvidenceRecord, Error as CoreError, Grid};

use crate::config::Settings;
use crate::error::CliError;
use crate::output::{csv_table, fmt, plot_table, Bundle};

pub const DEFAULT_DRAWS: usize = 100_000;

pub struct Ctx<'a> {
    pub settings: &'a Settings,
    pub workers: Option<usize>,
}

fn open(path: &str) -> Result<File, CliError> {
    File::open(Path::new(path)).map_err(|e| CliError::Usage(format!("cannot open {path}: {e}")))
}

fn cutoffs(s: &Settings) -> Result<CutoffPair, CliError> {
    Ok(CutoffPair::new(s.f64_or("q_r", 1.0)?, s.f64_or("q_a", 1.0)?)?)
}

fn model_kind(s: &Settings, allowed: &[&str]) -> Result<String, CliError> {
    let m = s.req_str("model")?;
    if allowed.contains(&m.as_str()) {
        Ok(m)
    } else {
        Err(CliError::Usage(format!("model must be one of {}, got `{m}`", allowed.join(", "))))
    }
}

fn positive_draws(s: &Settings) -> Result<usize, CliError> {
    let d = s.usize_or("draws", DEFAULT_DRAWS)?;
    if d == 0 {
        return Err(CliError::Usage("draws must be positive".into()));
    }
    Ok(d)
}

/// `(μ0, λ0)` given directly or elicited from `(lower, upper)`.
fn normal_prior(s: &Settings, sigma: f64) -> Result<NormalMeansPrior, CliError> {
    if s.has("lambda0") {
        return Ok(NormalMeansPrior::new(s.f64_or("mu0", 0.0)?, s.req_f64("lambda0")?)?);
    }
    let (lo, hi) = (s.req_f64("lower")?, s.req_f64("upper")?);
    Ok(nm::elicit_normal(lo, hi, sigma, s.f64_or("gamma", 0.99)?)?)
}

fn solver(s: &Settings) -> Result<GammaSolver, CliError> {
    match s.str_or("solver", "published")?.as_str() {
        "published" => Ok(GammaSolver::PUBLISHED),
        "exact" => Ok(GammaSolver::Exact),
        other => Err(CliError::Usage(format!("solver must be `published` or `exact`, got `{other}`"))),
    }
}

/// Regression prior: `(α1, α2)` given or elicited from `(s1, s2)`, and λ0
/// given or elicited from `m0` with `τ0` from the settings or the design.
fn regression_prior(s: &Settings, design: Option<&DesignMatrix>) -> Result<RegressionPrior, CliError> {
    let explicit = s.has("alpha1") || s.has("alpha2");
    let (alpha1, alpha2, elicited) = if explicit {
        (s.req_f64("alpha1")?, s.req_f64("alpha2")?, None)
    } else {
        let (s1, s2) = (s.req_f64("s1")?, s.req_f64("s2")?);
        let g = s.f64_or("gamma", 0.99)?;
        let p = solver(s)?.solve(s1, s2, g)?;
        (p.shape, p.rate, Some((s1, s2, g)))
    };
    let lambda0 = if s.has("lambda0") {
        s.req_f64("lambda0")?
    } else {
        let m0 = s.req_f64("m0")?;
        let s2 = match elicited {
            Some((_, s2, _)) => s2,
            None => s.req_f64("s2")?,
        };
        reg::elicit_lambda0(m0, s2, tau0_of(s, design)?)?
    };
    Ok(RegressionPrior::new(lambda0, alpha1, alpha2)?)
}

fn tau0_of(s: &Settings, design: Option<&DesignMatrix>) -> Result<f64, CliError> {
    match (s.opt_f64("tau0")?, design) {
        (Some(t), _) => Ok(t),
        (None, Some(x)) => Ok(reg::tau0(x)),
        (None, None) => Err(CliError::Usage("missing `tau0` (or a dataset to compute it from)".into())),
    }
}

struct RegressionData {
    names: Vec<String>,
    design: DesignMatrix,
    y: DVector<f64>,
}

fn load_regression(s: &Settings) -> Result<RegressionData, CliError> {
    let d: Dataset = read_dataset(open(&s.req_str("data")?)?)?;
    let center = s.req_f64("center")?;
    let design = reg::standardize(&d.with_intercept())?;
    let y = reg::center_response(&d.y, center);
    let mut names = vec!["constant".to_string()];
    names.extend(d.names);
    Ok(RegressionData { names, design, y })
}

pub fn elicit(ctx: &Ctx) -> Result<Bundle, CliError> {
    let s = ctx.settings;
    let model = model_kind(s, &["normal", "laplace", "regression"])?;
    let mut rows: Vec<(String, f64)> = Vec::new();
    match model.as_str() {
        "normal" | "laplace" => {
            let (lo, hi) = (s.req_f64("lower")?, s.req_f64("upper")?);
            let sigma = s.f64_or("sigma", 1.0)?;
            let g = s.f64_or("gamma", 0.99)?;
            let (mu0, lambda0) = if model == "normal" {
                let p = nm::elicit_normal(lo, hi, sigma, g)?;
                (p.mu0, p.lambda0)
            } else {
                let p = elicit_laplace(lo, hi, sigma, g)?;
                (p.mu0, p.lambda0)
            };
            rows.extend([("lower", lo), ("upper", hi), ("sigma", sigma), ("gamma", g), ("mu0", mu0), ("lambda0", lambda0)].map(|(k, v)| (k.to_string(), v)));
        }
        _ => {
            let design = match s.opt_str("data")? {
                Some(path) => Some(reg::standardize(&read_dataset(open(&path)?)?.with_intercept())?),
                None => None,
            };
            let e = Elicitation {
                m0: s.req_f64("m0")?,
                s1: s.req_f64("s1")?,
                s2: s.req_f64("s2")?,
                gamma_vc: s.f64_or("gamma", 0.99)?,
                tau0: tau0_of(s, design.as_ref())?,
            };
            let p = reg::elicit_regression(e, solver(s)?)?;
            rows.extend(
                [
                    ("m0", e.m0),
                    ("s1", e.s1),
                    ("s2", e.s2),
                    ("gamma", e.gamma_vc),
                    ("tau0", e.tau0),
                    ("lambda0", p.lambda0),
                    ("alpha1", p.alpha1),
                    ("alpha2", p.alpha2),
                ]
                .map(|(k, v)| (k.to_string(), v)),
            );
        }
    }
    let mut b = Bundle::new(csv_table(&["parameter", "value"], rows.iter().map(|(k, v)| vec![k.clone(), fmt(*v)]))?);
    for (k, v) in &rows {
        b.result(k, *v);
    }
    Ok(b)
}

pub fn check_prior(ctx: &Ctx) -> Result<Bundle, CliError> {
    let s = ctx.settings;
    let data = load_regression(s)?;
    let prior = regression_prior(s, Some(&data.design))?;
    let draws = positive_draws(s)?;
    let level = s.f64_or("level", 0.05)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Usage(format!("level must lie in (0, 1), got {level}")));
    }
    let fail = s.flag("fail_on_conflict")?;
    let c = reg::conflict_check(&data.design, &data.y, &prior, draws, s.seed()?, ctx.workers)?;
    let rows = [("sigma", c.sigma), ("beta", c.beta)]
        .map(|(name, e)| vec![name.to_string(), fmt(e.value), fmt(e.std_error), e.draws.to_string()]);
    let mut b = Bundle::new(csv_table(&["check", "tail_probability", "std_error", "draws"], rows)?);
    b.result("sigma_tail", c.sigma.value);
    b.result("beta_tail", c.beta.value);
    if let Some(stage) = c.flagged(level) {
        let msg = format!("prior-data conflict: {stage} check tail probability below {level}");
        b.result("conflict", stage);
        if fail {
            b.deferred = Some(CliError::Conflict(msg));
        } else {
            eprintln!("warning: {msg}");
        }
    }
    Ok(b)
}

fn verdict_rows(ids: &[String], extra: &[f64], records: &[EvidenceRecord], cut: CutoffPair) -> Result<Vec<Vec<String>>, CliError> {
    let verdicts = classify(records, cut)?;
    Ok((0..records.len())
        .map(|i| {
            vec![
                ids[i].clone(),
                fmt(extra[i]),
                fmt(records[i].rb),
                fmt(records[i].strength),
                verdicts[i].to_string(),
            ]
        })
        .collect())
}

pub fn analyze(ctx: &Ctx) -> Result<Bundle, CliError> {
    let s = ctx.settings;
    match model_kind(s, &["normal", "regression"])?.as_str() {
        "normal" => analyze_means(ctx),
        _ => analyze_regression(ctx),
    }
}

fn analyze_means(ctx: &Ctx) -> Result<Bundle, CliError> {
    let s = ctx.settings;
    let g = read_group_means(open(&s.req_str("data")?)?)?;
    let n = match (g.n, s.opt_u64("n")?) {
        (Some(a), Some(b)) if a as u64 != b => {
            return Err(CliError::Usage(format!("data has groups of size {a} but n = {b}")))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b as usize,
        (None, None) => return Err(CliError::Usage("group means need the group size `n`".into())),
    };
    let sigma = s.req_f64("sigma")?;
    let prior = normal_prior(s, sigma)?;
    let delta = s.f64_or("delta", 1.0)?;
    let grid = match s.opt_u64("t_max")? {
        Some(t) => Grid::new(prior.mu0, delta, t as usize)?,
        None => prior.default_grid(sigma, delta)?,
    };
    let model = NormalMeansModel::new(n, sigma, g.xbar.clone())?;
    let records = nm::analyze(&model, prior, &grid)?;
    let cut = cutoffs(s)?;
    let rows = verdict_rows(&g.ids, &g.xbar, &records, cut)?;
    let mut b = Bundle::new(csv_table(&["hypothesis", "xbar", "rb", "strength", "verdict"], rows)?);
    b.result("mu0", prior.mu0);
    b.result("lambda0", prior.lambda0);
    b.result("max_rb", nm::max_rb(delta, prior.lambda0, sigma));

    let plot_id = s.opt_str("plot_hypothesis")?;
    if s.flag("xi")? {
        if plot_id.is_some() {
            return Err(CliError::Usage("choose either --xi or --plot-hypothesis for the plot data".into()));
        }
        let method = match s.str_or("xi_method", "mc")?.as_str() {
            "mc" => XiMethod::MonteCarlo,
            "exact" => XiMethod::Exact,
            other => return Err(CliError::Usage(format!("xi-method must be `mc` or `exact`, got `{other}`"))),
        };
        let draws = positive_draws(s)?;
        let xi = nm::xi_posterior_rb(&model, prior, delta, method, draws, s.seed()?, ctx.workers)?;
        eprintln!("ξ(x) = {}", xi.estimate);
        b.result("xi_estimate", xi.estimate);
        let sel = mt_select(&records, xi.estimate)?;
        b.result("selected_accepted", sel.accepted.len() as i64);
        b.result("selected_rejected", sel.rejected.len() as i64);
        b.plot = Some(plot_table(&xi.xi, &xi.prior, &xi.posterior, &xi.rb)?);
    } else if let Some(id) = plot_id {
        let i = g
            .ids
            .iter()
            .position(|h| *h == id)
            .ok_or_else(|| CliError::Usage(format!("no hypothesis `{id}` in the data")))?;
        let (belief, _) = nm::rb_cells(&model, prior, i, &grid)?;
        let mids: Vec<f64> = (0..grid.n_cells()).map(|c| grid.midpoint(c)).collect();
        b.plot = Some(plot_table(&mids, belief.prior(), belief.posterior(), &belief.ratios())?);
    }
    Ok(b)
}

fn eq17_form(s: &Settings) -> Result<Eq17Form, CliError> {
    match s.str_or("form", "published")?.as_str() {
        "published" => Ok(Eq17Form::Published),
        "density-ratio" => Ok(Eq17Form::DensityRatio),
        other => Err(CliError::Usage(format!("form must be `published` or `density-ratio`, got `{other}`"))),
    }
}

fn analyze_regression(ctx: &Ctx) -> Result<Bundle, CliError> {
    let s = ctx.settings;
    let data = load_regression(s)?;
    let delta = s.f64_or("delta", 1.0)?;
    let cut = cutoffs(s)?;
    let form = eq17_form(s)?;
    let plot_var = s.opt_str("plot_variable")?;
    let post = match reg::least_squares(data.design.matrix(), &data.y) {
        Err(CoreError::RankDeficient { rank, .. }) => {
            eprintln!("notice: design has rank {rank}; analyzing the Moore-Penrose coefficients");
            return analyze_rank_deficient(s, data, delta, cut, plot_var);
        }
        Err(e) => return Err(e.into()),
        Ok(_) => {
            let prior = regression_prior(s, Some(&data.design))?;
            (reg::posterior(&data.design, &data.y, &prior)?, prior)
        }
    };
    let (post, prior) = post;
    let report = reg::analyze(&post, &prior, &data.names, delta, form)?;
    let records: Vec<EvidenceRecord> = report.iter().map(|r| r.record()).collect();
    let verdicts = classify(&records, cut)?;
    let rows = report.iter().zip(&verdicts).map(|(r, v)| {
        vec![
            r.variable.clone(),
            fmt(r.rb_estimate),
            fmt(r.rb_at_zero),
            fmt(r.strength),
            fmt(r.posterior_mean),
            v.to_string(),
        ]
    });
    let mut b = Bundle::new(csv_table(
        &["variable", "rb_estimate", "rb_at_zero", "strength", "posterior_mean", "verdict"],
        rows,
    )?);
    b.result("lambda0", prior.lambda0);
    b.result("alpha1", prior.alpha1);
    b.result("alpha2", prior.alpha2);
    if let Some(name) = plot_var {
        let i = data
            .names
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Usage(format!("no variable `{name}`")))?;
        let (loc, sd) = post.marginal(i);
        let grid = reg::coefficient_grid(loc, sd, prior.marginal_scale(), prior.marginal_dof(), delta)?;
        let belief = reg::rb_beta_discretized(&post, &prior, i, grid)?;
        let mids: Vec<f64> = (0..grid.n_cells()).map(|c| grid.midpoint(c)).collect();
        b.plot = Some(plot_table(&mids, belief.prior(), belief.posterior(), &belief.ratios())?);
    }
    Ok(b)
}

fn analyze_rank_deficient(
    s: &Settings,
    data: RegressionData,
    delta: f64,
    cut: CutoffPair,
    plot_var: Option<String>,
) -> Result<Bundle, CliError> {
    if plot_var.is_some() {
        return Err(CliError::Usage("plot data is not available for rank-deficient designs".into()));
    }
    let k = data.design.k();
    let predictors = data.design.matrix().columns(1, k).clone_owned();
    let split = split_basis(&predictors)?;
    let prior = regression_prior(s, Some(&data.design))?;
    let post = mp_posterior(&split, &data.y, &prior)?;
    let records = analyze_mp(&post, &prior, delta)?;
    let means: Vec<f64> = post.beta_mp_mean.iter().copied().collect();
    let rows = verdict_rows(&data.names[1..], &means, &records, cut)?;
    let mut b = Bundle::new(csv_table(&["variable", "mp_mean", "rb", "strength", "verdict"], rows)?);
    b.result("rank", split.l() as i64);
    b.result("intercept_mean", post.beta0_mean);
    Ok(b)
}

pub fn bias(ctx: &Ctx) -> Result<Bundle, CliError> {
    let s = ctx.settings;
    let header = ["quantity", "cutoff", "value", "std_error"];
    let row = |q: &str, c: f64, v: f64, se: Option<f64>| vec![q.to_string(), fmt(c), fmt(v), se.map(fmt).unwrap_or_default()];
    let (q_r, q_a) = (s.f64_or("q_r", 1.0)?, s.f64_or("q_a", 1.0)?);
    CutoffPair::new(q_r, q_a)?;
    let delta = s.f64_or("delta", 1.0)?;
    let mut rows = Vec::new();
    match model_kind(s, &["normal", "regression"])?.as_str() {
        "normal" => {
            let n = s.req_usize("n")?;
            let sigma = s.f64_or("sigma", 1.0)?;
            let prior = normal_prior(s, sigma)?;
            rows.push(row("false_positive", q_r, nm::bias_against(n, prior.lambda0, q_r)?, None));
            rows.push(row("false_negative", q_a, nm::bias_favor(n, prior.lambda0, delta / sigma, q_a)?, None));
            if s.flag("discretized")? {
                let draws = positive_draws(s)?;
                let seed = s.seed()?;
                let fp = nm::discretized_bias_against(n, sigma, prior, delta, q_r, NullDraw::Point, draws, seed, ctx.workers)?;
                let fnr = nm::discretized_bias_favor(n, sigma, prior, delta, q_a, draws, seed ^ 1, ctx.workers)?;
                rows.push(row("false_positive_discretized", q_r, fp.value, Some(fp.std_error)));
                rows.push(row("false_negative_discretized", q_a, fnr.value, Some(fnr.std_error)));
            }
        }
        _ => {
            let data = load_regression(s)?;
            let prior = regression_prior(s, Some(&data.design))?;
            let evidence = match s.str_or("evidence", "published")?.as_str() {
                "published" => RegressionEvidence::Closed(Eq17Form::Published),
                "density-ratio" => RegressionEvidence::Closed(Eq17Form::DensityRatio),
                "discretized" => RegressionEvidence::Discretized { delta },
                other => {
                    return Err(CliError::Usage(format!(
                        "evidence must be `published`, `density-ratio` or `discretized`, got `{other}`"
                    )))
                }
            };
            let draws = positive_draws(s)?;
            let r = reg::regression_bias_mc(&data.design, &prior, delta, evidence, q_r, q_a, draws, s.seed()?, ctx.workers)?;
            rows.push(row("false_positive", q_r, r.fp_rate.value, Some(r.fp_rate.std_error)));
            rows.push(row("false_negative", q_a, r.fn_rate.value, Some(r.fn_rate.std_error)));
        }
    }
    Ok(Bundle::new(csv_table(&header, rows)?))
}

pub fn select(ctx: &Ctx) -> Result<Bundle, CliError> {
    let s = ctx.settings;
    let path = s.req_str("data")?;
    let xi = s.req_f64("xi")?;
    let mut rdr = csv::Reader::from_reader(open(&path)?);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h.as_str()));
    let id_col = col(&["hypothesis", "variable"]).ok_or_else(|| CliError::Usage("need a `hypothesis` or `variable` column".into()))?;
    let rb_col = col(&["rb", "rb_at_zero"]).ok_or_else(|| CliError::Usage("need an `rb` column".into()))?;
    let st_col = col(&["strength"]).ok_or_else(|| CliError::Usage("need a `strength` column".into()))?;
    let mut ids = Vec::new();
    let mut records = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64, CliError> {
            let f = rec.get(j).unwrap_or("");
            f.trim().parse().map_err(|_| CliError::Usage(format!("row {}: cannot parse `{f}`", r + 1)))
        };
        ids.push(rec.get(id_col).unwrap_or("").to_string());
        records.push(EvidenceRecord { rb: num(rb_col)?, strength: num(st_col)?, cell_index: 0 });
    }
    if records.is_empty() {
        return Err(CliError::Usage(format!("{path} has no rows")));
    }
    let sel = mt_select(&records, xi)?;
    let rows = (0..records.len()).map(|i| {
        let tag = if sel.accepted.contains(&i) {
            "accepted"
        } else if sel.rejected.contains(&i) {
            "rejected"
        } else {
            "none"
        };
        vec![ids[i].clone(), fmt(records[i].rb), fmt(records[i].strength), tag.to_string()]
    });
    let mut b = Bundle::new(csv_table(&["hypothesis", "rb", "strength", "selection"], rows)?);
    b.result("accepted", sel.accepted.len() as i64);
    b.result("rejected", sel.rejected.len() as i64);
    Ok(b)
}
