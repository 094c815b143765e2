//! Regeneration of the published tables and figures.

use relbel_core::laplace::{elicit_laplace, lasso_confusion_sim};
use relbel_core::mc::substream;
use relbel_core::mtest::{classify, CutoffPair};
use relbel_core::nonfullrank::{run_example5_sim, Example5Config};
use relbel_core::normal_means::{self as nm, NormalMeansModel, NullDraw, XiMethod};
use relbel_core::regression::{self as reg, Elicitation, Eq17Form, GammaSolver, RegressionEvidence, RegressionPrior};
use relbel_core::{Classification, ConfusionMatrix};

use crate::commands::{Ctx, DEFAULT_DRAWS};
use crate::error::CliError;
use crate::output::{csv_table, fmt, plot_table, Bundle};

pub const IDS: [&str; 8] = ["table1", "table2", "table3", "table4", "table5", "table6", "fig1", "fig2"];

const SIGMA: f64 = 1.0;
const N: usize = 5;
const DELTA: f64 = 1.0;

fn example1_means(k_null: usize, k_alt: usize) -> Vec<f64> {
    let mut v = vec![0.0; k_null];
    v.extend(std::iter::repeat_n(2.0, k_alt));
    v
}

pub fn run(ctx: &Ctx) -> Result<Bundle, CliError> {
    let s = ctx.settings;
    let id = s.req_str("id")?;
    let seed = s.seed()?;
    let draws = s.usize_or("draws", DEFAULT_DRAWS)?;
    if draws == 0 {
        return Err(CliError::Usage("draws must be positive".into()));
    }
    match id.as_str() {
        "table1" => table1(ctx, seed, draws),
        "table2" | "table3" => bias_table(ctx, id == "table2", seed, draws),
        "table4" => table4(seed),
        "table5" => table5(ctx, seed, draws),
        "table6" => {
            let ks = match s.opt_u64("k")? {
                Some(k) => vec![k as usize],
                None => vec![10, 20, 50, 100],
            };
            table6(&ks, s.f64_or("delta", 0.5)?, seed)
        }
        "fig1" => figure(ctx, 7, 3, seed, draws),
        "fig2" => figure(ctx, 700, 300, seed, draws),
        other => Err(CliError::Usage(format!("unknown exhibit `{other}`; expected one of {}", IDS.join(", ")))),
    }
}

fn simulated_model(truth: &[f64], seed: u64) -> Result<NormalMeansModel, CliError> {
    let mut rng = substream(seed, 0);
    Ok(NormalMeansModel::new(N, SIGMA, nm::simulate_xbar(truth, N, SIGMA, &mut rng))?)
}

fn table1(ctx: &Ctx, seed: u64, draws: usize) -> Result<Bundle, CliError> {
    let prior = nm::elicit_normal(-5.0, 5.0, SIGMA, 0.99)?;
    let truth = example1_means(7, 3);
    let model = simulated_model(&truth, seed)?;
    let grid = prior.default_grid(SIGMA, DELTA)?;
    let records = nm::analyze(&model, prior, &grid)?;
    let verdicts = classify(&records, CutoffPair::unit())?;
    let rows = (0..truth.len()).map(|i| {
        vec![
            (i + 1).to_string(),
            fmt(truth[i]),
            fmt(model.xbar[i]),
            fmt(records[i].rb),
            fmt(records[i].strength),
            verdicts[i].to_string(),
        ]
    });
    let mut b = Bundle::new(csv_table(&["hypothesis", "mu", "xbar", "rb", "strength", "verdict"], rows)?);
    let xi = nm::xi_posterior_rb(&model, prior, DELTA, XiMethod::MonteCarlo, draws, seed, ctx.workers)?;
    b.result("xi_estimate", xi.estimate);
    b.result("max_rb", nm::max_rb(DELTA, prior.lambda0, SIGMA));
    Ok(b)
}

fn bias_table(ctx: &Ctx, against: bool, seed: u64, draws: usize) -> Result<Bundle, CliError> {
    let cutoffs: [(usize, f64, [f64; 3]); 6] = if against {
        [
            (1, 1.0, [1.0, 0.5, 0.1]),
            (1, 2.0, [1.0, 0.5, 0.1]),
            (1, 10.0, [1.0, 0.5, 0.1]),
            (5, 1.0, [1.0, 0.5, 0.1]),
            (5, 2.0, [1.0, 0.5, 0.1]),
            (5, 10.0, [1.0, 0.5, 0.1]),
        ]
    } else {
        [
            (1, 1.0, [1.0, 1.2, 1.4]),
            (1, 2.0, [1.0, 2.0, 2.2]),
            (1, 10.0, [1.0, 5.0, 10.0]),
            (5, 1.0, [1.0, 2.0, 2.4]),
            (5, 2.0, [1.0, 3.0, 4.5]),
            (5, 10.0, [1.0, 10.0, 22.0]),
        ]
    };
    let mut rows = Vec::new();
    for (j, (n, lambda0, qs)) in cutoffs.into_iter().enumerate() {
        let prior = nm::NormalMeansPrior::new(0.0, lambda0)?;
        for (m, q) in qs.into_iter().enumerate() {
            let sub = seed.wrapping_add((3 * j + m) as u64);
            let (cont, disc) = if against {
                (
                    nm::bias_against(n, lambda0, q)?,
                    nm::discretized_bias_against(n, SIGMA, prior, DELTA, q, NullDraw::Point, draws, sub, ctx.workers)?,
                )
            } else {
                (
                    nm::bias_favor(n, lambda0, DELTA / SIGMA, q)?,
                    nm::discretized_bias_favor(n, SIGMA, prior, DELTA, q, draws, sub, ctx.workers)?,
                )
            };
            rows.push(vec![n.to_string(), fmt(lambda0), fmt(q), fmt(cont), fmt(disc.value), fmt(disc.std_error)]);
        }
    }
    let q = if against { "q_r" } else { "q_a" };
    Ok(Bundle::new(csv_table(
        &["n", "lambda0", q, "continuous", "discretized", "discretized_std_error"],
        rows,
    )?))
}

fn confusion_rows(block: &str, cm: &ConfusionMatrix, labels: [(&str, Classification); 3]) -> Vec<Vec<String>> {
    labels
        .iter()
        .map(|(label, v)| {
            vec![block.to_string(), label.to_string(), cm.get(*v, true).to_string(), cm.get(*v, false).to_string()]
        })
        .collect()
}

fn verdict_labels(c: CutoffPair) -> [(String, Classification); 3] {
    [
        (format!("accept (q_A={})", c.q_a), Classification::Accepted),
        (format!("reject (q_R={})", c.q_r), Classification::Rejected),
        ("not classified".to_string(), Classification::Unclassified),
    ]
}

fn table4(seed: u64) -> Result<Bundle, CliError> {
    let prior = nm::elicit_normal(-5.0, 5.0, SIGMA, 0.99)?;
    let grid = prior.default_grid(SIGMA, DELTA)?;
    let truth = example1_means(700, 300);
    let mut rows = Vec::new();
    let mut b = Bundle::default();
    for (block, cut) in [("relative_belief_unit", CutoffPair::unit()), ("relative_belief_0.5_3", CutoffPair::new(0.5, 3.0)?)] {
        let cm = nm::simulate_confusion(&truth, N, SIGMA, prior, &grid, cut, seed)?;
        let labels = verdict_labels(cut);
        rows.extend(confusion_rows(block, &cm, labels.each_ref().map(|(l, v)| (l.as_str(), *v))));
        b.result(&format!("{block}_false_positives"), cm.false_positives() as i64);
        b.result(&format!("{block}_false_negatives"), cm.false_negatives() as i64);
    }
    let lasso = elicit_laplace(-5.0, 5.0, SIGMA, 0.99)?;
    let cm = lasso_confusion_sim(N, SIGMA, lasso, &truth, seed)?;
    rows.extend(confusion_rows(
        "lasso",
        &cm,
        [("estimate equals 0", Classification::Accepted), ("estimate nonzero", Classification::Rejected), ("not classified", Classification::Unclassified)],
    ));
    b.report = csv_table(&["block", "decision", "null_true", "null_false"], rows)?;
    Ok(b)
}

fn table5(ctx: &Ctx, seed: u64, draws: usize) -> Result<Bundle, CliError> {
    let (x, y, names) = reg::diabetes_problem()?;
    let e = Elicitation { m0: 100.0, s1: 75.0, s2: 200.0, gamma_vc: 0.99, tau0: 1.05 };
    let elicited = reg::elicit_regression(e, GammaSolver::PUBLISHED)?;
    let prior = RegressionPrior::new(5.0, elicited.alpha1, elicited.alpha2)?;
    let post = reg::posterior(&x, &y, &prior)?;
    let report = reg::analyze(&post, &prior, &names, DELTA, Eq17Form::Published)?;
    let rows = report.iter().map(|r| {
        vec![r.variable.clone(), fmt(r.rb_estimate), fmt(r.rb_at_zero), fmt(r.strength), fmt(r.posterior_mean)]
    });
    let mut b = Bundle::new(csv_table(&["variable", "rb_estimate", "rb_at_zero", "strength", "posterior_mean"], rows)?);
    b.result("alpha1", prior.alpha1);
    b.result("alpha2", prior.alpha2);
    let tight = reg::conflict_check(&x, &y, &RegressionPrior::new(elicited.lambda0, prior.alpha1, prior.alpha2)?, draws, seed, ctx.workers)?;
    let wide = reg::conflict_check(&x, &y, &prior, draws, seed, ctx.workers)?;
    b.result("conflict_sigma", wide.sigma.value);
    b.result("conflict_beta_elicited_lambda0", tight.beta.value);
    b.result("conflict_beta_lambda0_5", wide.beta.value);
    let ev = RegressionEvidence::Closed(Eq17Form::Published);
    let unit = reg::regression_bias_mc(&x, &prior, DELTA, ev, 1.0, 1.0, draws, seed, ctx.workers)?;
    let high = reg::regression_bias_mc(&x, &prior, DELTA, ev, 1.0, 100.0, draws, seed, ctx.workers)?;
    b.result("false_positive_q_r_1", unit.fp_rate.value);
    b.result("false_positive_q_r_1_se", unit.fp_rate.std_error);
    b.result("false_negative_q_a_1", unit.fn_rate.value);
    b.result("false_negative_q_a_1_se", unit.fn_rate.std_error);
    b.result("false_negative_q_a_100", high.fn_rate.value);
    b.result("false_negative_q_a_100_se", high.fn_rate.std_error);
    Ok(b)
}

fn table6(ks: &[usize], delta: f64, seed: u64) -> Result<Bundle, CliError> {
    let mut rows = Vec::new();
    let mut b = Bundle::default();
    for &k in ks {
        let cfg = Example5Config::paper(k, delta);
        let run = run_example5_sim(&cfg, seed)?;
        let cm = run.confusion;
        let labels = [
            ("classified positive", Classification::Rejected),
            ("classified negative", Classification::Accepted),
            ("not classified", Classification::Unclassified),
        ];
        for (label, v) in labels {
            rows.push(vec![k.to_string(), label.to_string(), cm.get(v, false).to_string(), cm.get(v, true).to_string()]);
        }
        b.result(&format!("misclassified_k{k}"), cm.misclassified() as i64);
    }
    b.report = csv_table(&["k", "decision", "true_positive", "true_negative"], rows)?;
    Ok(b)
}

fn figure(ctx: &Ctx, k_null: usize, k_alt: usize, seed: u64, draws: usize) -> Result<Bundle, CliError> {
    let prior = nm::elicit_normal(-5.0, 5.0, SIGMA, 0.99)?;
    let truth = example1_means(k_null, k_alt);
    let model = simulated_model(&truth, seed)?;
    let xi = nm::xi_posterior_rb(&model, prior, DELTA, XiMethod::MonteCarlo, draws, seed, ctx.workers)?;
    let k = truth.len();
    let true_xi = k_null as f64 / k as f64;
    let rows = [("k", k as f64), ("true_xi", true_xi), ("xi_estimate", xi.estimate)]
        .map(|(name, v)| vec![name.to_string(), fmt(v)]);
    let mut b = Bundle::new(csv_table(&["statistic", "value"], rows)?);
    b.result("xi_estimate", xi.estimate);
    b.plot = Some(plot_table(&xi.xi, &xi.prior, &xi.posterior, &xi.rb)?);
    Ok(b)
}
