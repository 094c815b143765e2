use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use relbel_core::mc::substream;
use relbel_core::regression::*;

fn paper_prior(lambda0: f64) -> RegressionPrior {
    RegressionPrior::new(lambda0, 7.29, 13641.35).unwrap()
}

#[test]
fn posterior_means_match_reported_estimates() {
    let (x, y, names) = diabetes_problem().unwrap();
    let prior = paper_prior(5.0);
    let post = posterior(&x, &y, &prior).unwrap();
    let want = [
        ("constant", 2.13),
        ("age", -3.61),
        ("sex", -224.33),
        ("bmi", 511.21),
        ("map", 313.55),
        ("tc", -161.53),
        ("ldl", -19.89),
        ("hdl", -166.68),
        ("tch", 113.95),
        ("ltg", 496.22),
        ("glu", 77.44),
    ];
    for (i, (name, m)) in want.iter().enumerate() {
        assert_eq!(names[i], *name);
        assert!((post.beta_mean[i] - m).abs() < 0.01, "{name}: {}", post.beta_mean[i]);
    }
}

#[test]
fn evidence_against_exactly_four_slopes() {
    let (x, y, names) = diabetes_problem().unwrap();
    let prior = paper_prior(5.0);
    let post = posterior(&x, &y, &prior).unwrap();
    let rep = analyze(&post, &prior, &names, 1.0, Eq17Form::Published).unwrap();
    let against: Vec<_> = rep[1..].iter().filter(|r| r.rb_at_zero < 1.0).map(|r| r.variable.as_str()).collect();
    assert_eq!(against, ["sex", "bmi", "map", "ltg"]);
    assert!((rep[0].strength - 0.44).abs() < 0.005);
    assert!((rep[1].strength - 0.95).abs() < 0.005);
    for r in &rep {
        assert_eq!(r.record().rb, r.rb_at_zero);
        assert!(r.strength >= 0.0 && r.strength <= 1.0);
    }
}

#[test]
fn printed_form_is_density_ratio_times_constant() {
    let (x, y, _) = diabetes_problem().unwrap();
    let prior = paper_prior(5.0);
    let post = posterior(&x, &y, &prior).unwrap();
    let factor = (prior.alpha2 / 2.0).sqrt();
    for i in 0..11 {
        let a = rb_beta_zero(&post, &prior, i, Eq17Form::Published).unwrap();
        let b = rb_beta_zero(&post, &prior, i, Eq17Form::DensityRatio).unwrap();
        assert!((a / b / factor - 1.0).abs() < 1e-10);
    }
}

#[test]
fn conflict_flags_small_lambda_only() {
    let (x, y, _) = diabetes_problem().unwrap();
    let tight = conflict_check(&x, &y, &paper_prior(0.48), 20_000, 1, None).unwrap();
    let wide = conflict_check(&x, &y, &paper_prior(5.0), 20_000, 1, None).unwrap();
    assert!(tight.sigma.within(0.19, 4.0));
    assert!(tight.beta.value < 0.01);
    assert_eq!(tight.flagged(0.05), Some("beta"));
    assert!(wide.beta.within(0.32, 4.0));
    assert_eq!(wide.flagged(0.05), None);
}

#[test]
fn conflict_tails_are_calibrated_under_the_prior() {
    // Data drawn from the prior predictive give roughly uniform tail
    // probabilities, so about 10% fall below 0.1.
    let (x, _, _) = diabetes_problem().unwrap();
    let prior = paper_prior(1.0);
    let tau = Gamma::new(prior.alpha1, 1.0 / prior.alpha2).unwrap();
    let reps = 300;
    let mut low = [0usize; 2];
    for r in 0..reps {
        let mut rng = substream(77, r);
        let t: f64 = tau.sample(&mut rng);
        let sd = t.recip().sqrt();
        let beta = DVector::from_fn(11, |_, _| sd * prior.lambda0 * rng.sample::<f64, _>(StandardNormal));
        let y = x.matrix() * beta + DVector::from_fn(x.n(), |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        let c = conflict_check(&x, &y, &prior, 2_000, r, None).unwrap();
        low[0] += usize::from(c.sigma.value < 0.1);
        low[1] += usize::from(c.beta.value < 0.1);
    }
    let se = (0.1 * 0.9 / reps as f64).sqrt();
    for l in low {
        let p = l as f64 / reps as f64;
        assert!((p - 0.1).abs() < 3.5 * se, "fraction below 0.1: {p}");
    }
}

#[test]
fn prior_error_rates() {
    let (x, _, _) = diabetes_problem().unwrap();
    let prior = paper_prior(5.0);
    let ev = RegressionEvidence::Closed(Eq17Form::Published);
    let b = regression_bias_mc(&x, &prior, 1.0, ev, 1.0, 1.0, 50_000, 3, None).unwrap();
    assert!(b.fp_rate.within(0.0003, 3.0));
    assert!(b.fn_rate.within(0.9996, 3.0));
    // Same seed, different worker counts: identical estimates.
    let c = regression_bias_mc(&x, &prior, 1.0, ev, 1.0, 1.0, 50_000, 3, Some(2)).unwrap();
    assert_eq!(b, c);
}
