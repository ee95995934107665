mod common;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use piven::data::sample_skew_normal;
use piven::ensemble::{aggregate_gaussian, inverse_normal_cdf, z_score};
use piven::loss::{loss_gauss_nll, loss_pi, loss_piven, LossConfig, PIOutput};

use common::*;

#[test]
fn quantile_matches_bisection() {
    for p in [
        0.001, 0.01, 0.025, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.99, 0.999,
    ] {
        assert_relative_eq!(
            inverse_normal_cdf(p).unwrap(),
            normal_quantile_bisect(p),
            epsilon = 1e-12
        );
    }
}

#[test]
fn z_scores_match_bisection() {
    for alpha in [0.05, 0.1, 0.15, 0.2, 0.25, 0.3] {
        assert_relative_eq!(
            z_score(alpha).unwrap(),
            normal_quantile_bisect(1.0 - alpha / 2.0),
            epsilon = 1e-12
        );
    }
}

fn sigmoid_oracle(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn loss_pi_oracle(y: &[f64], lower: &[f64], upper: &[f64], cfg: &LossConfig) -> f64 {
    let n = y.len() as f64;
    let width = brute_mpiw_capt(y, lower, upper);
    let mut soft = 0.0;
    for i in 0..y.len() {
        soft +=
            sigmoid_oracle(cfg.s * (y[i] - lower[i])) * sigmoid_oracle(cfg.s * (upper[i] - y[i]));
    }
    let shortfall = ((1.0 - cfg.alpha) - soft / n).max(0.0);
    width + n.sqrt() * cfg.lambda * shortfall * shortfall
}

#[test]
fn interval_loss_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(1..40);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.5)).collect();
        let upper: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..2.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let cfg = LossConfig {
            s: rng.random_range(1.0..200.0),
            lambda: rng.random_range(0.5..40.0),
            alpha: rng.random_range(0.01..0.3),
            beta: rng.random_range(0.0..1.0),
            ..LossConfig::default()
        };
        let out = PIOutput::new(upper.clone(), lower.clone(), v.clone()).unwrap();
        let pi = loss_pi_oracle(&y, &lower, &upper, &cfg);
        assert_relative_eq!(
            loss_pi(&out, &y, &cfg).unwrap(),
            pi,
            max_relative = 1e-12,
            epsilon = 1e-12
        );

        let mut sq = 0.0;
        for i in 0..n {
            let value = v[i] * upper[i] + (1.0 - v[i]) * lower[i];
            sq += (value - y[i]).powi(2);
        }
        let expected = cfg.beta * pi + (1.0 - cfg.beta) * sq / n as f64;
        assert_relative_eq!(
            loss_piven(&out, &y, &cfg).unwrap(),
            expected,
            max_relative = 1e-12,
            epsilon = 1e-12
        );
    }
}

#[test]
fn gaussian_nll_matches_density() {
    let y: [f64; 3] = [0.3, -1.2, 2.0];
    let mean: [f64; 3] = [0.0, -1.0, 1.5];
    let var: [f64; 3] = [1.0, 0.25, 4.0];
    let mut expected = 0.0;
    for i in 0..3 {
        let density = (-(y[i] - mean[i]).powi(2) / (2.0 * var[i])).exp()
            / (2.0 * std::f64::consts::PI * var[i]).sqrt();
        expected -= density.ln();
    }
    expected /= 3.0;
    let constant = 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert_relative_eq!(
        loss_gauss_nll(&mean, &var, &y).unwrap(),
        expected - constant,
        epsilon = 1e-12
    );
}

#[test]
fn gaussian_mixture_moments() {
    let means = vec![vec![0.0], vec![2.0]];
    let vars = vec![vec![1.0], vec![3.0]];
    let out = aggregate_gaussian(&means, &vars, 0.05).unwrap();
    // Mixture mean 1, variance E[var] + Var[mean] = 2 + 1.
    let z = normal_quantile_bisect(0.975);
    assert_relative_eq!(out.value[0], 1.0, epsilon = 1e-12);
    assert_relative_eq!(out.upper[0], 1.0 + z * 3f64.sqrt(), epsilon = 1e-9);
    assert_relative_eq!(out.lower[0], 1.0 - z * 3f64.sqrt(), epsilon = 1e-9);
}

#[test]
fn skew_normal_variance_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws: Vec<f64> = (0..200_000)
        .map(|_| sample_skew_normal(3.0, &mut rng))
        .collect();
    let (mean, var, _) = sample_moments(&draws);
    let (em, ev, _) = skew_normal_moments(3.0);
    assert!((mean - em).abs() < 0.01, "{mean} vs {em}");
    assert!((var - ev).abs() < 0.01, "{var} vs {ev}");
}

#[test]
fn erf_oracle_sanity() {
    assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
    assert_relative_eq!(erf_series(1.0), 0.842_700_792_949_714_9, epsilon = 1e-14);
}
