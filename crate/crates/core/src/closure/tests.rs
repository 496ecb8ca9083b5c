use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::integrator::{integrate_sampled, IntegrationPlan};
use crate::model::{FastLimitingSystem, RescaleConstants};

fn ou_plan(duration: f64, sample_every: usize, seed: u64) -> IntegrationPlan {
    IntegrationPlan {
        dt: 1e-3,
        spin_up: 5.0,
        duration,
        sample_every,
        seed,
    }
}

fn spec2() -> OUSpec {
    OUSpec {
        gamma: DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 1.0]),
        m: DVector::zeros(2),
        sigma_noise: DMatrix::identity(2, 2),
        l_x: DMatrix::identity(2, 2),
        x: DVector::zeros(2),
    }
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn params(n_x: usize, j: usize) -> ModelParams {
    ModelParams {
        n_x,
        j,
        eps: 0.01,
        f_x: 6.0,
        f_y: 8.0,
        lambda_x: 0.3,
        lambda_y: 0.4,
        rescale_x: RescaleConstants::new(1.9, 3.0).unwrap(),
        rescale_y: RescaleConstants::new(2.3, 3.6).unwrap(),
    }
}

#[test]
fn lag_zero_is_the_window_covariance() {
    let series = ou_simulate(&spec2(), &ou_plan(200.0, 20, 1)).unwrap();
    let lc = lagged_covariance(&series, 3.0, 2).unwrap();
    let (_, cov) = window_moments(&series, 0..lc.window).unwrap();
    assert!(rel_frobenius(&lc.matrices[0], &cov) < 1e-8);
    assert_eq!(lc.window, series.len() - lc.matrices.len() * 2 + 2);
}

#[test]
fn streaming_integral_matches_per_lag_trapezoid() {
    let series = ou_simulate(&spec2(), &ou_plan(300.0, 10, 2)).unwrap();
    for stride in [1, 3] {
        let lc = lagged_covariance(&series, 4.0, stride).unwrap();
        let streamed = integrated_lagged_covariance(&series, 4.0, stride).unwrap();
        assert!(rel_frobenius(&streamed.integral, &lc.integrate()) < 1e-10);
        assert!(rel_frobenius(&streamed.covariance, &lc.covariance) < 1e-10);
        for (a, b) in streamed.mean.iter().zip(&lc.mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn white_samples_have_small_lagged_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 40_000;
    let data: Vec<f64> = (0..3 * n).map(|_| rng.sample(StandardNormal)).collect();
    let series = SampleSeries::from_rows(3, 0.1, 0.0, data).unwrap();
    let lc = lagged_covariance(&series, 1.0, 1).unwrap();
    let bound = 6.0 / (n as f64).sqrt();
    for c in &lc.matrices[1..] {
        assert!(c.amax() < bound, "{}", c.amax());
    }
}

#[test]
fn ou_lagged_covariance_follows_regression_theorem() {
    let spec = spec2();
    let series = ou_simulate(&spec, &ou_plan(5_000.0, 50, 3)).unwrap();
    let lc = lagged_covariance(&series, 2.0, 10).unwrap();
    for (k, c) in lc.matrices.iter().enumerate() {
        let s = k as f64 * lc.dt_lag;
        let expected = (&spec.gamma * -s).exp() * &lc.covariance;
        assert!((c - &expected).amax() < 0.03, "lag {s}: {c} vs {expected}");
    }
}

#[test]
fn ou_response_recovers_inverse_drift() {
    let spec = spec2();
    let inv = spec.gamma.clone().try_inverse().unwrap();
    let series = ou_simulate(&spec, &ou_plan(20_000.0, 20, 4)).unwrap();
    let lc = lagged_covariance(&series, 10.0, 2).unwrap();
    let r = response_operator(&lc, &lc.covariance, Regularization::None).unwrap();
    assert!(rel_frobenius(&r, &inv) < 0.05, "{r} vs {inv}");
}

#[test]
fn ou_response_error_shrinks_with_path_length() {
    let spec = spec2();
    let inv = spec.gamma.clone().try_inverse().unwrap();
    let err = |duration: f64| {
        let series = ou_simulate(&spec, &ou_plan(duration, 20, 9)).unwrap();
        let lag = integrated_lagged_covariance(&series, 10.0, 2).unwrap();
        rel_frobenius(&response_from_integral(&lag.integral, &lag.covariance, Regularization::None).unwrap(), &inv)
    };
    let (short, long) = (err(400.0), err(20_000.0));
    assert!(long < short, "short {short}, long {long}");
}

#[test]
fn halving_lag_stride_barely_moves_response() {
    let series = ou_simulate(&spec2(), &ou_plan(5_000.0, 10, 6)).unwrap();
    let r = |stride| {
        let lag = integrated_lagged_covariance(&series, 10.0, stride).unwrap();
        response_from_integral(&lag.integral, &lag.covariance, Regularization::None).unwrap()
    };
    let coarse = r(4);
    let fine = r(2);
    assert!(rel_frobenius(&coarse, &fine) < 0.01);
}

#[test]
fn lag_window_longer_than_series_is_rejected() {
    let series = ou_simulate(&spec2(), &ou_plan(5.0, 10, 1)).unwrap();
    assert!(matches!(lagged_covariance(&series, 50.0, 1), Err(Error::InsufficientData(_))));
    assert!(matches!(integrated_lagged_covariance(&series, 50.0, 1), Err(Error::InsufficientData(_))));
}

fn provenance() -> Provenance {
    Provenance {
        t_av: 1.0,
        t_corr: 1.0,
        dt_sample: 0.05,
        dt_lag: 0.05,
        dt: Some(5e-3),
        seed: Some(1),
        pooling: IndexPooling::None,
    }
}

#[test]
fn identity_response_gives_scaled_identity_correction() {
    let p = params(5, 4);
    let c = ClosureData::assemble(
        p.clone(),
        SlowState::zeros(5),
        vec![0.0; 20],
        DMatrix::identity(20, 20),
        DMatrix::identity(20, 20),
        provenance(),
    )
    .unwrap();
    let expected = DMatrix::<f64>::identity(5, 5) * (p.lambda_x * p.lambda_y);
    assert!((&c.c_star - expected).amax() < 1e-15);
    assert!(c.b_star.iter().all(|&b| b == 0.0));
}

#[test]
fn mean_offset_term() {
    let p = params(4, 2);
    let z_bar: Vec<f64> = (0..8).map(|k| k as f64).collect();
    let c = ClosureData::assemble(
        p.clone(),
        SlowState::zeros(4),
        z_bar,
        DMatrix::identity(8, 8),
        DMatrix::zeros(8, 8),
        provenance(),
    )
    .unwrap();
    // Block sums are 1, 5, 9, 13.
    for (b, s) in c.b_star.iter().zip([1.0, 5.0, 9.0, 13.0]) {
        assert!((b + p.lambda_y / 2.0 * s).abs() < 1e-15);
    }
    assert!(c.c_star.iter().all(|&v| v == 0.0));
}

#[test]
fn stored_terms_are_reproducible_and_json_round_trips() {
    let p = params(4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r = DMatrix::from_fn(12, 12, |_, _| rng.random_range(-1.0..1.0));
    let z_bar: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c = ClosureData::assemble(p, SlowState(vec![0.1, -0.2, 0.3, 0.0]), z_bar, DMatrix::identity(12, 12), r, provenance())
        .unwrap();
    let (b, cc) = c.recompute_terms().unwrap();
    assert_eq!(b, c.b_star);
    assert_eq!(cc, c.c_star);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("closure.json");
    c.save(&path).unwrap();
    let back = ClosureData::load(&path).unwrap();
    assert_eq!(back, c);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["r_star"]["data"][1].as_f64().unwrap(), c.r_star[(0, 1)]);
}

#[test]
fn closure_rejects_wrong_fast_dimension() {
    let p = params(4, 2);
    let series = SampleSeries::from_rows(3, 0.1, 0.0, vec![0.0; 300]).unwrap();
    let opts = ClosureOptions {
        t_corr: 1.0,
        lag_stride: 1,
        regularization: Regularization::None,
        pooling: IndexPooling::None,
    };
    assert!(matches!(
        build_closure(&series, &SlowState::zeros(4), &p, &opts),
        Err(Error::Dimension(_))
    ));
}

/// Relabeling slow blocks cyclically (and the fast blocks with them)
/// permutes the response operator block-cyclically.
#[test]
fn response_is_block_cyclic_equivariant() {
    let p = params(5, 2);
    let n_y = p.n_y();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x_star = SlowState((0..5).map(|_| rng.random_range(-1.0..1.0)).collect());
    let z0: Vec<f64> = (0..n_y).map(|_| rng.random_range(-1.0..1.0)).collect();
    let shift = 2;
    let rot = |v: &[f64], by: usize| -> Vec<f64> { (0..v.len()).map(|i| v[(i + v.len() - by) % v.len()]).collect() };
    let plan = IntegrationPlan {
        dt: 5e-3,
        spin_up: 5.0,
        duration: 60.0,
        sample_every: 10,
        seed: 0,
    };
    let opts = ClosureOptions {
        t_corr: 5.0,
        lag_stride: 1,
        regularization: Regularization::None,
        pooling: IndexPooling::None,
    };
    let run = |x: &SlowState, z: &[f64]| {
        let sys = FastLimitingSystem::new(x, &p).unwrap();
        let series = integrate_sampled(&sys, z, &plan).unwrap();
        build_closure(&series, x, &p, &opts).unwrap()
    };
    let base = run(&x_star, &z0);
    let moved = run(&SlowState(rot(&x_star.0, shift)), &rot(&z0, shift * p.j));
    let s = shift * p.j;
    let permuted = DMatrix::from_fn(n_y, n_y, |a, b| base.r_star[((a + n_y - s) % n_y, (b + n_y - s) % n_y)]);
    assert!(rel_frobenius(&moved.r_star, &permuted) < 1e-9);
}

#[test]
fn cyclic_pooling_needs_uniform_x_star() {
    let p = params(4, 2);
    let series = SampleSeries::from_rows(8, 0.1, 0.0, (0..800).map(|v| (v as f64 * 0.37).sin()).collect()).unwrap();
    let opts = ClosureOptions {
        t_corr: 1.0,
        lag_stride: 1,
        regularization: Regularization::None,
        pooling: IndexPooling::Cyclic,
    };
    let x = SlowState(vec![0.0, 0.1, 0.0, 0.0]);
    assert!(matches!(build_closure(&series, &x, &p, &opts), Err(Error::InvalidParameter(_))));
}

/// With a uniform x* every cyclic shift of the fast index is a symmetry;
/// the pooled operator is circulant and does not depend on the labeling.
#[test]
fn pooled_response_is_circulant_and_relabeling_free() {
    let p = params(5, 2);
    let n_y = p.n_y();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x_star = SlowState(vec![0.2; 5]);
    let z0: Vec<f64> = (0..n_y).map(|_| rng.random_range(-1.0..1.0)).collect();
    let plan = IntegrationPlan {
        dt: 5e-3,
        spin_up: 5.0,
        duration: 60.0,
        sample_every: 10,
        seed: 0,
    };
    let opts = ClosureOptions {
        t_corr: 5.0,
        lag_stride: 1,
        regularization: Regularization::None,
        pooling: IndexPooling::Cyclic,
    };
    let sys = FastLimitingSystem::new(&x_star, &p).unwrap();
    let series = integrate_sampled(&sys, &z0, &plan).unwrap();
    let pooled = build_closure(&series, &x_star, &p, &opts).unwrap();
    let shifted = DMatrix::from_fn(n_y, n_y, |a, b| pooled.r_star[((a + 1) % n_y, (b + 1) % n_y)]);
    assert!(rel_frobenius(&shifted, &pooled.r_star) < 1e-10);
    assert!(pooled.b_star.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
    assert_eq!(pooled.provenance.pooling, IndexPooling::Cyclic);

    // Relabel the stream by one fast index: the pooled result is unchanged.
    let rows: Vec<f64> = series
        .rows()
        .flat_map(|r| (0..n_y).map(move |i| r[(i + 1) % n_y]))
        .collect();
    let relabeled = SampleSeries::from_rows(n_y, series.dt_sample, 0.0, rows).unwrap();
    let again = build_closure(&relabeled, &x_star, &p, &opts).unwrap();
    assert!(rel_frobenius(&again.r_star, &pooled.r_star) < 1e-9);
}
