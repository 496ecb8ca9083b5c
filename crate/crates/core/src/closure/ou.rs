//! Multivariate Ornstein-Uhlenbeck process
//! `dz = -Γ(z - m) dt + L_x x dt + σ dW`, simulated by Euler-Maruyama.
//! For this process the quasi-Gaussian response is exact, which makes it
//! the reference case for the closure pipeline.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::integrator::{IntegrationPlan, SampleSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct OUSpec {
    /// Drift matrix; its symmetric part must be positive definite.
    pub gamma: DMatrix<f64>,
    pub m: DVector<f64>,
    /// `N × K` noise loading.
    pub sigma_noise: DMatrix<f64>,
    /// `N × P` coupling to the frozen parameter.
    pub l_x: DMatrix<f64>,
    pub x: DVector<f64>,
}

impl OUSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.gamma.nrows();
        if self.gamma.ncols() != n
            || self.m.len() != n
            || self.sigma_noise.nrows() != n
            || self.l_x.nrows() != n
            || self.l_x.ncols() != self.x.len()
        {
            return Err(Error::Dimension("inconsistent Ornstein-Uhlenbeck dimensions".into()));
        }
        let sym = (&self.gamma + self.gamma.transpose()) * 0.5;
        if Cholesky::new(sym).is_none() {
            return Err(Error::InvalidParameter(
                "symmetric part of the drift matrix is not positive definite".into(),
            ));
        }
        Ok(())
    }

    /// `m + Γ^{-1} L_x x`, the stationary mean.
    pub fn stationary_mean(&self) -> Result<DVector<f64>> {
        let lu = self.gamma.clone().lu();
        let shift = lu
            .solve(&(&self.l_x * &self.x))
            .ok_or_else(|| Error::InvalidParameter("drift matrix is singular".into()))?;
        Ok(&self.m + shift)
    }
}

/// Euler-Maruyama path started at the stationary mean, sampled per `plan`
/// (`plan.dt` is the step, `plan.seed` drives the noise).
pub fn ou_simulate(spec: &OUSpec, plan: &IntegrationPlan) -> Result<SampleSeries> {
    let z0 = spec.stationary_mean()?;
    ou_simulate_from(spec, plan, z0.as_slice())
}

pub fn ou_simulate_from(spec: &OUSpec, plan: &IntegrationPlan, z0: &[f64]) -> Result<SampleSeries> {
    let mut series = SampleSeries::new(z0.len(), plan.dt_sample(), plan.spin_up_steps() as f64 * plan.dt);
    ou_simulate_with(spec, plan, z0, |_, z| series.push(z))?;
    Ok(series)
}

/// Streaming form: `observer(time, state)` receives every sampled state.
pub fn ou_simulate_with<O: FnMut(f64, &[f64])>(
    spec: &OUSpec,
    plan: &IntegrationPlan,
    z0: &[f64],
    mut observer: O,
) -> Result<()> {
    spec.validate()?;
    plan.validate()?;
    let n = spec.gamma.nrows();
    let k = spec.sigma_noise.ncols();
    if z0.len() != n {
        return Err(Error::Dimension(format!("initial state has length {}, expected {n}", z0.len())));
    }
    if !z0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteInitialState);
    }
    let gamma: Vec<f64> = row_major(&spec.gamma);
    let noise: Vec<f64> = row_major(&spec.sigma_noise);
    // Constant drift part: Γ m + L_x x.
    let drift0: Vec<f64> = (&spec.gamma * &spec.m + &spec.l_x * &spec.x).iter().copied().collect();
    let dt = plan.dt;
    let sqrt_dt = dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut z = z0.to_vec();
    let mut next = vec![0.0; n];
    let mut xi = vec![0.0; k];
    let mut step: u64 = 0;
    let mut advance = |z: &mut Vec<f64>, step: &mut u64| -> Result<()> {
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let mut finite = true;
        for i in 0..n {
            let g = &gamma[i * n..(i + 1) * n];
            let s = &noise[i * k..(i + 1) * k];
            let drift = drift0[i] - g.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>();
            let kick: f64 = s.iter().zip(&xi).map(|(a, b)| a * b).sum();
            next[i] = z[i] + drift * dt + kick * sqrt_dt;
            finite &= next[i].is_finite();
        }
        std::mem::swap(z, &mut next);
        *step += 1;
        if finite {
            Ok(())
        } else {
            Err(Error::BlowUp { time: *step as f64 * dt })
        }
    };
    for _ in 0..plan.spin_up_steps() {
        advance(&mut z, &mut step)?;
    }
    for s in 0..plan.sample_count() {
        if s > 0 {
            for _ in 0..plan.sample_every {
                advance(&mut z, &mut step)?;
            }
        }
        observer(step as f64 * dt, &z);
    }
    Ok(())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}
