use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lorenz::UncoupledSystem;
use super::params::RescaleConstants;
use crate::error::{Error, Result};
use crate::integrator::{integrate_with, IntegrationPlan};
use crate::stats::PooledMoments;

/// Standard deviations below this mean the run sits at (or near) a fixed point.
pub const DEGENERACY_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPlan {
    /// Ring length of the uncoupled model.
    pub n: usize,
    /// Sampled duration after the spin-up.
    pub t_total: f64,
    pub dt: f64,
    pub spin_up: f64,
    pub seed: u64,
}

impl Default for CalibrationPlan {
    fn default() -> Self {
        CalibrationPlan {
            n: 40,
            t_total: 10_000.0,
            dt: 5e-3,
            spin_up: 100.0,
            seed: 0,
        }
    }
}

/// Long-term pooled mean and standard deviation of the uncoupled model at
/// `forcing`, started from `forcing + U[-0.5, 0.5]` per component.
pub fn calibrate(forcing: f64, plan: &CalibrationPlan) -> Result<RescaleConstants> {
    if plan.n < 4 {
        return Err(Error::Dimension(format!("calibration ring of length {} (< 4)", plan.n)));
    }
    if !(plan.t_total > 0.0) {
        return Err(Error::InvalidPlan("calibration needs t_total > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let x0: Vec<f64> = (0..plan.n).map(|_| forcing + rng.random_range(-0.5..=0.5)).collect();
    let run = IntegrationPlan {
        dt: plan.dt,
        spin_up: plan.spin_up,
        duration: plan.t_total,
        sample_every: 1,
        seed: plan.seed,
    };
    let mut moments = PooledMoments::new();
    integrate_with(&UncoupledSystem::plain(forcing), &x0, &run, |_, s| moments.extend(s))?;
    let beta = moments.std_dev();
    if !(beta >= DEGENERACY_THRESHOLD) {
        return Err(Error::DegenerateAttractor {
            beta,
            threshold: DEGENERACY_THRESHOLD,
        });
    }
    RescaleConstants::new(moments.mean(), beta)
}
