//! Quasi-Gaussian linear-response closure for the slow variables.
//!
//! Only a sampled trajectory of the fast dynamics (with the slow state
//! frozen at `x*`) is consumed. From it we take the mean `z̄*`, the
//! covariance `Σ*` and the lag-integrated covariance, form
//! `R* = ∫ C(s) ds · Σ*^{-1}`, and assemble the two terms that enter the
//! reduced slow equation.

mod lagged;
mod moments;
mod ou;
mod pooling;
mod response;

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use lagged::{
    integrated_lagged_covariance, lagged_covariance, LagGrid, LagIntegral, LagIntegralAccumulator, LaggedCovariance,
};
pub use moments::{accumulate_moments, window_moments};
pub use ou::{ou_simulate, ou_simulate_from, ou_simulate_with, OUSpec};
pub use pooling::{pool_cyclic_matrix, pool_cyclic_vector, IndexPooling};
pub use response::{min_symmetric_eigenvalue, response_from_integral, response_operator, Regularization};

use crate::error::{Error, Result};
use crate::integrator::SampleSeries;
use crate::model::{block_sum, project_fast_operator, ModelParams, SlowState};

/// Where a closure came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub t_av: f64,
    pub t_corr: f64,
    pub dt_sample: f64,
    pub dt_lag: f64,
    /// Integrator step of the fast run, when known.
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub pooling: IndexPooling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureData {
    pub params: ModelParams,
    pub x_star: SlowState,
    pub z_bar_star: Vec<f64>,
    #[serde(with = "row_major")]
    pub sigma_star: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub r_star: DMatrix<f64>,
    /// `-(λ_y / J) L z̄*`
    pub b_star: Vec<f64>,
    /// `(λ_x λ_y / J) L R* L^T`
    #[serde(with = "row_major")]
    pub c_star: DMatrix<f64>,
    pub provenance: Provenance,
}

impl ClosureData {
    /// Builds the slow-equation terms from `(z̄*, R*)`.
    pub fn assemble(
        params: ModelParams,
        x_star: SlowState,
        z_bar_star: Vec<f64>,
        sigma_star: DMatrix<f64>,
        r_star: DMatrix<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        params.validate()?;
        x_star.check(&params)?;
        let (b_star, c_star) = slow_terms(&params, &z_bar_star, &r_star)?;
        let c = ClosureData {
            params,
            x_star,
            z_bar_star,
            sigma_star,
            r_star,
            b_star,
            c_star,
            provenance,
        };
        c.check_dims(&c.params)?;
        Ok(c)
    }

    pub fn check_dims(&self, p: &ModelParams) -> Result<()> {
        let (nx, ny) = (p.n_x, p.n_y());
        let ok = self.x_star.0.len() == nx
            && self.z_bar_star.len() == ny
            && self.sigma_star.shape() == (ny, ny)
            && self.r_star.shape() == (ny, ny)
            && self.b_star.len() == nx
            && self.c_star.shape() == (nx, nx);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "closure dimensions do not match n_x = {nx}, n_y = {ny}"
            )))
        }
    }

    /// `L R* L^T`.
    pub fn projected_response(&self) -> DMatrix<f64> {
        project_fast_operator(&self.r_star, self.params.j).expect("dimensions checked at assembly")
    }

    /// Smallest eigenvalues of the symmetric parts of `R*` and `L R* L^T`.
    pub fn min_symmetric_eigenvalues(&self) -> (f64, f64) {
        (
            min_symmetric_eigenvalue(&self.r_star),
            min_symmetric_eigenvalue(&self.projected_response()),
        )
    }

    /// Recomputes `(b*, c*)` from the stored `(z̄*, R*)`.
    pub fn recompute_terms(&self) -> Result<(Vec<f64>, DMatrix<f64>)> {
        slow_terms(&self.params, &self.z_bar_star, &self.r_star)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: ClosureData = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        c.check_dims(&c.params).map_err(|e| Error::format(path, e.to_string()))?;
        Ok(c)
    }
}

fn slow_terms(p: &ModelParams, z_bar: &[f64], r: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if z_bar.len() != p.n_y() {
        return Err(Error::Dimension(format!("z̄* has length {}, expected {}", z_bar.len(), p.n_y())));
    }
    let j = p.j as f64;
    let b = block_sum(z_bar, p.j).into_iter().map(|s| -(p.lambda_y / j) * s).collect();
    let c = project_fast_operator(r, p.j)? * (p.lambda_x * p.lambda_y / j);
    Ok((b, c))
}

/// Options for turning a fast trajectory into a closure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureOptions {
    pub t_corr: f64,
    pub lag_stride: usize,
    #[serde(default)]
    pub regularization: Regularization,
    #[serde(default)]
    pub pooling: IndexPooling,
}

/// Closure from an in-memory fast trajectory sampled with `x` frozen at
/// `x_star`. The series must span `t_av + t_corr`; the first `t_av` are
/// the averaging window.
pub fn build_closure(series: &SampleSeries, x_star: &SlowState, p: &ModelParams, opts: &ClosureOptions) -> Result<ClosureData> {
    if series.dim() != p.n_y() {
        return Err(Error::Dimension(format!(
            "fast series has dimension {}, expected {}",
            series.dim(),
            p.n_y()
        )));
    }
    let lag = integrated_lagged_covariance(series, opts.t_corr, opts.lag_stride)?;
    closure_from_integral(lag, series.dt_sample, x_star, p, opts)
}

/// Closure from an already accumulated lag integral (the streaming path).
pub fn closure_from_integral(
    lag: LagIntegral,
    dt_sample: f64,
    x_star: &SlowState,
    p: &ModelParams,
    opts: &ClosureOptions,
) -> Result<ClosureData> {
    let lag = match opts.pooling {
        IndexPooling::None => lag,
        IndexPooling::Cyclic => {
            if x_star.0.windows(2).any(|w| w[0] != w[1]) {
                return Err(Error::InvalidParameter(
                    "cyclic pooling needs a uniform x* (all components equal)".into(),
                ));
            }
            LagIntegral {
                mean: pool_cyclic_vector(&lag.mean),
                covariance: pool_cyclic_matrix(&lag.covariance),
                integral: pool_cyclic_matrix(&lag.integral),
                ..lag
            }
        }
    };
    let r_star = response_from_integral(&lag.integral, &lag.covariance, opts.regularization)?;
    let provenance = Provenance {
        t_av: lag.window as f64 * dt_sample,
        t_corr: opts.t_corr,
        dt_sample,
        dt_lag: lag.dt_lag,
        dt: None,
        seed: None,
        pooling: opts.pooling,
    };
    ClosureData::assemble(p.clone(), x_star.clone(), lag.mean, lag.covariance, r_star, provenance)
}

mod row_major {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct RowMajor {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        RowMajor {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().as_slice().to_vec(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let r = RowMajor::deserialize(d)?;
        if r.data.len() != r.rows * r.cols {
            return Err(serde::de::Error::custom(format!(
                "matrix data has {} entries, expected {}x{}",
                r.data.len(),
                r.rows,
                r.cols
            )));
        }
        Ok(DMatrix::from_row_slice(r.rows, r.cols, &r.data))
    }
}

#[cfg(test)]
mod tests;
