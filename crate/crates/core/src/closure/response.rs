use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use super::lagged::LaggedCovariance;
use crate::error::{Error, Result};

/// How the covariance is treated before it is factored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularization {
    /// Factor the covariance as is; fail if it is not SPD.
    #[default]
    None,
    /// Add `1e-8 · trace / n` to the diagonal first.
    Ridge,
}

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// `R* = [∫ C(s) ds] Σ^{-1}` with the integral taken by the trapezoid rule.
pub fn response_operator(lc: &LaggedCovariance, sigma: &DMatrix<f64>, reg: Regularization) -> Result<DMatrix<f64>> {
    response_from_integral(&lc.integrate(), sigma, reg)
}

/// `integral · Σ^{-1}`, applied through a Cholesky solve.
pub fn response_from_integral(integral: &DMatrix<f64>, sigma: &DMatrix<f64>, reg: Regularization) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if sigma.ncols() != n || integral.ncols() != n {
        return Err(Error::Dimension(format!(
            "integral is {}x{} but covariance is {}x{}",
            integral.nrows(),
            integral.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let scale = sigma.amax();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NonSpdCovariance);
    }
    if (sigma - sigma.transpose()).amax() > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NonSpdCovariance);
    }
    let mut a = sigma.clone();
    if reg == Regularization::Ridge {
        let delta = 1e-8 * sigma.trace() / n as f64;
        for i in 0..n {
            a[(i, i)] += delta;
        }
    }
    let chol = Cholesky::new(a).ok_or(Error::NonSpdCovariance)?;
    // R Σ = I  <=>  Σ R^T = I^T since Σ is symmetric.
    Ok(chol.solve(&integral.transpose()).transpose())
}

/// Smallest eigenvalue of the symmetric part `(A + A^T) / 2`.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_lc(sigma2: f64, t_corr: f64, dt: f64) -> LaggedCovariance {
        let k = (t_corr / dt).round() as usize;
        LaggedCovariance {
            dt_lag: dt,
            matrices: (0..=k).map(|m| DMatrix::from_element(1, 1, sigma2 * (-(m as f64) * dt).exp())).collect(),
            mean: vec![0.0],
            covariance: DMatrix::from_element(1, 1, sigma2),
            window: 1,
        }
    }

    #[test]
    fn scalar_exponential_kernel() {
        for t_corr in [1.0, 5.0, 20.0] {
            let lc = scalar_lc(2.5, t_corr, 1e-3);
            let r = response_operator(&lc, &lc.covariance, Regularization::None).unwrap();
            assert!((r[(0, 0)] - (1.0 - (-t_corr).exp())).abs() < 1e-6, "t_corr {t_corr}: {}", r[(0, 0)]);
        }
    }

    #[test]
    fn zero_covariance_is_rejected() {
        let lc = scalar_lc(1.0, 1.0, 0.1);
        let zero = DMatrix::zeros(1, 1);
        assert!(matches!(
            response_operator(&lc, &zero, Regularization::None),
            Err(Error::NonSpdCovariance)
        ));
    }

    #[test]
    fn indefinite_covariance_is_rejected_and_ridge_is_opt_in() {
        let integral = DMatrix::identity(2, 2);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(response_from_integral(&integral, &singular, Regularization::None).is_err());
        let r = response_from_integral(&integral, &singular, Regularization::Ridge).unwrap();
        assert!(r.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn asymmetric_covariance_is_rejected() {
        let integral = DMatrix::identity(2, 2);
        let skew = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.0, 2.0]);
        assert!(matches!(
            response_from_integral(&integral, &skew, Regularization::None),
            Err(Error::NonSpdCovariance)
        ));
    }

    #[test]
    fn solve_matches_inverse() {
        let sigma = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let integral = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.3, 0.0, 0.1, 1.0]);
        let r = response_from_integral(&integral, &sigma, Regularization::None).unwrap();
        let expected = &integral * sigma.clone().try_inverse().unwrap();
        assert!((r - expected).amax() < 1e-13);
    }

    #[test]
    fn symmetric_part_eigenvalue() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 3.0, -1.0, 2.0]);
        // Symmetric part [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        assert!((min_symmetric_eigenvalue(&a) - 1.0).abs() < 1e-12);
    }
}
