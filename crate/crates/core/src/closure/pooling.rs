//! Averaging closure statistics over the cyclic shifts of the fast ring.
//!
//! With a uniform `x*` the fast limiting dynamics are equivariant under
//! every cyclic shift of the fast index, so all of `z̄*`, `Σ*` and the lag
//! integral are invariant under that group. Averaging over it is the same
//! index pooling the slow diagnostics use and leaves circulant matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexPooling {
    /// Use the time averages as they are.
    #[default]
    None,
    /// Average over all cyclic shifts of the fast index.
    Cyclic,
}

/// Circulant projection `(1/n) Σ_k P^k A P^{-k}`.
pub fn pool_cyclic_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "square matrix");
    let diagonals: Vec<f64> = (0..n)
        .map(|d| (0..n).map(|i| a[(i, (i + d) % n)]).sum::<f64>() / n as f64)
        .collect();
    DMatrix::from_fn(n, n, |i, j| diagonals[(j + n - i) % n])
}

pub fn pool_cyclic_vector(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    vec![mean; v.len()]
}
