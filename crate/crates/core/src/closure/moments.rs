use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrator::SampleSeries;

/// Sample mean and population covariance (divides by the sample count)
/// over every sample of `series`.
pub fn accumulate_moments(series: &SampleSeries) -> Result<(Vec<f64>, DMatrix<f64>)> {
    window_moments(series, 0..series.len())
}

/// Two-pass mean and population covariance over the samples in `window`.
pub fn window_moments(series: &SampleSeries, window: std::ops::Range<usize>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if window.is_empty() || window.end > series.len() {
        return Err(Error::EmptyInput("moment window has no samples"));
    }
    let d = series.dim();
    let n = window.len() as f64;
    let mut mean = vec![0.0; d];
    for t in window.clone() {
        for (m, &v) in mean.iter_mut().zip(series.sample(t)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for t in window {
        for ((c, &v), &m) in centered.iter_mut().zip(series.sample(t)).zip(&mean) {
            *c = v - m;
        }
        outer_add(&mut cov, &centered, &centered);
    }
    Ok((mean, DMatrix::from_row_slice(d, d, &cov).map(|v| v / n)))
}

/// `acc += a b^T` for a row-major square accumulator.
pub(crate) fn outer_add(acc: &mut [f64], a: &[f64], b: &[f64]) {
    let d = b.len();
    for (row, &ai) in acc.chunks_exact_mut(d).zip(a) {
        for (r, &bj) in row.iter_mut().zip(b) {
            *r += ai * bj;
        }
    }
}
