//! Time-lagged covariances `C(s) = <z(τ+s) (z(τ) - z̄)^T>`.
//!
//! A series of `n_total` samples with a lag window of `M` samples yields
//! `n = n_total - M` start times `τ`, shared by every lag. The mean and
//! covariance reported alongside are taken over the same `n` start times,
//! so `C(0)` equals that covariance.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::moments::{outer_add, window_moments};
use crate::error::{Error, Result};
use crate::integrator::SampleSeries;

/// Lag grid derived from a sampling interval, a lag window and a stride.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagGrid {
    /// Samples between consecutive lags.
    pub stride: usize,
    /// Number of lag intervals; lags are `0..=intervals`.
    pub intervals: usize,
    pub dt_lag: f64,
}

impl LagGrid {
    pub fn new(dt_sample: f64, t_corr: f64, stride: usize) -> Result<Self> {
        if !(t_corr > 0.0) {
            return Err(Error::InvalidParameter(format!("t_corr = {t_corr} must be > 0")));
        }
        if stride == 0 {
            return Err(Error::InvalidParameter("lag_stride must be >= 1".into()));
        }
        let dt_lag = dt_sample * stride as f64;
        let intervals = (t_corr / dt_lag + 1e-9).floor() as usize;
        if intervals == 0 {
            return Err(Error::InvalidParameter(format!(
                "lag spacing {dt_lag} exceeds the lag window {t_corr}"
            )));
        }
        Ok(LagGrid {
            stride,
            intervals,
            dt_lag,
        })
    }

    /// Largest lag, in samples.
    pub fn span(&self) -> usize {
        self.stride * self.intervals
    }

    /// Trapezoid weight of lag `k` (without the `dt_lag` factor).
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.intervals {
            0.5
        } else {
            1.0
        }
    }

    fn check_series(&self, series: &SampleSeries) -> Result<usize> {
        let n_total = series.len();
        if n_total <= self.span() {
            return Err(Error::InsufficientData(format!(
                "series of {} time units cannot cover a lag window of {}",
                series.duration(),
                self.span() as f64 * series.dt_sample
            )));
        }
        Ok(n_total - self.span())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaggedCovariance {
    pub dt_lag: f64,
    /// `C(k dt_lag)` for `k = 0..=intervals`.
    pub matrices: Vec<DMatrix<f64>>,
    /// Mean over the shared start-time window.
    pub mean: Vec<f64>,
    /// Population covariance over the same window.
    pub covariance: DMatrix<f64>,
    pub window: usize,
}

impl LaggedCovariance {
    /// Trapezoidal integral over the lag grid.
    pub fn integrate(&self) -> DMatrix<f64> {
        let last = self.matrices.len() - 1;
        let mut acc = DMatrix::zeros(self.covariance.nrows(), self.covariance.ncols());
        for (k, c) in self.matrices.iter().enumerate() {
            let w = if k == 0 || k == last { 0.5 } else { 1.0 };
            acc += c * w;
        }
        acc * self.dt_lag
    }
}

/// Per-lag matrices over an in-memory series. Lags are computed
/// independently (in parallel), so the result does not depend on the
/// schedule.
pub fn lagged_covariance(series: &SampleSeries, t_corr: f64, lag_stride: usize) -> Result<LaggedCovariance> {
    if series.is_empty() {
        return Err(Error::EmptyInput("series has no samples"));
    }
    let grid = LagGrid::new(series.dt_sample, t_corr, lag_stride)?;
    let n = grid.check_series(series)?;
    let (mean, covariance) = window_moments(series, 0..n)?;
    let d = series.dim();
    let centered: Vec<f64> = (0..n)
        .flat_map(|t| series.sample(t).iter().zip(&mean).map(|(v, m)| v - m).collect::<Vec<_>>())
        .collect();
    let matrices = (0..=grid.intervals)
        .into_par_iter()
        .map(|k| {
            let shift = k * grid.stride;
            let mut acc = vec![0.0; d * d];
            for t in 0..n {
                outer_add(&mut acc, series.sample(t + shift), &centered[t * d..(t + 1) * d]);
            }
            DMatrix::from_row_slice(d, d, &acc).map(|v| v / n as f64)
        })
        .collect();
    Ok(LaggedCovariance {
        dt_lag: grid.dt_lag,
        matrices,
        mean,
        covariance,
        window: n,
    })
}

/// Streaming accumulator for the mean, covariance and the trapezoid-integrated
/// lagged covariance. Memory is a ring buffer of `span + 1` samples plus a
/// few `d × d` sums, independent of the series length.
#[derive(Debug, Clone)]
pub struct LagIntegralAccumulator {
    grid: LagGrid,
    dim: usize,
    ring: Vec<f64>,
    pushed: usize,
    shift: Option<Vec<f64>>,
    window: usize,
    sum_z: Vec<f64>,
    sum_zz: Vec<f64>,
    sum_w: Vec<f64>,
    sum_wz: Vec<f64>,
    w: Vec<f64>,
}

/// Result of a streaming accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LagIntegral {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// `∫_0^{t_corr} C(s) ds` by the trapezoid rule.
    pub integral: DMatrix<f64>,
    pub dt_lag: f64,
    pub window: usize,
}

impl LagIntegralAccumulator {
    pub fn new(dim: usize, dt_sample: f64, t_corr: f64, lag_stride: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("accumulator dimension must be >= 1".into()));
        }
        let grid = LagGrid::new(dt_sample, t_corr, lag_stride)?;
        Ok(LagIntegralAccumulator {
            grid,
            dim,
            ring: vec![0.0; (grid.span() + 1) * dim],
            pushed: 0,
            shift: None,
            window: 0,
            sum_z: vec![0.0; dim],
            sum_zz: vec![0.0; dim * dim],
            sum_w: vec![0.0; dim],
            sum_wz: vec![0.0; dim * dim],
            w: vec![0.0; dim],
        })
    }

    pub fn grid(&self) -> LagGrid {
        self.grid
    }

    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.dim, "sample dimension");
        let d = self.dim;
        let slots = self.grid.span() + 1;
        // Values are stored relative to the first sample to limit cancellation.
        let shift = self.shift.get_or_insert_with(|| sample.to_vec());
        let slot = self.pushed % slots;
        for ((r, &v), &c) in self.ring[slot * d..(slot + 1) * d].iter_mut().zip(sample).zip(shift.iter()) {
            *r = v - c;
        }
        self.pushed += 1;
        if self.pushed <= self.grid.span() {
            return;
        }
        // Start time τ = pushed - 1 - span is now complete.
        let tau = self.pushed - 1 - self.grid.span();
        self.w.fill(0.0);
        for k in 0..=self.grid.intervals {
            let s = (tau + k * self.grid.stride) % slots;
            let wk = self.grid.weight(k);
            for (w, &z) in self.w.iter_mut().zip(&self.ring[s * d..(s + 1) * d]) {
                *w += wk * z;
            }
        }
        let s0 = tau % slots;
        let z0 = &self.ring[s0 * d..(s0 + 1) * d];
        for ((sz, sw), (&z, &w)) in self.sum_z.iter_mut().zip(self.sum_w.iter_mut()).zip(z0.iter().zip(&self.w)) {
            *sz += z;
            *sw += w;
        }
        outer_add(&mut self.sum_zz, z0, z0);
        outer_add(&mut self.sum_wz, &self.w, z0);
        self.window += 1;
    }

    pub fn finish(&self) -> Result<LagIntegral> {
        if self.window == 0 {
            return Err(Error::InsufficientData(format!(
                "{} samples do not cover a lag window of {} samples",
                self.pushed,
                self.grid.span()
            )));
        }
        let d = self.dim;
        let n = self.window as f64;
        let shift = self.shift.as_ref().expect("samples were pushed");
        let mean_shifted: Vec<f64> = self.sum_z.iter().map(|s| s / n).collect();
        let covariance =
            DMatrix::from_fn(d, d, |a, b| self.sum_zz[a * d + b] / n - mean_shifted[a] * mean_shifted[b]);
        let scale = self.grid.dt_lag / n;
        let integral =
            DMatrix::from_fn(d, d, |a, b| (self.sum_wz[a * d + b] - self.sum_w[a] * mean_shifted[b]) * scale);
        Ok(LagIntegral {
            mean: mean_shifted.iter().zip(shift).map(|(m, c)| m + c).collect(),
            covariance,
            integral,
            dt_lag: self.grid.dt_lag,
            window: self.window,
        })
    }
}

/// Streams an in-memory series through [`LagIntegralAccumulator`].
pub fn integrated_lagged_covariance(series: &SampleSeries, t_corr: f64, lag_stride: usize) -> Result<LagIntegral> {
    if series.is_empty() {
        return Err(Error::EmptyInput("series has no samples"));
    }
    let mut acc = LagIntegralAccumulator::new(series.dim(), series.dt_sample, t_corr, lag_stride)?;
    for row in series.rows() {
        acc.push(row);
    }
    acc.finish()
}
