//! Diagnostics for slow-variable trajectories: bin-counted PDFs, pooled
//! auto/cross correlations, the energy autocorrelation, and L2 distances.
//!
//! All correlation moments are raw (uncentered) and pooled over the index
//! `i` of the series. For a lag of `m` samples the time average runs over
//! the `n - m` admissible start times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::SampleSeries;

/// Pooled running mean and population variance (Chan/Welford merge).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PooledMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl PooledMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    /// Merges a batch in one step, which is cheaper than pushing values one by one.
    pub fn extend(&mut self, values: &[f64]) {
        if values.is_empty() {
            return;
        }
        let nb = values.len() as f64;
        let mb = values.iter().sum::<f64>() / nb;
        let m2b: f64 = values.iter().map(|v| (v - mb) * (v - mb)).sum();
        self.merge(&PooledMoments {
            count: values.len() as u64,
            mean: mb,
            m2: m2b,
        });
    }

    pub fn merge(&mut self, other: &PooledMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance (divides by the count).
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// Bin-counted probability density on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub n_bins: usize,
    pub density: Vec<f64>,
    pub in_range: u64,
    pub out_of_range: u64,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.n_bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.n_bins).map(|b| self.lo + (b as f64 + 0.5) * w).collect()
    }

    /// `sum(density) * bin_width`; one by construction.
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    pub fn out_of_range_fraction(&self) -> f64 {
        let total = self.in_range + self.out_of_range;
        if total == 0 {
            0.0
        } else {
            self.out_of_range as f64 / total as f64
        }
    }
}

pub fn histogram_pdf(samples: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 || !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "histogram needs n_bins >= 1 and hi > lo (got {n_bins} bins on [{lo}, {hi}])"
        )));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    let mut out = 0u64;
    for &v in samples {
        if v >= lo && v <= hi {
            let b = (((v - lo) / width) as usize).min(n_bins - 1);
            counts[b] += 1;
        } else {
            out += 1;
        }
    }
    let inside: u64 = counts.iter().sum();
    if inside == 0 {
        return Err(Error::EmptyInput("no samples fall inside the histogram range"));
    }
    let norm = 1.0 / (inside as f64 * width);
    Ok(Histogram {
        lo,
        hi,
        n_bins,
        density: counts.iter().map(|&c| c as f64 * norm).collect(),
        in_range: inside,
        out_of_range: out,
    })
}

/// A function sampled on the lag grid `0, dt_lag, 2 dt_lag, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCurve {
    pub dt_lag: f64,
    pub values: Vec<f64>,
}

impl LagCurve {
    pub fn lags(&self) -> Vec<f64> {
        (0..self.values.len()).map(|m| m as f64 * self.dt_lag).collect()
    }

    pub fn sup_distance(&self, other: &LagCurve) -> Result<f64> {
        check_lag_grids(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn check_lag_grids(a: &LagCurve, b: &LagCurve) -> Result<()> {
    if a.values.len() != b.values.len() || a.dt_lag != b.dt_lag {
        return Err(Error::GridMismatch(format!(
            "lag grids differ: {} points at {} vs {} points at {}",
            a.values.len(),
            a.dt_lag,
            b.values.len(),
            b.dt_lag
        )));
    }
    Ok(())
}

/// Something tabulated on a uniform grid, comparable by [`l2_distance`].
pub trait Gridded {
    fn spacing(&self) -> f64;
    fn grid_values(&self) -> &[f64];
    fn check_same_grid(&self, other: &Self) -> Result<()>;
}

impl Gridded for LagCurve {
    fn spacing(&self) -> f64 {
        self.dt_lag
    }

    fn grid_values(&self) -> &[f64] {
        &self.values
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        check_lag_grids(self, other)
    }
}

impl Gridded for Histogram {
    fn spacing(&self) -> f64 {
        self.bin_width()
    }

    fn grid_values(&self) -> &[f64] {
        &self.density
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.n_bins != other.n_bins || self.lo != other.lo || self.hi != other.hi {
            return Err(Error::GridMismatch(format!(
                "histograms differ: {} bins on [{}, {}] vs {} bins on [{}, {}]",
                self.n_bins, self.lo, self.hi, other.n_bins, other.lo, other.hi
            )));
        }
        Ok(())
    }
}

/// `sqrt(sum_k (a_k - b_k)^2 * spacing)`.
pub fn l2_distance<G: Gridded>(a: &G, b: &G) -> Result<f64> {
    a.check_same_grid(b)?;
    let ss: f64 = a
        .grid_values()
        .iter()
        .zip(b.grid_values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((ss * a.spacing()).sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn lag_steps(series: &SampleSeries, max_lag: f64) -> Result<usize> {
    if series.is_empty() {
        return Err(Error::EmptyInput("series has no samples"));
    }
    if !(max_lag >= 0.0) {
        return Err(Error::InvalidParameter(format!("max_lag = {max_lag} must be >= 0")));
    }
    let m = (max_lag / series.dt_sample + 1e-9).floor() as usize;
    if m >= series.len() {
        return Err(Error::InsufficientData(format!(
            "series spans {} time units but the lag window is {max_lag}",
            series.duration()
        )));
    }
    Ok(m)
}

/// Pooled raw lag products `<x_i(t) x_i(t+s)>` for `s = 0..=max_lag`.
fn raw_autocovariance(series: &SampleSeries, max_m: usize) -> Vec<f64> {
    let d = series.dim();
    let n = series.len();
    let flat = series.as_flat();
    (0..=max_m)
        .map(|m| dot(&flat[..(n - m) * d], &flat[m * d..]) / ((n - m) * d) as f64)
        .collect()
}

/// Pooled autocorrelation normalized by the raw second moment; exactly 1 at lag 0.
pub fn autocorrelation(series: &SampleSeries, max_lag: f64) -> Result<LagCurve> {
    let m = lag_steps(series, max_lag)?;
    let raw = raw_autocovariance(series, m);
    let norm = raw[0];
    Ok(LagCurve {
        dt_lag: series.dt_sample,
        values: raw.iter().map(|v| v / norm).collect(),
    })
}

/// Autocorrelation of a single component, normalized by its own second moment.
pub fn index_autocorrelation(series: &SampleSeries, index: usize, max_lag: f64) -> Result<LagCurve> {
    if index >= series.dim() {
        return Err(Error::Dimension(format!("index {index} outside series of dim {}", series.dim())));
    }
    let m = lag_steps(series, max_lag)?;
    let x = series.component(index);
    let n = x.len();
    let raw: Vec<f64> = (0..=m).map(|k| dot(&x[..n - k], &x[k..]) / (n - k) as f64).collect();
    let norm = raw[0];
    Ok(LagCurve {
        dt_lag: series.dt_sample,
        values: raw.iter().map(|v| v / norm).collect(),
    })
}

/// Pooled `<x_i(t) x_{i+1}(t+s)> / <x_i^2>` with cyclic `i + 1`.
pub fn cross_correlation(series: &SampleSeries, max_lag: f64) -> Result<LagCurve> {
    let m = lag_steps(series, max_lag)?;
    let d = series.dim();
    let n = series.len();
    let flat = series.as_flat();
    let norm = raw_autocovariance(series, 0)[0];
    // Rotate each row left by one so that column i holds x_{i+1}.
    let mut shifted = Vec::with_capacity(flat.len());
    for row in series.rows() {
        shifted.extend_from_slice(&row[1..]);
        shifted.push(row[0]);
    }
    let values = (0..=m)
        .map(|k| dot(&flat[..(n - k) * d], &shifted[k * d..]) / ((n - k) * d) as f64 / norm)
        .collect();
    Ok(LagCurve {
        dt_lag: series.dt_sample,
        values,
    })
}

/// `K(s) = <x^2(t) x^2(t+s)> / (<x^2>^2 + 2 <x(t) x(t+s)>^2)`, pooled.
pub fn energy_autocorrelation(series: &SampleSeries, max_lag: f64) -> Result<LagCurve> {
    let m = lag_steps(series, max_lag)?;
    let d = series.dim();
    let n = series.len();
    let raw = raw_autocovariance(series, m);
    let sq: Vec<f64> = series.as_flat().iter().map(|v| v * v).collect();
    let second = raw[0];
    let values = (0..=m)
        .map(|k| {
            let fourth = dot(&sq[..(n - k) * d], &sq[k * d..]) / ((n - k) * d) as f64;
            fourth / (second * second + 2.0 * raw[k] * raw[k])
        })
        .collect();
    Ok(LagCurve {
        dt_lag: series.dt_sample,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn series(dim: usize, dt: f64, data: Vec<f64>) -> SampleSeries {
        SampleSeries::from_rows(dim, dt, 0.0, data).unwrap()
    }

    fn white(dim: usize, n: usize, seed: u64) -> SampleSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        series(dim, 0.1, (0..dim * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
    }

    #[test]
    fn pooled_moments_match_two_pass() {
        let v: Vec<f64> = (0..1000).map(|k| ((k * 37) % 101) as f64 * 0.3 - 4.0).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        let mut a = PooledMoments::new();
        v.iter().for_each(|&x| a.push(x));
        let mut b = PooledMoments::new();
        for c in v.chunks(77) {
            b.extend(c);
        }
        for m in [a, b] {
            assert!((m.mean() - mean).abs() < 1e-12);
            assert!((m.variance() - var).abs() < 1e-10);
        }
    }

    #[test]
    fn single_bin_histogram() {
        let h = histogram_pdf(&[0.11, 0.12, 0.13], 0.0, 1.0, 10).unwrap();
        assert!((h.density[1] - 10.0).abs() < 1e-12);
        assert!(h.density.iter().enumerate().all(|(b, &d)| b == 1 || d == 0.0));
    }

    #[test]
    fn histogram_counts_out_of_range() {
        let h = histogram_pdf(&[-2.0, 0.5, 3.0, f64::NAN, 1.0], 0.0, 1.0, 4).unwrap();
        assert_eq!(h.in_range, 2);
        assert_eq!(h.out_of_range, 3);
        assert!((h.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_errors() {
        assert!(matches!(histogram_pdf(&[5.0], 0.0, 1.0, 4), Err(Error::EmptyInput(_))));
        assert!(histogram_pdf(&[0.5], 1.0, 0.0, 4).is_err());
        assert!(histogram_pdf(&[0.5], 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn gaussian_histogram_matches_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..1_000_000).map(|_| rng.sample(StandardNormal)).collect();
        let h = histogram_pdf(&samples, -5.0, 5.0, 200).unwrap();
        let reference = Histogram {
            density: h
                .centers()
                .iter()
                .map(|c| (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt())
                .collect(),
            ..h.clone()
        };
        let d = l2_distance(&h, &reference).unwrap();
        assert!(d < 0.01, "L2 {d}");
    }

    #[test]
    fn l2_of_disjoint_indicators() {
        let w = 0.25;
        let mk = |b: usize| {
            let mut density = vec![0.0; 4];
            density[b] = 1.0 / w;
            Histogram {
                lo: 0.0,
                hi: 1.0,
                n_bins: 4,
                density,
                in_range: 1,
                out_of_range: 0,
            }
        };
        let d = l2_distance(&mk(0), &mk(2)).unwrap();
        assert!((d - (2.0f64 / w).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn l2_homogeneous_and_zero_on_self() {
        let a = LagCurve {
            dt_lag: 0.5,
            values: vec![1.0, -0.5, 0.25],
        };
        let zero = LagCurve {
            dt_lag: 0.5,
            values: vec![0.0; 3],
        };
        let twice = LagCurve {
            dt_lag: 0.5,
            values: a.values.iter().map(|v| 2.0 * v).collect(),
        };
        assert_eq!(l2_distance(&a, &a).unwrap(), 0.0);
        let d1 = l2_distance(&a, &zero).unwrap();
        let d2 = l2_distance(&twice, &zero).unwrap();
        assert!((d2 - 2.0 * d1).abs() < 1e-15);
    }

    #[test]
    fn l2_grid_mismatch() {
        let a = LagCurve {
            dt_lag: 0.5,
            values: vec![1.0; 3],
        };
        let b = LagCurve {
            dt_lag: 0.25,
            values: vec![1.0; 3],
        };
        assert!(matches!(l2_distance(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn autocorrelation_of_sine() {
        let dt = 0.01;
        let w = 2.0;
        let n = 200_000;
        let data: Vec<f64> = (0..n).map(|k| (w * k as f64 * dt).sin()).collect();
        let c = autocorrelation(&series(1, dt, data), 5.0).unwrap();
        assert_eq!(c.values[0], 1.0);
        for (s, v) in c.lags().iter().zip(&c.values) {
            assert!((v - (w * s).cos()).abs() < 5e-3, "s = {s}: {v}");
        }
    }

    #[test]
    fn white_noise_decorrelates() {
        let s = white(5, 40_000, 3);
        let count = (5 * 40_000) as f64;
        let acf = autocorrelation(&s, 1.0).unwrap();
        let ccf = cross_correlation(&s, 1.0).unwrap();
        assert_eq!(acf.values[0], 1.0);
        let bound = 5.0 / count.sqrt();
        assert!(acf.values[1..].iter().all(|v| v.abs() < bound));
        assert!(ccf.values.iter().all(|v| v.abs() < bound));
    }

    #[test]
    fn cross_correlation_of_identical_indices_is_autocorrelation() {
        let base = white(1, 5_000, 9);
        let data: Vec<f64> = base.as_flat().iter().flat_map(|&v| [v, v, v, v]).collect();
        let s = series(4, 0.1, data);
        let acf = autocorrelation(&s, 2.0).unwrap();
        let ccf = cross_correlation(&s, 2.0).unwrap();
        for (a, c) in acf.values.iter().zip(&ccf.values) {
            assert!((a - c).abs() < 1e-14);
        }
    }

    #[test]
    fn energy_correlation_of_constant() {
        let s = series(3, 0.1, vec![1.7; 300]);
        let k = energy_autocorrelation(&s, 5.0).unwrap();
        assert!(k.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn energy_correlation_of_white_gaussian_at_zero_lag() {
        let s = white(4, 250_000, 5);
        let k = energy_autocorrelation(&s, 0.0).unwrap();
        assert!((k.values[0] - 1.0).abs() < 0.02, "{}", k.values[0]);
    }

    /// `K(s) (<x^2>^2 + 2 C(s)^2 <x^2>^2)` recovers the directly summed
    /// fourth-order product, and K is near 1 for a Gaussian AR(1) series.
    #[test]
    fn energy_correlation_is_consistent_with_autocorrelation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (dim, n, a) = (2, 200_000, 0.9f64);
        let mut x = vec![0.0; dim];
        let mut data = Vec::with_capacity(dim * n);
        for _ in 0..n {
            for v in x.iter_mut() {
                *v = a * *v + (1.0 - a * a).sqrt() * rng.sample::<f64, _>(StandardNormal);
            }
            data.extend_from_slice(&x);
        }
        let s = series(dim, 0.1, data.clone());
        let k = energy_autocorrelation(&s, 2.0).unwrap();
        let c = autocorrelation(&s, 2.0).unwrap();
        let second = data.iter().map(|v| v * v).sum::<f64>() / data.len() as f64;
        for m in 0..k.values.len() {
            let pairs = (n - m) * dim;
            let mut fourth = 0.0;
            for t in 0..n - m {
                for i in 0..dim {
                    let (p, q) = (data[t * dim + i], data[(t + m) * dim + i]);
                    fourth += p * p * q * q;
                }
            }
            fourth /= pairs as f64;
            let rebuilt = k.values[m] * (second * second + 2.0 * (c.values[m] * second).powi(2));
            assert!((rebuilt - fourth).abs() < 1e-10 * fourth, "lag {m}");
            assert!((k.values[m] - 1.0).abs() < 0.05, "K({m}) = {}", k.values[m]);
        }
    }

    #[test]
    fn insufficient_duration() {
        let s = white(2, 10, 1);
        assert!(matches!(autocorrelation(&s, 5.0), Err(Error::InsufficientData(_))));
        assert!(matches!(cross_correlation(&s, 5.0), Err(Error::InsufficientData(_))));
        assert!(matches!(energy_autocorrelation(&s, 5.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn diagnostics_invariant_under_cyclic_relabeling() {
        let s = white(6, 3_000, 21);
        let rotated: Vec<f64> = s
            .rows()
            .flat_map(|r| r[2..].iter().chain(&r[..2]).copied().collect::<Vec<_>>())
            .collect();
        let r = series(6, 0.1, rotated);
        for f in [autocorrelation, cross_correlation, energy_autocorrelation] {
            let a = f(&s, 3.0).unwrap();
            let b = f(&r, 3.0).unwrap();
            assert!(a.sup_distance(&b).unwrap() < 1e-12);
        }
        let ha = histogram_pdf(s.as_flat(), -5.0, 5.0, 50).unwrap();
        let hb = histogram_pdf(r.as_flat(), -5.0, 5.0, 50).unwrap();
        assert_eq!(ha, hb);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn histogram_is_a_density(samples in prop::collection::vec(-6.0f64..6.0, 1..400), bins in 1usize..64) {
                prop_assume!(samples.iter().any(|v| (-5.0..=5.0).contains(v)));
                let h = histogram_pdf(&samples, -5.0, 5.0, bins).unwrap();
                prop_assert!(h.density.iter().all(|&d| d >= 0.0));
                prop_assert!((h.mass() - 1.0).abs() < 1e-12);
                prop_assert_eq!(h.in_range + h.out_of_range, samples.len() as u64);
            }

            #[test]
            fn autocorrelation_starts_at_one(data in prop::collection::vec(-3.0f64..3.0, 40..200)) {
                prop_assume!(data.iter().any(|v| v.abs() > 1e-3));
                let s = SampleSeries::from_rows(4, 0.1, 0.0, data[..data.len() / 4 * 4].to_vec()).unwrap();
                prop_assume!(s.len() > 3);
                let c = autocorrelation(&s, 0.2).unwrap();
                let x = cross_correlation(&s, 0.2).unwrap();
                prop_assert_eq!(c.values[0], 1.0);
                prop_assert_eq!(c.values.len(), x.values.len());
            }
        }
    }
}
