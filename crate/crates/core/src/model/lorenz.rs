use nalgebra::DMatrix;

use super::params::{check_len, FastState, FullState, ModelParams, RescaleConstants, SlowState};
use crate::closure::ClosureData;
use crate::error::{Error, Result};
use crate::integrator::VectorField;

/// Coefficients of the generic (possibly rescaled) Lorenz 96 ring
///
/// `dx_i = (x_{i-1} + advect)(x_{i+1} - x_{i-2}) - damp * x_i + force`
///
/// For the plain model `advect = 0`, `damp = 1`, `force = F`. For the
/// rescaled model `advect = mean / beta`, `damp = 1 / beta`,
/// `force = (F - mean) / beta^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingCoefficients {
    pub advect: f64,
    pub damp: f64,
    pub force: f64,
}

impl RingCoefficients {
    pub fn plain(forcing: f64) -> Self {
        RingCoefficients {
            advect: 0.0,
            damp: 1.0,
            force: forcing,
        }
    }

    pub fn rescaled(forcing: f64, r: &RescaleConstants) -> Self {
        RingCoefficients {
            advect: r.mean / r.beta,
            damp: 1.0 / r.beta,
            force: (forcing - r.mean) / (r.beta * r.beta),
        }
    }
}

/// Direction of the advection stencil.
///
/// The slow ring uses `x_{i-1}(x_{i+1} - x_{i-2})`. The fast ring is the
/// mirror image, `y_{j+1}(y_{j-1} - y_{j+2})`, which has the same
/// statistics under the reflection `j -> -j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Forward,
    Reflected,
}

/// Evaluates the ring right-hand side into `out`. Requires `x.len() >= 4`.
pub(crate) fn ring_rhs_into(x: &[f64], c: RingCoefficients, orientation: Orientation, out: &mut [f64]) {
    let n = x.len();
    debug_assert!(n >= 4 && out.len() == n);
    let RingCoefficients { advect, damp, force } = c;
    match orientation {
        Orientation::Forward => {
            let at = |i: usize, d: isize| x[(i as isize + d).rem_euclid(n as isize) as usize];
            for i in [0, 1, n - 1] {
                out[i] = (at(i, -1) + advect) * (at(i, 1) - at(i, -2)) - damp * x[i] + force;
            }
            let interior = out[2..n - 1]
                .iter_mut()
                .zip(x[0..n - 3].iter())
                .zip(x[1..n - 2].iter())
                .zip(x[2..n - 1].iter())
                .zip(x[3..n].iter());
            for ((((o, &m2), &m1), &c0), &p1) in interior {
                *o = (m1 + advect) * (p1 - m2) - damp * c0 + force;
            }
        }
        Orientation::Reflected => {
            let at = |i: usize, d: isize| x[(i as isize + d).rem_euclid(n as isize) as usize];
            for i in [0, n - 2, n - 1] {
                out[i] = (at(i, 1) + advect) * (at(i, -1) - at(i, 2)) - damp * x[i] + force;
            }
            let interior = out[1..n - 2]
                .iter_mut()
                .zip(x[0..n - 3].iter())
                .zip(x[1..n - 2].iter())
                .zip(x[2..n - 1].iter())
                .zip(x[3..n].iter());
            for ((((o, &m1), &c0), &p1), &p2) in interior {
                *o = (p1 + advect) * (m1 - p2) - damp * c0 + force;
            }
        }
    }
}

fn check_ring(len: usize) -> Result<()> {
    if len < 4 {
        return Err(Error::Dimension(format!(
            "Lorenz 96 ring needs at least 4 variables, got {len}"
        )));
    }
    Ok(())
}

/// Uncoupled Lorenz 96: `dx_i = x_{i-1}(x_{i+1} - x_{i-2}) - x_i + F`.
pub fn l96_rhs(x: &[f64], forcing: f64) -> Result<Vec<f64>> {
    check_ring(x.len())?;
    let mut out = vec![0.0; x.len()];
    l96_rhs_into(x, forcing, &mut out);
    Ok(out)
}

pub fn l96_rhs_into(x: &[f64], forcing: f64, out: &mut [f64]) {
    ring_rhs_into(x, RingCoefficients::plain(forcing), Orientation::Forward, out);
}

/// Lorenz 96 in the variables `x_hat = (x - mean) / beta`, `tau = beta * t`.
pub fn rescaled_l96_rhs(x_hat: &[f64], forcing: f64, r: &RescaleConstants) -> Result<Vec<f64>> {
    check_ring(x_hat.len())?;
    r.validate()?;
    let mut out = vec![0.0; x_hat.len()];
    rescaled_l96_rhs_into(x_hat, forcing, r, &mut out);
    Ok(out)
}

pub fn rescaled_l96_rhs_into(x_hat: &[f64], forcing: f64, r: &RescaleConstants, out: &mut [f64]) {
    ring_rhs_into(x_hat, RingCoefficients::rescaled(forcing, r), Orientation::Forward, out);
}

/// `(L y)_i = sum_k y_(i,k)`.
pub fn block_sum(y: &[f64], j: usize) -> Vec<f64> {
    y.chunks_exact(j).map(|block| block.iter().sum()).collect()
}

/// `(L^T x)_(i,k) = x_i`.
pub fn lift(x: &[f64], j: usize) -> Vec<f64> {
    x.iter().flat_map(|&v| std::iter::repeat_n(v, j)).collect()
}

/// The `n_x × n_x·j` matrix with `L[i, (i', k)] = δ(i, i')`.
pub fn lifting_matrix(n_x: usize, j: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n_x, n_x * j, |i, col| if col / j == i { 1.0 } else { 0.0 })
}

/// `L M L^T`: sums each `j × j` block of a fast-space operator.
pub fn project_fast_operator(m: &DMatrix<f64>, j: usize) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() || m.nrows() % j != 0 {
        return Err(Error::Dimension(format!(
            "cannot project a {}x{} operator with block size {j}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n_x = m.nrows() / j;
    Ok(DMatrix::from_fn(n_x, n_x, |a, b| {
        let mut s = 0.0;
        for p in 0..j {
            for q in 0..j {
                s += m[(a * j + p, b * j + q)];
            }
        }
        s
    }))
}

/// Uncoupled (optionally rescaled) slow ring as a vector field.
#[derive(Debug, Clone)]
pub struct UncoupledSystem {
    pub coefficients: RingCoefficients,
}

impl UncoupledSystem {
    pub fn plain(forcing: f64) -> Self {
        UncoupledSystem {
            coefficients: RingCoefficients::plain(forcing),
        }
    }

    pub fn rescaled(forcing: f64, r: &RescaleConstants) -> Self {
        UncoupledSystem {
            coefficients: RingCoefficients::rescaled(forcing, r),
        }
    }
}

impl VectorField for UncoupledSystem {
    fn eval(&self, state: &[f64], out: &mut [f64]) {
        ring_rhs_into(state, self.coefficients, Orientation::Forward, out);
    }
}

/// The rescaled two-scale model on the flat state `[x, y]`.
#[derive(Debug, Clone)]
pub struct TwoScaleSystem {
    n_x: usize,
    j: usize,
    slow: RingCoefficients,
    fast: RingCoefficients,
    inv_eps: f64,
    slow_coupling: f64,
    fast_coupling: f64,
}

impl TwoScaleSystem {
    pub fn new(p: &ModelParams) -> Result<Self> {
        p.validate()?;
        Ok(TwoScaleSystem {
            n_x: p.n_x,
            j: p.j,
            slow: RingCoefficients::rescaled(p.f_x, &p.rescale_x),
            fast: RingCoefficients::rescaled(p.f_y, &p.rescale_y),
            inv_eps: 1.0 / p.eps,
            slow_coupling: p.lambda_y / p.j as f64,
            fast_coupling: p.lambda_x / p.eps,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_x * (1 + self.j)
    }
}

impl VectorField for TwoScaleSystem {
    fn eval(&self, state: &[f64], out: &mut [f64]) {
        let (x, y) = state.split_at(self.n_x);
        let (dx, dy) = out.split_at_mut(self.n_x);
        ring_rhs_into(x, self.slow, Orientation::Forward, dx);
        ring_rhs_into(y, self.fast, Orientation::Reflected, dy);
        for ((dxi, &xi), (yb, dyb)) in dx
            .iter_mut()
            .zip(x)
            .zip(y.chunks_exact(self.j).zip(dy.chunks_exact_mut(self.j)))
        {
            let s: f64 = yb.iter().sum();
            *dxi -= self.slow_coupling * s;
            let push = self.fast_coupling * xi;
            for d in dyb.iter_mut() {
                *d = self.inv_eps * *d + push;
            }
        }
    }
}

/// Full two-scale right-hand side.
pub fn two_scale_rhs(s: &FullState, p: &ModelParams) -> Result<FullState> {
    let sys = TwoScaleSystem::new(p)?;
    check_len("slow state", s.slow.0.len(), p.n_x)?;
    check_len("fast state", s.fast.0.len(), p.n_y())?;
    let flat = s.to_flat();
    let mut out = vec![0.0; flat.len()];
    sys.eval(&flat, &mut out);
    FullState::from_flat(&out, p)
}

/// Fast dynamics with the slow state frozen, sped up by `1/eps` so that
/// it evolves on an order-one time scale: `dz = eps·g(z) + λ_x L^T x*`.
#[derive(Debug, Clone)]
pub struct FastLimitingSystem {
    j: usize,
    fast: RingCoefficients,
    push: Vec<f64>,
}

impl FastLimitingSystem {
    pub fn new(x_star: &SlowState, p: &ModelParams) -> Result<Self> {
        p.validate()?;
        x_star.check(p)?;
        Ok(FastLimitingSystem {
            j: p.j,
            fast: RingCoefficients::rescaled(p.f_y, &p.rescale_y),
            push: x_star.0.iter().map(|&v| p.lambda_x * v).collect(),
        })
    }
}

impl VectorField for FastLimitingSystem {
    fn eval(&self, state: &[f64], out: &mut [f64]) {
        ring_rhs_into(state, self.fast, Orientation::Reflected, out);
        for (block, &push) in out.chunks_exact_mut(self.j).zip(&self.push) {
            for d in block {
                *d += push;
            }
        }
    }
}

pub fn fast_limiting_rhs(z: &FastState, x_star: &SlowState, p: &ModelParams) -> Result<Vec<f64>> {
    let sys = FastLimitingSystem::new(x_star, p)?;
    check_len("fast state", z.0.len(), p.n_y())?;
    let mut out = vec![0.0; z.0.len()];
    sys.eval(&z.0, &mut out);
    Ok(out)
}

/// Closed slow model `dx = f(x) + b* - C* (x - x*)`. With `correction`
/// absent this is the zero-order model.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    slow: RingCoefficients,
    x_star: Vec<f64>,
    offset: Vec<f64>,
    /// Row-major `n_x × n_x`.
    correction: Option<Vec<f64>>,
}

impl ReducedSystem {
    pub fn new(
        p: &ModelParams,
        x_star: &[f64],
        b_star: &[f64],
        c_star: Option<&DMatrix<f64>>,
    ) -> Result<Self> {
        p.validate()?;
        check_len("x_star", x_star.len(), p.n_x)?;
        check_len("b_star", b_star.len(), p.n_x)?;
        let correction = match c_star {
            Some(c) => {
                if c.shape() != (p.n_x, p.n_x) {
                    return Err(Error::Dimension(format!(
                        "c_star is {}x{}, expected {n}x{n}",
                        c.nrows(),
                        c.ncols(),
                        n = p.n_x
                    )));
                }
                Some((0..p.n_x).flat_map(|r| (0..p.n_x).map(move |col| c[(r, col)])).collect())
            }
            None => None,
        };
        Ok(ReducedSystem {
            slow: RingCoefficients::rescaled(p.f_x, &p.rescale_x),
            x_star: x_star.to_vec(),
            offset: b_star.to_vec(),
            correction,
        })
    }

    pub fn from_closure(c: &ClosureData, p: &ModelParams, zero_order: bool) -> Result<Self> {
        c.check_dims(p)?;
        let correction = if zero_order { None } else { Some(&c.c_star) };
        ReducedSystem::new(p, &c.x_star.0, &c.b_star, correction)
    }
}

impl VectorField for ReducedSystem {
    fn eval(&self, state: &[f64], out: &mut [f64]) {
        ring_rhs_into(state, self.slow, Orientation::Forward, out);
        match &self.correction {
            None => {
                for (o, &b) in out.iter_mut().zip(&self.offset) {
                    *o += b;
                }
            }
            Some(c) => {
                let n = state.len();
                for (i, (o, &b)) in out.iter_mut().zip(&self.offset).enumerate() {
                    let row = &c[i * n..(i + 1) * n];
                    let acc: f64 = row
                        .iter()
                        .zip(state.iter().zip(&self.x_star))
                        .map(|(&cij, (&xj, &sj))| cij * (xj - sj))
                        .sum();
                    *o = *o + b - acc;
                }
            }
        }
    }
}

pub fn reduced_rhs(x: &SlowState, c: &ClosureData, p: &ModelParams, zero_order: bool) -> Result<Vec<f64>> {
    let sys = ReducedSystem::from_closure(c, p, zero_order)?;
    check_len("slow state", x.0.len(), p.n_x)?;
    let mut out = vec![0.0; p.n_x];
    sys.eval(&x.0, &mut out);
    Ok(out)
}
