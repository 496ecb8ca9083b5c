use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Long-term mean and standard deviation of the uncoupled Lorenz 96 model
/// at one forcing. Both are index-independent by translational invariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleConstants {
    pub mean: f64,
    pub beta: f64,
}

impl RescaleConstants {
    /// `(mean = 0, beta = 1)`: the rescaled equations reduce to plain Lorenz 96.
    pub const IDENTITY: RescaleConstants = RescaleConstants {
        mean: 0.0,
        beta: 1.0,
    };

    pub fn new(mean: f64, beta: f64) -> Result<Self> {
        let r = RescaleConstants { mean, beta };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() || !self.mean.is_finite() {
            return Err(Error::InvalidRescale { beta: self.beta });
        }
        Ok(())
    }
}

/// Parameters of the rescaled two-scale Lorenz 96 model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_x: usize,
    pub j: usize,
    pub eps: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub rescale_x: RescaleConstants,
    pub rescale_y: RescaleConstants,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_x < 4 {
            return Err(Error::Dimension(format!(
                "n_x = {} but at least 4 slow variables are required",
                self.n_x
            )));
        }
        if self.j < 1 {
            return Err(Error::Dimension("j must be at least 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps = {} must be > 0", self.eps)));
        }
        for (name, v) in [
            ("f_x", self.f_x),
            ("f_y", self.f_y),
            ("lambda_x", self.lambda_x),
            ("lambda_y", self.lambda_y),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        self.rescale_x.validate()?;
        self.rescale_y.validate()
    }

    pub fn n_y(&self) -> usize {
        self.n_x * self.j
    }

    /// Length of the flat `[x, y]` state.
    pub fn full_dim(&self) -> usize {
        self.n_x + self.n_y()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlowState(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FastState(pub Vec<f64>);

impl SlowState {
    pub fn zeros(n_x: usize) -> Self {
        SlowState(vec![0.0; n_x])
    }

    pub fn check(&self, p: &ModelParams) -> Result<()> {
        check_len("slow state", self.0.len(), p.n_x)?;
        check_finite("slow state", &self.0)
    }
}

impl FastState {
    pub fn zeros(n_y: usize) -> Self {
        FastState(vec![0.0; n_y])
    }

    /// Value at block `i`, position `k`, applying both wrap rules.
    pub fn at(&self, j: usize, i: isize, k: isize) -> f64 {
        let n = self.0.len() as isize;
        let flat = (i * j as isize + k).rem_euclid(n);
        self.0[flat as usize]
    }

    pub fn check(&self, p: &ModelParams) -> Result<()> {
        check_len("fast state", self.0.len(), p.n_y())?;
        check_finite("fast state", &self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub slow: SlowState,
    pub fast: FastState,
}

impl FullState {
    pub fn from_flat(flat: &[f64], p: &ModelParams) -> Result<Self> {
        check_len("full state", flat.len(), p.full_dim())?;
        Ok(FullState {
            slow: SlowState(flat[..p.n_x].to_vec()),
            fast: FastState(flat[p.n_x..].to_vec()),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.slow.0.len() + self.fast.0.len());
        v.extend_from_slice(&self.slow.0);
        v.extend_from_slice(&self.fast.0);
        v
    }

    pub fn check(&self, p: &ModelParams) -> Result<()> {
        self.slow.check(p)?;
        self.fast.check(p)
    }
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{what}: length {got}, expected {want}")));
    }
    Ok(())
}

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} has non-finite entries")))
    }
}
