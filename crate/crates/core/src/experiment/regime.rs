use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closure::{IndexPooling, Regularization};
use crate::error::{Error, Result};
use crate::integrator::IntegrationPlan;
use crate::model::{CalibrationPlan, ModelParams, RescaleConstants};

/// Two-scale model parameters before calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_x: usize,
    pub j: usize,
    pub eps: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
}

impl ModelSpec {
    pub fn with_rescale(&self, rescale: &RescalePair) -> ModelParams {
        ModelParams {
            n_x: self.n_x,
            j: self.j,
            eps: self.eps,
            f_x: self.f_x,
            f_y: self.f_y,
            lambda_x: self.lambda_x,
            lambda_y: self.lambda_y,
            rescale_x: rescale.x,
            rescale_y: rescale.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescalePair {
    pub x: RescaleConstants,
    pub y: RescaleConstants,
}

/// Calibration run settings; the seed comes from the regime's master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub n: usize,
    pub t_total: f64,
    pub dt: f64,
    pub spin_up: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        let d = CalibrationPlan::default();
        CalibrationSettings {
            n: d.n,
            t_total: d.t_total,
            dt: d.dt,
            spin_up: d.spin_up,
        }
    }
}

impl CalibrationSettings {
    pub fn plan(&self, seed: u64) -> CalibrationPlan {
        CalibrationPlan {
            n: self.n,
            t_total: self.t_total,
            dt: self.dt,
            spin_up: self.spin_up,
            seed,
        }
    }
}

/// Step size, sampling and spin-up of one system; the duration and the
/// seed are filled in per stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub dt: f64,
    pub sample_every: usize,
    pub spin_up: f64,
}

impl StepPlan {
    pub fn plan(&self, duration: f64, seed: u64) -> IntegrationPlan {
        IntegrationPlan {
            dt: self.dt,
            spin_up: self.spin_up,
            duration,
            sample_every: self.sample_every,
            seed,
        }
    }

    pub fn dt_sample(&self) -> f64 {
        self.dt * self.sample_every as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemPlans {
    pub full: StepPlan,
    pub fast: StepPlan,
    pub reduced: StepPlan,
}

impl Default for SystemPlans {
    fn default() -> Self {
        SystemPlans {
            full: StepPlan {
                dt: 1e-4,
                sample_every: 500,
                spin_up: 50.0,
            },
            fast: StepPlan {
                dt: 5e-3,
                sample_every: 10,
                spin_up: 50.0,
            },
            reduced: StepPlan {
                dt: 5e-3,
                sample_every: 10,
                spin_up: 50.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum XStarMode {
    Zero,
    FullModelMean { duration: f64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub pdf_lo: f64,
    pub pdf_hi: f64,
    pub n_bins: usize,
    pub max_lag: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            pdf_lo: -5.0,
            pdf_hi: 5.0,
            n_bins: 200,
            max_lag: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSpec,
    /// Skips calibration when present.
    #[serde(default)]
    pub rescale: Option<RescalePair>,
    #[serde(default)]
    pub calibration: CalibrationSettings,
    pub t_av: f64,
    pub t_corr: f64,
    pub lag_stride: usize,
    pub t_stats: f64,
    #[serde(default)]
    pub plans: SystemPlans,
    pub x_star_mode: XStarMode,
    #[serde(default)]
    pub regularization: Regularization,
    /// Pooling of the closure statistics over fast-index shifts.
    #[serde(default = "cyclic")]
    pub pooling: IndexPooling,
    #[serde(default)]
    pub stats: StatsConfig,
    pub seed: u64,
}

fn cyclic() -> IndexPooling {
    IndexPooling::Cyclic
}

/// Independent pipeline stages, each with its own seed stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    CalibrateSlow = 1,
    CalibrateFast = 2,
    XStar = 3,
    Fast = 4,
    Full = 5,
    Reduced = 6,
    ZeroOrder = 7,
}

impl RegimeSpec {
    /// One of the eight regimes of the reference study (`N_x = 20`,
    /// `J = 4`, `ε = 0.01`, `λ_x = λ_y`).
    pub fn reference(lambda: f64, f_x: f64, f_y: f64) -> Self {
        RegimeSpec {
            name: None,
            model: ModelSpec {
                n_x: 20,
                j: 4,
                eps: 0.01,
                f_x,
                f_y,
                lambda_x: lambda,
                lambda_y: lambda,
            },
            rescale: None,
            calibration: CalibrationSettings::default(),
            t_av: 10_000.0,
            t_corr: 50.0,
            lag_stride: 1,
            t_stats: 5_000.0,
            plans: SystemPlans::default(),
            x_star_mode: XStarMode::FullModelMean { duration: 2_000.0 },
            regularization: Regularization::None,
            pooling: IndexPooling::Cyclic,
            stats: StatsConfig::default(),
            seed: 2024,
        }
    }

    /// The 2 × 2 × 2 grid over `λ ∈ {0.3, 0.4}`, `F_y ∈ {8, 12}`, `F_x ∈ {6, 16}`.
    pub fn reference_suite() -> Vec<RegimeSpec> {
        let mut out = Vec::new();
        for lambda in [0.3, 0.4] {
            for f_y in [8.0, 12.0] {
                for f_x in [6.0, 16.0] {
                    out.push(RegimeSpec::reference(lambda, f_x, f_y));
                }
            }
        }
        out
    }

    /// Directory-safe identifier encoding `(λ_x, λ_y, F_x, F_y)`.
    pub fn id(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let m = &self.model;
        let lam = if m.lambda_x == m.lambda_y {
            format!("lambda{}", m.lambda_x)
        } else {
            format!("lambdax{}-lambday{}", m.lambda_x, m.lambda_y)
        };
        format!("{lam}_fx{}_fy{}", m.f_x, m.f_y)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_stats > self.stats.max_lag) {
            return Err(Error::InvalidParameter(format!(
                "t_stats = {} must exceed the correlation window {}",
                self.t_stats, self.stats.max_lag
            )));
        }
        if !(self.t_corr > 0.0) || !(self.t_av >= self.t_corr) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < t_corr <= t_av (got t_corr = {}, t_av = {})",
                self.t_corr, self.t_av
            )));
        }
        if self.lag_stride == 0 {
            return Err(Error::InvalidParameter("lag_stride must be >= 1".into()));
        }
        let probe = self.model.with_rescale(&RescalePair {
            x: RescaleConstants::IDENTITY,
            y: RescaleConstants::IDENTITY,
        });
        probe.validate()?;
        if let Some(r) = &self.rescale {
            r.x.validate()?;
            r.y.validate()?;
        }
        for p in [self.plans.full, self.plans.fast, self.plans.reduced] {
            p.plan(1.0, 0).validate()?;
        }
        Ok(())
    }

    /// Seed for one stage, derived from the master seed.
    pub fn stage_seed(&self, stage: Stage) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stage as u64);
        rng.next_u64()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Configuration file for a suite of regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub regimes: Vec<RegimeSpec>,
}

impl SuiteConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
