use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::output::{write_curve_csv, CurveKind};
use super::regime::{RegimeSpec, RescalePair, Stage, StatsConfig, XStarMode};
use crate::closure::{closure_from_integral, ClosureData, ClosureOptions, LagIntegralAccumulator, Provenance};
use crate::error::{Error, Result};
use crate::integrator::{integrate_with, SampleSeries};
use crate::model::{calibrate, FastLimitingSystem, ModelParams, ReducedSystem, SlowState, TwoScaleSystem};
use crate::stats::{
    autocorrelation, cross_correlation, energy_autocorrelation, histogram_pdf, index_autocorrelation, l2_distance,
    Histogram, LagCurve, PooledMoments,
};

/// The four slow-variable diagnostics of one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub pdf: Histogram,
    pub acf: LagCurve,
    pub ccf: LagCurve,
    pub kcf: LagCurve,
    pub mean: f64,
    pub variance: f64,
}

impl Diagnostics {
    pub fn compute(series: &SampleSeries, cfg: &StatsConfig) -> Result<Self> {
        let mut moments = PooledMoments::new();
        moments.extend(series.as_flat());
        Ok(Diagnostics {
            pdf: histogram_pdf(series.as_flat(), cfg.pdf_lo, cfg.pdf_hi, cfg.n_bins)?,
            acf: autocorrelation(series, cfg.max_lag)?,
            ccf: cross_correlation(series, cfg.max_lag)?,
            kcf: energy_autocorrelation(series, cfg.max_lag)?,
            mean: moments.mean(),
            variance: moments.variance(),
        })
    }

    pub fn errors_against(&self, reference: &Diagnostics) -> Result<ErrorRow> {
        Ok(ErrorRow {
            pdf: l2_distance(&self.pdf, &reference.pdf)?,
            acf: l2_distance(&self.acf, &reference.acf)?,
            ccf: l2_distance(&self.ccf, &reference.ccf)?,
            kcf: l2_distance(&self.kcf, &reference.kcf)?,
        })
    }
}

/// L2 errors of one reduced variant against the full model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub pdf: f64,
    pub acf: f64,
    pub ccf: f64,
    pub kcf: f64,
}

impl ErrorRow {
    pub fn get(&self, kind: CurveKind) -> f64 {
        match kind {
            CurveKind::Pdf => self.pdf,
            CurveKind::Acf => self.acf,
            CurveKind::Ccf => self.ccf,
            CurveKind::Kcf => self.kcf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Errors {
    pub reduced: ErrorRow,
    pub zero_order: ErrorRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Systems {
    pub full: Diagnostics,
    pub reduced: Diagnostics,
    pub zero_order: Diagnostics,
}

/// Smallest eigenvalues of the symmetric parts of `R*` and `L R* L^T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseEigenvalues {
    pub r_star: f64,
    pub projected: f64,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub calibration: f64,
    pub x_star: f64,
    pub closure: f64,
    pub statistics: f64,
    pub diagnostics: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeResult {
    pub id: String,
    pub spec: RegimeSpec,
    pub params: ModelParams,
    pub x_star: SlowState,
    pub closure: Provenance,
    pub eigenvalues: ResponseEigenvalues,
    pub systems: Systems,
    pub errors: Errors,
    /// Largest sup-norm gap between the full-model autocorrelation of any
    /// index and that of index 0.
    pub index_acf_spread: f64,
    /// Full-model autocorrelation per slow index.
    #[serde(skip)]
    pub index_acf: Vec<LagCurve>,
    /// Kept out of `summary.json` so that it is reproducible.
    #[serde(skip)]
    pub timings: Timings,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, center: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| center.get(i).copied().unwrap_or(0.0) + rng.random_range(-0.5..=0.5))
        .collect()
}

/// Rescaling constants for both forcings, from the regime or by calibration.
pub fn calibrate_regime(spec: &RegimeSpec) -> Result<RescalePair> {
    if let Some(r) = spec.rescale {
        return Ok(r);
    }
    let x = calibrate(spec.model.f_x, &spec.calibration.plan(spec.stage_seed(Stage::CalibrateSlow)))
        .map_err(|e| e.in_stage("calibration of F_x"))?;
    let y = calibrate(spec.model.f_y, &spec.calibration.plan(spec.stage_seed(Stage::CalibrateFast)))
        .map_err(|e| e.in_stage("calibration of F_y"))?;
    Ok(RescalePair { x, y })
}

/// Runs the full two-scale model and returns its slow-variable series.
fn full_slow_series(p: &ModelParams, spec: &RegimeSpec, duration: f64, stage: Stage) -> Result<SampleSeries> {
    let sys = TwoScaleSystem::new(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.stage_seed(stage));
    let s0 = uniform(&mut rng, sys.dim(), &[]);
    let plan = spec.plans.full.plan(duration, spec.stage_seed(stage));
    let mut series = SampleSeries::new(p.n_x, plan.dt_sample(), plan.spin_up_steps() as f64 * plan.dt);
    integrate_with(&sys, &s0, &plan, |_, s| series.push(&s[..p.n_x]))?;
    Ok(series)
}

/// The slow state the closure is expanded around.
///
/// In full-model-mean mode the time mean is also pooled over the slow
/// indices, which are statistically equivalent.
pub fn estimate_x_star(spec: &RegimeSpec, p: &ModelParams) -> Result<SlowState> {
    match &spec.x_star_mode {
        XStarMode::Zero => Ok(SlowState(vec![0.0; p.n_x])),
        XStarMode::FullModelMean { duration } => {
            let sys = TwoScaleSystem::new(p)?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.stage_seed(Stage::XStar));
            let s0 = uniform(&mut rng, sys.dim(), &[]);
            let plan = spec.plans.full.plan(*duration, spec.stage_seed(Stage::XStar));
            let mut moments = PooledMoments::new();
            integrate_with(&sys, &s0, &plan, |_, s| moments.extend(&s[..p.n_x]))?;
            Ok(SlowState(vec![moments.mean(); p.n_x]))
        }
        XStarMode::File { path } => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let x: SlowState = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
            if x.0.len() != p.n_x {
                return Err(Error::Dimension(format!(
                    "x* in {} has length {}, expected {}",
                    path.display(),
                    x.0.len(),
                    p.n_x
                )));
            }
            Ok(x)
        }
    }
}

/// Streams the fast limiting dynamics at `x_star` into a closure.
pub fn fast_closure(spec: &RegimeSpec, p: &ModelParams, x_star: &SlowState) -> Result<ClosureData> {
    let sys = FastLimitingSystem::new(x_star, p)?;
    let seed = spec.stage_seed(Stage::Fast);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z0 = uniform(&mut rng, p.n_y(), &[]);
    let plan = spec.plans.fast.plan(spec.t_av + spec.t_corr, seed);
    let mut acc = LagIntegralAccumulator::new(p.n_y(), plan.dt_sample(), spec.t_corr, spec.lag_stride)?;
    integrate_with(&sys, &z0, &plan, |_, z| acc.push(z))?;
    let opts = ClosureOptions {
        t_corr: spec.t_corr,
        lag_stride: spec.lag_stride,
        regularization: spec.regularization,
        pooling: spec.pooling,
    };
    let mut closure = closure_from_integral(acc.finish()?, plan.dt_sample(), x_star, p, &opts)?;
    closure.provenance.dt = Some(plan.dt);
    closure.provenance.seed = Some(seed);
    Ok(closure)
}

/// Calibration, `x*` and the closure: everything up to the statistics runs.
pub fn build_regime_closure(spec: &RegimeSpec) -> Result<ClosureData> {
    spec.validate()?;
    let rescale = calibrate_regime(spec)?;
    let p = spec.model.with_rescale(&rescale);
    let x_star = estimate_x_star(spec, &p).map_err(|e| e.in_stage("x* estimate"))?;
    fast_closure(spec, &p, &x_star).map_err(|e| e.in_stage("closure"))
}

/// Runs the reduced model, or the zero-order model when `zero_order`.
pub fn reduced_series(spec: &RegimeSpec, closure: &ClosureData, zero_order: bool) -> Result<SampleSeries> {
    let p = &closure.params;
    let sys = ReducedSystem::from_closure(closure, p, zero_order)?;
    let stage = if zero_order { Stage::ZeroOrder } else { Stage::Reduced };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.stage_seed(stage));
    let x0 = uniform(&mut rng, p.n_x, &closure.x_star.0);
    let plan = spec.plans.reduced.plan(spec.t_stats, spec.stage_seed(stage));
    let mut series = SampleSeries::new(p.n_x, plan.dt_sample(), plan.spin_up_steps() as f64 * plan.dt);
    integrate_with(&sys, &x0, &plan, |_, s| series.push(s))?;
    Ok(series)
}

fn seconds_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs every stage of one regime and, if `out_dir` is given, persists
/// `out_dir/<id>/{closure.json, summary.json, timings.json, curves/*.csv}`.
pub fn run_regime(spec: &RegimeSpec, out_dir: Option<&Path>) -> Result<RegimeResult> {
    spec.validate()?;
    let mut timings = Timings::default();

    let t = Instant::now();
    let rescale = calibrate_regime(spec)?;
    let p = spec.model.with_rescale(&rescale);
    timings.calibration = seconds_since(t);

    let t = Instant::now();
    let x_star = estimate_x_star(spec, &p).map_err(|e| e.in_stage("x* estimate"))?;
    timings.x_star = seconds_since(t);

    let t = Instant::now();
    let closure = fast_closure(spec, &p, &x_star).map_err(|e| e.in_stage("closure"))?;
    timings.closure = seconds_since(t);

    let t = Instant::now();
    let (full, (reduced, zero_order)) = rayon::join(
        || full_slow_series(&p, spec, spec.t_stats, Stage::Full).map_err(|e| e.in_stage("full model")),
        || {
            rayon::join(
                || reduced_series(spec, &closure, false).map_err(|e| e.in_stage("reduced model")),
                || reduced_series(spec, &closure, true).map_err(|e| e.in_stage("zero-order model")),
            )
        },
    );
    let (full, reduced, zero_order) = (full?, reduced?, zero_order?);
    timings.statistics = seconds_since(t);

    let t = Instant::now();
    let diag = |s: &SampleSeries, name: &'static str| Diagnostics::compute(s, &spec.stats).map_err(|e| e.in_stage(name));
    let systems = Systems {
        full: diag(&full, "full-model diagnostics")?,
        reduced: diag(&reduced, "reduced-model diagnostics")?,
        zero_order: diag(&zero_order, "zero-order diagnostics")?,
    };
    let errors = Errors {
        reduced: systems.reduced.errors_against(&systems.full)?,
        zero_order: systems.zero_order.errors_against(&systems.full)?,
    };
    let index_acf = (0..p.n_x)
        .map(|i| index_autocorrelation(&full, i, spec.stats.max_lag))
        .collect::<Result<Vec<_>>>()?;
    let mut index_acf_spread = 0.0f64;
    for c in &index_acf[1..] {
        index_acf_spread = index_acf_spread.max(c.sup_distance(&index_acf[0])?);
    }
    timings.diagnostics = seconds_since(t);

    let (r_star, projected) = closure.min_symmetric_eigenvalues();
    let result = RegimeResult {
        id: spec.id(),
        spec: spec.clone(),
        params: p,
        x_star,
        closure: closure.provenance.clone(),
        eigenvalues: ResponseEigenvalues { r_star, projected },
        systems,
        errors,
        index_acf_spread,
        index_acf,
        timings,
    };
    if let Some(dir) = out_dir {
        persist(&result, &closure, dir).map_err(|e| e.in_stage("persistence"))?;
    }
    Ok(result)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes one regime's artifacts below `out_dir/<id>/`.
pub fn persist(result: &RegimeResult, closure: &ClosureData, out_dir: &Path) -> Result<()> {
    let dir = out_dir.join(&result.id);
    let curves = dir.join("curves");
    fs::create_dir_all(&curves).map_err(|e| Error::io(&curves, e))?;
    closure.save(&dir.join("closure.json"))?;
    write_json(&dir.join("summary.json"), result)?;
    write_json(&dir.join("timings.json"), &result.timings)?;
    for (variant, d) in [
        ("full", &result.systems.full),
        ("reduced", &result.systems.reduced),
        ("zero-order", &result.systems.zero_order),
    ] {
        for kind in CurveKind::ALL {
            let (x, v) = match kind {
                CurveKind::Pdf => (d.pdf.centers(), &d.pdf.density),
                CurveKind::Acf => (d.acf.lags(), &d.acf.values),
                CurveKind::Ccf => (d.ccf.lags(), &d.ccf.values),
                CurveKind::Kcf => (d.kcf.lags(), &d.kcf.values),
            };
            let path = curves.join(format!("{}_{variant}.csv", kind.name()));
            write_curve_csv(&path, kind, &result.id, variant, &x, v)?;
        }
    }
    for (i, c) in result.index_acf.iter().enumerate() {
        let path = curves.join(format!("acf_full_x{i}.csv"));
        write_curve_csv(&path, CurveKind::Acf, &result.id, &format!("full-x{i}"), &c.lags(), &c.values)?;
    }
    Ok(())
}

/// Reads `summary.json` written by [`persist`].
pub fn load_summary(path: &Path) -> Result<RegimeResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
