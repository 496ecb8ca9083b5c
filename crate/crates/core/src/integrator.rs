//! Fixed-step classical Runge-Kutta integration with spin-up and uniform
//! sampling.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An autonomous vector field `ds/dt = f(s)`.
pub trait VectorField {
    fn eval(&self, state: &[f64], out: &mut [f64]);
}

impl<F> VectorField for F
where
    F: Fn(&[f64], &mut [f64]),
{
    fn eval(&self, state: &[f64], out: &mut [f64]) {
        self(state, out)
    }
}

/// Reusable RK4 workspace for one state dimension.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            stage: vec![0.0; dim],
        }
    }

    /// Advances `state` by one step of size `dt` in place. `t` is the time
    /// at the start of the step and only labels a blow-up error.
    pub fn step<F: VectorField + ?Sized>(&mut self, f: &F, state: &mut [f64], t: f64, dt: f64) -> Result<()> {
        let half = 0.5 * dt;
        f.eval(state, &mut self.k1);
        for ((s, &y), &k) in self.stage.iter_mut().zip(state.iter()).zip(&self.k1) {
            *s = y + half * k;
        }
        f.eval(&self.stage, &mut self.k2);
        for ((s, &y), &k) in self.stage.iter_mut().zip(state.iter()).zip(&self.k2) {
            *s = y + half * k;
        }
        f.eval(&self.stage, &mut self.k3);
        for ((s, &y), &k) in self.stage.iter_mut().zip(state.iter()).zip(&self.k3) {
            *s = y + dt * k;
        }
        f.eval(&self.stage, &mut self.k4);
        let sixth = dt / 6.0;
        let mut finite = true;
        for ((((y, &a), &b), &c), &d) in state
            .iter_mut()
            .zip(&self.k1)
            .zip(&self.k2)
            .zip(&self.k3)
            .zip(&self.k4)
        {
            *y += sixth * (a + 2.0 * b + 2.0 * c + d);
            finite &= y.is_finite();
        }
        if finite {
            Ok(())
        } else {
            Err(Error::BlowUp { time: t + dt })
        }
    }
}

/// One RK4 step from `s`, returning the new state.
pub fn rk4_step<F: VectorField + ?Sized>(rhs: &F, s: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidPlan(format!("dt = {dt} must be > 0")));
    }
    let mut out = s.to_vec();
    Rk4::new(s.len()).step(rhs, &mut out, 0.0, dt)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationPlan {
    pub dt: f64,
    pub spin_up: f64,
    pub duration: f64,
    pub sample_every: usize,
    pub seed: u64,
}

impl IntegrationPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidPlan(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.spin_up >= 0.0) || !(self.duration >= 0.0) {
            return Err(Error::InvalidPlan("spin_up and duration must be >= 0".into()));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidPlan("sample_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn dt_sample(&self) -> f64 {
        self.dt * self.sample_every as f64
    }

    pub fn spin_up_steps(&self) -> u64 {
        steps_in(self.spin_up, self.dt)
    }

    /// `floor(duration / dt_sample) + 1`, or zero for an empty window.
    pub fn sample_count(&self) -> usize {
        if self.duration == 0.0 {
            0
        } else {
            steps_in(self.duration, self.dt_sample()) as usize + 1
        }
    }
}

/// Whole steps of size `h` in `span`, tolerant of representation error in
/// the ratio (e.g. `1.0 / 0.01`).
fn steps_in(span: f64, h: f64) -> u64 {
    (span / h + 1e-9).floor() as u64
}

/// A uniformly sampled trajectory, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    pub dt_sample: f64,
    pub t_start: f64,
    dim: usize,
    data: Vec<f64>,
}

impl SampleSeries {
    pub fn new(dim: usize, dt_sample: f64, t_start: f64) -> Self {
        SampleSeries {
            dt_sample,
            t_start,
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows(dim: usize, dt_sample: f64, t_start: f64, data: Vec<f64>) -> Result<Self> {
        if !(dt_sample > 0.0) {
            return Err(Error::InvalidPlan(format!("dt_sample = {dt_sample} must be > 0")));
        }
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} values cannot be split into rows of {dim}",
                data.len()
            )));
        }
        Ok(SampleSeries {
            dt_sample,
            t_start,
            dim,
            data,
        })
    }

    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.dim, "sample dimension");
        self.data.extend_from_slice(sample);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt_sample
    }

    pub fn sample(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Time series of one component.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.dt_sample
    }

    /// Writes `# dim=..,dt_sample=..,t_start=..,count=..`, a `t,v0,v1,...`
    /// header, then one row per sample. Values use shortest round-trip
    /// formatting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(
            w,
            "# dim={},dt_sample={:?},t_start={:?},count={}",
            self.dim,
            self.dt_sample,
            self.t_start,
            self.len()
        )
        .map_err(io)?;
        let names: Vec<String> = (0..self.dim).map(|i| format!("v{i}")).collect();
        writeln!(w, "t,{}", names.join(",")).map_err(io)?;
        for (n, row) in self.rows().enumerate() {
            write!(w, "{:?}", self.time(n)).map_err(io)?;
            for v in row {
                write!(w, ",{v:?}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let bad = |m: &str| Error::format(path, m);
        let meta = lines
            .next()
            .ok_or_else(|| bad("missing metadata line"))?
            .map_err(|e| Error::io(path, e))?;
        let meta = meta.strip_prefix("# ").ok_or_else(|| bad("metadata line must start with '# '"))?;
        let mut dim = None;
        let mut dt_sample = None;
        let mut t_start = None;
        let mut count = None;
        for kv in meta.split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad("malformed metadata"))?;
            match k.trim() {
                "dim" => dim = v.parse::<usize>().ok(),
                "dt_sample" => dt_sample = v.parse::<f64>().ok(),
                "t_start" => t_start = v.parse::<f64>().ok(),
                "count" => count = v.parse::<usize>().ok(),
                _ => {}
            }
        }
        let (dim, dt_sample, t_start, count) = match (dim, dt_sample, t_start, count) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => return Err(bad("metadata must define dim, dt_sample, t_start and count")),
        };
        lines.next().ok_or_else(|| bad("missing column header"))?.map_err(|e| Error::io(path, e))?;
        let mut data = Vec::with_capacity(dim * count);
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            fields.next();
            let before = data.len();
            for f in fields {
                data.push(f.trim().parse::<f64>().map_err(|_| bad("unparsable value"))?);
            }
            if data.len() - before != dim {
                return Err(bad("row width does not match dim"));
            }
        }
        if data.len() != dim * count {
            return Err(bad("row count does not match metadata"));
        }
        SampleSeries::from_rows(dim, dt_sample, t_start, data)
    }
}

/// Integrates `rhs` from `s0`, discards the spin-up, and hands every
/// `sample_every`-th state to `observer(time, state)`. The first delivered
/// state is the one at the end of the spin-up. Returns the final state.
pub fn integrate_with<F, O>(rhs: &F, s0: &[f64], plan: &IntegrationPlan, mut observer: O) -> Result<Vec<f64>>
where
    F: VectorField + ?Sized,
    O: FnMut(f64, &[f64]),
{
    plan.validate()?;
    if !s0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteInitialState);
    }
    let mut state = s0.to_vec();
    let mut rk = Rk4::new(state.len());
    let mut step: u64 = 0;
    let time = |step: u64| step as f64 * plan.dt;
    for _ in 0..plan.spin_up_steps() {
        rk.step(rhs, &mut state, time(step), plan.dt)?;
        step += 1;
    }
    let count = plan.sample_count();
    for n in 0..count {
        if n > 0 {
            for _ in 0..plan.sample_every {
                rk.step(rhs, &mut state, time(step), plan.dt)?;
                step += 1;
            }
        }
        observer(time(step), &state);
    }
    Ok(state)
}

/// Collects the sampled trajectory in memory.
pub fn integrate_sampled<F: VectorField + ?Sized>(rhs: &F, s0: &[f64], plan: &IntegrationPlan) -> Result<SampleSeries> {
    plan.validate()?;
    let mut series = SampleSeries::new(s0.len(), plan.dt_sample(), plan.spin_up_steps() as f64 * plan.dt);
    series.data.reserve(plan.sample_count() * s0.len());
    integrate_with(rhs, s0, plan, |_, s| series.push(s))?;
    Ok(series)
}
