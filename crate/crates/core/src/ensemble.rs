//! Deep ensemble of independently initialized members whose Gaussian
//! outputs are combined as an equal-weight mixture.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::lstm::{Arch, Member};
use crate::metrics::normal_quantile;
use crate::series::{NormParams, Unit, WindowedDataset};
use crate::train::{train_member, TrainConfig, TrainReport};

/// A Gaussian per output step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbForecast {
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
    pub unit: Unit,
}

impl ProbForecast {
    pub fn std(&self) -> Vec<f64> {
        self.var.iter().map(|v| v.sqrt()).collect()
    }

    /// Central interval bounds at `level` (e.g. 0.95).
    pub fn interval(&self, level: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let z = normal_quantile((1.0 + level) / 2.0)?;
        Ok(self
            .mu
            .iter()
            .zip(&self.var)
            .map(|(m, v)| (m - z * v.sqrt(), m + z * v.sqrt()))
            .unzip())
    }

    /// `step,mu,var,ci95_lo,ci95_hi`, steps 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let (lo, hi) = self.interval(0.95)?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["step", "mu", "var", "ci95_lo", "ci95_hi"])?;
        for j in 0..self.mu.len() {
            wtr.write_record([
                (j + 1).to_string(),
                self.mu[j].to_string(),
                self.var[j].to_string(),
                lo[j].to_string(),
                hi[j].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Mixture moments: `μ̂ = mean μ_i`, `σ̂² = mean(σ²_i + μ²_i) − μ̂²`.
///
/// Members are summed in the given order.
pub fn aggregate(member_mus: &[Vec<f64>], member_vars: &[Vec<f64>]) -> Result<ProbForecast> {
    aggregate_rows(
        &member_mus.iter().map(Vec::as_slice).collect::<Vec<_>>(),
        &member_vars.iter().map(Vec::as_slice).collect::<Vec<_>>(),
    )
}

fn aggregate_rows(mus: &[&[f64]], vars: &[&[f64]]) -> Result<ProbForecast> {
    if mus.is_empty() {
        return Err(invalid("cannot aggregate an empty ensemble"));
    }
    let m = mus[0].len();
    if vars.len() != mus.len() || mus.iter().chain(vars).any(|r| r.len() != m) {
        return Err(shape("member outputs have inconsistent shapes"));
    }
    if vars.iter().flat_map(|r| r.iter()).any(|v| !(*v > 0.0)) {
        return Err(invalid("member variances must be positive"));
    }
    let k = mus.len() as f64;
    let mut mu = vec![0.0; m];
    let mut second = vec![0.0; m];
    for (row_mu, row_var) in mus.iter().zip(vars) {
        for j in 0..m {
            mu[j] += row_mu[j];
            second[j] += row_var[j] + row_mu[j] * row_mu[j];
        }
    }
    let mut var = vec![0.0; m];
    for j in 0..m {
        mu[j] /= k;
        var[j] = second[j] / k - mu[j] * mu[j];
    }
    Ok(ProbForecast {
        mu,
        var,
        unit: Unit::Normalized,
    })
}

/// Row-major `n × interval` predictions over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub interval: usize,
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
    pub unit: Unit,
}

impl Predictions {
    pub fn len(&self) -> usize {
        self.mu.len() / self.interval
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Multiplies every standard deviation by `s`.
    pub fn scaled(&self, s: f64) -> Predictions {
        let s2 = s * s;
        Predictions {
            var: self.var.iter().map(|v| v * s2).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepEnsemble {
    pub arch: Arch,
    pub members: Vec<Member>,
    pub seeds: Vec<u64>,
    pub norm: NormParams,
    /// Unit of the raw (denormalized) signal.
    pub unit: Unit,
    /// STD scaling factor, when fitted.
    pub calib: Option<f64>,
}

impl DeepEnsemble {
    pub fn new(
        arch: Arch,
        members: Vec<Member>,
        seeds: Vec<u64>,
        norm: NormParams,
        unit: Unit,
    ) -> Result<Self> {
        arch.validate()?;
        if members.is_empty() {
            return Err(invalid("an ensemble needs at least one member"));
        }
        if seeds.len() != members.len() {
            return Err(shape("one seed per member expected"));
        }
        for m in &members {
            m.check(&arch)?;
        }
        NormParams::new(norm.min, norm.max)?;
        Ok(Self {
            arch,
            members,
            seeds,
            norm,
            unit,
            calib: None,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn set_calibration(&mut self, s: f64) -> Result<()> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid(format!("scaling factor must be positive, got {s}")));
        }
        self.calib = Some(s);
        Ok(())
    }

    /// Mixture forecast in normalized units for an already-normalized window.
    pub fn predict_normalized(&self, x: &[f64]) -> Result<ProbForecast> {
        if x.len() != self.arch.window {
            return Err(shape(format!(
                "input window has {} values, expected {}",
                x.len(),
                self.arch.window
            )));
        }
        let mut mus = Vec::with_capacity(self.len());
        let mut vars = Vec::with_capacity(self.len());
        for m in &self.members {
            let tr = m.forward(x, self.arch.var_floor)?;
            mus.push(tr.mu);
            vars.push(tr.var);
        }
        aggregate(&mus, &vars)
    }

    fn to_physical(&self, mut f: ProbForecast, scale: Option<f64>) -> ProbForecast {
        let range = self.norm.range();
        let k = range * range * scale.map_or(1.0, |s| s * s);
        f.mu.iter_mut().for_each(|m| *m = self.norm.invert(*m));
        f.var.iter_mut().for_each(|v| *v *= k);
        f.unit = self.unit;
        f
    }

    fn scale_for(&self, apply_calibration: bool) -> Result<Option<f64>> {
        match (apply_calibration, self.calib) {
            (false, _) => Ok(None),
            (true, Some(s)) => Ok(Some(s)),
            (true, None) => Err(Error::MissingCalibration),
        }
    }

    /// Forecast for a raw window in the signal's original unit.
    pub fn predict(&self, x_raw: &[f64], apply_calibration: bool) -> Result<ProbForecast> {
        let scale = self.scale_for(apply_calibration)?;
        let x: Vec<f64> = x_raw.iter().map(|&v| self.norm.apply(v)).collect();
        Ok(self.to_physical(self.predict_normalized(&x)?, scale))
    }

    /// Predicts every window of a normalized dataset, in physical units.
    pub fn predict_dataset(
        &self,
        data: &WindowedDataset,
        apply_calibration: bool,
    ) -> Result<Predictions> {
        let spec = data.spec();
        if spec.window != self.arch.window || spec.interval != self.arch.interval {
            return Err(shape(
                "dataset windows do not match the ensemble architecture",
            ));
        }
        let scale = self.scale_for(apply_calibration)?;
        let m = self.arch.interval;
        let mut out = Predictions {
            interval: m,
            mu: Vec::with_capacity(data.len() * m),
            var: Vec::with_capacity(data.len() * m),
            unit: self.unit,
        };
        for s in 0..data.len() {
            let f = self.to_physical(self.predict_normalized(data.input(s))?, scale);
            out.mu.extend(f.mu);
            out.var.extend(f.var);
        }
        Ok(out)
    }

    /// Dataset targets mapped back to physical units.
    pub fn physical_targets(&self, data: &WindowedDataset) -> Vec<f64> {
        data.targets()
            .iter()
            .map(|&v| self.norm.invert(v))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub models: usize,
    pub base_seed: u64,
    /// Members trained concurrently. Results do not depend on it.
    pub jobs: usize,
    /// Unit of the raw signal the datasets were normalized from.
    pub unit: Unit,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            models: 5,
            base_seed: 0,
            jobs: 1,
            unit: Unit::Meter,
        }
    }
}

/// Trains the members on identical data; member `i` uses seed `base_seed + i`.
pub fn train_ensemble(
    train: &WindowedDataset,
    val: &WindowedDataset,
    arch: &Arch,
    config: &TrainConfig,
    opts: EnsembleOptions,
) -> Result<(DeepEnsemble, Vec<TrainReport>)> {
    let EnsembleOptions {
        models,
        base_seed,
        jobs,
        unit,
    } = opts;
    if models == 0 {
        return Err(invalid("ensemble size must be >= 1"));
    }
    let norm = train
        .norm()
        .ok_or_else(|| invalid("training dataset carries no normalization parameters"))?;
    let seeds: Vec<u64> = (0..models as u64)
        .map(|i| base_seed.wrapping_add(i))
        .collect();
    let run = |(i, seed): (usize, u64)| {
        let cfg = TrainConfig {
            seed,
            ..config.clone()
        };
        train_member(train, val, arch, &cfg).map_err(|e| Error::Member {
            member: i,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<(Member, TrainReport)>> = if jobs <= 1 {
        seeds.iter().copied().enumerate().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
        pool.install(|| seeds.par_iter().copied().enumerate().map(run).collect())
    };
    let mut members = Vec::with_capacity(models);
    let mut reports = Vec::with_capacity(models);
    for r in results {
        let (m, rep) = r?;
        members.push(m);
        reports.push(rep);
    }
    Ok((
        DeepEnsemble::new(*arch, members, seeds, norm, unit)?,
        reports,
    ))
}
