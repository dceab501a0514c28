//! End-to-end wiring used by the CLI: prepare splits, train, evaluate,
//! calibrate, and run parametric sweeps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate_ensemble, CalibrationReport};
use crate::config::RunConfig;
use crate::ensemble::{train_ensemble, DeepEnsemble, EnsembleOptions};
use crate::error::{invalid, Result};
use crate::metrics::{column, evaluate, reliability, MetricsReport, ReliabilityCurve};
use crate::series::{
    chrono_split, fit_minmax, normalize, pressure_to_height, slice_windows, NormParams, TimeSeries,
    Unit, WindowedDataset,
};
use crate::train::TrainReport;

/// Normalized train / validation / test windows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
    pub norm: NormParams,
    pub unit: Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(invalid(format!("unknown split '{other}'"))),
        }
    }
}

impl Prepared {
    pub fn split(&self, which: Split) -> &WindowedDataset {
        match which {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Applies the optional pressure conversion.
pub fn to_working_unit(series: &TimeSeries, cfg: &RunConfig) -> Result<TimeSeries> {
    if cfg.convert_pressure && series.unit() == Unit::Mbar {
        pressure_to_height(series, cfg.rho, cfg.g)
    } else {
        Ok(series.clone())
    }
}

/// Splits chronologically, fits min-max on the training segment only, and
/// slices every segment. With `norm` given, that normalization is reused.
pub fn prepare(series: &TimeSeries, cfg: &RunConfig, norm: Option<NormParams>) -> Result<Prepared> {
    let series = to_working_unit(series, cfg)?;
    let (train, val, test) = chrono_split(&series, cfg.split)?;
    let norm = match norm {
        Some(n) => n,
        None => fit_minmax(&train)?,
    };
    let cut = |s: &TimeSeries| -> Result<WindowedDataset> {
        Ok(slice_windows(&normalize(s, &norm)?, cfg.slice)?.with_norm(norm))
    };
    Ok(Prepared {
        train: cut(&train)?,
        val: cut(&val)?,
        test: cut(&test)?,
        norm,
        unit: series.unit(),
    })
}

pub fn fit(prepared: &Prepared, cfg: &RunConfig) -> Result<(DeepEnsemble, Vec<TrainReport>)> {
    cfg.validate()?;
    train_ensemble(
        &prepared.train,
        &prepared.val,
        &cfg.arch(),
        &cfg.train,
        EnsembleOptions {
            models: cfg.models,
            base_seed: cfg.base_seed,
            jobs: cfg.jobs,
            unit: prepared.unit,
        },
    )
}

/// Metrics plus the pooled and per-index reliability curves.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub curve: ReliabilityCurve,
    pub index_curves: Vec<(usize, ReliabilityCurve)>,
}

pub fn evaluate_dataset(
    ensemble: &DeepEnsemble,
    data: &WindowedDataset,
    levels: &[f64],
    calibrated: bool,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(invalid("evaluation split is empty"));
    }
    let pred = ensemble.predict_dataset(data, calibrated)?;
    let y = ensemble.physical_targets(data);
    let m = pred.interval;
    let report = evaluate(&pred.mu, &pred.var, &y, m, levels, ensemble.unit)?;
    let curve = reliability(&pred.mu, &pred.var, &y, levels)?;
    let index_curves = report
        .per_index
        .iter()
        .map(|ix| {
            let k = ix.index - 1;
            reliability(
                &column(&pred.mu, m, k),
                &column(&pred.var, m, k),
                &column(&y, m, k),
                levels,
            )
            .map(|c| (ix.index, c))
        })
        .collect::<Result<_>>()?;
    Ok(Evaluation {
        report,
        curve,
        index_curves,
    })
}

pub fn calibrate(
    ensemble: &mut DeepEnsemble,
    prepared: &Prepared,
    cfg: &RunConfig,
) -> Result<CalibrationReport> {
    calibrate_ensemble(
        ensemble,
        &prepared.val,
        Some(&prepared.test),
        cfg.calibration,
        &cfg.ci_levels,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Window,
    Interval,
    Models,
    PredLength,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Window => "window",
            SweepParam::Interval => "interval",
            SweepParam::Models => "models",
            SweepParam::PredLength => "predlength",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "window" => Ok(SweepParam::Window),
            "interval" => Ok(SweepParam::Interval),
            "models" => Ok(SweepParam::Models),
            "predlength" | "prediction-length" => Ok(SweepParam::PredLength),
            other => Err(invalid(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

/// Parses `"100,200,300"`, `"2..10"` (inclusive) or a mix of both.
pub fn parse_values(text: &str) -> Result<Vec<usize>> {
    let bad = || invalid(format!("cannot parse sweep values '{text}'"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(bad());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: usize,
    pub rmse: f64,
    pub mape: Option<f64>,
    pub r2: f64,
    pub auce: f64,
    pub auce_calibrated: f64,
    pub s: f64,
    pub train_time_s: f64,
}

fn sweep_point(
    series: &TimeSeries,
    cfg: &RunConfig,
) -> Result<(Evaluation, CalibrationReport, f64)> {
    let prepared = prepare(series, cfg, None)?;
    let (mut ens, reports) = fit(&prepared, cfg)?;
    let time: f64 = reports.iter().map(|r| r.wall_clock_secs).sum();
    let eval = evaluate_dataset(&ens, &prepared.test, &cfg.ci_levels, false)?;
    let cal = calibrate(&mut ens, &prepared, cfg)?;
    Ok((eval, cal, time))
}

/// Re-trains for every value of `param` (prediction length instead slices one
/// trained model) and scores each point on the test split.
pub fn sweep(
    series: &TimeSeries,
    base: &RunConfig,
    param: SweepParam,
    values: &[usize],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len());
    if param == SweepParam::PredLength {
        if let Some(&v) = values.iter().find(|&&v| v > base.slice.interval) {
            return Err(invalid(format!(
                "prediction length {v} exceeds interval {}",
                base.slice.interval
            )));
        }
        let prepared = prepare(series, base, None)?;
        let (mut ens, reports) = fit(&prepared, base)?;
        let time: f64 = reports.iter().map(|r| r.wall_clock_secs).sum();
        let pred = ens.predict_dataset(&prepared.test, false)?;
        let y = ens.physical_targets(&prepared.test);
        let cal = calibrate(&mut ens, &prepared, base)?;
        let m = pred.interval;
        for &v in values {
            let (mu, var, yc) = (
                column(&pred.mu, m, v - 1),
                column(&pred.var, m, v - 1),
                column(&y, m, v - 1),
            );
            let rep = evaluate(&mu, &var, &yc, 1, &base.ci_levels, ens.unit)?;
            let scaled: Vec<f64> = var.iter().map(|x| x * cal.s * cal.s).collect();
            let after = crate::metrics::auce(&reliability(&mu, &scaled, &yc, &base.ci_levels)?);
            rows.push(SweepRow {
                param,
                value: v,
                rmse: rep.rmse,
                mape: rep.mape,
                r2: rep.r2,
                auce: rep.auce,
                auce_calibrated: after,
                s: cal.s,
                train_time_s: time,
            });
        }
        return Ok(rows);
    }
    for &v in values {
        let mut cfg = base.clone();
        match param {
            SweepParam::Window => cfg.slice.window = v,
            SweepParam::Interval => cfg.slice.interval = v,
            SweepParam::Models => cfg.models = v,
            SweepParam::PredLength => unreachable!(),
        }
        cfg.validate()?;
        let (eval, cal, time) = sweep_point(series, &cfg)?;
        rows.push(SweepRow {
            param,
            value: v,
            rmse: eval.report.rmse,
            mape: eval.report.mape,
            r2: eval.report.r2,
            auce: eval.report.auce,
            auce_calibrated: cal.test.as_ref().map_or(cal.auce_after, |t| t.auce_after),
            s: cal.s,
            train_time_s: time,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "param",
        "value",
        "rmse",
        "mape",
        "r2",
        "auce",
        "auce_calibrated",
        "s",
        "train_time_s",
    ])?;
    for r in rows {
        wtr.write_record([
            r.param.as_str().to_string(),
            r.value.to_string(),
            r.rmse.to_string(),
            r.mape.map_or(String::new(), |v| v.to_string()),
            r.r2.to_string(),
            r.auce.to_string(),
            r.auce_calibrated.to_string(),
            r.s.to_string(),
            format!("{:.3}", r.train_time_s),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
