//! STD scaling: one positive factor `s` multiplies every predictive standard
//! deviation. It is fitted by minimizing Gaussian NLL on a held-out split.

use serde::{Deserialize, Serialize};

use crate::ensemble::{DeepEnsemble, Predictions, ProbForecast};
use crate::error::{invalid, shape, Result};
use crate::metrics::{auce, reliability, ReliabilityCurve};
use crate::series::WindowedDataset;
use crate::train::nll;

pub const S_MIN: f64 = 1e-3;
pub const S_MAX: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScaleMethod {
    /// `s = √mean((y−μ)²/σ²)`, the exact NLL minimizer.
    #[default]
    ClosedForm,
    /// Best of a log-spaced candidate grid.
    GridSearch,
}

impl std::str::FromStr for ScaleMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closedForm" | "closed-form" | "closed" => Ok(ScaleMethod::ClosedForm),
            "gridSearch" | "grid-search" | "grid" => Ok(ScaleMethod::GridSearch),
            other => Err(invalid(format!("unknown calibration method '{other}'"))),
        }
    }
}

/// Log-spaced candidate factors for [`ScaleMethod::GridSearch`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for ScaleGrid {
    fn default() -> Self {
        Self {
            lo: 0.25,
            hi: 4.0,
            points: 60,
        }
    }
}

impl ScaleGrid {
    pub fn candidates(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let n = self.points.max(2);
        (0..n)
            .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
            .collect()
    }

    /// Spacing between neighbouring candidates in log space.
    pub fn log_step(&self) -> f64 {
        (self.hi.ln() - self.lo.ln()) / (self.points.max(2) - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFit {
    pub s: f64,
    /// The raw optimum fell outside `[S_MIN, S_MAX]` and was clamped.
    pub degenerate: bool,
}

fn check_inputs(mu: &[f64], var: &[f64], y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(invalid("cannot fit a scaling factor on empty input"));
    }
    if mu.len() != y.len() || var.len() != y.len() {
        return Err(shape("mu, var and y lengths differ"));
    }
    if var.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("variances must be positive"));
    }
    Ok(())
}

/// NLL after multiplying every standard deviation by `s`.
pub fn scaled_nll(mu: &[f64], var: &[f64], y: &[f64], s: f64) -> Result<f64> {
    let scaled: Vec<f64> = var.iter().map(|v| v * s * s).collect();
    nll(mu, &scaled, y)
}

pub fn fit_std_scale(mu: &[f64], var: &[f64], y: &[f64], method: ScaleMethod) -> Result<ScaleFit> {
    fit_std_scale_with(mu, var, y, method, &ScaleGrid::default())
}

pub fn fit_std_scale_with(
    mu: &[f64],
    var: &[f64],
    y: &[f64],
    method: ScaleMethod,
    grid: &ScaleGrid,
) -> Result<ScaleFit> {
    check_inputs(mu, var, y)?;
    let raw = match method {
        ScaleMethod::ClosedForm => {
            let mean_z2 = y
                .iter()
                .zip(mu)
                .zip(var)
                .map(|((t, m), v)| (t - m) * (t - m) / v)
                .sum::<f64>()
                / y.len() as f64;
            mean_z2.sqrt()
        }
        ScaleMethod::GridSearch => {
            // s = 1 is always a candidate so the fit never raises NLL.
            let mut best = (scaled_nll(mu, var, y, 1.0)?, 1.0);
            for s in grid.candidates() {
                let v = scaled_nll(mu, var, y, s)?;
                if v < best.0 {
                    best = (v, s);
                }
            }
            best.1
        }
    };
    if !raw.is_finite() {
        return Err(crate::Error::NonFinite(format!("scaling factor {raw}")));
    }
    let s = raw.clamp(S_MIN, S_MAX);
    let degenerate = s != raw;
    if degenerate {
        log::warn!("degenerate STD-scaling fit: s = {raw} clamped to {s}");
    }
    Ok(ScaleFit { s, degenerate })
}

/// `var' = s²·var`; the mean is untouched.
pub fn apply_scale(forecast: &ProbForecast, s: f64) -> Result<ProbForecast> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("scaling factor must be positive, got {s}")));
    }
    Ok(ProbForecast {
        mu: forecast.mu.clone(),
        var: forecast.var.iter().map(|v| v * s * s).collect(),
        unit: forecast.unit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScores {
    pub auce_before: f64,
    pub auce_after: f64,
    pub nll_before: f64,
    pub nll_after: f64,
}

impl SplitScores {
    /// Fractional AUCE reduction (`0.5` = halved).
    pub fn auce_reduction(&self) -> f64 {
        (self.auce_before - self.auce_after) / self.auce_before
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub s: f64,
    pub method: ScaleMethod,
    pub degenerate: bool,
    pub auce_before: f64,
    pub auce_after: f64,
    pub nll_before: f64,
    pub nll_after: f64,
    /// Same scores on the test split, when one was supplied.
    pub test: Option<SplitScores>,
    #[serde(skip)]
    pub curve_before: Option<ReliabilityCurve>,
    #[serde(skip)]
    pub curve_after: Option<ReliabilityCurve>,
}

/// Scores predictions before and after scaling by `s`.
pub fn score_split(
    pred: &Predictions,
    y: &[f64],
    s: f64,
    levels: &[f64],
) -> Result<(SplitScores, ReliabilityCurve, ReliabilityCurve)> {
    let after = pred.scaled(s);
    let before_curve = reliability(&pred.mu, &pred.var, y, levels)?;
    let after_curve = reliability(&after.mu, &after.var, y, levels)?;
    Ok((
        SplitScores {
            auce_before: auce(&before_curve),
            auce_after: auce(&after_curve),
            nll_before: nll(&pred.mu, &pred.var, y)?,
            nll_after: nll(&after.mu, &after.var, y)?,
        },
        before_curve,
        after_curve,
    ))
}

/// Fits `s` on the validation split, stores it on the ensemble and scores
/// both the validation and (optionally) test splits.
pub fn calibrate_ensemble(
    ensemble: &mut DeepEnsemble,
    val: &WindowedDataset,
    test: Option<&WindowedDataset>,
    method: ScaleMethod,
    levels: &[f64],
) -> Result<CalibrationReport> {
    let pred = ensemble.predict_dataset(val, false)?;
    let y = ensemble.physical_targets(val);
    let fit = fit_std_scale(&pred.mu, &pred.var, &y, method)?;
    if let Some(prev) = ensemble.calib {
        log::warn!("replacing existing scaling factor {prev} with {}", fit.s);
    }
    let (val_scores, before, after) = score_split(&pred, &y, fit.s, levels)?;
    let test_scores = match test {
        Some(t) => {
            let tp = ensemble.predict_dataset(t, false)?;
            let ty = ensemble.physical_targets(t);
            Some(score_split(&tp, &ty, fit.s, levels)?.0)
        }
        None => None,
    };
    ensemble.set_calibration(fit.s)?;
    Ok(CalibrationReport {
        s: fit.s,
        method,
        degenerate: fit.degenerate,
        auce_before: val_scores.auce_before,
        auce_after: val_scores.auce_after,
        nll_before: val_scores.nll_before,
        nll_after: val_scores.nll_after,
        test: test_scores,
        curve_before: Some(before),
        curve_after: Some(after),
    })
}
