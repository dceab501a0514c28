//! Point-accuracy metrics (RMSE, MAPE, R²) and uncertainty-quality metrics
//! (reliability curve, AUCE).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
use crate::series::Unit;

/// Smallest `|y|` MAPE accepts, in the metric's input units.
pub const MAPE_EPS: f64 = 1e-8;

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(invalid("metric inputs must not be empty"));
    }
    if y.len() != yhat.len() {
        return Err(shape(format!(
            "lengths differ: {} vs {}",
            y.len(),
            yhat.len()
        )));
    }
    Ok(())
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// Mean absolute percentage error as a fraction (multiply by 100 for %).
pub fn mape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if let Some(i) = y.iter().position(|v| v.abs() <= MAPE_EPS) {
        return Err(invalid(format!(
            "MAPE undefined: |y[{i}]| = {} is below {MAPE_EPS}",
            y[i].abs()
        )));
    }
    let s: f64 = y.iter().zip(yhat).map(|(a, b)| ((a - b) / a).abs()).sum();
    Ok(s / y.len() as f64)
}

pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if y.len() < 2 {
        return Err(invalid("R² needs at least two observations"));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(invalid("R² undefined for constant observations"));
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Inverse standard normal CDF (Wichura, AS 241), accurate to about 1e-16.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid(format!(
            "quantile level must lie in (0, 1), got {q}"
        )));
    }
    let d = q - 0.5;
    if d.abs() <= 0.425 {
        let r = 0.180625 - d * d;
        let num = ((((((r * 2509.0809287301227 + 33430.57558358813) * r + 67265.7709270087) * r
            + 45921.95393154987)
            * r
            + 13731.69376550946)
            * r
            + 1971.5909503065514)
            * r
            + 133.14166789178438)
            * r
            + 3.3871328727963665;
        let den = ((((((r * 5226.495278852546 + 28729.085735721943) * r + 39307.89580009271)
            * r
            + 21213.794301586597)
            * r
            + 5394.196021424751)
            * r
            + 687.1870074920579)
            * r
            + 42.31333070160091)
            * r
            + 1.0;
        return Ok(d * num / den);
    }
    let tail = if d < 0.0 { q } else { 1.0 - q };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((r * 7.745450142783414e-4 + 0.022723844989269184) * r
            + 0.2417807251774506)
            * r
            + 1.2704582524523684)
            * r
            + 3.6478483247632045)
            * r
            + 5.769497221460691)
            * r
            + 4.630337846156545)
            * r
            + 1.4234371107496835;
        let den = ((((((r * 1.0507500716444169e-9 + 5.475938084995345e-4) * r
            + 0.015198666563616457)
            * r
            + 0.14810397642748008)
            * r
            + 0.6897673349851)
            * r
            + 1.6763848301838038)
            * r
            + 2.053191626637759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((r * 2.0103343992922881e-7 + 2.7115555687434876e-5) * r
            + 0.0012426609473880784)
            * r
            + 0.026532189526576124)
            * r
            + 0.29656057182850487)
            * r
            + 1.7848265399172913)
            * r
            + 5.463784911164114)
            * r
            + 6.657904643501103;
        let den = ((((((r * 2.0442631033899397e-15 + 1.421511758316446e-7) * r
            + 1.8463183175100548e-5)
            * r
            + 7.868691311456133e-4)
            * r
            + 0.014875361290850615)
            * r
            + 0.1369298809227358)
            * r
            + 0.599832206555888)
            * r
            + 1.0;
        num / den
    };
    Ok(if d < 0.0 { -val } else { val })
}

/// Nominal central-interval levels against observed coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityCurve {
    pub p: Vec<f64>,
    pub p_hat: Vec<f64>,
}

impl ReliabilityCurve {
    pub fn new(p: Vec<f64>, p_hat: Vec<f64>) -> Result<Self> {
        if p.len() != p_hat.len() || p.is_empty() {
            return Err(shape(
                "reliability curve needs equal, non-empty p and p_hat",
            ));
        }
        check_levels(&p)?;
        Ok(Self { p, p_hat })
    }

    /// `p,p_hat`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["p", "p_hat"])?;
        for (p, q) in self.p.iter().zip(&self.p_hat) {
            wtr.write_record([p.to_string(), q.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `{0.01, 0.02, …, 0.99}`.
pub fn default_levels() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

fn check_levels(p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(invalid("CI levels must lie in (0, 1)"));
    }
    if p.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("CI levels must be strictly increasing"));
    }
    Ok(())
}

/// Observed coverage of the central Gaussian interval `μ ± z·σ`,
/// `z = Φ⁻¹((1+p)/2)`, for every level `p`.
pub fn reliability(mu: &[f64], var: &[f64], y: &[f64], levels: &[f64]) -> Result<ReliabilityCurve> {
    check_pair(y, mu)?;
    if var.len() != y.len() {
        return Err(shape("variance length differs from observations"));
    }
    if levels.is_empty() {
        return Err(invalid("no CI levels given"));
    }
    check_levels(levels)?;
    if var.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("variances must be positive"));
    }
    // |y-μ|/σ, sorted, so each level is a binary search.
    let mut scores: Vec<f64> = y
        .iter()
        .zip(mu)
        .zip(var)
        .map(|((t, m), v)| (t - m).abs() / v.sqrt())
        .collect();
    scores.sort_by(f64::total_cmp);
    let n = scores.len() as f64;
    let mut p_hat = Vec::with_capacity(levels.len());
    for &p in levels {
        let z = normal_quantile((1.0 + p) / 2.0)?;
        let covered = scores.partition_point(|&s| s <= z);
        p_hat.push(covered as f64 / n);
    }
    Ok(ReliabilityCurve {
        p: levels.to_vec(),
        p_hat,
    })
}

/// Mean absolute gap between observed and nominal coverage.
pub fn auce(curve: &ReliabilityCurve) -> f64 {
    let k = curve.p.len() as f64;
    curve
        .p
        .iter()
        .zip(&curve.p_hat)
        .map(|(p, q)| (q - p).abs())
        .sum::<f64>()
        / k
}

/// Output steps (1-based) reported individually: every tenth step, plus the last.
pub fn report_indices(interval: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (1..=interval / 10).map(|k| k * 10).collect();
    if idx.last() != Some(&interval) {
        idx.push(interval);
    }
    idx
}

/// Extracts column `step` (0-based) of a row-major `n × interval` matrix.
pub fn column(data: &[f64], interval: usize, step: usize) -> Vec<f64> {
    data.iter().skip(step).step_by(interval).copied().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMetrics {
    /// 1-based output step.
    pub index: usize,
    pub rmse: f64,
    pub mape: Option<f64>,
    pub r2: f64,
    pub auce: f64,
}

/// Pooled and per-index accuracy and calibration. `mape` is `null` when any
/// observation is too close to zero for a percentage error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mape: Option<f64>,
    pub r2: f64,
    pub auce: f64,
    pub unit: Unit,
    pub samples: usize,
    pub per_index: Vec<IndexMetrics>,
}

fn mape_opt(y: &[f64], yhat: &[f64]) -> Option<f64> {
    mape(y, yhat).ok()
}

/// Evaluates row-major `n × interval` predictions against targets.
pub fn evaluate(
    mu: &[f64],
    var: &[f64],
    y: &[f64],
    interval: usize,
    levels: &[f64],
    unit: Unit,
) -> Result<MetricsReport> {
    if interval == 0 || !y.len().is_multiple_of(interval) {
        return Err(shape(format!(
            "{} values do not form rows of {interval}",
            y.len()
        )));
    }
    check_pair(y, mu)?;
    let pooled = reliability(mu, var, y, levels)?;
    let mut per_index = Vec::new();
    for index in report_indices(interval) {
        let (yc, mc, vc) = (
            column(y, interval, index - 1),
            column(mu, interval, index - 1),
            column(var, interval, index - 1),
        );
        per_index.push(IndexMetrics {
            index,
            rmse: rmse(&yc, &mc)?,
            mape: mape_opt(&yc, &mc),
            r2: r2(&yc, &mc)?,
            auce: auce(&reliability(&mc, &vc, &yc, levels)?),
        });
    }
    Ok(MetricsReport {
        rmse: rmse(y, mu)?,
        mape: mape_opt(y, mu),
        r2: r2(y, mu)?,
        auce: auce(&pooled),
        unit,
        samples: y.len() / interval,
        per_index,
    })
}
