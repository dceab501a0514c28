//! Raw signal handling: unit conversion, min-max normalization,
//! chronological splitting and sliding-window slicing.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};

/// Seawater density, kg/m³.
pub const SEAWATER_DENSITY: f64 = 1025.0;
/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Mbar,
    Meter,
    Normalized,
    Dimensionless,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Mbar => "mbar",
            Unit::Meter => "meter",
            Unit::Normalized => "normalized",
            Unit::Dimensionless => "dimensionless",
        }
    }
}

impl std::str::FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mbar" => Ok(Unit::Mbar),
            "meter" | "m" => Ok(Unit::Meter),
            "normalized" => Ok(Unit::Normalized),
            "dimensionless" => Ok(Unit::Dimensionless),
            other => Err(invalid(format!("unknown unit '{other}'"))),
        }
    }
}

/// A uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    dt: f64,
    unit: Unit,
    t0: Option<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64, unit: Unit) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("time series must not be empty"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!(
                "sampling period must be positive, got {dt}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample {i} is {}", values[i])));
        }
        Ok(Self {
            values,
            dt,
            unit,
            t0: None,
        })
    }

    pub fn with_t0(mut self, t0: Option<f64>) -> Self {
        self.t0 = t0;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn t0(&self) -> Option<f64> {
        self.t0
    }

    /// Same sampling metadata, new values. Start time is shifted by `offset` samples.
    fn derive(&self, values: Vec<f64>, unit: Unit, offset: usize) -> Result<Self> {
        let t0 = self.t0.map(|t| t + offset as f64 * self.dt);
        Ok(TimeSeries::new(values, self.dt, unit)?.with_t0(t0))
    }
}

/// Converts a hydrostatic pressure record (mbar) into water height (m): `h = p·100 / (ρ·g)`.
pub fn pressure_to_height(series: &TimeSeries, rho: f64, g: f64) -> Result<TimeSeries> {
    if series.unit != Unit::Mbar {
        return Err(Error::UnitMismatch {
            expected: Unit::Mbar,
            found: series.unit,
        });
    }
    if !(rho > 0.0) || !(g > 0.0) {
        return Err(invalid(format!(
            "rho and g must be positive (rho={rho}, g={g})"
        )));
    }
    let denom = rho * g;
    let values: Vec<f64> = series.values.iter().map(|p| p * 100.0 / denom).collect();
    series.derive(values, Unit::Meter, 0)
}

/// Min-max scaling constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub min: f64,
    pub max: f64,
}

impl NormParams {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::NonFinite(format!("norm bounds ({min}, {max})")));
        }
        if max == min {
            return Err(Error::DegenerateRange(min));
        }
        if max < min {
            return Err(invalid(format!("norm max {max} < min {min}")));
        }
        Ok(Self { min, max })
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    #[inline]
    pub fn invert(&self, x: f64) -> f64 {
        self.min + (self.max - self.min) * x
    }

    fn check(&self) -> Result<()> {
        NormParams::new(self.min, self.max).map(|_| ())
    }
}

pub fn fit_minmax(series: &TimeSeries) -> Result<NormParams> {
    let (min, max) = series
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    NormParams::new(min, max)
}

/// Maps values into `[0, 1]` over the fitted range. Values outside the range are not clamped.
pub fn normalize(series: &TimeSeries, norm: &NormParams) -> Result<TimeSeries> {
    norm.check()?;
    let values = series.values.iter().map(|&v| norm.apply(v)).collect();
    series.derive(values, Unit::Normalized, 0)
}

/// Inverse of [`normalize`]; the result carries `unit`.
pub fn denormalize(series: &TimeSeries, norm: &NormParams, unit: Unit) -> Result<TimeSeries> {
    norm.check()?;
    let values = series.values.iter().map(|&v| norm.invert(v)).collect();
    series.derive(values, unit, 0)
}

/// Train / validation / test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|f| !(*f > 0.0)) {
            return Err(invalid(format!(
                "split fractions must be positive: {all:?}"
            )));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("split fractions must sum to 1: {all:?}")));
        }
        Ok(())
    }
}

/// Cuts the series into contiguous train, validation and test segments.
///
/// Segment lengths are `floor(f·L)`; the remainder goes to the test segment.
pub fn chrono_split(
    series: &TimeSeries,
    fractions: SplitFractions,
) -> Result<(TimeSeries, TimeSeries, TimeSeries)> {
    fractions.validate()?;
    let len = series.len();
    let n_train = (fractions.train * len as f64).floor() as usize;
    let n_val = (fractions.val * len as f64).floor() as usize;
    let n_test = len - n_train - n_val;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(invalid(format!(
            "series of length {len} yields an empty segment ({n_train}, {n_val}, {n_test})"
        )));
    }
    let v = &series.values;
    Ok((
        series.derive(v[..n_train].to_vec(), series.unit, 0)?,
        series.derive(v[n_train..n_train + n_val].to_vec(), series.unit, n_train)?,
        series.derive(v[n_train + n_val..].to_vec(), series.unit, n_train + n_val)?,
    ))
}

/// Sliding-window geometry, in timesteps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub window: usize,
    pub interval: usize,
    pub step: usize,
}

impl SliceSpec {
    pub fn new(window: usize, interval: usize, step: usize) -> Result<Self> {
        let spec = Self {
            window,
            interval,
            step,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.interval == 0 || self.step == 0 {
            return Err(invalid(format!(
                "window, interval and step must be >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    /// Number of windows a series of `len` samples yields, or `None` if it is too short.
    pub fn sample_count(&self, len: usize) -> Option<usize> {
        let span = self.window + self.interval;
        (len >= span).then(|| (len - span) / self.step + 1)
    }
}

/// Supervised (input window, target interval) pairs, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    spec: SliceSpec,
    norm: Option<NormParams>,
}

impl WindowedDataset {
    pub fn from_rows(
        inputs: Vec<f64>,
        targets: Vec<f64>,
        spec: SliceSpec,
        norm: Option<NormParams>,
    ) -> Result<Self> {
        spec.validate()?;
        let n = inputs.len() / spec.window;
        if n == 0 || inputs.len() != n * spec.window || targets.len() != n * spec.interval {
            return Err(shape(format!(
                "inputs ({}) and targets ({}) do not form rows of {} and {}",
                inputs.len(),
                targets.len(),
                spec.window,
                spec.interval
            )));
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset row".into()));
        }
        Ok(Self {
            inputs,
            targets,
            spec,
            norm,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.spec.window
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn spec(&self) -> SliceSpec {
        self.spec
    }

    pub fn norm(&self) -> Option<NormParams> {
        self.norm
    }

    pub fn with_norm(mut self, norm: NormParams) -> Self {
        self.norm = Some(norm);
        self
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let w = self.spec.window;
        &self.inputs[i * w..(i + 1) * w]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        let m = self.spec.interval;
        &self.targets[i * m..(i + 1) * m]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// One row per sample: inputs followed by targets.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..self.spec.window)
            .map(|j| format!("x{j}"))
            .chain((0..self.spec.interval).map(|j| format!("y{j}")))
            .collect();
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .input(i)
                .iter()
                .chain(self.target(i))
                .map(|v| v.to_string())
                .collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Slices `series` into windows: sample `i` reads `[i·s, i·s+w)` and predicts `[i·s+w, i·s+w+m)`.
pub fn slice_windows(series: &TimeSeries, spec: SliceSpec) -> Result<WindowedDataset> {
    spec.validate()?;
    let len = series.len();
    let n = spec.sample_count(len).ok_or(Error::InsufficientData {
        len,
        window: spec.window,
        interval: spec.interval,
    })?;
    let (w, m) = (spec.window, spec.interval);
    let mut inputs = Vec::with_capacity(n * w);
    let mut targets = Vec::with_capacity(n * m);
    for i in 0..n {
        let start = i * spec.step;
        inputs.extend_from_slice(&series.values[start..start + w]);
        targets.extend_from_slice(&series.values[start + w..start + w + m]);
    }
    Ok(WindowedDataset {
        inputs,
        targets,
        spec,
        norm: None,
    })
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    #[serde(default)]
    timestamp: Option<String>,
    value: f64,
}

/// Reads the `timestamp,value` CSV format. The timestamp column may be absent or empty.
pub fn read_csv<R: Read>(input: R, dt: f64, unit: Unit) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut values = Vec::new();
    let mut t0 = None;
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        if i == 0 {
            t0 = match row.timestamp.as_deref() {
                None | Some("") => None,
                Some(s) => Some(
                    s.parse::<f64>()
                        .map_err(|_| invalid(format!("bad timestamp '{s}'")))?,
                ),
            };
        }
        values.push(row.value);
    }
    Ok(TimeSeries::new(values, dt, unit)?.with_t0(t0))
}

/// Writes the `timestamp,value` CSV format; timestamps are `t0 + i·dt` (t0 defaults to 0).
pub fn write_csv<W: Write>(series: &TimeSeries, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["timestamp", "value"])?;
    let t0 = series.t0.unwrap_or(0.0);
    for (i, v) in series.values.iter().enumerate() {
        let t = t0 + i as f64 * series.dt;
        wtr.write_record([format!("{t:.6}"), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
