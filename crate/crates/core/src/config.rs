use serde::{Deserialize, Serialize};

use crate::calibrate::ScaleMethod;
use crate::error::{invalid, Result};
use crate::lstm::{Arch, DEFAULT_VARIANCE_FLOOR};
use crate::metrics::default_levels;
use crate::series::{SliceSpec, SplitFractions, Unit, SEAWATER_DENSITY, STANDARD_GRAVITY};
use crate::train::TrainConfig;

/// Every pipeline setting in one document. Defaults reproduce the baseline
/// setup: window 300, interval 70, step 50, one 70-unit LSTM layer,
/// five members, 3500 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub slice: SliceSpec,
    pub hidden: usize,
    pub var_floor: f64,
    pub models: usize,
    pub base_seed: u64,
    pub jobs: usize,
    pub split: SplitFractions,
    pub train: TrainConfig,
    /// Sampling period of ingested CSV files, seconds.
    pub dt: f64,
    pub input_unit: Unit,
    /// Convert `mbar` input to metres before anything else.
    pub convert_pressure: bool,
    pub rho: f64,
    pub g: f64,
    pub ci_levels: Vec<f64>,
    pub calibration: ScaleMethod,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            slice: SliceSpec {
                window: 300,
                interval: 70,
                step: 50,
            },
            hidden: 70,
            var_floor: DEFAULT_VARIANCE_FLOOR,
            models: 5,
            base_seed: 0,
            jobs: 1,
            split: SplitFractions::default(),
            train: TrainConfig::default(),
            dt: 0.05,
            input_unit: Unit::Meter,
            convert_pressure: false,
            rho: SEAWATER_DENSITY,
            g: STANDARD_GRAVITY,
            ci_levels: default_levels(),
            calibration: ScaleMethod::ClosedForm,
        }
    }
}

impl RunConfig {
    pub fn arch(&self) -> Arch {
        Arch {
            hidden: self.hidden,
            window: self.slice.window,
            interval: self.slice.interval,
            var_floor: self.var_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.slice.validate()?;
        self.arch().validate()?;
        self.split.validate()?;
        self.train.validate()?;
        if self.models == 0 || self.jobs == 0 {
            return Err(invalid("models and jobs must be >= 1"));
        }
        if !(self.dt > 0.0) || !(self.rho > 0.0) || !(self.g > 0.0) {
            return Err(invalid("dt, rho and g must be positive"));
        }
        if self.ci_levels.is_empty()
            || self.ci_levels.iter().any(|&p| !(p > 0.0 && p < 1.0))
            || self.ci_levels.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(invalid(
                "ci_levels must be strictly increasing values in (0, 1)",
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
