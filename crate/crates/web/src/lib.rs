//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export is a thin wrapper over a plain function (`*_series`,
//! `explore_calibration`, `train_and_forecast`) so the logic can be tested
//! natively.

use wasm_bindgen::prelude::*;

use wavecast_core::calibrate::{fit_std_scale, ScaleMethod};
use wavecast_core::config::RunConfig;
use wavecast_core::ensemble::DeepEnsemble;
use wavecast_core::metrics::{auce, default_levels, reliability};
use wavecast_core::pipeline::{fit, prepare};
use wavecast_core::series::SliceSpec;
use wavecast_core::synthwave::{generate, preset, WaveKind, WaveSpec};
use wavecast_core::Result;

fn js(e: wavecast_core::Error) -> JsError {
    JsError::new(&format!("{} ({})", e, e.code()))
}

fn spec_for(kind: &str, seed: u64, duration: f64) -> Result<WaveSpec> {
    let kind: WaveKind = kind.parse()?;
    let mut spec = preset(kind, seed);
    spec.duration = duration;
    spec.validate()?;
    Ok(spec)
}

pub fn synth_series(kind: &str, seed: u64, duration: f64) -> Result<Vec<f64>> {
    Ok(generate(&spec_for(kind, seed, duration)?)?.into_values())
}

/// Noisy samples of a preset wave.
#[wasm_bindgen]
pub fn synthesize(kind: &str, seed: u64, duration: f64) -> Result<Vec<f64>, JsError> {
    synth_series(kind, seed, duration).map_err(js)
}

/// Reliability curves of a predictor whose standard deviation is off by
/// `std_factor`, before and after STD scaling.
#[wasm_bindgen]
pub struct CalibrationView {
    levels: Vec<f64>,
    before: Vec<f64>,
    after: Vec<f64>,
    s: f64,
    auce_before: f64,
    auce_after: f64,
}

#[wasm_bindgen]
impl CalibrationView {
    #[wasm_bindgen(getter)]
    pub fn levels(&self) -> Vec<f64> {
        self.levels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn before(&self) -> Vec<f64> {
        self.before.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn after(&self) -> Vec<f64> {
        self.after.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn s(&self) -> f64 {
        self.s
    }

    #[wasm_bindgen(getter)]
    pub fn auce_before(&self) -> f64 {
        self.auce_before
    }

    #[wasm_bindgen(getter)]
    pub fn auce_after(&self) -> f64 {
        self.auce_after
    }
}

/// The predictor knows the noise-free signal exactly and claims a noise
/// standard deviation of `std_factor × noise_std`.
pub fn explore_calibration(kind: &str, seed: u64, std_factor: f64) -> Result<CalibrationView> {
    let mut spec = spec_for(kind, seed, 300.0)?;
    spec.noise_std = spec.noise_std.max(0.01);
    let y = generate(&spec)?.into_values();
    let mu: Vec<f64> = (0..y.len())
        .map(|k| spec.clean(k as f64 * spec.dt))
        .collect();
    let claimed = spec.noise_std * std_factor;
    let var = vec![claimed * claimed; y.len()];
    let levels = default_levels();
    let before = reliability(&mu, &var, &y, &levels)?;
    let s = fit_std_scale(&mu, &var, &y, ScaleMethod::ClosedForm)?.s;
    let scaled: Vec<f64> = var.iter().map(|v| v * s * s).collect();
    let after = reliability(&mu, &scaled, &y, &levels)?;
    Ok(CalibrationView {
        auce_before: auce(&before),
        auce_after: auce(&after),
        levels,
        before: before.p_hat,
        after: after.p_hat,
        s,
    })
}

#[wasm_bindgen]
pub fn calibration_explorer(
    kind: &str,
    seed: u64,
    std_factor: f64,
) -> Result<CalibrationView, JsError> {
    explore_calibration(kind, seed, std_factor).map_err(js)
}

/// A small ensemble's forecast of the samples right after `history`.
#[wasm_bindgen]
pub struct ForecastView {
    history: Vec<f64>,
    truth: Vec<f64>,
    mu: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    test_r2: f64,
}

#[wasm_bindgen]
impl ForecastView {
    #[wasm_bindgen(getter)]
    pub fn history(&self) -> Vec<f64> {
        self.history.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn mu(&self) -> Vec<f64> {
        self.mu.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn lower(&self) -> Vec<f64> {
        self.lower.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn upper(&self) -> Vec<f64> {
        self.upper.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn test_r2(&self) -> f64 {
        self.test_r2
    }
}

pub fn demo_config(models: usize, epochs: usize) -> RunConfig {
    let mut cfg = RunConfig {
        slice: SliceSpec {
            window: 40,
            interval: 20,
            step: 8,
        },
        hidden: 8,
        models,
        ..Default::default()
    };
    cfg.train.epochs = epochs;
    cfg.train.batch_size = 16;
    cfg.train.lr = 5e-3;
    cfg.train.patience = epochs;
    cfg
}

/// Trains on a 120 s preset wave (at 10 Hz) and forecasts the last
/// interval of the series from the window before it.
pub fn train_and_forecast(
    kind: &str,
    seed: u64,
    models: usize,
    epochs: usize,
) -> Result<ForecastView> {
    let mut spec = spec_for(kind, seed, 120.0)?;
    spec.dt = 0.1;
    let series = generate(&spec)?;
    let cfg = demo_config(models, epochs);
    cfg.validate()?;
    let prepared = prepare(&series, &cfg, None)?;
    let (ens, _) = fit(&prepared, &cfg)?;
    let eval =
        wavecast_core::pipeline::evaluate_dataset(&ens, &prepared.test, &cfg.ci_levels, false)?;
    forecast_tail(&ens, series.values(), eval.report.r2)
}

fn forecast_tail(ens: &DeepEnsemble, values: &[f64], test_r2: f64) -> Result<ForecastView> {
    let (l, m) = (ens.arch.window, ens.arch.interval);
    let split = values.len() - m;
    let f = ens.predict(&values[split - l..split], false)?;
    let (lower, upper) = f.interval(0.95)?;
    Ok(ForecastView {
        history: values[split - l..split].to_vec(),
        truth: values[split..].to_vec(),
        mu: f.mu,
        lower,
        upper,
        test_r2,
    })
}

#[wasm_bindgen]
pub fn forecast(
    kind: &str,
    seed: u64,
    models: usize,
    epochs: usize,
) -> Result<ForecastView, JsError> {
    train_and_forecast(kind, seed, models, epochs).map_err(js)
}
