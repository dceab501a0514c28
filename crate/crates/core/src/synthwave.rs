//! Seeded synthetic wave-height signals: sums of sinusoids under an optional
//! exponential envelope, plus white Gaussian noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::series::{TimeSeries, Unit};

/// 20 Hz.
pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_DURATION: f64 = 600.0;
pub const CALM_AMPLITUDE_MAX: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveKind {
    Regular,
    Amplifying,
    Damping,
    Calm,
    Composite,
}

impl WaveKind {
    pub const ALL: [WaveKind; 5] = [
        WaveKind::Regular,
        WaveKind::Amplifying,
        WaveKind::Damping,
        WaveKind::Calm,
        WaveKind::Composite,
    ];
}

impl std::str::FromStr for WaveKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(WaveKind::Regular),
            "amplifying" => Ok(WaveKind::Amplifying),
            "damping" => Ok(WaveKind::Damping),
            "calm" => Ok(WaveKind::Calm),
            "composite" => Ok(WaveKind::Composite),
            other => Err(invalid(format!("unknown wave preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveComponent {
    /// m
    pub amplitude: f64,
    /// s
    pub period: f64,
    /// rad
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveSpec {
    pub kind: WaveKind,
    pub components: Vec<WaveComponent>,
    /// 1/s; used by the amplifying and damping envelopes.
    pub envelope_rate: f64,
    pub noise_std: f64,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
}

impl WaveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(invalid("wave spec needs at least one component"));
        }
        for c in &self.components {
            if !(c.period > 0.0 && c.period.is_finite()) {
                return Err(invalid(format!(
                    "component period must be positive: {}",
                    c.period
                )));
            }
            if !(c.amplitude >= 0.0 && c.amplitude.is_finite()) || !c.phase.is_finite() {
                return Err(invalid(format!("bad component {c:?}")));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive: {}", self.dt)));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(invalid(format!(
                "duration {} must be at least dt {}",
                self.duration, self.dt
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(invalid(format!(
                "noise std must be >= 0: {}",
                self.noise_std
            )));
        }
        if !(self.envelope_rate >= 0.0 && self.envelope_rate.is_finite()) {
            return Err(invalid(format!(
                "envelope rate must be >= 0: {}",
                self.envelope_rate
            )));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }

    pub fn envelope(&self, t: f64) -> f64 {
        match self.kind {
            WaveKind::Amplifying => (self.envelope_rate * t).exp(),
            WaveKind::Damping => (-self.envelope_rate * t).exp(),
            WaveKind::Regular | WaveKind::Calm | WaveKind::Composite => 1.0,
        }
    }

    /// Noise-free signal at time `t`.
    pub fn clean(&self, t: f64) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .map(|c| c.amplitude * (2.0 * PI * t / c.period + c.phase).sin())
            .sum();
        self.envelope(t) * sum
    }
}

/// Samples the spec at `t_k = k·dt`.
pub fn generate(spec: &WaveSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let n = spec.samples();
    let mut values: Vec<f64> = (0..n).map(|k| spec.clean(k as f64 * spec.dt)).collect();
    if spec.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = Normal::new(0.0, spec.noise_std).map_err(|e| invalid(e.to_string()))?;
        for v in &mut values {
            *v += noise.sample(&mut rng);
        }
    }
    TimeSeries::new(values, spec.dt, Unit::Meter)
}

/// Three random components with periods in 5–15 s and amplitudes in 0.2–1.0 m,
/// sampled at 20 Hz for 600 s with 0.02 m noise.
pub fn default_training_spec(seed: u64) -> WaveSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let components = (0..3)
        .map(|_| WaveComponent {
            amplitude: rng.random_range(0.2..=1.0),
            period: rng.random_range(5.0..=15.0),
            phase: rng.random_range(0.0..2.0 * PI),
        })
        .collect();
    WaveSpec {
        kind: WaveKind::Composite,
        components,
        envelope_rate: 0.0,
        noise_std: 0.02,
        dt: DEFAULT_DT,
        duration: DEFAULT_DURATION,
        seed,
    }
}

/// Named regimes: regular, amplifying, damping, calm, composite.
pub fn preset(kind: WaveKind, seed: u64) -> WaveSpec {
    let single = |amplitude: f64, period: f64| {
        vec![WaveComponent {
            amplitude,
            period,
            phase: 0.0,
        }]
    };
    let base = |kind, components, envelope_rate, noise_std| WaveSpec {
        kind,
        components,
        envelope_rate,
        noise_std,
        dt: DEFAULT_DT,
        duration: DEFAULT_DURATION,
        seed,
    };
    match kind {
        WaveKind::Regular => base(kind, single(1.0, 8.0), 0.0, 0.02),
        WaveKind::Amplifying => base(kind, single(0.3, 8.0), 0.002, 0.02),
        WaveKind::Damping => base(kind, single(1.0, 8.0), 0.002, 0.02),
        WaveKind::Calm => base(
            kind,
            vec![
                WaveComponent {
                    amplitude: CALM_AMPLITUDE_MAX,
                    period: 6.0,
                    phase: 0.0,
                },
                WaveComponent {
                    amplitude: 0.02,
                    period: 11.0,
                    phase: 1.0,
                },
            ],
            0.0,
            0.005,
        ),
        WaveKind::Composite => default_training_spec(seed),
    }
}
