//! Gaussian NLL objective, Adam, and the per-member training loop.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::lstm::{backward_into, init_params, Arch, Member};
use crate::series::WindowedDataset;

/// `½·ln 2π`, the constant term of the Gaussian NLL.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Mean Gaussian negative log-likelihood over the entries.
pub fn nll(mu: &[f64], var: &[f64], y: &[f64]) -> Result<f64> {
    if mu.len() != var.len() || mu.len() != y.len() || mu.is_empty() {
        return Err(shape(format!(
            "nll: lengths {} / {} / {}",
            mu.len(),
            var.len(),
            y.len()
        )));
    }
    let mut total = 0.0;
    for ((&m, &v), &t) in mu.iter().zip(var).zip(y) {
        if !(v > 0.0) {
            return Err(invalid(format!("nll: variance must be positive, got {v}")));
        }
        let r = t - m;
        total += 0.5 * v.ln() + r * r / (2.0 * v) + HALF_LN_2PI;
    }
    Ok(total / mu.len() as f64)
}

/// Writes `weight · ∂NLL_j/∂(mu_j, var_j)` for every entry into the output slices
/// and returns the weighted loss sum (without the `1/len` mean).
fn nll_grad_into(
    mu: &[f64],
    var: &[f64],
    y: &[f64],
    weight: f64,
    d_mu: &mut [f64],
    d_var: &mut [f64],
) -> f64 {
    let mut loss = 0.0;
    for j in 0..mu.len() {
        let (v, r) = (var[j], y[j] - mu[j]);
        loss += 0.5 * v.ln() + r * r / (2.0 * v) + HALF_LN_2PI;
        d_mu[j] = -weight * r / v;
        d_var[j] = weight * (0.5 / v - r * r / (2.0 * v * v));
    }
    loss
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub patience: usize,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3500,
            batch_size: 64,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            patience: 200,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch_size must be >= 1"));
        }
        if !(self.lr > 0.0 && self.eps_adam > 0.0 && self.clip_norm >= 0.0) {
            return Err(invalid(
                "lr and eps_adam must be positive, clip_norm non-negative",
            ));
        }
        for b in [self.beta1, self.beta2] {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid(format!("Adam betas must lie in (0, 1), got {b}")));
            }
        }
        Ok(())
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn for_shapes<'a>(tensors: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let m: Vec<Vec<f64>> = tensors.into_iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            v: m.clone(),
            m,
            t: 0,
        }
    }

    pub fn for_member(member: &Member) -> Self {
        Self::for_shapes(member.tensors())
    }
}

/// One bias-corrected Adam update over matching lists of parameter and gradient tensors.
pub fn adam_step(
    params: &mut [&mut Vec<f64>],
    grads: &[&[f64]],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    let same_shape = params.len() == grads.len()
        && params.len() == state.m.len()
        && params
            .iter()
            .zip(grads)
            .zip(&state.m)
            .zip(&state.v)
            .all(|(((p, g), m), v)| p.len() == g.len() && p.len() == m.len() && p.len() == v.len());
    if !same_shape {
        return Err(shape(
            "adam_step: parameter, gradient and moment shapes differ",
        ));
    }
    state.t += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let bc1 = 1.0 - b1.powf(state.t as f64);
    let bc2 = 1.0 - b2.powf(state.t as f64);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        for k in 0..p.len() {
            let gk = g[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= config.lr * m_hat / (v_hat.sqrt() + config.eps_adam);
        }
    }
    Ok(())
}

fn adam_step_member(
    member: &mut Member,
    grads: &Member,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    let grad_refs: Vec<&[f64]> = grads.tensors().to_vec();
    let mut params = member.tensors_mut();
    adam_step(&mut params, &grad_refs, state, config)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_nll: Vec<f64>,
    pub val_nll: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub wall_clock_secs: f64,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.train_nll.len()
    }

    /// `epoch,train_nll,val_nll`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["epoch", "train_nll", "val_nll"])?;
        for (e, (t, v)) in self.train_nll.iter().zip(&self.val_nll).enumerate() {
            wtr.write_record([(e + 1).to_string(), t.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Mean NLL of one member over a dataset, pooled over samples and output steps.
pub fn dataset_nll(member: &Member, data: &WindowedDataset, var_floor: f64) -> Result<f64> {
    let mut total = 0.0;
    for s in 0..data.len() {
        let tr = member.forward(data.input(s), var_floor)?;
        total += nll(&tr.mu, &tr.var, data.target(s))?;
    }
    Ok(total / data.len() as f64)
}

fn check_dataset(data: &WindowedDataset, arch: &Arch, what: &str) -> Result<()> {
    let spec = data.spec();
    if data.is_empty() {
        return Err(invalid(format!("{what} dataset is empty")));
    }
    if spec.window != arch.window || spec.interval != arch.interval {
        return Err(shape(format!(
            "{what} dataset windows ({}, {}) do not match architecture ({}, {})",
            spec.window, spec.interval, arch.window, arch.interval
        )));
    }
    Ok(())
}

#[cfg(not(target_arch = "wasm32"))]
fn timer() -> impl Fn() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64()
}

// No monotonic clock on wasm32-unknown-unknown.
#[cfg(target_arch = "wasm32")]
fn timer() -> impl Fn() -> f64 {
    || 0.0
}

/// Trains one member on mini-batches of mean NLL with early stopping on
/// validation NLL, returning the parameters of the best validation epoch.
pub fn train_member(
    train: &WindowedDataset,
    val: &WindowedDataset,
    arch: &Arch,
    config: &TrainConfig,
) -> Result<(Member, TrainReport)> {
    arch.validate()?;
    config.validate()?;
    check_dataset(train, arch, "training")?;
    check_dataset(val, arch, "validation")?;
    let elapsed = timer();

    let mut member = init_params(arch, config.seed)?;
    // Shuffling uses its own stream so it never aliases the init stream.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5DEE_CE66_D1CE_5EED);
    let mut adam = AdamState::for_member(&member);
    let mut grads = member.zeros_like();
    let m = arch.interval;
    let mut d_mu = vec![0.0; m];
    let mut d_var = vec![0.0; m];
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut report = TrainReport::default();
    let mut best = (f64::INFINITY, member.clone());
    let mut since_best = 0usize;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.fill(0.0);
            let weight = 1.0 / (batch.len() * m) as f64;
            for &s in batch {
                let tr = member.forward(train.input(s), arch.var_floor)?;
                epoch_loss += nll_grad_into(
                    &tr.mu,
                    &tr.var,
                    train.target(s),
                    weight,
                    &mut d_mu,
                    &mut d_var,
                );
                backward_into(&tr, &member.lstm, &member.heads, &d_mu, &d_var, &mut grads)?;
            }
            if config.clip_norm > 0.0 {
                let norm = grads.norm_sq().sqrt();
                if norm > config.clip_norm {
                    grads.scale(config.clip_norm / norm);
                }
            }
            adam_step_member(&mut member, &grads, &mut adam, config)?;
        }
        let train_nll = epoch_loss / (train.len() * m) as f64;
        if !train_nll.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: train_nll,
            });
        }
        let val_nll = match dataset_nll(&member, val, arch.var_floor) {
            Ok(v) if v.is_finite() => v,
            Ok(v) => return Err(Error::Diverged { epoch, loss: v }),
            Err(Error::NonFinite(_)) => {
                return Err(Error::Diverged {
                    epoch,
                    loss: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        report.train_nll.push(train_nll);
        report.val_nll.push(val_nll);
        if val_nll < best.0 {
            best = (val_nll, member.clone());
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        log::debug!("epoch {epoch}: train {train_nll:.5} val {val_nll:.5}");
        if since_best >= config.patience {
            break;
        }
    }
    report.wall_clock_secs = elapsed();
    Ok((best.1, report))
}
