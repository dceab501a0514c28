//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wavecast_core::lstm::{backward, forward, init_params, Arch, Member};

/// Random member with every tensor (biases included) drawn from U(-0.5, 0.5).
pub fn random_member(arch: &Arch, rng: &mut ChaCha8Rng) -> Member {
    let mut m = init_params(arch, rng.random()).unwrap();
    for t in m.tensors_mut() {
        t.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    }
    m
}

/// Scalar test loss `L = Σ a_j μ_j + Σ b_j σ²_j`.
fn loss(m: &Member, x: &[f64], a: &[f64], b: &[f64], floor: f64) -> f64 {
    let tr = forward(&m.lstm, &m.heads, x, floor).unwrap();
    tr.mu.iter().zip(a).map(|(u, w)| u * w).sum::<f64>()
        + tr.var.iter().zip(b).map(|(v, w)| v * w).sum::<f64>()
}

/// Worst relative gap between analytic and central-difference gradients,
/// `|g_a − g_n| / max(|g_a|, |g_n|, floor)`, over every parameter.
pub fn gradient_check(arch: &Arch, seed: u64, eps: f64, denom_floor: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut member = random_member(arch, &mut rng);
    let x: Vec<f64> = (0..arch.window)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let a: Vec<f64> = (0..arch.interval)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let b: Vec<f64> = (0..arch.interval)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let floor = arch.var_floor;

    let tr = forward(&member.lstm, &member.heads, &x, floor).unwrap();
    let analytic = backward(&tr, &member.lstm, &member.heads, &a, &b).unwrap();
    let analytic: Vec<f64> = analytic
        .tensors()
        .iter()
        .flat_map(|t| t.iter().copied())
        .collect();

    let mut numeric = Vec::with_capacity(analytic.len());
    for ti in 0..12 {
        let len = member.tensors()[ti].len();
        for k in 0..len {
            let orig = member.tensors()[ti][k];
            member.tensors_mut()[ti][k] = orig + eps;
            let up = loss(&member, &x, &a, &b, floor);
            member.tensors_mut()[ti][k] = orig - eps;
            let down = loss(&member, &x, &a, &b, floor);
            member.tensors_mut()[ti][k] = orig;
            numeric.push((up - down) / (2.0 * eps));
        }
    }
    analytic
        .iter()
        .zip(&numeric)
        .map(|(ga, gn)| (ga - gn).abs() / ga.abs().max(gn.abs()).max(denom_floor))
        .fold(0.0, f64::max)
}

/// Every valid window start, found by scanning all offsets.
pub fn brute_force_windows(len: usize, w: usize, m: usize, s: usize) -> Vec<usize> {
    (0..len)
        .filter(|o| o % s == 0 && o + w + m <= len)
        .collect()
}

/// Empirical mean and variance of an equal-weight Gaussian mixture, with
/// standard errors of both estimates.
pub struct MixtureSample {
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

pub fn sample_mixture(mus: &[f64], vars: &[f64], draws: usize, seed: u64) -> MixtureSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps: Vec<Normal<f64>> = mus
        .iter()
        .zip(vars)
        .map(|(m, v)| Normal::new(*m, v.sqrt()).unwrap())
        .collect();
    let xs: Vec<f64> = (0..draws)
        .map(|_| comps[rng.random_range(0..comps.len())].sample(&mut rng))
        .collect();
    let n = draws as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    MixtureSample {
        mean,
        var,
        se_mean: (var / n).sqrt(),
        se_var: ((m4 - var * var) / n).sqrt(),
    }
}

/// Observations drawn from each predictive Gaussian, optionally with the
/// true spread multiplied by `spread`.
pub fn draw_observations(mu: &[f64], var: &[f64], spread: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    mu.iter()
        .zip(var)
        .map(|(m, v)| m + spread * v.sqrt() * z.sample(&mut rng))
        .collect()
}

/// Random predictive means and variances.
pub fn random_predictions(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.random_range(-2.0..2.0), rng.random_range(0.05..1.5)))
        .unzip()
}
