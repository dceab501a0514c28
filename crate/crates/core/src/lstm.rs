//! Single-layer LSTM over a scalar input sequence, with every hidden state
//! concatenated into two parallel affine heads (mean and variance).
//!
//! Gate weights are `H × (H + 1)` row-major over the input vector `[h_{t-1}, x_t]`;
//! column `H` is the scalar input. Head weights are `m × (l·H)` over
//! `z = [h_1, …, h_l]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

/// Network shape shared by every ensemble member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arch {
    pub hidden: usize,
    pub window: usize,
    pub interval: usize,
    #[serde(default = "default_var_floor")]
    pub var_floor: f64,
}

fn default_var_floor() -> f64 {
    DEFAULT_VARIANCE_FLOOR
}

impl Arch {
    pub fn new(hidden: usize, window: usize, interval: usize) -> Result<Self> {
        let arch = Self {
            hidden,
            window,
            interval,
            var_floor: DEFAULT_VARIANCE_FLOOR,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.window == 0 || self.interval == 0 {
            return Err(invalid(format!(
                "architecture sizes must be >= 1: {self:?}"
            )));
        }
        if !(self.var_floor > 0.0 && self.var_floor.is_finite()) {
            return Err(invalid(format!(
                "variance floor must be positive: {}",
                self.var_floor
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `softplus(u) + floor`: keeps the variance head strictly positive.
#[inline]
pub fn positify(u: f64, floor: f64) -> f64 {
    softplus(u) + floor
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub hidden: usize,
    pub w_f: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_c: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(hidden: usize) -> Self {
        let w = vec![0.0; hidden * (hidden + 1)];
        let b = vec![0.0; hidden];
        Self {
            hidden,
            w_f: w.clone(),
            w_i: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_f: b.clone(),
            b_i: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden;
        let wl = h * (h + 1);
        let ok = h >= 1
            && [&self.w_f, &self.w_i, &self.w_c, &self.w_o]
                .iter()
                .all(|w| w.len() == wl)
            && [&self.b_f, &self.b_i, &self.b_c, &self.b_o]
                .iter()
                .all(|b| b.len() == h);
        if ok {
            Ok(())
        } else {
            Err(shape(format!(
                "LSTM tensors inconsistent with hidden size {h}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub window: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub w_mu: Vec<f64>,
    pub b_mu: Vec<f64>,
    pub w_s: Vec<f64>,
    pub b_s: Vec<f64>,
}

impl HeadParams {
    pub fn zeros(window: usize, hidden: usize, outputs: usize) -> Self {
        let w = vec![0.0; outputs * window * hidden];
        Self {
            window,
            hidden,
            outputs,
            w_mu: w.clone(),
            b_mu: vec![0.0; outputs],
            w_s: w,
            b_s: vec![0.0; outputs],
        }
    }

    fn width(&self) -> usize {
        self.window * self.hidden
    }

    fn check(&self) -> Result<()> {
        let wl = self.outputs * self.width();
        if self.w_mu.len() == wl
            && self.w_s.len() == wl
            && self.b_mu.len() == self.outputs
            && self.b_s.len() == self.outputs
            && self.outputs >= 1
            && self.window >= 1
        {
            Ok(())
        } else {
            Err(shape("head tensors inconsistent with declared sizes"))
        }
    }
}

/// One ensemble member: recurrent cell plus output heads. Also used as a
/// gradient accumulator of identical shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub lstm: LstmParams,
    pub heads: HeadParams,
}

/// Tensor names in the canonical order used by [`Member::tensors`].
pub const TENSOR_NAMES: [&str; 12] = [
    "w_f", "w_i", "w_c", "w_o", "b_f", "b_i", "b_c", "b_o", "w_mu", "b_mu", "w_s", "b_s",
];

impl Member {
    pub fn zeros(arch: &Arch) -> Self {
        Self {
            lstm: LstmParams::zeros(arch.hidden),
            heads: HeadParams::zeros(arch.window, arch.hidden, arch.interval),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn tensors(&self) -> [&[f64]; 12] {
        let (l, h) = (&self.lstm, &self.heads);
        [
            &l.w_f, &l.w_i, &l.w_c, &l.w_o, &l.b_f, &l.b_i, &l.b_c, &l.b_o, &h.w_mu, &h.b_mu,
            &h.w_s, &h.b_s,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 12] {
        let (l, h) = (&mut self.lstm, &mut self.heads);
        [
            &mut l.w_f,
            &mut l.w_i,
            &mut l.w_c,
            &mut l.w_o,
            &mut l.b_f,
            &mut l.b_i,
            &mut l.b_c,
            &mut l.b_o,
            &mut h.w_mu,
            &mut h.b_mu,
            &mut h.w_s,
            &mut h.b_s,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn fill(&mut self, v: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = v);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum()
    }

    pub fn check(&self, arch: &Arch) -> Result<()> {
        self.lstm.check()?;
        self.heads.check()?;
        if self.lstm.hidden != arch.hidden
            || self.heads.hidden != arch.hidden
            || self.heads.window != arch.window
            || self.heads.outputs != arch.interval
        {
            return Err(shape(format!(
                "member does not match architecture {arch:?}"
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64], var_floor: f64) -> Result<ForwardTrace> {
        forward(&self.lstm, &self.heads, x, var_floor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gates {
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub gates: Gates,
}

/// Raw gate rows for one step; shared by [`cell_step`] and [`forward`].
#[allow(clippy::too_many_arguments)]
#[inline]
fn step_into(
    p: &LstmParams,
    x: f64,
    h_prev: &[f64],
    c_prev: &[f64],
    f: &mut [f64],
    i: &mut [f64],
    g: &mut [f64],
    o: &mut [f64],
    c: &mut [f64],
    tc: &mut [f64],
    h: &mut [f64],
) {
    let hs = p.hidden;
    let stride = hs + 1;
    for k in 0..hs {
        let row = k * stride..k * stride + hs;
        let col = k * stride + hs;
        let af = dot(&p.w_f[row.clone()], h_prev) + p.w_f[col] * x + p.b_f[k];
        let ai = dot(&p.w_i[row.clone()], h_prev) + p.w_i[col] * x + p.b_i[k];
        let ag = dot(&p.w_c[row.clone()], h_prev) + p.w_c[col] * x + p.b_c[k];
        let ao = dot(&p.w_o[row], h_prev) + p.w_o[col] * x + p.b_o[k];
        f[k] = sigmoid(af);
        i[k] = sigmoid(ai);
        g[k] = ag.tanh();
        o[k] = sigmoid(ao);
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tc[k] = c[k].tanh();
        h[k] = o[k] * tc[k];
    }
}

/// One LSTM step:
/// `f,i,o = σ(W·[h,x]+b)`, `c̃ = tanh(W_c·[h,x]+b_c)`, `c = f⊙c_prev + i⊙c̃`, `h = o⊙tanh(c)`.
pub fn cell_step(
    params: &LstmParams,
    x: f64,
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<CellOutput> {
    params.check()?;
    let hs = params.hidden;
    if h_prev.len() != hs || c_prev.len() != hs {
        return Err(shape(format!("state length must be {hs}")));
    }
    let mut f = vec![0.0; hs];
    let mut i = vec![0.0; hs];
    let mut g = vec![0.0; hs];
    let mut o = vec![0.0; hs];
    let mut c = vec![0.0; hs];
    let mut tc = vec![0.0; hs];
    let mut h = vec![0.0; hs];
    step_into(
        params, x, h_prev, c_prev, &mut f, &mut i, &mut g, &mut o, &mut c, &mut tc, &mut h,
    );
    debug_assert!(h.iter().chain(&c).all(|v| v.is_finite()));
    Ok(CellOutput {
        h,
        c,
        gates: Gates {
            forget: f,
            input: i,
            candidate: g,
            output: o,
        },
    })
}

/// All activations of one forward pass, laid out `[t][k]` (length `l·H`).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub hidden: usize,
    pub x: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    pub cell: Vec<f64>,
    pub tanh_cell: Vec<f64>,
    /// Hidden states `h_1..h_l`; this is also the concatenated head input `z`.
    pub h: Vec<f64>,
    pub mu_pre: Vec<f64>,
    pub var_pre: Vec<f64>,
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn z(&self) -> &[f64] {
        &self.h
    }

    pub fn hidden_at(&self, t: usize) -> &[f64] {
        &self.h[t * self.hidden..(t + 1) * self.hidden]
    }
}

/// Runs the cell from zero state over `x`, then both heads on the concatenated hidden states.
pub fn forward(
    lstm: &LstmParams,
    heads: &HeadParams,
    x: &[f64],
    var_floor: f64,
) -> Result<ForwardTrace> {
    lstm.check()?;
    heads.check()?;
    let hs = lstm.hidden;
    let l = x.len();
    if l == 0 || l != heads.window || heads.hidden != hs {
        return Err(shape(format!(
            "input length {l} / hidden {hs} do not match heads (window {}, hidden {})",
            heads.window, heads.hidden
        )));
    }
    let n = l * hs;
    let mut tr = ForwardTrace {
        hidden: hs,
        x: x.to_vec(),
        forget: vec![0.0; n],
        input: vec![0.0; n],
        candidate: vec![0.0; n],
        output: vec![0.0; n],
        cell: vec![0.0; n],
        tanh_cell: vec![0.0; n],
        h: vec![0.0; n],
        mu_pre: vec![0.0; heads.outputs],
        var_pre: vec![0.0; heads.outputs],
        mu: vec![0.0; heads.outputs],
        var: vec![0.0; heads.outputs],
    };
    let zero = vec![0.0; hs];
    for t in 0..l {
        let cur = t * hs..(t + 1) * hs;
        let (h_done, h_rest) = tr.h.split_at_mut(t * hs);
        let (c_done, c_rest) = tr.cell.split_at_mut(t * hs);
        let h_prev = if t == 0 {
            &zero[..]
        } else {
            &h_done[(t - 1) * hs..]
        };
        let c_prev = if t == 0 {
            &zero[..]
        } else {
            &c_done[(t - 1) * hs..]
        };
        step_into(
            lstm,
            x[t],
            h_prev,
            c_prev,
            &mut tr.forget[cur.clone()],
            &mut tr.input[cur.clone()],
            &mut tr.candidate[cur.clone()],
            &mut tr.output[cur.clone()],
            &mut c_rest[..hs],
            &mut tr.tanh_cell[cur],
            &mut h_rest[..hs],
        );
        if h_rest[..hs]
            .iter()
            .chain(&c_rest[..hs])
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite(format!("LSTM activation at timestep {t}")));
        }
    }
    let width = heads.width();
    for j in 0..heads.outputs {
        let row = j * width..(j + 1) * width;
        tr.mu_pre[j] = dot(&heads.w_mu[row.clone()], &tr.h) + heads.b_mu[j];
        tr.var_pre[j] = dot(&heads.w_s[row], &tr.h) + heads.b_s[j];
        tr.mu[j] = tr.mu_pre[j];
        tr.var[j] = positify(tr.var_pre[j], var_floor);
    }
    if tr.mu.iter().chain(&tr.var).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("head output".into()));
    }
    Ok(tr)
}

/// Exact gradients of a scalar loss given `dL/dmu` and `dL/dvar`.
pub fn backward(
    trace: &ForwardTrace,
    lstm: &LstmParams,
    heads: &HeadParams,
    d_mu: &[f64],
    d_var: &[f64],
) -> Result<Member> {
    let mut grads = Member {
        lstm: LstmParams::zeros(lstm.hidden),
        heads: HeadParams::zeros(heads.window, heads.hidden, heads.outputs),
    };
    backward_into(trace, lstm, heads, d_mu, d_var, &mut grads)?;
    Ok(grads)
}

/// Backpropagation through time, accumulating (`+=`) into `grads`.
pub fn backward_into(
    trace: &ForwardTrace,
    lstm: &LstmParams,
    heads: &HeadParams,
    d_mu: &[f64],
    d_var: &[f64],
    grads: &mut Member,
) -> Result<()> {
    let hs = lstm.hidden;
    let l = trace.len();
    let m = heads.outputs;
    if trace.hidden != hs
        || heads.hidden != hs
        || heads.window != l
        || trace.mu.len() != m
        || d_mu.len() != m
        || d_var.len() != m
        || grads.lstm.hidden != hs
        || grads.heads.w_mu.len() != heads.w_mu.len()
    {
        return Err(shape("trace, parameters and upstream gradients disagree"));
    }
    let width = heads.width();
    let z = &trace.h;

    // Heads.
    let mut dz = vec![0.0; width];
    for j in 0..m {
        let du = d_var[j] * sigmoid(trace.var_pre[j]);
        let row = j * width..(j + 1) * width;
        grads.heads.b_mu[j] += d_mu[j];
        grads.heads.b_s[j] += du;
        if d_mu[j] != 0.0 {
            axpy(d_mu[j], z, &mut grads.heads.w_mu[row.clone()]);
            axpy(d_mu[j], &heads.w_mu[row.clone()], &mut dz);
        }
        if du != 0.0 {
            axpy(du, z, &mut grads.heads.w_s[row.clone()]);
            axpy(du, &heads.w_s[row], &mut dz);
        }
    }

    // Recurrence, newest step first.
    let stride = hs + 1;
    let mut dh_next = vec![0.0; hs];
    let mut dc_next = vec![0.0; hs];
    let mut a_f = vec![0.0; hs];
    let mut a_i = vec![0.0; hs];
    let mut a_g = vec![0.0; hs];
    let mut a_o = vec![0.0; hs];
    let mut v = vec![0.0; stride];
    let g = &mut grads.lstm;
    for t in (0..l).rev() {
        let base = t * hs;
        for k in 0..hs {
            let dh = dz[base + k] + dh_next[k];
            let f = trace.forget[base + k];
            let i = trace.input[base + k];
            let cand = trace.candidate[base + k];
            let o = trace.output[base + k];
            let tc = trace.tanh_cell[base + k];
            let c_prev = if t > 0 {
                trace.cell[base - hs + k]
            } else {
                0.0
            };
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            a_f[k] = dc * c_prev * f * (1.0 - f);
            a_i[k] = dc * cand * i * (1.0 - i);
            a_g[k] = dc * i * (1.0 - cand * cand);
            a_o[k] = d_o * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        if t > 0 {
            v[..hs].copy_from_slice(&trace.h[base - hs..base]);
        } else {
            v[..hs].iter_mut().for_each(|x| *x = 0.0);
        }
        v[hs] = trace.x[t];
        dh_next.iter_mut().for_each(|x| *x = 0.0);
        for (a, w, gw, gb) in [
            (&a_f, &lstm.w_f, &mut g.w_f, &mut g.b_f),
            (&a_i, &lstm.w_i, &mut g.w_i, &mut g.b_i),
            (&a_g, &lstm.w_c, &mut g.w_c, &mut g.b_c),
            (&a_o, &lstm.w_o, &mut g.w_o, &mut g.b_o),
        ] {
            for k in 0..hs {
                let ak = a[k];
                if ak == 0.0 {
                    continue;
                }
                let row = k * stride..(k + 1) * stride;
                gb[k] += ak;
                axpy(ak, &v, &mut gw[row.clone()]);
                if t > 0 {
                    axpy(ak, &w[row.start..row.start + hs], &mut dh_next);
                }
            }
        }
    }
    Ok(())
}

/// Seeded initialization. LSTM weights are `U(-1/√H, 1/√H)`, head weights
/// `U(-1/√(l·H), 1/√(l·H))`; forget-gate biases start at 1, other biases at 0.
pub fn init_params(arch: &Arch, seed: u64) -> Result<Member> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Member::zeros(arch);
    let a = 1.0 / (arch.hidden as f64).sqrt();
    for w in [
        &mut m.lstm.w_f,
        &mut m.lstm.w_i,
        &mut m.lstm.w_c,
        &mut m.lstm.w_o,
    ] {
        w.iter_mut().for_each(|x| *x = rng.random_range(-a..=a));
    }
    m.lstm.b_f.iter_mut().for_each(|b| *b = 1.0);
    let ah = 1.0 / ((arch.window * arch.hidden) as f64).sqrt();
    for w in [&mut m.heads.w_mu, &mut m.heads.w_s] {
        w.iter_mut().for_each(|x| *x = rng.random_range(-ah..=ah));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_cell(h: usize, w: f64) -> LstmParams {
        let mut p = LstmParams::zeros(h);
        for t in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
            t.iter_mut().for_each(|x| *x = w);
        }
        p
    }

    #[test]
    fn zero_cell() {
        let p = LstmParams::zeros(3);
        let out = cell_step(&p, 0.7, &[0.0; 3], &[0.0; 3]).unwrap();
        assert!(out.gates.forget.iter().all(|&v| v == 0.5));
        assert!(out.gates.input.iter().all(|&v| v == 0.5));
        assert!(out.gates.output.iter().all(|&v| v == 0.5));
        assert!(out.gates.candidate.iter().all(|&v| v == 0.0));
        assert!(out.c.iter().chain(&out.h).all(|&v| v == 0.0));
    }

    #[test]
    fn hand_evaluated_cell() {
        let p = uniform_cell(1, 0.5);
        let out = cell_step(&p, 1.0, &[0.0], &[0.0]).unwrap();
        let s = 1.0 / (1.0 + (-0.5f64).exp());
        assert!((out.gates.forget[0] - 0.622_459).abs() < 1e-6);
        assert!((out.gates.candidate[0] - 0.462_117).abs() < 1e-6);
        assert!((out.c[0] - s * 0.5f64.tanh()).abs() < 1e-15);
        assert!((out.c[0] - 0.287_649_137).abs() < 1e-8);
        assert!((out.h[0] - 0.174_269_719).abs() < 1e-8);
    }

    #[test]
    fn saturated_forget_gate_preserves_memory() {
        let mut p = LstmParams::zeros(2);
        p.b_f.iter_mut().for_each(|b| *b = 40.0);
        p.b_i.iter_mut().for_each(|b| *b = -40.0);
        let out = cell_step(&p, 3.0, &[0.1, -0.2], &[0.8, -1.3]).unwrap();
        assert!((out.c[0] - 0.8).abs() < 1e-12);
        assert!((out.c[1] + 1.3).abs() < 1e-12);
    }

    #[test]
    fn zero_network_outputs_biases() {
        let arch = Arch::new(3, 5, 2).unwrap();
        let mut m = Member::zeros(&arch);
        m.heads.b_mu = vec![0.3, -1.0];
        m.heads.b_s = vec![0.0, 2.0];
        let tr = m.forward(&[1.0, 2.0, 3.0, 4.0, 5.0], 1e-6).unwrap();
        assert_eq!(tr.mu, vec![0.3, -1.0]);
        assert!((tr.var[0] - (2f64.ln() + 1e-6)).abs() < 1e-15);
        assert!((tr.var[1] - (softplus(2.0) + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn two_step_chain_matches_manual_steps() {
        let arch = Arch::new(1, 2, 1).unwrap();
        let mut m = Member::zeros(&arch);
        m.lstm = uniform_cell(1, 0.5);
        let tr = m.forward(&[1.0, 1.0], 1e-6).unwrap();
        let s1 = cell_step(&m.lstm, 1.0, &[0.0], &[0.0]).unwrap();
        let s2 = cell_step(&m.lstm, 1.0, &s1.h, &s1.c).unwrap();
        assert!((tr.h[0] - 0.174_269_719).abs() < 1e-8);
        assert!((tr.h[1] - 0.309_058_931).abs() < 1e-8);
        // h_2 by hand: a = 0.5·h_1 + 0.5 for every gate.
        let a = 0.5 * s1.h[0] + 0.5;
        let sg = 1.0 / (1.0 + (-a).exp());
        let c2 = sg * s1.c[0] + sg * a.tanh();
        let h2 = sg * c2.tanh();
        assert!((tr.h[1] - h2).abs() < 1e-15);
        assert_eq!(tr.z(), &[s1.h[0], s2.h[0]]);
    }

    #[test]
    fn length_one_sequence_is_one_step() {
        let arch = Arch::new(2, 1, 3).unwrap();
        let m = init_params(&arch, 9).unwrap();
        let tr = m.forward(&[0.4], 1e-6).unwrap();
        let s = cell_step(&m.lstm, 0.4, &[0.0; 2], &[0.0; 2]).unwrap();
        assert_eq!(tr.h, s.h);
        for j in 0..3 {
            let mu = dot(&m.heads.w_mu[j * 2..j * 2 + 2], &s.h) + m.heads.b_mu[j];
            assert!((tr.mu[j] - mu).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let arch = Arch::new(2, 4, 1).unwrap();
        let m = init_params(&arch, 1).unwrap();
        assert!(matches!(m.forward(&[0.0; 3], 1e-6), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let arch = Arch::new(3, 4, 2).unwrap();
        let m = init_params(&arch, 3).unwrap();
        let tr = m.forward(&[0.1, 0.2, 0.3, 0.4], 1e-6).unwrap();
        let g = backward(&tr, &m.lstm, &m.heads, &[0.0; 2], &[0.0; 2]).unwrap();
        assert_eq!(g.norm_sq(), 0.0);
    }

    #[test]
    fn mean_bias_gradient_is_one() {
        let arch = Arch::new(3, 4, 2).unwrap();
        let m = init_params(&arch, 3).unwrap();
        let tr = m.forward(&[0.1, 0.2, 0.3, 0.4], 1e-6).unwrap();
        let g = backward(&tr, &m.lstm, &m.heads, &[0.0, 1.0], &[0.0; 2]).unwrap();
        assert_eq!(g.heads.b_mu, vec![0.0, 1.0]);
    }

    #[test]
    fn init_is_seeded() {
        let arch = Arch::new(4, 6, 3).unwrap();
        let a = init_params(&arch, 11).unwrap();
        assert_eq!(a, init_params(&arch, 11).unwrap());
        assert_ne!(a, init_params(&arch, 12).unwrap());
        let bound = 0.5;
        assert!(a.lstm.w_f.iter().all(|w| w.abs() <= bound));
        assert!(a.lstm.b_f.iter().all(|&b| b == 1.0));
        assert!(a.lstm.b_i.iter().chain(&a.heads.b_mu).all(|&b| b == 0.0));
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!(positify(-800.0, 1e-6) >= 1e-6);
    }
}
