//! Time steppers: classical RK4 for the full deterministic systems,
//! Euler-Maruyama and a split Heun/Milstein scheme for the reduced SDEs (Itô),
//! and a Heun stepper for integro-differential equations with a truncated
//! memory integral.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || n_steps == 0 {
            return Err(Error::InvalidConfig(format!(
                "time grid needs dt > 0 and n_steps >= 1 (dt = {dt}, n_steps = {n_steps})"
            )));
        }
        Ok(TimeGrid { dt, n_steps })
    }

    /// Grid of step `dt` covering `[0, t_end]`.
    pub fn covering(dt: f64, t_end: f64) -> Result<Self> {
        TimeGrid::new(dt, (t_end / dt).round() as usize)
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

/// Integer ratio `coarse / fine`, or an error if it is not (close to) integral.
pub fn step_ratio(coarse: f64, fine: f64) -> Result<usize> {
    let r = coarse / fine;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::GridIncompatible(format!(
            "{coarse} is not an integer multiple of {fine}"
        )));
    }
    Ok(n as usize)
}

/// Reusable stage buffers for RK4 on an `n`-dimensional system.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `state` by one classical Runge-Kutta step in place.
    pub fn step<F>(&mut self, rhs: F, state: &mut [f64], dt: f64)
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let half = 0.5 * dt;
        rhs(state, &mut self.k1);
        for ((t, &s), &k) in self.tmp.iter_mut().zip(state.iter()).zip(&self.k1) {
            *t = s + half * k;
        }
        rhs(&self.tmp, &mut self.k2);
        for ((t, &s), &k) in self.tmp.iter_mut().zip(state.iter()).zip(&self.k2) {
            *t = s + half * k;
        }
        rhs(&self.tmp, &mut self.k3);
        for ((t, &s), &k) in self.tmp.iter_mut().zip(state.iter()).zip(&self.k3) {
            *t = s + dt * k;
        }
        rhs(&self.tmp, &mut self.k4);
        let sixth = dt / 6.0;
        for i in 0..state.len() {
            state[i] += sixth * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// One RK4 step, returning the new state.
pub fn rk4_step<F>(rhs: F, state: &[f64], dt: f64) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut out = state.to_vec();
    Rk4::new(state.len()).step(rhs, &mut out, dt);
    out
}

/// Dense row-major `n_state x n_channels` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Matrix {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Euler-Maruyama step for additive noise:
/// `x += drift(x) dt + diffusion · sqrt(dt) · gaussians`.
pub fn euler_maruyama_step<F>(
    drift: F,
    diffusion: &Matrix,
    state: &mut [f64],
    dt: f64,
    gaussians: &[f64],
) -> Result<()>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = state.len();
    if diffusion.rows != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: diffusion.rows,
        });
    }
    if gaussians.len() != diffusion.cols {
        return Err(Error::DimensionMismatch {
            expected: diffusion.cols,
            got: gaussians.len(),
        });
    }
    let mut f = [0.0; 8];
    let mut heap;
    let f: &mut [f64] = if n <= 8 {
        &mut f[..n]
    } else {
        heap = vec![0.0; n];
        &mut heap
    };
    drift(state, f);
    let sq = dt.sqrt();
    for i in 0..n {
        let noise: f64 = (0..diffusion.cols)
            .map(|j| diffusion.get(i, j) * gaussians[j])
            .sum();
        state[i] += f[i] * dt + sq * noise;
    }
    Ok(())
}

/// Split step for `dx = N(x) dt + A(x) dt + G(x) dW` (Itô):
/// a Heun half step on `N`, a Milstein step on `A` and `G`, then another
/// Heun half step on `N`.
///
/// The Milstein correction is applied per channel,
/// `½ (Σ_l G_lj ∂_l G_·j)(ΔW_j² − dt)`; cross-channel Lévy areas are omitted.
/// `diffusion` writes the `n x n_channels` matrix row-major.
pub fn split_milstein_step<N, A, G>(
    nonlinear_drift: N,
    linear_drift: A,
    diffusion: G,
    n_channels: usize,
    state: &mut [f64],
    dt: f64,
    gaussians: &[f64],
) -> Result<()>
where
    N: Fn(&[f64], &mut [f64]),
    A: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64], &mut [f64]),
{
    if gaussians.len() != n_channels {
        return Err(Error::DimensionMismatch {
            expected: n_channels,
            got: gaussians.len(),
        });
    }
    let half = 0.5 * dt;
    heun_substep(&nonlinear_drift, state, half);
    milstein_substep(&linear_drift, &diffusion, n_channels, state, dt, gaussians);
    heun_substep(&nonlinear_drift, state, half);
    Ok(())
}

fn heun_substep<N: Fn(&[f64], &mut [f64])>(f: &N, state: &mut [f64], h: f64) {
    let n = state.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut pred = vec![0.0; n];
    f(state, &mut k1);
    for i in 0..n {
        pred[i] = state[i] + h * k1[i];
    }
    f(&pred, &mut k2);
    for i in 0..n {
        state[i] += 0.5 * h * (k1[i] + k2[i]);
    }
}

fn milstein_substep<A, G>(
    linear: &A,
    diffusion: &G,
    m: usize,
    state: &mut [f64],
    dt: f64,
    gaussians: &[f64],
) where
    A: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64], &mut [f64]),
{
    let n = state.len();
    let mut a = vec![0.0; n];
    let mut g = vec![0.0; n * m];
    let mut gp = vec![0.0; n * m];
    let mut gm = vec![0.0; n * m];
    let mut shifted = vec![0.0; n];
    linear(state, &mut a);
    diffusion(state, &mut g);
    let sq = dt.sqrt();
    let scale = 1.0 + state.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut update: Vec<f64> = (0..n).map(|i| a[i] * dt).collect();
    for j in 0..m {
        let dw = sq * gaussians[j];
        let norm = (0..n).fold(0.0f64, |acc, i| acc.max(g[i * m + j].abs()));
        for i in 0..n {
            update[i] += g[i * m + j] * dw;
        }
        if norm == 0.0 {
            continue;
        }
        // directional derivative of column j along itself
        let h = 1e-6 * scale / norm;
        for i in 0..n {
            shifted[i] = state[i] + h * g[i * m + j];
        }
        diffusion(&shifted, &mut gp);
        for i in 0..n {
            shifted[i] = state[i] - h * g[i * m + j];
        }
        diffusion(&shifted, &mut gm);
        let corr = 0.5 * (dw * dw - dt);
        for i in 0..n {
            let lg = (gp[i * m + j] - gm[i * m + j]) / (2.0 * h);
            update[i] += corr * lg;
        }
    }
    for i in 0..n {
        state[i] += update[i];
    }
}

/// Heun stepper for `dx/dt = f(x) + forcing(t)` with forcing values supplied
/// at both ends of the step.
#[derive(Clone, Debug)]
pub struct Heun {
    k1: Vec<f64>,
    k2: Vec<f64>,
    pred: Vec<f64>,
}

impl Heun {
    pub fn new(n: usize) -> Self {
        Heun {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            pred: vec![0.0; n],
        }
    }

    pub fn step<F>(&mut self, rhs: F, state: &mut [f64], dt: f64, forcing_now: &[f64], forcing_next: &[f64])
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let n = state.len();
        rhs(state, &mut self.k1);
        for i in 0..n {
            self.pred[i] = state[i] + dt * (self.k1[i] + forcing_now[i]);
        }
        rhs(&self.pred, &mut self.k2);
        for i in 0..n {
            state[i] += 0.5 * dt * (self.k1[i] + forcing_now[i] + self.k2[i] + forcing_next[i]);
        }
    }
}

/// Ring buffer of feature vectors (basis values of the resolved state) on the
/// integration grid; index 0 is the newest entry.
#[derive(Clone, Debug)]
pub struct HistoryBuffer {
    width: usize,
    depth: usize,
    data: Vec<f64>,
    head: usize,
    len: usize,
}

impl HistoryBuffer {
    /// Buffer deep enough for a memory of length `t0` at step `dt`.
    pub fn for_memory(width: usize, t0: f64, dt: f64) -> Self {
        HistoryBuffer::with_depth(width, (t0 / dt - 1e-9).ceil() as usize + 1)
    }

    pub fn with_depth(width: usize, depth: usize) -> Self {
        assert!(depth >= 1 && width >= 1);
        HistoryBuffer {
            width,
            depth,
            data: vec![0.0; width * depth],
            head: 0,
            len: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn clear(&mut self) {
        self.len = 0;
        self.head = 0;
    }

    /// Appends a new newest entry, evicting the oldest when full.
    pub fn push(&mut self, features: &[f64]) {
        debug_assert_eq!(features.len(), self.width);
        self.head = (self.head + 1) % self.depth;
        let start = self.head * self.width;
        self.data[start..start + self.width].copy_from_slice(features);
        self.len = (self.len + 1).min(self.depth);
    }

    pub fn replace_newest(&mut self, features: &[f64]) {
        assert!(self.len > 0, "empty history");
        let start = self.head * self.width;
        self.data[start..start + self.width].copy_from_slice(features);
    }

    /// Entry `lag` steps back from the newest.
    pub fn get(&self, lag: usize) -> &[f64] {
        assert!(lag < self.len, "lag {lag} beyond history length {}", self.len);
        let idx = (self.head + self.depth - lag) % self.depth;
        &self.data[idx * self.width..(idx + 1) * self.width]
    }
}

/// One memory contribution: `K(s)` sampled at `s = m·ds`, acting on feature
/// `feature` in the equation for resolved variable `equation`.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryTerm {
    pub equation: usize,
    pub feature: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryKernels {
    pub ds: f64,
    pub n_equations: usize,
    pub terms: Vec<MemoryTerm>,
}

impl MemoryKernels {
    /// Memory length covered by the kernel samples.
    pub fn t0(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| (t.values.len().saturating_sub(1)) as f64 * self.ds)
            .fold(0.0, f64::max)
    }

    /// `∫_0^{window} Σ K(s) feature(t - s) ds` per equation by the trapezoidal
    /// rule (`ratio = ds / dt`). The window is the history length capped at
    /// the kernel length; a trailing piece shorter than `ds` uses the kernel
    /// interpolated linearly.
    pub fn integral(&self, history: &HistoryBuffer, ratio: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let lag_len = history.len() - 1;
        let available = lag_len / ratio;
        let dt = self.ds / ratio as f64;
        for term in &self.terms {
            let last = term.values.len() - 1;
            let m_max = last.min(available);
            let mut acc = 0.0;
            if m_max > 0 {
                acc = 0.5
                    * (term.values[0] * history.get(0)[term.feature]
                        + term.values[m_max] * history.get(m_max * ratio)[term.feature]);
                for m in 1..m_max {
                    acc += term.values[m] * history.get(m * ratio)[term.feature];
                }
                acc *= self.ds;
            }
            let r = lag_len - m_max * ratio;
            if m_max < last && r > 0 {
                let w = r as f64 / ratio as f64;
                let k_end = (1.0 - w) * term.values[m_max] + w * term.values[m_max + 1];
                acc += 0.5
                    * (term.values[m_max] * history.get(m_max * ratio)[term.feature]
                        + k_end * history.get(lag_len)[term.feature])
                    * r as f64
                    * dt;
            }
            out[term.equation] += acc;
        }
    }
}

/// One Heun step of
/// `dφ/dt = markov(φ) − ∫_0^{min(t, t0)} Σ_κ K_κ(s) h^κ(φ(t−s)) ds + F(t)`.
///
/// On entry the newest history entry must hold `features(state)` at time `t`;
/// on exit it holds the features of the advanced state. `noise` carries
/// `F(t)` and `F(t + dt)`.
#[allow(clippy::too_many_arguments)]
pub fn memory_step<M, B>(
    markov_rhs: M,
    kernels: &MemoryKernels,
    basis_eval: B,
    history: &mut HistoryBuffer,
    noise: (&[f64], &[f64]),
    state: &mut [f64],
    dt: f64,
    t: f64,
) -> Result<()>
where
    M: Fn(&[f64], &mut [f64]),
    B: Fn(&[f64], &mut [f64]),
{
    let n = state.len();
    if n != kernels.n_equations {
        return Err(Error::DimensionMismatch {
            expected: kernels.n_equations,
            got: n,
        });
    }
    let ratio = step_ratio(kernels.ds, dt)?;
    let steps_so_far = (t / dt).round() as usize;
    let needed = (steps_so_far + 1).min(history.depth());
    if history.len() < needed {
        return Err(Error::InsufficientHistory(format!(
            "need {needed} entries at t = {t}, have {}",
            history.len()
        )));
    }
    let width = history.width();
    let mut mem = vec![0.0; n];
    let mut f0 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut feat = vec![0.0; width];

    markov_rhs(state, &mut f0);
    kernels.integral(history, ratio, &mut mem);
    for i in 0..n {
        f0[i] += noise.0[i] - mem[i];
    }
    let pred: Vec<f64> = (0..n).map(|i| state[i] + dt * f0[i]).collect();
    basis_eval(&pred, &mut feat);
    history.push(&feat);
    markov_rhs(&pred, &mut f1);
    kernels.integral(history, ratio, &mut mem);
    for i in 0..n {
        f1[i] += noise.1[i] - mem[i];
        state[i] += 0.5 * dt * (f0[i] + f1[i]);
    }
    basis_eval(state, &mut feat);
    history.replace_newest(&feat);
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp { step: steps_so_far });
    }
    Ok(())
}
