//! Monte Carlo memory kernels `K_{j,κ}(s) = E[(L x_j)(φ(s)) · (L h^κ)(x(0))]`
//! and the noise autocorrelation `E[(L x_j)(φ(s)) · (L x_j)(x(0))]`, both
//! averaged over invariant-density starts of the full system.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mz::hermite::{HermiteBasis, MultiIndex};
use crate::numerics::step_ratio;
use crate::quadrature::gaussian_expectation_rule;
use crate::statistics::correlation::{ensemble_moments, taper_weights, CorrelationEstimate, LagGrid};
use crate::table;
use crate::triad::{sample_initial_state, Family, TriadSystem};

/// Kernel for one (equation, basis function) pair on `[0, t0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSeries {
    pub equation: usize,
    pub kappa: MultiIndex,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl KernelSeries {
    pub fn file_name(&self) -> String {
        format!("kernel_x{}_h{}.csv", self.equation + 1, self.kappa.label())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    pub ds: f64,
    pub t0: f64,
    pub n_samples: usize,
    pub series: Vec<KernelSeries>,
}

impl KernelTable {
    pub fn n_lags(&self) -> usize {
        self.series.first().map_or(0, |s| s.values.len())
    }

    pub fn get(&self, equation: usize, kappa: &MultiIndex) -> Option<&KernelSeries> {
        self.series.iter().find(|s| s.equation == equation && &s.kappa == kappa)
    }

    /// Copy with every kernel multiplied by a cosine taper that falls from 1
    /// to 0 over the last `fraction` of `[0, t0]`.
    pub fn tapered(&self, fraction: f64) -> KernelTable {
        let w = taper_weights(self.n_lags(), fraction);
        let mut out = self.clone();
        for series in out.series.iter_mut() {
            for ((v, e), w) in series.values.iter_mut().zip(series.stderr.iter_mut()).zip(&w) {
                *v *= w;
                *e *= w;
            }
        }
        out
    }

    /// Writes one CSV per series into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for s in &self.series {
            let lags: Vec<f64> = (0..s.values.len()).map(|m| m as f64 * self.ds).collect();
            table::write_columns_to(&dir.join(s.file_name()), &["lag", "value", "stderr"], &[&lags, &s.values, &s.stderr])?;
        }
        Ok(())
    }

    /// Reads the series named by `basis` (all equations × all κ present).
    pub fn read_dir(dir: &Path, basis: &HermiteBasis, n_samples: usize) -> Result<KernelTable> {
        let mut series = Vec::new();
        let mut ds = None;
        for equation in 0..basis.dim() {
            for kappa in &basis.kappas {
                let mut s = KernelSeries {
                    equation,
                    kappa: kappa.clone(),
                    values: Vec::new(),
                    stderr: Vec::new(),
                };
                let path = dir.join(s.file_name());
                let (headers, cols) = table::read_columns_from(&path)?;
                if headers != ["lag", "value", "stderr"] || cols[0].len() < 2 {
                    return Err(Error::Parse(format!("malformed kernel file {}", path.display())));
                }
                ds.get_or_insert(cols[0][1] - cols[0][0]);
                s.values = cols[1].clone();
                s.stderr = cols[2].clone();
                series.push(s);
            }
        }
        let ds = ds.ok_or_else(|| Error::Parse("no kernels".into()))?;
        let n = series[0].values.len();
        Ok(KernelTable {
            ds,
            t0: ds * (n - 1) as f64,
            n_samples,
            series,
        })
    }
}

/// Parameters of a kernel ensemble.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelRequest {
    pub t0: f64,
    pub ds: f64,
    /// Largest lag of the noise autocorrelation; at least `t0`.
    pub noise_horizon: f64,
    /// Full-system RK4 step; must divide `ds`.
    pub dt: f64,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct KernelEstimation {
    /// Every equation paired with every basis function.
    pub kernels: KernelTable,
    /// `E[(L x_j)(φ(s)) (L x_j)(x(0))]` per equation, out to the noise horizon,
    /// averaged over forward and backward time.
    pub noise_targets: Vec<CorrelationEstimate>,
    pub n_failed: usize,
}

/// Kernels and noise autocorrelations from one ensemble of full trajectories.
pub fn estimate_kernels_and_noise(
    system: &TriadSystem,
    basis: &HermiteBasis,
    req: &KernelRequest,
) -> Result<KernelEstimation> {
    if req.n_samples < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: req.n_samples,
        });
    }
    if !(req.t0 > 0.0) {
        return Err(Error::InvalidConfig(format!("memory length t0 = {} must be positive", req.t0)));
    }
    let nr = system.n_resolved();
    if basis.dim() != nr {
        return Err(Error::DimensionMismatch {
            expected: nr,
            got: basis.dim(),
        });
    }
    let every = step_ratio(req.ds, req.dt)?;
    let n_kernel = LagGrid::covering(req.ds, req.t0)?.n_lags;
    let n_noise = LagGrid::covering(req.ds, req.noise_horizon.max(req.t0))?.n_lags;
    let n_kappa = basis.kappas.len();
    let kernel_width = nr * n_kappa * n_kernel;
    let width = kernel_width + nr * n_noise;
    let config = &system.config;

    let outcome = ensemble_moments(req.n_samples, req.seed, width, |rng, out| {
        let x0 = sample_initial_state(config, rng).data;
        let mut state = x0.clone();
        let r0 = system.resolved_rhs(&state);
        let mut g = vec![0.0; n_kappa];
        basis.generator_into(&state[..nr], &r0[..nr], &mut g);
        system.integrate_recorded(&mut state, req.dt, every, n_noise, |m, s| {
            let r = system.resolved_rhs(s);
            for j in 0..nr {
                if m < n_kernel {
                    for (k, gk) in g.iter().enumerate() {
                        out[(j * n_kappa + k) * n_kernel + m] = r[j] * gk;
                    }
                }
                out[kernel_width + j * n_noise + m] = 0.5 * r[j] * r0[j];
            }
        })?;
        // the backward half cancels the per-sample slope at lag 0, which would
        // otherwise put a kink into the even extension and a negative spectral tail
        state.copy_from_slice(&x0);
        system.integrate_recorded(&mut state, -req.dt, every, n_noise, |m, s| {
            let r = system.resolved_rhs(s);
            for j in 0..nr {
                out[kernel_width + j * n_noise + m] += 0.5 * r[j] * r0[j];
            }
        })
    })?;
    if outcome.moments.count < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: outcome.moments.count,
        });
    }
    let mean = outcome.moments.mean();
    let se = outcome.moments.stderr();
    let mut series = Vec::with_capacity(nr * n_kappa);
    for j in 0..nr {
        for (k, kappa) in basis.kappas.iter().enumerate() {
            let r = (j * n_kappa + k) * n_kernel..(j * n_kappa + k + 1) * n_kernel;
            series.push(KernelSeries {
                equation: j,
                kappa: kappa.clone(),
                values: mean[r.clone()].to_vec(),
                stderr: se[r].to_vec(),
            });
        }
    }
    let noise_targets = (0..nr)
        .map(|j| {
            outcome
                .moments
                .estimate(kernel_width + j * n_noise..kernel_width + (j + 1) * n_noise, req.ds)
        })
        .collect();
    Ok(KernelEstimation {
        kernels: KernelTable {
            ds: req.ds,
            t0: req.ds * (n_kernel - 1) as f64,
            n_samples: outcome.moments.count,
            series,
        },
        noise_targets,
        n_failed: outcome.n_failed,
    })
}

/// Kernels alone on `[0, t0]`, full-system step 10⁻³.
pub fn estimate_memory_kernels(
    system: &TriadSystem,
    basis: &HermiteBasis,
    t0: f64,
    ds: f64,
    n_samples: usize,
    seed: u64,
) -> Result<KernelTable> {
    let req = KernelRequest {
        t0,
        ds,
        noise_horizon: t0,
        dt: ds / (ds / 1e-3).round().max(1.0),
        n_samples,
        seed,
    };
    Ok(estimate_kernels_and_noise(system, basis, &req)?.kernels)
}

/// A Monte Carlo average over invariant-density samples with its error.
#[derive(Clone, Debug, PartialEq)]
pub struct PointEstimate {
    pub equation: usize,
    pub kappa: MultiIndex,
    pub value: f64,
    pub stderr: f64,
}

impl PointEstimate {
    pub fn z_score(&self) -> f64 {
        if self.stderr > 0.0 {
            self.value / self.stderr
        } else if self.value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `E[f_j(x) · g_κ(x)]` over invariant samples for every equation and κ,
/// where `per_sample` writes `(f_j)` and `(g_κ)` for one state.
fn static_moments<F>(
    system: &TriadSystem,
    basis: &HermiteBasis,
    n_samples: usize,
    seed: u64,
    per_sample: F,
) -> Result<Vec<PointEstimate>>
where
    F: Fn(&[f64], &mut [f64], &mut [f64]) + Sync,
{
    if n_samples < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: n_samples,
        });
    }
    let nr = system.n_resolved();
    let nk = basis.kappas.len();
    let outcome = ensemble_moments(n_samples, seed, nr * nk, |rng, out| {
        let state = sample_initial_state(&system.config, rng).data;
        let mut f = vec![0.0; nr];
        let mut g = vec![0.0; nk];
        per_sample(&state, &mut f, &mut g);
        for j in 0..nr {
            for k in 0..nk {
                out[j * nk + k] = f[j] * g[k];
            }
        }
        Ok(())
    })?;
    let mean = outcome.moments.mean();
    let se = outcome.moments.stderr();
    let mut out = Vec::with_capacity(nr * nk);
    for j in 0..nr {
        for (k, kappa) in basis.kappas.iter().enumerate() {
            out.push(PointEstimate {
                equation: j,
                kappa: kappa.clone(),
                value: mean[j * nk + k],
                stderr: se[j * nk + k],
            });
        }
    }
    Ok(out)
}

/// Monte Carlo `K_{j,κ}(0) = E[L x_j · L h^κ]`.
pub fn estimate_kernels_at_zero(
    system: &TriadSystem,
    basis: &HermiteBasis,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<PointEstimate>> {
    let nr = system.n_resolved();
    static_moments(system, basis, n_samples, seed, |state, f, g| {
        let r = system.resolved_rhs(state);
        f.copy_from_slice(&r[..nr]);
        basis.generator_into(&state[..nr], &r[..nr], g);
    })
}

/// Monte Carlo `E[R_j · h^κ]` for a resolved right-hand side `resolved_rhs`,
/// i.e. the Markovian projection `(L x_j, h^κ)`.
pub fn estimate_markov_terms<R>(
    system: &TriadSystem,
    basis: &HermiteBasis,
    resolved_rhs: R,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<PointEstimate>>
where
    R: Fn(&[f64]) -> [f64; 2] + Sync,
{
    let nr = system.n_resolved();
    static_moments(system, basis, n_samples, seed, |state, f, g| {
        let r = resolved_rhs(state);
        f.copy_from_slice(&r[..nr]);
        basis.eval_into(&state[..nr], g);
    })
}

/// Ranks candidate basis functions by `|K_{j,κ}(0)|`, largest first.
pub fn screen_basis(
    system: &TriadSystem,
    candidates: Vec<MultiIndex>,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<PointEstimate>> {
    let basis = HermiteBasis::new(system.config.beta, candidates, Vec::new())?;
    let mut est = estimate_kernels_at_zero(system, &basis, n_samples, seed)?;
    est.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()));
    Ok(est)
}

/// Conditional bath average `E[R_i R_j | x̂]` as a 2×2 matrix, using
/// `E[y_k²] = E[z_k²] = v`, `E[y_k² z_k²] = v²` and vanishing odd moments.
pub fn conditional_rhs_covariance(system: &TriadSystem, resolved: &[f64]) -> [[f64; 2]; 2] {
    let cfg = &system.config;
    let v = cfg.equilibrium_variance();
    let la2 = cfg.additive_strength().powi(2);
    let lm2 = cfg.multiplicative_strength().powi(2);
    let x1 = resolved[0];
    let x2 = resolved.get(1).copied().unwrap_or(0.0);
    let (mut a11, mut a22, mut a12) = (0.0, 0.0, 0.0);
    let (mut m11, mut m22, mut m12) = (0.0, 0.0, 0.0);
    for c in &system.coupling.modes {
        let (a1, a2) = (c[Family::X1Yz], c[Family::X2Yz]);
        let (p, q) = (c[Family::X1X2y], c[Family::X1X2z]);
        let (r, s) = (c[Family::X2X1y], c[Family::X2X1z]);
        a11 += a1 * a1;
        a22 += a2 * a2;
        a12 += a1 * a2;
        m11 += p * p + q * q;
        m22 += r * r + s * s;
        m12 += p * r + q * s;
    }
    let c11 = la2 * v * v * a11 + lm2 * v * x2 * x2 * m11;
    let c22 = la2 * v * v * a22 + lm2 * v * x1 * x1 * m22;
    let c12 = la2 * v * v * a12 + lm2 * v * x1 * x2 * m12;
    [[c11, c12], [c12, c22]]
}

/// Closed-form `K_{j,κ}(0) = E[Σ_i E[R_j R_i | x̂] ∂_i h^κ(x̂)]`, with the
/// outer expectation over the resolved Gaussian by tensor Gauss-Hermite.
pub fn closed_form_kernel_at_zero(system: &TriadSystem, basis: &HermiteBasis, equation: usize, kappa: &MultiIndex) -> f64 {
    let dim = system.n_resolved();
    let (nodes, weights) = gaussian_expectation_rule(24, system.config.equilibrium_variance());
    let mut grad = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    let mut total = 0.0;
    let n = nodes.len();
    let count = n.pow(dim as u32);
    for idx in 0..count {
        let mut w = 1.0;
        let mut rem = idx;
        for xi in x.iter_mut() {
            let q = rem % n;
            rem /= n;
            *xi = nodes[q];
            w *= weights[q];
        }
        let c = conditional_rhs_covariance(system, &x);
        basis.gradient(kappa, &x, &mut grad);
        let s: f64 = (0..dim).map(|i| c[equation][i] * grad[i]).sum();
        total += w * s;
    }
    total
}
