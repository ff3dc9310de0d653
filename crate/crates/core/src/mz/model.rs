//! Short-memory reduced models with a truncated memory integral and colored
//! noise, and their delta-function simplification.

use std::path::Path;

use rand::Rng;
use rand_distr::Normal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv;
use crate::mz::hermite::HermiteBasis;
use crate::numerics::{memory_step, step_ratio, Heun, HistoryBuffer, MemoryKernels, MemoryTerm, TimeGrid};
use crate::rng::{stream_rng, StreamRng};
use crate::statistics::correlation::{ensemble_moments_indexed, trapezoid, CorrelationEstimate, LagGrid};
use crate::statistics::kernels::{estimate_kernels_and_noise, KernelEstimation, KernelRequest, KernelTable};
use crate::statistics::noise::{fit_ma_coefficients, ColoredNoiseModel};
use crate::triad::{ModelCase, TriadSystem};

/// Fraction of the kernel window, and of the noise-correlation horizon,
/// covered by the taper.
pub const TAPER_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct MzModel {
    pub case: ModelCase,
    pub basis: HermiteBasis,
    /// Kernels as estimated, before tapering.
    pub kernels: KernelTable,
    pub noise: Vec<ColoredNoiseModel>,
    pub t0: f64,
    pub taper: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MzBuildOptions {
    pub t0: f64,
    pub ds: f64,
    pub noise_horizon: f64,
    /// Full-system step of the kernel ensemble.
    pub dt_full: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub taper: bool,
    /// Noise filter half length; `None` picks the default.
    pub tap_count: Option<usize>,
}

impl MzBuildOptions {
    pub fn for_case(case: ModelCase) -> Self {
        MzBuildOptions {
            t0: default_t0(case),
            ds: 1e-2,
            noise_horizon: 10.0,
            dt_full: 1e-3,
            n_samples: 10_000,
            seed: 0,
            taper: true,
            tap_count: None,
        }
    }
}

/// Memory length used for each case: 1, 2 and 1.
pub fn default_t0(case: ModelCase) -> f64 {
    match case {
        ModelCase::Additive | ModelCase::Combined => 1.0,
        ModelCase::Multiplicative => 2.0,
    }
}

/// Estimates kernels and noise correlations from the full system and fits
/// the noise filters.
pub fn build_mz_model(system: &TriadSystem, basis: &HermiteBasis, opt: &MzBuildOptions) -> Result<MzModel> {
    let req = KernelRequest {
        t0: opt.t0,
        ds: opt.ds,
        noise_horizon: opt.noise_horizon,
        dt: opt.dt_full,
        n_samples: opt.n_samples,
        seed: opt.seed,
    };
    let est = estimate_kernels_and_noise(system, basis, &req)?;
    MzModel::from_estimation(system.config.case, basis.clone(), &est, opt.taper, opt.tap_count)
}

impl MzModel {
    pub fn from_estimation(
        case: ModelCase,
        basis: HermiteBasis,
        est: &KernelEstimation,
        taper: bool,
        tap_count: Option<usize>,
    ) -> Result<Self> {
        if basis.dim() != case.n_resolved() || est.noise_targets.len() != case.n_resolved() {
            return Err(Error::DimensionMismatch {
                expected: case.n_resolved(),
                got: basis.dim(),
            });
        }
        for term in &basis.terms {
            if est.kernels.get(term.equation, &basis.kappas[term.kappa]).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "no kernel for x{} and h{}",
                    term.equation + 1,
                    basis.kappas[term.kappa]
                )));
            }
        }
        let noise = est
            .noise_targets
            .iter()
            .map(|t| {
                if taper {
                    fit_ma_coefficients(&t.tapered(TAPER_FRACTION), tap_count)
                } else {
                    fit_ma_coefficients(t, tap_count)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MzModel {
            case,
            basis,
            t0: est.kernels.t0,
            kernels: est.kernels.clone(),
            noise,
            taper,
        })
    }

    pub fn n_resolved(&self) -> usize {
        self.case.n_resolved()
    }

    /// Kernels used in the dynamics (tapered when enabled).
    pub fn effective_kernels(&self) -> KernelTable {
        if self.taper {
            self.kernels.tapered(TAPER_FRACTION)
        } else {
            self.kernels.clone()
        }
    }

    /// The memory terms of the basis as stepper input.
    pub fn memory_kernels(&self) -> MemoryKernels {
        let k = self.effective_kernels();
        let terms = self
            .basis
            .terms
            .iter()
            .map(|t| MemoryTerm {
                equation: t.equation,
                feature: t.kappa,
                values: k
                    .get(t.equation, &self.basis.kappas[t.kappa])
                    .expect("checked at construction")
                    .values
                    .clone(),
            })
            .collect();
        MemoryKernels {
            ds: k.ds,
            n_equations: self.n_resolved(),
            terms,
        }
    }

    /// Integrates from `x` for `noise[j].len() − 1` steps of `dt` with the given
    /// noise values at every grid point, recording every `every` steps.
    pub fn integrate_with_noise<F>(&self, kernels: &MemoryKernels, x: &mut [f64], dt: f64, noise: &[Vec<f64>], every: usize, mut record: F) -> Result<()>
    where
        F: FnMut(usize, &[f64]),
    {
        let n_steps = noise[0].len() - 1;
        let width = self.basis.kappas.len();
        let mut history = HistoryBuffer::for_memory(width, kernels.t0(), dt);
        let mut feat = vec![0.0; width];
        self.basis.eval_into(x, &mut feat);
        history.push(&feat);
        let nr = x.len();
        let mut f0 = vec![0.0; nr];
        let mut f1 = vec![0.0; nr];
        record(0, x);
        for n in 0..n_steps {
            for j in 0..nr {
                f0[j] = noise[j][n];
                f1[j] = noise[j][n + 1];
            }
            memory_step(
                |_, d| d.iter_mut().for_each(|v| *v = 0.0),
                kernels,
                |s, out| self.basis.eval_into(s, out),
                &mut history,
                (&f0, &f1),
                x,
                dt,
                n as f64 * dt,
            )?;
            if (n + 1) % every == 0 {
                record(n + 1, x);
            }
        }
        Ok(())
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.kernels.write_dir(&dir.join("kernels"))?;
        std::fs::write(dir.join("basis.txt"), self.basis.to_manifest())?;
        for (j, n) in self.noise.iter().enumerate() {
            n.write_taps_to(&dir.join(format!("noise_x{}_taps.csv", j + 1)))?;
            n.target.write_csv_to(&dir.join(format!("noise_x{}_target.csv", j + 1)))?;
        }
        let manifest = format!(
            "case = {}\nt0 = {}\nds = {}\nnoise_dt = {}\ntaper = {}\nn_samples = {}\n",
            self.case,
            kv::fmt_f64(self.t0),
            kv::fmt_f64(self.kernels.ds),
            kv::fmt_f64(self.noise[0].dt),
            self.taper,
            self.kernels.n_samples
        );
        std::fs::write(dir.join("model.txt"), manifest)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let manifest = kv::parse(&std::fs::read_to_string(dir.join("model.txt"))?)?;
        let get = |k: &str| {
            manifest
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::Parse(format!("model manifest lacks `{k}`")))
        };
        let case: ModelCase = get("case")?.parse()?;
        let n_samples = kv::parse_usize("n_samples", &get("n_samples")?)?;
        let noise_dt = kv::parse_f64("noise_dt", &get("noise_dt")?)?;
        let basis = HermiteBasis::from_manifest(&std::fs::read_to_string(dir.join("basis.txt"))?)?;
        let kernels = KernelTable::read_dir(&dir.join("kernels"), &basis, n_samples)?;
        let mut noise = Vec::new();
        for j in 0..case.n_resolved() {
            let target = CorrelationEstimate::read_csv_from(&dir.join(format!("noise_x{}_target.csv", j + 1)), n_samples)?;
            noise.push(ColoredNoiseModel::read_taps_from(
                &dir.join(format!("noise_x{}_taps.csv", j + 1)),
                noise_dt,
                target,
            )?);
        }
        Ok(MzModel {
            case,
            basis,
            t0: kernels.t0,
            kernels,
            noise,
            taper: get("taper")? == "true",
        })
    }
}

/// `dφ_j/dt = −Σ_κ c_{j,κ} h^κ(φ) + F_j(t)` with `c` the kernel integrals.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaMzModel {
    pub case: ModelCase,
    pub basis: HermiteBasis,
    /// `(equation, basis index, coefficient)` per memory term.
    pub coefficients: Vec<(usize, usize, f64)>,
    pub noise: Vec<ColoredNoiseModel>,
}

pub fn reduce_to_delta_mz(model: &MzModel) -> DeltaMzModel {
    let mk = model.memory_kernels();
    let coefficients = mk
        .terms
        .iter()
        .map(|t| (t.equation, t.feature, trapezoid(&t.values, mk.ds)))
        .collect();
    DeltaMzModel {
        case: model.case,
        basis: model.basis.clone(),
        coefficients,
        noise: model.noise.clone(),
    }
}

impl DeltaMzModel {
    pub fn n_resolved(&self) -> usize {
        self.case.n_resolved()
    }

    fn drift(&self, x: &[f64], feat: &mut [f64], d: &mut [f64]) {
        self.basis.eval_into(x, feat);
        d.iter_mut().for_each(|v| *v = 0.0);
        for &(j, k, c) in &self.coefficients {
            d[j] -= c * feat[k];
        }
    }

    pub fn integrate_with_noise<F>(&self, x: &mut [f64], dt: f64, noise: &[Vec<f64>], every: usize, mut record: F) -> Result<()>
    where
        F: FnMut(usize, &[f64]),
    {
        let n_steps = noise[0].len() - 1;
        let nr = x.len();
        let feat = std::cell::RefCell::new(vec![0.0; self.basis.kappas.len()]);
        let mut f0 = vec![0.0; nr];
        let mut f1 = vec![0.0; nr];
        let mut heun = Heun::new(nr);
        record(0, x);
        for n in 0..n_steps {
            for j in 0..nr {
                f0[j] = noise[j][n];
                f1[j] = noise[j][n + 1];
            }
            heun.step(|s, d| self.drift(s, &mut feat.borrow_mut(), d), x, dt, &f0, &f1);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { step: n + 1 });
            }
            if (n + 1) % every == 0 {
                record(n + 1, x);
            }
        }
        Ok(())
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = format!("case = {}\n", self.case);
        for &(j, k, c) in &self.coefficients {
            s.push_str(&format!("c[x{}][h{}] = {}\n", j + 1, self.basis.kappas[k].label(), kv::fmt_f64(c)));
        }
        s
    }
}

/// Initial conditions and noise paths shared by reduced-model ensembles.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseEnsemble {
    pub dt: f64,
    pub x0: Vec<Vec<f64>>,
    /// `paths[i][j]` holds `F_j` at `n_steps + 1` grid points for sample `i`.
    pub paths: Vec<Vec<Vec<f64>>>,
}

impl NoiseEnsemble {
    pub fn n_samples(&self) -> usize {
        self.x0.len()
    }

    pub fn n_steps(&self) -> usize {
        self.paths.first().map_or(0, |p| p[0].len() - 1)
    }
}

/// Draws invariant-density starts and noise paths for `n_samples` samples on
/// a grid of `n_steps` steps of `dt`. When `dt` is finer than the noise grid
/// the noise is interpolated linearly.
pub fn generate_noise_ensemble(
    noise: &[ColoredNoiseModel],
    beta: f64,
    dt: f64,
    n_steps: usize,
    n_samples: usize,
    seed: u64,
) -> Result<NoiseEnsemble> {
    let ratio = step_ratio(noise[0].dt, dt)?;
    let normal = Normal::new(0.0, (0.5 / beta).sqrt()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let n_coarse = n_steps.div_ceil(ratio);
    let samples: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let x0: Vec<f64> = (0..noise.len()).map(|_| rng.sample(normal)).collect();
            let paths = noise
                .iter()
                .map(|m| interpolate(&m.synthesize(&mut rng, n_coarse + 1), ratio, n_steps))
                .collect();
            (x0, paths)
        })
        .collect();
    let (x0, paths) = samples.into_iter().unzip();
    Ok(NoiseEnsemble { dt, x0, paths })
}

fn interpolate(coarse: &[f64], ratio: usize, n_steps: usize) -> Vec<f64> {
    if ratio == 1 {
        return coarse[..=n_steps].to_vec();
    }
    (0..=n_steps)
        .map(|n| {
            let i = n / ratio;
            let r = (n % ratio) as f64 / ratio as f64;
            if r == 0.0 {
                coarse[i]
            } else {
                (1.0 - r) * coarse[i] + r * coarse[i + 1]
            }
        })
        .collect()
}

/// Which reduced dynamics to run over a [`NoiseEnsemble`].
#[derive(Clone, Copy, Debug)]
pub enum Reduced<'a> {
    Mz(&'a MzModel),
    DeltaMz(&'a DeltaMzModel),
}

/// Autocorrelations of the resolved variables over the prepared ensemble.
pub fn reduced_autocorrelations(model: Reduced<'_>, ens: &NoiseEnsemble, grid: LagGrid) -> Result<(Vec<CorrelationEstimate>, usize)> {
    let every = step_ratio(grid.step, ens.dt)?;
    let needed = (grid.n_lags - 1) * every;
    if ens.n_steps() < needed {
        return Err(Error::InsufficientHistory(format!(
            "noise covers {} steps, lag grid needs {needed}",
            ens.n_steps()
        )));
    }
    let nr = ens.x0.first().map_or(0, |x| x.len());
    let nl = grid.n_lags;
    let kernels = match model {
        Reduced::Mz(m) => Some(m.memory_kernels()),
        Reduced::DeltaMz(_) => None,
    };
    let outcome = ensemble_moments_indexed(ens.n_samples(), 0, nr * nl, |i, _rng: &mut StreamRng, out| {
        let mut x = ens.x0[i].clone();
        let noise: Vec<Vec<f64>> = ens.paths[i].iter().map(|p| p[..=needed].to_vec()).collect();
        let x0 = x.clone();
        let mut rec = |n: usize, s: &[f64]| {
            let m = n / every;
            for j in 0..nr {
                out[j * nl + m] = s[j] * x0[j];
            }
        };
        match model {
            Reduced::Mz(m) => m.integrate_with_noise(kernels.as_ref().expect("set for Mz"), &mut x, ens.dt, &noise, every, &mut rec),
            Reduced::DeltaMz(d) => d.integrate_with_noise(&mut x, ens.dt, &noise, every, &mut rec),
        }
    })?;
    if outcome.moments.count < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: outcome.moments.count,
        });
    }
    let est = (0..nr).map(|j| outcome.moments.estimate(j * nl..(j + 1) * nl, grid.step)).collect();
    Ok((est, outcome.n_failed))
}

/// A reduced trajectory, truncated at the first non-finite step.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedTrajectory {
    pub states: Vec<Vec<f64>>,
    pub blow_up: Option<usize>,
}

fn single_path(noise: &[ColoredNoiseModel], grid: TimeGrid, seed: u64) -> Result<Vec<Vec<f64>>> {
    let ratio = step_ratio(noise[0].dt, grid.dt)?;
    let mut rng = stream_rng(seed, 0);
    let n_coarse = grid.n_steps.div_ceil(ratio);
    Ok(noise
        .iter()
        .map(|m| interpolate(&m.synthesize(&mut rng, n_coarse + 1), ratio, grid.n_steps))
        .collect())
}

fn collect_trajectory(run: impl FnOnce(&mut Vec<Vec<f64>>) -> Result<()>) -> Result<ReducedTrajectory> {
    let mut states = Vec::new();
    match run(&mut states) {
        Ok(()) => Ok(ReducedTrajectory { states, blow_up: None }),
        Err(Error::BlowUp { step }) => Ok(ReducedTrajectory {
            states,
            blow_up: Some(step),
        }),
        Err(e) => Err(e),
    }
}

/// Simulates the memory model from `x0` on `grid`, noise drawn from `seed`.
pub fn simulate_mz(model: &MzModel, x0: &[f64], grid: TimeGrid, seed: u64) -> Result<ReducedTrajectory> {
    if x0.len() != model.n_resolved() {
        return Err(Error::DimensionMismatch {
            expected: model.n_resolved(),
            got: x0.len(),
        });
    }
    let noise = single_path(&model.noise, grid, seed)?;
    let kernels = model.memory_kernels();
    let mut x = x0.to_vec();
    collect_trajectory(|states| {
        model.integrate_with_noise(&kernels, &mut x, grid.dt, &noise, 1, |_, s| states.push(s.to_vec()))
    })
}

pub fn simulate_delta_mz(model: &DeltaMzModel, x0: &[f64], grid: TimeGrid, seed: u64) -> Result<ReducedTrajectory> {
    if x0.len() != model.n_resolved() {
        return Err(Error::DimensionMismatch {
            expected: model.n_resolved(),
            got: x0.len(),
        });
    }
    let noise = single_path(&model.noise, grid, seed)?;
    let mut x = x0.to_vec();
    collect_trajectory(|states| model.integrate_with_noise(&mut x, grid.dt, &noise, 1, |_, s| states.push(s.to_vec())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mz::hermite::MultiIndex;
    use crate::statistics::kernels::KernelSeries;

    fn table(case: ModelCase, basis: &HermiteBasis, t0: f64, ds: f64, f: impl Fn(usize, usize, f64) -> f64) -> KernelTable {
        let n = (t0 / ds).round() as usize + 1;
        let mut series = Vec::new();
        for j in 0..case.n_resolved() {
            for (k, kappa) in basis.kappas.iter().enumerate() {
                series.push(KernelSeries {
                    equation: j,
                    kappa: kappa.clone(),
                    values: (0..n).map(|m| f(j, k, m as f64 * ds)).collect(),
                    stderr: vec![0.0; n],
                });
            }
        }
        KernelTable {
            ds,
            t0,
            n_samples: 1,
            series,
        }
    }

    fn additive_model(kernel: impl Fn(f64) -> f64, noise: ColoredNoiseModel, t0: f64, ds: f64, taper: bool) -> MzModel {
        let basis = HermiteBasis::for_case(ModelCase::Additive, 50.0);
        MzModel {
            case: ModelCase::Additive,
            kernels: table(ModelCase::Additive, &basis, t0, ds, |_, _, s| kernel(s)),
            basis,
            noise: vec![noise],
            t0,
            taper,
        }
    }

    #[test]
    fn zero_model_is_frozen() {
        let m = additive_model(|_| 0.0, ColoredNoiseModel::white(0.01, 0.0), 1.0, 0.01, true);
        let tr = simulate_mz(&m, &[0.07], TimeGrid::new(0.01, 300).unwrap(), 1).unwrap();
        assert!(tr.states.iter().all(|s| s[0] == 0.07));
        let d = reduce_to_delta_mz(&m);
        assert!(d.coefficients.iter().all(|c| c.2 == 0.0));
        let tr = simulate_delta_mz(&d, &[0.07], TimeGrid::new(0.01, 300).unwrap(), 1).unwrap();
        assert!(tr.states.iter().all(|s| s[0] == 0.07));
    }

    #[test]
    fn constant_kernel_integrates_to_c_t0() {
        let m = additive_model(|_| 0.3, ColoredNoiseModel::white(0.01, 0.0), 2.0, 0.01, false);
        let d = reduce_to_delta_mz(&m);
        assert!((d.coefficients[0].2 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn taper_changes_only_the_tail() {
        let m = additive_model(|_| 1.0, ColoredNoiseModel::white(0.01, 0.0), 1.0, 0.01, true);
        let k = m.memory_kernels();
        assert!(k.terms[0].values[..90].iter().all(|&v| v == 1.0));
        assert!(k.terms[0].values[100].abs() < 1e-15);
    }

    #[test]
    fn memory_model_is_second_order_in_dt() {
        let m = additive_model(|s| 0.5 * (-3.0 * s).exp(), ColoredNoiseModel::white(0.02, 0.0), 1.0, 0.02, false);
        let end = |dt: f64| {
            let grid = TimeGrid::covering(dt, 4.0).unwrap();
            let tr = simulate_mz(&m, &[0.1], grid, 9).unwrap();
            tr.states.last().unwrap()[0]
        };
        let (a, b, c) = (end(0.02), end(0.01), end(0.005));
        let ratio = (a - b).abs() / (b - c).abs();
        assert!(ratio > 3.0 && ratio < 5.5, "{a} {b} {c} ratio {ratio}");
    }

    #[test]
    fn delta_cell_kernel_reproduces_ou() {
        // K = γ on one cell with weight ds/2: effective damping γ ds / 2 · sqrt(2β)
        let ds = 0.01;
        let gamma = 2.0 / (ds * 10.0);
        let rate = gamma * ds / 2.0 * 10.0;
        let beta = 50.0;
        let var = 0.5 / beta;
        // white forcing of intensity 2·rate·var keeps the stationary variance var
        let noise = ColoredNoiseModel::white(ds, 2.0 * rate * var / ds);
        let mut m = additive_model(|s| if s == 0.0 { gamma } else { 0.0 }, noise, 1.0, ds, false);
        m.kernels.series[0].values.truncate(2);
        m.kernels.t0 = ds;
        let ens = generate_noise_ensemble(&m.noise, beta, ds, 200, 4000, 5).unwrap();
        let grid = LagGrid::covering(0.2, 2.0).unwrap();
        let (c, _) = reduced_autocorrelations(Reduced::Mz(&m), &ens, grid).unwrap();
        for (i, (&v, &e)) in c[0].values.iter().zip(&c[0].stderr).enumerate() {
            let exact = var * (-rate * i as f64 * 0.2).exp();
            assert!((v - exact).abs() < 3.5 * e + 0.03 * exact, "lag {i}: {v} vs {exact}");
        }
    }

    #[test]
    fn shared_noise_is_deterministic() {
        let target = CorrelationEstimate::from_fn(LagGrid::covering(0.01, 5.0).unwrap(), |t| 1e-4 * (-t).exp());
        let noise = fit_ma_coefficients(&target, None).unwrap();
        let m = additive_model(|s| 0.02 * (-2.0 * s).exp(), noise, 1.0, 0.01, true);
        let a = generate_noise_ensemble(&m.noise, 50.0, 0.01, 100, 20, 3).unwrap();
        let b = generate_noise_ensemble(&m.noise, 50.0, 0.01, 100, 20, 3).unwrap();
        assert_eq!(a, b);
        let grid = LagGrid::covering(0.1, 1.0).unwrap();
        let ra = reduced_autocorrelations(Reduced::Mz(&m), &a, grid).unwrap();
        let rb = reduced_autocorrelations(Reduced::Mz(&m), &b, grid).unwrap();
        assert_eq!(ra.0, rb.0);
    }

    #[test]
    fn model_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let basis = HermiteBasis::for_case(ModelCase::Multiplicative, 50.0);
        let target = CorrelationEstimate::from_fn(LagGrid::covering(0.01, 10.0).unwrap(), |t| 1e-4 * (-t).exp());
        let noise = fit_ma_coefficients(&target, None).unwrap();
        let m = MzModel {
            case: ModelCase::Multiplicative,
            kernels: table(ModelCase::Multiplicative, &basis, 0.5, 0.01, |j, k, s| (j + k) as f64 * (-s).exp()),
            basis,
            noise: vec![noise.clone(), noise],
            t0: 0.5,
            taper: true,
        };
        m.write_dir(dir.path()).unwrap();
        let back = MzModel::read_dir(dir.path()).unwrap();
        assert_eq!(back.kernels.series, m.kernels.series);
        assert_eq!(back.basis, m.basis);
        assert_eq!(back.noise[1].taps, m.noise[1].taps);
        assert_eq!(back.taper, m.taper);
        assert!((back.t0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn missing_kernel_rejected() {
        let basis = HermiteBasis::for_case(ModelCase::Additive, 50.0);
        let other = HermiteBasis::new(50.0, vec![MultiIndex(vec![3])], vec![]).unwrap();
        let est = KernelEstimation {
            kernels: table(ModelCase::Additive, &other, 0.1, 0.01, |_, _, _| 0.0),
            noise_targets: vec![CorrelationEstimate::exact(0.01, vec![0.0; 5])],
            n_failed: 0,
        };
        assert!(MzModel::from_estimation(ModelCase::Additive, basis, &est, true, None).is_err());
    }
}
