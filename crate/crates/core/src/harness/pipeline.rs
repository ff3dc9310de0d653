use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::amrs::{amrs_autocorrelations, epsilon, fit_ou_parameters, AmrsParams, OUParams};
use crate::error::{Error, Result};
use crate::harness::report::{compare, ComparisonReport};
use crate::harness::spec::ExperimentSpec;
use crate::kv;
use crate::mz::{
    generate_noise_ensemble, reduce_to_delta_mz, reduced_autocorrelations, DeltaMzModel, HermiteBasis, MzModel,
    NoiseEnsemble, Reduced,
};
use crate::numerics::step_ratio;
use crate::rng::derive_seed;
use crate::statistics::{
    ensemble_autocorrelations, estimate_kernels_and_noise, CorrelationEstimate, KernelEstimation, KernelRequest, KernelTable,
};
use crate::triad::{generate_couplings, sample_initial_state, TriadCoupling, TriadSystem};

const SALT_TRUTH: u64 = 1;
const SALT_KERNELS: u64 = 2;
const SALT_AMRS: u64 = 4;
const SALT_NOISE: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Couplings,
    Truth,
    FitOu,
    Amrs,
    Kernels,
    Mz,
    DeltaMz,
    Compare,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Couplings,
        Stage::Truth,
        Stage::FitOu,
        Stage::Amrs,
        Stage::Kernels,
        Stage::Mz,
        Stage::DeltaMz,
        Stage::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Couplings => "couplings",
            Stage::Truth => "truth",
            Stage::FitOu => "fit-ou",
            Stage::Amrs => "amrs",
            Stage::Kernels => "kernels",
            Stage::Mz => "mz",
            Stage::DeltaMz => "delta-mz",
            Stage::Compare => "compare",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct TruthStats {
    pub resolved: Vec<CorrelationEstimate>,
    /// Mode `k` at index `k − 1`: mean of the `y_k` and `z_k` correlations.
    pub bath: Vec<CorrelationEstimate>,
    pub n_failed: usize,
}

#[derive(Clone, Debug)]
pub struct FittedOu {
    pub ou: OUParams,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct ReducedRun {
    pub resolved: Vec<CorrelationEstimate>,
    pub n_failed: usize,
    /// Wall time of the reduced integration alone.
    pub integration_seconds: f64,
    pub total_seconds: f64,
}

/// One experiment directory. Each stage writes its artifacts into a
/// subdirectory named after it and marks completion with a `done` file;
/// completed stages are loaded instead of recomputed.
pub struct Experiment {
    pub spec: ExperimentSpec,
    dir: PathBuf,
}

impl Experiment {
    /// Opens `spec.out_dir`, refusing a directory produced by a different spec.
    pub fn open(spec: ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let dir = spec.out_dir.clone();
        std::fs::create_dir_all(&dir)?;
        let manifest = dir.join("manifest.txt");
        let text = spec.to_kv_string();
        if manifest.exists() {
            let old = std::fs::read_to_string(&manifest)?;
            if old != text {
                return Err(Error::InvalidConfig(format!(
                    "{} holds artifacts of a different spec",
                    dir.display()
                )));
            }
        } else {
            std::fs::write(&manifest, text)?;
        }
        Ok(Experiment { spec, dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.dir.join(stage.name())
    }

    pub fn is_done(&self, stage: Stage) -> bool {
        self.stage_dir(stage).join("done").exists()
    }

    fn run_stage<T>(
        &self,
        stage: Stage,
        load: impl FnOnce(&Path) -> Result<T>,
        compute: impl FnOnce(&Path) -> Result<T>,
    ) -> Result<T> {
        let dir = self.stage_dir(stage);
        if self.is_done(stage) {
            return load(&dir).map_err(|e| e.in_stage(stage.name()));
        }
        std::fs::create_dir_all(&dir).map_err(|e| Error::from(e).in_stage(stage.name()))?;
        let start = Instant::now();
        let value = compute(&dir).map_err(|e| e.in_stage(stage.name()))?;
        let secs = start.elapsed().as_secs_f64();
        std::fs::write(dir.join("done"), format!("seconds = {}\n", kv::fmt_f64(secs)))
            .map_err(|e| Error::from(e).in_stage(stage.name()))?;
        Ok(value)
    }

    pub fn couplings(&self) -> Result<TriadCoupling> {
        let cfg = &self.spec.config;
        self.run_stage(
            Stage::Couplings,
            |d| TriadCoupling::from_kv_str(&std::fs::read_to_string(d.join("coupling.txt"))?),
            |d| {
                let c = generate_couplings(cfg.case, cfg.n_active, cfg.seed)?;
                std::fs::write(d.join("coupling.txt"), c.to_kv_string())?;
                Ok(c)
            },
        )
    }

    pub fn system(&self) -> Result<TriadSystem> {
        TriadSystem::new(self.spec.config.clone(), self.couplings()?)
    }

    pub fn truth(&self) -> Result<TruthStats> {
        let system = self.system()?;
        let spec = &self.spec;
        let nr = spec.config.n_resolved();
        let lambda = spec.config.capital_lambda;
        self.run_stage(
            Stage::Truth,
            |d| {
                let (n, n_failed) = read_counts(d)?;
                let resolved = (1..=nr)
                    .map(|j| CorrelationEstimate::read_csv_from(&d.join(format!("x{j}.csv")), n))
                    .collect::<Result<_>>()?;
                let bath = (1..=lambda)
                    .map(|k| CorrelationEstimate::read_csv_from(&d.join(format!("bath_mode_{k}.csv")), n))
                    .collect::<Result<_>>()?;
                Ok(TruthStats {
                    resolved,
                    bath,
                    n_failed,
                })
            },
            |d| {
                let grid = spec.lag_grid()?;
                let every = step_ratio(spec.lag_step, spec.truth_dt)?;
                let source = |rng: &mut crate::rng::StreamRng, g: crate::statistics::LagGrid| {
                    let mut state = sample_initial_state(&system.config, rng).data;
                    let mut out = Vec::with_capacity(g.n_lags);
                    system.integrate_recorded(&mut state, spec.truth_dt, every, g.n_lags, |_, s| out.push(s.to_vec()))?;
                    Ok(out)
                };
                let components: Vec<usize> = (0..system.state_len()).collect();
                let (est, n_failed) =
                    ensemble_autocorrelations(source, &components, grid, spec.n_truth, derive_seed(spec.seed, SALT_TRUTH))?;
                let resolved: Vec<CorrelationEstimate> = est[..nr].to_vec();
                let bath = (0..lambda)
                    .map(|k| est[nr + 2 * k].average(&est[nr + 2 * k + 1]))
                    .collect::<Result<Vec<_>>>()?;
                for (j, c) in resolved.iter().enumerate() {
                    c.write_csv_to(&d.join(format!("x{}.csv", j + 1)))?;
                }
                for (k, c) in bath.iter().enumerate() {
                    c.write_csv_to(&d.join(format!("bath_mode_{}.csv", k + 1)))?;
                }
                write_counts(d, resolved[0].n_samples, n_failed)?;
                Ok(TruthStats {
                    resolved,
                    bath,
                    n_failed,
                })
            },
        )
    }

    pub fn fit_ou(&self) -> Result<FittedOu> {
        let spec = &self.spec;
        let cfg = &spec.config;
        let eps = |ou: &OUParams| -> Result<f64> { Ok(epsilon(cfg.effective_strength(), ou.rate(1)?, cfg.beta)) };
        self.run_stage(
            Stage::FitOu,
            |d| {
                let ou = OUParams::from_kv_str(&std::fs::read_to_string(d.join("ou.txt"))?)?;
                Ok(FittedOu { epsilon: eps(&ou)?, ou })
            },
            |d| {
                let system = self.system()?;
                let bath = if spec.procedure == crate::amrs::FitProcedure::P1 {
                    Vec::new()
                } else {
                    self.truth()?.bath
                };
                let ou = fit_ou_parameters(spec.procedure, &bath, cfg.beta, spec.c1, &system, &spec.p3_options()?)?;
                let e = eps(&ou)?;
                std::fs::write(d.join("ou.txt"), ou.to_kv_string())?;
                std::fs::write(d.join("epsilon.txt"), format!("epsilon = {}\n", kv::fmt_f64(e)))?;
                Ok(FittedOu { ou, epsilon: e })
            },
        )
    }

    pub fn amrs(&self) -> Result<(AmrsParams, ReducedRun)> {
        let spec = &self.spec;
        let nr = spec.config.n_resolved();
        self.run_stage(
            Stage::Amrs,
            |d| {
                let params = AmrsParams::from_kv_str(&std::fs::read_to_string(d.join("params.txt"))?)?;
                Ok((params, read_run(d, nr)?))
            },
            |d| {
                let system = self.system()?;
                let ou = self.fit_ou()?.ou;
                let params = AmrsParams::compute(&system, &ou)?;
                std::fs::write(d.join("params.txt"), params.to_kv_string())?;
                let start = Instant::now();
                let (resolved, n_failed) = amrs_autocorrelations(
                    &params,
                    spec.config.beta,
                    spec.reduced_dt,
                    spec.lag_grid()?,
                    spec.n_amrs,
                    derive_seed(spec.seed, SALT_AMRS),
                )?;
                let secs = start.elapsed().as_secs_f64();
                let run = ReducedRun {
                    resolved,
                    n_failed,
                    integration_seconds: secs,
                    total_seconds: secs,
                };
                write_run(d, &run)?;
                Ok((params, run))
            },
        )
    }

    pub fn kernels(&self) -> Result<MzModel> {
        let spec = &self.spec;
        self.run_stage(
            Stage::Kernels,
            |d| MzModel::read_dir(&d.join("model")),
            |d| {
                let system = self.system()?;
                let basis = HermiteBasis::for_case(spec.config.case, spec.config.beta);
                let req = KernelRequest {
                    t0: spec.t0,
                    ds: spec.kernel_ds,
                    noise_horizon: spec.noise_horizon,
                    dt: spec.truth_dt,
                    n_samples: spec.n_kernel,
                    seed: derive_seed(spec.seed, SALT_KERNELS),
                };
                // the raw estimate is kept even if the noise fit below fails
                let raw = d.join("estimate");
                let est = if raw.join("counts.txt").exists() {
                    read_estimation(&raw, &basis)?
                } else {
                    let est = estimate_kernels_and_noise(&system, &basis, &req)?;
                    write_estimation(&raw, &est)?;
                    est
                };
                let model = MzModel::from_estimation(spec.config.case, basis, &est, spec.taper, spec.tap_count)?;
                model.write_dir(&d.join("model"))?;
                Ok(model)
            },
        )
    }

    fn noise_ensemble(&self, model: &MzModel) -> Result<NoiseEnsemble> {
        let spec = &self.spec;
        let grid = spec.lag_grid()?;
        let n_steps = (grid.n_lags - 1) * step_ratio(spec.lag_step, spec.reduced_dt)?;
        generate_noise_ensemble(
            &model.noise,
            spec.config.beta,
            spec.reduced_dt,
            n_steps,
            spec.n_mz,
            derive_seed(spec.seed, SALT_NOISE),
        )
    }

    fn reduced_stage(&self, stage: Stage, run: impl FnOnce(&MzModel, &NoiseEnsemble) -> Result<(Vec<CorrelationEstimate>, usize)>) -> Result<ReducedRun> {
        let nr = self.spec.config.n_resolved();
        self.run_stage(
            stage,
            |d| read_run(d, nr),
            |d| {
                let model = self.kernels()?;
                let start = Instant::now();
                let ens = self.noise_ensemble(&model)?;
                let integ = Instant::now();
                let (resolved, n_failed) = run(&model, &ens)?;
                let r = ReducedRun {
                    resolved,
                    n_failed,
                    integration_seconds: integ.elapsed().as_secs_f64(),
                    total_seconds: start.elapsed().as_secs_f64(),
                };
                write_run(d, &r)?;
                Ok(r)
            },
        )
    }

    pub fn mz(&self) -> Result<ReducedRun> {
        let grid = self.spec.lag_grid()?;
        self.reduced_stage(Stage::Mz, |m, ens| reduced_autocorrelations(Reduced::Mz(m), ens, grid))
    }

    pub fn delta_mz(&self) -> Result<(DeltaMzModel, ReducedRun)> {
        let grid = self.spec.lag_grid()?;
        let model = self.kernels()?;
        let delta = reduce_to_delta_mz(&model);
        let run = self.reduced_stage(Stage::DeltaMz, |_, ens| {
            reduced_autocorrelations(Reduced::DeltaMz(&delta), ens, grid)
        })?;
        std::fs::write(self.stage_dir(Stage::DeltaMz).join("coefficients.txt"), delta.to_kv_string())?;
        Ok((delta, run))
    }

    /// One report per resolved variable.
    pub fn compare(&self) -> Result<Vec<ComparisonReport>> {
        let truth = self.truth()?;
        let (_, amrs) = self.amrs()?;
        let mz = self.mz()?;
        let (_, delta) = self.delta_mz()?;
        let dir = self.stage_dir(Stage::Compare);
        let build = || -> Result<Vec<ComparisonReport>> {
            std::fs::create_dir_all(&dir)?;
            let mut reports = Vec::new();
            for j in 0..truth.resolved.len() {
                let r = compare(
                    &truth.resolved[j],
                    &[("amrs", &amrs.resolved[j]), ("mz", &mz.resolved[j]), ("delta_mz", &delta.resolved[j])],
                )?;
                r.write_csv_to(&dir.join(format!("report_x{}.csv", j + 1)))?;
                reports.push(r);
            }
            std::fs::write(dir.join("summary.txt"), summary_text(&reports, &mz, &delta))?;
            std::fs::write(dir.join("done"), "")?;
            Ok(reports)
        };
        build().map_err(|e| e.in_stage(Stage::Compare.name()))
    }

    /// Runs every stage up to and including `last`.
    pub fn run_until(&self, last: Stage) -> Result<()> {
        match last {
            Stage::Couplings => self.couplings().map(drop),
            Stage::Truth => self.truth().map(drop),
            Stage::FitOu => self.fit_ou().map(drop),
            Stage::Amrs => self.amrs().map(drop),
            Stage::Kernels => self.kernels().map(drop),
            Stage::Mz => self.mz().map(drop),
            Stage::DeltaMz => self.delta_mz().map(drop),
            Stage::Compare => self.compare().map(drop),
        }
    }
}

/// Runs the whole pipeline for `spec`, reusing finished stages on disk.
pub fn run_experiment(spec: ExperimentSpec) -> Result<Vec<ComparisonReport>> {
    Experiment::open(spec)?.compare()
}

fn summary_text(reports: &[ComparisonReport], mz: &ReducedRun, delta: &ReducedRun) -> String {
    let mut s = String::new();
    for (j, r) in reports.iter().enumerate() {
        for c in &r.columns {
            let all = c.max_error(&r.lags, 0.0, f64::INFINITY).unwrap_or(f64::NAN);
            s.push_str(&format!("x{}.{}.max_relerr = {}\n", j + 1, c.name, kv::fmt_f64(all)));
        }
    }
    s.push_str(&format!("mz.integration_seconds = {}\n", kv::fmt_f64(mz.integration_seconds)));
    s.push_str(&format!("delta_mz.integration_seconds = {}\n", kv::fmt_f64(delta.integration_seconds)));
    s.push_str(&format!(
        "speedup = {}\n",
        kv::fmt_f64(mz.integration_seconds / delta.integration_seconds)
    ));
    s
}

fn write_estimation(d: &Path, est: &KernelEstimation) -> Result<()> {
    est.kernels.write_dir(d)?;
    for (j, t) in est.noise_targets.iter().enumerate() {
        t.write_csv_to(&d.join(format!("noise_x{}.csv", j + 1)))?;
    }
    write_counts(d, est.kernels.n_samples, est.n_failed)
}

fn read_estimation(d: &Path, basis: &HermiteBasis) -> Result<KernelEstimation> {
    let (n, n_failed) = read_counts(d)?;
    let kernels = KernelTable::read_dir(d, basis, n)?;
    let noise_targets = (1..=basis.dim())
        .map(|j| CorrelationEstimate::read_csv_from(&d.join(format!("noise_x{j}.csv")), n))
        .collect::<Result<_>>()?;
    Ok(KernelEstimation {
        kernels,
        noise_targets,
        n_failed,
    })
}

fn counts_text(n_samples: usize, n_failed: usize) -> String {
    format!("n_samples = {n_samples}\nn_failed = {n_failed}\n")
}

fn write_counts(d: &Path, n_samples: usize, n_failed: usize) -> Result<()> {
    std::fs::write(d.join("counts.txt"), counts_text(n_samples, n_failed))?;
    Ok(())
}

fn read_kv(path: &Path) -> Result<Vec<(String, String)>> {
    kv::parse(&std::fs::read_to_string(path)?)
}

fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Parse(format!("missing `{key}`")))
}

fn read_counts(d: &Path) -> Result<(usize, usize)> {
    let p = read_kv(&d.join("counts.txt"))?;
    Ok((
        kv::parse_usize("n_samples", lookup(&p, "n_samples")?)?,
        kv::parse_usize("n_failed", lookup(&p, "n_failed")?)?,
    ))
}

fn write_run(d: &Path, run: &ReducedRun) -> Result<()> {
    for (j, c) in run.resolved.iter().enumerate() {
        c.write_csv_to(&d.join(format!("x{}.csv", j + 1)))?;
    }
    write_counts(d, run.resolved[0].n_samples, run.n_failed)?;
    std::fs::write(
        d.join("timing.txt"),
        format!(
            "integration_seconds = {}\ntotal_seconds = {}\n",
            kv::fmt_f64(run.integration_seconds),
            kv::fmt_f64(run.total_seconds)
        ),
    )?;
    Ok(())
}

fn read_run(d: &Path, nr: usize) -> Result<ReducedRun> {
    let (n, n_failed) = read_counts(d)?;
    let t = read_kv(&d.join("timing.txt"))?;
    Ok(ReducedRun {
        resolved: (1..=nr)
            .map(|j| CorrelationEstimate::read_csv_from(&d.join(format!("x{j}.csv")), n))
            .collect::<Result<_>>()?,
        n_failed,
        integration_seconds: kv::parse_f64("integration_seconds", lookup(&t, "integration_seconds")?)?,
        total_seconds: kv::parse_f64("total_seconds", lookup(&t, "total_seconds")?)?,
    })
}
