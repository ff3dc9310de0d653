//! Asymptotic mode reduction: Ornstein-Uhlenbeck surrogates for the bath
//! modes, the closed-form reduced-SDE coefficients for each case, and
//! simulation of the reduced equations.

use std::fmt;

use rand::Rng;
use rand_distr::{Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::kv;
use crate::numerics::{euler_maruyama_step, split_milstein_step, step_ratio, Matrix, TimeGrid};
use crate::rng::{stream_rng, StreamRng};
use crate::statistics::correlation::{ensemble_autocorrelations, estimate_gamma_dns, CorrelationEstimate, LagGrid};
use crate::triad::{Family, ModelCase, TriadCoupling, TriadSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitProcedure {
    /// Scaling law `γ_k = c1 k / sqrt(β)`.
    P1,
    /// `γ_k = γ_k^dns` from the full-system bath correlations.
    P2,
    /// Rates tuned until the surrogate system reproduces `γ_k^dns`.
    P3,
}

impl fmt::Display for FitProcedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitProcedure::P1 => "P1",
            FitProcedure::P2 => "P2",
            FitProcedure::P3 => "P3",
        })
    }
}

impl std::str::FromStr for FitProcedure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P1" => Ok(FitProcedure::P1),
            "P2" => Ok(FitProcedure::P2),
            "P3" => Ok(FitProcedure::P3),
            other => Err(Error::Parse(format!("unknown fitting procedure `{other}`"))),
        }
    }
}

/// Bath surrogate `dy_k = −γ_k y_k dt + σ_k dW` per mode, `k = 1..`.
#[derive(Clone, Debug, PartialEq)]
pub struct OUParams {
    pub procedure: FitProcedure,
    pub gamma: Vec<f64>,
    pub sigma: Vec<f64>,
    pub c1: Option<f64>,
    pub iterations: usize,
    /// False when P3 hit its iteration cap; the last iterate is kept.
    pub converged: bool,
}

impl OUParams {
    /// Pins `σ_k = sqrt(γ_k / β)`.
    pub fn from_rates(procedure: FitProcedure, gamma: Vec<f64>, beta: f64) -> Result<Self> {
        for (i, &g) in gamma.iter().enumerate() {
            if !(g > 0.0) {
                return Err(Error::NonPositiveRate { k: i + 1, value: g });
            }
        }
        let sigma = gamma.iter().map(|g| (g / beta).sqrt()).collect();
        Ok(OUParams {
            procedure,
            gamma,
            sigma,
            c1: None,
            iterations: 0,
            converged: true,
        })
    }

    /// `γ_k` for 1-based `k`.
    pub fn rate(&self, k: usize) -> Result<f64> {
        match self.gamma.get(k - 1) {
            Some(&g) if g > 0.0 => Ok(g),
            Some(&g) => Err(Error::NonPositiveRate { k, value: g }),
            None => Err(Error::InvalidConfig(format!("no bath rate for mode {k}"))),
        }
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = format!("procedure = {}\n", self.procedure);
        if let Some(c1) = self.c1 {
            s.push_str(&format!("c1 = {}\n", kv::fmt_f64(c1)));
        }
        s.push_str(&format!("iterations = {}\nconverged = {}\n", self.iterations, self.converged));
        for (i, (g, sg)) in self.gamma.iter().zip(&self.sigma).enumerate() {
            s.push_str(&format!("gamma[{}] = {}\n", i + 1, kv::fmt_f64(*g)));
            s.push_str(&format!("sigma[{}] = {}\n", i + 1, kv::fmt_f64(*sg)));
        }
        s
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut procedure = None;
        let mut c1 = None;
        let mut iterations = 0;
        let mut converged = true;
        let mut gamma = Vec::new();
        let mut sigma = Vec::new();
        for (key, value) in kv::parse(text)? {
            match key.as_str() {
                "procedure" => procedure = Some(value.parse()?),
                "c1" => c1 = Some(kv::parse_f64(&key, &value)?),
                "iterations" => iterations = kv::parse_usize(&key, &value)?,
                "converged" => converged = value == "true",
                _ if key.starts_with("gamma[") => gamma.push(kv::parse_f64(&key, &value)?),
                _ if key.starts_with("sigma[") => sigma.push(kv::parse_f64(&key, &value)?),
                _ => return Err(Error::Parse(format!("unknown OU key `{key}`"))),
            }
        }
        if gamma.len() != sigma.len() {
            return Err(Error::Parse("gamma and sigma counts differ".into()));
        }
        Ok(OUParams {
            procedure: procedure.ok_or_else(|| Error::Parse("missing `procedure`".into()))?,
            gamma,
            sigma,
            c1,
            iterations,
            converged,
        })
    }
}

/// Settings for the P3 surrogate ensembles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct P3Options {
    pub n_samples: usize,
    pub dt: f64,
    pub grid: LagGrid,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for P3Options {
    fn default() -> Self {
        P3Options {
            n_samples: 20_000,
            dt: 5e-3,
            grid: LagGrid { step: 0.05, n_lags: 201 },
            max_iterations: 10,
            tolerance: 0.05,
            seed: 0,
        }
    }
}

/// Fits bath rates by `procedure`. `bath_corrs[k−1]` is the full-system
/// autocorrelation of mode `k` (mean of the `y_k` and `z_k` correlations).
pub fn fit_ou_parameters(
    procedure: FitProcedure,
    bath_corrs: &[CorrelationEstimate],
    beta: f64,
    c1: Option<f64>,
    system: &TriadSystem,
    p3: &P3Options,
) -> Result<OUParams> {
    let n_active = system.coupling.n_active();
    match procedure {
        FitProcedure::P1 => {
            let c1 = c1.ok_or_else(|| Error::InvalidConfig("procedure P1 needs c1".into()))?;
            let gamma = (1..=system.config.capital_lambda)
                .map(|k| c1 * k as f64 / beta.sqrt())
                .collect();
            let mut ou = OUParams::from_rates(FitProcedure::P1, gamma, beta)?;
            ou.c1 = Some(c1);
            Ok(ou)
        }
        FitProcedure::P2 => {
            let gamma = dns_rates(bath_corrs, beta, n_active)?;
            OUParams::from_rates(FitProcedure::P2, gamma, beta)
        }
        FitProcedure::P3 => {
            let target = dns_rates(bath_corrs, beta, n_active)?;
            fit_p3(system, &target, beta, p3)
        }
    }
}

fn dns_rates(bath_corrs: &[CorrelationEstimate], beta: f64, n_active: usize) -> Result<Vec<f64>> {
    if bath_corrs.len() < n_active {
        return Err(Error::InvalidConfig(format!(
            "bath correlations for {} modes, {} are coupled",
            bath_corrs.len(),
            n_active
        )));
    }
    bath_corrs.iter().map(|c| estimate_gamma_dns(c, beta)).collect()
}

fn fit_p3(system: &TriadSystem, target: &[f64], beta: f64, opt: &P3Options) -> Result<OUParams> {
    let n_active = system.coupling.n_active();
    let mut gamma = target.to_vec();
    for it in 1..=opt.max_iterations {
        let measured = surrogate_rates(system, &gamma[..n_active], beta, opt, it as u64)?;
        let ratios: Vec<f64> = (0..n_active).map(|i| target[i] / measured[i]).collect();
        if ratios.iter().all(|r| (r - 1.0).abs() <= opt.tolerance) {
            let mut ou = OUParams::from_rates(FitProcedure::P3, gamma, beta)?;
            ou.iterations = it;
            return Ok(ou);
        }
        if it == opt.max_iterations {
            break;
        }
        for (g, r) in gamma.iter_mut().zip(&ratios) {
            *g *= r;
        }
    }
    let mut ou = OUParams::from_rates(FitProcedure::P3, gamma, beta)?;
    ou.iterations = opt.max_iterations;
    ou.converged = false;
    Ok(ou)
}

/// Measured `γ_k^dns` of the coupled modes in the surrogate system where each
/// bath mode's self-interaction is replaced by the OU process with rate `gamma`.
pub fn surrogate_rates(system: &TriadSystem, gamma: &[f64], beta: f64, opt: &P3Options, salt: u64) -> Result<Vec<f64>> {
    let nr = system.n_resolved();
    let na = gamma.len();
    let dim = nr + 2 * na;
    let mut diffusion = Matrix::zeros(dim, 2 * na);
    for (i, g) in gamma.iter().enumerate() {
        let s = (g / beta).sqrt();
        diffusion.data[(nr + 2 * i) * 2 * na + 2 * i] = s;
        diffusion.data[(nr + 2 * i + 1) * 2 * na + 2 * i + 1] = s;
    }
    let drift = |x: &[f64], d: &mut [f64]| {
        let (res, bath) = x.split_at(nr);
        let (dres, dbath) = d.split_at_mut(nr);
        for (i, db) in dbath.iter_mut().enumerate() {
            *db = -gamma[i / 2] * bath[i];
        }
        system.add_coupling_terms(res, bath, dres, dbath);
    };
    let every = step_ratio(opt.grid.step, opt.dt)?;
    let sd = (0.5 / beta).sqrt();
    let source = |rng: &mut StreamRng, grid: LagGrid| -> Result<Vec<Vec<f64>>> {
        let mut x: Vec<f64> = (0..dim).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut xi = vec![0.0; 2 * na];
        let mut out = Vec::with_capacity(grid.n_lags);
        out.push(x.clone());
        for m in 1..grid.n_lags {
            for _ in 0..every {
                xi.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                euler_maruyama_step(drift, &diffusion, &mut x, opt.dt, &xi)?;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { step: m * every });
            }
            out.push(x.clone());
        }
        Ok(out)
    };
    let components: Vec<usize> = (nr..dim).collect();
    let seed = crate::rng::derive_seed(opt.seed, salt);
    let (corrs, _) = ensemble_autocorrelations(source, &components, opt.grid, opt.n_samples, seed)?;
    (0..na)
        .map(|i| estimate_gamma_dns(&corrs[2 * i].average(&corrs[2 * i + 1])?, beta))
        .collect()
}

/// `dx1 = −γ x1 dt + σ dW`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmrsAdditiveParams {
    pub gamma: f64,
    pub sigma: f64,
}

/// Coefficients of the reduced multiplicative system with coupling `lambda`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmrsMultiplicativeParams {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub gamma_bar: f64,
    pub n1: f64,
    pub n2: f64,
    pub sigma_bar: [[f64; 2]; 2],
}

/// Multiplicative block (with `lambda = λ_m`) plus the additive block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmrsCombinedParams {
    pub mult: AmrsMultiplicativeParams,
    pub gamma_11: f64,
    pub gamma_22: f64,
    pub gamma_12: f64,
    pub sigma: [[f64; 2]; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AmrsParams {
    Additive(AmrsAdditiveParams),
    Multiplicative(AmrsMultiplicativeParams),
    Combined(AmrsCombinedParams),
}

fn weighted_sum(coupling: &TriadCoupling, ou: &OUParams, term: impl Fn(&dyn Fn(Family) -> f64) -> f64) -> Result<f64> {
    let mut acc = 0.0;
    for (i, mode) in coupling.modes.iter().enumerate() {
        let g = ou.rate(i + 1)?;
        acc += term(&|f| mode[f]) / g;
    }
    Ok(acc)
}

fn require_case(coupling: &TriadCoupling, case: ModelCase) -> Result<()> {
    if coupling.case != case {
        return Err(Error::InvalidConfig(format!(
            "expected a {case} coupling, got {}",
            coupling.case
        )));
    }
    Ok(())
}

pub fn compute_additive_params(coupling: &TriadCoupling, ou: &OUParams, lambda: f64, beta: f64) -> Result<AmrsAdditiveParams> {
    require_case(coupling, ModelCase::Additive)?;
    let s = weighted_sum(coupling, ou, |b| b(Family::X1Yz).powi(2))?;
    let gamma = lambda * lambda / (4.0 * beta) * s;
    Ok(AmrsAdditiveParams {
        gamma,
        sigma: (gamma / beta).sqrt(),
    })
}

fn multiplicative_block(coupling: &TriadCoupling, ou: &OUParams, lambda: f64, beta: f64) -> Result<AmrsMultiplicativeParams> {
    let a = weighted_sum(coupling, ou, |b| b(Family::X1X2y).powi(2) + b(Family::X1X2z).powi(2))? / beta;
    let bb = weighted_sum(coupling, ou, |b| b(Family::X2X1y).powi(2) + b(Family::X2X1z).powi(2))? / beta;
    let c = weighted_sum(coupling, ou, |b| {
        b(Family::X1X2y) * b(Family::X2X1y) + b(Family::X1X2z) * b(Family::X2X1z)
    })? / beta;
    Ok(AmrsMultiplicativeParams {
        lambda,
        a,
        b: bb,
        c,
        gamma_bar: -0.5 * c,
        n1: beta * (a + c),
        n2: beta * (bb + c),
        sigma_bar: symmetric_sqrt_2x2(a, bb, c)?,
    })
}

pub fn compute_multiplicative_params(
    coupling: &TriadCoupling,
    ou: &OUParams,
    lambda: f64,
    beta: f64,
) -> Result<AmrsMultiplicativeParams> {
    require_case(coupling, ModelCase::Multiplicative)?;
    multiplicative_block(coupling, ou, lambda, beta)
}

pub fn compute_combined_params(
    coupling: &TriadCoupling,
    ou: &OUParams,
    lambda_a: f64,
    lambda_m: f64,
    beta: f64,
) -> Result<AmrsCombinedParams> {
    require_case(coupling, ModelCase::Combined)?;
    let mult = multiplicative_block(coupling, ou, lambda_m, beta)?;
    let f = lambda_a * lambda_a / (4.0 * beta);
    let g11 = f * weighted_sum(coupling, ou, |b| b(Family::X1Yz).powi(2))?;
    let g22 = f * weighted_sum(coupling, ou, |b| b(Family::X2Yz).powi(2))?;
    let g12 = f * weighted_sum(coupling, ou, |b| b(Family::X1Yz) * b(Family::X2Yz))?;
    Ok(AmrsCombinedParams {
        mult,
        gamma_11: g11,
        gamma_22: g22,
        gamma_12: g12,
        sigma: symmetric_sqrt_2x2(g11 / beta, g22 / beta, g12 / beta)?,
    })
}

/// Symmetric positive-semidefinite square root of `[[a, c], [c, b]]`:
/// `(M + sqrt(det) I) / sqrt(tr + 2 sqrt(det))`.
pub fn symmetric_sqrt_2x2(a: f64, b: f64, c: f64) -> Result<[[f64; 2]; 2]> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Ok([[0.0; 2]; 2]);
    }
    let det = a * b - c * c;
    let tol = 1e-12 * scale * scale;
    if a < -1e-12 * scale || b < -1e-12 * scale || det < -tol {
        return Err(Error::NotPositiveSemidefinite { a, b, c });
    }
    let s = det.max(0.0).sqrt();
    let t = (a + b + 2.0 * s).sqrt();
    Ok([[(a + s) / t, c / t], [c / t, (b + s) / t]])
}

/// `ε = λ_eff / (γ_1 sqrt(2β))`.
pub fn epsilon(lambda_eff: f64, gamma_1: f64, beta: f64) -> f64 {
    lambda_eff / (gamma_1 * (2.0 * beta).sqrt())
}

impl AmrsParams {
    pub fn case(&self) -> ModelCase {
        match self {
            AmrsParams::Additive(_) => ModelCase::Additive,
            AmrsParams::Multiplicative(_) => ModelCase::Multiplicative,
            AmrsParams::Combined(_) => ModelCase::Combined,
        }
    }

    pub fn n_resolved(&self) -> usize {
        self.case().n_resolved()
    }

    /// Coefficients for the case of `system`, from fitted bath rates.
    pub fn compute(system: &TriadSystem, ou: &OUParams) -> Result<Self> {
        let cfg = &system.config;
        Ok(match cfg.case {
            ModelCase::Additive => {
                AmrsParams::Additive(compute_additive_params(&system.coupling, ou, cfg.lambda_a, cfg.beta)?)
            }
            ModelCase::Multiplicative => AmrsParams::Multiplicative(compute_multiplicative_params(
                &system.coupling,
                ou,
                cfg.lambda_m,
                cfg.beta,
            )?),
            ModelCase::Combined => AmrsParams::Combined(compute_combined_params(
                &system.coupling,
                ou,
                cfg.lambda_a,
                cfg.lambda_m,
                cfg.beta,
            )?),
        })
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = format!("case = {}\n", self.case());
        let mut put = |k: &str, v: f64| out.push_str(&format!("{k} = {}\n", kv::fmt_f64(v)));
        let put_mult = |m: &AmrsMultiplicativeParams, put: &mut dyn FnMut(&str, f64)| {
            put("lambda", m.lambda);
            put("A", m.a);
            put("B", m.b);
            put("C", m.c);
            put("gamma_bar", m.gamma_bar);
            put("N1", m.n1);
            put("N2", m.n2);
            put("sigma_bar11", m.sigma_bar[0][0]);
            put("sigma_bar12", m.sigma_bar[0][1]);
            put("sigma_bar22", m.sigma_bar[1][1]);
        };
        match self {
            AmrsParams::Additive(p) => {
                put("gamma", p.gamma);
                put("sigma", p.sigma);
            }
            AmrsParams::Multiplicative(m) => put_mult(m, &mut put),
            AmrsParams::Combined(p) => {
                put_mult(&p.mult, &mut put);
                put("gamma11", p.gamma_11);
                put("gamma22", p.gamma_22);
                put("gamma12", p.gamma_12);
                put("sigma11", p.sigma[0][0]);
                put("sigma12", p.sigma[0][1]);
                put("sigma22", p.sigma[1][1]);
            }
        }
        out
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let pairs = kv::parse(text)?;
        let mut case = None;
        let mut vals = std::collections::HashMap::new();
        for (k, v) in pairs {
            if k == "case" {
                case = Some(v.parse::<ModelCase>()?);
            } else {
                vals.insert(k.clone(), kv::parse_f64(&k, &v)?);
            }
        }
        let get = |k: &str| {
            vals.get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("missing `{k}`")))
        };
        let mult = || -> Result<AmrsMultiplicativeParams> {
            let s12 = get("sigma_bar12")?;
            Ok(AmrsMultiplicativeParams {
                lambda: get("lambda")?,
                a: get("A")?,
                b: get("B")?,
                c: get("C")?,
                gamma_bar: get("gamma_bar")?,
                n1: get("N1")?,
                n2: get("N2")?,
                sigma_bar: [[get("sigma_bar11")?, s12], [s12, get("sigma_bar22")?]],
            })
        };
        match case.ok_or_else(|| Error::Parse("missing `case`".into()))? {
            ModelCase::Additive => Ok(AmrsParams::Additive(AmrsAdditiveParams {
                gamma: get("gamma")?,
                sigma: get("sigma")?,
            })),
            ModelCase::Multiplicative => Ok(AmrsParams::Multiplicative(mult()?)),
            ModelCase::Combined => {
                let s12 = get("sigma12")?;
                Ok(AmrsParams::Combined(AmrsCombinedParams {
                    mult: mult()?,
                    gamma_11: get("gamma11")?,
                    gamma_22: get("gamma22")?,
                    gamma_12: get("gamma12")?,
                    sigma: [[get("sigma11")?, s12], [s12, get("sigma22")?]],
                }))
            }
        }
    }

    /// Advances `x` by `n_steps` steps of `dt`, calling `record(step, x)` after
    /// every step whose index is a multiple of `every` (and at step 0).
    pub fn integrate<R, F>(&self, x: &mut [f64], dt: f64, n_steps: usize, every: usize, rng: &mut R, mut record: F) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &[f64]),
    {
        record(0, x);
        match *self {
            AmrsParams::Additive(p) => {
                let diff = Matrix::scalar(p.sigma);
                let mut xi = [0.0];
                for n in 1..=n_steps {
                    xi[0] = rng.sample(StandardNormal);
                    euler_maruyama_step(|s, d| d[0] = -p.gamma * s[0], &diff, x, dt, &xi)?;
                    check(x, n)?;
                    if n % every == 0 {
                        record(n, x);
                    }
                }
            }
            AmrsParams::Multiplicative(m) => {
                let mut xi = [0.0; 2];
                for n in 1..=n_steps {
                    xi.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    split_milstein_step(
                        |s, d| mult_nonlinear(&m, s, d),
                        |s, d| mult_linear(&m, s, d),
                        |s, g| mult_diffusion(&m, s, g, 2),
                        2,
                        x,
                        dt,
                        &xi,
                    )?;
                    check(x, n)?;
                    if n % every == 0 {
                        record(n, x);
                    }
                }
            }
            AmrsParams::Combined(p) => {
                let mut xi = [0.0; 4];
                for n in 1..=n_steps {
                    xi.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    split_milstein_step(
                        |s, d| mult_nonlinear(&p.mult, s, d),
                        |s, d| {
                            mult_linear(&p.mult, s, d);
                            d[0] -= p.gamma_11 * s[0] + p.gamma_12 * s[1];
                            d[1] -= p.gamma_12 * s[0] + p.gamma_22 * s[1];
                        },
                        |s, g| {
                            mult_diffusion(&p.mult, s, g, 4);
                            for i in 0..2 {
                                for j in 0..2 {
                                    g[i * 4 + 2 + j] = p.sigma[i][j];
                                }
                            }
                        },
                        4,
                        x,
                        dt,
                        &xi,
                    )?;
                    check(x, n)?;
                    if n % every == 0 {
                        record(n, x);
                    }
                }
            }
        }
        Ok(())
    }
}

fn check(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp { step })
    }
}

fn mult_nonlinear(m: &AmrsMultiplicativeParams, s: &[f64], d: &mut [f64]) {
    let l2 = m.lambda * m.lambda;
    d[0] = -l2 * m.n1 * s[1] * s[1] * s[0];
    d[1] = -l2 * m.n2 * s[0] * s[0] * s[1];
}

fn mult_linear(m: &AmrsMultiplicativeParams, s: &[f64], d: &mut [f64]) {
    let l2 = m.lambda * m.lambda;
    d[0] = -l2 * m.gamma_bar * s[0];
    d[1] = -l2 * m.gamma_bar * s[1];
}

/// Writes the 2-channel multiplicative block into a row-major `2 x cols` matrix.
fn mult_diffusion(m: &AmrsMultiplicativeParams, s: &[f64], g: &mut [f64], cols: usize) {
    for j in 0..2 {
        g[j] = m.lambda * m.sigma_bar[0][j] * s[1];
        g[cols + j] = m.lambda * m.sigma_bar[1][j] * s[0];
    }
}

/// A simulated reduced trajectory, truncated at the first non-finite step.
#[derive(Clone, Debug, PartialEq)]
pub struct AmrsTrajectory {
    pub states: Vec<Vec<f64>>,
    pub blow_up: Option<usize>,
}

/// Simulates the reduced equations on `grid` from `x0`, recording every step.
pub fn simulate_amrs(params: &AmrsParams, x0: &[f64], grid: TimeGrid, seed: u64) -> Result<AmrsTrajectory> {
    if x0.len() != params.n_resolved() {
        return Err(Error::DimensionMismatch {
            expected: params.n_resolved(),
            got: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity(grid.n_steps + 1);
    let mut rng = stream_rng(seed, 0);
    let res = params.integrate(&mut x, grid.dt, grid.n_steps, 1, &mut rng, |_, s| states.push(s.to_vec()));
    match res {
        Ok(()) => Ok(AmrsTrajectory { states, blow_up: None }),
        Err(Error::BlowUp { step }) => Ok(AmrsTrajectory {
            states,
            blow_up: Some(step),
        }),
        Err(e) => Err(e),
    }
}

/// Ensemble autocorrelations of the resolved variables of the reduced model,
/// from invariant-density starts, sampled on `grid` with step `dt`.
pub fn amrs_autocorrelations(
    params: &AmrsParams,
    beta: f64,
    dt: f64,
    grid: LagGrid,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<CorrelationEstimate>, usize)> {
    let every = step_ratio(grid.step, dt)?;
    let nr = params.n_resolved();
    let normal = Normal::new(0.0, (0.5 / beta).sqrt()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let source = |rng: &mut StreamRng, grid: LagGrid| -> Result<Vec<Vec<f64>>> {
        let mut x: Vec<f64> = (0..nr).map(|_| rng.sample(normal)).collect();
        let mut out = Vec::with_capacity(grid.n_lags);
        params.integrate(&mut x, dt, (grid.n_lags - 1) * every, every, rng, |_, s| out.push(s.to_vec()))?;
        Ok(out)
    };
    let components: Vec<usize> = (0..nr).collect();
    ensemble_autocorrelations(source, &components, grid, n_samples, seed)
}
