//! End-to-end acceptance checks, one line of output per criterion.
//!
//! The pipeline criteria run the reference experiments at full size, which
//! takes a long time on few cores. Set `MODRED_ACCEPTANCE_CACHE=<dir>` to keep
//! the experiment directories between runs; finished stages are reused.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use modred_core::amrs::{amrs_autocorrelations, AmrsParams, FitProcedure, OUParams};
use modred_core::harness::{ComparisonReport, Experiment, ExperimentSpec, ReducedRun};
use modred_core::mz::{check_projection_conditions, hermite_derivative, hermite_value, HermiteBasis};
use modred_core::quadrature::gaussian_expectation_rule;
use modred_core::rng::stream_rng;
use modred_core::statistics::{
    closed_form_kernel_at_zero, estimate_gamma_dns, estimate_kernels_at_zero, ensemble_moments, CorrelationEstimate,
    LagGrid,
};
use modred_core::triad::{
    energy, generate_couplings, sample_initial_state, Family, ModelCase, ModelConfig, TriadCoupling, TriadSystem,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn reference_system(case: ModelCase) -> TriadSystem {
    let cfg = ModelConfig::reference(case);
    let c = generate_couplings(case, cfg.n_active, cfg.seed).expect("couplings");
    TriadSystem::new(cfg, c).expect("system")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn conservation() -> Outcome {
    let mut worst_drift: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut worst_diag: f64 = 0.0;
    for case in ModelCase::ALL {
        let sys = reference_system(case);
        worst_sum = worst_sum.max(sys.coupling.max_triple_residual());
        for seed in 0..2u64 {
            let mut state = sample_initial_state(&sys.config, &mut stream_rng(seed, case as u64)).data;
            let e0 = energy(&state);
            let mut e_max: f64 = 0.0;
            sys.integrate_recorded(&mut state, 1e-3, 100, 101, |_, s| {
                e_max = e_max.max((energy(s) - e0).abs() / e0);
            })
            .map_err(|e| e.to_string())?;
            worst_drift = worst_drift.max(e_max);

            // finite-difference diagonal of the Jacobian: resolved entries vanish,
            // bath entries cancel within each (y_k, z_k) pair
            let n = state.len();
            let nr = sys.n_resolved();
            let h = 1e-6;
            let mut diag = vec![0.0; n];
            let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
            for i in 0..n {
                let mut p = state.clone();
                let mut m = state.clone();
                p[i] += h;
                m[i] -= h;
                sys.rhs_into(&p, &mut fp);
                sys.rhs_into(&m, &mut fm);
                diag[i] = (fp[i] - fm[i]) / (2.0 * h);
            }
            for &d in &diag[..nr] {
                worst_diag = worst_diag.max(d.abs());
            }
            for pair in diag[nr..].chunks(2) {
                worst_diag = worst_diag.max((pair[0] + pair[1]).abs());
            }
            worst_diag = worst_diag.max(diag.iter().sum::<f64>().abs());
        }
    }
    check(
        worst_drift < 1e-6 && worst_sum <= 4.0 * f64::EPSILON && worst_diag < 1e-6,
        format!("energy drift {worst_drift:.3e}, triad residual {worst_sum:.1e}, diagonal {worst_diag:.1e}"),
    )
}

fn equipartition() -> Outcome {
    let cfg = ModelConfig::reference(ModelCase::Combined);
    let n = 10_000;
    let out = ensemble_moments(n, 77, cfg.state_len(), |rng, out| {
        let s = sample_initial_state(&cfg, rng).data;
        for (o, v) in out.iter_mut().zip(&s) {
            *o = v * v;
        }
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    let target = cfg.equilibrium_variance();
    let mean = out.moments.mean();
    let se = out.moments.stderr();
    let worst = mean
        .iter()
        .zip(&se)
        .map(|(m, s)| (m - target).abs() / s)
        .fold(0.0, f64::max);
    check(worst <= 3.0, format!("{} variables, largest |z| {worst:.2}", mean.len()))
}

fn hermite_suite() -> Outcome {
    let beta = 50.0;
    let mut worst_orth: f64 = 0.0;
    for alpha in [0.0, 0.25] {
        // the envelope squares to e^{-2αβx²}, absorbed into a rule of variance 1/(2β(1+2α))
        let (x, w) = gaussian_expectation_rule(60, 0.5 / (beta * (1.0 + 2.0 * alpha)));
        let norm = 1.0 / (1.0 + 2.0 * alpha).sqrt();
        for i in 0..=6u32 {
            for j in 0..=6u32 {
                let q: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&x, &w)| {
                        let e = (2.0 * alpha * beta * x * x).exp();
                        w * e * hermite_value(i, x, alpha, beta) * hermite_value(j, x, alpha, beta)
                    })
                    .sum::<f64>()
                    * norm;
                let expect = if i == j { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((q - expect).abs());
            }
        }
    }
    let mut rng = stream_rng(5, 0);
    let mut worst_fd: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(0..=5u32);
        let alpha = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.5) };
        let x: f64 = rng.random_range(-0.3..0.3);
        let h = 1e-5;
        let fd = (hermite_value(d, x + h, alpha, beta) - hermite_value(d, x - h, alpha, beta)) / (2.0 * h);
        let exact = hermite_derivative(d, x, alpha, beta);
        let scale = exact.abs().max(1.0);
        worst_fd = worst_fd.max((fd - exact).abs() / scale);
    }
    check(
        worst_orth < 1e-8 && worst_fd < 1e-6,
        format!("orthonormality error {worst_orth:.1e}, derivative error {worst_fd:.1e}"),
    )
}

fn ou_analytics() -> Outcome {
    let sys = reference_system(ModelCase::Additive);
    let beta = sys.config.beta;
    let gamma_k = (1..=sys.config.capital_lambda).map(|k| k as f64 / beta.sqrt()).collect();
    let ou = OUParams::from_rates(FitProcedure::P1, gamma_k, beta).map_err(|e| e.to_string())?;
    let params = AmrsParams::compute(&sys, &ou).map_err(|e| e.to_string())?;
    let AmrsParams::Additive(p) = &params else {
        return Err("additive case expected".into());
    };
    let grid = LagGrid::covering(0.05, 10.0).unwrap();
    let (c, _) = amrs_autocorrelations(&params, beta, 1e-2, grid, 20_000, 41).map_err(|e| e.to_string())?;
    let var = 0.5 / beta;
    let worst = (0..grid.n_lags)
        .map(|m| (c[0].values[m] - var * (-p.gamma * c[0].lag(m)).exp()).abs() / c[0].stderr[m])
        .fold(0.0, f64::max);

    let mut worst_rate: f64 = 0.0;
    for rate in [0.2, 0.63, 1.0, 2.0, 5.0] {
        let exact = CorrelationEstimate::from_fn(LagGrid::covering(0.01, 40.0 / rate).unwrap(), |t| {
            (-rate * t).exp() / (2.0 * beta)
        });
        let g = estimate_gamma_dns(&exact, beta).map_err(|e| e.to_string())?;
        worst_rate = worst_rate.max((g - rate).abs() / rate);
    }
    check(
        worst <= 3.0 && worst_rate < 1e-3,
        format!(
            "gamma {:.4}: largest |z| over {} lags {worst:.2} (lag 0 is the variance); dns rate error {worst_rate:.1e}",
            p.gamma, grid.n_lags
        ),
    )
}

fn kernel_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for case in ModelCase::ALL {
        let sys = reference_system(case);
        let basis = HermiteBasis::for_case(case, sys.config.beta);
        let mc = estimate_kernels_at_zero(&sys, &basis, 400_000, 13).map_err(|e| e.to_string())?;
        for e in &mc {
            let exact = closed_form_kernel_at_zero(&sys, &basis, e.equation, &e.kappa);
            worst = worst.max((e.value - exact).abs() / e.stderr);
            count += 1;
        }
    }
    // single active mode with a unit coefficient
    let mut cfg = ModelConfig::reference(ModelCase::Additive);
    cfg.n_active = 1;
    let mut c = TriadCoupling::zeros(ModelCase::Additive, 1);
    c.set(1, Family::X1Yz, 1.0);
    c.set(1, Family::YX1z, -0.5);
    c.set(1, Family::ZX1y, -0.5);
    let sys = TriadSystem::new(cfg, c).map_err(|e| e.to_string())?;
    let basis = HermiteBasis::for_case(ModelCase::Additive, 50.0);
    let additive = closed_form_kernel_at_zero(&sys, &basis, 0, &basis.kappas[0]);
    let mc = &estimate_kernels_at_zero(&sys, &basis, 400_000, 14).map_err(|e| e.to_string())?[0];
    worst = worst.max((mc.value - additive).abs() / mc.stderr);
    check(
        worst <= 3.0 && (additive - 0.016).abs() < 1e-12,
        format!("{count} terms, largest |z| {worst:.2}; single-mode value {additive:.6}"),
    )
}

fn projection() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in ModelCase::ALL {
        let sys = reference_system(case);
        let basis = HermiteBasis::for_case(case, sys.config.beta);
        let r = check_projection_conditions(&sys, &basis, 100_000, 17).map_err(|e| e.to_string())?;
        worst = worst.max(r.max_abs_z());
    }
    check(worst <= 3.0, format!("largest |z| {worst:.2}"))
}

struct PipelineResult {
    reports: Vec<ComparisonReport>,
    mz: ReducedRun,
    delta: ReducedRun,
}

fn experiment_dir(name: &str, tmp: &std::path::Path) -> PathBuf {
    match std::env::var_os("MODRED_ACCEPTANCE_CACHE") {
        Some(d) => PathBuf::from(d).join(name),
        None => tmp.join(name),
    }
}

fn run_pipeline(case: ModelCase, tmp: &std::path::Path) -> Result<PipelineResult, String> {
    let mut spec = ExperimentSpec::reference(case);
    spec.out_dir = experiment_dir(case.name(), tmp);
    let exp = Experiment::open(spec).map_err(|e| e.to_string())?;
    let reports = exp.compare().map_err(|e| e.to_string())?;
    let mz = exp.mz().map_err(|e| e.to_string())?;
    let (_, delta) = exp.delta_mz().map_err(|e| e.to_string())?;
    Ok(PipelineResult { reports, mz, delta })
}

fn max_over(p: &PipelineResult, name: &str, from: f64, to: f64) -> f64 {
    p.reports
        .iter()
        .filter_map(|r| r.column(name).and_then(|c| c.max_error(&r.lags, from, to)))
        .fold(0.0, f64::max)
}

fn additive_comparison(p: &PipelineResult) -> Outcome {
    let r = &p.reports[0];
    let mz = r.column("mz").unwrap();
    let amrs = r.column("amrs").unwrap();
    let mut late = 0;
    let mut below = 0;
    for (m, &t) in r.lags.iter().enumerate() {
        if t >= 5.0 - 1e-12 && t <= 10.0 + 1e-12 {
            if let (Some(a), Some(b)) = (mz.rel_error[m], amrs.rel_error[m]) {
                late += 1;
                if a < b {
                    below += 1;
                }
            }
        }
    }
    let mz_max = max_over(p, "mz", 0.0, 10.0);
    let amrs_max = max_over(p, "amrs", 0.0, 10.0);
    check(
        late > 0 && below == late && mz_max < 0.15 && amrs_max < 0.35,
        format!(
            "MZ below AMRS at {below}/{late} unmasked late lags; max error MZ {:.1}%, AMRS {:.1}%",
            100.0 * mz_max,
            100.0 * amrs_max
        ),
    )
}

fn delta_economy(p: &PipelineResult) -> Outcome {
    let r = &p.reports[0];
    let mz = r.column("mz").unwrap();
    let delta = r.column("delta_mz").unwrap();
    let worst = (0..r.lags.len())
        .filter(|&m| !r.is_masked(m))
        .map(|m| (delta.values[m] - mz.values[m]).abs() / mz.values[m].abs())
        .fold(0.0, f64::max);
    let speedup = p.mz.integration_seconds / p.delta.integration_seconds;
    let total = p.mz.total_seconds / p.delta.total_seconds;
    check(
        worst <= 0.05 && speedup >= 5.0,
        format!(
            "max deviation from MZ {:.2}%, speedup {speedup:.1}x (integration), {total:.1}x including noise generation",
            100.0 * worst
        ),
    )
}

fn multiplicative_degradation(mul: &PipelineResult, add: &PipelineResult) -> Outcome {
    let (am, aa) = (max_over(mul, "amrs", 0.0, 10.0), max_over(add, "amrs", 0.0, 10.0));
    let (mm, ma) = (max_over(mul, "mz", 0.0, 10.0), max_over(add, "mz", 0.0, 10.0));
    let early = max_over(mul, "amrs", 0.0, 5.0).max(max_over(mul, "mz", 0.0, 5.0));
    check(
        am > aa && mm > ma && am < 0.6 && mm < 0.6 && early <= 0.15,
        format!(
            "max error AMRS {:.1}% (additive {:.1}%), MZ {:.1}% (additive {:.1}%), up to t=5 {:.1}%",
            100.0 * am,
            100.0 * aa,
            100.0 * mm,
            100.0 * ma,
            100.0 * early
        ),
    )
}

fn epsilon_diagnostics(tmp: &std::path::Path) -> Outcome {
    let mut values = Vec::new();
    for case in ModelCase::ALL {
        let mut spec = ExperimentSpec::reference(case);
        spec.out_dir = experiment_dir(case.name(), tmp);
        let exp = Experiment::open(spec).map_err(|e| e.to_string())?;
        values.push(exp.fit_ou().map_err(|e| e.to_string())?.epsilon);
    }
    check(
        values.iter().all(|&e| e > 0.3 && e < 0.9),
        format!("additive {:.3}, multiplicative {:.3}, combined {:.3}", values[0], values[1], values[2]),
    )
}

fn report(n: usize, name: &str, start: Instant, o: &Outcome) -> bool {
    let (tag, detail) = match o {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {n:>2} {tag} {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
    o.is_ok()
}

fn main() -> ExitCode {
    // cargo passes libtest flags; a name filter that does not match skips the suite
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|a| !"acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let tmp = tempfile::tempdir().expect("temporary directory");
    let mut passed = Vec::new();
    let quick: [(&str, fn() -> Outcome); 6] = [
        ("conservation and structure", conservation),
        ("equipartition", equipartition),
        ("Hermite basis", hermite_suite),
        ("OU analytics", ou_analytics),
        ("kernel oracle at s = 0", kernel_oracle),
        ("Markov-term nullity", projection),
    ];
    for (i, (name, f)) in quick.into_iter().enumerate() {
        let t = Instant::now();
        passed.push(report(i + 1, name, t, &f()));
    }
    if std::env::var_os("MODRED_ACCEPTANCE_QUICK").is_some() {
        println!("# MODRED_ACCEPTANCE_QUICK set: criteria 7-10 not run");
        return finish(&passed);
    }

    let t = Instant::now();
    let add = run_pipeline(ModelCase::Additive, tmp.path());
    let t_add = t.elapsed();
    let t = Instant::now();
    let mul = run_pipeline(ModelCase::Multiplicative, tmp.path());
    let t_mul = t.elapsed();
    println!("# additive pipeline {:.0}s, multiplicative pipeline {:.0}s", t_add.as_secs_f64(), t_mul.as_secs_f64());
    let failed = |name: &str, e: &String| Err(format!("{name} pipeline failed: {e}"));

    let t = Instant::now();
    let o = add.as_ref().map_or_else(|e| failed("additive", e), additive_comparison);
    passed.push(report(7, "additive comparison", t, &o));
    let o = add.as_ref().map_or_else(|e| failed("additive", e), delta_economy);
    passed.push(report(8, "delta-MZ economy", t, &o));
    let o = match (&add, &mul) {
        (Ok(a), Ok(m)) => multiplicative_degradation(m, a),
        (Err(e), _) => failed("additive", e),
        (_, Err(e)) => failed("multiplicative", e),
    };
    passed.push(report(9, "multiplicative degradation", t, &o));
    let t = Instant::now();
    passed.push(report(10, "epsilon diagnostics", t, &epsilon_diagnostics(tmp.path())));

    finish(&passed)
}

/// Exit status is nonzero for failed criteria only under `MODRED_ACCEPTANCE_STRICT`.
fn finish(passed: &[bool]) -> ExitCode {
    let n = passed.iter().filter(|&&p| p).count();
    println!("# {n}/{} criteria passed", passed.len());
    if n < passed.len() && std::env::var_os("MODRED_ACCEPTANCE_STRICT").is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
