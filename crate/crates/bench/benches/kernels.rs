use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use modred_bench::{reference_state, reference_system, synthetic_mz};
use modred_core::mz::{generate_noise_ensemble, reduce_to_delta_mz, reduced_autocorrelations, Reduced};
use modred_core::numerics::Rk4;
use modred_core::statistics::{fit_ma_coefficients, CorrelationEstimate, LagGrid};
use modred_core::triad::ModelCase;

fn full_system(c: &mut Criterion) {
    let mut g = c.benchmark_group("full_system");
    for case in [ModelCase::Additive, ModelCase::Combined] {
        let sys = reference_system(case);
        let state = reference_state(&sys);
        let mut out = vec![0.0; state.len()];
        g.bench_function(format!("rhs_{case}"), |b| b.iter(|| sys.rhs_into(black_box(&state), &mut out)));
        let mut rk = Rk4::new(state.len());
        g.bench_function(format!("rk4_step_{case}"), |b| {
            b.iter_batched_ref(
                || state.clone(),
                |s| rk.step(|x, d| sys.rhs_into(x, d), s, 1e-3),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn reduced_models(c: &mut Criterion) {
    let mut g = c.benchmark_group("reduced");
    g.sample_size(20);
    let model = synthetic_mz(ModelCase::Additive, 1.0, 0.01);
    let delta = reduce_to_delta_mz(&model);
    let ens = generate_noise_ensemble(&model.noise, 50.0, 0.01, 1000, 64, 1).unwrap();
    let grid = LagGrid::covering(0.05, 10.0).unwrap();
    g.bench_function("mz_64_paths", |b| b.iter(|| reduced_autocorrelations(Reduced::Mz(&model), &ens, grid).unwrap()));
    g.bench_function("delta_mz_64_paths", |b| {
        b.iter(|| reduced_autocorrelations(Reduced::DeltaMz(&delta), &ens, grid).unwrap())
    });
    g.finish();
}

fn noise_fit(c: &mut Criterion) {
    let target = CorrelationEstimate::from_fn(LagGrid::covering(0.01, 10.0).unwrap(), |t| (-t).exp() * 0.01);
    c.bench_function("fit_ma_1001_lags", |b| b.iter(|| fit_ma_coefficients(black_box(&target), None).unwrap()));
}

criterion_group!(benches, full_system, reduced_models, noise_fit);
criterion_main!(benches);
