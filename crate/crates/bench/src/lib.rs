//! Fixtures shared by the benchmarks.

use modred_core::mz::{HermiteBasis, MzModel};
use modred_core::statistics::{ColoredNoiseModel, KernelSeries, KernelTable};
use modred_core::triad::{generate_couplings, sample_initial_state_seeded, ModelCase, ModelConfig, TriadSystem};

/// Reference-size system for `case` with seeded couplings.
pub fn reference_system(case: ModelCase) -> TriadSystem {
    let cfg = ModelConfig::reference(case);
    let coupling = generate_couplings(case, cfg.n_active, cfg.seed).expect("reference couplings");
    TriadSystem::new(cfg, coupling).expect("reference system")
}

pub fn reference_state(system: &TriadSystem) -> Vec<f64> {
    sample_initial_state_seeded(&system.config, 7).data
}

/// Memory model with exponential kernels and white noise, sized like the
/// reference experiments.
pub fn synthetic_mz(case: ModelCase, t0: f64, ds: f64) -> MzModel {
    let basis = HermiteBasis::for_case(case, 50.0);
    let n = (t0 / ds).round() as usize + 1;
    let mut series = Vec::new();
    for equation in 0..case.n_resolved() {
        for kappa in &basis.kappas {
            series.push(KernelSeries {
                equation,
                kappa: kappa.clone(),
                values: (0..n).map(|m| 0.016 * (-(m as f64) * ds * 3.0).exp()).collect(),
                stderr: vec![0.0; n],
            });
        }
    }
    MzModel {
        case,
        kernels: KernelTable { ds, t0, n_samples: 1, series },
        noise: vec![ColoredNoiseModel::white(ds, 1e-3); case.n_resolved()],
        basis,
        t0,
        taper: true,
    }
}
