pub mod hermite;
pub mod model;
pub mod projection;

pub use hermite::{hermite_derivative, hermite_value, BasisTerm, HermiteBasis, MultiIndex};
pub use model::{
    build_mz_model, default_t0, generate_noise_ensemble, reduce_to_delta_mz, reduced_autocorrelations, simulate_delta_mz,
    simulate_mz, DeltaMzModel, MzBuildOptions, MzModel, NoiseEnsemble, Reduced, ReducedTrajectory,
};
pub use projection::{check_projection_conditions, check_projection_conditions_with, ProjectionReport, PROJECTION_Z_LIMIT};
