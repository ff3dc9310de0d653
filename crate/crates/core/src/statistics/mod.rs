pub mod correlation;
pub mod kernels;
pub mod noise;

pub use correlation::{
    ensemble_autocorrelation, ensemble_autocorrelations, ensemble_moments, ensemble_moments_indexed, estimate_gamma_dns, taper_weights, trapezoid,
    CorrelationEstimate, EnsembleOutcome, LagGrid, MomentAccumulator,
};
pub use kernels::{
    closed_form_kernel_at_zero, estimate_kernels_and_noise, estimate_kernels_at_zero, estimate_markov_terms,
    estimate_memory_kernels, screen_basis, KernelEstimation, KernelRequest, KernelSeries, KernelTable, PointEstimate,
};
pub use noise::{default_tap_count, fit_ma_coefficients, synthesize_colored_noise, ColoredNoiseModel};
