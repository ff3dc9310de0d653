//! Monte Carlo check that the Markovian terms `(L x_j, h^κ)` vanish.

use crate::error::Result;
use crate::mz::hermite::HermiteBasis;
use crate::statistics::kernels::{estimate_markov_terms, PointEstimate};
use crate::triad::TriadSystem;

/// Largest |z| accepted as consistent with zero.
pub const PROJECTION_Z_LIMIT: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    pub estimates: Vec<PointEstimate>,
    pub n_samples: usize,
}

impl ProjectionReport {
    pub fn max_abs_z(&self) -> f64 {
        self.estimates.iter().map(|e| e.z_score().abs()).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_abs_z() <= PROJECTION_Z_LIMIT
    }

    pub fn flagged(&self) -> Vec<&PointEstimate> {
        self.estimates
            .iter()
            .filter(|e| e.z_score().abs() > PROJECTION_Z_LIMIT)
            .collect()
    }
}

/// Estimates `(L x_j, h^κ)` for every equation and basis function.
pub fn check_projection_conditions(system: &TriadSystem, basis: &HermiteBasis, n_samples: usize, seed: u64) -> Result<ProjectionReport> {
    check_projection_conditions_with(system, basis, |s| system.resolved_rhs(s), n_samples, seed)
}

/// As [`check_projection_conditions`] with a replacement right-hand side for
/// the resolved variables.
pub fn check_projection_conditions_with<R>(
    system: &TriadSystem,
    basis: &HermiteBasis,
    resolved_rhs: R,
    n_samples: usize,
    seed: u64,
) -> Result<ProjectionReport>
where
    R: Fn(&[f64]) -> [f64; 2] + Sync,
{
    let estimates = estimate_markov_terms(system, basis, resolved_rhs, n_samples, seed)?;
    Ok(ProjectionReport { estimates, n_samples })
}
