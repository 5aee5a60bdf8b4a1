//! The nonlinear spectral problem on the angular manifold: the stationary
//! measure of `L_y`, the eigenvalue curve `lambda(gamma)` of
//! `M(gamma) = L_y + gamma D_y + gamma(gamma-1) alpha + gamma beta`, and its
//! nonzero root.

pub mod eigen;
pub mod generator;
pub mod grid;
pub mod solve;

pub use eigen::{stationary_measure, stationary_residual, top_eigenvalue, EigenOptions, PerronPair};
pub use generator::{discretize_generator, discretize_operator, GeneratorMatrix};
pub use grid::SGrid;
pub use solve::{
    averages, lambda_curve, solve_gamma, uniqueness_probe, Classification, LambdaCurve,
    SpectralSolution,
};

use crate::coeffs::{assemble_coeffs, default_grid, linearize, Model};
use crate::error::Result;
use crate::geometry::SphereTopology;

/// Default angular resolution.
pub const DEFAULT_RESOLUTION: usize = 64;

/// Default resolution for a topology: two-dimensional grids use half of
/// [`DEFAULT_RESOLUTION`] per direction to keep the dense solves small.
pub fn default_resolution(topology: SphereTopology) -> usize {
    match topology {
        SphereTopology::Circle => DEFAULT_RESOLUTION,
        SphereTopology::Sphere | SphereTopology::Torus => DEFAULT_RESOLUTION / 2,
    }
}

/// Linearizes, assembles and solves for one surface of a model.
pub fn solve_surface(model: &Model, surface_id: usize, resolution: usize) -> Result<SpectralSolution> {
    let lin = linearize(model, surface_id)?;
    let grid = default_grid(model.surface(surface_id)?, resolution)?;
    let co = assemble_coeffs(&lin, &grid)?;
    solve_gamma(&co)
}
