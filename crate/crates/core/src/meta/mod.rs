//! Experiments: exit probabilities and times on the level sets of the
//! adapted radius, the transition matrix between attracting surfaces, the
//! absorbing-chain hitting distributions, metastable distributions at the
//! time scales `eps^-gamma`, and the Feynman-Kac estimator.

pub mod chain;
pub mod exit;
pub mod histogram;
pub mod metastable;
pub mod stats;

pub use chain::{chain_hitting_distribution, simulate_chain, ChainSpec};
pub use exit::{ExitProbEstimate, ExitTimeStats, TimeFit};
pub use histogram::{HistogramSpec, OccupationHistogram};
pub use metastable::{
    representative_time, FeynmanKacEstimate, DEFAULT_R, KAPPA_PROBE, KAPPA_REPORT, InvariantMeasure, MetastableProfile, MetastableResult, PxEstimate,
    QMatrixEstimate, ScaleWindow,
};
pub use stats::{mean_se, ols, proportion, total_variation, LinearFit};

use serde::{Deserialize, Serialize};

use crate::coeffs::Model;
use crate::error::{Error, Result};
use crate::sim::{AdaptedRadius, Scheme, SimConfig};
use crate::spectral::{default_resolution, solve_surface, Classification, SpectralSolution};

/// Reproducibility record attached to every estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub eps: f64,
    pub n_traj: usize,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub adaptive: bool,
}

impl From<&SimConfig> for EstimateMeta {
    fn from(c: &SimConfig) -> Self {
        Self {
            eps: c.eps,
            n_traj: c.n_traj,
            dt: c.dt,
            t_max: c.t_max,
            seed: c.seed,
            scheme: c.scheme,
            adaptive: c.adaptive,
        }
    }
}

/// A model together with the spectral solution of each of its surfaces.
#[derive(Debug, Clone)]
pub struct Lab<'m> {
    model: &'m Model,
    solutions: Vec<SpectralSolution>,
    radii: Vec<AdaptedRadius>,
}

impl<'m> Lab<'m> {
    /// Solves the spectral problem on every surface at its default
    /// resolution.
    pub fn solve(model: &'m Model) -> Result<Self> {
        let solutions = model
            .surfaces()
            .iter()
            .map(|s| solve_surface(model, s.id, default_resolution(s.topology()?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_solutions(model, solutions)
    }

    /// Solves the spectral problem on every surface at the given angular
    /// resolution.
    pub fn new(model: &'m Model, resolution: usize) -> Result<Self> {
        let solutions = (0..model.surfaces().len())
            .map(|k| solve_surface(model, k, resolution))
            .collect::<Result<Vec<_>>>()?;
        Self::from_solutions(model, solutions)
    }

    pub fn from_solutions(model: &'m Model, solutions: Vec<SpectralSolution>) -> Result<Self> {
        if solutions.len() != model.surfaces().len() {
            return Err(Error::InvalidArgument(format!(
                "{} spectral solutions for {} surfaces",
                solutions.len(),
                model.surfaces().len()
            )));
        }
        let radii = solutions
            .iter()
            .map(|s| AdaptedRadius::new(model.surface(s.surface_id)?, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            solutions,
            radii,
        })
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn solution(&self, k: usize) -> &SpectralSolution {
        &self.solutions[k]
    }

    pub fn solutions(&self) -> &[SpectralSolution] {
        &self.solutions
    }

    pub fn radius(&self, k: usize) -> &AdaptedRadius {
        &self.radii[k]
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.solutions[k].gamma
    }

    /// Attracting surfaces ordered by decreasing exponent.
    pub fn attracting(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .solutions
            .iter()
            .filter(|s| s.classification == Classification::Attracting)
            .map(|s| s.surface_id)
            .collect();
        ids.sort_by(|a, b| self.gamma(*b).total_cmp(&self.gamma(*a)).then(a.cmp(b)));
        ids
    }

    /// Largest level `zeta` whose level set lies inside the chart.
    pub fn max_level(&self, k: usize) -> f64 {
        let s = &self.solutions[k];
        let min_factor = s
            .phi
            .iter()
            .map(|p| p.powf(1.0 / s.gamma))
            .fold(f64::INFINITY, f64::min);
        min_factor * self.model.surfaces()[k].chart_radius()
    }

    fn check_surface(&self, k: usize) -> Result<()> {
        if k >= self.solutions.len() {
            return Err(Error::InvalidArgument(format!("no surface with id {k}")));
        }
        Ok(())
    }
}
