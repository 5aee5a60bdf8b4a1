use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::error::Result;
use crate::geometry::{SphereChart, SphereTopology, SurfaceSpec};
use crate::spectral::{SGrid, SpectralSolution};

/// Fast evaluator of the adapted radius `zeta = phi(y)^(1/gamma) z` of one
/// surface; `+inf` outside the chart.
#[derive(Debug, Clone)]
pub struct AdaptedRadius {
    pub surface_id: usize,
    pub gamma: f64,
    chart: SphereChart,
    grid: SGrid,
    phi: Vec<f64>,
    /// `phi^(1/gamma)` when `phi` is constant.
    constant_factor: Option<f64>,
}

impl AdaptedRadius {
    pub fn new(surface: &SurfaceSpec, sol: &SpectralSolution) -> Result<Self> {
        let mx = sol.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mn = sol.phi.iter().copied().fold(f64::INFINITY, f64::min);
        let constant_factor = (mx - mn <= 1e-13 * mx).then(|| (0.5 * (mx + mn)).powf(1.0 / sol.gamma));
        Ok(Self {
            surface_id: surface.id,
            gamma: sol.gamma,
            chart: SphereChart::new(surface)?,
            grid: sol.grid.clone(),
            phi: sol.phi.clone(),
            constant_factor,
        })
    }

    /// Plain distance `zeta = z` (exponent `gamma`, constant eigenfunction).
    pub fn euclidean(surface: &SurfaceSpec, gamma: f64) -> Result<Self> {
        let grid = SGrid::for_topology(surface.topology()?, 8)?;
        let sol = SpectralSolution::constant(surface.id, grid, gamma);
        Self::new(surface, &sol)
    }

    pub fn chart(&self) -> &SphereChart {
        &self.chart
    }

    /// `phi(y)^(1/gamma)`.
    #[inline]
    pub fn factor(&self, y: &[f64]) -> f64 {
        match self.constant_factor {
            Some(c) => c,
            None => self.grid.interpolate(&self.phi, y).powf(1.0 / self.gamma),
        }
    }

    #[inline]
    pub fn zeta(&self, x: &[f64]) -> f64 {
        match self.chart.locate(x) {
            Some((z, y)) => self.factor(&y) * z,
            None => {
                if self.chart.surface.distance(x) < 1e-14 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Uniformly distributed angular position.
    pub fn sample_angles<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        match self.chart.topology {
            SphereTopology::Circle => [rng.random::<f64>() * TAU, 0.0],
            SphereTopology::Sphere => [
                (1.0 - 2.0 * rng.random::<f64>()).clamp(-1.0, 1.0).acos().clamp(0.0, PI),
                rng.random::<f64>() * TAU,
            ],
            SphereTopology::Torus => [rng.random::<f64>() * TAU, rng.random::<f64>() * TAU],
        }
    }

    /// Point with angular position `y` on the level set `zeta = level`.
    pub fn point_on_level(&self, y: &[f64], level: f64) -> Vec<f64> {
        let z = level / self.factor(y);
        self.chart.point_at(&y[..self.chart.topology.dim()], z)
    }

    /// Random point on the level set, uniform in the angles.
    pub fn sample_on_level<R: Rng>(&self, level: f64, rng: &mut R) -> Vec<f64> {
        let y = self.sample_angles(rng);
        self.point_on_level(&y, level)
    }
}

/// One level set `{zeta_k = level}` to be hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelTarget {
    /// Index into the radius list of the [`TargetSet`].
    pub radius: usize,
    pub level: f64,
}

/// Level-set targets sharing adapted-radius evaluations.
#[derive(Debug, Clone)]
pub struct TargetSet {
    pub radii: Vec<AdaptedRadius>,
    pub targets: Vec<LevelTarget>,
}

impl TargetSet {
    pub fn new(radii: Vec<AdaptedRadius>) -> Self {
        Self {
            radii,
            targets: vec![],
        }
    }

    /// Adds a target and returns its id.
    pub fn add(&mut self, radius: usize, level: f64) -> usize {
        self.targets.push(LevelTarget { radius, level });
        self.targets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    #[inline]
    pub fn zetas(&self, x: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(&self.radii) {
            *o = r.zeta(x);
        }
    }
}
