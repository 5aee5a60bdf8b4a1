//! Invariant surfaces and the tubular chart `x <-> (m, n, z)` around them.
//!
//! Near a surface every point is written as `x = m + z n` with `m` the
//! nearest surface point, `n` a unit normal at `m` and `z` the distance. The
//! pair `y = (m, n)` lives on the product of the surface with the unit
//! sphere of its normal space; [`SphereChart`] fixes angle coordinates on
//! that product so that grids over it are rectangular.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralSolution;

/// Below this distance the normal direction is considered undefined.
pub const ON_SURFACE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SurfaceKind {
    Point {
        location: Vec<f64>,
    },
    Circle {
        center: Vec<f64>,
        radius: f64,
        /// Two orthonormal vectors spanning the plane of the circle.
        plane: [Vec<f64>; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    #[serde(default)]
    pub id: usize,
    #[serde(flatten)]
    pub kind: SurfaceKind,
    /// Radius of validity of the tubular chart. Filled with the default
    /// (half the smallest inter-surface distance, at most 1) by
    /// [`resolve_chart_radii`] when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_radius: Option<f64>,
}

/// Base point of a tubular coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum BasePoint {
    /// Point surfaces: the location itself.
    Fixed(Vec<f64>),
    /// Circle surfaces: angle in `[0, 2pi)` along the circle.
    Angle(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubularPoint {
    pub surface_id: usize,
    pub m: BasePoint,
    pub n: Vec<f64>,
    pub z: f64,
}

/// Angle coordinates of `y = (m, n)`; layout fixed by [`SphereTopology`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    pub surface_id: usize,
    pub coords: Vec<f64>,
}

/// The manifold carrying the angular motion near a surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereTopology {
    /// Point in the plane: one angle `theta`.
    Circle,
    /// Point in space: `(polar, azimuth)`.
    Sphere,
    /// Circle in space: `(m-angle, normal-angle)`.
    Torus,
}

impl SphereTopology {
    pub fn dim(self) -> usize {
        match self {
            SphereTopology::Circle => 1,
            _ => 2,
        }
    }
}

impl SurfaceSpec {
    pub fn point(id: usize, location: Vec<f64>) -> Self {
        Self {
            id,
            kind: SurfaceKind::Point { location },
            chart_radius: None,
        }
    }

    pub fn circle(id: usize, center: Vec<f64>, radius: f64, plane: [Vec<f64>; 2]) -> Self {
        Self {
            id,
            kind: SurfaceKind::Circle {
                center,
                radius,
                plane,
            },
            chart_radius: None,
        }
    }

    pub fn with_chart_radius(mut self, r: f64) -> Self {
        self.chart_radius = Some(r);
        self
    }

    pub fn dimension(&self) -> usize {
        match &self.kind {
            SurfaceKind::Point { location } => location.len(),
            SurfaceKind::Circle { center, .. } => center.len(),
        }
    }

    /// Dimension of the surface itself (0 for points, 1 for circles).
    pub fn surface_dim(&self) -> usize {
        match self.kind {
            SurfaceKind::Point { .. } => 0,
            SurfaceKind::Circle { .. } => 1,
        }
    }

    pub fn chart_radius(&self) -> f64 {
        self.chart_radius.unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        match &self.kind {
            SurfaceKind::Point { location } => {
                if d < 2 {
                    return Err(Error::InvalidModel(format!(
                        "surface {}: point surfaces need dimension >= 2",
                        self.id
                    )));
                }
                if location.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "surface {}: non-finite location",
                        self.id
                    )));
                }
            }
            SurfaceKind::Circle {
                radius, plane, ..
            } => {
                if d < 3 {
                    return Err(Error::InvalidModel(format!(
                        "surface {}: circle surfaces need dimension >= 3",
                        self.id
                    )));
                }
                if !(*radius > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "surface {}: circle radius must be positive",
                        self.id
                    )));
                }
                if plane[0].len() != d || plane[1].len() != d {
                    return Err(Error::InvalidModel(format!(
                        "surface {}: plane vectors must have length {d}",
                        self.id
                    )));
                }
                let n0 = dot(&plane[0], &plane[0]);
                let n1 = dot(&plane[1], &plane[1]);
                let c = dot(&plane[0], &plane[1]);
                if (n0 - 1.0).abs() > 1e-12 || (n1 - 1.0).abs() > 1e-12 || c.abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "surface {}: plane vectors are not orthonormal",
                        self.id
                    )));
                }
            }
        }
        if let Some(r) = self.chart_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "surface {}: chart radius must be positive",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<SphereTopology> {
        match (&self.kind, self.dimension()) {
            (SurfaceKind::Point { .. }, 2) => Ok(SphereTopology::Circle),
            (SurfaceKind::Point { .. }, 3) => Ok(SphereTopology::Sphere),
            (SurfaceKind::Circle { .. }, 3) => Ok(SphereTopology::Torus),
            (_, d) => Err(Error::Unsupported(format!(
                "angular grids for surface {} in dimension {d}",
                self.id
            ))),
        }
    }

    /// Euclidean distance from `x` to the surface.
    #[inline]
    pub fn distance(&self, x: &[f64]) -> f64 {
        match &self.kind {
            SurfaceKind::Point { location } => {
                let mut s = 0.0;
                for (a, b) in x.iter().zip(location) {
                    s += (a - b) * (a - b);
                }
                s.sqrt()
            }
            SurfaceKind::Circle {
                center,
                radius,
                plane,
            } => {
                let (mut a, mut b, mut w2) = (0.0, 0.0, 0.0);
                for i in 0..x.len() {
                    let w = x[i] - center[i];
                    a += w * plane[0][i];
                    b += w * plane[1][i];
                    w2 += w * w;
                }
                let rho = (a * a + b * b).sqrt();
                let h2 = (w2 - a * a - b * b).max(0.0);
                ((rho - radius).powi(2) + h2).sqrt()
            }
        }
    }

    /// Point of the surface with parameter `m`.
    pub fn base_point(&self, m: &BasePoint) -> Vec<f64> {
        match (&self.kind, m) {
            (SurfaceKind::Point { location }, _) => location.clone(),
            (
                SurfaceKind::Circle {
                    center,
                    radius,
                    plane,
                },
                BasePoint::Angle(psi),
            ) => (0..center.len())
                .map(|i| center[i] + radius * (psi.cos() * plane[0][i] + psi.sin() * plane[1][i]))
                .collect(),
            (SurfaceKind::Circle { .. }, BasePoint::Fixed(p)) => p.clone(),
        }
    }

    /// Orthonormal basis of the normal space at the base point `m`.
    ///
    /// For circles in space the basis is `(e_r(psi), u1 x u2)`, which fixes
    /// the trivialization used by the torus coordinates.
    pub fn normal_frame(&self, m: &BasePoint) -> Vec<Vec<f64>> {
        let d = self.dimension();
        match (&self.kind, m) {
            (SurfaceKind::Point { .. }, _) => (0..d)
                .map(|i| {
                    let mut e = vec![0.0; d];
                    e[i] = 1.0;
                    e
                })
                .collect(),
            (SurfaceKind::Circle { plane, .. }, m) => {
                let psi = match m {
                    BasePoint::Angle(p) => *p,
                    BasePoint::Fixed(_) => 0.0,
                };
                let er: Vec<f64> = (0..d)
                    .map(|i| psi.cos() * plane[0][i] + psi.sin() * plane[1][i])
                    .collect();
                let mut frame = vec![er];
                frame.extend(plane_complement(&plane[0], &plane[1]));
                frame
            }
        }
    }

    /// Unit tangent of a circle at angle `psi`.
    pub fn circle_tangent(&self, psi: f64) -> Option<Vec<f64>> {
        match &self.kind {
            SurfaceKind::Circle { plane, .. } => Some(
                (0..self.dimension())
                    .map(|i| -psi.sin() * plane[0][i] + psi.cos() * plane[1][i])
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// Orthonormal basis of the complement of `span(u1, u2)`; in three
/// dimensions this is the single vector `u1 x u2`.
fn plane_complement(u1: &[f64], u2: &[f64]) -> Vec<Vec<f64>> {
    let d = u1.len();
    if d == 3 {
        return vec![vec![
            u1[1] * u2[2] - u1[2] * u2[1],
            u1[2] * u2[0] - u1[0] * u2[2],
            u1[0] * u2[1] - u1[1] * u2[0],
        ]];
    }
    let mut basis: Vec<Vec<f64>> = vec![u1.to_vec(), u2.to_vec()];
    let mut out = Vec::new();
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        for b in &basis {
            let c = dot(&e, b);
            for i in 0..d {
                e[i] -= c * b[i];
            }
        }
        let norm = dot(&e, &e).sqrt();
        if norm > 1e-8 {
            e.iter_mut().for_each(|v| *v /= norm);
            basis.push(e.clone());
            out.push(e);
        }
        if out.len() == d - 2 {
            break;
        }
    }
    out
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fills in default chart radii: half the minimal distance between
/// distinct surfaces, capped at 1 (and at half the radius for circles).
pub fn resolve_chart_radii(surfaces: &mut [SurfaceSpec]) {
    let mut min_sep = f64::INFINITY;
    for i in 0..surfaces.len() {
        for j in (i + 1)..surfaces.len() {
            min_sep = min_sep.min(surface_separation(&surfaces[i], &surfaces[j]));
        }
    }
    for s in surfaces.iter_mut() {
        if s.chart_radius.is_none() {
            let mut r = (0.5 * min_sep).min(1.0);
            if let SurfaceKind::Circle { radius, .. } = s.kind {
                r = r.min(0.5 * radius);
            }
            s.chart_radius = Some(r);
        }
    }
}

/// Minimal distance between two surfaces (exact for point pairs, sampled
/// along one circle otherwise).
pub fn surface_separation(a: &SurfaceSpec, b: &SurfaceSpec) -> f64 {
    match (&a.kind, &b.kind) {
        (SurfaceKind::Point { location }, _) => b.distance(location),
        (_, SurfaceKind::Point { location }) => a.distance(location),
        _ => (0..2048)
            .map(|k| {
                let p = a.base_point(&BasePoint::Angle(TAU * k as f64 / 2048.0));
                b.distance(&p)
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Chart map `x -> (m, n, z)`.
pub fn to_tubular(x: &[f64], surface: &SurfaceSpec) -> Result<TubularPoint> {
    let d = surface.dimension();
    if x.len() != d {
        return Err(Error::InvalidArgument(format!(
            "point has dimension {}, surface {} lives in dimension {d}",
            x.len(),
            surface.id
        )));
    }
    let radius = surface.chart_radius();
    let (m, disp) = match &surface.kind {
        SurfaceKind::Point { location } => {
            let disp: Vec<f64> = x.iter().zip(location).map(|(a, b)| a - b).collect();
            (BasePoint::Fixed(location.clone()), disp)
        }
        SurfaceKind::Circle {
            center,
            radius: big_r,
            plane,
        } => {
            let w: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
            let a = dot(&w, &plane[0]);
            let b = dot(&w, &plane[1]);
            let rho = (a * a + b * b).sqrt();
            if rho < 1e-12 {
                return Err(Error::OutsideChart {
                    surface: surface.id,
                    distance: surface.distance(x),
                    radius,
                });
            }
            let psi = b.atan2(a).rem_euclid(TAU);
            let mp = BasePoint::Angle(psi);
            let base = surface.base_point(&mp);
            let _ = big_r;
            let disp: Vec<f64> = x.iter().zip(&base).map(|(p, q)| p - q).collect();
            (mp, disp)
        }
    };
    let z = dot(&disp, &disp).sqrt();
    if z >= radius {
        return Err(Error::OutsideChart {
            surface: surface.id,
            distance: z,
            radius,
        });
    }
    if z < ON_SURFACE_TOL {
        return Err(Error::OnSurface {
            surface: surface.id,
        });
    }
    let n = disp.iter().map(|v| v / z).collect();
    Ok(TubularPoint {
        surface_id: surface.id,
        m,
        n,
        z,
    })
}

/// Inverse chart `(m, n, z) -> x = m + z n`.
pub fn from_tubular(p: &TubularPoint, surface: &SurfaceSpec) -> Result<Vec<f64>> {
    let radius = surface.chart_radius();
    if !(p.z >= 0.0) || p.z >= radius {
        return Err(Error::OutsideChart {
            surface: surface.id,
            distance: p.z,
            radius,
        });
    }
    let base = surface.base_point(&p.m);
    Ok(base.iter().zip(&p.n).map(|(b, n)| b + p.z * n).collect())
}

/// Angle coordinates on the angular manifold of one surface.
#[derive(Debug, Clone)]
pub struct SphereChart {
    pub surface: SurfaceSpec,
    pub topology: SphereTopology,
}

impl SphereChart {
    pub fn new(surface: &SurfaceSpec) -> Result<Self> {
        Ok(Self {
            surface: surface.clone(),
            topology: surface.topology()?,
        })
    }

    /// Coordinates of the unit normal expressed in the normal frame.
    pub fn normal_coords(&self, y: &[f64]) -> Vec<f64> {
        match self.topology {
            SphereTopology::Circle => vec![y[0].cos(), y[0].sin()],
            SphereTopology::Sphere => {
                let (t, p) = (y[0], y[1]);
                vec![t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
            }
            SphereTopology::Torus => vec![y[1].cos(), y[1].sin()],
        }
    }

    /// Derivatives of the frame coordinates of `n` along each angle that
    /// moves `n` (the m-angle of a torus does not).
    pub fn normal_tangents(&self, y: &[f64]) -> Vec<(usize, Vec<f64>)> {
        match self.topology {
            SphereTopology::Circle => vec![(0, vec![-y[0].sin(), y[0].cos()])],
            SphereTopology::Sphere => {
                let (t, p) = (y[0], y[1]);
                vec![
                    (0, vec![t.cos() * p.cos(), t.cos() * p.sin(), -t.sin()]),
                    (1, vec![-t.sin() * p.sin(), t.sin() * p.cos(), 0.0]),
                ]
            }
            SphereTopology::Torus => vec![(1, vec![-y[1].sin(), y[1].cos()])],
        }
    }

    pub fn base(&self, y: &[f64]) -> BasePoint {
        match self.topology {
            SphereTopology::Torus => BasePoint::Angle(y[0]),
            _ => BasePoint::Fixed(self.surface.base_point(&BasePoint::Angle(0.0))),
        }
    }

    /// Euclidean point at angular position `y` and distance `z`.
    pub fn point_at(&self, y: &[f64], z: f64) -> Vec<f64> {
        let m = self.base(y);
        let frame = self.surface.normal_frame(&m);
        let nc = self.normal_coords(y);
        let base = self.surface.base_point(&m);
        let mut x = base;
        for (c, e) in nc.iter().zip(&frame) {
            for i in 0..x.len() {
                x[i] += z * c * e[i];
            }
        }
        x
    }

    /// Angular coordinates of a tubular point.
    pub fn sphere_point(&self, p: &TubularPoint) -> SpherePoint {
        let frame = self.surface.normal_frame(&p.m);
        let nc: Vec<f64> = frame.iter().map(|e| dot(e, &p.n)).collect();
        let coords = match self.topology {
            SphereTopology::Circle => vec![nc[1].atan2(nc[0]).rem_euclid(TAU)],
            SphereTopology::Sphere => vec![
                nc[2].clamp(-1.0, 1.0).acos(),
                nc[1].atan2(nc[0]).rem_euclid(TAU),
            ],
            SphereTopology::Torus => {
                let psi = match p.m {
                    BasePoint::Angle(a) => a,
                    BasePoint::Fixed(_) => 0.0,
                };
                vec![psi, nc[1].atan2(nc[0]).rem_euclid(TAU)]
            }
        };
        SpherePoint {
            surface_id: p.surface_id,
            coords,
        }
    }

    /// Fast path for the integrator: `(z, y)` of `x`, or `None` outside
    /// the chart or on the surface.
    #[inline]
    pub fn locate(&self, x: &[f64]) -> Option<(f64, [f64; 2])> {
        match (&self.surface.kind, self.topology) {
            (SurfaceKind::Point { location }, SphereTopology::Circle) => {
                let (dx, dy) = (x[0] - location[0], x[1] - location[1]);
                let z = (dx * dx + dy * dy).sqrt();
                if z >= self.surface.chart_radius() || z < ON_SURFACE_TOL {
                    return None;
                }
                Some((z, [dy.atan2(dx).rem_euclid(TAU), 0.0]))
            }
            _ => {
                let tp = to_tubular(x, &self.surface).ok()?;
                let sp = self.sphere_point(&tp);
                let y1 = sp.coords.get(1).copied().unwrap_or(0.0);
                Some((tp.z, [sp.coords[0], y1]))
            }
        }
    }

    /// Fundamental domain check for angle coordinates.
    pub fn in_domain(&self, y: &[f64]) -> bool {
        let ang = |a: f64| (0.0..TAU).contains(&a);
        match self.topology {
            SphereTopology::Circle => ang(y[0]),
            SphereTopology::Sphere => (0.0..=PI).contains(&y[0]) && ang(y[1]),
            SphereTopology::Torus => ang(y[0]) && ang(y[1]),
        }
    }
}

/// Adapted radius `zeta = phi(y)^(1/gamma) z`; its level sets are the
/// surfaces `Gamma_kappa` used by every exit experiment.
pub fn adapted_radius(x: &[f64], surface: &SurfaceSpec, spec: &SpectralSolution) -> Result<f64> {
    match to_tubular(x, surface) {
        Ok(tp) => {
            let chart = SphereChart::new(surface)?;
            let y = chart.sphere_point(&tp);
            let phi = spec.grid.interpolate(&spec.phi, &y.coords);
            Ok(phi.powf(1.0 / spec.gamma) * tp.z)
        }
        Err(Error::OnSurface { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}
