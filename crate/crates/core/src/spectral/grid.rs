use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SphereTopology;

/// Rectangular grid over the angular manifold.
///
/// Circles and tori are periodic in every direction. Spheres use a
/// staggered polar grid `theta_j = (j + 1/2) pi / n_polar` that avoids the
/// poles; stepping past a pole lands on the same polar row at the
/// antipodal azimuth, which is why the azimuthal count must be even.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SGrid {
    pub topology: SphereTopology,
    /// Node counts per direction (`[n, 1]` for circles).
    pub shape: [usize; 2],
    pub spacing: [f64; 2],
    /// Positive quadrature weights summing to the coordinate measure of the
    /// manifold (`2 pi`, `4 pi` or `4 pi^2`).
    pub weights: Vec<f64>,
}

impl SGrid {
    pub fn circle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument("circle grid needs at least 3 nodes".into()));
        }
        let h = TAU / n as f64;
        Ok(Self {
            topology: SphereTopology::Circle,
            shape: [n, 1],
            spacing: [h, 1.0],
            weights: vec![h; n],
        })
    }

    pub fn sphere(n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_polar < 2 || n_azimuth < 4 || !n_azimuth.is_multiple_of(2) {
            return Err(Error::InvalidArgument(
                "sphere grid needs n_polar >= 2 and an even n_azimuth >= 4".into(),
            ));
        }
        let ht = PI / n_polar as f64;
        let hp = TAU / n_azimuth as f64;
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        for j in 0..n_polar {
            let w = ((j as f64 + 0.5) * ht).sin() * ht * hp;
            weights.extend(std::iter::repeat_n(w, n_azimuth));
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w *= 4.0 * PI / s);
        Ok(Self {
            topology: SphereTopology::Sphere,
            shape: [n_polar, n_azimuth],
            spacing: [ht, hp],
            weights,
        })
    }

    pub fn torus(n0: usize, n1: usize) -> Result<Self> {
        if n0 < 3 || n1 < 3 {
            return Err(Error::InvalidArgument("torus grid needs at least 3 nodes per direction".into()));
        }
        let (h0, h1) = (TAU / n0 as f64, TAU / n1 as f64);
        Ok(Self {
            topology: SphereTopology::Torus,
            shape: [n0, n1],
            spacing: [h0, h1],
            weights: vec![h0 * h1; n0 * n1],
        })
    }

    /// Default grid of resolution `n` for a topology: `n` points on a
    /// circle, `n/2 x n` on a sphere, `n x n` on a torus.
    pub fn for_topology(topology: SphereTopology, n: usize) -> Result<Self> {
        match topology {
            SphereTopology::Circle => Self::circle(n),
            SphereTopology::Sphere => Self::sphere((n / 2).max(2), n + n % 2),
            SphereTopology::Torus => Self::torus(n, n),
        }
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.topology.dim()
    }

    #[inline]
    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.shape[1] + i1
    }

    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.shape[1], idx % self.shape[1])
    }

    /// Angle coordinates of a node.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i0, i1) = self.split(idx);
        match self.topology {
            SphereTopology::Circle => [i0 as f64 * self.spacing[0], 0.0],
            SphereTopology::Sphere => [
                (i0 as f64 + 0.5) * self.spacing[0],
                i1 as f64 * self.spacing[1],
            ],
            SphereTopology::Torus => [i0 as f64 * self.spacing[0], i1 as f64 * self.spacing[1]],
        }
    }

    /// Neighbour of node `idx` after `s0` steps along the first direction
    /// and `s1` along the second (each in `-1..=1`).
    pub fn neighbor(&self, idx: usize, s0: i64, s1: i64) -> usize {
        let (i0, i1) = self.split(idx);
        let (n0, n1) = (self.shape[0] as i64, self.shape[1] as i64);
        let mut j0 = i0 as i64 + s0;
        let mut j1 = i1 as i64 + s1;
        if self.topology == SphereTopology::Sphere && (j0 < 0 || j0 >= n0) {
            j0 = if j0 < 0 { -j0 - 1 } else { 2 * n0 - 1 - j0 };
            j1 += n1 / 2;
        }
        self.index(j0.rem_euclid(n0) as usize, j1.rem_euclid(n1) as usize)
    }

    /// Quadrature of nodal values.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Linear (circle) or bilinear interpolation of nodal values at `y`;
    /// exact at nodes.
    pub fn interpolate(&self, values: &[f64], y: &[f64]) -> f64 {
        let periodic = |t: f64, n: usize| -> (usize, usize, f64) {
            let t = t.rem_euclid(n as f64);
            let i = (t.floor() as usize).min(n - 1);
            let f = t - i as f64;
            (i, (i + 1) % n, f)
        };
        match self.topology {
            SphereTopology::Circle => {
                let (i, j, f) = periodic(y[0] / self.spacing[0], self.shape[0]);
                (1.0 - f) * values[i] + f * values[j]
            }
            SphereTopology::Torus => {
                let (i0, j0, f0) = periodic(y[0] / self.spacing[0], self.shape[0]);
                let (i1, j1, f1) = periodic(y[1] / self.spacing[1], self.shape[1]);
                bilinear(values, self, (i0, j0, f0), (i1, j1, f1))
            }
            SphereTopology::Sphere => {
                let n0 = self.shape[0];
                let t = (y[0] / self.spacing[0] - 0.5).clamp(0.0, (n0 - 1) as f64);
                let i0 = (t.floor() as usize).min(n0.saturating_sub(2));
                let f0 = t - i0 as f64;
                let (i1, j1, f1) = periodic(y[1] / self.spacing[1], self.shape[1]);
                bilinear(values, self, (i0, i0 + 1, f0), (i1, j1, f1))
            }
        }
    }
}

fn bilinear(
    v: &[f64],
    g: &SGrid,
    (i0, j0, f0): (usize, usize, f64),
    (i1, j1, f1): (usize, usize, f64),
) -> f64 {
    (1.0 - f0) * ((1.0 - f1) * v[g.index(i0, i1)] + f1 * v[g.index(i0, j1)])
        + f0 * ((1.0 - f1) * v[g.index(j0, i1)] + f1 * v[g.index(j0, j1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_measure() {
        assert_abs_diff_eq!(SGrid::circle(17).unwrap().weights.iter().sum::<f64>(), TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(SGrid::sphere(8, 16).unwrap().weights.iter().sum::<f64>(), 4.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(SGrid::torus(8, 6).unwrap().weights.iter().sum::<f64>(), TAU * TAU, epsilon = 1e-12);
        assert!(SGrid::sphere(8, 15).is_err());
    }

    #[test]
    fn pole_crossing_goes_to_antipodal_azimuth() {
        let g = SGrid::sphere(4, 8).unwrap();
        let idx = g.index(0, 1);
        assert_eq!(g.neighbor(idx, -1, 0), g.index(0, 5));
        let idx = g.index(3, 6);
        assert_eq!(g.neighbor(idx, 1, 0), g.index(3, 2));
        assert_eq!(g.neighbor(g.index(2, 7), 0, 1), g.index(2, 0));
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        for g in [
            SGrid::circle(12).unwrap(),
            SGrid::sphere(6, 12).unwrap(),
            SGrid::torus(5, 7).unwrap(),
        ] {
            let v: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
            for i in 0..g.len() {
                assert_abs_diff_eq!(g.interpolate(&v, &g.coords(i)), v[i], epsilon = 1e-12);
            }
        }
    }
}
