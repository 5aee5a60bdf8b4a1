use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eigen::{stationary_measure, top_eigenvalue, EigenOptions, PerronPair};
use super::generator::discretize_generator;
use super::SGrid;
use crate::coeffs::SCoefficients;
use crate::error::{Error, Result};

/// Largest `|gamma|` searched for a sign change.
pub const GAMMA_LIMIT: f64 = 64.0;
/// Root tolerance on `gamma`.
pub const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Attracting,
    Repelling,
}

impl Classification {
    pub fn of(gamma: f64) -> Self {
        if gamma > 0.0 {
            Classification::Attracting
        } else {
            Classification::Repelling
        }
    }
}

/// Scaling exponent and eigenfunction for one surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSolution {
    pub surface_id: usize,
    pub grid: SGrid,
    pub gamma: f64,
    /// Positive eigenfunction with `sum phi pi = 1`.
    pub phi: Vec<f64>,
    /// Stationary probability weights of `L_y` on the grid.
    pub pi: Vec<f64>,
    pub alpha_bar: f64,
    pub beta_bar: f64,
    pub classification: Classification,
    /// Every `(gamma, lambda(gamma))` evaluated during the solve.
    pub lambda_curve: Vec<(f64, f64)>,
    /// `|| M(gamma) phi ||_inf`.
    pub residual: f64,
}

impl SpectralSolution {
    /// Solution with constant eigenfunction and a prescribed exponent; used
    /// when the exponent is known in closed form.
    pub fn constant(surface_id: usize, grid: SGrid, gamma: f64) -> Self {
        let n = grid.len();
        Self {
            surface_id,
            grid,
            gamma,
            phi: vec![1.0; n],
            pi: vec![1.0 / n as f64; n],
            alpha_bar: f64::NAN,
            beta_bar: f64::NAN,
            classification: Classification::of(gamma),
            lambda_curve: vec![],
            residual: 0.0,
        }
    }

    /// Relative spread `(max phi - min phi) / mean phi`.
    pub fn phi_variation(&self) -> f64 {
        let mx = self.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mn = self.phi.iter().copied().fold(f64::INFINITY, f64::min);
        let mean: f64 = self.phi.iter().sum::<f64>() / self.phi.len() as f64;
        (mx - mn) / mean
    }
}

/// Evaluates `lambda(gamma)`, the Perron eigenvalue of `M(gamma)`.
pub struct LambdaCurve<'a> {
    co: &'a SCoefficients,
    pi: Vec<f64>,
    opts: EigenOptions,
    warm: Option<Vec<f64>>,
    pub samples: Vec<(f64, f64)>,
}

impl<'a> LambdaCurve<'a> {
    pub fn new(co: &'a SCoefficients) -> Result<Self> {
        let pi = stationary_measure(&discretize_generator(co, 0.0)?)?;
        Ok(Self {
            co,
            pi,
            opts: EigenOptions::default(),
            warm: None,
            samples: vec![],
        })
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn pair(&mut self, gamma: f64) -> Result<PerronPair> {
        let g = discretize_generator(self.co, gamma)?;
        let p = top_eigenvalue(&g, &self.pi, self.warm.as_deref(), self.opts)?;
        self.warm = Some(p.vector.clone());
        self.samples.push((gamma, p.lambda));
        Ok(p)
    }

    pub fn eval(&mut self, gamma: f64) -> Result<f64> {
        Ok(self.pair(gamma)?.lambda)
    }
}

/// `lambda(gamma)` at several points, in parallel.
pub fn lambda_curve(co: &SCoefficients, gammas: &[f64]) -> Result<Vec<(f64, f64)>> {
    let pi = stationary_measure(&discretize_generator(co, 0.0)?)?;
    gammas
        .par_iter()
        .map(|&g| {
            let m = discretize_generator(co, g)?;
            let p = top_eigenvalue(&m, &pi, None, EigenOptions::default())?;
            Ok((g, p.lambda))
        })
        .collect()
}

/// Averages of `alpha` and `beta` against the stationary measure.
pub fn averages(co: &SCoefficients, pi: &[f64]) -> (f64, f64) {
    let a = co.alpha.iter().zip(pi).map(|(x, p)| x * p).sum();
    let b = co.beta.iter().zip(pi).map(|(x, p)| x * p).sum();
    (a, b)
}

/// Finds the nonzero root of `lambda(gamma)` on the side selected by
/// `sign(alpha_bar - beta_bar)` and the positive eigenfunction there.
pub fn solve_gamma(co: &SCoefficients) -> Result<SpectralSolution> {
    let mut curve = LambdaCurve::new(co)?;
    let pi = curve.pi().to_vec();
    let (alpha_bar, beta_bar) = averages(co, &pi);
    let gap = alpha_bar - beta_bar;
    if gap.abs() <= 1e-8 {
        return Err(Error::DegenerateCase { gap: gap.abs() });
    }
    let side = gap.signum();

    // near zero lambda has the sign of gamma (beta_bar - alpha_bar) < 0
    let mut lo = side * 1e-3;
    let mut f_lo = curve.eval(lo)?;
    let mut halvings = 0;
    while f_lo >= 0.0 {
        halvings += 1;
        if halvings > 30 {
            return Err(Error::NoBracket { limit: GAMMA_LIMIT });
        }
        lo *= 0.5;
        f_lo = curve.eval(lo)?;
    }
    let mut hi = side;
    let mut f_hi = curve.eval(hi)?;
    while f_hi <= 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        if hi.abs() > GAMMA_LIMIT {
            return Err(Error::NoBracket { limit: GAMMA_LIMIT });
        }
        f_hi = curve.eval(hi)?;
    }

    // Illinois variant of regula falsi
    let mut side_kept = 0i32;
    let mut root = 0.5 * (lo + hi);
    for _ in 0..200 {
        if (hi - lo).abs() < ROOT_TOL {
            break;
        }
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !x.is_finite() || (x - lo) * (x - hi) >= 0.0 {
            x = 0.5 * (lo + hi);
        }
        let fx = curve.eval(x)?;
        root = x;
        if fx == 0.0 {
            lo = x;
            hi = x;
            break;
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
            if side_kept == -1 {
                f_hi *= 0.5;
            }
            side_kept = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side_kept == 1 {
                f_lo *= 0.5;
            }
            side_kept = 1;
        }
        root = if f_lo.abs() < f_hi.abs() { lo } else { hi };
        // stop once the secant step is far below the tolerance
        if fx.abs() < 1e-15 {
            break;
        }
    }
    if (hi - lo).abs() < ROOT_TOL {
        root = 0.5 * (lo + hi);
    }
    let pair = curve.pair(root)?;
    let g = discretize_generator(co, root)?;
    let phi = pair.vector;
    let mphi = &g.matrix * nalgebra::DVector::from_column_slice(&phi);
    let residual = mphi.amax();
    Ok(SpectralSolution {
        surface_id: co.surface_id,
        grid: co.grid.clone(),
        gamma: root,
        phi,
        pi,
        alpha_bar,
        beta_bar,
        classification: Classification::of(root),
        lambda_curve: curve.samples,
        residual,
    })
}

/// Scans `lambda` on `(0, factor * gamma]` (same side as the root) and
/// returns the number of sign changes found; uniqueness means exactly one.
pub fn uniqueness_probe(co: &SCoefficients, sol: &SpectralSolution, factor: f64, samples: usize) -> Result<usize> {
    let gammas: Vec<f64> = (1..=samples)
        .map(|k| sol.gamma * factor * k as f64 / samples as f64)
        .collect();
    let vals = lambda_curve(co, &gammas)?;
    let mut changes = 0;
    let mut prev = -1.0f64;
    for (g, l) in vals {
        // the root itself may land on a sample
        if (g - sol.gamma).abs() < 1e-9 {
            continue;
        }
        if l.signum() != prev.signum() {
            changes += 1;
        }
        prev = l;
    }
    Ok(changes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{assemble_coeffs, linearize};
    use crate::models::model_a;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_ratio_has_constant_eigenfunction() {
        let g = SGrid::circle(64).unwrap();
        let co = SCoefficients::constant(g, 1.0, 0.25, [0.6, 0.0, 0.0], [1.5, 0.0], [0.0, 0.0]).unwrap();
        let sol = solve_gamma(&co).unwrap();
        assert_abs_diff_eq!(sol.gamma, 0.75, epsilon = 1e-9);
        assert!(sol.phi_variation() < 1e-9);
        assert_eq!(sol.classification, Classification::Attracting);
    }

    #[test]
    fn model_a_exponents() {
        for &(a, s, expect) in &[(-0.5, 1.0, 1.0), (0.5, 1.0, -1.0), (-1.0, 2.0, 0.5)] {
            let m = model_a(a, s, 0.8);
            let co = assemble_coeffs(&linearize(&m, 0).unwrap(), &SGrid::circle(32).unwrap()).unwrap();
            let sol = solve_gamma(&co).unwrap();
            assert_abs_diff_eq!(sol.gamma, expect, epsilon = 1e-9);
            assert!(sol.residual < 1e-8);
            let pi_sum: f64 = sol.pi.iter().sum();
            assert_abs_diff_eq!(pi_sum, 1.0, epsilon = 1e-12);
            let norm: f64 = sol.phi.iter().zip(&sol.pi).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn model_a_lambda_is_quadratic() {
        let (a, s) = (-0.3, 1.2);
        let m = model_a(a, s, 0.5);
        let co = assemble_coeffs(&linearize(&m, 0).unwrap(), &SGrid::circle(32).unwrap()).unwrap();
        for (g, l) in lambda_curve(&co, &[-2.0, -0.5, 0.0, 0.7, 3.0]).unwrap() {
            let expect = g * (g - 1.0) * s * s / 2.0 + g * (a + s * s / 2.0);
            assert_abs_diff_eq!(l, expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn degenerate_gap_is_rejected() {
        let g = SGrid::circle(16).unwrap();
        let co = SCoefficients::constant(g, 1.0, 1.0, [0.5, 0.0, 0.0], [0.0, 0.0], [0.0, 0.0]).unwrap();
        assert!(matches!(solve_gamma(&co), Err(Error::DegenerateCase { .. })));
    }
}
