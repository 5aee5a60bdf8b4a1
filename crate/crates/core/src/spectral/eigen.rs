use nalgebra::{DMatrix, DVector};

use super::generator::GeneratorMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub max_iter: usize,
    /// Relative tolerance on the width of the eigenvalue bracket.
    pub tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PerronPair {
    pub lambda: f64,
    /// Positive eigenvector.
    pub vector: Vec<f64>,
    /// Lower and upper Collatz-Wielandt bounds at exit.
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Collatz-Wielandt bounds `min (Gx)_i/x_i <= lambda <= max (Gx)_i/x_i` for a
/// positive vector, plus the rounding floor of the ratios.
fn cw_bounds(g: &DMatrix<f64>, x: &DVector<f64>) -> (f64, f64, f64) {
    let gx = g * x;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut floor: f64 = 0.0;
    let n = x.len();
    for i in 0..n {
        let r = gx[i] / x[i];
        lo = lo.min(r);
        hi = hi.max(r);
        let mut s = 0.0;
        for j in 0..n {
            s += g[(i, j)].abs() * x[j];
        }
        floor = floor.max(s / x[i]);
    }
    (lo, hi, 32.0 * f64::EPSILON * floor)
}

/// Perron eigenpair of a Metzler matrix (eigenvalue of largest real part,
/// with its positive eigenvector).
///
/// Shifted inverse iteration with shifts kept strictly above the
/// Collatz-Wielandt upper bound: `(mu I - G)^{-1}` is then entrywise
/// positive, iterates stay positive, and the bounds bracket the eigenvalue
/// at every step. The vector is normalized so that `sum psi_i w_i = 1`.
pub fn top_eigenvalue(
    g: &GeneratorMatrix,
    weights: &[f64],
    warm: Option<&[f64]>,
    opts: EigenOptions,
) -> Result<PerronPair> {
    let n = g.len();
    let m = &g.matrix;
    let mut x = match warm {
        Some(w) if w.len() == n && w.iter().all(|v| *v > 0.0 && v.is_finite()) => {
            DVector::from_column_slice(w)
        }
        _ => DVector::from_element(n, 1.0),
    };
    let (mut lo, mut hi, mut floor) = cw_bounds(m, &x);
    let scale = 1.0 + hi.abs().max(lo.abs());
    let target = |floor: f64, hi: f64| (opts.tol * (1.0 + hi.abs())).max(floor);
    let mut iterations = 0;
    let mut refactors = 0;
    let mut best_width = hi - lo;
    let mut stall = 0;
    while hi - lo > target(floor, hi) {
        let width = (hi - lo).max(1e-10 * scale);
        let mu = hi + width;
        let mut a = -m.clone();
        for i in 0..n {
            a[(i, i)] += mu;
        }
        let lu = a.lu();
        refactors += 1;
        loop {
            iterations += 1;
            if iterations > opts.max_iter {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: hi - lo,
                });
            }
            let Some(y) = lu.solve(&x) else {
                return Err(Error::SingularSolve("shifted generator".into()));
            };
            let mx = y.max();
            if !(mx > 0.0) {
                return Err(Error::SingularSolve("inverse iteration lost positivity".into()));
            }
            x = y.map(|v| v.max(1e-280 * mx) / mx);
            let (l, h, f) = cw_bounds(m, &x);
            lo = lo.max(l);
            hi = hi.min(h);
            if lo > hi {
                let mid = 0.5 * (lo + hi);
                lo = mid;
                hi = mid;
            }
            floor = f;
            let w = hi - lo;
            if w < 0.5 * best_width {
                best_width = w;
                stall = 0;
            } else {
                stall += 1;
            }
            if w <= target(floor, hi) {
                break;
            }
            if stall > 50 {
                if w <= 1e3 * floor {
                    break;
                }
                return Err(Error::NoConvergence {
                    iterations,
                    residual: w,
                });
            }
            // re-shift once the bracket is much narrower than the shift
            if mu - hi > 20.0 * w && refactors < 40 {
                break;
            }
        }
        if hi - lo <= 1e3 * floor && stall > 50 {
            break;
        }
    }
    let norm: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum();
    let vector: Vec<f64> = x.iter().map(|v| v / norm).collect();
    Ok(PerronPair {
        lambda: 0.5 * (lo + hi),
        vector,
        bracket: (lo, hi),
        iterations,
    })
}

/// Probability vector `pi` with `pi^T G = 0`.
pub fn stationary_measure(g: &GeneratorMatrix) -> Result<Vec<f64>> {
    let n = g.len();
    let gt = g.matrix.transpose();
    let mut a = gt.clone();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut pi = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSolve("stationary equations".into()))?;
    // one step of iterative refinement
    let r = &rhs - &a * &pi;
    if let Some(dx) = lu.solve(&r) {
        pi += dx;
    }
    let scale = g.norm_inf().max(1.0);
    if pi.iter().any(|v| !v.is_finite() || *v < -1e-10 * scale.sqrt()) {
        return Err(Error::SingularSolve(
            "stationary vector is not positive; the null space is not one-dimensional".into(),
        ));
    }
    let mut out: Vec<f64> = pi.iter().map(|v| v.max(0.0)).collect();
    if out.contains(&0.0) {
        return Err(Error::SingularSolve(
            "stationary vector has zero entries; the generator is reducible".into(),
        ));
    }
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    Ok(out)
}

/// `|| pi^T G ||_inf`.
pub fn stationary_residual(g: &GeneratorMatrix, pi: &[f64]) -> f64 {
    let p = DVector::from_column_slice(pi);
    (g.matrix.transpose() * p).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::SCoefficients;
    use crate::spectral::generator::discretize_generator;
    use crate::spectral::SGrid;
    use approx::assert_abs_diff_eq;

    fn wavy(n: usize) -> SCoefficients {
        let g = SGrid::circle(n).unwrap();
        let t: Vec<f64> = (0..n).map(|i| g.coords(i)[0]).collect();
        SCoefficients::from_arrays(
            g,
            t.iter().map(|x| 1.0 + 0.5 * x.cos()).collect(),
            t.iter().map(|x| 0.2 * x.sin()).collect(),
            t.iter().map(|x| [1.0 + 0.3 * x.sin(), 0.0, 0.0]).collect(),
            t.iter().map(|x| [2.0 * x.cos() + 0.5, 0.0]).collect(),
            t.iter().map(|x| [0.4 * x.sin(), 0.0]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_gamma_has_zero_eigenvalue_and_constant_vector() {
        let co = wavy(64);
        let g = discretize_generator(&co, 0.0).unwrap();
        let pi = stationary_measure(&g).unwrap();
        let p = top_eigenvalue(&g, &pi, None, EigenOptions::default()).unwrap();
        assert!(p.lambda.abs() < 1e-10);
        for v in &p.vector {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_shift_moves_eigenvalue() {
        let co = wavy(48);
        let g = discretize_generator(&co, 0.0).unwrap().shifted(0.37);
        let w = vec![1.0 / 48.0; 48];
        let p = top_eigenvalue(&g, &w, None, EigenOptions::default()).unwrap();
        assert_abs_diff_eq!(p.lambda, 0.37, epsilon = 1e-10);
    }

    #[test]
    fn matches_dense_eigensolver() {
        let co = wavy(40);
        for &gamma in &[-1.3, 0.4, 2.2] {
            let g = discretize_generator(&co, gamma).unwrap();
            let w = vec![1.0 / 40.0; 40];
            let p = top_eigenvalue(&g, &w, None, EigenOptions::default()).unwrap();
            let dense = g
                .matrix
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_abs_diff_eq!(p.lambda, dense, epsilon = 1e-9);
            assert!(p.vector.iter().all(|v| *v > 0.0));
            assert!(p.bracket.0 <= p.bracket.1);
        }
    }

    #[test]
    fn stationary_density_matches_closed_form() {
        // a = 1, b = sin(theta): the stationary density is exp(-cos(theta))
        for &n in &[64usize, 128] {
            let g = SGrid::circle(n).unwrap();
            let co = SCoefficients::from_arrays(
                g.clone(),
                vec![1.0; n],
                vec![0.0; n],
                vec![[1.0, 0.0, 0.0]; n],
                (0..n).map(|i| [g.coords(i)[0].sin(), 0.0]).collect(),
                vec![[0.0, 0.0]; n],
            )
            .unwrap();
            let m = discretize_generator(&co, 0.0).unwrap();
            let pi = stationary_measure(&m).unwrap();
            assert!(stationary_residual(&m, &pi) < 1e-10);
            let exact: Vec<f64> = (0..n).map(|i| (-g.coords(i)[0].cos()).exp()).collect();
            let s: f64 = exact.iter().sum();
            let err = pi
                .iter()
                .zip(&exact)
                .map(|(p, e)| (p - e / s).abs() / (e / s))
                .fold(0.0, f64::max);
            assert!(err < 40.0 / (n * n) as f64, "n = {n}: relative error {err}");
        }
    }

    #[test]
    fn uniform_measure_for_constant_coefficients() {
        let g = SGrid::circle(32).unwrap();
        let co = SCoefficients::constant(g, 0.5, 0.0, [0.245, 0.0, 0.0], [0.7, 0.0], [0.0, 0.0]).unwrap();
        let pi = stationary_measure(&discretize_generator(&co, 0.0).unwrap()).unwrap();
        for p in pi {
            assert_abs_diff_eq!(p, 1.0 / 32.0, epsilon = 1e-14);
        }
    }
}
