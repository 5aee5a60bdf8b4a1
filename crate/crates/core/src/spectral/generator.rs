use nalgebra::DMatrix;

use crate::coeffs::SCoefficients;
use crate::error::{Error, Result};

/// Dense discretization of `L_y + gamma D_y + gamma(gamma-1) alpha + gamma beta`.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub matrix: DMatrix<f64>,
    pub gamma: f64,
    /// Whether the potential `gamma(gamma-1) alpha + gamma beta` is included.
    pub with_potential: bool,
    /// Number of cross-derivative weights that had to be clipped to keep
    /// the off-diagonal entries non-negative.
    pub clipped: usize,
}

/// `x / (e^x - 1)`, with the removable singularity at 0 filled in.
#[inline]
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - 0.5 * x + x * x / 12.0
    } else {
        x / x.exp_m1()
    }
}

/// Assembles `M(gamma)`. Along every grid direction the first- and
/// second-order terms are combined by exponential fitting, so neighbour
/// weights stay non-negative at any drift strength; mixed derivatives use
/// the 7-point stencil whose diagonal follows the sign of `a01`.
pub fn discretize_generator(co: &SCoefficients, gamma: f64) -> Result<GeneratorMatrix> {
    assemble(co, gamma, true)
}

/// `L_y + gamma D_y` alone (no potential).
pub fn discretize_operator(co: &SCoefficients, gamma: f64) -> Result<GeneratorMatrix> {
    assemble(co, gamma, false)
}

fn assemble(co: &SCoefficients, gamma: f64, with_potential: bool) -> Result<GeneratorMatrix> {
    co.check_ellipticity()?;
    let g = &co.grid;
    let n = g.len();
    let dim = g.dim();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut clipped = 0;
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(9);
    for i in 0..n {
        row.clear();
        let a = co.a[i];
        let diag_a = [a[0], a[2]];
        for k in 0..dim {
            let h = g.spacing[k];
            let akk = diag_a[k];
            let drift = co.b[i][k] + gamma * co.c[i][k];
            let pe = drift * h / akk;
            let s = akk / (h * h);
            let (plus, minus) = if k == 0 { ((1, 0), (-1, 0)) } else { ((0, 1), (0, -1)) };
            row.push((g.neighbor(i, plus.0, plus.1), s * bernoulli(-pe)));
            row.push((g.neighbor(i, minus.0, minus.1), s * bernoulli(pe)));
        }
        if dim == 2 && a[1] != 0.0 {
            let s = a[1].abs() / (g.spacing[0] * g.spacing[1]);
            let (d1, d2) = if a[1] > 0.0 { ((1, 1), (-1, -1)) } else { ((1, -1), (-1, 1)) };
            row.push((g.neighbor(i, d1.0, d1.1), s));
            row.push((g.neighbor(i, d2.0, d2.1), s));
            for e in row.iter_mut().take(4) {
                if e.1 >= s {
                    e.1 -= s;
                } else {
                    e.1 = 0.0;
                    clipped += 1;
                }
            }
        }
        let mut total = 0.0;
        for &(j, w) in &row {
            if j == i {
                continue;
            }
            m[(i, j)] += w;
            total += w;
        }
        let mut diag = -total;
        if with_potential {
            diag += gamma * (gamma - 1.0) * co.alpha[i] + gamma * co.beta[i];
        }
        m[(i, i)] += diag;
    }
    Ok(GeneratorMatrix {
        matrix: m,
        gamma,
        with_potential,
        clipped,
    })
}

impl GeneratorMatrix {
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Verifies that every off-diagonal entry is non-negative.
    pub fn check_metzler(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[(i, j)];
                if i != j && v < 0.0 {
                    return Err(Error::NotMetzler { row: i, col: j, value: v });
                }
            }
        }
        Ok(())
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Adds a constant to the diagonal.
    pub fn shifted(&self, v: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            out.matrix[(i, i)] += v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SGrid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bernoulli_branches_agree() {
        for &x in &[-1e-4, 1e-4, -2e-4, 2e-4] {
            let direct = x / f64::exp_m1(x);
            assert_abs_diff_eq!(bernoulli(x), direct, epsilon = 1e-12);
        }
        assert_eq!(bernoulli(0.0), 1.0);
        assert_abs_diff_eq!(bernoulli(-3.0) - bernoulli(3.0), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_gamma_rows_sum_to_zero() {
        let g = SGrid::torus(8, 8).unwrap();
        let n = g.len();
        let a: Vec<[f64; 3]> = (0..n).map(|i| [1.0 + 0.3 * (i as f64).sin(), 0.4, 0.9]).collect();
        let b: Vec<[f64; 2]> = (0..n).map(|i| [5.0 * (i as f64).cos(), -2.0]).collect();
        let co = SCoefficients::from_arrays(g, vec![1.0; n], vec![0.3; n], a, b, vec![[1.0, 1.0]; n]).unwrap();
        let m = discretize_generator(&co, 0.0).unwrap();
        m.check_metzler().unwrap();
        for r in m.matrix.row_iter() {
            assert!(r.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn circulant_spectrum() {
        let n = 16;
        let g = SGrid::circle(n).unwrap();
        let (a, b) = (0.7, 2.5);
        let co = SCoefficients::constant(g.clone(), 1.0, 0.0, [a, 0.0, 0.0], [b, 0.0], [0.0, 0.0]).unwrap();
        let m = discretize_generator(&co, 0.0).unwrap();
        let h = g.spacing[0];
        let pe = b * h / a;
        let wp = a / (h * h) * bernoulli(-pe);
        let wm = a / (h * h) * bernoulli(pe);
        let eig = m.matrix.complex_eigenvalues();
        for k in 0..n {
            let th = std::f64::consts::TAU * k as f64 / n as f64;
            let re = (wp + wm) * (th.cos() - 1.0);
            let im = (wp - wm) * th.sin();
            let hit = eig
                .iter()
                .any(|z| (z.re - re).abs() < 1e-9 && (z.im - im).abs() < 1e-9);
            assert!(hit, "missing circulant eigenvalue {re} + {im}i");
        }
    }
}
