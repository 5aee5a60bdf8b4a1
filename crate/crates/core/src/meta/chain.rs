use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stats::proportion;
use crate::error::{Error, Result};
use crate::sim::stream;

/// Discrete chain on the attracting surfaces, ordered by decreasing
/// exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub gammas: Vec<f64>,
    /// Row-stochastic transition matrix with zero diagonal.
    pub q: Vec<Vec<f64>>,
    /// Initial weights.
    pub p0: Vec<f64>,
}

impl ChainSpec {
    pub fn len(&self) -> usize {
        self.p0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p0.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.p0.len();
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if m == 0 || self.gammas.len() != m || self.q.len() != m || self.q.iter().any(|r| r.len() != m) {
            return bad(format!("chain dimensions disagree (m = {m})"));
        }
        if self.gammas.iter().any(|g| !(*g > 0.0)) || self.gammas.windows(2).any(|w| w[1] > w[0]) {
            return bad("exponents must be positive and sorted in decreasing order".into());
        }
        if self.p0.iter().any(|p| !(*p >= 0.0)) || (self.p0.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad("initial weights must be nonnegative and sum to 1".into());
        }
        for (i, row) in self.q.iter().enumerate() {
            if row.iter().any(|v| !(*v >= 0.0)) {
                return bad(format!("row {i} of q has a negative entry"));
            }
            if m > 1 && (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("row {i} of q does not sum to 1"));
            }
        }
        Ok(())
    }
}

/// Distribution of the chain at its first visit to the `l` surfaces with
/// the largest exponents, started from `p0`.
pub fn chain_hitting_distribution(chain: &ChainSpec, l: usize) -> Result<Vec<f64>> {
    chain.validate()?;
    let m = chain.len();
    if l == 0 || l > m {
        return Err(Error::InvalidArgument(format!("need 1 <= l <= {m}, got {l}")));
    }
    let mut out: Vec<f64> = chain.p0[..l].to_vec();
    if l == m {
        return Ok(out);
    }
    let t = m - l;
    // (I - Q_TT) H = Q_TA
    let a = DMatrix::from_fn(t, t, |i, j| {
        let v = chain.q[l + i][l + j];
        if i == j {
            1.0 - v
        } else {
            -v
        }
    });
    let rhs = DMatrix::from_fn(t, l, |i, j| chain.q[l + i][j]);
    let lu = a.clone().lu();
    let scale = a.amax().max(1.0);
    let min_pivot = (0..t).map(|i| lu.u()[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-12 * scale) {
        return Err(Error::AbsorptionFailure(format!(
            "pivot {min_pivot:.3e}: the transient surfaces do not lead to the first {l}"
        )));
    }
    let h = lu
        .solve(&rhs)
        .ok_or_else(|| Error::AbsorptionFailure("LU solve failed".into()))?;
    let pt = DVector::from_column_slice(&chain.p0[l..]);
    let extra = h.transpose() * pt;
    for (o, e) in out.iter_mut().zip(extra.iter()) {
        *o += e;
    }
    if out.iter().any(|v| !v.is_finite() || *v < -1e-12) {
        return Err(Error::AbsorptionFailure("non-physical hitting weights".into()));
    }
    Ok(out)
}

/// Monte Carlo version of [`chain_hitting_distribution`]: frequencies and
/// standard errors over `n` simulated chains.
pub fn simulate_chain(chain: &ChainSpec, l: usize, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    chain.validate()?;
    let m = chain.len();
    if l == 0 || l > m {
        return Err(Error::InvalidArgument(format!("need 1 <= l <= {m}, got {l}")));
    }
    let draw = |w: &[f64], u: f64| {
        let mut acc = 0.0;
        for (i, p) in w.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        w.len() - 1
    };
    let mut counts = vec![0usize; l];
    let mut rng = stream(seed, 0);
    for _ in 0..n {
        let mut s = draw(&chain.p0, rng.random());
        let mut steps = 0;
        while s >= l {
            s = draw(&chain.q[s], rng.random());
            steps += 1;
            if steps > 1_000_000 {
                return Err(Error::AbsorptionFailure("simulated chain never absorbed".into()));
            }
        }
        counts[s] += 1;
    }
    Ok(counts.iter().map(|&c| proportion(c, n)).unzip())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_three_state_example() {
        let chain = ChainSpec {
            gammas: vec![3.0, 2.0, 1.0],
            q: vec![vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5], vec![0.3, 0.7, 0.0]],
            p0: vec![0.2, 0.3, 0.5],
        };
        let p = chain_hitting_distribution(&chain, 2).unwrap();
        assert!((p[0] - 0.35).abs() < 1e-12 && (p[1] - 0.65).abs() < 1e-12);
    }

    #[test]
    fn trivial_cases() {
        let chain = ChainSpec {
            gammas: vec![2.0, 1.0],
            q: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            p0: vec![0.4, 0.6],
        };
        assert_eq!(chain_hitting_distribution(&chain, 2).unwrap(), vec![0.4, 0.6]);
        assert_eq!(chain_hitting_distribution(&chain, 1).unwrap(), vec![1.0]);
    }

    #[test]
    fn closed_transient_class_is_rejected() {
        let chain = ChainSpec {
            gammas: vec![3.0, 2.0, 1.0],
            q: vec![vec![0.0, 0.5, 0.5], vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]],
            p0: vec![0.2, 0.3, 0.5],
        };
        assert!(matches!(
            chain_hitting_distribution(&chain, 1),
            Err(Error::AbsorptionFailure(_))
        ));
    }
}
