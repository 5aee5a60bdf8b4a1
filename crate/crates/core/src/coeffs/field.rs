//! Analytic vector-field descriptors and their compiled evaluators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Finite-difference step for Jacobians of explicit fields.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldDescriptor {
    /// `A (x - p)`.
    LinearAtPoint {
        matrix: Vec<Vec<f64>>,
        anchor: Vec<f64>,
    },
    /// `sum_k w_k(x) A_k (x - p_k) + (1 - sum_k w_k(x)) background(x)` with
    /// bump weights `w_k` supported in the ball of radius `R_k` about `p_k`.
    Blend {
        terms: Vec<BlendTerm>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        background: Option<Box<FieldDescriptor>>,
    },
    /// One expression per component.
    Explicit { components: Vec<Expr> },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendTerm {
    pub matrix: Vec<Vec<f64>>,
    pub anchor: Vec<f64>,
    pub radius: f64,
}

impl FieldDescriptor {
    pub fn linear(matrix: Vec<Vec<f64>>, anchor: Vec<f64>) -> Self {
        FieldDescriptor::LinearAtPoint { matrix, anchor }
    }

    /// Linear field `A x` anchored at the origin.
    pub fn linear_origin(matrix: Vec<Vec<f64>>) -> Self {
        let d = matrix.len();
        FieldDescriptor::LinearAtPoint {
            matrix,
            anchor: vec![0.0; d],
        }
    }

    pub fn explicit(components: &[&str]) -> Result<Self> {
        Ok(FieldDescriptor::Explicit {
            components: components
                .iter()
                .map(|s| Expr::parse(s))
                .collect::<Result<_>>()?,
        })
    }
}

/// Bump `exp(1 - 1/(1 - s^2))` on `|s| < 1` and its derivative.
#[inline]
pub fn bump(s: f64) -> (f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let v = (1.0 - 1.0 / q).exp();
    (v, v * (-2.0 * s / (q * q)))
}

/// `C^2` ramp from 0 (for `s <= 1`) to 1 (for `s >= 2`) and its derivative.
#[inline]
pub fn ramp(s: f64) -> (f64, f64) {
    let t = (s - 1.0).clamp(0.0, 1.0);
    let v = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let dv = if s > 1.0 && s < 2.0 {
        30.0 * t * t * (1.0 - t) * (1.0 - t)
    } else {
        0.0
    };
    (v, dv)
}

#[derive(Debug, Clone)]
enum Kind {
    Zero,
    Linear {
        a: Vec<f64>,
        p: Vec<f64>,
    },
    Blend {
        terms: Vec<(Vec<f64>, Vec<f64>, f64)>,
        background: Option<Box<Field>>,
    },
    Explicit(Vec<Expr>),
}

/// A compiled vector field on `R^d`.
#[derive(Debug, Clone)]
pub struct Field {
    dim: usize,
    kind: Kind,
}

fn flatten_matrix(m: &[Vec<f64>], d: usize, what: &str) -> Result<Vec<f64>> {
    if m.len() != d || m.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidModel(format!("{what}: matrix must be {d}x{d}")));
    }
    let flat: Vec<f64> = m.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidModel(format!("{what}: non-finite matrix entry")));
    }
    Ok(flat)
}

impl Field {
    pub fn compile(desc: &FieldDescriptor, dim: usize) -> Result<Self> {
        let kind = match desc {
            FieldDescriptor::Zero => Kind::Zero,
            FieldDescriptor::LinearAtPoint { matrix, anchor } => {
                if anchor.len() != dim {
                    return Err(Error::InvalidModel(format!(
                        "linear field: anchor must have length {dim}"
                    )));
                }
                Kind::Linear {
                    a: flatten_matrix(matrix, dim, "linear field")?,
                    p: anchor.clone(),
                }
            }
            FieldDescriptor::Blend { terms, background } => {
                let mut out = Vec::with_capacity(terms.len());
                for t in terms {
                    if t.anchor.len() != dim || !(t.radius > 0.0) {
                        return Err(Error::InvalidModel(format!(
                            "blend term: anchor must have length {dim} and radius must be positive"
                        )));
                    }
                    out.push((
                        flatten_matrix(&t.matrix, dim, "blend term")?,
                        t.anchor.clone(),
                        t.radius,
                    ));
                }
                for i in 0..out.len() {
                    for j in (i + 1)..out.len() {
                        let dist: f64 = out[i]
                            .1
                            .iter()
                            .zip(&out[j].1)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        if dist < out[i].2 + out[j].2 {
                            return Err(Error::InvalidModel(
                                "blend terms must have disjoint supports".into(),
                            ));
                        }
                    }
                }
                let background = match background {
                    Some(b) => Some(Box::new(Field::compile(b, dim)?)),
                    None => None,
                };
                Kind::Blend {
                    terms: out,
                    background,
                }
            }
            FieldDescriptor::Explicit { components } => {
                if components.len() != dim {
                    return Err(Error::InvalidModel(format!(
                        "explicit field: expected {dim} components, got {}",
                        components.len()
                    )));
                }
                for c in components {
                    if let Some(v) = c.max_variable() {
                        if v >= dim {
                            return Err(Error::Expression {
                                source_text: c.source().to_string(),
                                message: format!("variable x{v} exceeds dimension {dim}"),
                            });
                        }
                    }
                }
                Kind::Explicit(components.clone())
            }
        };
        Ok(Self { dim, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// Whether the Jacobian is computed in closed form.
    pub fn has_analytic_jacobian(&self) -> bool {
        match &self.kind {
            Kind::Explicit(_) => false,
            Kind::Blend { background, .. } => {
                background.as_ref().is_none_or(|b| b.has_analytic_jacobian())
            }
            _ => true,
        }
    }

    /// Writes `v(x)` into `out`.
    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &self.kind {
            Kind::Zero => out[..d].fill(0.0),
            Kind::Linear { a, p } => linear_apply(a, p, x, out, 1.0, false),
            Kind::Blend { terms, background } => {
                match background {
                    Some(b) => b.eval(x, out),
                    None => out[..d].fill(0.0),
                }
                let mut wsum = 0.0;
                let mut acc = [0.0f64; 8];
                let mut tmp = vec![];
                let acc: &mut [f64] = if d <= 8 {
                    &mut acc[..d]
                } else {
                    tmp.resize(d, 0.0);
                    &mut tmp
                };
                for (a, p, r) in terms {
                    let mut s2 = 0.0;
                    for i in 0..d {
                        s2 += (x[i] - p[i]) * (x[i] - p[i]);
                    }
                    let s = s2.sqrt() / r;
                    if s >= 1.0 {
                        continue;
                    }
                    let (w, _) = bump(s);
                    wsum += w;
                    linear_apply(a, p, x, acc, w, true);
                }
                if wsum > 0.0 {
                    for i in 0..d {
                        out[i] = (1.0 - wsum) * out[i] + acc[i];
                    }
                }
            }
            Kind::Explicit(c) => {
                for (o, e) in out.iter_mut().zip(c) {
                    *o = e.eval(x);
                }
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval(x, &mut out);
        out
    }

    /// Writes the Jacobian `Dv(x)` (row-major, `d x d`) into `jac`.
    pub fn jacobian(&self, x: &[f64], jac: &mut [f64]) {
        let d = self.dim;
        match &self.kind {
            Kind::Zero => jac[..d * d].fill(0.0),
            Kind::Linear { a, .. } => jac[..d * d].copy_from_slice(a),
            Kind::Blend { terms, background } => {
                let mut bg = vec![0.0; d];
                match background {
                    Some(b) => {
                        b.eval(x, &mut bg);
                        b.jacobian(x, jac);
                    }
                    None => jac[..d * d].fill(0.0),
                }
                let mut wsum = 0.0;
                let mut gsum = vec![0.0; d];
                let mut add = vec![0.0; d * d];
                for (a, p, r) in terms {
                    let dx: Vec<f64> = (0..d).map(|i| x[i] - p[i]).collect();
                    let norm = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let s = norm / r;
                    if s >= 1.0 {
                        continue;
                    }
                    let (w, dw) = bump(s);
                    wsum += w;
                    let mut val = vec![0.0; d];
                    linear_apply(a, p, x, &mut val, 1.0, false);
                    let grad: Vec<f64> = if norm > 0.0 {
                        dx.iter().map(|v| dw * v / (norm * r)).collect()
                    } else {
                        vec![0.0; d]
                    };
                    for i in 0..d {
                        gsum[i] += grad[i];
                        for j in 0..d {
                            add[i * d + j] += w * a[i * d + j] + val[i] * grad[j];
                        }
                    }
                }
                if wsum > 0.0 {
                    for i in 0..d {
                        for j in 0..d {
                            jac[i * d + j] =
                                (1.0 - wsum) * jac[i * d + j] - bg[i] * gsum[j] + add[i * d + j];
                        }
                    }
                }
            }
            Kind::Explicit(_) => fd_jacobian(self, x, jac),
        }
    }

    pub fn jacobian_matrix(&self, x: &[f64]) -> Vec<f64> {
        let mut j = vec![0.0; self.dim * self.dim];
        self.jacobian(x, &mut j);
        j
    }
}

/// Five-point central-difference Jacobian.
pub fn fd_jacobian(f: &Field, x: &[f64], jac: &mut [f64]) {
    let d = f.dim();
    let h = FD_STEP;
    let mut xp = x.to_vec();
    let (mut f1, mut f2, mut f3, mut f4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for j in 0..d {
        xp[j] = x[j] + 2.0 * h;
        f.eval(&xp, &mut f1);
        xp[j] = x[j] + h;
        f.eval(&xp, &mut f2);
        xp[j] = x[j] - h;
        f.eval(&xp, &mut f3);
        xp[j] = x[j] - 2.0 * h;
        f.eval(&xp, &mut f4);
        xp[j] = x[j];
        for i in 0..d {
            jac[i * d + j] = (-f1[i] + 8.0 * f2[i] - 8.0 * f3[i] + f4[i]) / (12.0 * h);
        }
    }
}

/// `out (+)= w A (x - p)`.
#[inline]
fn linear_apply(a: &[f64], p: &[f64], x: &[f64], out: &mut [f64], w: f64, accumulate: bool) {
    let d = p.len();
    for i in 0..d {
        let mut s = 0.0;
        for j in 0..d {
            s += a[i * d + j] * (x[j] - p[j]);
        }
        if accumulate {
            out[i] += w * s;
        } else {
            out[i] = w * s;
        }
    }
}

/// Inward drift `-c x ramp(|x| / R)` acting outside the ball of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Confinement {
    pub radius: f64,
    pub strength: f64,
}

impl Confinement {
    #[inline]
    pub fn add_to(&self, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 <= self.radius * self.radius {
            return;
        }
        let (w, _) = ramp(r2.sqrt() / self.radius);
        for (o, xi) in out.iter_mut().zip(x) {
            *o -= self.strength * w * xi;
        }
    }

    pub fn add_jacobian(&self, x: &[f64], jac: &mut [f64]) {
        let d = x.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r <= self.radius {
            return;
        }
        let (w, dw) = ramp(r / self.radius);
        for i in 0..d {
            jac[i * d + i] -= self.strength * w;
            for j in 0..d {
                jac[i * d + j] -= self.strength * x[i] * dw * x[j] / (r * self.radius);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn blend() -> Field {
        let desc = FieldDescriptor::Blend {
            terms: vec![
                BlendTerm {
                    matrix: vec![vec![-1.0, 0.3], vec![0.2, -0.5]],
                    anchor: vec![-1.0, 0.0],
                    radius: 0.6,
                },
                BlendTerm {
                    matrix: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
                    anchor: vec![1.0, 0.0],
                    radius: 0.6,
                },
            ],
            background: Some(Box::new(
                FieldDescriptor::linear_origin(vec![vec![0.0, -1.0], vec![1.0, 0.0]]),
            )),
        };
        Field::compile(&desc, 2).unwrap()
    }

    #[test]
    fn bump_and_ramp_shapes() {
        assert_eq!(bump(0.0), (1.0, 0.0));
        assert_eq!(bump(1.0), (0.0, 0.0));
        assert_eq!(ramp(0.5), (0.0, 0.0));
        assert_eq!(ramp(2.5).0, 1.0);
        assert_abs_diff_eq!(ramp(1.5).0, 0.5, epsilon = 1e-15);
        let h = 1e-6;
        for &s in &[0.2, 0.7, 0.95] {
            let fd = (bump(s + h).0 - bump(s - h).0) / (2.0 * h);
            assert_abs_diff_eq!(fd, bump(s).1, epsilon = 1e-6);
        }
        for &s in &[1.2, 1.5, 1.9] {
            let fd = (ramp(s + h).0 - ramp(s - h).0) / (2.0 * h);
            assert_abs_diff_eq!(fd, ramp(s).1, epsilon = 1e-6);
        }
    }

    #[test]
    fn linear_field_jacobian_is_matrix() {
        let f = Field::compile(
            &FieldDescriptor::linear(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![1.0, 1.0]),
            2,
        )
        .unwrap();
        assert_eq!(f.value(&[2.0, 1.0]), vec![1.0, 3.0]);
        assert_eq!(f.jacobian_matrix(&[5.0, 5.0]), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn explicit_jacobian_at_origin() {
        let f = Field::compile(&FieldDescriptor::explicit(&["x^2", "y"]).unwrap(), 2).unwrap();
        let j = f.jacobian_matrix(&[0.0, 0.0]);
        assert_abs_diff_eq!(j[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(j[1], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(j[2], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(j[3], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn blend_analytic_jacobian_matches_finite_differences() {
        let f = blend();
        for x in [[-0.8, 0.1], [0.7, -0.3], [-1.2, 0.35], [0.0, 2.0], [1.0, 0.0]] {
            let mut fd = vec![0.0; 4];
            fd_jacobian(&f, &x, &mut fd);
            let an = f.jacobian_matrix(&x);
            for k in 0..4 {
                assert_abs_diff_eq!(an[k], fd[k], epsilon = 1e-8);
            }
        }
        assert_eq!(f.jacobian_matrix(&[-1.0, 0.0]), vec![-1.0, 0.3, 0.2, -0.5]);
    }

    #[test]
    fn blend_rejects_overlapping_terms() {
        let t = BlendTerm {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            anchor: vec![0.0, 0.0],
            radius: 1.0,
        };
        let mut t2 = t.clone();
        t2.anchor = vec![1.5, 0.0];
        let desc = FieldDescriptor::Blend {
            terms: vec![t, t2],
            background: None,
        };
        assert!(Field::compile(&desc, 2).is_err());
    }

    #[test]
    fn confinement_jacobian_matches_finite_differences() {
        let c = Confinement {
            radius: 1.0,
            strength: 2.0,
        };
        let x = [1.2, -0.7, 0.4];
        let h = 1e-6;
        let mut jac = vec![0.0; 9];
        c.add_jacobian(&x, &mut jac);
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let mut fp = vec![0.0; 3];
            let mut fm = vec![0.0; 3];
            c.add_to(&xp, &mut fp);
            c.add_to(&xm, &mut fm);
            for i in 0..3 {
                assert_abs_diff_eq!(jac[i * 3 + j], (fp[i] - fm[i]) / (2.0 * h), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn descriptor_json_round_trip() {
        let d = FieldDescriptor::explicit(&["-x*y", "sin(x)"]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"type":"explicit","components":["-x*y","sin(x)"]}"#);
        let back: FieldDescriptor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
}
