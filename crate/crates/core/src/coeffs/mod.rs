//! Model fields, their linearization at the invariant surfaces and the
//! local coefficients `alpha`, `beta`, `w_i`, `L_y`, `D_y` on a grid over
//! the angular manifold.

pub mod field;
pub mod model;

use serde::Serialize;

pub use field::{BlendTerm, Confinement, Field, FieldDescriptor};
pub use model::{AssumptionCheck, AssumptionReport, FieldSet, Model, ModelSpec};

use crate::error::{Error, Result};
use crate::geometry::{BasePoint, SphereChart, SphereTopology, SurfaceKind, SurfaceSpec};
use crate::spectral::SGrid;

/// Angular diffusion below this value counts as degenerate.
pub const ELLIPTICITY_TOL: f64 = 1e-12;
/// Step for differentiating `w_i` and `M_i` along the angles.
const ANGLE_STEP: f64 = 1e-5;

pub fn default_grid(surface: &SurfaceSpec, n: usize) -> Result<SGrid> {
    SGrid::for_topology(surface.topology()?, n)
}

/// Normal-block Jacobians `M_i(m)` and tangential speeds along a surface.
#[derive(Debug, Clone)]
pub struct LinearizationData {
    pub surface_id: usize,
    /// Codimension `d - d'`.
    pub normal_dim: usize,
    /// Sample parameters on the surface (a single point for point surfaces,
    /// angles for circles).
    pub m_samples: Vec<BasePoint>,
    /// `matrices[s][i]` is `M_i` at sample `s`, row-major, expressed in the
    /// surface's normal frame.
    pub matrices: Vec<Vec<Vec<f64>>>,
    /// `tangential[s][i]` is the angular speed `<v_i(m), t> / R` (zero for
    /// point surfaces).
    pub tangential: Vec<Vec<f64>>,
    model: Model,
    surface: SurfaceSpec,
}

impl LinearizationData {
    pub fn surface(&self) -> &SurfaceSpec {
        &self.surface
    }

    pub fn n_fields(&self) -> usize {
        self.model.n_noise() + 1
    }

    /// `(M_i(m), tangential speed_i)` for every field at an arbitrary base
    /// point.
    pub fn at(&self, m: &BasePoint) -> (Vec<Vec<f64>>, Vec<f64>) {
        normal_block(&self.model, &self.surface, m)
    }
}

fn normal_block(model: &Model, surface: &SurfaceSpec, m: &BasePoint) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = model.dim();
    let p = surface.base_point(m);
    let frame = surface.normal_frame(m);
    let k = frame.len();
    let tangent = match (m, &surface.kind) {
        (BasePoint::Angle(psi), SurfaceKind::Circle { radius, .. }) => {
            surface.circle_tangent(*psi).map(|t| (t, *radius))
        }
        _ => None,
    };
    let mut mats = Vec::with_capacity(model.n_noise() + 1);
    let mut speeds = Vec::with_capacity(model.n_noise() + 1);
    for i in 0..=model.n_noise() {
        let jac = if i == 0 {
            model.drift_jacobian(&p)
        } else {
            model.v(i).jacobian_matrix(&p)
        };
        let mut mh = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                let mut s = 0.0;
                for r in 0..d {
                    for c in 0..d {
                        s += frame[a][r] * jac[r * d + c] * frame[b][c];
                    }
                }
                mh[a * k + b] = s;
            }
        }
        mats.push(mh);
        let speed = match &tangent {
            Some((t, r)) => {
                let v = model.v(i).value(&p);
                v.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() / r
            }
            None => 0.0,
        };
        speeds.push(speed);
    }
    (mats, speeds)
}

/// Linearizes every field at the surface, after checking that the fields
/// leave it invariant.
pub fn linearize(model: &Model, surface_id: usize) -> Result<LinearizationData> {
    let surface = model.surface(surface_id)?.clone();
    let d = model.dim();
    let m_samples: Vec<BasePoint> = match surface.kind {
        SurfaceKind::Point { .. } => vec![BasePoint::Angle(0.0)],
        SurfaceKind::Circle { .. } => (0..64)
            .map(|k| BasePoint::Angle(std::f64::consts::TAU * k as f64 / 64.0))
            .collect(),
    };
    for m in &m_samples {
        let p = surface.base_point(m);
        let tangent = match m {
            BasePoint::Angle(psi) => surface.circle_tangent(*psi),
            _ => None,
        };
        let mut val = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        for i in 0..=model.n_noise() {
            if i == 0 {
                model.drift(&p, 0.0, &mut val, &mut scratch);
            } else {
                model.v(i).eval(&p, &mut val);
            }
            if let Some(t) = &tangent {
                let tv: f64 = val.iter().zip(t).map(|(a, b)| a * b).sum();
                val.iter_mut().zip(t).for_each(|(v, ti)| *v -= tv * ti);
            }
            let residual = val.iter().map(|v| v * v).sum::<f64>().sqrt();
            if residual > model::INVARIANCE_TOL {
                return Err(Error::NonInvariantField {
                    surface: surface_id,
                    field: i,
                    residual,
                });
            }
        }
    }
    let (matrices, tangential) = m_samples
        .iter()
        .map(|m| normal_block(model, &surface, m))
        .unzip();
    Ok(LinearizationData {
        surface_id,
        normal_dim: surface.normal_frame(&BasePoint::Angle(0.0)).len(),
        m_samples,
        matrices,
        tangential,
        model: model.clone(),
        surface,
    })
}

/// Local coefficients on an angular grid.
///
/// In grid coordinates `L_y = sum a_kl d_k d_l + sum b_k d_k` (with `a`
/// stored as `[a00, a01, a11]`) and `D_y = sum c_k d_k`.
#[derive(Debug, Clone, Serialize)]
pub struct SCoefficients {
    pub surface_id: usize,
    pub grid: SGrid,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub a: Vec<[f64; 3]>,
    pub b: Vec<[f64; 2]>,
    pub c: Vec<[f64; 2]>,
    /// `w[node][i]`, grid-coordinate components of `w_i`; empty when the
    /// coefficients were supplied directly.
    pub w: Vec<Vec<[f64; 2]>>,
    /// `q[node][i] = <M_i n, n>`.
    pub q: Vec<Vec<f64>>,
}

impl SCoefficients {
    /// Coefficients given directly as arrays (no underlying model).
    pub fn from_arrays(
        grid: SGrid,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        a: Vec<[f64; 3]>,
        b: Vec<[f64; 2]>,
        c: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let n = grid.len();
        if [alpha.len(), beta.len(), a.len(), b.len(), c.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::InvalidArgument(format!(
                "coefficient arrays must have the grid length {n}"
            )));
        }
        let co = Self {
            surface_id: 0,
            grid,
            alpha,
            beta,
            a,
            b,
            c,
            w: vec![],
            q: vec![],
        };
        co.check_ellipticity()?;
        Ok(co)
    }

    /// Constant coefficients on a grid.
    pub fn constant(grid: SGrid, alpha: f64, beta: f64, a: [f64; 3], b: [f64; 2], c: [f64; 2]) -> Result<Self> {
        let n = grid.len();
        Self::from_arrays(grid, vec![alpha; n], vec![beta; n], vec![a; n], vec![b; n], vec![c; n])
    }

    /// Smallest eigenvalue of the diffusion matrix over the grid, and where.
    pub fn min_diffusion(&self) -> (f64, usize) {
        let dim = self.grid.dim();
        let mut best = (f64::INFINITY, 0);
        for (i, a) in self.a.iter().enumerate() {
            let m = if dim == 1 {
                a[0]
            } else {
                let tr = 0.5 * (a[0] + a[2]);
                let det = a[0] * a[2] - a[1] * a[1];
                tr - (tr * tr - det).max(0.0).sqrt()
            };
            if m < best.0 {
                best = (m, i);
            }
        }
        best
    }

    pub fn min_alpha(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether `alpha` is numerically zero somewhere.
    pub fn alpha_flag(&self) -> bool {
        self.min_alpha() < 1e-12
    }

    pub fn check_ellipticity(&self) -> Result<()> {
        let (m, _) = self.min_diffusion();
        if !(m > ELLIPTICITY_TOL) {
            return Err(Error::EllipticityFailure {
                surface: self.surface_id,
                min_diffusion: m,
            });
        }
        Ok(())
    }
}

/// `w_i(y)` in grid coordinates plus `q_i(y)`, and the derivative of the
/// quadratic form along `w_i`, for every field at one angular position.
struct LocalFields {
    w: Vec<[f64; 2]>,
    q: Vec<f64>,
    lq: Vec<f64>,
}

fn local_fields(lin: &LinearizationData, chart: &SphereChart, y: &[f64], with_lq: bool) -> LocalFields {
    let m = chart.base(y);
    let (mats, speeds) = lin.at(&m);
    let mats_d = if with_lq && chart.topology == SphereTopology::Torus {
        let (mp, _) = lin.at(&BasePoint::Angle(y[0] + 1e-4));
        let (mm, _) = lin.at(&BasePoint::Angle(y[0] - 1e-4));
        Some(
            mp.iter()
                .zip(&mm)
                .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q) / 2e-4).collect::<Vec<f64>>())
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let n = chart.normal_coords(y);
    let k = n.len();
    let tangents = chart.normal_tangents(y);
    let nf = mats.len();
    let mut out = LocalFields {
        w: Vec::with_capacity(nf),
        q: Vec::with_capacity(nf),
        lq: Vec::with_capacity(nf),
    };
    let quad = |mat: &[f64], u: &[f64], v: &[f64]| -> f64 {
        let mut s = 0.0;
        for a in 0..k {
            for b in 0..k {
                s += u[a] * mat[a * k + b] * v[b];
            }
        }
        s
    };
    for i in 0..nf {
        let mat = &mats[i];
        let mn: Vec<f64> = (0..k).map(|a| (0..k).map(|b| mat[a * k + b] * n[b]).sum()).collect();
        let q: f64 = mn.iter().zip(&n).map(|(a, b)| a * b).sum();
        let mut w = [0.0; 2];
        for (dir, t) in &tangents {
            let t2: f64 = t.iter().map(|v| v * v).sum();
            w[*dir] = mn.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() / t2;
        }
        if chart.topology == SphereTopology::Torus {
            w[0] = speeds[i];
        }
        let mut lq = 0.0;
        if with_lq {
            // n-part: derivative of <M n, n> along M n - q n
            let tang: Vec<f64> = (0..k).map(|a| mn[a] - q * n[a]).collect();
            lq = quad(mat, &n, &tang) + quad(mat, &tang, &n);
            if let Some(md) = &mats_d {
                lq += w[0] * quad(&md[i], &n, &n);
            }
        }
        out.w.push(w);
        out.q.push(q);
        out.lq.push(lq);
    }
    out
}

/// Assembles `alpha`, `beta`, `w_i` and the coefficients of `L_y` and `D_y`.
pub fn assemble_coeffs(lin: &LinearizationData, grid: &SGrid) -> Result<SCoefficients> {
    let chart = SphereChart::new(lin.surface())?;
    if chart.topology != grid.topology {
        return Err(Error::InvalidArgument(
            "grid topology does not match the surface".into(),
        ));
    }
    let dim = grid.dim();
    let nn = grid.len();
    let nf = lin.n_fields();
    let mut co = SCoefficients {
        surface_id: lin.surface_id,
        grid: grid.clone(),
        alpha: vec![0.0; nn],
        beta: vec![0.0; nn],
        a: vec![[0.0; 3]; nn],
        b: vec![[0.0; 2]; nn],
        c: vec![[0.0; 2]; nn],
        w: Vec::with_capacity(nn),
        q: Vec::with_capacity(nn),
    };
    for idx in 0..nn {
        let y = grid.coords(idx);
        let lf = local_fields(lin, &chart, &y[..dim], true);
        // derivatives of w_i along the angles
        let mut dw = vec![[[0.0; 2]; 2]; nf];
        for kdir in 0..dim {
            let mut yp = y;
            let mut ym = y;
            yp[kdir] += ANGLE_STEP;
            ym[kdir] -= ANGLE_STEP;
            let fp = local_fields(lin, &chart, &yp[..dim], false);
            let fm = local_fields(lin, &chart, &ym[..dim], false);
            for i in 0..nf {
                for l in 0..dim {
                    dw[i][l][kdir] = (fp.w[i][l] - fm.w[i][l]) / (2.0 * ANGLE_STEP);
                }
            }
        }
        let mut alpha = 0.0;
        let mut beta = lf.q[0];
        let mut a = [0.0; 3];
        let mut b = lf.w[0];
        let mut c = [0.0; 2];
        for i in 1..nf {
            let (q, w) = (lf.q[i], lf.w[i]);
            alpha += 0.5 * q * q;
            beta += 0.5 * (lf.lq[i] + q * q);
            a[0] += 0.5 * w[0] * w[0];
            a[1] += 0.5 * w[0] * w[1];
            a[2] += 0.5 * w[1] * w[1];
            for l in 0..dim {
                let mut s = 0.0;
                for kdir in 0..dim {
                    s += w[kdir] * dw[i][l][kdir];
                }
                b[l] += 0.5 * s;
                c[l] += q * w[l];
            }
        }
        co.alpha[idx] = alpha;
        co.beta[idx] = beta;
        co.a[idx] = a;
        co.b[idx] = b;
        co.c[idx] = c;
        co.w.push(lf.w);
        co.q.push(lf.q);
    }
    co.check_ellipticity()?;
    Ok(co)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::model_a;
    use approx::assert_abs_diff_eq;

    #[test]
    fn model_a_linearization_is_exact() {
        let m = model_a(-0.5, 1.0, 0.7);
        let lin = linearize(&m, 0).unwrap();
        assert_eq!(lin.matrices[0][0], vec![-0.5, 0.0, 0.0, -0.5]);
        assert_eq!(lin.matrices[0][1], vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(lin.matrices[0][2], vec![0.0, -0.7, 0.7, 0.0]);
    }

    #[test]
    fn model_a_coefficients() {
        let (a, s, r) = (-0.5, 1.3, 0.7);
        let m = model_a(a, s, r);
        let lin = linearize(&m, 0).unwrap();
        let co = assemble_coeffs(&lin, &SGrid::circle(16).unwrap()).unwrap();
        for i in 0..16 {
            assert_abs_diff_eq!(co.alpha[i], s * s / 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(co.beta[i], a + s * s / 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(co.w[i][1][0], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(co.w[i][2][0], r, epsilon = 1e-14);
            assert_abs_diff_eq!(co.c[i][0], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(co.a[i][0], r * r / 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(co.b[i][0], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn diagonal_noise_alpha_is_quadratic_form() {
        let (s1, s2) = (0.8, 1.7);
        let spec = ModelSpec {
            name: None,
            dimension: 2,
            surfaces: vec![SurfaceSpec::point(0, vec![0.0, 0.0])],
            fields: FieldSet {
                v: vec![
                    FieldDescriptor::Zero,
                    FieldDescriptor::linear_origin(vec![vec![s1, 0.0], vec![0.0, s2]]),
                    FieldDescriptor::linear_origin(vec![vec![0.0, -1.0], vec![1.0, 0.0]]),
                ],
                v_tilde: vec![],
            },
            confinement: None,
        };
        let m = Model::new(spec).unwrap();
        let co = assemble_coeffs(&linearize(&m, 0).unwrap(), &SGrid::circle(24).unwrap()).unwrap();
        for i in 0..24 {
            let t = co.grid.coords(i)[0];
            let q1 = s1 * t.cos().powi(2) + s2 * t.sin().powi(2);
            assert_abs_diff_eq!(co.alpha[i], 0.5 * q1 * q1, epsilon = 1e-13);
        }
    }

    #[test]
    fn symbolic_beta_matches_grid_differencing() {
        // beta's derivative term against differencing q_i along w_i on a fine grid
        let spec = ModelSpec {
            name: None,
            dimension: 2,
            surfaces: vec![SurfaceSpec::point(0, vec![0.0, 0.0])],
            fields: FieldSet {
                v: vec![
                    FieldDescriptor::linear_origin(vec![vec![-0.3, 0.2], vec![0.1, -0.4]]),
                    FieldDescriptor::linear_origin(vec![vec![0.8, 0.5], vec![-0.2, 1.1]]),
                    FieldDescriptor::linear_origin(vec![vec![0.1, -1.0], vec![0.9, 0.3]]),
                ],
                v_tilde: vec![],
            },
            confinement: None,
        };
        let m = Model::new(spec).unwrap();
        let lin = linearize(&m, 0).unwrap();
        let n = 4096;
        let co = assemble_coeffs(&lin, &SGrid::circle(n).unwrap()).unwrap();
        let h = co.grid.spacing[0];
        let mut err: f64 = 0.0;
        for idx in 0..n {
            let (ip, im) = ((idx + 1) % n, (idx + n - 1) % n);
            let mut beta = co.q[idx][0];
            for i in 1..3 {
                let dq = (co.q[ip][i] - co.q[im][i]) / (2.0 * h);
                beta += 0.5 * (co.w[idx][i][0] * dq + co.q[idx][i].powi(2));
            }
            err = err.max((beta - co.beta[idx]).abs());
        }
        assert!(err < 1e-5, "max deviation {err}");
    }

    #[test]
    fn zero_noise_linearization_flags_alpha() {
        let spec = ModelSpec {
            name: None,
            dimension: 2,
            surfaces: vec![SurfaceSpec::point(0, vec![0.0, 0.0])],
            fields: FieldSet {
                v: vec![
                    FieldDescriptor::linear_origin(vec![vec![-1.0, 0.0], vec![0.0, -1.0]]),
                    FieldDescriptor::linear_origin(vec![vec![0.0, -1.0], vec![1.0, 0.0]]),
                ],
                v_tilde: vec![],
            },
            confinement: None,
        };
        let m = Model::new(spec).unwrap();
        let co = assemble_coeffs(&linearize(&m, 0).unwrap(), &SGrid::circle(16).unwrap()).unwrap();
        assert!(co.alpha_flag());
    }

    #[test]
    fn rotation_free_model_is_not_elliptic() {
        let m = model_a(-0.5, 1.0, 0.0);
        let err = assemble_coeffs(&linearize(&m, 0).unwrap(), &SGrid::circle(16).unwrap());
        assert!(matches!(err, Err(Error::EllipticityFailure { .. })));
    }

    #[test]
    fn explicit_field_linearization() {
        let spec = ModelSpec {
            name: None,
            dimension: 2,
            surfaces: vec![SurfaceSpec::point(0, vec![0.0, 0.0])],
            fields: FieldSet {
                v: vec![
                    FieldDescriptor::Zero,
                    FieldDescriptor::explicit(&["x^2", "y"]).unwrap(),
                ],
                v_tilde: vec![],
            },
            confinement: None,
        };
        let lin = linearize(&Model::new(spec).unwrap(), 0).unwrap();
        let m = &lin.matrices[0][1];
        let expect = [0.0, 0.0, 0.0, 1.0];
        for k in 0..4 {
            assert_abs_diff_eq!(m[k], expect[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn non_invariant_field_is_rejected() {
        let spec = ModelSpec {
            name: None,
            dimension: 2,
            surfaces: vec![SurfaceSpec::point(0, vec![0.0, 0.0])],
            fields: FieldSet {
                v: vec![
                    FieldDescriptor::Zero,
                    FieldDescriptor::explicit(&["1 + x", "y"]).unwrap(),
                ],
                v_tilde: vec![],
            },
            confinement: None,
        };
        let err = linearize(&Model::new(spec).unwrap(), 0);
        assert!(matches!(err, Err(Error::NonInvariantField { field: 1, .. })));
    }

    #[test]
    fn blend_linearization_matches_finite_differences() {
        let blend = FieldDescriptor::Blend {
            terms: vec![BlendTerm {
                matrix: vec![vec![0.4, -0.3], vec![0.6, 0.2]],
                anchor: vec![0.0, 0.0],
                radius: 0.5,
            }],
            background: None,
        };
        let f = Field::compile(&blend, 2).unwrap();
        for x in [[0.0, 0.0], [0.2, -0.1], [0.3, 0.3]] {
            let an = f.jacobian_matrix(&x);
            let mut fd = vec![0.0; 4];
            field::fd_jacobian(&f, &x, &mut fd);
            for k in 0..4 {
                assert_abs_diff_eq!(an[k], fd[k], epsilon = 1e-8);
            }
        }
    }
}
