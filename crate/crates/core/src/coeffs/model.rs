use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::field::{Confinement, Field, FieldDescriptor};
use crate::error::{Error, Result};
use crate::geometry::{resolve_chart_radii, BasePoint, SurfaceKind, SurfaceSpec};

/// Threshold for the sampled span checks.
pub const SPAN_THRESHOLD: f64 = 1e-6;
/// Tolerance for the invariance check at the surfaces.
pub const INVARIANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSet {
    /// `v_0` (drift) followed by the noise fields `v_1 .. v_n`.
    pub v: Vec<FieldDescriptor>,
    /// `v~_0` (drift) followed by `v~_1 .. v~_n'`; may be empty.
    #[serde(default)]
    pub v_tilde: Vec<FieldDescriptor>,
}

/// Analytic description of a model, as read from a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    pub surfaces: Vec<SurfaceSpec>,
    pub fields: FieldSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confinement: Option<Confinement>,
}

/// A validated model with compiled fields.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    v: Vec<Field>,
    vt: Vec<Field>,
    conf: Option<Confinement>,
}

impl Model {
    pub fn new(mut spec: ModelSpec) -> Result<Self> {
        let d = spec.dimension;
        if d < 2 {
            return Err(Error::InvalidModel("dimension must be at least 2".into()));
        }
        if spec.surfaces.is_empty() {
            return Err(Error::InvalidModel("at least one surface is required".into()));
        }
        if spec.fields.v.len() < 2 {
            return Err(Error::InvalidModel(
                "fields.v needs v_0 and at least one noise field".into(),
            ));
        }
        if spec.fields.v_tilde.len() == 1 {
            return Err(Error::InvalidModel(
                "fields.v_tilde needs at least one noise field after v~_0".into(),
            ));
        }
        for (k, s) in spec.surfaces.iter_mut().enumerate() {
            s.id = k;
            if s.dimension() != d {
                return Err(Error::InvalidModel(format!(
                    "surface {k} lives in dimension {}, model has {d}",
                    s.dimension()
                )));
            }
            s.validate()?;
        }
        resolve_chart_radii(&mut spec.surfaces);
        if let Some(c) = spec.confinement {
            if !(c.radius > 0.0) || !(c.strength > 0.0) {
                return Err(Error::InvalidModel(
                    "confinement radius and strength must be positive".into(),
                ));
            }
        }
        let v = spec
            .fields
            .v
            .iter()
            .map(|f| Field::compile(f, d))
            .collect::<Result<_>>()?;
        let vt = spec
            .fields
            .v_tilde
            .iter()
            .map(|f| Field::compile(f, d))
            .collect::<Result<_>>()?;
        Ok(Self {
            conf: spec.confinement,
            spec,
            v,
            vt,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dimension
    }

    pub fn surfaces(&self) -> &[SurfaceSpec] {
        &self.spec.surfaces
    }

    pub fn surface(&self, id: usize) -> Result<&SurfaceSpec> {
        self.spec
            .surfaces
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("no surface with id {id}")))
    }

    /// Number of Wiener processes driving the unperturbed process.
    pub fn n_noise(&self) -> usize {
        self.v.len() - 1
    }

    /// Number of Wiener processes in the perturbation.
    pub fn n_pert_noise(&self) -> usize {
        self.vt.len().saturating_sub(1)
    }

    pub fn has_perturbation(&self) -> bool {
        !self.vt.is_empty()
    }

    pub fn v(&self, i: usize) -> &Field {
        &self.v[i]
    }

    pub fn v_tilde(&self, i: usize) -> Option<&Field> {
        self.vt.get(i)
    }

    pub fn confinement(&self) -> Option<Confinement> {
        self.conf
    }

    /// Stratonovich drift `v_0 + confinement + eps^2 v~_0`.
    #[inline]
    pub fn drift(&self, x: &[f64], eps: f64, out: &mut [f64], scratch: &mut [f64]) {
        self.v[0].eval(x, out);
        if let Some(c) = &self.conf {
            c.add_to(x, out);
        }
        if eps > 0.0 && !self.vt.is_empty() && !self.vt[0].is_zero() {
            self.vt[0].eval(x, scratch);
            let e2 = eps * eps;
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += e2 * s;
            }
        }
    }

    /// Jacobian of the full drift `v_0 + confinement`.
    pub fn drift_jacobian(&self, x: &[f64]) -> Vec<f64> {
        let mut j = self.v[0].jacobian_matrix(x);
        if let Some(c) = &self.conf {
            c.add_jacobian(x, &mut j);
        }
        j
    }

    /// Ito-equivalent drift correction
    /// `1/2 sum_i (Dv_i) v_i + 1/2 eps^2 sum_j (Dv~_j) v~_j`.
    pub fn strat_correction(&self, x: &[f64], eps: f64) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        let mut val = vec![0.0; d];
        let mut jac = vec![0.0; d * d];
        let mut add = |f: &Field, w: f64, out: &mut [f64]| {
            if f.is_zero() {
                return;
            }
            f.eval(x, &mut val);
            f.jacobian(x, &mut jac);
            for i in 0..d {
                let s: f64 = (0..d).map(|j| jac[i * d + j] * val[j]).sum();
                out[i] += 0.5 * w * s;
            }
        };
        for f in &self.v[1..] {
            add(f, 1.0, &mut out);
        }
        if eps > 0.0 {
            for f in self.vt.iter().skip(1) {
                add(f, eps * eps, &mut out);
            }
        }
        out
    }

    /// Radius of the region where the sampled checks are performed.
    pub fn domain_radius(&self) -> f64 {
        if let Some(c) = self.conf {
            return c.radius;
        }
        let mut r: f64 = 1.0;
        for s in self.surfaces() {
            let ext = match &s.kind {
                SurfaceKind::Point { location } => {
                    location.iter().map(|v| v * v).sum::<f64>().sqrt()
                }
                SurfaceKind::Circle { center, radius, .. } => {
                    center.iter().map(|v| v * v).sum::<f64>().sqrt() + radius
                }
            };
            r = r.max(ext + 1.0);
        }
        r
    }

    pub fn check_assumptions(&self) -> AssumptionReport {
        AssumptionReport {
            checks: vec![
                self.check_invariance(),
                self.check_span(false),
                self.check_span(true),
                self.check_confinement(),
                self.check_ellipticity(),
            ],
        }
    }

    fn check_invariance(&self) -> AssumptionCheck {
        let mut worst = 0.0f64;
        let mut witness = None;
        let mut tangential_ok = true;
        let mut detail = String::from("fields vanish on the surfaces (normal components for circles)");
        for s in self.surfaces() {
            let samples: Vec<BasePoint> = match s.kind {
                SurfaceKind::Point { .. } => vec![BasePoint::Angle(0.0)],
                SurfaceKind::Circle { .. } => (0..64)
                    .map(|k| BasePoint::Angle(std::f64::consts::TAU * k as f64 / 64.0))
                    .collect(),
            };
            for m in &samples {
                let p = s.base_point(m);
                let mut max_tangent = 0.0f64;
                for (i, f) in self.v.iter().enumerate() {
                    let val = f.value(&p);
                    let (resid, tan) = match (&s.kind, m) {
                        (SurfaceKind::Circle { .. }, BasePoint::Angle(psi)) => {
                            let t = s.circle_tangent(*psi).unwrap();
                            let tv: f64 = val.iter().zip(&t).map(|(a, b)| a * b).sum();
                            let n2: f64 = val.iter().zip(&t).map(|(v, ti)| (v - tv * ti).powi(2)).sum();
                            (n2.sqrt(), tv.abs())
                        }
                        _ => (val.iter().map(|v| v * v).sum::<f64>().sqrt(), 0.0),
                    };
                    if i > 0 {
                        max_tangent = max_tangent.max(tan);
                    }
                    if resid > worst {
                        worst = resid;
                        witness = Some(p.clone());
                    }
                }
                if matches!(s.kind, SurfaceKind::Circle { .. }) && max_tangent < SPAN_THRESHOLD {
                    tangential_ok = false;
                    detail = format!(
                        "noise fields do not span the tangent of circle surface {}",
                        s.id
                    );
                    witness = Some(p.clone());
                }
            }
        }
        AssumptionCheck {
            name: "a".into(),
            description: "surfaces are invariant and the noise spans their tangent spaces".into(),
            passed: worst <= INVARIANCE_TOL && tangential_ok,
            value: worst,
            witness,
            detail,
        }
    }

    fn check_span(&self, perturbation: bool) -> AssumptionCheck {
        let (name, description) = if perturbation {
            ("c", "perturbation noise fields span R^d everywhere")
        } else {
            ("b", "noise fields span R^d away from the surfaces")
        };
        let fields: &[Field] = if perturbation {
            if self.vt.len() < 2 {
                return AssumptionCheck {
                    name: name.into(),
                    description: description.into(),
                    passed: false,
                    value: 0.0,
                    witness: None,
                    detail: "model has no perturbation fields".into(),
                };
            }
            &self.vt[1..]
        } else {
            &self.v[1..]
        };
        let d = self.dim();
        let radius = self.domain_radius();
        let mut worst = f64::INFINITY;
        let mut witness = None;
        for x in halton_ball(d, radius, 1000) {
            if !perturbation && self.surfaces().iter().any(|s| s.distance(&x) < 1e-2) {
                continue;
            }
            let smin = min_singular_value(fields, &x);
            if smin < worst {
                worst = smin;
                witness = Some(x);
            }
        }
        AssumptionCheck {
            name: name.into(),
            description: description.into(),
            passed: worst > SPAN_THRESHOLD,
            value: worst,
            witness,
            detail: format!("smallest singular value over 1000 quasi-random points in |x| <= {radius}"),
        }
    }

    fn check_confinement(&self) -> AssumptionCheck {
        let description = "drift points inward far from the origin".to_string();
        let Some(c) = self.conf else {
            return AssumptionCheck {
                name: "d".into(),
                description,
                passed: false,
                value: f64::INFINITY,
                witness: None,
                detail: "model has no confinement".into(),
            };
        };
        let d = self.dim();
        let r = 2.0 * c.radius;
        let mut worst = f64::NEG_INFINITY;
        let mut witness = None;
        let mut out = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        for u in halton_sphere(d, 1000) {
            let x: Vec<f64> = u.iter().map(|v| v * r).collect();
            self.drift(&x, 0.0, &mut out, &mut scratch);
            let radial = out.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / r;
            if radial > worst {
                worst = radial;
                witness = Some(x);
            }
        }
        AssumptionCheck {
            name: "d".into(),
            description,
            passed: worst < 0.0,
            value: worst,
            witness,
            detail: format!("largest <v_0(x), x>/|x| on the sphere |x| = {r}"),
        }
    }

    fn check_ellipticity(&self) -> AssumptionCheck {
        let mut worst = f64::INFINITY;
        let mut detail = String::new();
        let mut witness = None;
        for s in self.surfaces() {
            match super::linearize(self, s.id)
                .and_then(|lin| super::assemble_coeffs(&lin, &super::default_grid(s, 32)?))
            {
                Ok(co) => {
                    let (m, idx) = co.min_diffusion();
                    if m < worst {
                        worst = m;
                        witness = Some(co.grid.coords(idx).to_vec());
                    }
                    if co.min_alpha() < 1e-12 {
                        detail.push_str(&format!("surface {}: min alpha below 1e-12; ", s.id));
                    }
                }
                Err(Error::EllipticityFailure { min_diffusion, .. }) => {
                    worst = worst.min(min_diffusion);
                }
                Err(e) => {
                    detail.push_str(&format!("surface {}: {e}; ", s.id));
                    worst = worst.min(f64::NEG_INFINITY);
                }
            }
        }
        if detail.is_empty() {
            detail = "smallest eigenvalue of the angular diffusion matrix on a 32-point grid".into();
        }
        AssumptionCheck {
            name: "e".into(),
            description: "angular operator L_y is elliptic near every surface".into(),
            passed: worst > super::ELLIPTICITY_TOL,
            value: worst,
            witness,
            detail,
        }
    }
}

/// Smallest singular value of the `d x n` matrix of field values at `x`.
pub fn min_singular_value(fields: &[Field], x: &[f64]) -> f64 {
    let d = x.len();
    if fields.len() < d {
        return 0.0;
    }
    let mut g = DMatrix::<f64>::zeros(d, d);
    let mut val = vec![0.0; d];
    for f in fields {
        f.eval(x, &mut val);
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] += val[i] * val[j];
            }
        }
    }
    let eig = SymmetricEigen::new(g);
    eig.eigenvalues.min().max(0.0).sqrt()
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Quasi-random points in the ball of radius `r` (Halton, rejection).
pub fn halton_ball(d: usize, r: f64, n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut i = 1;
    while out.len() < n {
        let x: Vec<f64> = (0..d)
            .map(|k| r * (2.0 * radical_inverse(i, PRIMES[k % PRIMES.len()]) - 1.0))
            .collect();
        i += 1;
        if x.iter().map(|v| v * v).sum::<f64>() <= r * r {
            out.push(x);
        }
    }
    out
}

/// Quasi-random unit vectors (normalized Halton points of the unit ball).
pub fn halton_sphere(d: usize, n: usize) -> Vec<Vec<f64>> {
    halton_ball(d, 1.0, 2 * n)
        .into_iter()
        .filter_map(|x| {
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            (nrm > 0.1).then(|| x.iter().map(|v| v / nrm).collect())
        })
        .take(n)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    /// Assumption label, `a` to `e`.
    pub name: String,
    pub description: String,
    pub passed: bool,
    /// Worst sampled value of the checked quantity.
    pub value: f64,
    pub witness: Option<Vec<f64>>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// First failure that makes the model unusable: invariance or
    /// ellipticity. Span and confinement failures are only warnings.
    pub fn fatal(&self) -> Option<&AssumptionCheck> {
        self.checks
            .iter()
            .find(|c| !c.passed && (c.name == "a" || c.name == "e"))
    }
}
