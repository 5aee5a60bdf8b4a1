//! Reference models used by the examples, tests and bundled model files.

use crate::coeffs::{BlendTerm, Confinement, FieldDescriptor, FieldSet, Model, ModelSpec};
use crate::geometry::SurfaceSpec;

/// Amplitude of the isotropic additive perturbation of [`model_a`].
pub const MODEL_A_PERTURBATION: f64 = 0.05;

fn diag(d: usize, s: f64) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { s } else { 0.0 }).collect())
        .collect()
}

fn rotation(s: f64) -> Vec<Vec<f64>> {
    vec![vec![0.0, -s], vec![s, 0.0]]
}

/// Additive fields `eta e_1, ..., eta e_d` with zero drift.
pub fn isotropic_perturbation(d: usize, eta: f64) -> Vec<FieldDescriptor> {
    let mut out = vec![FieldDescriptor::Zero];
    for i in 0..d {
        let comps: Vec<String> = (0..d)
            .map(|j| if i == j { format!("{eta}") } else { "0".into() })
            .collect();
        let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
        out.push(FieldDescriptor::explicit(&refs).expect("constant expressions parse"));
    }
    out
}

/// Planar model with a point surface at the origin:
/// `v_0 = a x`, `v_1 = sigma x`, `v_2 = rho J x` (`J` the quarter turn),
/// perturbed by `eta e_1, eta e_2`. Its exponent is `gamma = -2a / sigma^2`
/// and the radial part is a geometric Brownian motion.
pub fn model_a_spec(a: f64, sigma: f64, rho: f64, eta: f64) -> ModelSpec {
    ModelSpec {
        name: Some("model_a".into()),
        dimension: 2,
        surfaces: vec![SurfaceSpec::point(0, vec![0.0, 0.0])],
        fields: FieldSet {
            v: vec![
                FieldDescriptor::linear_origin(diag(2, a)),
                FieldDescriptor::linear_origin(diag(2, sigma)),
                FieldDescriptor::linear_origin(rotation(rho)),
            ],
            v_tilde: isotropic_perturbation(2, eta),
        },
        confinement: Some(Confinement {
            radius: 2.0,
            strength: 1.0,
        }),
    }
}

pub fn model_a(a: f64, sigma: f64, rho: f64) -> Model {
    Model::new(model_a_spec(a, sigma, rho, MODEL_A_PERTURBATION)).expect("model A is valid")
}

/// Local drift `a_k I` near each anchor, zero elsewhere.
pub fn blended_drift(anchors: &[(Vec<f64>, f64)], radius: f64) -> FieldDescriptor {
    let d = anchors[0].0.len();
    FieldDescriptor::Blend {
        terms: anchors
            .iter()
            .map(|(p, a)| BlendTerm {
                matrix: diag(d, *a),
                anchor: p.clone(),
                radius,
            })
            .collect(),
        background: None,
    }
}

/// Parameters of the planar two-well model [`model_b_spec`]; index `k`
/// refers to the point `p_1 = (-1, 0)` or `p_2 = (1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoWell {
    /// Noise amplitude at each point.
    pub sigma: [f64; 2],
    pub gamma: [f64; 2],
    /// Amplitude of the additive perturbation near each point.
    pub eta: [f64; 2],
    /// Radius of the local linear drift around each point.
    pub radius: [f64; 2],
}

impl TwoWell {
    /// Asymmetric default: `gamma_1 = 2`, `gamma_2 = 1`.
    pub const ASYMMETRIC: TwoWell = TwoWell {
        sigma: [1.0, 3.0],
        gamma: [2.0, 1.0],
        eta: [0.05, 0.2],
        radius: [0.9, 0.3],
    };

    /// Invariant under `x -> -x` and under reflection in the `y` axis.
    pub const SYMMETRIC: TwoWell = TwoWell {
        sigma: [1.0, 1.0],
        gamma: [1.0, 1.0],
        eta: [0.1, 0.1],
        radius: [0.9, 0.9],
    };
}

/// `mid + half tanh(x) / tanh(1)`, equal to `v[0]` at `x = -1` and `v[1]` at
/// `x = 1`, as an expression.
fn tanh_profile(v: [f64; 2]) -> String {
    let mid = 0.5 * (v[0] + v[1]);
    let half = 0.5 * (v[1] - v[0]) / 1f64.tanh();
    if half == 0.0 {
        format!("{mid}")
    } else {
        format!("({mid} + {half} * tanh(x))")
    }
}

/// Planar model with point surfaces at `p_1 = (-1, 0)` and `p_2 = (1, 0)`.
///
/// In complex notation the noise fields are `v_1 = h(x) (z^2 - 1) / (1 + |z|^2)`
/// and `v_2 = i v_1`, with `h` interpolating between the two `sigma`s;
/// near `p_k` they linearize to `sigma_k` times a rotation-scaling, so the
/// drift `a_k (x - p_k)` with `a_k = -gamma_k sigma_k^2 / 2` gives exponent
/// `gamma_k` and a constant eigenfunction. The perturbation is additive with
/// an amplitude interpolating between the two `eta`s.
pub fn model_b_spec(p: TwoWell) -> ModelSpec {
    let h = tanh_profile(p.sigma);
    let den = "(1 + x^2 + y^2)";
    let re = format!("{h} * (x^2 - y^2 - 1) / {den}");
    let im = format!("{h} * 2 * x * y / {den}");
    let v1 = FieldDescriptor::explicit(&[&re, &im]).expect("valid expressions");
    let v2 = FieldDescriptor::explicit(&[&format!("-({im})"), &re]).expect("valid expressions");
    let anchors = [vec![-1.0, 0.0], vec![1.0, 0.0]];
    let drift = FieldDescriptor::Blend {
        terms: (0..2)
            .map(|k| BlendTerm {
                matrix: diag(2, -0.5 * p.gamma[k] * p.sigma[k] * p.sigma[k]),
                anchor: anchors[k].clone(),
                radius: p.radius[k],
            })
            .collect(),
        background: None,
    };
    let eta = tanh_profile(p.eta);
    let v_tilde = vec![
        FieldDescriptor::Zero,
        FieldDescriptor::explicit(&[&eta, "0"]).expect("valid expressions"),
        FieldDescriptor::explicit(&["0", &eta]).expect("valid expressions"),
    ];
    ModelSpec {
        name: Some("model_b".into()),
        dimension: 2,
        surfaces: anchors
            .iter()
            .enumerate()
            .map(|(k, a)| SurfaceSpec::point(k, a.clone()))
            .collect(),
        fields: FieldSet {
            v: vec![drift, v1, v2],
            v_tilde,
        },
        confinement: Some(Confinement {
            radius: 2.0,
            strength: 2.0,
        }),
    }
}

pub fn model_b() -> Model {
    Model::new(model_b_spec(TwoWell::ASYMMETRIC)).expect("model B is valid")
}

pub fn model_b_symmetric() -> Model {
    let mut spec = model_b_spec(TwoWell::SYMMETRIC);
    spec.name = Some("model_b_sym".into());
    Model::new(spec).expect("symmetric model B is valid")
}

/// Rotation-invariant model with one repelling point at the origin:
/// Model A with `a = 1/2`, `sigma = rho = 1` (`gamma = -1`) and a stronger
/// confinement outside radius 1.5.
pub fn model_c_spec() -> ModelSpec {
    let mut spec = model_a_spec(0.5, 1.0, 1.0, 0.5);
    spec.name = Some("model_c".into());
    spec.confinement = Some(Confinement {
        radius: 1.5,
        strength: 3.0,
    });
    spec
}

pub fn model_c() -> Model {
    Model::new(model_c_spec()).expect("model C is valid")
}

/// Three attracting points at the cube roots of unity, permuted by the
/// rotation through `2 pi / 3`. Noise `v_1 = (z^3 - 1) / (1 + |z|^2)^(3/2)`,
/// `v_2 = i v_1`; every point has exponent `gamma`.
pub fn triangle_spec(gamma: f64, eta: f64) -> ModelSpec {
    let den = "(1 + x^2 + y^2)^1.5";
    let re = format!("(x^3 - 3 * x * y^2 - 1) / {den}");
    let im = format!("(3 * x^2 * y - y^3) / {den}");
    let v1 = FieldDescriptor::explicit(&[&re, &im]).expect("valid expressions");
    let v2 = FieldDescriptor::explicit(&[&format!("-({im})"), &re]).expect("valid expressions");
    // |d v_1 / dz| = 3 / 2^1.5 at every root
    let s2 = 9.0 / 8.0;
    let a = -0.5 * gamma * s2;
    let roots: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            vec![t.cos(), t.sin()]
        })
        .collect();
    ModelSpec {
        name: Some("triangle".into()),
        dimension: 2,
        surfaces: roots
            .iter()
            .enumerate()
            .map(|(k, p)| SurfaceSpec::point(k, p.clone()))
            .collect(),
        fields: FieldSet {
            v: vec![
                blended_drift(&roots.iter().map(|p| (p.clone(), a)).collect::<Vec<_>>(), 0.8),
                v1,
                v2,
            ],
            v_tilde: isotropic_perturbation(2, eta),
        },
        confinement: Some(Confinement {
            radius: 2.0,
            strength: 2.0,
        }),
    }
}

pub fn triangle() -> Model {
    Model::new(triangle_spec(1.0, 0.2)).expect("triangle model is valid")
}

/// Unit circle in the `xy` plane of `R^3`. With `N(x)` the displacement
/// from the nearest circle point and `J N` its quarter turn in the normal
/// plane: `v_0 = a N`, `v_1 = sigma N`, `v_2 = rho J N`, `v_3` the rotation
/// about the `z` axis. The exponent is `-2a / sigma^2`.
pub fn circle_spec(a: f64, sigma: f64, rho: f64) -> ModelSpec {
    let r = "sqrt(x^2 + y^2)";
    let n = [
        format!("x * (1 - 1 / {r})"),
        format!("y * (1 - 1 / {r})"),
        "z".to_string(),
    ];
    let jn = [
        format!("-z * x / {r}"),
        format!("-z * y / {r}"),
        format!("{r} - 1"),
    ];
    let scaled = |c: f64, comps: &[String; 3]| {
        let s: Vec<String> = comps.iter().map(|e| format!("{c} * ({e})")).collect();
        FieldDescriptor::explicit(&s.iter().map(String::as_str).collect::<Vec<_>>()).expect("valid expressions")
    };
    ModelSpec {
        name: Some("circle".into()),
        dimension: 3,
        surfaces: vec![SurfaceSpec::circle(
            0,
            vec![0.0; 3],
            1.0,
            [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
        )],
        fields: FieldSet {
            v: vec![
                scaled(a, &n),
                scaled(sigma, &n),
                scaled(rho, &jn),
                FieldDescriptor::explicit(&["-y", "x", "0"]).expect("valid expressions"),
            ],
            v_tilde: isotropic_perturbation(3, 0.1),
        },
        confinement: Some(Confinement {
            radius: 3.0,
            strength: 1.0,
        }),
    }
}

pub fn circle_model(a: f64, sigma: f64, rho: f64) -> Model {
    Model::new(circle_spec(a, sigma, rho)).expect("circle model is valid")
}
