use std::path::PathBuf;

use metalab::io::load_model;
use metalab::meta::Lab;
use metalab::models::*;
use metalab::spectral::Classification;

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models").join(format!("{name}.json"))
}

#[test]
fn bundled_files_match_constructors() {
    let cases = [
        ("model_a", model_a_spec(-0.5, 1.0, 1.0, MODEL_A_PERTURBATION)),
        ("model_b", model_b_spec(TwoWell::ASYMMETRIC)),
        ("model_b_sym", {
            let mut s = model_b_spec(TwoWell::SYMMETRIC);
            s.name = Some("model_b_sym".into());
            s
        }),
        ("model_c", model_c_spec()),
        ("triangle", triangle_spec(1.0, 0.2)),
        ("circle", circle_spec(-0.5, 1.0, 1.0)),
    ];
    for (name, spec) in cases {
        let loaded = load_model(&bundled(name)).unwrap();
        let expected = metalab::coeffs::Model::new(spec).unwrap();
        assert_eq!(loaded.model.spec(), expected.spec(), "{name}");
        assert!(loaded.report.all_passed(), "{name}: {:?}", loaded.report);
    }
}

fn gammas(name: &str) -> Vec<(f64, Classification)> {
    let model = load_model(&bundled(name)).unwrap().model;
    let lab = Lab::solve(&model).unwrap();
    lab.solutions().iter().map(|s| (s.gamma, s.classification)).collect()
}

#[test]
fn bundled_exponents() {
    let close = |g: &[(f64, Classification)], want: &[f64], tol: f64| {
        assert_eq!(g.len(), want.len());
        for ((v, _), w) in g.iter().zip(want) {
            assert!((v - w).abs() < tol, "{v} vs {w}");
        }
    };
    close(&gammas("model_a"), &[1.0], 1e-6);
    close(&gammas("model_b"), &[2.0, 1.0], 1e-3);
    close(&gammas("model_b_sym"), &[1.0, 1.0], 1e-3);
    close(&gammas("triangle"), &[1.0, 1.0, 1.0], 1e-3);
    let c = gammas("model_c");
    close(&c, &[-1.0], 1e-6);
    assert_eq!(c[0].1, Classification::Repelling);
}

#[test]
fn circle_model_exponent() {
    let g = gammas("circle");
    assert!((g[0].0 - 1.0).abs() < 1e-2, "{}", g[0].0);
    assert_eq!(g[0].1, Classification::Attracting);
}
