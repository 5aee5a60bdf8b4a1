use std::f64::consts::TAU;
use std::sync::OnceLock;

use metalab::geometry::{from_tubular, to_tubular, SphereChart, SurfaceSpec};
use metalab::meta::{chain_hitting_distribution, total_variation, ChainSpec, Lab};
use metalab::models::model_b;
use metalab::sim::AdaptedRadius;
use metalab::spectral::{lambda_curve, SGrid};
use metalab::coeffs::SCoefficients;
use proptest::prelude::*;

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn direction(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
}

/// Eigenfunction of the deep well of model B, solved once.
fn model_b_radius() -> &'static AdaptedRadius {
    static R: OnceLock<AdaptedRadius> = OnceLock::new();
    R.get_or_init(|| {
        let model = model_b();
        let lab = Lab::solve(&model).unwrap();
        lab.radius(0).clone()
    })
}

proptest! {
    #[test]
    fn point_chart_round_trip(
        loc in prop::collection::vec(-5.0f64..5.0, 3),
        dir in direction(3),
        z in 1e-6f64..0.99,
    ) {
        let s = SurfaceSpec::point(0, loc.clone());
        let n = unit(&dir);
        let x: Vec<f64> = loc.iter().zip(&n).map(|(a, b)| a + z * b).collect();
        let tp = to_tubular(&x, &s).unwrap();
        prop_assert!((tp.z - z).abs() < 1e-12 * (1.0 + loc.iter().map(|v| v.abs()).sum::<f64>()));
        let back = from_tubular(&tp, &s).unwrap();
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_chart_round_trip(psi in 0.0f64..TAU, theta in 0.0f64..TAU, z in 1e-4f64..0.49) {
        let s = SurfaceSpec::circle(0, vec![0.0; 3], 1.0, [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]])
            .with_chart_radius(0.5);
        let chart = SphereChart::new(&s).unwrap();
        let x = chart.point_at(&[psi, theta], z);
        let tp = to_tubular(&x, &s).unwrap();
        prop_assert!((tp.z - z).abs() < 1e-12);
        let (z2, y) = chart.locate(&x).unwrap();
        prop_assert!((z2 - z).abs() < 1e-12);
        let x2 = chart.point_at(&y, z2);
        for (a, b) in x.iter().zip(&x2) {
            prop_assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn adapted_radius_is_homogeneous(angle in 0.0f64..TAU, level in 1e-4f64..0.05, c in 0.1f64..4.0) {
        let r = model_b_radius();
        let y = [angle, 0.0];
        let x1 = r.point_on_level(&y, level);
        let x2 = r.point_on_level(&y, c * level);
        let (z1, z2) = (r.zeta(&x1), r.zeta(&x2));
        prop_assert!((z1 - level).abs() < 1e-9 * level);
        prop_assert!((z2 - c * z1).abs() < 1e-9 * z2);
    }

    #[test]
    fn chain_hitting_weights_form_a_distribution(
        raw in prop::collection::vec(0.01f64..1.0, 16),
        p_raw in prop::collection::vec(0.0f64..1.0, 4),
        l in 1usize..=4,
    ) {
        let m = 4;
        let q: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row: Vec<f64> = raw[i * m..(i + 1) * m].to_vec();
                row[i] = 0.0;
                let s: f64 = row.iter().sum();
                row.iter().map(|v| v / s).collect()
            })
            .collect();
        let ps: f64 = p_raw.iter().sum::<f64>() + 1e-3;
        let mut p0: Vec<f64> = p_raw.iter().map(|v| (v + 2.5e-4) / ps).collect();
        let tail: f64 = p0[..m - 1].iter().sum();
        p0[m - 1] = 1.0 - tail;
        prop_assume!(p0[m - 1] >= 0.0);
        let chain = ChainSpec { gammas: vec![4.0, 3.0, 2.0, 1.0], q, p0: p0.clone() };
        let p = chain_hitting_distribution(&chain, l).unwrap();
        prop_assert_eq!(p.len(), l);
        prop_assert!(p.iter().all(|&v| v >= -1e-14));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..l {
            prop_assert!(p[k] >= p0[k] - 1e-14);
        }
        if l == m {
            for k in 0..m {
                prop_assert!((p[k] - p0[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn total_variation_is_a_metric(
        a in prop::collection::vec(0.0f64..1.0, 8),
        b in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        let norm = |v: &[f64]| {
            let s: f64 = v.iter().sum::<f64>() + 1e-9;
            v.iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (p, q) = (norm(&a), norm(&b));
        let d = total_variation(&p, &q);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - total_variation(&q, &p)).abs() < 1e-15);
        prop_assert!(total_variation(&p, &p) == 0.0);
    }

    #[test]
    fn lambda_vanishes_at_zero(
        alpha in 0.1f64..2.0,
        beta in -2.0f64..2.0,
        a00 in 0.2f64..2.0,
        b0 in -1.0f64..1.0,
    ) {
        let grid = SGrid::circle(32).unwrap();
        let co = SCoefficients::constant(grid, alpha, beta, [a00, 0.0, 0.0], [b0, 0.0], [0.3, 0.0]).unwrap();
        let curve = lambda_curve(&co, &[0.0]).unwrap();
        prop_assert!(curve[0].1.abs() < 1e-10);
    }
}
