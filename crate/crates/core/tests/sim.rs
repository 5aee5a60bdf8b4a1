use approx::assert_relative_eq;
use metalab::models::model_a;
use metalab::sim::{
    run_batch, run_endpoints, stream, AdaptedRadius, Engine, Outcome, Scheme, SimConfig, StartSpec, TargetSet,
};

fn targets_for(model: &metalab::coeffs::Model, gamma: f64, levels: &[f64]) -> TargetSet {
    let r = AdaptedRadius::euclidean(model.surface(0).unwrap(), gamma).unwrap();
    let mut t = TargetSet::new(vec![r]);
    for &l in levels {
        t.add(0, l);
    }
    t
}

#[test]
fn deterministic_contraction_hits_at_log_time() {
    let a = -0.8;
    let model = model_a(a, 0.0, 0.0);
    let cfg = SimConfig {
        dt: 1e-4,
        t_max: 10.0,
        adaptive: false,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg).unwrap();
    let targets = targets_for(&model, 1.0, &[0.1]);
    let ev = engine.run_until_hit(0, &[0.12, 0.16], &targets, &mut stream(1, 0));
    assert_eq!(ev.outcome, Outcome::Hit);
    assert!((ev.time - (0.5f64).ln() / a).abs() < 1e-4, "{}", ev.time);
    assert!((ev.zeta - 0.1).abs() < 1e-6);
}

#[test]
fn start_on_target_is_immediate_hit() {
    let model = model_a(-0.5, 1.0, 1.0);
    let engine = Engine::new(&model, SimConfig::default()).unwrap();
    let targets = targets_for(&model, 1.0, &[0.1, 0.4]);
    let ev = engine.run_until_hit(3, &[0.0, 0.4], &targets, &mut stream(1, 3));
    assert_eq!(ev.outcome, Outcome::Hit);
    assert_eq!(ev.target, Some(1));
    assert_eq!(ev.time, 0.0);
}

#[test]
fn heun_zero_noise_matches_explicit_trapezoid() {
    let a = -0.7;
    let model = model_a(a, 1.0, 0.5);
    let engine = Engine::new(&model, SimConfig::default()).unwrap();
    let x = [0.3, -0.2];
    let h = 0.01;
    let out = engine.step_with(&x, h, &[0.0, 0.0], &[]);
    let factor = 1.0 + a * h + 0.5 * (a * h) * (a * h);
    assert_relative_eq!(out[0], factor * x[0], epsilon = 1e-15);
    assert_relative_eq!(out[1], factor * x[1], epsilon = 1e-15);
    let exact = (a * h).exp();
    assert!((out[0] - exact * x[0]).abs() < (h * h * h) * x[0].abs());
}

#[test]
fn correction_of_linear_noise() {
    let sigma = 1.3;
    let model = model_a(-0.5, sigma, 0.0);
    let x = [0.4, -0.1];
    let c = metalab::sim::strat_correction(&model, &x, 0.0);
    assert_relative_eq!(c[0], 0.5 * sigma * sigma * x[0], epsilon = 1e-12);
    assert_relative_eq!(c[1], 0.5 * sigma * sigma * x[1], epsilon = 1e-12);
}

#[test]
fn batches_do_not_depend_on_worker_count() {
    let model = model_a(-0.5, 1.0, 1.0);
    let targets = targets_for(&model, 1.0, &[0.1, 0.4]);
    let run = |workers| {
        let cfg = SimConfig {
            dt: 1e-3,
            n_traj: 64,
            seed: 99,
            workers: Some(workers),
            ..SimConfig::default()
        };
        let engine = Engine::new(&model, cfg).unwrap();
        let r = AdaptedRadius::euclidean(model.surface(0).unwrap(), 1.0).unwrap();
        run_batch(&engine, &StartSpec::OnLevel { radius: r, level: 0.2 }, &targets).unwrap()
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert!(one.iter().enumerate().all(|(i, e)| e.index == i));
}

#[test]
fn empty_batch() {
    let model = model_a(-0.5, 1.0, 1.0);
    let cfg = SimConfig {
        n_traj: 0,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg).unwrap();
    let targets = targets_for(&model, 1.0, &[0.1]);
    assert!(run_batch(&engine, &StartSpec::Fixed(vec![0.2, 0.0]), &targets)
        .unwrap()
        .is_empty());
}

/// Endpoint log-radii of Model A after time `t`.
#[allow(clippy::too_many_arguments)]
fn log_radii(scheme: Scheme, a: f64, sigma: f64, rho: f64, t: f64, dt: f64, n: usize, seed: u64) -> Vec<f64> {
    let model = model_a(a, sigma, rho);
    let cfg = SimConfig {
        dt,
        n_traj: n,
        seed,
        scheme,
        adaptive: false,
        workers: Some(1),
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg).unwrap();
    run_endpoints(&engine, &StartSpec::Fixed(vec![0.05, 0.0]), t)
        .unwrap()
        .into_iter()
        .map(|e| {
            assert!(e.ok);
            (e.state[0].hypot(e.state[1]) / 0.05).ln()
        })
        .collect()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

#[test]
fn radial_log_increments_are_gaussian() {
    let (a, sigma, dt): (f64, f64, f64) = (-0.5, 1.0, 1e-3);
    let n = 20_000;
    let l = log_radii(Scheme::Heun, a, sigma, 0.7, dt, dt, n, 5);
    let (m, v) = mean_var(&l);
    let se_m = (sigma * sigma * dt / n as f64).sqrt();
    assert!((m - a * dt).abs() < 4.0 * se_m, "mean {m}");
    let se_v = sigma * sigma * dt * (2.0 / n as f64).sqrt();
    assert!((v - sigma * sigma * dt).abs() < 4.0 * se_v, "var {v}");
    let mut sorted = l.clone();
    sorted.sort_by(f64::total_cmp);
    let normal = statrs::distribution::Normal::new(a * dt, sigma * dt.sqrt()).unwrap();
    let ks = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = statrs::distribution::ContinuousCDF::cdf(&normal, x);
            (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS {ks}");
}

#[test]
fn heun_and_corrected_euler_agree_on_mean_radius() {
    let (a, sigma, t): (f64, f64, f64) = (-0.5, 1.0, 0.5);
    let n = 4000;
    let stats = |scheme| {
        let r: Vec<f64> = log_radii(scheme, a, sigma, 0.7, t, 1e-3, n, 11)
            .into_iter()
            .map(f64::exp)
            .collect();
        let (m, v) = mean_var(&r);
        (m, (v / n as f64).sqrt())
    };
    let exact = ((a + 0.5 * sigma * sigma) * t).exp();
    let (mh, sh) = stats(Scheme::Heun);
    let (me, se) = stats(Scheme::EulerCorrected);
    assert!((mh - exact).abs() < 3.0 * sh, "heun {mh} vs {exact}");
    assert!((me - exact).abs() < 3.0 * se, "euler {me} vs {exact}");
    assert!((mh - me).abs() < 3.0 * (sh * sh + se * se).sqrt());
}

#[test]
fn weak_error_halves_with_step() {
    // Common Brownian paths at steps 0.2, 0.1 and 0.05; observable |X_1|^2.
    use rand_distr::{Distribution, StandardNormal};
    let model = model_a(-1.0, 0.8, 0.0);
    let cfg = SimConfig {
        scheme: Scheme::EulerCorrected,
        adaptive: false,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg).unwrap();
    let n = 100_000;
    let fine = 20;
    let mut sums = [0.0f64; 2];
    let mut sq = [0.0f64; 2];
    for p in 0..n {
        let mut rng = stream(21, p as u64);
        let dw: Vec<[f64; 2]> = (0..fine)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                [a * 0.05f64.sqrt(), b * 0.05f64.sqrt()]
            })
            .collect();
        let y: Vec<f64> = [4usize, 2, 1]
            .iter()
            .map(|&m| {
                let h = 0.05 * m as f64;
                let mut x = vec![1.0, 0.0];
                for c in dw.chunks(m) {
                    let inc = c.iter().fold([0.0, 0.0], |s, w| [s[0] + w[0], s[1] + w[1]]);
                    x = engine.step_with(&x, h, &inc, &[]);
                }
                x[0] * x[0] + x[1] * x[1]
            })
            .collect();
        for k in 0..2 {
            let d = y[k] - y[k + 1];
            sums[k] += d;
            sq[k] += d * d;
        }
    }
    let stat = |k: usize| {
        let m = sums[k] / n as f64;
        (m, ((sq[k] / n as f64 - m * m) / n as f64).sqrt())
    };
    let (d1, s1) = stat(0);
    let (d2, s2) = stat(1);
    assert!(d1.abs() > 10.0 * s1 && d2.abs() > 10.0 * s2, "{d1} {s1} {d2} {s2}");
    let ratio = d1 / d2;
    assert!(ratio > 1.7 && ratio < 2.6, "ratio {ratio}");
}

#[test]
fn trajectories_never_reach_the_surface() {
    let model = model_a(-1.0, 1.0, 1.0);
    let cfg = SimConfig {
        dt: 1e-2,
        seed: 3,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg).unwrap();
    let mut rng = stream(3, 0);
    let mut min_r = f64::INFINITY;
    engine
        .run_for(&[0.01, 0.0], 20.0, &mut rng, |_, _, x| {
            min_r = min_r.min(x[0].hypot(x[1]));
        })
        .unwrap();
    assert!(min_r > 1e-12, "{min_r}");
}
