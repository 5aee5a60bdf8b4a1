//! Model B: the hitting weights `p_x`, the law at a short time, and the
//! law at `eps^-1.5` where the shallow well has emptied into the deep one.

use metalab::meta::{ChainSpec, HistogramSpec, Lab, KAPPA_REPORT};
use metalab::models::model_b;
use metalab::sim::SimConfig;

fn main() -> metalab::Result<()> {
    let m = model_b();
    let lab = Lab::solve(&m)?;
    let x = [-0.75, 0.0];
    let cfg = SimConfig {
        eps: 0.05,
        dt: 5e-3,
        t_max: 500.0,
        n_traj: 300,
        adaptive: false,
        ..SimConfig::default()
    };
    let px = lab.p_x(&x, 0.01, false, &SimConfig { eps: 0.0, ..cfg.clone() })?;
    println!("p_x = {:.3?}", px.weights);
    let chain = ChainSpec {
        gammas: vec![lab.gamma(0), lab.gamma(1)],
        q: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        p0: px.weights.clone(),
    };
    let profile = lab.metastable_profile(&x, &chain, KAPPA_REPORT, true, &cfg)?;
    for w in &profile.windows {
        println!(
            "t = {:8.2}: predicted {:.3?}, measured {:.3?}",
            w.t, w.predicted, w.empirical.as_deref().unwrap_or_default()
        );
    }
    let short = lab.metastable_distribution(&x, 20.0, KAPPA_REPORT, &HistogramSpec::square(3.0, 20), &cfg)?;
    println!("t = 20: {:.3?}", short.weights);
    Ok(())
}
