//! Two-sided exit probability from `Gamma_0.2` between `Gamma_0.1` and
//! `Gamma_0.4`, with and without perturbation.

use metalab::meta::Lab;
use metalab::models::model_a;
use metalab::sim::SimConfig;

fn main() -> metalab::Result<()> {
    let m = model_a(-0.5, 1.0, 1.0);
    let lab = Lab::solve(&m)?;
    for eps in [0.0, 0.005] {
        let cfg = SimConfig {
            eps,
            dt: 1e-3,
            n_traj: 2000,
            ..SimConfig::default()
        };
        let est = lab.exit_prob(0, 0.2, 0.1, 0.4, &cfg)?;
        println!(
            "eps = {eps}: P = {:.4} +- {:.4}, predicted {:.4}",
            est.probability, est.std_error, est.predicted
        );
    }
    Ok(())
}
