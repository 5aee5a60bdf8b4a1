//! Mean exit time from an attracting and a repelling point as `eps`
//! decreases: a power law with exponent `gamma`, and an affine law in
//! `ln(1/eps)`.

use metalab::meta::Lab;
use metalab::models::model_a;
use metalab::sim::SimConfig;

fn main() -> metalab::Result<()> {
    let cfg = SimConfig {
        dt: 5e-3,
        t_max: 2e4,
        n_traj: 300,
        adaptive: false,
        ..SimConfig::default()
    };
    let attracting = model_a(-0.5, 1.0, 1.0);
    let lab = Lab::solve(&attracting)?;
    let s = lab.exit_time_scaling(0, 0.4, &[0.1, 0.05, 0.025, 0.0125], 0.1, &cfg)?;
    println!("attracting: means {:?}", s.mean);
    println!("  log-log slope {:.3} (gamma {:.3})", s.fit.slope, s.gamma);

    let repelling = model_a(0.5, 1.0, 1.0);
    let lab = Lab::solve(&repelling)?;
    let s = lab.exit_time_scaling(0, 0.5, &[0.02, 0.01, 0.005, 0.0025], 10.0, &SimConfig { dt: 1e-3, ..cfg })?;
    println!("repelling: means {:?}", s.mean);
    println!("  slope in ln(1/eps) {:.3}, R^2 {:.4}", s.fit.slope, s.fit.r_squared);
    Ok(())
}
