//! Transition frequencies between the three wells of the triangle model.

use metalab::meta::Lab;
use metalab::models::triangle;
use metalab::sim::SimConfig;

fn main() -> metalab::Result<()> {
    let m = triangle();
    let lab = Lab::solve(&m)?;
    let cfg = SimConfig {
        eps: 0.2,
        dt: 0.01,
        t_max: 5000.0,
        n_traj: 200,
        adaptive: false,
        ..SimConfig::default()
    };
    let q = lab.qmatrix(0.25, false, &cfg)?;
    for (row, se) in q.q.iter().zip(&q.std_error) {
        println!("{row:.3?} +- {se:.3?}");
    }
    Ok(())
}
