//! Model C has only a repelling point: the perturbed law at a fixed time
//! approaches the long-run occupation of the unperturbed process.

use metalab::meta::{HistogramSpec, Lab};
use metalab::models::model_c;
use metalab::sim::SimConfig;

fn main() -> metalab::Result<()> {
    let m = model_c();
    let lab = Lab::solve(&m)?;
    let hist = HistogramSpec::square(3.0, 20);
    let cfg = SimConfig {
        dt: 0.01,
        adaptive: false,
        ..SimConfig::default()
    };
    let occ = lab.invariant_measure(&[0.5, 0.0], 50.0, 2e4, &hist, &[0.01], &cfg)?;
    println!("time within 0.01 of the origin: {:.4}", occ.proximity[0].1);
    let law = lab.metastable_distribution(
        &[0.5, 0.0],
        50.0,
        0.05,
        &hist,
        &SimConfig { eps: 0.05, n_traj: 2000, ..cfg },
    )?;
    println!("TV(law at t = 50, occupation) = {:.3}", law.histogram.total_variation(&occ.histogram));
    Ok(())
}
