//! Scaling exponent and eigenfunction spread of every surface of the
//! bundled models.

use metalab::meta::Lab;
use metalab::models::{circle_model, model_a, model_b, model_c, triangle};

fn main() -> metalab::Result<()> {
    let models = [
        model_a(-0.5, 1.0, 1.0),
        model_b(),
        model_c(),
        triangle(),
        circle_model(-0.5, 1.0, 1.0),
    ];
    for m in &models {
        let lab = Lab::solve(m)?;
        for s in lab.solutions() {
            println!(
                "{:<10} surface {}: gamma = {:+.6} ({:?}), phi spread {:.3}",
                m.spec().name.as_deref().unwrap_or("?"),
                s.surface_id,
                s.gamma,
                s.classification,
                s.phi_variation()
            );
        }
    }
    Ok(())
}
