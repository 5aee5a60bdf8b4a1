//! The eigenvalue curve `lambda(gamma)` of Model A, against its closed
//! form `gamma (gamma - 1) sigma^2 / 2 + gamma (a + sigma^2 / 2)`.

use metalab::coeffs::{assemble_coeffs, linearize};
use metalab::models::model_a;
use metalab::spectral::{lambda_curve, SGrid};

fn main() -> metalab::Result<()> {
    let (a, s) = (-0.3, 1.2);
    let m = model_a(a, s, 0.5);
    let co = assemble_coeffs(&linearize(&m, 0)?, &SGrid::circle(32)?)?;
    let gammas: Vec<f64> = (-8..=12).map(|k| 0.25 * k as f64).collect();
    for (g, l) in lambda_curve(&co, &gammas)? {
        let exact = g * (g - 1.0) * s * s / 2.0 + g * (a + s * s / 2.0);
        println!("{g:+.2}  {l:+.6}  {exact:+.6}");
    }
    Ok(())
}
