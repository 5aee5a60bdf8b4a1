//! Linearizes Model B at its shallow well and prints the averaged radial
//! coefficients of the angular operator.

use metalab::coeffs::{assemble_coeffs, default_grid, linearize};
use metalab::models::model_b;
use metalab::spectral::{averages, discretize_operator, stationary_measure};

fn main() -> metalab::Result<()> {
    let model = model_b();
    let lin = linearize(&model, 1)?;
    let grid = default_grid(model.surface(1)?, 64)?;
    let co = assemble_coeffs(&lin, &grid)?;
    let pi = stationary_measure(&discretize_operator(&co, 0.0)?)?;
    let (alpha_bar, beta_bar) = averages(&co, &pi);
    println!("alpha ranges over [{:.4}, {:.4}]", co.min_alpha(), co.alpha.iter().copied().fold(0.0, f64::max));
    println!("alpha_bar = {alpha_bar:.6}, beta_bar = {beta_bar:.6}");
    println!("attracting: {}", beta_bar < alpha_bar);
    Ok(())
}
