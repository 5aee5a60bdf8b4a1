//! `u(t, x) = E_x g(X^eps_t)` for Model A at `eps = 0`, against the means of
//! the linear model: `x0 exp((a + sigma^2/2 - rho^2/2) t)` and
//! `ln|x| + a t` for the log radius. These ignore the confinement beyond
//! radius 2, so they hold only while little mass has reached it (t <= 1 from
//! `|x| = 0.3`).

use metalab::expr::Expr;
use metalab::meta::Lab;
use metalab::models::model_a;
use metalab::sim::SimConfig;

fn main() -> metalab::Result<()> {
    let m = model_a(-0.5, 1.0, 1.0);
    let lab = Lab::solve(&m)?;
    let cases = [
        ("x0", Expr::parse("x0")?),
        ("ln|x|", Expr::parse("ln(sqrt(x0*x0 + x1*x1))")?),
    ];
    let cfg = SimConfig {
        eps: 0.0,
        dt: 1e-3,
        n_traj: 5000,
        adaptive: false,
        ..SimConfig::default()
    };
    for t in [0.25f64, 0.5, 1.0] {
        for (name, g) in &cases {
            let exact = match *name {
                "x0" => 0.3 * (-0.5 * t).exp(),
                _ => 0.3f64.ln() - 0.5 * t,
            };
            let u = lab.feynman_kac(&[0.3, 0.0], t, g, &cfg)?;
            println!("t = {t}, g = {name}: u = {:.4} +- {:.4}, exact {exact:.4}", u.value, u.std_error);
        }
    }
    Ok(())
}
