//! Hitting distribution of the absorbing chain, exact and simulated.

use metalab::meta::{chain_hitting_distribution, simulate_chain, ChainSpec};

fn main() -> metalab::Result<()> {
    let chain = ChainSpec {
        gammas: vec![3.0, 2.0, 1.0],
        q: vec![vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5], vec![0.3, 0.7, 0.0]],
        p0: vec![0.2, 0.3, 0.5],
    };
    for l in 1..=3 {
        let exact = chain_hitting_distribution(&chain, l)?;
        let (sim, se) = simulate_chain(&chain, l, 100_000, 1)?;
        println!("l = {l}: exact {exact:.4?}, simulated {sim:.4?} +- {se:.4?}");
    }
    Ok(())
}
