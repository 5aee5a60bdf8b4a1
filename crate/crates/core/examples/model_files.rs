//! Loads a bundled model file and prints its assumption report.

use std::path::PathBuf;

use metalab::io::{format_report, load_model};

fn main() -> metalab::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "model_b".into());
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models").join(format!("{name}.json"));
    let loaded = load_model(&path)?;
    println!("{} in R^{}", path.display(), loaded.model.dim());
    print!("{}", format_report(&loaded.report));
    Ok(())
}
