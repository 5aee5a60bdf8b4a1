//! Tubular coordinates `(m, n, z)` near a point and near a circle.

use metalab::geometry::{from_tubular, to_tubular, SurfaceSpec};

fn main() -> metalab::Result<()> {
    let point = SurfaceSpec::point(0, vec![0.0, 0.0]);
    let tp = to_tubular(&[0.03, 0.04], &point)?;
    println!("point: z = {}, n = {:?}", tp.z, tp.n);

    let circle = SurfaceSpec::circle(1, vec![0.0; 3], 1.0, [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]])
        .with_chart_radius(0.5);
    let x = [0.0, 1.2, 0.1];
    let tp = to_tubular(&x, &circle)?;
    println!("circle: m = {:?}, n = {:?}, z = {}", tp.m, tp.n, tp.z);
    println!("round trip: {:?}", from_tubular(&tp, &circle)?);
    Ok(())
}
