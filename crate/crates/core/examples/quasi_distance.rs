//! The quasi-distance of a free frame: symmetry, the quasi-triangle
//! inequality, dilations and the key estimate, measured on samples.
use curvkit::freegeom::{distance_diagnostics, FreeFrame, KEY_ESTIMATE_CONSTANT};
use curvkit::nilpotent::NilpotentAlgebra;

fn main() {
    let frame = FreeFrame::group(NilpotentAlgebra::build(2, &[1, 1], 3).unwrap()).unwrap();
    let x = [0.05, -0.02, 0.01, 0.0, 0.003];
    let y = [0.1, 0.03, -0.01, 0.002, 0.0];
    println!("Θ_x(y) = {:?}", frame.theta(&x, &y).unwrap());
    println!("d(x, y) = {:.5}", frame.quasi_distance(&x, &y).unwrap());
    let z = frame.local_dilate(&x, &y, 0.5).unwrap();
    println!("d(x, δ½ y) = {:.5}", frame.quasi_distance(&x, &z).unwrap());
    let diag = distance_diagnostics(&frame, 400, 0.15, 3);
    println!("{}", serde_json::to_string_pretty(&diag).unwrap());
    println!("key estimate constant used: {KEY_ESTIMATE_CONSTANT}");
}
