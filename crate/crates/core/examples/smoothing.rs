//! Averages along a flat family lose Sobolev regularity on test functions
//! concentrated near a line; along a parabola they do not.
use curvkit::oplab::{smoothing_probe, KernelSpec, NumericGamma, SmoothingConfig};

fn main() {
    let k = KernelSpec::bump(1, 0.25).unwrap();
    let flat = NumericGamma::translation("flat_line", 2, 1, |t| vec![-t[0], 0.0]);
    let cfg = SmoothingConfig { s_list: vec![0.0, 0.5], ..Default::default() };
    let r = smoothing_probe(&flat, &k, &cfg).unwrap();
    for s in &r.slopes {
        println!("flat, s = {}: slope {:+.3}, windowed {:+.3?}, predicted {:?}", s.s, s.slope, s.windowed_slope, s.predicted);
    }
    let cfg = SmoothingConfig { s_list: vec![0.1], n_aniso: 1, ..Default::default() };
    let r = smoothing_probe(&NumericGamma::parabola(), &k, &cfg).unwrap();
    for row in &r.rows {
        println!("parabola, s = 0.1, δ = {:.4}: ratio {:.3}", row.delta, row.ratio);
    }
}
