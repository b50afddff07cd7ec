//! The truncated Hilbert transform along a shift, as a Fourier multiplier.
use curvkit::oplab::{build_t, BuildConfig, Grid, Interp, KernelSpec, NumericGamma};

fn main() {
    let grid = Grid::new(1, 8.0, 1024).unwrap();
    let k = KernelSpec::hilbert(0.5);
    let cfg = BuildConfig { interp: Interp::Spectral, margin: 0.0, psi_radius: None };
    let t = build_t(&NumericGamma::shift_1d(), &k, &grid, 24, &cfg).unwrap();
    let m = t.symbol().expect("translation-invariant");
    for i in [1usize, 2, 4, 8, 32, 128, 511] {
        println!("ξ = {:>8.2}  m(ξ) = {:+.5}{:+.5}i", grid.frequency(0, i), m[i].re, m[i].im);
    }
    println!("|m| → π = {:.5}", std::f64::consts::PI);
}
