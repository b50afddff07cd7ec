//! ‖T_i T_j*‖ for the dyadic pieces of the Hilbert transform along a
//! parabola decays geometrically in |i − j|; along a line it does not.
use curvkit::oplab::{orthogonality_decay, BuildConfig, Grid, Interp, KernelSpec, NumericGamma};

fn main() {
    let grid = Grid::new(2, 1.0, 128).unwrap();
    let k = KernelSpec::hilbert(0.5);
    let cfg = BuildConfig { interp: Interp::Spectral, margin: 0.0, psi_radius: None };
    let t = orthogonality_decay(&NumericGamma::parabola(), &k, &grid, 5, &cfg, None).unwrap();
    print!("{}", t.csv());
    println!("fitted ε = {:.3}, monotone from gap 2: {}", t.epsilon, t.monotone_from_gap2);

    // a line only smooths across its direction: restrict to ξ1 = 0
    let mask = |xi: &[f64]| xi[0] == 0.0;
    let c = orthogonality_decay(&NumericGamma::line(), &k, &grid, 5, &cfg, Some(&mask)).unwrap();
    println!("line, ξ1 = 0: by gap {:?}", c.by_gap);
}
