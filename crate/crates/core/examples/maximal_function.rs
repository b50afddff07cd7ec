//! Maximal averages along a parabola of a constant and of a small column.
use curvkit::oplab::{log_schedule, maximal_fn, BuildConfig, Grid, Interp, NumericGamma};

fn main() {
    let grid = Grid::new(2, 4.0, 128).unwrap();
    let cfg = BuildConfig { interp: Interp::Linear, margin: 0.0, psi_radius: Some(1.0) };
    let radii = log_schedule(grid.spacing(0), 0.5, 6);
    let f = grid.sample(|x| if x[0].abs() < 0.07 && x[1].abs() < 0.07 { 1.0 } else { 0.0 });
    let r = maximal_fn(&NumericGamma::parabola(), &f, &grid, &radii, &cfg).unwrap();
    println!("radii {:?}", r.radii);
    println!("‖Mf‖₂ / ‖f‖₂ = {:.3}", r.l2_ratio);
    let peak = r.values.iter().cloned().fold(0.0, f64::max);
    println!("max Mf = {peak:.3}");
}
