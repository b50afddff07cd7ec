//! Dyadic mollifiers adapted to a free frame: the mass defect at a point,
//! and the Euclidean operator S_j on a grid.
use curvkit::freegeom::FreeFrame;
use curvkit::nilpotent::NilpotentAlgebra;
use curvkit::oplab::{build_sj, mollifier_defect, Grid, Mollifier};

fn main() {
    let m = Mollifier::default();
    let heis = FreeFrame::group(NilpotentAlgebra::build(2, &[1, 1], 2).unwrap()).unwrap();
    println!(" j   euclidean     heisenberg");
    for j in 1..=8 {
        let e = mollifier_defect(None, &m, &[0.6, 0.3], j).unwrap();
        let h = mollifier_defect(Some(&heis), &m, &[0.3, 0.1, 0.05], j).unwrap();
        println!("{j:>2}  {e:+.4e}  {h:+.4e}");
    }
    let grid = Grid::new(2, 2.0, 128).unwrap();
    let f = grid.sample(|x| (-8.0 * (x[0] * x[0] + x[1] * x[1])).exp());
    // S_j f = 𝒳 (Φ_j ∗ 𝒳f) → 𝒳² f
    let target: Vec<f64> = f.iter().enumerate().map(|(i, v)| v * m.cutoff(&grid.coord(i)).powi(2)).collect();
    for j in 2..=4 {
        let s = build_sj(&grid, &m, j);
        let g = s.apply(&f);
        let diff: f64 = target.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("j = {j}: nnz {}, ‖𝒳²f − S_j f‖∞ = {diff:.3e}", s.nnz());
    }
}
