//! Free nilpotent algebras: dimensions, basic basis, group law, dilations
//! and the polynomial growth of balls.
use curvkit::nilpotent::NilpotentAlgebra;

fn main() {
    for (p, m) in [(2, 2), (2, 3), (3, 2), (2, 4)] {
        let alg = NilpotentAlgebra::build(p, &vec![1; p], m).unwrap();
        println!("p = {p}, step {m}: dim {}, homogeneous dimension {}", alg.dim(), alg.homogeneous_dimension());
    }

    let heis = NilpotentAlgebra::build(2, &[1, 1], 2).unwrap();
    let names = heis.coordinate_names("u");
    for (n, law) in names.iter().zip(heis.product_polynomials()) {
        println!("(u·v)_{n} = {}", law.pretty());
    }
    let x = [0.3, -0.2, 0.05];
    let y = [0.1, 0.4, -0.02];
    println!("x·y = {:?}", heis.group_multiply_f64(&x, &y));
    println!("δ_½ x = {:?}, ρ(x) = {:.4}", heis.dilate(&x, 0.5).unwrap(), heis.norm_rho(&x));
    let radii: Vec<f64> = (0..6).map(|i| 0.05 * 1.6f64.powi(i)).collect();
    let (slope, _) = heis.ball_volume_exponent(&radii, 200_000, 7);
    println!("log |B(r)| / log r ≈ {slope:.3}");
}
