//! Homogeneous pieces of log(exp(a) exp(b)) in a free nilpotent algebra.
use curvkit::nilpotent::NilpotentAlgebra;

fn main() {
    let (alg, pieces) = NilpotentAlgebra::bch_series(4).unwrap();
    let labels: Vec<String> = alg.basis().iter().map(|h| h.label(2)).collect();
    for (d, piece) in pieces.iter().enumerate() {
        let terms: Vec<String> = piece.iter().map(|(i, c)| format!("{c}·Y{}", labels[*i])).collect();
        println!("c{} = {}", d + 1, if terms.is_empty() { "0".into() } else { terms.join(" + ") });
    }
    println!("(a = Y1, b = Y2; Y12 = [Y1,Y2], Y112 = [Y1,[Y1,Y2]], Y122 = [[Y1,Y2],Y2])");
}
