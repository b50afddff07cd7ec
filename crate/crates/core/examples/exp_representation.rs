//! Write a family as the flow of a parameter-dependent vector field and
//! rebuild it from that representation.
use curvkit::curvature::{alpha_label, exp_representation, reconstruct_gamma, GammaFamily};

fn main() {
    let g = GammaFamily::named("sheared_cubic").unwrap().with_order(6).unwrap();
    let rep = exp_representation(&g, 4).unwrap();
    for (alpha, x) in &rep.fields {
        println!("{:>4} = {}", alpha_label("X", alpha), x.pretty());
    }
    let back = reconstruct_gamma(&rep, 4, g.base().to_vec()).unwrap();
    for (a, b) in g.jets().iter().zip(back.jets()) {
        println!("{}  ~  {}", a.pretty(), b.pretty());
    }
}
