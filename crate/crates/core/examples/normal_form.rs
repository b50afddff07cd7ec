//! Flatten a non-curved family: find coordinates in which a submanifold
//! through the base point is invariant.
use curvkit::curvature::{normal_form, GammaFamily, NormalFormOutcome};

fn main() {
    for name in ["sheared_parabola", "flat_line", "parabola"] {
        let g = GammaFamily::named(name).unwrap();
        let nf = normal_form(&g, 6, None).unwrap();
        println!("{name}:");
        for s in &nf.steps {
            println!("  {s:?}");
        }
        match &nf.outcome {
            NormalFormOutcome::InvariantManifold => {
                let phi: Vec<String> = nf.phi.iter().map(|p| p.pretty()).collect();
                println!("  invariant manifold to order 6; φ = {phi:?}, weights {:?}", nf.weights);
            }
            NormalFormOutcome::Curved(v) => println!("  curved: {:?}", v.outcome),
            NormalFormOutcome::Inconclusive => println!("  inconclusive"),
        }
    }
}
