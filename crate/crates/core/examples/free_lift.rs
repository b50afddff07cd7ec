//! Lift the cusp fields ∂1, x1²∂2 to free fields on a nilpotent group.
use curvkit::freegeom::lift_free;
use curvkit::jets::{Jet, JetContext};
use curvkit::vfields::VField;

fn main() {
    let m = 3;
    let ctx = JetContext::numbered(&[("x", 2)], 2 * m + 1);
    let x1 = Jet::var(&ctx, 0);
    let fields = vec![
        VField::coordinate(&ctx, 2, 0),
        VField::new(&ctx, 2, vec![Jet::zero(&ctx), x1.pow(2)]).unwrap(),
    ];
    let frame = lift_free(&fields, &[1, 1], m).unwrap();
    println!("lifted to dimension {} (free algebra of step {m})", frame.dim());
    for (i, f) in frame.fields().iter().enumerate() {
        println!("  X̃{} = {}", i + 1, f.pretty());
    }
    let rep = frame.verify(&fields).unwrap();
    println!("{}", serde_json::to_string_pretty(&rep).unwrap());
}
