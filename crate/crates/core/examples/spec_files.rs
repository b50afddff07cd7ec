//! Parse a family from spec text, print its canonical form and its jets.
use curvkit::spec::parse_spec;

const SPEC: &str = "\
# a curve through each point, bent in the x2 direction
name = bent
n = 2
k = 1
base = 0, 1/2
order = 3
gamma1 = x1 + t1
gamma2 = x2 + t1^2 + x1*t1^3
";

fn main() {
    let spec = parse_spec(SPEC).expect("valid spec");
    print!("{}", spec.pretty());
    let fam = spec.family(5).unwrap();
    println!("\njets at the base point (order {}):", fam.order());
    for (i, j) in fam.jets().iter().enumerate() {
        println!("  γ{} = {}", i + 1, j.pretty());
    }
    // γ(x, 0) must be the identity
    let err = parse_spec("n = 1\nk = 1\ngamma1 = 2*x1 + t1\n").unwrap_err();
    println!("\nrejected: {err}");
}
