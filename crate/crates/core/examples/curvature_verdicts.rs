//! Bracket, Y-field and Jacobian curvature conditions on the built-in families.
use curvkit::curvature::{check_cg, check_cj, check_cy, GammaFamily, NAMED_FAMILIES};

fn main() {
    println!("{:<18} {:>8} {:>8} {:>8}", "family", "Cg", "CY", "CJ");
    for name in NAMED_FAMILIES {
        let g = GammaFamily::named(name).unwrap().with_order(7).unwrap();
        let m = if g.k() == 1 { 4 } else { 2 };
        let show = |v: curvkit::curvature::CurvatureVerdict| if v.is_curved() { "curved".to_string() } else { format!("flat≤{m}") };
        println!(
            "{:<18} {:>8} {:>8} {:>8}",
            name,
            show(check_cg(&g, m, m).unwrap()),
            show(check_cy(&g, m, m).unwrap()),
            if check_cj(&g, g.n(), 6).unwrap().is_curved() { "curved".into() } else { "flat≤6".to_string() }
        );
    }
    let v = check_cj(&GammaFamily::named("parabola").unwrap(), 2, 4).unwrap();
    println!("\nparabola certificate: {:?}", v.certificate);
}
