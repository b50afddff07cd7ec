//! The pushforward of Lebesgue measure under τ ↦ τ²: density ∝ y^{-1/2},
//! L¹ modulus of continuity ~ z^{1/2}.
use curvkit::oplab::{l1_to_density, pushforward_density, PushforwardConfig};

fn main() {
    let cfg = PushforwardConfig::default();
    let r = pushforward_density(&|t: &[f64]| vec![t[0] * t[0]], 1, 1, &|_| 1.0, &cfg).unwrap();
    let l1 = l1_to_density(&r.mass_edges, &r.mass_heights, &|y: f64| y.powf(-0.5));
    println!("total mass {:.4}, relative L¹ error {:.4}", r.total_mass, l1 / r.total_mass);
    for (z, w) in &r.modulus {
        println!("  ω({z:.4}) = {w:.4e}");
    }
    println!("modulus exponent {:.3}, degenerate: {}", r.exponent, r.degenerate);
}
