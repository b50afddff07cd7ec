//! Oscillatory integrals ∫₀¹ e^{iλτ^k} dτ decay like λ^{-1/k}.
use curvkit::oplab::{log_schedule, vdc_decay};

fn main() {
    let lambdas = log_schedule(1e2, 1e5, 13);
    for k in 1..=4u32 {
        let f = move |t: f64| t.powi(k as i32);
        let r = vdc_decay(&f, k as f64, k, &lambdas, 8);
        println!("k = {k}: exponent {:+.4} (expected {:+.4})", r.exponent, r.predicted);
    }
}
