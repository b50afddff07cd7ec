//! Brackets, flows and pushforwards of jets of vector fields.
use curvkit::jets::{Jet, JetContext};
use curvkit::vfields::{bracket, flow_exp, lie_closure, pushforward, span_rank, ClosureBudget, VField};

fn main() {
    let ctx = JetContext::numbered(&[("x", 2)], 6);
    let x = Jet::var(&ctx, 0);
    // X = ∂1, Y = x1² ∂2
    let dx = VField::coordinate(&ctx, 2, 0);
    let y = VField::new(&ctx, 2, vec![Jet::zero(&ctx), x.pow(2)]).unwrap();
    let xy = bracket(&dx, &y).unwrap();
    println!("[X, Y]      = {}", xy.pretty());
    println!("[X, [X, Y]] = {}", bracket(&dx, &xy).unwrap().pretty());
    println!("rank at 0 of X, Y: {}", span_rank(&[dx.clone(), y.clone()]));

    let gens = vec![("X".to_string(), 1, dx), ("Y".to_string(), 1, y.clone())];
    let cl = lie_closure(&gens, ClosureBudget { max_degree: 4, max_length: 4 }).unwrap();
    let words: Vec<&str> = cl.spanning.iter().map(|&i| cl.entries[i].word.as_str()).collect();
    println!("spanning brackets: {words:?} (rank {})", cl.rank);

    // time-one flow of t·(∂1 + x1 ∂2), with t as a parameter
    let pctx = JetContext::numbered(&[("x", 2), ("t", 1)], 5);
    let t = Jet::var(&pctx, 2);
    let v = VField::new(&pctx, 2, vec![t.clone(), t.try_mul(&Jet::var(&pctx, 0)).unwrap()]).unwrap();
    for (i, c) in flow_exp(&v).unwrap().iter().enumerate() {
        println!("exp(tV)_{} = {}", i + 1, c.pretty());
    }

    // pushforward of Y under the shear (x1, x2) ↦ (x1, x2 + x1)
    let phi = vec![x.clone(), Jet::var(&ctx, 1).try_add(&x).unwrap()];
    println!("φ_*Y = {}", pushforward(&phi, &y).unwrap().pretty());
}
