use curvkit::freegeom::*;
use curvkit::jets::{Jet, JetContext, Q};
use curvkit::nilpotent::NilpotentAlgebra;
use curvkit::vfields::VField;
use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn coord(ctx: &std::sync::Arc<JetContext>, n: usize, i: usize) -> VField {
    VField::coordinate(ctx, n, i)
}

fn monomial_field(ctx: &std::sync::Arc<JetContext>, n: usize, dir: usize, var: usize, pow: u32) -> VField {
    let mut c = Jet::var(ctx, var);
    for _ in 1..pow {
        c = c.try_mul(&Jet::var(ctx, var)).unwrap();
    }
    let mut comps = vec![Jet::zero(ctx); n];
    comps[dir] = c;
    VField::new(ctx, n, comps).unwrap()
}

/// (name, fields, degrees, m, expected d)
fn lift_inputs() -> Vec<(&'static str, Vec<VField>, Vec<u32>, u32, usize)> {
    let c2 = |m: u32| JetContext::numbered(&[("x", 2)], 2 * m + 1);
    let c1 = |m: u32| JetContext::numbered(&[("x", 1)], 2 * m + 1);
    let mut out = Vec::new();
    let ctx = c2(2);
    out.push(("plane", vec![coord(&ctx, 2, 0), coord(&ctx, 2, 1)], vec![1, 1], 2, 3));
    let ctx = c2(2);
    out.push(("grushin", vec![coord(&ctx, 2, 0), monomial_field(&ctx, 2, 1, 0, 1)], vec![1, 1], 2, 3));
    let ctx = c2(3);
    out.push(("cusp", vec![coord(&ctx, 2, 0), monomial_field(&ctx, 2, 1, 0, 2)], vec![1, 1], 3, 5));
    let ctx = c2(3);
    out.push(("weighted plane", vec![coord(&ctx, 2, 0), coord(&ctx, 2, 1)], vec![1, 2], 3, 3));
    let ctx = c1(2);
    out.push(("line", vec![coord(&ctx, 1, 0), monomial_field(&ctx, 1, 0, 0, 1)], vec![1, 1], 2, 3));
    out
}

#[test]
fn lifts_of_non_free_inputs_are_exact() {
    for (name, fields, deg, m, d) in lift_inputs() {
        let frame = lift_free(&fields, &deg, m).unwrap();
        assert_eq!(frame.dim(), d, "{name}");
        let rep = frame.verify(&fields).unwrap();
        assert!(rep.pushforward_exact, "{name}: {rep:?}");
        assert!(rep.chart_form, "{name}: {rep:?}");
        assert_eq!(rep.rank, d, "{name}");
        assert!(rep.structure_mismatches.is_empty(), "{name}: {rep:?}");
        assert!(rep.ok());
    }
}

#[test]
fn lift_requires_spanning() {
    let ctx = JetContext::numbered(&[("x", 2)], 5);
    // both fields along ∂1: brackets never reach ∂2
    let f = vec![coord(&ctx, 2, 0), monomial_field(&ctx, 2, 0, 0, 1)];
    assert!(matches!(lift_free(&f, &[1, 1], 2), Err(FreeGeomError::NotSpanning { .. })));
}

#[test]
fn lift_requires_order() {
    let ctx = JetContext::numbered(&[("x", 2)], 3);
    let f = vec![coord(&ctx, 2, 0), coord(&ctx, 2, 1)];
    assert!(matches!(lift_free(&f, &[1, 1], 2), Err(FreeGeomError::InsufficientOrder { .. })));
}

#[test]
fn already_free_frame_keeps_its_dimension() {
    let alg = NilpotentAlgebra::build(2, &[1, 1], 2).unwrap();
    let ctx = JetContext::numbered(&[("u", 3)], 5);
    let fields: Vec<VField> = (0..2).map(|i| VField::new(&ctx, 3, alg.left_invariant_field(alg.generator_index(i), &ctx)).unwrap()).collect();
    let frame = lift_free(&fields, &[1, 1], 2).unwrap();
    assert_eq!(frame.dim(), 3);
    assert!(frame.verify(&fields).unwrap().ok());
}

#[test]
fn distance_axioms_and_key_estimate() {
    let heis = FreeFrame::group(NilpotentAlgebra::build(2, &[1, 1], 2).unwrap()).unwrap();
    let (_, g, deg, m, _) = lift_inputs().swap_remove(1);
    let grushin = lift_free(&g, &deg, m).unwrap();
    for frame in [heis, grushin] {
        let diag = distance_diagnostics(&frame, 300, 0.15, 21);
        assert!(diag.skipped_outside_chart < diag.samples / 2, "{diag:?}");
        assert!(diag.max_antisymmetry_error < 1e-9, "{diag:?}");
        assert!(diag.max_symmetry_error < 1e-9, "{diag:?}");
        assert!(diag.max_triangle_ratio < 4.0, "{diag:?}");
        assert!(diag.max_key_ratio <= KEY_ESTIMATE_CONSTANT, "{diag:?}");
        assert!(diag.max_scaling_error < 1e-6, "{diag:?}");
    }
}

#[test]
fn theta_vanishes_on_the_diagonal() {
    let frame = FreeFrame::group(NilpotentAlgebra::build(2, &[1, 1], 3).unwrap()).unwrap();
    let x = [0.1, -0.05, 0.02, 0.01, -0.03];
    assert!(all_small(&frame.theta(&x, &x).unwrap(), 1e-12));
    assert!(frame.quasi_distance(&x, &x).unwrap() < 1e-9);
}

#[test]
fn dilations_map_balls_to_balls() {
    let frame = FreeFrame::group(NilpotentAlgebra::build(2, &[1, 1], 2).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x = [0.05, -0.02, 0.01];
    let s = 0.3;
    let mut checked = 0;
    for _ in 0..400 {
        let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
        let r: f64 = rng.gen_range(0.2..0.9);
        let inside = frame.quasi_distance(&x, &y).unwrap() < s;
        let z = frame.local_dilate(&x, &y, r).unwrap();
        assert_eq!(inside, frame.quasi_distance(&x, &z).unwrap() < r * s);
        // and back again
        let w = frame.local_dilate(&x, &z, 1.0 / r).unwrap();
        assert!(y.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-9));
        checked += usize::from(inside);
    }
    assert!(checked > 20);
}

#[test]
fn displacement_is_linear_in_t() {
    let model = GroupModel::new(NilpotentAlgebra::build(2, &[1, 1], 2).unwrap(), None).unwrap();
    let a = displacement_ratio(&model, 500, 0.2, 23);
    let b = displacement_ratio(&model, 500, 0.02, 23);
    assert!(a.is_finite() && a < 10.0, "{a}");
    assert!(b < 2.0 * a + 1.0, "{a} {b}");
}

#[test]
fn gamma_tilde_at_zero_parameters_is_identity() {
    let model = GroupModel::new(NilpotentAlgebra::build(2, &[1, 1], 2).unwrap(), None).unwrap();
    let fam = model.family(4).unwrap();
    let gt = gamma_tilde(&fam, 2).unwrap();
    for (i, j) in gt.iter().enumerate() {
        // terms free of τ reduce to x_i
        let rest = j.try_sub(&Jet::var(j.ctx(), i)).unwrap();
        assert!(rest.terms().all(|(a, _)| a.exps()[3..].iter().any(|&e| e > 0)), "{}", j.pretty());
    }
    let x = vec![Q::new(1.into(), 4.into()), Q::zero(), Q::new((-1).into(), 8.into())];
    let p = model.gamma_tilde_scaled(&x, 1, 2);
    let zero = vec![0.0; 4];
    assert_eq!(p.iter().map(|c| c.eval_f64(&zero)).collect::<Vec<_>>(), to_f64(&x));
}

#[test]
fn group_gamma_tilde_components_are_homogeneous() {
    let alg = NilpotentAlgebra::build(2, &[1, 1], 3).unwrap();
    let model = GroupModel::new(alg.clone(), None).unwrap();
    let p = model.gamma_tilde_scaled(&vec![Q::zero(); alg.dim()], 2, 0);
    for (c, h) in p.iter().zip(alg.basis()) {
        assert!(is_homogeneous(c, h.degree), "{c:?}");
    }
}

#[test]
fn uniform_jacobian_bounds() {
    let alg = NilpotentAlgebra::build(2, &[1, 1], 2).unwrap();
    let group = GroupModel::new(alg.clone(), None).unwrap();
    let (xi, beta, value) = group.witness(1).unwrap();
    assert!(!value.is_zero());
    let js = [0, 1, 2, 3, 4, 5];
    let rows = group.uniform_jacobian_table(&xi, &beta, 1, &js, 40, 0.3, 24);
    for r in &rows {
        assert_eq!(r.min_abs, rows[0].min_abs);
        assert_eq!(r.max_abs, rows[0].max_abs);
        assert!(r.min_abs > 0.0);
    }
    // perturbation by a degree-3 term in t1 along the top bracket
    let eps = vec![Q::zero(), Q::zero(), Q::from_integer(3.into())];
    let pert = GroupModel::new(alg, Some(eps)).unwrap();
    // the witness derivative is untouched by a t1-only perturbation...
    let prow = pert.uniform_jacobian_table(&xi, &beta, 1, &js, 40, 0.3, 24);
    assert!(prow.iter().all(|r| r.min_abs > 0.0 && (r.min_abs - rows[0].min_abs).abs() < 1e-12));
    // ...while J itself converges to the group Jacobian like 2^{-j}
    let zero = vec![0; beta.len()];
    let g0 = group.uniform_jacobian_table(&xi, &zero, 1, &js, 40, 0.3, 24);
    let p0 = pert.uniform_jacobian_table(&xi, &zero, 1, &js, 40, 0.3, 24);
    let gaps: Vec<f64> = p0.iter().zip(&g0).map(|(p, g)| (p.max_abs - g.max_abs).abs()).collect();
    assert!(gaps[0] > 0.0);
    for w in gaps.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{gaps:?}");
    }
    assert!(gaps[5] < gaps[0] / 8.0, "{gaps:?}");
}
