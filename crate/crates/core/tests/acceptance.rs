//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Criteria 1, 11 and 12 cannot be met as literally stated (see the notes
//! printed with them); they are run and reported, but only a failure of any
//! other criterion makes this target fail.

use clap::Parser;
use curvkit::cli::{execute, Cli};
use curvkit::curvature::{
    check_cg, check_cj, cross_check_equivalence, exp_representation, named_components, normal_form, random_family, reconstruct_gamma,
    CrossCheckBudget, GammaFamily, NormalFormOutcome,
};
use curvkit::fit;
use curvkit::freegeom::lift_free;
use curvkit::jets::{Echelon, Jet, JetContext, MultiIndex, Polynomial, Weight, Q};
use curvkit::nilpotent::{random_rationals, NilpotentAlgebra};
use curvkit::oplab::{
    l1_to_density, log_schedule, mollifier_defect, orthogonality_decay, pushforward_density, smoothing_probe, vdc_decay, BuildConfig,
    Grid, Interp, KernelSpec, Mollifier, NumericGamma, PushforwardConfig, SmoothingConfig,
};
use curvkit::spec::parse_polynomial;
use curvkit::vfields::VField;
use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Criteria whose literal statement is unattainable; reported, not enforced.
const UNATTAINABLE: &[u32] = &[1, 11, 12];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn q(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

// ---- 1 ----------------------------------------------------------------------

fn bch() -> Outcome {
    let (alg, c) = NilpotentAlgebra::bch_series(3).unwrap();
    let idx = |w: &str| alg.basis().iter().position(|h| h.label(2) == w).unwrap();
    let coef = |d: usize, w: &str| c[d].iter().find(|(i, _)| *i == idx(w)).map(|p| p.1.clone()).unwrap_or_else(Q::zero);
    let c1 = coef(0, "1") == Q::one() && coef(0, "2") == Q::one() && c[0].len() == 2;
    let c2 = coef(1, "12") == q(1, 2) && c[1].len() == 1;
    // basis word 122 is [[a,b],b] = −[b,[a,b]]
    let a_ab = coef(2, "112");
    let b_ab = -coef(2, "122");
    let c3_stated = a_ab == q(1, 12) && b_ab == q(1, 12) && c[2].len() == 2;
    let c3_standard = a_ab == q(1, 12) && b_ab == q(-1, 12);
    outcome(
        c1 && c2 && c3_stated,
        format!(
            "c1 ok: {c1}, c2 ok: {c2}; computed c3 = {a_ab}[a,[a,b]] + ({b_ab})[b,[a,b]]; the stated c3 has +1/12 on [b,[a,b]], the standard series −1/12 (matches: {c3_standard})"
        ),
    )
}

// ---- 2 ----------------------------------------------------------------------

fn agree(a: &Jet, b: &Jet, upto: u32) -> bool {
    a.try_sub(b).unwrap().terms().all(|(m, c)| m.degree() > upto || c.is_zero())
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = 0;
    let count = 60;
    for _ in 0..count {
        let n = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=2);
        let order = rng.gen_range(1..=5);
        let g = random_family(&mut rng, n, k, 3, order);
        let rep = exp_representation(&g, order).unwrap();
        let back = reconstruct_gamma(&rep, order, g.base().to_vec()).unwrap();
        if !g.jets().iter().zip(back.jets()).all(|(a, b)| agree(a, b, order)) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{count} random families, {failures} failures"))
}

// ---- 3 ----------------------------------------------------------------------

fn family_at(name: &str, base: Vec<Q>, order: u32) -> GammaFamily {
    let (n, k, comps) = named_components(name).unwrap();
    let polys = comps.iter().map(|c| parse_polynomial(c, n, k).unwrap()).collect();
    GammaFamily::from_polynomials(n, k, polys, base, order).unwrap()
}

fn flat_everywhere_tested(g: &GammaFamily) -> bool {
    (1..=6).all(|m| !check_cg(g, m, m).unwrap().is_curved()) && (1..=4).all(|r| !check_cj(g, r, 6).unwrap().is_curved())
}

fn verdicts() -> Outcome {
    let mut bad = Vec::new();
    for name in ["parabola", "shear"] {
        let g = GammaFamily::named(name).unwrap();
        if !(check_cg(&g, 3, 3).unwrap().is_curved() && check_cj(&g, 2, 4).unwrap().is_curved()) {
            bad.push(format!("{name} not certified"));
        }
    }
    let sp = GammaFamily::named("sheared_parabola").unwrap();
    if !flat_everywhere_tested(&sp) {
        bad.push("sheared parabola certified".into());
    }
    let nf = normal_form(&sp, 6, None).unwrap();
    let h_ok = nf.phi[1].pretty() == "x2 - x1^2" && nf.weights == vec![Weight::Finite(1), Weight::Infinite];
    if !(matches!(nf.outcome, NormalFormOutcome::InvariantManifold) && h_ok) {
        bad.push(format!("normal form {:?} {:?}", nf.phi.iter().map(|p| p.pretty()).collect::<Vec<_>>(), nf.weights));
    }
    for (x1, x2) in [(q(0, 1), q(0, 1)), (q(1, 1), q(0, 1)), (q(-1, 2), q(0, 1)), (q(0, 1), q(1, 1)), (q(2, 1), q(-1, 3)), (q(0, 1), q(1, 100))] {
        let g = family_at("dilation", vec![x1.clone(), x2.clone()], 8);
        let curved = check_cg(&g, 6, 6).unwrap().is_curved() || check_cj(&g, 2, 6).unwrap().is_curved();
        let expect = !x2.is_zero();
        if curved != expect || (!expect && !flat_everywhere_tested(&g)) {
            bad.push(format!("dilation at ({x1}, {x2}): curved = {curved}"));
        }
    }
    // γ = x − h(t): curved iff the derivatives of h at 0 span
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let n = rng.gen_range(1..=3);
        let mut comps = Vec::new();
        let mut derivs = vec![vec![Q::zero(); n]; 3];
        for i in 0..n {
            let mut p = Polynomial::var(n + 1, i);
            for j in 1..=3u32 {
                let c: i64 = if rng.gen_bool(0.4) { rng.gen_range(-2..=2) } else { 0 };
                let mut e = vec![0; n + 1];
                e[n] = j;
                p.add_term(e, Q::from_integer((-c).into()));
                derivs[j as usize - 1][i] = Q::from_integer((c * (1..=j as i64).product::<i64>()).into());
            }
            comps.push(p);
        }
        let mut e = Echelon::<Q>::new(n);
        for d in &derivs {
            e.insert(d);
        }
        let g = GammaFamily::from_polynomials(n, 1, comps, vec![Q::zero(); n], 8).unwrap();
        if check_cg(&g, 3, 3).unwrap().is_curved() != (e.rank() == n) {
            bad.push(format!("translation family rank {}", e.rank()));
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "0 disagreements (parabola, shear, sheared parabola + normal form, 6 dilation bases, 10 translations)".into() } else { bad.join("; ") })
}

// ---- 4 ----------------------------------------------------------------------

fn cross_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut exceptions = Vec::new();
    let mut certified = 0;
    let count = 30;
    for i in 0..count {
        let n = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=2);
        let g = random_family(&mut rng, n, k, 3, 8);
        let m = if k == 1 { 3 } else { 2 };
        let rep = cross_check_equivalence(&g, CrossCheckBudget { m, b: 6, normal_form_order: 5 }).unwrap();
        certified += usize::from(rep.cj_prime.is_some());
        exceptions.extend(rep.violations.iter().map(|v| format!("#{i}: {v}")));
    }
    outcome(exceptions.is_empty(), format!("{count} families, {certified} with C_J′ checked, exceptions: {exceptions:?}"))
}

// ---- 5 ----------------------------------------------------------------------

fn mobius(mut n: u32) -> i64 {
    let mut r = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            r = -r;
        }
        p += 1;
    }
    if n > 1 {
        -r
    } else {
        r
    }
}

/// Necklace formula for the free Lie algebra on `p` generators of degree 1.
fn witt(p: u32, m: u32) -> (usize, u32) {
    let mut d = 0;
    let mut qd = 0;
    for n in 1..=m {
        let s: i64 = (1..=n).filter(|e| n % e == 0).map(|e| mobius(e) * (p as i64).pow(n / e)).sum();
        let dim = (s / n as i64) as usize;
        d += dim;
        qd += dim as u32 * n;
    }
    (d, qd)
}

fn nilpotent_dims() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (p, m) in [(2usize, 2u32), (2, 3), (3, 2)] {
        let alg = NilpotentAlgebra::build(p, &vec![1; p], m).unwrap();
        let got = (alg.dim(), alg.homogeneous_dimension());
        ok &= got == witt(p as u32, m);
        notes.push(format!("({p},{m})→{got:?}"));
        // associativity, exact
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let [x, y, z] = [0, 1, 2].map(|_| random_rationals(&mut rng, alg.dim()));
            let l = alg.group_multiply(&alg.group_multiply(&x, &y).unwrap(), &z).unwrap();
            let r = alg.group_multiply(&x, &alg.group_multiply(&y, &z).unwrap()).unwrap();
            ok &= l == r;
        }
        // P_I is homogeneous of degree |I| with u, v both weighted by the basis degrees
        let degs = alg.basis_degrees();
        for (i, poly) in alg.product_polynomials().iter().enumerate() {
            for (a, c) in poly.terms() {
                let w: u32 = a.exps().iter().enumerate().map(|(v, &e)| e as u32 * degs[v % alg.dim()]).sum();
                ok &= c.is_zero() || w == degs[i];
            }
        }
    }
    outcome(ok, format!("{}; associativity and homogeneity exact", notes.join(", ")))
}

// ---- 6 ----------------------------------------------------------------------

fn monomial_field(ctx: &std::sync::Arc<JetContext>, n: usize, dir: usize, var: usize, pow: u32) -> VField {
    let mut comps = vec![Jet::zero(ctx); n];
    comps[dir] = Jet::monomial(ctx, MultiIndex::unit(n, var), Q::one()).pow(pow);
    VField::new(ctx, n, comps).unwrap()
}

fn lifting() -> Outcome {
    let mut inputs = Vec::new();
    let c = |n: usize, m: u32| JetContext::numbered(&[("x", n)], 2 * m + 1);
    let ctx = c(2, 2);
    inputs.push(("grushin", vec![VField::coordinate(&ctx, 2, 0), monomial_field(&ctx, 2, 1, 0, 1)], vec![1, 1], 2));
    let ctx = c(2, 3);
    inputs.push(("cusp", vec![VField::coordinate(&ctx, 2, 0), monomial_field(&ctx, 2, 1, 0, 2)], vec![1, 1], 3));
    let ctx = c(2, 2);
    inputs.push(("plane", vec![VField::coordinate(&ctx, 2, 0), VField::coordinate(&ctx, 2, 1)], vec![1, 1], 2));
    let ctx = c(2, 3);
    inputs.push(("weighted plane", vec![VField::coordinate(&ctx, 2, 0), VField::coordinate(&ctx, 2, 1)], vec![1, 2], 3));
    let ctx = c(3, 2);
    inputs.push((
        "three fields in R3",
        vec![VField::coordinate(&ctx, 3, 0), VField::coordinate(&ctx, 3, 1), monomial_field(&ctx, 3, 2, 0, 1)],
        vec![1, 1, 1],
        2,
    ));
    let mut bad = Vec::new();
    let mut dims = Vec::new();
    for (name, fields, deg, m) in inputs {
        let frame = lift_free(&fields, &deg, m).unwrap();
        let rep = frame.verify(&fields).unwrap();
        dims.push(format!("{name}: n={} d={}", rep.n, rep.d));
        if !(rep.ok() && rep.pushforward_exact && rep.rank == rep.d && rep.structure_mismatches.is_empty()) {
            bad.push(name);
        }
    }
    outcome(bad.is_empty(), format!("{}; failing: {bad:?}", dims.join(", ")))
}

// ---- 7 ----------------------------------------------------------------------

fn ball_volume() -> Outcome {
    let heis = NilpotentAlgebra::build(2, &[1, 1], 2).unwrap();
    let radii: Vec<f64> = (0..=8).map(|i| 2f64.powf(-4.0 + 0.5 * i as f64)).collect();
    let (slope, _) = heis.ball_volume_exponent(&radii, 1_000_000, 7);
    outcome((slope - 4.0).abs() <= 0.2, format!("slope {slope:.4} over r ∈ [1/16, 1] (Q = 4)"))
}

// ---- 8 ----------------------------------------------------------------------

fn van_der_corput() -> Outcome {
    let lambdas = log_schedule(1e2, 1e5, 13);
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 1..=3u32 {
        let f = move |t: f64| t.powi(k as i32);
        let r = vdc_decay(&f, k as f64, k, &lambdas, 8);
        ok &= (r.exponent - r.predicted).abs() <= 0.05;
        parts.push(format!("k={k}: {:+.4}", r.exponent));
    }
    outcome(ok, parts.join(", "))
}

// ---- 9 ----------------------------------------------------------------------

fn pushforward() -> Outcome {
    let cfg = PushforwardConfig::default();
    let r = pushforward_density(&|t: &[f64]| vec![t[0] * t[0]], 1, 1, &|_| 1.0, &cfg).unwrap();
    let l1 = l1_to_density(&r.mass_edges, &r.mass_heights, &|y: f64| y.powf(-0.5)) / r.total_mass;
    outcome(l1 < 0.02 && r.exponent >= 0.45, format!("{} samples: relative L¹ {l1:.4}, modulus exponent {:.3}", cfg.samples, r.exponent))
}

// ---- 10 ---------------------------------------------------------------------

fn decay() -> Outcome {
    let grid = Grid::new(2, 1.0, 256).unwrap();
    let k = KernelSpec::hilbert(0.5);
    let mut parts = Vec::new();
    let mut pass = false;
    for interp in [Interp::Cubic, Interp::Linear, Interp::Spectral] {
        let cfg = BuildConfig { interp, margin: 0.0, psi_radius: None };
        let t = orthogonality_decay(&NumericGamma::parabola(), &k, &grid, 6, &cfg, None).unwrap();
        let ok = t.monotone_from_gap2 && t.epsilon > 0.0;
        if interp == Interp::Cubic {
            pass = ok;
        }
        parts.push(format!("{interp:?}: ε = {:.3}, monotone = {}", t.epsilon, t.monotone_from_gap2));
        if interp == Interp::Spectral {
            parts.push(format!("under-resolved j = {:?}", t.under_resolved));
        }
    }
    let cfg = BuildConfig { interp: Interp::Spectral, margin: 0.0, psi_radius: None };
    let mask = |xi: &[f64]| xi[0] == 0.0;
    let c = orthogonality_decay(&NumericGamma::line(), &k, &grid, 6, &cfg, Some(&mask)).unwrap();
    parts.push(format!("line control max {:.1e}", c.by_gap.iter().map(|p| p.1).fold(0.0, f64::max)));
    outcome(pass, parts.join("; "))
}

// ---- 11 ---------------------------------------------------------------------

fn mollifier() -> Outcome {
    let m = Mollifier::default();
    let js: Vec<u32> = (2..=9).collect();
    let d: Vec<f64> = js.iter().map(|&j| mollifier_defect(None, &m, &[0.6, 0.3], j).unwrap().abs()).collect();
    let xs: Vec<f64> = js.iter().map(|&j| j as f64).collect();
    let ys: Vec<f64> = d.iter().map(|v| v.log2()).collect();
    let s = fit::slope(&xs, &ys);
    outcome(
        (s + 1.0).abs() <= 0.2,
        format!("log₂ slope {s:.3}; Φ is even, so the first-order term vanishes and the defect is O(2^-2j)"),
    )
}

// ---- 12 ---------------------------------------------------------------------

fn smoothing() -> Outcome {
    let k = KernelSpec::bump(1, 0.25).unwrap();
    let flat = NumericGamma::translation("flat_line", 2, 1, |t| vec![-t[0], 0.0]);
    let cfg = SmoothingConfig { s_list: vec![0.5], n_aniso: 3, ..Default::default() };
    let fr = smoothing_probe(&flat, &k, &cfg).unwrap();
    let fs = &fr.slopes[0];
    let predicted = fs.predicted.unwrap();
    let flat_ok = (fs.slope - predicted).abs() <= 0.15 * predicted.abs();
    let windowed = fs.windowed_slope.unwrap();
    let ccfg = SmoothingConfig { s_list: vec![0.1], n_aniso: 1, ..Default::default() };
    let cr = smoothing_probe(&NumericGamma::parabola(), &k, &ccfg).unwrap();
    let ratios: Vec<f64> = cr.rows.iter().map(|r| r.ratio).collect();
    let sup = ratios.iter().cloned().fold(0.0, f64::max);
    let spread = cr.slopes[0].spread;
    outcome(
        flat_ok && spread < 3.0,
        format!(
            "flat: slope {:.3} vs {predicted} (windowed lower-bound slope {windowed:.3}); curved: sup {sup:.3}, max/min {spread:.2}, slope {:.3} (ratio decays like δ^(1/2−s))",
            fs.slope, cr.slopes[0].slope
        ),
    )
}

// ---- 13 ---------------------------------------------------------------------

fn run_json(args: &[&str]) -> String {
    let mut full = vec!["curvkit"];
    full.extend_from_slice(args);
    execute(&Cli::try_parse_from(full).unwrap()).unwrap().to_json()
}

fn determinism() -> Outcome {
    let runs: Vec<Vec<&str>> = vec![
        vec!["--grid", "128", "oplab", "symbol"],
        vec!["--grid", "128", "oplab", "decay"],
        vec!["--grid", "128", "oplab", "maximal"],
        vec!["oplab", "mollifier"],
        vec!["oplab", "smoothing"],
        vec!["oplab", "vdc"],
        vec!["--seed", "9", "oplab", "pushforward"],
        vec!["check", "sheared_parabola"],
        vec!["nilpotent", "3", "--order", "3"],
        vec!["lift", "shear", "--order", "2"],
    ];
    let mut differ = Vec::new();
    for args in &runs {
        let a = run_json(args);
        let b = run_json(args);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = single.install(|| run_json(args));
        if a != b || a != c {
            differ.push(args.join(" "));
        }
    }
    let heis = NilpotentAlgebra::build(2, &[1, 1], 2).unwrap();
    let v1 = heis.ball_volume_mc(0.5, 100_000, 3);
    let v2 = heis.ball_volume_mc(0.5, 100_000, 3);
    if v1.to_bits() != v2.to_bits() {
        differ.push("ball volume".into());
    }
    outcome(differ.is_empty(), format!("{} reports re-run (incl. single-threaded); differing: {differ:?}", runs.len()))
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "BCH exactness", bch),
        (2, "exponential representation round trip", round_trip),
        (3, "verdict battery", verdicts),
        (4, "equivalence cross-check", cross_check),
        (5, "free nilpotent dimensions", nilpotent_dims),
        (6, "lifting", lifting),
        (7, "Heisenberg ball volume", ball_volume),
        (8, "van der Corput exponents", van_der_corput),
        (9, "pushforward density", pushforward),
        (10, "almost-orthogonality decay", decay),
        (11, "mollifier calibration", mollifier),
        (12, "smoothing dichotomy", smoothing),
        (13, "determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, name, f) in criteria {
        let start = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag} {name} [{:.1}s]: {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass && !UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
