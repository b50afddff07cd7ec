use std::collections::BTreeMap;

use curvkit::jets::{q, qi, Jet, JetContext, Q};
use curvkit::nilpotent::{random_rationals, to_f64_vec, NilpotentAlgebra, Tree, QUASI_TRIANGLE_CONSTANT};
use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---- independent oracles ---------------------------------------------------

fn mobius(n: u64) -> i64 {
    let mut n = n;
    let mut res = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            res = -res;
        }
        p += 1;
    }
    if n > 1 {
        res = -res;
    }
    res
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Multigraded Witt formula: dimension of the free Lie algebra component of multidegree `ns`.
fn witt(ns: &[u64]) -> u64 {
    let total: u64 = ns.iter().sum();
    let g = ns.iter().fold(0, |a, &b| gcd(a, b));
    let mut s = 0.0;
    for d in 1..=g {
        if g % d != 0 {
            continue;
        }
        let mut multinom = factorial(total / d);
        for &n in ns {
            multinom /= factorial(n / d);
        }
        s += mobius(d) as f64 * multinom;
    }
    (s / total as f64).round() as u64
}

/// `(d, Q)` of `N_m^{a}` from the Witt formula.
fn witt_dims(a: &[u32], m: u32) -> (u64, u64) {
    let p = a.len();
    let mut d = 0;
    let mut qd = 0;
    let mut ns = vec![0u64; p];
    fn rec(i: usize, a: &[u32], m: u32, ns: &mut Vec<u64>, d: &mut u64, qd: &mut u64) {
        if i == a.len() {
            let w: u64 = ns.iter().zip(a).map(|(n, &x)| n * x as u64).sum();
            if w == 0 || w > m as u64 {
                return;
            }
            let dim = witt(ns);
            *d += dim;
            *qd += dim * w;
            return;
        }
        for k in 0..=(m / a[i]) as u64 {
            ns[i] = k;
            rec(i + 1, a, m, ns, d, qd);
        }
        ns[i] = 0;
    }
    rec(0, a, m, &mut ns, &mut d, &mut qd);
    (d, qd)
}

type WordPoly = BTreeMap<String, Q>;

fn wp_mul(a: &WordPoly, b: &WordPoly, max: usize) -> WordPoly {
    let mut r = WordPoly::new();
    for (x, cx) in a {
        for (y, cy) in b {
            if x.len() + y.len() > max {
                continue;
            }
            *r.entry(format!("{x}{y}")).or_insert_with(Q::zero) += cx * cy;
        }
    }
    r.retain(|_, v| !v.is_zero());
    r
}

fn wp_add(a: &mut WordPoly, b: &WordPoly, s: &Q) {
    for (w, c) in b {
        *a.entry(w.clone()).or_insert_with(Q::zero) += c * s;
    }
    a.retain(|_, v| !v.is_zero());
}

fn wp_bracket(a: &WordPoly, b: &WordPoly, max: usize) -> WordPoly {
    let mut r = wp_mul(a, b, max);
    wp_add(&mut r, &wp_mul(b, a, max), &qi(-1));
    r
}

fn letter(c: &str) -> WordPoly {
    WordPoly::from([(c.to_string(), Q::one())])
}

/// log(exp(a)exp(b)) by direct power series, up to word length 3.
fn direct_bch3() -> WordPoly {
    let max = 3;
    let exp = |x: &WordPoly| {
        let mut acc = WordPoly::from([(String::new(), Q::one())]);
        let mut p = x.clone();
        for k in 1..=max {
            let f: i64 = (1..=k as i64).product();
            wp_add(&mut acc, &p, &q(1, f));
            p = wp_mul(&p, x, max);
        }
        acc
    };
    let mut z = wp_mul(&exp(&letter("a")), &exp(&letter("b")), max);
    z.remove("");
    let mut acc = WordPoly::new();
    let mut p = z.clone();
    for k in 1..=max as i64 {
        wp_add(&mut acc, &p, &q(if k % 2 == 1 { 1 } else { -1 }, k));
        p = wp_mul(&p, &z, max);
    }
    acc
}

fn tree_words(t: &Tree, max: usize) -> WordPoly {
    match t {
        Tree::Leaf(i) => letter(if *i == 0 { "a" } else { "b" }),
        Tree::Node(x, y) => wp_bracket(&tree_words(x, max), &tree_words(y, max), max),
    }
}

fn degree_part(p: &WordPoly, k: usize) -> WordPoly {
    p.iter().filter(|(w, _)| w.len() == k).map(|(w, c)| (w.clone(), c.clone())).collect()
}

// ---- tests -------------------------------------------------------------------

#[test]
fn dimensions_match_witt_oracle() {
    for (a, m) in [(vec![1, 1], 2), (vec![1, 1], 3), (vec![1, 1, 1], 2), (vec![1, 1], 4), (vec![1, 2], 4), (vec![1, 2, 3], 3), (vec![2, 3], 6)] {
        let alg = NilpotentAlgebra::build(a.len(), &a, m).unwrap();
        let (d, qd) = witt_dims(&a, m);
        assert_eq!((alg.dim() as u64, alg.homogeneous_dimension() as u64), (d, qd), "a={a:?} m={m}");
    }
    assert_eq!(witt_dims(&[1, 1], 2), (3, 4));
    assert_eq!(witt_dims(&[1, 1], 3), (5, 10));
    assert_eq!(witt_dims(&[1, 1, 1], 2), (6, 9));
}

#[test]
fn bch_low_order_terms_against_direct_expansion() {
    let (alg, c) = NilpotentAlgebra::bch_series(3).unwrap();
    let direct = direct_bch3();
    for k in 1..=3 {
        let mut mine = WordPoly::new();
        for (i, coef) in &c[k - 1] {
            wp_add(&mut mine, &tree_words(&alg.basis()[*i].tree, 3), coef);
        }
        assert_eq!(mine, degree_part(&direct, k), "degree {k}");
    }
    // c3 = 1/12 [a,[a,b]] - 1/12 [b,[a,b]]
    let (a, b) = (letter("a"), letter("b"));
    let ab = wp_bracket(&a, &b, 3);
    let mut expect = WordPoly::new();
    wp_add(&mut expect, &wp_bracket(&a, &ab, 3), &q(1, 12));
    wp_add(&mut expect, &wp_bracket(&b, &ab, 3), &q(-1, 12));
    assert_eq!(degree_part(&direct, 3), expect);
}

#[test]
fn structure_constants_antisymmetry_jacobi_grading() {
    for (a, m) in [(vec![1, 1], 4), (vec![1, 1, 1], 3), (vec![1, 2], 5)] {
        let alg = NilpotentAlgebra::build(a.len(), &a, m).unwrap();
        let d = alg.dim();
        let deg = alg.basis_degrees();
        for i in 0..d {
            for j in 0..d {
                for (k, c) in alg.bracket(i, j) {
                    assert_eq!(deg[k], deg[i] + deg[j]);
                    assert_eq!(alg.structure_constant(j, i, k), -c);
                }
            }
        }
        let br = |x: &Vec<Q>, y: &Vec<Q>| {
            let mut r = vec![Q::zero(); d];
            for i in 0..d {
                for j in 0..d {
                    if x[i].is_zero() || y[j].is_zero() {
                        continue;
                    }
                    for (k, c) in alg.bracket(i, j) {
                        r[k] += &x[i] * &y[j] * c;
                    }
                }
            }
            r
        };
        let e = |i: usize| (0..d).map(|k| if k == i { Q::one() } else { Q::zero() }).collect::<Vec<_>>();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let (x, y, z) = (e(i), e(j), e(k));
                    let s1 = br(&x, &br(&y, &z));
                    let s2 = br(&y, &br(&z, &x));
                    let s3 = br(&z, &br(&x, &y));
                    for t in 0..d {
                        assert!((&s1[t] + &s2[t] + &s3[t]).is_zero());
                    }
                }
            }
        }
    }
}

#[test]
fn group_axioms_and_dilations_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (a, m) in [(vec![1, 1], 3), (vec![1, 1, 1], 2), (vec![1, 2], 4)] {
        let alg = NilpotentAlgebra::build(a.len(), &a, m).unwrap();
        let d = alg.dim();
        for _ in 0..20 {
            let x = random_rationals(&mut rng, d);
            let y = random_rationals(&mut rng, d);
            let z = random_rationals(&mut rng, d);
            let xy_z = alg.group_multiply(&alg.group_multiply(&x, &y).unwrap(), &z).unwrap();
            let x_yz = alg.group_multiply(&x, &alg.group_multiply(&y, &z).unwrap()).unwrap();
            assert_eq!(xy_z, x_yz);
            let r = q(rng.gen_range(1..7), rng.gen_range(1..5));
            let lhs = alg.dilate_exact(&alg.group_multiply(&x, &y).unwrap(), &r).unwrap();
            let rhs = alg.group_multiply(&alg.dilate_exact(&x, &r).unwrap(), &alg.dilate_exact(&y, &r).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }
}

#[test]
fn product_polynomials_are_homogeneous() {
    let alg = NilpotentAlgebra::build(2, &[1, 2], 5).unwrap();
    let deg = alg.basis_degrees();
    let d = alg.dim();
    for (i, p) in alg.product_polynomials().iter().enumerate() {
        for (mono, _) in p.terms() {
            let w: u32 = (0..2 * d).map(|v| mono.get(v) as u32 * deg[v % d]).sum();
            assert_eq!(w, deg[i]);
        }
    }
}

#[test]
fn bch_of_jets_matches_group_law() {
    let alg = NilpotentAlgebra::build(2, &[1, 1], 3).unwrap();
    let ctx = JetContext::numbered(&[("s", 1)], 3);
    let s = Jet::var(&ctx, 0);
    let d = alg.dim();
    let mut a = vec![Jet::zero(&ctx); d];
    let mut b = vec![Jet::zero(&ctx); d];
    a[0] = s.clone();
    b[1] = s.clone();
    let c = alg.bch(&a, &b).unwrap();
    // exp(sY1)exp(sY2): coordinate of [Y1,Y2] is s²/2
    assert_eq!(c[2].pretty(), "1/2*s1^2");
    // bch(A, 0) = A
    let zero = vec![Jet::zero(&ctx); d];
    assert_eq!(alg.bch(&a, &zero).unwrap(), a);
}

#[test]
fn quasi_triangle_with_documented_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (a, m) in [(vec![1, 1], 2), (vec![1, 1], 3), (vec![1, 2], 3)] {
        let alg = NilpotentAlgebra::build(a.len(), &a, m).unwrap();
        let d = alg.dim();
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let mut pt = || (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
            let (x, y, z) = (pt(), pt(), pt());
            let lhs = alg.quasi_distance(&x, &z);
            let rhs = alg.quasi_distance(&x, &y) + alg.quasi_distance(&y, &z);
            worst = worst.max(lhs / rhs);
        }
        assert!(worst <= QUASI_TRIANGLE_CONSTANT, "a={a:?} m={m}: ratio {worst}");
    }
}

#[test]
fn distance_symmetry_and_left_invariance() {
    let alg = NilpotentAlgebra::build(2, &[1, 1], 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let x = random_rationals(&mut rng, 5);
        let y = random_rationals(&mut rng, 5);
        let g = random_rationals(&mut rng, 5);
        let (xf, yf) = (to_f64_vec(&x), to_f64_vec(&y));
        assert!((alg.quasi_distance(&xf, &yf) - alg.quasi_distance(&yf, &xf)).abs() < 1e-9);
        // left invariance is exact at the level of x⁻¹y
        let gx = alg.group_multiply(&g, &x).unwrap();
        let gy = alg.group_multiply(&g, &y).unwrap();
        let lhs = alg.group_multiply(&alg.inverse(&gx), &gy).unwrap();
        let rhs = alg.group_multiply(&alg.inverse(&x), &y).unwrap();
        assert_eq!(lhs, rhs);
    }
}

#[test]
fn heisenberg_ball_volume_scales_like_r_to_q() {
    let alg = NilpotentAlgebra::build(2, &[1, 1], 2).unwrap();
    let radii: Vec<f64> = (0..=8).map(|i| 2f64.powf(-4.0 + 0.5 * i as f64)).collect();
    let (slope, _) = alg.ball_volume_exponent(&radii, 180_000, 3);
    assert!((slope - 4.0).abs() < 0.2, "slope {slope}");
}
