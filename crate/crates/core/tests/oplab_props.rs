use curvkit::oplab::*;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

fn log2_slope(ys: &[f64]) -> f64 {
    let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
    let ls: Vec<f64> = ys.iter().map(|v| v.log2()).collect();
    curvkit::fit::slope(&xs, &ls)
}

/// `∫_0^x e^{iu²} du`: power series for small `x`, asymptotic tail otherwise.
fn fresnel(x: f64) -> Complex64 {
    if x <= 4.0 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(x, 0.0); // i^n x^{2n+1} / n!
        for n in 0..200 {
            sum += pow / (2 * n + 1) as f64;
            pow *= Complex64::new(0.0, x * x / (n + 1) as f64);
            if pow.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        let full = Complex64::from_polar(PI.sqrt() / 2.0, PI / 4.0);
        let mut c = Complex64::new(0.0, -1.0 / (2.0 * x)); // 1/(2ix)
        let mut tail = Complex64::new(0.0, 0.0);
        let mut prev = f64::INFINITY;
        for m in 0..60 {
            if c.norm() > prev {
                break;
            }
            prev = c.norm();
            tail += c;
            c *= Complex64::new(0.0, -((2 * m + 1) as f64) / (2.0 * x * x));
        }
        full + Complex64::from_polar(1.0, x * x) * tail
    }
}

#[test]
fn fresnel_oracle_is_self_consistent() {
    // both branches agree where they overlap
    let a = fresnel(4.0);
    let mut b = Complex64::from_polar(PI.sqrt() / 2.0, PI / 4.0);
    let x: f64 = 4.0;
    let mut c = Complex64::new(0.0, -1.0 / (2.0 * x));
    for m in 0..12 {
        b += Complex64::from_polar(1.0, x * x) * c;
        c *= Complex64::new(0.0, -((2 * m + 1) as f64) / (2.0 * x * x));
    }
    assert!((a - b).norm() < 1e-6, "{a} {b}");
}

#[test]
fn vdc_integral_matches_closed_forms() {
    for lambda in [0.5, 3.0, 150.0, 4e3, 9e4] {
        let lin = vdc_integral(&|t| t, 1.0, lambda);
        let want = (Complex64::from_polar(1.0, lambda) - 1.0) / Complex64::new(0.0, lambda);
        assert!((lin - want).norm() < 1e-11, "λ = {lambda}");
        let quad = vdc_integral(&|t| t * t, 2.0, lambda);
        let want = fresnel(lambda.sqrt()) / lambda.sqrt();
        assert!((quad - want).norm() < 1e-8, "λ = {lambda}: {quad} vs {want}");
    }
}

#[test]
fn vdc_exponents_and_trivial_bound() {
    for k in 1..=3u32 {
        let f = move |t: f64| t.powi(k as i32);
        let rep = vdc_decay(&f, k as f64, k, &log_schedule(1e2, 1e5, 13), 8);
        assert!((rep.exponent + 1.0 / k as f64).abs() < 0.05, "k = {k}: {}", rep.exponent);
        for lambda in [0.01, 0.3, 0.99] {
            assert!(vdc_integral(&f, k as f64, lambda).norm() <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn hilbert_symbol_matches_sine_integral_oracle() {
    let grid = Grid::new(1, 8.0, 1024).unwrap();
    let a = 0.5;
    let jmax = 24;
    let k = KernelSpec::hilbert(a);
    let cfg = BuildConfig { interp: Interp::Spectral, margin: 0.0, psi_radius: None };
    let t = build_t(&NumericGamma::shift_1d(), &k, &grid, jmax, &cfg).unwrap();
    let m = t.symbol().unwrap();
    // oracle: −2i ∫_0^a (χ(t/a) − χ(2^{J+1}t/a)) sin(ξt)/t dt, Simpson on dyadic shells
    let oracle = |xi: f64| {
        let f = |t: f64| (chi(t / a) - chi(2f64.powi(jmax as i32 + 1) * t / a)) * (xi * t).sin() / t;
        let mut total = 0.0;
        for i in 0..=jmax + 2 {
            let (lo, hi) = (a * 2f64.powi(-(i as i32) - 1), a * 2f64.powi(-(i as i32)));
            let steps = 4000;
            let h = (hi - lo) / steps as f64;
            let mut s = f(lo) + f(hi);
            for q in 1..steps {
                s += if q % 2 == 1 { 4.0 } else { 2.0 } * f(lo + q as f64 * h);
            }
            total += s * h / 3.0;
        }
        Complex64::new(0.0, -2.0 * total)
    };
    for idx in [1usize, 5, 40, 200, 511] {
        let xi = grid.frequency(0, idx);
        assert!((m[idx] - oracle(xi)).norm() < 1e-6, "ξ = {xi}: {} vs {}", m[idx], oracle(xi));
    }
    // large |ξ|a: |m| → π, odd symbol
    let top = grid.frequency(0, 511);
    assert!(top * a > 150.0);
    assert!((m[511].norm() - PI).abs() < 1e-3);
    assert!((m[511] + m[1024 - 511]).norm() < 1e-9);
}

#[test]
fn kernels_cancel_and_decompose() {
    let h = KernelSpec::hilbert(0.5);
    let r = KernelSpec::riesz(2, 0.5).unwrap();
    assert!(h.sphere_mean().abs() < 1e-15);
    assert!(r.sphere_mean().abs() < 1e-12);
    for k in [&h, &r] {
        assert!(k.dyadic_reconstruction_error(10, 60) < 1e-12);
        for j in 0..8 {
            assert!(k.rescaling_error(j, 20) < 1e-12);
        }
        // odd kernels: node weights sum to zero per dyadic piece
        for j in 0..5 {
            assert!(k.nodes_j(j).iter().map(|p| p.1).sum::<f64>().abs() < 1e-10);
        }
    }
    assert!(matches!(KernelSpec::riesz(3, 0.5), Err(OplabError::Unsupported(_))));
    let b = KernelSpec::bump(2, 0.3).unwrap();
    assert!((b.nodes_total(0).iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-10);
}

fn bent() -> NumericGamma {
    // x − t(1 + x²/4): not translation invariant, Jacobian 1 + O(t)
    NumericGamma::new("bent", 1, 1, |x, t| vec![x[0] - t[0] * (1.0 + x[0] * x[0] / 4.0)])
}

#[test]
fn tj_annihilates_constants() {
    let grid = Grid::new(2, 4.0, 64).unwrap();
    let g = NumericGamma::new("twist", 2, 1, |x, t| vec![x[0] - t[0], x[1] - t[0] * t[0] - 0.3 * t[0] * x[0]]);
    let cfg = BuildConfig { interp: Interp::Cubic, margin: 0.05, psi_radius: Some(1.0) };
    for j in 0..3 {
        let t = build_tj(&g, &KernelSpec::hilbert(0.5), &grid, j, &cfg).unwrap();
        let one = vec![1.0; grid.len()];
        assert!(t.apply(&one).iter().all(|v| v.abs() < 1e-12));
        assert!(t.row_sums().iter().all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn leaving_the_box_is_reported() {
    let grid = Grid::new(1, 1.0, 64).unwrap();
    let cfg = BuildConfig { interp: Interp::Linear, margin: 0.05, psi_radius: Some(2.0) };
    assert!(matches!(build_tj(&bent(), &KernelSpec::hilbert(0.5), &grid, 0, &cfg), Err(OplabError::LeavesBox { .. })));
    assert!(matches!(Grid::new(1, 1.0, 100), Err(OplabError::Grid(_))));
    let spectral = BuildConfig { interp: Interp::Spectral, ..cfg };
    assert!(build_tj(&bent(), &KernelSpec::hilbert(0.5), &grid, 0, &spectral).is_err());
}

#[test]
fn adjoint_and_transpose_norms_agree() {
    let grid = Grid::new(1, 4.0, 512).unwrap();
    let cfg = BuildConfig { interp: Interp::Cubic, margin: 0.05, psi_radius: Some(1.0) };
    let t = build_tj(&bent(), &KernelSpec::hilbert(0.5), &grid, 1, &cfg).unwrap();
    let a = op_norm(&t);
    let b = op_norm(&t.transpose().unwrap());
    assert!((a - b).abs() < 1e-5 * a, "{a} {b}");
    // the explicit transpose is the adjoint of `apply`
    let f = grid.sample(|x| (3.0 * x[0]).sin());
    let g = grid.sample(|x| (-x[0] * x[0]).exp());
    let lhs: f64 = t.apply(&f).iter().zip(&g).map(|(x, y)| x * y).sum();
    let rhs: f64 = f.iter().zip(t.apply_adjoint(&g)).map(|(x, y)| x * y).sum();
    assert!((lhs - rhs).abs() < 1e-10);
    let est = power_norm(grid.len(), &|v| t.apply(v), &|v| t.apply_adjoint(v), PowerIteration::default());
    assert!(est.converged);
}

#[test]
fn adjoint_defect_decays_like_two_to_minus_j() {
    let grid = Grid::new(1, 4.0, 8192).unwrap();
    let cfg = BuildConfig { interp: Interp::Cubic, margin: 0.05, psi_radius: Some(1.0) };
    let k = KernelSpec::hilbert(0.5);
    let defects: Vec<f64> = (1..=5)
        .map(|j| {
            let t = build_tj(&bent(), &k, &grid, j, &cfg).unwrap();
            let tp = build_tj_prime(&bent(), &k, &grid, j, &cfg).unwrap();
            op_norm(&t.transpose().unwrap().sub(&tp).unwrap())
        })
        .collect();
    let s = log2_slope(&defects);
    assert!((s + 1.0).abs() < 0.25, "{defects:?} slope {s}");
}

#[test]
fn parabola_pieces_are_uniformly_bounded_and_almost_orthogonal() {
    let grid = Grid::new(2, 1.0, 128).unwrap();
    let k = KernelSpec::hilbert(0.5);
    for interp in [Interp::Cubic, Interp::Spectral] {
        let cfg = BuildConfig { interp, margin: 0.0, psi_radius: None };
        let t = orthogonality_decay(&NumericGamma::parabola(), &k, &grid, 5, &cfg, None).unwrap();
        let norms: Vec<f64> = t.tj_norms.iter().map(|p| p.1).collect();
        let (mx, mn) = (norms.iter().cloned().fold(0.0, f64::max), norms.iter().cloned().fold(f64::INFINITY, f64::min));
        assert!(mx / mn < 1.5, "{norms:?}");
        // diagonal: ‖T_j T_j*‖ = ‖T_j‖²
        for r in t.rows.iter().filter(|r| r.gap == 0) {
            assert!((r.ti_tj_star - norms[r.i as usize].powi(2)).abs() < 1e-9 * r.ti_tj_star);
        }
        assert!(t.epsilon > 0.0, "{t:?}");
        assert!(t.by_gap.windows(2).skip(1).all(|w| w[1].1 < w[0].1), "{:?}", t.by_gap);
    }
}

#[test]
fn straight_line_control_shows_no_decay() {
    let grid = Grid::new(2, 1.0, 64).unwrap();
    let cfg = BuildConfig { interp: Interp::Spectral, margin: 0.0, psi_radius: None };
    let mask = |xi: &[f64]| xi[0] == 0.0;
    let t = orthogonality_decay(&NumericGamma::line(), &KernelSpec::hilbert(0.5), &grid, 4, &cfg, Some(&mask)).unwrap();
    assert!(t.by_gap.iter().all(|p| p.1 == 0.0));
}

#[test]
fn maximal_function_of_a_constant() {
    let grid = Grid::new(2, 4.0, 32).unwrap();
    let cfg = BuildConfig { interp: Interp::Linear, margin: 0.0, psi_radius: Some(1.0) };
    let radii = [grid.spacing(0), 0.1, 0.3, 0.5];
    let rep = maximal_fn(&NumericGamma::parabola(), &vec![1.0; grid.len()], &grid, &radii, &cfg).unwrap();
    for (i, v) in rep.values.iter().enumerate() {
        let psi = chi(grid.coord(i).iter().map(|x| x * x).sum::<f64>().sqrt());
        assert!((v - unit_ball_volume(1) * psi).abs() < 1e-12);
    }
    // a point-mass column has a finite L² ratio
    let col = grid.sample(|x| if x[0].abs() < 0.07 && x[1].abs() < 0.07 { 1.0 } else { 0.0 });
    let rep = maximal_fn(&NumericGamma::parabola(), &col, &grid, &radii, &cfg).unwrap();
    assert!(rep.l2_ratio.is_finite() && rep.l2_ratio > 0.0);
}

#[test]
fn mollifier_mass_defect_decays() {
    let m = Mollifier::default();
    let x = [0.6, 0.3];
    let d: Vec<f64> = (2..=7).map(|j| mollifier_defect(None, &m, &x, j).unwrap().abs()).collect();
    assert!(log2_slope(&d) <= -0.8, "{d:?}");
    // where 𝒳 ≡ 1 nearby the defect vanishes
    assert!(mollifier_defect(None, &m, &[0.1, 0.0], 3).unwrap().abs() < 1e-12);
    // Θ-adapted version on the Heisenberg model
    let frame = curvkit::freegeom::FreeFrame::group(curvkit::nilpotent::NilpotentAlgebra::build(2, &[1, 1], 2).unwrap()).unwrap();
    let m3 = Mollifier { a: 0.3, cutoff_radius: 0.4, nodes_per_axis: 16 };
    let x = [0.25, 0.1, 0.05];
    let d: Vec<f64> = (2..=6).map(|j| mollifier_defect(Some(&frame), &m3, &x, j).unwrap().abs()).collect();
    assert!(log2_slope(&d) <= -0.8, "{d:?}");
}

#[test]
fn mollifier_differences_are_uniformly_bounded() {
    let grid = Grid::new(2, 4.0, 256).unwrap();
    let m = Mollifier { a: 0.5, cutoff_radius: 1.0, nodes_per_axis: 24 };
    let s: Vec<DiscreteOp> = (0..=4).map(|j| build_sj(&grid, &m, j)).collect();
    // interior rows integrate to 𝒳²
    let one = vec![1.0; grid.len()];
    let centre = grid.flat(&[128, 128]);
    assert!((s[2].apply(&one)[centre] - 1.0).abs() < 1e-12);
    let mut bounds = Vec::new();
    for j in 0..4 {
        let r = s[j + 1].sub(&s[j]).unwrap();
        bounds.push(r.row_abs_sums().into_iter().fold(0.0, f64::max));
    }
    assert!(bounds.iter().all(|b| *b < 2.5), "{bounds:?}");
    // S_j f → 𝒳²f in sup norm for continuous f
    let f = grid.sample(|x| (x[0] + 2.0 * x[1]).cos());
    let target: Vec<f64> = (0..grid.len()).map(|i| m.cutoff(&grid.coord(i)).powi(2) * f[i]).collect();
    let errs: Vec<f64> = s.iter().map(|op| op.apply(&f).iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn pushforward_of_a_square() {
    let cfg = PushforwardConfig::default();
    let rep = pushforward_density(&|t: &[f64]| vec![t[0] * t[0]], 1, 1, &|_| 1.0, &cfg).unwrap();
    let l1 = l1_to_density(&rep.mass_edges, &rep.mass_heights, &|y: f64| y.powf(-0.5));
    assert!(l1 / 2.0 < 0.02, "{l1}");
    assert!(rep.exponent >= 0.45, "{}", rep.exponent);
    assert!(!rep.degenerate);
    assert!((rep.total_mass - 2.0).abs() < 1e-9);
}

#[test]
fn pushforward_of_identity_and_of_a_point() {
    let cfg = PushforwardConfig { samples: 200_000, bins: 256, mass_bins: 0, domain: (0.0, 1.0), ..Default::default() };
    let rep = pushforward_density(&|t: &[f64]| vec![t[0]], 1, 1, &|_| 1.0, &cfg).unwrap();
    assert!((rep.exponent - 1.0).abs() < 0.1, "{}", rep.exponent);
    let rep = pushforward_density(&|_: &[f64]| vec![0.5], 1, 1, &|_| 1.0, &cfg).unwrap();
    assert!(rep.degenerate);
}

#[test]
fn parabola_gamma_tilde_density_is_stable_in_j() {
    let g = NumericGamma::parabola();
    let cfg = PushforwardConfig { samples: 400_000, bins: 128, mass_bins: 0, range: (-4.0, 4.0), z_range: (0.0625, 1.0), ..Default::default() };
    let exps: Vec<f64> = (0..3)
        .map(|j| {
            let map = gamma_tilde_numeric(&g, 2, vec![0.0, 0.0], j, vec![1, 2]);
            let rep = pushforward_density(&map, 4, 2, &|_| 1.0, &cfg).unwrap();
            assert!(!rep.degenerate);
            rep.exponent
        })
        .collect();
    assert!(exps.iter().all(|e| *e > 0.2), "{exps:?}");
    assert!(exps.windows(2).all(|w| (w[0] - w[1]).abs() < 0.1), "{exps:?}");
}

#[test]
fn smoothing_dichotomy() {
    let kb = KernelSpec::bump(1, 0.25).unwrap();
    let delta_list: Vec<f64> = (1..=8).map(|i| 2f64.powi(-i)).collect();
    let flat = NumericGamma::translation("flat", 2, 1, |t| vec![-t[0], 0.0]);
    let cfg = SmoothingConfig { s_list: vec![0.0, 0.5], delta_list: delta_list.clone(), ..Default::default() };
    let rep = smoothing_probe(&flat, &kb, &cfg).unwrap();
    assert_eq!(rep.flat_axes, vec![1]);
    let half = rep.slopes.iter().find(|s| s.s == 0.5).unwrap();
    // windowed lower bound: slope k − Ns
    assert!((half.windowed_slope.unwrap() + 0.5).abs() < 0.075, "{half:?}");
    // full ratio: ‖A‖₂ ~ δ^k, so slope k/2 − Ns
    assert!((half.slope + 1.0).abs() < 0.1, "{half:?}");
    // s = 0: ratio ≤ ‖T‖ = ∫K = 1
    assert!(rep.rows.iter().filter(|r| r.s == 0.0).all(|r| r.ratio <= 1.0 + 1e-9));
    // curved: bounded (and decreasing) for small s
    let cfg = SmoothingConfig { s_list: vec![0.0, 0.1], n_aniso: 1, delta_list, ..Default::default() };
    let rep = smoothing_probe(&NumericGamma::parabola(), &kb, &cfg).unwrap();
    assert!(rep.flat_axes.is_empty());
    for s in [0.0, 0.1] {
        let r: Vec<f64> = rep.rows.iter().filter(|r| r.s == s).map(|r| r.ratio).collect();
        assert!(r.iter().all(|v| *v < 1.1), "{r:?}");
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    }
}

#[test]
fn smoothing_rejects_non_normal_form() {
    let kb = KernelSpec::bump(1, 0.25).unwrap();
    let diag = NumericGamma::translation("diagonal", 2, 1, |t| vec![t[0], t[0]]);
    assert!(matches!(smoothing_probe(&diag, &kb, &SmoothingConfig::default()), Err(OplabError::Precondition(_))));
    assert!(smoothing_probe(&NumericGamma::parabola(), &KernelSpec::hilbert(0.5), &SmoothingConfig::default()).is_err());
}

#[test]
fn experiments_are_bitwise_reproducible() {
    let run = || {
        let cfg = PushforwardConfig { samples: 100_000, ..Default::default() };
        let p = pushforward_density(&|t: &[f64]| vec![t[0] * t[0]], 1, 1, &|_| 1.0, &cfg).unwrap();
        let grid = Grid::new(2, 1.0, 32).unwrap();
        let d = orthogonality_decay(&NumericGamma::parabola(), &KernelSpec::hilbert(0.5), &grid, 3, &BuildConfig { interp: Interp::Cubic, margin: 0.0, psi_radius: None }, None).unwrap();
        serde_json::to_string(&(p, d)).unwrap()
    };
    let a = run();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = one.install(run);
    let c = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(run);
    assert_eq!(a, b);
    assert_eq!(a, c);
}
