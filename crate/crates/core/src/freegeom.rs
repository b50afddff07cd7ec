//! Free vector fields: lifting to a free frame, Θ-coordinates,
//! quasi-distances, local dilations and the alternating maps `Γ̃`.
//!
//! The lift realises `M ⊂ N × ℝⁿ` as the graph `{(u, F(u))}` with
//! `F(u) = exp(Σ u_I X_I)(0)`, so the group coordinates `u` are coordinates
//! on `M`.  Projecting `U_i = Y_i ⊕ X_i` onto `TM` along a fixed complement
//! `S ⊂ ker π̃_*` gives `X̃_i = Y_i − s_i(u)` with `DF·X̃_i = X_i ∘ F`.

use std::sync::{Arc, OnceLock};

use num::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::curvature::{gamma_inverse, GammaFamily};
use crate::jets::{compose_map, Echelon, Jet, JetContext, JetError, MultiIndex, Polynomial, Q};
use crate::nilpotent::{NilpotentAlgebra, NilpotentError, Tree};
use crate::vfields::{bracket, flow_exp, pushforward, VField, VFieldError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FreeGeomError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Field(#[from] VFieldError),
    #[error(transparent)]
    Algebra(#[from] NilpotentError),
    #[error("brackets of degree ≤ {m} span only {rank} of {n} directions at the base point")]
    NotSpanning { m: u32, rank: usize, n: usize },
    #[error("input fields have jet order {have}, need {need}")]
    InsufficientOrder { have: u32, need: u32 },
    #[error("point outside the chart (|·|∞ = {norm:.3} > {radius})")]
    OutsideChart { norm: f64, radius: f64 },
    #[error("Newton iteration for Θ did not converge (residual {0:.3e})")]
    NoConvergence(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, FreeGeomError>;

/// Default validity radius of Θ-charts (sup norm, in frame coordinates).
pub const DEFAULT_CHART_RADIUS: f64 = 0.5;

/// Constant used for the sampled key estimate
/// `ρ(Θ_x(y₂) − Θ_x(y₁)) ≤ C(d(y₁,y₂) + d(y₁,y₂)^{1/m} d(x,y₁)^{1−1/m})`.
pub const KEY_ESTIMATE_CONSTANT: f64 = 8.0;

/// Evaluate the bracket word of a basis element on concrete fields.
pub fn eval_tree(tree: &Tree, gens: &[VField]) -> Result<VField> {
    Ok(match tree {
        Tree::Leaf(i) => gens[*i].clone(),
        Tree::Node(a, b) => bracket(&eval_tree(a, gens)?, &eval_tree(b, gens)?)?,
    })
}

/// Vector fields `X̃_1..X̃_p` on `ℝ^d` that are free up to order `m`.
#[derive(Debug)]
pub struct FreeFrame {
    alg: NilpotentAlgebra,
    n: usize,
    ctx: Arc<JetContext>,
    fields: Vec<VField>,
    basic: Vec<VField>,
    projection: Vec<Jet>,
    complement: Vec<usize>,
    chart: Vec<Jet>,
    chart_fields: Vec<VField>,
    chart_radius: f64,
    flow: OnceLock<FlowJets>,
}

#[derive(Debug)]
struct FlowJets {
    map: Vec<Jet<f64>>,
    jac: Vec<Vec<Jet<f64>>>,
}

/// Exact checks of a lift against the fields it came from.
#[derive(Clone, Debug, Serialize)]
pub struct LiftReport {
    pub d: usize,
    pub n: usize,
    /// `π_*(X̃_i) = X_i` to the recorded order for every `i`.
    pub pushforward_exact: bool,
    pub pushforward_valid_order: i32,
    /// In the `(x, z)` chart the `∂/∂x` components equal `X_i(x)`.
    pub chart_form: bool,
    pub rank: usize,
    /// Number of pairs `(I, J)` with `|I| + |J| ≤ m` checked, and mismatches.
    pub structure_pairs: usize,
    pub structure_mismatches: Vec<String>,
}

impl LiftReport {
    pub fn ok(&self) -> bool {
        self.pushforward_exact && self.chart_form && self.rank == self.d && self.structure_mismatches.is_empty()
    }
}

fn zero_below(j: &Jet, upto: i32) -> bool {
    j.terms().all(|(a, c)| a.degree() as i32 > upto || c.is_zero())
}

/// `1/f` for a jet with nonzero constant term.
pub fn jet_reciprocal(f: &Jet) -> Result<Jet> {
    let c = f.constant_term();
    if c.is_zero() {
        return Err(JetError::SingularLinearPart.into());
    }
    let ctx = f.ctx();
    let inv_c = Q::one() / &c;
    // f = c(1 + e), 1/f = c⁻¹ Σ (−e)^k
    let e = f.scale(&inv_c).try_sub(&Jet::one(ctx))?;
    let mut acc = Jet::one(ctx);
    let mut pw = Jet::one(ctx);
    for _ in 0..ctx.order() {
        pw = pw.try_mul(&e.neg())?;
        if pw.is_zero() {
            break;
        }
        acc = acc.try_add(&pw)?;
    }
    Ok(acc.scale(&inv_c).with_valid_order(f.valid_order()))
}

/// Solve `A x = b` for a square jet matrix whose constant part is invertible.
pub fn solve_jet_system(a: &[Vec<Jet>], b: &[Jet]) -> Result<Vec<Jet>> {
    let n = a.len();
    let mut m: Vec<Vec<Jet>> = a.iter().zip(b).map(|(row, bi)| row.iter().cloned().chain(std::iter::once(bi.clone())).collect()).collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].constant_term().is_zero()).ok_or(FreeGeomError::Jet(JetError::SingularLinearPart))?;
        m.swap(col, piv);
        let inv = jet_reciprocal(&m[col][col])?;
        for c in col..=n {
            m[col][c] = m[col][c].try_mul(&inv)?;
        }
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for c in col..=n {
                let t = f.try_mul(&m[col][c])?;
                m[r][c] = m[r][c].try_sub(&t)?;
            }
        }
    }
    Ok(m.into_iter().map(|row| row[n].clone()).collect())
}

fn u_ctx(d: usize, order: u32) -> Arc<JetContext> {
    JetContext::numbered(&[("u", d)], order)
}

impl FreeFrame {
    /// The left-invariant frame `Y_1..Y_p` of the group `N` itself.
    pub fn group(alg: NilpotentAlgebra) -> Result<Self> {
        let d = alg.dim();
        let order = alg.m() + 1;
        let ctx = u_ctx(d, order);
        let fields: Vec<VField> = (0..alg.p())
            .map(|i| VField::new(&ctx, d, alg.left_invariant_field(alg.generator_index(i), &ctx)))
            .collect::<std::result::Result<_, _>>()?;
        let basic = alg.basis().iter().map(|h| eval_tree(&h.tree, &fields)).collect::<Result<Vec<_>>>()?;
        let id: Vec<Jet> = (0..d).map(|i| Jet::var(&ctx, i)).collect();
        Ok(FreeFrame {
            alg,
            n: d,
            ctx,
            chart_fields: fields.clone(),
            fields,
            basic,
            projection: id.clone(),
            complement: (0..d).collect(),
            chart: id,
            chart_radius: DEFAULT_CHART_RADIUS,
            flow: OnceLock::new(),
        })
    }

    pub fn algebra(&self) -> &NilpotentAlgebra {
        &self.alg
    }
    pub fn dim(&self) -> usize {
        self.alg.dim()
    }
    /// Dimension of the space the lifted fields project to.
    pub fn base_dim(&self) -> usize {
        self.n
    }
    pub fn ctx(&self) -> &Arc<JetContext> {
        &self.ctx
    }
    /// `X̃_i` in the group coordinates `u` of `M`.
    pub fn fields(&self) -> &[VField] {
        &self.fields
    }
    /// `X̃_I` for the basis words `I`.
    pub fn basic_fields(&self) -> &[VField] {
        &self.basic
    }
    /// `π(u) = F(u)`.
    pub fn projection(&self) -> &[Jet] {
        &self.projection
    }
    /// Basis indices whose `Y_I(0)` span the complement `S`.
    pub fn complement(&self) -> &[usize] {
        &self.complement
    }
    /// `ψ(u) = (F(u), u_{C′})`: coordinates `(x, z)` with `π(x, z) = x`.
    pub fn chart(&self) -> &[Jet] {
        &self.chart
    }
    /// `X̃_i` written in the `(x, z)` chart.
    pub fn chart_fields(&self) -> &[VField] {
        &self.chart_fields
    }
    pub fn chart_radius(&self) -> f64 {
        self.chart_radius
    }
    pub fn with_chart_radius(mut self, r: f64) -> Self {
        self.chart_radius = r;
        self
    }

    /// Exact checks: `π_*X̃_i = X_i`, chart form, rank `d` and structure
    /// constants for `|I| + |J| ≤ m` at the base point.
    pub fn verify(&self, original: &[VField]) -> Result<LiftReport> {
        let n = self.n;
        let d = self.dim();
        let mut push_ok = true;
        let mut valid = i32::MAX;
        let mut chart_ok = true;
        for (i, xt) in self.fields.iter().enumerate() {
            let dfx: Vec<Jet> = self.projection.iter().map(|f| xt.apply(f)).collect::<std::result::Result<_, _>>()?;
            let target = compose_map(original[i].comps(), &self.projection)?;
            for (a, b) in dfx.iter().zip(&target) {
                let diff = a.try_sub(b)?;
                valid = valid.min(diff.valid_order());
                push_ok &= zero_below(&diff, diff.valid_order());
            }
            // chart form: first n components equal X_i(x) in the chart coordinates
            let cf = &self.chart_fields[i];
            let map: Vec<usize> = (0..n).collect();
            for j in 0..n {
                let want = original[i].comp(j).retruncate(&original[i].ctx().with_order(self.ctx.order()))?.embed(&self.ctx, &map)?;
                let diff = cf.comp(j).try_sub(&want)?;
                chart_ok &= zero_below(&diff, diff.valid_order().min(cf.comp(j).valid_order()));
            }
        }
        let mut e = Echelon::<Q>::new(d);
        for f in &self.basic {
            e.insert(&f.at_base());
        }
        let mut pairs = 0;
        let mut mismatches = Vec::new();
        let basis = self.alg.basis();
        for i in 0..basis.len() {
            for j in (i + 1)..basis.len() {
                if basis[i].degree + basis[j].degree > self.alg.m() {
                    continue;
                }
                pairs += 1;
                let lhs = bracket(&self.basic[i], &self.basic[j])?.at_base();
                let mut rhs = vec![Q::zero(); d];
                for (k, c) in self.alg.bracket(i, j) {
                    for (r, v) in rhs.iter_mut().zip(self.basic[k].at_base()) {
                        *r += &c * v;
                    }
                }
                if lhs != rhs {
                    mismatches.push(format!("[{},{}]", basis[i].tree, basis[j].tree));
                }
            }
        }
        Ok(LiftReport {
            d,
            n,
            pushforward_exact: push_ok,
            pushforward_valid_order: if valid == i32::MAX { self.ctx.order() as i32 } else { valid },
            chart_form: chart_ok,
            rank: e.rank(),
            structure_pairs: pairs,
            structure_mismatches: mismatches,
        })
    }

    fn flow_jets(&self) -> Result<&FlowJets> {
        if let Some(f) = self.flow.get() {
            return Ok(f);
        }
        let d = self.dim();
        let order = self.ctx.order().max(self.alg.m());
        let ctx = JetContext::numbered(&[("x", d), ("u", d)], order);
        let map: Vec<usize> = (0..d).collect();
        let mut comps = vec![Jet::zero(&ctx); d];
        for (i, f) in self.basic.iter().enumerate() {
            let ui = Jet::var(&ctx, d + i);
            for j in 0..d {
                let c = f.comp(j).retruncate(&self.ctx.with_order(order)).unwrap_or_else(|_| f.comp(j).clone()).embed(&ctx, &map)?;
                comps[j] = comps[j].try_add(&c.try_mul(&ui)?)?;
            }
        }
        let flow = flow_exp(&VField::new(&ctx, d, comps)?)?;
        let map_f: Vec<Jet<f64>> = flow.iter().map(|j| j.to_f64_jet()).collect();
        let jac = flow.iter().map(|j| (0..d).map(|i| j.partial(d + i).to_f64_jet()).collect()).collect();
        let _ = self.flow.set(FlowJets { map: map_f, jac });
        Ok(self.flow.get().expect("just set"))
    }

    fn check_chart(&self, p: &[f64]) -> Result<()> {
        let norm = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(norm <= self.chart_radius) {
            return Err(FreeGeomError::OutsideChart { norm, radius: self.chart_radius });
        }
        Ok(())
    }

    /// `exp(Σ u_I X̃_I)(x)` from the Taylor polynomial of the flow.
    pub fn exp_point(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let fl = self.flow_jets()?;
        let mut pt = x.to_vec();
        pt.extend_from_slice(u);
        Ok(fl.map.iter().map(|j| j.eval(&pt)).collect())
    }

    /// `∂ exp(Σ u_I X̃_I)(x) / ∂u` (rows: output coordinates).
    pub fn exp_jacobian(&self, x: &[f64], u: &[f64]) -> Result<Vec<Vec<f64>>> {
        let fl = self.flow_jets()?;
        let mut pt = x.to_vec();
        pt.extend_from_slice(u);
        Ok(fl.jac.iter().map(|row| row.iter().map(|j| j.eval(&pt)).collect()).collect())
    }

    /// `Θ_x(y)`: the `u` with `exp(Σ u_I X̃_I)(x) = y` (Newton iteration).
    pub fn theta(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_chart(x)?;
        self.check_chart(y)?;
        let d = self.dim();
        let fl = self.flow_jets()?;
        let mut u = vec![0.0; d];
        let mut res = f64::INFINITY;
        for _ in 0..60 {
            let mut pt = x.to_vec();
            pt.extend_from_slice(&u);
            let r: Vec<f64> = fl.map.iter().zip(y).map(|(j, yi)| j.eval(&pt) - yi).collect();
            res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if res < 1e-14 {
                return Ok(u);
            }
            let jm: Vec<Vec<f64>> = fl.jac.iter().map(|row| row.iter().map(|j| j.eval(&pt)).collect()).collect();
            let step = solve_dense(jm, r).ok_or(FreeGeomError::NoConvergence(res))?;
            for (ui, s) in u.iter_mut().zip(&step) {
                *ui -= s;
            }
        }
        if res < 1e-10 {
            Ok(u)
        } else {
            Err(FreeGeomError::NoConvergence(res))
        }
    }

    /// `d(x, y) = ρ(Θ_x(y))`.
    pub fn quasi_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.alg.norm_rho(&self.theta(x, y)?))
    }

    /// `δ_r^x(y) = exp(Σ r^{|I|} u_I X̃_I)(x)` with `u = Θ_x(y)`.
    pub fn local_dilate(&self, x: &[f64], y: &[f64], r: f64) -> Result<Vec<f64>> {
        let u = self.theta(x, y)?;
        let ur = self.alg.dilate(&u, r)?;
        self.exp_point(x, &ur)
    }
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

/// Lift `X_1..X_p` (fields at the origin of `ℝⁿ`, degrees `a_i`) to a frame
/// on `ℝ^d`, `d = dim N_m^{a}`, free up to order `m`.
///
/// The input jets must have order at least `2m + 1` so that all bracket words
/// are known to the order the lift needs.
pub fn lift_free(inputs: &[VField], degrees: &[u32], m: u32) -> Result<FreeFrame> {
    let p = inputs.len();
    let alg = NilpotentAlgebra::build(p, degrees, m)?;
    let d = alg.dim();
    let xctx = inputs.first().ok_or(FreeGeomError::Invalid("no fields".into()))?.ctx().clone();
    let n = inputs[0].dim();
    let order = m + 1;
    if xctx.order() < order + m {
        return Err(FreeGeomError::InsufficientOrder { have: xctx.order(), need: order + m });
    }
    // X_I on ℝⁿ
    let words: Vec<VField> = alg.basis().iter().map(|h| eval_tree(&h.tree, inputs)).collect::<Result<_>>()?;
    // F(u) = exp(Σ u_I X_I)(0)
    let xu = JetContext::numbered(&[("x", n), ("u", d)], order);
    let map: Vec<usize> = (0..n).collect();
    let mut comps = vec![Jet::zero(&xu); n];
    for (i, w) in words.iter().enumerate() {
        let ui = Jet::var(&xu, n + i);
        for j in 0..n {
            let c = w.comp(j).retruncate(&xctx.with_order(order))?.embed(&xu, &map)?;
            comps[j] = comps[j].try_add(&c.try_mul(&ui)?)?;
        }
    }
    let flow = flow_exp(&VField::new(&xu, n, comps)?)?;
    let uctx = u_ctx(d, order);
    let mut inner: Vec<Jet> = vec![Jet::zero(&uctx); n];
    inner.extend((0..d).map(|i| Jet::var(&uctx, i)));
    let f = compose_map(&flow, &inner)?;
    // complement S: pivot columns of DF(0)
    let mut ech = Echelon::<Q>::new(n);
    let mut cset = Vec::new();
    for i in 0..d {
        let col: Vec<Q> = f.iter().map(|fj| fj.get(&MultiIndex::unit(d, i))).collect();
        if ech.insert(&col) {
            cset.push(i);
        }
    }
    if cset.len() < n {
        return Err(FreeGeomError::NotSpanning { m, rank: cset.len(), n });
    }
    let df: Vec<Vec<Jet>> = f.iter().map(|fj| (0..d).map(|i| fj.partial(i)).collect()).collect();
    let df_c: Vec<Vec<Jet>> = df.iter().map(|row| cset.iter().map(|&c| row[c].clone()).collect()).collect();
    let mut fields = Vec::with_capacity(p);
    for (i, input) in inputs.iter().enumerate() {
        let y = alg.left_invariant_field(alg.generator_index(i), &uctx);
        let xi_f = compose_map(&input.comps().iter().map(|c| c.retruncate(&xctx.with_order(order))).collect::<std::result::Result<Vec<_>, _>>()?, &f)?;
        let mut r = Vec::with_capacity(n);
        for j in 0..n {
            let mut s = Jet::zero(&uctx);
            for k in 0..d {
                s = s.try_add(&df[j][k].try_mul(&y[k])?)?;
            }
            r.push(s.try_sub(&xi_f[j])?);
        }
        let sigma = solve_jet_system(&df_c, &r)?;
        let mut comps = y;
        for (pos, &c) in cset.iter().enumerate() {
            comps[c] = comps[c].try_sub(&sigma[pos])?;
        }
        fields.push(VField::new(&uctx, d, comps)?);
    }
    let basic = alg.basis().iter().map(|h| eval_tree(&h.tree, &fields)).collect::<Result<Vec<_>>>()?;
    let mut chart = f.clone();
    chart.extend((0..d).filter(|i| !cset.contains(i)).map(|i| Jet::var(&uctx, i)));
    let chart_fields = fields.iter().map(|x| pushforward(&chart, x)).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(FreeFrame {
        alg,
        n,
        ctx: uctx,
        fields,
        basic,
        projection: f,
        complement: cset,
        chart,
        chart_fields,
        chart_radius: DEFAULT_CHART_RADIUS,
        flow: OnceLock::new(),
    })
}

/// `Γ̃(x, τ) = γ⁻¹_{t^{2N}} ∘ γ_{t^{2N−1}} ∘ ⋯ ∘ γ⁻¹_{t²} ∘ γ_{t¹}(x)` as jets in
/// `(x, t¹, …, t^{2N})`.
pub fn gamma_tilde(gamma: &GammaFamily, nn: usize) -> Result<Vec<Jet>> {
    let n = gamma.n();
    let k = gamma.k();
    let inv = gamma_inverse(gamma).map_err(|e| FreeGeomError::Invalid(e.to_string()))?;
    let factors = 2 * nn;
    let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    for i in 1..=factors {
        for c in 1..=k {
            names.push(if k == 1 { format!("t{i}") } else { format!("t{i}_{c}") });
        }
    }
    let ctx = JetContext::new(&names, gamma.order())?;
    let mut cur: Vec<Jet> = (0..n).map(|i| Jet::var(&ctx, i)).collect();
    for f in 0..factors {
        let mut inner = cur.clone();
        inner.extend((0..k).map(|c| Jet::var(&ctx, n + f * k + c)));
        let g = if f % 2 == 0 { gamma.jets() } else { inv.jets() };
        cur = compose_map(g, &inner)?;
    }
    Ok(cur)
}

/// Translation-invariant model `γ(x, t) = x · exp(Σ_i t_i^{a_i} Y_i + Σ_I ε_I t_1^{|I|+1} Y_I)`
/// on a free nilpotent group (`k = p`); `ε = 0` is the homogeneous group case.
#[derive(Clone, Debug)]
pub struct GroupModel {
    alg: NilpotentAlgebra,
    eps: Vec<Q>,
    group_poly: Vec<Polynomial>,
}

/// Row of [`GroupModel::uniform_jacobian_table`].
#[derive(Clone, Debug, Serialize)]
pub struct JacobianRow {
    pub j: u32,
    pub min_abs: f64,
    pub max_abs: f64,
    pub samples: usize,
}

impl GroupModel {
    pub fn new(alg: NilpotentAlgebra, eps: Option<Vec<Q>>) -> Result<Self> {
        let d = alg.dim();
        let eps = eps.unwrap_or_else(|| vec![Q::zero(); d]);
        if eps.len() != d {
            return Err(FreeGeomError::Invalid("perturbation length must equal dim".into()));
        }
        let group_poly = alg.product_polynomials().iter().map(Polynomial::from_jet).collect();
        Ok(GroupModel { alg, eps, group_poly })
    }
    pub fn algebra(&self) -> &NilpotentAlgebra {
        &self.alg
    }
    pub fn k(&self) -> usize {
        self.alg.p()
    }

    /// `x·y` on polynomial coordinates.
    fn mul(&self, x: &[Polynomial], y: &[Polynomial]) -> Vec<Polynomial> {
        let mut subs: Vec<Polynomial> = y.to_vec();
        subs.extend_from_slice(x);
        self.group_poly.iter().map(|p| p.substitute(&subs)).collect()
    }

    /// Exponent `A(t)` in `nv` variables, `t_i` at offset `off`.
    fn exponent(&self, nv: usize, off: usize, sign: i64) -> Vec<Polynomial> {
        let d = self.alg.dim();
        let s = Q::from_integer(sign.into());
        let mut a = vec![Polynomial::zero(nv); d];
        for i in 0..self.alg.p() {
            let g = self.alg.generator_index(i);
            a[g] = a[g].add(&Polynomial::var(nv, off + i).pow(self.alg.degrees()[i]).scale(&s));
        }
        for (idx, e) in self.eps.iter().enumerate() {
            if !e.is_zero() {
                let deg = self.alg.basis()[idx].degree + 1;
                a[idx] = a[idx].add(&Polynomial::var(nv, off).pow(deg).scale(&(e * &s)));
            }
        }
        a
    }

    /// The family as a [`GammaFamily`] in `(x1..xd, t1..tp)`.
    pub fn family(&self, order: u32) -> Result<GammaFamily> {
        let d = self.alg.dim();
        let k = self.k();
        let nv = d + k;
        let x: Vec<Polynomial> = (0..d).map(|i| Polynomial::var(nv, i)).collect();
        let a = self.exponent(nv, d, 1);
        let polys = self.mul(&x, &a);
        GammaFamily::from_polynomials(d, k, polys, vec![Q::zero(); d], order).map_err(|e| FreeGeomError::Invalid(e.to_string()))
    }

    /// `Γ̃^{(j)}(x, τ) = δ^x_{2^j}(Γ̃(x, 2^{−j}τ))` as exact polynomials in
    /// `τ ∈ ℝ^{2N·p}` at a fixed rational point `x`.
    pub fn gamma_tilde_scaled(&self, x: &[Q], nn: usize, j: u32) -> Vec<Polynomial> {
        let d = self.alg.dim();
        let k = self.k();
        let nv = 2 * nn * k;
        let xs: Vec<Polynomial> = x.iter().map(|c| Polynomial::constant(nv, c.clone())).collect();
        let scale = Q::new(1.into(), num::BigInt::from(2).pow(j));
        let mut cur = xs.clone();
        for f in 0..2 * nn {
            let sign = if f % 2 == 0 { 1 } else { -1 };
            let a: Vec<Polynomial> = self
                .exponent(nv, f * k, sign)
                .iter()
                .map(|p| {
                    // τ ↦ 2^{−j} τ
                    let subs: Vec<Polynomial> = (0..nv).map(|v| Polynomial::var(nv, v).scale(&scale)).collect();
                    p.substitute(&subs)
                })
                .collect();
            cur = self.mul(&cur, &a);
        }
        // δ^x_{2^j}(y) = x · δ_{2^j}(x⁻¹ y)
        let xinv: Vec<Polynomial> = x.iter().map(|c| Polynomial::constant(nv, -c.clone())).collect();
        let rel = self.mul(&xinv, &cur);
        let two_j = Q::from_integer(num::BigInt::from(2).pow(j));
        let dil: Vec<Polynomial> = rel.iter().zip(self.alg.basis()).map(|(p, h)| p.scale(&num::pow(two_j.clone(), h.degree as usize))).collect();
        let _ = d;
        self.mul(&xs, &dil)
    }

    /// `J_ξ = det(∂Γ̃_i/∂τ_{ξ_l})` as a polynomial.
    pub fn jacobian(&self, map: &[Polynomial], xi: &[usize]) -> Polynomial {
        let m: Vec<Vec<Polynomial>> = map.iter().map(|g| xi.iter().map(|&c| g.partial(c)).collect()).collect();
        poly_det(&m)
    }

    /// First `(ξ, β)` (in `(|β|, β, ξ)` order) with `∂^β J_ξ(0) ≠ 0` for the
    /// unscaled `Γ̃` at the identity.
    pub fn witness(&self, nn: usize) -> Option<(Vec<usize>, Vec<u32>, Q)> {
        let d = self.alg.dim();
        let map = self.gamma_tilde_scaled(&vec![Q::zero(); d], nn, 0);
        let ncols = 2 * nn * self.k();
        let mut best: Option<(u32, Vec<u32>, Vec<usize>, Q)> = None;
        for xi in crate::curvature::subsets(ncols, d) {
            let j = self.jacobian(&map, &xi);
            for (e, c) in j.terms() {
                let deg: u32 = e.iter().sum();
                let key = (deg, e.clone(), xi.clone());
                if best.as_ref().map(|b| key < (b.0, b.1.clone(), b.2.clone())).unwrap_or(true) {
                    let fact: Q = e.iter().map(|&k| Q::from_integer((1..=k as u64).product::<u64>().into())).product();
                    best = Some((deg, e.clone(), xi.clone(), c * fact));
                }
            }
        }
        best.map(|(_, e, xi, v)| (xi, e, v))
    }

    /// `min/max |∂^β J_ξ^{(j)}(x, τ)|` over seeded samples `|x|, |τ| ≤ radius`.
    pub fn uniform_jacobian_table(&self, xi: &[usize], beta: &[u32], nn: usize, js: &[u32], samples: usize, radius: f64, seed: u64) -> Vec<JacobianRow> {
        let d = self.alg.dim();
        let ncols = 2 * nn * self.k();
        js.iter()
            .map(|&j| {
                // same samples for every j so rows are comparable
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut min_abs = f64::INFINITY;
                let mut max_abs: f64 = 0.0;
                for _ in 0..samples {
                    let x: Vec<Q> = (0..d).map(|_| rational_sample(&mut rng, radius)).collect();
                    let map = self.gamma_tilde_scaled(&x, nn, j);
                    let mut jac = self.jacobian(&map, xi);
                    for (v, &b) in beta.iter().enumerate() {
                        for _ in 0..b {
                            jac = jac.partial(v);
                        }
                    }
                    let tau: Vec<f64> = (0..ncols).map(|_| rng.gen_range(-radius..=radius)).collect();
                    let v = jac.eval_f64(&tau).abs();
                    min_abs = min_abs.min(v);
                    max_abs = max_abs.max(v);
                }
                JacobianRow { j, min_abs, max_abs, samples }
            })
            .collect()
    }
}

fn rational_sample(rng: &mut impl Rng, radius: f64) -> Q {
    let den = 64i64;
    let lim = (radius * den as f64) as i64;
    Q::new(rng.gen_range(-lim..=lim).into(), den.into())
}

/// Determinant of a small polynomial matrix (Laplace expansion).
pub fn poly_det(m: &[Vec<Polynomial>]) -> Polynomial {
    let n = m.len();
    let nv = m.first().and_then(|r| r.first()).map(|p| p.nvars()).unwrap_or(0);
    if n == 0 {
        return Polynomial::constant(nv, Q::one());
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = Polynomial::zero(nv);
    for c in 0..n {
        if m[0][c].is_zero() {
            continue;
        }
        let minor: Vec<Vec<Polynomial>> = m[1..].iter().map(|row| row.iter().enumerate().filter(|(i, _)| *i != c).map(|(_, p)| p.clone()).collect()).collect();
        let t = m[0][c].mul(&poly_det(&minor));
        acc = if c % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
    }
    acc
}

/// Sampled quasi-distance diagnostics on a frame.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceDiagnostics {
    pub samples: usize,
    pub max_symmetry_error: f64,
    pub max_antisymmetry_error: f64,
    pub max_triangle_ratio: f64,
    pub max_key_ratio: f64,
    pub max_scaling_error: f64,
    pub skipped_outside_chart: usize,
}

/// Sample triples in `[-radius, radius]^d` and measure the quasi-distance
/// axioms, antisymmetry `Θ_x(y) = −Θ_y(x)`, the key estimate and the
/// scaling `d(x, δ_r^x y) = r d(x, y)`.
pub fn distance_diagnostics(frame: &FreeFrame, samples: usize, radius: f64, seed: u64) -> DistanceDiagnostics {
    let d = frame.dim();
    let m = frame.algebra().m() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DistanceDiagnostics {
        samples,
        max_symmetry_error: 0.0,
        max_antisymmetry_error: 0.0,
        max_triangle_ratio: 0.0,
        max_key_ratio: 0.0,
        max_scaling_error: 0.0,
        skipped_outside_chart: 0,
    };
    for _ in 0..samples {
        let pts: Vec<Vec<f64>> = (0..3).map(|_| (0..d).map(|_| rng.gen_range(-radius..=radius)).collect()).collect();
        let r: f64 = rng.gen_range(0.1..1.0);
        let mut run = || -> Result<()> {
            let (x, y1, y2) = (&pts[0], &pts[1], &pts[2]);
            let txy = frame.theta(x, y1)?;
            let tyx = frame.theta(y1, x)?;
            let anti = txy.iter().zip(&tyx).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
            let dxy = frame.algebra().norm_rho(&txy);
            let dyx = frame.algebra().norm_rho(&tyx);
            let dyz = frame.quasi_distance(y1, y2)?;
            let dxz = frame.quasi_distance(x, y2)?;
            let t2 = frame.theta(x, y2)?;
            let diff: Vec<f64> = t2.iter().zip(&txy).map(|(a, b)| a - b).collect();
            let key = frame.algebra().norm_rho(&diff) / (dyz + dyz.powf(1.0 / m) * dxy.powf(1.0 - 1.0 / m)).max(1e-300);
            let z = frame.local_dilate(x, y1, r)?;
            let dz = frame.quasi_distance(x, &z)?;
            out.max_antisymmetry_error = out.max_antisymmetry_error.max(anti);
            out.max_symmetry_error = out.max_symmetry_error.max((dxy - dyx).abs());
            out.max_triangle_ratio = out.max_triangle_ratio.max(dxz / (dxy + dyz).max(1e-300));
            out.max_key_ratio = out.max_key_ratio.max(key);
            out.max_scaling_error = out.max_scaling_error.max((dz - r * dxy).abs() / dxy.max(1e-12));
            Ok(())
        };
        if run().is_err() {
            out.skipped_outside_chart += 1;
        }
    }
    out
}

/// `max d(y, γ_t(y)) / |t|` over samples, for a group model.
pub fn displacement_ratio(model: &GroupModel, samples: usize, radius: f64, seed: u64) -> f64 {
    let alg = model.algebra();
    let d = alg.dim();
    let k = model.k();
    let fam = model.family(alg.m() + 2).expect("model family");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-radius..=radius)).collect();
        let t: Vec<f64> = (0..k).map(|_| rng.gen_range(-radius..=radius)).collect();
        let g = fam.eval_f64(&y, &t);
        let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if tn > 1e-9 {
            worst = worst.max(alg.quasi_distance(&y, &g) / tn);
        }
    }
    worst
}

/// Homogeneous-degree check for a polynomial: all terms of total degree `deg`.
pub fn is_homogeneous(p: &Polynomial, deg: u32) -> bool {
    p.terms().all(|(e, _)| e.iter().sum::<u32>() == deg)
}

/// Convert a rational coordinate vector to floats.
pub fn to_f64(x: &[Q]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
}

/// True if `|v| ≤ tol` for every entry.
pub fn all_small(v: &[f64], tol: f64) -> bool {
    v.iter().all(|x| x.abs() <= tol)
}

/// Sign helper used when reporting exact witnesses.
pub fn sign_of(q: &Q) -> i32 {
    if q.is_positive() {
        1
    } else if q.is_negative() {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::qi;

    fn plane_fields(order: u32) -> Vec<VField> {
        let ctx = JetContext::numbered(&[("x", 2)], order);
        vec![VField::coordinate(&ctx, 2, 0), VField::coordinate(&ctx, 2, 1)]
    }

    #[test]
    fn heisenberg_lift_of_the_plane() {
        let frame = lift_free(&plane_fields(5), &[1, 1], 2).unwrap();
        assert_eq!(frame.dim(), 3);
        let rep = frame.verify(&plane_fields(5)).unwrap();
        assert!(rep.ok(), "{rep:?}");
        // the new direction is spanned by the bracket
        assert_eq!(frame.basic_fields()[2].at_base(), vec![qi(0), qi(0), qi(1)]);
    }

    #[test]
    fn line_lift_is_trivial() {
        let ctx = JetContext::numbered(&[("x", 1)], 3);
        let x = vec![VField::coordinate(&ctx, 1, 0)];
        let frame = lift_free(&x, &[1], 1).unwrap();
        assert_eq!(frame.dim(), 1);
        assert_eq!(frame.fields()[0].pretty(), "(1)∂u1");
    }

    #[test]
    fn group_theta_is_left_quotient() {
        let alg = NilpotentAlgebra::build(2, &[1, 1], 2).unwrap();
        let frame = FreeFrame::group(alg.clone()).unwrap();
        let x = [0.1, -0.2, 0.05];
        let y = [-0.15, 0.1, 0.2];
        let u = frame.theta(&x, &y).unwrap();
        let xi: Vec<f64> = x.iter().map(|v| -v).collect();
        let want = alg.group_multiply_f64(&xi, &y);
        for (a, b) in u.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(frame.theta(&[0.9, 0.0, 0.0], &y).is_err());
    }

    #[test]
    fn group_model_scale_invariance() {
        let alg = NilpotentAlgebra::build(2, &[1, 1], 2).unwrap();
        let model = GroupModel::new(alg, None).unwrap();
        let x = vec![Q::new(1.into(), 8.into()), Q::zero(), Q::new((-1).into(), 4.into())];
        assert_eq!(model.gamma_tilde_scaled(&x, 1, 0), model.gamma_tilde_scaled(&x, 1, 3));
    }
}
