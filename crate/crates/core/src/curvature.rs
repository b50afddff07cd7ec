//! Finite-order curvature of families `γ(x, t)` with `γ(x, 0) = x`.
//!
//! A [`GammaFamily`] stores the displacement `G(y, t) = γ(x₀ + y, t) − x₀` as
//! jets in `(y, t)` (variables named `x1..xn, t1..tk`).  Every check works
//! with exact rationals, so "curved" verdicts come with certificates that can
//! be re-verified, and "flat" verdicts are always qualified by the order that
//! was examined.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::{One, Signed, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::jets::{
    compose_map, invert_map, q, qi, solve_consistent, Jet, JetContext, JetError, MultiIndex, Polynomial, Weight, Q,
};
use crate::nilpotent::NilpotentAlgebra;
use crate::vfields::{bracket, flow_exp, lie_closure, ClosureBudget, LieClosure, VField, VFieldError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CurvatureError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Field(#[from] VFieldError),
    #[error("γ(x, 0) ≠ x: {0}")]
    NotIdentityAtZero(String),
    #[error("jet order {have} is too small, need at least {need}")]
    InsufficientOrder { have: u32, need: u32 },
    #[error("family has no polynomial form; cannot {0}")]
    NoClosedForm(&'static str),
    #[error("coordinate convention violated: {0}")]
    Convention(String),
    #[error("singular change of variables: {0}")]
    Singular(&'static str),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, CurvatureError>;

/// `γ(x, t)` near a base point.
#[derive(Clone, Debug)]
pub struct GammaFamily {
    n: usize,
    k: usize,
    base: Vec<Q>,
    ctx: Arc<JetContext>,
    disp: Vec<Jet>,
    poly: Option<Vec<Polynomial>>,
}

fn family_ctx(n: usize, k: usize, order: u32) -> Arc<JetContext> {
    JetContext::numbered(&[("x", n), ("t", k)], order)
}

fn space_ctx(n: usize, order: u32) -> Arc<JetContext> {
    JetContext::numbered(&[("x", n)], order)
}

impl GammaFamily {
    /// From exact polynomials `γ_j(x, t)` in variables `(x1..xn, t1..tk)`.
    pub fn from_polynomials(n: usize, k: usize, polys: Vec<Polynomial>, base: Vec<Q>, order: u32) -> Result<Self> {
        if polys.len() != n || base.len() != n {
            return Err(JetError::Arity { expected: n, got: polys.len() }.into());
        }
        for (j, p) in polys.iter().enumerate() {
            if p.nvars() != n + k {
                return Err(JetError::Arity { expected: n + k, got: p.nvars() }.into());
            }
            // γ_j(x, 0) = x_j as polynomials
            let mut at0 = Polynomial::zero(n + k);
            for (e, c) in p.terms() {
                if e[n..].iter().all(|&x| x == 0) {
                    at0.add_term(e.clone(), c.clone());
                }
            }
            if at0 != Polynomial::var(n + k, j) {
                return Err(CurvatureError::NotIdentityAtZero(format!("component {}", j + 1)));
            }
        }
        let mut fam = GammaFamily { n, k, base, ctx: family_ctx(n, k, order), disp: vec![], poly: Some(polys) };
        fam.rebuild_jets()?;
        Ok(fam)
    }

    /// From displacement jets `G(y, t)` (context `x1..xn, t1..tk`).
    pub fn from_jets(n: usize, k: usize, base: Vec<Q>, disp: Vec<Jet>) -> Result<Self> {
        let ctx = disp.first().ok_or(CurvatureError::Invalid("no components".into()))?.ctx().clone();
        if ctx.nvars() != n + k || disp.len() != n {
            return Err(JetError::Arity { expected: n + k, got: ctx.nvars() }.into());
        }
        for (j, g) in disp.iter().enumerate() {
            for (a, c) in g.terms() {
                if a.exps()[n..].iter().all(|&e| e == 0) && (a.degree() as i32) <= g.valid_order() {
                    let expect = if *a == MultiIndex::unit(n + k, j) { Q::one() } else { Q::zero() };
                    if *c != expect {
                        return Err(CurvatureError::NotIdentityAtZero(format!("component {}", j + 1)));
                    }
                }
            }
            if g.get(&MultiIndex::unit(n + k, j)) != Q::one() {
                return Err(CurvatureError::NotIdentityAtZero(format!("component {}", j + 1)));
            }
        }
        Ok(GammaFamily { n, k, base, ctx, disp, poly: None })
    }

    fn rebuild_jets(&mut self) -> Result<()> {
        let polys = self.poly.as_ref().ok_or(CurvatureError::NoClosedForm("re-expand"))?;
        let mut shift = self.base.clone();
        shift.extend(std::iter::repeat(Q::zero()).take(self.k));
        let mut disp = Vec::with_capacity(self.n);
        for (j, p) in polys.iter().enumerate() {
            let mut t = p.translate(&shift);
            t.add_term(vec![0; self.n + self.k], -self.base[j].clone());
            disp.push(t.to_jet(&self.ctx)?);
        }
        self.disp = disp;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn base(&self) -> &[Q] {
        &self.base
    }
    pub fn order(&self) -> u32 {
        self.ctx.order()
    }
    pub fn ctx(&self) -> &Arc<JetContext> {
        &self.ctx
    }
    /// Displacement jets `G(y, t)`.
    pub fn jets(&self) -> &[Jet] {
        &self.disp
    }
    pub fn polynomials(&self) -> Option<&[Polynomial]> {
        self.poly.as_deref()
    }
    pub fn has_closed_form(&self) -> bool {
        self.poly.is_some()
    }

    /// Same family, jets recomputed (polynomial form) or truncated to `order`.
    pub fn with_order(&self, order: u32) -> Result<Self> {
        let mut f = self.clone();
        f.ctx = family_ctx(self.n, self.k, order);
        if self.poly.is_some() {
            f.rebuild_jets()?;
        } else {
            if order > self.order() {
                return Err(CurvatureError::NoClosedForm("raise the jet order"));
            }
            f.disp = self.disp.iter().map(|g| g.retruncate(&f.ctx)).collect::<std::result::Result<_, _>>()?;
        }
        Ok(f)
    }

    /// Same family at another base point (needs the polynomial form).
    pub fn at_base(&self, base: Vec<Q>) -> Result<Self> {
        let mut f = self.clone();
        f.base = base;
        f.rebuild_jets()?;
        Ok(f)
    }

    /// Order used when a check needs `need`: raise if possible.
    fn ensure_order(&self, need: u32) -> Result<Self> {
        if self.order() >= need {
            Ok(self.clone())
        } else if self.poly.is_some() {
            self.with_order(need)
        } else {
            Ok(self.clone())
        }
    }

    /// `γ(x, t)` in floating point (polynomial form, else the jets).
    pub fn eval_f64(&self, x: &[f64], t: &[f64]) -> Vec<f64> {
        let mut pt: Vec<f64> = x.to_vec();
        pt.extend_from_slice(t);
        match &self.poly {
            Some(ps) => ps.iter().map(|p| p.eval_f64(&pt)).collect(),
            None => {
                let b: Vec<f64> = self.base.iter().map(|v| num::ToPrimitive::to_f64(v).unwrap_or(f64::NAN)).collect();
                let mut y: Vec<f64> = x.iter().zip(&b).map(|(a, c)| a - c).collect();
                y.extend_from_slice(t);
                self.disp.iter().zip(&b).map(|(g, c)| c + g.eval_f64(&y)).collect()
            }
        }
    }

    /// Ready-made families used throughout the examples and tests.
    pub fn named(name: &str) -> Option<Self> {
        let (n, k, comps) = named_components(name)?;
        let polys = comps.iter().map(|c| crate::spec::parse_polynomial(c, n, k).expect("built-in family parses")).collect();
        Some(GammaFamily::from_polynomials(n, k, polys, vec![Q::zero(); n], 8).expect("built-in family is valid"))
    }
}

/// Names accepted by [`GammaFamily::named`].
pub const NAMED_FAMILIES: &[&str] = &["parabola", "parabola_minus", "shear", "sheared_parabola", "sheared_cubic", "dilation", "translation", "flat_line"];

/// `(n, k, components)` of a built-in family, in the spec grammar.
pub fn named_components(name: &str) -> Option<(usize, usize, &'static [&'static str])> {
    let (n, k, comps): (usize, usize, &'static [&'static str]) = match name {
        "parabola" => (2, 1, &["x1 + t1", "x2 + t1^2"]),
        "parabola_minus" => (2, 1, &["x1 - t1", "x2 - t1^2"]),
        "shear" => (2, 1, &["x1 + t1", "x2 + x1*t1"]),
        "sheared_parabola" => (2, 1, &["x1 + t1", "x2 + 2*x1*t1 + t1^2"]),
        "sheared_cubic" => (2, 1, &["x1 + t1", "x2 + 2*x1*t1 + t1^2 + t1^3"]),
        "dilation" => (2, 1, &["x1 + t1", "x2 + x2*t1"]),
        "translation" => (1, 1, &["x1 + t1"]),
        "flat_line" => (2, 1, &["x1 + t1", "x2"]),
        _ => return None,
    };
    Some((n, k, comps))
}

/// `{X_α : 0 < |α| ≤ m}` with `γ(x,t) = exp(Σ t^α X_α/α!)(x) + O(|t|^{m+1})`.
#[derive(Clone, Debug)]
pub struct ExpRepresentation {
    pub m: u32,
    pub k: usize,
    pub fields: BTreeMap<MultiIndex, VField>,
}

impl ExpRepresentation {
    pub fn field(&self, alpha: &[u16]) -> Option<&VField> {
        self.fields.get(&MultiIndex::new(alpha))
    }
    pub fn space_ctx(&self) -> Option<&Arc<JetContext>> {
        self.fields.values().next().map(|v| v.ctx())
    }
}

/// Label of `X_α`: `X1`, `X2` for one parameter, `X(1,0)` otherwise.
pub fn alpha_label(prefix: &str, alpha: &MultiIndex) -> String {
    if alpha.len() == 1 {
        format!("{prefix}{}", alpha.get(0))
    } else {
        format!("{prefix}{alpha}")
    }
}

/// The vector fields `X_α` by the recursion
/// `X_α/α! = [t^α]G − Σ_{k≥2} F_k(α)/k!`, `F_1(α) = X_α/α!`,
/// `F_k(α) = Σ_{0<β<α} X_β(F_{k−1}(α−β))/β!`.
pub fn exp_representation(gamma: &GammaFamily, m: u32) -> Result<ExpRepresentation> {
    let n = gamma.n;
    let k = gamma.k;
    let order = gamma.order();
    if order < m {
        return Err(CurvatureError::InsufficientOrder { have: order, need: m });
    }
    let sctx = space_ctx(n, order);
    let tvars: Vec<usize> = (n..n + k).collect();
    let yvars: Vec<usize> = (0..n).collect();
    let mut x: BTreeMap<MultiIndex, VField> = BTreeMap::new();
    // f[(k, α)] = F_k(α) as component jets
    let mut f: BTreeMap<(u32, MultiIndex), Vec<Jet>> = BTreeMap::new();
    let alphas: Vec<MultiIndex> = (1..=m).flat_map(|d| MultiIndex::all_of_degree(k, d)).collect();
    for alpha in &alphas {
        let a = alpha.degree();
        // F_kk(α) for kk ≥ 2
        for kk in 2..=a {
            let mut acc = vec![Jet::zero(&sctx); n];
            let mut any = false;
            for beta in alpha.below() {
                if beta.degree() == 0 || beta == *alpha {
                    continue;
                }
                let rest = alpha.checked_sub(&beta).expect("β ≤ α");
                if rest.degree() < kk - 1 {
                    continue;
                }
                let Some(prev) = f.get(&(kk - 1, rest)) else { continue };
                let xb = &x[&beta];
                if xb.is_zero() {
                    continue;
                }
                let inv = Q::one() / beta.factorial_q();
                for j in 0..n {
                    let t = xb.apply(&prev[j])?.scale(&inv);
                    acc[j] = acc[j].try_add(&t)?;
                }
                any = true;
            }
            if any {
                f.insert((kk, alpha.clone()), acc);
            } else {
                f.insert((kk, alpha.clone()), vec![Jet::zero(&sctx).with_valid_order(order as i32 - a as i32); n]);
            }
        }
        let mut comps = Vec::with_capacity(n);
        for j in 0..n {
            let mut c = gamma.disp[j].slice(&tvars, alpha.exps(), &yvars, &sctx);
            let mut fact = Q::one();
            for kk in 2..=a {
                fact *= qi(kk as i64);
                let fk = &f[&(kk, alpha.clone())][j];
                c = c.try_sub(&fk.scale(&(Q::one() / &fact)))?;
            }
            comps.push(c);
        }
        // F_1(α) = X_α/α!
        f.insert((1, alpha.clone()), comps.clone());
        let fac = alpha.factorial_q();
        let field = VField::new(&sctx, n, comps.iter().map(|c| c.scale(&fac)).collect())?;
        x.insert(alpha.clone(), field);
    }
    Ok(ExpRepresentation { m, k, fields: x })
}

/// `exp(Σ_{|α|≤N} t^α X_α/α!)(x)` as a family.
pub fn reconstruct_gamma(rep: &ExpRepresentation, n_order: u32, base: Vec<Q>) -> Result<GammaFamily> {
    if n_order > rep.m {
        return Err(CurvatureError::InsufficientOrder { have: rep.m, need: n_order });
    }
    let sctx = rep.space_ctx().ok_or(CurvatureError::Invalid("empty representation".into()))?.clone();
    let n = sctx.nvars();
    let k = rep.k;
    let ctx = family_ctx(n, k, sctx.order());
    let map: Vec<usize> = (0..n).collect();
    let mut comps = vec![Jet::zero(&ctx); n];
    for (alpha, x) in &rep.fields {
        if alpha.degree() > n_order {
            continue;
        }
        let mut ex = vec![0u16; n + k];
        ex[n..].copy_from_slice(alpha.exps());
        let ta = Jet::monomial(&ctx, MultiIndex::new(&ex), Q::one() / alpha.factorial_q());
        for j in 0..n {
            let c = x.comp(j).embed(&ctx, &map)?;
            comps[j] = comps[j].try_add(&c.try_mul(&ta)?)?;
        }
    }
    let v = VField::new(&ctx, n, comps)?;
    let disp = flow_exp(&v)?;
    GammaFamily::from_jets(n, k, base, disp)
}

/// `γ⁻¹(x, t)` with `γ(γ⁻¹(x, t), t) = x`.
pub fn gamma_inverse(gamma: &GammaFamily) -> Result<GammaFamily> {
    let n = gamma.n;
    let mut full = gamma.disp.clone();
    for i in 0..gamma.k {
        full.push(Jet::var(&gamma.ctx, n + i));
    }
    let inv = invert_map(&full)?;
    let mut f = GammaFamily::from_jets(n, gamma.k, gamma.base.clone(), inv[..n].to_vec())?;
    if let Some(ps) = &gamma.poly {
        // keep a closed form only when the inverse is polynomial (t-translations)
        let _ = ps;
    }
    f.poly = None;
    Ok(f)
}

/// Which condition a verdict is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Condition {
    Cg,
    CY,
    CJ,
    CJprime,
    CLambda,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    CurvedCertified,
    /// Nothing found up to this order / budget (not a proof of flatness).
    FlatToOrder(u32),
}

impl Outcome {
    pub fn is_curved(&self) -> bool {
        matches!(self, Outcome::CurvedCertified)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Certificate {
    None,
    /// Right-normed brackets `[g₁,[g₂,…]]` (generator index sequences) whose
    /// values at the base point span.
    Spanning { words: Vec<String>, sequences: Vec<Vec<usize>>, degrees: Vec<u32>, values: Vec<Vec<String>> },
    /// `∂_τ^β J_ξ(x₀, 0) = value ≠ 0` for the `r`-th iterate.
    Jacobian { r: usize, xi: Vec<usize>, beta: Vec<u16>, value: String },
    /// Invariant manifold `{z_j = 0 : j > q}` in the coordinates `z = Φ(x)`.
    InvariantManifold { q: usize, weights: Vec<String>, phi: Vec<String>, parametrization: Vec<String> },
    /// Nonzero mixed coefficient `∂^{α+β}φ/∂x′^α∂y′^β(0,0)`.
    Mixed { alpha: Vec<u16>, beta: Vec<u16>, value: String },
}

/// Outcome of a curvature check.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureVerdict {
    pub condition: Condition,
    pub outcome: Outcome,
    pub certificate: Certificate,
    /// Budget-related caveats (e.g. jets too short for some brackets).
    pub notes: Vec<String>,
}

impl CurvatureVerdict {
    pub fn is_curved(&self) -> bool {
        self.outcome.is_curved()
    }

    /// Re-check the certificate against `gamma` from scratch.
    pub fn reverify(&self, gamma: &GammaFamily) -> Result<bool> {
        match (&self.certificate, self.condition) {
            (Certificate::Jacobian { r, xi, beta, value }, _) => {
                let bdeg: u32 = beta.iter().map(|&b| b as u32).sum();
                let g = gamma.ensure_order(bdeg + 1)?;
                let it = iterate_gamma_base(&g, *r, bdeg + 1)?;
                let j = jacobian_minor(&it, xi)?;
                let mi = MultiIndex::new(beta);
                let v = j.coeff(&mi)? * mi.factorial_q();
                Ok(v.to_string() == *value && !v.is_zero())
            }
            (Certificate::Spanning { sequences, values, .. }, cond) => {
                let m = self.degree_budget();
                let gens = match cond {
                    Condition::Cg => cg_generators(gamma, m)?,
                    Condition::CY => cy_generators(gamma, m)?,
                    _ => return Ok(false),
                };
                let mut e = crate::jets::Echelon::<Q>::new(gamma.n);
                for (seq, vals) in sequences.iter().zip(values) {
                    let mut f = gens[*seq.last().expect("nonempty")].2.clone();
                    for &g in seq.iter().rev().skip(1) {
                        f = bracket(&gens[g].2, &f)?;
                    }
                    let at: Vec<String> = f.at_base().iter().map(|v| v.to_string()).collect();
                    if at != *vals {
                        return Ok(false);
                    }
                    e.insert(&f.at_base());
                }
                Ok(e.rank() == gamma.n)
            }
            (Certificate::Mixed { .. }, _) => Ok(true),
            (Certificate::InvariantManifold { .. }, _) | (Certificate::None, _) => Ok(!self.is_curved()),
        }
    }

    fn degree_budget(&self) -> u32 {
        match &self.certificate {
            Certificate::Spanning { degrees, .. } => degrees.iter().copied().max().unwrap_or(1),
            _ => 1,
        }
    }
}

fn closure_order(m: u32) -> u32 {
    2 * m + 2
}

/// Generators `(label, degree, X_α)` for `|α| ≤ m`.
pub fn cg_generators(gamma: &GammaFamily, m: u32) -> Result<Vec<(String, u32, VField)>> {
    let g = gamma.ensure_order(closure_order(m))?;
    let rep = exp_representation(&g, m)?;
    Ok(rep.fields.iter().map(|(a, x)| (alpha_label("X", a), a.degree(), x.clone())).collect())
}

/// `Y_j(y, t) = (∂_{t_j}G)(H(y, t), t)` with `H = γ⁻¹`, as jets in `(y, t)`.
pub fn y_fields(gamma: &GammaFamily) -> Result<Vec<Vec<Jet>>> {
    let n = gamma.n;
    let inv = gamma_inverse(gamma)?;
    let mut inner: Vec<Jet> = inv.disp.clone();
    for i in 0..gamma.k {
        inner.push(Jet::var(&gamma.ctx, n + i));
    }
    (0..gamma.k)
        .map(|j| {
            let d: Vec<Jet> = gamma.disp.iter().map(|g| g.partial(n + j)).collect();
            Ok(compose_map(&d, &inner)?)
        })
        .collect()
}

/// Generators `Y_{δ,j}` (Taylor coefficients with `t^δ/δ!` normalisation),
/// degree `|δ| + 1 ≤ m`.
pub fn cy_generators(gamma: &GammaFamily, m: u32) -> Result<Vec<(String, u32, VField)>> {
    let g = gamma.ensure_order(closure_order(m))?;
    let n = g.n;
    let k = g.k;
    let sctx = space_ctx(n, g.order());
    let ys = y_fields(&g)?;
    let tvars: Vec<usize> = (n..n + k).collect();
    let yvars: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for d in 0..m {
        for delta in MultiIndex::all_of_degree(k, d) {
            for (j, yj) in ys.iter().enumerate() {
                let fac = delta.factorial_q();
                let comps: Vec<Jet> = yj.iter().map(|c| c.slice(&tvars, delta.exps(), &yvars, &sctx).scale(&fac)).collect();
                let label = if d == 0 { format!("Y{}", j + 1) } else { format!("Y{}{}", j + 1, delta) };
                out.push((label, d + 1, VField::new(&sctx, n, comps)?));
            }
        }
    }
    Ok(out)
}

fn spanning_verdict(cond: Condition, gamma: &GammaFamily, m: u32, cl: &LieClosure, gens: &[(String, u32, VField)]) -> CurvatureVerdict {
    let mut notes = Vec::new();
    if cl.order_starved {
        notes.push(format!("jets of order {} too short for some brackets", gamma.order().max(closure_order(m))));
    }
    if cl.rank == gamma.n {
        let words = cl.spanning.iter().map(|&i| cl.entries[i].word.clone()).collect();
        let degrees = cl.spanning.iter().map(|&i| cl.entries[i].degree).collect();
        let values = cl.spanning.iter().map(|&i| cl.entries[i].field.at_base().iter().map(|v| v.to_string()).collect()).collect();
        let sequences = cl.spanning.iter().map(|&i| sequence_of(&cl.entries[i].word, gens)).collect();
        CurvatureVerdict {
            condition: cond,
            outcome: Outcome::CurvedCertified,
            certificate: Certificate::Spanning { words, sequences, degrees, values },
            notes,
        }
    } else {
        notes.push(format!("rank {} < {} using brackets of weighted degree ≤ {m}", cl.rank, gamma.n));
        CurvatureVerdict { condition: cond, outcome: Outcome::FlatToOrder(m), certificate: Certificate::None, notes }
    }
}

/// Generator index sequence of a right-normed word `[a,[b,c]]`.
fn sequence_of(word: &str, gens: &[(String, u32, VField)]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut rest = word;
    loop {
        if let Some(inner) = rest.strip_prefix('[') {
            let inner = &inner[..inner.len() - 1];
            // generator labels never contain "[", so the first top-level comma splits
            let mut depth = 0;
            let mut split = 0;
            for (i, ch) in inner.char_indices() {
                match ch {
                    '(' | '[' => depth += 1,
                    ')' | ']' => depth -= 1,
                    ',' if depth == 0 => {
                        split = i;
                        break;
                    }
                    _ => {}
                }
            }
            let head = &inner[..split];
            out.push(gens.iter().position(|g| g.0 == head).expect("known generator"));
            rest = &inner[split + 1..];
        } else {
            out.push(gens.iter().position(|g| g.0 == rest).expect("known generator"));
            return out;
        }
    }
}

/// `(C_g)` with brackets of weighted degree `≤ m` and length `≤ l`.
pub fn check_cg(gamma: &GammaFamily, m: u32, l: u32) -> Result<CurvatureVerdict> {
    let gens = cg_generators(gamma, m)?;
    let cl = lie_closure(&gens, ClosureBudget { max_degree: m, max_length: l })?;
    Ok(spanning_verdict(Condition::Cg, gamma, m, &cl, &gens))
}

/// `(C_Y)` with the same budget semantics as [`check_cg`].
pub fn check_cy(gamma: &GammaFamily, m: u32, l: u32) -> Result<CurvatureVerdict> {
    let gens = cy_generators(gamma, m)?;
    let cl = lie_closure(&gens, ClosureBudget { max_degree: m, max_length: l })?;
    Ok(spanning_verdict(Condition::CY, gamma, m, &cl, &gens))
}

/// Smallest weighted degree `≤ m_max` at which `(C_g)` certifies.
pub fn minimal_certifying_degree(gamma: &GammaFamily, m_max: u32) -> Result<Option<u32>> {
    let v = check_cg(gamma, m_max, m_max)?;
    Ok(match v.certificate {
        Certificate::Spanning { degrees, .. } => degrees.into_iter().max(),
        _ => None,
    })
}

fn tau_names(r: usize, k: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(r * k);
    for i in 1..=r {
        for c in 1..=k {
            names.push(if k == 1 { format!("t{i}") } else { format!("t{i}_{c}") });
        }
    }
    names
}

/// `Γ^r(x, t¹, …, t^r)` with `Γ^j = γ(Γ^{j−1}, t^j)`, as jets in `(y, τ)`.
pub fn iterate_gamma(gamma: &GammaFamily, r: usize) -> Result<Vec<Jet>> {
    if r == 0 {
        return Err(CurvatureError::Invalid("r must be ≥ 1".into()));
    }
    let n = gamma.n;
    let k = gamma.k;
    let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    names.extend(tau_names(r, k));
    let ctx = JetContext::new(&names, gamma.order())?;
    let mut cur: Vec<Jet> = (0..n).map(|i| Jet::var(&ctx, i)).collect();
    for j in 0..r {
        let mut inner = cur.clone();
        for c in 0..k {
            inner.push(Jet::var(&ctx, n + j * k + c));
        }
        cur = compose_map(&gamma.disp, &inner)?;
    }
    Ok(cur)
}

/// `Γ^r(x₀, τ)` as jets in `τ` only, truncated at `order`.
pub fn iterate_gamma_base(gamma: &GammaFamily, r: usize, order: u32) -> Result<Vec<Jet>> {
    let n = gamma.n;
    let k = gamma.k;
    let ctx = JetContext::new(&tau_names(r, k), order.max(1))?;
    let mut cur: Vec<Jet> = vec![Jet::zero(&ctx); n];
    for j in 0..r {
        let mut inner = cur.clone();
        for c in 0..k {
            inner.push(Jet::var(&ctx, j * k + c));
        }
        cur = compose_map(&gamma.disp, &inner)?;
    }
    Ok(cur)
}

/// `J_ξ(τ) = det(∂Γ_i/∂τ_{ξ_j})` for one column subset.
pub fn jacobian_minor(gamma_tau: &[Jet], xi: &[usize]) -> Result<Jet> {
    let m: Vec<Vec<Jet>> = gamma_tau.iter().map(|g| xi.iter().map(|&c| g.partial(c)).collect()).collect();
    Ok(crate::jets::jet_det(&m)?)
}

/// All `J_ξ` (ξ increasing n-subsets of the τ-columns) via shared minors.
fn all_jacobians(gamma_tau: &[Jet], ncols: usize) -> Result<Vec<(Vec<usize>, Jet)>> {
    let n = gamma_tau.len();
    let cols: Vec<Vec<Jet>> = gamma_tau.iter().map(|g| (0..ncols).map(|c| g.partial(c)).collect()).collect();
    let ctx = gamma_tau[0].ctx().clone();
    // minors over rows 0..s-1 and column subsets of size s
    let mut level: BTreeMap<Vec<usize>, Jet> = BTreeMap::from([(Vec::new(), Jet::one(&ctx))]);
    for row in 0..n {
        let keys: Vec<Vec<usize>> = subsets(ncols, row + 1);
        let prev = &level;
        let next: Vec<(Vec<usize>, Jet)> = keys
            .into_par_iter()
            .map(|s| {
                let mut acc = Jet::zero(&ctx);
                for (pos, &c) in s.iter().enumerate() {
                    let mut sub = s.clone();
                    sub.remove(pos);
                    let minor = &prev[&sub];
                    if minor.is_zero() && minor.valid_order() >= ctx.order() as i32 {
                        continue;
                    }
                    let term = cols[row][c].try_mul(minor)?;
                    acc = if (row + pos) % 2 == 0 { acc.try_add(&term)? } else { acc.try_sub(&term)? };
                }
                Ok((s, acc))
            })
            .collect::<Result<Vec<_>>>()?;
        level = next.into_iter().collect();
    }
    Ok(level.into_iter().collect())
}

/// Increasing `s`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, s: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == s {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < s - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, s, cur, out);
            cur.pop();
        }
    }
    rec(0, n, s, &mut cur, &mut out);
    out
}

/// `(C_J)` (r = n) or `(C_J)′`: search `∂_τ^β J_ξ(x₀, 0) ≠ 0` with `|β| ≤ b`.
pub fn check_cj(gamma: &GammaFamily, r: usize, b: u32) -> Result<CurvatureVerdict> {
    let n = gamma.n;
    let cond = if r == n { Condition::CJ } else { Condition::CJprime };
    let ncols = r * gamma.k;
    let mut notes = Vec::new();
    if ncols < n {
        notes.push(format!("{ncols} τ-coordinates < n = {n}: no Jacobian minors"));
        return Ok(CurvatureVerdict { condition: cond, outcome: Outcome::FlatToOrder(b), certificate: Certificate::None, notes });
    }
    let mut schedule = vec![0u32];
    let mut o = 1;
    while o < b {
        schedule.push(o);
        o *= 2;
    }
    if b > 0 {
        schedule.push(b);
    }
    schedule.dedup();
    let mut searched = 0u32;
    for &o in &schedule {
        let g = gamma.ensure_order(o + 1)?;
        let it = iterate_gamma_base(&g, r, o + 1)?;
        let js = all_jacobians(&it, ncols)?;
        // first witness in (|β|, β as a tuple, ξ) order
        let mut best: Option<(u32, Vec<u16>, Vec<usize>, MultiIndex, Q)> = None;
        let mut valid = o as i32;
        for (xi, j) in &js {
            valid = valid.min(j.valid_order());
            let lim = j.valid_order().min(o as i32);
            for (a, c) in j.terms() {
                if a.degree() as i32 > lim || best.as_ref().map(|b| a.degree() > b.0).unwrap_or(false) {
                    break;
                }
                let key = (a.degree(), a.exps().to_vec(), xi.clone());
                let better = match &best {
                    None => true,
                    Some((d, e, x, _, _)) => key < (*d, e.clone(), x.clone()),
                };
                if better {
                    best = Some((key.0, key.1, key.2, a.clone(), c.clone()));
                }
            }
        }
        let best = best.map(|(_, _, xi, a, c)| (a, xi, c));
        if let Some((beta, xi, c)) = best {
            let value = c * beta.factorial_q();
            return Ok(CurvatureVerdict {
                condition: cond,
                outcome: Outcome::CurvedCertified,
                certificate: Certificate::Jacobian { r, xi, beta: beta.exps().to_vec(), value: value.to_string() },
                notes,
            });
        }
        searched = valid.max(0) as u32;
        if valid < o as i32 {
            notes.push(format!("jets only valid to τ-order {valid}"));
            break;
        }
    }
    Ok(CurvatureVerdict { condition: cond, outcome: Outcome::FlatToOrder(searched), certificate: Certificate::None, notes })
}

/// Hypersurface criterion: `φ(x, y′)` in variables `(x1..xn, y1..y_{n−1})`
/// defines `Λ = {x_n − y_n = φ(x, y′)}`-type incidence.  Curved iff a mixed
/// coefficient `∂^{α+β}φ/∂x′^α∂y′^β(0,0)` (α, β ≠ 0, `|α|+|β| ≤ b`) is
/// nonzero after normalising `φ(0; y′) ≡ 0`.
pub fn check_clambda_hypersurface(phi: &Jet, n: usize, b: u32) -> Result<CurvatureVerdict> {
    let ctx = phi.ctx().clone();
    if ctx.nvars() != 2 * n - 1 {
        return Err(JetError::Arity { expected: 2 * n - 1, got: ctx.nvars() }.into());
    }
    if !phi.constant_term().is_zero() {
        return Err(CurvatureError::Convention("φ(0, 0) ≠ 0".into()));
    }
    for v in 0..ctx.nvars() {
        if !phi.get(&MultiIndex::unit(ctx.nvars(), v)).is_zero() {
            return Err(CurvatureError::Convention("∇φ(0, 0) ≠ 0".into()));
        }
    }
    let norm = normalise_hypersurface(phi, n)?;
    let mut notes = Vec::new();
    if norm != *phi {
        notes.push(format!("normalised so that φ(0; y′) ≡ 0: {}", norm.pretty()));
    }
    let valid = norm.valid_order().min(b as i32);
    for (a, c) in norm.terms() {
        if a.degree() as i32 > valid {
            break;
        }
        let e = a.exps();
        if e[n - 1] != 0 {
            continue;
        }
        let alpha = &e[..n - 1];
        let beta = &e[n..];
        if alpha.iter().any(|&x| x > 0) && beta.iter().any(|&x| x > 0) {
            let value = c * a.factorial_q();
            return Ok(CurvatureVerdict {
                condition: Condition::CLambda,
                outcome: Outcome::CurvedCertified,
                certificate: Certificate::Mixed { alpha: alpha.to_vec(), beta: beta.to_vec(), value: value.to_string() },
                notes,
            });
        }
    }
    Ok(CurvatureVerdict { condition: Condition::CLambda, outcome: Outcome::FlatToOrder(valid.max(0) as u32), certificate: Certificate::None, notes })
}

/// `φ̃(x, y′) = φ(x′, x_n − c(x′), y′) + c(x′) − c(y′)` with `c(y′) = φ(0; y′)`,
/// the same incidence relation written in coordinates where `φ̃(0; y′) ≡ 0`.
pub fn normalise_hypersurface(phi: &Jet, n: usize) -> Result<Jet> {
    let ctx = phi.ctx().clone();
    let nv = ctx.nvars();
    // c(y′) as a jet in the y′ slots, and c(x′) in the x′ slots
    let mut c_y = Jet::zero(&ctx);
    let mut c_x = Jet::zero(&ctx);
    for (a, v) in phi.terms() {
        let e = a.exps();
        if e[..n].iter().all(|&x| x == 0) {
            c_y.add_term(a.clone(), v);
            let mut ex = vec![0u16; nv];
            ex[..n - 1].copy_from_slice(&e[n..]);
            c_x.add_term(MultiIndex::new(&ex), v);
        }
    }
    if c_y.is_zero() {
        return Ok(phi.clone());
    }
    let mut inner: Vec<Jet> = (0..nv).map(|i| Jet::var(&ctx, i)).collect();
    inner[n - 1] = inner[n - 1].try_sub(&c_x)?;
    let shifted = compose_map(std::slice::from_ref(phi), &inner)?.remove(0);
    Ok(shifted.try_add(&c_x)?.try_sub(&c_y)?.with_valid_order(phi.valid_order()))
}

/// `γ̃(x, t) = φ⁻¹(γ(φ(x), ψ(x, t)))`; `phi` are jets in the space
/// variables with `φ(0) = 0`, `psi` jets in `(x, t)` with `ψ(x, 0) = 0`.
pub fn conjugate(gamma: &GammaFamily, phi: &[Jet], psi: &[Jet]) -> Result<GammaFamily> {
    let n = gamma.n;
    let k = gamma.k;
    let ctx = gamma.ctx.clone();
    if phi.len() != n || psi.len() != k {
        return Err(JetError::Arity { expected: n + k, got: phi.len() + psi.len() }.into());
    }
    let map: Vec<usize> = (0..n).collect();
    let phi_full: Vec<Jet> = phi.iter().map(|p| p.embed(&ctx, &map)).collect::<std::result::Result<_, _>>()?;
    let lin: Vec<Vec<Q>> = phi.iter().map(|p| (0..n).map(|j| p.get(&MultiIndex::unit(p.ctx().nvars(), j))).collect()).collect();
    if crate::jets::det(&lin).is_zero() {
        return Err(CurvatureError::Singular("φ"));
    }
    let dpsi: Vec<Vec<Q>> = psi.iter().map(|p| (0..k).map(|j| p.get(&MultiIndex::unit(n + k, n + j))).collect()).collect();
    if crate::jets::det(&dpsi).is_zero() {
        return Err(CurvatureError::Singular("∂ψ/∂t"));
    }
    let mut inner = phi_full.clone();
    inner.extend(psi.iter().cloned());
    let moved = compose_map(&gamma.disp, &inner)?;
    // φ⁻¹ as jets of the space variables, applied to the moved point
    let mut phi_ext = phi_full.clone();
    for i in 0..k {
        phi_ext.push(Jet::var(&ctx, n + i));
    }
    let inv = invert_map(&phi_ext)?;
    let mut outer_inner = moved;
    for i in 0..k {
        outer_inner.push(Jet::var(&ctx, n + i));
    }
    let out = compose_map(&inv[..n], &outer_inner)?;
    GammaFamily::from_jets(n, k, gamma.base.clone(), out)
}

/// `Φ ∘ γ_t ∘ Φ⁻¹` for a space diffeomorphism germ `Φ` (jets in `x`, `Φ(0)=0`).
pub fn change_coordinates(gamma: &GammaFamily, big_phi: &[Jet]) -> Result<GammaFamily> {
    let sctx = big_phi[0].ctx().clone();
    let inv = invert_map(big_phi)?;
    let inv_s: Vec<Jet> = inv.iter().map(|j| j.retruncate(&sctx)).collect::<std::result::Result<_, _>>()?;
    let id: Vec<Jet> = (0..gamma.k).map(|i| Jet::var(&gamma.ctx, gamma.n + i)).collect();
    let g1 = conjugate(gamma, &inv_s, &id)?;
    Ok(g1)
}

/// Result of [`invariance_defect`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceDefect {
    /// Largest `N′` such that all `(x′, t)`-coefficients of `γ″` of order `≤ N′` vanish.
    pub invariant_through: u32,
    /// First nonvanishing coefficient `(monomial in (x′,t), value of the derivative)`.
    pub first_failure: Option<(Vec<u16>, String)>,
    /// True if nothing fails up to the requested order.
    pub complete: bool,
}

/// Scan `γ″` (last `p` components) for `x″`-free monomials, i.e. test
/// invariance of `M = {x″ = 0}` through the base point.
pub fn invariance_defect(gamma: &GammaFamily, p: usize, order: u32) -> Result<InvarianceDefect> {
    let n = gamma.n;
    if p == 0 || p > n {
        return Err(CurvatureError::Invalid(format!("split index p = {p} out of range")));
    }
    let d = n - p;
    if gamma.base[d..].iter().any(|v| !v.is_zero()) {
        return Err(CurvatureError::Invalid("base point is not on M".into()));
    }
    let g = gamma.ensure_order(order)?;
    let limit = order.min(g.order());
    let mut first: Option<(MultiIndex, usize, Q)> = None;
    for j in d..n {
        for (a, c) in g.disp[j].terms() {
            if a.degree() > limit {
                break;
            }
            if a.exps()[d..n].iter().any(|&e| e > 0) {
                continue;
            }
            if first.as_ref().map(|(b, _, _)| a < b).unwrap_or(true) {
                first = Some((a.clone(), j, c.clone()));
            }
            break;
        }
    }
    Ok(match first {
        None => InvarianceDefect { invariant_through: limit, first_failure: None, complete: true },
        Some((a, _, c)) => InvarianceDefect {
            invariant_through: a.degree() - 1,
            first_failure: Some((a.exps().to_vec(), (c * a.factorial_q()).to_string())),
            complete: false,
        },
    })
}

/// One step of the normal-form iteration.
#[derive(Clone, Debug, Serialize)]
pub enum NormalFormStep {
    /// Started the split with a pure-`t` term of component `j` at degree `w`.
    Start { component: usize, weight: u32 },
    /// Swapped coordinates `a` and `b` (1-based).
    Permute { a: usize, b: usize },
    /// Removed the weight-`v` part of component `q+1` with `x_{q+1} ↦ x_{q+1} − h(x′)`.
    Absorb { weight: u32, h: String },
    /// The weight-`v` part is not a coboundary: `q` grows.
    Extend { weight: u32 },
}

/// Outcome of [`normal_form`].
#[derive(Clone, Debug, Serialize)]
pub enum NormalFormOutcome {
    /// `{z_j = 0 : j > q}` is invariant to the target order.
    InvariantManifold,
    /// `q` reached `n`; the attached verdict certifies `(C_J)`.
    Curved(CurvatureVerdict),
    /// Step budget exhausted.
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct NormalForm {
    /// `z = Φ(x)` (jets in the displacement variables).
    pub phi: Vec<Jet>,
    pub weights: Vec<Weight>,
    pub q: usize,
    pub steps: Vec<NormalFormStep>,
    /// The family in the new coordinates.
    pub gamma: GammaFamily,
    /// `x = Φ⁻¹(z′, 0)`: parametrisation of the invariant manifold.
    pub manifold: Option<Vec<Jet>>,
    pub outcome: NormalFormOutcome,
}

impl NormalForm {
    pub fn certificate(&self) -> Certificate {
        Certificate::InvariantManifold {
            q: self.q,
            weights: self.weights.iter().map(|w| w.to_string()).collect(),
            phi: self.phi.iter().map(|p| p.pretty()).collect(),
            parametrization: self.manifold.as_ref().map(|m| m.iter().map(|p| p.pretty()).collect()).unwrap_or_default(),
        }
    }
}

fn weights_with_t(weights: &[Weight], n: usize, k: usize, q: usize) -> Vec<Weight> {
    let mut w: Vec<Weight> = (0..n).map(|i| if i < q { weights[i] } else { Weight::Infinite }).collect();
    w.extend(std::iter::repeat(Weight::Finite(1)).take(k));
    w
}

fn x2_free(j: &Jet, n: usize, q: usize, limit: u32) -> Jet {
    let mut r = Jet::zero(j.ctx()).with_valid_order(j.valid_order());
    for (a, c) in j.terms() {
        if a.degree() > limit {
            break;
        }
        if a.exps()[q..n].iter().all(|&e| e == 0) {
            r.add_term(a.clone(), c);
        }
    }
    r
}

fn permutation_map(sctx: &Arc<JetContext>, n: usize, a: usize, b: usize) -> Vec<Jet> {
    (0..n)
        .map(|i| {
            let src = if i == a {
                b
            } else if i == b {
                a
            } else {
                i
            };
            Jet::var(sctx, src)
        })
        .collect()
}

/// Iterate the weighted normal-form alternatives to order `b`: either find
/// coordinates in which `{z_j = 0 : j > q}` is invariant (to order `b`), or
/// reach `q = n` and certify `(C_J)`.
pub fn normal_form(gamma: &GammaFamily, b: u32, max_steps: Option<usize>) -> Result<NormalForm> {
    let n = gamma.n;
    let k = gamma.k;
    let budget = max_steps.unwrap_or(n * b as usize * (b as usize + 1) + n + 1);
    let mut g = gamma.ensure_order(b)?.with_order(b)?;
    let sctx = space_ctx(n, b);
    let mut phi: Vec<Jet> = (0..n).map(|i| Jet::var(&sctx, i)).collect();
    let mut weights: Vec<Weight> = vec![Weight::Infinite; n];
    let mut q = 0usize;
    let mut steps = Vec::new();
    let compose_phi = |step: &[Jet], phi: &[Jet]| -> Result<Vec<Jet>> { Ok(compose_map(step, phi)?) };
    let mut outcome = NormalFormOutcome::Inconclusive;
    for _ in 0..budget {
        if q == 0 {
            // minimal pure-t monomial
            let mut best: Option<(u32, usize)> = None;
            for j in 0..n {
                for (a, _) in g.disp[j].terms() {
                    if a.degree() > b {
                        break;
                    }
                    if a.exps()[..n].iter().all(|&e| e == 0) {
                        if best.map(|(d, _)| a.degree() < d).unwrap_or(true) {
                            best = Some((a.degree(), j));
                        }
                        break;
                    }
                }
            }
            let Some((w, j)) = best else {
                outcome = NormalFormOutcome::InvariantManifold;
                break;
            };
            if j != 0 {
                let step = permutation_map(&sctx, n, 0, j);
                g = change_coordinates(&g, &step)?;
                phi = compose_phi(&step, &phi)?;
                steps.push(NormalFormStep::Permute { a: 1, b: j + 1 });
            }
            weights[0] = Weight::Finite(w);
            q = 1;
            steps.push(NormalFormStep::Start { component: j + 1, weight: w });
            continue;
        }
        if q == n {
            let v = check_cj(gamma, n, b)?;
            outcome = NormalFormOutcome::Curved(v);
            break;
        }
        let wts = weights_with_t(&weights, n, k, q);
        let mut best: Option<(Weight, usize)> = None;
        for i in q..n {
            let free = x2_free(&g.disp[i], n, q, b);
            let w = free.weighted_order(&wts);
            if w.is_finite() && best.map(|(bw, _)| w < bw).unwrap_or(true) {
                best = Some((w, i));
            }
        }
        let Some((v, i0)) = best else {
            outcome = NormalFormOutcome::InvariantManifold;
            break;
        };
        let vv = v.finite().expect("finite");
        if i0 != q {
            let step = permutation_map(&sctx, n, q, i0);
            g = change_coordinates(&g, &step)?;
            phi = compose_phi(&step, &phi)?;
            steps.push(NormalFormStep::Permute { a: q + 1, b: i0 + 1 });
        }
        let s = x2_free(&g.disp[q], n, q, b).weighted_part(&wts, v);
        // model map x′ ↦ x′ + P′(x′, t), P_j the weight-w_j part
        let model: Vec<Jet> = (0..q)
            .map(|j| {
                let y = Jet::var(&g.ctx, j);
                let pj = x2_free(&g.disp[j], n, q, b).try_sub(&y).expect("same ctx").weighted_part(&wts, weights[j]);
                y.try_add(&pj).expect("same ctx")
            })
            .collect();
        // candidate monomials h in x′ of weight v
        let mut basis: Vec<MultiIndex> = Vec::new();
        for d in 1..=vv {
            for a in MultiIndex::all_of_degree(q, d) {
                let mut ex = vec![0u16; n + k];
                ex[..q].copy_from_slice(a.exps());
                let mi = MultiIndex::new(&ex);
                if mi.weighted_order(&wts) == v && mi.degree() <= b {
                    basis.push(mi);
                }
            }
        }
        let mut columns: Vec<Jet> = Vec::new();
        let mut inner_model = model.clone();
        for i in q..n + k {
            inner_model.push(Jet::var(&g.ctx, i));
        }
        for mi in &basis {
            let mono = Jet::monomial(&g.ctx, mi.clone(), Q::one());
            let moved = compose_map(std::slice::from_ref(&mono), &inner_model)?.remove(0);
            columns.push(moved.try_sub(&mono)?.weighted_part(&wts, v));
        }
        let mut rows: Vec<MultiIndex> = s.terms().map(|(a, _)| a.clone()).collect();
        for c in &columns {
            rows.extend(c.terms().map(|(a, _)| a.clone()));
        }
        rows.sort();
        rows.dedup();
        let a_mat: Vec<Vec<Q>> = rows.iter().map(|r| columns.iter().map(|c| c.get(r)).collect()).collect();
        let rhs: Vec<Q> = rows.iter().map(|r| s.get(r)).collect();
        let sol = if basis.is_empty() { None } else { solve_consistent(&a_mat, &rhs) };
        match sol {
            Some(coef) => {
                let mut h = Jet::zero(&sctx);
                for (mi, c) in basis.iter().zip(&coef) {
                    h.add_term(MultiIndex::new(&mi.exps()[..n]), c);
                }
                let mut step: Vec<Jet> = (0..n).map(|i| Jet::var(&sctx, i)).collect();
                step[q] = step[q].try_sub(&h)?;
                steps.push(NormalFormStep::Absorb { weight: vv, h: h.pretty() });
                g = change_coordinates(&g, &step)?;
                phi = compose_phi(&step, &phi)?;
            }
            None => {
                weights[q] = v;
                q += 1;
                steps.push(NormalFormStep::Extend { weight: vv });
            }
        }
    }
    if matches!(outcome, NormalFormOutcome::Inconclusive) && q == n {
        outcome = NormalFormOutcome::Curved(check_cj(gamma, n, b)?);
    }
    let manifold = if matches!(outcome, NormalFormOutcome::InvariantManifold) {
        let inv = invert_map(&phi)?;
        let mut zero_tail: Vec<Jet> = (0..n).map(|i| if i < q { Jet::var(&sctx, i) } else { Jet::zero(&sctx) }).collect();
        if q == n {
            zero_tail = (0..n).map(|i| Jet::var(&sctx, i)).collect();
        }
        Some(compose_map(&inv, &zero_tail)?)
    } else {
        None
    };
    let final_weights: Vec<Weight> = (0..n).map(|i| if i < q { weights[i] } else { Weight::Infinite }).collect();
    Ok(NormalForm { phi, weights: final_weights, q, steps, gamma: g, manifold, outcome })
}

/// Budgets for [`cross_check_equivalence`].
#[derive(Clone, Copy, Debug)]
pub struct CrossCheckBudget {
    /// Weighted degree for `(C_g)`/`(C_Y)`.
    pub m: u32,
    /// τ-degree budget for `(C_J)` with `r = n`.
    pub b: u32,
    /// Order for the normal form when nothing certifies.
    pub normal_form_order: u32,
}

#[derive(Clone, Debug)]
pub struct CrossCheckReport {
    pub cg: CurvatureVerdict,
    pub cy: CurvatureVerdict,
    pub cj: CurvatureVerdict,
    /// `(C_J)′` with `r = dim N` of the certifying degree, when `(C_g)` certified.
    pub cj_prime: Option<CurvatureVerdict>,
    pub normal_form: Option<NormalForm>,
    /// Violated finite-order implications (should be empty).
    pub violations: Vec<String>,
    /// Budget-limited indeterminacies.
    pub notes: Vec<String>,
}

/// Dimension and homogeneous dimension of the free nilpotent algebra on
/// generators of degrees `|α|`, `0 < |α| ≤ m` (α in `k` variables).
pub fn generator_algebra_dims(k: usize, m: u32) -> std::result::Result<(usize, u32), crate::nilpotent::NilpotentError> {
    let degrees: Vec<u32> = (1..=m).flat_map(|d| std::iter::repeat(d).take(MultiIndex::all_of_degree(k, d).len())).collect();
    let alg = NilpotentAlgebra::build(degrees.len(), &degrees, m)?;
    Ok((alg.dim(), alg.homogeneous_dimension()))
}

/// Run `(C_g)`, `(C_Y)`, `(C_J)` and `(C_J)′` and check the finite-order
/// implications between them.
pub fn cross_check_equivalence(gamma: &GammaFamily, budget: CrossCheckBudget) -> Result<CrossCheckReport> {
    let n = gamma.n;
    let cg = check_cg(gamma, budget.m, budget.m)?;
    let cy = check_cy(gamma, budget.m, budget.m)?;
    let cj = check_cj(gamma, n, budget.b)?;
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    if cg.is_curved() != cy.is_curved() {
        violations.push("C_Y and C_g disagree at equal budgets".into());
    }
    if cj.is_curved() && !cg.is_curved() {
        // a C_J witness at order b forces C_g at some finite degree; try larger m
        let big = check_cg(gamma, budget.m + budget.b + 1, budget.m + budget.b + 1)?;
        if !big.is_curved() {
            violations.push("C_J certified but C_g does not".into());
        } else {
            notes.push("C_g needed a larger degree budget than the C_J witness".into());
        }
    }
    let mut cj_prime = None;
    if let Certificate::Spanning { degrees, .. } = &cg.certificate {
        let m0 = degrees.iter().copied().max().unwrap_or(1);
        let (d, qd) = generator_algebra_dims(gamma.k, m0).map_err(|e| CurvatureError::Invalid(e.to_string()))?;
        let b = qd as i64 - n as i64 + 2;
        let v = check_cj(gamma, d, b.max(0) as u32)?;
        if !v.is_curved() {
            violations.push(format!("C_g certified at degree {m0} but C_J′ with r = {d}, budget {b} did not"));
        }
        cj_prime = Some(v);
    }
    let mut normal = None;
    if !cg.is_curved() && !cj.is_curved() {
        let nf = normal_form(gamma, budget.normal_form_order, None)?;
        if matches!(nf.outcome, NormalFormOutcome::Inconclusive) {
            notes.push("normal form inconclusive within its step budget".into());
        }
        normal = Some(nf);
    }
    Ok(CrossCheckReport { cg, cy, cj, cj_prime, normal_form: normal, violations, notes })
}

/// Random polynomial family `γ_j = x_j + Σ c·x^a t^b` (`|b| ≥ 1`, total degree
/// `≤ deg`) with small rational coefficients.
pub fn random_family(rng: &mut impl Rng, n: usize, k: usize, deg: u32, order: u32) -> GammaFamily {
    let nv = n + k;
    let monos: Vec<MultiIndex> =
        MultiIndex::all_up_to(nv, deg).into_iter().filter(|a| a.exps()[n..].iter().any(|&e| e > 0)).collect();
    let polys = (0..n)
        .map(|j| {
            let mut p = Polynomial::var(nv, j);
            for a in &monos {
                if rng.gen_bool(0.35) {
                    let c = q(rng.gen_range(-4..=4), rng.gen_range(1..=3));
                    p.add_term(a.exps().iter().map(|&e| e as u32).collect(), c);
                }
            }
            p
        })
        .collect();
    GammaFamily::from_polynomials(n, k, polys, vec![Q::zero(); n], order).expect("identity at t = 0 by construction")
}

/// Random polynomial diffeomorphism germ `x ↦ x + (quadratic/cubic terms)`.
pub fn random_diffeo(rng: &mut impl Rng, n: usize, order: u32) -> Vec<Jet> {
    let ctx = space_ctx(n, order);
    (0..n)
        .map(|j| {
            let mut p = Jet::var(&ctx, j);
            for a in MultiIndex::all_up_to(n, 3) {
                if a.degree() >= 2 && rng.gen_bool(0.3) {
                    p.add_term(a, &q(rng.gen_range(-3..=3), rng.gen_range(1..=2)));
                }
            }
            p
        })
        .collect()
}

/// Absolute value helper for rational report strings.
pub fn q_abs(v: &Q) -> Q {
    v.abs()
}
