//! Vector fields with jet coefficients.
//!
//! A [`VField`] acts on the first `n` variables of its context ("space");
//! any further variables are parameters (`t`, `u`, ...) that the field
//! depends on but never moves.

use std::sync::Arc;

use thiserror::Error;

use crate::jets::{compose_map, invert_map, Echelon, Jet, JetContext, JetError, MultiIndex, Scalar, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VFieldError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("field has a component that does not vanish when the parameters vanish")]
    ParameterConstantTerm,
    #[error("fields live on different spaces")]
    SpaceMismatch,
}

/// `Σ a_j(x, p) ∂/∂x_j` with `a_j` jets at the base point.
#[derive(Clone, Debug, PartialEq)]
pub struct VField {
    ctx: Arc<JetContext>,
    n: usize,
    comps: Vec<Jet>,
}

/// A field whose coefficients also depend on parameters, e.g. `Σ t^α X_α/α!`.
pub type ParamVField = VField;

impl VField {
    pub fn new(ctx: &Arc<JetContext>, n: usize, comps: Vec<Jet>) -> Result<Self, VFieldError> {
        if comps.len() != n || n > ctx.nvars() {
            return Err(JetError::Arity { expected: n, got: comps.len() }.into());
        }
        if comps.iter().any(|c| c.ctx() != ctx) {
            return Err(JetError::ContextMismatch.into());
        }
        Ok(VField { ctx: ctx.clone(), n, comps })
    }

    pub fn zero(ctx: &Arc<JetContext>, n: usize) -> Self {
        VField { ctx: ctx.clone(), n, comps: vec![Jet::zero(ctx); n] }
    }

    /// `∂/∂x_i`.
    pub fn coordinate(ctx: &Arc<JetContext>, n: usize, i: usize) -> Self {
        let mut v = Self::zero(ctx, n);
        v.comps[i] = Jet::one(ctx);
        v
    }

    pub fn ctx(&self) -> &Arc<JetContext> {
        &self.ctx
    }
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn comps(&self) -> &[Jet] {
        &self.comps
    }
    pub fn comp(&self, j: usize) -> &Jet {
        &self.comps[j]
    }
    pub fn valid_order(&self) -> i32 {
        self.comps.iter().map(|c| c.valid_order()).min().unwrap_or(self.ctx.order() as i32)
    }
    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero())
    }

    /// Value at the base point.
    pub fn at_base(&self) -> Vec<Q> {
        self.comps.iter().map(|c| c.constant_term()).collect()
    }

    fn check(&self, o: &VField) -> Result<(), VFieldError> {
        if self.n != o.n {
            return Err(VFieldError::SpaceMismatch);
        }
        if self.ctx != o.ctx {
            return Err(JetError::ContextMismatch.into());
        }
        Ok(())
    }

    /// `V f = Σ a_j ∂_j f`.
    pub fn apply(&self, f: &Jet) -> Result<Jet, VFieldError> {
        let mut acc = Jet::zero(&self.ctx).with_valid_order(f.valid_order().min(self.valid_order()));
        let mut first = true;
        for (j, a) in self.comps.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let term = a.try_mul(&f.partial(j))?;
            acc = if first { term } else { acc.try_add(&term)? };
            first = false;
        }
        if first {
            // V ≡ 0: the result is exactly 0, valid as far as V is
            acc = Jet::zero(&self.ctx).with_valid_order(self.valid_order());
        }
        Ok(acc)
    }

    pub fn add(&self, o: &VField) -> Result<VField, VFieldError> {
        self.check(o)?;
        let comps = self.comps.iter().zip(&o.comps).map(|(a, b)| a.try_add(b)).collect::<Result<_, _>>()?;
        Ok(VField { ctx: self.ctx.clone(), n: self.n, comps })
    }

    pub fn sub(&self, o: &VField) -> Result<VField, VFieldError> {
        self.check(o)?;
        let comps = self.comps.iter().zip(&o.comps).map(|(a, b)| a.try_sub(b)).collect::<Result<_, _>>()?;
        Ok(VField { ctx: self.ctx.clone(), n: self.n, comps })
    }

    pub fn scale(&self, c: &Q) -> VField {
        VField { ctx: self.ctx.clone(), n: self.n, comps: self.comps.iter().map(|a| a.scale(c)).collect() }
    }

    /// Multiply every coefficient by a function.
    pub fn mul_fn(&self, f: &Jet) -> Result<VField, VFieldError> {
        let comps = self.comps.iter().map(|a| a.try_mul(f)).collect::<Result<_, _>>()?;
        Ok(VField { ctx: self.ctx.clone(), n: self.n, comps })
    }

    /// Re-express in a larger context (variable `i` ↦ `map[i]`).  The first
    /// `n` variables must map to the first `n` of `ctx`.
    pub fn embed(&self, ctx: &Arc<JetContext>, map: &[usize], n: usize) -> Result<VField, VFieldError> {
        let mut comps: Vec<Jet> = vec![Jet::zero(ctx); n];
        for (j, c) in self.comps.iter().enumerate() {
            comps[map[j]] = c.embed(ctx, map)?;
        }
        Ok(VField { ctx: ctx.clone(), n, comps })
    }

    /// Compose coefficients with a map of all context variables (used to
    /// re-centre or substitute parameters).
    pub fn compose_coeffs(&self, inner: &[Jet]) -> Result<VField, VFieldError> {
        let ctx = inner[0].ctx().clone();
        let comps = compose_map(&self.comps, inner)?;
        Ok(VField { ctx, n: self.n, comps })
    }

    pub fn pretty(&self) -> String {
        let mut parts = Vec::new();
        for (j, c) in self.comps.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            parts.push(format!("({})∂{}", c.pretty(), self.ctx.names()[j]));
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

/// `[V, W] = VW − WV`, componentwise `V(W_j) − W(V_j)`.
pub fn bracket(v: &VField, w: &VField) -> Result<VField, VFieldError> {
    v.check(w)?;
    let mut comps = Vec::with_capacity(v.n);
    for j in 0..v.n {
        let a = v.apply(&w.comps[j])?;
        let b = w.apply(&v.comps[j])?;
        comps.push(a.try_sub(&b)?);
    }
    Ok(VField { ctx: v.ctx.clone(), n: v.n, comps })
}

/// Taylor series of `x ↦ exp(V)(x)`, the time-one flow of a field that
/// vanishes when its parameters vanish.
///
/// Uses the Lie series `x_j + Σ_k V^k(x_j)/k!`, which terminates after `N`
/// terms because every application of `V` raises the parameter degree.
pub fn flow_exp(v: &ParamVField) -> Result<Vec<Jet>, VFieldError> {
    let ctx = &v.ctx;
    let n = v.n;
    for c in &v.comps {
        for (a, _) in c.terms() {
            if a.exps()[n..].iter().all(|&e| e == 0) {
                return Err(VFieldError::ParameterConstantTerm);
            }
        }
    }
    let order = ctx.order();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let xj = Jet::var(ctx, j);
        let mut acc = xj.clone();
        let mut term = xj;
        let mut fact = Q::from_i64(1);
        for k in 1..=order {
            term = v.apply(&term)?;
            if term.is_zero() {
                break;
            }
            fact = fact * Q::from_i64(k as i64);
            acc = acc.try_add(&term.scale(&Q::from_i64(1).div_ref(&fact).expect("nonzero")))?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// `φ_*V` for a map germ `φ` of the space variables fixing the base point.
/// `phi` has `n` components in `V`'s context (they may depend on parameters,
/// which are left untouched).
pub fn pushforward(phi: &[Jet], v: &VField) -> Result<VField, VFieldError> {
    let ctx = &v.ctx;
    let n = v.n;
    if phi.len() != n {
        return Err(JetError::Arity { expected: n, got: phi.len() }.into());
    }
    let full = extend_map(phi, ctx);
    let inv = invert_map(&full)?;
    let images: Vec<Jet> = phi.iter().map(|p| v.apply(p)).collect::<Result<_, _>>()?;
    let comps = compose_map(&images, &inv)?;
    Ok(VField { ctx: ctx.clone(), n, comps })
}

/// `(φ, p)`: a space map extended by the identity on parameters.
pub fn extend_map(phi: &[Jet], ctx: &Arc<JetContext>) -> Vec<Jet> {
    let mut full: Vec<Jet> = phi.to_vec();
    for i in phi.len()..ctx.nvars() {
        full.push(Jet::var(ctx, i));
    }
    full
}

/// Rank of the fields' values at the base point.
pub fn span_rank(fields: &[VField]) -> usize {
    let Some(f) = fields.first() else { return 0 };
    let mut e = Echelon::<Q>::new(f.n);
    for v in fields {
        e.insert(&v.at_base());
    }
    e.rank()
}

/// One retained element of a Lie closure.
#[derive(Clone, Debug)]
pub struct ClosureEntry {
    /// Bracket word, e.g. `[X1,[X1,X2]]`.
    pub word: String,
    /// Weighted degree (sum of generator degrees).
    pub degree: u32,
    /// Bracket length (number of generators).
    pub length: u32,
    pub field: VField,
}

/// Result of [`lie_closure`].
#[derive(Clone, Debug)]
pub struct LieClosure {
    pub entries: Vec<ClosureEntry>,
    /// Rank at the base point of everything retained.
    pub rank: usize,
    /// Indices into `entries` of a basis of the span at the base point.
    pub spanning: Vec<usize>,
    /// True if no further bracket within the budgets could add anything.
    pub saturated: bool,
    /// True if some candidate was skipped because its valid order dropped
    /// below zero (the context order is too small for the requested budget).
    pub order_starved: bool,
}

/// Budgets for [`lie_closure`].
#[derive(Clone, Copy, Debug)]
pub struct ClosureBudget {
    /// Maximal weighted degree of a bracket.
    pub max_degree: u32,
    /// Maximal bracket length.
    pub max_length: u32,
}

fn coeff_vector(v: &VField, order: i32) -> Vec<Q> {
    let nv = v.ctx.nvars();
    let monos: Vec<MultiIndex> = MultiIndex::all_up_to(nv, order.max(0) as u32);
    let mut out = Vec::with_capacity(monos.len() * v.n);
    for c in &v.comps {
        for a in &monos {
            out.push(c.get(a));
        }
    }
    out
}

/// Iterated brackets `[g₁,[g₂,[…,g_ℓ]]]` of the generators, enumerated by
/// increasing weighted degree.  A candidate whose jet (up to its valid order)
/// is a linear combination of fields already retained is pruned, since all of
/// its further brackets are then combinations of retained ones.  Stops early
/// once the base-point rank reaches the space dimension.
pub fn lie_closure(
    generators: &[(String, u32, VField)],
    budget: ClosureBudget,
) -> Result<LieClosure, VFieldError> {
    let mut res = LieClosure { entries: Vec::new(), rank: 0, spanning: Vec::new(), saturated: false, order_starved: false };
    let Some((_, _, g0)) = generators.first() else {
        res.saturated = true;
        return Ok(res);
    };
    let n = g0.n;
    let max_a = generators.iter().map(|g| g.1).max().unwrap_or(1).max(1);
    let mut base = Echelon::<Q>::new(n);
    let mut empty_run = 0u32;
    for deg in 1..=budget.max_degree {
        let mut candidates: Vec<(String, u32, VField)> = Vec::new();
        for (name, a, g) in generators {
            if *a == deg {
                candidates.push((name.clone(), 1, g.clone()));
            }
        }
        for (name, a, g) in generators {
            if *a >= deg {
                continue;
            }
            let need = deg - a;
            let inner: Vec<(String, u32, VField)> = res
                .entries
                .iter()
                .filter(|e| e.degree == need && e.length < budget.max_length)
                .map(|e| (e.word.clone(), e.length, e.field.clone()))
                .collect();
            for (w, l, f) in inner {
                let b = bracket(g, &f)?;
                candidates.push((format!("[{name},{w}]"), l + 1, b));
            }
        }
        let mut added = false;
        for (word, length, field) in candidates {
            if length > budget.max_length {
                continue;
            }
            let v = field.valid_order();
            if v < 0 {
                res.order_starved = true;
                continue;
            }
            let mut e = Echelon::<Q>::new(0);
            let cv = coeff_vector(&field, v);
            if cv.iter().all(|x| x.is_zero()) {
                continue;
            }
            if !res.entries.is_empty() {
                e = Echelon::new(cv.len());
                for r in &res.entries {
                    e.insert(&coeff_vector(&r.field, v));
                }
            }
            if e.dim() > 0 && e.contains(&cv) {
                continue;
            }
            let idx = res.entries.len();
            if base.insert(&field.at_base()) {
                res.spanning.push(idx);
            }
            res.entries.push(ClosureEntry { word, degree: deg, length, field });
            added = true;
            if base.rank() == n {
                res.rank = n;
                return Ok(res);
            }
        }
        if added {
            empty_run = 0;
        } else {
            empty_run += 1;
            if empty_run >= max_a {
                res.saturated = true;
                break;
            }
        }
    }
    res.rank = base.rank();
    Ok(res)
}
