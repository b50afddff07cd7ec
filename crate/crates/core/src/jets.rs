//! Truncated multivariate power series ("jets") with exact-rational or
//! floating coefficients.
//!
//! A [`Jet`] lives in a [`JetContext`] (ordered variable names plus a
//! truncation order `N`).  Coefficients of total degree `> N` are never
//! stored.  Every jet also carries a `valid_order`: coefficients of degree
//! `<= valid_order` are guaranteed to equal the true Taylor coefficients of
//! whatever exact computation the jet stands for; anything above may have
//! been polluted by truncation of an input.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rationals, the default coefficient field.
pub type Q = BigRational;

/// `n/d` as an exact rational.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Integer `n` as an exact rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JetError {
    #[error("jets live in different contexts")]
    ContextMismatch,
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("inner map has a nonzero constant term in component {0}")]
    NonzeroConstant(usize),
    #[error("linear part is singular")]
    SingularLinearPart,
    #[error("coefficient of order {requested} requested but jet is only valid to order {valid}")]
    BeyondValidOrder { requested: u32, valid: i32 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid context: {0}")]
    InvalidContext(String),
}

/// Coefficient field used by jets.
pub trait Scalar: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    const EXACT: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_i64(v: i64) -> Self;
    fn from_ratio(n: i64, d: i64) -> Self;
    fn from_q(v: &Q) -> Self;
    fn add_ref(&self, o: &Self) -> Self;
    fn sub_ref(&self, o: &Self) -> Self;
    fn mul_ref(&self, o: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    /// `None` on division by zero.
    fn div_ref(&self, o: &Self) -> Option<Self>;
    fn to_f64(&self) -> f64;
    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
    fn add_assign_ref(&mut self, o: &Self) {
        *self = self.add_ref(o);
    }
    fn add_mul_assign(&mut self, a: &Self, b: &Self) {
        let p = a.mul_ref(b);
        self.add_assign_ref(&p);
    }
    /// Treat as zero during elimination (exact zero for rationals).
    fn is_negligible(&self, scale: f64) -> bool;
}

impl Scalar for Q {
    const EXACT: bool = true;
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_i64(v: i64) -> Self {
        qi(v)
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        q(n, d)
    }
    fn from_q(v: &Q) -> Self {
        v.clone()
    }
    fn add_ref(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self * o
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn div_ref(&self, o: &Self) -> Option<Self> {
        if Zero::is_zero(o) {
            None
        } else {
            Some(self / o)
        }
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs_f64(&self) -> f64 {
        ToPrimitive::to_f64(&self.abs()).unwrap_or(f64::NAN)
    }
    fn add_assign_ref(&mut self, o: &Self) {
        *self += o;
    }
    fn add_mul_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn is_negligible(&self, _scale: f64) -> bool {
        Zero::is_zero(self)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        n as f64 / d as f64
    }
    fn from_q(v: &Q) -> Self {
        ToPrimitive::to_f64(v).unwrap_or(f64::NAN)
    }
    fn add_ref(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self * o
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn div_ref(&self, o: &Self) -> Option<Self> {
        if *o == 0.0 {
            None
        } else {
            Some(self / o)
        }
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_negligible(&self, scale: f64) -> bool {
        self.abs() <= 1e-11 * scale.max(1.0)
    }
}

/// Variable weight for weighted orders; `Infinite` sorts above every finite weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Weight {
    Finite(u32),
    Infinite,
}

impl Weight {
    pub fn is_finite(&self) -> bool {
        matches!(self, Weight::Finite(_))
    }
    pub fn finite(&self) -> Option<u32> {
        match self {
            Weight::Finite(w) => Some(*w),
            Weight::Infinite => None,
        }
    }
    pub fn plus(self, o: Weight) -> Weight {
        match (self, o) {
            (Weight::Finite(a), Weight::Finite(b)) => Weight::Finite(a + b),
            _ => Weight::Infinite,
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Finite(w) => write!(f, "{w}"),
            Weight::Infinite => write!(f, "inf"),
        }
    }
}

/// Exponent vector.  Ordered by total degree, then so that earlier
/// variables come first (`x² < xy < y²`, `x < t`).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    deg: u32,
    exps: Box<[u16]>,
}

impl Ord for MultiIndex {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.deg.cmp(&o.deg).then_with(|| o.exps.cmp(&self.exps))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl MultiIndex {
    pub fn new(exps: &[u16]) -> Self {
        let deg = exps.iter().map(|&e| e as u32).sum();
        MultiIndex { deg, exps: exps.into() }
    }
    pub fn zero(n: usize) -> Self {
        MultiIndex { deg: 0, exps: vec![0; n].into() }
    }
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0u16; n];
        e[i] = 1;
        MultiIndex { deg: 1, exps: e.into() }
    }
    pub fn len(&self) -> usize {
        self.exps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }
    pub fn degree(&self) -> u32 {
        self.deg
    }
    pub fn exps(&self) -> &[u16] {
        &self.exps
    }
    pub fn get(&self, i: usize) -> u16 {
        self.exps[i]
    }
    /// Σ αᵢ wᵢ, with the convention 0·∞ = 0.
    pub fn weighted_order(&self, weights: &[Weight]) -> Weight {
        let mut acc = Weight::Finite(0);
        for (e, w) in self.exps.iter().zip(weights) {
            if *e > 0 {
                acc = acc.plus(match w {
                    Weight::Finite(w) => Weight::Finite(w * *e as u32),
                    Weight::Infinite => Weight::Infinite,
                });
            }
        }
        acc
    }
    pub fn add(&self, o: &MultiIndex) -> MultiIndex {
        let exps: Vec<u16> = self.exps.iter().zip(o.exps.iter()).map(|(a, b)| a + b).collect();
        MultiIndex { deg: self.deg + o.deg, exps: exps.into() }
    }
    pub fn checked_sub(&self, o: &MultiIndex) -> Option<MultiIndex> {
        let mut exps = Vec::with_capacity(self.exps.len());
        for (a, b) in self.exps.iter().zip(o.exps.iter()) {
            exps.push(a.checked_sub(*b)?);
        }
        Some(MultiIndex { deg: self.deg - o.deg, exps: exps.into() })
    }
    pub fn le(&self, o: &MultiIndex) -> bool {
        self.exps.iter().zip(o.exps.iter()).all(|(a, b)| a <= b)
    }
    /// α! = Π αᵢ!
    pub fn factorial(&self) -> BigInt {
        let mut f = BigInt::one();
        for &e in self.exps.iter() {
            for k in 2..=e as u64 {
                f *= k;
            }
        }
        f
    }
    pub fn factorial_q(&self) -> Q {
        Q::from_integer(self.factorial())
    }
    /// All multi-indices in `n` variables of total degree exactly `d`, in the crate order.
    pub fn all_of_degree(n: usize, d: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u16; n];
        fn rec(i: usize, left: u32, cur: &mut Vec<u16>, out: &mut Vec<MultiIndex>) {
            let n = cur.len();
            if n == 0 {
                if left == 0 {
                    out.push(MultiIndex::new(cur));
                }
                return;
            }
            if i == n - 1 {
                cur[i] = left as u16;
                out.push(MultiIndex::new(cur));
                cur[i] = 0;
                return;
            }
            for e in 0..=left {
                cur[i] = e as u16;
                rec(i + 1, left - e, cur, out);
            }
            cur[i] = 0;
        }
        rec(0, d, &mut cur, &mut out);
        out.sort();
        out
    }
    /// All multi-indices of total degree `<= d`.
    pub fn all_up_to(n: usize, d: u32) -> Vec<MultiIndex> {
        (0..=d).flat_map(|k| Self::all_of_degree(n, k)).collect()
    }
    /// Sub-multi-indices β ≤ α.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![Vec::<u16>::new()];
        for &e in self.exps.iter() {
            let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
            for v in &out {
                for k in 0..=e {
                    let mut w = v.clone();
                    w.push(k);
                    next.push(w);
                }
            }
            out = next;
        }
        let mut r: Vec<MultiIndex> = out.iter().map(|v| MultiIndex::new(v)).collect();
        r.sort();
        r
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &self.exps[..])
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.exps.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Variable names, truncation order, optional weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetContext {
    names: Vec<String>,
    order: u32,
    weights: Option<Vec<Weight>>,
}

impl JetContext {
    pub fn new<S: AsRef<str>>(names: &[S], order: u32) -> Result<Arc<Self>, JetError> {
        if order < 1 {
            return Err(JetError::InvalidContext("truncation order must be >= 1".into()));
        }
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(JetError::InvalidContext(format!("duplicate variable `{a}`")));
            }
        }
        Ok(Arc::new(JetContext { names, order, weights: None }))
    }

    /// Convenience: `numbered(&[("x", 2), ("t", 1)], N)` gives `x1, x2, t1`.
    pub fn numbered(groups: &[(&str, usize)], order: u32) -> Arc<Self> {
        let mut names = Vec::new();
        for (p, c) in groups {
            for i in 1..=*c {
                names.push(format!("{p}{i}"));
            }
        }
        Self::new(&names, order).expect("numbered names are unique")
    }

    pub fn with_weights(&self, weights: Vec<Weight>) -> Result<Arc<Self>, JetError> {
        if weights.len() != self.names.len() {
            return Err(JetError::Arity { expected: self.names.len(), got: weights.len() });
        }
        Ok(Arc::new(JetContext { names: self.names.clone(), order: self.order, weights: Some(weights) }))
    }

    pub fn with_order(&self, order: u32) -> Arc<Self> {
        Arc::new(JetContext { names: self.names.clone(), order: order.max(1), weights: self.weights.clone() })
    }

    pub fn nvars(&self) -> usize {
        self.names.len()
    }
    pub fn order(&self) -> u32 {
        self.order
    }
    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn weights(&self) -> Option<&[Weight]> {
        self.weights.as_deref()
    }
    pub fn index_of(&self, name: &str) -> Result<usize, JetError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| JetError::UnknownVariable(name.into()))
    }
}

/// Coefficient mode of a jet type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoeffMode {
    ExactRational,
    Float,
}

/// Truncated power series.
#[derive(Clone)]
pub struct Jet<C: Scalar = Q> {
    ctx: Arc<JetContext>,
    terms: BTreeMap<MultiIndex, C>,
    valid: i32,
}

fn same_ctx(a: &Arc<JetContext>, b: &Arc<JetContext>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl<C: Scalar> PartialEq for Jet<C> {
    /// Equal contexts and equal stored coefficients (valid orders are ignored).
    fn eq(&self, o: &Self) -> bool {
        same_ctx(&self.ctx, &o.ctx) && self.terms == o.terms
    }
}

impl<C: Scalar> Jet<C> {
    pub fn mode() -> CoeffMode {
        if C::EXACT {
            CoeffMode::ExactRational
        } else {
            CoeffMode::Float
        }
    }

    pub fn zero(ctx: &Arc<JetContext>) -> Self {
        Jet { ctx: ctx.clone(), terms: BTreeMap::new(), valid: ctx.order as i32 }
    }

    pub fn constant(ctx: &Arc<JetContext>, c: C) -> Self {
        let mut j = Self::zero(ctx);
        if !c.is_zero() {
            j.terms.insert(MultiIndex::zero(ctx.nvars()), c);
        }
        j
    }

    pub fn one(ctx: &Arc<JetContext>) -> Self {
        Self::constant(ctx, C::one())
    }

    pub fn var(ctx: &Arc<JetContext>, i: usize) -> Self {
        Self::monomial(ctx, MultiIndex::unit(ctx.nvars(), i), C::one())
    }

    pub fn var_named(ctx: &Arc<JetContext>, name: &str) -> Result<Self, JetError> {
        Ok(Self::var(ctx, ctx.index_of(name)?))
    }

    /// `c·x^α`, dropped if `|α| > N`.
    pub fn monomial(ctx: &Arc<JetContext>, alpha: MultiIndex, c: C) -> Self {
        let mut j = Self::zero(ctx);
        if alpha.degree() <= ctx.order && !c.is_zero() {
            j.terms.insert(alpha, c);
        }
        j
    }

    /// Build from `(α, c)` pairs; duplicates are summed.
    pub fn from_terms<I: IntoIterator<Item = (MultiIndex, C)>>(ctx: &Arc<JetContext>, it: I) -> Self {
        let mut j = Self::zero(ctx);
        for (a, c) in it {
            j.add_term(a, &c);
        }
        j
    }

    pub fn ctx(&self) -> &Arc<JetContext> {
        &self.ctx
    }
    pub fn order(&self) -> u32 {
        self.ctx.order
    }
    pub fn valid_order(&self) -> i32 {
        self.valid
    }
    pub fn with_valid_order(mut self, v: i32) -> Self {
        self.valid = v.min(self.ctx.order as i32);
        self
    }
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &C)> {
        self.terms.iter()
    }
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Add `c·x^α` in place (ignored above the truncation order).
    pub fn add_term(&mut self, alpha: MultiIndex, c: &C) {
        if alpha.degree() > self.ctx.order || c.is_zero() {
            return;
        }
        match self.terms.get_mut(&alpha) {
            Some(v) => {
                v.add_assign_ref(c);
                if v.is_zero() {
                    self.terms.remove(&alpha);
                }
            }
            None => {
                self.terms.insert(alpha, c.clone());
            }
        }
    }

    /// Coefficient of `x^α`; errors past `valid_order`.
    pub fn coeff(&self, alpha: &MultiIndex) -> Result<C, JetError> {
        if alpha.degree() as i32 > self.valid {
            return Err(JetError::BeyondValidOrder { requested: alpha.degree(), valid: self.valid });
        }
        Ok(self.get(alpha))
    }

    /// Coefficient without the validity check.
    pub fn get(&self, alpha: &MultiIndex) -> C {
        self.terms.get(alpha).cloned().unwrap_or_else(C::zero)
    }

    pub fn constant_term(&self) -> C {
        self.get(&MultiIndex::zero(self.ctx.nvars()))
    }

    /// Lowest degree with a nonzero coefficient among the trustworthy ones,
    /// or `valid+1` if everything up to `valid` vanishes.
    pub fn low_degree(&self) -> i32 {
        match self.terms.keys().next() {
            Some(a) if (a.degree() as i32) <= self.valid => a.degree() as i32,
            _ => self.valid + 1,
        }
    }

    /// Drop everything above `valid_order`.
    pub fn trimmed(&self) -> Self {
        let v = self.valid;
        Jet {
            ctx: self.ctx.clone(),
            terms: self.terms.iter().filter(|(a, _)| a.degree() as i32 <= v).map(|(a, c)| (a.clone(), c.clone())).collect(),
            valid: v,
        }
    }

    /// Homogeneous part of degree `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        Jet {
            ctx: self.ctx.clone(),
            terms: self.terms.iter().filter(|(a, _)| a.degree() == d).map(|(a, c)| (a.clone(), c.clone())).collect(),
            valid: self.valid,
        }
    }

    /// Terms whose weighted order (under `weights`) equals `w`.
    pub fn weighted_part(&self, weights: &[Weight], w: Weight) -> Self {
        Jet {
            ctx: self.ctx.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(a, _)| a.weighted_order(weights) == w)
                .map(|(a, c)| (a.clone(), c.clone()))
                .collect(),
            valid: self.valid,
        }
    }

    /// Minimal weighted order among nonzero trustworthy terms (`Infinite` if none).
    pub fn weighted_order(&self, weights: &[Weight]) -> Weight {
        self.terms
            .iter()
            .filter(|(a, _)| a.degree() as i32 <= self.valid)
            .map(|(a, _)| a.weighted_order(weights))
            .min()
            .unwrap_or(Weight::Infinite)
    }

    fn check(&self, o: &Self) -> Result<(), JetError> {
        if same_ctx(&self.ctx, &o.ctx) {
            Ok(())
        } else {
            Err(JetError::ContextMismatch)
        }
    }

    pub fn try_add(&self, o: &Self) -> Result<Self, JetError> {
        self.check(o)?;
        let mut r = self.clone();
        for (a, c) in &o.terms {
            r.add_term(a.clone(), c);
        }
        r.valid = self.valid.min(o.valid);
        Ok(r)
    }

    pub fn try_sub(&self, o: &Self) -> Result<Self, JetError> {
        self.check(o)?;
        let mut r = self.clone();
        for (a, c) in &o.terms {
            r.add_term(a.clone(), &c.neg_ref());
        }
        r.valid = self.valid.min(o.valid);
        Ok(r)
    }

    /// Truncated product.  Valid order is `min(N, va + low(b), vb + low(a))`,
    /// which is never below `min(va, vb)`.
    pub fn try_mul(&self, o: &Self) -> Result<Self, JetError> {
        self.check(o)?;
        let n = self.ctx.order;
        let mut acc: BTreeMap<MultiIndex, C> = BTreeMap::new();
        for (a, ca) in &self.terms {
            if a.degree() > n {
                break;
            }
            for (b, cb) in &o.terms {
                if a.degree() + b.degree() > n {
                    break;
                }
                let k = a.add(b);
                match acc.get_mut(&k) {
                    Some(v) => v.add_mul_assign(ca, cb),
                    None => {
                        acc.insert(k, ca.mul_ref(cb));
                    }
                }
            }
        }
        acc.retain(|_, v| !v.is_zero());
        let valid = (n as i32).min(self.valid + o.low_degree()).min(o.valid + self.low_degree());
        Ok(Jet { ctx: self.ctx.clone(), terms: acc, valid })
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut r = Jet { ctx: self.ctx.clone(), terms: BTreeMap::new(), valid: self.valid };
        if c.is_zero() {
            return r;
        }
        for (a, v) in &self.terms {
            let p = v.mul_ref(c);
            if !p.is_zero() {
                r.terms.insert(a.clone(), p);
            }
        }
        r
    }

    pub fn neg(&self) -> Self {
        self.scale(&C::one().neg_ref())
    }

    /// `self^e` (e ≥ 0).
    pub fn pow(&self, e: u32) -> Self {
        let mut r = Self::one(&self.ctx);
        for _ in 0..e {
            r = r.try_mul(self).expect("same context");
        }
        r
    }

    /// ∂/∂x_var.  Lowers `valid_order` by one.
    pub fn partial(&self, var: usize) -> Self {
        let mut r = Jet { ctx: self.ctx.clone(), terms: BTreeMap::new(), valid: self.valid - 1 };
        for (a, c) in &self.terms {
            let e = a.get(var);
            if e == 0 {
                continue;
            }
            let mut ex = a.exps().to_vec();
            ex[var] -= 1;
            r.terms.insert(MultiIndex::new(&ex), c.mul_ref(&C::from_i64(e as i64)));
        }
        r
    }

    /// Re-express in another context; variable `i` of `self` becomes variable
    /// `map[i]` of `ctx`.  Terms above the new order are dropped.
    pub fn embed(&self, ctx: &Arc<JetContext>, map: &[usize]) -> Result<Self, JetError> {
        if map.len() != self.ctx.nvars() {
            return Err(JetError::Arity { expected: self.ctx.nvars(), got: map.len() });
        }
        let mut r = Jet::zero(ctx);
        for (a, c) in &self.terms {
            let mut ex = vec![0u16; ctx.nvars()];
            for (i, &e) in a.exps().iter().enumerate() {
                ex[map[i]] += e;
            }
            r.add_term(MultiIndex::new(&ex), c);
        }
        r.valid = self.valid.min(ctx.order as i32);
        Ok(r)
    }

    /// Same variables, different truncation order.
    pub fn retruncate(&self, ctx: &Arc<JetContext>) -> Result<Self, JetError> {
        if ctx.names != self.ctx.names {
            return Err(JetError::ContextMismatch);
        }
        let map: Vec<usize> = (0..ctx.nvars()).collect();
        self.embed(ctx, &map)
    }

    /// Coefficient of `Π_{i∈vars} x_i^{exps_i}` viewed as a jet in the
    /// remaining variables (given by `rest`, an ordered list of variable
    /// indices of `self` that become the variables of `target`).  Monomials
    /// involving a variable outside `vars ∪ rest` are discarded, i.e. those
    /// variables are set to zero.
    pub fn slice(&self, vars: &[usize], exps: &[u16], rest: &[usize], target: &Arc<JetContext>) -> Self {
        let fixed: u32 = exps.iter().map(|&e| e as u32).sum();
        let mut r = Jet::zero(target);
        'outer: for (a, c) in &self.terms {
            for (v, e) in vars.iter().zip(exps) {
                if a.get(*v) != *e {
                    continue 'outer;
                }
            }
            let mut ex = vec![0u16; target.nvars()];
            let mut used = fixed;
            for (j, &v) in rest.iter().enumerate() {
                ex[j] = a.get(v);
                used += a.get(v) as u32;
            }
            if used != a.degree() {
                continue;
            }
            r.add_term(MultiIndex::new(&ex), c);
        }
        r.valid = (self.valid - fixed as i32).min(target.order as i32);
        r
    }

    /// Substitute constants for some variables is not supported for
    /// truncated series; `eval` evaluates the stored polynomial.
    pub fn eval(&self, point: &[C]) -> C {
        let mut s = C::zero();
        for (a, c) in &self.terms {
            let mut m = c.clone();
            for (i, &e) in a.exps().iter().enumerate() {
                for _ in 0..e {
                    m = m.mul_ref(&point[i]);
                }
            }
            s.add_assign_ref(&m);
        }
        s
    }

    /// Evaluate in floating point.
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        let mut s = 0.0;
        for (a, c) in &self.terms {
            let mut m = c.to_f64();
            for (i, &e) in a.exps().iter().enumerate() {
                if e > 0 {
                    m *= point[i].powi(e as i32);
                }
            }
            s += m;
        }
        s
    }

    /// Convert coefficients to another scalar type.
    pub fn convert<D: Scalar>(&self) -> Jet<D>
    where
        C: Into<Q> + Clone,
    {
        let mut r = Jet::<D>::zero(&self.ctx);
        for (a, c) in &self.terms {
            let qv: Q = c.clone().into();
            r.add_term(a.clone(), &D::from_q(&qv));
        }
        r.valid = self.valid;
        r
    }

    /// Float copy of the coefficients.
    pub fn to_f64_jet(&self) -> Jet<f64> {
        let mut r = Jet::<f64>::zero(&self.ctx);
        for (a, c) in &self.terms {
            r.add_term(a.clone(), &c.to_f64());
        }
        r.valid = self.valid;
        r
    }

    /// Human-readable polynomial form.
    pub fn pretty(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, (a, c)) in self.terms.iter().enumerate() {
            let cs = format!("{c}");
            let (neg, body) = match cs.strip_prefix('-') {
                Some(b) => (true, b.to_string()),
                None => (false, cs),
            };
            if i == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let mono = monomial_str(&self.ctx, a);
            if mono.is_empty() {
                s.push_str(&body);
            } else if body == "1" {
                s.push_str(&mono);
            } else {
                s.push_str(&format!("{body}*{mono}"));
            }
        }
        s
    }
}

fn monomial_str(ctx: &JetContext, a: &MultiIndex) -> String {
    let mut parts = Vec::new();
    for (i, &e) in a.exps().iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(ctx.names[i].clone()),
            _ => parts.push(format!("{}^{}", ctx.names[i], e)),
        }
    }
    parts.join("*")
}

impl<C: Scalar> fmt::Debug for Jet<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet[{} | N={}, valid={}]", self.pretty(), self.ctx.order, self.valid)
    }
}

impl<C: Scalar> fmt::Display for Jet<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

// Operator sugar; these panic on a context mismatch, use `try_*` to handle it.
impl<C: Scalar> std::ops::Add for &Jet<C> {
    type Output = Jet<C>;
    fn add(self, o: &Jet<C>) -> Jet<C> {
        self.try_add(o).expect("jet context mismatch")
    }
}
impl<C: Scalar> std::ops::Sub for &Jet<C> {
    type Output = Jet<C>;
    fn sub(self, o: &Jet<C>) -> Jet<C> {
        self.try_sub(o).expect("jet context mismatch")
    }
}
impl<C: Scalar> std::ops::Mul for &Jet<C> {
    type Output = Jet<C>;
    fn mul(self, o: &Jet<C>) -> Jet<C> {
        self.try_mul(o).expect("jet context mismatch")
    }
}
impl<C: Scalar> std::ops::Neg for &Jet<C> {
    type Output = Jet<C>;
    fn neg(self) -> Jet<C> {
        Jet::neg(self)
    }
}

/// Operation selector for [`jet_arith`].
#[derive(Clone, Debug)]
pub enum ArithOp<C: Scalar> {
    Add,
    Sub,
    Mul,
    Scale(C),
}

/// Ring operations on two jets of the same context.
pub fn jet_arith<C: Scalar>(a: &Jet<C>, b: &Jet<C>, op: ArithOp<C>) -> Result<Jet<C>, JetError> {
    match op {
        ArithOp::Add => a.try_add(b),
        ArithOp::Sub => a.try_sub(b),
        ArithOp::Mul => a.try_mul(b),
        ArithOp::Scale(c) => {
            a.check(b)?;
            Ok(a.scale(&c))
        }
    }
}

/// Taylor series of `outer ∘ inner`.  `outer` is a jet in `m` variables,
/// `inner` holds `m` jets (sharing one context) with zero constant term.
pub fn compose<C: Scalar>(outer: &Jet<C>, inner: &[Jet<C>]) -> Result<Jet<C>, JetError> {
    let out = compose_map(std::slice::from_ref(outer), inner)?;
    Ok(out.into_iter().next().expect("one component"))
}

/// Componentwise [`compose`] sharing the power cache.
pub fn compose_map<C: Scalar>(outer: &[Jet<C>], inner: &[Jet<C>]) -> Result<Vec<Jet<C>>, JetError> {
    let Some(first) = inner.first() else {
        return Err(JetError::Arity { expected: 1, got: 0 });
    };
    let ctx = first.ctx.clone();
    for o in outer {
        if o.ctx.nvars() != inner.len() {
            return Err(JetError::Arity { expected: o.ctx.nvars(), got: inner.len() });
        }
    }
    let mut inner_valid = ctx.order as i32;
    for (i, g) in inner.iter().enumerate() {
        if !same_ctx(&g.ctx, &ctx) {
            return Err(JetError::ContextMismatch);
        }
        if !g.constant_term().is_zero() {
            return Err(JetError::NonzeroConstant(i));
        }
        inner_valid = inner_valid.min(g.valid);
    }
    let n = ctx.order;
    // powers[i][e] = inner_i^e, built lazily up to the largest exponent used
    let mut max_e = vec![0u16; inner.len()];
    for o in outer {
        for a in o.terms.keys() {
            for (i, &e) in a.exps().iter().enumerate() {
                max_e[i] = max_e[i].max(e.min(n as u16));
            }
        }
    }
    let mut powers: Vec<Vec<Jet<C>>> = Vec::with_capacity(inner.len());
    for (i, g) in inner.iter().enumerate() {
        let mut v = vec![Jet::one(&ctx)];
        for e in 1..=max_e[i] {
            let next = v[(e - 1) as usize].try_mul(g)?;
            v.push(next);
        }
        powers.push(v);
    }
    let mut result = Vec::with_capacity(outer.len());
    for o in outer {
        let mut acc = Jet::zero(&ctx);
        for (a, c) in &o.terms {
            if a.degree() > n {
                continue;
            }
            let mut m = Jet::constant(&ctx, c.clone());
            for (i, &e) in a.exps().iter().enumerate() {
                if e > 0 {
                    m = m.try_mul(&powers[i][e as usize])?;
                    if m.is_zero() {
                        break;
                    }
                }
            }
            for (k, v) in m.terms {
                acc.add_term(k, &v);
            }
        }
        acc.valid = (n as i32).min(o.valid).min(inner_valid);
        result.push(acc);
    }
    Ok(result)
}

/// Solve `A x = b` over a field; `None` if singular.
pub fn solve_linear<C: Scalar>(a: &[Vec<C>], b: &[Vec<C>]) -> Option<Vec<Vec<C>>> {
    let n = a.len();
    let m = b.first().map(|r| r.len()).unwrap_or(0);
    let scale = a.iter().flatten().map(|x| x.abs_f64()).fold(0.0, f64::max);
    let mut aug: Vec<Vec<C>> = a.iter().zip(b).map(|(r, s)| r.iter().chain(s.iter()).cloned().collect()).collect();
    for col in 0..n {
        let piv = if C::EXACT {
            (col..n).find(|&r| !aug[r][col].is_zero())?
        } else {
            let p = (col..n).max_by(|&x, &y| aug[x][col].abs_f64().partial_cmp(&aug[y][col].abs_f64()).unwrap())?;
            if aug[p][col].is_negligible(scale) {
                return None;
            }
            p
        };
        aug.swap(col, piv);
        let inv = C::one().div_ref(&aug[col][col])?;
        for x in aug[col].iter_mut() {
            *x = x.mul_ref(&inv);
        }
        for r in 0..n {
            if r != col && !aug[r][col].is_zero() {
                let f = aug[r][col].clone();
                for c in 0..n + m {
                    let v = aug[col][c].mul_ref(&f);
                    aug[r][c] = aug[r][c].sub_ref(&v);
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Inverse of a map germ `F` with `F(0)=0` and invertible linear part, by the
/// fixed point `G = L⁻¹(y − N(G))` where `F = L + N`.  `F` has `n`
/// components in an `n`-variable context.
pub fn invert_map<C: Scalar>(f: &[Jet<C>]) -> Result<Vec<Jet<C>>, JetError> {
    let Some(first) = f.first() else {
        return Err(JetError::Arity { expected: 1, got: 0 });
    };
    let ctx = first.ctx.clone();
    let n = f.len();
    if ctx.nvars() != n {
        return Err(JetError::Arity { expected: ctx.nvars(), got: n });
    }
    for (i, g) in f.iter().enumerate() {
        if !same_ctx(&g.ctx, &ctx) {
            return Err(JetError::ContextMismatch);
        }
        if !g.constant_term().is_zero() {
            return Err(JetError::NonzeroConstant(i));
        }
    }
    let lin: Vec<Vec<C>> = f.iter().map(|g| (0..n).map(|j| g.get(&MultiIndex::unit(n, j))).collect()).collect();
    let id: Vec<Vec<C>> = (0..n).map(|i| (0..n).map(|j| if i == j { C::one() } else { C::zero() }).collect()).collect();
    let linv = solve_linear(&lin, &id).ok_or(JetError::SingularLinearPart)?;
    // nonlinear parts N_i = F_i − (L y)_i
    let nonlin: Vec<Jet<C>> = f
        .iter()
        .map(|g| {
            let mut r = g.clone();
            for j in 0..n {
                r.terms.remove(&MultiIndex::unit(n, j));
            }
            r
        })
        .collect();
    let valid = f.iter().map(|g| g.valid).min().unwrap_or(ctx.order as i32);
    let apply_linv = |v: &[Jet<C>]| -> Vec<Jet<C>> {
        (0..n)
            .map(|i| {
                let mut acc = Jet::zero(&ctx);
                for (j, vj) in v.iter().enumerate() {
                    if !linv[i][j].is_zero() {
                        for (a, c) in &vj.terms {
                            acc.add_term(a.clone(), &c.mul_ref(&linv[i][j]));
                        }
                    }
                }
                acc
            })
            .collect()
    };
    let ys: Vec<Jet<C>> = (0..n).map(|i| Jet::var(&ctx, i)).collect();
    let mut g = apply_linv(&ys);
    for _ in 0..=ctx.order {
        let ng = compose_map(&nonlin, &g)?;
        let rhs: Vec<Jet<C>> = ys.iter().zip(&ng).map(|(y, m)| y.try_sub(m)).collect::<Result<_, _>>()?;
        let next = apply_linv(&rhs);
        if next == g {
            break;
        }
        g = next;
    }
    for gi in g.iter_mut() {
        gi.valid = valid.min(ctx.order as i32);
    }
    Ok(g)
}

/// Exact (or float) determinant of a small square matrix of scalars.
pub fn det<C: Scalar>(m: &[Vec<C>]) -> C {
    let n = m.len();
    let mut a: Vec<Vec<C>> = m.to_vec();
    let scale = a.iter().flatten().map(|x| x.abs_f64()).fold(0.0, f64::max);
    let mut d = C::one();
    for col in 0..n {
        let piv = if C::EXACT {
            (col..n).find(|&r| !a[r][col].is_zero())
        } else {
            (col..n)
                .max_by(|&x, &y| a[x][col].abs_f64().partial_cmp(&a[y][col].abs_f64()).unwrap())
                .filter(|&p| !a[p][col].is_negligible(scale))
        };
        let Some(p) = piv else { return C::zero() };
        if p != col {
            a.swap(p, col);
            d = d.neg_ref();
        }
        d = d.mul_ref(&a[col][col]);
        let inv = C::one().div_ref(&a[col][col]).expect("nonzero pivot");
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].mul_ref(&inv);
            for c in col..n {
                let v = a[col][c].mul_ref(&f);
                a[r][c] = a[r][c].sub_ref(&v);
            }
        }
    }
    d
}

/// Determinant of a square matrix of jets by minor expansion over column
/// subsets (2ⁿ·n products instead of n!).
pub fn jet_det<C: Scalar>(m: &[Vec<Jet<C>>]) -> Result<Jet<C>, JetError> {
    let n = m.len();
    let ctx = m[0][0].ctx.clone();
    if n == 0 {
        return Ok(Jet::one(&ctx));
    }
    // minors[S] = det of rows 0..|S| with columns S (bitmask)
    let mut minors: Vec<Option<Jet<C>>> = vec![None; 1 << n];
    minors[0] = Some(Jet::one(&ctx));
    for mask in 1usize..(1 << n) {
        let row = mask.count_ones() as usize - 1;
        let mut acc = Jet::zero(&ctx);
        let mut sign_pos = 0;
        for c in 0..n {
            if mask & (1 << c) == 0 {
                continue;
            }
            let sub = minors[mask & !(1 << c)].as_ref().expect("built in increasing order");
            // Laplace along the last row: sign (−1)^(row + position of c in S)
            let term = m[row][c].try_mul(sub)?;
            acc = if (row + sign_pos) % 2 == 0 { acc.try_add(&term)? } else { acc.try_sub(&term)? };
            sign_pos += 1;
        }
        minors[mask] = Some(acc);
    }
    Ok(minors[(1 << n) - 1].take().expect("full minor"))
}

/// An exact, untruncated multivariate polynomial (used for parsed family
/// specifications and closed forms that need numeric evaluation).
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Q>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }
    pub fn constant(nvars: usize, c: Q) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, <Q as One>::one());
        p
    }
    pub fn nvars(&self) -> usize {
        self.nvars
    }
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Q)> {
        self.terms.iter()
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn add_term(&mut self, e: Vec<u32>, c: Q) {
        if Zero::is_zero(&c) {
            return;
        }
        let entry = self.terms.entry(e.clone()).or_insert_with(<Q as Zero>::zero);
        *entry += c;
        if Zero::is_zero(entry) {
            self.terms.remove(&e);
        }
    }
    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(e.clone(), c.clone());
        }
        r
    }
    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&qi(-1)))
    }
    pub fn scale(&self, c: &Q) -> Self {
        let mut r = Self::zero(self.nvars);
        for (e, v) in &self.terms {
            r.add_term(e.clone(), v * c);
        }
        r
    }
    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero(self.nvars);
        for (a, ca) in &self.terms {
            for (b, cb) in &o.terms {
                let e: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                r.add_term(e, ca * cb);
            }
        }
        r
    }
    pub fn pow(&self, k: u32) -> Self {
        let mut r = Self::constant(self.nvars, <Q as One>::one());
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }
    pub fn eval(&self, x: &[Q]) -> Q {
        let mut s = <Q as Zero>::zero();
        for (e, c) in &self.terms {
            let mut m = c.clone();
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    m *= &x[i];
                }
            }
            s += m;
        }
        s
    }
    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (e, c) in &self.terms {
            let mut m = ToPrimitive::to_f64(c).unwrap_or(f64::NAN);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    m *= x[i].powi(k as i32);
                }
            }
            s += m;
        }
        s
    }
    /// Partial derivative with respect to variable `i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut r = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                r.add_term(f, c * qi(e[i] as i64));
            }
        }
        r
    }
    /// Substitute polynomials (all in the same number of variables) for each variable.
    pub fn substitute(&self, subs: &[Polynomial]) -> Polynomial {
        let nv = subs.first().map(|p| p.nvars).unwrap_or(0);
        let mut r = Self::zero(nv);
        for (e, c) in &self.terms {
            let mut m = Polynomial::constant(nv, c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    m = m.mul(&subs[i].pow(k));
                }
            }
            r = r.add(&m);
        }
        r
    }
    /// p(x + shift).
    pub fn translate(&self, shift: &[Q]) -> Polynomial {
        let subs: Vec<Polynomial> = (0..self.nvars)
            .map(|i| Polynomial::var(self.nvars, i).add(&Polynomial::constant(self.nvars, shift[i].clone())))
            .collect();
        self.substitute(&subs)
    }
    /// Truncate into a jet (variables matched by position).
    pub fn to_jet(&self, ctx: &Arc<JetContext>) -> Result<Jet<Q>, JetError> {
        if ctx.nvars() != self.nvars {
            return Err(JetError::Arity { expected: ctx.nvars(), got: self.nvars });
        }
        let mut j = Jet::zero(ctx);
        for (e, c) in &self.terms {
            let ex: Vec<u16> = e.iter().map(|&k| k as u16).collect();
            j.add_term(MultiIndex::new(&ex), c);
        }
        Ok(j)
    }
    /// Exact polynomial from a jet (dropping terms above its valid order).
    pub fn from_jet(j: &Jet<Q>) -> Polynomial {
        let mut p = Polynomial::zero(j.ctx().nvars());
        for (a, c) in j.terms() {
            if a.degree() as i32 <= j.valid_order() {
                p.add_term(a.exps().iter().map(|&e| e as u32).collect(), c.clone());
            }
        }
        p
    }
}

/// Incremental row echelon form: tracks the rank of a growing set of vectors
/// and expresses new vectors in terms of the inserted ones.
#[derive(Clone, Debug)]
pub struct Echelon<C: Scalar = Q> {
    dim: usize,
    // (pivot column, reduced row, combination of inserted vectors giving the row)
    rows: Vec<(usize, Vec<C>, Vec<C>)>,
    inserted: usize,
    scale: f64,
}

impl<C: Scalar> Echelon<C> {
    pub fn new(dim: usize) -> Self {
        Echelon { dim, rows: Vec::new(), inserted: 0, scale: 0.0 }
    }
    pub fn rank(&self) -> usize {
        self.rows.len()
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    /// Number of vectors passed to `insert` that were kept.
    pub fn kept(&self) -> usize {
        self.inserted
    }

    fn reduce_with_combo(&self, v: &[C]) -> (Vec<C>, Vec<C>) {
        let mut r = v.to_vec();
        let mut combo = vec![C::zero(); self.inserted];
        for (p, row, rc) in &self.rows {
            if r[*p].is_negligible(self.scale) {
                r[*p] = C::zero();
                continue;
            }
            let f = r[*p].clone();
            for (x, y) in r.iter_mut().zip(row) {
                if !y.is_zero() {
                    *x = x.sub_ref(&y.mul_ref(&f));
                }
            }
            for (x, y) in combo.iter_mut().zip(rc) {
                if !y.is_zero() {
                    x.add_mul_assign(y, &f);
                }
            }
        }
        (r, combo)
    }

    /// True if `v` lies in the current span.
    pub fn contains(&self, v: &[C]) -> bool {
        let s = self.scale.max(v.iter().map(|x| x.abs_f64()).fold(0.0, f64::max));
        self.reduce_with_combo(v).0.iter().all(|x| x.is_negligible(s))
    }

    /// Coefficients `c` with `v = Σ c_i w_i` over the kept vectors, if any.
    pub fn express(&self, v: &[C]) -> Option<Vec<C>> {
        let s = self.scale.max(v.iter().map(|x| x.abs_f64()).fold(0.0, f64::max));
        let (r, combo) = self.reduce_with_combo(v);
        if r.iter().all(|x| x.is_negligible(s)) {
            Some(combo)
        } else {
            None
        }
    }

    /// Insert `v`; returns `true` (and keeps it) iff it raised the rank.
    pub fn insert(&mut self, v: &[C]) -> bool {
        assert_eq!(v.len(), self.dim, "echelon vector length");
        let vs = v.iter().map(|x| x.abs_f64()).fold(0.0, f64::max);
        let scale = self.scale.max(vs);
        let (mut r, mut combo) = self.reduce_with_combo(v);
        let piv = if C::EXACT {
            r.iter().position(|x| !x.is_zero())
        } else {
            r.iter()
                .enumerate()
                .filter(|(_, x)| !x.is_negligible(scale))
                .max_by(|a, b| a.1.abs_f64().partial_cmp(&b.1.abs_f64()).unwrap())
                .map(|(i, _)| i)
        };
        let Some(p) = piv else { return false };
        self.scale = scale;
        // combination: r = v − Σ combo_i w_i
        for c in combo.iter_mut() {
            *c = c.neg_ref();
        }
        combo.push(C::one());
        for (_, _, rc) in self.rows.iter_mut() {
            rc.push(C::zero());
        }
        let inv = C::one().div_ref(&r[p]).expect("nonzero pivot");
        for x in r.iter_mut() {
            *x = x.mul_ref(&inv);
        }
        for x in combo.iter_mut() {
            *x = x.mul_ref(&inv);
        }
        // keep rows fully reduced
        for (_, row, rc) in self.rows.iter_mut() {
            if row[p].is_zero() {
                continue;
            }
            let f = row[p].clone();
            for (x, y) in row.iter_mut().zip(&r) {
                *x = x.sub_ref(&y.mul_ref(&f));
            }
            for (x, y) in rc.iter_mut().zip(&combo) {
                *x = x.sub_ref(&y.mul_ref(&f));
            }
        }
        self.rows.push((p, r, combo));
        self.inserted += 1;
        true
    }
}

/// Some solution of the (possibly rectangular) system `A x = b`, or `None`
/// if inconsistent.  Columns of `A` are the unknowns.
pub fn solve_consistent<C: Scalar>(a: &[Vec<C>], b: &[C]) -> Option<Vec<C>> {
    let ncols = a.first().map(|r| r.len()).unwrap_or(0);
    let nrows = a.len();
    let mut e = Echelon::<C>::new(nrows);
    let mut kept = Vec::new();
    for j in 0..ncols {
        let col: Vec<C> = a.iter().map(|r| r[j].clone()).collect();
        if e.insert(&col) {
            kept.push(j);
        }
    }
    let c = e.express(b)?;
    let mut x = vec![C::zero(); ncols];
    for (k, j) in kept.iter().enumerate() {
        x[*j] = c[k].clone();
    }
    Some(x)
}
