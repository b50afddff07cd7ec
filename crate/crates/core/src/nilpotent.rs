//! Relatively free nilpotent Lie algebras `N_m^{a₁..a_p}` and their groups in
//! exponential coordinates.
//!
//! Basis: Lyndon words of weighted degree `≤ m` over the generators, ordered
//! by length and then lexicographically, each bracketed by its standard
//! factorization `w = u·v` (`v` the longest proper Lyndon suffix).  All
//! algebra is done inside the truncated free associative algebra, where a Lie
//! element is rewritten in the basis by repeatedly peeling off its
//! lexicographically smallest word (which is always a Lyndon word whose
//! bracket polynomial starts with that word, coefficient 1).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::jets::{compose_map, q, qi, Jet, JetContext, MultiIndex, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NilpotentError {
    #[error("invalid algebra parameters: {0}")]
    InvalidParameters(String),
    #[error("element is not a Lie polynomial (smallest word `{0}` is not a basis word)")]
    NotLie(String),
    #[error("dilation factor must be positive")]
    NonPositiveDilation,
    #[error("elements belong to different algebras")]
    AlgebraMismatch,
}

type Word = Vec<u8>;

/// Bracketing tree of a basis element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tree {
    Leaf(usize),
    Node(Box<Tree>, Box<Tree>),
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(i) => write!(f, "Y{}", i + 1),
            Tree::Node(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// A basis element: Lyndon word plus its standard bracketing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HallWord {
    pub letters: Vec<usize>,
    pub tree: Tree,
    /// Weighted degree `|I|`.
    pub degree: u32,
}

impl HallWord {
    pub fn length(&self) -> usize {
        self.letters.len()
    }
    /// Compact label such as `12` or `1_2` (separator used when `p ≥ 10`).
    pub fn label(&self, p: usize) -> String {
        let sep = if p >= 10 { "_" } else { "" };
        self.letters.iter().map(|l| (l + 1).to_string()).collect::<Vec<_>>().join(sep)
    }
}

/// Element of the truncated free associative algebra with jet coefficients.
type Free = BTreeMap<Word, Jet>;

fn is_lyndon(w: &[u8]) -> bool {
    (1..w.len()).all(|i| w < &w[i..])
}

/// `N_m^{a}` with its Lyndon–Hall basis and exact structure constants.
#[derive(Clone, Debug)]
pub struct NilpotentAlgebra {
    p: usize,
    degrees: Vec<u32>,
    m: u32,
    basis: Vec<HallWord>,
    index: BTreeMap<Word, usize>,
    polys: Vec<BTreeMap<Word, Q>>,
    brackets: BTreeMap<(usize, usize), Vec<(usize, Q)>>,
    group: Arc<GroupLaw>,
}

/// Exact polynomials `P_I(u, v)` of the group law plus a float evaluator.
#[derive(Clone, Debug)]
struct GroupLaw {
    ctx: Arc<JetContext>,
    p: Vec<Jet>,
    float: Vec<Vec<(Vec<(usize, i32)>, f64)>>,
}

impl NilpotentAlgebra {
    /// Build `N_m^{a₁..a_p}`.
    pub fn build(p: usize, degrees: &[u32], m: u32) -> Result<Self, NilpotentError> {
        if p == 0 || degrees.len() != p {
            return Err(NilpotentError::InvalidParameters("need p ≥ 1 generator degrees".into()));
        }
        if degrees.iter().any(|&a| a == 0) {
            return Err(NilpotentError::InvalidParameters("degrees must be positive".into()));
        }
        let amax = *degrees.iter().max().expect("p ≥ 1");
        if m < amax {
            return Err(NilpotentError::InvalidParameters(format!("m = {m} is below the largest degree {amax}")));
        }
        if p > 200 {
            return Err(NilpotentError::InvalidParameters("too many generators".into()));
        }
        // enumerate Lyndon words of weighted degree ≤ m
        let mut words: Vec<Word> = Vec::new();
        let mut frontier: Vec<(Word, u32)> = vec![(Vec::new(), 0)];
        while let Some((w, d)) = frontier.pop() {
            for (l, &a) in degrees.iter().enumerate() {
                if d + a <= m {
                    let mut nw = w.clone();
                    nw.push(l as u8);
                    if is_lyndon(&nw) {
                        words.push(nw.clone());
                    }
                    frontier.push((nw, d + a));
                }
            }
        }
        words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        words.dedup();
        let mut index = BTreeMap::new();
        let mut basis = Vec::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            index.insert(w.clone(), i);
        }
        for w in &words {
            let tree = standard_tree(w, &index);
            basis.push(HallWord {
                letters: w.iter().map(|&l| l as usize).collect(),
                tree,
                degree: w.iter().map(|&l| degrees[l as usize]).sum(),
            });
        }
        let mut alg = NilpotentAlgebra {
            p,
            degrees: degrees.to_vec(),
            m,
            basis,
            index,
            polys: Vec::new(),
            brackets: BTreeMap::new(),
            group: Arc::new(GroupLaw { ctx: JetContext::numbered(&[("z", 1)], 1), p: vec![], float: vec![] }),
        };
        alg.polys = alg.basis.iter().map(|h| alg.tree_poly(&h.tree)).collect();
        // structure constants
        for i in 0..alg.dim() {
            for j in i + 1..alg.dim() {
                if alg.basis[i].degree + alg.basis[j].degree > m {
                    continue;
                }
                let pi = &alg.polys[i];
                let pj = &alg.polys[j];
                let mut c = alg.q_product(pi, pj);
                for (w, v) in alg.q_product(pj, pi) {
                    let e = c.entry(w.clone()).or_insert_with(Q::zero);
                    *e -= v;
                    if e.is_zero() {
                        c.remove(&w);
                    }
                }
                let coords = alg.rewrite_q(c)?;
                if !coords.is_empty() {
                    alg.brackets.insert((i, j), coords);
                }
            }
        }
        alg.group = Arc::new(alg.build_group_law()?);
        Ok(alg)
    }

    pub fn p(&self) -> usize {
        self.p
    }
    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn basis(&self) -> &[HallWord] {
        &self.basis
    }
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
    /// Homogeneous dimension `Q = Σ |I|`.
    pub fn homogeneous_dimension(&self) -> u32 {
        self.basis.iter().map(|h| h.degree).sum()
    }
    pub fn basis_degrees(&self) -> Vec<u32> {
        self.basis.iter().map(|h| h.degree).collect()
    }
    /// Index of the generator `Y_{i}` (0-based) in the basis.
    pub fn generator_index(&self, i: usize) -> usize {
        self.index[&vec![i as u8]]
    }
    /// Coordinate names `u<label>`.
    pub fn coordinate_names(&self, prefix: &str) -> Vec<String> {
        self.basis.iter().map(|h| format!("{prefix}{}", h.label(self.p))).collect()
    }

    /// `[Y_I, Y_J]` in the basis.
    pub fn bracket(&self, i: usize, j: usize) -> Vec<(usize, Q)> {
        if i == j {
            return vec![];
        }
        let (a, b, s) = if i < j { (i, j, Q::one()) } else { (j, i, -Q::one()) };
        self.brackets.get(&(a, b)).map(|v| v.iter().map(|(k, c)| (*k, c * &s)).collect()).unwrap_or_default()
    }

    /// `c^K_{IJ}`.
    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> Q {
        self.bracket(i, j).into_iter().find(|(kk, _)| *kk == k).map(|(_, c)| c).unwrap_or_else(Q::zero)
    }

    fn weight(&self, w: &[u8]) -> u32 {
        w.iter().map(|&l| self.degrees[l as usize]).sum()
    }

    fn tree_poly(&self, t: &Tree) -> BTreeMap<Word, Q> {
        match t {
            Tree::Leaf(i) => BTreeMap::from([(vec![*i as u8], Q::one())]),
            Tree::Node(a, b) => {
                let pa = self.tree_poly(a);
                let pb = self.tree_poly(b);
                let mut r = self.q_product(&pa, &pb);
                for (w, v) in self.q_product(&pb, &pa) {
                    let e = r.entry(w.clone()).or_insert_with(Q::zero);
                    *e -= v;
                    if e.is_zero() {
                        r.remove(&w);
                    }
                }
                r
            }
        }
    }

    fn q_product(&self, a: &BTreeMap<Word, Q>, b: &BTreeMap<Word, Q>) -> BTreeMap<Word, Q> {
        let mut r: BTreeMap<Word, Q> = BTreeMap::new();
        for (wa, ca) in a {
            for (wb, cb) in b {
                let mut w = wa.clone();
                w.extend_from_slice(wb);
                if self.weight(&w) > self.m {
                    continue;
                }
                let e = r.entry(w.clone()).or_insert_with(Q::zero);
                *e += ca * cb;
                if e.is_zero() {
                    r.remove(&w);
                }
            }
        }
        r
    }

    fn rewrite_q(&self, mut x: BTreeMap<Word, Q>) -> Result<Vec<(usize, Q)>, NilpotentError> {
        let mut out = Vec::new();
        while let Some((w, c)) = x.iter().next().map(|(w, c)| (w.clone(), c.clone())) {
            let Some(&i) = self.index.get(&w) else {
                return Err(NilpotentError::NotLie(format!("{w:?}")));
            };
            for (pw, pc) in &self.polys[i] {
                let e = x.entry(pw.clone()).or_insert_with(Q::zero);
                *e -= &c * pc;
                if e.is_zero() {
                    x.remove(pw);
                }
            }
            out.push((i, c));
        }
        out.sort_by_key(|(i, _)| *i);
        Ok(out)
    }

    // --- free algebra with jet coefficients -------------------------------

    fn f_product(&self, a: &Free, b: &Free) -> Free {
        let mut r: Free = BTreeMap::new();
        for (wa, ca) in a {
            for (wb, cb) in b {
                let mut w = wa.clone();
                w.extend_from_slice(wb);
                if self.weight(&w) > self.m {
                    continue;
                }
                let prod = ca * cb;
                if prod.is_zero() {
                    continue;
                }
                match r.get_mut(&w) {
                    Some(e) => {
                        *e = &*e + &prod;
                        if e.is_zero() {
                            r.remove(&w);
                        }
                    }
                    None => {
                        r.insert(w, prod);
                    }
                }
            }
        }
        r
    }

    fn f_add_scaled(&self, acc: &mut Free, x: &Free, s: &Q) {
        for (w, c) in x {
            let v = c.scale(s);
            match acc.get_mut(w) {
                Some(e) => {
                    *e = &*e + &v;
                    if e.is_zero() {
                        acc.remove(w);
                    }
                }
                None => {
                    if !v.is_zero() {
                        acc.insert(w.clone(), v);
                    }
                }
            }
        }
    }

    /// `Σ_k X^k/k!` for `X` without constant term (empty word ↔ constant).
    fn f_exp(&self, x: &Free, ctx: &Arc<JetContext>) -> Free {
        let mut acc: Free = BTreeMap::from([(Vec::new(), Jet::one(ctx))]);
        let mut pow = x.clone();
        let mut fact = Q::one();
        for k in 1..=self.m {
            fact *= qi(k as i64);
            self.f_add_scaled(&mut acc, &pow, &(Q::one() / &fact));
            pow = self.f_product(&pow, x);
            if pow.is_empty() {
                break;
            }
        }
        acc
    }

    /// `log(1 + Z) = Σ (−1)^{k+1} Z^k / k`.
    fn f_log1p(&self, z: &Free) -> Free {
        let mut acc: Free = BTreeMap::new();
        let mut pow = z.clone();
        for k in 1..=self.m {
            let s = if k % 2 == 1 { q(1, k as i64) } else { q(-1, k as i64) };
            self.f_add_scaled(&mut acc, &pow, &s);
            pow = self.f_product(&pow, z);
            if pow.is_empty() {
                break;
            }
        }
        acc
    }

    fn rewrite_jet(&self, mut x: Free, ctx: &Arc<JetContext>) -> Result<Vec<Jet>, NilpotentError> {
        let mut out = vec![Jet::zero(ctx); self.dim()];
        while let Some((w, c)) = x.iter().next().map(|(w, c)| (w.clone(), c.clone())) {
            let Some(&i) = self.index.get(&w) else {
                return Err(NilpotentError::NotLie(format!("{w:?}")));
            };
            for (pw, pc) in &self.polys[i] {
                let v = c.scale(pc);
                match x.get_mut(pw) {
                    Some(e) => {
                        *e = &*e - &v;
                        if e.is_zero() {
                            x.remove(pw);
                        }
                    }
                    None => {
                        x.insert(pw.clone(), v.neg());
                    }
                }
            }
            out[i] = &out[i] + &c;
        }
        Ok(out)
    }

    fn lie_element(&self, coords: &[Jet]) -> Free {
        let mut acc: Free = BTreeMap::new();
        for (i, c) in coords.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (w, pc) in &self.polys[i] {
                let v = c.scale(pc);
                match acc.get_mut(w) {
                    Some(e) => {
                        *e = &*e + &v;
                        if e.is_zero() {
                            acc.remove(w);
                        }
                    }
                    None => {
                        acc.insert(w.clone(), v);
                    }
                }
            }
        }
        acc
    }

    /// Coordinates of `log(exp(A)·exp(B))` for Lie elements with jet
    /// coordinates (no constant terms), truncated at weighted degree `m`.
    pub fn bch(&self, a: &[Jet], b: &[Jet]) -> Result<Vec<Jet>, NilpotentError> {
        let ctx = a.first().or(b.first()).ok_or_else(|| NilpotentError::InvalidParameters("empty".into()))?.ctx().clone();
        if a.len() != self.dim() || b.len() != self.dim() {
            return Err(NilpotentError::AlgebraMismatch);
        }
        let ea = self.f_exp(&self.lie_element(a), &ctx);
        let eb = self.f_exp(&self.lie_element(b), &ctx);
        let mut z = self.f_product(&ea, &eb);
        z.remove(&Vec::new());
        let log = self.f_log1p(&z);
        self.rewrite_jet(log, &ctx)
    }

    fn build_group_law(&self) -> Result<GroupLaw, NilpotentError> {
        let d = self.dim();
        let mut names = self.coordinate_names("u");
        names.extend(self.coordinate_names("v"));
        let ctx = JetContext::new(&names, self.m.max(1)).map_err(|e| NilpotentError::InvalidParameters(e.to_string()))?;
        let u: Vec<Jet> = (0..d).map(|i| Jet::var(&ctx, i)).collect();
        let v: Vec<Jet> = (0..d).map(|i| Jet::var(&ctx, d + i)).collect();
        // exp(Σ v)·exp(Σ u)
        let p = self.bch(&v, &u)?;
        let float = p
            .iter()
            .map(|j| {
                j.terms()
                    .map(|(a, c)| {
                        let f: Vec<(usize, i32)> =
                            a.exps().iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, &e)| (i, e as i32)).collect();
                        (f, c.to_f64().unwrap_or(f64::NAN))
                    })
                    .collect()
            })
            .collect();
        Ok(GroupLaw { ctx, p, float })
    }

    /// Context `(u_I…, v_I…)` of the group-law polynomials.
    pub fn product_context(&self) -> &Arc<JetContext> {
        &self.group.ctx
    }

    /// `P_I(u, v)`: exponential coordinates of `exp(Σ v_I Y_I)·exp(Σ u_I Y_I)`.
    pub fn product_polynomials(&self) -> &[Jet] {
        &self.group.p
    }

    fn check_len(&self, x: &[Q]) -> Result<(), NilpotentError> {
        if x.len() != self.dim() {
            Err(NilpotentError::AlgebraMismatch)
        } else {
            Ok(())
        }
    }

    /// Exact group product `x·y = exp(Σx)·exp(Σy)`.
    pub fn group_multiply(&self, x: &[Q], y: &[Q]) -> Result<Vec<Q>, NilpotentError> {
        self.check_len(x)?;
        self.check_len(y)?;
        let mut pt: Vec<Q> = y.to_vec();
        pt.extend_from_slice(x);
        Ok(self.group.p.iter().map(|j| j.eval(&pt)).collect())
    }

    /// Float group product.
    pub fn group_multiply_f64(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.group
            .float
            .iter()
            .map(|terms| {
                let mut s = 0.0;
                for (f, c) in terms {
                    let mut m = *c;
                    for &(i, e) in f {
                        let val = if i < d { y[i] } else { x[i - d] };
                        m *= val.powi(e);
                    }
                    s += m;
                }
                s
            })
            .collect()
    }

    /// Compose the group law with jets: `x·y` where `x`, `y` are coordinate
    /// jets (no constant terms) in a common context.
    pub fn multiply_jets(&self, x: &[Jet], y: &[Jet]) -> Result<Vec<Jet>, NilpotentError> {
        let mut inner: Vec<Jet> = y.to_vec();
        inner.extend_from_slice(x);
        let ctx = inner[0].ctx().clone();
        let p: Vec<Jet> = self
            .group
            .p
            .iter()
            .map(|j| Jet::from_terms(&self.group.ctx.with_order(ctx.order()), j.terms().map(|(a, c)| (a.clone(), c.clone()))))
            .collect();
        compose_map(&p, &inner).map_err(|e| NilpotentError::InvalidParameters(e.to_string()))
    }

    pub fn inverse(&self, x: &[Q]) -> Vec<Q> {
        x.iter().map(|c| -c).collect()
    }

    /// `δ_r(u)_I = r^{|I|} u_I` (exact).
    pub fn dilate_exact(&self, u: &[Q], r: &Q) -> Result<Vec<Q>, NilpotentError> {
        if !r.is_positive() {
            return Err(NilpotentError::NonPositiveDilation);
        }
        Ok(u.iter().zip(&self.basis).map(|(x, h)| x * num::pow(r.clone(), h.degree as usize)).collect())
    }

    /// `δ_r(u)` in floating point.
    pub fn dilate(&self, u: &[f64], r: f64) -> Result<Vec<f64>, NilpotentError> {
        if !(r > 0.0) {
            return Err(NilpotentError::NonPositiveDilation);
        }
        Ok(u.iter().zip(&self.basis).map(|(x, h)| x * r.powi(h.degree as i32)).collect())
    }

    /// `ρ(u) = Σ |u_I|^{1/|I|}`.
    pub fn norm_rho(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.basis).map(|(x, h)| x.abs().powf(1.0 / h.degree as f64)).sum()
    }

    /// `d(x, y) = ρ(x⁻¹·y)`.
    pub fn quasi_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let xi: Vec<f64> = x.iter().map(|v| -v).collect();
        self.norm_rho(&self.group_multiply_f64(&xi, y))
    }

    /// Left-invariant field of `Y_J`: `d/ds (u·exp(sY_J))` at `s = 0`, as
    /// coefficient jets in `ctx` whose first `d` variables are `u`.
    pub fn left_invariant_field(&self, j: usize, ctx: &Arc<JetContext>) -> Vec<Jet> {
        let d = self.dim();
        let mut comps = vec![Jet::zero(ctx); d];
        for (i, pi) in self.group.p.iter().enumerate() {
            for (a, c) in pi.terms() {
                // degree exactly 1 in the u-block, and that factor is u_j
                let udeg: u32 = a.exps()[..d].iter().map(|&e| e as u32).sum();
                if udeg != 1 || a.get(j) != 1 {
                    continue;
                }
                let mut ex = vec![0u16; ctx.nvars()];
                ex[..d].copy_from_slice(&a.exps()[d..]);
                comps[i].add_term(MultiIndex::new(&ex), c);
            }
        }
        comps
    }

    /// The homogeneous pieces `c_k` of `log(exp(a)·exp(b))` for two free
    /// generators, in the basis of `N_order^{1,1}`.
    pub fn bch_series(order: u32) -> Result<(NilpotentAlgebra, Vec<Vec<(usize, Q)>>), NilpotentError> {
        let alg = NilpotentAlgebra::build(2, &[1, 1], order)?;
        let ctx = JetContext::new::<&str>(&[], 1).map_err(|e| NilpotentError::InvalidParameters(e.to_string()))?;
        let d = alg.dim();
        let mut a = vec![Jet::zero(&ctx); d];
        let mut b = vec![Jet::zero(&ctx); d];
        a[alg.generator_index(0)] = Jet::one(&ctx);
        b[alg.generator_index(1)] = Jet::one(&ctx);
        let c = alg.bch(&a, &b)?;
        let mut by_degree = vec![Vec::new(); order as usize];
        for (i, j) in c.iter().enumerate() {
            let v = j.constant_term();
            if !v.is_zero() {
                by_degree[alg.basis[i].degree as usize - 1].push((i, v));
            }
        }
        Ok((alg, by_degree))
    }

    /// Monte Carlo volume of `{ρ(u) < r}` (sampling the box `|u_I| < r^{|I|}`).
    pub fn ball_volume_mc(&self, r: f64, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half: Vec<f64> = self.basis.iter().map(|h| r.powi(h.degree as i32)).collect();
        let box_vol: f64 = half.iter().map(|h| 2.0 * h).product();
        let mut u = vec![0.0; self.dim()];
        let mut hits = 0usize;
        for _ in 0..samples {
            for (x, h) in u.iter_mut().zip(&half) {
                *x = rng.gen_range(-*h..*h);
            }
            if self.norm_rho(&u) < r {
                hits += 1;
            }
        }
        box_vol * hits as f64 / samples as f64
    }

    /// Log–log slope of the ball volume over `radii`; `samples` in total,
    /// split evenly, each radius with its own seeded stream.
    pub fn ball_volume_exponent(&self, radii: &[f64], samples: usize, seed: u64) -> (f64, Vec<(f64, f64)>) {
        let per = (samples / radii.len().max(1)).max(1);
        let table: Vec<(f64, f64)> =
            radii.iter().enumerate().map(|(i, &r)| (r, self.ball_volume_mc(r, per, seed.wrapping_add(i as u64)))).collect();
        let xs: Vec<f64> = table.iter().map(|(r, _)| r.log2()).collect();
        let ys: Vec<f64> = table.iter().map(|(_, v)| v.log2()).collect();
        (crate::fit::slope(&xs, &ys), table)
    }
}

/// Quasi-triangle constant used for `ρ`-distances: `d(x,z) ≤ C(d(x,y)+d(y,z))`.
///
/// Valid for the models built here; asserted by sampling in the tests.
pub const QUASI_TRIANGLE_CONSTANT: f64 = 4.0;

fn standard_tree(w: &[u8], index: &BTreeMap<Word, usize>) -> Tree {
    if w.len() == 1 {
        return Tree::Leaf(w[0] as usize);
    }
    // longest proper suffix that is Lyndon
    let split = (1..w.len()).find(|&i| index.contains_key(&w[i..]) || is_lyndon(&w[i..])).expect("a single letter is Lyndon");
    Tree::Node(Box::new(standard_tree(&w[..split], index)), Box::new(standard_tree(&w[split..], index)))
}

/// Sample random rationals with small numerators/denominators (test helper
/// shared by examples and the acceptance suite).
pub fn random_rationals(rng: &mut impl Rng, n: usize) -> Vec<Q> {
    (0..n).map(|_| q(rng.gen_range(-6..=6), rng.gen_range(1..=4))).collect()
}

/// Float view of exact coordinates.
pub fn to_f64_vec(x: &[Q]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_basis_and_law() {
        let a = NilpotentAlgebra::build(2, &[1, 1], 2).unwrap();
        assert_eq!(a.dim(), 3);
        assert_eq!(a.homogeneous_dimension(), 4);
        assert_eq!(a.basis()[2].tree.to_string(), "[Y1,Y2]");
        let p = a.product_polynomials();
        assert_eq!(p[0].pretty(), "u1 + v1");
        assert_eq!(p[2].pretty(), "u12 + v12 - 1/2*u1*v2 + 1/2*u2*v1");
        assert_eq!(a.structure_constant(0, 1, 2), qi(1));
    }

    #[test]
    fn small_dimensions() {
        let a = NilpotentAlgebra::build(2, &[1, 1], 3).unwrap();
        assert_eq!((a.dim(), a.homogeneous_dimension()), (5, 10));
        let b = NilpotentAlgebra::build(1, &[1], 1).unwrap();
        assert_eq!((b.dim(), b.homogeneous_dimension()), (1, 1));
        assert!(NilpotentAlgebra::build(2, &[1, 3], 2).is_err());
    }

    #[test]
    fn dilation_and_norm_examples() {
        let a = NilpotentAlgebra::build(2, &[1, 1], 2).unwrap();
        assert_eq!(a.dilate_exact(&[qi(1), qi(1), qi(1)], &qi(2)).unwrap(), vec![qi(2), qi(2), qi(4)]);
        assert!((a.norm_rho(&[1.0, 0.0, 4.0]) - 3.0).abs() < 1e-12);
        let u = a.dilate(&[1.0, 0.0, 4.0], 2.0).unwrap();
        assert!((a.norm_rho(&u) - 6.0).abs() < 1e-12);
        assert_eq!(a.quasi_distance(&[0.3, -0.2, 0.1], &[0.3, -0.2, 0.1]), 0.0);
        assert!(a.dilate(&[1.0, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn identity_and_inverse() {
        let a = NilpotentAlgebra::build(2, &[1, 1], 3).unwrap();
        let u = vec![q(1, 2), qi(-1), q(3, 4), qi(2), q(-1, 3)];
        let z = vec![Q::zero(); 5];
        assert_eq!(a.group_multiply(&u, &z).unwrap(), u);
        assert_eq!(a.group_multiply(&u, &a.inverse(&u)).unwrap(), z);
    }
}
