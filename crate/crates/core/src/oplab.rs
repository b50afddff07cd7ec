//! Floating-point laboratory for dyadic singular Radon transforms.
//!
//! Everything here is numeric: grids on a periodic box, kernels with their
//! dyadic decomposition, discretised operators `T_j`, mollifiers `S_j`,
//! operator norms, and the exponent fits the experiments report.  Results
//! are reproducible bit-for-bit from their configuration and seed: parallel
//! loops only ever `map` + `collect`, and reductions run in a fixed order.

use crate::fit;
use crate::freegeom::FreeFrame;
use crate::curvature::GammaFamily;
use crate::jets::Polynomial;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OplabError {
    #[error("grid: {0}")]
    Grid(String),
    #[error("kernel: {0}")]
    Kernel(String),
    #[error("γ leaves the box at x = {x:?}, t = {t:?}")]
    LeavesBox { x: Vec<f64>, t: Vec<f64> },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Geometry(#[from] crate::freegeom::FreeGeomError),
}

pub type Result<T> = std::result::Result<T, OplabError>;

// ---------------------------------------------------------------------------
// quadrature and cutoffs

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Composite 8-point Gauss–Legendre rule on `[a, b]` with `panels` panels.
pub fn composite_gl(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let base = gauss_legendre(8);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * 8);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for &(x, w) in &base {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

fn e_pos(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// Smooth plateau: 1 on `[0, r0]`, 0 on `[r1, ∞)`, C^∞ in between.
pub fn plateau(r: f64, r0: f64, r1: f64) -> f64 {
    let u = (r1 - r) / (r1 - r0);
    let a = e_pos(u);
    let b = e_pos(1.0 - u);
    if a + b == 0.0 {
        return if u >= 1.0 { 1.0 } else { 0.0 };
    }
    a / (a + b)
}

/// `χ(r)`: 1 for `r ≤ 1/2`, 0 for `r ≥ 1`.
pub fn chi(r: f64) -> f64 {
    plateau(r, 0.5, 1.0)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// grid

/// Periodic box `Π [-side_a/2, side_a/2)` sampled at `points_a` points per axis
/// (powers of two).  Flat indices are row-major, last axis fastest.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Grid {
    pub side: Vec<f64>,
    pub points: Vec<usize>,
}

impl Grid {
    pub fn new(n: usize, side: f64, points: usize) -> Result<Self> {
        Grid::anisotropic(vec![side; n], vec![points; n])
    }
    pub fn anisotropic(side: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        if side.len() != points.len() || side.is_empty() {
            return Err(OplabError::Grid("side/points length mismatch".into()));
        }
        if let Some(p) = points.iter().find(|p| !p.is_power_of_two()) {
            return Err(OplabError::Grid(format!("{p} points per axis is not a power of two")));
        }
        if side.iter().any(|s| !(*s > 0.0)) {
            return Err(OplabError::Grid("non-positive side".into()));
        }
        Ok(Grid { side, points })
    }
    pub fn n(&self) -> usize {
        self.side.len()
    }
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn spacing(&self, axis: usize) -> f64 {
        self.side[axis] / self.points[axis] as f64
    }
    pub fn min_spacing(&self) -> f64 {
        (0..self.n()).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }
    pub fn cell_volume(&self) -> f64 {
        (0..self.n()).map(|a| self.spacing(a)).product()
    }
    pub fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.n()];
        for a in (0..self.n()).rev() {
            m[a] = idx % self.points[a];
            idx /= self.points[a];
        }
        m
    }
    pub fn flat(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.points).fold(0, |acc, (i, p)| acc * p + i)
    }
    pub fn coord(&self, idx: usize) -> Vec<f64> {
        self.multi(idx).iter().enumerate().map(|(a, &i)| -0.5 * self.side[a] + i as f64 * self.spacing(a)).collect()
    }
    /// Angular frequency of Fourier index `k` on `axis` (signed, FFT order).
    pub fn frequency(&self, axis: usize, k: usize) -> f64 {
        let p = self.points[axis] as i64;
        let s = if (k as i64) < p / 2 { k as i64 } else { k as i64 - p };
        2.0 * PI * s as f64 / self.side[axis]
    }
    pub fn frequencies(&self, idx: usize) -> Vec<f64> {
        self.multi(idx).iter().enumerate().map(|(a, &k)| self.frequency(a, k)).collect()
    }
    /// Sample a function at every grid point.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
        (0..self.len()).into_par_iter().map(|i| f(&self.coord(i))).collect()
    }
    fn inside(&self, y: &[f64], margin: f64) -> bool {
        y.iter().zip(&self.side).all(|(v, s)| v.abs() <= 0.5 * s - margin)
    }
    /// Discrete `L²` norm.
    pub fn l2(&self, f: &[f64]) -> f64 {
        (f.iter().map(|v| v * v).sum::<f64>() * self.cell_volume()).sqrt()
    }
}

/// Off-grid sampling rule.  `Spectral` evaluates translations exactly on
/// Fourier modes and is only available for translation-invariant families.
#[derive(Clone, Copy, Debug, Serialize, serde::Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Linear,
    Cubic,
    Spectral,
}

fn stencil_1d(pos: f64, interp: Interp) -> Vec<(i64, f64)> {
    let i0 = pos.floor();
    let u = pos - i0;
    let i0 = i0 as i64;
    match interp {
        Interp::Linear => vec![(i0, 1.0 - u), (i0 + 1, u)],
        _ => {
            // Keys cubic convolution, a = -1/2
            let w = |x: f64| {
                let x = x.abs();
                if x <= 1.0 {
                    1.5 * x * x * x - 2.5 * x * x + 1.0
                } else if x < 2.0 {
                    -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0
                } else {
                    0.0
                }
            };
            (-1..=2).map(|o| (i0 + o, w(u - o as f64))).collect()
        }
    }
}

/// Tensor stencil `(flat index, weight)` for the point `y` (periodic wrap).
fn stencil(grid: &Grid, y: &[f64], interp: Interp) -> Vec<(usize, f64)> {
    let per_axis: Vec<Vec<(i64, f64)>> = y
        .iter()
        .enumerate()
        .map(|(a, v)| stencil_1d((v + 0.5 * grid.side[a]) / grid.spacing(a), interp))
        .collect();
    let mut out = vec![(0usize, 1.0f64)];
    for (a, st) in per_axis.iter().enumerate() {
        let p = grid.points[a] as i64;
        let mut next = Vec::with_capacity(out.len() * st.len());
        for &(idx, w) in &out {
            for &(i, wi) in st {
                next.push((idx * grid.points[a] + i.rem_euclid(p) as usize, w * wi));
            }
        }
        out = next;
    }
    out
}

/// Interpolated value of grid data `f` at `y`.
pub fn interpolate(grid: &Grid, f: &[f64], y: &[f64], interp: Interp) -> f64 {
    stencil(grid, y, interp).iter().map(|&(i, w)| w * f[i]).sum()
}

// ---------------------------------------------------------------------------
// FFT helpers

fn fftn(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    let mut stride = 1;
    for a in (0..shape.len()).rev() {
        let len = shape[a];
        let fft = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let block = stride * len;
        for start in (0..total).step_by(block) {
            for off in 0..stride {
                for (i, l) in line.iter_mut().enumerate() {
                    *l = data[start + off + i * stride];
                }
                fft.process(&mut line);
                for (i, l) in line.iter().enumerate() {
                    data[start + off + i * stride] = *l;
                }
            }
        }
        stride *= len;
    }
}

// ---------------------------------------------------------------------------
// kernels

#[derive(Clone, Copy, Debug, Serialize, serde::Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `1/t` (k = 1).
    Hilbert,
    /// `t₁/|t|^{k+1}`.
    Riesz,
    /// Smooth nonnegative density `c·χ(|t|/a)` with unit mass.
    Bump,
}

/// Kernel on `ℝ^k \ {0}` with cutoff radius `a` and the dyadic bump
/// `η(t) = χ(|t|/a) − χ(2|t|/a)`, so that `Σ_{j≥0} η(2^j t) = χ(|t|/a)`.
#[derive(Clone, Debug, Serialize)]
pub struct KernelSpec {
    pub k: usize,
    pub kind: KernelKind,
    pub a: f64,
    /// Quadrature resolution: Gauss panels per radial interval and angles
    /// on the circle (k = 2).
    pub panels: usize,
    pub angles: usize,
    bump_mass: f64,
}

impl KernelSpec {
    pub fn hilbert(a: f64) -> Self {
        KernelSpec { k: 1, kind: KernelKind::Hilbert, a, panels: 16, angles: 32, bump_mass: 1.0 }
    }
    pub fn riesz(k: usize, a: f64) -> Result<Self> {
        if !(1..=2).contains(&k) {
            return Err(OplabError::Unsupported(format!("quadrature for k = {k} (only k ≤ 2)")));
        }
        Ok(KernelSpec { k, kind: if k == 1 { KernelKind::Hilbert } else { KernelKind::Riesz }, a, panels: 16, angles: 32, bump_mass: 1.0 })
    }
    pub fn bump(k: usize, a: f64) -> Result<Self> {
        if !(1..=2).contains(&k) {
            return Err(OplabError::Unsupported(format!("quadrature for k = {k} (only k ≤ 2)")));
        }
        let radial = composite_gl(0.0, 1.0, 64);
        let mass = match k {
            1 => 2.0 * a * radial.iter().map(|&(r, w)| w * chi(r)).sum::<f64>(),
            _ => 2.0 * PI * a * a * radial.iter().map(|&(r, w)| w * r * chi(r)).sum::<f64>(),
        };
        Ok(KernelSpec { k, kind: KernelKind::Bump, a, panels: 16, angles: 32, bump_mass: mass })
    }
    pub fn with_resolution(mut self, panels: usize, angles: usize) -> Self {
        self.panels = panels.max(1);
        self.angles = angles.max(2) & !1;
        self
    }

    /// `K(t)`.
    pub fn value(&self, t: &[f64]) -> f64 {
        let r = norm(t);
        match self.kind {
            KernelKind::Hilbert => 1.0 / t[0],
            KernelKind::Riesz => t[0] / r.powi(self.k as i32 + 1),
            KernelKind::Bump => chi(r / self.a) / self.bump_mass,
        }
    }
    pub fn eta(&self, t: &[f64]) -> f64 {
        let r = norm(t);
        chi(r / self.a) - chi(2.0 * r / self.a)
    }
    /// `K₀ = K·η`.
    pub fn k0(&self, t: &[f64]) -> f64 {
        let e = self.eta(t);
        if e == 0.0 {
            0.0
        } else {
            self.value(t) * e
        }
    }
    /// `K_j(t) = K(t) η(2^j t)`.
    pub fn kj(&self, j: u32, t: &[f64]) -> f64 {
        let s: Vec<f64> = t.iter().map(|v| v * 2f64.powi(j as i32)).collect();
        let e = self.eta(&s);
        if e == 0.0 {
            0.0
        } else {
            self.value(t) * e
        }
    }
    /// `K(t)·χ(|t|/a)`, the kernel the dyadic pieces sum to.
    pub fn truncated(&self, t: &[f64]) -> f64 {
        let c = chi(norm(t) / self.a);
        if c == 0.0 {
            0.0
        } else {
            self.value(t) * c
        }
    }
    /// `∫_{|t|=1} K dσ` by the trapezoid rule on the circle (exact pairing
    /// for odd kernels).
    pub fn sphere_mean(&self) -> f64 {
        match self.k {
            1 => self.value(&[1.0]) + self.value(&[-1.0]),
            _ => {
                let m = 4 * self.angles;
                (0..m)
                    .map(|l| {
                        let th = 2.0 * PI * l as f64 / m as f64;
                        self.value(&[th.cos(), th.sin()]) * 2.0 * PI / m as f64
                    })
                    .sum()
            }
        }
    }
    /// `max |Σ_{j≤J} K_j(t) − K(t)χ(|t|/a)|` over `a2^{−J} ≤ |t| ≤ a`.
    pub fn dyadic_reconstruction_error(&self, jmax: u32, samples: usize) -> f64 {
        let lo = (self.a * 2f64.powi(-(jmax as i32))).ln();
        let hi = self.a.ln();
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            let r = (lo + (hi - lo) * i as f64 / (samples - 1).max(1) as f64).exp();
            for dir in self.sample_dirs() {
                let t: Vec<f64> = dir.iter().map(|d| d * r).collect();
                let sum: f64 = (0..=jmax).map(|j| self.kj(j, &t)).sum();
                let want = self.truncated(&t);
                worst = worst.max((sum - want).abs() / want.abs().max(1.0));
            }
        }
        worst
    }
    /// `max |K_j(t) − 2^{jk} K₀(2^j t)|` relative to `|K_j|`.
    pub fn rescaling_error(&self, j: u32, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        let scale = 2f64.powi(j as i32);
        for i in 0..samples {
            let r = self.a * 2f64.powi(-(j as i32)) * (0.25 + 0.75 * (i as f64 + 0.5) / samples as f64);
            for dir in self.sample_dirs() {
                let t: Vec<f64> = dir.iter().map(|d| d * r).collect();
                let s: Vec<f64> = t.iter().map(|v| v * scale).collect();
                let lhs = self.kj(j, &t);
                let rhs = scale.powi(self.k as i32) * self.k0(&s);
                worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1e-300));
            }
        }
        worst
    }
    fn sample_dirs(&self) -> Vec<Vec<f64>> {
        match self.k {
            1 => vec![vec![1.0], vec![-1.0]],
            _ => (0..8).map(|l| {
                let th = 2.0 * PI * (l as f64 + 0.3) / 8.0;
                vec![th.cos(), th.sin()]
            }).collect(),
        }
    }

    /// Radial-times-angular rule on `r ∈ [r0, r1]`, nodes paired `t ↔ −t`.
    fn polar_rule(&self, r0: f64, r1: f64, panels: usize) -> Vec<(Vec<f64>, f64)> {
        let radial = composite_gl(r0, r1, panels);
        match self.k {
            1 => {
                let mut out = Vec::with_capacity(2 * radial.len());
                for &(r, w) in &radial {
                    out.push((vec![r], w));
                    out.push((vec![-r], w));
                }
                out
            }
            _ => {
                let m = self.angles;
                let mut out = Vec::with_capacity(m * radial.len());
                for &(r, w) in &radial {
                    for l in 0..m {
                        let th = 2.0 * PI * l as f64 / m as f64;
                        out.push((vec![r * th.cos(), r * th.sin()], w * r * 2.0 * PI / m as f64));
                    }
                }
                out
            }
        }
    }

    /// Quadrature `(t, weight·K_j(t))` for `∫ f(γ_t x) K_j(t) dt`.  Written
    /// as `t = 2^{−j}s` with `s` on the support `a/4 ≤ |s| ≤ a` of `η`, so
    /// the weight is `w(s)·K₀(s)`; symmetric pairing makes `Σ weights = 0`
    /// exactly for odd kernels.
    pub fn nodes_j(&self, j: u32) -> Vec<(Vec<f64>, f64)> {
        let sc = 2f64.powi(-(j as i32));
        self.polar_rule(0.25 * self.a, self.a, self.panels)
            .into_iter()
            .map(|(s, w)| {
                let wk = w * self.k0(&s);
                (s.iter().map(|v| v * sc).collect(), wk)
            })
            .collect()
    }
    /// Nodes for the whole truncated kernel (the principal value of
    /// `Σ_{j≤J} T_j`), or the full bump for the averaging kernel.
    pub fn nodes_total(&self, jmax: u32) -> Vec<(Vec<f64>, f64)> {
        match self.kind {
            KernelKind::Bump => self
                .polar_rule(0.0, self.a, self.panels)
                .into_iter()
                .map(|(t, w)| {
                    let v = self.value(&t);
                    (t, w * v)
                })
                .collect(),
            _ => (0..=jmax).flat_map(|j| self.nodes_j(j)).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// numeric families

type MapFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
type ShiftFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A family `γ(x, t)` evaluated in floating point.  Translation-invariant
/// families `γ(x, t) = x − h(t)` keep `h` so operators can be circulant.
#[derive(Clone)]
pub struct NumericGamma {
    pub label: String,
    pub n: usize,
    pub k: usize,
    map: Arc<MapFn>,
    shift: Option<Arc<ShiftFn>>,
}

impl fmt::Debug for NumericGamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumericGamma").field("label", &self.label).field("n", &self.n).field("k", &self.k).field("translation", &self.shift.is_some()).finish()
    }
}

impl NumericGamma {
    pub fn new(label: &str, n: usize, k: usize, f: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        NumericGamma { label: label.into(), n, k, map: Arc::new(f), shift: None }
    }
    /// `γ(x, t) = x − h(t)`.
    pub fn translation(label: &str, n: usize, k: usize, h: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        let h: Arc<ShiftFn> = Arc::new(h);
        let h2 = h.clone();
        NumericGamma {
            label: label.into(),
            n,
            k,
            map: Arc::new(move |x: &[f64], t: &[f64]| x.iter().zip(h2(t)).map(|(a, b)| a - b).collect()),
            shift: Some(h),
        }
    }
    /// `x − (t, t²)`.
    pub fn parabola() -> Self {
        NumericGamma::translation("parabola", 2, 1, |t| vec![t[0], t[0] * t[0]])
    }
    /// `x − (t, 0)`: the flat straight-line family.
    pub fn line() -> Self {
        NumericGamma::translation("line", 2, 1, |t| vec![t[0], 0.0])
    }
    /// `x − t` on the line.
    pub fn shift_1d() -> Self {
        NumericGamma::translation("shift", 1, 1, |t| vec![t[0]])
    }
    /// From an exact family; polynomial families of the form `x + p(t)` are
    /// recognised as translations.
    pub fn from_family(g: &GammaFamily) -> Self {
        let (n, k) = (g.n(), g.k());
        let label = "family".to_string();
        if let Some(ps) = g.polynomials() {
            let diffs: Vec<Polynomial> = ps.iter().enumerate().map(|(i, p)| p.sub(&Polynomial::var(n + k, i))).collect();
            if diffs.iter().all(|d| d.terms().all(|(e, _)| e[..n].iter().all(|&v| v == 0))) {
                return NumericGamma::translation(&label, n, k, move |t| {
                    let mut pt = vec![0.0; n];
                    pt.extend_from_slice(t);
                    diffs.iter().map(|d| -d.eval_f64(&pt)).collect()
                });
            }
        }
        let g = g.clone();
        NumericGamma::new(&label, n, k, move |x, t| g.eval_f64(x, t))
    }
    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }
    pub fn eval(&self, x: &[f64], t: &[f64]) -> Vec<f64> {
        (self.map)(x, t)
    }
    pub fn is_translation(&self) -> bool {
        self.shift.is_some()
    }
    /// `h(t)` for translation families.
    pub fn shift(&self, t: &[f64]) -> Option<Vec<f64>> {
        self.shift.as_ref().map(|h| h(t))
    }
    /// `γ_t⁻¹(y)`: exact for translations, otherwise Newton with a
    /// finite-difference Jacobian started at `y`.
    pub fn inverse(&self, y: &[f64], t: &[f64]) -> Option<Vec<f64>> {
        if let Some(h) = &self.shift {
            return Some(y.iter().zip(h(t)).map(|(a, b)| a + b).collect());
        }
        let n = self.n;
        let mut x = y.to_vec();
        for _ in 0..50 {
            let r: Vec<f64> = self.eval(&x, t).iter().zip(y).map(|(a, b)| a - b).collect();
            if r.iter().all(|v| v.abs() < 1e-14) {
                return Some(x);
            }
            let eps = 1e-7;
            let mut jac = vec![vec![0.0; n]; n];
            for c in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += eps;
                xm[c] -= eps;
                let (fp, fm) = (self.eval(&xp, t), self.eval(&xm, t));
                for r in 0..n {
                    jac[r][c] = (fp[r] - fm[r]) / (2.0 * eps);
                }
            }
            let step = solve_small(jac, r)?;
            for (xi, s) in x.iter_mut().zip(step) {
                *xi -= s;
            }
        }
        let r = self.eval(&x, t);
        if r.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-10) {
            Some(x)
        } else {
            None
        }
    }
}

fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
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

fn det_small(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = match (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())) {
            Some(p) => p,
            None => return 0.0,
        };
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(c, p);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    det
}

// ---------------------------------------------------------------------------
// discrete operators

#[derive(Clone, Debug)]
pub enum OpData {
    /// Fourier multiplier on the periodic grid (FFT order).
    Circulant(Vec<Complex64>),
    /// Compressed sparse rows.
    Sparse { indptr: Vec<usize>, indices: Vec<u32>, values: Vec<f64> },
}

/// A matrix on a [`Grid`] with provenance.
#[derive(Clone, Debug)]
pub struct DiscreteOp {
    pub grid: Grid,
    pub label: String,
    pub j: Option<u32>,
    pub data: OpData,
}

impl DiscreteOp {
    pub fn symbol(&self) -> Option<&[Complex64]> {
        match &self.data {
            OpData::Circulant(m) => Some(m),
            _ => None,
        }
    }
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.apply_inner(f, false)
    }
    pub fn apply_adjoint(&self, f: &[f64]) -> Vec<f64> {
        self.apply_inner(f, true)
    }
    fn apply_inner(&self, f: &[f64], adjoint: bool) -> Vec<f64> {
        match &self.data {
            OpData::Circulant(m) => {
                let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fftn(&mut buf, &self.grid.points, false);
                for (b, s) in buf.iter_mut().zip(m) {
                    *b *= if adjoint { s.conj() } else { *s };
                }
                fftn(&mut buf, &self.grid.points, true);
                let scale = 1.0 / self.grid.len() as f64;
                buf.iter().map(|c| c.re * scale).collect()
            }
            OpData::Sparse { indptr, indices, values } => {
                if adjoint {
                    let mut out = vec![0.0; f.len()];
                    for r in 0..indptr.len() - 1 {
                        for p in indptr[r]..indptr[r + 1] {
                            out[indices[p] as usize] += values[p] * f[r];
                        }
                    }
                    out
                } else {
                    (0..indptr.len() - 1)
                        .into_par_iter()
                        .map(|r| (indptr[r]..indptr[r + 1]).map(|p| values[p] * f[indices[p] as usize]).sum())
                        .collect()
                }
            }
        }
    }
    /// `Σ_y |A(x, y)|` per row.
    pub fn row_abs_sums(&self) -> Vec<f64> {
        match &self.data {
            OpData::Circulant(m) => {
                let row = self.circulant_row(m);
                vec![row.iter().map(|v| v.abs()).sum(); self.grid.len()]
            }
            OpData::Sparse { indptr, values, .. } => (0..indptr.len() - 1).map(|r| values[indptr[r]..indptr[r + 1]].iter().map(|v| v.abs()).sum()).collect(),
        }
    }
    /// `Σ_y A(x, y)` per row.
    pub fn row_sums(&self) -> Vec<f64> {
        match &self.data {
            OpData::Circulant(m) => vec![m[0].re; self.grid.len()],
            OpData::Sparse { indptr, values, .. } => (0..indptr.len() - 1).map(|r| values[indptr[r]..indptr[r + 1]].iter().sum()).collect(),
        }
    }
    fn circulant_row(&self, m: &[Complex64]) -> Vec<f64> {
        let mut buf = m.to_vec();
        fftn(&mut buf, &self.grid.points, false);
        buf.iter().map(|c| c.re / self.grid.len() as f64).collect()
    }
    pub fn nnz(&self) -> usize {
        match &self.data {
            OpData::Circulant(m) => m.len(),
            OpData::Sparse { values, .. } => values.len(),
        }
    }
    /// `self − other` (same grid and representation).
    pub fn sub(&self, other: &DiscreteOp) -> Result<DiscreteOp> {
        if self.grid != other.grid {
            return Err(OplabError::Grid("operators on different grids".into()));
        }
        let data = match (&self.data, &other.data) {
            (OpData::Circulant(a), OpData::Circulant(b)) => OpData::Circulant(a.iter().zip(b).map(|(x, y)| x - y).collect()),
            (OpData::Sparse { .. }, OpData::Sparse { .. }) => {
                let rows: Vec<Vec<(u32, f64)>> = (0..self.grid.len())
                    .map(|r| {
                        let mut e: Vec<(u32, f64)> = self.row(r).collect();
                        e.extend(other.row(r).map(|(c, v)| (c, -v)));
                        merge_row(e)
                    })
                    .collect();
                csr(rows)
            }
            _ => return Err(OplabError::Unsupported("mixed circulant/sparse difference".into())),
        };
        Ok(DiscreteOp { grid: self.grid.clone(), label: format!("{} - {}", self.label, other.label), j: self.j, data })
    }
    fn row(&self, r: usize) -> Box<dyn Iterator<Item = (u32, f64)> + '_> {
        match &self.data {
            OpData::Sparse { indptr, indices, values } => Box::new((indptr[r]..indptr[r + 1]).map(move |p| (indices[p], values[p]))),
            OpData::Circulant(_) => Box::new(std::iter::empty()),
        }
    }
    /// Transpose of a sparse operator (discrete adjoint).
    pub fn transpose(&self) -> Result<DiscreteOp> {
        match &self.data {
            OpData::Sparse { indptr, indices, values } => {
                let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.grid.len()];
                for r in 0..indptr.len() - 1 {
                    for p in indptr[r]..indptr[r + 1] {
                        rows[indices[p] as usize].push((r as u32, values[p]));
                    }
                }
                Ok(DiscreteOp { grid: self.grid.clone(), label: format!("{}*", self.label), j: self.j, data: csr(rows) })
            }
            OpData::Circulant(m) => Ok(DiscreteOp { grid: self.grid.clone(), label: format!("{}*", self.label), j: self.j, data: OpData::Circulant(m.iter().map(|c| c.conj()).collect()) }),
        }
    }
}

fn merge_row(mut e: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    e.sort_by_key(|x| x.0);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(e.len());
    for (c, v) in e {
        match out.last_mut() {
            Some(l) if l.0 == c => l.1 += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|x| x.1 != 0.0);
    out
}

fn csr(rows: Vec<Vec<(u32, f64)>>) -> OpData {
    let mut indptr = Vec::with_capacity(rows.len() + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for r in rows {
        for (c, v) in r {
            indices.push(c);
            values.push(v);
        }
        indptr.push(indices.len());
    }
    OpData::Sparse { indptr, indices, values }
}

/// Assembly options for `T`-type operators.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct BuildConfig {
    pub interp: Interp,
    /// Keep `γ(x, t)` this far inside the box (sparse assembly).
    pub margin: f64,
    /// Radius of the cutoff `ψ(x) = χ(|x|/R)`; `None` means `ψ ≡ 1` on the
    /// torus (translation-invariant families only).
    pub psi_radius: Option<f64>,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig { interp: Interp::Cubic, margin: 0.05, psi_radius: None }
    }
}

fn psi(cfg: &BuildConfig, x: &[f64]) -> f64 {
    match cfg.psi_radius {
        Some(r) => chi(norm(x) / r),
        None => 1.0,
    }
}

/// `f ↦ ψ(x) Σ_ν w_ν f(γ(x, t_ν))` for a node list.
pub fn build_from_nodes(gamma: &NumericGamma, grid: &Grid, nodes: &[(Vec<f64>, f64)], cfg: &BuildConfig, label: &str, j: Option<u32>) -> Result<DiscreteOp> {
    if gamma.n != grid.n() {
        return Err(OplabError::Grid(format!("family in ℝ^{} on a {}-dimensional grid", gamma.n, grid.n())));
    }
    let nodes: Vec<&(Vec<f64>, f64)> = nodes.iter().filter(|(_, w)| *w != 0.0).collect();
    if gamma.is_translation() && cfg.psi_radius.is_none() {
        let symbol = match cfg.interp {
            Interp::Spectral => spectral_symbol(gamma, grid, &nodes),
            _ => {
                // stencil c_o with (Tf)(x) = Σ_o c_o f(x + o·h); symbol = Σ c_o e^{iξ·o h}
                let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
                let origin: Vec<f64> = (0..grid.n()).map(|a| -0.5 * grid.side[a]).collect();
                for (t, w) in &nodes {
                    let h = gamma.shift(t).expect("translation");
                    let y: Vec<f64> = origin.iter().zip(&h).map(|(o, v)| o - v).collect();
                    for (idx, sw) in stencil(grid, &y, cfg.interp) {
                        c[idx].re += w * sw;
                    }
                }
                fftn(&mut c, &grid.points, true);
                c
            }
        };
        return Ok(DiscreteOp { grid: grid.clone(), label: label.into(), j, data: OpData::Circulant(symbol) });
    }
    if cfg.interp == Interp::Spectral {
        return Err(OplabError::Unsupported("spectral sampling needs a translation-invariant family with ψ ≡ 1".into()));
    }
    let rows: Vec<Result<Vec<(u32, f64)>>> = (0..grid.len())
        .into_par_iter()
        .map(|r| {
            let x = grid.coord(r);
            let p = psi(cfg, &x);
            if p == 0.0 {
                return Ok(Vec::new());
            }
            let mut e = Vec::new();
            for (t, w) in &nodes {
                let y = gamma.eval(&x, t);
                if !grid.inside(&y, cfg.margin) {
                    return Err(OplabError::LeavesBox { x: x.clone(), t: t.clone() });
                }
                for (idx, sw) in stencil(grid, &y, cfg.interp) {
                    e.push((idx as u32, p * w * sw));
                }
            }
            Ok(merge_row(e))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DiscreteOp { grid: grid.clone(), label: label.into(), j, data: csr(rows) })
}

/// `m(ξ) = Σ_ν w_ν e^{−iξ·h(t_ν)}` on the grid's Fourier modes.
fn spectral_symbol(gamma: &NumericGamma, grid: &Grid, nodes: &[&(Vec<f64>, f64)]) -> Vec<Complex64> {
    let n = grid.n();
    // per-node, per-axis tables e^{−iξ_a h_a}
    let tables: Vec<(f64, Vec<Vec<Complex64>>)> = nodes
        .iter()
        .map(|(t, w)| {
            let h = gamma.shift(t).expect("translation");
            let per_axis = (0..n).map(|a| (0..grid.points[a]).map(|k| Complex64::from_polar(1.0, -grid.frequency(a, k) * h[a])).collect()).collect();
            (*w, per_axis)
        })
        .collect();
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let m = grid.multi(idx);
            let mut s = Complex64::new(0.0, 0.0);
            for (w, tab) in &tables {
                let mut z = Complex64::new(*w, 0.0);
                for a in 0..n {
                    z *= tab[a][m[a]];
                }
                s += z;
            }
            s
        })
        .collect()
}

/// `T_j f(x) = ψ(x) ∫ f(γ(x, t)) K_j(t) dt`.
pub fn build_tj(gamma: &NumericGamma, kernel: &KernelSpec, grid: &Grid, j: u32, cfg: &BuildConfig) -> Result<DiscreteOp> {
    check_kernel(gamma, kernel)?;
    build_from_nodes(gamma, grid, &kernel.nodes_j(j), cfg, &format!("T_{j}[{}]", gamma.label), Some(j))
}

/// `Σ_{j ≤ J} T_j`: the truncated principal-value operator (or the
/// averaging operator for a bump kernel).
pub fn build_t(gamma: &NumericGamma, kernel: &KernelSpec, grid: &Grid, jmax: u32, cfg: &BuildConfig) -> Result<DiscreteOp> {
    check_kernel(gamma, kernel)?;
    build_from_nodes(gamma, grid, &kernel.nodes_total(jmax), cfg, &format!("T[{}]", gamma.label), None)
}

/// `T′_j f(y) = ∫ ψ(γ_t⁻¹ y) f(γ_t⁻¹ y) K_j(t) dt`: the adjoint without its
/// Jacobian factor, so that `T_j^* − T′_j` is `O(2^{−j})`.
pub fn build_tj_prime(gamma: &NumericGamma, kernel: &KernelSpec, grid: &Grid, j: u32, cfg: &BuildConfig) -> Result<DiscreteOp> {
    check_kernel(gamma, kernel)?;
    if cfg.interp == Interp::Spectral {
        return Err(OplabError::Unsupported("T′_j is assembled by interpolation".into()));
    }
    let nodes = kernel.nodes_j(j);
    let rows: Vec<Result<Vec<(u32, f64)>>> = (0..grid.len())
        .into_par_iter()
        .map(|r| {
            let y = grid.coord(r);
            let mut e = Vec::new();
            for (t, w) in &nodes {
                if *w == 0.0 {
                    continue;
                }
                let x = gamma.inverse(&y, t).ok_or_else(|| OplabError::Precondition(format!("γ_t not invertible at {y:?}")))?;
                let p = psi(cfg, &x);
                if p == 0.0 {
                    continue;
                }
                if !grid.inside(&x, cfg.margin) {
                    return Err(OplabError::LeavesBox { x: y.clone(), t: t.clone() });
                }
                for (idx, sw) in stencil(grid, &x, cfg.interp) {
                    e.push((idx as u32, p * w * sw));
                }
            }
            Ok(merge_row(e))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DiscreteOp { grid: grid.clone(), label: format!("T'_{j}[{}]", gamma.label), j: Some(j), data: csr(rows) })
}

fn check_kernel(gamma: &NumericGamma, kernel: &KernelSpec) -> Result<()> {
    if gamma.k != kernel.k {
        return Err(OplabError::Kernel(format!("kernel on ℝ^{} for a family with k = {}", kernel.k, gamma.k)));
    }
    if kernel.kind != KernelKind::Bump && kernel.sphere_mean().abs() > 1e-9 {
        return Err(OplabError::Kernel("kernel does not have mean zero on the sphere".into()));
    }
    Ok(())
}

/// `j` with `a·2^{−j}/2 < 2h`: the dyadic shell is thinner than two cells.
pub fn under_resolved(kernel: &KernelSpec, grid: &Grid, j: u32) -> bool {
    kernel.a * 2f64.powi(-(j as i32)) / 2.0 < 2.0 * grid.min_spacing()
}

// ---------------------------------------------------------------------------
// norms

/// Power-iteration settings.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration { tol: 1e-6, max_iter: 2000, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NormEstimate {
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `‖A‖ = sqrt(λ_max(A*A))` by power iteration.
pub fn power_norm(dim: usize, apply: &dyn Fn(&[f64]) -> Vec<f64>, apply_adj: &dyn Fn(&[f64]) -> Vec<f64>, cfg: PowerIteration) -> NormEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lam = 0.0;
    for it in 1..=cfg.max_iter {
        let w = apply_adj(&apply(&v));
        let nw = norm(&w);
        if nw == 0.0 {
            return NormEstimate { norm: 0.0, iterations: it, converged: true };
        }
        let change = (nw - lam).abs() / nw;
        lam = nw;
        v = w.iter().map(|x| x / nw).collect();
        if change < cfg.tol {
            return NormEstimate { norm: lam.sqrt(), iterations: it, converged: true };
        }
    }
    NormEstimate { norm: lam.sqrt(), iterations: cfg.max_iter, converged: false }
}

/// `L²` operator norm.  Circulant operators use `max |m(ξ)|`.
pub fn op_norm(a: &DiscreteOp) -> f64 {
    product_norm(&[(a, false)], None)
}

/// `‖A₁^{(*)} A₂^{(*)} ⋯‖`, optionally restricted to the Fourier modes
/// where `mask(ξ)` holds (circulant factors only).
pub fn product_norm(factors: &[(&DiscreteOp, bool)], mask: Option<&(dyn Fn(&[f64]) -> bool + Sync)>) -> f64 {
    let grid = &factors[0].0.grid;
    if factors.iter().all(|(a, _)| a.symbol().is_some()) {
        return (0..grid.len())
            .filter(|&i| mask.map(|m| m(&grid.frequencies(i))).unwrap_or(true))
            .map(|i| factors.iter().map(|(a, _)| a.symbol().unwrap()[i].norm()).product::<f64>())
            .fold(0.0, f64::max);
    }
    assert!(mask.is_none(), "frequency masks need circulant operators");
    let apply = |v: &[f64]| {
        let mut cur = v.to_vec();
        for (a, adj) in factors.iter().rev() {
            cur = if *adj { a.apply_adjoint(&cur) } else { a.apply(&cur) };
        }
        cur
    };
    let apply_adj = |v: &[f64]| {
        let mut cur = v.to_vec();
        for (a, adj) in factors.iter() {
            cur = if *adj { a.apply(&cur) } else { a.apply_adjoint(&cur) };
        }
        cur
    };
    power_norm(grid.len(), &apply, &apply_adj, PowerIteration::default()).norm
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub i: u32,
    pub j: u32,
    pub gap: u32,
    pub ti_tj_star: f64,
    pub ti_star_tj: f64,
}

/// Almost-orthogonality table `‖T_i T_j^*‖`, `‖T_i^* T_j‖` with the fitted
/// `ε` in `max_{|i−j| = g} ‖·‖ ≈ A 2^{−εg}`.
#[derive(Clone, Debug, Serialize)]
pub struct DecayTable {
    pub label: String,
    pub interp: Interp,
    pub rows: Vec<DecayRow>,
    pub tj_norms: Vec<(u32, f64)>,
    pub by_gap: Vec<(u32, f64)>,
    pub epsilon: f64,
    /// `by_gap` strictly decreasing from gap 2 on.
    pub monotone_from_gap2: bool,
    pub under_resolved: Vec<u32>,
}

impl DecayTable {
    pub fn csv(&self) -> String {
        let mut s = String::from("i,j,gap,ti_tj_star,ti_star_tj\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{:.12e},{:.12e}\n", r.i, r.j, r.gap, r.ti_tj_star, r.ti_star_tj));
        }
        s
    }
}

pub fn orthogonality_decay(
    gamma: &NumericGamma,
    kernel: &KernelSpec,
    grid: &Grid,
    jmax: u32,
    cfg: &BuildConfig,
    mask: Option<&(dyn Fn(&[f64]) -> bool + Sync)>,
) -> Result<DecayTable> {
    let ops: Vec<DiscreteOp> = (0..=jmax).map(|j| build_tj(gamma, kernel, grid, j, cfg)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for i in 0..=jmax {
        for j in 0..=jmax {
            let a = product_norm(&[(&ops[i as usize], false), (&ops[j as usize], true)], mask);
            let b = product_norm(&[(&ops[i as usize], true), (&ops[j as usize], false)], mask);
            rows.push(DecayRow { i, j, gap: i.abs_diff(j), ti_tj_star: a, ti_star_tj: b });
        }
    }
    let tj_norms = (0..=jmax).map(|j| (j, product_norm(&[(&ops[j as usize], false)], mask))).collect();
    let by_gap: Vec<(u32, f64)> = (0..=jmax)
        .map(|g| (g, rows.iter().filter(|r| r.gap == g).map(|r| r.ti_tj_star.max(r.ti_star_tj)).fold(0.0, f64::max)))
        .collect();
    let xs: Vec<f64> = by_gap.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = by_gap.iter().map(|p| p.1.max(1e-300).log2()).collect();
    let epsilon = -fit::middle_half_slope(&xs, &ys);
    let monotone_from_gap2 = by_gap.iter().skip(2).zip(by_gap.iter().skip(3)).all(|(a, b)| b.1 < a.1);
    let under = (0..=jmax).filter(|&j| under_resolved(kernel, grid, j)).collect();
    Ok(DecayTable { label: gamma.label.clone(), interp: cfg.interp, rows, tj_norms, by_gap, epsilon, monotone_from_gap2, under_resolved: under })
}

// ---------------------------------------------------------------------------
// maximal function

#[derive(Clone, Debug, Serialize)]
pub struct MaximalReport {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// `‖Mf‖₂ / ‖f‖₂`.
    pub l2_ratio: f64,
}

/// `Mf(x) = sup_r r^{−k} |ψ(x) ∫_{|t|≤r} f(γ_t x) dt|` over the radius list.
pub fn maximal_fn(gamma: &NumericGamma, f: &[f64], grid: &Grid, radii: &[f64], cfg: &BuildConfig) -> Result<MaximalReport> {
    if !(1..=2).contains(&gamma.k) {
        return Err(OplabError::Unsupported(format!("quadrature for k = {}", gamma.k)));
    }
    if cfg.interp == Interp::Spectral {
        return Err(OplabError::Unsupported("maximal function uses interpolation".into()));
    }
    let k = gamma.k;
    let rules: Vec<(f64, Vec<(Vec<f64>, f64)>)> = radii
        .iter()
        .map(|&r| {
            let radial = composite_gl(0.0, r, 2);
            let nodes: Vec<(Vec<f64>, f64)> = if k == 1 {
                radial.iter().flat_map(|&(s, w)| [(vec![s], w), (vec![-s], w)]).collect()
            } else {
                let m = 16;
                radial
                    .iter()
                    .flat_map(|&(s, w)| (0..m).map(move |l| {
                        let th = 2.0 * PI * l as f64 / m as f64;
                        (vec![s * th.cos(), s * th.sin()], w * s * 2.0 * PI / m as f64)
                    }))
                    .collect()
            };
            (r, nodes)
        })
        .collect();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.coord(i);
            let p = psi(cfg, &x);
            rules
                .iter()
                .map(|(r, nodes)| {
                    let s: f64 = nodes.iter().map(|(t, w)| w * interpolate(grid, f, &gamma.eval(&x, t), cfg.interp)).sum();
                    (p * s).abs() / r.powi(k as i32)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let l2_ratio = grid.l2(&values) / grid.l2(f);
    Ok(MaximalReport { radii: radii.to_vec(), values, l2_ratio })
}

/// Volume of the unit ball in `ℝ^k` (k ≤ 2).
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => f64::NAN,
    }
}

// ---------------------------------------------------------------------------
// mollifiers

/// `S_j f(x) = 𝒳₀(x) ∫ Φ_j(Θ(x, y)) 𝒳₀(y) f(y) dy` with an even radial bump
/// `Φ = c·χ(|u|/a)` of unit mass, `Φ_j(u) = 2^{jQ} Φ(δ_{2^j} u)` and the
/// cutoff `𝒳(x) = χ(|x|/R)`.
#[derive(Clone, Debug, Serialize)]
pub struct Mollifier {
    pub a: f64,
    pub cutoff_radius: f64,
    /// Gauss points per axis for the `u`-integral.
    pub nodes_per_axis: usize,
}

impl Default for Mollifier {
    fn default() -> Self {
        Mollifier { a: 0.5, cutoff_radius: 1.0, nodes_per_axis: 24 }
    }
}

impl Mollifier {
    pub fn cutoff(&self, x: &[f64]) -> f64 {
        chi(norm(x) / self.cutoff_radius)
    }
    fn phi_raw(&self, u: &[f64]) -> f64 {
        chi(norm(u) / self.a)
    }
    /// Tensor rule on `[-a, a]^d` with `Φ` folded into the weights
    /// (normalised so that `Σ w = 1` exactly).
    fn phi_rule(&self, d: usize) -> Vec<(Vec<f64>, f64)> {
        let panels = (self.nodes_per_axis / 8).max(1);
        let one = composite_gl(-self.a, self.a, panels);
        let mut pts: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for _ in 0..d {
            pts = pts.into_iter().flat_map(|(p, w)| one.iter().map(move |&(x, wx)| {
                let mut q = p.clone();
                q.push(x);
                (q, w * wx)
            })).collect();
        }
        let mut rule: Vec<(Vec<f64>, f64)> = pts.into_iter().map(|(u, w)| {
            let v = self.phi_raw(&u);
            (u, w * v)
        }).filter(|p| p.1 != 0.0).collect();
        let total: f64 = rule.iter().map(|p| p.1).sum();
        rule.iter_mut().for_each(|p| p.1 /= total);
        rule
    }
}

/// `∫ S_j(x, y) dy − 𝒳²(x)`.  Euclidean (`Θ(x, y) = y − x`, isotropic
/// dilations) when `frame` is `None`, otherwise the `Θ`-adapted form with
/// `J(x, y) = |det ∂_y Θ(x, y)|` and `𝒳₀ = 𝒳·J(x, x)^{1/2}`.
pub fn mollifier_defect(frame: Option<&FreeFrame>, moll: &Mollifier, x: &[f64], j: u32) -> Result<f64> {
    let d = x.len();
    let rule = moll.phi_rule(d);
    let weights: Vec<u32> = match frame {
        Some(f) => {
            if f.dim() != d {
                return Err(OplabError::Precondition(format!("point in ℝ^{d} for a frame on ℝ^{}", f.dim())));
            }
            f.algebra().basis().iter().map(|h| h.degree).collect()
        }
        None => vec![1; d],
    };
    // |det ∂y/∂u| at (p, u)
    let jinv = |p: &[f64], u: &[f64]| -> Result<f64> {
        match frame {
            Some(f) => Ok(det_small(f.exp_jacobian(p, u)?).abs()),
            None => Ok(1.0),
        }
    };
    let point = |p: &[f64], u: &[f64]| -> Result<Vec<f64>> {
        match frame {
            Some(f) => Ok(f.exp_point(p, u)?),
            None => Ok(p.iter().zip(u).map(|(a, b)| a + b).collect()),
        }
    };
    let x0 = |p: &[f64]| -> Result<f64> { Ok(moll.cutoff(p) * (1.0 / jinv(p, &vec![0.0; d])?).sqrt()) };
    let scale: Vec<f64> = weights.iter().map(|&w| 2f64.powi(-((j * w) as i32))).collect();
    let mut mass = 0.0;
    for (v, w) in &rule {
        let u: Vec<f64> = v.iter().zip(&scale).map(|(a, s)| a * s).collect();
        let y = point(x, &u)?;
        mass += w * x0(&y)? * jinv(x, &u)?;
    }
    let c = moll.cutoff(x);
    Ok(x0(x)? * mass - c * c)
}

/// Euclidean `S_j` as a sparse operator on a grid, with `Φ_j` normalised by
/// its sum over the stencil.
pub fn build_sj(grid: &Grid, moll: &Mollifier, j: u32) -> DiscreteOp {
    let n = grid.n();
    let rad = moll.a * 2f64.powi(-(j as i32));
    let reach: Vec<i64> = (0..n).map(|a| (rad / grid.spacing(a)).ceil() as i64).collect();
    let cell = grid.cell_volume();
    let scale = 2f64.powi((j as usize * n) as i32);
    // Φ normalised by its sum over the stencil: the discrete analogue of ∫Φ = 1
    let offsets = {
        let mut offs = vec![Vec::<i64>::new()];
        for a in 0..n {
            offs = offs.into_iter().flat_map(|o| (-reach[a]..=reach[a]).map(move |d| {
                let mut q = o.clone();
                q.push(d);
                q
            })).collect();
        }
        offs
    };
    let stencil_phi: Vec<f64> = offsets
        .iter()
        .map(|o| {
            let su: Vec<f64> = o.iter().enumerate().map(|(a, &d)| d as f64 * grid.spacing(a) * 2f64.powi(j as i32)).collect();
            moll.phi_raw(&su)
        })
        .collect();
    let raw_mass: f64 = stencil_phi.iter().sum::<f64>() * cell * scale;
    let rows: Vec<Vec<(u32, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|r| {
            let x = grid.coord(r);
            let cx = moll.cutoff(&x);
            if cx == 0.0 {
                return Vec::new();
            }
            let m = grid.multi(r);
            let mut e = Vec::new();
            for (o, &ph) in offsets.iter().zip(&stencil_phi) {
                if ph == 0.0 {
                    continue;
                }
                let u: Vec<f64> = o.iter().enumerate().map(|(a, &d)| d as f64 * grid.spacing(a)).collect();
                let idx: Vec<usize> = m.iter().zip(o).enumerate().map(|(a, (&i, &d))| (i as i64 + d).rem_euclid(grid.points[a] as i64) as usize).collect();
                let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + b).collect();
                let cy = moll.cutoff(&y);
                if cy == 0.0 {
                    continue;
                }
                e.push((grid.flat(&idx) as u32, cx * scale * ph / raw_mass * cy * cell));
            }
            merge_row(e)
        })
        .collect();
    DiscreteOp { grid: grid.clone(), label: format!("S_{j}"), j: Some(j), data: csr(rows) }
}

// ---------------------------------------------------------------------------
// van der Corput

/// `∫_0^1 e^{iλF(τ)} dτ` by composite Gauss–Legendre resolving the phase
/// (`F′` bounded by `dmax` on `[0, 1]`).
pub fn vdc_integral(f: &(dyn Fn(f64) -> f64 + Sync), dmax: f64, lambda: f64) -> Complex64 {
    let panels = (lambda.abs() * dmax / PI).ceil() as usize + 8;
    composite_gl(0.0, 1.0, panels).iter().map(|&(t, w)| Complex64::from_polar(w, lambda * f(t))).sum()
}

/// `count` log-spaced values in `[lo, hi]`.
pub fn log_schedule(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1).max(1) as f64).exp()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct VdcReport {
    pub k: u32,
    pub lambdas: Vec<f64>,
    /// `max |I(λ′)|` over `λ′ ∈ [λ, λ + 2π]`.
    pub envelope: Vec<f64>,
    pub exponent: f64,
    pub predicted: f64,
}

/// Fit `|I(λ)| ≈ Cλ^{e}` on the oscillation envelope.
pub fn vdc_decay(f: &(dyn Fn(f64) -> f64 + Sync), dmax: f64, k: u32, lambdas: &[f64], window: usize) -> VdcReport {
    let envelope: Vec<f64> = lambdas
        .par_iter()
        .map(|&l| (0..window.max(1)).map(|i| vdc_integral(f, dmax, l + 2.0 * PI * i as f64 / window.max(1) as f64).norm()).fold(0.0, f64::max))
        .collect();
    let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = envelope.iter().map(|v| v.ln()).collect();
    VdcReport { k, lambdas: lambdas.to_vec(), envelope, exponent: fit::middle_half_slope(&xs, &ys), predicted: -1.0 / k as f64 }
}

// ---------------------------------------------------------------------------
// pushforward densities

#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct PushforwardConfig {
    pub samples: usize,
    /// Uniform bins per axis of the output box.
    pub bins: usize,
    /// Equal-mass bins (one-dimensional outputs; 0 disables).
    pub mass_bins: usize,
    pub seed: u64,
    /// Parameter box `[lo, hi]^d`.
    pub domain: (f64, f64),
    /// Output box `[lo, hi]^n`.
    pub range: (f64, f64),
    /// Shift range for the modulus fit.
    pub z_range: (f64, f64),
}

impl Default for PushforwardConfig {
    fn default() -> Self {
        PushforwardConfig { samples: 1_000_000, bins: 1024, mass_bins: 200, seed: 0, domain: (-1.0, 1.0), range: (0.0, 1.0), z_range: (2f64.powi(-7), 2f64.powi(-2)) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PushforwardReport {
    pub n: usize,
    pub bins: usize,
    /// Density on the uniform bins (row-major), total mass `∫ψ`.
    pub histogram: Vec<f64>,
    pub mass_edges: Vec<f64>,
    pub mass_heights: Vec<f64>,
    pub total_mass: f64,
    pub mass_outside: f64,
    pub modulus: Vec<(f64, f64)>,
    pub exponent: f64,
    /// All mass on a few bins: the pushforward is (numerically) singular.
    pub degenerate: bool,
}

/// Monte Carlo histogram of `Φ_*(ψ dτ)` on `[lo, hi]^d`.  Samples are
/// jittered-stratified along `τ₁` (uniform in the other coordinates), run
/// in fixed chunks with independent ChaCha streams and reduced in order.
pub fn pushforward_density(
    phi: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    d: usize,
    n: usize,
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    cfg: &PushforwardConfig,
) -> Result<PushforwardReport> {
    if !(1..=2).contains(&n) {
        return Err(OplabError::Unsupported(format!("histograms in ℝ^{n}")));
    }
    let (lo, hi) = cfg.domain;
    let vol = (hi - lo).powi(d as i32);
    let (ylo, yhi) = cfg.range;
    let b = cfg.bins;
    let w = (yhi - ylo) / b as f64;
    let nb = b.pow(n as u32);
    let chunk = 1 << 14;
    let chunks = cfg.samples.div_ceil(chunk);
    let per: Vec<(Vec<f64>, f64, Vec<(f64, f64)>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c as u64);
            let mut h = vec![0.0; nb];
            let mut outside = 0.0;
            let mut vals = Vec::new();
            let start = c * chunk;
            let end = (start + chunk).min(cfg.samples);
            for i in start..end {
                let mut tau = Vec::with_capacity(d);
                tau.push(lo + (hi - lo) * (i as f64 + rng.gen::<f64>()) / cfg.samples as f64);
                for _ in 1..d {
                    tau.push(rng.gen_range(lo..hi));
                }
                let m = psi(&tau) * vol / cfg.samples as f64;
                let y = phi(&tau);
                if n == 1 && cfg.mass_bins > 0 {
                    vals.push((y[0], m));
                }
                let idx: Option<Vec<usize>> = y.iter().map(|v| {
                    let k = ((v - ylo) / w).floor();
                    if k >= 0.0 && (k as usize) < b { Some(k as usize) } else if *v == yhi { Some(b - 1) } else { None }
                }).collect();
                match idx {
                    Some(ix) => h[ix.iter().fold(0, |acc, &i| acc * b + i)] += m,
                    None => outside += m,
                }
            }
            (h, outside, vals)
        })
        .collect();
    let mut hist = vec![0.0; nb];
    let mut outside = 0.0;
    let mut vals = Vec::new();
    for (h, o, v) in per {
        for (a, x) in hist.iter_mut().zip(&h) {
            *a += x;
        }
        outside += o;
        vals.extend(v);
    }
    let cellv = w.powi(n as i32);
    let total_inside: f64 = hist.iter().sum();
    let total_mass = total_inside + outside;
    // degenerate: the top b^{n−1} bins carry more than half the mass
    let mut sorted = hist.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = sorted.iter().take(b.pow(n as u32 - 1)).sum();
    let degenerate = top > 0.5 * total_mass;
    let density: Vec<f64> = hist.iter().map(|m| m / cellv).collect();
    // equal-mass bins
    let (mass_edges, mass_heights) = if !vals.is_empty() {
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mb = cfg.mass_bins;
        let total: f64 = vals.iter().map(|v| v.1).sum();
        let mut edges = vec![vals[0].0];
        let mut heights = Vec::new();
        let mut acc = 0.0;
        let mut start_edge = vals[0].0;
        let mut target = total / mb as f64;
        for (i, &(y, m)) in vals.iter().enumerate() {
            acc += m;
            if acc >= target * (1.0 - 1e-12) && edges.len() < mb || i == vals.len() - 1 {
                let edge = if i == vals.len() - 1 { y } else { 0.5 * (y + vals[i + 1].0) };
                heights.push((acc - (edges.len() - 1) as f64 * total / mb as f64).max(0.0) / (edge - start_edge).max(1e-300));
                edges.push(edge);
                start_edge = edge;
                target += total / mb as f64;
                if i == vals.len() - 1 {
                    break;
                }
            }
        }
        // heights from exact bin masses
        let mut hs = Vec::with_capacity(edges.len() - 1);
        let mut k = 0;
        for bi in 0..edges.len() - 1 {
            let mut m = 0.0;
            while k < vals.len() && (vals[k].0 < edges[bi + 1] || (bi == edges.len() - 2)) {
                m += vals[k].1;
                k += 1;
            }
            hs.push(m / (edges[bi + 1] - edges[bi]).max(1e-300));
        }
        let _ = heights;
        (edges, hs)
    } else {
        (Vec::new(), Vec::new())
    };
    // modulus ω(z) = max over axes ∫ |h(y − z e_a) − h(y)| dy
    let kmin = ((cfg.z_range.0 / w).round() as usize).max(1);
    let kmax = ((cfg.z_range.1 / w).round() as usize).max(kmin);
    let mut shifts: Vec<usize> = log_schedule(kmin as f64, kmax as f64, 16).iter().map(|v| v.round() as usize).collect();
    shifts.dedup();
    let modulus: Vec<(f64, f64)> = shifts
        .iter()
        .map(|&s| {
            let om = (0..n)
                .map(|axis| {
                    let stride = if axis == n - 1 { 1 } else { b };
                    let mut acc = 0.0;
                    for idx in 0..nb {
                        let coord = (idx / stride) % b;
                        let prev = if coord >= s { density[idx - s * stride] } else { 0.0 };
                        acc += (prev - density[idx]).abs();
                    }
                    // mass pushed past the top edge
                    for idx in 0..nb {
                        let coord = (idx / stride) % b;
                        if coord + s >= b {
                            acc += density[idx];
                        }
                    }
                    acc * cellv
                })
                .fold(0.0, f64::max);
            (s as f64 * w, om)
        })
        .collect();
    let xs: Vec<f64> = modulus.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = modulus.iter().map(|p| p.1.max(1e-300).ln()).collect();
    let exponent = fit::slope(&xs, &ys);
    Ok(PushforwardReport { n, bins: b, histogram: density, mass_edges, mass_heights, total_mass, mass_outside: outside, modulus, exponent, degenerate })
}

/// `∫ |ĥ − h|` for a piecewise-constant `ĥ` on `edges` against a closed-form
/// density, with panels graded towards each bin's left end (integrable
/// endpoint singularities are common for pushforwards).
pub fn l1_to_density(edges: &[f64], heights: &[f64], h: &(dyn Fn(f64) -> f64 + Sync)) -> f64 {
    let base = gauss_legendre(8);
    (0..heights.len())
        .into_par_iter()
        .map(|i| {
            let (a, b) = (edges[i], edges[i + 1]);
            let mut acc = 0.0;
            let mut right = b;
            for level in 0..40 {
                let left = if level == 39 { a } else { a + (b - a) * 0.5f64.powi(level + 1) };
                let half = 0.5 * (right - left);
                for &(x, w) in &base {
                    let y = left + half * (x + 1.0);
                    acc += half * w * (heights[i] - h(y)).abs();
                }
                right = left;
                if right <= a {
                    break;
                }
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// `Γ̃^{(j)}(x, ·)` for a numeric family with Euclidean anisotropic
/// dilations `δ_r(y) = (r^{w_a} y_a)` about `x`:
/// `τ ↦ x + δ_{2^j}(Γ̃(x, 2^{−j}τ) − x)`, `τ ∈ ℝ^{2Nk}`.
pub fn gamma_tilde_numeric(gamma: &NumericGamma, nn: usize, x: Vec<f64>, j: u32, weights: Vec<u32>) -> impl Fn(&[f64]) -> Vec<f64> + Sync + '_ {
    let k = gamma.k;
    move |tau: &[f64]| {
        let s = 2f64.powi(-(j as i32));
        let mut y = x.clone();
        for f in 0..2 * nn {
            let t: Vec<f64> = tau[f * k..(f + 1) * k].iter().map(|v| v * s).collect();
            y = if f % 2 == 0 { gamma.eval(&y, &t) } else { gamma.inverse(&y, &t).unwrap_or_else(|| vec![f64::NAN; y.len()]) };
        }
        y.iter().zip(&x).zip(&weights).map(|((yi, xi), &w)| xi + (yi - xi) * 2f64.powi((j * w) as i32)).collect()
    }
}

// ---------------------------------------------------------------------------
// smoothing

#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct SmoothingConfig {
    pub s_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    /// Anisotropy exponent `N` for the flat coordinates.
    pub n_aniso: u32,
    /// Points sampling the one-dimensional profile `φ₁` on `[-side/2, side/2)`.
    pub profile_points: usize,
    pub profile_side: f64,
    /// Window `|x′| ≤ ε δ` for the windowed ratio (flat branch).
    pub window: f64,
    /// Physical grid cells per `δ` for the moving coordinates.
    pub points_per_delta: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            s_list: vec![0.5],
            delta_list: (1..=6).map(|i| 2f64.powi(-i)).collect(),
            n_aniso: 3,
            profile_points: 128,
            profile_side: 4.0,
            window: 0.25,
            points_per_delta: 32,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingRow {
    pub s: f64,
    pub delta: f64,
    pub ratio: f64,
    pub windowed_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingSlope {
    pub s: f64,
    /// Log–log slope of the ratio against `δ`.
    pub slope: f64,
    pub windowed_slope: Option<f64>,
    /// `k − N s` (flat branch).
    pub predicted: Option<f64>,
    /// `max / min` of the ratio over the `δ` list.
    pub spread: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingReport {
    pub label: String,
    pub flat_axes: Vec<usize>,
    pub rows: Vec<SmoothingRow>,
    pub slopes: Vec<SmoothingSlope>,
}

/// 1-D profile: 1 on `|s| ≤ 1/2`, 0 on `|s| ≥ 1/√2`; the product over axes
/// is 1 on `|x| ≤ 1/2` and vanishes on `|x| ≥ 1` (n ≤ 2).
pub fn profile(s: f64) -> f64 {
    plateau(s.abs(), 0.5, std::f64::consts::FRAC_1_SQRT_2)
}

/// `‖T f_δ‖_{H_s} / ‖f_δ‖_{L²}` for `f_δ(x) = φ(δ^{−1}x′, δ^{−N}x″)` and the
/// averaging operator `Tf(x) = ∫ f(x − h(t)) K(t) dt` with a smooth
/// nonnegative `K`; `x″` are the coordinates `h` leaves fixed.
///
/// `Tf_δ(x) = A(x′)·φ₁(x″/δ^N)` factors.  `A` is assembled in physical
/// space on a grid of `points_per_delta` cells per `δ` that covers its
/// support (no wrap-around), then transformed; the `x″` factor is spectral.
pub fn smoothing_probe(gamma: &NumericGamma, kernel: &KernelSpec, cfg: &SmoothingConfig) -> Result<SmoothingReport> {
    if kernel.kind != KernelKind::Bump {
        return Err(OplabError::Kernel("smoothing probe needs a smooth nonnegative kernel".into()));
    }
    check_kernel(gamma, kernel)?;
    if !gamma.is_translation() {
        return Err(OplabError::Unsupported("smoothing probe needs a translation-invariant family".into()));
    }
    let n = gamma.n;
    let probe = kernel.nodes_total(0);
    let shifts: Vec<Vec<f64>> = probe.iter().map(|(t, _)| gamma.shift(t).unwrap()).collect();
    let flat_axes: Vec<usize> = (0..n).filter(|&a| shifts.iter().all(|h| h[a] == 0.0)).collect();
    let free: Vec<usize> = (0..n).filter(|a| !flat_axes.contains(a)).collect();
    if free.is_empty() {
        return Err(OplabError::Precondition("family moves no coordinate".into()));
    }
    // normal form: the moving coordinates must be genuinely independent
    if numeric_rank(&shifts, 1e-9) != free.len() {
        return Err(OplabError::Precondition("flat family not in normal-form coordinates (fixed directions must be coordinate axes)".into()));
    }
    let mpts = cfg.profile_points;
    let pgrid = Grid::new(1, cfg.profile_side, mpts)?;
    let mut buf: Vec<Complex64> = (0..mpts).map(|i| Complex64::new(profile(pgrid.coord(i)[0]), 0.0)).collect();
    fftn(&mut buf, &[mpts], false);
    let phat: Vec<f64> = buf.iter().map(|c| c.norm() * pgrid.spacing(0)).collect();
    let etas: Vec<f64> = (0..mpts).map(|k| pgrid.frequency(0, k)).collect();
    let deta = 2.0 * PI / cfg.profile_side;
    // ‖φ₁‖² by Parseval (exact: the autocorrelation fits in the period)
    let phi1_sq: f64 = phat.iter().map(|p| p * p).sum::<f64>() * deta / (2.0 * PI);
    let p = free.len();
    let q = flat_axes.len();
    let mut rows = Vec::new();
    for &delta in &cfg.delta_list {
        let sf = delta.powi(cfg.n_aniso as i32);
        // nodes with panels of length ≤ δ/2 along t
        let panels = kernel.panels.max((2.0 * kernel.a / delta).ceil() as usize + 8);
        let nodes = kernel.clone().with_resolution(panels, kernel.angles).nodes_total(0);
        let hs: Vec<Vec<f64>> = nodes.iter().map(|(t, _)| gamma.shift(t).unwrap()).collect();
        let reach = delta * std::f64::consts::FRAC_1_SQRT_2;
        let lo: Vec<f64> = free.iter().map(|&a| hs.iter().map(|h| h[a]).fold(f64::INFINITY, f64::min) - reach).collect();
        let hi: Vec<f64> = free.iter().map(|&a| hs.iter().map(|h| h[a]).fold(f64::NEG_INFINITY, f64::max) + reach).collect();
        let target = delta / cfg.points_per_delta as f64;
        let pts: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (((h - l) / target).ceil() as usize + 2).next_power_of_two()).collect();
        let dx = vec![target; p];
        let side: Vec<f64> = pts.iter().zip(&dx).map(|(&m, d)| m as f64 * d).collect();
        let total_pts: usize = pts.iter().product();
        let mut a_grid = vec![0.0; total_pts];
        for ((_, w), h) in nodes.iter().zip(&hs) {
            if *w == 0.0 {
                continue;
            }
            let ranges: Vec<(usize, usize)> = (0..p)
                .map(|i| {
                    let c = h[free[i]] - lo[i];
                    (((c - reach) / dx[i]).ceil().max(0.0) as usize, (((c + reach) / dx[i]).floor() as usize).min(pts[i] - 1))
                })
                .collect();
            let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
            if ranges.iter().any(|r| r.0 > r.1) {
                continue;
            }
            'splat: loop {
                let mut v = *w;
                let mut flat_idx = 0;
                for i in 0..p {
                    let x = lo[i] + idx[i] as f64 * dx[i];
                    v *= profile((x - h[free[i]]) / delta);
                    flat_idx = flat_idx * pts[i] + idx[i];
                }
                a_grid[flat_idx] += v;
                let mut i = p;
                loop {
                    if i == 0 {
                        break 'splat;
                    }
                    i -= 1;
                    if idx[i] < ranges[i].1 {
                        idx[i] += 1;
                        break;
                    }
                    idx[i] = ranges[i].0;
                }
            }
        }
        let cell: f64 = dx.iter().product();
        let mut ahat: Vec<Complex64> = a_grid.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fftn(&mut ahat, &pts, false);
        let dens = 1.0 / side.iter().product::<f64>();
        let spec: Vec<(f64, f64)> = (0..total_pts)
            .map(|k| {
                let mut r = k;
                let mut om2 = 0.0;
                for i in (0..p).rev() {
                    let ki = r % pts[i];
                    r /= pts[i];
                    let m = pts[i] as i64;
                    let s = if (ki as i64) < m / 2 { ki as i64 } else { ki as i64 - m };
                    let om = 2.0 * PI * s as f64 / side[i];
                    om2 += om * om;
                }
                (om2, (ahat[k] * cell).norm_sqr() * dens)
            })
            .collect();
        let flat_spec: Vec<(f64, f64)> = (0..mpts.pow(q as u32))
            .map(|idx| {
                let mut r = idx;
                let mut om2 = 0.0;
                let mut w2 = 1.0;
                for _ in 0..q {
                    let k = r % mpts;
                    r /= mpts;
                    let om = etas[k] / sf;
                    om2 += om * om;
                    w2 *= (sf * phat[k]).powi(2) * deta / sf / (2.0 * PI);
                }
                (om2, w2)
            })
            .collect();
        let l2sq = (delta * phi1_sq).powi(p as i32) * (sf * phi1_sq).powi(q as i32);
        for &s in &cfg.s_list {
            let total: f64 = spec
                .par_iter()
                .map(|&(o1, a2)| flat_spec.iter().map(|&(o2, b2)| (1.0 + o1 + o2).powf(s) * a2 * b2).sum::<f64>())
                .collect::<Vec<f64>>()
                .iter()
                .sum();
            let ratio = (total / l2sq).sqrt();
            let windowed_ratio = if q > 0 {
                Some(windowed_ratio(gamma, &nodes, &free, &flat_axes, &phat, &etas, deta, delta, cfg.n_aniso, s, cfg.window, l2sq))
            } else {
                None
            };
            rows.push(SmoothingRow { s, delta, ratio, windowed_ratio });
        }
    }
    let slopes = cfg
        .s_list
        .iter()
        .map(|&s| {
            let sel: Vec<&SmoothingRow> = rows.iter().filter(|r| r.s == s).collect();
            let xs: Vec<f64> = sel.iter().map(|r| r.delta.ln()).collect();
            let ys: Vec<f64> = sel.iter().map(|r| r.ratio.ln()).collect();
            let slope = fit::middle_half_slope(&xs, &ys);
            let windowed_slope = if sel.iter().all(|r| r.windowed_ratio.is_some()) {
                let yw: Vec<f64> = sel.iter().map(|r| r.windowed_ratio.unwrap().ln()).collect();
                Some(fit::middle_half_slope(&xs, &yw))
            } else {
                None
            };
            let mx = sel.iter().map(|r| r.ratio).fold(0.0, f64::max);
            let mn = sel.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
            let predicted = if flat_axes.is_empty() { None } else { Some(gamma.k as f64 - cfg.n_aniso as f64 * s) };
            SmoothingSlope { s, slope, windowed_slope, predicted, spread: mx / mn }
        })
        .collect();
    Ok(SmoothingReport { label: gamma.label.clone(), flat_axes, rows, slopes })
}

/// `(∫_{|x′| ≤ εδ} ‖Tf_δ(x′, ·)‖²_{H_s} dx′)^{1/2} / ‖f_δ‖₂`.  For these
/// families `Tf_δ(x) = A(x′)·φ₁(x″/δ^N)` factors.
#[allow(clippy::too_many_arguments)]
fn windowed_ratio(
    gamma: &NumericGamma,
    nodes: &[(Vec<f64>, f64)],
    free: &[usize],
    flat: &[usize],
    phat: &[f64],
    etas: &[f64],
    deta: f64,
    delta: f64,
    nexp: u32,
    s: f64,
    eps: f64,
    l2sq: f64,
) -> f64 {
    // ∫_{|x′|≤εδ} A² over a tensor Gauss rule (box window)
    let one = composite_gl(-eps * delta, eps * delta, 2);
    let mut pts: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for _ in free {
        pts = pts.into_iter().flat_map(|(p, w)| one.iter().map(move |&(x, wx)| {
            let mut q = p.clone();
            q.push(x);
            (q, w * wx)
        })).collect();
    }
    let n = gamma.n;
    let a2: f64 = pts
        .iter()
        .map(|(xp, w)| {
            let mut x = vec![0.0; n];
            for (i, &a) in free.iter().enumerate() {
                x[a] = xp[i];
            }
            let a_val: f64 = nodes
                .iter()
                .map(|(t, wt)| {
                    let y = gamma.eval(&x, t);
                    wt * free.iter().map(|&a| profile(y[a] / delta)).product::<f64>()
                })
                .sum();
            w * a_val * a_val
        })
        .sum();
    // ‖φ₁(·/δ^N)‖²_{H_s} over the flat axes
    let sc = delta.powi(nexp as i32);
    let p = flat.len();
    let mpts = phat.len();
    let hs: f64 = (0..mpts.pow(p as u32))
        .map(|idx| {
            let mut r = idx;
            let mut om2 = 0.0;
            let mut w2 = 1.0;
            for _ in 0..p {
                let k = r % mpts;
                r /= mpts;
                let om = etas[k] / sc;
                om2 += om * om;
                w2 *= (sc * phat[k]).powi(2) * deta / sc / (2.0 * PI);
            }
            (1.0 + om2).powf(s) * w2
        })
        .sum();
    (a2 * hs / l2sq).sqrt()
}

fn numeric_rank(vs: &[Vec<f64>], tol: f64) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let scale = vs.iter().map(|v| norm(v)).fold(0.0, f64::max).max(1e-300);
    for v in vs {
        let mut w: Vec<f64> = v.iter().map(|x| x / scale).collect();
        for b in &basis {
            let d: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let nw = norm(&w);
        if nw > tol {
            basis.push(w.iter().map(|x| x / nw).collect());
        }
    }
    basis.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let r = gauss_legendre(8);
        let s: f64 = r.iter().map(|&(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let c = composite_gl(0.0, 2.0, 3);
        assert!((c.iter().map(|&(x, w)| w * x * x).sum::<f64>() - 8.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn partition_of_unity() {
        for r in [0.01, 0.2, 0.5, 0.7, 0.99] {
            let sum: f64 = (0..12).map(|j| chi(2f64.powi(j) * r) - chi(2f64.powi(j + 1) * r)).sum();
            assert!((sum - chi(r) + chi(2f64.powi(12) * r)).abs() < 1e-15);
        }
        assert_eq!(chi(0.3), 1.0);
        assert_eq!(chi(1.2), 0.0);
    }

    #[test]
    fn circulant_matches_sparse_for_translations() {
        let g = NumericGamma::shift_1d();
        let grid = Grid::new(1, 4.0, 64).unwrap();
        let k = KernelSpec::hilbert(0.5);
        let cfg = BuildConfig { interp: Interp::Linear, margin: 0.0, psi_radius: None };
        let c = build_tj(&g, &k, &grid, 1, &cfg).unwrap();
        let generic = NumericGamma::new("shift", 1, 1, |x, t| vec![x[0] - t[0]]);
        let s = build_from_nodes(&generic, &grid, &k.nodes_j(1), &BuildConfig { margin: -10.0, ..cfg.clone() }, "s", Some(1)).unwrap();
        let f = grid.sample(|x| (x[0] * 3.0).sin() + x[0].cos());
        for (a, b) in c.apply(&f).iter().zip(s.apply(&f)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
