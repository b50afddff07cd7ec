//! Family specifications: a small polynomial expression language and a
//! line-oriented spec file.
//!
//! ```text
//! # the parabola
//! n = 2
//! k = 1
//! base = 0, 0
//! gamma1 = x1 + t1
//! gamma2 = x2 + t1^2
//! ```
//!
//! Expressions use rational literals (`3`, `1/2`), variables `x1..xn`,
//! `t1..tk`, `+ - *`, `^` with a nonnegative integer exponent and
//! parentheses.  A bare `t` is accepted for `t1` when `k = 1`.

use std::fmt;
use std::str::FromStr;

use num::{BigInt, One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::curvature::{GammaFamily, CurvatureError};
use crate::jets::{Polynomial, Weight, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown variable `{name}`")]
    UnknownVariable { line: usize, col: usize, name: String },
    #[error("γ(x, 0) ≠ x in component {0}")]
    NotIdentity(usize),
    #[error("missing field `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Family(#[from] CurvatureError),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Q),
    Ident(String),
    Op(char),
}

fn lex(src: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>, SpecError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let s = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let num: BigInt = chars[s..i].iter().collect::<String>().parse().expect("digits");
            let mut val = Q::from_integer(num);
            // a rational literal `p/q` binds tighter than anything else
            if i + 1 < chars.len() && chars[i] == '/' && chars[i + 1].is_ascii_digit() {
                i += 1;
                let s2 = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let den: BigInt = chars[s2..i].iter().collect::<String>().parse().expect("digits");
                if den.is_zero() {
                    return Err(SpecError::Syntax { line, col, msg: "zero denominator".into() });
                }
                val /= Q::from_integer(den);
            }
            out.push((Tok::Num(val), col));
        } else if c.is_ascii_alphabetic() {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[s..i].iter().collect()), col));
        } else if "+-*^()".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else {
            return Err(SpecError::Syntax { line, col, msg: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
    n: usize,
    k: usize,
    _src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }
    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.end_col)
    }
    fn err(&self, msg: impl Into<String>) -> SpecError {
        SpecError::Syntax { line: self.line, col: self.col(), msg: msg.into() }
    }
    fn nvars(&self) -> usize {
        self.n + self.k
    }

    fn expr(&mut self) -> Result<Polynomial, SpecError> {
        let mut acc = match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                self.term()?.scale(&-Q::one())
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(Tok::Op('+')) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Op('-')) => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, SpecError> {
        let mut acc = self.power()?;
        while let Some(Tok::Op('*')) = self.peek() {
            self.pos += 1;
            acc = acc.mul(&self.power()?);
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<Polynomial, SpecError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            match self.peek().cloned() {
                Some(Tok::Num(e)) if e.is_integer() && !e.is_negative() => {
                    self.pos += 1;
                    let e: u32 = e.to_integer().to_string().parse().map_err(|_| self.err("exponent too large"))?;
                    return Ok(base.pow(e));
                }
                _ => return Err(self.err("expected a nonnegative integer exponent")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial, SpecError> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Polynomial::constant(self.nvars(), v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let idx = variable_index(&name, self.n, self.k)
                    .ok_or(SpecError::UnknownVariable { line: self.line, col, name: name.clone() })?;
                Ok(Polynomial::var(self.nvars(), idx))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::Op(')')) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(self.err("expected `)`")),
                }
            }
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(self.power()?.scale(&-Q::one()))
            }
            Some(t) => Err(self.err(format!("unexpected `{}`", tok_str(&t)))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

fn tok_str(t: &Tok) -> String {
    match t {
        Tok::Num(v) => v.to_string(),
        Tok::Ident(s) => s.clone(),
        Tok::Op(c) => c.to_string(),
    }
}

fn variable_index(name: &str, n: usize, k: usize) -> Option<usize> {
    if name == "t" && k == 1 {
        return Some(n);
    }
    if name == "x" && n == 1 {
        return Some(0);
    }
    let (head, num) = name.split_at(1);
    let i: usize = num.parse().ok()?;
    match head {
        "x" if (1..=n).contains(&i) => Some(i - 1),
        "t" if (1..=k).contains(&i) => Some(n + i - 1),
        _ => None,
    }
}

fn parse_at(src: &str, n: usize, k: usize, line: usize, col0: usize) -> Result<Polynomial, SpecError> {
    let toks = lex(src, line, col0)?;
    let end_col = col0 + src.chars().count();
    let mut p = Parser { toks, pos: 0, line, end_col, n, k, _src: src };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

/// Parse one expression in the variables `(x1..xn, t1..tk)`.
pub fn parse_polynomial(src: &str, n: usize, k: usize) -> Result<Polynomial, SpecError> {
    parse_at(src, n, k, 1, 1)
}

/// Canonical text of a polynomial: terms in graded order, coefficients as
/// reduced rationals (`x2 + 1/2*x1*t1^2`).
pub fn format_polynomial(p: &Polynomial, names: &[String]) -> String {
    let mut terms: Vec<(&Vec<u32>, &Q)> = p.terms().collect();
    terms.sort_by(|a, b| {
        let da: u32 = a.0.iter().sum();
        let db: u32 = b.0.iter().sum();
        da.cmp(&db).then_with(|| b.0.cmp(a.0))
    });
    if terms.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, (e, c)) in terms.iter().enumerate() {
        let neg = c.is_negative();
        let mag = c.abs();
        if i == 0 {
            if neg {
                s.push('-');
            }
        } else {
            s.push_str(if neg { " - " } else { " + " });
        }
        let mono: Vec<String> = e
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(v, &k)| if k == 1 { names[v].clone() } else { format!("{}^{k}", names[v]) })
            .collect();
        if mono.is_empty() {
            s.push_str(&mag.to_string());
        } else {
            if !mag.is_one() {
                s.push_str(&mag.to_string());
                s.push('*');
            }
            s.push_str(&mono.join("*"));
        }
    }
    s
}

/// Default variable names `x1..xn, t1..tk`.
pub fn variable_names(n: usize, k: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).chain((1..=k).map(|i| format!("t{i}"))).collect()
}

/// Optional budgets carried by a spec.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SpecBudgets {
    pub order: Option<u32>,
    pub iterates: Option<usize>,
    pub budget: Option<u32>,
}

/// A validated family specification.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    pub name: Option<String>,
    pub n: usize,
    pub k: usize,
    pub base: Vec<Q>,
    pub components: Vec<Polynomial>,
    pub weights: Option<Vec<Weight>>,
    pub budgets: SpecBudgets,
}

impl FamilySpec {
    pub fn from_components(n: usize, k: usize, comps: &[&str]) -> Result<Self, SpecError> {
        let components = comps
            .iter()
            .enumerate()
            .map(|(i, c)| parse_at(c, n, k, i + 1, 1))
            .collect::<Result<Vec<_>, _>>()?;
        let s = FamilySpec { name: None, n, k, base: vec![Q::zero(); n], components, weights: None, budgets: SpecBudgets::default() };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), SpecError> {
        for (j, p) in self.components.iter().enumerate() {
            let mut at0 = Polynomial::zero(self.n + self.k);
            for (e, c) in p.terms() {
                if e[self.n..].iter().all(|&x| x == 0) {
                    at0.add_term(e.clone(), c.clone());
                }
            }
            if at0 != Polynomial::var(self.n + self.k, j) {
                return Err(SpecError::NotIdentity(j + 1));
            }
        }
        Ok(())
    }

    /// The family at the spec's base point with jets of the given order.
    pub fn family(&self, order: u32) -> Result<GammaFamily, SpecError> {
        Ok(GammaFamily::from_polynomials(self.n, self.k, self.components.clone(), self.base.clone(), order)?)
    }

    /// Canonical spec text; parsing it again yields an identical spec.
    pub fn pretty(&self) -> String {
        let names = variable_names(self.n, self.k);
        let mut s = String::new();
        if let Some(name) = &self.name {
            s.push_str(&format!("name = {name}\n"));
        }
        s.push_str(&format!("n = {}\nk = {}\n", self.n, self.k));
        let base: Vec<String> = self.base.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("base = {}\n", base.join(", ")));
        if let Some(w) = &self.weights {
            let w: Vec<String> = w.iter().map(|w| w.to_string()).collect();
            s.push_str(&format!("weights = {}\n", w.join(", ")));
        }
        if let Some(v) = self.budgets.order {
            s.push_str(&format!("order = {v}\n"));
        }
        if let Some(v) = self.budgets.iterates {
            s.push_str(&format!("iterates = {v}\n"));
        }
        if let Some(v) = self.budgets.budget {
            s.push_str(&format!("budget = {v}\n"));
        }
        for (j, p) in self.components.iter().enumerate() {
            s.push_str(&format!("gamma{} = {}\n", j + 1, format_polynomial(p, &names)));
        }
        s
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

fn parse_rational(s: &str, line: usize, col: usize) -> Result<Q, SpecError> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b.trim()),
        None => (false, s),
    };
    let v = Q::from_str(body).map_err(|_| SpecError::Syntax { line, col, msg: format!("bad rational `{s}`") })?;
    Ok(if neg { -v } else { v })
}

/// Comma-separated rationals, e.g. a base point `0, 1/2`.
pub fn parse_rationals(text: &str) -> Result<Vec<Q>, SpecError> {
    text.split(',').map(|v| parse_rational(v, 1, 1)).collect()
}

fn parse_weight(s: &str, line: usize, col: usize) -> Result<Weight, SpecError> {
    let s = s.trim();
    if s == "inf" || s == "∞" {
        return Ok(Weight::Infinite);
    }
    s.parse::<u32>().map(Weight::Finite).map_err(|_| SpecError::Syntax { line, col, msg: format!("bad weight `{s}`") })
}

fn parse_uint<T: FromStr>(s: &str, line: usize, col: usize) -> Result<T, SpecError> {
    s.trim().parse().map_err(|_| SpecError::Syntax { line, col, msg: format!("expected a nonnegative integer, got `{}`", s.trim()) })
}

/// Parse a spec file.  Errors carry 1-based line/column positions.
pub fn parse_spec(text: &str) -> Result<FamilySpec, SpecError> {
    let mut name = None;
    let mut n: Option<usize> = None;
    let mut k: Option<usize> = None;
    let mut base: Option<(Vec<String>, usize)> = None;
    let mut weights = None;
    let mut budgets = SpecBudgets::default();
    let mut comps: Vec<(usize, String, usize, usize)> = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = li + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(SpecError::Syntax { line, col: 1, msg: "expected `key = value`".into() });
        };
        let key = content[..eq].trim();
        let value = &content[eq + 1..];
        let vcol = content[..eq + 1].chars().count() + 1;
        match key {
            "name" => name = Some(value.trim().to_string()),
            "n" => n = Some(parse_uint(value, line, vcol)?),
            "k" => k = Some(parse_uint(value, line, vcol)?),
            "base" => base = Some((value.split(',').map(|s| s.to_string()).collect(), line)),
            "weights" => {
                weights = Some(value.split(',').map(|w| parse_weight(w, line, vcol)).collect::<Result<Vec<_>, _>>()?);
            }
            "order" => budgets.order = Some(parse_uint(value, line, vcol)?),
            "iterates" => budgets.iterates = Some(parse_uint(value, line, vcol)?),
            "budget" => budgets.budget = Some(parse_uint(value, line, vcol)?),
            _ => {
                let idx = key.strip_prefix("gamma").and_then(|s| s.parse::<usize>().ok()).filter(|&i| i >= 1);
                let Some(idx) = idx else {
                    return Err(SpecError::Syntax { line, col: 1, msg: format!("unknown key `{key}`") });
                };
                comps.push((idx, value.to_string(), line, vcol));
            }
        }
    }
    let n = n.ok_or(SpecError::Missing("n"))?;
    let k = k.ok_or(SpecError::Missing("k"))?;
    let base = match base {
        Some((vals, line)) => {
            let b = vals.iter().map(|v| parse_rational(v, line, 1)).collect::<Result<Vec<_>, _>>()?;
            if b.len() != n {
                return Err(SpecError::Syntax { line, col: 1, msg: format!("base has {} entries, expected {n}", b.len()) });
            }
            b
        }
        None => vec![Q::zero(); n],
    };
    comps.sort_by_key(|c| c.0);
    let mut components = Vec::with_capacity(n);
    for j in 1..=n {
        let Some(c) = comps.iter().find(|c| c.0 == j) else {
            return Err(SpecError::Missing("gamma component"));
        };
        components.push(parse_at(&c.1, n, k, c.2, c.3)?);
    }
    if let Some(extra) = comps.iter().find(|c| c.0 > n) {
        return Err(SpecError::Syntax { line: extra.2, col: 1, msg: format!("component gamma{} exceeds n = {n}", extra.0) });
    }
    let spec = FamilySpec { name, n, k, base, components, weights, budgets };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints() {
        let p = parse_polynomial("x2 + 2*x1*t1 + t1^2 - 1/2*(t1 - x1)^2", 2, 1).unwrap();
        let names = variable_names(2, 1);
        assert_eq!(format_polynomial(&p, &names), "x2 - 1/2*x1^2 + 3*x1*t1 + 1/2*t1^2");
        assert_eq!(parse_polynomial("-t^3", 1, 1).unwrap(), Polynomial::var(2, 1).pow(3).scale(&-Q::one()));
    }

    #[test]
    fn positioned_errors() {
        let e = parse_spec("n = 2\nk = 1\ngamma1 = x1 + t1\ngamma2 = x2 + y3\n").unwrap_err();
        assert_eq!(e, SpecError::UnknownVariable { line: 4, col: 15, name: "y3".into() });
        let e = parse_spec("n = 1\nk = 1\ngamma1 = x1 + (t1\n").unwrap_err();
        assert!(matches!(e, SpecError::Syntax { line: 3, .. }));
        assert_eq!(parse_spec("n = 1\nk = 1\ngamma1 = x1 + 1\n").unwrap_err(), SpecError::NotIdentity(1));
    }

    #[test]
    fn identity_family_is_accepted() {
        let s = parse_spec("n = 2\nk = 1\ngamma1 = x1\ngamma2 = x2\n").unwrap();
        assert_eq!(s.components[1], Polynomial::var(3, 1));
    }
}
