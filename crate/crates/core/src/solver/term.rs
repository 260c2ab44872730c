use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Logical value identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymValue(pub u32);

impl fmt::Display for SymValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// `Σ coeff·var + constant`, variables strictly increasing, no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LinTerm {
    coeffs: Vec<(SymValue, i64)>,
    constant: i64,
}

impl LinTerm {
    pub fn constant(c: i64) -> Self {
        LinTerm {
            coeffs: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: SymValue) -> Self {
        LinTerm {
            coeffs: vec![(v, 1)],
            constant: 0,
        }
    }

    /// Build from arbitrary pairs; duplicates are summed.
    pub fn from_parts(
        pairs: impl IntoIterator<Item = (SymValue, i64)>,
        constant: i64,
    ) -> Option<Self> {
        let mut m: BTreeMap<SymValue, i64> = BTreeMap::new();
        for (v, c) in pairs {
            let e = m.entry(v).or_insert(0);
            *e = e.checked_add(c)?;
        }
        Some(LinTerm {
            coeffs: m.into_iter().filter(|(_, c)| *c != 0).collect(),
            constant,
        })
    }

    pub fn coeffs(&self) -> &[(SymValue, i64)] {
        &self.coeffs
    }

    pub fn constant_part(&self) -> i64 {
        self.constant
    }

    pub fn as_const(&self) -> Option<i64> {
        self.coeffs.is_empty().then_some(self.constant)
    }

    pub fn as_var(&self) -> Option<SymValue> {
        match self.coeffs.as_slice() {
            [(v, 1)] if self.constant == 0 => Some(*v),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, v: SymValue) -> i64 {
        self.coeffs
            .binary_search_by_key(&v, |(x, _)| *x)
            .map(|i| self.coeffs[i].1)
            .unwrap_or(0)
    }

    pub fn vars(&self) -> impl Iterator<Item = SymValue> + '_ {
        self.coeffs.iter().map(|(v, _)| *v)
    }

    pub fn mentions(&self, v: SymValue) -> bool {
        self.coeffs.binary_search_by_key(&v, |(x, _)| *x).is_ok()
    }

    pub fn checked_add(&self, other: &LinTerm) -> Option<LinTerm> {
        let mut out = Vec::with_capacity(self.coeffs.len() + other.coeffs.len());
        let (mut i, mut j) = (0, 0);
        while i < self.coeffs.len() || j < other.coeffs.len() {
            match (self.coeffs.get(i), other.coeffs.get(j)) {
                (Some(&(a, ca)), Some(&(b, cb))) if a == b => {
                    let c = ca.checked_add(cb)?;
                    if c != 0 {
                        out.push((a, c));
                    }
                    i += 1;
                    j += 1;
                }
                (Some(&(a, ca)), Some(&(b, _))) if a < b => {
                    out.push((a, ca));
                    i += 1;
                }
                (Some(&(a, ca)), None) => {
                    out.push((a, ca));
                    i += 1;
                }
                (_, Some(&(b, cb))) => {
                    out.push((b, cb));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Some(LinTerm {
            coeffs: out,
            constant: self.constant.checked_add(other.constant)?,
        })
    }

    pub fn checked_scale(&self, k: i64) -> Option<LinTerm> {
        if k == 0 {
            return Some(LinTerm::constant(0));
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (v, c) in &self.coeffs {
            coeffs.push((*v, c.checked_mul(k)?));
        }
        Some(LinTerm {
            coeffs,
            constant: self.constant.checked_mul(k)?,
        })
    }

    pub fn checked_sub(&self, other: &LinTerm) -> Option<LinTerm> {
        self.checked_add(&other.checked_scale(-1)?)
    }

    pub fn add_const(&self, k: i64) -> Option<LinTerm> {
        Some(LinTerm {
            coeffs: self.coeffs.clone(),
            constant: self.constant.checked_add(k)?,
        })
    }

    /// Replace `v` by `t`.
    pub fn substitute(&self, v: SymValue, t: &LinTerm) -> Option<LinTerm> {
        let c = self.coeff(v);
        if c == 0 {
            return Some(self.clone());
        }
        let rest = LinTerm {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(x, _)| *x != v)
                .copied()
                .collect(),
            constant: self.constant,
        };
        rest.checked_add(&t.checked_scale(c)?)
    }

    /// Apply a total or partial variable renaming (unmapped variables are kept).
    pub fn rename(&self, map: &impl Fn(SymValue) -> SymValue) -> LinTerm {
        LinTerm::from_parts(
            self.coeffs.iter().map(|(v, c)| (map(*v), *c)),
            self.constant,
        )
        .expect("renaming does not change coefficient magnitudes")
    }

    /// Evaluate under a total assignment.
    pub fn eval(&self, model: &impl Fn(SymValue) -> i64) -> Option<i64> {
        let mut acc = self.constant;
        for (v, c) in &self.coeffs {
            acc = acc.checked_add(c.checked_mul(model(*v))?)?;
        }
        Some(acc)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<SymValue>) {
        out.extend(self.vars());
    }
}

impl From<SymValue> for LinTerm {
    fn from(v: SymValue) -> Self {
        LinTerm::var(v)
    }
}

impl From<i64> for LinTerm {
    fn from(c: i64) -> Self {
        LinTerm::constant(c)
    }
}

pub(crate) fn write_sum(
    f: &mut fmt::Formatter<'_>,
    coeffs: &[(SymValue, i64)],
    constant: i64,
    name: &dyn Fn(SymValue) -> String,
) -> fmt::Result {
    if coeffs.is_empty() {
        return write!(f, "{constant}");
    }
    for (i, (v, c)) in coeffs.iter().enumerate() {
        let (neg, mag) = (*c < 0, c.unsigned_abs());
        match (i, neg) {
            (0, true) => f.write_str("-")?,
            (0, false) => {}
            (_, true) => f.write_str(" - ")?,
            (_, false) => f.write_str(" + ")?,
        }
        if mag != 1 {
            write!(f, "{mag}*")?;
        }
        f.write_str(&name(*v))?;
    }
    match constant {
        0 => Ok(()),
        c if c < 0 => write!(f, " - {}", c.unsigned_abs()),
        c => write!(f, " + {c}"),
    }
}

impl LinTerm {
    /// Print with a custom variable namer.
    pub fn display_with<'a>(
        &'a self,
        name: &'a dyn Fn(SymValue) -> String,
    ) -> impl fmt::Display + 'a {
        struct D<'a>(&'a LinTerm, &'a dyn Fn(SymValue) -> String);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write_sum(f, &self.0.coeffs, self.0.constant, self.1)
            }
        }
        D(self, name)
    }
}

impl fmt::Display for LinTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_sum(f, &self.coeffs, self.constant, &|v| v.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Le,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Lt => "<",
            Rel::Le => "<=",
        }
    }
}

/// `lhs rel rhs`; `>` and `>=` are represented by swapping sides.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub lhs: LinTerm,
    pub rel: Rel,
    pub rhs: LinTerm,
}

impl Atom {
    pub fn new(lhs: LinTerm, rel: Rel, rhs: LinTerm) -> Self {
        Atom { lhs, rel, rhs }
    }

    pub fn eq(a: impl Into<LinTerm>, b: impl Into<LinTerm>) -> Self {
        Atom::new(a.into(), Rel::Eq, b.into())
    }

    pub fn ne(a: impl Into<LinTerm>, b: impl Into<LinTerm>) -> Self {
        Atom::new(a.into(), Rel::Ne, b.into())
    }

    pub fn lt(a: impl Into<LinTerm>, b: impl Into<LinTerm>) -> Self {
        Atom::new(a.into(), Rel::Lt, b.into())
    }

    pub fn le(a: impl Into<LinTerm>, b: impl Into<LinTerm>) -> Self {
        Atom::new(a.into(), Rel::Le, b.into())
    }

    pub fn gt(a: impl Into<LinTerm>, b: impl Into<LinTerm>) -> Self {
        Atom::lt(b, a)
    }

    pub fn ge(a: impl Into<LinTerm>, b: impl Into<LinTerm>) -> Self {
        Atom::le(b, a)
    }

    pub fn truth() -> Self {
        Atom::eq(0, 0)
    }

    pub fn negate(&self) -> Atom {
        match self.rel {
            Rel::Eq => Atom::ne(self.lhs.clone(), self.rhs.clone()),
            Rel::Ne => Atom::eq(self.lhs.clone(), self.rhs.clone()),
            Rel::Lt => Atom::le(self.rhs.clone(), self.lhs.clone()),
            Rel::Le => Atom::lt(self.rhs.clone(), self.lhs.clone()),
        }
    }

    pub fn vars(&self) -> BTreeSet<SymValue> {
        let mut s = BTreeSet::new();
        self.lhs.collect_vars(&mut s);
        self.rhs.collect_vars(&mut s);
        s
    }

    pub fn map_terms(&self, f: impl Fn(&LinTerm) -> LinTerm) -> Atom {
        Atom::new(f(&self.lhs), self.rel, f(&self.rhs))
    }

    /// Truth value under a total assignment.
    pub fn holds(&self, model: &impl Fn(SymValue) -> i64) -> Option<bool> {
        let a = self.lhs.eval(model)?;
        let b = self.rhs.eval(model)?;
        Some(match self.rel {
            Rel::Eq => a == b,
            Rel::Ne => a != b,
            Rel::Lt => a < b,
            Rel::Le => a <= b,
        })
    }

    /// `lhs - rhs` and the constraint kind it must satisfy against zero.
    pub(crate) fn to_constraint(&self) -> Option<(LinTerm, Kind)> {
        let d = self.lhs.checked_sub(&self.rhs)?;
        Some(match self.rel {
            Rel::Eq => (d, Kind::Zero),
            Rel::Ne => (d, Kind::NonZero),
            Rel::Lt => (d.add_const(1)?, Kind::NonPos),
            Rel::Le => (d, Kind::NonPos),
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.rel.symbol(), self.rhs)
    }
}

/// Constraint of a term against zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Kind {
    Zero,
    NonZero,
    NonPos,
}

pub(crate) fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a as i64
}

pub(crate) fn floor_div(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

pub(crate) fn ceil_div(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: u32) -> SymValue {
        SymValue(n)
    }

    #[test]
    fn linear_terms_stay_canonical() {
        let a = LinTerm::from_parts([(v(2), 3), (v(0), 1), (v(2), -3)], 4).unwrap();
        assert_eq!(a.coeffs(), &[(v(0), 1)]);
        let b = a.checked_add(&LinTerm::var(v(1))).unwrap();
        assert_eq!(b.to_string(), "v0 + v1 + 4");
        let c = b
            .substitute(v(1), &LinTerm::from_parts([(v(0), -1)], 2).unwrap())
            .unwrap();
        assert_eq!(c, LinTerm::constant(6));
    }

    #[test]
    fn display_signs() {
        let t = LinTerm::from_parts([(v(0), -1), (v(3), 2)], -5).unwrap();
        assert_eq!(t.to_string(), "-v0 + 2*v3 - 5");
    }

    #[test]
    fn rounding_helpers() {
        assert_eq!(floor_div(-7, 2), -4);
        assert_eq!(ceil_div(-7, 2), -3);
        assert_eq!(floor_div(7, -2), -4);
        assert_eq!(ceil_div(7, 2), 4);
        assert_eq!(gcd(-6, 4), 2);
    }

    #[test]
    fn negation_is_complement() {
        let a = Atom::lt(LinTerm::var(v(0)), LinTerm::constant(3));
        for x in -5..5 {
            let m = |_| x;
            assert_ne!(a.holds(&m), a.negate().holds(&m));
        }
    }
}
