use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::pairs;
use super::sat::{self, Outcome};
use super::term::{ceil_div, floor_div, gcd, write_sum, Atom, Kind, LinTerm, SymValue};

/// Linear part of a constraint: gcd of coefficients is 1, first coefficient positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinForm(Vec<(SymValue, i64)>);

impl LinForm {
    pub fn coeffs(&self) -> &[(SymValue, i64)] {
        &self.0
    }

    pub fn to_term(&self) -> LinTerm {
        LinTerm::from_parts(self.0.iter().copied(), 0).expect("form coefficients are canonical")
    }

    pub fn mentions(&self, v: SymValue) -> bool {
        self.0.iter().any(|(x, _)| *x == v)
    }

    /// Split `t = s·F + c` with `F` canonical. `None` for constant terms.
    pub(crate) fn split(t: &LinTerm) -> Option<(LinForm, i64, i64)> {
        let cs = t.coeffs();
        if cs.is_empty() {
            return None;
        }
        let g = cs.iter().fold(0, |g, (_, c)| gcd(g, *c));
        let s = if cs[0].1 < 0 { -g } else { g };
        let form = LinForm(cs.iter().map(|(v, c)| (*v, c / s)).collect());
        Some((form, s, t.constant_part()))
    }

    fn unit_var(&self) -> Option<(SymValue, i64)> {
        self.0.iter().rev().find(|(_, c)| c.abs() == 1).copied()
    }

    pub fn rename(&self, map: &impl Fn(SymValue) -> SymValue) -> (LinForm, bool) {
        let t = self.to_term().rename(map);
        let (f, s, _) = LinForm::split(&t).expect("renaming keeps variables");
        (f, s < 0)
    }
}

/// Range and holes of a linear form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Option<i64>,
    pub hi: Option<i64>,
    pub excluded: BTreeSet<i64>,
}

impl Bounds {
    fn normalize(&mut self) -> bool {
        loop {
            let mut changed = false;
            if let Some(l) = self.lo {
                if self.excluded.remove(&l) {
                    self.lo = l.checked_add(1);
                    changed = true;
                }
            }
            if let Some(h) = self.hi {
                if self.excluded.remove(&h) {
                    self.hi = h.checked_sub(1);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let (lo, hi) = (self.lo, self.hi);
        self.excluded
            .retain(|e| lo.is_none_or(|l| *e > l) && hi.is_none_or(|h| *e < h));
        !matches!((self.lo, self.hi), (Some(l), Some(h)) if l > h)
    }

    pub fn negated(&self) -> Bounds {
        Bounds {
            lo: self.hi.map(|h| -h),
            hi: self.lo.map(|l| -l),
            excluded: self.excluded.iter().map(|e| -e).collect(),
        }
    }

    pub fn point(&self) -> Option<i64> {
        match (self.lo, self.hi) {
            (Some(l), Some(h)) if l == h => Some(l),
            _ => None,
        }
    }

    pub fn contains(&self, x: i64) -> bool {
        self.lo.is_none_or(|l| x >= l)
            && self.hi.is_none_or(|h| x <= h)
            && !self.excluded.contains(&x)
    }
}

/// Uninterpreted operation for non-linear arithmetic and pure models.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AppOp {
    Mul,
    Div,
    Rem,
    Fn(String),
}

impl AppOp {
    fn eval(&self, args: &[i64]) -> Result<Option<i64>, ()> {
        match (self, args) {
            (AppOp::Mul, [a, b]) => Ok(a.checked_mul(*b)),
            (AppOp::Div, [_, 0]) | (AppOp::Rem, [_, 0]) => Err(()),
            (AppOp::Div, [a, b]) => Ok(a.checked_div(*b)),
            (AppOp::Rem, [a, b]) => Ok(a.checked_rem(*b)),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AppKey {
    pub op: AppOp,
    pub args: Vec<LinTerm>,
}

impl AppKey {
    pub fn display_with<'a>(&'a self, name: &'a dyn Fn(SymValue) -> String) -> String {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| a.display_with(name).to_string())
            .collect();
        match &self.op {
            AppOp::Mul => format!("({}) * ({})", args[0], args[1]),
            AppOp::Div => format!("({}) / ({})", args[0], args[1]),
            AppOp::Rem => format!("({}) % ({})", args[0], args[1]),
            AppOp::Fn(f) => format!("{f}({})", args.join(", ")),
        }
    }
}

/// Normalized conjunction of linear constraints.
///
/// Equalities with a unit coefficient are solved and substituted away, so no
/// stored constraint mentions an eliminated variable. Every other constraint
/// is kept as a bounded linear form.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathCondition {
    #[serde(with = "pairs")]
    subst: BTreeMap<SymValue, LinTerm>,
    #[serde(with = "pairs")]
    forms: BTreeMap<LinForm, Bounds>,
    #[serde(with = "pairs")]
    apps: BTreeMap<AppKey, SymValue>,
    unsat: bool,
}

type Work = Vec<(LinTerm, Kind)>;

impl PathCondition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_trivially_unsat(&self) -> bool {
        self.unsat
    }

    pub fn is_true(&self) -> bool {
        !self.unsat && self.subst.is_empty() && self.forms.is_empty() && self.apps.is_empty()
    }

    pub fn substitution(&self) -> &BTreeMap<SymValue, LinTerm> {
        &self.subst
    }

    pub fn forms(&self) -> &BTreeMap<LinForm, Bounds> {
        &self.forms
    }

    pub fn apps(&self) -> impl Iterator<Item = (AppKey, LinTerm)> + '_ {
        self.apps
            .iter()
            .map(|(k, r)| (k.clone(), self.resolve_var(*r)))
    }

    pub fn resolve_var(&self, v: SymValue) -> LinTerm {
        self.subst
            .get(&v)
            .cloned()
            .unwrap_or_else(|| LinTerm::var(v))
    }

    /// Rewrite through the current substitution.
    pub fn resolve(&self, t: &LinTerm) -> LinTerm {
        if !t.vars().any(|v| self.subst.contains_key(&v)) {
            return t.clone();
        }
        let mut out = LinTerm::constant(t.constant_part());
        for (v, c) in t.coeffs() {
            let part = self.resolve_var(*v).checked_scale(*c);
            match part.and_then(|p| out.checked_add(&p)) {
                Some(o) => out = o,
                None => return t.clone(),
            }
        }
        out
    }

    pub fn resolve_atom(&self, a: &Atom) -> Atom {
        a.map_terms(|t| self.resolve(t))
    }

    /// Variables that are not substituted away and occur in some constraint.
    pub fn live_vars(&self) -> BTreeSet<SymValue> {
        let mut s = BTreeSet::new();
        for f in self.forms.keys() {
            s.extend(f.coeffs().iter().map(|(v, _)| *v));
        }
        for (k, r) in &self.apps {
            for a in &k.args {
                a.collect_vars(&mut s);
            }
            self.resolve_var(*r).collect_vars(&mut s);
        }
        s
    }

    /// `self ∧ a`, or `None` when that is unsatisfiable.
    pub fn assert_atom(&self, a: &Atom) -> Option<PathCondition> {
        let mut pc = self.clone();
        pc.assume(a).then_some(pc)
    }

    /// In-place [`assert_atom`](Self::assert_atom); returns satisfiability.
    pub fn assume(&mut self, a: &Atom) -> bool {
        if self.unsat {
            return false;
        }
        let Some((t, k)) = self.resolve_atom(a).to_constraint() else {
            self.unsat = true;
            return false;
        };
        if let Some(c) = t.as_const() {
            let holds = match k {
                Kind::Zero => c == 0,
                Kind::NonZero => c != 0,
                Kind::NonPos => c <= 0,
            };
            if !holds {
                self.unsat = true;
            }
            return holds;
        }
        if self.entails(a) {
            return true;
        }
        let touched: BTreeSet<SymValue> = t.vars().collect();
        self.add(vec![(t, k)], touched)
    }

    fn add(&mut self, mut work: Work, mut touched: BTreeSet<SymValue>) -> bool {
        while let Some((t, k)) = work.pop() {
            if !self.add_one(t, k, &mut work, &mut touched) {
                self.unsat = true;
                return false;
            }
        }
        if !self.component_sat(&touched) {
            self.unsat = true;
            return false;
        }
        true
    }

    fn add_one(
        &mut self,
        t: LinTerm,
        k: Kind,
        work: &mut Work,
        touched: &mut BTreeSet<SymValue>,
    ) -> bool {
        let t = self.resolve(&t);
        let Some((form, s, c)) = LinForm::split(&t) else {
            let c = t.constant_part();
            return match k {
                Kind::Zero => c == 0,
                Kind::NonZero => c != 0,
                Kind::NonPos => c <= 0,
            };
        };
        touched.extend(form.coeffs().iter().map(|(v, _)| *v));
        let mut b = self.forms.get(&form).cloned().unwrap_or_default();
        let Some(neg_c) = c.checked_neg() else {
            return false;
        };
        match k {
            Kind::Zero => {
                if c % s != 0 {
                    return false;
                }
                let v = neg_c / s;
                b.lo = Some(b.lo.map_or(v, |l| l.max(v)));
                b.hi = Some(b.hi.map_or(v, |h| h.min(v)));
            }
            Kind::NonZero => {
                if c % s != 0 {
                    return true;
                }
                b.excluded.insert(neg_c / s);
            }
            Kind::NonPos => {
                if s > 0 {
                    let h = floor_div(neg_c, s);
                    b.hi = Some(b.hi.map_or(h, |x| x.min(h)));
                } else {
                    let l = ceil_div(neg_c, s);
                    b.lo = Some(b.lo.map_or(l, |x| x.max(l)));
                }
            }
        }
        if !b.normalize() {
            return false;
        }
        if let Some(v) = b.point() {
            if let Some((x, cx)) = form.unit_var() {
                self.forms.remove(&form);
                // cx·x + rest = v  ⇒  x = (v - rest)/cx
                let rest = form.to_term().substitute(x, &LinTerm::constant(0));
                let Some(sol) = rest
                    .and_then(|r| LinTerm::constant(v).checked_sub(&r))
                    .and_then(|r| r.checked_scale(cx))
                else {
                    return false;
                };
                return self.eliminate(x, sol, work, touched);
            }
        }
        self.forms.insert(form, b);
        true
    }

    fn eliminate(
        &mut self,
        x: SymValue,
        t: LinTerm,
        work: &mut Work,
        touched: &mut BTreeSet<SymValue>,
    ) -> bool {
        for e in self.subst.values_mut() {
            if e.mentions(x) {
                match e.substitute(x, &t) {
                    Some(n) => *e = n,
                    None => return false,
                }
            }
        }
        touched.extend(t.vars());
        self.subst.insert(x, t);
        let affected: Vec<LinForm> = self
            .forms
            .keys()
            .filter(|f| f.mentions(x))
            .cloned()
            .collect();
        for f in affected {
            let b = self.forms.remove(&f).expect("present");
            let ft = f.to_term();
            if let Some(l) = b.lo {
                match LinTerm::constant(l).checked_sub(&ft) {
                    Some(t) => work.push((t, Kind::NonPos)),
                    None => return false,
                }
            }
            if let Some(h) = b.hi {
                match ft.add_const(-h) {
                    Some(t) => work.push((t, Kind::NonPos)),
                    None => return false,
                }
            }
            for e in b.excluded {
                match ft.add_const(-e) {
                    Some(t) => work.push((t, Kind::NonZero)),
                    None => return false,
                }
            }
        }
        self.rekey_apps(work)
    }

    fn rekey_apps(&mut self, work: &mut Work) -> bool {
        let old = std::mem::take(&mut self.apps);
        for (key, r) in old {
            let args: Vec<LinTerm> = key.args.iter().map(|a| self.resolve(a)).collect();
            if !self.insert_app(key.op, args, r, work) {
                return false;
            }
        }
        true
    }

    /// Register `r = op(args)`; false when the application is undefined.
    fn insert_app(&mut self, op: AppOp, args: Vec<LinTerm>, r: SymValue, work: &mut Work) -> bool {
        let rt = self.resolve_var(r);
        if matches!(op, AppOp::Div | AppOp::Rem) && args[1].as_const() == Some(0) {
            return false;
        }
        if let Some(consts) = args
            .iter()
            .map(|a| a.as_const())
            .collect::<Option<Vec<i64>>>()
        {
            match op.eval(&consts) {
                Err(()) => return false,
                Ok(Some(v)) => {
                    if let Some(d) = rt.add_const(-v) {
                        work.push((d, Kind::Zero));
                        return true;
                    }
                    return false;
                }
                Ok(None) => {}
            }
        }
        let key = AppKey { op, args };
        match self.apps.get(&key) {
            Some(&other) => {
                let ot = self.resolve_var(other);
                match rt.checked_sub(&ot) {
                    Some(d) => work.push((d, Kind::Zero)),
                    None => return false,
                }
            }
            None => {
                self.apps.insert(key, r);
            }
        }
        true
    }

    /// Value of `op(args)`, allocating `fresh` for a new uninterpreted term.
    /// Returns `None` when the path becomes infeasible (division by zero).
    pub fn apply(&mut self, op: AppOp, args: &[LinTerm], fresh: SymValue) -> Option<LinTerm> {
        if self.unsat {
            return None;
        }
        let args: Vec<LinTerm> = args.iter().map(|a| self.resolve(a)).collect();
        if let Some(consts) = args
            .iter()
            .map(|a| a.as_const())
            .collect::<Option<Vec<i64>>>()
        {
            match op.eval(&consts) {
                Err(()) => {
                    self.unsat = true;
                    return None;
                }
                Ok(Some(v)) => return Some(LinTerm::constant(v)),
                Ok(None) => {}
            }
        }
        if op == AppOp::Mul {
            if let Some(c) = args[0].as_const() {
                if let Some(t) = args[1].checked_scale(c) {
                    return Some(t);
                }
            }
            if let Some(c) = args[1].as_const() {
                if let Some(t) = args[0].checked_scale(c) {
                    return Some(t);
                }
            }
        }
        if matches!(op, AppOp::Div | AppOp::Rem) {
            if let Some(0) = args[1].as_const() {
                self.unsat = true;
                return None;
            }
            if let Some(1) = args[1].as_const() {
                return Some(if op == AppOp::Div {
                    args[0].clone()
                } else {
                    LinTerm::constant(0)
                });
            }
            // Divisor must be non-zero on this path.
            if !args[1].is_const() && !self.assume(&Atom::ne(args[1].clone(), 0)) {
                return None;
            }
        }
        let key = AppKey { op, args };
        if let Some(&r) = self.apps.get(&key) {
            return Some(self.resolve_var(r));
        }
        self.apps.insert(key, fresh);
        Some(LinTerm::var(fresh))
    }

    /// The constraints connected to `keep`, with eliminated values resolved away.
    /// Uninterpreted results that were solved keep their defining equation.
    pub fn project(&self, keep: &BTreeSet<SymValue>) -> PathCondition {
        if self.unsat {
            return self.clone();
        }
        let mut vars = keep.clone();
        let mut forms: BTreeSet<&LinForm> = BTreeSet::new();
        let mut apps: BTreeSet<&AppKey> = BTreeSet::new();
        loop {
            let before = forms.len() + apps.len();
            for f in self.forms.keys() {
                if !forms.contains(f) && f.coeffs().iter().any(|(v, _)| vars.contains(v)) {
                    forms.insert(f);
                    vars.extend(f.coeffs().iter().map(|(v, _)| *v));
                }
            }
            for (k, r) in &self.apps {
                if apps.contains(k) {
                    continue;
                }
                let mut vs = BTreeSet::new();
                for a in &k.args {
                    a.collect_vars(&mut vs);
                }
                self.resolve_var(*r).collect_vars(&mut vs);
                if vs.iter().any(|v| vars.contains(v)) {
                    apps.insert(k);
                    vars.extend(vs);
                }
            }
            if forms.len() + apps.len() == before {
                break;
            }
        }
        let mut out = PathCondition::new();
        for f in forms {
            out.forms.insert(f.clone(), self.forms[f].clone());
        }
        for k in apps {
            let r = self.apps[k];
            if let Some(t) = self.subst.get(&r) {
                out.subst.insert(r, t.clone());
            }
            out.apps.insert(k.clone(), r);
        }
        out
    }

    fn component_sat(&self, seed: &BTreeSet<SymValue>) -> bool {
        let mut vars = seed.clone();
        let mut chosen: BTreeSet<&LinForm> = BTreeSet::new();
        loop {
            let before = chosen.len();
            for f in self.forms.keys() {
                if !chosen.contains(f) && f.coeffs().iter().any(|(v, _)| vars.contains(v)) {
                    chosen.insert(f);
                    vars.extend(f.coeffs().iter().map(|(v, _)| *v));
                }
            }
            if chosen.len() == before {
                break;
            }
        }
        let rows: Vec<(&LinForm, &Bounds)> =
            chosen.into_iter().map(|f| (f, &self.forms[f])).collect();
        !matches!(sat::solve(&rows), Outcome::Unsat)
    }

    pub fn is_sat(&self) -> bool {
        if self.unsat {
            return false;
        }
        let rows: Vec<(&LinForm, &Bounds)> = self.forms.iter().collect();
        !matches!(sat::solve(&rows), Outcome::Unsat)
    }

    /// True when every model of `self` satisfies `a`.
    pub fn entails(&self, a: &Atom) -> bool {
        if self.unsat {
            return true;
        }
        let r = self.resolve_atom(a);
        if let Some(h) = r.holds(&|_| 0).filter(|_| r.vars().is_empty()) {
            return h;
        }
        let mut neg = self.clone();
        let Some((t, k)) = r.negate().to_constraint() else {
            return false;
        };
        let touched = t.vars().collect();
        !neg.add(vec![(t, k)], touched)
    }

    /// An integer model covering every variable mentioned, including eliminated ones.
    pub fn model(&self) -> Option<BTreeMap<SymValue, i64>> {
        if self.unsat {
            return None;
        }
        let rows: Vec<(&LinForm, &Bounds)> = self.forms.iter().collect();
        let mut m = match sat::solve(&rows) {
            Outcome::Sat(m) => m,
            _ => return None,
        };
        for v in self.live_vars() {
            m.entry(v).or_insert(0);
        }
        for (x, t) in &self.subst {
            for v in t.vars() {
                m.entry(v).or_insert(0);
            }
            let val = t.eval(&|v| m.get(&v).copied().unwrap_or(0))?;
            m.insert(*x, val);
        }
        Some(m)
    }

    /// The constraints as atoms over live and eliminated variables.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        for (x, t) in &self.subst {
            out.push(Atom::eq(*x, t.clone()));
        }
        for (f, b) in &self.forms {
            out.extend(bounds_atoms(f, b));
        }
        out
    }

    /// Values defined by an uninterpreted application, keyed by result.
    fn app_results(&self) -> BTreeMap<SymValue, &AppKey> {
        let mut out = BTreeMap::new();
        for (k, r) in &self.apps {
            out.entry(*r).or_insert(k);
            if let Some(w) = self.resolve_var(*r).as_var() {
                out.entry(w).or_insert(k);
            }
        }
        out
    }

    /// Application results are shown as the application itself.
    pub fn display_with<'a>(&'a self, name: &'a dyn Fn(SymValue) -> String) -> String {
        if self.unsat {
            return "false".to_string();
        }
        let defined = self.app_results();
        fn show(
            v: SymValue,
            defined: &BTreeMap<SymValue, &AppKey>,
            name: &dyn Fn(SymValue) -> String,
            depth: u32,
        ) -> String {
            match defined.get(&v) {
                Some(k) if depth < 8 => k.display_with(&|w| show(w, defined, name, depth + 1)),
                _ => name(v),
            }
        }
        let name2 = |v: SymValue| show(v, &defined, name, 0);
        let mut parts = Vec::new();
        for (x, t) in &self.subst {
            if self.apps.values().any(|r| r == x) {
                continue;
            }
            parts.push(format!("{} = {}", name2(*x), t.display_with(&name2)));
        }
        for (f, b) in &self.forms {
            parts.extend(bounds_strings(f, b, &name2));
        }
        for (k, r) in &self.apps {
            let resolved = self.resolve_var(*r);
            if resolved
                .as_var()
                .is_some_and(|w| defined.get(&w) == Some(&k))
            {
                continue;
            }
            parts.push(format!(
                "{} = {}",
                k.display_with(&name2),
                resolved.display_with(&name2)
            ));
        }
        if parts.is_empty() {
            "true".to_string()
        } else {
            parts.join(" /\\ ")
        }
    }
}

pub(crate) fn bounds_atoms(f: &LinForm, b: &Bounds) -> Vec<Atom> {
    let ft = f.to_term();
    let mut out = Vec::new();
    if let Some(p) = b.point() {
        out.push(Atom::eq(ft, p));
        return out;
    }
    if let Some(l) = b.lo {
        out.push(Atom::le(l, ft.clone()));
    }
    if let Some(h) = b.hi {
        out.push(Atom::le(ft.clone(), h));
    }
    for e in &b.excluded {
        out.push(Atom::ne(ft.clone(), *e));
    }
    out
}

pub(crate) fn bounds_strings(
    f: &LinForm,
    b: &Bounds,
    name: &dyn Fn(SymValue) -> String,
) -> Vec<String> {
    struct F<'a>(&'a LinForm, &'a dyn Fn(SymValue) -> String);
    impl fmt::Display for F<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write_sum(f, self.0.coeffs(), 0, self.1)
        }
    }
    let lhs = F(f, name).to_string();
    let mut out = Vec::new();
    if let Some(p) = b.point() {
        out.push(format!("{lhs} = {p}"));
        return out;
    }
    if let Some(l) = b.lo {
        out.push(format!("{lhs} >= {l}"));
    }
    if let Some(h) = b.hi {
        out.push(format!("{lhs} <= {h}"));
    }
    for e in &b.excluded {
        out.push(format!("{lhs} != {e}"));
    }
    out
}

impl fmt::Display for PathCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&|v| v.to_string()))
    }
}
