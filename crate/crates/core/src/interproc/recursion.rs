use std::collections::{BTreeMap, BTreeSet};

use crate::solver::{bounds_atoms, Atom, LinTerm, SymValue};
use crate::symstate::{AbstractState, Divergence, DivergenceKind, RecursiveCallRecord};

/// Simultaneous substitution; `None` if a variable is unmapped or arithmetic overflows.
fn substitute(t: &LinTerm, map: &BTreeMap<SymValue, LinTerm>) -> Option<LinTerm> {
    let mut out = LinTerm::constant(t.constant_part());
    for (v, c) in t.coeffs() {
        out = out.checked_add(&map.get(v)?.checked_scale(*c)?)?;
    }
    Some(out)
}

/// Decide whether the pending call in `record` re-enters `procedure` in a state
/// satisfying the entry condition of the current path. If so the path repeats forever.
pub fn close_cycle(
    procedure: &str,
    st: &AbstractState,
    record: &RecursiveCallRecord,
    k: u32,
) -> Option<Divergence> {
    if st.over_approx || record.callee != procedure || record.args.len() != st.params.len() {
        return None;
    }
    let pc = &st.pc;
    // Entry values are expressed through the resolved pc variables; `sigma` maps
    // those to the values at the recursive call.
    let mut sigma: BTreeMap<SymValue, LinTerm> = BTreeMap::new();
    let mut checks: Vec<(LinTerm, LinTerm)> = Vec::new();
    let mut bind =
        |sigma: &mut BTreeMap<SymValue, LinTerm>, entry: LinTerm, target: LinTerm| match entry
            .as_var()
        {
            Some(w) if !sigma.contains_key(&w) => {
                sigma.insert(w, target);
            }
            _ => checks.push((entry, target)),
        };
    for ((_, p), a) in st.params.iter().zip(&record.args) {
        bind(&mut sigma, pc.resolve_var(*p), pc.resolve(a));
    }
    for (a, c) in &st.footprint {
        let at_call = substitute(&pc.resolve_var(*a), &sigma)?;
        let addr = pc.resolve(&at_call).as_var()?;
        let content = record
            .cells
            .iter()
            .find(|(ra, _)| pc.resolve(ra).as_var() == Some(addr))
            .map(|(_, rc)| pc.resolve(rc))?;
        bind(&mut sigma, pc.resolve_var(*c), content);
    }
    let pre: BTreeSet<SymValue> = sigma.keys().copied().collect();

    let mut obligations: Vec<Atom> = Vec::new();
    for (entry, target) in checks {
        obligations.push(Atom::eq(substitute(&entry, &sigma)?, target));
    }
    for (f, b) in pc.forms() {
        let inside = f.coeffs().iter().filter(|(v, _)| pre.contains(v)).count();
        if inside == 0 {
            continue;
        }
        if inside < f.coeffs().len() {
            return None;
        }
        for atom in bounds_atoms(f, b) {
            obligations.push(Atom::new(
                substitute(&atom.lhs, &sigma)?,
                atom.rel,
                substitute(&atom.rhs, &sigma)?,
            ));
        }
    }
    let mut scratch = pc.clone();
    let mut next = st.next;
    for (key, r) in pc.apps() {
        let mut vars = BTreeSet::new();
        for a in &key.args {
            a.collect_vars(&mut vars);
        }
        r.collect_vars(&mut vars);
        let inside = vars.iter().filter(|v| pre.contains(v)).count();
        if inside == 0 {
            continue;
        }
        if inside < vars.len() {
            return None;
        }
        let args: Vec<LinTerm> = key
            .args
            .iter()
            .map(|a| substitute(a, &sigma))
            .collect::<Option<_>>()?;
        let at_call = scratch.apply(key.op.clone(), &args, SymValue(next))?;
        next += 1;
        obligations.push(Atom::eq(at_call, substitute(&r, &sigma)?));
    }
    if !obligations.iter().all(|a| scratch.entails(a)) {
        return None;
    }
    let line = record.sites.first().map_or(0, |s| s.line);
    Some(Divergence {
        kind: DivergenceKind::Recursion {
            cycle: record.chain.clone(),
        },
        procedure: procedure.to_string(),
        line,
        trace: record.sites.clone(),
        k,
        propagated: false,
    })
}
