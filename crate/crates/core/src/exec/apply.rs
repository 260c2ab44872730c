use std::collections::{BTreeMap, BTreeSet};

use crate::interproc::close_cycle;
use crate::solver::{Atom, LinTerm, SymValue};
use crate::symstate::{
    AbstractState, Divergence, RecursiveCallRecord, Spec, SpecKind, Summary, TraceStep,
};

/// What a call can do to the caller's state.
#[derive(Debug)]
pub enum CallResult {
    Returned(AbstractState, Option<LinTerm>),
    Diverged(AbstractState, Divergence),
}

/// Longest chain of pending calls carried through summaries.
const MAX_CHAIN: usize = 16;

/// Instantiate every applicable spec of `summary` at a call with arguments `args`.
/// Also returns how many recursion records were lost to footprint mismatches.
pub fn apply_summary(
    st: AbstractState,
    summary: &Summary,
    args: &[LinTerm],
    current: &str,
    call_step: &TraceStep,
    k: u32,
) -> (Vec<CallResult>, u32) {
    let mut out = Vec::new();
    let mut failures = 0;
    for spec in &summary.specs {
        if spec.kind == SpecKind::InfiniteProgram && st.over_approx {
            continue;
        }
        match apply_spec(st.clone(), spec, args, current, call_step, k) {
            Some(r) => out.push(r),
            None => {
                if !spec.rec_calls.is_empty() {
                    failures += 1;
                }
            }
        }
    }
    (out, failures)
}

fn apply_spec(
    mut s: AbstractState,
    spec: &Spec,
    args: &[LinTerm],
    current: &str,
    call_step: &TraceStep,
    k: u32,
) -> Option<CallResult> {
    if spec.params.len() != args.len() {
        return None;
    }
    let mut pre = BTreeSet::new();
    for t in &spec.params {
        t.collect_vars(&mut pre);
    }
    for (a, c) in &spec.pre_cells {
        a.collect_vars(&mut pre);
        c.collect_vars(&mut pre);
    }
    if spec
        .locals
        .iter()
        .any(|(_, t)| t.vars().any(|v| pre.contains(&v)))
    {
        return None;
    }
    let mut map = BTreeMap::new();
    for v in spec.vars() {
        let f = s.fresh();
        map.insert(v, f);
    }
    let ren = |t: &LinTerm| t.rename(&|v: SymValue| map.get(&v).copied().unwrap_or(v));

    for (p, a) in spec.params.iter().zip(args) {
        if !s.assume(&Atom::eq(ren(p), a.clone())) {
            return None;
        }
    }
    let mut seen = BTreeSet::new();
    for (a, c) in &spec.pre_cells {
        let addr = s.resolve_addr(&ren(a)).ok()?;
        if !seen.insert(addr) {
            return None;
        }
        let content = s.load(addr).ok()?;
        if !s.assume(&Atom::eq(ren(c), content)) {
            return None;
        }
    }
    for atom in spec.pc.atoms() {
        if !s.assume(&atom.map_terms(ren)) {
            return None;
        }
    }
    for (key, r) in spec.pc.apps() {
        let args: Vec<LinTerm> = key.args.iter().map(&ren).collect();
        let v = s.apply_op(key.op.clone(), &args)?;
        if !s.assume(&Atom::eq(v, ren(&r))) {
            return None;
        }
    }

    if spec.kind == SpecKind::InfiniteProgram {
        let d = spec.divergence.clone()?;
        return Some(CallResult::Diverged(
            s,
            Divergence {
                propagated: true,
                ..d
            },
        ));
    }

    let mut records = Vec::new();
    for r in &spec.rec_calls {
        if r.chain.len() >= MAX_CHAIN {
            return None;
        }
        let rargs: Vec<LinTerm> = r.args.iter().map(|a| s.pc.resolve(&ren(a))).collect();
        let mut cells: Vec<(LinTerm, LinTerm)> = r
            .cells
            .iter()
            .map(|(a, c)| (s.pc.resolve(&ren(a)), s.pc.resolve(&ren(c))))
            .collect();
        let covered: BTreeSet<LinTerm> = cells.iter().map(|(a, _)| a.clone()).collect();
        let mut roots = rargs.clone();
        roots.extend(cells.iter().map(|(_, c)| c.clone()));
        for (a, c) in s.subheap_rooted_at(&roots) {
            let a = LinTerm::var(a);
            if !covered.contains(&a) {
                cells.push((a, c));
            }
        }
        let mut chain = vec![current.to_string()];
        chain.extend(r.chain.iter().cloned());
        let mut sites = vec![call_step.clone()];
        sites.extend(r.sites.iter().cloned());
        records.push(RecursiveCallRecord {
            callee: r.callee.clone(),
            args: rargs,
            cells,
            chain,
            sites,
        });
    }

    for a in &spec.freed {
        let addr = s.resolve_addr(&ren(a)).ok()?;
        s.heap.cells.remove(&addr);
        s.heap.allocated.remove(&addr);
        s.heap.freed.insert(addr);
    }
    for a in &spec.allocated {
        let addr = s.resolve_addr(&ren(a)).ok()?;
        s.heap.allocated.insert(addr);
    }
    for (a, c) in &spec.post_cells {
        let addr = s.resolve_addr(&ren(a)).ok()?;
        if s.is_slot(addr) {
            return None;
        }
        s.heap.cells.insert(addr, ren(c));
    }
    if spec.approximate {
        s.over_approx = true;
    }
    let ret = spec.ret.as_ref().map(|r| s.pc.resolve(&ren(r)));

    for rec in records {
        if rec.callee == current {
            return close_cycle(current, &s, &rec, k).map(|d| CallResult::Diverged(s, d));
        }
        s.rec_calls.push(rec);
    }
    Some(CallResult::Returned(s, ret))
}
