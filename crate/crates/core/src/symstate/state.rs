use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::spec::RecursiveCallRecord;
use super::trace::Trace;
use crate::frontend::cfg::NodeId;
use crate::solver::{
    canonicalize, AppOp, Atom, CanonInput, CanonicalForm, LinTerm, PathCondition, SymValue,
    TerminationCondition,
};

/// Points-to cells plus allocation status. Stack slots live here too.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymHeap {
    pub cells: BTreeMap<SymValue, LinTerm>,
    pub allocated: BTreeSet<SymValue>,
    pub freed: BTreeSet<SymValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MemError {
    #[error("null dereference")]
    NullDereference,
    #[error("use after free")]
    UseAfterFree,
    #[error("double free")]
    DoubleFree,
    #[error("address not expressible in the footprint")]
    BadAddress,
    #[error("infeasible path")]
    Infeasible,
}

/// Canonical control state of a loop head.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoopSnapshot {
    pub head: NodeId,
    pub vars: Vec<String>,
    pub form: CanonicalForm,
}

#[derive(Debug, Clone)]
pub struct AbstractState {
    /// Program variable to slot address.
    pub stack: BTreeMap<String, SymValue>,
    pub heap: SymHeap,
    pub pc: PathCondition,
    pub tcs: Vec<TerminationCondition>,
    pub rec_calls: Vec<RecursiveCallRecord>,
    /// Snapshots per head, each with the trace length at that arrival.
    pub head_history: BTreeMap<NodeId, Vec<(LoopSnapshot, usize)>>,
    pub visit_counts: BTreeMap<NodeId, u32>,
    /// Heads whose back edges are no longer followed.
    pub cut_heads: BTreeSet<NodeId>,
    /// Entry values of the parameters.
    pub params: Vec<(String, SymValue)>,
    pub slot_names: BTreeMap<SymValue, String>,
    /// Cells materialized from the caller's memory, as (address, initial content).
    pub footprint: Vec<(SymValue, SymValue)>,
    pub next: u32,
    /// Set once values were forgotten at a widening point.
    pub over_approx: bool,
    pub trace: Trace,
    pub steps: u32,
}

impl AbstractState {
    /// Parameters bound to fresh values, empty heap, `true` path condition.
    pub fn fresh_entry_state(params: &[String]) -> Self {
        let mut s = AbstractState {
            stack: BTreeMap::new(),
            heap: SymHeap::default(),
            pc: PathCondition::new(),
            tcs: Vec::new(),
            rec_calls: Vec::new(),
            head_history: BTreeMap::new(),
            visit_counts: BTreeMap::new(),
            cut_heads: BTreeSet::new(),
            params: Vec::new(),
            slot_names: BTreeMap::new(),
            footprint: Vec::new(),
            next: 0,
            over_approx: false,
            trace: Trace::default(),
            steps: 0,
        };
        for p in params {
            let slot = s.new_slot(p);
            let v = s.fresh();
            s.heap.cells.insert(slot, LinTerm::var(v));
            s.params.push((p.clone(), v));
        }
        s
    }

    pub fn fresh(&mut self) -> SymValue {
        let v = SymValue(self.next);
        self.next += 1;
        v
    }

    fn new_slot(&mut self, name: &str) -> SymValue {
        let slot = self.fresh();
        self.stack.insert(name.to_string(), slot);
        self.slot_names.insert(slot, name.to_string());
        slot
    }

    pub fn is_slot(&self, a: SymValue) -> bool {
        self.slot_names.contains_key(&a)
    }

    /// Slot address of a variable, created on first use.
    pub fn slot_of(&mut self, name: &str) -> SymValue {
        match self.stack.get(name) {
            Some(s) => *s,
            None => {
                let slot = self.new_slot(name);
                let v = self.fresh();
                self.heap.cells.insert(slot, LinTerm::var(v));
                slot
            }
        }
    }

    pub fn read_var(&mut self, name: &str) -> Result<LinTerm, MemError> {
        let slot = self.slot_of(name);
        self.load(slot)
    }

    pub fn write_var(&mut self, name: &str, value: LinTerm) -> Result<(), MemError> {
        let slot = self.slot_of(name);
        self.store(slot, value)
    }

    pub fn havoc_var(&mut self, name: &str) -> Result<(), MemError> {
        let v = self.fresh();
        self.write_var(name, LinTerm::var(v))
    }

    /// Current value of a variable without creating anything.
    pub fn peek_var(&self, name: &str) -> Option<LinTerm> {
        let slot = self.stack.get(name)?;
        self.heap.cells.get(slot).map(|t| self.pc.resolve(t))
    }

    pub fn resolve_addr(&self, t: &LinTerm) -> Result<SymValue, MemError> {
        let r = self.pc.resolve(t);
        if let Some(v) = r.as_var() {
            return Ok(v);
        }
        match r.as_const() {
            Some(0) => Err(MemError::NullDereference),
            _ => Err(MemError::BadAddress),
        }
    }

    fn pre_vars(&self) -> BTreeSet<SymValue> {
        let mut s = BTreeSet::new();
        for (_, v) in &self.params {
            self.pc.resolve_var(*v).collect_vars(&mut s);
        }
        for (_, c) in &self.footprint {
            self.pc.resolve_var(*c).collect_vars(&mut s);
        }
        s
    }

    fn materialize(&mut self, addr: SymValue) -> Result<LinTerm, MemError> {
        if self.heap.freed.contains(&addr) {
            return Err(MemError::UseAfterFree);
        }
        if let Some(c) = self.heap.cells.get(&addr) {
            return Ok(c.clone());
        }
        if self.is_slot(addr)
            || self.heap.allocated.contains(&addr)
            || !self.pre_vars().contains(&addr)
        {
            return Err(MemError::BadAddress);
        }
        if !self.assume(&Atom::ne(addr, 0)) {
            return Err(MemError::NullDereference);
        }
        let addr = self.resolve_addr(&LinTerm::var(addr))?;
        let c = self.fresh();
        self.heap.cells.insert(addr, LinTerm::var(c));
        self.footprint.push((addr, c));
        Ok(LinTerm::var(c))
    }

    /// Content of `addr`, materializing a footprint cell on first access.
    pub fn load(&mut self, addr: SymValue) -> Result<LinTerm, MemError> {
        let addr = self.resolve_addr(&LinTerm::var(addr))?;
        let c = self.materialize(addr)?;
        Ok(self.pc.resolve(&c))
    }

    pub fn store(&mut self, addr: SymValue, value: LinTerm) -> Result<(), MemError> {
        let addr = self.resolve_addr(&LinTerm::var(addr))?;
        self.materialize(addr)?;
        let addr = self.resolve_addr(&LinTerm::var(addr))?;
        self.heap.cells.insert(addr, value);
        Ok(())
    }

    /// Non-null disjunct first, then the null result.
    pub fn alloc(self) -> Vec<(LinTerm, AbstractState)> {
        let mut ok = self.clone();
        let a = ok.fresh();
        let c = ok.fresh();
        ok.heap.cells.insert(a, LinTerm::var(c));
        ok.heap.allocated.insert(a);
        let mut out = Vec::with_capacity(2);
        if ok.assume(&Atom::ne(a, 0)) {
            out.push((LinTerm::var(a), ok));
        }
        out.push((LinTerm::constant(0), self));
        out
    }

    pub fn free(&mut self, t: &LinTerm) -> Result<(), MemError> {
        let a = match self.resolve_addr(t) {
            Err(MemError::NullDereference) => return Ok(()),
            other => other?,
        };
        if self.heap.freed.contains(&a) {
            return Err(MemError::DoubleFree);
        }
        if self.is_slot(a) {
            return Err(MemError::BadAddress);
        }
        self.materialize(a)?;
        let a = self.resolve_addr(&LinTerm::var(a))?;
        self.heap.cells.remove(&a);
        self.heap.allocated.remove(&a);
        self.heap.freed.insert(a);
        Ok(())
    }

    /// Strengthen the path condition; false when the state becomes infeasible.
    pub fn assume(&mut self, a: &Atom) -> bool {
        let before = self.pc.substitution().len();
        if !self.pc.assume(a) {
            return false;
        }
        self.pc.substitution().len() == before || self.rekey()
    }

    /// Uninterpreted or nonlinear operation; `None` when the path becomes infeasible.
    pub fn apply_op(&mut self, op: AppOp, args: &[LinTerm]) -> Option<LinTerm> {
        let fresh = self.fresh();
        let before = self.pc.substitution().len();
        let r = self.pc.apply(op, args, fresh)?;
        if self.pc.substitution().len() != before && !self.rekey() {
            return None;
        }
        Some(self.pc.resolve(&r))
    }

    /// Re-express addresses after equalities were learnt. Two distinct cells
    /// becoming one address contradicts separation.
    fn rekey(&mut self) -> bool {
        let key = |pc: &PathCondition, v: SymValue| pc.resolve_var(v).as_var();
        let mut cells = BTreeMap::new();
        for (k, v) in std::mem::take(&mut self.heap.cells) {
            let Some(nk) = key(&self.pc, k) else {
                return false;
            };
            if cells.insert(nk, v).is_some() {
                return false;
            }
        }
        self.heap.cells = cells;
        let set = |s: &BTreeSet<SymValue>| -> Option<BTreeSet<SymValue>> {
            s.iter().map(|v| key(&self.pc, *v)).collect()
        };
        let (Some(alloc), Some(freed)) = (set(&self.heap.allocated), set(&self.heap.freed)) else {
            return false;
        };
        if alloc.intersection(&freed).next().is_some() {
            return false;
        }
        self.heap.allocated = alloc;
        self.heap.freed = freed;
        for slot in self.stack.values_mut() {
            match key(&self.pc, *slot) {
                Some(n) => *slot = n,
                None => return false,
            }
        }
        let names = std::mem::take(&mut self.slot_names);
        for (k, n) in names {
            let Some(nk) = key(&self.pc, k) else {
                return false;
            };
            self.slot_names.insert(nk, n);
        }
        true
    }

    /// Cells reachable from the roots, in discovery order.
    pub fn subheap_rooted_at(&self, roots: &[LinTerm]) -> Vec<(SymValue, LinTerm)> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<SymValue> = VecDeque::new();
        for r in roots {
            queue.extend(self.pc.resolve(r).vars());
        }
        let mut out = Vec::new();
        while let Some(a) = queue.pop_front() {
            if !seen.insert(a) {
                continue;
            }
            if let Some(c) = self.heap.cells.get(&a) {
                let c = self.pc.resolve(c);
                queue.extend(c.vars());
                out.push((a, c));
            }
        }
        out
    }

    /// Projection of the state onto `vars` and the guards of loops in `heads`.
    pub fn snapshot(
        &self,
        head: NodeId,
        vars: &BTreeSet<String>,
        heads: &BTreeSet<NodeId>,
    ) -> LoopSnapshot {
        let mut names = Vec::new();
        let mut roots = Vec::new();
        for v in vars {
            if let Some(t) = self.peek_var(v) {
                names.push(v.clone());
                roots.push(t);
            }
        }
        let tcs: Vec<TerminationCondition> = self
            .tcs
            .iter()
            .filter(|t| heads.contains(&t.head))
            .cloned()
            .collect();
        let mut reach = roots.clone();
        for t in &tcs {
            reach.push(t.guard.lhs.clone());
            reach.push(t.guard.rhs.clone());
        }
        let cells = self.subheap_rooted_at(&reach);
        LoopSnapshot {
            head,
            vars: names,
            form: canonicalize(&CanonInput {
                roots: &roots,
                cells: &cells,
                pc: &self.pc,
                tcs: &tcs,
            }),
        }
    }

    /// Printable name of a value: parameter, `*param` content, or `&local`.
    pub fn value_names(&self) -> BTreeMap<SymValue, String> {
        let mut names = BTreeMap::new();
        for (slot, n) in &self.slot_names {
            names.insert(*slot, format!("&{n}"));
        }
        for (p, v) in &self.params {
            if let Some(x) = self.pc.resolve_var(*v).as_var() {
                names.entry(x).or_insert_with(|| p.clone());
            }
        }
        for (a, c) in &self.footprint {
            let (Some(a), Some(c)) = (
                self.pc.resolve_var(*a).as_var(),
                self.pc.resolve_var(*c).as_var(),
            ) else {
                continue;
            };
            if let Some(n) = names.get(&a).cloned() {
                let n = n
                    .strip_prefix('&')
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("*{n}"));
                names.entry(c).or_insert(n);
            }
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(params: &[&str]) -> AbstractState {
        AbstractState::fresh_entry_state(&params.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    }

    #[test]
    fn entry_state_binds_parameters() {
        let mut s = state(&["x"]);
        assert_eq!(s.stack.len(), 1);
        let x = s.read_var("x").unwrap();
        assert_eq!(x, LinTerm::var(s.params[0].1));
        assert!(s.pc.is_true());
        assert!(state(&[]).stack.is_empty());
    }

    #[test]
    fn pointer_parameters_materialize_lazily() {
        let mut s = state(&["p", "q"]);
        assert!(s.footprint.is_empty());
        let p = s.read_var("p").unwrap().as_var().unwrap();
        let vp = s.load(p).unwrap();
        assert_eq!(s.load(p).unwrap(), vp);
        assert_eq!(s.footprint.len(), 1);
        assert!(s.pc.entails(&Atom::ne(p, 0)));
    }

    #[test]
    fn freed_cells_cannot_be_read() {
        let s = state(&[]);
        let (a, mut s) = s.alloc().into_iter().next().unwrap();
        s.free(&a).unwrap();
        let a = a.as_var().unwrap();
        assert_eq!(s.load(a), Err(MemError::UseAfterFree));
        assert_eq!(s.free(&LinTerm::var(a)), Err(MemError::DoubleFree));
    }

    #[test]
    fn allocation_has_null_and_non_null_outcomes() {
        let outs = state(&[]).alloc();
        assert_eq!(outs.len(), 2);
        let a = outs[0].0.as_var().unwrap();
        assert!(outs[0].1.pc.entails(&Atom::ne(a, 0)));
        assert_eq!(outs[1].0, LinTerm::constant(0));
        let (b, s2) = outs[0].1.clone().alloc().into_iter().next().unwrap();
        assert_ne!(b.as_var().unwrap(), a);
        // Separation: equating two live cells is infeasible.
        let mut s3 = s2.clone();
        assert!(!s3.assume(&Atom::eq(a, b)));
    }

    #[test]
    fn aliasing_a_local_rekeys_its_slot() {
        // loop_pointer_nonterm: z = x; if (x == &y) { y++; (*z)--; }
        let mut s = state(&["x", "y"]);
        let x = s.read_var("x").unwrap();
        s.write_var("z", x.clone()).unwrap();
        let y_slot = s.slot_of("y");
        assert!(s.assume(&Atom::eq(x, y_slot)));
        let y0 = s.read_var("y").unwrap();
        s.write_var("y", y0.add_const(1).unwrap()).unwrap();
        let z = s.read_var("z").unwrap();
        let za = s.resolve_addr(&z).unwrap();
        let cur = s.load(za).unwrap();
        s.store(za, cur.add_const(-1).unwrap()).unwrap();
        assert_eq!(s.read_var("y").unwrap(), y0);
    }

    #[test]
    fn subheap_follows_points_to_chains() {
        let mut s = state(&["a"]);
        let a = s.read_var("a").unwrap().as_var().unwrap();
        let b = s.load(a).unwrap().as_var().unwrap();
        let c = s.load(b).unwrap();
        let frag = s.subheap_rooted_at(&[LinTerm::var(a)]);
        assert_eq!(frag, vec![(a, LinTerm::var(b)), (b, c)]);
        assert!(s.subheap_rooted_at(&[]).is_empty());
        // Unreachable cells do not change the fragment.
        let (_, s2) = s.clone().alloc().into_iter().next().unwrap();
        assert_eq!(s2.subheap_rooted_at(&[LinTerm::var(a)]), frag);
    }

    #[test]
    fn snapshots_ignore_untracked_variables() {
        let mut s = state(&["i", "p"]);
        let vars: BTreeSet<String> = ["i".to_string()].into();
        let heads = BTreeSet::from([1]);
        let before = s.snapshot(1, &vars, &heads);
        let p = s.read_var("p").unwrap();
        s.write_var("p", p.add_const(1).unwrap()).unwrap();
        assert_eq!(s.snapshot(1, &vars, &heads), before);
        let i = s.read_var("i").unwrap();
        s.write_var("i", i.add_const(1).unwrap()).unwrap();
        assert_ne!(s.snapshot(1, &vars, &heads), before);
    }
}
