use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::state::AbstractState;
use super::trace::TraceStep;
use crate::solver::{pairs, LinTerm, PathCondition, SymValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpecKind {
    Ok,
    InfiniteProgram,
    RecursivePending,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DivergenceKind {
    Loop { goto: bool },
    Recursion { cycle: Vec<String> },
}

/// Where a divergent behaviour was established.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub kind: DivergenceKind,
    pub procedure: String,
    pub line: u32,
    pub trace: Vec<TraceStep>,
    pub k: u32,
    /// Reached through a callee's summary rather than found here.
    pub propagated: bool,
}

impl Divergence {
    pub fn origin(&self) -> (&str, u32, &DivergenceKind) {
        (&self.procedure, self.line, &self.kind)
    }
}

/// A call into a procedure that was still being analysed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecursiveCallRecord {
    pub callee: String,
    pub args: Vec<LinTerm>,
    /// Cells reachable from the arguments when the call was made.
    pub cells: Vec<(LinTerm, LinTerm)>,
    /// Procedures from the one containing this record down to the recursive call.
    pub chain: Vec<String>,
    pub sites: Vec<TraceStep>,
}

impl RecursiveCallRecord {
    pub fn vars(&self, out: &mut BTreeSet<SymValue>) {
        for a in &self.args {
            a.collect_vars(out);
        }
        for (a, c) in &self.cells {
            a.collect_vars(out);
            c.collect_vars(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spec {
    pub kind: SpecKind,
    /// Entry values of the parameters.
    pub params: Vec<LinTerm>,
    /// Footprint in materialization order, as (address, content).
    pub pre_cells: Vec<(LinTerm, LinTerm)>,
    pub pc: PathCondition,
    pub ret: Option<LinTerm>,
    pub post_cells: Vec<(LinTerm, LinTerm)>,
    pub allocated: Vec<LinTerm>,
    pub freed: Vec<LinTerm>,
    /// Addresses of the procedure's own variables that occur in the spec.
    pub locals: Vec<(String, LinTerm)>,
    pub rec_calls: Vec<RecursiveCallRecord>,
    pub approximate: bool,
    pub divergence: Option<Divergence>,
    #[serde(with = "pairs")]
    pub names: BTreeMap<SymValue, String>,
}

impl Spec {
    /// Close off a path. Return values and cells are expressed over the
    /// surviving values, and the path condition is projected onto them.
    pub fn from_state(
        st: &AbstractState,
        kind: SpecKind,
        ret: Option<LinTerm>,
        divergence: Option<Divergence>,
    ) -> Spec {
        let pc = &st.pc;
        let params: Vec<LinTerm> = st.params.iter().map(|(_, v)| pc.resolve_var(*v)).collect();
        let pre_cells: Vec<(LinTerm, LinTerm)> = st
            .footprint
            .iter()
            .map(|(a, c)| (pc.resolve_var(*a), pc.resolve_var(*c)))
            .collect();
        let (post_cells, allocated, freed) = if kind == SpecKind::InfiniteProgram {
            (Vec::new(), Vec::new(), Vec::new())
        } else {
            (
                st.heap
                    .cells
                    .iter()
                    .filter(|(a, _)| !st.is_slot(**a))
                    .map(|(a, c)| (LinTerm::var(*a), pc.resolve(c)))
                    .collect(),
                st.heap.allocated.iter().map(|a| LinTerm::var(*a)).collect(),
                st.heap.freed.iter().map(|a| LinTerm::var(*a)).collect(),
            )
        };
        let ret = ret.map(|r| pc.resolve(&r));
        let rec_calls: Vec<RecursiveCallRecord> = if kind == SpecKind::InfiniteProgram {
            Vec::new()
        } else {
            st.rec_calls
                .iter()
                .map(|r| RecursiveCallRecord {
                    args: r.args.iter().map(|a| pc.resolve(a)).collect(),
                    cells: r
                        .cells
                        .iter()
                        .map(|(a, c)| (pc.resolve(a), pc.resolve(c)))
                        .collect(),
                    ..r.clone()
                })
                .collect()
        };
        let mut keep = BTreeSet::new();
        for t in params.iter().chain(&allocated).chain(&freed).chain(&ret) {
            t.collect_vars(&mut keep);
        }
        for (a, c) in pre_cells.iter().chain(&post_cells) {
            a.collect_vars(&mut keep);
            c.collect_vars(&mut keep);
        }
        for r in &rec_calls {
            r.vars(&mut keep);
        }
        let projected = pc.project(&keep);
        let mut all = keep;
        all.extend(projected.live_vars());
        let locals = st
            .stack
            .iter()
            .filter_map(|(n, slot)| {
                let t = pc.resolve_var(*slot);
                let used = t.vars().any(|v| all.contains(&v));
                used.then(|| (n.clone(), t))
            })
            .collect();
        let names = st
            .value_names()
            .into_iter()
            .filter(|(v, _)| all.contains(v))
            .collect();
        Spec {
            kind,
            params,
            pre_cells,
            pc: projected,
            ret,
            post_cells,
            allocated,
            freed,
            locals,
            rec_calls,
            approximate: st.over_approx,
            divergence,
            names,
        }
    }

    /// Every value mentioned anywhere in the spec.
    pub fn vars(&self) -> BTreeSet<SymValue> {
        let mut s = BTreeSet::new();
        for t in self
            .params
            .iter()
            .chain(&self.allocated)
            .chain(&self.freed)
            .chain(&self.ret)
        {
            t.collect_vars(&mut s);
        }
        for (a, c) in self.pre_cells.iter().chain(&self.post_cells) {
            a.collect_vars(&mut s);
            c.collect_vars(&mut s);
        }
        for (_, t) in &self.locals {
            t.collect_vars(&mut s);
        }
        for r in &self.rec_calls {
            r.vars(&mut s);
        }
        s.extend(self.pc.live_vars());
        s.extend(self.pc.substitution().keys().copied());
        s
    }

    fn name_of(&self, v: SymValue) -> String {
        self.names.get(&v).cloned().unwrap_or_else(|| v.to_string())
    }

    /// The entry condition under which this behaviour happens, over parameter names.
    pub fn precondition_string(&self, param_names: &[String]) -> String {
        let name = |v: SymValue| self.name_of(v);
        let mut parts = Vec::new();
        for (p, t) in param_names.iter().zip(&self.params) {
            let shown = t.display_with(&name).to_string();
            if shown != *p {
                parts.push(format!("{p} = {shown}"));
            }
        }
        for (a, c) in &self.pre_cells {
            let (sa, sc) = (
                a.display_with(&name).to_string(),
                c.display_with(&name).to_string(),
            );
            if sc != format!("*{sa}") {
                parts.push(format!("*{sa} = {sc}"));
            }
        }
        if !self.pc.is_true() {
            parts.push(self.pc.display_with(&name));
        }
        if parts.is_empty() {
            "true".to_string()
        } else {
            parts.join(" /\\ ")
        }
    }

    /// Concrete parameter values satisfying the path condition. Only meaningful
    /// when the spec has no footprint and no uninterpreted applications.
    pub fn witness_args(&self) -> Option<Vec<i64>> {
        if !self.pre_cells.is_empty() || self.pc.apps().next().is_some() {
            return None;
        }
        let m = self.pc.model()?;
        self.params
            .iter()
            .map(|t| t.eval(&|v| m.get(&v).copied().unwrap_or(0)))
            .collect()
    }

    /// Value of `x` or `*x` at entry, for a parameter `x`.
    pub fn entry_value(&self, param_names: &[String], expr: &str) -> Option<LinTerm> {
        if let Some(inner) = expr.strip_prefix('*') {
            let addr = self.entry_value(param_names, inner)?;
            return self
                .pre_cells
                .iter()
                .find(|(a, _)| *a == addr)
                .map(|(_, c)| c.clone());
        }
        let i = param_names.iter().position(|p| p == expr)?;
        self.params.get(i).cloned()
    }
}

impl fmt::Display for Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |v: SymValue| self.name_of(v);
        let tag = match self.kind {
            SpecKind::Ok => "ok",
            SpecKind::InfiniteProgram => "infinite",
            SpecKind::RecursivePending => "recursive",
        };
        write!(
            f,
            "[{tag}{}]",
            if self.approximate { ", approx" } else { "" }
        )?;
        let params: Vec<String> = self
            .params
            .iter()
            .map(|t| t.display_with(&name).to_string())
            .collect();
        write!(f, " params({})", params.join(", "))?;
        for (a, c) in &self.pre_cells {
            write!(
                f,
                " {} |-> {}",
                a.display_with(&name),
                c.display_with(&name)
            )?;
        }
        write!(f, " : {}", self.pc.display_with(&name))?;
        match self.kind {
            SpecKind::InfiniteProgram => {
                if let Some(d) = &self.divergence {
                    write!(f, " => diverges at {}:{}", d.procedure, d.line)?;
                }
            }
            _ => {
                f.write_str(" =>")?;
                if let Some(r) = &self.ret {
                    write!(f, " ret = {}", r.display_with(&name))?;
                }
                for (a, c) in &self.post_cells {
                    write!(
                        f,
                        " {} |-> {}",
                        a.display_with(&name),
                        c.display_with(&name)
                    )?;
                }
                for a in &self.freed {
                    write!(f, " freed({})", a.display_with(&name))?;
                }
                for r in &self.rec_calls {
                    let args: Vec<String> = r
                        .args
                        .iter()
                        .map(|t| t.display_with(&name).to_string())
                        .collect();
                    write!(f, " RecursiveCall({}, {})", r.callee, args.join(", "))?;
                }
            }
        }
        Ok(())
    }
}

/// Everything known about one procedure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub procedure: String,
    pub params: Vec<String>,
    pub specs: Vec<Spec>,
    pub k: u32,
    /// More paths than the disjunct limit; extra specs were dropped.
    pub truncated: bool,
    /// Some path ran out of its step budget.
    pub incomplete: bool,
    /// Recursion records dropped because a callee footprint did not match.
    pub unify_failures: u32,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}({}) k={}",
            self.procedure,
            self.params.join(", "),
            self.k
        )?;
        for s in &self.specs {
            writeln!(f, "  {s}")?;
        }
        Ok(())
    }
}
