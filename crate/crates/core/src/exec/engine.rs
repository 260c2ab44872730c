use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::frontend::cfg::Cond;
use crate::frontend::cfg::{
    loop_guard_atoms, ArithOp, Cfg, CmpOp, EdgeOrigin, Instr, NodeId, PExpr, PLValue, Terminator,
};
use crate::interproc::{close_cycle, SummaryResult};
use crate::report::{ModelKind, ModelTable};
use crate::solver::{AppOp, Atom, LinTerm, TerminationCondition};
use crate::symstate::{
    AbstractState, Divergence, DivergenceKind, MemError, RecursiveCallRecord, Spec, SpecKind,
    Summary, TraceStep,
};

use super::apply::{apply_summary, CallResult};

/// Bounds on the exploration of one procedure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WidenConfig {
    /// Visits per loop head and path before unrolling stops.
    pub k: u32,
    /// Specs kept per kind.
    pub max_disjuncts: usize,
    /// Instructions per path.
    pub step_budget: u32,
    /// Blocks executed per procedure, over all paths.
    pub path_budget: usize,
}

impl Default for WidenConfig {
    fn default() -> Self {
        WidenConfig {
            k: 3,
            max_disjuncts: 32,
            step_budget: 10_000,
            path_budget: 20_000,
        }
    }
}

/// Result of one instruction on one state.
#[derive(Debug)]
pub enum Outcome {
    Continue(AbstractState),
    Returned(AbstractState, Option<LinTerm>),
    Error(MemError),
    Diverged(AbstractState, Divergence),
}

/// Access to callee summaries during analysis.
pub trait SummaryOracle {
    fn is_defined(&self, name: &str) -> bool;
    fn request(&mut self, name: &str) -> SummaryResult;
}

pub fn eval_expr(st: &mut AbstractState, e: &PExpr) -> Result<LinTerm, MemError> {
    let overflow = MemError::Infeasible;
    Ok(match e {
        PExpr::Int(v) => LinTerm::constant(*v),
        PExpr::Var(x) => st.read_var(x)?,
        PExpr::AddrOf(x) => {
            let slot = st.slot_of(x);
            st.pc.resolve_var(slot)
        }
        PExpr::Deref(inner) => {
            let t = eval_expr(st, inner)?;
            let a = st.resolve_addr(&t)?;
            st.load(a)?
        }
        PExpr::Neg(inner) => eval_expr(st, inner)?.checked_scale(-1).ok_or(overflow)?,
        PExpr::Bin(op, a, b) => {
            let a = eval_expr(st, a)?;
            let b = eval_expr(st, b)?;
            match op {
                ArithOp::Add => a.checked_add(&b).ok_or(overflow)?,
                ArithOp::Sub => a.checked_sub(&b).ok_or(overflow)?,
                ArithOp::Mul => st.apply_op(AppOp::Mul, &[a, b]).ok_or(overflow)?,
                ArithOp::Div => st.apply_op(AppOp::Div, &[a, b]).ok_or(overflow)?,
                ArithOp::Rem => st.apply_op(AppOp::Rem, &[a, b]).ok_or(overflow)?,
            }
        }
    })
}

pub fn cond_atom(lhs: LinTerm, op: CmpOp, rhs: LinTerm) -> Atom {
    match op {
        CmpOp::Lt => Atom::lt(lhs, rhs),
        CmpOp::Le => Atom::le(lhs, rhs),
        CmpOp::Gt => Atom::gt(lhs, rhs),
        CmpOp::Ge => Atom::ge(lhs, rhs),
        CmpOp::Eq => Atom::eq(lhs, rhs),
        CmpOp::Ne => Atom::ne(lhs, rhs),
    }
}

fn eval_cond(st: &mut AbstractState, c: &Cond) -> Result<Atom, MemError> {
    let l = eval_expr(st, &c.lhs)?;
    let r = eval_expr(st, &c.rhs)?;
    Ok(cond_atom(l, c.op, r))
}

struct WorkItem {
    node: NodeId,
    st: AbstractState,
    from: Option<(NodeId, EdgeOrigin)>,
}

type OriginKey = (String, u32, DivergenceKind);

struct Exec<'a> {
    cfg: &'a Cfg,
    models: &'a ModelTable,
    config: &'a WidenConfig,
    oracle: &'a mut dyn SummaryOracle,
    specs: Vec<Spec>,
    kind_counts: BTreeMap<SpecKind, usize>,
    per_origin: BTreeMap<OriginKey, BTreeSet<String>>,
    truncated: bool,
    incomplete: bool,
    unify_failures: u32,
}

const PER_ORIGIN_CAP: usize = 4;

/// Explore `cfg` from a fresh entry state and summarize every path.
pub fn analyze_procedure(
    cfg: &Cfg,
    models: &ModelTable,
    config: &WidenConfig,
    oracle: &mut dyn SummaryOracle,
) -> Summary {
    let mut ex = Exec {
        cfg,
        models,
        config,
        oracle,
        specs: Vec::new(),
        kind_counts: BTreeMap::new(),
        per_origin: BTreeMap::new(),
        truncated: false,
        incomplete: false,
        unify_failures: 0,
    };
    ex.run();
    Summary {
        procedure: cfg.function.clone(),
        params: cfg.params.clone(),
        specs: ex.specs,
        k: config.k,
        truncated: ex.truncated,
        incomplete: ex.incomplete,
        unify_failures: ex.unify_failures,
    }
}

impl Exec<'_> {
    fn step(&self, line: u32, description: String, call: Option<String>) -> TraceStep {
        TraceStep {
            procedure: self.cfg.function.clone(),
            line,
            description,
            call,
        }
    }

    fn run(&mut self) {
        let mut init = AbstractState::fresh_entry_state(&self.cfg.params);
        let entry_line = self.cfg.blocks[self.cfg.entry].line;
        init.trace
            .push(self.step(entry_line, format!("start of {}", self.cfg.function), None));
        let mut work = vec![WorkItem {
            node: self.cfg.entry,
            st: init,
            from: None,
        }];
        let mut executed = 0usize;
        while let Some(item) = work.pop() {
            executed += 1;
            if executed > self.config.path_budget {
                self.incomplete = true;
                break;
            }
            let node = item.node;
            let mut next = Vec::new();
            for st in self.arrive(node, item.st, item.from) {
                for out in self.run_block(st, node) {
                    match out {
                        Outcome::Continue(st) => self.terminate(node, st, &mut next),
                        Outcome::Returned(st, ret) => self.finish_return(&st, ret),
                        Outcome::Error(_) => {}
                        Outcome::Diverged(st, d) => self.finish(Spec::from_state(
                            &st,
                            SpecKind::InfiniteProgram,
                            None,
                            Some(d),
                        )),
                    }
                }
            }
            work.extend(next.into_iter().rev());
        }
    }

    fn finish_return(&mut self, st: &AbstractState, ret: Option<LinTerm>) {
        let kind = if st.rec_calls.is_empty() {
            SpecKind::Ok
        } else {
            SpecKind::RecursivePending
        };
        self.finish(Spec::from_state(st, kind, ret, None));
    }

    fn finish(&mut self, spec: Spec) {
        if let Some(d) = &spec.divergence {
            let key = (d.procedure.clone(), d.line, d.kind.clone());
            let pre = spec.precondition_string(&self.cfg.params);
            let seen = self.per_origin.entry(key).or_default();
            if seen.contains(&pre) || seen.len() >= PER_ORIGIN_CAP {
                return;
            }
            seen.insert(pre);
        }
        let n = self.kind_counts.entry(spec.kind).or_insert(0);
        if *n >= self.config.max_disjuncts {
            self.truncated = true;
            return;
        }
        *n += 1;
        self.specs.push(spec);
    }

    /// Widening point: lasso check, unrolling bound, or pass-through.
    fn arrive(
        &mut self,
        node: NodeId,
        mut st: AbstractState,
        from: Option<(NodeId, EdgeOrigin)>,
    ) -> Vec<AbstractState> {
        let Some(info) = self.cfg.loops.get(&node) else {
            return vec![st];
        };
        let internal = from.is_some_and(|(s, _)| info.body.contains(&s));
        if internal {
            if st.cut_heads.contains(&node) {
                return Vec::new();
            }
            if loop_guard_atoms(self.cfg, node).is_empty() {
                st.tcs.push(TerminationCondition {
                    guard: Atom::truth(),
                    head: node,
                    line: info.line,
                    polarity: true,
                });
            }
        } else {
            st.head_history.remove(&node);
            st.visit_counts.remove(&node);
            st.cut_heads.remove(&node);
        }
        let pos = st.trace.len();
        let visit = st.visit_counts.get(&node).copied().unwrap_or(0);
        st.trace
            .push(self.step(info.line, format!("loop head, visit {}", visit + 1), None));
        let heads: BTreeSet<NodeId> = self
            .cfg
            .loop_heads
            .iter()
            .copied()
            .filter(|h| info.body.contains(h))
            .collect();
        let snap = st.snapshot(node, &info.control_vars, &heads);
        if internal && !st.over_approx {
            let history = st.head_history.get(&node).map(Vec::as_slice).unwrap_or(&[]);
            if let Some((_, p)) = history.iter().find(|(s, _)| *s == snap) {
                let goto = from.is_some_and(|(_, o)| o == EdgeOrigin::Goto);
                let d = Divergence {
                    kind: DivergenceKind::Loop { goto },
                    procedure: self.cfg.function.clone(),
                    line: info.line,
                    trace: st.trace.since(*p),
                    k: self.config.k,
                    propagated: false,
                };
                self.finish(Spec::from_state(
                    &st,
                    SpecKind::InfiniteProgram,
                    None,
                    Some(d),
                ));
                return Vec::new();
            }
        }
        if visit >= self.config.k {
            let mut exact = st.clone();
            exact.cut_heads.insert(node);
            let mut approx = st;
            approx.cut_heads.insert(node);
            approx.over_approx = true;
            let mut vars: Vec<&String> = info
                .modified_vars
                .iter()
                .filter(|v| approx.stack.contains_key(*v))
                .collect();
            vars.sort();
            for v in vars {
                if approx.havoc_var(v).is_err() {
                    return vec![exact];
                }
            }
            if info.heap_effects {
                let keys: Vec<_> = approx
                    .heap
                    .cells
                    .keys()
                    .copied()
                    .filter(|a| !approx.is_slot(*a))
                    .collect();
                for a in keys {
                    let v = approx.fresh();
                    approx.heap.cells.insert(a, LinTerm::var(v));
                }
            }
            return vec![exact, approx];
        }
        st.head_history.entry(node).or_default().push((snap, pos));
        st.visit_counts.insert(node, visit + 1);
        vec![st]
    }

    fn run_block(&mut self, st: AbstractState, node: NodeId) -> Vec<Outcome> {
        let mut live = vec![st];
        let mut done = Vec::new();
        for instr in &self.cfg.blocks[node].instrs {
            let mut next = Vec::new();
            for mut st in live {
                st.steps += 1;
                if st.steps > self.config.step_budget {
                    self.incomplete = true;
                    continue;
                }
                for out in self.exec_instr(st, instr) {
                    match out {
                        Outcome::Continue(s) => next.push(s),
                        other => done.push(other),
                    }
                }
            }
            live = next;
        }
        done.extend(live.into_iter().map(Outcome::Continue));
        // Keep path-discovery order: continuing states first.
        done.sort_by_key(|o| !matches!(o, Outcome::Continue(_)));
        done
    }

    fn terminate(&mut self, node: NodeId, mut st: AbstractState, out: &mut Vec<WorkItem>) {
        match &self.cfg.blocks[node].term {
            Terminator::Jump { target, origin } => {
                if *origin == EdgeOrigin::Goto {
                    let label = self.cfg.blocks[*target].label.clone().unwrap_or_default();
                    let line = self.cfg.blocks[node]
                        .instrs
                        .last()
                        .map_or(self.cfg.blocks[node].line, Instr::line);
                    st.trace
                        .push(self.step(line, format!("goto {label}"), None));
                }
                out.push(WorkItem {
                    node: *target,
                    st,
                    from: Some((node, *origin)),
                });
            }
            Terminator::Branch {
                cond,
                then_bb,
                else_bb,
                line,
                loop_guard,
            } => {
                let Ok(atom) = eval_cond(&mut st, cond) else {
                    return;
                };
                for (pol, succ) in [(true, *then_bb), (false, *else_bb)] {
                    let mut s = st.clone();
                    let a = if pol { atom.clone() } else { atom.negate() };
                    if !s.assume(&a) {
                        continue;
                    }
                    if let Some(h) = loop_guard {
                        if self
                            .cfg
                            .loops
                            .get(h)
                            .is_some_and(|l| l.body.contains(&succ))
                        {
                            s.tcs.push(TerminationCondition {
                                guard: a,
                                head: *h,
                                line: *line,
                                polarity: pol,
                            });
                        }
                    }
                    s.trace
                        .push(self.step(*line, format!("{cond} is {pol}"), None));
                    let origin = if pol {
                        EdgeOrigin::BranchTrue
                    } else {
                        EdgeOrigin::BranchFalse
                    };
                    out.push(WorkItem {
                        node: succ,
                        st: s,
                        from: Some((node, origin)),
                    });
                }
            }
            Terminator::Return { value, line } => {
                let ret = match value {
                    Some(e) => match eval_expr(&mut st, e) {
                        Ok(t) => Some(t),
                        Err(_) => return,
                    },
                    None => None,
                };
                st.trace.push(self.step(*line, "return".into(), None));
                self.finish_return(&st, ret);
            }
        }
    }

    fn exec_instr(&mut self, mut st: AbstractState, instr: &Instr) -> Vec<Outcome> {
        let res: Result<Vec<Outcome>, MemError> = (|| match instr {
            Instr::Assign { target, value, .. } => {
                let v = eval_expr(&mut st, value)?;
                match target {
                    PLValue::Var(x) => st.write_var(x, v)?,
                    PLValue::Deref(e) => {
                        let t = eval_expr(&mut st, e)?;
                        let a = st.resolve_addr(&t)?;
                        st.store(a, v)?;
                    }
                }
                Ok(vec![Outcome::Continue(st.clone())])
            }
            Instr::Havoc { var, .. } => {
                st.havoc_var(var)?;
                Ok(vec![Outcome::Continue(st.clone())])
            }
            Instr::Assume {
                cond,
                polarity,
                loop_guard,
                line,
            } => {
                let mut a = eval_cond(&mut st, cond)?;
                if !polarity {
                    a = a.negate();
                }
                if !st.assume(&a) {
                    return Ok(Vec::new());
                }
                if let Some(h) = loop_guard {
                    st.tcs.push(TerminationCondition {
                        guard: a,
                        head: *h,
                        line: *line,
                        polarity: *polarity,
                    });
                }
                Ok(vec![Outcome::Continue(st.clone())])
            }
            Instr::Alloc { dest, line } => {
                st.trace.push(self.step(*line, "malloc".into(), None));
                let mut out = Vec::new();
                for (v, mut s) in st.clone().alloc() {
                    s.write_var(dest, v)?;
                    out.push(Outcome::Continue(s));
                }
                Ok(out)
            }
            Instr::Free { arg, .. } => {
                let t = eval_expr(&mut st, arg)?;
                st.free(&t)?;
                Ok(vec![Outcome::Continue(st.clone())])
            }
            Instr::Return { value, .. } => {
                let ret = match value {
                    Some(e) => Some(eval_expr(&mut st, e)?),
                    None => None,
                };
                Ok(vec![Outcome::Returned(st.clone(), ret)])
            }
            Instr::Call { .. } => Ok(Vec::new()),
        })();
        if let Instr::Call {
            dest,
            name,
            args,
            line,
        } = instr
        {
            return self.exec_call(st, dest.as_deref(), name, args, *line);
        }
        res.unwrap_or_else(|e| vec![Outcome::Error(e)])
    }

    fn exec_call(
        &mut self,
        mut st: AbstractState,
        dest: Option<&str>,
        name: &str,
        args: &[PExpr],
        line: u32,
    ) -> Vec<Outcome> {
        let mut argv = Vec::with_capacity(args.len());
        for a in args {
            match eval_expr(&mut st, a) {
                Ok(t) => argv.push(t),
                Err(e) => return vec![Outcome::Error(e)],
            }
        }
        let step = self.step(line, format!("call {name}"), Some(name.to_string()));
        st.trace.push(step.clone());
        let assign = |mut s: AbstractState, v: Option<LinTerm>| -> Outcome {
            let v = v.unwrap_or_else(|| LinTerm::var(s.fresh()));
            match dest {
                Some(d) => match s.write_var(d, v) {
                    Ok(()) => Outcome::Continue(s),
                    Err(e) => Outcome::Error(e),
                },
                None => Outcome::Continue(s),
            }
        };
        if name == "nondet" {
            return vec![assign(st, None)];
        }
        if self.oracle.is_defined(name) {
            return match self.oracle.request(name) {
                SummaryResult::Found(summary) => {
                    self.call_summary(st, &summary, &argv, &step, assign)
                }
                SummaryResult::MutualRecursion => {
                    self.on_mutual_recursion(st, name, argv, step, assign)
                }
                SummaryResult::UnknownProcedure => vec![assign(st, None)],
            };
        }
        match self.models.get(name) {
            Some(ModelKind::Pure) => {
                let v = st.apply_op(AppOp::Fn(name.to_string()), &argv);
                match v {
                    Some(v) => vec![assign(st, Some(v))],
                    None => Vec::new(),
                }
            }
            Some(ModelKind::Alloc) => st
                .alloc()
                .into_iter()
                .map(|(v, s)| assign(s, Some(v)))
                .collect(),
            Some(ModelKind::Noreturn) => Vec::new(),
            Some(ModelKind::Havoc) | Some(ModelKind::Blocking) | None => vec![assign(st, None)],
        }
    }

    fn call_summary(
        &mut self,
        st: AbstractState,
        summary: &Arc<Summary>,
        argv: &[LinTerm],
        step: &TraceStep,
        assign: impl Fn(AbstractState, Option<LinTerm>) -> Outcome,
    ) -> Vec<Outcome> {
        let (results, failures) =
            apply_summary(st, summary, argv, &self.cfg.function, step, self.config.k);
        self.unify_failures += failures;
        results
            .into_iter()
            .map(|r| match r {
                CallResult::Returned(s, v) => assign(s, v),
                CallResult::Diverged(s, d) => Outcome::Diverged(s, d),
            })
            .collect()
    }

    fn on_mutual_recursion(
        &mut self,
        mut st: AbstractState,
        name: &str,
        argv: Vec<LinTerm>,
        step: TraceStep,
        assign: impl Fn(AbstractState, Option<LinTerm>) -> Outcome,
    ) -> Vec<Outcome> {
        let cells = st
            .subheap_rooted_at(&argv)
            .into_iter()
            .map(|(a, c)| (LinTerm::var(a), c))
            .collect();
        let record = RecursiveCallRecord {
            callee: name.to_string(),
            args: argv,
            cells,
            chain: vec![self.cfg.function.clone()],
            sites: vec![step],
        };
        if name == self.cfg.function {
            if let Some(d) = close_cycle(&self.cfg.function, &st, &record, self.config.k) {
                return vec![Outcome::Diverged(st, d)];
            }
        } else {
            st.rec_calls.push(record);
        }
        vec![assign(st, None)]
    }
}
