use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::frontend::cfg::{ArithOp, Cfg, Cond, Instr, NodeId, PExpr, PLValue, Terminator};
use crate::report::{ModelKind, ModelTable};

/// How a concrete execution ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConcreteOutcome {
    Terminated(u64),
    /// A loop head was reached twice, without leaving the loop, in states that agree
    /// on everything the loop's future control flow depends on.
    RepeatedState,
    BudgetExhausted,
    /// The program did something the interpreter cannot execute deterministically.
    Stuck(String),
}

enum Stop {
    Repeated,
    Budget,
    Stuck(String),
    NoReturn,
}

const MAX_DEPTH: usize = 256;
const FIRST_ADDR: i64 = 4096;

/// Variables a loop's future control flow depends on, or `None` when it touches memory.
fn loop_slice(cfg: &Cfg, head: NodeId) -> Option<BTreeSet<String>> {
    let info = &cfg.loops[&head];
    let mut rel = BTreeSet::new();
    for &b in &info.body {
        let block = &cfg.blocks[b];
        for i in &block.instrs {
            match i {
                Instr::Assign {
                    target: PLValue::Deref(_),
                    ..
                }
                | Instr::Alloc { .. }
                | Instr::Free { .. } => return None,
                Instr::Assign { value, .. } if value.has_deref() || value.mentions_address() => {
                    return None
                }
                Instr::Call { args, .. }
                    if args.iter().any(|a| a.has_deref() || a.mentions_address()) =>
                {
                    return None
                }
                _ => {}
            }
        }
        if let Terminator::Branch { cond, .. } = &block.term {
            if cond.lhs.has_deref() || cond.rhs.has_deref() {
                return None;
            }
            rel.extend(cond.vars());
        }
    }
    loop {
        let before = rel.len();
        for &b in &info.body {
            for i in &cfg.blocks[b].instrs {
                match i {
                    Instr::Assign {
                        target: PLValue::Var(v),
                        value,
                        ..
                    } if rel.contains(v) => value.vars(&mut rel),
                    Instr::Call {
                        dest: Some(v),
                        args,
                        ..
                    } if rel.contains(v) => {
                        for a in args {
                            a.vars(&mut rel);
                        }
                    }
                    _ => {}
                }
            }
        }
        if rel.len() == before {
            return Some(rel);
        }
    }
}

struct Machine<'a> {
    cfgs: &'a BTreeMap<String, Cfg>,
    models: &'a ModelTable,
    mem: BTreeMap<i64, i64>,
    freed: BTreeSet<i64>,
    next_addr: i64,
    steps: u64,
    budget: u64,
    slices: BTreeMap<(String, NodeId), Option<BTreeSet<String>>>,
}

struct Frame<'c> {
    cfg: &'c Cfg,
    vars: BTreeMap<String, i64>,
    history: BTreeMap<NodeId, HashSet<Vec<i64>>>,
}

impl Machine<'_> {
    fn tick(&mut self) -> Result<(), Stop> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(Stop::Budget)
        } else {
            Ok(())
        }
    }

    fn fresh_addr(&mut self) -> i64 {
        let a = self.next_addr;
        self.next_addr += 1;
        a
    }

    fn slot(&mut self, f: &mut Frame<'_>, name: &str) -> i64 {
        if let Some(a) = f.vars.get(name) {
            return *a;
        }
        let a = self.fresh_addr();
        self.mem.insert(a, 0);
        f.vars.insert(name.to_string(), a);
        a
    }

    fn load(&self, a: i64) -> Result<i64, Stop> {
        if a == 0 {
            return Err(Stop::Stuck("null dereference".into()));
        }
        self.mem
            .get(&a)
            .copied()
            .ok_or_else(|| Stop::Stuck(format!("invalid address {a}")))
    }

    fn store(&mut self, a: i64, v: i64) -> Result<(), Stop> {
        if a == 0 || !self.mem.contains_key(&a) {
            return Err(Stop::Stuck(format!("invalid address {a}")));
        }
        self.mem.insert(a, v);
        Ok(())
    }

    fn eval(&mut self, f: &mut Frame<'_>, e: &PExpr) -> Result<i64, Stop> {
        let overflow = || Stop::Stuck("arithmetic overflow".into());
        Ok(match e {
            PExpr::Int(v) => *v,
            PExpr::Var(x) => {
                let a = self.slot(f, x);
                self.load(a)?
            }
            PExpr::AddrOf(x) => self.slot(f, x),
            PExpr::Deref(inner) => {
                let a = self.eval(f, inner)?;
                self.load(a)?
            }
            PExpr::Neg(inner) => self.eval(f, inner)?.checked_neg().ok_or_else(overflow)?,
            PExpr::Bin(op, a, b) => {
                let a = self.eval(f, a)?;
                let b = self.eval(f, b)?;
                match op {
                    ArithOp::Add => a.checked_add(b),
                    ArithOp::Sub => a.checked_sub(b),
                    ArithOp::Mul => a.checked_mul(b),
                    ArithOp::Div if b == 0 => return Err(Stop::Stuck("division by zero".into())),
                    ArithOp::Rem if b == 0 => return Err(Stop::Stuck("division by zero".into())),
                    ArithOp::Div => a.checked_div(b),
                    ArithOp::Rem => a.checked_rem(b),
                }
                .ok_or_else(overflow)?
            }
        })
    }

    fn cond(&mut self, f: &mut Frame<'_>, c: &Cond) -> Result<bool, Stop> {
        let a = self.eval(f, &c.lhs)?;
        let b = self.eval(f, &c.rhs)?;
        Ok(c.op.eval(a, b))
    }

    fn malloc(&mut self) -> i64 {
        let a = self.fresh_addr();
        self.mem.insert(a, 0);
        a
    }

    fn loop_key(&mut self, f: &mut Frame<'_>, head: NodeId) -> Vec<i64> {
        let slice = self
            .slices
            .entry((f.cfg.function.clone(), head))
            .or_insert_with(|| loop_slice(f.cfg, head))
            .clone();
        match slice {
            Some(vars) => vars
                .iter()
                .map(|v| {
                    let a = self.slot(f, v);
                    self.mem[&a]
                })
                .collect(),
            None => {
                let mut key: Vec<i64> = f.vars.values().copied().collect();
                for (a, v) in &self.mem {
                    key.push(*a);
                    key.push(*v);
                }
                key
            }
        }
    }

    fn call(&mut self, name: &str, args: &[i64], depth: usize) -> Result<Option<i64>, Stop> {
        if depth > MAX_DEPTH {
            return Err(Stop::Budget);
        }
        let cfgs = self.cfgs;
        let cfg = cfgs
            .get(name)
            .ok_or_else(|| Stop::Stuck(format!("`{name}` has no body")))?;
        let mut f = Frame {
            cfg,
            vars: BTreeMap::new(),
            history: BTreeMap::new(),
        };
        for (p, v) in cfg.params.iter().zip(args) {
            let a = self.slot(&mut f, p);
            self.mem.insert(a, *v);
        }
        let mut node = cfg.entry;
        let mut prev: Option<NodeId> = None;
        loop {
            if let Some(info) = cfg.loops.get(&node) {
                if !prev.is_some_and(|p| info.body.contains(&p)) {
                    f.history.remove(&node);
                }
                let key = self.loop_key(&mut f, node);
                if !f.history.entry(node).or_default().insert(key) {
                    return Err(Stop::Repeated);
                }
            }
            for instr in &cfg.blocks[node].instrs {
                self.tick()?;
                if let Some(r) = self.exec(&mut f, instr, depth)? {
                    return Ok(r);
                }
            }
            self.tick()?;
            prev = Some(node);
            node = match &cfg.blocks[node].term {
                Terminator::Jump { target, .. } => *target,
                Terminator::Branch {
                    cond,
                    then_bb,
                    else_bb,
                    ..
                } => {
                    if self.cond(&mut f, cond)? {
                        *then_bb
                    } else {
                        *else_bb
                    }
                }
                Terminator::Return { value, .. } => {
                    return match value {
                        Some(e) => Ok(Some(self.eval(&mut f, e)?)),
                        None => Ok(None),
                    };
                }
            };
        }
    }

    /// `Some(ret)` when the instruction returns from the frame.
    fn exec(
        &mut self,
        f: &mut Frame<'_>,
        instr: &Instr,
        depth: usize,
    ) -> Result<Option<Option<i64>>, Stop> {
        match instr {
            Instr::Assign { target, value, .. } => {
                let v = self.eval(f, value)?;
                let a = match target {
                    PLValue::Var(x) => self.slot(f, x),
                    PLValue::Deref(e) => self.eval(f, e)?,
                };
                self.store(a, v)?;
            }
            Instr::Havoc { var, .. } => {
                let a = self.slot(f, var);
                self.mem.insert(a, 0);
            }
            Instr::Assume { cond, polarity, .. } => {
                if self.cond(f, cond)? != *polarity {
                    return Err(Stop::Stuck("assumption violated".into()));
                }
            }
            Instr::Alloc { dest, .. } => {
                let a = self.malloc();
                let slot = self.slot(f, dest);
                self.store(slot, a)?;
            }
            Instr::Free { arg, .. } => {
                let a = self.eval(f, arg)?;
                if a != 0 {
                    if self.freed.contains(&a) || self.mem.remove(&a).is_none() {
                        return Err(Stop::Stuck("invalid free".into()));
                    }
                    self.freed.insert(a);
                }
            }
            Instr::Return { value, .. } => {
                let r = match value {
                    Some(e) => Some(self.eval(f, e)?),
                    None => None,
                };
                return Ok(Some(r));
            }
            Instr::Call {
                dest, name, args, ..
            } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(f, a)?);
                }
                let r = if self.cfgs.contains_key(name) {
                    self.call(name, &vals, depth + 1)?
                } else {
                    match self.models.get(name) {
                        Some(ModelKind::Alloc) => Some(self.malloc()),
                        Some(ModelKind::Noreturn) => return Err(Stop::NoReturn),
                        _ => return Err(Stop::Stuck(format!("`{name}` is not deterministic"))),
                    }
                };
                if let Some(d) = dest {
                    let v = r.ok_or_else(|| Stop::Stuck(format!("`{name}` returns no value")))?;
                    let a = self.slot(f, d);
                    self.store(a, v)?;
                }
            }
        }
        Ok(None)
    }
}

/// Run `entry` on integer arguments for at most `budget` steps.
pub fn concrete_run(
    cfgs: &BTreeMap<String, Cfg>,
    models: &ModelTable,
    entry: &str,
    args: &[i64],
    budget: u64,
) -> ConcreteOutcome {
    let mut m = Machine {
        cfgs,
        models,
        mem: BTreeMap::new(),
        freed: BTreeSet::new(),
        next_addr: FIRST_ADDR,
        steps: 0,
        budget,
        slices: BTreeMap::new(),
    };
    match m.call(entry, args, 0) {
        Ok(_) | Err(Stop::NoReturn) => ConcreteOutcome::Terminated(m.steps),
        Err(Stop::Repeated) => ConcreteOutcome::RepeatedState,
        Err(Stop::Budget) => ConcreteOutcome::BudgetExhausted,
        Err(Stop::Stuck(why)) => ConcreteOutcome::Stuck(why),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{build_cfg, parse};

    fn run(src: &str, entry: &str, args: &[i64]) -> ConcreteOutcome {
        let p = parse(src).unwrap();
        let cfgs = p
            .functions
            .iter()
            .map(|f| (f.name.clone(), build_cfg(f)))
            .collect();
        concrete_run(&cfgs, &ModelTable::new(), entry, args, 100_000)
    }

    #[test]
    fn terminating_loop() {
        assert!(matches!(
            run(
                "int f() { int x = 0; while (x < 10) x++; return x; }",
                "f",
                &[]
            ),
            ConcreteOutcome::Terminated(_)
        ));
    }

    #[test]
    fn repeat_ignores_irrelevant_growth() {
        assert_eq!(
            run("void f(int i, int p) { while (i < 20) p++; }", "f", &[3, 0]),
            ConcreteOutcome::RepeatedState
        );
        assert!(matches!(
            run(
                "void f(int i, int p) { while (i < 20) p++; }",
                "f",
                &[20, 0]
            ),
            ConcreteOutcome::Terminated(_)
        ));
    }

    #[test]
    fn data_flow_into_guard_is_tracked() {
        // x takes y's old value once, then the loop exits.
        let src = "void f(int x, int y) { while (x != 0) { x = y; y = 0; } }";
        assert!(matches!(
            run(src, "f", &[1, 1]),
            ConcreteOutcome::Terminated(_)
        ));
    }

    #[test]
    fn inner_loop_reentry_is_not_a_repeat() {
        let src = "void f() { int i = 0; while (i < 3) { int j = 0; while (j < 2) j++; i++; } }";
        assert!(matches!(run(src, "f", &[]), ConcreteOutcome::Terminated(_)));
    }

    #[test]
    fn counting_loop_exhausts_budget() {
        let src = "void f(int x) { while (x > 0) x++; }";
        assert!(matches!(
            run(src, "f", &[1]),
            ConcreteOutcome::Stuck(_) | ConcreteOutcome::BudgetExhausted
        ));
        assert!(matches!(
            run("void f() { int x = nondet(); }", "f", &[]),
            ConcreteOutcome::Stuck(_)
        ));
    }

    #[test]
    fn heap_loops_hash_memory() {
        let src = "void f(int *x, int y) { int *z = x; while (y < 100) { y++; (*z)--; } }";
        let p = parse(src).unwrap();
        let cfgs: BTreeMap<String, Cfg> = p
            .functions
            .iter()
            .map(|f| (f.name.clone(), build_cfg(f)))
            .collect();
        // Not a repeat: y and *x both change.
        assert!(matches!(
            concrete_run(&cfgs, &ModelTable::new(), "f", &[0, 0], 1000),
            ConcreteOutcome::Stuck(_)
        ));
    }
}
