//! Lowering of MiniC functions into control-flow graphs.
//!
//! Every `while`, `for`, `switch`, `&&`/`||` and `goto` is lowered into
//! basic blocks joined by unconditional jumps and two-way branches. Loop
//! heads are the targets of back edges found by a depth-first walk from the
//! entry that visits successors in a fixed order, so `goto`-formed and
//! `while`-formed cycles are treated the same way.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Rem => "%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    pub fn eval(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }

    fn from_binop(op: BinOp) -> Option<CmpOp> {
        Some(match op {
            BinOp::Lt => CmpOp::Lt,
            BinOp::Le => CmpOp::Le,
            BinOp::Gt => CmpOp::Gt,
            BinOp::Ge => CmpOp::Ge,
            BinOp::Eq => CmpOp::Eq,
            BinOp::Ne => CmpOp::Ne,
            _ => return None,
        })
    }
}

/// Side-effect free expression over resolved variable names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PExpr {
    Int(i64),
    Var(String),
    AddrOf(String),
    Deref(Box<PExpr>),
    Neg(Box<PExpr>),
    Bin(ArithOp, Box<PExpr>, Box<PExpr>),
}

impl PExpr {
    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            PExpr::Int(_) => {}
            PExpr::Var(v) | PExpr::AddrOf(v) => {
                out.insert(v.clone());
            }
            PExpr::Deref(e) | PExpr::Neg(e) => e.vars(out),
            PExpr::Bin(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    pub fn has_deref(&self) -> bool {
        match self {
            PExpr::Deref(_) => true,
            PExpr::Neg(e) => e.has_deref(),
            PExpr::Bin(_, a, b) => a.has_deref() || b.has_deref(),
            _ => false,
        }
    }

    pub fn mentions_address(&self) -> bool {
        match self {
            PExpr::AddrOf(_) | PExpr::Deref(_) => true,
            PExpr::Neg(e) => e.mentions_address(),
            PExpr::Bin(_, a, b) => a.mentions_address() || b.mentions_address(),
            _ => false,
        }
    }
}

impl fmt::Display for PExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PExpr::Int(v) => write!(f, "{v}"),
            PExpr::Var(v) => f.write_str(v),
            PExpr::AddrOf(v) => write!(f, "&{v}"),
            PExpr::Deref(e) => match **e {
                PExpr::Bin(..) => write!(f, "*({e})"),
                _ => write!(f, "*{e}"),
            },
            PExpr::Neg(e) => write!(f, "-({e})"),
            PExpr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cond {
    pub lhs: PExpr,
    pub op: CmpOp,
    pub rhs: PExpr,
}

impl Cond {
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.lhs.vars(&mut out);
        self.rhs.vars(&mut out);
        out
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PLValue {
    Var(String),
    Deref(PExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Assign {
        target: PLValue,
        value: PExpr,
        line: u32,
    },
    /// Declaration without initializer: the slot receives an unknown value.
    Havoc {
        var: String,
        line: u32,
    },
    Assume {
        cond: Cond,
        polarity: bool,
        /// Loop head whose exit this guard controls.
        loop_guard: Option<NodeId>,
        line: u32,
    },
    Call {
        dest: Option<String>,
        name: String,
        args: Vec<PExpr>,
        line: u32,
    },
    Alloc {
        dest: String,
        line: u32,
    },
    Free {
        arg: PExpr,
        line: u32,
    },
    Return {
        value: Option<PExpr>,
        line: u32,
    },
}

impl Instr {
    pub fn line(&self) -> u32 {
        match self {
            Instr::Assign { line, .. }
            | Instr::Havoc { line, .. }
            | Instr::Assume { line, .. }
            | Instr::Call { line, .. }
            | Instr::Alloc { line, .. }
            | Instr::Free { line, .. }
            | Instr::Return { line, .. } => *line,
        }
    }

    pub fn is_loop_guard(&self) -> bool {
        matches!(
            self,
            Instr::Assume {
                loop_guard: Some(_),
                ..
            }
        )
    }
}

/// Which source construct produced an unconditional edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeOrigin {
    Fallthrough,
    Goto,
    LoopBack,
    Break,
    Continue,
    BranchTrue,
    BranchFalse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    Jump {
        target: NodeId,
        origin: EdgeOrigin,
    },
    Branch {
        cond: Cond,
        then_bb: NodeId,
        else_bb: NodeId,
        line: u32,
        loop_guard: Option<NodeId>,
    },
    Return {
        value: Option<PExpr>,
        line: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub instrs: Vec<Instr>,
    pub term: Terminator,
    pub line: u32,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub origin: EdgeOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub ty: MiniType,
    pub is_param: bool,
    pub is_temp: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopInfo {
    pub head: NodeId,
    pub line: u32,
    pub body: BTreeSet<NodeId>,
    /// Variables whose values can influence a branch inside the loop.
    pub control_vars: BTreeSet<String>,
    pub modified_vars: BTreeSet<String>,
    /// Body writes through pointers, frees, or calls a procedure.
    pub heap_effects: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub function: String,
    pub params: Vec<String>,
    pub blocks: Vec<Block>,
    pub edges: Vec<Edge>,
    pub entry: NodeId,
    pub loop_heads: BTreeSet<NodeId>,
    /// Indices into `edges`.
    pub back_edges: BTreeSet<usize>,
    pub vars: BTreeMap<String, VarInfo>,
    pub loops: BTreeMap<NodeId, LoopInfo>,
}

impl Cfg {
    pub fn successors(&self, n: NodeId) -> Vec<NodeId> {
        match &self.blocks[n].term {
            Terminator::Jump { target, .. } => vec![*target],
            Terminator::Branch {
                then_bb, else_bb, ..
            } => vec![*then_bb, *else_bb],
            Terminator::Return { .. } => vec![],
        }
    }

    pub fn edge_index(&self, src: NodeId, dst: NodeId, origin: EdgeOrigin) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| e.src == src && e.dst == dst && e.origin == origin)
    }

    pub fn is_back_edge(&self, src: NodeId, dst: NodeId, origin: EdgeOrigin) -> bool {
        self.edge_index(src, dst, origin)
            .is_some_and(|i| self.back_edges.contains(&i))
    }

    /// The callee names appearing in call instructions, in textual order.
    pub fn callees(&self) -> Vec<String> {
        let mut out = Vec::new();
        for b in &self.blocks {
            for i in &b.instrs {
                if let Instr::Call { name, .. } = i {
                    if !out.contains(name) {
                        out.push(name.clone());
                    }
                }
            }
        }
        out
    }
}

/// Syntactic guard expressions controlling exit from the loop rooted at `head`.
pub fn loop_guard_atoms(cfg: &Cfg, head: NodeId) -> Vec<(Cond, u32)> {
    cfg.blocks
        .iter()
        .filter_map(|b| match &b.term {
            Terminator::Branch {
                cond,
                line,
                loop_guard: Some(h),
                ..
            } if *h == head => Some((cond.clone(), *line)),
            _ => None,
        })
        .collect()
}

pub fn build_cfg(f: &FunctionDef) -> Cfg {
    let mut b = Builder::new(f);
    b.lower_function(f);
    b.finish(f)
}

struct Proto {
    instrs: Vec<Instr>,
    term: Option<Terminator>,
    line: u32,
    label: Option<String>,
}

struct Builder {
    protos: Vec<Proto>,
    cur: NodeId,
    scopes: Vec<HashMap<String, String>>,
    name_counts: HashMap<String, u32>,
    labels: HashMap<String, NodeId>,
    break_stack: Vec<NodeId>,
    continue_stack: Vec<NodeId>,
    temps: u32,
    vars: BTreeMap<String, VarInfo>,
}

impl Builder {
    fn new(f: &FunctionDef) -> Self {
        let mut b = Builder {
            protos: Vec::new(),
            cur: 0,
            scopes: vec![HashMap::new()],
            name_counts: HashMap::new(),
            labels: HashMap::new(),
            break_stack: Vec::new(),
            continue_stack: Vec::new(),
            temps: 0,
            vars: BTreeMap::new(),
        };
        b.cur = b.new_block(f.span.line);
        for p in &f.params {
            let unique = b.declare(&p.name, p.ty);
            if let Some(v) = b.vars.get_mut(&unique) {
                v.is_param = true;
            }
        }
        b
    }

    fn new_block(&mut self, line: u32) -> NodeId {
        self.protos.push(Proto {
            instrs: Vec::new(),
            term: None,
            line,
            label: None,
        });
        self.protos.len() - 1
    }

    fn emit(&mut self, i: Instr) {
        let cur = self.cur;
        self.protos[cur].instrs.push(i);
    }

    fn terminate(&mut self, t: Terminator) {
        let cur = self.cur;
        if self.protos[cur].term.is_none() {
            self.protos[cur].term = Some(t);
        }
    }

    fn jump(&mut self, target: NodeId, origin: EdgeOrigin) {
        self.terminate(Terminator::Jump { target, origin });
    }

    fn declare(&mut self, name: &str, ty: MiniType) -> String {
        let count = self.name_counts.entry(name.to_string()).or_insert(0);
        let unique = if *count == 0 {
            name.to_string()
        } else {
            format!("{name}#{count}")
        };
        *count += 1;
        self.scopes
            .last_mut()
            .expect("scope stack never empty")
            .insert(name.to_string(), unique.clone());
        self.vars.insert(
            unique.clone(),
            VarInfo {
                ty,
                is_param: false,
                is_temp: false,
            },
        );
        unique
    }

    fn resolve(&mut self, name: &str) -> String {
        for s in self.scopes.iter().rev() {
            if let Some(u) = s.get(name) {
                return u.clone();
            }
        }
        // Unknown names are rejected by the scope check; fall back to an
        // implicit function-level local so lowering stays total.
        let unique = name.to_string();
        self.vars.entry(unique.clone()).or_insert(VarInfo {
            ty: MiniType::INT,
            is_param: false,
            is_temp: false,
        });
        unique
    }

    fn temp(&mut self) -> String {
        let t = format!("$t{}", self.temps);
        self.temps += 1;
        self.vars.insert(
            t.clone(),
            VarInfo {
                ty: MiniType::INT,
                is_param: false,
                is_temp: true,
            },
        );
        t
    }

    fn collect_labels(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            match &s.kind {
                StmtKind::Label(l) => {
                    let bb = self.new_block(s.line);
                    self.protos[bb].label = Some(l.clone());
                    self.labels.insert(l.clone(), bb);
                }
                StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    self.collect_labels(std::slice::from_ref(then_branch));
                    if let Some(e) = else_branch {
                        self.collect_labels(std::slice::from_ref(e));
                    }
                }
                StmtKind::While { body, .. } | StmtKind::For { body, .. } => {
                    self.collect_labels(std::slice::from_ref(body))
                }
                StmtKind::Switch { arms, .. } => {
                    for a in arms {
                        self.collect_labels(&a.body);
                    }
                }
                StmtKind::Block(items) => self.collect_labels(items),
                _ => {}
            }
        }
    }

    fn lower_function(&mut self, f: &FunctionDef) {
        self.collect_labels(&f.body);
        self.scopes.push(HashMap::new());
        for s in &f.body {
            self.lower_stmt(s);
        }
        self.scopes.pop();
        let end = f.end_line;
        self.terminate(Terminator::Return {
            value: None,
            line: end,
        });
    }

    fn after_jump(&mut self, line: u32) {
        self.cur = self.new_block(line);
    }

    fn lower_stmt(&mut self, s: &Stmt) {
        let line = s.line;
        match &s.kind {
            StmtKind::Empty => {}
            StmtKind::Block(items) => {
                self.scopes.push(HashMap::new());
                for i in items {
                    self.lower_stmt(i);
                }
                self.scopes.pop();
            }
            StmtKind::Decl(decls) => {
                for d in decls {
                    // Initializer is evaluated before the name comes into scope.
                    let init = d.init.as_ref().map(|e| (e, self.is_direct_call(e)));
                    match init {
                        Some((e, true)) => {
                            let unique = self.declare(&d.name, d.ty);
                            self.lower_call_into(e, Some(unique), line);
                        }
                        Some((e, false)) => {
                            let v = self.lower_expr(e, line);
                            let unique = self.declare(&d.name, d.ty);
                            self.emit(Instr::Assign {
                                target: PLValue::Var(unique),
                                value: v,
                                line,
                            });
                        }
                        None => {
                            let unique = self.declare(&d.name, d.ty);
                            self.emit(Instr::Havoc { var: unique, line });
                        }
                    }
                }
            }
            StmtKind::Assign { target, op, value } => {
                if *op == AssignOp::Set && self.is_direct_call(value) {
                    if let LValue::Var(v) = target {
                        let v = self.resolve(v);
                        self.lower_call_into(value, Some(v), line);
                        return;
                    }
                }
                let rhs = self.lower_expr(value, line);
                let target = self.lower_lvalue(target, line);
                let value = match op {
                    AssignOp::Set => rhs,
                    _ => {
                        let cur = lvalue_read(&target);
                        let aop = match op {
                            AssignOp::Add => ArithOp::Add,
                            AssignOp::Sub => ArithOp::Sub,
                            AssignOp::Mul => ArithOp::Mul,
                            AssignOp::Div => ArithOp::Div,
                            AssignOp::Set => unreachable!(),
                        };
                        PExpr::Bin(aop, Box::new(cur), Box::new(rhs))
                    }
                };
                self.emit(Instr::Assign {
                    target,
                    value,
                    line,
                });
            }
            StmtKind::IncDec { target, inc, .. } => {
                let target = self.lower_lvalue(target, line);
                let op = if *inc { ArithOp::Add } else { ArithOp::Sub };
                let value = PExpr::Bin(op, Box::new(lvalue_read(&target)), Box::new(PExpr::Int(1)));
                self.emit(Instr::Assign {
                    target,
                    value,
                    line,
                });
            }
            StmtKind::Expr(e) => {
                if self.is_direct_call(e) {
                    self.lower_call_into(e, None, line);
                } else {
                    self.lower_expr(e, line);
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let then_bb = self.new_block(line);
                let join = self.new_block(line);
                let else_bb = if else_branch.is_some() {
                    self.new_block(line)
                } else {
                    join
                };
                self.lower_cond(cond, then_bb, else_bb, line);
                self.cur = then_bb;
                self.lower_stmt(then_branch);
                self.jump(join, EdgeOrigin::Fallthrough);
                if let Some(e) = else_branch {
                    self.cur = else_bb;
                    self.lower_stmt(e);
                    self.jump(join, EdgeOrigin::Fallthrough);
                }
                self.cur = join;
            }
            StmtKind::While { cond, body } => {
                let head = self.new_block(line);
                let body_bb = self.new_block(line);
                let exit = self.new_block(line);
                self.jump(head, EdgeOrigin::Fallthrough);
                self.cur = head;
                self.lower_cond(cond, body_bb, exit, line);
                self.cur = body_bb;
                self.break_stack.push(exit);
                self.continue_stack.push(head);
                self.lower_stmt(body);
                self.break_stack.pop();
                self.continue_stack.pop();
                self.jump(head, EdgeOrigin::LoopBack);
                self.cur = exit;
            }
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                self.scopes.push(HashMap::new());
                if let Some(i) = init {
                    self.lower_stmt(i);
                }
                let head = self.new_block(line);
                let body_bb = self.new_block(line);
                let step = self.new_block(line);
                let exit = self.new_block(line);
                self.jump(head, EdgeOrigin::Fallthrough);
                self.cur = head;
                match cond {
                    Some(c) => self.lower_cond(c, body_bb, exit, line),
                    None => self.jump(body_bb, EdgeOrigin::Fallthrough),
                }
                self.cur = body_bb;
                self.break_stack.push(exit);
                self.continue_stack.push(step);
                self.lower_stmt(body);
                self.break_stack.pop();
                self.continue_stack.pop();
                self.jump(step, EdgeOrigin::Fallthrough);
                self.cur = step;
                if let Some(u) = update {
                    self.lower_stmt(u);
                }
                self.jump(head, EdgeOrigin::LoopBack);
                self.cur = exit;
                self.scopes.pop();
            }
            StmtKind::Switch { scrutinee, arms } => {
                let value = self.lower_expr(scrutinee, line);
                let value = match value {
                    PExpr::Int(_) | PExpr::Var(_) => value,
                    other => {
                        let t = self.temp();
                        self.emit(Instr::Assign {
                            target: PLValue::Var(t.clone()),
                            value: other,
                            line,
                        });
                        PExpr::Var(t)
                    }
                };
                let end = self.new_block(line);
                let arm_bbs: Vec<NodeId> = arms.iter().map(|a| self.new_block(a.line)).collect();
                let mut default_bb = None;
                for (i, a) in arms.iter().enumerate() {
                    match a.label {
                        CaseLabel::Case(c) => {
                            let next = self.new_block(a.line);
                            self.terminate(Terminator::Branch {
                                cond: Cond {
                                    lhs: value.clone(),
                                    op: CmpOp::Eq,
                                    rhs: PExpr::Int(c),
                                },
                                then_bb: arm_bbs[i],
                                else_bb: next,
                                line: a.line,
                                loop_guard: None,
                            });
                            self.cur = next;
                        }
                        CaseLabel::Default => default_bb = Some(arm_bbs[i]),
                    }
                }
                self.jump(default_bb.unwrap_or(end), EdgeOrigin::Fallthrough);
                self.break_stack.push(end);
                self.scopes.push(HashMap::new());
                for (i, a) in arms.iter().enumerate() {
                    self.cur = arm_bbs[i];
                    for s in &a.body {
                        self.lower_stmt(s);
                    }
                    let next = arm_bbs.get(i + 1).copied().unwrap_or(end);
                    self.jump(next, EdgeOrigin::Fallthrough);
                }
                self.scopes.pop();
                self.break_stack.pop();
                self.cur = end;
            }
            StmtKind::Goto(l) => {
                let target = self.labels[l];
                self.jump(target, EdgeOrigin::Goto);
                self.after_jump(line);
            }
            StmtKind::Label(l) => {
                let target = self.labels[l];
                self.jump(target, EdgeOrigin::Fallthrough);
                self.cur = target;
            }
            StmtKind::Break => {
                if let Some(&t) = self.break_stack.last() {
                    self.jump(t, EdgeOrigin::Break);
                }
                self.after_jump(line);
            }
            StmtKind::Continue => {
                if let Some(&t) = self.continue_stack.last() {
                    self.jump(t, EdgeOrigin::Continue);
                }
                self.after_jump(line);
            }
            StmtKind::Return(e) => {
                let value = e.as_ref().map(|e| self.lower_expr(e, line));
                self.terminate(Terminator::Return { value, line });
                self.after_jump(line);
            }
        }
    }

    fn is_direct_call(&self, e: &Expr) -> bool {
        matches!(e, Expr::Call(..))
    }

    fn lower_call_into(&mut self, e: &Expr, dest: Option<String>, line: u32) {
        let Expr::Call(name, args) = e else {
            unreachable!("caller checked is_direct_call")
        };
        let lowered: Vec<PExpr> = args.iter().map(|a| self.lower_expr(a, line)).collect();
        match name.as_str() {
            "malloc" => {
                let dest = dest.unwrap_or_else(|| self.temp());
                self.emit(Instr::Alloc { dest, line });
            }
            "free" => {
                if let Some(arg) = lowered.into_iter().next() {
                    self.emit(Instr::Free { arg, line });
                }
                if let Some(d) = dest {
                    self.emit(Instr::Assign {
                        target: PLValue::Var(d),
                        value: PExpr::Int(0),
                        line,
                    });
                }
            }
            _ => self.emit(Instr::Call {
                dest,
                name: name.clone(),
                args: lowered,
                line,
            }),
        }
    }

    fn lower_lvalue(&mut self, l: &LValue, line: u32) -> PLValue {
        match l {
            LValue::Var(v) => PLValue::Var(self.resolve(v)),
            LValue::Deref(e) => PLValue::Deref(self.lower_expr(e, line)),
        }
    }

    fn lower_expr(&mut self, e: &Expr, line: u32) -> PExpr {
        match e {
            Expr::Int(v) => PExpr::Int(*v),
            Expr::Var(v) => PExpr::Var(self.resolve(v)),
            Expr::AddrOf(v) => PExpr::AddrOf(self.resolve(v)),
            Expr::Deref(inner) => PExpr::Deref(Box::new(self.lower_expr(inner, line))),
            Expr::Unary(UnOp::Neg, inner) => match self.lower_expr(inner, line) {
                PExpr::Int(v) => PExpr::Int(v.wrapping_neg()),
                other => PExpr::Neg(Box::new(other)),
            },
            Expr::Call(..) => {
                let t = self.temp();
                self.lower_call_into(e, Some(t.clone()), line);
                PExpr::Var(t)
            }
            Expr::Binary(op, l, r) if !op.is_comparison() && !op.is_logical() => {
                let l = self.lower_expr(l, line);
                let r = self.lower_expr(r, line);
                let aop = match op {
                    BinOp::Add => ArithOp::Add,
                    BinOp::Sub => ArithOp::Sub,
                    BinOp::Mul => ArithOp::Mul,
                    BinOp::Div => ArithOp::Div,
                    BinOp::Rem => ArithOp::Rem,
                    _ => unreachable!(),
                };
                PExpr::Bin(aop, Box::new(l), Box::new(r))
            }
            // Boolean-valued expression in value position.
            Expr::Unary(UnOp::Not, _) | Expr::Binary(..) => {
                let t = self.temp();
                let t_bb = self.new_block(line);
                let f_bb = self.new_block(line);
                let join = self.new_block(line);
                self.lower_cond(e, t_bb, f_bb, line);
                for (bb, v) in [(t_bb, 1), (f_bb, 0)] {
                    self.cur = bb;
                    self.emit(Instr::Assign {
                        target: PLValue::Var(t.clone()),
                        value: PExpr::Int(v),
                        line,
                    });
                    self.jump(join, EdgeOrigin::Fallthrough);
                }
                self.cur = join;
                PExpr::Var(t)
            }
        }
    }

    fn lower_cond(&mut self, e: &Expr, t: NodeId, f: NodeId, line: u32) {
        match e {
            Expr::Binary(BinOp::And, a, b) => {
                let mid = self.new_block(line);
                self.lower_cond(a, mid, f, line);
                self.cur = mid;
                self.lower_cond(b, t, f, line);
            }
            Expr::Binary(BinOp::Or, a, b) => {
                let mid = self.new_block(line);
                self.lower_cond(a, t, mid, line);
                self.cur = mid;
                self.lower_cond(b, t, f, line);
            }
            Expr::Unary(UnOp::Not, a) => self.lower_cond(a, f, t, line),
            Expr::Binary(op, a, b) if op.is_comparison() => {
                let lhs = self.lower_expr(a, line);
                let rhs = self.lower_expr(b, line);
                let op = CmpOp::from_binop(*op).expect("comparison");
                self.terminate(Terminator::Branch {
                    cond: Cond { lhs, op, rhs },
                    then_bb: t,
                    else_bb: f,
                    line,
                    loop_guard: None,
                });
            }
            other => {
                let lhs = self.lower_expr(other, line);
                self.terminate(Terminator::Branch {
                    cond: Cond {
                        lhs,
                        op: CmpOp::Ne,
                        rhs: PExpr::Int(0),
                    },
                    then_bb: t,
                    else_bb: f,
                    line,
                    loop_guard: None,
                });
            }
        }
    }

    fn finish(self, f: &FunctionDef) -> Cfg {
        let protos = self.protos;
        let succ = |p: &Proto| -> Vec<NodeId> {
            match p.term.as_ref().expect("every block terminated") {
                Terminator::Jump { target, .. } => vec![*target],
                Terminator::Branch {
                    then_bb, else_bb, ..
                } => vec![*then_bb, *else_bb],
                Terminator::Return { .. } => vec![],
            }
        };
        // Reachability from entry, renumbered in creation order.
        let mut reachable = vec![false; protos.len()];
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if reachable[n] {
                continue;
            }
            reachable[n] = true;
            stack.extend(succ(&protos[n]));
        }
        let mut remap = vec![usize::MAX; protos.len()];
        let mut next = 0;
        for (i, r) in reachable.iter().enumerate() {
            if *r {
                remap[i] = next;
                next += 1;
            }
        }
        let mut blocks: Vec<Block> = Vec::with_capacity(next);
        for (i, p) in protos.into_iter().enumerate() {
            if !reachable[i] {
                continue;
            }
            let term = match p.term.expect("terminated") {
                Terminator::Jump { target, origin } => Terminator::Jump {
                    target: remap[target],
                    origin,
                },
                Terminator::Branch {
                    cond,
                    then_bb,
                    else_bb,
                    line,
                    loop_guard,
                } => Terminator::Branch {
                    cond,
                    then_bb: remap[then_bb],
                    else_bb: remap[else_bb],
                    line,
                    loop_guard,
                },
                r @ Terminator::Return { .. } => r,
            };
            blocks.push(Block {
                instrs: p.instrs,
                term,
                line: p.line,
                label: p.label,
            });
        }

        let mut edges = Vec::new();
        for (i, b) in blocks.iter().enumerate() {
            match &b.term {
                Terminator::Jump { target, origin } => edges.push(Edge {
                    src: i,
                    dst: *target,
                    origin: *origin,
                }),
                Terminator::Branch {
                    then_bb, else_bb, ..
                } => {
                    edges.push(Edge {
                        src: i,
                        dst: *then_bb,
                        origin: EdgeOrigin::BranchTrue,
                    });
                    edges.push(Edge {
                        src: i,
                        dst: *else_bb,
                        origin: EdgeOrigin::BranchFalse,
                    });
                }
                Terminator::Return { .. } => {}
            }
        }

        let back_edges = dfs_back_edges(blocks.len(), &edges);
        let loop_heads: BTreeSet<NodeId> = back_edges.iter().map(|&e| edges[e].dst).collect();

        let mut preds: Vec<Vec<NodeId>> = vec![Vec::new(); blocks.len()];
        for e in &edges {
            preds[e.dst].push(e.src);
        }
        let mut bodies: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for &ei in &back_edges {
            let Edge { src, dst: head, .. } = edges[ei];
            let body = bodies.entry(head).or_default();
            body.insert(head);
            let mut work = vec![src];
            while let Some(n) = work.pop() {
                if body.insert(n) {
                    work.extend(preds[n].iter().copied());
                }
            }
        }

        // A branch guards the innermost loop it can leave.
        for (i, b) in blocks.iter_mut().enumerate() {
            if let Terminator::Branch {
                then_bb,
                else_bb,
                loop_guard,
                ..
            } = &mut b.term
            {
                let mut best: Option<(usize, NodeId)> = None;
                for (h, body) in &bodies {
                    if body.contains(&i) && (!body.contains(then_bb) || !body.contains(else_bb)) {
                        let size = body.len();
                        if best.is_none_or(|(s, _)| size < s) {
                            best = Some((size, *h));
                        }
                    }
                }
                *loop_guard = best.map(|(_, h)| h);
            }
        }

        let vars = self.vars;
        let loops = bodies
            .into_iter()
            .map(|(head, body)| {
                let info = loop_info(&blocks, &vars, head, body);
                (head, info)
            })
            .collect();

        Cfg {
            function: f.name.clone(),
            params: f.params.iter().map(|p| p.name.clone()).collect(),
            blocks,
            edges,
            entry: 0,
            loop_heads,
            back_edges,
            vars,
            loops,
        }
    }
}

fn lvalue_read(l: &PLValue) -> PExpr {
    match l {
        PLValue::Var(v) => PExpr::Var(v.clone()),
        PLValue::Deref(e) => PExpr::Deref(Box::new(e.clone())),
    }
}

fn dfs_back_edges(n: usize, edges: &[Edge]) -> BTreeSet<usize> {
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in edges.iter().enumerate() {
        out_edges[e.src].push(i);
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    let mut color = vec![Color::White; n];
    let mut back = BTreeSet::new();
    if n == 0 {
        return back;
    }
    // (node, next out-edge position)
    let mut stack: Vec<(NodeId, usize)> = vec![(0, 0)];
    color[0] = Color::Grey;
    while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
        if *pos < out_edges[node].len() {
            let ei = out_edges[node][*pos];
            *pos += 1;
            let dst = edges[ei].dst;
            match color[dst] {
                Color::White => {
                    color[dst] = Color::Grey;
                    stack.push((dst, 0));
                }
                Color::Grey => {
                    back.insert(ei);
                }
                Color::Black => {}
            }
        } else {
            color[node] = Color::Black;
            stack.pop();
        }
    }
    back
}

fn loop_info(
    blocks: &[Block],
    vars: &BTreeMap<String, VarInfo>,
    head: NodeId,
    body: BTreeSet<NodeId>,
) -> LoopInfo {
    let mut control = BTreeSet::new();
    let mut modified = BTreeSet::new();
    let mut heap_effects = false;
    for &n in &body {
        if let Terminator::Branch { cond, .. } = &blocks[n].term {
            control.extend(cond.vars());
        }
    }
    let is_pointer = |e: &PExpr| match e {
        PExpr::Var(v) => vars.get(v).is_some_and(|i| i.ty.is_pointer()),
        other => other.mentions_address(),
    };
    // Close over data flowing into control-relevant variables.
    loop {
        let before = control.len();
        for &n in &body {
            for instr in &blocks[n].instrs {
                match instr {
                    Instr::Assign {
                        target: PLValue::Var(x),
                        value,
                        ..
                    } => {
                        modified.insert(x.clone());
                        if control.contains(x) {
                            value.vars(&mut control);
                        }
                    }
                    Instr::Assign {
                        target: PLValue::Deref(addr),
                        value,
                        ..
                    } => {
                        heap_effects = true;
                        addr.vars(&mut control);
                        value.vars(&mut control);
                    }
                    Instr::Call {
                        dest, args, name, ..
                    } => {
                        if name != "nondet" {
                            heap_effects = true;
                        }
                        if let Some(d) = dest {
                            modified.insert(d.clone());
                        }
                        let relevant = dest.as_ref().is_some_and(|d| control.contains(d));
                        for a in args {
                            if relevant || is_pointer(a) {
                                a.vars(&mut control);
                            }
                        }
                    }
                    Instr::Alloc { dest, .. } | Instr::Havoc { var: dest, .. } => {
                        modified.insert(dest.clone());
                    }
                    Instr::Free { arg, .. } => {
                        heap_effects = true;
                        arg.vars(&mut control);
                    }
                    Instr::Assume { .. } | Instr::Return { .. } => {}
                }
            }
        }
        if control.len() == before {
            break;
        }
    }
    LoopInfo {
        head,
        line: blocks[head].line,
        body,
        control_vars: control,
        modified_vars: modified,
        heap_effects,
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn cfg_of(src: &str) -> Cfg {
        let p = parse(src).unwrap();
        build_cfg(&p.functions[0])
    }

    fn all_reachable(cfg: &Cfg) -> bool {
        let mut seen = vec![false; cfg.blocks.len()];
        let mut stack = vec![cfg.entry];
        while let Some(n) = stack.pop() {
            if !seen[n] {
                seen[n] = true;
                stack.extend(cfg.successors(n));
            }
        }
        seen.into_iter().all(|s| s)
    }

    #[test]
    fn goto_back_edge_is_one_loop() {
        let cfg = cfg_of("void a() { int x = 0;\nprevious: x++; goto previous; }");
        assert_eq!(cfg.back_edges.len(), 1);
        assert_eq!(cfg.loop_heads.len(), 1);
        let e = cfg.edges[*cfg.back_edges.iter().next().unwrap()];
        assert_eq!(e.origin, EdgeOrigin::Goto);
        assert!(all_reachable(&cfg));
    }

    #[test]
    fn forward_goto_is_not_a_loop() {
        let cfg = cfg_of("void d() { int x = 0; goto next; next: x++; }");
        assert!(cfg.back_edges.is_empty());
        assert!(cfg.loop_heads.is_empty());
    }

    #[test]
    fn straight_line_is_single_block() {
        let cfg = cfg_of("int s() { int x = 0; return x; }");
        assert_eq!(cfg.blocks.len(), 1);
        assert!(cfg.edges.is_empty());
    }

    #[test]
    fn while_guard_atoms() {
        let cfg = cfg_of("void optim(int p) { int i = 0;\n while (i < 20) p++; }");
        let head = *cfg.loop_heads.iter().next().unwrap();
        let atoms = loop_guard_atoms(&cfg, head);
        assert_eq!(atoms.len(), 1);
        assert_eq!(atoms[0].0.to_string(), "i < 20");
        assert_eq!(atoms[0].1, 2);
        let info = &cfg.loops[&head];
        assert!(info.control_vars.contains("i"));
        assert!(!info.control_vars.contains("p"));
    }

    #[test]
    fn unguarded_goto_loop_has_no_guard_atoms() {
        let cfg = cfg_of("void a() { int x = 0; previous: x++; goto previous; }");
        let head = *cfg.loop_heads.iter().next().unwrap();
        assert!(loop_guard_atoms(&cfg, head).is_empty());
    }

    #[test]
    fn nested_loop_guards_belong_to_innermost_head() {
        let cfg = cfg_of("void n(int a, int b) {\n while (a)\n while (b) b--; }");
        assert_eq!(cfg.loop_heads.len(), 2);
        // Hand-built expectation: the outer head is created first.
        let heads: Vec<_> = cfg.loop_heads.iter().copied().collect();
        let (outer, inner) = (heads[0], heads[1]);
        assert!(cfg.loops[&outer].body.contains(&inner));
        let inner_atoms = loop_guard_atoms(&cfg, inner);
        assert_eq!(inner_atoms.len(), 1);
        assert_eq!(inner_atoms[0].0.to_string(), "b != 0");
        assert_eq!(inner_atoms[0].1, 3);
        let outer_atoms = loop_guard_atoms(&cfg, outer);
        assert_eq!(outer_atoms.len(), 1);
        assert_eq!(outer_atoms[0].0.to_string(), "a != 0");
    }

    #[test]
    fn break_inside_loop_is_a_guard() {
        let cfg = cfg_of("void w(int x) { while (1) { if (x > 3) break; x++; } }");
        let head = *cfg.loop_heads.iter().next().unwrap();
        let atoms: Vec<String> = loop_guard_atoms(&cfg, head)
            .into_iter()
            .map(|(c, _)| c.to_string())
            .collect();
        assert!(atoms.contains(&"x > 3".to_string()));
    }

    #[test]
    fn for_and_switch_lower_to_one_loop() {
        let cfg = cfg_of(
            "void s(int n, int t) { int i; for (i = 0; i < n; ) { switch (t) { case 1: i++; break; case 2: i += 2; break; } } }",
        );
        assert_eq!(cfg.loop_heads.len(), 1);
        assert!(all_reachable(&cfg));
        let head = *cfg.loop_heads.iter().next().unwrap();
        let info = &cfg.loops[&head];
        assert!(info.control_vars.contains("t"));
        assert!(info.control_vars.contains("i"));
    }

    #[test]
    fn shadowed_locals_get_unique_names() {
        let cfg = cfg_of("void s() { int x = 1; { int x = 2; x++; } x--; }");
        assert!(cfg.vars.contains_key("x"));
        assert!(cfg.vars.contains_key("x#1"));
    }

    #[test]
    fn continue_in_while_is_back_edge() {
        let cfg = cfg_of("void c(int x) { while (x > 0) { if (x == 5) continue; x--; } }");
        assert_eq!(cfg.loop_heads.len(), 1);
        assert_eq!(cfg.back_edges.len(), 2);
    }

    fn eval(e: &PExpr, env: &HashMap<String, i64>) -> i64 {
        match e {
            PExpr::Int(v) => *v,
            PExpr::Var(v) => env[v],
            PExpr::Neg(a) => -eval(a, env),
            PExpr::Bin(ArithOp::Add, a, b) => eval(a, env) + eval(b, env),
            PExpr::Bin(ArithOp::Sub, a, b) => eval(a, env) - eval(b, env),
            PExpr::Bin(ArithOp::Mul, a, b) => eval(a, env) * eval(b, env),
            other => panic!("unsupported in test evaluator: {other}"),
        }
    }

    // Walks straight-line and branching code over integer locals only.
    fn run(cfg: &Cfg, args: &[i64]) -> i64 {
        let mut env: HashMap<String, i64> = cfg
            .params
            .iter()
            .cloned()
            .zip(args.iter().copied())
            .collect();
        let mut n = cfg.entry;
        loop {
            for i in &cfg.blocks[n].instrs {
                match i {
                    Instr::Assign {
                        target: PLValue::Var(x),
                        value,
                        ..
                    } => {
                        let v = eval(value, &env);
                        env.insert(x.clone(), v);
                    }
                    other => panic!("unexpected {other:?}"),
                }
            }
            match &cfg.blocks[n].term {
                Terminator::Jump { target, .. } => n = *target,
                Terminator::Branch {
                    cond,
                    then_bb,
                    else_bb,
                    ..
                } => {
                    let taken = cond.op.eval(eval(&cond.lhs, &env), eval(&cond.rhs, &env));
                    n = if taken { *then_bb } else { *else_bb };
                }
                Terminator::Return { value, .. } => {
                    return value.as_ref().map_or(0, |v| eval(v, &env))
                }
            }
        }
    }

    #[test]
    fn short_circuit_lowering_matches_direct_evaluation() {
        type Reference = fn(bool, bool, bool) -> bool;
        let exprs: [(&str, Reference); 6] = [
            ("a && b", |a, b, _| a && b),
            ("a || b", |a, b, _| a || b),
            ("!(a && b) || c", |a, b, c| !(a && b) || c),
            ("a && (b || !c)", |a, b, c| a && (b || !c)),
            ("(a || b) && (b || c)", |a, b, c| (a || b) && (b || c)),
            ("!a || !b && c", |a, b, c| !a || (!b && c)),
        ];
        for (text, direct) in exprs {
            let branch = cfg_of(&format!(
                "int t(int a, int b, int c) {{ if ({text}) return 1; return 0; }}"
            ));
            let value = cfg_of(&format!(
                "int t(int a, int b, int c) {{ int r = {text}; return r; }}"
            ));
            for bits in 0..8 {
                let (a, b, c) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
                let args = [a as i64, b as i64, c as i64];
                let want = direct(a, b, c) as i64;
                assert_eq!(run(&branch, &args), want, "{text} on {args:?}");
                assert_eq!(run(&value, &args), want, "{text} value form on {args:?}");
            }
        }
    }
}
