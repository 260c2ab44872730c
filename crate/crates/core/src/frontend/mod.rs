//! MiniC front end: lexing, parsing, pretty-printing and CFG lowering.

pub mod ast;
pub mod cfg;
mod lexer;
mod parser;
pub mod printer;

pub use ast::Program;
pub use cfg::{build_cfg, loop_guard_atoms, Cfg};
pub use parser::{parse, parse_sources};
pub use printer::print_program;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("{file}:{line}:{col}: parse error: {msg}")]
    Parse {
        file: String,
        line: u32,
        col: u32,
        msg: String,
    },
    #[error("line {line}: undefined label `{label}` in function `{func}`")]
    UndefinedLabel {
        func: String,
        label: String,
        line: u32,
    },
    #[error("line {line}: duplicate definition of function `{name}`")]
    DuplicateFunction { name: String, line: u32 },
    #[error("duplicate parameter `{name}` in function `{func}`")]
    DuplicateParam { func: String, name: String },
    #[error("line {line}: duplicate label `{label}` in function `{func}`")]
    DuplicateLabel {
        func: String,
        label: String,
        line: u32,
    },
    #[error("line {line}: use of undeclared variable `{name}` in function `{func}`")]
    UndeclaredVariable {
        func: String,
        name: String,
        line: u32,
    },
    #[error("line {line}: call to `{name}` in `{func}` has no definition or model")]
    UnresolvedCall {
        func: String,
        name: String,
        line: u32,
    },
    #[error("line {line}: `{name}` called with {got} arguments, expected {expected}")]
    ArityMismatch {
        name: String,
        line: u32,
        got: usize,
        expected: usize,
    },
}

/// Check that every call names a definition, a builtin, or something `is_modeled` accepts,
/// and that calls to defined functions pass the right number of arguments.
pub fn check_calls(
    program: &Program,
    is_modeled: impl Fn(&str) -> bool,
) -> Result<(), FrontendError> {
    use ast::{Expr, Stmt, StmtKind};
    fn walk_expr(e: &Expr, line: u32, out: &mut Vec<(String, usize, u32)>) {
        match e {
            Expr::Call(n, args) => {
                out.push((n.clone(), args.len(), line));
                for a in args {
                    walk_expr(a, line, out);
                }
            }
            Expr::Unary(_, a) | Expr::Deref(a) => walk_expr(a, line, out),
            Expr::Binary(_, a, b) => {
                walk_expr(a, line, out);
                walk_expr(b, line, out);
            }
            _ => {}
        }
    }
    fn walk(s: &Stmt, out: &mut Vec<(String, usize, u32)>) {
        let line = s.line;
        match &s.kind {
            StmtKind::Decl(ds) => {
                for d in ds {
                    if let Some(e) = &d.init {
                        walk_expr(e, line, out);
                    }
                }
            }
            StmtKind::Assign { target, value, .. } => {
                if let ast::LValue::Deref(e) = target {
                    walk_expr(e, line, out);
                }
                walk_expr(value, line, out);
            }
            StmtKind::IncDec {
                target: ast::LValue::Deref(e),
                ..
            } => walk_expr(e, line, out),
            StmtKind::Expr(e) => walk_expr(e, line, out),
            StmtKind::Return(Some(e)) => walk_expr(e, line, out),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                walk_expr(cond, line, out);
                walk(then_branch, out);
                if let Some(e) = else_branch {
                    walk(e, out);
                }
            }
            StmtKind::While { cond, body } => {
                walk_expr(cond, line, out);
                walk(body, out);
            }
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                if let Some(i) = init {
                    walk(i, out);
                }
                if let Some(c) = cond {
                    walk_expr(c, line, out);
                }
                if let Some(u) = update {
                    walk(u, out);
                }
                walk(body, out);
            }
            StmtKind::Switch { scrutinee, arms } => {
                walk_expr(scrutinee, line, out);
                for a in arms {
                    for s in &a.body {
                        walk(s, out);
                    }
                }
            }
            StmtKind::Block(items) => {
                for s in items {
                    walk(s, out);
                }
            }
            _ => {}
        }
    }
    for f in &program.functions {
        let mut calls = Vec::new();
        for s in &f.body {
            walk(s, &mut calls);
        }
        for (name, argc, line) in calls {
            if let Some(def) = program.function(&name) {
                if def.params.len() != argc {
                    return Err(FrontendError::ArityMismatch {
                        name,
                        line,
                        got: argc,
                        expected: def.params.len(),
                    });
                }
            } else if !ast::is_builtin(&name) && !is_modeled(&name) {
                return Err(FrontendError::UnresolvedCall {
                    func: f.name.clone(),
                    name,
                    line,
                });
            }
        }
    }
    Ok(())
}
