//! Pretty-printer producing re-parseable MiniC.

use std::fmt::Write;

use super::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_function(&mut out, f);
    }
    out
}

fn print_function(out: &mut String, f: &FunctionDef) {
    match f.ret {
        None => out.push_str("void "),
        Some(t) => {
            let _ = write!(out, "{t} ");
        }
    }
    out.push_str(&f.name);
    out.push('(');
    for (i, p) in f.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{} {}", p.ty, p.name);
    }
    out.push_str(") {\n");
    for s in &f.body {
        print_stmt(out, s, 1);
    }
    out.push_str("}\n");
}

fn indent(out: &mut String, n: usize) {
    for _ in 0..n {
        out.push_str("    ");
    }
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Block(items) => {
            out.push_str("{\n");
            for i in items {
                print_stmt(out, i, depth + 1);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let _ = writeln!(out, "if ({})", expr_to_string(cond));
            print_stmt(out, then_branch, depth + 1);
            if let Some(e) = else_branch {
                indent(out, depth);
                out.push_str("else\n");
                print_stmt(out, e, depth + 1);
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({})", expr_to_string(cond));
            print_stmt(out, body, depth + 1);
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            out.push_str("for (");
            if let Some(i) = init {
                out.push_str(&simple_to_string(&i.kind));
            }
            out.push_str("; ");
            if let Some(c) = cond {
                out.push_str(&expr_to_string(c));
            }
            out.push_str("; ");
            if let Some(u) = update {
                out.push_str(&simple_to_string(&u.kind));
            }
            out.push_str(")\n");
            print_stmt(out, body, depth + 1);
        }
        StmtKind::Switch { scrutinee, arms } => {
            let _ = writeln!(out, "switch ({}) {{", expr_to_string(scrutinee));
            for a in arms {
                indent(out, depth);
                match a.label {
                    CaseLabel::Case(v) => {
                        let _ = writeln!(out, "case {v}:");
                    }
                    CaseLabel::Default => out.push_str("default:\n"),
                }
                for s in &a.body {
                    print_stmt(out, s, depth + 1);
                }
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Label(l) => {
            let _ = writeln!(out, "{l}:");
        }
        StmtKind::Goto(l) => {
            let _ = writeln!(out, "goto {l};");
        }
        StmtKind::Break => out.push_str("break;\n"),
        StmtKind::Continue => out.push_str("continue;\n"),
        StmtKind::Return(None) => out.push_str("return;\n"),
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", expr_to_string(e));
        }
        StmtKind::Empty => out.push_str(";\n"),
        other => {
            out.push_str(&simple_to_string(other));
            out.push_str(";\n");
        }
    }
}

fn lvalue_to_string(l: &LValue) -> String {
    match l {
        LValue::Var(v) => v.clone(),
        LValue::Deref(e) => format!("*{}", unary_operand(e)),
    }
}

fn simple_to_string(k: &StmtKind) -> String {
    match k {
        StmtKind::Decl(ds) => {
            let parts: Vec<String> = ds
                .iter()
                .map(|d| {
                    let stars = "*".repeat(d.ty.depth as usize);
                    match &d.init {
                        Some(e) => format!("{stars}{} = {}", d.name, expr_to_string(e)),
                        None => format!("{stars}{}", d.name),
                    }
                })
                .collect();
            format!("int {}", parts.join(", "))
        }
        StmtKind::Assign { target, op, value } => format!(
            "{} {} {}",
            lvalue_to_string(target),
            op.symbol(),
            expr_to_string(value)
        ),
        StmtKind::IncDec {
            target,
            inc,
            prefix,
        } => {
            let op = if *inc { "++" } else { "--" };
            let t = match target {
                LValue::Var(v) => v.clone(),
                LValue::Deref(e) => format!("(*{})", unary_operand(e)),
            };
            if *prefix {
                format!("{op}{t}")
            } else {
                format!("{t}{op}")
            }
        }
        StmtKind::Expr(e) => expr_to_string(e),
        _ => String::new(),
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn unary_operand(e: &Expr) -> String {
    match e {
        Expr::Binary(..) => format!("({})", expr_to_string(e)),
        _ => expr_to_string(e),
    }
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(v) => out.push_str(v),
        Expr::AddrOf(v) => {
            let _ = write!(out, "&{v}");
        }
        Expr::Deref(inner) => {
            out.push('*');
            out.push_str(&unary_operand(inner));
        }
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            // `- -x` must not lex as `--x`.
            if matches!(op, UnOp::Neg) && matches!(**inner, Expr::Unary(UnOp::Neg, _)) {
                out.push(' ');
            }
            out.push_str(&unary_operand(inner));
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0);
            }
            out.push(')');
        }
        Expr::Binary(op, l, r) => {
            let prec = op.precedence();
            let paren = prec < min_prec;
            if paren {
                out.push('(');
            }
            write_expr(out, l, prec);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, r, prec + 1);
            if paren {
                out.push(')');
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn round_trip(src: &str) {
        let p1 = parse(src).unwrap();
        let printed = print_program(&p1);
        let p2 = parse(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(p1.without_spans(), p2.without_spans(), "{printed}");
    }

    #[test]
    fn round_trips_surface_forms() {
        round_trip(
            "int f(int *x, int y) { int *z = x, w; if (x == &y) { while (y < 100) { y++; (*z)--; } } \
             for (w = 0; w < 3; w++) { continue; } switch (y) { case 1: y += 2; break; default: ; } \
             L: goto L; return -(-y) - (1 - 2) * 3; }",
        );
        round_trip("void g() { int b = 0; int a = !(1 && 0 || 2) + *(&b); ++a; }");
    }

    #[test]
    fn subtraction_keeps_right_grouping() {
        let e = Expr::bin(
            BinOp::Sub,
            Expr::Int(1),
            Expr::bin(BinOp::Sub, Expr::Int(2), Expr::Int(3)),
        );
        assert_eq!(expr_to_string(&e), "1 - (2 - 3)");
    }
}
