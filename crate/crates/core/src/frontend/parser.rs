use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::FrontendError;

/// Parse one source text (reported as `<input>`).
pub fn parse(source_text: &str) -> Result<Program, FrontendError> {
    parse_sources(&[("<input>".to_string(), source_text.to_string())])
}

/// Parse several files into one program.
pub fn parse_sources(files: &[(String, String)]) -> Result<Program, FrontendError> {
    let mut program = Program::default();
    for (idx, (path, text)) in files.iter().enumerate() {
        let (toks, annotations) = tokenize(text, path)?;
        let mut p = Parser {
            toks,
            pos: 0,
            file: path.clone(),
            file_idx: idx as u32,
        };
        let mut functions = p.program()?;
        for (line, text) in &annotations {
            if text == "intended" {
                let idx = functions
                    .iter()
                    .position(|f| f.span.line <= *line && *line <= f.end_line)
                    // Outside any body: applies to the next definition.
                    .or_else(|| functions.iter().position(|f| f.span.line > *line));
                if let Some(i) = idx {
                    functions[i].intended = true;
                }
            }
            program.annotations.push(Annotation {
                file: idx as u32,
                line: *line,
                text: text.clone(),
            });
        }
        program.functions.append(&mut functions);
        program.source_files.push(SourceFile {
            path: path.clone(),
            text: text.clone(),
        });
    }
    validate(&program)?;
    Ok(program)
}

fn validate(program: &Program) -> Result<(), FrontendError> {
    let mut names = BTreeSet::new();
    for f in &program.functions {
        if !names.insert(f.name.as_str()) || is_builtin(&f.name) {
            return Err(FrontendError::DuplicateFunction {
                name: f.name.clone(),
                line: f.span.line,
            });
        }
        let mut params = BTreeSet::new();
        for p in &f.params {
            if !params.insert(p.name.as_str()) {
                return Err(FrontendError::DuplicateParam {
                    func: f.name.clone(),
                    name: p.name.clone(),
                });
            }
        }
        let mut labels = BTreeSet::new();
        let mut gotos = Vec::new();
        collect_labels(&f.body, &mut labels, &mut gotos, &f.name)?;
        for (label, line) in gotos {
            if !labels.contains(&label) {
                return Err(FrontendError::UndefinedLabel {
                    func: f.name.clone(),
                    label,
                    line,
                });
            }
        }
        let mut scopes = Scopes {
            func: &f.name,
            stack: vec![f.params.iter().map(|p| p.name.clone()).collect()],
        };
        scopes.block(&f.body)?;
    }
    Ok(())
}

struct Scopes<'a> {
    func: &'a str,
    stack: Vec<BTreeSet<String>>,
}

impl Scopes<'_> {
    fn check(&self, name: &str, line: u32) -> Result<(), FrontendError> {
        if self.stack.iter().any(|s| s.contains(name)) {
            Ok(())
        } else {
            Err(FrontendError::UndeclaredVariable {
                func: self.func.to_string(),
                name: name.to_string(),
                line,
            })
        }
    }

    fn expr(&self, e: &Expr, line: u32) -> Result<(), FrontendError> {
        match e {
            Expr::Int(_) => Ok(()),
            Expr::Var(v) | Expr::AddrOf(v) => self.check(v, line),
            Expr::Unary(_, a) | Expr::Deref(a) => self.expr(a, line),
            Expr::Binary(_, a, b) => {
                self.expr(a, line)?;
                self.expr(b, line)
            }
            Expr::Call(_, args) => args.iter().try_for_each(|a| self.expr(a, line)),
        }
    }

    fn lvalue(&self, l: &LValue, line: u32) -> Result<(), FrontendError> {
        match l {
            LValue::Var(v) => self.check(v, line),
            LValue::Deref(e) => self.expr(e, line),
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), FrontendError> {
        self.stack.push(BTreeSet::new());
        let r = stmts.iter().try_for_each(|s| self.stmt(s));
        self.stack.pop();
        r
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), FrontendError> {
        let line = s.line;
        match &s.kind {
            StmtKind::Decl(ds) => {
                for d in ds {
                    if let Some(e) = &d.init {
                        self.expr(e, line)?;
                    }
                    self.stack.last_mut().expect("scope").insert(d.name.clone());
                }
                Ok(())
            }
            StmtKind::Assign { target, value, .. } => {
                self.lvalue(target, line)?;
                self.expr(value, line)
            }
            StmtKind::IncDec { target, .. } => self.lvalue(target, line),
            StmtKind::Expr(e) | StmtKind::Return(Some(e)) => self.expr(e, line),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.expr(cond, line)?;
                self.block(std::slice::from_ref(then_branch))?;
                match else_branch {
                    Some(e) => self.block(std::slice::from_ref(e)),
                    None => Ok(()),
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond, line)?;
                self.block(std::slice::from_ref(body))
            }
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                self.stack.push(BTreeSet::new());
                let r = (|| {
                    if let Some(i) = init {
                        self.stmt(i)?;
                    }
                    if let Some(c) = cond {
                        self.expr(c, line)?;
                    }
                    if let Some(u) = update {
                        self.stmt(u)?;
                    }
                    self.block(std::slice::from_ref(body))
                })();
                self.stack.pop();
                r
            }
            StmtKind::Switch { scrutinee, arms } => {
                self.expr(scrutinee, line)?;
                self.stack.push(BTreeSet::new());
                let r = arms
                    .iter()
                    .flat_map(|a| a.body.iter())
                    .try_for_each(|s| self.stmt(s));
                self.stack.pop();
                r
            }
            StmtKind::Block(items) => self.block(items),
            _ => Ok(()),
        }
    }
}

fn collect_labels(
    stmts: &[Stmt],
    labels: &mut BTreeSet<String>,
    gotos: &mut Vec<(String, u32)>,
    func: &str,
) -> Result<(), FrontendError> {
    for s in stmts {
        collect_labels_stmt(s, labels, gotos, func)?;
    }
    Ok(())
}

fn collect_labels_stmt(
    s: &Stmt,
    labels: &mut BTreeSet<String>,
    gotos: &mut Vec<(String, u32)>,
    func: &str,
) -> Result<(), FrontendError> {
    match &s.kind {
        StmtKind::Label(l) => {
            if !labels.insert(l.clone()) {
                return Err(FrontendError::DuplicateLabel {
                    func: func.to_string(),
                    label: l.clone(),
                    line: s.line,
                });
            }
        }
        StmtKind::Goto(l) => gotos.push((l.clone(), s.line)),
        StmtKind::If {
            then_branch,
            else_branch,
            ..
        } => {
            collect_labels_stmt(then_branch, labels, gotos, func)?;
            if let Some(e) = else_branch {
                collect_labels_stmt(e, labels, gotos, func)?;
            }
        }
        StmtKind::While { body, .. } => collect_labels_stmt(body, labels, gotos, func)?,
        StmtKind::For { body, .. } => collect_labels_stmt(body, labels, gotos, func)?,
        StmtKind::Switch { arms, .. } => {
            for a in arms {
                collect_labels(&a.body, labels, gotos, func)?;
            }
        }
        StmtKind::Block(b) => collect_labels(b, labels, gotos, func)?,
        _ => {}
    }
    Ok(())
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    file: String,
    file_idx: u32,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn line(&self) -> u32 {
        self.toks[self.pos].line
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(FrontendError::Parse {
            file: self.file.clone(),
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(q) if *q == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.is_kw(k) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{k}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn stars(&mut self) -> PResult<u8> {
        let mut n = 0u8;
        while self.eat_punct("*") {
            n += 1;
            if n > MAX_POINTER_DEPTH {
                return self.error(format!("pointer depth exceeds {MAX_POINTER_DEPTH}"));
            }
        }
        Ok(n)
    }

    fn program(&mut self) -> PResult<Vec<FunctionDef>> {
        let mut fns = Vec::new();
        while *self.peek() != Tok::Eof {
            fns.push(self.function()?);
        }
        Ok(fns)
    }

    fn function(&mut self) -> PResult<FunctionDef> {
        let line = self.line();
        let col = self.toks[self.pos].col;
        let ret = if self.is_kw("void") {
            self.bump();
            None
        } else if self.is_kw("int") {
            self.bump();
            Some(MiniType::pointer(self.stars()?))
        } else {
            return self.error(format!(
                "expected function definition, found {}",
                describe(self.peek())
            ));
        };
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if self.is_kw("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.bump();
        }
        if !self.is_punct(")") {
            loop {
                self.expect_kw("int")?;
                let depth = self.stars()?;
                let pname = self.ident()?;
                params.push(Param {
                    name: pname,
                    ty: MiniType::pointer(depth),
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let body = self.block_items()?;
        let end_line = self.line();
        self.expect_punct("}")?;
        Ok(FunctionDef {
            name,
            ret,
            params,
            body,
            span: Span {
                file: self.file_idx,
                line,
                col,
            },
            end_line,
            intended: false,
        })
    }

    fn block_items(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.error("unexpected end of input, expected `}`");
            }
            out.push(self.statement()?);
        }
        Ok(out)
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let line = self.line();
        let kind = match self.peek().clone() {
            Tok::Punct("{") => {
                self.bump();
                let items = self.block_items()?;
                self.expect_punct("}")?;
                StmtKind::Block(items)
            }
            Tok::Punct(";") => {
                self.bump();
                StmtKind::Empty
            }
            Tok::Kw("int") => {
                let d = self.declaration()?;
                self.expect_punct(";")?;
                d
            }
            Tok::Kw("if") => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let then_branch = Box::new(self.statement()?);
                let else_branch = if self.is_kw("else") {
                    self.bump();
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            Tok::Kw("while") => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                StmtKind::While {
                    cond,
                    body: Box::new(self.statement()?),
                }
            }
            Tok::Kw("for") => {
                self.bump();
                self.expect_punct("(")?;
                let init = if self.is_punct(";") {
                    None
                } else if self.is_kw("int") {
                    Some(Box::new(Stmt::new(self.declaration()?, line)))
                } else {
                    Some(Box::new(Stmt::new(self.simple()?, line)))
                };
                self.expect_punct(";")?;
                let cond = if self.is_punct(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(";")?;
                let update = if self.is_punct(")") {
                    None
                } else {
                    Some(Box::new(Stmt::new(self.simple()?, line)))
                };
                self.expect_punct(")")?;
                StmtKind::For {
                    init,
                    cond,
                    update,
                    body: Box::new(self.statement()?),
                }
            }
            Tok::Kw("switch") => self.switch()?,
            Tok::Kw("goto") => {
                self.bump();
                let l = self.ident()?;
                self.expect_punct(";")?;
                StmtKind::Goto(l)
            }
            Tok::Kw("break") => {
                self.bump();
                self.expect_punct(";")?;
                StmtKind::Break
            }
            Tok::Kw("continue") => {
                self.bump();
                self.expect_punct(";")?;
                StmtKind::Continue
            }
            Tok::Kw("return") => {
                self.bump();
                let e = if self.is_punct(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(";")?;
                StmtKind::Return(e)
            }
            Tok::Ident(name) if matches!(self.peek_at(1), Tok::Punct(":")) => {
                self.bump();
                self.bump();
                StmtKind::Label(name)
            }
            Tok::Kw(k @ ("do" | "case" | "default" | "else" | "void")) => {
                return self.error(format!("unsupported or misplaced `{k}`"));
            }
            _ => {
                let s = self.simple()?;
                self.expect_punct(";")?;
                s
            }
        };
        Ok(Stmt::new(kind, line))
    }

    fn declaration(&mut self) -> PResult<StmtKind> {
        self.expect_kw("int")?;
        let mut decls = Vec::new();
        loop {
            let depth = self.stars()?;
            let name = self.ident()?;
            let init = if self.eat_punct("=") {
                Some(self.expr()?)
            } else {
                None
            };
            decls.push(Declarator {
                name,
                ty: MiniType::pointer(depth),
                init,
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(StmtKind::Decl(decls))
    }

    fn switch(&mut self) -> PResult<StmtKind> {
        self.bump();
        self.expect_punct("(")?;
        let scrutinee = self.expr()?;
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let mut arms: Vec<SwitchArm> = Vec::new();
        while !self.is_punct("}") {
            let line = self.line();
            if self.is_kw("case") {
                self.bump();
                let neg = self.eat_punct("-");
                let v = match self.bump() {
                    Tok::Int(v) => v,
                    other => {
                        self.pos -= 1;
                        return self.error(format!(
                            "expected integer case label, found {}",
                            describe(&other)
                        ));
                    }
                };
                self.expect_punct(":")?;
                arms.push(SwitchArm {
                    label: CaseLabel::Case(if neg { -v } else { v }),
                    line,
                    body: Vec::new(),
                });
            } else if self.is_kw("default") {
                self.bump();
                self.expect_punct(":")?;
                arms.push(SwitchArm {
                    label: CaseLabel::Default,
                    line,
                    body: Vec::new(),
                });
            } else {
                if *self.peek() == Tok::Eof {
                    return self.error("unexpected end of input in switch");
                }
                let s = self.statement()?;
                match arms.last_mut() {
                    Some(a) => a.body.push(s),
                    None => return self.error("statement before first case label"),
                }
            }
        }
        self.expect_punct("}")?;
        Ok(StmtKind::Switch { scrutinee, arms })
    }

    /// Assignment, increment/decrement or expression statement, without `;`.
    fn simple(&mut self) -> PResult<StmtKind> {
        if self.is_punct("++") || self.is_punct("--") {
            let inc = self.is_punct("++");
            self.bump();
            let e = self.unary()?;
            let target = self.to_lvalue(e)?;
            return Ok(StmtKind::IncDec {
                target,
                inc,
                prefix: true,
            });
        }
        let e = self.expr()?;
        let op = match self.peek() {
            Tok::Punct("=") => Some(AssignOp::Set),
            Tok::Punct("+=") => Some(AssignOp::Add),
            Tok::Punct("-=") => Some(AssignOp::Sub),
            Tok::Punct("*=") => Some(AssignOp::Mul),
            Tok::Punct("/=") => Some(AssignOp::Div),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let target = self.to_lvalue(e)?;
            let value = self.expr()?;
            return Ok(StmtKind::Assign { target, op, value });
        }
        if self.is_punct("++") || self.is_punct("--") {
            let inc = self.is_punct("++");
            self.bump();
            let target = self.to_lvalue(e)?;
            return Ok(StmtKind::IncDec {
                target,
                inc,
                prefix: false,
            });
        }
        Ok(StmtKind::Expr(e))
    }

    fn to_lvalue(&self, e: Expr) -> PResult<LValue> {
        match e {
            Expr::Var(v) => Ok(LValue::Var(v)),
            Expr::Deref(inner) => Ok(LValue::Deref(*inner)),
            _ => self.error("expression is not assignable"),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        let op = match self.peek() {
            Tok::Punct("||") => BinOp::Or,
            Tok::Punct("&&") => BinOp::And,
            Tok::Punct("==") => BinOp::Eq,
            Tok::Punct("!=") => BinOp::Ne,
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct("<=") => BinOp::Le,
            Tok::Punct(">") => BinOp::Gt,
            Tok::Punct(">=") => BinOp::Ge,
            Tok::Punct("+") => BinOp::Add,
            Tok::Punct("-") => BinOp::Sub,
            Tok::Punct("*") => BinOp::Mul,
            Tok::Punct("/") => BinOp::Div,
            Tok::Punct("%") => BinOp::Rem,
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Punct("-") => {
                self.bump();
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Punct("!") => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            Tok::Punct("*") => {
                self.bump();
                Ok(Expr::Deref(Box::new(self.unary()?)))
            }
            Tok::Punct("&") => {
                self.bump();
                Ok(Expr::AddrOf(self.ident()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat_punct("(") {
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    Ok(Expr::Call(name, args))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::Punct("(") => {
                self.bump();
                if self.is_kw("int") || self.is_kw("void") {
                    return self.error("casts are not supported");
                }
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            other => self.error(format!("expected expression, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Int(v) => format!("integer `{v}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Kw(k) => format!("`{k}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_has_no_functions() {
        let p = parse("").unwrap();
        assert!(p.functions.is_empty());
    }

    #[test]
    fn unstructured_goto_loop() {
        let p = parse("void a() { int x = 0;\nprevious: x++; goto previous; }").unwrap();
        assert_eq!(p.functions.len(), 1);
        let body = &p.functions[0].body;
        let labels = body
            .iter()
            .filter(|s| matches!(s.kind, StmtKind::Label(_)))
            .count();
        let gotos = body
            .iter()
            .filter(|s| matches!(s.kind, StmtKind::Goto(_)))
            .count();
        assert_eq!((labels, gotos), (1, 1));
    }

    #[test]
    fn undefined_label_is_rejected() {
        let err = parse("void f() { goto missing; }").unwrap_err();
        assert!(
            matches!(err, FrontendError::UndefinedLabel { ref label, .. } if label == "missing")
        );
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse("void f() {\n  x = ;\n}").unwrap_err();
        match err {
            FrontendError::Parse { line, col, .. } => assert_eq!((line, col), (2, 7)),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn pointer_depth_is_bounded() {
        assert!(parse("void f(int ***p) { }").is_ok());
        assert!(parse("void f(int ****p) { }").is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(parse("void f() {} void f() {}").is_err());
        assert!(parse("void f(int a, int a) {}").is_err());
        assert!(parse("void f() { L: ; L: ; }").is_err());
        assert!(parse("void malloc() {}").is_err());
    }

    #[test]
    fn declarators_follow_c_star_binding() {
        let p = parse("void f() { int *z = 0, y = 1; }").unwrap();
        match &p.functions[0].body[0].kind {
            StmtKind::Decl(ds) => {
                assert_eq!(ds[0].ty.depth, 1);
                assert_eq!(ds[1].ty.depth, 0);
            }
            k => panic!("unexpected {k:?}"),
        }
    }

    #[test]
    fn switch_arms_and_fallthrough() {
        let p = parse(
            "void f(int t) { switch (t) { case 1: case 2: t = 0; break; case -3: t = 1; default: ; } }",
        )
        .unwrap();
        match &p.functions[0].body[0].kind {
            StmtKind::Switch { arms, .. } => {
                assert_eq!(arms.len(), 4);
                assert!(arms[0].body.is_empty());
                assert_eq!(arms[2].label, CaseLabel::Case(-3));
                assert_eq!(arms[3].label, CaseLabel::Default);
            }
            k => panic!("unexpected {k:?}"),
        }
    }

    #[test]
    fn intended_annotation_marks_function() {
        let p = parse("//@ intended\nvoid pump() { while (1) { } }\nvoid other() { }").unwrap();
        assert!(p.functions[0].intended);
        assert!(!p.functions[1].intended);
        let p = parse("void pump() {\n//@ intended\n while (1) { } }").unwrap();
        assert!(p.functions[0].intended);
    }

    #[test]
    fn undeclared_variables_rejected() {
        let err = parse("void f() {\n  y = 1;\n}").unwrap_err();
        assert!(matches!(
            err,
            FrontendError::UndeclaredVariable { line: 2, .. }
        ));
        assert!(parse("void f() { { int a = 1; } a = 2; }").is_err());
        assert!(parse("void f(int p) { int a = p; for (int i = 0; i < a; i++) { a--; } }").is_ok());
    }

    #[test]
    fn postfix_on_parenthesized_deref() {
        let p = parse("void f(int *z) { (*z)--; }").unwrap();
        assert!(matches!(
            p.functions[0].body[0].kind,
            StmtKind::IncDec {
                target: LValue::Deref(_),
                inc: false,
                prefix: false
            }
        ));
    }
}
