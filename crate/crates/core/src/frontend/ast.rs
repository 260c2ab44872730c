//! Surface syntax tree for MiniC.

use std::fmt;

/// Maximum pointer depth accepted by the parser (`int***`).
pub const MAX_POINTER_DEPTH: u8 = 3;

/// Names callable without a definition or model.
pub const BUILTINS: [&str; 3] = ["malloc", "free", "nondet"];

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

/// `int` with `depth` levels of indirection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MiniType {
    pub depth: u8,
}

impl MiniType {
    pub const INT: MiniType = MiniType { depth: 0 };

    pub fn pointer(depth: u8) -> Self {
        MiniType { depth }
    }

    pub fn is_pointer(self) -> bool {
        self.depth > 0
    }
}

impl fmt::Display for MiniType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("int")?;
        for _ in 0..self.depth {
            f.write_str("*")?;
        }
        Ok(())
    }
}

/// Source position; `file` indexes [`Program::source_files`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Span {
    pub file: u32,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
}

/// A `//@ ...` comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub file: u32,
    pub line: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
    pub source_files: Vec<SourceFile>,
    pub annotations: Vec<Annotation>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn file_path(&self, file: u32) -> &str {
        self.source_files
            .get(file as usize)
            .map(|s| s.path.as_str())
            .unwrap_or("<unknown>")
    }

    /// Number of lines in the given source file.
    pub fn line_count(&self, file: u32) -> u32 {
        self.source_files
            .get(file as usize)
            .map(|s| s.text.lines().count() as u32)
            .unwrap_or(0)
    }

    /// Copy with every source position zeroed, for structural comparison.
    pub fn without_spans(&self) -> Program {
        Program {
            functions: self
                .functions
                .iter()
                .map(FunctionDef::without_spans)
                .collect(),
            source_files: Vec::new(),
            annotations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: MiniType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    /// `None` for `void`.
    pub ret: Option<MiniType>,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub span: Span,
    pub end_line: u32,
    /// Marked `//@ intended` in source.
    pub intended: bool,
}

impl FunctionDef {
    pub fn without_spans(&self) -> FunctionDef {
        FunctionDef {
            span: Span::default(),
            end_line: 0,
            intended: false,
            body: self.body.iter().map(Stmt::without_spans).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Var(String),
    Unary(UnOp, Box<Expr>),
    AddrOf(String),
    Deref(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LValue {
    Var(String),
    Deref(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declarator {
    pub name: String,
    pub ty: MiniType,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseLabel {
    Case(i64),
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchArm {
    pub label: CaseLabel,
    pub line: u32,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Decl(Vec<Declarator>),
    Assign {
        target: LValue,
        op: AssignOp,
        value: Expr,
    },
    IncDec {
        target: LValue,
        inc: bool,
        prefix: bool,
    },
    Expr(Expr),
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        update: Option<Box<Stmt>>,
        body: Box<Stmt>,
    },
    Switch {
        scrutinee: Expr,
        arms: Vec<SwitchArm>,
    },
    Goto(String),
    Label(String),
    Break,
    Continue,
    Return(Option<Expr>),
    Block(Vec<Stmt>),
    Empty,
}

impl Stmt {
    pub fn new(kind: StmtKind, line: u32) -> Self {
        Stmt { kind, line }
    }

    pub fn without_spans(&self) -> Stmt {
        let strip = |s: &Stmt| Box::new(s.without_spans());
        let kind = match &self.kind {
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => StmtKind::If {
                cond: cond.clone(),
                then_branch: strip(then_branch),
                else_branch: else_branch.as_deref().map(strip),
            },
            StmtKind::While { cond, body } => StmtKind::While {
                cond: cond.clone(),
                body: strip(body),
            },
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => StmtKind::For {
                init: init.as_deref().map(strip),
                cond: cond.clone(),
                update: update.as_deref().map(strip),
                body: strip(body),
            },
            StmtKind::Switch { scrutinee, arms } => StmtKind::Switch {
                scrutinee: scrutinee.clone(),
                arms: arms
                    .iter()
                    .map(|a| SwitchArm {
                        label: a.label.clone(),
                        line: 0,
                        body: a.body.iter().map(Stmt::without_spans).collect(),
                    })
                    .collect(),
            },
            StmtKind::Block(stmts) => {
                StmtKind::Block(stmts.iter().map(Stmt::without_spans).collect())
            }
            other => other.clone(),
        };
        Stmt { kind, line: 0 }
    }
}
