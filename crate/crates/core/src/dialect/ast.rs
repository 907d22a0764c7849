//! Syntax tree for the supported Structured Text subset.
//!
//! Every node carries a [`SourceSpan`]. Derived equality compares spans too;
//! use [`CompilationUnit::structurally_eq`] to compare shape only.

use serde::{Deserialize, Serialize};

use super::span::SourceSpan;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompilationUnit {
    pub pous: Vec<Pou>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PouKind {
    Program,
    Function,
    FunctionBlock,
}

impl PouKind {
    pub fn keyword(self) -> &'static str {
        match self {
            PouKind::Program => "PROGRAM",
            PouKind::Function => "FUNCTION",
            PouKind::FunctionBlock => "FUNCTION_BLOCK",
        }
    }

    pub fn end_keyword(self) -> &'static str {
        match self {
            PouKind::Program => "END_PROGRAM",
            PouKind::Function => "END_FUNCTION",
            PouKind::FunctionBlock => "END_FUNCTION_BLOCK",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pou {
    pub kind: PouKind,
    pub name: String,
    pub name_span: SourceSpan,
    /// Present for functions only.
    pub return_type: Option<DataTypeRef>,
    pub var_blocks: Vec<VarBlock>,
    pub body: Vec<Statement>,
    pub span: SourceSpan,
}

impl Pou {
    pub fn decls(&self) -> impl Iterator<Item = (&VarBlock, &VarDecl)> {
        self.var_blocks.iter().flat_map(|b| b.decls.iter().map(move |d| (b, d)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarBlockKind {
    #[serde(rename = "VAR")]
    Var,
    #[serde(rename = "VAR_INPUT")]
    VarInput,
    #[serde(rename = "VAR_OUTPUT")]
    VarOutput,
    #[serde(rename = "VAR_IN_OUT")]
    VarInOut,
    #[serde(rename = "VAR_EXTERNAL")]
    VarExternal,
    #[serde(rename = "VAR_CONSTANT")]
    VarConstant,
}

impl VarBlockKind {
    pub const ALL: [VarBlockKind; 6] = [
        VarBlockKind::Var,
        VarBlockKind::VarInput,
        VarBlockKind::VarOutput,
        VarBlockKind::VarInOut,
        VarBlockKind::VarExternal,
        VarBlockKind::VarConstant,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            VarBlockKind::Var => "VAR",
            VarBlockKind::VarInput => "VAR_INPUT",
            VarBlockKind::VarOutput => "VAR_OUTPUT",
            VarBlockKind::VarInOut => "VAR_IN_OUT",
            VarBlockKind::VarExternal => "VAR_EXTERNAL",
            VarBlockKind::VarConstant => "VAR CONSTANT",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub kind: VarBlockKind,
    pub decls: Vec<VarDecl>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub data_type: DataTypeRef,
    pub initializer: Option<Expression>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataTypeRef {
    pub base: String,
    pub array_bounds: Option<Vec<(i64, i64)>>,
    pub span: SourceSpan,
}

impl DataTypeRef {
    pub fn named(base: impl Into<String>) -> Self {
        Self {
            base: base.into(),
            array_bounds: None,
            span: SourceSpan::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub kind: StatementKind,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StatementKind {
    Assignment {
        target: VariableRef,
        value: Expression,
    },
    If {
        branches: Vec<(Expression, Vec<Statement>)>,
        else_body: Option<Vec<Statement>>,
    },
    Case {
        selector: Expression,
        arms: Vec<CaseArm>,
        else_body: Option<Vec<Statement>>,
    },
    For {
        var: String,
        var_span: SourceSpan,
        from: Expression,
        to: Expression,
        by: Option<Expression>,
        body: Vec<Statement>,
    },
    While {
        cond: Expression,
        body: Vec<Statement>,
    },
    Repeat {
        body: Vec<Statement>,
        until: Expression,
    },
    FbInvocation {
        instance: String,
        instance_span: SourceSpan,
        args: Vec<FbArg>,
    },
    FunctionCall {
        callee: String,
        callee_span: SourceSpan,
        args: Vec<CallArg>,
    },
    Exit,
    Return,
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseArm {
    pub labels: Vec<CaseLabel>,
    pub body: Vec<Statement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CaseLabel {
    Value(Expression),
    Range(Expression, Expression),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArgDirection {
    In,
    Out,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbArg {
    pub name: String,
    pub direction: ArgDirection,
    /// An input expression, or for `=>` the receiving variable.
    pub value: Expression,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallArg {
    pub name: Option<String>,
    pub value: Expression,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expression {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExprKind {
    Literal(Literal),
    Variable(VariableRef),
    Unary {
        op: UnaryOp,
        operand: Box<Expression>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expression>,
        rhs: Box<Expression>,
    },
    Call {
        callee: String,
        args: Vec<CallArg>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub kind: LiteralKind,
    /// Source text, e.g. `16#FF`, `T#5s`, `'abc'`.
    pub text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LiteralKind {
    Int,
    Real,
    Bool,
    Time,
    String,
}

impl Literal {
    pub fn int_value(&self) -> Option<i64> {
        if self.kind != LiteralKind::Int {
            return None;
        }
        let clean: String = self.text.chars().filter(|c| *c != '_').collect();
        match clean.split_once('#') {
            Some((radix, digits)) => i64::from_str_radix(digits, radix.parse().ok()?).ok(),
            None => clean.parse().ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableRef {
    pub name: String,
    pub indices: Vec<Expression>,
    /// Member access such as `t1.Q`.
    pub member: Option<String>,
    pub span: SourceSpan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Xor,
}

impl BinaryOp {
    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::Xor => 2,
            BinaryOp::And => 3,
            BinaryOp::Eq | BinaryOp::Ne => 4,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 5,
            BinaryOp::Add | BinaryOp::Sub => 6,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod => 7,
            BinaryOp::Pow => 8,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "MOD",
            BinaryOp::Pow => "**",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "AND",
            BinaryOp::Or => "OR",
            BinaryOp::Xor => "XOR",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::And | BinaryOp::Or | BinaryOp::Xor)
    }
}

pub const UNARY_PRECEDENCE: u8 = 9;

impl Expression {
    pub fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Binary { op, .. } => op.precedence(),
            ExprKind::Unary { .. } => UNARY_PRECEDENCE,
            _ => 10,
        }
    }

    pub fn variable(name: &str) -> Self {
        Expression {
            kind: ExprKind::Variable(VariableRef {
                name: name.to_string(),
                indices: Vec::new(),
                member: None,
                span: SourceSpan::default(),
            }),
            span: SourceSpan::default(),
        }
    }

    pub fn literal(kind: LiteralKind, text: &str) -> Self {
        Expression {
            kind: ExprKind::Literal(Literal {
                kind,
                text: text.to_string(),
            }),
            span: SourceSpan::default(),
        }
    }

    /// Visits this expression and every sub-expression, pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expression)) {
        f(self);
        match &self.kind {
            ExprKind::Literal(_) => {}
            ExprKind::Variable(v) => v.indices.iter().for_each(|i| i.walk(f)),
            ExprKind::Unary { operand, .. } => operand.walk(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|a| a.value.walk(f)),
        }
    }
}

impl Statement {
    pub fn new(kind: StatementKind) -> Self {
        Statement {
            kind,
            span: SourceSpan::default(),
        }
    }

    /// Visits this statement and every nested statement, pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Statement)) {
        f(self);
        for body in self.child_bodies() {
            for s in body {
                s.walk(f);
            }
        }
    }

    pub fn child_bodies(&self) -> Vec<&Vec<Statement>> {
        match &self.kind {
            StatementKind::If { branches, else_body } => {
                branches.iter().map(|(_, b)| b).chain(else_body.iter()).collect()
            }
            StatementKind::Case { arms, else_body, .. } => {
                arms.iter().map(|a| &a.body).chain(else_body.iter()).collect()
            }
            StatementKind::For { body, .. }
            | StatementKind::While { body, .. }
            | StatementKind::Repeat { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }
}

// Span clearing for structural comparison.

fn clear_body(body: &mut [Statement]) {
    body.iter_mut().for_each(Statement::clear_spans);
}

impl CompilationUnit {
    pub fn clear_spans(&mut self) {
        for pou in &mut self.pous {
            pou.span = SourceSpan::default();
            pou.name_span = SourceSpan::default();
            if let Some(t) = &mut pou.return_type {
                t.span = SourceSpan::default();
            }
            for block in &mut pou.var_blocks {
                block.span = SourceSpan::default();
                for d in &mut block.decls {
                    d.span = SourceSpan::default();
                    d.data_type.span = SourceSpan::default();
                    if let Some(e) = &mut d.initializer {
                        e.clear_spans();
                    }
                }
            }
            clear_body(&mut pou.body);
        }
    }

    /// Equality ignoring source positions.
    pub fn structurally_eq(&self, other: &CompilationUnit) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.clear_spans();
        b.clear_spans();
        a == b
    }

    pub fn pou(&self, name: &str) -> Option<&Pou> {
        self.pous.iter().find(|p| p.name.eq_ignore_ascii_case(name))
    }
}

impl Statement {
    pub fn clear_spans(&mut self) {
        self.span = SourceSpan::default();
        match &mut self.kind {
            StatementKind::Assignment { target, value } => {
                target.clear_spans();
                value.clear_spans();
            }
            StatementKind::If { branches, else_body } => {
                for (c, b) in branches {
                    c.clear_spans();
                    clear_body(b);
                }
                if let Some(b) = else_body {
                    clear_body(b);
                }
            }
            StatementKind::Case {
                selector,
                arms,
                else_body,
            } => {
                selector.clear_spans();
                for arm in arms {
                    for l in &mut arm.labels {
                        match l {
                            CaseLabel::Value(e) => e.clear_spans(),
                            CaseLabel::Range(a, b) => {
                                a.clear_spans();
                                b.clear_spans();
                            }
                        }
                    }
                    clear_body(&mut arm.body);
                }
                if let Some(b) = else_body {
                    clear_body(b);
                }
            }
            StatementKind::For {
                var_span,
                from,
                to,
                by,
                body,
                ..
            } => {
                *var_span = SourceSpan::default();
                from.clear_spans();
                to.clear_spans();
                if let Some(b) = by {
                    b.clear_spans();
                }
                clear_body(body);
            }
            StatementKind::While { cond, body } => {
                cond.clear_spans();
                clear_body(body);
            }
            StatementKind::Repeat { body, until } => {
                clear_body(body);
                until.clear_spans();
            }
            StatementKind::FbInvocation {
                instance_span, args, ..
            } => {
                *instance_span = SourceSpan::default();
                for a in args {
                    a.span = SourceSpan::default();
                    a.value.clear_spans();
                }
            }
            StatementKind::FunctionCall { callee_span, args, .. } => {
                *callee_span = SourceSpan::default();
                for a in args {
                    a.span = SourceSpan::default();
                    a.value.clear_spans();
                }
            }
            StatementKind::Exit | StatementKind::Return | StatementKind::Empty => {}
        }
    }
}

impl VariableRef {
    pub fn clear_spans(&mut self) {
        self.span = SourceSpan::default();
        self.indices.iter_mut().for_each(Expression::clear_spans);
    }
}

impl Expression {
    pub fn clear_spans(&mut self) {
        self.span = SourceSpan::default();
        match &mut self.kind {
            ExprKind::Literal(_) => {}
            ExprKind::Variable(v) => v.clear_spans(),
            ExprKind::Unary { operand, .. } => operand.clear_spans(),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.clear_spans();
                rhs.clear_spans();
            }
            ExprKind::Call { args, .. } => {
                for a in args {
                    a.span = SourceSpan::default();
                    a.value.clear_spans();
                }
            }
        }
    }
}
