//! Recursive-descent parser with skip-to-synchronization recovery.
//!
//! A failed statement skips to the next `;` or to the next structural keyword
//! (`END_*`, `ELSE`, `ELSIF`, `UNTIL`, POU and VAR keywords), so one run can
//! report several syntax errors.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::span::SourceSpan;
use super::token::{tokenize, LexError, Token, TokenKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expected.as_slice() {
            [] => write!(f, "{}: unexpected {}", self.span, self.found),
            [one] => write!(f, "{}: expected {}, found {}", self.span, one, self.found),
            many => write!(
                f,
                "{}: expected one of {}, found {}",
                self.span,
                many.join(", "),
                self.found
            ),
        }
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{} syntax error(s); first: {}", .0.len(), .0[0])]
pub struct SyntaxErrors(pub Vec<SyntaxError>);

/// Lexing or parsing failure for a whole source text.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Syntax(#[from] SyntaxErrors),
}

/// Parses a token stream, failing if any syntax error was found.
pub fn parse(tokens: &[Token]) -> Result<CompilationUnit, SyntaxErrors> {
    let (unit, errors) = parse_with_recovery(tokens);
    if errors.is_empty() {
        Ok(unit)
    } else {
        Err(SyntaxErrors(errors))
    }
}

/// Parses as much as possible, returning the partial unit and every error.
pub fn parse_with_recovery(tokens: &[Token]) -> (CompilationUnit, Vec<SyntaxError>) {
    let toks: Vec<&Token> = tokens.iter().filter(|t| t.kind != TokenKind::Comment).collect();
    let eof_span = toks
        .last()
        .map(|t| SourceSpan::new(t.span.end_line, t.span.end_col, t.span.end_line, t.span.end_col))
        .unwrap_or_else(SourceSpan::origin);
    let mut p = Parser {
        toks,
        pos: 0,
        errors: Vec::new(),
        eof_span,
    };
    let unit = p.unit();
    (unit, p.errors)
}

/// Tokenizes and parses source text.
pub fn parse_source(source: &str) -> Result<CompilationUnit, SourceError> {
    let tokens = tokenize(source)?;
    Ok(parse(&tokens)?)
}

/// Parses a standalone type reference such as `ARRAY[0..9] OF INT`.
pub fn parse_data_type(text: &str) -> Option<DataTypeRef> {
    let tokens = tokenize(text).ok()?;
    let toks: Vec<&Token> = tokens.iter().filter(|t| t.kind != TokenKind::Comment).collect();
    let mut p = Parser {
        toks,
        pos: 0,
        errors: Vec::new(),
        eof_span: SourceSpan::origin(),
    };
    let ty = p.data_type().ok()?;
    (p.peek().is_none() && p.errors.is_empty()).then_some(ty)
}

/// Marker for "an error was recorded; synchronize".
struct Recorded;

type PResult<T> = Result<T, Recorded>;

const POU_KEYWORDS: &[&str] = &[
    "PROGRAM",
    "FUNCTION",
    "FUNCTION_BLOCK",
    "END_PROGRAM",
    "END_FUNCTION",
    "END_FUNCTION_BLOCK",
];

const VAR_KEYWORDS: &[&str] = &[
    "VAR",
    "VAR_INPUT",
    "VAR_OUTPUT",
    "VAR_IN_OUT",
    "VAR_EXTERNAL",
    "VAR_CONSTANT",
];

const STATEMENT_START: &[&str] = &[
    "identifier",
    "IF",
    "CASE",
    "FOR",
    "WHILE",
    "REPEAT",
    "EXIT",
    "RETURN",
    ";",
];

struct Parser<'t> {
    toks: Vec<&'t Token>,
    pos: usize,
    errors: Vec<SyntaxError>,
    eof_span: SourceSpan,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn span_here(&self) -> SourceSpan {
        self.peek().map(|t| t.span).unwrap_or(self.eof_span)
    }

    fn prev_span(&self) -> SourceSpan {
        if self.pos == 0 {
            return SourceSpan::origin();
        }
        self.toks[self.pos - 1].span
    }

    fn at_kw(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn at_any_kw(&self, kws: &[&str]) -> bool {
        kws.iter().any(|k| self.at_kw(k))
    }

    fn at_op(&self, op: &str) -> bool {
        self.peek().is_some_and(|t| t.is_op(op))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error<T>(&mut self, expected: &[&str]) -> PResult<T> {
        let found = match self.peek() {
            Some(t) => format!("`{}`", t.text),
            None => "end of input".to_string(),
        };
        self.errors.push(SyntaxError {
            span: self.span_here(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        });
        Err(Recorded)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<SourceSpan> {
        if self.eat_kw(kw) {
            Ok(self.prev_span())
        } else {
            self.error(&[kw])
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<SourceSpan> {
        if self.eat_op(op) {
            Ok(self.prev_span())
        } else {
            self.error(&[op])
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok((t.text.clone(), t.span))
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn is_sync_point(&self) -> bool {
        match self.peek() {
            None => true,
            Some(t) => {
                t.kind == TokenKind::Keyword
                    && (t.text.to_ascii_uppercase().starts_with("END_")
                        || self.at_any_kw(&["ELSE", "ELSIF", "UNTIL"])
                        || self.at_any_kw(POU_KEYWORDS)
                        || self.at_any_kw(VAR_KEYWORDS))
            }
        }
    }

    /// Skips to just past the next `;`, or to the next structural keyword.
    fn synchronize(&mut self) {
        while !self.is_sync_point() {
            if self.bump().is_some_and(|t| t.is_op(";")) {
                return;
            }
        }
    }

    fn unit(&mut self) -> CompilationUnit {
        let mut pous = Vec::new();
        while self.peek().is_some() {
            if self.at_any_kw(&["PROGRAM", "FUNCTION", "FUNCTION_BLOCK"]) {
                if let Some(pou) = self.pou() {
                    pous.push(pou);
                }
            } else {
                let _ = self.error::<()>(&["PROGRAM", "FUNCTION", "FUNCTION_BLOCK"]);
                self.bump();
                while self.peek().is_some() && !self.at_any_kw(&["PROGRAM", "FUNCTION", "FUNCTION_BLOCK"]) {
                    self.bump();
                }
            }
        }
        CompilationUnit { pous }
    }

    fn pou(&mut self) -> Option<Pou> {
        let start = self.span_here();
        let kind = match self.bump().map(|t| t.text.to_ascii_uppercase()).as_deref() {
            Some("PROGRAM") => PouKind::Program,
            Some("FUNCTION") => PouKind::Function,
            _ => PouKind::FunctionBlock,
        };
        let end_kw = kind.end_keyword();

        let header = (|| -> PResult<(String, SourceSpan, Option<DataTypeRef>)> {
            let (name, name_span) = self.ident()?;
            let ret = if kind == PouKind::Function {
                self.expect_op(":")?;
                Some(self.data_type()?)
            } else {
                None
            };
            Ok((name, name_span, ret))
        })();
        let Ok((name, name_span, return_type)) = header else {
            self.skip_past_kw(end_kw);
            return None;
        };

        let mut var_blocks = Vec::new();
        while self.at_any_kw(VAR_KEYWORDS) {
            if let Some(block) = self.var_block() {
                var_blocks.push(block);
            }
        }
        let body = self.statements(&[end_kw]);
        if self.expect_kw(end_kw).is_err() {
            self.skip_past_kw(end_kw);
        }
        Some(Pou {
            kind,
            name,
            name_span,
            return_type,
            var_blocks,
            body,
            span: start.to(self.prev_span()),
        })
    }

    /// Recovery at POU level: consume through `end_kw`, stopping early at the
    /// start of another POU.
    fn skip_past_kw(&mut self, end_kw: &str) {
        while let Some(t) = self.peek() {
            if t.is_keyword(end_kw) {
                self.pos += 1;
                return;
            }
            if self.at_any_kw(&["PROGRAM", "FUNCTION", "FUNCTION_BLOCK"]) {
                return;
            }
            self.pos += 1;
        }
    }

    fn var_block(&mut self) -> Option<VarBlock> {
        let start = self.span_here();
        let kw = self.bump()?.text.to_ascii_uppercase();
        let kind = match kw.as_str() {
            "VAR" if self.eat_kw("CONSTANT") => VarBlockKind::VarConstant,
            "VAR" => VarBlockKind::Var,
            "VAR_INPUT" => VarBlockKind::VarInput,
            "VAR_OUTPUT" => VarBlockKind::VarOutput,
            "VAR_IN_OUT" => VarBlockKind::VarInOut,
            "VAR_EXTERNAL" => VarBlockKind::VarExternal,
            _ => VarBlockKind::VarConstant,
        };
        let mut decls = Vec::new();
        loop {
            if self.eat_kw("END_VAR") {
                break;
            }
            if self.peek().is_none() || self.at_any_kw(POU_KEYWORDS) || self.at_any_kw(VAR_KEYWORDS) {
                let _ = self.error::<()>(&["END_VAR"]);
                break;
            }
            match self.var_decl_line() {
                Ok(mut ds) => decls.append(&mut ds),
                Err(Recorded) => {
                    self.synchronize();
                    if !self.at_kw("END_VAR") && self.is_sync_point() && self.peek().is_some() {
                        // Unexpected structural keyword inside a VAR block.
                        if !self.at_any_kw(POU_KEYWORDS) && !self.at_any_kw(VAR_KEYWORDS) {
                            self.bump();
                        }
                    }
                }
            }
        }
        if decls.is_empty() {
            let _ = self.error::<()>(&["identifier"]);
            return None;
        }
        Some(VarBlock {
            kind,
            decls,
            span: start.to(self.prev_span()),
        })
    }

    /// `a, b : TYPE [:= init];` expands to one declaration per name.
    fn var_decl_line(&mut self) -> PResult<Vec<VarDecl>> {
        let mut names = vec![self.ident()?];
        while self.eat_op(",") {
            names.push(self.ident()?);
        }
        self.expect_op(":")?;
        let data_type = self.data_type()?;
        let initializer = if self.eat_op(":=") {
            Some(self.expression()?)
        } else {
            None
        };
        self.expect_op(";")?;
        let end = self.prev_span();
        Ok(names
            .into_iter()
            .map(|(name, span)| VarDecl {
                name,
                data_type: data_type.clone(),
                initializer: initializer.clone(),
                span: span.to(end),
            })
            .collect())
    }

    fn data_type(&mut self) -> PResult<DataTypeRef> {
        let start = self.span_here();
        if self.eat_kw("ARRAY") {
            self.expect_op("[")?;
            let mut bounds = vec![self.bound_pair()?];
            while self.eat_op(",") {
                bounds.push(self.bound_pair()?);
            }
            self.expect_op("]")?;
            self.expect_kw("OF")?;
            let (base, _) = self.ident()?;
            return Ok(DataTypeRef {
                base,
                array_bounds: Some(bounds),
                span: start.to(self.prev_span()),
            });
        }
        let (base, span) = self.ident()?;
        Ok(DataTypeRef {
            base,
            array_bounds: None,
            span,
        })
    }

    fn signed_int(&mut self) -> PResult<i64> {
        let neg = self.eat_op("-");
        match self.peek() {
            Some(t) if t.kind == TokenKind::IntLiteral => {
                self.pos += 1;
                let lit = Literal {
                    kind: LiteralKind::Int,
                    text: t.text.clone(),
                };
                let v = lit.int_value().unwrap_or(0);
                Ok(if neg { -v } else { v })
            }
            _ => self.error(&["integer literal"]),
        }
    }

    fn bound_pair(&mut self) -> PResult<(i64, i64)> {
        let lo = self.signed_int()?;
        self.expect_op("..")?;
        let hi = self.signed_int()?;
        Ok((lo, hi))
    }

    /// Parses statements until one of `stops`, a POU boundary, or end of input.
    fn statements(&mut self, stops: &[&str]) -> Vec<Statement> {
        let mut out = Vec::new();
        loop {
            if self.peek().is_none() || self.at_any_kw(stops) || self.at_any_kw(POU_KEYWORDS) {
                break;
            }
            if self.is_sync_point() {
                let _ = self.error::<()>(STATEMENT_START);
                self.bump();
                continue;
            }
            match self.statement() {
                Ok(s) => out.push(s),
                Err(Recorded) => self.synchronize(),
            }
        }
        out
    }

    /// Case arm bodies additionally stop at the next case label.
    fn case_arm_body(&mut self) -> Vec<Statement> {
        let mut out = Vec::new();
        loop {
            if self.peek().is_none()
                || self.at_any_kw(&["ELSE", "END_CASE"])
                || self.at_any_kw(POU_KEYWORDS)
                || self.at_case_label()
            {
                break;
            }
            if self.is_sync_point() {
                let _ = self.error::<()>(STATEMENT_START);
                self.bump();
                continue;
            }
            match self.statement() {
                Ok(s) => out.push(s),
                Err(Recorded) => self.synchronize(),
            }
        }
        out
    }

    fn at_case_label(&self) -> bool {
        match self.peek() {
            Some(t) if t.kind == TokenKind::IntLiteral => true,
            Some(t) if t.is_op("-") => true,
            Some(t) if t.kind == TokenKind::Identifier => self
                .peek_at(1)
                .is_some_and(|n| n.is_op(":") || n.is_op(",") || n.is_op("..")),
            _ => false,
        }
    }

    fn statement(&mut self) -> PResult<Statement> {
        let start = self.span_here();
        let kind = if self.eat_op(";") {
            return Ok(Statement {
                kind: StatementKind::Empty,
                span: start,
            });
        } else if self.eat_kw("IF") {
            self.if_statement()?
        } else if self.eat_kw("CASE") {
            self.case_statement()?
        } else if self.eat_kw("FOR") {
            self.for_statement()?
        } else if self.eat_kw("WHILE") {
            let cond = self.expression()?;
            self.expect_kw("DO")?;
            let body = self.statements(&["END_WHILE"]);
            self.expect_kw("END_WHILE")?;
            StatementKind::While { cond, body }
        } else if self.eat_kw("REPEAT") {
            let body = self.statements(&["UNTIL"]);
            self.expect_kw("UNTIL")?;
            let until = self.expression()?;
            self.expect_kw("END_REPEAT")?;
            StatementKind::Repeat { body, until }
        } else if self.eat_kw("EXIT") {
            StatementKind::Exit
        } else if self.eat_kw("RETURN") {
            StatementKind::Return
        } else if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
            if self.peek_at(1).is_some_and(|t| t.is_op("(")) {
                self.call_statement()?
            } else {
                let target = self.variable_ref()?;
                self.expect_op(":=")?;
                let value = self.expression()?;
                StatementKind::Assignment { target, value }
            }
        } else {
            return self.error(STATEMENT_START);
        };
        self.expect_op(";")?;
        Ok(Statement {
            kind,
            span: start.to(self.prev_span()),
        })
    }

    fn if_statement(&mut self) -> PResult<StatementKind> {
        let mut branches = Vec::new();
        let cond = self.expression()?;
        self.expect_kw("THEN")?;
        let body = self.statements(&["ELSIF", "ELSE", "END_IF"]);
        branches.push((cond, body));
        let mut else_body = None;
        loop {
            if self.eat_kw("ELSIF") {
                let cond = self.expression()?;
                self.expect_kw("THEN")?;
                let body = self.statements(&["ELSIF", "ELSE", "END_IF"]);
                branches.push((cond, body));
            } else if self.eat_kw("ELSE") {
                else_body = Some(self.statements(&["END_IF"]));
                self.expect_kw("END_IF")?;
                break;
            } else {
                self.expect_kw("END_IF")?;
                break;
            }
        }
        Ok(StatementKind::If { branches, else_body })
    }

    fn case_statement(&mut self) -> PResult<StatementKind> {
        let selector = self.expression()?;
        self.expect_kw("OF")?;
        let mut arms = Vec::new();
        while self.at_case_label() {
            let mut labels = vec![self.case_label()?];
            while self.eat_op(",") {
                labels.push(self.case_label()?);
            }
            self.expect_op(":")?;
            let body = self.case_arm_body();
            arms.push(CaseArm { labels, body });
        }
        let else_body = if self.eat_kw("ELSE") {
            Some(self.statements(&["END_CASE"]))
        } else {
            None
        };
        if !self.at_kw("END_CASE") && arms.is_empty() {
            return self.error(&["case label", "ELSE", "END_CASE"]);
        }
        self.expect_kw("END_CASE")?;
        Ok(StatementKind::Case {
            selector,
            arms,
            else_body,
        })
    }

    fn case_label_value(&mut self) -> PResult<Expression> {
        let start = self.span_here();
        if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
            let v = self.variable_ref()?;
            return Ok(Expression {
                span: v.span,
                kind: ExprKind::Variable(v),
            });
        }
        let neg = self.eat_op("-");
        let lit = match self.peek() {
            Some(t) if t.kind == TokenKind::IntLiteral => {
                self.pos += 1;
                Expression {
                    kind: ExprKind::Literal(Literal {
                        kind: LiteralKind::Int,
                        text: t.text.clone(),
                    }),
                    span: t.span,
                }
            }
            _ => return self.error(&["case label"]),
        };
        Ok(if neg {
            Expression {
                kind: ExprKind::Unary {
                    op: UnaryOp::Neg,
                    operand: Box::new(lit),
                },
                span: start.to(self.prev_span()),
            }
        } else {
            lit
        })
    }

    fn case_label(&mut self) -> PResult<CaseLabel> {
        let lo = self.case_label_value()?;
        if self.eat_op("..") {
            let hi = self.case_label_value()?;
            Ok(CaseLabel::Range(lo, hi))
        } else {
            Ok(CaseLabel::Value(lo))
        }
    }

    fn for_statement(&mut self) -> PResult<StatementKind> {
        let (var, var_span) = self.ident()?;
        self.expect_op(":=")?;
        let from = self.expression()?;
        self.expect_kw("TO")?;
        let to = self.expression()?;
        let by = if self.eat_kw("BY") {
            Some(self.expression()?)
        } else {
            None
        };
        self.expect_kw("DO")?;
        let body = self.statements(&["END_FOR"]);
        self.expect_kw("END_FOR")?;
        Ok(StatementKind::For {
            var,
            var_span,
            from,
            to,
            by,
            body,
        })
    }

    fn call_statement(&mut self) -> PResult<StatementKind> {
        let (callee, callee_span) = self.ident()?;
        let args = self.call_args()?;
        let named = args.iter().filter(|(a, _)| a.name.is_some()).count();
        if named == 0 && !args.is_empty() {
            return Ok(StatementKind::FunctionCall {
                callee,
                callee_span,
                args: args.into_iter().map(|(a, _)| a).collect(),
            });
        }
        if named != args.len() {
            let span = args
                .iter()
                .find(|(a, _)| a.name.is_none())
                .map(|(a, _)| a.span)
                .unwrap_or(callee_span);
            self.errors.push(SyntaxError {
                span,
                expected: vec!["named argument".into()],
                found: "positional argument".into(),
            });
            return Err(Recorded);
        }
        let mut fb_args = Vec::new();
        for (arg, dir) in args {
            if dir == ArgDirection::Out && !matches!(arg.value.kind, ExprKind::Variable(_)) {
                self.errors.push(SyntaxError {
                    span: arg.value.span,
                    expected: vec!["variable".into()],
                    found: "expression".into(),
                });
                return Err(Recorded);
            }
            fb_args.push(FbArg {
                name: arg.name.unwrap_or_default(),
                direction: dir,
                value: arg.value,
                span: arg.span,
            });
        }
        Ok(StatementKind::FbInvocation {
            instance: callee,
            instance_span: callee_span,
            args: fb_args,
        })
    }

    /// Parses `( [arg {, arg}] )`; each arg is `name := e`, `name => v`, or `e`.
    fn call_args(&mut self) -> PResult<Vec<(CallArg, ArgDirection)>> {
        self.expect_op("(")?;
        let mut args = Vec::new();
        if self.eat_op(")") {
            return Ok(args);
        }
        loop {
            let start = self.span_here();
            let named = self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
                && self.peek_at(1).is_some_and(|t| t.is_op(":=") || t.is_op("=>"));
            if named {
                let (name, _) = self.ident()?;
                let dir = if self.bump().is_some_and(|t| t.is_op("=>")) {
                    ArgDirection::Out
                } else {
                    ArgDirection::In
                };
                let value = self.expression()?;
                args.push((
                    CallArg {
                        name: Some(name),
                        span: start.to(value.span),
                        value,
                    },
                    dir,
                ));
            } else {
                let value = self.expression()?;
                args.push((
                    CallArg {
                        name: None,
                        span: value.span,
                        value,
                    },
                    ArgDirection::In,
                ));
            }
            if self.eat_op(")") {
                break;
            }
            self.expect_op(",")?;
        }
        Ok(args)
    }

    fn variable_ref(&mut self) -> PResult<VariableRef> {
        let (name, start) = self.ident()?;
        let mut indices = Vec::new();
        if self.eat_op("[") {
            indices.push(self.expression()?);
            while self.eat_op(",") {
                indices.push(self.expression()?);
            }
            self.expect_op("]")?;
        }
        let member = if self.eat_op(".") { Some(self.ident()?.0) } else { None };
        Ok(VariableRef {
            name,
            indices,
            member,
            span: start.to(self.prev_span()),
        })
    }

    fn expression(&mut self) -> PResult<Expression> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let t = self.peek()?;
        let op = match t.kind {
            TokenKind::Keyword => match t.text.to_ascii_uppercase().as_str() {
                "OR" => BinaryOp::Or,
                "XOR" => BinaryOp::Xor,
                "AND" => BinaryOp::And,
                "MOD" => BinaryOp::Mod,
                _ => return None,
            },
            TokenKind::Operator => match t.text.as_str() {
                "&" => BinaryOp::And,
                "=" => BinaryOp::Eq,
                "<>" => BinaryOp::Ne,
                "<" => BinaryOp::Lt,
                "<=" => BinaryOp::Le,
                ">" => BinaryOp::Gt,
                ">=" => BinaryOp::Ge,
                "+" => BinaryOp::Add,
                "-" => BinaryOp::Sub,
                "*" => BinaryOp::Mul,
                "/" => BinaryOp::Div,
                "**" => BinaryOp::Pow,
                _ => return None,
            },
            _ => return None,
        };
        Some(op)
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> PResult<Expression> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expression {
                kind: ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expression> {
        let start = self.span_here();
        let op = if self.eat_op("-") {
            Some(UnaryOp::Neg)
        } else if self.eat_kw("NOT") {
            Some(UnaryOp::Not)
        } else {
            None
        };
        match op {
            Some(op) => {
                let operand = self.unary()?;
                let span = start.to(operand.span);
                Ok(Expression {
                    kind: ExprKind::Unary {
                        op,
                        operand: Box::new(operand),
                    },
                    span,
                })
            }
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expression> {
        let Some(t) = self.peek() else {
            return self.error(&["expression"]);
        };
        let lit_kind = match t.kind {
            TokenKind::IntLiteral => Some(LiteralKind::Int),
            TokenKind::RealLiteral => Some(LiteralKind::Real),
            TokenKind::BoolLiteral => Some(LiteralKind::Bool),
            TokenKind::TimeLiteral => Some(LiteralKind::Time),
            TokenKind::StringLiteral => Some(LiteralKind::String),
            _ => None,
        };
        if let Some(kind) = lit_kind {
            self.pos += 1;
            return Ok(Expression {
                kind: ExprKind::Literal(Literal {
                    kind,
                    text: t.text.clone(),
                }),
                span: t.span,
            });
        }
        if self.eat_op("(") {
            let inner = self.expression()?;
            self.expect_op(")")?;
            return Ok(inner);
        }
        if t.kind == TokenKind::Identifier {
            if self.peek_at(1).is_some_and(|n| n.is_op("(")) {
                let (callee, start) = self.ident()?;
                let args = self.call_args()?.into_iter().map(|(a, _)| a).collect();
                return Ok(Expression {
                    kind: ExprKind::Call { callee, args },
                    span: start.to(self.prev_span()),
                });
            }
            let v = self.variable_ref()?;
            return Ok(Expression {
                span: v.span,
                kind: ExprKind::Variable(v),
            });
        }
        self.error(&["expression"])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors_of(src: &str) -> Vec<SyntaxError> {
        parse_with_recovery(&tokenize(src).unwrap()).1
    }

    #[test]
    fn minimal_program() {
        let unit = parse_source("PROGRAM Main x := 1; END_PROGRAM").unwrap();
        assert_eq!(unit.pous.len(), 1);
        let pou = &unit.pous[0];
        assert_eq!(pou.kind, PouKind::Program);
        assert_eq!(pou.name, "Main");
        assert!(matches!(
            pou.body[..],
            [Statement {
                kind: StatementKind::Assignment { .. },
                ..
            }]
        ));
    }

    #[test]
    fn timer_invocation_and_member_access() {
        let src = "PROGRAM Main\nVAR t1 : TON; start : BOOL; done : BOOL; END_VAR\n\
                   t1(IN := start, PT := T#5s);\ndone := t1.Q;\nEND_PROGRAM";
        let unit = parse_source(src).unwrap();
        let body = &unit.pous[0].body;
        match &body[0].kind {
            StatementKind::FbInvocation { instance, args, .. } => {
                assert_eq!(instance, "t1");
                assert_eq!(args.len(), 2);
                assert_eq!(args[1].name, "PT");
                assert!(matches!(&args[1].value.kind, ExprKind::Literal(l) if l.kind == LiteralKind::Time));
            }
            other => panic!("expected FB invocation, got {other:?}"),
        }
        match &body[1].kind {
            StatementKind::Assignment { value, .. } => match &value.kind {
                ExprKind::Variable(v) => {
                    assert_eq!(v.name, "t1");
                    assert_eq!(v.member.as_deref(), Some("Q"));
                }
                other => panic!("expected member access, got {other:?}"),
            },
            other => panic!("expected assignment, got {other:?}"),
        }
    }

    #[test]
    fn if_without_then() {
        let errs = errors_of("PROGRAM P IF b END_PROGRAM");
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].expected, vec!["THEN".to_string()]);
        assert_eq!(errs[0].found, "`END_PROGRAM`");
    }

    #[test]
    fn recovery_reports_multiple_errors() {
        let src = "PROGRAM P\nx := ;\ny := 1 +;\nz := 2;\nEND_PROGRAM\nPROGRAM Q IF a THEN b := 1; END_PROGRAM";
        let (unit, errs) = parse_with_recovery(&tokenize(src).unwrap());
        assert_eq!(errs.len(), 3, "{errs:?}");
        assert_eq!(unit.pous.len(), 2);
        assert_eq!(unit.pous[0].body.len(), 1);
    }

    #[test]
    fn precedence() {
        let unit = parse_source("PROGRAM P x := a + b * c = d AND NOT e; END_PROGRAM").unwrap();
        let StatementKind::Assignment { value, .. } = &unit.pous[0].body[0].kind else {
            panic!()
        };
        let ExprKind::Binary {
            op: BinaryOp::And,
            lhs,
            rhs,
        } = &value.kind
        else {
            panic!("top should be AND: {value:?}")
        };
        assert!(matches!(lhs.kind, ExprKind::Binary { op: BinaryOp::Eq, .. }));
        assert!(matches!(rhs.kind, ExprKind::Unary { op: UnaryOp::Not, .. }));
    }

    #[test]
    fn case_with_ranges_and_else() {
        let src = "PROGRAM P CASE s OF 0: a := 1; 1, 2..4: a := 2; b := 3; ELSE a := 0; END_CASE; END_PROGRAM";
        let unit = parse_source(src).unwrap();
        let StatementKind::Case { arms, else_body, .. } = &unit.pous[0].body[0].kind else {
            panic!()
        };
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[1].labels.len(), 2);
        assert_eq!(arms[1].body.len(), 2);
        assert_eq!(else_body.as_ref().unwrap().len(), 1);
    }

    #[test]
    fn function_header_and_blocks() {
        let src = "FUNCTION Scale : REAL\nVAR_INPUT raw : INT; END_VAR\nVAR CONSTANT k : REAL := 0.5; END_VAR\n\
                   Scale := k;\nEND_FUNCTION";
        let unit = parse_source(src).unwrap();
        let pou = &unit.pous[0];
        assert_eq!(pou.return_type.as_ref().unwrap().base, "REAL");
        assert_eq!(pou.var_blocks[0].kind, VarBlockKind::VarInput);
        assert_eq!(pou.var_blocks[1].kind, VarBlockKind::VarConstant);
    }

    #[test]
    fn arrays_and_loops() {
        let src = "PROGRAM P VAR buf : ARRAY[0..9] OF INT; idx : INT; END_VAR\n\
                   FOR idx := 0 TO 9 BY 1 DO buf[idx] := idx; END_FOR;\n\
                   WHILE idx > 0 DO idx := idx - 1; IF idx = 3 THEN EXIT; END_IF; END_WHILE;\n\
                   REPEAT idx := idx + 1; UNTIL idx >= 5 END_REPEAT;\nEND_PROGRAM";
        let unit = parse_source(src).unwrap();
        let decl = &unit.pous[0].var_blocks[0].decls[0];
        assert_eq!(decl.data_type.array_bounds, Some(vec![(0, 9)]));
        assert_eq!(unit.pous[0].body.len(), 3);
    }

    #[test]
    fn positional_and_named_calls() {
        let unit = parse_source("PROGRAM P ZPUSHP(req, buf); t1(); x := LIMIT(0, y, 10); END_PROGRAM").unwrap();
        let body = &unit.pous[0].body;
        assert!(matches!(body[0].kind, StatementKind::FunctionCall { .. }));
        assert!(matches!(body[1].kind, StatementKind::FbInvocation { ref args, .. } if args.is_empty()));
        let errs = errors_of("PROGRAM P t1(IN := a, b); END_PROGRAM");
        assert_eq!(errs.len(), 1);
    }

    #[test]
    fn missing_end_reports_error() {
        let errs = errors_of("PROGRAM P x := 1;");
        assert_eq!(errs[0].expected, vec!["END_PROGRAM".to_string()]);
        assert_eq!(errs[0].found, "end of input");
    }

    #[test]
    fn standalone_types() {
        assert_eq!(parse_data_type("INT").unwrap().base, "INT");
        assert_eq!(
            parse_data_type("ARRAY[1..3, 0..1] OF BOOL").unwrap().array_bounds,
            Some(vec![(1, 3), (0, 1)])
        );
        assert!(parse_data_type("INT extra").is_none());
    }

    #[test]
    fn spans_cover_statement() {
        let unit = parse_source("PROGRAM P\n  x := 1;\nEND_PROGRAM").unwrap();
        assert_eq!(unit.pous[0].body[0].span, SourceSpan::new(2, 3, 2, 10));
        assert_eq!(unit.pous[0].span, SourceSpan::new(1, 1, 3, 12));
    }
}
