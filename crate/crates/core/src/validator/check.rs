//! Static checks that make up the internal compile oracle.

use std::collections::{BTreeSet, HashMap};

use crate::dialect::*;

use super::diagnostic::{sort_diagnostics, Category, Diagnostic};
use super::profile::{CallableKind, DialectProfile, Param, Signature};
use super::types::{assignable, unify_numeric, Ty};

/// Validates a unit against a profile.
pub fn validate(unit: &CompilationUnit, profile: &DialectProfile) -> Vec<Diagnostic> {
    validate_with_labels(unit, profile, None)
}

/// Validates a unit whose variables may be registered externally as labels.
pub fn validate_with_labels(
    unit: &CompilationUnit,
    profile: &DialectProfile,
    labels: Option<&LabelManifest>,
) -> Vec<Diagnostic> {
    let mut checker = Checker {
        profile,
        unit,
        labels,
        diags: Vec::new(),
    };
    checker.run();
    let mut diags = checker.diags;
    sort_diagnostics(&mut diags);
    diags
}

#[derive(Clone, Debug)]
struct Symbol {
    ty: Ty,
    block: Option<VarBlockKind>,
    span: SourceSpan,
    is_fb_instance: bool,
}

struct Scope {
    pou_kind: PouKind,
    symbols: HashMap<String, Symbol>,
    invoked: BTreeSet<String>,
}

impl Scope {
    fn get(&self, name: &str) -> Option<&Symbol> {
        self.symbols.get(&name.to_ascii_uppercase())
    }
}

struct Checker<'a> {
    profile: &'a DialectProfile,
    unit: &'a CompilationUnit,
    labels: Option<&'a LabelManifest>,
    diags: Vec<Diagnostic>,
}

enum Callable {
    Signature(Signature),
    UserFunction(Signature),
}

impl<'a> Checker<'a> {
    fn report(&mut self, category: Category, span: SourceSpan, message: String) {
        self.diags.push(Diagnostic::error(category, span, message));
    }

    fn run(&mut self) {
        if !self.unit.pous.iter().any(|p| p.kind == PouKind::Program) {
            self.report(
                Category::MissingProgram,
                SourceSpan::origin(),
                "no PROGRAM found; every unit needs at least one PROGRAM POU".into(),
            );
        }
        let mut seen: HashMap<String, SourceSpan> = HashMap::new();
        for pou in &self.unit.pous {
            let key = pou.name.to_ascii_uppercase();
            if let Some(first) = seen.get(&key) {
                let d = Diagnostic::error(
                    Category::DuplicateDeclaration,
                    pou.name_span,
                    format!("POU `{}` is declared more than once", pou.name),
                )
                .with_related(vec![*first]);
                self.diags.push(d);
            } else {
                seen.insert(key, pou.name_span);
            }
            self.check_name(&pou.name, pou.name_span);
        }
        for pou in &self.unit.pous {
            self.check_pou(pou);
        }
    }

    /// Reserved-word and identifier-rule checks for a declared name. A
    /// reserved name is reported once, as a reserved-word violation.
    fn check_name(&mut self, name: &str, span: SourceSpan) {
        if self.profile.is_reserved(name) {
            self.report(
                Category::ReservedWordViolation,
                span,
                format!("`{name}` is a reserved word and cannot be used as an identifier"),
            );
            return;
        }
        let rules = &self.profile.identifier_rules;
        if name.chars().count() < rules.min_length {
            self.report(
                Category::IdentifierRule,
                span,
                format!(
                    "identifier `{name}` is shorter than the minimum length of {}",
                    rules.min_length
                ),
            );
        } else if rules.forbidden_names.contains(&name.to_ascii_uppercase()) {
            self.report(
                Category::IdentifierRule,
                span,
                format!("identifier `{name}` is not permitted by the dialect"),
            );
        }
    }

    fn user_pou(&self, name: &str) -> Option<&'a Pou> {
        self.unit.pou(name)
    }

    /// Interface of a user-defined FUNCTION or FUNCTION_BLOCK.
    fn user_signature(&self, pou: &Pou) -> Signature {
        let params = |kinds: &[VarBlockKind]| -> Vec<Param> {
            pou.decls()
                .filter(|(b, _)| kinds.contains(&b.kind))
                .map(|(_, d)| Param::new(&d.name, &printer_type(&d.data_type)))
                .collect()
        };
        Signature {
            name: pou.name.clone(),
            kind: if pou.kind == PouKind::Function {
                CallableKind::Function
            } else {
                CallableKind::FunctionBlock
            },
            inputs: params(&[VarBlockKind::VarInput, VarBlockKind::VarInOut]),
            outputs: params(&[VarBlockKind::VarOutput, VarBlockKind::VarInOut]),
            return_type: pou.return_type.as_ref().map(printer_type),
        }
    }

    fn fb_signature(&self, type_name: &str) -> Option<Signature> {
        if let Some(pou) = self.user_pou(type_name).filter(|p| p.kind == PouKind::FunctionBlock) {
            return Some(self.user_signature(pou));
        }
        self.profile
            .fb_catalog
            .get(type_name)
            .filter(|s| s.kind == CallableKind::FunctionBlock)
            .cloned()
    }

    fn is_fb_type(&self, name: &str) -> bool {
        self.fb_signature(name).is_some()
    }

    fn callable(&self, name: &str) -> Option<Callable> {
        if let Some(pou) = self.user_pou(name) {
            let sig = self.user_signature(pou);
            return Some(if pou.kind == PouKind::Function {
                Callable::UserFunction(sig)
            } else {
                Callable::Signature(sig)
            });
        }
        self.profile.fb_catalog.get(name).cloned().map(Callable::Signature)
    }

    /// Resolves a declared type, reporting unknown names.
    fn resolve_type(&mut self, t: &DataTypeRef, report: bool) -> Ty {
        let upper = t.base.to_ascii_uppercase();
        let base = if self.profile.allowed_datatypes.contains(&upper) {
            Ty::Named(upper)
        } else if self.is_fb_type(&t.base) {
            Ty::Fb(upper)
        } else {
            if report {
                self.report(
                    Category::UnknownDatatype,
                    t.span,
                    format!("unknown datatype `{}`", t.base),
                );
            }
            return Ty::Unknown;
        };
        match &t.array_bounds {
            None => base,
            Some(bounds) => {
                if report {
                    for (lo, hi) in bounds {
                        if lo > hi {
                            self.report(
                                Category::StructureViolation,
                                t.span,
                                format!("array bound {lo}..{hi} has low > high"),
                            );
                        }
                    }
                }
                Ty::Array(Box::new(base))
            }
        }
    }

    /// Type of a signature parameter name such as `BOOL`, `ANY_NUM`, or an FB.
    fn param_ty(&self, type_text: &str) -> Ty {
        match parse_data_type(type_text) {
            Some(t) => {
                let upper = t.base.to_ascii_uppercase();
                let base = if self.profile.allowed_datatypes.contains(&upper) || upper.starts_with("ANY") {
                    Ty::Named(upper)
                } else if self.is_fb_type(&upper) {
                    Ty::Fb(upper)
                } else {
                    Ty::Unknown
                };
                if t.array_bounds.is_some() {
                    Ty::Array(Box::new(base))
                } else {
                    base
                }
            }
            None => Ty::Unknown,
        }
    }

    fn check_pou(&mut self, pou: &'a Pou) {
        let mut scope = Scope {
            pou_kind: pou.kind,
            symbols: HashMap::new(),
            invoked: BTreeSet::new(),
        };

        if let Some(labels) = self.labels {
            for label in labels.visible_from(&pou.name) {
                let ty = parse_data_type(&label.data_type)
                    .map(|t| self.resolve_type(&t, false))
                    .unwrap_or(Ty::Unknown);
                let is_fb = matches!(ty, Ty::Fb(_));
                let tracked = is_fb && matches!(&label.scope, LabelScope::Local(_));
                scope.symbols.insert(
                    label.name.to_ascii_uppercase(),
                    Symbol {
                        ty,
                        block: None,
                        span: SourceSpan::origin(),
                        is_fb_instance: tracked,
                    },
                );
            }
        }

        if let Some(ret) = &pou.return_type {
            let ty = self.resolve_type(ret, true);
            scope.symbols.insert(
                pou.name.to_ascii_uppercase(),
                Symbol {
                    ty,
                    block: Some(VarBlockKind::VarOutput),
                    span: pou.name_span,
                    is_fb_instance: false,
                },
            );
        }

        for block in &pou.var_blocks {
            if !self.profile.allows_block(pou.kind, block.kind) {
                self.report(
                    Category::StructureViolation,
                    block.span,
                    format!(
                        "{} blocks are not allowed in a {}",
                        block.kind.keyword(),
                        pou.kind.keyword()
                    ),
                );
            } else if self.profile.strict_labels && pou.kind == PouKind::Program && block.kind == VarBlockKind::Var {
                self.report(
                    Category::StructureViolation,
                    block.span,
                    "inline VAR blocks are not allowed in a PROGRAM; register these variables as labels".into(),
                );
            }
            for decl in &block.decls {
                self.declare(&mut scope, block.kind, decl);
            }
        }
        // Initializers see every declaration.
        for (_, decl) in pou.decls() {
            if let Some(init) = &decl.initializer {
                let target = scope.get(&decl.name).map(|s| s.ty.clone()).unwrap_or(Ty::Unknown);
                let ty = self.expr_ty(&scope, init);
                self.expect_assignable(&target, &ty, init.span);
            }
        }

        self.check_body(&mut scope, &pou.body, 0);

        let mut unused: Vec<(&String, &Symbol)> = scope
            .symbols
            .iter()
            .filter(|(name, s)| s.is_fb_instance && !scope.invoked.contains(*name))
            .collect();
        unused.sort_by_key(|(_, s)| s.span.start());
        for (_, sym) in unused {
            let name = self.decl_name_at(pou, sym.span).unwrap_or_default();
            let type_name = sym.ty.to_string();
            let msg = if name.is_empty() {
                format!("a {type_name} instance is declared but never invoked")
            } else {
                format!("function block instance `{name}` ({type_name}) is declared but never invoked")
            };
            self.report(Category::UnusedFunctionBlock, sym.span, msg);
        }
    }

    fn decl_name_at(&self, pou: &Pou, span: SourceSpan) -> Option<String> {
        if let Some((_, d)) = pou.decls().find(|(_, d)| d.span == span) {
            return Some(d.name.clone());
        }
        None
    }

    fn declare(&mut self, scope: &mut Scope, block: VarBlockKind, decl: &VarDecl) {
        let key = decl.name.to_ascii_uppercase();
        if let Some(prev) = scope.symbols.get(&key).filter(|s| s.block.is_some()) {
            let d = Diagnostic::error(
                Category::DuplicateDeclaration,
                decl.span,
                format!("`{}` is declared more than once", decl.name),
            )
            .with_related(vec![prev.span]);
            self.diags.push(d);
            return;
        }
        self.check_name(&decl.name, decl.span);
        let ty = self.resolve_type(&decl.data_type, true);
        let is_fb_instance = matches!(ty, Ty::Fb(_))
            && !matches!(
                block,
                VarBlockKind::VarInput | VarBlockKind::VarInOut | VarBlockKind::VarExternal
            );
        scope.symbols.insert(
            key,
            Symbol {
                ty,
                block: Some(block),
                span: decl.span,
                is_fb_instance,
            },
        );
    }

    fn expect_assignable(&mut self, target: &Ty, src: &Ty, span: SourceSpan) {
        if !assignable(target, src) {
            self.report(
                Category::TypeMismatch,
                span,
                format!("type mismatch: cannot assign {src} to {target}"),
            );
        }
    }

    fn expect_bool(&mut self, ty: &Ty, span: SourceSpan, what: &str) {
        if !ty.is_unknown() && !ty.is_bool() {
            self.report(
                Category::TypeMismatch,
                span,
                format!("type mismatch: {what} must be BOOL, found {ty}"),
            );
        }
    }

    fn check_body(&mut self, scope: &mut Scope, body: &[Statement], loop_depth: usize) {
        for stmt in body {
            self.check_statement(scope, stmt, loop_depth);
        }
    }

    fn check_statement(&mut self, scope: &mut Scope, stmt: &Statement, loop_depth: usize) {
        match &stmt.kind {
            StatementKind::Assignment { target, value } => {
                let target_ty = self.variable_ty(scope, target);
                if let Some(sym) = scope.get(&target.name) {
                    if sym.block == Some(VarBlockKind::VarConstant) {
                        self.report(
                            Category::StructureViolation,
                            target.span,
                            format!("cannot assign to constant `{}`", target.name),
                        );
                    }
                }
                let value_ty = self.expr_ty(scope, value);
                self.expect_assignable(&target_ty, &value_ty, value.span);
            }
            StatementKind::If { branches, else_body } => {
                for (cond, body) in branches {
                    let ty = self.expr_ty(scope, cond);
                    self.expect_bool(&ty, cond.span, "IF condition");
                    self.check_body(scope, body, loop_depth);
                }
                if let Some(body) = else_body {
                    self.check_body(scope, body, loop_depth);
                }
            }
            StatementKind::Case {
                selector,
                arms,
                else_body,
            } => {
                let ty = self.expr_ty(scope, selector);
                if !ty.is_unknown() && !ty.is_integer() && !ty.is_bit_string() {
                    self.report(
                        Category::TypeMismatch,
                        selector.span,
                        format!("type mismatch: CASE selector must be an integer, found {ty}"),
                    );
                }
                for arm in arms {
                    for label in &arm.labels {
                        let values: Vec<&Expression> = match label {
                            CaseLabel::Value(v) => vec![v],
                            CaseLabel::Range(a, b) => vec![a, b],
                        };
                        for v in values {
                            let lt = self.expr_ty(scope, v);
                            if !ty.is_unknown() {
                                self.expect_assignable(&ty, &lt, v.span);
                            }
                        }
                    }
                    self.check_body(scope, &arm.body, loop_depth);
                }
                if let Some(body) = else_body {
                    self.check_body(scope, body, loop_depth);
                }
            }
            StatementKind::For {
                var,
                var_span,
                from,
                to,
                by,
                body,
            } => {
                let var_ty = match scope.get(var) {
                    Some(s) => s.ty.clone(),
                    None => {
                        self.report(
                            Category::UndeclaredVariable,
                            *var_span,
                            format!("undeclared variable `{var}`"),
                        );
                        Ty::Unknown
                    }
                };
                if !var_ty.is_unknown() && !var_ty.is_integer() {
                    self.report(
                        Category::TypeMismatch,
                        *var_span,
                        format!("type mismatch: FOR variable must be an integer, found {var_ty}"),
                    );
                }
                for e in [Some(from), Some(to), by.as_ref()].into_iter().flatten() {
                    let ty = self.expr_ty(scope, e);
                    self.expect_assignable(&var_ty, &ty, e.span);
                }
                self.check_body(scope, body, loop_depth + 1);
            }
            StatementKind::While { cond, body } => {
                let ty = self.expr_ty(scope, cond);
                self.expect_bool(&ty, cond.span, "WHILE condition");
                self.check_body(scope, body, loop_depth + 1);
            }
            StatementKind::Repeat { body, until } => {
                self.check_body(scope, body, loop_depth + 1);
                let ty = self.expr_ty(scope, until);
                self.expect_bool(&ty, until.span, "UNTIL condition");
            }
            StatementKind::Exit => {
                if loop_depth == 0 {
                    self.report(
                        Category::StructureViolation,
                        stmt.span,
                        "EXIT is only allowed inside a loop".into(),
                    );
                }
            }
            StatementKind::Return | StatementKind::Empty => {}
            StatementKind::FbInvocation {
                instance,
                instance_span,
                args,
            } => self.check_fb_invocation(scope, instance, *instance_span, args),
            StatementKind::FunctionCall {
                callee,
                callee_span,
                args,
            } => {
                self.call_ty(scope, callee, *callee_span, args);
            }
        }
    }

    fn check_fb_invocation(&mut self, scope: &mut Scope, instance: &str, span: SourceSpan, args: &[FbArg]) {
        if self.profile.is_disallowed(instance) {
            self.report(
                Category::DisallowedInstruction,
                span,
                format!("instruction `{instance}` is not allowed in Structured Text"),
            );
            return;
        }
        let mut names = BTreeSet::new();
        for a in args {
            if !names.insert(a.name.to_ascii_uppercase()) {
                self.report(
                    Category::StructureViolation,
                    a.span,
                    format!("parameter `{}` is passed more than once", a.name),
                );
            }
        }
        let sym = scope.get(instance).cloned();
        let sig = match sym {
            Some(Symbol {
                ty: Ty::Fb(type_name), ..
            }) => {
                scope.invoked.insert(instance.to_ascii_uppercase());
                self.fb_signature(&type_name)
            }
            Some(Symbol { ty: Ty::Unknown, .. }) => {
                scope.invoked.insert(instance.to_ascii_uppercase());
                None
            }
            Some(Symbol { ty, .. }) => {
                self.report(
                    Category::TypeMismatch,
                    span,
                    format!("`{instance}` is a {ty}, not a function block instance"),
                );
                None
            }
            None => match self.callable(instance) {
                Some(Callable::UserFunction(sig)) => Some(sig),
                Some(Callable::Signature(sig)) if sig.kind == CallableKind::Function => Some(sig),
                Some(Callable::Signature(sig)) => {
                    self.report(
                        Category::StructureViolation,
                        span,
                        format!(
                            "function block `{}` must be instantiated in a VAR block before it is invoked",
                            sig.name
                        ),
                    );
                    None
                }
                None => {
                    self.report(
                        Category::UndeclaredVariable,
                        span,
                        format!("undeclared function block instance `{instance}`"),
                    );
                    None
                }
            },
        };
        for a in args {
            let param = sig.as_ref().map(|s| match a.direction {
                ArgDirection::In => s.input(&a.name),
                ArgDirection::Out => s.output(&a.name),
            });
            match param {
                Some(None) => {
                    let sig_name = sig.as_ref().map(|s| s.name.as_str()).unwrap_or_default();
                    let dir = if a.direction == ArgDirection::In {
                        "input"
                    } else {
                        "output"
                    };
                    self.report(
                        Category::UndeclaredVariable,
                        a.span,
                        format!("`{sig_name}` has no {dir} named `{}`", a.name),
                    );
                    self.expr_ty(scope, &a.value);
                }
                Some(Some(p)) => {
                    let pty = self.param_ty(&p.data_type);
                    let vty = self.expr_ty(scope, &a.value);
                    match a.direction {
                        ArgDirection::In => self.expect_assignable(&pty, &vty, a.value.span),
                        ArgDirection::Out => self.expect_assignable(&vty, &pty, a.value.span),
                    }
                }
                None => {
                    self.expr_ty(scope, &a.value);
                }
            }
        }
    }

    /// Checks a call and returns its result type.
    fn call_ty(&mut self, scope: &Scope, callee: &str, span: SourceSpan, args: &[CallArg]) -> Ty {
        if self.profile.is_disallowed(callee) {
            self.report(
                Category::DisallowedInstruction,
                span,
                format!("instruction `{callee}` is not allowed in Structured Text"),
            );
            return Ty::Unknown;
        }
        let sig = match self.callable(callee) {
            Some(Callable::UserFunction(sig)) => sig,
            Some(Callable::Signature(sig)) if sig.kind == CallableKind::Function => sig,
            Some(Callable::Signature(sig)) => {
                self.report(
                    Category::StructureViolation,
                    span,
                    format!(
                        "function block `{}` must be instantiated and invoked, not called as a function",
                        sig.name
                    ),
                );
                return Ty::Unknown;
            }
            None => {
                if scope.get(callee).is_some_and(|s| matches!(s.ty, Ty::Fb(_))) {
                    self.report(
                        Category::StructureViolation,
                        span,
                        format!("function block instance `{callee}` cannot be used inside an expression"),
                    );
                } else {
                    self.report(
                        Category::UndeclaredVariable,
                        span,
                        format!("unknown function `{callee}`"),
                    );
                }
                for a in args {
                    self.expr_ty(scope, &a.value);
                }
                return Ty::Unknown;
            }
        };
        let mut generic_arg: Option<Ty> = None;
        for (i, a) in args.iter().enumerate() {
            let param = match &a.name {
                Some(n) => sig.input(n),
                None => sig.inputs.get(i),
            };
            let vty = self.expr_ty(scope, &a.value);
            match param {
                Some(p) => {
                    let pty = self.param_ty(&p.data_type);
                    if pty.is_generic() && generic_arg.is_none() {
                        generic_arg = Some(vty.clone());
                    }
                    self.expect_assignable(&pty, &vty, a.value.span);
                }
                None => {
                    let msg = match &a.name {
                        Some(n) => format!("`{}` has no input named `{n}`", sig.name),
                        None => format!("`{}` takes at most {} arguments", sig.name, sig.inputs.len()),
                    };
                    let cat = if a.name.is_some() {
                        Category::UndeclaredVariable
                    } else {
                        Category::TypeMismatch
                    };
                    self.report(cat, a.span, msg);
                }
            }
        }
        match &sig.return_type {
            None => Ty::Unknown,
            Some(rt) => {
                let ty = self.param_ty(rt);
                if ty.is_generic() {
                    generic_arg.unwrap_or(Ty::Unknown)
                } else {
                    ty
                }
            }
        }
    }

    fn variable_ty(&mut self, scope: &Scope, v: &VariableRef) -> Ty {
        let Some(sym) = scope.get(&v.name) else {
            for i in &v.indices {
                self.expr_ty(scope, i);
            }
            self.report(
                Category::UndeclaredVariable,
                v.span,
                format!("undeclared variable `{}`", v.name),
            );
            return Ty::Unknown;
        };
        let mut ty = sym.ty.clone();
        if !v.indices.is_empty() {
            for i in &v.indices {
                let it = self.expr_ty(scope, i);
                if !it.is_unknown() && !it.is_integer() {
                    self.report(
                        Category::TypeMismatch,
                        i.span,
                        format!("type mismatch: array index must be an integer, found {it}"),
                    );
                }
            }
            ty = match ty {
                Ty::Array(elem) => *elem,
                Ty::Unknown => Ty::Unknown,
                other => {
                    self.report(
                        Category::TypeMismatch,
                        v.span,
                        format!("`{}` is a {other}, not an array", v.name),
                    );
                    Ty::Unknown
                }
            };
        }
        if let Some(member) = &v.member {
            ty = match ty {
                Ty::Fb(type_name) => {
                    let sig = self.fb_signature(&type_name);
                    let param = sig.as_ref().and_then(|s| s.output(member).or_else(|| s.input(member)));
                    match param {
                        Some(p) => self.param_ty(&p.data_type.clone()),
                        None => {
                            self.report(
                                Category::UndeclaredVariable,
                                v.span,
                                format!("function block `{type_name}` has no output named `{member}`"),
                            );
                            Ty::Unknown
                        }
                    }
                }
                Ty::Unknown => Ty::Unknown,
                other => {
                    self.report(
                        Category::TypeMismatch,
                        v.span,
                        format!("`{}` is a {other} and has no member `{member}`", v.name),
                    );
                    Ty::Unknown
                }
            };
        }
        ty
    }

    fn expr_ty(&mut self, scope: &Scope, e: &Expression) -> Ty {
        match &e.kind {
            ExprKind::Literal(l) => match l.kind {
                LiteralKind::Int => Ty::IntLit,
                LiteralKind::Real => Ty::RealLit,
                LiteralKind::Bool => Ty::bool(),
                LiteralKind::Time => Ty::named("TIME"),
                LiteralKind::String => Ty::named("STRING"),
            },
            ExprKind::Variable(v) => {
                if v.indices.is_empty() && v.member.is_none() && scope.get(&v.name).is_none() {
                    // A bare function name as the return variable is handled by the
                    // symbol table; anything else is undeclared.
                    if scope.pou_kind == PouKind::Function && self.user_pou(&v.name).is_some() {
                        return Ty::Unknown;
                    }
                }
                self.variable_ty(scope, v)
            }
            ExprKind::Unary { op, operand } => {
                let ty = self.expr_ty(scope, operand);
                let ok = match op {
                    UnaryOp::Neg => ty.is_unknown() || ty.is_numeric() || ty.is_time(),
                    UnaryOp::Not => ty.is_unknown() || ty.is_bool() || ty.is_bit_string(),
                };
                if ok {
                    ty
                } else {
                    let sym = if *op == UnaryOp::Neg { "-" } else { "NOT" };
                    self.report(
                        Category::TypeMismatch,
                        e.span,
                        format!("type mismatch: operator {sym} cannot be applied to {ty}"),
                    );
                    Ty::Unknown
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.expr_ty(scope, lhs);
                let b = self.expr_ty(scope, rhs);
                match binary_result(*op, &a, &b) {
                    Some(t) => t,
                    None => {
                        self.report(
                            Category::TypeMismatch,
                            e.span,
                            format!("type mismatch: operator {} cannot combine {a} and {b}", op.symbol()),
                        );
                        Ty::Unknown
                    }
                }
            }
            ExprKind::Call { callee, args } => self.call_ty(scope, callee, e.span, args),
        }
    }
}

fn printer_type(t: &DataTypeRef) -> String {
    crate::dialect::printer::type_text(t)
}

fn binary_result(op: BinaryOp, a: &Ty, b: &Ty) -> Option<Ty> {
    if a.is_unknown() || b.is_unknown() {
        return Some(if op.is_comparison() { Ty::bool() } else { Ty::Unknown });
    }
    match op {
        BinaryOp::Add | BinaryOp::Sub if a.is_time() && b.is_time() => Some(a.clone()),
        BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Pow => unify_numeric(a, b),
        BinaryOp::Mod => unify_numeric(a, b).filter(|t| t.is_integer()),
        BinaryOp::Eq | BinaryOp::Ne => {
            let bits = (a.is_bit_string() && matches!(b, Ty::IntLit)) || (b.is_bit_string() && matches!(a, Ty::IntLit));
            let ok = unify_numeric(a, b).is_some() || bits || (a == b && !matches!(a, Ty::Fb(_) | Ty::Array(_)));
            ok.then(Ty::bool)
        }
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let ok = unify_numeric(a, b).is_some() || (a == b && (a.is_time() || a.name_is("STRING")));
            ok.then(Ty::bool)
        }
        BinaryOp::And | BinaryOp::Or | BinaryOp::Xor => {
            if a.is_bool() && b.is_bool() {
                Some(Ty::bool())
            } else if a.is_bit_string() && (a == b || matches!(b, Ty::IntLit)) {
                Some(a.clone())
            } else if b.is_bit_string() && matches!(a, Ty::IntLit) {
                Some(b.clone())
            } else {
                None
            }
        }
    }
}

impl Ty {
    fn name_is(&self, n: &str) -> bool {
        matches!(self, Ty::Named(x) if x == n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diags(src: &str) -> Vec<Diagnostic> {
        let unit = parse_source(src).unwrap();
        validate(&unit, &DialectProfile::default_profile())
    }

    fn categories(src: &str) -> Vec<Category> {
        diags(src).into_iter().map(|d| d.category).collect()
    }

    #[test]
    fn unused_function_block() {
        let d = diags("PROGRAM Main VAR t1 : TON; END_VAR ; END_PROGRAM");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, Category::UnusedFunctionBlock);
        assert_eq!(d[0].span.start(), (1, 18));
    }

    #[test]
    fn reserved_word_at_declaration() {
        let d = diags("PROGRAM Main VAR SM : BOOL; END_VAR SM := TRUE; END_PROGRAM");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, Category::ReservedWordViolation);
        assert_eq!(d[0].span.start(), (1, 18));
    }

    #[test]
    fn empty_unit_missing_program_only() {
        let d = validate(&CompilationUnit::default(), &DialectProfile::default_profile());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, Category::MissingProgram);
    }

    #[test]
    fn bool_into_int() {
        // `x` is both a device name and too short under the default profile,
        // so the relaxed profile isolates the type rule.
        let mut relaxed = DialectProfile::default_profile();
        relaxed.reserved_words.remove("X");
        relaxed.identifier_rules.min_length = 1;
        let unit = parse_source("PROGRAM Main VAR x : INT; END_VAR x := TRUE; END_PROGRAM").unwrap();
        let cats: Vec<_> = validate(&unit, &relaxed).into_iter().map(|d| d.category).collect();
        assert_eq!(cats, vec![Category::TypeMismatch]);
        assert_eq!(
            categories("PROGRAM Main VAR xx : INT; END_VAR xx := TRUE; END_PROGRAM"),
            vec![Category::TypeMismatch]
        );
    }

    #[test]
    fn undeclared_variable() {
        let d = diags("PROGRAM Main VAR xx : INT; END_VAR xx := yy + 1; END_PROGRAM");
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].category, Category::UndeclaredVariable);
        assert!(d[0].message.contains("`yy`"));
    }

    #[test]
    fn disallowed_instruction() {
        assert_eq!(
            categories("PROGRAM Main MPS(TRUE); END_PROGRAM"),
            vec![Category::DisallowedInstruction]
        );
    }

    #[test]
    fn unknown_datatype() {
        assert_eq!(
            categories("PROGRAM Main VAR xx : FLOAT32; END_VAR xx := 1; END_PROGRAM"),
            vec![Category::UnknownDatatype]
        );
    }

    #[test]
    fn duplicate_declaration() {
        let d = diags("PROGRAM Main VAR xx : INT; xx : INT; END_VAR xx := 1; END_PROGRAM");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, Category::DuplicateDeclaration);
        assert!(d[0].related.is_some());
    }

    #[test]
    fn block_kind_table() {
        assert_eq!(
            categories("PROGRAM Main VAR_INPUT xx : INT; END_VAR ; END_PROGRAM"),
            vec![Category::StructureViolation]
        );
        assert!(categories("FUNCTION AddOne : INT VAR_INPUT aa : INT; END_VAR AddOne := aa + 1; END_FUNCTION PROGRAM Main ; END_PROGRAM").is_empty());
    }

    #[test]
    fn identifier_rules() {
        assert_eq!(
            categories("PROGRAM Main VAR q : INT; END_VAR q := 1; END_PROGRAM"),
            vec![Category::IdentifierRule]
        );
        assert_eq!(
            categories("PROGRAM Main VAR en : BOOL; END_VAR en := TRUE; END_PROGRAM"),
            vec![Category::IdentifierRule]
        );
    }

    #[test]
    fn strict_labels_rejects_inline_var() {
        let unit = parse_source("PROGRAM Main VAR xx : INT; END_VAR xx := 1; END_PROGRAM").unwrap();
        let profile = DialectProfile::default_profile().with_strict_labels(true);
        let d = validate(&unit, &profile);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, Category::StructureViolation);
    }

    #[test]
    fn member_access_types_against_catalog() {
        assert!(categories(
            "PROGRAM Main VAR t1 : TON; go : BOOL; el : TIME; END_VAR t1(IN := go, PT := T#1s); go := t1.Q; el := t1.ET; END_PROGRAM"
        )
        .is_empty());
        assert_eq!(
            categories(
                "PROGRAM Main VAR t1 : TON; nn : INT; END_VAR t1(IN := TRUE, PT := T#1s); nn := t1.Q; END_PROGRAM"
            ),
            vec![Category::TypeMismatch]
        );
        assert_eq!(
            categories(
                "PROGRAM Main VAR t1 : TON; go : BOOL; END_VAR t1(IN := TRUE, PT := T#1s); go := t1.DONE; END_PROGRAM"
            ),
            vec![Category::UndeclaredVariable]
        );
    }

    #[test]
    fn fb_argument_types() {
        assert_eq!(
            categories("PROGRAM Main VAR t1 : TON; END_VAR t1(IN := TRUE, PT := 5); END_PROGRAM"),
            vec![Category::TypeMismatch]
        );
    }

    #[test]
    fn conditions_and_exit() {
        assert_eq!(
            categories("PROGRAM Main VAR nn : INT; END_VAR IF nn THEN nn := 1; END_IF; END_PROGRAM"),
            vec![Category::TypeMismatch]
        );
        assert_eq!(
            categories("PROGRAM Main EXIT; END_PROGRAM"),
            vec![Category::StructureViolation]
        );
    }

    #[test]
    fn catalog_functions_and_generics() {
        assert!(categories(
            "PROGRAM Main VAR aa : INT; rr : REAL; ok : BOOL; wd : WORD; END_VAR \
             aa := LIMIT(0, aa, 100); rr := ABS(rr); ok := ZPUSHP(TRUE, wd); END_PROGRAM"
        )
        .is_empty());
        assert_eq!(
            categories("PROGRAM Main VAR aa : INT; END_VAR aa := FOO(aa); END_PROGRAM"),
            vec![Category::UndeclaredVariable]
        );
    }

    #[test]
    fn widening_rules() {
        assert!(
            categories("PROGRAM Main VAR aa : INT; bb : DINT; END_VAR bb := aa; bb := aa + bb; END_PROGRAM").is_empty()
        );
        assert_eq!(
            categories("PROGRAM Main VAR aa : INT; bb : DINT; END_VAR aa := bb; END_PROGRAM"),
            vec![Category::TypeMismatch]
        );
    }

    #[test]
    fn labels_supply_declarations() {
        let unit = parse_source(
            "PROGRAM Main VAR nn : INT; t1 : TON; END_VAR t1(IN := TRUE, PT := T#1s); nn := 1; END_PROGRAM",
        )
        .unwrap();
        let (manifest, stripped) = extract_labels(&unit).unwrap();
        let profile = DialectProfile::default_profile();
        assert_eq!(validate(&stripped, &profile).len(), 2);
        assert!(validate_with_labels(&stripped, &profile, Some(&manifest)).is_empty());
    }

    #[test]
    fn deterministic_ordering() {
        let src = "PROGRAM Main VAR SM : BOOL; q : INT; END_VAR q := TRUE; zz := 1; END_PROGRAM";
        let a = diags(src);
        let b = diags(src);
        assert_eq!(a, b);
        let starts: Vec<_> = a.iter().map(|d| d.span.start()).collect();
        let mut sorted = starts.clone();
        sorted.sort();
        assert_eq!(starts, sorted);
    }
}
