//! Canonical formatting: upper-case keywords, 4-space indentation, LF endings.
//! Parentheses are emitted only where precedence requires them.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn pretty_print(unit: &CompilationUnit) -> String {
    let mut out = String::new();
    for (i, pou) in unit.pous.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_pou(&mut out, pou);
    }
    out
}

fn print_pou(out: &mut String, pou: &Pou) {
    out.push_str(pou.kind.keyword());
    out.push(' ');
    out.push_str(&pou.name);
    if let Some(ret) = &pou.return_type {
        out.push_str(" : ");
        out.push_str(&type_text(ret));
    }
    out.push('\n');
    for block in &pou.var_blocks {
        print_var_block(out, block);
    }
    print_body(out, &pou.body, 1);
    out.push_str(pou.kind.end_keyword());
    out.push('\n');
}

pub fn print_var_block(out: &mut String, block: &VarBlock) {
    out.push_str(block.kind.keyword());
    out.push('\n');
    for decl in &block.decls {
        out.push_str(INDENT);
        out.push_str(&decl_text(decl));
        out.push('\n');
    }
    out.push_str("END_VAR\n");
}

pub fn decl_text(decl: &VarDecl) -> String {
    let mut s = format!("{} : {}", decl.name, type_text(&decl.data_type));
    if let Some(init) = &decl.initializer {
        s.push_str(" := ");
        s.push_str(&expr_text(init));
    }
    s.push(';');
    s
}

pub fn type_text(t: &DataTypeRef) -> String {
    match &t.array_bounds {
        None => t.base.clone(),
        Some(bounds) => {
            let dims: Vec<String> = bounds.iter().map(|(lo, hi)| format!("{lo}..{hi}")).collect();
            format!("ARRAY[{}] OF {}", dims.join(", "), t.base)
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn print_body(out: &mut String, body: &[Statement], depth: usize) {
    for stmt in body {
        print_statement(out, stmt, depth);
    }
}

fn print_statement(out: &mut String, stmt: &Statement, depth: usize) {
    indent(out, depth);
    match &stmt.kind {
        StatementKind::Assignment { target, value } => {
            let _ = writeln!(out, "{} := {};", var_text(target), expr_text(value));
        }
        StatementKind::If { branches, else_body } => {
            for (i, (cond, body)) in branches.iter().enumerate() {
                if i > 0 {
                    indent(out, depth);
                    out.push_str("ELSIF ");
                } else {
                    out.push_str("IF ");
                }
                let _ = writeln!(out, "{} THEN", expr_text(cond));
                print_body(out, body, depth + 1);
            }
            if let Some(body) = else_body {
                indent(out, depth);
                out.push_str("ELSE\n");
                print_body(out, body, depth + 1);
            }
            indent(out, depth);
            out.push_str("END_IF;\n");
        }
        StatementKind::Case {
            selector,
            arms,
            else_body,
        } => {
            let _ = writeln!(out, "CASE {} OF", expr_text(selector));
            for arm in arms {
                indent(out, depth + 1);
                let labels: Vec<String> = arm
                    .labels
                    .iter()
                    .map(|l| match l {
                        CaseLabel::Value(v) => expr_text(v),
                        CaseLabel::Range(a, b) => format!("{}..{}", expr_text(a), expr_text(b)),
                    })
                    .collect();
                let _ = writeln!(out, "{}:", labels.join(", "));
                print_body(out, &arm.body, depth + 2);
            }
            if let Some(body) = else_body {
                indent(out, depth);
                out.push_str("ELSE\n");
                print_body(out, body, depth + 1);
            }
            indent(out, depth);
            out.push_str("END_CASE;\n");
        }
        StatementKind::For {
            var,
            from,
            to,
            by,
            body,
            ..
        } => {
            let _ = write!(out, "FOR {} := {} TO {}", var, expr_text(from), expr_text(to));
            if let Some(by) = by {
                let _ = write!(out, " BY {}", expr_text(by));
            }
            out.push_str(" DO\n");
            print_body(out, body, depth + 1);
            indent(out, depth);
            out.push_str("END_FOR;\n");
        }
        StatementKind::While { cond, body } => {
            let _ = writeln!(out, "WHILE {} DO", expr_text(cond));
            print_body(out, body, depth + 1);
            indent(out, depth);
            out.push_str("END_WHILE;\n");
        }
        StatementKind::Repeat { body, until } => {
            out.push_str("REPEAT\n");
            print_body(out, body, depth + 1);
            indent(out, depth);
            let _ = writeln!(out, "UNTIL {}", expr_text(until));
            indent(out, depth);
            out.push_str("END_REPEAT;\n");
        }
        StatementKind::FbInvocation { instance, args, .. } => {
            let args: Vec<String> = args
                .iter()
                .map(|a| {
                    let arrow = match a.direction {
                        ArgDirection::In => ":=",
                        ArgDirection::Out => "=>",
                    };
                    format!("{} {} {}", a.name, arrow, expr_text(&a.value))
                })
                .collect();
            let _ = writeln!(out, "{}({});", instance, args.join(", "));
        }
        StatementKind::FunctionCall { callee, args, .. } => {
            let _ = writeln!(out, "{}({});", callee, call_args_text(args));
        }
        StatementKind::Exit => out.push_str("EXIT;\n"),
        StatementKind::Return => out.push_str("RETURN;\n"),
        StatementKind::Empty => out.push_str(";\n"),
    }
}

fn call_args_text(args: &[CallArg]) -> String {
    args.iter()
        .map(|a| match &a.name {
            Some(n) => format!("{} := {}", n, expr_text(&a.value)),
            None => expr_text(&a.value),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn var_text(v: &VariableRef) -> String {
    let mut s = v.name.clone();
    if !v.indices.is_empty() {
        let idx: Vec<String> = v.indices.iter().map(expr_text).collect();
        let _ = write!(s, "[{}]", idx.join(", "));
    }
    if let Some(m) = &v.member {
        s.push('.');
        s.push_str(m);
    }
    s
}

pub fn expr_text(e: &Expression) -> String {
    match &e.kind {
        ExprKind::Literal(l) => l.text.clone(),
        ExprKind::Variable(v) => var_text(v),
        ExprKind::Call { callee, args } => format!("{}({})", callee, call_args_text(args)),
        ExprKind::Unary { op, operand } => {
            let inner = if operand.precedence() < UNARY_PRECEDENCE {
                format!("({})", expr_text(operand))
            } else {
                expr_text(operand)
            };
            match op {
                UnaryOp::Neg => format!("-{inner}"),
                UnaryOp::Not => format!("NOT {inner}"),
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            let l = if lhs.precedence() < prec {
                format!("({})", expr_text(lhs))
            } else {
                expr_text(lhs)
            };
            let r = if rhs.precedence() <= prec {
                format!("({})", expr_text(rhs))
            } else {
                expr_text(rhs)
            };
            format!("{} {} {}", l, op.symbol(), r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialect::parser::parse_source;

    #[test]
    fn minimal_program_canonical() {
        let unit = parse_source("program Main x:=1; end_program").unwrap();
        assert_eq!(pretty_print(&unit), "PROGRAM Main\n    x := 1;\nEND_PROGRAM\n");
    }

    #[test]
    fn nested_if_case_is_stable() {
        let src = "PROGRAM P VAR s : INT; a : BOOL; END_VAR IF a THEN CASE s OF 1: IF NOT a THEN s := 2; END_IF; \
                   ELSE s := 0; END_CASE; ELSIF s > 3 THEN a := FALSE; ELSE ; END_IF; END_PROGRAM";
        let unit = parse_source(src).unwrap();
        let first = pretty_print(&unit);
        let second = pretty_print(&parse_source(&first).unwrap());
        assert_eq!(first, second);
        assert!(first.contains("        CASE s OF\n            1:\n"));
    }

    #[test]
    fn parentheses_only_where_needed() {
        let unit = parse_source("PROGRAM P x := (a + b) * c - (d - e) + -(f * g); END_PROGRAM").unwrap();
        let text = pretty_print(&unit);
        assert!(text.contains("x := (a + b) * c - (d - e) + -(f * g);"), "{text}");
        let unit = parse_source("PROGRAM P x := a - (b + c); END_PROGRAM").unwrap();
        assert!(pretty_print(&unit).contains("a - (b + c)"));
    }
}
