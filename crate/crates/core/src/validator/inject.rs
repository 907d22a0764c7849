//! Seeded defect injection: additive edits to a clean program that each
//! produce exactly one diagnostic of a known category. The injector is the
//! ground truth the detection tests and the scripted backends rely on.

use thiserror::Error;

use crate::dialect::token::{is_identifier, is_keyword};
use crate::dialect::*;

use super::diagnostic::Category;
use super::profile::DialectProfile;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InjectError {
    #[error("source does not parse: {0}")]
    Parse(String),
    #[error("no PROGRAM to inject into")]
    NoProgram,
    #[error("no unused name available for a {0} defect")]
    Exhausted(Category),
}

/// One planned defect. `tag` keeps repeated defects of the same category
/// distinct.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Defect {
    pub category: Category,
    pub tag: usize,
}

/// Parses `source`, applies every defect, and pretty-prints the result.
pub fn inject_source(source: &str, categories: &[Category], profile: &DialectProfile) -> Result<String, InjectError> {
    let unit = parse_source(source).map_err(|e| InjectError::Parse(e.to_string()))?;
    let defects: Vec<Defect> = categories
        .iter()
        .enumerate()
        .map(|(tag, &category)| Defect { category, tag })
        .collect();
    let out = inject_all(&unit, &defects, profile)?;
    Ok(pretty_print(&out))
}

pub fn inject_all(
    unit: &CompilationUnit,
    defects: &[Defect],
    profile: &DialectProfile,
) -> Result<CompilationUnit, InjectError> {
    let mut out = unit.clone();
    for d in defects {
        inject(&mut out, *d, profile)?;
    }
    Ok(out)
}

pub fn inject(unit: &mut CompilationUnit, defect: Defect, profile: &DialectProfile) -> Result<(), InjectError> {
    let idx = unit
        .pous
        .iter()
        .position(|p| p.kind == PouKind::Program)
        .ok_or(InjectError::NoProgram)?;
    let n = defect.tag;
    match defect.category {
        Category::MissingProgram => {
            for p in unit.pous.iter_mut().filter(|p| p.kind == PouKind::Program) {
                p.kind = PouKind::FunctionBlock;
            }
        }
        Category::UndeclaredVariable => {
            let name = fresh(unit, &format!("undecl_{n}"));
            push_stmt(&mut unit.pous[idx], assign(&name, int_lit("1")));
        }
        Category::ReservedWordViolation => {
            let name = reserved_candidates(profile)
                .find(|w| !is_declared(unit, w))
                .ok_or(InjectError::Exhausted(defect.category))?;
            push_decl(&mut unit.pous[idx], &name, "BOOL");
        }
        Category::TypeMismatch => {
            let name = fresh(unit, &format!("tm_{n}"));
            push_decl(&mut unit.pous[idx], &name, "INT");
            push_stmt(
                &mut unit.pous[idx],
                assign(&name, Expression::literal(LiteralKind::Bool, "TRUE")),
            );
        }
        Category::DisallowedInstruction => {
            let callee = ["MPS", "MRD", "MPP", "LD", "ANB", "ORB", "INV"]
                .into_iter()
                .find(|c| profile.is_disallowed(c))
                .ok_or(InjectError::Exhausted(defect.category))?;
            push_stmt(
                &mut unit.pous[idx],
                Statement::new(StatementKind::FunctionCall {
                    callee: callee.to_string(),
                    callee_span: SourceSpan::default(),
                    args: vec![CallArg {
                        name: None,
                        value: Expression::literal(LiteralKind::Bool, "TRUE"),
                        span: SourceSpan::default(),
                    }],
                }),
            );
        }
        Category::UnusedFunctionBlock => {
            let fb = profile
                .fb_catalog
                .function_blocks()
                .next()
                .map(|s| s.name.clone())
                .ok_or(InjectError::Exhausted(defect.category))?;
            let name = fresh(unit, &format!("unusedTimer_{n}"));
            push_decl(&mut unit.pous[idx], &name, &fb);
        }
        Category::UnknownDatatype => {
            let name = fresh(unit, &format!("ud_{n}"));
            let ty = ["FLOAT32", "BYTE_ARRAY", "UINT64"]
                .into_iter()
                .find(|t| !profile.allowed_datatypes.contains(*t) && profile.fb_catalog.get(t).is_none())
                .ok_or(InjectError::Exhausted(defect.category))?;
            push_decl(&mut unit.pous[idx], &name, ty);
        }
        Category::DuplicateDeclaration => {
            let name = fresh(unit, &format!("dup_{n}"));
            push_decl(&mut unit.pous[idx], &name, "INT");
            push_decl(&mut unit.pous[idx], &name, "INT");
        }
        Category::StructureViolation => {
            let name = fresh(unit, &format!("inParam_{n}"));
            let kind = [VarBlockKind::VarInput, VarBlockKind::VarOutput, VarBlockKind::VarInOut]
                .into_iter()
                .find(|k| !profile.allows_block(PouKind::Program, *k))
                .ok_or(InjectError::Exhausted(defect.category))?;
            unit.pous[idx].var_blocks.push(VarBlock {
                kind,
                decls: vec![decl(&name, "INT")],
                span: SourceSpan::default(),
            });
        }
        Category::IdentifierRule => {
            let name = short_candidates(profile)
                .find(|w| !is_declared(unit, w))
                .ok_or(InjectError::Exhausted(defect.category))?;
            push_decl(&mut unit.pous[idx], &name, "INT");
        }
    }
    Ok(())
}

/// A seeded defect program and the clean program it was derived from.
#[derive(Clone, Debug)]
pub struct DefectCase {
    pub source_name: String,
    pub clean: String,
    pub defective: String,
    pub category: Category,
}

/// Builds `per_category` cases for every category, rotating through the
/// bundled corpus. With 20 per category this is the 200-program suite.
pub fn defect_corpus(per_category: usize, profile: &DialectProfile) -> Result<Vec<DefectCase>, InjectError> {
    let corpus = crate::assets::CORPUS;
    let mut cases = Vec::with_capacity(per_category * Category::ALL.len());
    for (ci, &category) in Category::ALL.iter().enumerate() {
        for i in 0..per_category {
            let (name, clean) = corpus[(ci * 7 + i) % corpus.len()];
            let defective = inject_source(clean, &[category], profile)?;
            cases.push(DefectCase {
                source_name: name.to_string(),
                clean: clean.to_string(),
                defective,
                category,
            });
        }
    }
    Ok(cases)
}

/// Reserved words that still lex as plain identifiers and pass the length rule.
fn reserved_candidates(profile: &DialectProfile) -> impl Iterator<Item = String> + '_ {
    profile
        .reserved_words
        .iter()
        .filter(move |w| is_identifier(w) && !is_keyword(w) && w.len() >= profile.identifier_rules.min_length)
        .cloned()
}

/// Names that break only the identifier rules.
fn short_candidates(profile: &DialectProfile) -> impl Iterator<Item = String> + '_ {
    let short = ('a'..='z').map(|c| c.to_string());
    let forbidden = profile
        .identifier_rules
        .forbidden_names
        .iter()
        .map(|n| n.to_ascii_lowercase());
    let min = profile.identifier_rules.min_length;
    let short: Vec<String> = if min > 1 { short.collect() } else { Vec::new() };
    short
        .into_iter()
        .chain(forbidden)
        .filter(move |w| !profile.is_reserved(w) && !is_keyword(w) && profile.fb_catalog.get(w).is_none())
}

fn is_declared(unit: &CompilationUnit, name: &str) -> bool {
    unit.pous
        .iter()
        .any(|p| p.name.eq_ignore_ascii_case(name) || p.decls().any(|(_, d)| d.name.eq_ignore_ascii_case(name)))
}

fn fresh(unit: &CompilationUnit, base: &str) -> String {
    let mut name = base.to_string();
    let mut k = 0;
    while is_declared(unit, &name) {
        k += 1;
        name = format!("{base}_{k}");
    }
    name
}

fn decl(name: &str, ty: &str) -> VarDecl {
    VarDecl {
        name: name.to_string(),
        data_type: DataTypeRef::named(ty),
        initializer: None,
        span: SourceSpan::default(),
    }
}

fn push_decl(pou: &mut Pou, name: &str, ty: &str) {
    let d = decl(name, ty);
    match pou.var_blocks.iter_mut().find(|b| b.kind == VarBlockKind::Var) {
        Some(b) => b.decls.push(d),
        None => pou.var_blocks.insert(
            0,
            VarBlock {
                kind: VarBlockKind::Var,
                decls: vec![d],
                span: SourceSpan::default(),
            },
        ),
    }
}

fn push_stmt(pou: &mut Pou, s: Statement) {
    pou.body.push(s);
}

fn int_lit(text: &str) -> Expression {
    Expression::literal(LiteralKind::Int, text)
}

fn assign(name: &str, value: Expression) -> Statement {
    Statement::new(StatementKind::Assignment {
        target: VariableRef {
            name: name.to_string(),
            indices: Vec::new(),
            member: None,
            span: SourceSpan::default(),
        },
        value,
    })
}
