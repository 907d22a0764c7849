use stforge_core::assets::{CANONICAL_EXAMPLE, CORPUS};
use stforge_core::dialect::{parse_source, pretty_print};
use stforge_core::validator::*;

fn compiler() -> InternalCompiler {
    InternalCompiler::new(DialectProfile::default_profile())
}

#[test]
fn canonical_example_is_clean() {
    let r = compiler().compile(CANONICAL_EXAMPLE, &CompileOptions::default());
    assert!(r.is_success(), "{:?}", r.diagnostics);
    assert!(r.diagnostics.is_empty());
}

#[test]
fn canonical_example_has_required_idioms() {
    let upper = CANONICAL_EXAMPLE.to_ascii_uppercase();
    assert!(upper.contains(": TON;"));
    assert!(upper.contains(": R_TRIG;"));
    assert!(upper.contains("CASE "));
}

#[test]
fn every_corpus_program_is_clean() {
    assert!(CORPUS.len() >= 30);
    let c = compiler();
    for (name, src) in CORPUS {
        let r = c.compile(src, &CompileOptions::default());
        assert!(r.diagnostics.is_empty(), "{name}: {:?}", r.diagnostics);
    }
}

#[test]
fn pretty_printed_corpus_stays_clean() {
    let c = compiler();
    for (name, src) in CORPUS {
        let printed = pretty_print(&parse_source(src).unwrap());
        assert!(c.compile(&printed, &CompileOptions::default()).is_success(), "{name}");
    }
}

#[test]
fn defect_corpus_detection_is_exact() {
    let profile = DialectProfile::default_profile();
    let c = compiler();
    let cases = defect_corpus(20, &profile).unwrap();
    assert_eq!(cases.len(), 200);
    for case in &cases {
        let r = c.compile(&case.defective, &CompileOptions::default());
        let cats: Vec<_> = r.errors().map(|d| d.category).collect();
        assert_eq!(
            cats,
            vec![case.category],
            "{} ({})\n{}",
            case.source_name,
            case.category,
            case.defective
        );
        assert!(c.compile(&case.clean, &CompileOptions::default()).is_success());
    }
}

#[test]
fn removing_the_defect_restores_success() {
    let profile = DialectProfile::default_profile();
    let c = compiler();
    for cat in Category::ALL {
        let broken = inject_source(CANONICAL_EXAMPLE, &[cat], &profile).unwrap();
        assert!(!c.compile(&broken, &CompileOptions::default()).is_success());
        let fixed = inject_source(CANONICAL_EXAMPLE, &[], &profile).unwrap();
        assert!(c.compile(&fixed, &CompileOptions::default()).is_success());
    }
}

#[test]
fn diagnostics_are_deterministic_and_sorted() {
    let profile = DialectProfile::default_profile();
    let all = inject_source(CANONICAL_EXAMPLE, &Category::ALL[..5], &profile).unwrap();
    let c = compiler();
    let a = c.compile(&all, &CompileOptions::default());
    let b = c.compile(&all, &CompileOptions::default());
    assert_eq!(a.diagnostics, b.diagnostics);
    let keys: Vec<_> = a.diagnostics.iter().map(|d| (d.span.start(), d.code.clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn json_lines_carry_required_fields() {
    let profile = DialectProfile::default_profile();
    let src = inject_source(CANONICAL_EXAMPLE, &[Category::TypeMismatch], &profile).unwrap();
    let r = compiler().compile(&src, &CompileOptions::default());
    let line = to_json_lines(&r.diagnostics);
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    for key in ["code", "category", "severity", "span", "message"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}
