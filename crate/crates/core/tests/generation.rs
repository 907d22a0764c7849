use proptest::prelude::*;

use stforge_core::backends::{parse_model_output, GeneratorConfig, StubGenerator, StubScript, TextGenerator};
use stforge_core::prompting::{build_generation_prompt, PromptOptions, Retrieved};
use stforge_core::validator::{CompileOptions, CompilerAdapter, DialectProfile, InternalCompiler};

fn run(config: &GeneratorConfig, query: &str) -> (String, Vec<String>) {
    let profile = DialectProfile::default_profile();
    let prompt = build_generation_prompt(query, &Retrieved::new(), &profile, &[], &PromptOptions::default()).unwrap();
    let mut g = StubGenerator::new(config.clone());
    let mut chunks = Vec::new();
    let out = g.generate(&prompt, &mut |c| chunks.push(c.to_string())).unwrap();
    (out.raw_text, chunks)
}

#[test]
fn stub_output_is_a_function_of_seed_and_request() {
    let config = GeneratorConfig::stub("s", StubScript::EmitCatalogAware, false).with_seed(3);
    let a = run(&config, "count bottles on a conveyor");
    assert_eq!(a, run(&config, "count bottles on a conveyor"));
    assert_eq!(a.0, a.1.concat());
}

#[test]
fn canonical_stub_code_compiles() {
    let (raw, _) = run(
        &GeneratorConfig::stub("c", StubScript::EmitCanonical, false),
        "anything",
    );
    let code = parse_model_output(&raw).code.expect("code block");
    let r = InternalCompiler::new(DialectProfile::default_profile()).compile(&code, &CompileOptions::default());
    assert!(r.is_success(), "{:?}", r.diagnostics);
}

#[test]
fn prose_stub_yields_no_code() {
    let (raw, _) = run(
        &GeneratorConfig::stub("p", StubScript::EmitProse, false),
        "explain timers",
    );
    assert_eq!(parse_model_output(&raw).code, None);
}

proptest! {
    #[test]
    fn parsing_never_panics_and_keeps_raw(raw in "(\\PC|\n|`){0,200}") {
        let out = parse_model_output(&raw);
        prop_assert_eq!(&out.raw_text, &raw);
        if let Some(code) = &out.code {
            prop_assert!(!code.trim().is_empty());
        }
    }

    #[test]
    fn fenced_code_is_recovered(body in "[A-Za-z0-9 :=;\n]{1,80}", prose in "[a-z .]{0,40}") {
        prop_assume!(!body.trim().is_empty());
        let raw = format!("{prose}\n```st\n{body}\n```\n");
        let out = parse_model_output(&raw);
        prop_assert_eq!(out.code.as_deref(), Some(body.trim()));
    }
}

#[test]
fn plain_requests_retrieve_the_matching_blocks() {
    use stforge_core::knowledge::{seed_index, HashingEmbedder, KnowledgeIndex, Segment};
    let index = KnowledgeIndex::in_memory(Box::new(HashingEmbedder::default()));
    seed_index(&index).unwrap();
    let top = |q: &str, n: usize| -> Vec<String> {
        index
            .search(q, Some(Segment::FunctionBlocks), n)
            .unwrap()
            .iter()
            .filter_map(|h| h.doc.fb_name().map(str::to_string))
            .collect()
    };
    let counters = top("count parts on a conveyor with a counter", 2);
    assert!(
        counters.contains(&"CTU".to_string()) && counters.contains(&"CTD".to_string()),
        "{counters:?}"
    );
    assert!(["TP", "TON", "TOF"].contains(&top("blink a lamp with a timer", 1)[0].as_str()));
}
