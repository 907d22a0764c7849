use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use stforge_core::backends::{bundled_stub_configs, create_generator, parse_configs, GeneratorConfig};
use stforge_core::datagen::{
    bundled_flags, bundled_personas, curate_dataset, generate_queries, parse_flags, parse_personas, CurationOptions,
};
use stforge_core::evalkit::{bundled_queries, load_queries, records_to_jsonl, render_report, run_benchmark};
use stforge_core::knowledge::{
    augment_catalog, bundled_catalog, parse_catalog, seed_index, HashingEmbedder, KnowledgeIndex, Segment,
};
use stforge_core::orchestrator::{ChatSession, EventSink, Orchestrator, PathEvent, SessionSettings, SessionStore};
use stforge_core::validator::{
    load_profile, to_json_lines, CompileOptions, CompilerAdapter, DialectProfile, HttpCompilerAdapter, InternalCompiler,
};
use stforge_server::{router, AppState};

#[derive(Parser)]
#[command(name = "stforge", version, about = "Vendor-aware Structured Text assistant")]
struct Cli {
    /// Dialect profile document (TOML); defaults to the bundled profile.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Require every referenced variable to be a registered label.
    #[arg(long, global = true)]
    strict_labels: bool,
    /// Model path configurations (TOML `[[config]]` list).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for stub backends, datagen and benchmark runs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Holds the knowledge index and sessions.
    #[arg(long, global = true, env = "STFORGE_DATA_DIR", default_value = "stforge-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the catalog, dialect excerpts, and optional uploads into the index.
    Ingest {
        /// Replacement catalog (JSON lines).
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Rewrite catalog descriptions with the named model path first.
        #[arg(long)]
        augment_with: Option<String>,
        /// Extra reference documents for the auxiliary segment.
        #[arg(long = "upload")]
        uploads: Vec<PathBuf>,
    },
    /// Validate an ST file and print diagnostics.
    Compile {
        file: PathBuf,
        /// Print diagnostics as JSON lines.
        #[arg(long)]
        json: bool,
        /// Treat VAR blocks as externally registered labels and print the manifest.
        #[arg(long)]
        emit_labels: bool,
    },
    /// Answer one request with every model path (or one with --model).
    Chat {
        query: String,
        /// Use only this model path.
        #[arg(long)]
        model: Option<String>,
        /// Rewrite the request into a detailed specification first.
        #[arg(long)]
        expand: bool,
        /// Skip compilation.
        #[arg(long)]
        draft: bool,
    },
    /// Run the HTTP service.
    Serve {
        /// Listen address.
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// External compiler endpoint speaking the /compile schema.
        #[arg(long, env = "STFORGE_COMPILER_URL")]
        compiler_url: Option<String>,
    },
    /// Generate persona-driven queries and curate compiling training pairs.
    Datagen {
        /// Number of queries to synthesise.
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Persona list (TOML); bundled personas by default.
        #[arg(long)]
        personas_file: Option<PathBuf>,
        /// Capability flags (TOML); bundled flags by default.
        #[arg(long)]
        flags_file: Option<PathBuf>,
        /// Accepted pairs are written here as JSON lines.
        #[arg(long)]
        out: PathBuf,
        /// Model path label used for generation.
        #[arg(long)]
        model: Option<String>,
        /// Also keep programs that compiled only after repair.
        #[arg(long)]
        allow_repaired: bool,
    },
    /// Run the benchmark and write the Compiled/Repaired report.
    Bench {
        /// Query set (JSON lines); the bundled 100 queries by default.
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Comma-separated labels; all configured paths by default.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Markdown report path; stdout by default.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-cell records as JSON lines.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 8)]
        parallelism: usize,
    },
}

fn load_profile_arg(cli: &Cli) -> Result<DialectProfile> {
    let profile = match &cli.profile {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading profile {}", p.display()))?;
            load_profile(&text).with_context(|| format!("loading profile {}", p.display()))?
        }
        None => DialectProfile::default_profile(),
    };
    Ok(if cli.strict_labels {
        profile.with_strict_labels(true)
    } else {
        profile
    })
}

fn load_configs(cli: &Cli) -> Result<Vec<GeneratorConfig>> {
    match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            Ok(parse_configs(&text).with_context(|| format!("loading config {}", p.display()))?)
        }
        None => Ok(bundled_stub_configs()),
    }
}

fn open_index(data_dir: &Path) -> Result<KnowledgeIndex> {
    fs::create_dir_all(data_dir)?;
    let index = KnowledgeIndex::open(&data_dir.join("index.jsonl"), Box::new(HashingEmbedder::default()))?;
    if index.is_empty() {
        seed_index(&index)?;
    }
    Ok(index)
}

fn orchestrator(cli: &Cli, profile: DialectProfile, compiler: Arc<dyn CompilerAdapter>) -> Result<Orchestrator> {
    let index = open_index(&cli.data_dir)?;
    let configs = load_configs(cli)?;
    Ok(Orchestrator::new(profile, compiler, Arc::new(index), configs))
}

fn pick(configs: &[GeneratorConfig], label: &str) -> Result<GeneratorConfig> {
    configs
        .iter()
        .find(|c| c.label == label)
        .cloned()
        .with_context(|| format!("unknown model label `{label}`"))
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let profile = load_profile_arg(&cli)?;
    match &cli.command {
        Command::Ingest {
            catalog,
            augment_with,
            uploads,
        } => {
            let index = open_index(&cli.data_dir)?;
            let mut entries = match catalog {
                Some(p) => parse_catalog(&fs::read_to_string(p)?)?,
                None => bundled_catalog(),
            };
            if let Some(label) = augment_with {
                let config = pick(&load_configs(&cli)?, label)?;
                let mut g = create_generator(&config)?;
                let (augmented, failures) = augment_catalog(&entries, g.as_mut());
                for (name, e) in &failures {
                    tracing::warn!("augmentation of {name} failed: {e}");
                }
                entries = augmented;
            }
            let added = index.ingest_catalog(&entries)?;
            for p in uploads {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("upload");
                let ids = index.ingest_upload(name, &fs::read(p)?)?;
                println!("{name}: {} chunks", ids.len());
            }
            index.compact()?;
            println!("catalog entries added or updated: {added}");
            for s in Segment::ALL {
                println!("{s}: {}", index.count(s));
            }
        }
        Command::Compile {
            file,
            json,
            emit_labels,
        } => {
            let source = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            let compiler = InternalCompiler::new(profile);
            let options = CompileOptions::default();
            let (report, manifest) = if *emit_labels {
                compiler.compile_with_manifest(&source, &options)
            } else {
                (compiler.compile(&source, &options), None)
            };
            if *json {
                print!("{}", to_json_lines(&report.diagnostics));
            } else {
                for d in &report.diagnostics {
                    println!("{}:{}", file.display(), d.render());
                }
                println!("status: {:?} ({} diagnostics)", report.status, report.diagnostics.len());
            }
            if let Some(m) = manifest {
                println!("{}", serde_json::to_string_pretty(&m)?);
            }
            if !report.is_success() {
                std::process::exit(1);
            }
        }
        Command::Chat {
            query,
            model,
            expand,
            draft,
        } => {
            let compiler = Arc::new(InternalCompiler::new(profile.clone()));
            let orch = orchestrator(&cli, profile, compiler)?;
            let settings = SessionSettings {
                expansion: *expand,
                draft_mode: *draft,
                compile_enabled: true,
            };
            let mut session = ChatSession::new("cli", settings);
            let progress: EventSink = Arc::new(|e| {
                if let PathEvent::Compile { config_label, report } = e {
                    eprintln!("[{config_label}] attempt {}: {:?}", report.attempt, report.status);
                }
            });
            let results = match model {
                Some(label) => {
                    pick(&orch.configs, label)?;
                    session.selected_model = Some(label.clone());
                    vec![orch.answer_followup(query, &session, &progress)?]
                }
                None => orch.answer_initial(query, &session, &orch.configs, &progress),
            };
            for r in results {
                println!("=== {} : {:?}", r.config_label, r.final_status);
                match &r.output.code {
                    Some(code) => println!("{code}"),
                    None => println!("{}", r.output.raw_text),
                }
                if let Some(last) = r.reports.last() {
                    for d in &last.diagnostics {
                        println!("  {}", d.render());
                    }
                }
                if let Some(e) = &r.error {
                    println!("  error: {e}");
                }
            }
        }
        Command::Serve { addr, compiler_url } => {
            let compiler: Arc<dyn CompilerAdapter> = Arc::new(InternalCompiler::new(profile.clone()));
            let orch = orchestrator(&cli, profile, compiler)?;
            let store = SessionStore::open(cli.data_dir.join("sessions"))?;
            let mut state = AppState::new(orch, store);
            if let Some(url) = compiler_url {
                state = state.with_external_compiler(Arc::new(HttpCompilerAdapter::new(url)));
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr.as_str()).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, router(state)).await?;
                anyhow::Ok(())
            })?;
        }
        Command::Datagen {
            n,
            personas_file,
            flags_file,
            out,
            model,
            allow_repaired,
        } => {
            let personas = match personas_file {
                Some(p) => parse_personas(&fs::read_to_string(p)?)?,
                None => bundled_personas(),
            };
            let flags = match flags_file {
                Some(p) => parse_flags(&fs::read_to_string(p)?)?,
                None => bundled_flags(),
            };
            let compiler = Arc::new(InternalCompiler::new(profile.clone()));
            let orch = orchestrator(&cli, profile, compiler)?;
            let config = match model {
                Some(label) => pick(&orch.configs, label)?,
                None => orch.configs.first().cloned().context("no model paths configured")?,
            };
            let mut writer = create_generator(&config)?;
            let remote = config.kind == stforge_core::backends::BackendKind::RemoteChat;
            let specs = generate_queries(&personas, &flags, *n, cli.seed, remote.then_some(writer.as_mut()))?;
            let mut sink = std::io::BufWriter::new(fs::File::create(out)?);
            let summary = curate_dataset(
                &orch,
                &specs,
                &config,
                &mut sink,
                CurationOptions {
                    allow_repaired: *allow_repaired,
                },
            )?;
            sink.flush()?;
            println!("accepted: {}", summary.accepted);
            for (reason, count) in &summary.rejected {
                println!("rejected {reason:?}: {count}");
            }
        }
        Command::Bench {
            queries,
            models,
            out,
            records,
            parallelism,
        } => {
            let qs = match queries {
                Some(p) => load_queries(p)?,
                None => bundled_queries(),
            };
            let compiler = Arc::new(InternalCompiler::new(profile.clone()));
            let orch = orchestrator(&cli, profile, compiler)?;
            let configs = if models.is_empty() {
                orch.configs.clone()
            } else {
                stforge_core::evalkit::select_configs(&orch.configs, models)?
            };
            if configs.is_empty() {
                bail!("no model paths selected");
            }
            let recs = run_benchmark(&orch, &qs, &configs, cli.seed, *parallelism)?;
            let report = render_report(&recs);
            match out {
                Some(p) => fs::write(p, &report)?,
                None => print!("{report}"),
            }
            if let Some(p) = records {
                fs::write(p, records_to_jsonl(&recs))?;
            }
        }
    }
    Ok(())
}
