mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use archforge_core::bundled;
use archforge_core::explain::{
    default_objective, explain, render, ExplainError, ExplainOptions, ExplainOutcome, ExplainRequest, Renderer,
};
use archforge_core::io::{load_catalog_sources, load_query_source, parse, to_canonical, LoadError, Source};
use archforge_core::model::{Catalog, Query};
use archforge_core::synth::{check_design, synthesize, Design, SynthError, SynthOptions, SynthOutcome};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const OK: u8 = 0;
const DOMAIN: u8 = 1;
const USAGE: u8 = 2;
const TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(name = "archforge", version, about = "Synthesize and explain networked-system architectures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate catalogs (and optionally a query).
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        query: Option<String>,
    },
    /// Find the optimal design for a query.
    Synthesize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solve: Solve,
        #[arg(short, long)]
        query: String,
    },
    /// Check a design document against catalogs and a query.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        query: String,
        #[arg(long)]
        design: PathBuf,
    },
    /// Explain why a preferred system was not chosen.
    Explain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solve: Solve,
        #[arg(short, long)]
        query: String,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        workload: String,
        #[arg(long)]
        role: String,
        #[arg(long)]
        prefer: String,
        /// Ordering to consult; defaults to the first workload objective
        /// that ranks the preferred system higher.
        #[arg(long)]
        objective: Option<String>,
        /// Role or device allowed to change (repeatable).
        #[arg(long = "flex")]
        flex: Vec<String>,
        /// Render through the configured summarizer endpoint.
        #[arg(long)]
        summarizer: bool,
    },
    /// Inspect catalogs.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// List bundled documents, or the contents of the given catalogs.
    List {
        #[command(flatten)]
        common: Common,
    },
    /// Show one system, hardware item, role or schema.
    Show {
        id: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Catalog file, or `bundled:<name>` (repeatable, merged in order).
    #[arg(short, long = "catalog")]
    catalog: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct Solve {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    budget_seconds: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(c) => c,
        Err(Failure(code, msg)) => {
            eprintln!("{msg}");
            code
        }
    };
    ExitCode::from(code)
}

struct Failure(u8, String);

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        let code = if matches!(e, LoadError::Invalid(_)) { DOMAIN } else { USAGE };
        Failure(code, e.to_string())
    }
}

fn source(spec: &str, query: bool) -> Result<Source, Failure> {
    if let Some(name) = spec.strip_prefix("bundled:") {
        let text = if query { bundled::query_source(name) } else { bundled::catalog_source(name) };
        return text
            .map(|t| Source::new(spec, t))
            .ok_or_else(|| Failure(USAGE, format!("no bundled document named {name}")));
    }
    Ok(Source::read(Path::new(spec))?)
}

fn catalog(common: &Common) -> Result<Catalog, Failure> {
    if common.catalog.is_empty() {
        return Err(Failure(USAGE, "at least one --catalog is required".into()));
    }
    let sources = common.catalog.iter().map(|c| source(c, false)).collect::<Result<Vec<_>, _>>()?;
    Ok(load_catalog_sources(&sources)?)
}

fn inputs(common: &Common, query: &str) -> Result<(Catalog, Query), Failure> {
    let c = catalog(common)?;
    let q = load_query_source(&c, &source(query, true)?)?;
    Ok((c, q))
}

/// Writes the canonical document to `--output` if given, then prints either
/// the document (json) or the text rendering.
fn emit<T: serde::Serialize>(common: &Common, doc: &T, text: impl FnOnce() -> String) -> Result<(), Failure> {
    let canonical = to_canonical(doc);
    if let Some(path) = &common.output {
        std::fs::write(path, &canonical).map_err(|e| Failure(USAGE, format!("cannot write {}: {e}", path.display())))?;
    }
    match common.format {
        Format::Json => print!("{canonical}"),
        Format::Text => print!("{}", text()),
    }
    Ok(())
}

fn run(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Validate { common, query } => validate(&common, query.as_deref()),
        Command::Synthesize { common, solve, query } => {
            let (c, q) = inputs(&common, &query)?;
            let opts = SynthOptions { seed: solve.seed, budget: Duration::from_secs(solve.budget_seconds) };
            match synthesize(&c, &q, &opts) {
                Ok(SynthOutcome::Design(d)) => {
                    emit(&common, &*d, || report::design(&d))?;
                    Ok(OK)
                }
                Ok(SynthOutcome::Infeasible(inf)) => {
                    emit(&common, &inf, || report::infeasible(&inf))?;
                    Ok(DOMAIN)
                }
                Err(SynthError::Timeout) => Err(Failure(TIMEOUT, SynthError::Timeout.to_string())),
                Err(e) => Err(Failure(DOMAIN, e.to_string())),
            }
        }
        Command::Check { common, query, design } => {
            let (c, q) = inputs(&common, &query)?;
            let d: Design = parse(&Source::read(&design)?).map_err(LoadError::Parse)?;
            let violations = check_design(&c, &q, &d);
            let doc = json!({ "violations": violations });
            emit(&common, &doc, || {
                let mut s: String = violations.iter().map(|v| format!("[{}] {}: {}\n", v.code, v.path, v.message)).collect();
                s.push_str(&format!("{} violations\n", violations.len()));
                s
            })?;
            Ok(if violations.is_empty() { OK } else { DOMAIN })
        }
        Command::Explain { common, solve, query, design, workload, role, prefer, objective, flex, summarizer } => {
            let (c, q) = inputs(&common, &query)?;
            let d: Design = parse(&Source::read(&design)?).map_err(LoadError::Parse)?;
            let objective = objective
                .or_else(|| default_objective(&c, &q, &d, &workload, &role, &prefer))
                .ok_or_else(|| Failure(USAGE, format!("no objective to consult for {role}; pass --objective")))?;
            let req = ExplainRequest { workload, role, preferred: prefer, objective, flexible: flex };
            let opts = ExplainOptions {
                seed: solve.seed,
                budget: Duration::from_secs(solve.budget_seconds),
                ..ExplainOptions::default()
            };
            let e = explain(&c, &q, &d, &req, &opts).map_err(|e| match e {
                ExplainError::Timeout => Failure(TIMEOUT, e.to_string()),
                ExplainError::InvalidRequest(_) => Failure(USAGE, e.to_string()),
                _ => Failure(DOMAIN, e.to_string()),
            })?;
            let renderer = if summarizer { Renderer::from_env() } else { Renderer::Template };
            emit(&common, &e, || {
                let r = render(&e, &renderer);
                if let Some(notice) = r.degraded {
                    eprintln!("{notice}");
                }
                r.text
            })?;
            Ok(if matches!(e.outcome, ExplainOutcome::Conflict { .. }) { DOMAIN } else { OK })
        }
        Command::Catalog { action: CatalogAction::List { common } } => {
            if common.catalog.is_empty() {
                let names = |xs: &[(&str, &str)]| xs.iter().map(|(n, _)| format!("bundled:{n}")).collect::<Vec<_>>();
                let doc = json!({ "catalogs": names(bundled::CATALOGS), "queries": names(bundled::QUERIES) });
                emit(&common, &doc, || {
                    let mut s = String::from("** Bundled catalogs **\n");
                    names(bundled::CATALOGS).iter().for_each(|n| s.push_str(&format!("{n}\n")));
                    s.push_str("** Bundled queries **\n");
                    names(bundled::QUERIES).iter().for_each(|n| s.push_str(&format!("{n}\n")));
                    s
                })?;
                return Ok(OK);
            }
            let c = catalog(&common)?;
            let doc = json!({
                "systems": c.systems.iter().map(|s| &s.id).collect::<Vec<_>>(),
                "hardware": c.hardware.iter().map(|h| &h.id).collect::<Vec<_>>(),
                "roles": c.roles.iter().map(|r| &r.id).collect::<Vec<_>>(),
                "orderings": c.orderings,
            });
            emit(&common, &doc, || report::catalog_listing(&c))?;
            Ok(OK)
        }
        Command::Catalog { action: CatalogAction::Show { id, common } } => {
            let c = catalog(&common)?;
            let doc = if let Some(s) = c.system(&id) {
                serde_json::to_value(s)
            } else if let Some(h) = c.hardware(&id) {
                serde_json::to_value(h)
            } else if let Some(r) = c.role(&id) {
                serde_json::to_value(r)
            } else if let Some(s) = c.schema(&id) {
                serde_json::to_value(s)
            } else {
                return Err(Failure(DOMAIN, format!("nothing named {id} in the catalog")));
            }
            .expect("catalog entries serialize");
            // Entries are documents in their own right; text and json agree.
            emit(&common, &doc, || to_canonical(&doc))?;
            Ok(OK)
        }
    }
}

fn validate(common: &Common, query: Option<&str>) -> Result<u8, Failure> {
    let sources = common.catalog.iter().map(|c| source(c, false)).collect::<Result<Vec<_>, _>>()?;
    let mut diags = Vec::new();
    let catalog = match load_catalog_sources(&sources) {
        Ok(c) => Some(c),
        Err(LoadError::Invalid(d)) => {
            diags = d;
            None
        }
        Err(e) => return Err(e.into()),
    };
    if let (Some(c), Some(q)) = (&catalog, query) {
        match load_query_source(c, &source(q, true)?) {
            Ok(_) => {}
            Err(LoadError::Invalid(d)) => diags.extend(d),
            Err(e) => return Err(e.into()),
        }
    }
    let doc = json!({ "violations": diags });
    emit(common, &doc, || {
        let mut s: String = diags.iter().map(|d| format!("{d}\n")).collect();
        s.push_str(&format!("{} violations\n", diags.len()));
        s
    })?;
    Ok(if diags.is_empty() { OK } else { DOMAIN })
}
