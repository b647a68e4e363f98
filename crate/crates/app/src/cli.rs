//! `svc` command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use searchsvc_core::codec;
use searchsvc_core::klm::{self, KlmScenario, OperatorTable, Seconds};
use searchsvc_core::visualize::RenderOptions;
use searchsvc_core::{validate_spec, RequestTemplate, ServiceSpec, StrategyVariant};

use crate::config::{FileConfig, Overrides, Settings};
use crate::error::AppError;
use crate::ops::{self, AppContext, DetectRequest, SearchRequest};
use crate::output;

#[derive(Debug, Parser)]
#[command(name = "svc", version, about = "Define, run and evaluate search services")]
pub struct Cli {
    /// Directory holding `<id>.svcspec.json` files.
    #[arg(long, env = "SVC_STORE_DIR", global = true)]
    pub store_dir: Option<PathBuf>,
    /// Optional TOML settings file.
    #[arg(long, env = "SVC_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    /// Port of the HTTP API.
    #[arg(long, env = "SVC_PORT", global = true)]
    pub port: Option<u16>,
    /// Port of the local fixture engines.
    #[arg(long, env = "SVC_FIXTURE_PORT", global = true)]
    pub fixture_port: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List stored services.
    List,
    /// Print a service as canonical JSON.
    Show { service: String },
    /// Validate a stored service or a spec file.
    Validate { target: String },
    /// Import services from a bundle file.
    Import { bundle: PathBuf },
    /// Export services (all when none are named) as a bundle.
    Export {
        ids: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Detect the execution strategy of a service and store it.
    Detect(DetectArgs),
    /// Run a search.
    Search(SearchArgs),
    /// List available visualizers.
    Visualizers,
    /// Keystroke-Level Model estimates.
    #[command(subcommand)]
    Klm(KlmCommand),
    /// Serve the HTTP API.
    Serve,
    /// Local fixture engines.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Stored service id or path to a spec file.
    pub service: String,
    /// Two different probe queries.
    #[arg(long, num_args = 2, value_names = ["A", "B"], required = true)]
    pub probes: Vec<String>,
    /// JSON file with recorded request templates to try as well.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Stored service id or path to a spec file.
    pub service: String,
    pub keywords: String,
    /// Activate a filter by name (repeatable).
    #[arg(long = "filter")]
    pub filters: Vec<String>,
    /// Ordering name.
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub page: u32,
    /// Fetch each result's target page for in-target properties.
    #[arg(long)]
    pub enrich: bool,
    /// Visualizer id (default: table).
    #[arg(long)]
    pub viz: Option<String>,
    /// Visualizer option as name=value (repeatable).
    #[arg(long = "viz-opt")]
    pub viz_opts: Vec<String>,
    /// Print the result set as JSON.
    #[arg(long)]
    pub json: bool,
    /// Print the first request instead of running the search.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum KlmCommand {
    /// Estimate the execution time of scenario files.
    Estimate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Override an operator time, e.g. K=0.28 (repeatable).
        #[arg(long = "operator")]
        operators: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Compare two scenarios step by step.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long = "operator")]
        operators: Vec<String>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum FixturesCommand {
    /// Run the fixture engines until interrupted.
    Serve,
    /// Store ready-to-run services for the fixture engines.
    Install,
}

/// What a finished command prints and how it exits.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn out(stdout: String) -> Self {
        Self {
            stdout,
            ..Self::default()
        }
    }
}

fn settings(cli: &Cli) -> Result<Settings, AppError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    Ok(Settings::resolve(
        Overrides {
            store_dir: cli.store_dir.clone(),
            port: cli.port,
            fixture_port: cli.fixture_port,
        },
        &file,
    ))
}

fn read(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path)
        .map_err(|e| AppError::BadRequest(format!("cannot read {}: {e}", path.display())))
}

/// A stored id, or a spec file when `target` names an existing file.
fn resolve(ctx: &AppContext, target: &str) -> Result<ServiceSpec, AppError> {
    let path = Path::new(target);
    if path.is_file() {
        Ok(codec::deserialize(&read(path)?)?)
    } else {
        ctx.spec(target)
    }
}

fn operator_table(overrides: &[String]) -> Result<OperatorTable, AppError> {
    let mut table = OperatorTable::default();
    for o in overrides {
        let (symbol, value) = o
            .split_once('=')
            .ok_or_else(|| AppError::BadRequest(format!("expected OPERATOR=SECONDS, got {o:?}")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| AppError::BadRequest(format!("{value:?} is not a number")))?;
        table = table.with(symbol, Seconds::from_decimal(value)?)?;
    }
    Ok(table)
}

fn scenario(path: &Path) -> Result<KlmScenario, AppError> {
    KlmScenario::from_json(&read(path)?)
        .map_err(|e| AppError::Invalid(format!("{}: {e}", path.display())))
}

pub async fn run(cli: Cli) -> Result<Outcome, AppError> {
    let settings = settings(&cli)?;
    match cli.command {
        Command::Klm(cmd) => klm_command(cmd),
        Command::Fixtures(FixturesCommand::Serve) => {
            let listener = searchsvc_fixtures::server::bind(settings.fixture_port)
                .map_err(|e| AppError::Io(e.to_string()))?;
            eprintln!("fixture engines on {}", settings.fixture_base());
            searchsvc_fixtures::server::serve(listener, Default::default())
                .await
                .map_err(|e| AppError::Io(e.to_string()))?;
            Ok(Outcome::default())
        }
        command => {
            let ctx = AppContext::from_settings(&settings)?;
            let mut outcome = store_command(&ctx, &settings, command).await?;
            for p in ctx.store.problems() {
                outcome
                    .stderr
                    .push_str(&format!("skipped {}: {}\n", p.file.display(), p.message));
            }
            Ok(outcome)
        }
    }
}

fn klm_command(cmd: KlmCommand) -> Result<Outcome, AppError> {
    match cmd {
        KlmCommand::Estimate {
            scenarios,
            operators,
            json,
        } => {
            let table = operator_table(&operators)?;
            let estimates = scenarios
                .iter()
                .map(|p| ops::estimate(&scenario(p)?, &table))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Outcome::out(if json {
                output::json(&estimates)
            } else {
                estimates
                    .iter()
                    .map(output::estimate)
                    .collect::<Vec<_>>()
                    .join("\n")
            }))
        }
        KlmCommand::Compare {
            a,
            b,
            operators,
            json,
        } => {
            let table = operator_table(&operators)?;
            let (sa, sb) = (scenario(&a)?, scenario(&b)?);
            let comparison = klm::compare(&sa, &sb, &table)?;
            Ok(Outcome::out(if json {
                output::json(&comparison)
            } else {
                output::comparison(&sa.name, &sb.name, &comparison)
            }))
        }
    }
}

async fn store_command(
    ctx: &AppContext,
    settings: &Settings,
    command: Command,
) -> Result<Outcome, AppError> {
    match command {
        Command::List => {
            let mut out = String::new();
            for s in ctx.store.list() {
                let strategy = s.strategy.as_ref().map_or("(no strategy)", |st| st.variant.name());
                out.push_str(&format!("{}\t{}\t{}\n", s.id, s.name, strategy));
            }
            Ok(Outcome::out(out))
        }
        Command::Show { service } => Ok(Outcome::out(codec::serialize(&resolve(ctx, &service)?))),
        Command::Validate { target } => {
            let spec = match resolve(ctx, &target) {
                Ok(s) => s,
                Err(AppError::Invalid(message)) => {
                    return Ok(Outcome {
                        stdout: format!("error: {message}\n"),
                        code: 1,
                        ..Outcome::default()
                    })
                }
                Err(e) => return Err(e),
            };
            let report = validate_spec(&spec);
            let mut stdout = report.summary();
            if !stdout.is_empty() {
                stdout.push('\n');
            }
            stdout.push_str(if report.is_valid() { "valid\n" } else { "invalid\n" });
            Ok(Outcome {
                stdout,
                code: if report.is_valid() { 0 } else { 1 },
                ..Outcome::default()
            })
        }
        Command::Import { bundle } => {
            let report = ctx.store.import_bundle(&read(&bundle)?)?;
            let mut out = Outcome::default();
            for s in &report.imported {
                out.stdout.push_str(&format!("imported {}\n", s.id));
            }
            for r in &report.rejected {
                out.stderr.push_str(&format!(
                    "rejected entry {} ({}): {}\n",
                    r.index,
                    r.id.as_deref().unwrap_or("no id"),
                    r.reason
                ));
            }
            if report.imported.is_empty() && !report.rejected.is_empty() {
                out.code = 1;
            }
            Ok(out)
        }
        Command::Export { ids, output } => {
            let text = ctx.store.export_bundle(&ids)?;
            match output {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|e| AppError::Io(e.to_string()))?;
                    Ok(Outcome::default())
                }
                None => Ok(Outcome::out(text)),
            }
        }
        Command::Detect(args) => {
            let spec = resolve(ctx, &args.service)?;
            let recorded_templates: Vec<RequestTemplate> = match &args.templates {
                Some(p) => serde_json::from_str(&read(p)?)
                    .map_err(|e| AppError::BadRequest(format!("{}: {e}", p.display())))?,
                None => Vec::new(),
            };
            let request = DetectRequest {
                probe_a: args.probes[0].clone(),
                probe_b: args.probes[1].clone(),
                recorded_templates,
            };
            let (spec, strategy) = ctx.detect(spec, &request).await?;
            if args.json {
                return Ok(Outcome::out(output::json(&strategy)));
            }
            let mut out = format!("{}: {}\n", spec.id, strategy.variant.name());
            if let Some(t) = &strategy.request_template {
                out.push_str(&format!("  {} {}\n", t.method, t.url_template));
                for (k, v) in &t.static_params {
                    out.push_str(&format!("  param {k} = {v}\n"));
                }
            }
            Ok(Outcome::out(out))
        }
        Command::Search(args) => search(ctx, args).await,
        Command::Visualizers => {
            let mut out = String::new();
            for d in ctx.visualizers.list() {
                let options: Vec<&str> = d.options_schema.iter().map(|o| o.option_name.as_str()).collect();
                out.push_str(&format!("{}\t{}\t[{}]\n", d.id, d.display_name, options.join(", ")));
            }
            Ok(Outcome::out(out))
        }
        Command::Serve => {
            let listener = tokio::net::TcpListener::bind(("127.0.0.1", settings.port))
                .await
                .map_err(|e| AppError::Io(format!("cannot bind port {}: {e}", settings.port)))?;
            eprintln!("API on http://127.0.0.1:{}/", settings.port);
            let ctx = Arc::new(AppContext::from_settings(settings)?);
            axum::serve(listener, crate::api::router(ctx))
                .await
                .map_err(|e| AppError::Io(e.to_string()))?;
            Ok(Outcome::default())
        }
        Command::Fixtures(FixturesCommand::Install) => {
            let mut out = String::new();
            for spec in searchsvc_fixtures::specs::installed(&settings.fixture_base()) {
                ctx.store.save(&spec)?;
                out.push_str(&format!("installed {}\n", spec.id));
            }
            Ok(Outcome::out(out))
        }
        Command::Klm(_) | Command::Fixtures(FixturesCommand::Serve) => {
            unreachable!("handled before the store is opened")
        }
    }
}

async fn search(ctx: &AppContext, args: SearchArgs) -> Result<Outcome, AppError> {
    let spec = resolve(ctx, &args.service)?;
    let request = SearchRequest {
        keywords: args.keywords,
        filters: args.filters,
        ordering: args.order,
        page: args.page,
        enrich: args.enrich,
    };
    if args.dry_run {
        let text = match ctx.plan(&spec, &request).await? {
            Some(plan) if args.json => output::json(&plan),
            Some(plan) => plan.to_string(),
            None => match spec.strategy.as_ref().map(|s| &s.variant) {
                Some(StrategyVariant::ApiBased { provider_id }) => {
                    format!("provider {provider_id}\n")
                }
                _ => String::new(),
            },
        };
        return Ok(Outcome::out(text));
    }
    let mut options = RenderOptions::new();
    for o in &args.viz_opts {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| AppError::BadRequest(format!("expected NAME=VALUE, got {o:?}")))?;
        options.insert(k.to_string(), v.to_string());
    }
    let results = ctx.search(&spec, &request).await?;
    let mut out = Outcome::default();
    for d in &results.diagnostics {
        out.stderr.push_str(&format!("note: {d}\n"));
    }
    if args.json {
        out.stdout = output::json(&results);
        return Ok(out);
    }
    let model = ctx.render(&results, args.viz.as_deref(), &options)?;
    out.stdout = output::presentation(&model);
    let p = results.page;
    out.stdout.push_str(&format!(
        "page {}{}{}\n",
        p.page_index,
        if p.has_prev { ", previous available" } else { "" },
        if p.has_next { ", next available" } else { "" },
    ));
    Ok(out)
}
