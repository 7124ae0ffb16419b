//! Command-line interface: stage subcommands plus the full `run` pipeline.
//!
//! Exit codes: 0 on success, 1 when some pages or models failed, 2 for
//! configuration/usage errors.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::metrics::{emit_report, ReportFormat};
use crate::workspace::{
    active_models, page_id_for, NullProgress, Pipeline, PipelineConfig, PipelineError, Progress,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser)]
#[command(
    name = "domremedy",
    version,
    about = "DOM-level web performance remediation pipeline",
    long_about = "Parse a page's DOM, chunk it under a token budget, submit chunks plus \
failing performance audits to model backends, reassemble, re-audit, and report \
audit-incidence and structural-change metrics."
)]
pub struct Cli {
    /// TOML config file; flags below override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Workspace directory holding all artifacts.
    #[arg(long, global = true, default_value = "workspace")]
    pub workspace: PathBuf,

    /// Restrict to these model ids (repeatable).
    #[arg(long = "model", global = true)]
    pub models: Vec<String>,

    /// Seed for reproducible runs (chunk ids, pinned timestamps).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Re-run stages even when their artifacts exist.
    #[arg(long, global = true)]
    pub force: bool,

    /// Emit machine-readable progress (line-delimited JSON) on stderr.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Retrieve pages (stage 1) into the workspace.
    Fetch {
        /// URLs or local file paths; defaults to the config's pages.
        sources: Vec<String>,
    },
    /// Split fetched pages into token-budgeted chunks (stage 2).
    Chunk,
    /// Audit original pages (stage 3).
    Audit,
    /// Run chunks through model backends (stage 4).
    Remediate,
    /// Splice modified chunks into complete pages (stage 5).
    Reassemble,
    /// Chunk + reassemble each page unmodified and check equality.
    Verify,
    /// Audit reassembled pages (stage 6) and diff them against originals.
    Diff,
    /// Rebuild and print the consolidated report.
    Report {
        /// Output format: csv or markdown.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Run the whole pipeline end to end.
    Run {
        /// Print the stage plan without executing anything.
        #[arg(long)]
        dry_run: bool,
    },
}

struct TextProgress;

impl Progress for TextProgress {
    fn event(&self, stage: &str, page: &str, model: Option<&str>, detail: &str) {
        match model {
            Some(m) => eprintln!("[{stage}] {page} × {m}: {detail}"),
            None => eprintln!("[{stage}] {page}: {detail}"),
        }
    }
}

struct JsonProgress;

impl Progress for JsonProgress {
    fn event(&self, stage: &str, page: &str, model: Option<&str>, detail: &str) {
        let mut obj = serde_json::Map::new();
        obj.insert("stage".into(), stage.into());
        obj.insert("page".into(), page.into());
        if let Some(m) = model {
            obj.insert("model".into(), m.into());
        }
        obj.insert("detail".into(), detail.into());
        let line = serde_json::Value::Object(obj).to_string();
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "{line}");
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, String> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_toml_file(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if !cli.models.is_empty() {
        config.models = cli.models.clone();
    }
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    Ok(config)
}

/// Run the CLI; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    let text_progress = TextProgress;
    let json_progress = JsonProgress;
    let null_progress = NullProgress;
    let progress: &dyn Progress = if cli.json {
        &json_progress
    } else if matches!(cli.command, Command::Report { .. } | Command::Verify) {
        &null_progress
    } else {
        &text_progress
    };

    let pipeline = match Pipeline::new(&config, &cli.workspace, progress) {
        Ok(p) => p,
        Err(PipelineError::Config(e)) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    match &cli.command {
        Command::Fetch { sources } => {
            let pairs: Vec<(String, String)> = if sources.is_empty() {
                pipeline.page_ids()
            } else {
                sources
                    .iter()
                    .map(|s| (page_id_for(s), s.clone()))
                    .collect()
            };
            if pairs.is_empty() {
                eprintln!("error: no pages given (arguments or config)");
                return EXIT_CONFIG;
            }
            run_per_page(pairs, |page_id, source| {
                pipeline.stage_fetch(page_id, source, cli.force)
            })
        }
        Command::Chunk => for_config_pages(&pipeline, |page_id| {
            pipeline.stage_chunk(page_id, cli.force)
        }),
        Command::Audit => for_config_pages(&pipeline, |page_id| {
            pipeline.stage_audit_original(page_id, cli.force)
        }),
        Command::Remediate => for_page_models(&pipeline, &config, |page, model| {
            pipeline.stage_remediate(page, model, cli.force)
        }),
        Command::Reassemble => for_page_models(&pipeline, &config, |page, model| {
            pipeline.stage_reassemble(page, model, cli.force)
        }),
        Command::Diff => for_page_models(&pipeline, &config, |page, model| {
            pipeline
                .stage_audit_modified(page, model, cli.force)
                .and_then(|()| pipeline.stage_diff(page, model, cli.force))
        }),
        Command::Verify => {
            let mut all_ok = true;
            for (page_id, _) in pipeline.page_ids() {
                match pipeline.verify_page(&page_id) {
                    Ok((ok, ted, chunks)) => {
                        let ted_text = ted
                            .map(|t| t.to_string())
                            .unwrap_or_else(|| "unmeasured".into());
                        println!("page {page_id}: ok={ok} ted={ted_text} chunks={chunks}");
                        all_ok &= ok;
                    }
                    Err(e) => {
                        println!("page {page_id}: error {e}");
                        all_ok = false;
                    }
                }
            }
            if all_ok {
                EXIT_OK
            } else {
                EXIT_PARTIAL
            }
        }
        Command::Report { format } => {
            let Some(format) = ReportFormat::parse(format) else {
                eprintln!("error: unknown report format {format:?} (csv, markdown)");
                return EXIT_CONFIG;
            };
            match pipeline.build_report() {
                Ok(report) => {
                    let map = match &config.category_map {
                        Some(path) => match crate::audit::CategoryMap::load(path) {
                            Ok(m) => m,
                            Err(e) => {
                                eprintln!("error: {e}");
                                return EXIT_CONFIG;
                            }
                        },
                        None => crate::audit::builtin_category_map(),
                    };
                    print!("{}", emit_report(&report, &map, format));
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_PARTIAL
                }
            }
        }
        Command::Run { dry_run } => {
            if *dry_run {
                for line in pipeline.dry_run_plan() {
                    println!("{line}");
                }
                return EXIT_OK;
            }
            match pipeline.run(cli.force) {
                Ok(outcome) => {
                    if outcome.failures.is_empty() {
                        EXIT_OK
                    } else {
                        for f in &outcome.failures {
                            eprintln!(
                                "failed: {} {} {}: {}",
                                f.stage,
                                f.page_id,
                                f.model.as_deref().unwrap_or("-"),
                                f.error
                            );
                        }
                        EXIT_PARTIAL
                    }
                }
                Err(PipelineError::Config(e)) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_PARTIAL
                }
            }
        }
    }
}

fn run_per_page<F>(pairs: Vec<(String, String)>, step: F) -> i32
where
    F: Fn(&str, &str) -> Result<(), String>,
{
    let mut failures = 0;
    for (page_id, source) in &pairs {
        if let Err(e) = step(page_id, source) {
            eprintln!("failed: {page_id}: {e}");
            failures += 1;
        }
    }
    if failures == 0 {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}

fn for_config_pages<F>(pipeline: &Pipeline, step: F) -> i32
where
    F: Fn(&str) -> Result<(), String>,
{
    let mut failures = 0;
    for (page_id, _) in pipeline.page_ids() {
        if let Err(e) = step(&page_id) {
            eprintln!("failed: {page_id}: {e}");
            failures += 1;
        }
    }
    if failures == 0 {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}

fn for_page_models<F>(pipeline: &Pipeline, config: &PipelineConfig, step: F) -> i32
where
    F: Fn(&str, &str) -> Result<(), String>,
{
    let mut failures = 0;
    for (page_id, _) in pipeline.page_ids() {
        for model in active_models(config) {
            if let Err(e) = step(&page_id, &model) {
                eprintln!("failed: {page_id} × {model}: {e}");
                failures += 1;
            }
        }
    }
    if failures == 0 {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}
