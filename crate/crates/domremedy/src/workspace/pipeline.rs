//! The six-stage pipeline: fetch, chunk, initial audit, model modification,
//! reassembly, and post-modification audit — plus diffing and reporting.
//!
//! Every stage persists its artifacts and is skipped on re-run when they
//! already exist (resume by artifact presence, no state database). Page and
//! page×model failures are isolated: they are logged into the outcome and
//! the run continues. The consolidated report is rebuilt from persisted
//! artifacts only, so a workspace replays offline.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use thiserror::Error;

use super::{
    page_id_for, write_atomic, AuditMode, BackendMode, PageMeta, PipelineConfig, WorkspaceLayout,
};
use crate::audit::{
    parse_auditor_json, run_audit, AuditReport, AuditRunConfig, AuditTarget, AuditorMode,
    CategoryMap, Variant,
};
use crate::chunk::{
    estimator_by_name, load_manifest, plan_chunks, reassemble, save_manifest, verify_roundtrip,
    Chunk, ChunkIdGen, ChunkManifest, TokenEstimator,
};
use crate::diff::{diff_trees, ChangeSet};
use crate::dom::{parse_html, serialize_document};
use crate::metrics::{
    category_rollup, emit_report, incidence_table, ChangeSummaryRow, ModelRunSummary, ReportFormat,
    RunReport,
};
use crate::remedy::{
    remediate_page, template_hash, HttpBackend, IdentityBackend, ModelBackend, RemedyOptions,
    ReplayBackend, IDENTITY_MODEL_ID,
};

/// Progress sink; the CLI renders events as text or line-delimited JSON.
pub trait Progress: Sync {
    fn event(&self, stage: &str, page: &str, model: Option<&str>, detail: &str);
}

/// Discards all events.
pub struct NullProgress;

impl Progress for NullProgress {
    fn event(&self, _: &str, _: &str, _: Option<&str>, _: &str) {}
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One isolated failure; the run continued past it.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PageFailure {
    pub page_id: String,
    pub stage: String,
    pub model: Option<String>,
    pub error: String,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: RunReport,
    pub failures: Vec<PageFailure>,
}

/// Stage executor bound to one workspace and config.
pub struct Pipeline<'a> {
    pub config: &'a PipelineConfig,
    pub layout: WorkspaceLayout,
    progress: &'a dyn Progress,
    estimator: Box<dyn TokenEstimator>,
    category_map: CategoryMap,
    /// The external auditor is resource-hungry; one invocation at a time.
    audit_lock: Mutex<()>,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        config: &'a PipelineConfig,
        workspace: &Path,
        progress: &'a dyn Progress,
    ) -> Result<Pipeline<'a>, PipelineError> {
        if config.headroom == 0 || config.budget <= config.headroom {
            return Err(PipelineError::Config(format!(
                "budget {} must exceed headroom {}, both positive",
                config.budget, config.headroom
            )));
        }
        let estimator = estimator_by_name(&config.estimator).ok_or_else(|| {
            PipelineError::Config(format!("unknown estimator {:?}", config.estimator))
        })?;
        if config.audit_mode == AuditMode::Replay && config.audit_fixtures.is_none() {
            return Err(PipelineError::Config(
                "audit_mode = replay requires audit_fixtures".into(),
            ));
        }
        for model in active_models(config) {
            if model != IDENTITY_MODEL_ID
                && config.backend_mode == BackendMode::Live
                && !config.model_specs.iter().any(|s| s.id == model)
            {
                return Err(PipelineError::Config(format!(
                    "model {model:?} has no [[model]] spec and is not a built-in backend"
                )));
            }
        }
        let mut seen = std::collections::BTreeMap::new();
        for source in &config.pages {
            if let Some(other) = seen.insert(page_id_for(source), source) {
                return Err(PipelineError::Config(format!(
                    "pages {other:?} and {source:?} collide on workspace id {:?}",
                    page_id_for(source)
                )));
            }
        }
        let category_map = match &config.category_map {
            Some(path) => CategoryMap::load(path)?,
            None => crate::audit::builtin_category_map(),
        };
        Ok(Pipeline {
            config,
            layout: WorkspaceLayout::new(workspace),
            progress,
            estimator,
            category_map,
            audit_lock: Mutex::new(()),
        })
    }

    pub fn estimator(&self) -> &dyn TokenEstimator {
        self.estimator.as_ref()
    }

    /// (page_id, source) pairs in config order.
    pub fn page_ids(&self) -> Vec<(String, String)> {
        self.config
            .pages
            .iter()
            .map(|s| (page_id_for(s), s.clone()))
            .collect()
    }

    fn seed_for_page(&self, page_id: &str) -> Option<u64> {
        self.config.seed.map(|base| {
            let mut h = 0xcbf29ce484222325u64;
            for b in page_id.bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^ base
        })
    }

    fn audit_config(&self) -> AuditRunConfig {
        AuditRunConfig {
            auditor_path: self.config.auditor.clone(),
            timeout: std::time::Duration::from_secs(self.config.audit_timeout_secs),
            mode: match self.config.audit_mode {
                AuditMode::Live => AuditorMode::Live,
                AuditMode::Replay => {
                    AuditorMode::Replay(self.config.audit_fixtures.clone().expect("checked in new"))
                }
            },
        }
    }

    fn backend_for(&self, model: &str, page_id: &str) -> Result<Box<dyn ModelBackend>, String> {
        if model == IDENTITY_MODEL_ID {
            return Ok(Box::new(IdentityBackend::new()));
        }
        match self.config.backend_mode {
            BackendMode::Replay => {
                let dir = self.layout.transcripts_dir(page_id, model);
                ReplayBackend::from_transcript_dir(model, &dir)
                    .map(|b| Box::new(b) as Box<dyn ModelBackend>)
                    .map_err(|e| format!("cannot load transcripts from {}: {e}", dir.display()))
            }
            BackendMode::Live => {
                let spec = self
                    .config
                    .model_specs
                    .iter()
                    .find(|s| s.id == model)
                    .cloned()
                    .ok_or_else(|| format!("no [[model]] spec for {model}"))?;
                HttpBackend::new(spec)
                    .map(|b| Box::new(b) as Box<dyn ModelBackend>)
                    .map_err(|e| e.to_string())
            }
        }
    }

    /// Stage 1: retrieve the page and persist original.html + page.json.
    pub fn stage_fetch(&self, page_id: &str, source: &str, force: bool) -> Result<(), String> {
        let html_path = self.layout.original_html(page_id);
        if html_path.exists() && self.layout.page_meta(page_id).exists() && !force {
            self.progress
                .event("fetch", page_id, None, "skipped (artifact present)");
            return Ok(());
        }
        let fetched = super::fetch_page(source, self.config.now()).map_err(|e| e.to_string())?;
        let meta = PageMeta {
            page_id: page_id.to_owned(),
            source: source.to_owned(),
            final_url: fetched.final_url.clone(),
            fetched_at: fetched.fetched_at,
            warnings: fetched.document.warnings.clone(),
        };
        // The persisted original is the extracted DOM tree, settled to its
        // parse∘serialize fixed point so every downstream tree comparison
        // sees reparse-stable markup.
        let settled = crate::dom::normalize_document(fetched.document);
        write_atomic(&html_path, serialize_document(&settled).as_bytes())
            .map_err(|e| e.to_string())?;
        write_atomic(
            &self.layout.page_meta(page_id),
            serde_json::to_string_pretty(&meta)
                .expect("meta serialization")
                .as_bytes(),
        )
        .map_err(|e| e.to_string())?;
        self.progress.event(
            "fetch",
            page_id,
            None,
            &format!("fetched {}", fetched.final_url),
        );
        Ok(())
    }

    /// Stage 2: split the original DOM under the token budget.
    pub fn stage_chunk(&self, page_id: &str, force: bool) -> Result<(), String> {
        let dir = self.layout.chunks_dir(page_id);
        if dir.join("manifest.json").exists() && !force {
            self.progress
                .event("chunk", page_id, None, "skipped (artifact present)");
            return Ok(());
        }
        let html = std::fs::read(self.layout.original_html(page_id)).map_err(|e| e.to_string())?;
        let doc = parse_html(&html, None).map_err(|e| e.to_string())?;
        let mut ids = match self.seed_for_page(page_id) {
            Some(seed) => ChunkIdGen::from_seed(seed),
            None => ChunkIdGen::from_entropy(),
        };
        let manifest = plan_chunks(
            &doc,
            self.estimator.as_ref(),
            self.config.budget,
            self.config.headroom,
            &mut ids,
        )
        .map_err(|e| e.to_string())?;
        save_manifest(&manifest, &dir).map_err(|e| e.to_string())?;
        self.progress.event(
            "chunk",
            page_id,
            None,
            &format!("{} chunks", manifest.chunks.len()),
        );
        Ok(())
    }

    fn run_one_audit(
        &self,
        page_id: &str,
        variant: Variant,
        target_html: &Path,
        force: bool,
    ) -> Result<(), String> {
        let stem = variant.file_stem().to_owned();
        let raw_path = self.layout.audit_raw(page_id, &stem);
        if raw_path.exists() && self.layout.audit_parsed(page_id, &stem).exists() && !force {
            self.progress
                .event("audit", page_id, None, &format!("{stem}: skipped"));
            return Ok(());
        }
        let bundle = {
            let _serialized = self.audit_lock.lock().expect("audit lock");
            run_audit(
                &AuditTarget::File(target_html.to_path_buf()),
                page_id,
                variant,
                &self.audit_config(),
                self.config.now(),
            )
            .map_err(|e| e.to_string())?
        };
        write_atomic(&raw_path, &bundle.raw).map_err(|e| e.to_string())?;
        write_atomic(
            &self.layout.audit_parsed(page_id, &stem),
            serde_json::to_string_pretty(&bundle.report)
                .expect("report serialization")
                .as_bytes(),
        )
        .map_err(|e| e.to_string())?;
        self.progress.event(
            "audit",
            page_id,
            None,
            &format!("{stem}: {} audits", bundle.report.audits.len()),
        );
        Ok(())
    }

    /// Stage 3: audit the original page.
    pub fn stage_audit_original(&self, page_id: &str, force: bool) -> Result<(), String> {
        self.run_one_audit(
            page_id,
            Variant::Original,
            &self.layout.original_html(page_id),
            force,
        )
    }

    /// Stage 4: run every chunk through the model; persist transcripts,
    /// modified chunk files, and chunk results.
    pub fn stage_remediate(&self, page_id: &str, model: &str, force: bool) -> Result<(), String> {
        let results_path = self.layout.chunk_results(page_id, model);
        if results_path.exists() && !force {
            self.progress.event(
                "remediate",
                page_id,
                Some(model),
                "skipped (artifact present)",
            );
            return Ok(());
        }
        let manifest =
            load_manifest(&self.layout.chunks_dir(page_id)).map_err(|e| e.to_string())?;
        let audits = self.load_actionable(page_id)?;
        let backend = self.backend_for(model, page_id)?;
        let options = RemedyOptions {
            retries: 2,
            deterministic: self.config.seed.is_some(),
        };
        let out = remediate_page(
            &manifest,
            &audits,
            backend.as_ref(),
            self.estimator.as_ref(),
            &options,
        )
        .map_err(|e| e.to_string())?;

        // Skip rewriting transcripts when replaying from this workspace's own
        // recordings; they are the inputs.
        let writing_transcripts =
            !(self.config.backend_mode == BackendMode::Replay && model != IDENTITY_MODEL_ID);
        let tdir = self.layout.transcripts_dir(page_id, model);
        let cdir = self.layout.modified_chunks_dir(page_id, model);
        for (chunk, result) in manifest.chunks.iter().zip(&out.results) {
            let name = ChunkManifest::chunk_file_name(chunk);
            write_atomic(&cdir.join(&name), result.modified_html.as_bytes())
                .map_err(|e| e.to_string())?;
        }
        if writing_transcripts {
            for t in &out.transcripts {
                let name = format!("{}_{}.json", t.ordinal, t.chunk_id);
                write_atomic(
                    &tdir.join(name),
                    serde_json::to_string_pretty(t)
                        .expect("transcript serialization")
                        .as_bytes(),
                )
                .map_err(|e| e.to_string())?;
            }
        }
        write_atomic(
            &results_path,
            serde_json::to_string_pretty(&out.results)
                .expect("results serialization")
                .as_bytes(),
        )
        .map_err(|e| e.to_string())?;
        let modified = out
            .results
            .iter()
            .filter(|r| r.status == crate::remedy::ChunkStatus::Modified)
            .count();
        self.progress.event(
            "remediate",
            page_id,
            Some(model),
            &format!("{} chunks, {} modified", out.results.len(), modified),
        );
        Ok(())
    }

    fn load_actionable(&self, page_id: &str) -> Result<Vec<crate::audit::AuditRecord>, String> {
        let path = self.layout.audit_parsed(page_id, "original");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| format!("no original audit report at {}: {e}", path.display()))?;
        let report: AuditReport = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        Ok(crate::audit::filter_actionable(&report))
    }

    /// Stage 5: splice modified chunks back into a complete page.
    pub fn stage_reassemble(&self, page_id: &str, model: &str, force: bool) -> Result<(), String> {
        let out_path = self.layout.reassembled_html(page_id, model);
        if out_path.exists() && !force {
            self.progress.event(
                "reassemble",
                page_id,
                Some(model),
                "skipped (artifact present)",
            );
            return Ok(());
        }
        let manifest =
            load_manifest(&self.layout.chunks_dir(page_id)).map_err(|e| e.to_string())?;
        let cdir = self.layout.modified_chunks_dir(page_id, model);
        let mut chunks: Vec<Chunk> = Vec::with_capacity(manifest.chunks.len());
        for chunk in &manifest.chunks {
            let path = cdir.join(ChunkManifest::chunk_file_name(chunk));
            let html = std::fs::read_to_string(&path)
                .map_err(|e| format!("missing modified chunk {}: {e}", path.display()))?;
            chunks.push(Chunk {
                html,
                ..chunk.clone()
            });
        }
        let doc = reassemble(&manifest, &chunks).map_err(|e| e.to_string())?;
        write_atomic(&out_path, serialize_document(&doc).as_bytes()).map_err(|e| e.to_string())?;
        self.progress
            .event("reassemble", page_id, Some(model), "reassembled");
        Ok(())
    }

    /// Stage 6: audit the reassembled page.
    pub fn stage_audit_modified(
        &self,
        page_id: &str,
        model: &str,
        force: bool,
    ) -> Result<(), String> {
        self.run_one_audit(
            page_id,
            Variant::Modified(model.to_owned()),
            &self.layout.reassembled_html(page_id, model),
            force,
        )
    }

    /// Classify the structural differences original → modified.
    pub fn stage_diff(&self, page_id: &str, model: &str, force: bool) -> Result<(), String> {
        let out_path = self.layout.diff_json(page_id, model);
        if out_path.exists() && !force {
            self.progress
                .event("diff", page_id, Some(model), "skipped (artifact present)");
            return Ok(());
        }
        let original =
            std::fs::read(self.layout.original_html(page_id)).map_err(|e| e.to_string())?;
        let modified = std::fs::read(self.layout.reassembled_html(page_id, model))
            .map_err(|e| e.to_string())?;
        let original = parse_html(&original, None).map_err(|e| e.to_string())?;
        let modified = parse_html(&modified, None).map_err(|e| e.to_string())?;
        let mut cs = diff_trees(&original.root, &modified.root);
        cs.page_id = page_id.to_owned();
        cs.model_id = model.to_owned();
        write_atomic(
            &out_path,
            serde_json::to_string_pretty(&cs)
                .expect("changeset serialization")
                .as_bytes(),
        )
        .map_err(|e| e.to_string())?;
        self.progress.event(
            "diff",
            page_id,
            Some(model),
            &format!("{} changes", cs.changes.len()),
        );
        Ok(())
    }

    /// Roundtrip validation for one page: chunk, reassemble unmodified, and
    /// compare. Returns (ok, ted, chunk count).
    pub fn verify_page(&self, page_id: &str) -> Result<(bool, Option<u64>, usize), String> {
        let html = std::fs::read(self.layout.original_html(page_id)).map_err(|e| e.to_string())?;
        let doc = parse_html(&html, None).map_err(|e| e.to_string())?;
        let report = verify_roundtrip(
            &doc,
            self.estimator.as_ref(),
            self.config.budget,
            self.config.headroom,
        )
        .map_err(|e| e.to_string())?;
        Ok((report.ok, report.ted, report.chunk_count))
    }

    fn read_report(&self, page_id: &str, stem: &str) -> Option<AuditReport> {
        // Prefer the normalized form; fall back to parsing the raw report.
        if let Ok(text) = std::fs::read_to_string(self.layout.audit_parsed(page_id, stem)) {
            if let Ok(report) = serde_json::from_str(&text) {
                return Some(report);
            }
        }
        let raw = std::fs::read(self.layout.audit_raw(page_id, stem)).ok()?;
        let variant = if stem == "original" {
            Variant::Original
        } else {
            Variant::Modified(stem.to_owned())
        };
        parse_auditor_json(&raw, page_id, variant).ok()
    }

    fn read_changeset(&self, page_id: &str, model: &str) -> Option<ChangeSet> {
        let text = std::fs::read_to_string(self.layout.diff_json(page_id, model)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Build the consolidated report from persisted artifacts and write
    /// run_report.json plus CSV and Markdown renderings.
    pub fn build_report(&self) -> Result<RunReport, String> {
        let pages: Vec<String> = self.page_ids().into_iter().map(|(id, _)| id).collect();
        let models: Vec<String> = active_models(self.config);

        let originals: Vec<AuditReport> = pages
            .iter()
            .filter_map(|p| self.read_report(p, "original"))
            .collect();

        let mut per_model = BTreeMap::new();
        let mut auditor_version = String::new();
        for report in &originals {
            if !report.tool_version.is_empty() {
                auditor_version = report.tool_version.clone();
                break;
            }
        }
        for model in &models {
            let modified: Vec<AuditReport> = pages
                .iter()
                .filter_map(|p| self.read_report(p, model))
                .collect();
            let changesets: Vec<ChangeSet> = pages
                .iter()
                .filter_map(|p| self.read_changeset(p, model))
                .collect();
            if modified.is_empty() && changesets.is_empty() {
                continue;
            }
            let incidence = incidence_table(&originals, &modified, self.config.counting_mode);
            let categories =
                category_rollup(&incidence, &self.category_map, self.config.aggregation_mode);
            let changes = ChangeSummaryRow::from_changesets(&changesets);
            per_model.insert(
                model.clone(),
                ModelRunSummary {
                    incidence,
                    categories,
                    changes,
                },
            );
        }

        let mut tool_versions = BTreeMap::new();
        tool_versions.insert("domremedy".to_owned(), env!("CARGO_PKG_VERSION").to_owned());
        if !auditor_version.is_empty() {
            tool_versions.insert("auditor".to_owned(), auditor_version);
        }

        let report = RunReport {
            generated_at: self.config.now(),
            tool_versions,
            prompt_template_hash: template_hash(),
            counting_mode: self.config.counting_mode,
            aggregation_mode: self.config.aggregation_mode,
            budget: self.config.budget,
            headroom: self.config.headroom,
            estimator: self.config.estimator.clone(),
            seed: self.config.seed,
            pages,
            models,
            per_model,
        };

        write_atomic(
            &self.layout.run_report(),
            serde_json::to_string_pretty(&report)
                .expect("report serialization")
                .as_bytes(),
        )
        .map_err(|e| e.to_string())?;
        write_atomic(
            &self.layout.report_file("csv"),
            emit_report(&report, &self.category_map, ReportFormat::Csv).as_bytes(),
        )
        .map_err(|e| e.to_string())?;
        write_atomic(
            &self.layout.report_file("md"),
            emit_report(&report, &self.category_map, ReportFormat::Markdown).as_bytes(),
        )
        .map_err(|e| e.to_string())?;
        self.progress.event(
            "report",
            "-",
            None,
            "wrote run_report.json, report.csv, report.md",
        );
        Ok(report)
    }

    /// Everything for one page: stages 1–3 then 4–6 + diff per model.
    fn run_page(
        &self,
        page_id: &str,
        source: &str,
        force: bool,
        failures: &Mutex<Vec<PageFailure>>,
    ) {
        let fail = |stage: &str, model: Option<&str>, error: String| {
            log::warn!("page {page_id} {stage} failed: {error}");
            failures.lock().expect("failures lock").push(PageFailure {
                page_id: page_id.to_owned(),
                stage: stage.to_owned(),
                model: model.map(str::to_owned),
                error,
            });
        };

        type Step<'s> = Box<dyn Fn() -> Result<(), String> + 's>;
        for (stage, step) in [
            (
                "fetch",
                Box::new(|| self.stage_fetch(page_id, source, force)) as Step,
            ),
            ("chunk", Box::new(|| self.stage_chunk(page_id, force))),
            (
                "audit-original",
                Box::new(|| self.stage_audit_original(page_id, force)),
            ),
        ] {
            if let Err(e) = step() {
                fail(stage, None, e);
                return;
            }
        }

        for model in active_models(self.config) {
            let steps: [(&str, Step); 4] = [
                (
                    "remediate",
                    Box::new(|| self.stage_remediate(page_id, &model, force)),
                ),
                (
                    "reassemble",
                    Box::new(|| self.stage_reassemble(page_id, &model, force)),
                ),
                (
                    "audit-modified",
                    Box::new(|| self.stage_audit_modified(page_id, &model, force)),
                ),
                ("diff", Box::new(|| self.stage_diff(page_id, &model, force))),
            ];
            for (stage, step) in steps {
                if let Err(e) = step() {
                    fail(stage, Some(&model), e);
                    break;
                }
            }
        }
    }

    /// Execute all stages for all pages and models, then build the report.
    pub fn run(&self, force: bool) -> Result<PipelineOutcome, PipelineError> {
        if self.config.pages.is_empty() {
            return Err(PipelineError::Config("no pages configured".into()));
        }
        std::fs::create_dir_all(self.layout.root())?;

        let failures = Mutex::new(Vec::new());
        let pages = self.page_ids();
        let width = self.config.parallelism.max(1);
        if width <= 1 {
            for (page_id, source) in &pages {
                self.run_page(page_id, source, force, &failures);
            }
        } else {
            for batch in pages.chunks(width) {
                std::thread::scope(|scope| {
                    for (page_id, source) in batch {
                        scope.spawn(|| self.run_page(page_id, source, force, &failures));
                    }
                });
            }
        }

        let report = self.build_report().map_err(PipelineError::Config)?;
        Ok(PipelineOutcome {
            report,
            failures: failures.into_inner().expect("failures lock"),
        })
    }

    /// The stage plan `run` would execute, without touching anything.
    pub fn dry_run_plan(&self) -> Vec<String> {
        let mut plan = Vec::new();
        for (page_id, _) in self.page_ids() {
            for stage in ["fetch", "chunk", "audit-original"] {
                plan.push(format!("{stage} {page_id}"));
            }
            for model in active_models(self.config) {
                for stage in ["remediate", "reassemble", "audit-modified", "diff"] {
                    plan.push(format!("{stage} {page_id} × {model}"));
                }
            }
        }
        plan.push("report".to_owned());
        plan
    }
}

/// Models to run; "none" (or an empty list) means audit-only.
pub fn active_models(config: &PipelineConfig) -> Vec<String> {
    config
        .models
        .iter()
        .filter(|m| m.as_str() != "none")
        .cloned()
        .collect()
}

/// Convenience entry point: build a pipeline and run everything.
pub fn run_pipeline(
    config: &PipelineConfig,
    workspace: &Path,
    progress: &dyn Progress,
    force: bool,
) -> Result<PipelineOutcome, PipelineError> {
    Pipeline::new(config, workspace, progress)?.run(force)
}
