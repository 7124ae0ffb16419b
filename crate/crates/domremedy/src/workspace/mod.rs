//! On-disk workspace layout, pipeline configuration, and page identity.
//!
//! Every artifact is written atomically (temp file + rename) and the whole
//! workspace is replayable offline from its persisted artifacts: original
//! pages, chunk manifests, transcripts, audit fixtures, diffs, and reports
//! all live in a stable directory contract.

mod fetch;
mod pipeline;

pub use fetch::{fetch_page, FetchError, FetchedPage};
pub use pipeline::{
    active_models, run_pipeline, NullProgress, PageFailure, Pipeline, PipelineError,
    PipelineOutcome, Progress,
};

use serde::{Deserialize, Serialize};
use std::io;
use std::path::{Path, PathBuf};

use crate::metrics::{AggregationMode, CountingMode};
use crate::remedy::BackendSpec;

/// Write `bytes` to `path` atomically (temp file + rename) so interrupted
/// runs never leave half-written artifacts behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .ok_or_else(|| io::Error::other("path has no parent"))?;
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile_path(path);
    let mut attempts = 0;
    while tmp.exists() {
        attempts += 1;
        tmp = path.with_extension(format!("tmp{attempts}"));
    }
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn tempfile_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Stable id a page keeps across the whole workspace: URL host+path or file
/// stem, reduced to filesystem-safe characters.
pub fn page_id_for(source: &str) -> String {
    let trimmed = source
        .strip_prefix("https://")
        .or_else(|| source.strip_prefix("http://"))
        .unwrap_or(source);
    let trimmed = trimmed.strip_prefix("www.").unwrap_or(trimmed);
    let base = if source.starts_with("http") {
        trimmed.trim_end_matches('/').to_owned()
    } else {
        Path::new(trimmed)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| trimmed.to_owned())
    };
    let mut id: String = base
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' {
                c
            } else {
                '-'
            }
        })
        .collect();
    id.truncate(100);
    if id.is_empty() {
        id.push_str("page");
    }
    id
}

/// Where every artifact of a run lives.
#[derive(Debug, Clone)]
pub struct WorkspaceLayout {
    root: PathBuf,
}

impl WorkspaceLayout {
    pub fn new(root: impl Into<PathBuf>) -> WorkspaceLayout {
        WorkspaceLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn page_dir(&self, page_id: &str) -> PathBuf {
        self.root.join(page_id)
    }

    pub fn original_html(&self, page_id: &str) -> PathBuf {
        self.page_dir(page_id).join("original.html")
    }

    pub fn page_meta(&self, page_id: &str) -> PathBuf {
        self.page_dir(page_id).join("page.json")
    }

    pub fn chunks_dir(&self, page_id: &str) -> PathBuf {
        self.page_dir(page_id).join("chunks")
    }

    pub fn audits_dir(&self, page_id: &str) -> PathBuf {
        self.page_dir(page_id).join("audits")
    }

    /// Raw auditor output, stored verbatim as received.
    pub fn audit_raw(&self, page_id: &str, variant_stem: &str) -> PathBuf {
        self.audits_dir(page_id)
            .join(format!("{variant_stem}.json"))
    }

    /// Normalized parsed form beside the raw report.
    pub fn audit_parsed(&self, page_id: &str, variant_stem: &str) -> PathBuf {
        self.audits_dir(page_id)
            .join(format!("{variant_stem}.report.json"))
    }

    pub fn modified_dir(&self, page_id: &str, model: &str) -> PathBuf {
        self.page_dir(page_id).join("modified").join(model)
    }

    pub fn modified_chunks_dir(&self, page_id: &str, model: &str) -> PathBuf {
        self.modified_dir(page_id, model).join("chunks")
    }

    pub fn chunk_results(&self, page_id: &str, model: &str) -> PathBuf {
        self.modified_dir(page_id, model).join("results.json")
    }

    pub fn reassembled_html(&self, page_id: &str, model: &str) -> PathBuf {
        self.modified_dir(page_id, model).join("reassembled.html")
    }

    pub fn diff_json(&self, page_id: &str, model: &str) -> PathBuf {
        self.page_dir(page_id)
            .join("diffs")
            .join(format!("{model}.json"))
    }

    pub fn transcripts_dir(&self, page_id: &str, model: &str) -> PathBuf {
        self.page_dir(page_id).join("transcripts").join(model)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn run_report(&self) -> PathBuf {
        self.reports_dir().join("run_report.json")
    }

    pub fn report_file(&self, extension: &str) -> PathBuf {
        self.reports_dir().join(format!("report.{extension}"))
    }
}

/// Fetch provenance persisted beside the original page.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageMeta {
    pub page_id: String,
    pub source: String,
    pub final_url: String,
    pub fetched_at: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// How the auditor stage runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AuditMode {
    #[default]
    Live,
    Replay,
}

/// How model backends are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    #[default]
    Live,
    /// Resolve every model from transcripts persisted in the workspace.
    Replay,
}

fn default_budget() -> usize {
    crate::chunk::DEFAULT_BUDGET
}

fn default_headroom() -> usize {
    crate::chunk::DEFAULT_HEADROOM
}

fn default_estimator_name() -> String {
    "approx-bytes-v1".to_owned()
}

fn default_parallelism() -> usize {
    1
}

fn default_audit_timeout() -> u64 {
    180
}

fn default_counting() -> CountingMode {
    CountingMode::UniquePages
}

fn default_aggregation() -> AggregationMode {
    AggregationMode::PooledCounts
}

/// Run configuration; the config file is TOML with these keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// URLs or local file paths.
    #[serde(default)]
    pub pages: Vec<String>,
    /// Backend ids; `identity` is built in, empty means audit-only.
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_headroom")]
    pub headroom: usize,
    #[serde(default = "default_estimator_name")]
    pub estimator: String,
    #[serde(default)]
    pub auditor: Option<PathBuf>,
    #[serde(default)]
    pub audit_mode: AuditMode,
    /// Fixture directory for audit replay.
    #[serde(default)]
    pub audit_fixtures: Option<PathBuf>,
    #[serde(default = "default_audit_timeout")]
    pub audit_timeout_secs: u64,
    #[serde(default)]
    pub backend_mode: BackendMode,
    #[serde(default = "default_counting")]
    pub counting_mode: CountingMode,
    #[serde(default = "default_aggregation")]
    pub aggregation_mode: AggregationMode,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Fixing the seed makes runs byte-reproducible (ids, timestamps).
    #[serde(default)]
    pub seed: Option<u64>,
    /// External category map file; the built-in seed map when absent.
    #[serde(default)]
    pub category_map: Option<PathBuf>,
    /// Live backend specs, matched by id against `models`.
    #[serde(default, rename = "model")]
    pub model_specs: Vec<BackendSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pages: Vec::new(),
            models: Vec::new(),
            budget: default_budget(),
            headroom: default_headroom(),
            estimator: default_estimator_name(),
            auditor: None,
            audit_mode: AuditMode::default(),
            audit_fixtures: None,
            audit_timeout_secs: default_audit_timeout(),
            backend_mode: BackendMode::default(),
            counting_mode: default_counting(),
            aggregation_mode: default_aggregation(),
            parallelism: default_parallelism(),
            seed: None,
            category_map: None,
            model_specs: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_file(path: &Path) -> io::Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Epoch-seconds clock; pinned to 0 under a fixed seed so artifacts are
    /// byte-identical across runs.
    pub fn now(&self) -> u64 {
        if self.seed.is_some() {
            return 0;
        }
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}
