//! Drive the per-chunk model loop: build the prompt, invoke the backend
//! once per chunk (single trial), extract and validate the returned
//! fragment, and classify the outcome. A rejected chunk falls back to its
//! original at reassembly; nothing aborts the page.

mod backends;
mod extract;
mod prompt;

pub use backends::{BackendSpec, HttpBackend, IdentityBackend, ReplayBackend, IDENTITY_MODEL_ID};
pub use extract::{
    extract_fragment, extract_fragment_in, modification_notes, ExtractError, ExtractedFragment,
};
pub use prompt::{
    build_prompt, template_hash, PromptBudget, PromptError, RemediationPrompt, TEMPLATE_VERSION,
};

use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

use crate::audit::AuditRecord;
use crate::chunk::{ChunkId, ChunkManifest, SpliceContext, TokenEstimator};
use crate::dom::{tree_equal, DomNode};

/// Sampling temperature for every live backend. Fixed to minimize variance;
/// not configurable.
pub const TEMPERATURE: f64 = 0.0;

/// A model that can rewrite a DOM chunk.
pub trait ModelBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn max_output_tokens(&self) -> usize;
    fn context_window(&self) -> usize;
    fn invoke(&self, prompt: &RemediationPrompt) -> Result<String, BackendError>;
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend transport error: {0}")]
    Transport(String),
    #[error("backend configuration error: {0}")]
    Config(String),
    #[error("no recorded completion for chunk {0}")]
    MissingRecording(ChunkId),
}

#[derive(Debug, Error)]
pub enum RemedyError {
    #[error(
        "model {model} max output {max_output_tokens} cannot hold a chunk of \
{budget} tokens plus {headroom} headroom"
    )]
    OutputWindowTooSmall {
        model: String,
        max_output_tokens: usize,
        budget: usize,
        headroom: usize,
    },
}

/// Outcome of one chunk's trip through the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkStatus {
    Modified,
    Unchanged,
    Rejected(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChunkResult {
    pub chunk_id: ChunkId,
    pub ordinal: usize,
    /// The HTML that will enter reassembly; the original chunk when rejected.
    pub modified_html: String,
    /// Model-reported modification descriptions not present in the original.
    pub change_notes: Vec<String>,
    pub status: ChunkStatus,
}

/// Prompt/completion record for one chunk, persisted for replay mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transcript {
    pub chunk_id: ChunkId,
    pub ordinal: usize,
    pub model_id: String,
    pub prompt: String,
    pub completion: String,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
    pub elapsed_ms: u64,
    pub status: ChunkStatus,
}

#[derive(Debug, Clone)]
pub struct RemedyOptions {
    /// Retries per chunk after a backend error before rejecting it.
    pub retries: usize,
    /// Zero out timings so artifacts are byte-identical across runs.
    pub deterministic: bool,
}

impl Default for RemedyOptions {
    fn default() -> Self {
        RemedyOptions {
            retries: 2,
            deterministic: false,
        }
    }
}

/// Everything produced by remediating one page with one model.
#[derive(Debug, Clone)]
pub struct PageRemediation {
    pub results: Vec<ChunkResult>,
    pub transcripts: Vec<Transcript>,
}

/// Process every chunk of `manifest` in ordinal order through `backend`.
///
/// Each chunk gets a single completion (plus error retries); the returned
/// list covers every chunk id exactly once. The same budget/headroom is
/// applied whatever the backend's own limits, so differently sized models
/// see byte-identical prompts.
pub fn remediate_page(
    manifest: &ChunkManifest,
    audits: &[AuditRecord],
    backend: &dyn ModelBackend,
    estimator: &dyn TokenEstimator,
    options: &RemedyOptions,
) -> Result<PageRemediation, RemedyError> {
    let required = manifest.chunk_budget + manifest.headroom;
    if backend.max_output_tokens() < required {
        return Err(RemedyError::OutputWindowTooSmall {
            model: backend.model_id().to_owned(),
            max_output_tokens: backend.max_output_tokens(),
            budget: manifest.chunk_budget,
            headroom: manifest.headroom,
        });
    }

    let budget = PromptBudget {
        context_window: backend.context_window(),
        max_output_tokens: backend.max_output_tokens(),
    };
    let total = manifest.chunks.len();

    let mut results = Vec::with_capacity(total);
    let mut transcripts = Vec::with_capacity(total);

    for chunk in &manifest.chunks {
        let context = manifest
            .splice_context(&chunk.chunk_id)
            .unwrap_or_else(|| SpliceContext::Element("body".into()));

        let prompt = match build_prompt(chunk, audits, chunk.ordinal, total, budget, estimator) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("chunk {} rejected: {e}", chunk.chunk_id);
                results.push(ChunkResult {
                    chunk_id: chunk.chunk_id.clone(),
                    ordinal: chunk.ordinal,
                    modified_html: chunk.html.clone(),
                    change_notes: Vec::new(),
                    status: ChunkStatus::Rejected(e.to_string()),
                });
                continue;
            }
        };

        let started = Instant::now();
        let completion = invoke_with_retries(backend, &prompt, options.retries);
        let elapsed_ms = if options.deterministic {
            0
        } else {
            started.elapsed().as_millis() as u64
        };

        let (result, completion_text) = match completion {
            Err(e) => {
                log::warn!("chunk {} rejected after retries: {e}", chunk.chunk_id);
                (
                    ChunkResult {
                        chunk_id: chunk.chunk_id.clone(),
                        ordinal: chunk.ordinal,
                        modified_html: chunk.html.clone(),
                        change_notes: Vec::new(),
                        status: ChunkStatus::Rejected(e.to_string()),
                    },
                    String::new(),
                )
            }
            Ok(text) => (
                classify(chunk.ordinal, &chunk.chunk_id, &chunk.html, &text, &context),
                text,
            ),
        };

        transcripts.push(Transcript {
            chunk_id: chunk.chunk_id.clone(),
            ordinal: chunk.ordinal,
            model_id: backend.model_id().to_owned(),
            prompt: prompt.text.clone(),
            completion: completion_text.clone(),
            prompt_tokens: prompt.token_estimate,
            completion_tokens: estimator.estimate(&completion_text),
            elapsed_ms,
            status: result.status.clone(),
        });
        results.push(result);
    }

    Ok(PageRemediation {
        results,
        transcripts,
    })
}

fn invoke_with_retries(
    backend: &dyn ModelBackend,
    prompt: &RemediationPrompt,
    retries: usize,
) -> Result<String, BackendError> {
    let mut last_err = None;
    for _ in 0..=retries {
        match backend.invoke(prompt) {
            Ok(text) => return Ok(text),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Extract the fragment and decide modified/unchanged/rejected.
fn classify(
    ordinal: usize,
    chunk_id: &ChunkId,
    original_html: &str,
    completion: &str,
    context: &SpliceContext,
) -> ChunkResult {
    match extract_fragment_in(completion, context) {
        Err(e) => ChunkResult {
            chunk_id: chunk_id.clone(),
            ordinal,
            modified_html: original_html.to_owned(),
            change_notes: Vec::new(),
            status: ChunkStatus::Rejected(e.to_string()),
        },
        Ok(extracted) => {
            let unchanged = extracted.html == original_html
                || fragments_equal(original_html, &extracted.html, context);
            let original_notes: std::collections::BTreeSet<String> =
                extract::modification_notes(original_html)
                    .into_iter()
                    .collect();
            let change_notes: Vec<String> = extracted
                .notes
                .into_iter()
                .filter(|n| !original_notes.contains(n))
                .collect();
            ChunkResult {
                chunk_id: chunk_id.clone(),
                ordinal,
                modified_html: extracted.html,
                change_notes,
                status: if unchanged {
                    ChunkStatus::Unchanged
                } else {
                    ChunkStatus::Modified
                },
            }
        }
    }
}

fn parse_in(html: &str, context: &SpliceContext) -> Vec<DomNode> {
    match context {
        SpliceContext::Document => match crate::dom::parse_html(html.as_bytes(), None) {
            Ok(doc) => vec![doc.root],
            Err(_) => Vec::new(),
        },
        SpliceContext::Element(name) => crate::dom::parse_fragment_with_context(name, html),
    }
}

fn fragments_equal(a: &str, b: &str, context: &SpliceContext) -> bool {
    let na = parse_in(a, context);
    let nb = parse_in(b, context);
    na.len() == nb.len() && na.iter().zip(&nb).all(|(x, y)| tree_equal(x, y))
}
