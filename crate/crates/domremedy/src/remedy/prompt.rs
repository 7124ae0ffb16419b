//! The remediation prompt: a canonical, versioned template embedding the
//! chunk position context, the actionable audit block, the DOM chunk, and
//! five standing directives:
//!
//! 1. the DOM arrives in chunks — respect the incremental delivery and do
//!    not disrupt the hierarchy across reassembly;
//! 2. mark every modified section and describe the change;
//! 3. production markup may be minified/uglified/compressed — do not
//!    reprocess it;
//! 4. never change the order, styles, or functionality of scripts;
//! 5. write modification comments in the format valid for the section
//!    (HTML comments in markup, `/* ... */` inside style blocks).
//!
//! Rendering is deterministic: identical inputs yield identical bytes, and
//! the template hash is recorded in run reports.

use thiserror::Error;

use crate::audit::AuditRecord;
use crate::chunk::{Chunk, ChunkId, TokenEstimator};

pub const TEMPLATE_VERSION: &str = "v1";

const PREAMBLE: &str =
    "You are a web performance engineer. Resolve the performance audit findings \
below by modifying the HTML chunk, and return the complete modified chunk.";

const DIRECTIVES: [&str; 5] = [
    "This chunk is one part of a single webpage's DOM, delivered incrementally. \
Treat it as part of a larger tree and avoid any change that would disrupt the \
hierarchical DOM structure when the chunks are reassembled.",
    "Specify each section you modify and describe the change you made.",
    "The markup is from a production website and is likely to be minified, \
uglified, or compressed; styles and scripts may already be processed, so avoid \
applying further similar processing to them.",
    "Avoid any changes to the order, styles, and functionalities of the scripts \
present.",
    "Use the right formatting for modification comments in each section: HTML \
comment formatting (<!-- ... -->) for regular HTML elements, and style comment \
formatting (/* ... */) inside style blocks.",
];

const NO_AUDITS: &str = "No actionable audits were reported for this page.";

/// A rendered prompt for one chunk.
#[derive(Debug, Clone)]
pub struct RemediationPrompt {
    pub chunk_id: ChunkId,
    pub ordinal: usize,
    pub total: usize,
    pub chunk_html: String,
    pub audit_block: String,
    /// The full rendered text sent to the backend.
    pub text: String,
    pub token_estimate: usize,
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error(
        "prompt of ~{prompt_tokens} tokens exceeds the context budget \
({context_window} window - {max_output_tokens} reserved for output)"
    )]
    ContextOverflow {
        prompt_tokens: usize,
        context_window: usize,
        max_output_tokens: usize,
    },
}

/// Context/output limits the rendered prompt must fit inside.
#[derive(Debug, Clone, Copy)]
pub struct PromptBudget {
    pub context_window: usize,
    pub max_output_tokens: usize,
}

/// Render the audit block: key, title, description, and details when present.
fn render_audits(audits: &[AuditRecord]) -> String {
    if audits.is_empty() {
        return NO_AUDITS.to_owned();
    }
    let mut out = String::new();
    for a in audits {
        out.push_str(&format!("- key: {}\n", a.id));
        out.push_str(&format!("  title: {}\n", a.title));
        out.push_str(&format!("  description: {}\n", a.description));
        if let Some(details) = &a.details {
            out.push_str(&format!("  details: {}\n", details.get()));
        }
    }
    out.trim_end().to_owned()
}

/// Build the deterministic prompt for a chunk, checking the context budget.
pub fn build_prompt(
    chunk: &Chunk,
    audits: &[AuditRecord],
    ordinal: usize,
    total: usize,
    budget: PromptBudget,
    estimator: &dyn TokenEstimator,
) -> Result<RemediationPrompt, PromptError> {
    let audit_block = render_audits(audits);
    let mut text = String::new();
    text.push_str(PREAMBLE);
    text.push_str("\n\n");
    text.push_str(&format!(
        "This is chunk {} of {} from the page's DOM.\n\n",
        ordinal + 1,
        total
    ));
    for d in DIRECTIVES {
        text.push_str("- ");
        text.push_str(d);
        text.push('\n');
    }
    text.push_str("\nPerformance audits to resolve:\n");
    text.push_str(&audit_block);
    text.push_str(&format!(
        "\n\nDOM chunk ({} of {}):\n```html\n",
        ordinal + 1,
        total
    ));
    text.push_str(&chunk.html);
    text.push_str("\n```\n\nReturn the complete modified chunk as HTML.\n");

    let token_estimate = estimator.estimate(&text);
    let available = budget
        .context_window
        .saturating_sub(budget.max_output_tokens);
    if token_estimate > available {
        return Err(PromptError::ContextOverflow {
            prompt_tokens: token_estimate,
            context_window: budget.context_window,
            max_output_tokens: budget.max_output_tokens,
        });
    }

    Ok(RemediationPrompt {
        chunk_id: chunk.chunk_id.clone(),
        ordinal,
        total,
        chunk_html: chunk.html.clone(),
        audit_block,
        text,
        token_estimate,
    })
}

/// Hash of the canonical template (directives + framing), recorded in run
/// reports so prompt drift is visible across runs.
pub fn template_hash() -> String {
    let mut h = Fnv64::new();
    h.write(TEMPLATE_VERSION.as_bytes());
    h.write(PREAMBLE.as_bytes());
    for d in DIRECTIVES {
        h.write(d.as_bytes());
    }
    h.write(NO_AUDITS.as_bytes());
    format!("{:016x}", h.finish())
}

struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Fnv64 {
        Fnv64(0xcbf29ce484222325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
