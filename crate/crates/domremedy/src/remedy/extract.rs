//! Pull the HTML fragment and modification notes out of a model completion.
//!
//! Models wrap output in prose and code fences; candidates are tried in
//! order — largest parsing fenced block, then the span from the first `<`
//! to the last `>`, then the whole text — and the first that parses to at
//! least one element wins. Model-authored modification comments (`<!-- -->`
//! in markup, `/* */` inside style bodies) are collected as notes.

use thiserror::Error;

use crate::chunk::SpliceContext;
use crate::dom::{parse_fragment_with_context, parse_html, DomNode};

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error("no HTML fragment found in completion")]
    NoFragmentFound,
}

/// A fragment recovered from a completion.
#[derive(Debug, Clone)]
pub struct ExtractedFragment {
    pub html: String,
    pub notes: Vec<String>,
}

/// Extract with the generic `body` fragment context.
pub fn extract_fragment(completion: &str) -> Result<ExtractedFragment, ExtractError> {
    extract_fragment_in(completion, &SpliceContext::Element("body".into()))
}

/// Extract a fragment that must parse in the given splice context.
pub fn extract_fragment_in(
    completion: &str,
    context: &SpliceContext,
) -> Result<ExtractedFragment, ExtractError> {
    let mut fenced = fenced_blocks(completion);
    fenced.sort_by_key(|b| std::cmp::Reverse(b.len()));

    let bracketed = bracket_span(completion);
    let candidates = fenced
        .into_iter()
        .chain(bracketed)
        .chain(std::iter::once(completion.trim().to_owned()));

    for candidate in candidates {
        if candidate.is_empty() {
            continue;
        }
        if parse_candidate(&candidate, context).is_some() {
            let notes = modification_notes(&candidate);
            return Ok(ExtractedFragment {
                html: candidate,
                notes,
            });
        }
    }
    Err(ExtractError::NoFragmentFound)
}

/// Parse a candidate in context; `Some` when it yields at least one element.
fn parse_candidate(candidate: &str, context: &SpliceContext) -> Option<Vec<DomNode>> {
    let nodes = match context {
        SpliceContext::Document => {
            let doc = parse_html(candidate.as_bytes(), None).ok()?;
            vec![doc.root]
        }
        SpliceContext::Element(name) => parse_fragment_with_context(name, candidate),
    };
    let has_element = nodes.iter().any(contains_element);
    has_element.then_some(nodes)
}

fn contains_element(node: &DomNode) -> bool {
    node.kind.is_element() || node.children.iter().any(contains_element)
}

/// Contents of ``` fenced blocks, language tags stripped.
fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let Some(end) = after.find("```") else { break };
        let mut block = &after[..end];
        // Drop a language tag line like "html".
        if let Some(nl) = block.find('\n') {
            let first = block[..nl].trim();
            if !first.is_empty() && first.len() <= 16 && !first.contains('<') {
                block = &block[nl + 1..];
            }
        }
        let trimmed = block.trim();
        if !trimmed.is_empty() {
            blocks.push(trimmed.to_owned());
        }
        rest = &after[end + 3..];
    }
    blocks
}

/// The span from the first `<` to the last `>`, if any.
fn bracket_span(text: &str) -> Option<String> {
    let start = text.find('<')?;
    let end = text.rfind('>')?;
    (end > start).then(|| text[start..=end].to_owned())
}

/// Modification comments in a fragment's text: `<!-- ... -->` in markup
/// (script bodies excluded) plus `/* ... */` blocks inside style bodies.
pub fn modification_notes(html: &str) -> Vec<String> {
    let mut notes = Vec::new();
    let markup = strip_spans_ci(html, "<script", "</script");
    for body in spans_between(&markup, "<!--", "-->") {
        let trimmed = body.trim();
        if !trimmed.is_empty() {
            notes.push(trimmed.to_owned());
        }
    }
    for style in inner_spans_ci(html, "<style", "</style") {
        for body in spans_between(&style, "/*", "*/") {
            let trimmed = body.trim();
            if !trimmed.is_empty() {
                notes.push(trimmed.to_owned());
            }
        }
    }
    notes
}

/// Contents between each `open`..`close` pair, non-nesting, in order.
fn spans_between(text: &str, open: &str, close: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(open) {
        let after = &rest[start + open.len()..];
        let Some(end) = after.find(close) else { break };
        out.push(after[..end].to_owned());
        rest = &after[end + close.len()..];
    }
    out
}

/// Remove `open`..`close` element spans, matching tags case-insensitively.
fn strip_spans_ci(text: &str, open: &str, close: &str) -> String {
    let lower = text.to_ascii_lowercase();
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    while let Some(start) = lower[pos..].find(open) {
        let abs_start = pos + start;
        out.push_str(&text[pos..abs_start]);
        match lower[abs_start..].find(close) {
            Some(end_rel) => {
                let after_close = abs_start + end_rel + close.len();
                // Skip to the end of the closing tag.
                pos = match lower[after_close..].find('>') {
                    Some(gt) => after_close + gt + 1,
                    None => lower.len(),
                };
            }
            None => {
                pos = lower.len();
            }
        }
    }
    out.push_str(&text[pos..]);
    out
}

/// Inner text of each `open`..`close` element span, case-insensitive tags.
fn inner_spans_ci(text: &str, open: &str, close: &str) -> Vec<String> {
    let lower = text.to_ascii_lowercase();
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(start) = lower[pos..].find(open) {
        let abs_start = pos + start;
        let Some(tag_end) = lower[abs_start..].find('>') else {
            break;
        };
        let content_start = abs_start + tag_end + 1;
        let Some(end_rel) = lower[content_start..].find(close) else {
            break;
        };
        out.push(text[content_start..content_start + end_rel].to_owned());
        pos = content_start + end_rel + close.len();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_block_beats_surrounding_prose() {
        let completion =
            "Here is the modified chunk:\n```html\n<div>x</div>\n```\nI changed nothing else.";
        let got = extract_fragment(completion).unwrap();
        assert_eq!(got.html, "<div>x</div>");
    }

    #[test]
    fn html_comment_becomes_a_note() {
        let completion = "```html\n<img src=\"x\" alt=\"photo\"><!-- added alt attribute -->\n```";
        let got = extract_fragment(completion).unwrap();
        assert_eq!(got.notes, vec!["added alt attribute"]);
    }

    #[test]
    fn style_comments_become_notes() {
        let completion = "<style>/* merged duplicate rules */ p{color:red}</style>";
        let got = extract_fragment(completion).unwrap();
        assert_eq!(got.notes, vec!["merged duplicate rules"]);
    }

    #[test]
    fn pure_prose_yields_no_fragment() {
        let err = extract_fragment("I could not find anything to change.").unwrap_err();
        assert_eq!(err, ExtractError::NoFragmentFound);
    }

    #[test]
    fn bare_markup_with_prose_trims_to_the_bracket_span() {
        let completion = "Sure! <section><p>done</p></section> Hope that helps.";
        let got = extract_fragment(completion).unwrap();
        assert_eq!(got.html, "<section><p>done</p></section>");
    }

    #[test]
    fn unfenced_whole_markup_survives() {
        let got = extract_fragment("<ul><li>a</li><li>b</li></ul>").unwrap();
        assert_eq!(got.html, "<ul><li>a</li><li>b</li></ul>");
    }

    #[test]
    fn document_context_accepts_full_pages() {
        let got = extract_fragment_in(
            "```html\n<html><head></head><body>ok</body></html>\n```",
            &SpliceContext::Document,
        )
        .unwrap();
        assert!(got.html.contains("<body>ok</body>"));
    }

    #[test]
    fn table_row_context_is_honored() {
        let got = extract_fragment_in("<td>1</td><td>2</td>", &SpliceContext::Element("tr".into()))
            .unwrap();
        assert_eq!(got.html, "<td>1</td><td>2</td>");
    }

    #[test]
    fn largest_fenced_block_wins() {
        let completion = "```html\n<b>tiny</b>\n```\nand the full version:\n```html\n<div><b>tiny</b><i>more content here</i></div>\n```";
        let got = extract_fragment(completion).unwrap();
        assert!(got.html.starts_with("<div>"));
    }
}
