//! HTML parsing via html5ever tree construction, converted into [`DomNode`].
//!
//! All document parses are standardized to no-quirks mode by forcing a
//! `<!DOCTYPE html>` prologue before the input; a doctype already present in
//! the input is then ignored by the tokenizer. This keeps tree construction
//! identical between original pages and reserialized ones.

use html5ever::tendril::TendrilSink;
use html5ever::{namespace_url, ns, parse_document, parse_fragment, LocalName, QualName};
use markup5ever_rcdom::{Handle, NodeData, RcDom};
use thiserror::Error;

use super::{DomDocument, DomNode, NodeKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty document")]
    EmptyDocument,
}

/// Parse an HTML byte stream into a document.
///
/// Malformed markup is repaired per the HTML5 tree-construction algorithm and
/// never rejected; non-UTF-8 input is decoded lossily with a recorded warning.
/// Only an entirely empty input is an error.
pub fn parse_html(input: &[u8], base_url: Option<&str>) -> Result<DomDocument, ParseError> {
    let mut warnings = Vec::new();
    let text = match std::str::from_utf8(input) {
        Ok(s) => s.to_owned(),
        Err(_) => {
            warnings.push("input was not valid UTF-8; decoded lossily".to_owned());
            String::from_utf8_lossy(input).into_owned()
        }
    };
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text).to_owned();
    if text.is_empty() {
        return Err(ParseError::EmptyDocument);
    }

    let forced = format!("<!DOCTYPE html>{text}");
    let dom: RcDom = parse_document(RcDom::default(), Default::default())
        .from_utf8()
        .read_from(&mut forced.as_bytes())
        .expect("reading from an in-memory buffer cannot fail");

    let root = document_root(&dom).expect("html5ever always produces an html element");
    Ok(DomDocument {
        root,
        source_url: base_url.map(str::to_owned),
        fetched_at: None,
        warnings,
    })
}

/// Reduce a document to its parse∘serialize fixed point.
///
/// Trees built through adoption-agency repairs (for example a heading inside
/// a formatting element inside another heading) can serialize to markup that
/// reparses differently once. One round settles such trees; the cap guards
/// against pathological cycles, in which case the last parse wins.
pub fn normalize_document(doc: DomDocument) -> DomDocument {
    let mut current = doc;
    for _ in 0..4 {
        let text = super::serialize::serialize_document(&current);
        let Ok(next) = parse_html(text.as_bytes(), current.source_url.as_deref()) else {
            return current;
        };
        if super::tree_equal(&current.root, &next.root) {
            return current;
        }
        current = DomDocument {
            root: next.root,
            source_url: current.source_url,
            fetched_at: current.fetched_at,
            warnings: current.warnings,
        };
    }
    current
}

/// Parse an HTML fragment the way a browser parses `innerHTML` on an element
/// named `context`, returning the fragment's top-level nodes.
pub fn parse_fragment_with_context(context: &str, html: &str) -> Vec<DomNode> {
    let ctx = QualName::new(None, ns!(html), LocalName::from(context));
    let dom: RcDom = parse_fragment(RcDom::default(), Default::default(), ctx, Vec::new())
        .from_utf8()
        .read_from(&mut html.as_bytes())
        .expect("reading from an in-memory buffer cannot fail");

    // The fragment sink parents everything under a synthetic html element.
    for child in dom.document.children.borrow().iter() {
        if let NodeData::Element { name, .. } = &child.data {
            if name.local.as_ref() == "html" {
                return convert_children(child);
            }
        }
    }
    Vec::new()
}

fn document_root(dom: &RcDom) -> Option<DomNode> {
    for child in dom.document.children.borrow().iter() {
        if let NodeData::Element { name, .. } = &child.data {
            if name.local.as_ref() == "html" {
                return convert_element(child);
            }
        }
    }
    None
}

fn convert_children(handle: &Handle) -> Vec<DomNode> {
    let mut out = Vec::new();
    for child in handle.children.borrow().iter() {
        match &child.data {
            NodeData::Element { .. } => {
                if let Some(n) = convert_element(child) {
                    out.push(n);
                }
            }
            NodeData::Text { contents } => {
                let text = contents.borrow().to_string();
                // Parsers never produce adjacent text siblings, but the rcdom
                // sink can when scripts are disabled mid-stream; merge to keep
                // the invariant.
                if let Some(prev) = out.last_mut() {
                    if prev.kind == NodeKind::Text {
                        prev.text.push_str(&text);
                        continue;
                    }
                }
                out.push(DomNode::text(text));
            }
            NodeData::Comment { contents } => out.push(DomNode::comment(contents.to_string())),
            NodeData::Doctype { .. } | NodeData::ProcessingInstruction { .. } => {}
            NodeData::Document => {}
        }
    }
    out
}

fn convert_element(handle: &Handle) -> Option<DomNode> {
    let NodeData::Element {
        name,
        attrs,
        template_contents,
        ..
    } = &handle.data
    else {
        return None;
    };
    let tag = flat_name(name);
    let mut flat_attrs: Vec<(String, String)> = Vec::new();
    for a in attrs.borrow().iter() {
        let key = flat_attr_name(&a.name);
        // A reparse keeps only the first of duplicate attribute names; drop
        // duplicates now so round trips are stable.
        if flat_attrs.iter().any(|(k, _)| *k == key) {
            continue;
        }
        flat_attrs.push((key, a.value.to_string()));
    }

    let kind = NodeKind::for_element(&tag);
    if kind == NodeKind::Script || kind == NodeKind::Stylesheet {
        // Raw-text elements: children are text nodes only; flatten the body.
        let mut body = String::new();
        for child in handle.children.borrow().iter() {
            if let NodeData::Text { contents } = &child.data {
                body.push_str(&contents.borrow());
            }
        }
        return Some(DomNode {
            kind,
            name: tag,
            attrs: flat_attrs,
            text: body,
            children: Vec::new(),
        });
    }

    // Template contents live in a separate fragment; fold them in as children.
    let children = if let Some(tc) = template_contents.borrow().as_ref() {
        convert_children(tc)
    } else {
        convert_children(handle)
    };

    Some(DomNode {
        kind,
        name: tag,
        attrs: flat_attrs,
        text: String::new(),
        children,
    })
}

fn flat_name(name: &QualName) -> String {
    name.local.as_ref().to_owned()
}

fn flat_attr_name(name: &QualName) -> String {
    match &name.prefix {
        Some(p) => format!("{}:{}", p.as_ref(), name.local.as_ref()),
        None => name.local.as_ref().to_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::tree_equal;

    #[test]
    fn minimal_document_parses_to_expected_shape() {
        let doc = parse_html(b"<html><body><p>x</p></body></html>", None).unwrap();
        let root = &doc.root;
        assert_eq!(root.name, "html");
        assert_eq!(root.children.len(), 2);
        assert_eq!(root.children[0].name, "head");
        let body = &root.children[1];
        assert_eq!(body.name, "body");
        let p = &body.children[0];
        assert_eq!(p.name, "p");
        assert_eq!(p.children[0].kind, NodeKind::Text);
        assert_eq!(p.children[0].text, "x");
    }

    #[test]
    fn unclosed_markup_is_repaired() {
        // Reference: the HTML5 tree constructor turns "<p>a" into
        // html > (head, body > p > "a").
        let doc = parse_html(b"<p>a", None).unwrap();
        let root = &doc.root;
        assert_eq!(root.name, "html");
        assert_eq!(root.children[0].name, "head");
        assert!(root.children[0].children.is_empty());
        let body = &root.children[1];
        assert_eq!(body.name, "body");
        assert_eq!(body.children.len(), 1);
        let p = &body.children[0];
        assert_eq!(p.name, "p");
        assert_eq!(p.children[0].text, "a");
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(
            parse_html(b"", None).unwrap_err(),
            ParseError::EmptyDocument
        );
    }

    #[test]
    fn invalid_utf8_is_lossy_decoded_with_warning() {
        let doc = parse_html(b"<p>a\xffb</p>", None).unwrap();
        assert_eq!(doc.warnings.len(), 1);
        let body = &doc.root.children[1];
        assert!(body.children[0].children[0].text.contains('\u{fffd}'));
    }

    #[test]
    fn script_and_style_bodies_are_flattened() {
        let doc = parse_html(
            b"<script>if (a < b) {}</script><style>p { color: red; }</style>",
            None,
        )
        .unwrap();
        let head = &doc.root.children[0];
        let script = &head.children[0];
        assert_eq!(script.kind, NodeKind::Script);
        assert_eq!(script.text, "if (a < b) {}");
        assert!(script.children.is_empty());
        let style = &head.children[1];
        assert_eq!(style.kind, NodeKind::Stylesheet);
        assert_eq!(style.text, "p { color: red; }");
    }

    #[test]
    fn doctype_in_input_does_not_change_the_tree() {
        let a = parse_html(b"<!DOCTYPE html><p>x</p>", None).unwrap();
        let b = parse_html(b"<p>x</p>", None).unwrap();
        assert!(tree_equal(&a.root, &b.root));
    }

    #[test]
    fn template_contents_are_folded_into_children() {
        let doc = parse_html(b"<template><p>t</p></template>", None).unwrap();
        let head = &doc.root.children[0];
        let tmpl = &head.children[0];
        assert_eq!(tmpl.name, "template");
        assert_eq!(tmpl.children.len(), 1);
        assert_eq!(tmpl.children[0].name, "p");
    }

    #[test]
    fn fragment_parse_uses_the_context_element() {
        let nodes = parse_fragment_with_context("tr", "<td>1</td><td>2</td>");
        assert_eq!(nodes.len(), 2);
        assert_eq!(nodes[0].name, "td");
        // Without the right context the cells would be dropped entirely.
        let wrong = parse_fragment_with_context("body", "<td>1</td>");
        assert!(wrong.iter().all(|n| n.name != "td"));
    }

    #[test]
    fn duplicate_attributes_keep_first() {
        let doc = parse_html(br#"<div id="a" id="b">x</div>"#, None).unwrap();
        let div = &doc.root.children[1].children[0];
        assert_eq!(div.attrs, vec![("id".to_owned(), "a".to_owned())]);
    }
}
