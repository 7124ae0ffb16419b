//! HTML serialization following the fragment-serialization algorithm closely
//! enough that `parse(serialize(t))` reproduces `t` for any parser-produced
//! tree: void elements stay childless, raw-text element bodies are emitted
//! verbatim, and everything else is escaped.

use super::{DomDocument, DomNode, NodeKind};

/// Elements serialized without children or a closing tag.
const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

/// Elements whose text children are emitted without escaping. `noscript` is
/// included because parsing runs with scripting enabled, so its contents are
/// raw text too.
const RAW_TEXT_ELEMENTS: &[&str] = &[
    "style",
    "script",
    "xmp",
    "iframe",
    "noembed",
    "noframes",
    "plaintext",
    "noscript",
];

pub(crate) fn is_void(name: &str) -> bool {
    VOID_ELEMENTS.contains(&name)
}

fn is_raw_text(name: &str) -> bool {
    RAW_TEXT_ELEMENTS.contains(&name)
}

/// Serialize a whole document. A `<!DOCTYPE html>` prologue is always
/// emitted so reparses land in no-quirks mode.
pub fn serialize_document(doc: &DomDocument) -> String {
    let mut out = String::with_capacity(1024);
    out.push_str("<!DOCTYPE html>");
    write_node(&doc.root, false, &mut out);
    out
}

/// Serialize a single subtree (no doctype).
pub fn serialize_node(node: &DomNode) -> String {
    let mut out = String::new();
    write_node(node, false, &mut out);
    out
}

/// Serialize a sequence of sibling subtrees (no doctype).
pub fn serialize_nodes(nodes: &[DomNode]) -> String {
    let mut out = String::new();
    for n in nodes {
        write_node(n, false, &mut out);
    }
    out
}

fn write_node(node: &DomNode, parent_is_raw: bool, out: &mut String) {
    match node.kind {
        NodeKind::Text => {
            if parent_is_raw {
                out.push_str(&node.text);
            } else {
                escape_text(&node.text, out);
            }
        }
        NodeKind::Comment => {
            out.push_str("<!--");
            out.push_str(&node.text);
            out.push_str("-->");
        }
        NodeKind::Script | NodeKind::Stylesheet => {
            write_open_tag(node, out);
            out.push_str(&node.text);
            out.push_str("</");
            out.push_str(&node.name);
            out.push('>');
        }
        NodeKind::Tag => {
            write_open_tag(node, out);
            if is_void(&node.name) {
                return;
            }
            let raw = is_raw_text(&node.name);
            for child in &node.children {
                write_node(child, raw, out);
            }
            out.push_str("</");
            out.push_str(&node.name);
            out.push('>');
        }
    }
}

fn write_open_tag(node: &DomNode, out: &mut String) {
    out.push('<');
    out.push_str(&node.name);
    for (name, value) in &node.attrs {
        out.push(' ');
        out.push_str(name);
        out.push_str("=\"");
        escape_attr(value, out);
        out.push('"');
    }
    out.push('>');
}

fn escape_text(text: &str, out: &mut String) {
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

fn escape_attr(value: &str, out: &mut String) {
    for ch in value.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}
