//! DOM tree model: typed nodes, HTML parse/serialize, structural equality,
//! tree edit distance, and depth statistics.
//!
//! The tree is an ordered tree of typed nodes. Element kinds are derived
//! from the tag name: `script` and `style` elements get their own kinds and
//! carry their raw source in [`DomNode::text`] instead of child nodes, so a
//! script body is never split across children.

mod json;
mod parse;
mod serialize;
mod ted;

pub use json::{from_canonical_json, to_canonical_json};
pub use parse::{normalize_document, parse_fragment_with_context, parse_html, ParseError};
pub use serialize::{serialize_document, serialize_node, serialize_nodes};
pub use ted::{tree_edit_distance, tree_edit_distance_bounded, CostModel, TedError, UnitCost};

use std::fmt;

/// What a node in the tree is.
///
/// `Script` and `Stylesheet` are element nodes whose kind is a pure function
/// of the tag name (`script` / `style`); everything else with a tag name is
/// `Tag`. External stylesheets (`<link rel="stylesheet">`) are plain tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum NodeKind {
    #[default]
    Tag,
    Text,
    Comment,
    Script,
    Stylesheet,
}

impl NodeKind {
    /// Kind for an element with the given (lowercased) tag name.
    pub fn for_element(name: &str) -> NodeKind {
        match name {
            "script" => NodeKind::Script,
            "style" => NodeKind::Stylesheet,
            _ => NodeKind::Tag,
        }
    }

    /// True for element-like kinds (anything with a tag name and attributes).
    pub fn is_element(self) -> bool {
        matches!(
            self,
            NodeKind::Tag | NodeKind::Script | NodeKind::Stylesheet
        )
    }

    /// Canonical lowercase name used in the JSON encoding.
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Tag => "tag",
            NodeKind::Text => "text",
            NodeKind::Comment => "comment",
            NodeKind::Script => "script",
            NodeKind::Stylesheet => "stylesheet",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One node of an ordered DOM tree.
///
/// Invariants:
/// - only element kinds have a non-empty `name` or any `attrs`;
/// - only `Tag` nodes have children;
/// - `Text`, `Comment`, `Script`, and `Stylesheet` carry their payload in
///   `text` (script/style source is the element's raw body).
#[derive(Debug, Clone, Default)]
pub struct DomNode {
    pub kind: NodeKind,
    pub name: String,
    /// Attributes in parse order. Equality treats them as an unordered map.
    pub attrs: Vec<(String, String)>,
    pub text: String,
    pub children: Vec<DomNode>,
}

impl DomNode {
    /// Element node; kind derived from the tag name.
    pub fn element(
        name: impl Into<String>,
        attrs: Vec<(String, String)>,
        children: Vec<DomNode>,
    ) -> DomNode {
        let name = name.into();
        let kind = NodeKind::for_element(&name);
        debug_assert!(
            kind == NodeKind::Tag || children.is_empty(),
            "script/style elements carry their body in `text`, not children"
        );
        DomNode {
            kind,
            name,
            attrs,
            text: String::new(),
            children,
        }
    }

    pub fn text(content: impl Into<String>) -> DomNode {
        DomNode {
            kind: NodeKind::Text,
            text: content.into(),
            ..Default::default()
        }
    }

    pub fn comment(content: impl Into<String>) -> DomNode {
        DomNode {
            kind: NodeKind::Comment,
            text: content.into(),
            ..Default::default()
        }
    }

    /// Inline `<script>` with a raw body.
    pub fn script(attrs: Vec<(String, String)>, body: impl Into<String>) -> DomNode {
        DomNode {
            kind: NodeKind::Script,
            name: "script".into(),
            attrs,
            text: body.into(),
            children: Vec::new(),
        }
    }

    /// Inline `<style>` with a raw body.
    pub fn stylesheet(attrs: Vec<(String, String)>, body: impl Into<String>) -> DomNode {
        DomNode {
            kind: NodeKind::Stylesheet,
            name: "style".into(),
            attrs,
            text: body.into(),
            children: Vec::new(),
        }
    }

    /// Attribute lookup by name (first match).
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    /// Total number of nodes in this subtree, including `self`.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(DomNode::node_count).sum::<usize>()
    }

    /// Longest root-to-leaf path measured in edges (a leaf is depth 0).
    pub fn max_depth(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.max_depth())
            .max()
            .unwrap_or(0)
    }
}

/// Aggregate size/shape statistics for a subtree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DepthStats {
    pub max_depth: usize,
    pub node_count: usize,
}

/// Max depth and node count of the tree rooted at `root`.
pub fn depth_stats(root: &DomNode) -> DepthStats {
    DepthStats {
        max_depth: root.max_depth(),
        node_count: root.node_count(),
    }
}

/// Structural equality: kinds, names, attribute maps (order-insensitive),
/// text payloads, and child sequences, recursively.
pub fn tree_equal(a: &DomNode, b: &DomNode) -> bool {
    if a.kind != b.kind || a.name != b.name || a.text != b.text {
        return false;
    }
    if !attrs_equal(&a.attrs, &b.attrs) {
        return false;
    }
    a.children.len() == b.children.len()
        && a.children
            .iter()
            .zip(&b.children)
            .all(|(x, y)| tree_equal(x, y))
}

/// Attribute maps compared as unordered name → value sets.
pub fn attrs_equal(a: &[(String, String)], b: &[(String, String)]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut sa: Vec<_> = a.iter().collect();
    let mut sb: Vec<_> = b.iter().collect();
    sa.sort();
    sb.sort();
    sa == sb
}

/// Equality of node labels only (kind, name, attrs, text) — no children.
/// This is the label the default tree-edit-distance cost model compares.
pub fn label_equal(a: &DomNode, b: &DomNode) -> bool {
    a.kind == b.kind && a.name == b.name && a.text == b.text && attrs_equal(&a.attrs, &b.attrs)
}

/// A parsed HTML document: the `html` root plus fetch provenance.
#[derive(Debug, Clone)]
pub struct DomDocument {
    /// The `html` element; the parser inserts html/head/body when absent.
    pub root: DomNode,
    pub source_url: Option<String>,
    /// Seconds since the Unix epoch when the page was fetched, if known.
    pub fetched_at: Option<u64>,
    /// Non-fatal problems observed while decoding/parsing the input.
    pub warnings: Vec<String>,
}

impl DomDocument {
    pub fn new(root: DomNode) -> DomDocument {
        DomDocument {
            root,
            source_url: None,
            fetched_at: None,
            warnings: Vec::new(),
        }
    }
}

/// A path from the document root to a node: the sequence of child indices.
/// Rendered canonically as `/0/2/1`; the root itself is `/`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TreePath(Vec<usize>);

impl TreePath {
    pub fn root() -> TreePath {
        TreePath(Vec::new())
    }

    pub fn from_indices(indices: Vec<usize>) -> TreePath {
        TreePath(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of edges from the root (the root is depth 0).
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, index: usize) -> TreePath {
        let mut v = self.0.clone();
        v.push(index);
        TreePath(v)
    }

    pub fn parent(&self) -> Option<TreePath> {
        if self.0.is_empty() {
            None
        } else {
            Some(TreePath(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// Follow the path down from `root`; `None` if any index is out of range.
    pub fn resolve<'a>(&self, root: &'a DomNode) -> Option<&'a DomNode> {
        let mut node = root;
        for &i in &self.0 {
            node = node.children.get(i)?;
        }
        Some(node)
    }

    pub fn parse(s: &str) -> Option<TreePath> {
        if s == "/" {
            return Some(TreePath::root());
        }
        let body = s.strip_prefix('/')?;
        let mut v = Vec::new();
        for part in body.split('/') {
            v.push(part.parse().ok()?);
        }
        Some(TreePath(v))
    }
}

impl fmt::Display for TreePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for i in &self.0 {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

impl serde::Serialize for TreePath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for TreePath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TreePath::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad tree path {s:?}")))
    }
}
