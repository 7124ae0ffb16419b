//! Token-budgeted depth-first splitting of a DOM tree into chunks and
//! loss-free reassembly.
//!
//! A document that fits the budget whole becomes a single chunk anchored at
//! the root. Otherwise the root becomes a *split node*: its tag name and
//! attributes are preserved in the manifest as a shell, and its children are
//! packed left-to-right into chunks of consecutive siblings whose serialized
//! form stays within the budget. A child too large for a chunk of its own is
//! split recursively the same way. Oversized script/style bodies are stored
//! in the manifest and blanked in the chunk they ride in, then restored at
//! reassembly unless the model edited them. Text and comment nodes are never
//! split internally; an unsplittable oversized leaf is emitted as a chunk
//! flagged oversize rather than failing the page.
//!
//! Reassembly is driven by anchors (tree paths), not chunk order: each shell
//! rebuilds its children by splicing chunk fragments and nested shells back
//! in anchor order, so chunks may be supplied in any order.

mod estimator;

pub use estimator::{
    default_estimator, estimator_by_name, ByteEstimator, DefaultEstimator, TokenEstimator,
};

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use base64::Engine as _;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{
    from_canonical_json, parse_fragment_with_context, parse_html, serialize_node,
    to_canonical_json, tree_edit_distance_bounded, tree_equal, DomDocument, DomNode, NodeKind,
    TreePath, UnitCost,
};

/// Default chunk payload budget in tokens.
pub const DEFAULT_BUDGET: usize = 15_000;
/// Default headroom reserved for model-added content within the downstream
/// output cap (budget + headroom = the smallest supported output window).
pub const DEFAULT_HEADROOM: usize = 1_000;

/// A 128-bit random chunk identifier rendered canonically (UUID form).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChunkId(String);

impl ChunkId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Accepts any canonically rendered 128-bit id (for replay files).
    pub fn from_string(s: String) -> ChunkId {
        ChunkId(s)
    }
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Seedable source of chunk identifiers; a fixed seed reproduces whole runs.
pub struct ChunkIdGen {
    rng: ChaCha8Rng,
}

impl ChunkIdGen {
    pub fn from_seed(seed: u64) -> ChunkIdGen {
        ChunkIdGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn from_entropy() -> ChunkIdGen {
        ChunkIdGen {
            rng: ChaCha8Rng::from_os_rng(),
        }
    }

    pub fn next_id(&mut self) -> ChunkId {
        let mut bytes = [0u8; 16];
        self.rng.fill_bytes(&mut bytes);
        ChunkId(
            uuid::Builder::from_random_bytes(bytes)
                .into_uuid()
                .to_string(),
        )
    }
}

/// One token-budgeted serialized fragment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: ChunkId,
    /// Serialized fragment; excluded from manifest.json, stored as its own file.
    #[serde(skip)]
    pub html: String,
    pub token_count: usize,
    /// Position in depth-first traversal order, dense from 0.
    pub ordinal: usize,
    /// True when an unsplittable node forced this chunk over budget.
    #[serde(default)]
    pub oversize: bool,
}

/// What a preserved manifest entry restores at reassembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreservedRole {
    /// Tag name + attributes of a split node; rebuilt around its chunks.
    Shell,
    /// Full original of a script/style whose body was blanked for budget.
    Raw,
    /// A node spliced back verbatim without ever entering a chunk
    /// (whitespace stranded between two split siblings).
    Literal,
}

/// A node stored in the manifest, keyed by its path in the source tree.
#[derive(Debug, Clone)]
pub struct PreservedNode {
    pub role: PreservedRole,
    pub node: DomNode,
}

impl Serialize for PreservedNode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let role = match self.role {
            PreservedRole::Shell => "shell",
            PreservedRole::Raw => "raw",
            PreservedRole::Literal => "literal",
        };
        let blob = base64::engine::general_purpose::STANDARD.encode(to_canonical_json(&self.node));
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("role", role)?;
        m.serialize_entry("blob", &blob)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for PreservedNode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        struct Repr {
            role: String,
            blob: String,
        }
        let repr = Repr::deserialize(d)?;
        let role = match repr.role.as_str() {
            "shell" => PreservedRole::Shell,
            "raw" => PreservedRole::Raw,
            "literal" => PreservedRole::Literal,
            other => {
                return Err(D::Error::custom(format!(
                    "unknown preserved role {other:?}"
                )))
            }
        };
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&repr.blob)
            .map_err(D::Error::custom)?;
        let text = String::from_utf8(bytes).map_err(D::Error::custom)?;
        let node = from_canonical_json(&text).map_err(D::Error::custom)?;
        Ok(PreservedNode { role, node })
    }
}

/// The plan for one page: ordered chunks plus everything reassembly needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChunkManifest {
    pub chunk_budget: usize,
    pub headroom: usize,
    pub estimator: String,
    pub chunks: Vec<Chunk>,
    /// chunk id → path of the first node the chunk splices back at.
    pub anchors: BTreeMap<ChunkId, TreePath>,
    /// Split-node shells and blanked raw bodies, keyed by source-tree path.
    pub preserved: BTreeMap<TreePath, PreservedNode>,
    /// Paths of unsplittable nodes that exceeded the budget on their own.
    #[serde(default)]
    pub oversize_paths: Vec<TreePath>,
}

/// How a chunk's HTML is to be parsed back into nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpliceContext {
    /// The chunk is the whole document.
    Document,
    /// The chunk holds children of an element with this tag name.
    Element(String),
}

impl ChunkManifest {
    pub fn chunk(&self, id: &ChunkId) -> Option<&Chunk> {
        self.chunks.iter().find(|c| &c.chunk_id == id)
    }

    /// Conventional file name for a chunk's fragment file.
    pub fn chunk_file_name(chunk: &Chunk) -> String {
        format!("{}_{}.html", chunk.ordinal, chunk.chunk_id)
    }

    /// Parse context for a chunk: the tag of the split node it splices into,
    /// or the document itself for a root-anchored chunk.
    pub fn splice_context(&self, id: &ChunkId) -> Option<SpliceContext> {
        let anchor = self.anchors.get(id)?;
        if anchor.is_root() {
            return Some(SpliceContext::Document);
        }
        let parent = anchor.parent()?;
        let shell = self.preserved.get(&parent)?;
        if shell.role != PreservedRole::Shell {
            return None;
        }
        Some(SpliceContext::Element(shell.node.name.clone()))
    }
}

#[derive(Debug, Error)]
pub enum ChunkError {
    #[error("invalid budget: budget {budget} must exceed headroom {headroom}, both positive")]
    InvalidBudget { budget: usize, headroom: usize },
}

#[derive(Debug, Error)]
pub enum ReassembleError {
    #[error("missing chunk {0}")]
    MissingChunk(ChunkId),
    #[error("unknown chunk {0}")]
    UnknownChunk(ChunkId),
    #[error("chunk {0} supplied more than once")]
    DuplicateChunk(ChunkId),
    #[error("splice conflict at {at}: {reason}")]
    SpliceConflict { at: TreePath, reason: String },
}

/// Split `doc` into chunks under `budget` tokens each.
pub fn plan_chunks(
    doc: &DomDocument,
    estimator: &dyn TokenEstimator,
    budget: usize,
    headroom: usize,
    ids: &mut ChunkIdGen,
) -> Result<ChunkManifest, ChunkError> {
    if headroom == 0 || budget <= headroom {
        return Err(ChunkError::InvalidBudget { budget, headroom });
    }

    let mut planner = Planner {
        estimator,
        budget,
        ids,
        chunks: Vec::new(),
        anchors: BTreeMap::new(),
        preserved: BTreeMap::new(),
        oversize_paths: Vec::new(),
    };

    let whole = serialize_node(&doc.root);
    if planner.estimator.estimate(&whole) <= budget {
        planner.emit(whole, TreePath::root(), false);
    } else {
        planner.split_node(&doc.root, TreePath::root());
    }

    Ok(ChunkManifest {
        chunk_budget: budget,
        headroom,
        estimator: estimator.name().to_owned(),
        chunks: planner.chunks,
        anchors: planner.anchors,
        preserved: planner.preserved,
        oversize_paths: planner.oversize_paths,
    })
}

/// Tags never split internally: foreign content loses its namespace context
/// and template fragments have their own parse rules, so both travel whole.
fn is_atomic_tag(name: &str) -> bool {
    matches!(name, "svg" | "math" | "template")
}

struct Planner<'a> {
    estimator: &'a dyn TokenEstimator,
    budget: usize,
    ids: &'a mut ChunkIdGen,
    chunks: Vec<Chunk>,
    anchors: BTreeMap<ChunkId, TreePath>,
    preserved: BTreeMap<TreePath, PreservedNode>,
    oversize_paths: Vec<TreePath>,
}

impl Planner<'_> {
    fn emit(&mut self, html: String, anchor: TreePath, oversize: bool) {
        let id = self.ids.next_id();
        let token_count = self.estimator.estimate(&html);
        self.anchors.insert(id.clone(), anchor);
        self.chunks.push(Chunk {
            chunk_id: id,
            html,
            token_count,
            ordinal: self.chunks.len(),
            oversize,
        });
    }

    /// `node` serializes over budget: preserve its shell and pack children.
    fn split_node(&mut self, node: &DomNode, path: TreePath) {
        let shell = DomNode {
            kind: node.kind,
            name: node.name.clone(),
            attrs: node.attrs.clone(),
            text: String::new(),
            children: Vec::new(),
        };
        self.preserved.insert(
            path.clone(),
            PreservedNode {
                role: PreservedRole::Shell,
                node: shell,
            },
        );

        let mut group_html = String::new();
        let mut group_start = 0usize;
        let mut group_oversize = false;

        for (i, child) in node.children.iter().enumerate() {
            let child_html = self.packable_html(child, path.child(i));
            let is_ws = child.kind == NodeKind::Text && child.text.trim().is_empty();

            if !group_html.is_empty() {
                let joined_len = self
                    .estimator
                    .estimate(&format!("{group_html}{child_html}"));
                if joined_len <= self.budget {
                    group_html.push_str(&child_html);
                    continue;
                }
                if is_ws {
                    // Leading whitespace is dropped by fragment parsing in
                    // html/head contexts, so whitespace never starts a chunk;
                    // glue it on and accept the (pathological) overflow.
                    group_html.push_str(&child_html);
                    group_oversize = true;
                    self.oversize_paths.push(path.child(i));
                    continue;
                }
                self.emit(
                    std::mem::take(&mut group_html),
                    path.child(group_start),
                    std::mem::take(&mut group_oversize),
                );
            }

            if is_ws {
                // No open group to glue onto (the previous sibling was split
                // in place): keep the whitespace in the manifest verbatim so
                // it can never lead a fragment and get dropped.
                self.preserved.insert(
                    path.child(i),
                    PreservedNode {
                        role: PreservedRole::Literal,
                        node: child.clone(),
                    },
                );
                continue;
            }

            if self.estimator.estimate(&child_html) <= self.budget {
                group_html = child_html;
                group_start = i;
            } else if child.kind == NodeKind::Tag && !is_atomic_tag(&child.name) {
                self.split_node(child, path.child(i));
            } else {
                // Unsplittable leaf (text/comment/foreign subtree) over
                // budget: report it and emit the chunk anyway, flagged.
                self.oversize_paths.push(path.child(i));
                self.emit(child_html, path.child(i), true);
            }
        }

        if !group_html.is_empty() {
            self.emit(group_html, path.child(group_start), group_oversize);
        }
    }

    /// Serialized form of `child` as it goes into a chunk. Oversized inline
    /// script/style bodies are stored in the manifest and blanked here so the
    /// element still fits; reassembly puts the body back unless it was edited.
    fn packable_html(&mut self, child: &DomNode, path: TreePath) -> String {
        if matches!(child.kind, NodeKind::Script | NodeKind::Stylesheet) {
            let full = serialize_node(child);
            if self.estimator.estimate(&full) > self.budget {
                self.preserved.insert(
                    path,
                    PreservedNode {
                        role: PreservedRole::Raw,
                        node: child.clone(),
                    },
                );
                let mut blanked = child.clone();
                blanked.text = String::new();
                return serialize_node(&blanked);
            }
            return full;
        }
        serialize_node(child)
    }
}

/// Reassembled document plus restoration warnings.
fn splice_fragment(context: &str, html: &str) -> Vec<DomNode> {
    let mut nodes = parse_fragment_with_context(context, html);
    if context == "html" {
        // Fragment parsing with an html context materializes head/body even
        // when the fragment never mentions them; drop those phantoms.
        let mentions_head = mentions_tag(html, "head");
        let mentions_body = mentions_tag(html, "body");
        nodes.retain(|n| {
            let phantom = n.children.is_empty() && n.attrs.is_empty();
            match n.name.as_str() {
                "head" if phantom && !mentions_head => false,
                "body" if phantom && !mentions_body => false,
                _ => true,
            }
        });
    }
    nodes
}

fn mentions_tag(html: &str, tag: &str) -> bool {
    let lower = html.to_ascii_lowercase();
    let needle = format!("<{tag}");
    let mut from = 0;
    while let Some(pos) = lower[from..].find(&needle) {
        let end = from + pos + needle.len();
        match lower.as_bytes().get(end) {
            None => return true,
            Some(b) if b.is_ascii_whitespace() || *b == b'>' || *b == b'/' => return true,
            _ => from = end,
        }
    }
    false
}

/// Splice `chunks` back into a full document per `manifest`.
///
/// Chunks may arrive in any order; anchors drive placement. Every chunk id in
/// the manifest must be supplied exactly once.
pub fn reassemble(
    manifest: &ChunkManifest,
    chunks: &[Chunk],
) -> Result<DomDocument, ReassembleError> {
    let mut supplied: BTreeMap<&ChunkId, &Chunk> = BTreeMap::new();
    for c in chunks {
        if !manifest.anchors.contains_key(&c.chunk_id) {
            return Err(ReassembleError::UnknownChunk(c.chunk_id.clone()));
        }
        if supplied.insert(&c.chunk_id, c).is_some() {
            return Err(ReassembleError::DuplicateChunk(c.chunk_id.clone()));
        }
    }
    for id in manifest.anchors.keys() {
        if !supplied.contains_key(id) {
            return Err(ReassembleError::MissingChunk(id.clone()));
        }
    }

    // Whole document in a single root-anchored chunk.
    if manifest.anchors.len() == 1 && manifest.preserved.is_empty() {
        let (id, anchor) = manifest.anchors.iter().next().expect("one anchor");
        if anchor.is_root() {
            let chunk = supplied[id];
            let doc = parse_html(chunk.html.as_bytes(), None).map_err(|e| {
                ReassembleError::SpliceConflict {
                    at: TreePath::root(),
                    reason: e.to_string(),
                }
            })?;
            return Ok(doc);
        }
    }

    // Group pieces (chunks and nested shells) under their parent split node.
    #[derive(Debug)]
    enum Piece<'a> {
        Chunk(&'a ChunkId),
        Shell(TreePath),
        Literal(&'a DomNode),
    }
    let mut by_parent: BTreeMap<TreePath, Vec<(usize, Piece)>> = BTreeMap::new();
    for (id, anchor) in &manifest.anchors {
        let parent = anchor
            .parent()
            .ok_or_else(|| ReassembleError::SpliceConflict {
                at: anchor.clone(),
                reason: "chunk anchored at the root alongside other pieces".into(),
            })?;
        by_parent
            .entry(parent)
            .or_default()
            .push((anchor.last().expect("non-root anchor"), Piece::Chunk(id)));
    }
    for (path, entry) in &manifest.preserved {
        let piece = match entry.role {
            PreservedRole::Shell if !path.is_root() => Piece::Shell(path.clone()),
            PreservedRole::Literal => Piece::Literal(&entry.node),
            _ => continue,
        };
        let parent = path.parent().expect("non-root path");
        by_parent
            .entry(parent)
            .or_default()
            .push((path.last().expect("non-root path"), piece));
    }
    for pieces in by_parent.values_mut() {
        pieces.sort_by_key(|(idx, _)| *idx);
        for pair in pieces.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(ReassembleError::SpliceConflict {
                    at: TreePath::root(),
                    reason: format!("two pieces claim child index {}", pair[0].0),
                });
            }
        }
    }

    fn rebuild(
        path: &TreePath,
        manifest: &ChunkManifest,
        supplied: &BTreeMap<&ChunkId, &Chunk>,
        by_parent: &BTreeMap<TreePath, Vec<(usize, Piece)>>,
    ) -> Result<DomNode, ReassembleError> {
        let shell = match manifest.preserved.get(path) {
            Some(p) if p.role == PreservedRole::Shell => &p.node,
            _ => {
                return Err(ReassembleError::SpliceConflict {
                    at: path.clone(),
                    reason: "no preserved shell for split node".into(),
                })
            }
        };
        let mut children = Vec::new();
        if let Some(pieces) = by_parent.get(path) {
            for (_, piece) in pieces {
                match piece {
                    Piece::Chunk(id) => {
                        let chunk = supplied[*id];
                        children.extend(splice_fragment(&shell.name, &chunk.html));
                    }
                    Piece::Shell(p) => children.push(rebuild(p, manifest, supplied, by_parent)?),
                    Piece::Literal(node) => children.push((*node).clone()),
                }
            }
        }
        Ok(DomNode {
            kind: shell.kind,
            name: shell.name.clone(),
            attrs: shell.attrs.clone(),
            text: String::new(),
            children,
        })
    }

    let mut root = rebuild(&TreePath::root(), manifest, &supplied, &by_parent)?;
    let mut doc = DomDocument::new(DomNode::default());
    restore_raw_bodies(manifest, &mut root, &mut doc.warnings);
    doc.root = root;
    Ok(doc)
}

/// Put blanked script/style bodies back where the incoming chunks left them
/// empty or absent; an edited body wins over the stored original.
fn restore_raw_bodies(manifest: &ChunkManifest, root: &mut DomNode, warnings: &mut Vec<String>) {
    for (path, entry) in &manifest.preserved {
        if entry.role != PreservedRole::Raw {
            continue;
        }
        let original = &entry.node;

        // Exact-path check covers the unmodified case; a non-empty body at
        // the same spot means the model wrote something, and the edit wins.
        if let Some(node) = resolve_mut(root, path) {
            if node.name == original.name {
                if node.text.is_empty() {
                    node.text = original.text.clone();
                }
                continue;
            }
        }
        // Paths drift once a model edits siblings; look for the element by
        // shape. A blank match gets the body back, a non-blank match is an
        // edit that stands.
        if let Some(node) = find_shape_match(root, original) {
            if node.text.is_empty() {
                node.text = original.text.clone();
            }
            continue;
        }
        // The element is gone entirely: put the original back at its old
        // position, clamped to the parent's current width.
        if let Some(parent_path) = path.parent() {
            if let Some(parent) = resolve_mut(root, &parent_path) {
                if parent.kind == NodeKind::Tag {
                    let idx = path.last().unwrap_or(0).min(parent.children.len());
                    parent.children.insert(idx, original.clone());
                    continue;
                }
            }
        }
        warnings.push(format!(
            "could not restore preserved {} at {path}",
            original.name
        ));
    }
}

fn resolve_mut<'a>(root: &'a mut DomNode, path: &TreePath) -> Option<&'a mut DomNode> {
    let mut node = root;
    for &i in path.indices() {
        node = node.children.get_mut(i)?;
    }
    Some(node)
}

fn find_shape_match<'a>(node: &'a mut DomNode, original: &DomNode) -> Option<&'a mut DomNode> {
    if node.kind == original.kind
        && node.name == original.name
        && crate::dom::attrs_equal(&node.attrs, &original.attrs)
    {
        return Some(node);
    }
    for child in &mut node.children {
        if let Some(found) = find_shape_match(child, original) {
            return Some(found);
        }
    }
    None
}

/// Outcome of a chunk → reassemble → compare cycle on an unmodified page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundtripReport {
    pub ok: bool,
    /// Tree edit distance between source and reassembly. 0 when `ok`;
    /// omitted when the trees differ but are too large to measure.
    pub ted: Option<u64>,
    pub chunk_count: usize,
}

/// Diagnostic cap for the edit-distance report on failed round trips.
const ROUNDTRIP_TED_PAIR_LIMIT: u64 = 4_000_000;

/// Plan, reassemble unmodified chunks, and check the result equals `doc`.
///
/// The input is first settled to its parse∘serialize fixed point, since the
/// check exercises the chunking machinery, not HTML5's (non-idempotent)
/// repair of adversarial markup — the pipeline extracts the same settled
/// tree as its original.
pub fn verify_roundtrip(
    doc: &DomDocument,
    estimator: &dyn TokenEstimator,
    budget: usize,
    headroom: usize,
) -> Result<RoundtripReport, ChunkError> {
    let doc = crate::dom::normalize_document(doc.clone());
    let mut ids = ChunkIdGen::from_seed(0);
    let manifest = plan_chunks(&doc, estimator, budget, headroom, &mut ids)?;
    let rebuilt = match reassemble(&manifest, &manifest.chunks) {
        Ok(d) => d,
        Err(_) => {
            return Ok(RoundtripReport {
                ok: false,
                ted: None,
                chunk_count: manifest.chunks.len(),
            })
        }
    };
    let ok = tree_equal(&doc.root, &rebuilt.root);
    let ted = if ok {
        Some(0)
    } else {
        tree_edit_distance_bounded(
            &doc.root,
            &rebuilt.root,
            &UnitCost,
            ROUNDTRIP_TED_PAIR_LIMIT,
        )
        .ok()
    };
    Ok(RoundtripReport {
        ok,
        ted,
        chunk_count: manifest.chunks.len(),
    })
}

/// Write `manifest.json` plus one `<ordinal>_<chunk_id>.html` per chunk.
pub fn save_manifest(manifest: &ChunkManifest, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(manifest).expect("manifest serialization");
    crate::workspace::write_atomic(&dir.join("manifest.json"), json.as_bytes())?;
    for chunk in &manifest.chunks {
        let name = ChunkManifest::chunk_file_name(chunk);
        crate::workspace::write_atomic(&dir.join(name), chunk.html.as_bytes())?;
    }
    Ok(())
}

/// Load a manifest and its chunk fragment files from `dir`.
pub fn load_manifest(dir: &Path) -> std::io::Result<ChunkManifest> {
    let json = std::fs::read_to_string(dir.join("manifest.json"))?;
    let mut manifest: ChunkManifest = serde_json::from_str(&json)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    for chunk in &mut manifest.chunks {
        let name = ChunkManifest::chunk_file_name(chunk);
        chunk.html = std::fs::read_to_string(dir.join(name))?;
    }
    Ok(manifest)
}
