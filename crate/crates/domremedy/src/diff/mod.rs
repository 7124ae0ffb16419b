//! Structural diffing of DOM trees into a classified change set.
//!
//! Matched element pairs are compared attribute-by-attribute; children are
//! aligned in three phases:
//!
//! 1. longest common subsequence over position-independent subtree
//!    fingerprints (identical subtrees in stable relative order);
//! 2. remaining equal-fingerprint children matched left-to-right (moves);
//! 3. remaining children paired positionally and recursed into.
//!
//! Any matched pair sitting at different sibling indices yields a
//! `PositionChanged` entry, so shifts caused by insertions and deletions are
//! counted, not just reorders. Unmatched children become whole-subtree
//! `ElementAdded` / `ElementRemoved` entries.

mod metrics;

pub use metrics::{depth_summary, modification_metrics, DepthSummary, ModificationMetrics};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::dom::{DomNode, TreePath};

/// Classification of one structural difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChangeKind {
    AttributeAdded,
    AttributeRemoved,
    ElementAdded,
    ElementRemoved,
    TypeChanged,
    AttrValueChanged,
    TagChanged,
    PositionChanged,
    TextChanged,
}

impl ChangeKind {
    pub const ALL: [ChangeKind; 9] = [
        ChangeKind::AttributeAdded,
        ChangeKind::AttributeRemoved,
        ChangeKind::ElementAdded,
        ChangeKind::ElementRemoved,
        ChangeKind::TypeChanged,
        ChangeKind::AttrValueChanged,
        ChangeKind::TagChanged,
        ChangeKind::PositionChanged,
        ChangeKind::TextChanged,
    ];
}

/// Payload carried on a change's before/after side.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangePayload {
    /// Attribute value, tag name, or text content.
    Text(String),
    /// A whole subtree (additions, removals, type changes).
    Node(DomNode),
    /// A sibling index (positional changes).
    Index(usize),
}

impl PartialEq for ChangePayload {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ChangePayload::Text(a), ChangePayload::Text(b)) => a == b,
            (ChangePayload::Index(a), ChangePayload::Index(b)) => a == b,
            (ChangePayload::Node(a), ChangePayload::Node(b)) => crate::dom::tree_equal(a, b),
            _ => false,
        }
    }
}

/// One classified difference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Change {
    pub kind: ChangeKind,
    /// Path in the original tree; for pure additions, in the modified tree.
    pub path: TreePath,
    /// Edges from the document root (root itself is 0).
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub before: Option<ChangePayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<ChangePayload>,
}

/// Per-kind tallies.
pub type ChangeCounts = BTreeMap<ChangeKind, u64>;

/// All classified differences between one original/modified tree pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChangeSet {
    #[serde(default)]
    pub page_id: String,
    #[serde(default)]
    pub model_id: String,
    pub changes: Vec<Change>,
    pub counts: ChangeCounts,
    pub depth_min: Option<usize>,
    pub depth_max: Option<usize>,
    pub depth_median: Option<usize>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    pub fn count(&self, kind: ChangeKind) -> u64 {
        self.counts.get(&kind).copied().unwrap_or(0)
    }

    /// Build a set from raw changes, computing tallies and depth stats.
    pub fn from_changes(page_id: String, model_id: String, changes: Vec<Change>) -> ChangeSet {
        let mut counts = ChangeCounts::new();
        for c in &changes {
            *counts.entry(c.kind).or_insert(0) += 1;
        }
        let summary = metrics::summarize_depths(changes.iter().map(|c| c.depth));
        ChangeSet {
            page_id,
            model_id,
            changes,
            counts,
            depth_min: summary.min,
            depth_max: summary.max,
            depth_median: summary.median,
        }
    }
}

/// Diff two parsed trees. Empty result exactly when the trees are equal.
pub fn diff_trees(original: &DomNode, modified: &DomNode) -> ChangeSet {
    let mut changes = Vec::new();
    diff_pair(
        original,
        modified,
        &TreePath::root(),
        &TreePath::root(),
        &mut changes,
    );
    ChangeSet::from_changes(String::new(), String::new(), changes)
}

fn change(kind: ChangeKind, path: TreePath) -> Change {
    let depth = path.depth();
    Change {
        kind,
        path,
        depth,
        attr: None,
        before: None,
        after: None,
    }
}

fn diff_pair(a: &DomNode, b: &DomNode, pa: &TreePath, pb: &TreePath, out: &mut Vec<Change>) {
    if a.kind != b.kind {
        let mut c = change(ChangeKind::TypeChanged, pa.clone());
        c.before = Some(ChangePayload::Node(a.clone()));
        c.after = Some(ChangePayload::Node(b.clone()));
        out.push(c);
        return;
    }

    if a.kind.is_element() {
        diff_attrs(a, b, pa, out);
        if a.name != b.name {
            let mut c = change(ChangeKind::TagChanged, pa.clone());
            c.before = Some(ChangePayload::Text(a.name.clone()));
            c.after = Some(ChangePayload::Text(b.name.clone()));
            out.push(c);
        }
    }

    if a.text != b.text {
        let mut c = change(ChangeKind::TextChanged, pa.clone());
        c.before = Some(ChangePayload::Text(a.text.clone()));
        c.after = Some(ChangePayload::Text(b.text.clone()));
        out.push(c);
    }

    if !a.children.is_empty() || !b.children.is_empty() {
        diff_children(a, b, pa, pb, out);
    }
}

fn diff_attrs(a: &DomNode, b: &DomNode, pa: &TreePath, out: &mut Vec<Change>) {
    for (k, vb) in &b.attrs {
        match a.attr(k) {
            None => {
                let mut c = change(ChangeKind::AttributeAdded, pa.clone());
                c.attr = Some(k.clone());
                c.after = Some(ChangePayload::Text(vb.clone()));
                out.push(c);
            }
            Some(va) if va != vb => {
                let mut c = change(ChangeKind::AttrValueChanged, pa.clone());
                c.attr = Some(k.clone());
                c.before = Some(ChangePayload::Text(va.to_owned()));
                c.after = Some(ChangePayload::Text(vb.clone()));
                out.push(c);
            }
            Some(_) => {}
        }
    }
    for (k, va) in &a.attrs {
        if b.attr(k).is_none() {
            let mut c = change(ChangeKind::AttributeRemoved, pa.clone());
            c.attr = Some(k.clone());
            c.before = Some(ChangePayload::Text(va.clone()));
            out.push(c);
        }
    }
}

fn diff_children(a: &DomNode, b: &DomNode, pa: &TreePath, pb: &TreePath, out: &mut Vec<Change>) {
    let fa: Vec<u128> = a.children.iter().map(fingerprint).collect();
    let fb: Vec<u128> = b.children.iter().map(fingerprint).collect();

    // Phase 1: identical subtrees kept in relative order.
    let mut pairs = leftmost_lcs(&fa, &fb);
    let mut matched_a: Vec<bool> = vec![false; fa.len()];
    let mut matched_b: Vec<bool> = vec![false; fb.len()];
    for &(i, j) in &pairs {
        matched_a[i] = true;
        matched_b[j] = true;
    }

    // Phase 2: identical subtrees that moved; collisions pair left-to-right.
    for i in 0..fa.len() {
        if matched_a[i] {
            continue;
        }
        if let Some(j) = (0..fb.len()).find(|&j| !matched_b[j] && fb[j] == fa[i]) {
            matched_a[i] = true;
            matched_b[j] = true;
            pairs.push((i, j));
        }
    }

    // Phase 3: what remains is content change; pair positionally.
    let rest_a: Vec<usize> = (0..fa.len()).filter(|&i| !matched_a[i]).collect();
    let rest_b: Vec<usize> = (0..fb.len()).filter(|&j| !matched_b[j]).collect();
    let zipped = rest_a.len().min(rest_b.len());
    let mut recurse: Vec<(usize, usize)> = Vec::new();
    for k in 0..zipped {
        pairs.push((rest_a[k], rest_b[k]));
        recurse.push((rest_a[k], rest_b[k]));
    }

    // Unmatched leftovers are whole-subtree additions/removals.
    for &i in &rest_a[zipped..] {
        let mut c = change(ChangeKind::ElementRemoved, pa.child(i));
        c.before = Some(ChangePayload::Node(a.children[i].clone()));
        out.push(c);
    }
    for &j in &rest_b[zipped..] {
        let mut c = change(ChangeKind::ElementAdded, pb.child(j));
        c.after = Some(ChangePayload::Node(b.children[j].clone()));
        out.push(c);
    }

    // Any matched pair at a different sibling index is a positional change.
    pairs.sort_unstable();
    for &(i, j) in &pairs {
        if i != j {
            let mut c = change(ChangeKind::PositionChanged, pa.child(i));
            c.before = Some(ChangePayload::Index(i));
            c.after = Some(ChangePayload::Index(j));
            out.push(c);
        }
    }

    // Only phase-3 pairs can differ below the surface.
    for (i, j) in recurse {
        diff_pair(
            &a.children[i],
            &b.children[j],
            &pa.child(i),
            &pb.child(j),
            out,
        );
    }
}

/// Longest common subsequence that is lexicographically smallest as a
/// sequence of (left, right) index pairs.
fn leftmost_lcs(fa: &[u128], fb: &[u128]) -> Vec<(usize, usize)> {
    let n = fa.len();
    let m = fb.len();
    // suffix_len[i][j] = LCS length of fa[i..] and fb[j..]
    let width = m + 1;
    let mut suffix_len = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            suffix_len[i * width + j] = if fa[i] == fb[j] {
                suffix_len[(i + 1) * width + j + 1] + 1
            } else {
                suffix_len[(i + 1) * width + j].max(suffix_len[i * width + j + 1])
            };
        }
    }

    let mut pairs = Vec::new();
    let mut i = 0;
    let mut j = 0;
    while i < n && suffix_len[i * width + j] > 0 {
        let target = suffix_len[i * width + j];
        // Find the smallest usable j for this i without losing length.
        let mut jj = j;
        let mut found = None;
        while jj < m && suffix_len[i * width + jj] == target {
            if fa[i] == fb[jj] && suffix_len[(i + 1) * width + jj + 1] + 1 == target {
                found = Some(jj);
                break;
            }
            jj += 1;
        }
        match found {
            Some(jj) => {
                pairs.push((i, jj));
                i += 1;
                j = jj + 1;
            }
            None => i += 1,
        }
    }
    pairs
}

/// Position-independent content hash of a subtree: kind, name, attribute
/// map (sorted), text, and children hashes, with length framing.
pub fn fingerprint(node: &DomNode) -> u128 {
    let mut h = Fnv128::new();
    h.write(&[node.kind as u8]);
    h.write_framed(node.name.as_bytes());
    let mut attrs: Vec<(&str, &str)> = node
        .attrs
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect();
    attrs.sort_unstable();
    h.write(&(attrs.len() as u64).to_le_bytes());
    for (k, v) in attrs {
        h.write_framed(k.as_bytes());
        h.write_framed(v.as_bytes());
    }
    h.write_framed(node.text.as_bytes());
    h.write(&(node.children.len() as u64).to_le_bytes());
    for child in &node.children {
        h.write(&fingerprint(child).to_le_bytes());
    }
    h.finish()
}

/// FNV-1a, 128-bit variant.
struct Fnv128(u128);

impl Fnv128 {
    const OFFSET: u128 = 0x6c62272e07bb014262b821756295c58d;
    const PRIME: u128 = 0x0000000001000000000000000000013b;

    fn new() -> Fnv128 {
        Fnv128(Self::OFFSET)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u128;
            self.0 = self.0.wrapping_mul(Self::PRIME);
        }
    }

    fn write_framed(&mut self, bytes: &[u8]) {
        self.write(&(bytes.len() as u64).to_le_bytes());
        self.write(bytes);
    }

    fn finish(&self) -> u128 {
        self.0
    }
}

/// Verify that two trees differ only by attribute presence/value on matched
/// elements — used by reassembly tests; exported for them.
pub fn changes_are_attr_only(cs: &ChangeSet) -> bool {
    cs.changes.iter().all(|c| {
        matches!(
            c.kind,
            ChangeKind::AttributeAdded
                | ChangeKind::AttributeRemoved
                | ChangeKind::AttrValueChanged
        )
    })
}
