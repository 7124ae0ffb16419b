//! Ordered tree edit distance (Zhang–Shasha) over [`DomNode`] trees.
//!
//! Nodes are compared by their full label (kind, name, attribute map, text);
//! children are the tree structure. The distance is 0 exactly when the trees
//! are structurally equal. Memory is O(n·m), so callers must stay below the
//! configured node-pair ceiling; reassembly validation uses `tree_equal`
//! instead and only reaches for the distance as a diagnostic.

use thiserror::Error;

use super::{label_equal, DomNode};

/// Per-operation costs for the edit distance.
pub trait CostModel {
    fn delete(&self, node: &DomNode) -> u64;
    fn insert(&self, node: &DomNode) -> u64;
    fn relabel(&self, from: &DomNode, to: &DomNode) -> u64;
}

/// Unit cost for insert/delete and for relabeling two nodes whose labels
/// (kind, name, attributes, text) differ.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitCost;

impl CostModel for UnitCost {
    fn delete(&self, _: &DomNode) -> u64 {
        1
    }

    fn insert(&self, _: &DomNode) -> u64 {
        1
    }

    fn relabel(&self, from: &DomNode, to: &DomNode) -> u64 {
        if label_equal(from, to) {
            0
        } else {
            1
        }
    }
}

/// Default ceiling on `left_nodes × right_nodes`. The DP tables take
/// 16 bytes per pair, so 20,000×20,000 is already a multi-gigabyte request;
/// anything larger is refused rather than silently thrashing.
pub const DEFAULT_NODE_PAIR_LIMIT: u64 = 20_000 * 20_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TedError {
    #[error("tree pair too large for edit distance: {left}×{right} nodes exceeds {limit} pairs")]
    ResourceLimit {
        left: usize,
        right: usize,
        limit: u64,
    },
}

/// Minimal edit cost transforming `a` into `b` under the default pair limit.
pub fn tree_edit_distance(a: &DomNode, b: &DomNode, cost: &dyn CostModel) -> Result<u64, TedError> {
    tree_edit_distance_bounded(a, b, cost, DEFAULT_NODE_PAIR_LIMIT)
}

/// Same as [`tree_edit_distance`] with an explicit node-pair ceiling.
pub fn tree_edit_distance_bounded(
    a: &DomNode,
    b: &DomNode,
    cost: &dyn CostModel,
    pair_limit: u64,
) -> Result<u64, TedError> {
    let left = a.node_count();
    let right = b.node_count();
    if (left as u64).saturating_mul(right as u64) > pair_limit {
        return Err(TedError::ResourceLimit {
            left,
            right,
            limit: pair_limit,
        });
    }

    let ta = Postorder::build(a);
    let tb = Postorder::build(b);
    let n = ta.len();
    let m = tb.len();

    // 1-based DP tables, flattened.
    let width = m + 1;
    let mut tree_dist = vec![0u64; (n + 1) * width];
    let mut forest_dist = vec![0u64; (n + 1) * width];

    for &i in &ta.keyroots {
        for &j in &tb.keyroots {
            forest_distance(
                &ta,
                &tb,
                i,
                j,
                cost,
                &mut tree_dist,
                &mut forest_dist,
                width,
            );
        }
    }
    Ok(tree_dist[n * width + m])
}

#[allow(clippy::too_many_arguments)]
fn forest_distance(
    ta: &Postorder<'_>,
    tb: &Postorder<'_>,
    i: usize,
    j: usize,
    cost: &dyn CostModel,
    tree_dist: &mut [u64],
    fd: &mut [u64],
    width: usize,
) {
    let la = ta.lld[i];
    let lb = tb.lld[j];
    fd[(la - 1) * width + (lb - 1)] = 0;

    for di in la..=i {
        fd[di * width + (lb - 1)] = fd[(di - 1) * width + (lb - 1)] + cost.delete(ta.nodes[di - 1]);
    }
    for dj in lb..=j {
        fd[(la - 1) * width + dj] = fd[(la - 1) * width + (dj - 1)] + cost.insert(tb.nodes[dj - 1]);
    }

    for di in la..=i {
        for dj in lb..=j {
            let del = fd[(di - 1) * width + dj] + cost.delete(ta.nodes[di - 1]);
            let ins = fd[di * width + (dj - 1)] + cost.insert(tb.nodes[dj - 1]);
            if ta.lld[di] == la && tb.lld[dj] == lb {
                let rel = fd[(di - 1) * width + (dj - 1)]
                    + cost.relabel(ta.nodes[di - 1], tb.nodes[dj - 1]);
                let best = del.min(ins).min(rel);
                fd[di * width + dj] = best;
                tree_dist[di * width + dj] = best;
            } else {
                let split =
                    fd[(ta.lld[di] - 1) * width + (tb.lld[dj] - 1)] + tree_dist[di * width + dj];
                fd[di * width + dj] = del.min(ins).min(split);
            }
        }
    }
}

/// Postorder numbering with leftmost-leaf-descendant and keyroot indices,
/// all 1-based as in the original formulation.
struct Postorder<'a> {
    nodes: Vec<&'a DomNode>,
    lld: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn build(root: &'a DomNode) -> Postorder<'a> {
        let mut nodes = Vec::new();
        let mut lld = vec![0]; // index 0 unused
                               // Returns the leftmost leaf descendant of the visited subtree.
        fn walk<'a>(
            node: &'a DomNode,
            nodes: &mut Vec<&'a DomNode>,
            lld: &mut Vec<usize>,
        ) -> usize {
            let mut first_child_lld = None;
            for (idx, child) in node.children.iter().enumerate() {
                let child_lld = walk(child, nodes, lld);
                if idx == 0 {
                    first_child_lld = Some(child_lld);
                }
            }
            nodes.push(node);
            let own = nodes.len();
            let own_lld = first_child_lld.unwrap_or(own);
            lld.push(own_lld);
            own_lld
        }
        walk(root, &mut nodes, &mut lld);

        // A node is a keyroot when no later node shares its leftmost leaf.
        let mut latest: std::collections::BTreeMap<usize, usize> =
            std::collections::BTreeMap::new();
        for (i, &leaf) in lld.iter().enumerate().skip(1) {
            latest.insert(leaf, i);
        }
        let mut keyroots: Vec<usize> = latest.into_values().collect();
        keyroots.sort_unstable();
        Postorder {
            nodes,
            lld,
            keyroots,
        }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::tree_equal;

    fn leaf(text: &str) -> DomNode {
        DomNode::text(text)
    }

    fn el(name: &str, children: Vec<DomNode>) -> DomNode {
        DomNode::element(name, vec![], children)
    }

    #[test]
    fn identical_trees_have_distance_zero() {
        let t = el("div", vec![leaf("a"), el("p", vec![leaf("b")])]);
        assert_eq!(tree_edit_distance(&t, &t, &UnitCost).unwrap(), 0);
    }

    #[test]
    fn single_leaf_relabel_costs_one() {
        let a = el("div", vec![leaf("a")]);
        let b = el("div", vec![leaf("b")]);
        assert_eq!(tree_edit_distance(&a, &b, &UnitCost).unwrap(), 1);
    }

    #[test]
    fn insertion_costs_one() {
        let a = el("div", vec![leaf("a")]);
        let b = el("div", vec![leaf("a"), leaf("b")]);
        assert_eq!(tree_edit_distance(&a, &b, &UnitCost).unwrap(), 1);
    }

    #[test]
    fn distance_zero_iff_equal() {
        let a = el("div", vec![el("p", vec![leaf("x")])]);
        let b = el("div", vec![el("p", vec![leaf("x")])]);
        let c = el("div", vec![el("q", vec![leaf("x")])]);
        assert_eq!(tree_edit_distance(&a, &b, &UnitCost).unwrap(), 0);
        assert!(tree_equal(&a, &b));
        assert!(tree_edit_distance(&a, &c, &UnitCost).unwrap() > 0);
        assert!(!tree_equal(&a, &c));
    }

    #[test]
    fn pair_limit_is_enforced() {
        let big = el("div", (0..40).map(|i| leaf(&i.to_string())).collect());
        let err = tree_edit_distance_bounded(&big, &big, &UnitCost, 100).unwrap_err();
        assert_eq!(
            err,
            TedError::ResourceLimit {
                left: 41,
                right: 41,
                limit: 100
            }
        );
    }

    #[test]
    fn attribute_difference_is_a_relabel() {
        let a = DomNode::element("img", vec![("src".into(), "x".into())], vec![]);
        let b = DomNode::element(
            "img",
            vec![("src".into(), "x".into()), ("alt".into(), "y".into())],
            vec![],
        );
        assert_eq!(tree_edit_distance(&a, &b, &UnitCost).unwrap(), 1);
    }
}
