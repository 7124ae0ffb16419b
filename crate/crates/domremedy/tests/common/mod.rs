//! Shared test utilities: seeded random tree generation and independent
//! brute-force oracles for tree edit distance, structural diff counts, and
//! Spearman correlation. The oracles deliberately take different
//! computational routes than the library implementations they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use domremedy::diff::ChangeKind;
use domremedy::dom::{label_equal, tree_equal, DomNode, NodeKind};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_pages() -> Vec<std::path::PathBuf> {
    let mut pages: Vec<_> = std::fs::read_dir(fixture_dir().join("pages"))
        .expect("fixture pages directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("html"))
        .collect();
    pages.sort();
    pages
}

// ---------------------------------------------------------------------------
// Random tree generation
// ---------------------------------------------------------------------------

const SAFE_TAGS: &[&str] = &[
    "div",
    "span",
    "section",
    "article",
    "p",
    "a",
    "b",
    "i",
    "em",
    "strong",
    "main",
    "aside",
    "figure",
    "ul",
    "header",
    "footer",
    "h1",
    "h2",
    "h3",
    "blockquote",
];

const WORDS: &[&str] = &[
    "render", "paint", "layout", "shift", "script", "style", "cache", "image", "defer", "async",
    "budget", "chunk", "node", "tree", "audit",
];

fn random_words(rng: &mut ChaCha8Rng, max: usize) -> String {
    let n = rng.random_range(1..=max);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_attrs(rng: &mut ChaCha8Rng) -> Vec<(String, String)> {
    let n = rng.random_range(0..3);
    let pool = ["class", "id", "data-x", "title", "data-track"];
    let mut picked: Vec<usize> = (0..pool.len()).collect();
    picked.shuffle(rng);
    picked
        .into_iter()
        .take(n)
        .map(|i| (pool[i].to_owned(), random_words(rng, 2)))
        .collect()
}

/// Random body-content fragment with realistic, parser-stable structure:
/// no adjacent text siblings, safe text alphabets, valid table shapes.
pub fn random_fragment(rng: &mut ChaCha8Rng, budget: &mut usize, depth: usize) -> Vec<DomNode> {
    let mut out: Vec<DomNode> = Vec::new();
    let sibling_count = rng.random_range(1..=4);
    for _ in 0..sibling_count {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        let last_was_text = matches!(out.last().map(|n| n.kind), Some(NodeKind::Text));
        let roll = rng.random_range(0..100);
        let node = if roll < 14 && !last_was_text {
            if rng.random_range(0..6) == 0 {
                DomNode::text(" \n  ".to_owned())
            } else {
                DomNode::text(random_words(rng, 6))
            }
        } else if roll < 20 {
            DomNode::comment(random_words(rng, 4))
        } else if roll < 26 {
            DomNode::script(
                random_attrs(rng),
                format!(
                    "var v{} = {};",
                    rng.random_range(0..40),
                    rng.random_range(0..1000)
                ),
            )
        } else if roll < 31 {
            DomNode::stylesheet(
                vec![],
                format!(
                    ".c{}{{color:#{:03x}}}",
                    rng.random_range(0..30),
                    rng.random_range(0..0xfff)
                ),
            )
        } else if roll < 37 && depth < 6 {
            table_subtree(rng, budget)
        } else {
            let tag = SAFE_TAGS[rng.random_range(0..SAFE_TAGS.len())];
            let children = if depth < 8 && *budget > 0 && rng.random_range(0..4) != 0 {
                random_fragment(rng, budget, depth + 1)
            } else {
                Vec::new()
            };
            let children = match (tag, children) {
                // Keep list structure valid so reparses don't rewrite it.
                ("ul", kids) => kids
                    .into_iter()
                    .map(|k| DomNode::element("li", vec![], vec![k]))
                    .collect(),
                (_, kids) => kids,
            };
            DomNode::element(tag, random_attrs(rng), children)
        };
        out.push(node);
    }
    out
}

fn table_subtree(rng: &mut ChaCha8Rng, budget: &mut usize) -> DomNode {
    let rows = rng.random_range(1..=3usize);
    let cols = rng.random_range(1..=3usize);
    *budget = budget.saturating_sub(rows * cols);
    let body = DomNode::element(
        "tbody",
        vec![],
        (0..rows)
            .map(|r| {
                DomNode::element(
                    "tr",
                    vec![],
                    (0..cols)
                        .map(|c| {
                            DomNode::element("td", vec![], vec![DomNode::text(format!("r{r}c{c}"))])
                        })
                        .collect(),
                )
            })
            .collect(),
    );
    DomNode::element("table", vec![], vec![body])
}

/// Serialized full-document HTML for a random page of roughly `max_nodes`.
pub fn random_document_html(rng: &mut ChaCha8Rng, max_nodes: usize) -> String {
    let mut budget = max_nodes;
    let body = random_fragment(rng, &mut budget, 0);
    let head = if rng.random_range(0..2) == 0 {
        format!("<title>{}</title>", random_words(rng, 3))
    } else {
        String::new()
    };
    let body_html = domremedy::dom::serialize_nodes(&body);
    format!("<html><head>{head}</head>\n<body>{body_html}</body></html>")
}

/// Small abstract tree for oracle comparisons: tiny label pools so matches,
/// moves, and collisions all occur.
pub fn random_small_tree(rng: &mut ChaCha8Rng, max_nodes: usize) -> DomNode {
    let mut budget = max_nodes.saturating_sub(1);
    random_small_node(rng, &mut budget, true)
}

fn random_small_node(rng: &mut ChaCha8Rng, budget: &mut usize, root: bool) -> DomNode {
    let roll = rng.random_range(0..10);
    if !root && roll < 3 {
        let text = ["x", "y"][rng.random_range(0..2)];
        return DomNode::text(text);
    }
    let name = ["a", "b", "c"][rng.random_range(0..3)];
    let attrs = if rng.random_range(0..3) == 0 {
        vec![(
            "k".to_owned(),
            ["1", "2"][rng.random_range(0..2)].to_owned(),
        )]
    } else {
        vec![]
    };
    let mut children = Vec::new();
    while *budget > 0 && rng.random_range(0..3) != 0 {
        *budget -= 1;
        children.push(random_small_node(rng, budget, false));
    }
    DomNode::element(name, attrs, children)
}

// ---------------------------------------------------------------------------
// Tree edit distance oracle: naive recursive forest distance, memoized.
// ---------------------------------------------------------------------------

pub fn ted_oracle(a: &DomNode, b: &DomNode) -> u64 {
    let left = Indexed::build(a);
    let right = Indexed::build(b);
    let mut memo = HashMap::new();
    forest_cost(&[0], &[0], &left, &right, &mut memo)
}

struct Indexed<'t> {
    nodes: Vec<&'t DomNode>,
    children: Vec<Vec<u16>>,
    sizes: Vec<u64>,
}

impl<'t> Indexed<'t> {
    fn build(root: &'t DomNode) -> Indexed<'t> {
        let mut ix = Indexed {
            nodes: Vec::new(),
            children: Vec::new(),
            sizes: Vec::new(),
        };
        ix.add(root);
        ix
    }

    fn add(&mut self, node: &'t DomNode) -> u16 {
        let id = self.nodes.len() as u16;
        self.nodes.push(node);
        self.children.push(Vec::new());
        self.sizes.push(0);
        let kids: Vec<u16> = node.children.iter().map(|c| self.add(c)).collect();
        let size = 1 + kids.iter().map(|&k| self.sizes[k as usize]).sum::<u64>();
        self.children[id as usize] = kids;
        self.sizes[id as usize] = size;
        id
    }
}

fn forest_cost(
    f1: &[u16],
    f2: &[u16],
    left: &Indexed,
    right: &Indexed,
    memo: &mut HashMap<(Vec<u16>, Vec<u16>), u64>,
) -> u64 {
    if f1.is_empty() {
        return f2.iter().map(|&n| right.sizes[n as usize]).sum();
    }
    if f2.is_empty() {
        return f1.iter().map(|&n| left.sizes[n as usize]).sum();
    }
    let key = (f1.to_vec(), f2.to_vec());
    if let Some(&hit) = memo.get(&key) {
        return hit;
    }

    let (a, rest1) = f1.split_first().expect("non-empty");
    let (b, rest2) = f2.split_first().expect("non-empty");
    let a_kids = &left.children[*a as usize];
    let b_kids = &right.children[*b as usize];

    let expand1: Vec<u16> = a_kids.iter().chain(rest1).copied().collect();
    let delete = 1 + forest_cost(&expand1, f2, left, right, memo);

    let expand2: Vec<u16> = b_kids.iter().chain(rest2).copied().collect();
    let insert = 1 + forest_cost(f1, &expand2, left, right, memo);

    let relabel = if label_equal(left.nodes[*a as usize], right.nodes[*b as usize]) {
        0
    } else {
        1
    };
    let matched = relabel
        + forest_cost(a_kids, b_kids, left, right, memo)
        + forest_cost(rest1, rest2, left, right, memo);

    let best = delete.min(insert).min(matched);
    memo.insert(key, best);
    best
}

// ---------------------------------------------------------------------------
// Structural diff oracle: same classification policy, exhaustive alignment.
// ---------------------------------------------------------------------------

pub fn diff_oracle_counts(a: &DomNode, b: &DomNode) -> BTreeMap<ChangeKind, u64> {
    let mut counts = BTreeMap::new();
    oracle_pair(a, b, &mut counts);
    counts
}

fn bump(counts: &mut BTreeMap<ChangeKind, u64>, kind: ChangeKind, n: u64) {
    if n > 0 {
        *counts.entry(kind).or_insert(0) += n;
    }
}

fn oracle_pair(a: &DomNode, b: &DomNode, counts: &mut BTreeMap<ChangeKind, u64>) {
    if a.kind != b.kind {
        bump(counts, ChangeKind::TypeChanged, 1);
        return;
    }
    if a.kind.is_element() {
        let mut added = 0;
        let mut changed = 0;
        for (k, vb) in &b.attrs {
            match a.attr(k) {
                None => added += 1,
                Some(va) if va != vb => changed += 1,
                Some(_) => {}
            }
        }
        let removed = a.attrs.iter().filter(|(k, _)| b.attr(k).is_none()).count() as u64;
        bump(counts, ChangeKind::AttributeAdded, added);
        bump(counts, ChangeKind::AttributeRemoved, removed);
        bump(counts, ChangeKind::AttrValueChanged, changed);
        if a.name != b.name {
            bump(counts, ChangeKind::TagChanged, 1);
        }
    }
    if a.text != b.text {
        bump(counts, ChangeKind::TextChanged, 1);
    }
    oracle_children(a, b, counts);
}

fn oracle_children(a: &DomNode, b: &DomNode, counts: &mut BTreeMap<ChangeKind, u64>) {
    let n = a.children.len();
    let m = b.children.len();
    if n == 0 && m == 0 {
        return;
    }
    let eq: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| tree_equal(&a.children[i], &b.children[j]))
                .collect()
        })
        .collect();

    // Phase 1: exhaustive search for the lexicographically smallest maximum
    // common subsequence under subtree equality.
    let mut pairs = lexmin_mcs(&eq, n, m);
    let mut matched_a = vec![false; n];
    let mut matched_b = vec![false; m];
    for &(i, j) in &pairs {
        matched_a[i] = true;
        matched_b[j] = true;
    }

    // Phase 2: equal subtrees that moved, left-to-right.
    for i in 0..n {
        if matched_a[i] {
            continue;
        }
        if let Some(j) = (0..m).find(|&j| !matched_b[j] && eq[i][j]) {
            matched_a[i] = true;
            matched_b[j] = true;
            pairs.push((i, j));
        }
    }

    // Phase 3: positional pairing of the content-changed leftovers.
    let rest_a: Vec<usize> = (0..n).filter(|&i| !matched_a[i]).collect();
    let rest_b: Vec<usize> = (0..m).filter(|&j| !matched_b[j]).collect();
    let zipped = rest_a.len().min(rest_b.len());
    for k in 0..zipped {
        pairs.push((rest_a[k], rest_b[k]));
    }
    bump(
        counts,
        ChangeKind::ElementRemoved,
        (rest_a.len() - zipped) as u64,
    );
    bump(
        counts,
        ChangeKind::ElementAdded,
        (rest_b.len() - zipped) as u64,
    );

    let moved = pairs.iter().filter(|(i, j)| i != j).count() as u64;
    bump(counts, ChangeKind::PositionChanged, moved);

    for k in 0..zipped {
        oracle_pair(&a.children[rest_a[k]], &b.children[rest_b[k]], counts);
    }
}

/// All-maximum-common-subsequence search returning the lexicographically
/// smallest pair sequence, memoized over (i, j) suffixes.
fn lexmin_mcs(eq: &[Vec<bool>], n: usize, m: usize) -> Vec<(usize, usize)> {
    // Suffix lengths.
    let mut len = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            len[i][j] = if eq[i][j] {
                len[i + 1][j + 1] + 1
            } else {
                len[i + 1][j].max(len[i][j + 1])
            };
        }
    }

    let mut memo: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    fn best(
        i: usize,
        j: usize,
        eq: &[Vec<bool>],
        len: &[Vec<usize>],
        n: usize,
        m: usize,
        memo: &mut HashMap<(usize, usize), Vec<(usize, usize)>>,
    ) -> Vec<(usize, usize)> {
        if i >= n || j >= m || len[i][j] == 0 {
            return Vec::new();
        }
        if let Some(hit) = memo.get(&(i, j)) {
            return hit.clone();
        }
        let target = len[i][j];
        let mut candidates: Vec<Vec<(usize, usize)>> = Vec::new();
        if eq[i][j] && len[i + 1][j + 1] + 1 == target {
            let mut seq = vec![(i, j)];
            seq.extend(best(i + 1, j + 1, eq, len, n, m, memo));
            candidates.push(seq);
        }
        if len[i + 1][j] == target {
            candidates.push(best(i + 1, j, eq, len, n, m, memo));
        }
        if len[i][j + 1] == target {
            candidates.push(best(i, j + 1, eq, len, n, m, memo));
        }
        let best_seq = candidates
            .into_iter()
            .min()
            .expect("target > 0 has a candidate");
        memo.insert((i, j), best_seq.clone());
        best_seq
    }
    best(0, 0, eq, &len, n, m, &mut memo)
}

// ---------------------------------------------------------------------------
// Spearman oracle: O(n^2) rank counting plus the raw-sums Pearson formula.
// ---------------------------------------------------------------------------

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    let rx = naive_ranks(x);
    let ry = naive_ranks(y);
    let n = x.len() as f64;
    let sx: f64 = rx.iter().sum();
    let sy: f64 = ry.iter().sum();
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    let sxx: f64 = rx.iter().map(|a| a * a).sum();
    let syy: f64 = ry.iter().map(|a| a * a).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn naive_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let less = values.iter().filter(|&&o| o < v).count() as f64;
            let equal = values.iter().filter(|&&o| o == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}
