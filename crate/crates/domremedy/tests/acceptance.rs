//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `cargo test --test acceptance -- --nocapture`
//! to see them). Expected values come from committed fixtures and
//! independent oracles in `common`.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use domremedy::audit::{filter_actionable, AuditRecord, AuditReport, ScoreDisplayMode, Variant};
use domremedy::chunk::{
    plan_chunks, verify_roundtrip, ChunkIdGen, DefaultEstimator, TokenEstimator, DEFAULT_BUDGET,
    DEFAULT_HEADROOM,
};
use domremedy::diff::{diff_trees, modification_metrics, Change, ChangeKind, ChangeSet};
use domremedy::dom::{parse_html, tree_edit_distance, UnitCost};
use domremedy::metrics::{
    air, format_2dp, incidence_table, pct_change_air, spearman_rho, CountingMode,
};
use domremedy::workspace::{run_pipeline, NullProgress, PipelineConfig};
use domremedy::TreePath;

fn pass(n: u32, name: &str) {
    println!("ACCEPTANCE {n} {name}: PASS");
}

/// Criterion 1: chunk/reassemble round trip over the committed page corpus
/// plus 1,000 fuzz-generated trees, inside 60 seconds.
#[test]
fn acceptance_01_chunk_reassemble_roundtrip() {
    let started = Instant::now();

    let pages = common::fixture_pages();
    assert!(
        pages.len() >= 10,
        "corpus must hold at least 10 pages, found {}",
        pages.len()
    );
    for page in &pages {
        let bytes = std::fs::read(page).expect("fixture page");
        let doc = parse_html(&bytes, None).expect("fixture page parses");
        let report = verify_roundtrip(&doc, &DefaultEstimator, DEFAULT_BUDGET, DEFAULT_HEADROOM)
            .expect("valid budget");
        assert!(report.ok, "round trip failed for {}", page.display());
        assert_eq!(report.ted, Some(0), "TED must be 0 for {}", page.display());
    }

    let mut rng = common::rng(0xC0FFEE);
    for case in 0..1_000 {
        let html = common::random_document_html(&mut rng, 60);
        let doc = parse_html(html.as_bytes(), None).expect("generated page parses");
        // Small budgets force deep recursive splits across varied contexts.
        let budget = [300usize, 800, 15_000][case % 3];
        let report =
            verify_roundtrip(&doc, &DefaultEstimator, budget, budget / 15).expect("valid budget");
        assert!(report.ok, "fuzz case {case} failed roundtrip:\n{html}");
        assert_eq!(report.ted, Some(0), "fuzz case {case} TED != 0");
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion 1 overran: {elapsed:?}");
    pass(1, "chunk/reassemble round trip (corpus + 1000 fuzz trees)");
}

/// Criterion 2: every chunk planned at budget 15000 satisfies
/// estimator(chunk) <= 15000 exactly, with no oversize escape hatch used.
#[test]
fn acceptance_02_budget_compliance() {
    for page in common::fixture_pages() {
        let bytes = std::fs::read(&page).expect("fixture page");
        let doc = parse_html(&bytes, None).expect("fixture page parses");
        let mut ids = ChunkIdGen::from_seed(2);
        let manifest = plan_chunks(
            &doc,
            &DefaultEstimator,
            DEFAULT_BUDGET,
            DEFAULT_HEADROOM,
            &mut ids,
        )
        .expect("valid budget");
        for chunk in &manifest.chunks {
            assert!(
                !chunk.oversize,
                "{}: unexpected oversize chunk",
                page.display()
            );
            let measured = DefaultEstimator.estimate(&chunk.html);
            assert_eq!(
                measured,
                chunk.token_count,
                "{}: stale token count",
                page.display()
            );
            assert!(
                measured <= DEFAULT_BUDGET,
                "{}: chunk of {measured} tokens exceeds {DEFAULT_BUDGET}",
                page.display()
            );
        }
    }
    pass(2, "budget compliance at 15000 tokens (exact)");
}

/// Criterion 3: Zhang–Shasha distance equals the exhaustive oracle on 500
/// random tree pairs of up to 8 nodes, inside 30 seconds.
#[test]
fn acceptance_03_ted_matches_bruteforce_oracle() {
    let started = Instant::now();
    let mut rng = common::rng(0x7ED);
    for case in 0..500 {
        let a = common::random_small_tree(&mut rng, 8);
        let b = common::random_small_tree(&mut rng, 8);
        let fast = tree_edit_distance(&a, &b, &UnitCost).expect("small trees");
        let slow = common::ted_oracle(&a, &b);
        assert_eq!(
            fast, slow,
            "case {case}: ted {fast} != oracle {slow}\n{a:#?}\n{b:#?}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "criterion 3 overran: {elapsed:?}");
    pass(
        3,
        "tree edit distance equals brute-force oracle (500 pairs)",
    );
}

fn record(id: &str, mode: &str, score: Option<f64>) -> AuditRecord {
    AuditRecord {
        id: id.into(),
        title: format!("{id} title"),
        description: String::new(),
        score,
        score_display_mode: ScoreDisplayMode::from_wire(mode),
        display_value: None,
        details: None,
    }
}

fn report_with(page: &str, variant: Variant, ids: &[&str]) -> AuditReport {
    AuditReport {
        page_id: page.into(),
        variant,
        audits: ids
            .iter()
            .map(|id| record(id, "binary", Some(0.0)))
            .collect(),
        lighthouse_score: None,
        captured_at: 0,
        tool_version: String::new(),
    }
}

/// Criterion 4: the mode-exclusion rule keeps exactly binary-fail and
/// numeric entries from a report exercising every display mode.
#[test]
fn acceptance_04_audit_filtering() {
    let report = AuditReport {
        page_id: "fixture".into(),
        variant: Variant::Original,
        audits: vec![
            record("binary-zero", "binary", Some(0.0)),
            record("binary-one", "binary", Some(1.0)),
            record("numeric-entry", "numeric", Some(0.37)),
            record("manual-entry", "manual", None),
            record("informative-entry", "informative", Some(0.0)),
            record("na-entry", "notApplicable", None),
        ],
        lighthouse_score: None,
        captured_at: 0,
        tool_version: String::new(),
    };
    let kept: std::collections::BTreeSet<String> = filter_actionable(&report)
        .into_iter()
        .map(|r| r.id)
        .collect();
    let expected: std::collections::BTreeSet<String> = ["binary-zero", "numeric-entry"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert_eq!(kept, expected);
    pass(
        4,
        "audit filtering keeps exactly binary-fail and numeric entries",
    );
}

#[derive(serde::Deserialize)]
struct IncidenceFixture {
    total_pages: usize,
    rows: Vec<IncidenceFixtureRow>,
}

#[derive(serde::Deserialize)]
struct IncidenceFixtureRow {
    audit: String,
    original_ir: String,
    modified_ir: String,
    initial_count: u64,
    modified_count: u64,
    pct_change: String,
    category: String,
}

/// Criterion 5: AIR and percentage change reproduce the committed
/// reference incidence table, all 67 rows, to two decimals.
#[test]
fn acceptance_05_incidence_reference_reproduction() {
    let text = std::fs::read_to_string(common::fixture_dir().join("incidence_reference.json"))
        .expect("incidence fixture");
    let fixture: IncidenceFixture = serde_json::from_str(&text).expect("fixture parses");
    assert_eq!(fixture.rows.len(), 67);
    let total = fixture.total_pages;

    for row in &fixture.rows {
        // Original side: one report per page, the audit actionable on the
        // first `initial_count` of them.
        let originals: Vec<AuditReport> = (0..total)
            .map(|p| {
                let ids: Vec<&str> = if (p as u64) < row.initial_count {
                    vec![row.audit.as_str()]
                } else {
                    vec![]
                };
                report_with(&format!("p{p}"), Variant::Original, &ids)
            })
            .collect();

        let got_air = air(&row.audit, &originals);
        assert_eq!(
            format_2dp(got_air),
            row.original_ir,
            "{}: original IR mismatch",
            row.audit
        );

        // Modified side: per-incidence counting, spreading incidences over
        // pages round-robin (counts above the page total model several
        // model variants of the same page still failing).
        let modified: Vec<AuditReport> = (0..row.modified_count)
            .map(|k| {
                report_with(
                    &format!("p{}", k % total as u64),
                    Variant::Modified(format!("m{}", k / total as u64)),
                    &[row.audit.as_str()],
                )
            })
            .collect();
        let table = incidence_table(&originals, &modified, CountingMode::PerIncidence);
        let got = table.row(&row.audit).expect("row present");
        assert_eq!(got.original_count, row.initial_count, "{}", row.audit);
        assert_eq!(got.modified_count, row.modified_count, "{}", row.audit);
        assert_eq!(
            format_2dp(got.modified_air),
            row.modified_ir,
            "{}",
            row.audit
        );

        let pct = pct_change_air(row.initial_count as f64, row.modified_count as f64)
            .expect("all fixture baselines are positive");
        assert_eq!(
            format_2dp(pct),
            row.pct_change,
            "{}: % change mismatch",
            row.audit
        );

        if row.category == "SEO & Accessibility" {
            assert_eq!(
                row.pct_change, "-100.00",
                "{}: SEO rows all resolve fully",
                row.audit
            );
        }
    }

    // The named spot checks, stated explicitly.
    let spot = |audit: &str| {
        fixture
            .rows
            .iter()
            .find(|r| r.audit == audit)
            .expect("spot row")
    };
    assert_eq!(spot("first-contentful-paint").original_ir, "1.00");
    assert_eq!(spot("total-byte-weight").pct_change, "-80.00");
    assert_eq!(spot("largest-contentful-paint").pct_change, "78.57");
    pass(5, "incidence reference table reproduced (67 rows, 2dp)");
}

/// Criterion 6: EATRR reproduces the nine pooled reference ratios to two
/// decimals; PCD satisfies its definitional formula exactly.
#[test]
fn acceptance_06_eatrr_and_pcd() {
    // (elements added, elements removed, expected 2dp EATRR)
    let reference: [(u64, u64, &str); 9] = [
        (90, 11, "0.89"),
        (77, 11, "0.88"),
        (37, 37, "0.50"),
        (106, 18, "0.85"),
        (111, 14, "0.89"),
        (22, 28, "0.44"),
        (90, 45, "0.67"),
        (133, 21, "0.86"),
        (70, 25, "0.74"),
    ];
    for (added, removed, expected) in reference {
        let cs = synthetic_changeset(&[
            (ChangeKind::ElementAdded, added),
            (ChangeKind::ElementRemoved, removed),
        ]);
        let metrics = modification_metrics(&cs);
        assert_eq!(
            format_2dp(metrics.eatrr.expect("defined")),
            expected,
            "EATRR for {added}/{removed}"
        );
    }

    // PCD definitional checks on constructed change sets.
    for (attr, tag, pos, text) in [(10u64, 7u64, 57u64, 24u64), (0, 0, 5, 0), (3, 1, 0, 4)] {
        let cs = synthetic_changeset(&[
            (ChangeKind::AttrValueChanged, attr),
            (ChangeKind::TagChanged, tag),
            (ChangeKind::PositionChanged, pos),
            (ChangeKind::TextChanged, text),
        ]);
        let metrics = modification_metrics(&cs);
        let expected = pos as f64 / (attr + tag + pos + text) as f64;
        assert_eq!(
            metrics.pcd,
            Some(expected),
            "PCD for {attr}/{tag}/{pos}/{text}"
        );
    }
    let empty = synthetic_changeset(&[]);
    assert_eq!(modification_metrics(&empty).pcd, None);
    assert_eq!(modification_metrics(&empty).eatrr, None);
    pass(
        6,
        "EATRR reproduces all nine reference ratios; PCD definitional",
    );
}

fn synthetic_changeset(counts: &[(ChangeKind, u64)]) -> ChangeSet {
    let mut changes = Vec::new();
    for &(kind, n) in counts {
        for _ in 0..n {
            changes.push(Change {
                kind,
                path: TreePath::from_indices(vec![0]),
                depth: 1,
                attr: None,
                before: None,
                after: None,
            });
        }
    }
    ChangeSet::from_changes("p".into(), "m".into(), changes)
}

/// Criterion 7: diff classification counts match the exhaustive-alignment
/// oracle on 500 random pairs; diff(t, t) is empty on all fuzz inputs.
#[test]
fn acceptance_07_diff_matches_bruteforce_oracle() {
    let mut rng = common::rng(0xD1FF);
    for case in 0..500 {
        let a = common::random_small_tree(&mut rng, 12);
        let b = common::random_small_tree(&mut rng, 12);

        let self_diff = diff_trees(&a, &a);
        assert!(self_diff.is_empty(), "case {case}: diff(t, t) not empty");

        let cs = diff_trees(&a, &b);
        let oracle = common::diff_oracle_counts(&a, &b);
        let got: BTreeMap<ChangeKind, u64> = cs
            .counts
            .iter()
            .map(|(k, v)| (*k, *v))
            .filter(|(_, v)| *v > 0)
            .collect();
        assert_eq!(got, oracle, "case {case}: counts diverge\n{a:#?}\n{b:#?}");
    }
    pass(
        7,
        "diff classification equals exhaustive-alignment oracle (500 pairs)",
    );
}

/// Criterion 8: full pipeline, identity backend, replay auditor, three
/// fixture pages: empty change sets and 0.00 %Δ everywhere, offline.
#[test]
fn acceptance_08_closed_loop_identity() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let config = closed_loop_config();
    let outcome =
        run_pipeline(&config, &tmp.path().join("ws"), &NullProgress, false).expect("pipeline runs");
    assert!(
        outcome.failures.is_empty(),
        "failures: {:#?}",
        outcome.failures
    );

    let summary = outcome
        .report
        .per_model
        .get("identity")
        .expect("identity summary");
    assert!(
        !summary.incidence.rows.is_empty(),
        "fixture audits must surface"
    );
    for row in &summary.incidence.rows {
        assert_eq!(
            row.pct_change.map(format_2dp).as_deref(),
            Some("0.00"),
            "audit {} must be unchanged",
            row.audit_id
        );
    }
    for (category, row) in &summary.categories.rows {
        assert_eq!(
            row.pct_change.map(format_2dp).as_deref(),
            Some("0.00"),
            "category {category} must be unchanged"
        );
    }

    // Change sets persisted per page×model are all empty.
    for page in ["blog", "landing", "news-site"] {
        let path = tmp.path().join("ws").join(page).join("diffs/identity.json");
        let cs: ChangeSet =
            serde_json::from_str(&std::fs::read_to_string(&path).expect("diff artifact"))
                .expect("changeset parses");
        assert!(cs.is_empty(), "{page}: expected an empty change set");
    }
    assert_eq!(summary.changes.elements_added, 0);
    assert_eq!(summary.changes.values_pos, 0);
    pass(
        8,
        "closed-loop identity run: empty change sets, 0.00 %Δ, offline",
    );
}

/// Replay auditor + identity backend + local files: nothing in this
/// configuration can open a socket, and the auditor path is poisoned so a
/// live invocation would fail loudly.
fn closed_loop_config() -> PipelineConfig {
    let fixtures = common::fixture_dir();
    PipelineConfig {
        pages: ["blog", "landing", "news-site"]
            .iter()
            .map(|p| {
                fixtures
                    .join("pages")
                    .join(format!("{p}.html"))
                    .display()
                    .to_string()
            })
            .collect(),
        models: vec!["identity".into()],
        audit_mode: domremedy::workspace::AuditMode::Replay,
        audit_fixtures: Some(fixtures.join("audits")),
        auditor: Some("/nonexistent/never-invoked".into()),
        seed: Some(42),
        ..Default::default()
    }
}

/// Criterion 9: Spearman matches a naive oracle to 1e-12 on 1,000 random
/// vectors and returns exactly -0.96 on the committed fixture pair.
#[test]
fn acceptance_09_spearman() {
    use rand::Rng;
    let mut rng = common::rng(0x5EA);
    let mut checked = 0;
    while checked < 1_000 {
        let n = rng.random_range(2..50);
        let x: Vec<f64> = (0..n)
            .map(|_| (rng.random_range(-50..50) as f64) / 4.0)
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|_| (rng.random_range(-50..50) as f64) / 4.0)
            .collect();
        let constant = |v: &[f64]| v.iter().all(|&e| e == v[0]);
        if constant(&x) || constant(&y) {
            continue;
        }
        let fast = spearman_rho(&x, &y).expect("non-degenerate");
        let slow = common::spearman_oracle(&x, &y);
        assert!(
            (fast - slow).abs() <= 1e-12,
            "case {checked}: {fast} vs oracle {slow} (n={n})"
        );
        checked += 1;
    }

    #[derive(serde::Deserialize)]
    struct SpearmanFixture {
        x: Vec<f64>,
        y: Vec<f64>,
        expected_rho: f64,
    }
    let text = std::fs::read_to_string(common::fixture_dir().join("spearman_reference.json"))
        .expect("spearman fixture");
    let fixture: SpearmanFixture = serde_json::from_str(&text).expect("fixture parses");
    let rho = spearman_rho(&fixture.x, &fixture.y).expect("permutation input");
    assert!(
        (rho - fixture.expected_rho).abs() <= 0.005,
        "fixture rho {rho} not within 0.005 of {}",
        fixture.expected_rho
    );
    // The fixture was constructed to hit the value exactly.
    assert!(
        (rho - -0.96).abs() <= 1e-12,
        "fixture rho {rho} should be exact"
    );
    pass(
        9,
        "spearman equals naive oracle (1000 vectors) and fixture -0.96",
    );
}

/// Criterion 10: two pipeline runs with the same seed produce byte-identical
/// workspaces and reports.
#[test]
fn acceptance_10_run_determinism() {
    let config = closed_loop_config();
    let tmp_a = tempfile::tempdir().expect("tempdir a");
    let tmp_b = tempfile::tempdir().expect("tempdir b");
    let a =
        run_pipeline(&config, &tmp_a.path().join("ws"), &NullProgress, false).expect("first run");
    let b =
        run_pipeline(&config, &tmp_b.path().join("ws"), &NullProgress, false).expect("second run");
    assert!(a.failures.is_empty() && b.failures.is_empty());

    let files_a = walk(&tmp_a.path().join("ws"));
    let files_b = walk(&tmp_b.path().join("ws"));
    let rels = |m: &BTreeMap<String, Vec<u8>>| m.keys().cloned().collect::<Vec<_>>();
    assert_eq!(rels(&files_a), rels(&files_b), "file sets differ");
    for (rel, bytes) in &files_a {
        assert_eq!(bytes, &files_b[rel], "artifact differs between runs: {rel}");
    }
    assert_eq!(
        serde_json::to_string(&a.report).expect("report"),
        serde_json::to_string(&b.report).expect("report"),
        "consolidated reports differ"
    );
    pass(
        10,
        "seeded runs produce byte-identical workspaces and reports",
    );
}

fn walk(root: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("readable dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .expect("under root")
                    .display()
                    .to_string();
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}
