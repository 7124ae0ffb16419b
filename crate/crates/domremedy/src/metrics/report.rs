//! Consolidated run report: incidence tables, category change matrix, and
//! change-summary matrix, rendered as CSV or Markdown.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{format_2dp, AggregationMode, CategoryRollup, CountingMode, IncidenceTable};
use crate::audit::{AuditCategory, CategoryMap};
use crate::diff::{depth_summary, ChangeKind, ChangeSet};

/// Table-4-shaped pooled change summary for one model across all pages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChangeSummaryRow {
    pub eatrr: Option<f64>,
    pub pcd: Option<f64>,
    pub attributes_added: u64,
    pub attributes_removed: u64,
    pub elements_added: u64,
    pub elements_removed: u64,
    pub types_changed: u64,
    pub depth_min: Option<usize>,
    pub depth_max: Option<usize>,
    pub depth_median: Option<usize>,
    pub values_attr: u64,
    pub values_tag: u64,
    pub values_pos: u64,
    pub values_text: u64,
}

impl ChangeSummaryRow {
    /// Pool counts over per-page change sets; depth stats run over every
    /// change from every page.
    pub fn from_changesets(sets: &[ChangeSet]) -> ChangeSummaryRow {
        let count = |kind: ChangeKind| sets.iter().map(|cs| cs.count(kind)).sum::<u64>();
        let pooled_changes: Vec<crate::diff::Change> = sets
            .iter()
            .flat_map(|cs| cs.changes.iter().cloned())
            .collect();
        let pooled = ChangeSet::from_changes(String::new(), String::new(), pooled_changes);
        let metrics = crate::diff::modification_metrics(&pooled);
        let depths = depth_summary(&pooled);
        ChangeSummaryRow {
            eatrr: metrics.eatrr,
            pcd: metrics.pcd,
            attributes_added: count(ChangeKind::AttributeAdded),
            attributes_removed: count(ChangeKind::AttributeRemoved),
            elements_added: count(ChangeKind::ElementAdded),
            elements_removed: count(ChangeKind::ElementRemoved),
            types_changed: count(ChangeKind::TypeChanged),
            depth_min: depths.min,
            depth_max: depths.max,
            depth_median: depths.median,
            values_attr: count(ChangeKind::AttrValueChanged),
            values_tag: count(ChangeKind::TagChanged),
            values_pos: count(ChangeKind::PositionChanged),
            values_text: count(ChangeKind::TextChanged),
        }
    }
}

/// Everything measured for one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRunSummary {
    pub incidence: IncidenceTable,
    pub categories: CategoryRollup,
    pub changes: ChangeSummaryRow,
}

/// The consolidated, persistable result of a pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub generated_at: u64,
    pub tool_versions: BTreeMap<String, String>,
    pub prompt_template_hash: String,
    pub counting_mode: CountingMode,
    pub aggregation_mode: AggregationMode,
    pub budget: usize,
    pub headroom: usize,
    pub estimator: String,
    pub seed: Option<u64>,
    pub pages: Vec<String>,
    pub models: Vec<String>,
    pub per_model: BTreeMap<String, ModelRunSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<ReportFormat> {
        match s {
            "csv" => Some(ReportFormat::Csv),
            "markdown" | "md" => Some(ReportFormat::Markdown),
            _ => None,
        }
    }
}

fn opt_pct(v: Option<f64>) -> String {
    v.map(format_2dp).unwrap_or_else(|| "n/a".to_owned())
}

fn opt_ratio(v: Option<f64>) -> String {
    v.map(format_2dp).unwrap_or_else(|| "n/a".to_owned())
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|d| d.to_string()).unwrap_or_else(|| "n/a".to_owned())
}

fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

/// Render the three report tables deterministically.
pub fn emit_report(run: &RunReport, map: &CategoryMap, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => emit_csv(run, map),
        ReportFormat::Markdown => emit_markdown(run, map),
    }
}

const INCIDENCE_HEADER: [&str; 7] = [
    "Category",
    "Audit",
    "Original IR",
    "Modified IR",
    "Initial Count",
    "Modified Count",
    "% Change",
];

const SUMMARY_HEADER: [&str; 14] = [
    "Model",
    "EATRR",
    "PCD",
    "Attrs Added",
    "Attrs Removed",
    "Elements Added",
    "Elements Removed",
    "Types Changed",
    "Depth Min",
    "Depth Max",
    "Depth Med",
    "Values Attr",
    "Values Tag",
    "Values Pos",
];

/// Incidence rows grouped by category, then most-improved first — the
/// conventional reading order for incidence tables.
fn incidence_rows<'a>(
    table: &'a IncidenceTable,
    map: &CategoryMap,
) -> Vec<(AuditCategory, &'a super::IncidenceRow)> {
    let mut rows: Vec<(AuditCategory, &super::IncidenceRow)> = table
        .rows
        .iter()
        .map(|r| (map.categorize(&r.audit_id), r))
        .collect();
    rows.sort_by(|(ca, ra), (cb, rb)| {
        let ka = AuditCategory::ALL
            .iter()
            .position(|c| c == ca)
            .unwrap_or(usize::MAX);
        let kb = AuditCategory::ALL
            .iter()
            .position(|c| c == cb)
            .unwrap_or(usize::MAX);
        ka.cmp(&kb)
            .then_with(|| {
                let pa = ra.pct_change.unwrap_or(f64::INFINITY);
                let pb = rb.pct_change.unwrap_or(f64::INFINITY);
                pa.partial_cmp(&pb).unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| ra.audit_id.cmp(&rb.audit_id))
    });
    rows
}

fn incidence_cells(category: AuditCategory, row: &super::IncidenceRow) -> [String; 7] {
    [
        category.label().to_owned(),
        row.audit_id.clone(),
        format_2dp(row.original_air),
        format_2dp(row.modified_air),
        row.original_count.to_string(),
        row.modified_count.to_string(),
        opt_pct(row.pct_change),
    ]
}

fn summary_cells(model: &str, row: &ChangeSummaryRow) -> Vec<String> {
    vec![
        model.to_owned(),
        opt_ratio(row.eatrr),
        opt_ratio(row.pcd),
        row.attributes_added.to_string(),
        row.attributes_removed.to_string(),
        row.elements_added.to_string(),
        row.elements_removed.to_string(),
        row.types_changed.to_string(),
        opt_usize(row.depth_min),
        opt_usize(row.depth_max),
        opt_usize(row.depth_median),
        row.values_attr.to_string(),
        row.values_tag.to_string(),
        row.values_pos.to_string(),
        row.values_text.to_string(),
    ]
}

fn emit_csv(run: &RunReport, map: &CategoryMap) -> String {
    let mut out = String::new();

    for (model, summary) in &run.per_model {
        out.push_str(&format!(
            "# incidence {model} (counting: {:?})\n",
            run.counting_mode
        ));
        out.push_str(&INCIDENCE_HEADER.join(","));
        out.push('\n');
        for (category, row) in incidence_rows(&summary.incidence, map) {
            let cells = incidence_cells(category, row);
            let quoted: Vec<String> = cells.iter().map(|c| csv_quote(c)).collect();
            out.push_str(&quoted.join(","));
            out.push('\n');
        }
        out.push('\n');
    }

    out.push_str("# category-change\n");
    let mut header = vec!["Category".to_owned()];
    header.extend(run.models.iter().cloned());
    out.push_str(
        &header
            .iter()
            .map(|h| csv_quote(h))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for category in AuditCategory::ALL {
        let mut cells = vec![category.label().to_owned()];
        let mut any = false;
        for model in &run.models {
            let cell = run
                .per_model
                .get(model)
                .and_then(|s| s.categories.rows.get(&category))
                .and_then(|r| r.pct_change);
            if run
                .per_model
                .get(model)
                .is_some_and(|s| s.categories.rows.contains_key(&category))
            {
                any = true;
            }
            cells.push(opt_pct(cell));
        }
        if any {
            out.push_str(
                &cells
                    .iter()
                    .map(|c| csv_quote(c))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            out.push('\n');
        }
    }
    out.push('\n');

    out.push_str("# change-summary\n");
    let mut header: Vec<&str> = SUMMARY_HEADER.to_vec();
    header.push("Values Text");
    out.push_str(&header.join(","));
    out.push('\n');
    for (model, summary) in &run.per_model {
        let cells = summary_cells(model, &summary.changes);
        out.push_str(
            &cells
                .iter()
                .map(|c| csv_quote(c))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    out
}

fn md_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn md_separator(n: usize) -> String {
    format!("|{}\n", " --- |".repeat(n))
}

fn emit_markdown(run: &RunReport, map: &CategoryMap) -> String {
    let mut out = String::new();

    for (model, summary) in &run.per_model {
        out.push_str(&format!(
            "## Audit incidence — {model} (counting: {:?})\n\n",
            run.counting_mode
        ));
        out.push_str(&md_row(&INCIDENCE_HEADER.map(String::from)));
        out.push_str(&md_separator(INCIDENCE_HEADER.len()));
        for (category, row) in incidence_rows(&summary.incidence, map) {
            out.push_str(&md_row(&incidence_cells(category, row)));
        }
        out.push('\n');
    }

    out.push_str("## Category change by model\n\n");
    let mut header = vec!["Category".to_owned()];
    header.extend(run.models.iter().cloned());
    out.push_str(&md_row(&header));
    out.push_str(&md_separator(header.len()));
    for category in AuditCategory::ALL {
        let mut cells = vec![category.label().to_owned()];
        let mut any = false;
        for model in &run.models {
            let row = run
                .per_model
                .get(model)
                .and_then(|s| s.categories.rows.get(&category));
            if row.is_some() {
                any = true;
            }
            cells.push(opt_pct(row.and_then(|r| r.pct_change)));
        }
        if any {
            out.push_str(&md_row(&cells));
        }
    }
    out.push('\n');

    out.push_str("## Change summary by model\n\n");
    let mut header: Vec<String> = SUMMARY_HEADER.map(String::from).to_vec();
    header.push("Values Text".to_owned());
    out.push_str(&md_row(&header));
    out.push_str(&md_separator(header.len()));
    for (model, summary) in &run.per_model {
        out.push_str(&md_row(&summary_cells(model, &summary.changes)));
    }
    out
}
