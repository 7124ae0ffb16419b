//! Audit incidence metrics: AIR, percentage change, per-category rollups,
//! and Spearman rank correlation.
//!
//! AIR for an audit is the number of unique pages where it is actionable
//! divided by the total page count. The modified side of an incidence table
//! can alternatively count per-incidence (every report, not unique pages),
//! which is why modified counts may exceed the page total; tables always
//! record which mode produced them.

mod report;

pub use report::{emit_report, ChangeSummaryRow, ModelRunSummary, ReportFormat, RunReport};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::audit::{filter_actionable, AuditCategory, AuditReport, CategoryMap};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("percentage change is undefined for a zero baseline")]
    UndefinedBaseline,
    #[error("input vectors must have equal length >= 2 (got {left} and {right})")]
    BadLength { left: usize, right: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
}

/// How occurrences are counted on a side of the incidence table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingMode {
    /// Unique pages containing the audit (the AIR definition).
    UniquePages,
    /// Every report containing the audit; exceeds the page total when
    /// several model variants of one page all exhibit it.
    PerIncidence,
}

/// How per-audit changes aggregate into a category figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Sum counts per category, then one percentage change over the sums.
    PooledCounts,
    /// Mean of the per-audit percentage changes with defined baselines.
    MeanOfAuditPct,
}

/// Audit incidence ratio: unique pages whose actionable audits contain
/// `audit_id`, over the total number of pages in `reports`.
pub fn air(audit_id: &str, reports: &[AuditReport]) -> f64 {
    let total = distinct_pages(reports);
    if total == 0 {
        return 0.0;
    }
    let hits = count_unique_pages(reports, audit_id);
    hits as f64 / total as f64
}

/// Percentage change between a baseline and a modified measurement; works
/// identically on counts and on ratios over the same page total.
pub fn pct_change_air(original: f64, modified: f64) -> Result<f64, MetricsError> {
    if original == 0.0 {
        return Err(MetricsError::UndefinedBaseline);
    }
    Ok((modified - original) / original * 100.0)
}

fn distinct_pages(reports: &[AuditReport]) -> usize {
    reports
        .iter()
        .map(|r| r.page_id.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

fn count_unique_pages(reports: &[AuditReport], audit_id: &str) -> usize {
    reports
        .iter()
        .filter(|r| filter_actionable(r).iter().any(|a| a.id == audit_id))
        .map(|r| r.page_id.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

fn count_incidences(reports: &[AuditReport], audit_id: &str) -> usize {
    reports
        .iter()
        .filter(|r| filter_actionable(r).iter().any(|a| a.id == audit_id))
        .count()
}

/// One audit's row in an incidence table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncidenceRow {
    pub audit_id: String,
    pub original_count: u64,
    pub modified_count: u64,
    pub original_air: f64,
    pub modified_air: f64,
    /// `None` when the audit never occurred on the original side.
    pub pct_change: Option<f64>,
}

/// Incidence comparison between original and modified report sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncidenceTable {
    pub total_pages: u64,
    pub counting_mode: CountingMode,
    /// Rows sorted by audit id.
    pub rows: Vec<IncidenceRow>,
}

impl IncidenceTable {
    pub fn row(&self, audit_id: &str) -> Option<&IncidenceRow> {
        self.rows.iter().find(|r| r.audit_id == audit_id)
    }
}

/// Build the incidence table over every audit actionable on either side.
///
/// The original side always counts unique pages (one original report per
/// page); `mode` selects how the modified side is counted.
pub fn incidence_table(
    original: &[AuditReport],
    modified: &[AuditReport],
    mode: CountingMode,
) -> IncidenceTable {
    let total = distinct_pages(original) as u64;

    let mut universe: BTreeSet<String> = BTreeSet::new();
    for report in original.iter().chain(modified) {
        for audit in filter_actionable(report) {
            universe.insert(audit.id);
        }
    }

    let mut rows = Vec::with_capacity(universe.len());
    for audit_id in universe {
        let original_count = count_unique_pages(original, &audit_id) as u64;
        let modified_count = match mode {
            CountingMode::UniquePages => count_unique_pages(modified, &audit_id) as u64,
            CountingMode::PerIncidence => count_incidences(modified, &audit_id) as u64,
        };
        let original_air = if total == 0 {
            0.0
        } else {
            original_count as f64 / total as f64
        };
        let modified_air = if total == 0 {
            0.0
        } else {
            modified_count as f64 / total as f64
        };
        let pct_change = pct_change_air(original_count as f64, modified_count as f64).ok();
        rows.push(IncidenceRow {
            audit_id,
            original_count,
            modified_count,
            original_air,
            modified_air,
            pct_change,
        });
    }
    IncidenceTable {
        total_pages: total,
        counting_mode: mode,
        rows,
    }
}

/// Per-category aggregate of an incidence table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryRow {
    pub original_total: u64,
    pub modified_total: u64,
    pub pct_change: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryRollup {
    pub aggregation_mode: AggregationMode,
    pub rows: BTreeMap<AuditCategory, CategoryRow>,
}

pub fn category_rollup(
    table: &IncidenceTable,
    map: &CategoryMap,
    mode: AggregationMode,
) -> CategoryRollup {
    let mut grouped: BTreeMap<AuditCategory, Vec<&IncidenceRow>> = BTreeMap::new();
    for row in &table.rows {
        grouped
            .entry(map.categorize(&row.audit_id))
            .or_default()
            .push(row);
    }

    let mut rows = BTreeMap::new();
    for (category, members) in grouped {
        let original_total: u64 = members.iter().map(|r| r.original_count).sum();
        let modified_total: u64 = members.iter().map(|r| r.modified_count).sum();
        let pct_change = match mode {
            AggregationMode::PooledCounts => {
                pct_change_air(original_total as f64, modified_total as f64).ok()
            }
            AggregationMode::MeanOfAuditPct => {
                let defined: Vec<f64> = members.iter().filter_map(|r| r.pct_change).collect();
                if defined.is_empty() {
                    None
                } else {
                    Some(defined.iter().sum::<f64>() / defined.len() as f64)
                }
            }
        };
        rows.insert(
            category,
            CategoryRow {
                original_total,
                modified_total,
                pct_change,
            },
        );
    }
    CategoryRollup {
        aggregation_mode: mode,
        rows,
    }
}

/// Spearman rank correlation: Pearson correlation of rank vectors, with
/// average ranks for ties.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(MetricsError::BadLength {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricsError::DegenerateInput("non-finite value"));
    }
    let constant = |v: &[f64]| v.iter().all(|&e| e == v[0]);
    if constant(x) || constant(y) {
        return Err(MetricsError::DegenerateInput("constant vector"));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    Ok(pearson(&rx, &ry))
}

/// 1-based ranks; tied values share the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let mean_rank = (start + end) as f64 / 2.0 + 1.0;
        for &idx in &order[start..=end] {
            ranks[idx] = mean_rank;
        }
        start = end + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&xa, &xb) in a.iter().zip(b) {
        let da = xa - mean_a;
        let db = xb - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    cov / (var_a.sqrt() * var_b.sqrt())
}

/// Round to `decimals` places with ties away from zero.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    let factor = 10f64.powi(decimals as i32);
    (value * factor).round() / factor
}

/// Render a number to exactly two decimals, ties away from zero.
pub fn format_2dp(value: f64) -> String {
    let scaled = (value * 100.0).round() as i64;
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}
