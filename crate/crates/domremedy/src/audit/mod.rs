//! Audit report model: parse auditor JSON, filter actionable audits, and
//! assign categories.
//!
//! Reports come from an external Lighthouse-compatible auditor (or a replay
//! fixture). Audit `details` payloads are carried verbatim as raw JSON so a
//! stored report re-serializes byte-exactly.

mod categories;
mod runner;
mod server;

pub use categories::{builtin_category_map, AuditCategory, CategoryMap};
pub use runner::{run_audit, AuditError, AuditRunConfig, AuditTarget, AuditorMode, ReportBundle};
pub use server::StaticServer;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use std::fmt;

/// How an audit's score is to be interpreted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScoreDisplayMode {
    Binary,
    Numeric,
    Informative,
    NotApplicable,
    Manual,
    Error,
    MetricSavings,
    Other(String),
}

impl ScoreDisplayMode {
    pub fn from_wire(s: &str) -> ScoreDisplayMode {
        match s {
            "binary" => ScoreDisplayMode::Binary,
            "numeric" => ScoreDisplayMode::Numeric,
            "informative" => ScoreDisplayMode::Informative,
            "notApplicable" => ScoreDisplayMode::NotApplicable,
            "manual" => ScoreDisplayMode::Manual,
            "error" => ScoreDisplayMode::Error,
            "metricSavings" => ScoreDisplayMode::MetricSavings,
            other => ScoreDisplayMode::Other(other.to_owned()),
        }
    }

    pub fn as_wire(&self) -> &str {
        match self {
            ScoreDisplayMode::Binary => "binary",
            ScoreDisplayMode::Numeric => "numeric",
            ScoreDisplayMode::Informative => "informative",
            ScoreDisplayMode::NotApplicable => "notApplicable",
            ScoreDisplayMode::Manual => "manual",
            ScoreDisplayMode::Error => "error",
            ScoreDisplayMode::MetricSavings => "metricSavings",
            ScoreDisplayMode::Other(s) => s,
        }
    }
}

impl Default for ScoreDisplayMode {
    fn default() -> Self {
        ScoreDisplayMode::Other(String::new())
    }
}

impl Serialize for ScoreDisplayMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_wire())
    }
}

impl<'de> Deserialize<'de> for ScoreDisplayMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(ScoreDisplayMode::from_wire(&s))
    }
}

/// One audit result from a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRecord {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(rename = "scoreDisplayMode", default)]
    pub score_display_mode: ScoreDisplayMode,
    #[serde(
        rename = "displayValue",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub display_value: Option<String>,
    /// Opaque structured payload, preserved byte-exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Box<RawValue>>,
}

/// Which page build a report measured.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Original,
    Modified(String),
}

impl Variant {
    /// File-name-friendly form: `original` or the model id.
    pub fn file_stem(&self) -> &str {
        match self {
            Variant::Original => "original",
            Variant::Modified(model) => model,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Original => f.write_str("original"),
            Variant::Modified(model) => write!(f, "modified:{model}"),
        }
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(match s.strip_prefix("modified:") {
            Some(model) => Variant::Modified(model.to_owned()),
            None => Variant::Original,
        })
    }
}

/// A parsed audit report for one (page, variant).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub page_id: String,
    pub variant: Variant,
    /// Audits sorted by id for a deterministic order.
    pub audits: Vec<AuditRecord>,
    /// Overall performance score as a percentage, when the auditor gave one.
    #[serde(default)]
    pub lighthouse_score: Option<f64>,
    #[serde(default)]
    pub captured_at: u64,
    #[serde(default)]
    pub tool_version: String,
}

/// Shape of the auditor's own JSON output (the parts we read).
#[derive(Deserialize)]
struct LhrFile {
    #[serde(rename = "lighthouseVersion", default)]
    lighthouse_version: String,
    #[serde(default)]
    audits: std::collections::BTreeMap<String, AuditRecord>,
    #[serde(default)]
    categories: Option<LhrCategories>,
}

#[derive(Deserialize)]
struct LhrCategories {
    #[serde(default)]
    performance: Option<LhrCategoryScore>,
}

#[derive(Deserialize)]
struct LhrCategoryScore {
    #[serde(default)]
    score: Option<f64>,
}

/// Parse raw auditor JSON into a normalized report.
pub fn parse_auditor_json(
    bytes: &[u8],
    page_id: &str,
    variant: Variant,
) -> Result<AuditReport, serde_json::Error> {
    let file: LhrFile = serde_json::from_slice(bytes)?;
    let mut audits = Vec::with_capacity(file.audits.len());
    for (key, mut record) in file.audits {
        if record.id.is_empty() {
            record.id = key;
        }
        audits.push(record);
    }
    audits.sort_by(|a, b| a.id.cmp(&b.id));
    let lighthouse_score = file
        .categories
        .and_then(|c| c.performance)
        .and_then(|p| p.score)
        .map(|s| s * 100.0);
    Ok(AuditReport {
        page_id: page_id.to_owned(),
        variant,
        audits,
        lighthouse_score,
        captured_at: 0,
        tool_version: file.lighthouse_version,
    })
}

/// Whether an audit calls for a DOM-level resolution: excluded modes are
/// notApplicable, manual, and informative, plus binary passes (score 1);
/// a binary score of 0 indicates a needed resolution and is retained.
pub fn is_actionable(record: &AuditRecord) -> bool {
    match record.score_display_mode {
        ScoreDisplayMode::NotApplicable
        | ScoreDisplayMode::Manual
        | ScoreDisplayMode::Informative => false,
        ScoreDisplayMode::Binary => record.score != Some(1.0),
        _ => true,
    }
}

/// The actionable subset of a report's audits, original order preserved.
pub fn filter_actionable(report: &AuditReport) -> Vec<AuditRecord> {
    report
        .audits
        .iter()
        .filter(|r| is_actionable(r))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, mode: &str, score: Option<f64>) -> AuditRecord {
        AuditRecord {
            id: id.into(),
            title: String::new(),
            description: String::new(),
            score,
            score_display_mode: ScoreDisplayMode::from_wire(mode),
            display_value: None,
            details: None,
        }
    }

    #[test]
    fn exclusion_rule_matches_the_filtering_policy() {
        let report = AuditReport {
            page_id: "p".into(),
            variant: Variant::Original,
            audits: vec![
                record("a-binary-fail", "binary", Some(0.0)),
                record("b-binary-pass", "binary", Some(1.0)),
                record("c-numeric", "numeric", Some(0.5)),
                record("d-manual", "manual", None),
                record("e-informative", "informative", Some(0.0)),
                record("f-na", "notApplicable", None),
            ],
            lighthouse_score: None,
            captured_at: 0,
            tool_version: String::new(),
        };
        let kept: Vec<String> = filter_actionable(&report)
            .into_iter()
            .map(|r| r.id)
            .collect();
        assert_eq!(kept, vec!["a-binary-fail", "c-numeric"]);
    }

    #[test]
    fn filter_is_idempotent_and_order_preserving() {
        let report = AuditReport {
            page_id: "p".into(),
            variant: Variant::Original,
            audits: vec![
                record("z", "numeric", Some(0.1)),
                record("a", "binary", Some(0.0)),
                record("m", "metricSavings", Some(0.0)),
            ],
            lighthouse_score: None,
            captured_at: 0,
            tool_version: String::new(),
        };
        let once = filter_actionable(&report);
        let rerun = AuditReport {
            audits: once.clone(),
            ..report.clone()
        };
        let twice = filter_actionable(&rerun);
        let ids = |v: &[AuditRecord]| v.iter().map(|r| r.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&once), ids(&twice));
        assert_eq!(ids(&once), vec!["z", "a", "m"]);
    }

    #[test]
    fn unknown_modes_fail_open_as_actionable() {
        assert!(is_actionable(&record("x", "metricSavings", Some(1.0))));
        assert!(is_actionable(&record("x", "somethingNew", None)));
        assert!(is_actionable(&record("x", "error", None)));
    }

    #[test]
    fn binary_with_missing_score_is_retained() {
        assert!(is_actionable(&record("x", "binary", None)));
    }

    #[test]
    fn auditor_json_parses_and_details_pass_through_byte_exact() {
        let raw = br#"{
            "lighthouseVersion": "12.2.0",
            "categories": {"performance": {"score": 0.447}},
            "audits": {
                "speed-index": {
                    "id": "speed-index",
                    "title": "Speed Index",
                    "description": "How quickly contents are populated",
                    "score": 0.3,
                    "scoreDisplayMode": "numeric",
                    "displayValue": "5.9 s",
                    "details": {"type":"opportunity","items":[{"url":"x","wastedMs":12.50}]}
                },
                "is-on-https": {
                    "id": "is-on-https",
                    "title": "HTTPS",
                    "description": "d",
                    "score": 1,
                    "scoreDisplayMode": "binary"
                }
            }
        }"#;
        let report = parse_auditor_json(raw, "page", Variant::Original).unwrap();
        assert_eq!(report.tool_version, "12.2.0");
        assert_eq!(report.audits.len(), 2);
        assert!((report.lighthouse_score.unwrap() - 44.7).abs() < 1e-9);
        // Sorted by id.
        assert_eq!(report.audits[0].id, "is-on-https");
        let si = &report.audits[1];
        assert_eq!(
            si.details.as_ref().unwrap().get(),
            r#"{"type":"opportunity","items":[{"url":"x","wastedMs":12.50}]}"#
        );
        // Round trip through our own serialization keeps the payload.
        let ser = serde_json::to_string(&report).unwrap();
        let back: AuditReport = serde_json::from_str(&ser).unwrap();
        assert_eq!(
            back.audits[1].details.as_ref().unwrap().get(),
            si.details.as_ref().unwrap().get()
        );
    }

    #[test]
    fn variant_round_trips() {
        for v in [Variant::Original, Variant::Modified("gpt-4.1".into())] {
            let s = serde_json::to_string(&v).unwrap();
            let back: Variant = serde_json::from_str(&s).unwrap();
            assert_eq!(v, back);
        }
        assert_eq!(Variant::Modified("m".into()).file_stem(), "m");
        assert_eq!(Variant::Original.file_stem(), "original");
    }
}
