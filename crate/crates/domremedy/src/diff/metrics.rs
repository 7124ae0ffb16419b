//! Modification-pattern ratios over a change set.

use serde::{Deserialize, Serialize};

use super::{ChangeKind, ChangeSet};

/// Element Addition-to-Removal Ratio and Positional Change Dominance.
///
/// EATRR = added / (added + removed); above 0.5 the modification was net
/// additive (bloat-prone), below 0.5 it simplified. PCD is the share of
/// value-level changes that are positional moves. Either ratio is undefined
/// (`None`) when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModificationMetrics {
    pub eatrr: Option<f64>,
    pub pcd: Option<f64>,
}

pub fn modification_metrics(cs: &ChangeSet) -> ModificationMetrics {
    let added = cs.count(ChangeKind::ElementAdded) as f64;
    let removed = cs.count(ChangeKind::ElementRemoved) as f64;
    let eatrr = if added + removed > 0.0 {
        Some(added / (added + removed))
    } else {
        None
    };

    let pos = cs.count(ChangeKind::PositionChanged) as f64;
    let values = cs.count(ChangeKind::AttrValueChanged) as f64
        + cs.count(ChangeKind::TagChanged) as f64
        + pos
        + cs.count(ChangeKind::TextChanged) as f64;
    let pcd = if values > 0.0 {
        Some(pos / values)
    } else {
        None
    };

    ModificationMetrics { eatrr, pcd }
}

/// Min/max/median change depth; all undefined for an empty set.
/// The median is the lower median of the sorted depths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthSummary {
    pub min: Option<usize>,
    pub max: Option<usize>,
    pub median: Option<usize>,
}

pub fn depth_summary(cs: &ChangeSet) -> DepthSummary {
    summarize_depths(cs.changes.iter().map(|c| c.depth))
}

pub(crate) fn summarize_depths(depths: impl Iterator<Item = usize>) -> DepthSummary {
    let mut sorted: Vec<usize> = depths.collect();
    sorted.sort_unstable();
    if sorted.is_empty() {
        return DepthSummary {
            min: None,
            max: None,
            median: None,
        };
    }
    DepthSummary {
        min: Some(sorted[0]),
        max: Some(sorted[sorted.len() - 1]),
        median: Some(sorted[(sorted.len() - 1) / 2]),
    }
}
