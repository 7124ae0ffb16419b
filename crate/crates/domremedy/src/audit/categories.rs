//! The seven audit categories and the audit-id → category map.
//!
//! The built-in map seeds every audit id we track; it can be replaced or
//! extended from an external JSON config file (`{"audit-id": "Category"}`)
//! since audit taxonomies evolve. Unmapped ids are never an error — they
//! land in `Uncategorized` with a logged warning.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AuditCategory {
    InitialLoad,
    Interactivity,
    Runtime,
    ResourceOptimization,
    NetworkOptimization,
    VisualStability,
    SeoAccessibility,
    Uncategorized,
}

impl AuditCategory {
    /// All real categories, in report row order.
    pub const ALL: [AuditCategory; 7] = [
        AuditCategory::SeoAccessibility,
        AuditCategory::InitialLoad,
        AuditCategory::Interactivity,
        AuditCategory::Runtime,
        AuditCategory::NetworkOptimization,
        AuditCategory::ResourceOptimization,
        AuditCategory::VisualStability,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AuditCategory::InitialLoad => "Initial Load Performance",
            AuditCategory::Interactivity => "Interactivity Performance",
            AuditCategory::Runtime => "Runtime Performance",
            AuditCategory::ResourceOptimization => "Resource Optimization",
            AuditCategory::NetworkOptimization => "Network Optimization",
            AuditCategory::VisualStability => "Visual Stability",
            AuditCategory::SeoAccessibility => "SEO & Accessibility",
            AuditCategory::Uncategorized => "Uncategorized",
        }
    }

    pub fn from_label(label: &str) -> Option<AuditCategory> {
        match label {
            "Initial Load Performance" => Some(AuditCategory::InitialLoad),
            "Interactivity Performance" => Some(AuditCategory::Interactivity),
            "Runtime Performance" => Some(AuditCategory::Runtime),
            "Resource Optimization" => Some(AuditCategory::ResourceOptimization),
            "Network Optimization" => Some(AuditCategory::NetworkOptimization),
            "Visual Stability" => Some(AuditCategory::VisualStability),
            "SEO & Accessibility" => Some(AuditCategory::SeoAccessibility),
            "Uncategorized" => Some(AuditCategory::Uncategorized),
            _ => None,
        }
    }
}

impl fmt::Display for AuditCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for AuditCategory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for AuditCategory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        AuditCategory::from_label(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown audit category {s:?}")))
    }
}

/// Total audit-id → category mapping.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryMap {
    map: BTreeMap<String, AuditCategory>,
}

impl CategoryMap {
    pub fn new(map: BTreeMap<String, AuditCategory>) -> CategoryMap {
        CategoryMap { map }
    }

    /// Mapped category for an audit id; never fails. Unmapped ids are
    /// reported once at warn level and fall to `Uncategorized`.
    pub fn categorize(&self, audit_id: &str) -> AuditCategory {
        match self.map.get(audit_id) {
            Some(cat) => *cat,
            None => {
                log::warn!("audit id {audit_id:?} has no category mapping");
                AuditCategory::Uncategorized
            }
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, AuditCategory)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn load(path: &Path) -> std::io::Result<CategoryMap> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("map serialization");
        crate::workspace::write_atomic(path, text.as_bytes())
    }
}

/// The shipped seed map covering every tracked audit id.
pub fn builtin_category_map() -> CategoryMap {
    use AuditCategory::*;
    let entries: &[(&str, AuditCategory)] = &[
        // SEO & Accessibility
        ("crawlable-anchors", SeoAccessibility),
        ("link-text", SeoAccessibility),
        ("is-crawlable", SeoAccessibility),
        ("meta-description", SeoAccessibility),
        ("hreflang", SeoAccessibility),
        ("aria-prohibited-attr", SeoAccessibility),
        ("aria-hidden-focus", SeoAccessibility),
        ("image-alt", SeoAccessibility),
        ("aria-allowed-attr", SeoAccessibility),
        ("listitem", SeoAccessibility),
        ("list", SeoAccessibility),
        ("aria-dialog-name", SeoAccessibility),
        ("label-content-name-mismatch", SeoAccessibility),
        ("input-button-name", SeoAccessibility),
        ("html-lang-valid", SeoAccessibility),
        ("aria-tooltip-name", SeoAccessibility),
        ("link-name", SeoAccessibility),
        // Network Optimization
        ("uses-rel-preconnect", NetworkOptimization),
        ("uses-http2", NetworkOptimization),
        ("third-party-cookies", NetworkOptimization),
        ("is-on-https", NetworkOptimization),
        ("total-byte-weight", NetworkOptimization),
        ("uses-text-compression", NetworkOptimization),
        ("uses-long-cache-ttl", NetworkOptimization),
        ("redirects", NetworkOptimization),
        // Initial Load Performance
        ("charset", InitialLoad),
        ("lcp-lazy-loaded", InitialLoad),
        ("offscreen-images", InitialLoad),
        ("render-blocking-resources", InitialLoad),
        ("first-contentful-paint", InitialLoad),
        ("speed-index", InitialLoad),
        ("largest-contentful-paint-element", InitialLoad),
        ("prioritize-lcp-image", InitialLoad),
        ("largest-contentful-paint", InitialLoad),
        // Visual Stability
        ("viewport", VisualStability),
        ("meta-viewport", VisualStability),
        ("image-size-responsive", VisualStability),
        ("image-aspect-ratio", VisualStability),
        ("font-size", VisualStability),
        ("color-contrast", VisualStability),
        ("target-size", VisualStability),
        ("dom-size", VisualStability),
        ("unsized-images", VisualStability),
        ("font-display", VisualStability),
        ("cumulative-layout-shift", VisualStability),
        ("layout-shifts", VisualStability),
        // Runtime Performance
        ("valid-source-maps", Runtime),
        ("inspector-issues", Runtime),
        ("errors-in-console", Runtime),
        ("deprecations", Runtime),
        ("bootup-time", Runtime),
        ("mainthread-work-breakdown", Runtime),
        ("third-party-summary", Runtime),
        ("no-document-write", Runtime),
        // Resource Optimization
        ("duplicated-javascript", ResourceOptimization),
        ("modern-image-formats", ResourceOptimization),
        ("legacy-javascript", ResourceOptimization),
        ("unminified-css", ResourceOptimization),
        ("uses-optimized-images", ResourceOptimization),
        ("unused-css-rules", ResourceOptimization),
        ("uses-responsive-images", ResourceOptimization),
        ("unused-javascript", ResourceOptimization),
        ("unminified-javascript", ResourceOptimization),
        // Interactivity Performance
        ("uses-passive-event-listeners", Interactivity),
        ("total-blocking-time", Interactivity),
        ("max-potential-fid", Interactivity),
        ("interactive", Interactivity),
    ];
    CategoryMap::new(entries.iter().map(|(k, v)| ((*k).to_owned(), *v)).collect())
}
