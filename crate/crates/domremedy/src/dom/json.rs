//! Canonical JSON encoding of DOM trees: `{"kind","name","attrs","text","children"}`.
//!
//! Key order is fixed and attributes are emitted in parse order, so the
//! encoding is bit-stable across runs for the same tree. This is also the
//! input format consumed by the structural differ.

use serde::de::{Deserializer, Error as DeError};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use super::{DomNode, NodeKind};

impl Serialize for DomNode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(5))?;
        m.serialize_entry("kind", self.kind.as_str())?;
        m.serialize_entry("name", &self.name)?;
        m.serialize_entry("attrs", &AttrMap(&self.attrs))?;
        m.serialize_entry("text", &self.text)?;
        m.serialize_entry("children", &self.children)?;
        m.end()
    }
}

struct AttrMap<'a>(&'a [(String, String)]);

impl Serialize for AttrMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

#[derive(Deserialize)]
struct NodeRepr {
    kind: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    attrs: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    text: String,
    #[serde(default)]
    children: Vec<NodeRepr>,
}

impl NodeRepr {
    fn into_node(self) -> Result<DomNode, String> {
        let kind = match self.kind.as_str() {
            "tag" => NodeKind::Tag,
            "text" => NodeKind::Text,
            "comment" => NodeKind::Comment,
            "script" => NodeKind::Script,
            "stylesheet" => NodeKind::Stylesheet,
            other => return Err(format!("unknown node kind {other:?}")),
        };
        let mut attrs = Vec::with_capacity(self.attrs.len());
        for (k, v) in self.attrs {
            match v {
                serde_json::Value::String(s) => attrs.push((k, s)),
                other => return Err(format!("attribute {k:?} is not a string: {other}")),
            }
        }
        let children = self
            .children
            .into_iter()
            .map(NodeRepr::into_node)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DomNode {
            kind,
            name: self.name,
            attrs,
            text: self.text,
            children,
        })
    }
}

impl<'de> Deserialize<'de> for DomNode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        NodeRepr::deserialize(d)?
            .into_node()
            .map_err(D::Error::custom)
    }
}

/// Compact, bit-stable JSON for a tree.
pub fn to_canonical_json(node: &DomNode) -> String {
    serde_json::to_string(node).expect("tree serialization cannot fail")
}

/// Parse a tree from its canonical JSON encoding.
pub fn from_canonical_json(text: &str) -> Result<DomNode, serde_json::Error> {
    serde_json::from_str(text)
}
