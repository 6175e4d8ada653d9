//! Hashed artifact envelopes and DOT export.

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::category::ProfiniteBase;
use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, Vertex};
use crate::limit::Separation;

/// Compact JSON with object keys sorted at every depth.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // serde_json's default map is ordered, so a round trip through `Value` sorts keys
    let v = serde_json::to_value(value).map_err(|e| Error::Json(e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| Error::Json(e.to_string()))
}

/// Hex sha256 of the canonical JSON of `value`.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(canonical_json(value)?.as_bytes())))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub config: Value,
    /// Hash of the canonical JSON of `{"body", "config", "kind"}`.
    pub hash: String,
}

/// A result together with the configuration that produced it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub header: Header,
    pub body: T,
}

#[derive(Serialize)]
struct Hashed<'a, T> {
    kind: &'a str,
    config: &'a Value,
    body: &'a T,
}

impl<T: Serialize> Artifact<T> {
    pub fn seal(kind: &str, config: &impl Serialize, body: T) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::Json(e.to_string()))?;
        let hash = content_hash(&Hashed { kind, config: &config, body: &body })?;
        Ok(Artifact { header: Header { kind: kind.to_string(), config, hash }, body })
    }

    /// Recomputes the hash and compares it with the header.
    pub fn hash_matches(&self) -> Result<bool> {
        let h = &self.header;
        Ok(content_hash(&Hashed { kind: &h.kind, config: &h.config, body: &self.body })? == h.hash)
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let v = serde_json::to_value(self).map_err(|e| Error::Json(e.to_string()))?;
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Json(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

impl<T: DeserializeOwned> Artifact<T> {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Json(e.to_string()))
    }
}

/// Reads either a bare `T` or the body of an artifact wrapping one.
pub fn parse_body<T: DeserializeOwned>(s: &str) -> Result<T> {
    let v: Value = serde_json::from_str(s).map_err(|e| Error::Json(e.to_string()))?;
    let inner = match v {
        Value::Object(mut m) if m.contains_key("header") && m.contains_key("body") => m.remove("body").unwrap(),
        other => other,
    };
    serde_json::from_value(inner).map_err(|e| Error::Json(e.to_string()))
}

/// Undirected DOT; loops are implicit and never drawn.
pub fn graph_to_dot(g: &FiniteGraph, name: &str, colour: impl Fn(Vertex) -> Option<&'static str>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "graph {} {{", dot_id(name));
    for v in g.vertices() {
        match colour(v) {
            Some(c) => {
                let _ = writeln!(s, "  {v} [style=filled, fillcolor={c}];");
            }
            None => {
                let _ = writeln!(s, "  {v};");
            }
        }
    }
    for &(a, b) in g.edges() {
        let _ = writeln!(s, "  {a} -- {b};");
    }
    s.push_str("}\n");
    s
}

/// The witness level of a separation, `W_A` in one colour and `W_B` in another.
pub fn separation_to_dot(seq: &ProfiniteBase, sep: &Separation) -> Result<String> {
    seq.check_level(sep.level)?;
    let g = seq.level(sep.level);
    Ok(graph_to_dot(g, &format!("level_{}", sep.level), |v| {
        if sep.w_a.members.contains(&v) {
            Some("lightblue")
        } else if sep.w_b.members.contains(&v) {
            Some("salmon")
        } else {
            None
        }
    }))
}

fn dot_id(name: &str) -> String {
    if !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.starts_with(|c: char| c.is_ascii_digit())
    {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_sorts_keys() {
        let v: Value = serde_json::from_str(r#"{"b":1,"a":{"d":2,"c":3}}"#).unwrap();
        assert_eq!(canonical_json(&v).unwrap(), r#"{"a":{"c":3,"d":2},"b":1}"#);
    }

    #[test]
    fn sealed_artifacts_round_trip() {
        let g = FiniteGraph::path(3).unwrap();
        let a = Artifact::seal("graph", &serde_json::json!({"n": 3}), g).unwrap();
        assert!(a.hash_matches().unwrap());
        let back: Artifact<FiniteGraph> = Artifact::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
        let mut bad = back;
        bad.header.hash = "0".repeat(64);
        assert!(!bad.hash_matches().unwrap());
        let bare: FiniteGraph = parse_body(&a.to_json().unwrap()).unwrap();
        assert_eq!(bare, a.body);
    }

    #[test]
    fn dot_omits_loops() {
        let d = graph_to_dot(&FiniteGraph::path(3).unwrap(), "p", |_| None);
        assert_eq!(d, "graph p {\n  0;\n  1;\n  2;\n  0 -- 1;\n  1 -- 2;\n}\n");
        assert_eq!(dot_id("2x"), "\"2x\"");
    }
}
