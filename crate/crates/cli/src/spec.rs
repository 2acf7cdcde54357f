//! Model description document: parsing, flag overrides and validation.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tensegrity::chain::ChainModel;
use tensegrity::segment::{SegmentGeometry, SpringControl};

use crate::failure::Failure;

/// Symmetric spring controls shared by all segments, with optional
/// per-segment replacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub k: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentOverride>,
}

/// Replaces some spring parameters of one segment (1-based index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentOverride {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(default, rename = "L1_0", skip_serializing_if = "Option::is_none")]
    pub l1_0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
    #[serde(default, rename = "L2_0", skip_serializing_if = "Option::is_none")]
    pub l2_0: Option<f64>,
}

/// Top-level fields set from the command line.
#[derive(Debug, Clone, Default)]
pub struct FieldOverrides {
    pub n: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub k: Option<f64>,
    pub l0: Option<f64>,
}

/// Reads the document from `source` (`-` for stdin, `None` for flags only),
/// applies the overrides and validates the result.
pub fn load(source: Option<&Path>, overrides: &FieldOverrides) -> Result<ModelSpec, Failure> {
    let mut doc = match source {
        None => Value::Object(Map::new()),
        Some(path) => {
            let text = if path == Path::new("-") {
                let mut s = String::new();
                std::io::stdin()
                    .read_to_string(&mut s)
                    .map_err(|e| Failure::io("reading model from stdin", e))?;
                s
            } else {
                std::fs::read_to_string(path).map_err(|e| Failure::io(&format!("reading {}", path.display()), e))?
            };
            serde_json::from_str(&text).map_err(|e| Failure::spec(format!("model: {e}")))?
        }
    };
    apply(&mut doc, overrides)?;
    parse(doc)
}

fn apply(doc: &mut Value, o: &FieldOverrides) -> Result<(), Failure> {
    let map = doc
        .as_object_mut()
        .ok_or_else(|| Failure::spec("model: expected a JSON object"))?;
    if let Some(n) = o.n {
        map.insert("n".into(), n.into());
    }
    for (key, v) in [("a", o.a), ("b", o.b), ("k", o.k), ("L0", o.l0)] {
        if let Some(v) = v {
            map.insert(key.into(), v.into());
        }
    }
    Ok(())
}

/// Deserializes and validates a document, reporting the offending field path.
pub fn parse(doc: Value) -> Result<ModelSpec, Failure> {
    let spec: ModelSpec = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            Failure::spec(format!("model: {}", e.inner()))
        } else {
            Failure::spec(format!("model.{path}: {}", e.inner()))
        }
    })?;
    spec.validate()?;
    Ok(spec)
}

fn positive(path: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Failure::spec(format!("model.{path}: must be a positive finite number, got {v}")))
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), Failure> {
        if self.n == 0 {
            return Err(Failure::spec("model.n: must be at least 1"));
        }
        positive("a", self.a)?;
        positive("b", self.b)?;
        positive("k", self.k)?;
        positive("L0", self.l0)?;
        let mut seen = vec![false; self.n];
        for (i, s) in self.segments.iter().enumerate() {
            if s.index == 0 || s.index > self.n {
                return Err(Failure::spec(format!(
                    "model.segments[{i}].index: must lie in 1..={}, got {}",
                    self.n, s.index
                )));
            }
            if std::mem::replace(&mut seen[s.index - 1], true) {
                return Err(Failure::spec(format!(
                    "model.segments[{i}].index: segment {} is overridden twice",
                    s.index
                )));
            }
            for (name, v) in [("k1", s.k1), ("L1_0", s.l1_0), ("k2", s.k2), ("L2_0", s.l2_0)] {
                if let Some(v) = v {
                    positive(&format!("segments[{i}].{name}"), v)?;
                }
            }
        }
        self.to_model().map(|_| ())
    }

    /// Spring controls of segment `i` (0-based) after overrides.
    pub fn controls(&self, i: usize) -> SpringControl {
        let mut c = SpringControl { k1: self.k, l1_0: self.l0, k2: self.k, l2_0: self.l0 };
        if let Some(s) = self.segments.iter().find(|s| s.index == i + 1) {
            c.k1 = s.k1.unwrap_or(c.k1);
            c.l1_0 = s.l1_0.unwrap_or(c.l1_0);
            c.k2 = s.k2.unwrap_or(c.k2);
            c.l2_0 = s.l2_0.unwrap_or(c.l2_0);
        }
        c
    }

    pub fn geometry(&self) -> Result<SegmentGeometry, Failure> {
        SegmentGeometry::new(self.a, self.b).map_err(|e| Failure::spec(format!("model: {e}")))
    }

    pub fn to_model(&self) -> Result<ChainModel, Failure> {
        let springs = (0..self.n)
            .map(|i| {
                let c = self.controls(i);
                SpringControl::new(c.k1, c.l1_0, c.k2, c.l2_0)
                    .map_err(|e| Failure::spec(format!("model.segments: segment {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ChainModel::new(self.geometry()?, springs).map_err(|e| Failure::spec(format!("model: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn parses_minimal_document() {
        let spec = parse(json!({"n": 4, "a": 1.0, "b": 1.0, "k": 1.0, "L0": 1.0})).unwrap();
        assert_eq!(spec.n, 4);
        assert!(spec.segments.is_empty());
        assert_eq!(spec.to_model().unwrap().n(), 4);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let err = parse(json!({"n": 4, "a": "one", "b": 1.0, "k": 1.0, "L0": 1.0})).unwrap_err();
        assert!(err.message.starts_with("model.a:"), "{}", err.message);
        let err = parse(json!({"n": 4, "a": 1.0, "b": -1.0, "k": 1.0, "L0": 1.0})).unwrap_err();
        assert!(err.message.starts_with("model.b:"), "{}", err.message);
        let err = parse(json!({"n": 4, "a": 1.0, "b": 1.0, "k": 1.0})).unwrap_err();
        assert!(err.message.contains("L0"), "{}", err.message);
        let err = parse(json!({"n": 2, "a": 1.0, "b": 1.0, "k": 1.0, "L0": 1.0, "c": 2})).unwrap_err();
        assert!(err.message.contains("unknown field"), "{}", err.message);
        let err = parse(json!({
            "n": 2, "a": 1.0, "b": 1.0, "k": 1.0, "L0": 1.0,
            "segments": [{"index": 1, "k1": 0.0}]
        }))
        .unwrap_err();
        assert!(err.message.starts_with("model.segments[0].k1:"), "{}", err.message);
        assert_eq!(err.code, crate::failure::EXIT_SPEC);
    }

    #[test]
    fn segment_overrides_apply_to_one_segment() {
        let spec = parse(json!({
            "n": 3, "a": 1.0, "b": 1.0, "k": 1.0, "L0": 1.0,
            "segments": [{"index": 2, "k2": 3.0, "L2_0": 0.5}]
        }))
        .unwrap();
        assert_eq!(spec.controls(0), SpringControl::symmetric(1.0, 1.0).unwrap());
        let c = spec.controls(1);
        assert_eq!((c.k1, c.l1_0, c.k2, c.l2_0), (1.0, 1.0, 3.0, 0.5));
        assert!(spec.to_model().unwrap().uniform_springs().is_none());
    }

    #[test]
    fn flags_replace_document_fields() {
        let mut doc = json!({"n": 4, "a": 1.0, "b": 1.0, "k": 1.0, "L0": 1.0});
        apply(&mut doc, &FieldOverrides { b: Some(10.0), n: Some(3), ..Default::default() }).unwrap();
        let spec = parse(doc).unwrap();
        assert_eq!((spec.n, spec.b), (3, 10.0));
    }

    #[test]
    fn round_trips_through_json() {
        let spec = parse(json!({
            "n": 2, "a": 0.5, "b": 1.0, "k": 2.0, "L0": 1.0,
            "segments": [{"index": 1, "k1": 1.5}]
        }))
        .unwrap();
        let back = parse(serde_json::to_value(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
