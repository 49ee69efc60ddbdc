//! JSON network manifest: input normalization, a linear layer chain and
//! named tap points.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv {
        weight: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<String>,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    Relu,
    #[serde(rename = "maxpool")]
    MaxPool { kernel: usize, stride: usize },
}

fn one() -> usize {
    1
}

impl LayerSpec {
    const SUPPORTED: [&'static str; 3] = ["conv", "relu", "maxpool"];
}

/// A named reference to the output of layer `layer` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapSpec {
    pub name: String,
    pub layer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkManifest {
    pub name: String,
    pub input: InputSpec,
    pub layers: Vec<LayerSpec>,
    pub taps: Vec<TapSpec>,
}

impl NetworkManifest {
    /// Parses manifest text. Unknown layer ops are reported by name and
    /// position rather than as a generic syntax error.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Manifest(format!("not valid JSON: {e}")))?;
        if let Some(layers) = value.get("layers").and_then(|l| l.as_array()) {
            for (i, layer) in layers.iter().enumerate() {
                let op = layer
                    .get("op")
                    .and_then(|o| o.as_str())
                    .ok_or_else(|| Error::Manifest(format!("layer {i} has no string 'op' field")))?;
                if !LayerSpec::SUPPORTED.contains(&op) {
                    return Err(Error::UnsupportedOp {
                        layer: i,
                        op: op.to_string(),
                    });
                }
            }
        }
        let manifest: NetworkManifest =
            serde_json::from_value(value).map_err(|e| Error::Manifest(e.to_string()))?;
        manifest.check_static()?;
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest always serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks that do not need the weights.
    fn check_static(&self) -> Result<()> {
        let input = &self.input;
        if input.channels == 0 || input.height == 0 || input.width == 0 {
            return Err(Error::Manifest("input dims must be positive".into()));
        }
        if input.mean.len() != input.channels || input.std.len() != input.channels {
            return Err(Error::Manifest(format!(
                "input mean/std need {} entries each, got {}/{}",
                input.channels,
                input.mean.len(),
                input.std.len()
            )));
        }
        if input.std.iter().any(|&s| !(s > 0.0) || !s.is_finite())
            || input.mean.iter().any(|m| !m.is_finite())
        {
            return Err(Error::Manifest(
                "input std must be positive and mean finite".into(),
            ));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerSpec::Conv { stride, .. } if *stride == 0 => {
                    return Err(Error::ShapeChain {
                        layer: i,
                        reason: "conv stride must be at least 1".into(),
                    })
                }
                LayerSpec::MaxPool { kernel, stride } if *kernel == 0 || *stride == 0 => {
                    return Err(Error::ShapeChain {
                        layer: i,
                        reason: "maxpool kernel and stride must be at least 1".into(),
                    })
                }
                _ => {}
            }
        }
        let mut seen = std::collections::HashSet::new();
        for tap in &self.taps {
            if !seen.insert(tap.name.as_str()) {
                return Err(Error::Manifest(format!("duplicate tap name '{}'", tap.name)));
            }
            if tap.layer >= self.layers.len() {
                return Err(Error::Manifest(format!(
                    "tap '{}' refers to layer {} but the network has {} layers",
                    tap.name,
                    tap.layer,
                    self.layers.len()
                )));
            }
        }
        Ok(())
    }

    pub fn tap_names(&self) -> Vec<String> {
        self.taps.iter().map(|t| t.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
        "name": "t",
        "input": {"channels": 1, "height": 8, "width": 8, "mean": [0.5], "std": [0.25]},
        "layers": [
            {"op": "conv", "weight": "c.w", "bias": "c.b", "padding": 1},
            {"op": "relu"},
            {"op": "maxpool", "kernel": 2, "stride": 2}
        ],
        "taps": [{"name": "probe", "layer": 1}]
    }"#;

    #[test]
    fn parses_and_defaults_stride() {
        let m = NetworkManifest::from_json(GOOD).unwrap();
        assert_eq!(
            m.layers[0],
            LayerSpec::Conv {
                weight: "c.w".into(),
                bias: Some("c.b".into()),
                stride: 1,
                padding: 1
            }
        );
        let back = NetworkManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn unsupported_op_is_named() {
        let text = GOOD.replace(r#"{"op": "relu"}"#, r#"{"op": "batchnorm"}"#);
        let err = NetworkManifest::from_json(&text).unwrap_err();
        assert!(
            matches!(err, Error::UnsupportedOp { layer: 1, ref op } if op == "batchnorm"),
            "{err}"
        );
    }

    #[test]
    fn tap_out_of_range() {
        let text = GOOD.replace(r#""layer": 1"#, r#""layer": 7"#);
        assert!(matches!(
            NetworkManifest::from_json(&text),
            Err(Error::Manifest(_))
        ));
    }

    #[test]
    fn normalization_length_checked() {
        let text = GOOD.replace(r#""mean": [0.5]"#, r#""mean": [0.5, 0.5]"#);
        assert!(NetworkManifest::from_json(&text).is_err());
    }
}
