//! Forward-only execution of a linked network with named activation taps.

pub mod ops;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model_io::{InputSpec, LayerSpec, NetworkManifest, TensorContainer};
use crate::tensor::Tensor;

pub use ops::{conv2d, maxpool, relu};

#[derive(Debug, Clone)]
pub(crate) enum Layer {
    Conv {
        weight: Tensor,
        bias: Option<Vec<f32>>,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool {
        kernel: usize,
        stride: usize,
    },
}

/// A validated manifest with its weights resolved. Immutable once built.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    manifest: NetworkManifest,
    layers: Vec<Layer>,
}

/// Activations captured at the requested taps, keyed by tap name.
pub type TapSet = BTreeMap<String, Tensor>;

impl NetworkModel {
    /// Resolves every tensor reference and checks the shape chain at the
    /// manifest's declared input size.
    pub fn link(manifest: NetworkManifest, container: &TensorContainer) -> Result<Self> {
        let mut layers = Vec::with_capacity(manifest.layers.len());
        for spec in &manifest.layers {
            layers.push(match spec {
                LayerSpec::Conv {
                    weight,
                    bias,
                    stride,
                    padding,
                } => {
                    let w = container
                        .get(weight)
                        .ok_or_else(|| Error::DanglingName(weight.clone()))?
                        .clone();
                    let b = match bias {
                        Some(name) => Some(
                            container
                                .get(name)
                                .ok_or_else(|| Error::DanglingName(name.clone()))?
                                .data()
                                .to_vec(),
                        ),
                        None => None,
                    };
                    Layer::Conv {
                        weight: w,
                        bias: b,
                        stride: *stride,
                        padding: *padding,
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool { kernel, stride } => Layer::MaxPool {
                    kernel: *kernel,
                    stride: *stride,
                },
            });
        }
        let model = NetworkModel { manifest, layers };
        let (h, w) = (model.input().height, model.input().width);
        model.layer_shapes(h, w)?;
        Ok(model)
    }

    pub fn manifest(&self) -> &NetworkManifest {
        &self.manifest
    }

    pub fn input(&self) -> &InputSpec {
        &self.manifest.input
    }

    pub fn name(&self) -> &str {
        &self.manifest.name
    }

    pub fn tap_names(&self) -> Vec<String> {
        self.manifest.tap_names()
    }

    fn tap_layer(&self, tap: &str) -> Result<usize> {
        self.manifest
            .taps
            .iter()
            .find(|t| t.name == tap)
            .map(|t| t.layer)
            .ok_or_else(|| Error::UnknownTap {
                tap: tap.to_string(),
                available: self.tap_names(),
            })
    }

    /// Output shape `[C, H, W]` of every layer for an input of `height x width`.
    pub fn layer_shapes(&self, height: usize, width: usize) -> Result<Vec<[usize; 3]>> {
        let mut cur = [self.input().channels, height, width];
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let chain_err = |reason: String| Error::ShapeChain { layer: i, reason };
            cur = match layer {
                Layer::Conv {
                    weight,
                    bias,
                    stride,
                    padding,
                } => {
                    let &[oc, ic, kh, kw] = weight.shape() else {
                        return Err(chain_err(format!(
                            "conv weight must be rank 4, got {:?}",
                            weight.shape()
                        )));
                    };
                    if ic != cur[0] {
                        return Err(chain_err(format!(
                            "conv weight expects {ic} input channels but the previous layer yields {}",
                            cur[0]
                        )));
                    }
                    if let Some(b) = bias {
                        if b.len() != oc {
                            return Err(chain_err(format!(
                                "bias has {} entries for {oc} output channels",
                                b.len()
                            )));
                        }
                    }
                    match (
                        ops::window_output_dim(cur[1], kh, *stride, *padding),
                        ops::window_output_dim(cur[2], kw, *stride, *padding),
                    ) {
                        (Some(h), Some(w)) => [oc, h, w],
                        _ => {
                            return Err(chain_err(format!(
                                "conv {kh}x{kw} kernel leaves no output for a {}x{} input",
                                cur[1], cur[2]
                            )))
                        }
                    }
                }
                Layer::Relu => cur,
                Layer::MaxPool { kernel, stride } => match (
                    ops::window_output_dim(cur[1], *kernel, *stride, 0),
                    ops::window_output_dim(cur[2], *kernel, *stride, 0),
                ) {
                    (Some(h), Some(w)) => [cur[0], h, w],
                    _ => {
                        return Err(chain_err(format!(
                            "maxpool {kernel}x{kernel} window leaves no output for a {}x{} input",
                            cur[1], cur[2]
                        )))
                    }
                },
            };
            shapes.push(cur);
        }
        Ok(shapes)
    }

    /// Shape of `tap` for an input of `height x width`.
    pub fn tap_shape(&self, tap: &str, height: usize, width: usize) -> Result<[usize; 3]> {
        let layer = self.tap_layer(tap)?;
        Ok(self.layer_shapes(height, width)?[layer])
    }

    /// Applies `(x - mean) / std` per input channel.
    fn normalize(&self, image: &Tensor) -> Result<Tensor> {
        let (c, h, w) = image.dims3()?;
        let spec = self.input();
        if c != spec.channels {
            return Err(Error::Input(format!(
                "model '{}' expects {} input channels, image has {c}",
                self.name(),
                spec.channels
            )));
        }
        let plane = h * w;
        let data = image
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let ch = i / plane;
                (v - spec.mean[ch]) / spec.std[ch]
            })
            .collect();
        Tensor::from_parts(vec![c, h, w], data, "normalize")
    }

    /// Runs the network on one `[C, H, W]` image in `[0, 1]` and returns the
    /// activations at `taps`. Layers past the deepest requested tap are skipped.
    pub fn forward(&self, image: &Tensor, taps: &[&str]) -> Result<TapSet> {
        let wanted: Vec<(usize, &str)> = taps
            .iter()
            .map(|&t| self.tap_layer(t).map(|l| (l, t)))
            .collect::<Result<_>>()?;
        let (_, h, w) = image.dims3()?;
        self.layer_shapes(h, w)
            .map_err(|e| Error::Input(format!("input size {h}x{w} not supported: {e}")))?;
        let deepest = match wanted.iter().map(|(l, _)| *l).max() {
            Some(d) => d,
            None => return Ok(TapSet::new()),
        };

        let mut out = TapSet::new();
        let mut x = self.normalize(image)?;
        for (i, layer) in self.layers.iter().enumerate().take(deepest + 1) {
            x = match layer {
                Layer::Conv {
                    weight,
                    bias,
                    stride,
                    padding,
                } => conv2d(&x, weight, bias.as_deref(), *stride, *padding)?,
                Layer::Relu => relu(&x)?,
                Layer::MaxPool { kernel, stride } => maxpool(&x, *kernel, *stride)?,
            };
            for (_, name) in wanted.iter().filter(|(l, _)| *l == i) {
                out.insert((*name).to_string(), x.clone());
            }
        }
        Ok(out)
    }

    /// Single-tap convenience wrapper around [`NetworkModel::forward`].
    pub fn forward_tap(&self, image: &Tensor, tap: &str) -> Result<Tensor> {
        let mut set = self.forward(image, &[tap])?;
        Ok(set.remove(tap).expect("forward returns every requested tap"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::TapSpec;

    fn one_layer(weight: Tensor, bias: Vec<f32>, padding: usize, c: usize, hw: usize) -> NetworkModel {
        let mut container = TensorContainer::new();
        let oc = weight.shape()[0];
        container.insert("w", weight).unwrap();
        container.insert("b", Tensor::new(vec![oc], bias).unwrap()).unwrap();
        let manifest = NetworkManifest {
            name: "t".into(),
            input: InputSpec {
                channels: c,
                height: hw,
                width: hw,
                mean: vec![0.0; c],
                std: vec![1.0; c],
            },
            layers: vec![LayerSpec::Conv {
                weight: "w".into(),
                bias: Some("b".into()),
                stride: 1,
                padding,
            }],
            taps: vec![TapSpec {
                name: "out".into(),
                layer: 0,
            }],
        };
        NetworkModel::link(manifest, &container).unwrap()
    }

    #[test]
    fn identity_network_returns_input() {
        let mut w = vec![0.0; 4];
        w[0] = 1.0;
        w[3] = 1.0;
        let model = one_layer(Tensor::new(vec![2, 2, 1, 1], w).unwrap(), vec![0.0; 2], 0, 2, 5);
        let x = Tensor::from_fn_chw(2, 5, 5, |c, y, x| (c + y * x) as f32 / 25.0).unwrap();
        assert_eq!(model.forward_tap(&x, "out").unwrap(), x);
    }

    #[test]
    fn ones_kernel_interior() {
        let model = one_layer(Tensor::full(vec![1, 1, 3, 3], 1.0).unwrap(), vec![0.0], 1, 1, 6);
        let x = Tensor::full(vec![1, 6, 6], 1.0).unwrap();
        let y = model.forward_tap(&x, "out").unwrap();
        for yy in 1..5 {
            for xx in 1..5 {
                assert_eq!(y.data()[yy * 6 + xx], 9.0);
            }
        }
    }

    #[test]
    fn unknown_tap_lists_available() {
        let model = one_layer(Tensor::full(vec![1, 1, 1, 1], 1.0).unwrap(), vec![0.0], 0, 1, 4);
        let x = Tensor::zeros(vec![1, 4, 4]).unwrap();
        match model.forward(&x, &["nope"]) {
            Err(Error::UnknownTap { available, .. }) => assert_eq!(available, vec!["out"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let model = one_layer(Tensor::full(vec![1, 1, 1, 1], 1.0).unwrap(), vec![0.0], 0, 1, 4);
        let x = Tensor::zeros(vec![3, 4, 4]).unwrap();
        assert!(matches!(model.forward(&x, &["out"]), Err(Error::Input(_))));
    }

    #[test]
    fn too_small_input_rejected() {
        let model = one_layer(Tensor::full(vec![1, 1, 5, 5], 1.0).unwrap(), vec![0.0], 0, 1, 8);
        let x = Tensor::zeros(vec![1, 3, 3]).unwrap();
        assert!(matches!(model.forward(&x, &["out"]), Err(Error::Input(_))));
    }
}
