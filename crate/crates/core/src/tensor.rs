//! Dense row-major `f32` tensors.
//!
//! Activations use the `[channels, height, width]` layout throughout. Every
//! constructor and operation rejects non-finite values instead of letting
//! them propagate into scores.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

fn check_finite(data: &[f32], op: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!(
                "dims must be a non-empty list of positive integers, got {shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        check_finite(&data, "construction")?;
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Tensor::new(shape, vec![0.0; len])
    }

    pub fn full(shape: Vec<usize>, value: f32) -> Result<Self> {
        let len = shape.iter().product();
        Tensor::new(shape, vec![value; len])
    }

    /// Builds a `[C, H, W]` tensor from a per-element function.
    pub fn from_fn_chw(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Tensor::new(vec![channels, height, width], data)
    }

    /// Internal constructor for kernels that already guarantee the shape
    /// invariant; still checks finiteness.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f32>, op: &'static str) -> Result<Self> {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        check_finite(&data, op)?;
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(C, H, W)` for rank-3 tensors.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::Shape(format!(
                "expected a [C,H,W] tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// Plane of channel `c` in a `[C, H, W]` tensor.
    pub fn channel(&self, c: usize) -> Result<&[f32]> {
        let (channels, h, w) = self.dims3()?;
        if c >= channels {
            return Err(Error::Shape(format!(
                "channel {c} out of range for {channels} channels"
            )));
        }
        Ok(&self.data[c * h * w..(c + 1) * h * w])
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    fn check_same_shape(&self, other: &Tensor, op: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{op}: operand shapes differ: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    fn zip_with(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f32, f32) -> f32,
    ) -> Result<Tensor> {
        self.check_same_shape(other, op)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Tensor::from_parts(self.shape.clone(), data, op)
    }

    fn map(&self, op: &'static str, f: impl Fn(f32) -> f32) -> Result<Tensor> {
        let data = self.data.iter().map(|&a| f(a)).collect();
        Tensor::from_parts(self.shape.clone(), data, op)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, factor: f32) -> Result<Tensor> {
        self.map("scale", |a| a * factor)
    }

    pub fn square(&self) -> Result<Tensor> {
        self.map("square", |a| a * a)
    }

    /// Sum over all elements, accumulated in `f64`.
    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Per-channel mean over all spatial positions of a `[C, H, W]` tensor.
    pub fn spatial_mean(&self) -> Result<Vec<f64>> {
        let (c, h, w) = self.dims3()?;
        let plane = h * w;
        Ok((0..c)
            .map(|m| {
                let sum: f64 = self.data[m * plane..(m + 1) * plane]
                    .iter()
                    .map(|&v| v as f64)
                    .sum();
                sum / plane as f64
            })
            .collect())
    }

    /// Replicates a single-channel `[1, H, W]` image to `channels` planes.
    /// A tensor that already has `channels` planes is returned unchanged.
    pub fn conform_channels(&self, channels: usize) -> Result<Tensor> {
        let (c, h, w) = self.dims3()?;
        if c == channels {
            return Ok(self.clone());
        }
        if c != 1 {
            return Err(Error::Shape(format!(
                "cannot convert a {c}-channel image to {channels} channels"
            )));
        }
        let mut data = Vec::with_capacity(channels * h * w);
        for _ in 0..channels {
            data.extend_from_slice(&self.data);
        }
        Tensor::from_parts(vec![channels, h, w], data, "conform_channels")
    }

    /// Rec. 601 luma of a 3-channel image, or the single plane of a 1-channel one.
    pub fn luminance(&self) -> Result<Tensor> {
        let (c, h, w) = self.dims3()?;
        match c {
            1 => Ok(self.clone()),
            3 => {
                let plane = h * w;
                let data = (0..plane)
                    .map(|i| {
                        0.299 * self.data[i]
                            + 0.587 * self.data[plane + i]
                            + 0.114 * self.data[2 * plane + i]
                    })
                    .collect();
                Tensor::from_parts(vec![1, h, w], data, "luminance")
            }
            _ => Err(Error::Shape(format!(
                "luminance needs 1 or 3 channels, got {c}"
            ))),
        }
    }
}
