//! Full-reference image distances: tap-feature distance over a channel
//! subset, plus pixel L2 and SSIM baselines.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::NetworkModel;
use crate::perception::ChannelSubset;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Channel weight `M' * PE_m / sum(PE)`, which has mean 1 over the subset.
    PeProportional,
}

/// A configured feature-space metric.
#[derive(Debug, Clone)]
pub struct MetricConfig {
    pub model: Arc<NetworkModel>,
    pub tap: String,
    pub subset: ChannelSubset,
    pub weighting: Weighting,
    weights: Vec<f64>,
}

impl MetricConfig {
    pub fn new(
        model: Arc<NetworkModel>,
        tap: impl Into<String>,
        subset: ChannelSubset,
        weighting: Weighting,
    ) -> Result<Self> {
        let tap = tap.into();
        let input = model.input();
        let [width, _, _] = model.tap_shape(&tap, input.height, input.width)?;
        subset.validate()?;
        if subset.layer != tap {
            return Err(Error::Distance(format!(
                "subset was selected on layer '{}' but the metric taps '{tap}'",
                subset.layer
            )));
        }
        if subset.layer_width != width {
            return Err(Error::Distance(format!(
                "subset assumes {} channels but tap '{tap}' has {width}",
                subset.layer_width
            )));
        }
        let weights = channel_weights(&subset, weighting)?;
        Ok(MetricConfig {
            model,
            tap,
            subset,
            weighting,
            weights,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn features(&self, image: &Tensor) -> Result<Tensor> {
        let image = image.conform_channels(self.model.input().channels)?;
        self.model.forward_tap(&image, &self.tap)
    }

    /// Mean squared activation difference of each subset channel, in subset order.
    pub fn per_channel_distances(&self, img1: &Tensor, img2: &Tensor) -> Result<Vec<f64>> {
        if img1.shape() != img2.shape() {
            return Err(Error::Distance(format!(
                "image shapes differ: {:?} vs {:?}",
                img1.shape(),
                img2.shape()
            )));
        }
        let f1 = self.features(img1)?;
        let f2 = self.features(img2)?;
        self.subset
            .channels
            .iter()
            .map(|&m| {
                let a = f1.channel(m)?;
                let b = f2.channel(m)?;
                let ss: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(&x, &y)| {
                        let d = x as f64 - y as f64;
                        d * d
                    })
                    .sum();
                Ok(ss / a.len() as f64)
            })
            .collect()
    }

    /// `1 / (M' H W) * sum_m w_m ||phi_m(img1) - phi_m(img2)||^2` over the subset.
    pub fn perceptual_distance(&self, img1: &Tensor, img2: &Tensor) -> Result<f64> {
        let per_channel = self.per_channel_distances(img1, img2)?;
        let total: f64 = per_channel
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| d * w)
            .sum();
        Ok(total / per_channel.len() as f64)
    }
}

fn channel_weights(subset: &ChannelSubset, weighting: Weighting) -> Result<Vec<f64>> {
    match weighting {
        Weighting::Uniform => Ok(vec![1.0; subset.len()]),
        Weighting::PeProportional => {
            let pe = subset.pe.as_ref().ok_or_else(|| {
                Error::Distance("PE-proportional weighting needs a subset with PE scores".into())
            })?;
            let total: f64 = pe.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Distance(
                    "PE-proportional weighting needs a positive PE sum over the subset".into(),
                ));
            }
            let n = pe.len() as f64;
            Ok(pe.iter().map(|p| n * p / total).collect())
        }
    }
}

/// Convenience wrapper for [`MetricConfig::perceptual_distance`].
pub fn perceptual_distance(cfg: &MetricConfig, img1: &Tensor, img2: &Tensor) -> Result<f64> {
    cfg.perceptual_distance(img1, img2)
}

/// Mean squared pixel difference.
pub fn baseline_l2(img1: &Tensor, img2: &Tensor) -> Result<f64> {
    Ok(img1.sub(img2)?.square()?.mean())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let x = i as f64 - half;
            (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let sum: f64 = g.iter().sum();
    g.into_iter().map(|v| v / sum).collect()
}

/// Valid-mode separable filtering of an `h x w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Single-scale SSIM on luminance with an 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03 and dynamic range 1, averaged over
/// all window positions fully inside the image.
pub fn baseline_ssim(img1: &Tensor, img2: &Tensor) -> Result<f64> {
    if img1.shape() != img2.shape() {
        return Err(Error::Distance(format!(
            "image shapes differ: {:?} vs {:?}",
            img1.shape(),
            img2.shape()
        )));
    }
    let a = img1.luminance()?;
    let b = img2.luminance()?;
    let (_, h, w) = a.dims3()?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Distance(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let x: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let k = ssim_window();
    let mu_x = filter_valid(&x, h, w, &k);
    let mu_y = filter_valid(&y, h, w, &k);
    let e_xx = filter_valid(&xx, h, w, &k);
    let e_yy = filter_valid(&yy, h, w, &k);
    let e_xy = filter_valid(&xy, h, w, &k);

    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// Anything that scores the dissimilarity of two images (larger = more different).
pub trait ImageMetric: Sync {
    fn name(&self) -> String;
    fn distance(&self, reference: &Tensor, distorted: &Tensor) -> Result<f64>;
}

impl ImageMetric for MetricConfig {
    fn name(&self) -> String {
        format!("{}:{}:{}", self.model.name(), self.tap, self.subset.kind)
    }

    fn distance(&self, reference: &Tensor, distorted: &Tensor) -> Result<f64> {
        self.perceptual_distance(reference, distorted)
    }
}

/// Pixel-space mean squared error.
#[derive(Debug, Clone, Copy, Default)]
pub struct L2Metric;

impl ImageMetric for L2Metric {
    fn name(&self) -> String {
        "l2".into()
    }

    fn distance(&self, reference: &Tensor, distorted: &Tensor) -> Result<f64> {
        baseline_l2(reference, distorted)
    }
}

/// SSIM turned into a dissimilarity as `1 - SSIM`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SsimMetric;

impl ImageMetric for SsimMetric {
    fn name(&self) -> String {
        "ssim".into()
    }

    fn distance(&self, reference: &Tensor, distorted: &Tensor) -> Result<f64> {
        Ok(1.0 - baseline_ssim(reference, distorted)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(n: usize, cell: usize) -> Tensor {
        Tensor::from_fn_chw(1, n, n, |_, y, x| {
            if (y / cell + x / cell).is_multiple_of(2) {
                0.9
            } else {
                0.1
            }
        })
        .unwrap()
    }

    #[test]
    fn identical_images() {
        let a = checkerboard(16, 2);
        assert_eq!(baseline_l2(&a, &a).unwrap(), 0.0);
        assert!((baseline_ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverted_checkerboard_has_negative_ssim() {
        let a = checkerboard(24, 3);
        let b = Tensor::full(vec![1, 24, 24], 1.0).unwrap().sub(&a).unwrap();
        assert!(baseline_ssim(&a, &b).unwrap() < 0.0);
    }

    #[test]
    fn l2_is_mean_square_of_difference() {
        let a = checkerboard(8, 1);
        let b = checkerboard(8, 2);
        let via_primitives = a.sub(&b).unwrap().square().unwrap().mean();
        assert_eq!(baseline_l2(&a, &b).unwrap(), via_primitives);
    }

    #[test]
    fn ssim_small_image_rejected() {
        let a = checkerboard(8, 1);
        assert!(baseline_ssim(&a, &a).is_err());
        let b = checkerboard(16, 1);
        assert!(baseline_ssim(&a, &b).is_err());
    }

    #[test]
    fn pe_weights_have_unit_mean() {
        let subset = ChannelSubset::pe_weighted("k", &[0.1, 0.5, 0.0, 0.4]).unwrap();
        let w = channel_weights(&subset, Weighting::PeProportional).unwrap();
        assert!((w.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert_eq!(w[2], 0.0);
        let full = ChannelSubset::full("k", 3);
        assert!(channel_weights(&full, Weighting::PeProportional).is_err());
    }
}
