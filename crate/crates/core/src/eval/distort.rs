//! Synthetic distortions for desk-scale quality datasets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    GaussianBlur,
    WhiteNoise,
}

/// Normalized 1-D Gaussian taps with radius `ceil(3 sigma)`.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur of every channel with clamped (edge-replicated) borders.
pub fn gaussian_blur(image: &Tensor, sigma: f64) -> Result<Tensor> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Eval(format!("blur sigma must be positive, got {sigma}")));
    }
    let (c, h, w) = image.dims3()?;
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut out = Vec::with_capacity(c * h * w);
    let mut tmp = vec![0.0f64; h * w];
    for ch in 0..c {
        let plane = &image.data()[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = taps
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * plane[y * w + clamp(x as isize + k as isize - r, w)] as f64)
                    .sum();
            }
        }
        for y in 0..h {
            for x in 0..w {
                let v: f64 = taps
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * tmp[clamp(y as isize + k as isize - r, h) * w + x])
                    .sum();
                out.push(v as f32);
            }
        }
    }
    Tensor::new(vec![c, h, w], out)
}

/// Adds zero-mean Gaussian noise of standard deviation `sigma` and clips to `[0, 1]`.
pub fn white_noise(image: &Tensor, sigma: f64, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Eval(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Eval(e.to_string()))?;
    let data = image
        .data()
        .iter()
        .map(|&v| (v as f64 + normal.sample(rng)).clamp(0.0, 1.0) as f32)
        .collect();
    Tensor::new(image.shape().to_vec(), data)
}

/// Produces one distorted copy of `image` per level (blur sigma in pixels,
/// or noise sigma in luminance units). Level `i` draws noise from stream
/// `i` of a ChaCha generator keyed by `seed`, so outputs do not depend on
/// evaluation order.
pub fn synth_distortions(
    image: &Tensor,
    kind: DistortionKind,
    levels: &[f64],
    seed: u64,
) -> Result<Vec<Tensor>> {
    if levels.is_empty() {
        return Err(Error::Eval("at least one distortion level is needed".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Eval("distortion levels must be strictly increasing".into()));
    }
    levels
        .iter()
        .enumerate()
        .map(|(i, &level)| match kind {
            DistortionKind::GaussianBlur => gaussian_blur(image, level),
            DistortionKind::WhiteNoise => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                white_noise(image, level, &mut rng)
            }
        })
        .collect()
}
