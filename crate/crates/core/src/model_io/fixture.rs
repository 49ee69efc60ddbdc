//! A small deterministic probe network for tests and demos.
//!
//! One 7x7 conv layer with 16 output channels over a 3-channel input,
//! followed by ReLU and exposed as tap `"probe"`:
//!
//! * channels 0..8: zero-mean Gabor kernels at 0, 22.5, ..., 157.5 degrees,
//!   tuned to 0.25 cycles/pixel (8 cpd at the default 32 pixels/degree);
//! * channels 8..12: normalized Gaussian low-pass kernels;
//! * channels 12..16: near-zero constant kernels on a positive bias, which
//!   emit an essentially constant (DC) map.
//!
//! The seed only perturbs Gabor phases, low-pass widths and DC biases, so
//! every seed yields a network with the same qualitative channel groups.

use std::f64::consts::PI;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{InputSpec, LayerSpec, NetworkManifest, TapSpec, TensorContainer};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FIXTURE_TAP: &str = "probe";
pub const FIXTURE_INPUT_SIZE: usize = 128;
pub const KERNEL_SIZE: usize = 7;
/// Gabor carrier frequency in cycles per pixel.
pub const GABOR_FREQUENCY: f64 = 0.25;
pub const GABOR_SIGMA: f64 = 2.0;
/// Weight magnitude of the DC channels' constant kernels.
pub const DC_KERNEL_WEIGHT: f32 = 1.0e-5;

const IN_CHANNELS: usize = 3;

/// Channel index ranges of the fixture's three kernel families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureLayout {
    pub gabor: Range<usize>,
    pub lowpass: Range<usize>,
    pub dc: Range<usize>,
}

impl FixtureLayout {
    pub const fn standard() -> Self {
        FixtureLayout {
            gabor: 0..8,
            lowpass: 8..12,
            dc: 12..16,
        }
    }

    pub fn channels(&self) -> usize {
        self.dc.end
    }

    /// Orientation of Gabor channel `m` in degrees.
    pub fn gabor_orientation(&self, m: usize) -> Option<f64> {
        self.gabor
            .contains(&m)
            .then(|| (m - self.gabor.start) as f64 * 22.5)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureFiles {
    pub manifest: PathBuf,
    pub weights: PathBuf,
}

/// Single-plane 7x7 Gabor kernel, zero-mean and scaled to unit response
/// amplitude for a grating at its preferred orientation and frequency.
pub fn gabor_kernel(theta_deg: f64, phase: f64) -> Vec<f64> {
    let half = (KERNEL_SIZE / 2) as f64;
    let (s, c) = theta_deg.to_radians().sin_cos();
    let mut k: Vec<f64> = (0..KERNEL_SIZE * KERNEL_SIZE)
        .map(|i| {
            let y = (i / KERNEL_SIZE) as f64 - half;
            let x = (i % KERNEL_SIZE) as f64 - half;
            let envelope = (-(x * x + y * y) / (2.0 * GABOR_SIGMA * GABOR_SIGMA)).exp();
            envelope * (2.0 * PI * GABOR_FREQUENCY * (x * c + y * s) + phase).cos()
        })
        .collect();
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);

    let (mut re, mut im) = (0.0, 0.0);
    for (i, v) in k.iter().enumerate() {
        let y = (i / KERNEL_SIZE) as f64 - half;
        let x = (i % KERNEL_SIZE) as f64 - half;
        let arg = 2.0 * PI * GABOR_FREQUENCY * (x * c + y * s);
        re += v * arg.cos();
        im += v * arg.sin();
    }
    let gain = re.hypot(im);
    k.iter_mut().for_each(|v| *v /= gain);
    k
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = (KERNEL_SIZE / 2) as f64;
    let mut k: Vec<f64> = (0..KERNEL_SIZE * KERNEL_SIZE)
        .map(|i| {
            let y = (i / KERNEL_SIZE) as f64 - half;
            let x = (i % KERNEL_SIZE) as f64 - half;
            (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Builds the fixture in memory.
pub fn fixture_network(seed: u64) -> (NetworkManifest, TensorContainer) {
    let layout = FixtureLayout::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = KERNEL_SIZE * KERNEL_SIZE;
    let mut planes: Vec<Vec<f64>> = Vec::with_capacity(layout.channels());
    let mut bias = vec![0.0f32; layout.channels()];

    for m in layout.gabor.clone() {
        let theta = layout.gabor_orientation(m).unwrap();
        let phase = rng.random_range(0.0..2.0 * PI);
        planes.push(gabor_kernel(theta, phase));
    }
    for (j, _) in layout.lowpass.clone().enumerate() {
        let sigma = (0.75 + 0.25 * j as f64) * rng.random_range(0.95..1.05);
        planes.push(gaussian_kernel(sigma));
    }
    for m in layout.dc.clone() {
        planes.push(vec![DC_KERNEL_WEIGHT as f64; area]);
        bias[m] = rng.random_range(0.25f32..0.75);
    }

    // Grayscale stimuli arrive replicated on all input channels, so each
    // plane is split evenly to keep the single-plane response.
    let mut weights = Vec::with_capacity(layout.channels() * IN_CHANNELS * area);
    for plane in &planes {
        for _ in 0..IN_CHANNELS {
            weights.extend(plane.iter().map(|&v| (v / IN_CHANNELS as f64) as f32));
        }
    }

    let mut container = TensorContainer::new();
    container
        .insert(
            "conv1.weight",
            Tensor::new(
                vec![layout.channels(), IN_CHANNELS, KERNEL_SIZE, KERNEL_SIZE],
                weights,
            )
            .expect("fixture weights are well-formed"),
        )
        .expect("unique name");
    container
        .insert(
            "conv1.bias",
            Tensor::new(vec![layout.channels()], bias).expect("fixture bias is well-formed"),
        )
        .expect("unique name");

    let manifest = NetworkManifest {
        name: format!("fixture-seed{seed}"),
        input: InputSpec {
            channels: IN_CHANNELS,
            height: FIXTURE_INPUT_SIZE,
            width: FIXTURE_INPUT_SIZE,
            mean: vec![0.5; IN_CHANNELS],
            std: vec![0.25; IN_CHANNELS],
        },
        layers: vec![
            LayerSpec::Conv {
                weight: "conv1.weight".into(),
                bias: Some("conv1.bias".into()),
                stride: 1,
                padding: KERNEL_SIZE / 2,
            },
            LayerSpec::Relu,
        ],
        taps: vec![TapSpec {
            name: FIXTURE_TAP.into(),
            layer: 1,
        }],
    };
    (manifest, container)
}

/// Writes `model.json` and `weights.bin` for the fixture into `out_dir`.
pub fn gen_fixture(seed: u64, out_dir: impl AsRef<Path>) -> Result<FixtureFiles> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (manifest, container) = fixture_network(seed);
    let files = FixtureFiles {
        manifest: out_dir.join("model.json"),
        weights: out_dir.join("weights.bin"),
    };
    manifest.write(&files.manifest)?;
    container.write(&files.weights)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::load_model;

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = gen_fixture(7, a.path()).unwrap();
        let fb = gen_fixture(7, b.path()).unwrap();
        assert_eq!(fs::read(&fa.manifest).unwrap(), fs::read(&fb.manifest).unwrap());
        assert_eq!(fs::read(&fa.weights).unwrap(), fs::read(&fb.weights).unwrap());

        let c = tempfile::tempdir().unwrap();
        let fc = gen_fixture(8, c.path()).unwrap();
        assert_ne!(fs::read(&fa.weights).unwrap(), fs::read(&fc.weights).unwrap());
    }

    #[test]
    fn loads_and_resolves_probe() {
        let dir = tempfile::tempdir().unwrap();
        let files = gen_fixture(7, dir.path()).unwrap();
        let model = load_model(&files.manifest, &files.weights).unwrap();
        assert_eq!(
            model.tap_shape(FIXTURE_TAP, 128, 128).unwrap(),
            [16, 128, 128]
        );
    }

    #[test]
    fn gabor_kernels_are_zero_mean_with_unit_gain() {
        for i in 0..8 {
            let k = gabor_kernel(i as f64 * 22.5, 0.3);
            assert!(k.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    /// Direct correlation of the written channel-0 kernel with full-contrast
    /// gratings at 0 and 90 degrees, evaluated at the image center.
    #[test]
    fn gabor_zero_prefers_horizontal_variation() {
        let (_, container) = fixture_network(7);
        let w = container.get("conv1.weight").unwrap();
        let plane: Vec<f64> = (0..49)
            .map(|i| (0..3).map(|c| w.data()[c * 49 + i] as f64).sum())
            .collect();
        let energy = |theta: f64| -> f64 {
            let (s, c) = theta.to_radians().sin_cos();
            // Peak response over grating phase: quadrature pair of correlations.
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in plane.iter().enumerate() {
                let y = (i / 7) as f64 - 3.0;
                let x = (i % 7) as f64 - 3.0;
                let arg = 2.0 * PI * GABOR_FREQUENCY * (x * c + y * s);
                re += v * arg.cos();
                im += v * arg.sin();
            }
            re.hypot(im)
        };
        let r0 = energy(0.0);
        let r90 = energy(90.0);
        assert!((r0 - 1.0).abs() < 1e-5, "{r0}");
        assert!(r0 > 5.0 * r90, "{r0} vs {r90}");
    }
}
