//! Small synthetic datasets (textures plus blur ladders) in manifest form, so
//! every protocol can be exercised without downloading human-study data.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::distort::{synth_distortions, DistortionKind};
use super::image_io::write_image;
use super::records::{write_manifest, AfcRecord, JndRecord, JndScore, Manifest, QaRecord};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Blur sigmas (pixels) of the synthetic QA ladder; DMOS is the sigma itself.
pub const BLUR_LEVELS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];
pub const TEXTURE_SIZE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureKind {
    /// Random plane waves with 1/f amplitudes.
    PinkWaves,
    /// Three gratings at fixed frequencies and orientations.
    Plaid,
    Checkerboard,
}

pub const TEXTURES: [TextureKind; 3] = [
    TextureKind::PinkWaves,
    TextureKind::Plaid,
    TextureKind::Checkerboard,
];

impl TextureKind {
    pub fn name(self) -> &'static str {
        match self {
            TextureKind::PinkWaves => "pink_waves",
            TextureKind::Plaid => "plaid",
            TextureKind::Checkerboard => "checkerboard",
        }
    }
}

fn plane_wave(f: f64, theta_deg: f64, phase: f64, y: usize, x: usize) -> f64 {
    let t = theta_deg.to_radians();
    (2.0 * PI * f * (x as f64 * t.cos() + y as f64 * t.sin()) + phase).cos()
}

/// Rescales values linearly onto `[0.15, 0.85]`.
fn stretch(values: Vec<f64>, size: usize) -> Result<Tensor> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let data = values
        .iter()
        .map(|v| (0.15 + 0.7 * (v - lo) / span) as f32)
        .collect();
    Tensor::new(vec![1, size, size], data)
}

/// Single-channel `size x size` texture in `[0.15, 0.85]`.
pub fn texture(kind: TextureKind, size: usize, seed: u64) -> Result<Tensor> {
    if size == 0 {
        return Err(Error::Eval("texture size must be positive".into()));
    }
    let values: Vec<f64> = match kind {
        TextureKind::PinkWaves => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let waves: Vec<(f64, f64, f64)> = (0..32)
                .map(|_| {
                    (
                        rng.random_range(0.02..0.45),
                        rng.random_range(0.0..180.0),
                        rng.random_range(0.0..2.0 * PI),
                    )
                })
                .collect();
            (0..size * size)
                .map(|i| {
                    let (y, x) = (i / size, i % size);
                    waves
                        .iter()
                        .map(|&(f, t, p)| plane_wave(f, t, p, y, x) / f)
                        .sum()
                })
                .collect()
        }
        TextureKind::Plaid => (0..size * size)
            .map(|i| {
                let (y, x) = (i / size, i % size);
                plane_wave(0.05, 0.0, 0.0, y, x)
                    + plane_wave(0.12, 60.0, 1.0, y, x)
                    + plane_wave(0.25, 120.0, 2.0, y, x)
            })
            .collect(),
        TextureKind::Checkerboard => (0..size * size)
            .map(|i| {
                let (y, x) = (i / size, i % size);
                if (y / 8 + x / 8).is_multiple_of(2) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
    };
    stretch(values, size)
}

/// Paths of a written synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatasets {
    pub qa: PathBuf,
    pub jnd: PathBuf,
    pub afc: PathBuf,
}

fn jnd_label(sigma: f64) -> JndScore {
    match sigma {
        s if s < 0.75 => JndScore::None,
        s if s < 1.25 => JndScore::OneThird,
        s if s < 1.75 => JndScore::TwoThirds,
        _ => JndScore::All,
    }
}

/// Writes reference textures, their blur ladders and three manifests
/// (`qa.csv`, `jnd.csv`, `2afc.csv`) into `dir`.
///
/// QA rows pair each reference with each blur level, DMOS = sigma. JND rows
/// use the same pairs with a label that grows with sigma. 2AFC rows compare
/// adjacent blur levels; observers prefer the milder one with p = 0.8.
pub fn write_blur_datasets(dir: impl AsRef<Path>, seed: u64) -> Result<SyntheticDatasets> {
    let dir = dir.as_ref();
    let img_dir = dir.join("images");
    fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;

    let mut qa = Vec::new();
    let mut jnd = Vec::new();
    let mut afc = Vec::new();
    for kind in TEXTURES {
        let reference = texture(kind, TEXTURE_SIZE, seed)?;
        let ref_path = img_dir.join(format!("{}_ref.pgm", kind.name()));
        write_image(&ref_path, &reference)?;
        let blurred = synth_distortions(&reference, DistortionKind::GaussianBlur, &BLUR_LEVELS, seed)?;
        let mut paths = Vec::with_capacity(blurred.len());
        for (level, image) in BLUR_LEVELS.iter().zip(&blurred) {
            let p = img_dir.join(format!("{}_blur{:.1}.pgm", kind.name(), level));
            write_image(&p, image)?;
            qa.push(QaRecord {
                reference: ref_path.clone(),
                distorted: p.clone(),
                dmos: *level,
            });
            jnd.push(JndRecord {
                image1: ref_path.clone(),
                image2: p.clone(),
                score: jnd_label(*level),
            });
            paths.push(p);
        }
        for (i, pair) in paths.windows(2).enumerate() {
            // Alternate presentation order so "always pick I1" is not rewarded.
            let (image1, image2, p) = if i % 2 == 0 {
                (pair[0].clone(), pair[1].clone(), 0.8)
            } else {
                (pair[1].clone(), pair[0].clone(), 0.2)
            };
            afc.push(AfcRecord {
                reference: ref_path.clone(),
                image1,
                image2,
                p,
            });
        }
    }

    let out = SyntheticDatasets {
        qa: dir.join("qa.csv"),
        jnd: dir.join("jnd.csv"),
        afc: dir.join("2afc.csv"),
    };
    write_manifest(&out.qa, &Manifest::Qa(qa))?;
    write_manifest(&out.jnd, &Manifest::Jnd(jnd))?;
    write_manifest(&out.afc, &Manifest::Afc(afc))?;
    Ok(out)
}
