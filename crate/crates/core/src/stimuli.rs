//! Sinusoidal grating stimuli.
//!
//! Frequencies are given in cycles per degree and converted to cycles per
//! pixel through [`ViewingGeometry`]. Images are grayscale luminance in
//! `[0, 1]`, replicated across the requested number of channels; network
//! input normalization is applied later by the model.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewingGeometry {
    pub pixels_per_degree: f64,
}

impl Default for ViewingGeometry {
    fn default() -> Self {
        ViewingGeometry {
            pixels_per_degree: 32.0,
        }
    }
}

impl ViewingGeometry {
    pub fn new(pixels_per_degree: f64) -> Result<Self> {
        if !(pixels_per_degree > 0.0 && pixels_per_degree.is_finite()) {
            return Err(Error::Stimulus(format!(
                "pixels per degree must be positive, got {pixels_per_degree}"
            )));
        }
        Ok(ViewingGeometry { pixels_per_degree })
    }

    /// Highest representable frequency in cycles per degree.
    pub fn nyquist_cpd(&self) -> f64 {
        self.pixels_per_degree / 2.0
    }

    pub fn cycles_per_pixel(&self, cpd: f64) -> f64 {
        cpd / self.pixels_per_degree
    }

    fn check_frequency(&self, cpd: f64) -> Result<()> {
        if !(cpd > 0.0) || !cpd.is_finite() {
            return Err(Error::Stimulus(format!("frequency must be positive, got {cpd}")));
        }
        if cpd > self.nyquist_cpd() {
            return Err(Error::Stimulus(format!(
                "frequency {cpd} cpd exceeds the Nyquist limit {} cpd at {} pixels/degree",
                self.nyquist_cpd(),
                self.pixels_per_degree
            )));
        }
        Ok(())
    }
}

/// Inclusive arithmetic range `start, start + step, ..., <= stop`.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::Stimulus(format!(
            "invalid grid {start}:{stop}:{step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

/// Sampling plan for both stimulus sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusGrid {
    /// Frequency sweep in cpd, strictly increasing.
    pub frequencies: Vec<f64>,
    /// Orientation sweep in degrees, in `[0, 180)`.
    pub orientations: Vec<f64>,
    pub contrast: f64,
    pub height: usize,
    pub width: usize,
    /// Number of identical planes in each generated image.
    pub channels: usize,
    pub geometry: ViewingGeometry,
}

impl StimulusGrid {
    /// Default sweeps (0.5..=16 cpd by 0.25; 0..=175 degrees by 5) at full
    /// contrast and 32 pixels/degree.
    pub fn with_size(channels: usize, height: usize, width: usize) -> Self {
        StimulusGrid {
            frequencies: linear_grid(0.5, 16.0, 0.25).expect("static grid"),
            orientations: linear_grid(0.0, 175.0, 5.0).expect("static grid"),
            contrast: 1.0,
            height,
            width,
            channels,
            geometry: ViewingGeometry::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::Stimulus("image dims must be positive".into()));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(Error::Stimulus(format!(
                "contrast must lie in (0, 1], got {}",
                self.contrast
            )));
        }
        ViewingGeometry::new(self.geometry.pixels_per_degree)?;
        if self.frequencies.is_empty() {
            return Err(Error::Stimulus("frequency sweep is empty".into()));
        }
        for &f in &self.frequencies {
            self.geometry.check_frequency(f)?;
        }
        if self.frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Stimulus(
                "frequency sweep must be strictly increasing".into(),
            ));
        }
        if self.orientations.is_empty() {
            return Err(Error::Stimulus("orientation sweep is empty".into()));
        }
        for &t in &self.orientations {
            if !(0.0..180.0).contains(&t) {
                return Err(Error::Stimulus(format!(
                    "orientation {t} outside [0, 180)"
                )));
            }
        }
        let mut sorted = self.orientations.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Stimulus("orientations must be unique".into()));
        }
        Ok(())
    }

    /// Pixel whose offset from the grating origin is zero.
    fn center(&self) -> (f64, f64) {
        ((self.width / 2) as f64, (self.height / 2) as f64)
    }

    fn render(&self, luminance: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (cx, cy) = self.center();
        let plane: Vec<f32> = (0..self.height * self.width)
            .map(|i| {
                let y = (i / self.width) as f64 - cy;
                let x = (i % self.width) as f64 - cx;
                luminance(x, y) as f32
            })
            .collect();
        let mut data = Vec::with_capacity(plane.len() * self.channels);
        for _ in 0..self.channels {
            data.extend_from_slice(&plane);
        }
        Tensor::new(vec![self.channels, self.height, self.width], data)
    }
}

/// Radially symmetric grating `0.5 + 0.5 C cos(2 pi f r)` around the center pixel.
pub fn radial_grating(cpd: f64, grid: &StimulusGrid) -> Result<Tensor> {
    grid.geometry.check_frequency(cpd)?;
    let k = 2.0 * PI * grid.geometry.cycles_per_pixel(cpd);
    let amp = 0.5 * grid.contrast;
    grid.render(|x, y| 0.5 + amp * (k * x.hypot(y)).cos())
}

/// Plane-wave grating varying along direction `theta_deg` (0 = along x).
///
/// Angles are reduced modulo 180 degrees first, so `theta` and
/// `theta + 180` render identical images.
pub fn oriented_grating(theta_deg: f64, cpd: f64, grid: &StimulusGrid) -> Result<Tensor> {
    if !theta_deg.is_finite() {
        return Err(Error::Stimulus(format!("orientation must be finite, got {theta_deg}")));
    }
    grid.geometry.check_frequency(cpd)?;
    let (s, c) = theta_deg.rem_euclid(180.0).to_radians().sin_cos();
    let k = 2.0 * PI * grid.geometry.cycles_per_pixel(cpd);
    let amp = 0.5 * grid.contrast;
    grid.render(|x, y| 0.5 + amp * (k * (x * c + y * s)).cos())
}
