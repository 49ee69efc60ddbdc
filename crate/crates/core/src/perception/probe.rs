//! Driving a network tap with grating sweeps and scoring its channels.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::csf::ContrastSensitivity;
use super::scores::{mu1, mu2, perceptual_efficacy};
use super::subset::pe_ranks;
use crate::error::{Error, Result};
use crate::inference::NetworkModel;
use crate::stimuli::{oriented_grating, radial_grating, StimulusGrid};
use crate::tensor::Tensor;

/// Mean activation of every channel (rows) at every stimulus (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurves {
    /// Stimulus parameter per column (cpd or degrees).
    pub samples: Vec<f64>,
    /// `curves[m][i]`: mean activation of channel `m` for stimulus `i`.
    pub curves: Vec<Vec<f64>>,
}

impl ResponseCurves {
    fn from_columns(samples: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let width = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != width) {
            return Err(Error::Perception("inconsistent channel counts across stimuli".into()));
        }
        let curves = (0..width)
            .map(|m| columns.iter().map(|col| col[m]).collect())
            .collect();
        Ok(ResponseCurves { samples, curves })
    }

    pub fn channels(&self) -> usize {
        self.curves.len()
    }
}

fn sweep(
    model: &NetworkModel,
    tap: &str,
    samples: &[f64],
    render: impl Fn(f64) -> Result<Tensor> + Sync,
) -> Result<ResponseCurves> {
    let columns = samples
        .par_iter()
        .map(|&s| model.forward_tap(&render(s)?, tap)?.spatial_mean())
        .collect::<Result<Vec<_>>>()?;
    ResponseCurves::from_columns(samples.to_vec(), columns)
}

/// Per-channel spatial-mean response to radial gratings at each grid frequency.
pub fn frequency_response(model: &NetworkModel, tap: &str, grid: &StimulusGrid) -> Result<ResponseCurves> {
    grid.validate()?;
    sweep(model, tap, &grid.frequencies, |f| radial_grating(f, grid))
}

/// Per-channel spatial-mean response to oriented gratings at `cpd`.
pub fn orientation_response(
    model: &NetworkModel,
    tap: &str,
    grid: &StimulusGrid,
    cpd: f64,
) -> Result<ResponseCurves> {
    grid.validate()?;
    sweep(model, tap, &grid.orientations, |theta| oriented_grating(theta, cpd, grid))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScore {
    pub layer: String,
    pub channel: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub pe: f64,
    /// 1-based position by descending PE.
    pub rank: usize,
}

/// Everything measured for one tap layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerScores {
    pub layer: String,
    pub scores: Vec<ChannelScore>,
    pub frequency: ResponseCurves,
    pub orientation: ResponseCurves,
    /// Frequency used for the orientation sweep, in cpd.
    pub orientation_cpd: f64,
}

impl LayerScores {
    pub fn pe(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.pe).collect()
    }

    pub fn width(&self) -> usize {
        self.scores.len()
    }
}

/// Scores already-measured response curves.
pub fn score_curves(
    layer: &str,
    frequency: &ResponseCurves,
    orientation: &ResponseCurves,
    csf: &dyn ContrastSensitivity,
) -> Result<Vec<ChannelScore>> {
    if frequency.channels() != orientation.channels() {
        return Err(Error::Perception(format!(
            "frequency sweep saw {} channels, orientation sweep {}",
            frequency.channels(),
            orientation.channels()
        )));
    }
    let m1 = frequency
        .curves
        .iter()
        .map(|c| mu1(c, csf, &frequency.samples))
        .collect::<Result<Vec<_>>>()?;
    let m2 = orientation
        .curves
        .iter()
        .map(|c| mu2(c))
        .collect::<Result<Vec<_>>>()?;
    let pe = perceptual_efficacy(layer, &m1, &m2)?;
    let ranks = pe_ranks(&pe);
    Ok((0..pe.len())
        .map(|m| ChannelScore {
            layer: layer.to_string(),
            channel: m,
            mu1: m1[m],
            mu2: m2[m],
            pe: pe[m],
            rank: ranks[m],
        })
        .collect())
}

/// Runs both sweeps on `tap` and scores every channel. The orientation
/// sweep uses the CSF peak located on a 0.01 cpd grid up to Nyquist.
pub fn probe_layer(
    model: &NetworkModel,
    tap: &str,
    grid: &StimulusGrid,
    csf: &dyn ContrastSensitivity,
) -> Result<LayerScores> {
    grid.validate()?;
    let peak = csf.peak_frequency(grid.geometry.nyquist_cpd(), 0.01)?;
    let frequency = frequency_response(model, tap, grid)?;
    let orientation = orientation_response(model, tap, grid, peak)?;
    let scores = score_curves(tap, &frequency, &orientation, csf)?;
    Ok(LayerScores {
        layer: tap.to_string(),
        scores,
        frequency,
        orientation,
        orientation_cpd: peak,
    })
}

/// Writes `layer,channel,mu1,mu2,pe,rank` rows.
pub fn write_scores_csv<W: Write>(scores: &[ChannelScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in scores {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_scores_csv<R: std::io::Read>(input: R) -> Result<Vec<ChannelScore>> {
    let mut r = csv::Reader::from_reader(input);
    let scores = r.deserialize().collect::<Result<Vec<ChannelScore>, _>>()?;
    if scores.is_empty() {
        return Err(Error::EmptyInput("score table has no rows".into()));
    }
    let layer = &scores[0].layer;
    if scores.iter().any(|s| &s.layer != layer) {
        return Err(Error::Perception(
            "score table mixes layers; PE is only comparable within one layer".into(),
        ));
    }
    if scores.iter().enumerate().any(|(i, s)| s.channel != i) {
        return Err(Error::Perception(
            "score table rows must list channels 0..M in order".into(),
        ));
    }
    Ok(scores)
}

/// Long-format curve table: `layer,channel,<axis>,mean_activation`.
pub fn write_curves_csv<W: Write>(layer: &str, axis: &str, curves: &ResponseCurves, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["layer", "channel", axis, "mean_activation"])?;
    for (m, curve) in curves.curves.iter().enumerate() {
        for (s, a) in curves.samples.iter().zip(curve) {
            w.write_record([layer.to_string(), m.to_string(), s.to_string(), a.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
