use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which end of the PE ranking a subset is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectMode {
    High,
    Low,
}

/// How a subset was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubsetKind {
    Full,
    High { percent: f64 },
    Low { percent: f64 },
    PeWeighted,
}

impl fmt::Display for SubsetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsetKind::Full => write!(f, "F"),
            SubsetKind::High { percent } => write!(f, "H-{percent}"),
            SubsetKind::Low { percent } => write!(f, "L-{percent}"),
            SubsetKind::PeWeighted => write!(f, "PE-weighted"),
        }
    }
}

/// A set of channels from one tap layer, with optional non-negative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSubset {
    pub layer: String,
    /// Channel count of the layer the indices refer to.
    pub layer_width: usize,
    pub channels: Vec<usize>,
    /// PE of each selected channel, aligned with `channels`, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pe: Option<Vec<f64>>,
    pub kind: SubsetKind,
}

impl ChannelSubset {
    /// Every channel of a layer.
    pub fn full(layer: impl Into<String>, width: usize) -> Self {
        ChannelSubset {
            layer: layer.into(),
            layer_width: width,
            channels: (0..width).collect(),
            pe: None,
            kind: SubsetKind::Full,
        }
    }

    /// Every channel of a layer, carrying its PE for weighted distances.
    pub fn pe_weighted(layer: impl Into<String>, pe: &[f64]) -> Result<Self> {
        let subset = ChannelSubset {
            layer: layer.into(),
            layer_width: pe.len(),
            channels: (0..pe.len()).collect(),
            pe: Some(pe.to_vec()),
            kind: SubsetKind::PeWeighted,
        };
        subset.validate()?;
        Ok(subset)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::Perception(format!(
                "subset of layer '{}' is empty",
                self.layer
            )));
        }
        if self.channels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Perception(
                "subset channel indices must be sorted and unique".into(),
            ));
        }
        if let Some(&last) = self.channels.last() {
            if last >= self.layer_width {
                return Err(Error::Perception(format!(
                    "channel {last} out of range for layer '{}' of width {}",
                    self.layer, self.layer_width
                )));
            }
        }
        if let Some(pe) = &self.pe {
            if pe.len() != self.channels.len() {
                return Err(Error::Perception(format!(
                    "{} PE values for {} channels",
                    pe.len(),
                    self.channels.len()
                )));
            }
            if pe.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Perception("PE weights must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Number of channels in an `x`% subset of `width` channels: `ceil(x * width / 100)`.
pub fn subset_size(width: usize, percent: f64) -> Result<usize> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::Perception(format!(
            "subset percentage must lie in (0, 100], got {percent}"
        )));
    }
    let exact = percent * width as f64 / 100.0;
    // Guard against products like 0.07 * 100 landing just above an integer.
    let n = (exact - 1e-9).ceil().max(1.0) as usize;
    Ok(n.min(width))
}

/// Selects the `ceil(x% * M)` channels with the highest (or lowest) PE.
/// Ties favour the lower channel index; returned indices are sorted.
pub fn select_subset(layer: &str, pe: &[f64], mode: SelectMode, percent: f64) -> Result<ChannelSubset> {
    if pe.is_empty() {
        return Err(Error::Perception(format!("layer '{layer}' has no channels")));
    }
    if pe.iter().any(|v| !v.is_finite()) {
        return Err(Error::Perception("PE scores must be finite".into()));
    }
    let n = subset_size(pe.len(), percent)?;
    let mut order: Vec<usize> = (0..pe.len()).collect();
    match mode {
        SelectMode::High => order.sort_by(|&a, &b| pe[b].total_cmp(&pe[a]).then(a.cmp(&b))),
        SelectMode::Low => order.sort_by(|&a, &b| pe[a].total_cmp(&pe[b]).then(a.cmp(&b))),
    }
    let mut channels = order[..n].to_vec();
    channels.sort_unstable();
    let kind = if n == pe.len() {
        SubsetKind::Full
    } else {
        match mode {
            SelectMode::High => SubsetKind::High { percent },
            SelectMode::Low => SubsetKind::Low { percent },
        }
    };
    Ok(ChannelSubset {
        layer: layer.to_string(),
        layer_width: pe.len(),
        pe: Some(channels.iter().map(|&c| pe[c]).collect()),
        channels,
        kind,
    })
}

/// 1-based rank of every channel by descending PE, ties by channel index.
pub fn pe_ranks(pe: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pe.len()).collect();
    order.sort_by(|&a, &b| pe[b].total_cmp(&pe[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; pe.len()];
    for (r, &c) in order.iter().enumerate() {
        ranks[c] = r + 1;
    }
    ranks
}
