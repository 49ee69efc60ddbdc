//! QA, JND and 2AFC validation protocols.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::image_io::decode_image;
use super::records::{AfcRecord, JndRecord, QaRecord};
use super::stats::{qa_statistics, QaStatistics};
use crate::distance::ImageMetric;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaResult {
    pub records: usize,
    pub statistics: QaStatistics,
    pub distances: Vec<f64>,
}

/// Correlates metric distances with DMOS. Distances and DMOS both grow
/// with degradation, so positive SROCC means agreement.
pub fn qa_test(metric: &dyn ImageMetric, records: &[QaRecord]) -> Result<QaResult> {
    if records.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "QA needs at least 2 records, got {}",
            records.len()
        )));
    }
    let distances = records
        .par_iter()
        .map(|r| metric.distance(&decode_image(&r.reference)?, &decode_image(&r.distorted)?))
        .collect::<Result<Vec<_>>>()?;
    let dmos: Vec<f64> = records.iter().map(|r| r.dmos).collect();
    Ok(QaResult {
        records: records.len(),
        statistics: qa_statistics(&distances, &dmos)?,
        distances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JndResult {
    pub records: usize,
    /// Best classification accuracy in percent.
    pub score: f64,
    /// Distances above this are classified "different". May be infinite.
    pub threshold: f64,
    pub distances: Vec<f64>,
}

/// Best accuracy (percent) of `distance > t` as a predictor of `labels`,
/// sweeping `t` over -inf, +inf and every midpoint of the sorted distinct
/// distances. Ties resolve to the lowest threshold.
pub fn best_threshold_accuracy(distances: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    if distances.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} distances for {} labels",
            distances.len(),
            labels.len()
        )));
    }
    if distances.len() < 2 {
        return Err(Error::EmptyInput("JND needs at least 2 records".into()));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::Eval(
            "JND labels contain a single class after binarization".into(),
        ));
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(Error::Eval("distances must be finite".into()));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    thresholds.push(f64::INFINITY);

    let n = distances.len() as f64;
    let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for t in thresholds {
        let correct = distances
            .iter()
            .zip(labels)
            .filter(|(&d, &l)| (d > t) == l)
            .count();
        let acc = 100.0 * correct as f64 / n;
        if acc > best.0 {
            best = (acc, t);
        }
    }
    Ok(best)
}

pub fn jnd_score(metric: &dyn ImageMetric, records: &[JndRecord]) -> Result<JndResult> {
    let labels: Vec<bool> = records.iter().map(|r| r.score.is_different()).collect();
    if records.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "JND needs at least 2 records, got {}",
            records.len()
        )));
    }
    let distances = records
        .par_iter()
        .map(|r| metric.distance(&decode_image(&r.image1)?, &decode_image(&r.image2)?))
        .collect::<Result<Vec<_>>>()?;
    let (score, threshold) = best_threshold_accuracy(&distances, &labels)?;
    Ok(JndResult {
        records: records.len(),
        score,
        threshold,
        distances,
    })
}

/// Credit for one 2AFC trial: `p` if the metric picks image 1 (smaller
/// distance to the reference), `1 - p` if it picks image 2, 0.5 on a tie.
pub fn afc_credit(d1: f64, d2: f64, p: f64) -> f64 {
    if d1 < d2 {
        p
    } else if d2 < d1 {
        1.0 - p
    } else {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfcResult {
    pub records: usize,
    /// Mean credit in `[0, 1]`.
    pub score: f64,
    pub credits: Vec<f64>,
}

pub fn mean_afc_credit(d1: &[f64], d2: &[f64], p: &[f64]) -> Result<f64> {
    if d1.len() != d2.len() || d1.len() != p.len() {
        return Err(Error::Eval("2AFC inputs differ in length".into()));
    }
    if d1.is_empty() {
        return Err(Error::EmptyInput("2AFC needs at least one record".into()));
    }
    let total: f64 = (0..d1.len()).map(|i| afc_credit(d1[i], d2[i], p[i])).sum();
    Ok(total / d1.len() as f64)
}

pub fn afc_score(metric: &dyn ImageMetric, records: &[AfcRecord]) -> Result<AfcResult> {
    if records.is_empty() {
        return Err(Error::EmptyInput("2AFC needs at least one record".into()));
    }
    let pairs = records
        .par_iter()
        .map(|r| {
            let reference = decode_image(&r.reference)?;
            let d1 = metric.distance(&reference, &decode_image(&r.image1)?)?;
            let d2 = metric.distance(&reference, &decode_image(&r.image2)?)?;
            Ok((d1, d2))
        })
        .collect::<Result<Vec<_>>>()?;
    let credits: Vec<f64> = pairs
        .iter()
        .zip(records)
        .map(|(&(d1, d2), r)| afc_credit(d1, d2, r.p))
        .collect();
    Ok(AfcResult {
        records: records.len(),
        score: credits.iter().sum::<f64>() / credits.len() as f64,
        credits,
    })
}
