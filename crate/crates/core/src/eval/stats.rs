//! Correlation statistics between metric outputs and human scores.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Eval(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Eval("at least two paired samples are needed".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Eval("samples must be finite".into()));
    }
    Ok(())
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "one of the inputs has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank-order correlation.
pub fn srocc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson_unchecked(&average_ranks(x), &average_ranks(y))
}

/// Pearson linear correlation on the raw values.
pub fn lcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson_unchecked(x, y)
}

pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / x.len() as f64).sqrt())
}

/// Four-parameter logistic `bottom + (top - bottom) / (1 + exp(-(x - mid) / scale))`
/// mapping metric values onto the human score scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Logistic4 {
    pub top: f64,
    pub bottom: f64,
    pub mid: f64,
    pub scale: f64,
}

impl Logistic4 {
    pub fn eval(&self, x: f64) -> f64 {
        self.bottom + (self.top - self.bottom) / (1.0 + (-(x - self.mid) / self.scale).exp())
    }

    fn params(&self) -> Vector4<f64> {
        Vector4::new(self.top, self.bottom, self.mid, self.scale)
    }

    fn from_params(p: &Vector4<f64>) -> Self {
        Logistic4 {
            top: p[0],
            bottom: p[1],
            mid: p[2],
            scale: p[3],
        }
    }

    /// Partial derivatives with respect to (top, bottom, mid, scale).
    fn gradient(&self, x: f64) -> Vector4<f64> {
        let z = (x - self.mid) / self.scale;
        let s = 1.0 / (1.0 + (-z).exp());
        let ds = s * (1.0 - s);
        let span = self.top - self.bottom;
        Vector4::new(
            s,
            1.0 - s,
            -span * ds / self.scale,
            -span * ds * z / self.scale,
        )
    }
}

pub const FIT_MAX_ITERATIONS: usize = 500;
pub const FIT_TOLERANCE: f64 = 1e-8;

fn sum_sq(model: &Logistic4, x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - model.eval(a);
            r * r
        })
        .sum()
}

/// Least-squares logistic fit by damped Gauss-Newton (Levenberg-Marquardt
/// damping). Both axes are standardized internally and the fit starts from
/// the data range, so metric values of any magnitude behave the same.
pub fn fit_logistic(x: &[f64], y: &[f64]) -> Result<Logistic4> {
    check_pair(x, y)?;
    let (mx, sx) = mean_sd(x);
    let (my, sy) = mean_sd(y);
    if sx == 0.0 {
        return Err(Error::UndefinedCorrelation("metric values are constant".into()));
    }
    let sy = if sy == 0.0 { 1.0 } else { sy };
    let xs: Vec<f64> = x.iter().map(|v| (v - mx) / sx).collect();
    let ys: Vec<f64> = y.iter().map(|v| (v - my) / sy).collect();
    let unit = fit_standardized(&xs, &ys)?;
    Ok(Logistic4 {
        top: my + sy * unit.top,
        bottom: my + sy * unit.bottom,
        mid: mx + sx * unit.mid,
        scale: sx * unit.scale,
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, sd)
}

fn fit_standardized(x: &[f64], y: &[f64]) -> Result<Logistic4> {
    let y_max = y.iter().copied().fold(f64::MIN, f64::max);
    let y_min = y.iter().copied().fold(f64::MAX, f64::min);
    let increasing = pearson_unchecked(x, y).map_or(true, |r| r >= 0.0);
    let mut model = Logistic4 {
        top: y_max,
        bottom: y_min,
        mid: 0.0,
        scale: if increasing { 1.0 } else { -1.0 },
    };
    let mut err = sum_sq(&model, x, y);
    let mut lambda = 1e-3;

    for _ in 0..FIT_MAX_ITERATIONS {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&a, &b) in x.iter().zip(y) {
            let g = model.gradient(a);
            let r = b - model.eval(a);
            jtj += g * g.transpose();
            jtr += g * r;
        }
        if jtr.norm() <= FIT_TOLERANCE {
            return Ok(model);
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = Logistic4::from_params(&(model.params() + step));
            let cand_err = sum_sq(&candidate, x, y);
            if cand_err.is_finite() && cand_err <= err && candidate.scale != 0.0 {
                let drop = err - cand_err;
                let small_step = step.norm() <= FIT_TOLERANCE * (1.0 + model.params().norm());
                model = candidate;
                err = cand_err;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if drop <= FIT_TOLERANCE * err.max(FIT_TOLERANCE) || small_step {
                    return Ok(model);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No damped step lowers the error any further.
            return Ok(model);
        }
    }
    Err(Error::FitNotConverged {
        iterations: FIT_MAX_ITERATIONS,
    })
}

/// SROCC, LCC and RMSE of a metric against human scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaStatistics {
    pub srocc: f64,
    /// LCC after logistic mapping (raw LCC if the fit failed).
    pub lcc: f64,
    /// RMSE after logistic mapping (raw RMSE if the fit failed).
    pub rmse: f64,
    pub lcc_raw: f64,
    pub rmse_raw: f64,
    /// `None` when the logistic fit did not converge.
    pub logistic: Option<Logistic4>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
}

pub fn qa_statistics(metric: &[f64], human: &[f64]) -> Result<QaStatistics> {
    let s = srocc(metric, human)?;
    let lcc_raw = lcc(metric, human)?;
    let rmse_raw = rmse(metric, human)?;
    let (lcc_fit, rmse_fit, logistic, fit_error) = match fit_logistic(metric, human) {
        Ok(model) => {
            let mapped: Vec<f64> = metric.iter().map(|&v| model.eval(v)).collect();
            // A mapping that collapses to a constant has no defined LCC.
            let l = lcc(&mapped, human).unwrap_or(lcc_raw);
            (l, rmse(&mapped, human)?, Some(model), None)
        }
        Err(e @ Error::FitNotConverged { .. }) => (lcc_raw, rmse_raw, None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(QaStatistics {
        srocc: s,
        lcc: lcc_fit,
        rmse: rmse_fit,
        lcc_raw,
        rmse_raw,
        logistic,
        fit_error,
    })
}
