//! Frequency sensitivity, orientation selectivity and Perceptual Efficacy.

use crate::error::{Error, Result};

use super::csf::ContrastSensitivity;

/// Derivative of `curve` over `freqs`: central differences inside,
/// one-sided at both ends.
pub fn finite_difference(curve: &[f64], freqs: &[f64]) -> Result<Vec<f64>> {
    if curve.len() != freqs.len() {
        return Err(Error::Perception(format!(
            "curve has {} samples for {} frequencies",
            curve.len(),
            freqs.len()
        )));
    }
    let n = curve.len();
    if n < 2 {
        return Err(Error::Perception(
            "frequency sensitivity needs at least two frequencies".into(),
        ));
    }
    Ok((0..n)
        .map(|i| {
            let (lo, hi) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (curve[hi] - curve[lo]) / (freqs[hi] - freqs[lo])
        })
        .collect())
}

/// CSF-weighted frequency sensitivity: `sum_f CSF(f) * |da/df|`.
pub fn mu1(curve: &[f64], csf: &dyn ContrastSensitivity, freqs: &[f64]) -> Result<f64> {
    let slope = finite_difference(curve, freqs)?;
    let mut total = 0.0;
    for (&f, d) in freqs.iter().zip(slope) {
        total += csf.sensitivity(f)? * d.abs();
    }
    Ok(total)
}

/// Orientation selectivity: `sum_theta (a(theta) - max a)^2`.
pub fn mu2(curve: &[f64]) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::Perception("orientation curve is empty".into()));
    }
    let peak = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(curve.iter().map(|&a| (a - peak) * (a - peak)).sum())
}

/// Perceptual Efficacy of every channel in one layer:
/// `mu1[m] * mu2[m] / (sum mu1 * sum mu2)`.
pub fn perceptual_efficacy(layer: &str, mu1: &[f64], mu2: &[f64]) -> Result<Vec<f64>> {
    if mu1.len() != mu2.len() {
        return Err(Error::Perception(format!(
            "layer '{layer}': {} mu1 scores but {} mu2 scores",
            mu1.len(),
            mu2.len()
        )));
    }
    if mu1.is_empty() {
        return Err(Error::Perception(format!("layer '{layer}' has no channels")));
    }
    let s1: f64 = mu1.iter().sum();
    let s2: f64 = mu2.iter().sum();
    if !(s1 > 0.0) || !(s2 > 0.0) {
        return Err(Error::DegenerateLayer {
            layer: layer.to_string(),
            reason: format!("sum of mu1 = {s1}, sum of mu2 = {s2}; both must be positive"),
        });
    }
    let denom = s1 * s2;
    Ok(mu1.iter().zip(mu2).map(|(a, b)| a * b / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::CsfModel;
    use proptest::prelude::*;

    /// Independent difference-quotient evaluation of the mu1 sum.
    fn mu1_oracle(curve: &[f64], freqs: &[f64]) -> f64 {
        let n = curve.len();
        let mut total = 0.0;
        for i in 0..n {
            let d = if i == 0 {
                (curve[1] - curve[0]) / (freqs[1] - freqs[0])
            } else if i + 1 == n {
                (curve[n - 1] - curve[n - 2]) / (freqs[n - 1] - freqs[n - 2])
            } else {
                (curve[i + 1] - curve[i - 1]) / (freqs[i + 1] - freqs[i - 1])
            };
            let cf = 0.114 * freqs[i];
            let s = 2.6 * (0.0192 + cf) * (-cf.powf(1.1)).exp();
            total += s * d.abs();
        }
        total
    }

    fn freqs() -> Vec<f64> {
        (0..63).map(|i| 0.5 + 0.25 * i as f64).collect()
    }

    #[test]
    fn constant_curves_score_zero() {
        let f = freqs();
        let csf = CsfModel::default();
        assert_eq!(mu1(&vec![3.0; f.len()], &csf, &f).unwrap(), 0.0);
        assert_eq!(mu2(&[0.7; 36]).unwrap(), 0.0);
    }

    #[test]
    fn linear_curve_gives_csf_sum() {
        let f = freqs();
        let csf = CsfModel::default();
        let s = -0.37;
        let curve: Vec<f64> = f.iter().map(|x| s * x).collect();
        let want: f64 = f.iter().map(|&x| csf.sensitivity(x).unwrap() * s.abs()).sum();
        let got = mu1(&curve, &csf, &f).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn one_hot_orientation_curve() {
        let mut curve = vec![0.0; 36];
        curve[0] = 1.0;
        assert_eq!(mu2(&curve).unwrap(), 35.0);
    }

    #[test]
    fn efficacy_hand_case() {
        let pe = perceptual_efficacy("k", &[1.0, 3.0], &[2.0, 2.0]).unwrap();
        assert_eq!(pe, vec![0.125, 0.375]);
    }

    #[test]
    fn efficacy_single_channel() {
        assert_eq!(perceptual_efficacy("k", &[0.3], &[7.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn efficacy_degenerate_layer() {
        assert!(matches!(
            perceptual_efficacy("k", &[0.0, 0.0], &[1.0, 2.0]),
            Err(Error::DegenerateLayer { .. })
        ));
        assert!(perceptual_efficacy("k", &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mu_errors() {
        let csf = CsfModel::default();
        assert!(mu1(&[1.0], &csf, &[1.0]).is_err());
        assert!(mu1(&[1.0, 2.0], &csf, &[1.0, 2.0, 3.0]).is_err());
        assert!(mu2(&[]).is_err());
    }

    proptest! {
        #[test]
        fn mu1_matches_oracle(curve in prop::collection::vec(-5.0f64..5.0, 63)) {
            let f = freqs();
            let got = mu1(&curve, &CsfModel::default(), &f).unwrap();
            let want = mu1_oracle(&curve, &f);
            prop_assert!((got - want).abs() <= 1e-6, "{} vs {}", got, want);
            prop_assert!(got >= 0.0);
        }

        #[test]
        fn mu2_non_negative_and_zero_only_when_flat(curve in prop::collection::vec(-5.0f64..5.0, 2..40)) {
            let v = mu2(&curve).unwrap();
            prop_assert!(v >= 0.0);
            let hi = curve.iter().copied().fold(f64::MIN, f64::max);
            let lo = curve.iter().copied().fold(f64::MAX, f64::min);
            // The minimum alone contributes (lo - hi)^2.
            prop_assert!(v >= (hi - lo) * (hi - lo));
            let flat = vec![curve[0]; curve.len()];
            prop_assert_eq!(mu2(&flat).unwrap(), 0.0);
        }

        #[test]
        fn efficacy_invariant_under_uniform_scaling(
            pairs in prop::collection::vec((0.01f64..10.0, 0.01f64..10.0), 1..40),
            c in 0.01f64..100.0,
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let pe = perceptual_efficacy("k", &a, &b).unwrap();
            let scaled: Vec<f64> = a.iter().map(|v| v * c).collect();
            let pe1 = perceptual_efficacy("k", &scaled, &b).unwrap();
            let scaled2: Vec<f64> = b.iter().map(|v| v * c).collect();
            let pe2 = perceptual_efficacy("k", &a, &scaled2).unwrap();
            for i in 0..pe.len() {
                prop_assert!((pe[i] - pe1[i]).abs() <= 1e-12);
                prop_assert!((pe[i] - pe2[i]).abs() <= 1e-12);
            }
        }
    }
}
