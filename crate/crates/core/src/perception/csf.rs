use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A contrast sensitivity function over spatial frequency in cpd.
pub trait ContrastSensitivity: Send + Sync {
    /// Sensitivity at `cpd`; only defined for positive frequencies.
    fn sensitivity(&self, cpd: f64) -> Result<f64>;

    /// Frequency of maximal sensitivity found by scanning `(0, max_cpd]`
    /// in `step` increments. Ties resolve to the lower frequency.
    fn peak_frequency(&self, max_cpd: f64, step: f64) -> Result<f64> {
        if !(step > 0.0) || !(max_cpd >= step) {
            return Err(Error::Perception(format!(
                "invalid CSF peak search range (0, {max_cpd}] step {step}"
            )));
        }
        let n = (max_cpd / step + 1e-9).floor() as usize;
        let mut best = (step, f64::NEG_INFINITY);
        for i in 1..=n {
            let f = i as f64 * step;
            let s = self.sensitivity(f)?;
            if s > best.1 {
                best = (f, s);
            }
        }
        Ok(best.0)
    }
}

/// Mannos–Sakrison luminance CSF: `a (b + c f) exp(-(c f)^d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsfModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for CsfModel {
    fn default() -> Self {
        CsfModel {
            a: 2.6,
            b: 0.0192,
            c: 0.114,
            d: 1.1,
        }
    }
}

impl ContrastSensitivity for CsfModel {
    fn sensitivity(&self, cpd: f64) -> Result<f64> {
        if !(cpd > 0.0) || !cpd.is_finite() {
            return Err(Error::Perception(format!(
                "CSF is defined for positive frequencies, got {cpd}"
            )));
        }
        let cf = self.c * cpd;
        Ok((self.a * (self.b + cf) * (-cf.powf(self.d)).exp()).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decays_at_high_frequency() {
        let csf = CsfModel::default();
        assert!(csf.sensitivity(60.0).unwrap() < 0.01 * csf.sensitivity(8.0).unwrap());
    }

    #[test]
    fn peak_lies_between_six_and_nine_cpd() {
        let csf = CsfModel::default();
        let grid: Vec<f64> = (0..=62).map(|i| 0.5 + 0.25 * i as f64).collect();
        let (arg, _) = grid
            .iter()
            .map(|&f| (f, csf.sensitivity(f).unwrap()))
            .fold((0.0, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
        assert!((6.0..=9.0).contains(&arg), "{arg}");

        let fine = csf.peak_frequency(16.0, 0.01).unwrap();
        assert!((6.0..=9.0).contains(&fine), "{fine}");
        assert!((fine - arg).abs() <= 0.25);
    }

    #[test]
    fn rising_below_four_cpd() {
        let csf = CsfModel::default();
        let mut f = 0.5;
        while f < 4.0 {
            let here = csf.sensitivity(f).unwrap();
            let next = csf.sensitivity(f + 0.01).unwrap();
            assert!(next > here, "not increasing at {f}");
            f += 0.01;
        }
    }

    #[test]
    fn non_negative_up_to_64() {
        let csf = CsfModel::default();
        for i in 1..=640 {
            assert!(csf.sensitivity(i as f64 * 0.1).unwrap() >= 0.0);
        }
    }

    #[test]
    fn rejects_non_positive() {
        let csf = CsfModel::default();
        assert!(csf.sensitivity(0.0).is_err());
        assert!(csf.sensitivity(-1.0).is_err());
    }
}
