//! Least-squares Fourier detrending.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sine/cosine coefficients for harmonics `1..=k` of one characteristic period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSet {
    pub period_hours: f64,
    /// `sin[i]` multiplies `sin(2π (i+1) t / period)`.
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierModel {
    pub offset: f64,
    pub terms: Vec<HarmonicSet>,
}

impl FourierModel {
    /// A model with no periodic terms.
    pub fn flat(offset: f64) -> Self {
        Self {
            offset,
            terms: Vec::new(),
        }
    }

    /// Evaluates the trend at `t` hours after the training origin.
    pub fn evaluate(&self, t: f64) -> f64 {
        let mut acc = self.offset;
        for set in &self.terms {
            for (i, (a, b)) in set.sin.iter().zip(&set.cos).enumerate() {
                let w = TAU * (i + 1) as f64 * t / set.period_hours;
                acc += a * w.sin() + b * w.cos();
            }
        }
        acc
    }

    pub fn evaluate_range(&self, first_hour: usize, hours: usize) -> Vec<f64> {
        (first_hour..first_hour + hours)
            .map(|t| self.evaluate(t as f64))
            .collect()
    }

    pub fn harmonics(&self) -> usize {
        self.terms.first().map_or(0, |s| s.sin.len())
    }
}

fn design_column(col: usize, t: f64, periods: &[f64], k: usize) -> f64 {
    if col == 0 {
        return 1.0;
    }
    let c = col - 1;
    let period = periods[c / (2 * k)];
    let harmonic = (c % (2 * k)) / 2 + 1;
    let w = TAU * harmonic as f64 * t / period;
    if c % 2 == 0 {
        w.sin()
    } else {
        w.cos()
    }
}

fn column_label(col: usize, periods: &[f64], k: usize) -> String {
    if col == 0 {
        return "offset".into();
    }
    let c = col - 1;
    let period = periods[c / (2 * k)];
    let harmonic = (c % (2 * k)) / 2 + 1;
    let f = if c % 2 == 0 { "sin" } else { "cos" };
    format!("{f}(2π·{harmonic}·t/{period})")
}

/// Fits offset plus `k` harmonics of each period by least squares (Householder QR).
///
/// Sample `i` is taken to lie at `t = i` hours.
pub fn fit_fourier(values: &[f64], periods: &[f64], k: usize) -> Result<FourierModel> {
    if periods.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidInput("Fourier periods must be positive".into()));
    }
    if k == 0 && !periods.is_empty() {
        return Err(Error::InvalidInput("harmonic count must be at least 1".into()));
    }
    let needed = (2 * k * periods.len()).max(1);
    if values.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: values.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }

    let n = values.len();
    let p = 1 + 2 * k * periods.len();
    let design = DMatrix::from_fn(n, p, |row, col| design_column(col, row as f64, periods, k));
    let norms: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();

    let qr = design.qr();
    let r = qr.r();
    for col in 0..p {
        if norms[col] == 0.0 || r[(col, col)].abs() <= 1e-8 * norms[col] {
            return Err(Error::RankDeficient {
                column: col,
                label: column_label(col, periods, k),
            });
        }
    }
    let mut rhs = DVector::from_column_slice(values);
    qr.q_tr_mul(&mut rhs);
    let head = rhs.rows(0, p).into_owned();
    let coef = r
        .solve_upper_triangular(&head)
        .ok_or_else(|| Error::RankDeficient {
            column: p - 1,
            label: column_label(p - 1, periods, k),
        })?;

    let terms = periods
        .iter()
        .enumerate()
        .map(|(pi, &period)| {
            let base = 1 + pi * 2 * k;
            HarmonicSet {
                period_hours: period,
                sin: (0..k).map(|h| coef[base + 2 * h]).collect(),
                cos: (0..k).map(|h| coef[base + 2 * h + 1]).collect(),
            }
        })
        .collect();
    Ok(FourierModel {
        offset: coef[0],
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_series_gives_offset_only() {
        let m = fit_fourier(&vec![42.0; 200], &[24.0], 2).unwrap();
        assert_abs_diff_eq!(m.offset, 42.0, epsilon = 1e-9);
        for set in &m.terms {
            for v in set.sin.iter().chain(&set.cos) {
                assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn recovers_planted_daily_sinusoid() {
        let xs: Vec<f64> = (0..240)
            .map(|t| 5.0 + 3.0 * (TAU * t as f64 / 24.0).sin())
            .collect();
        let m = fit_fourier(&xs, &[24.0], 2).unwrap();
        assert_abs_diff_eq!(m.offset, 5.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.terms[0].sin[0], 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.terms[0].cos[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.terms[0].sin[1], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn aliased_periods_are_rank_deficient() {
        let xs: Vec<f64> = (0..500).map(|t| (t % 7) as f64).collect();
        // second harmonic of 24 h is the first harmonic of 12 h
        let err = fit_fourier(&xs, &[24.0, 12.0], 2).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }), "{err}");
        let err = fit_fourier(&xs, &[24.0, 24.0], 1).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
        // a one-hour period samples sin(2π t) = 0 at integer hours
        assert!(matches!(
            fit_fourier(&xs, &[1.0], 1),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn precondition_errors() {
        assert!(matches!(
            fit_fourier(&[1.0; 5], &[24.0, 168.0], 2),
            Err(Error::InsufficientData { needed: 8, got: 5 })
        ));
        assert!(fit_fourier(&[1.0; 50], &[-24.0], 1).is_err());
    }

    #[test]
    fn residual_has_zero_mean() {
        let xs: Vec<f64> = (0..1000)
            .map(|t| 30.0 + ((t * 7919) % 101) as f64 * 0.3 + (TAU * t as f64 / 168.0).cos())
            .collect();
        let m = fit_fourier(&xs, &[168.0, 24.0], 3).unwrap();
        let resid: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(t, x)| x - m.evaluate(t as f64))
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / resid.len() as f64).sqrt();
        assert!(mean.abs() <= 1e-9 * sd.max(1.0), "mean {mean}");
    }
}
