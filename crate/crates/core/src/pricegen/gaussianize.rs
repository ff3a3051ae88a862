//! Monotone maps between residual space and standard-normal space.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest |z| handled before tail probabilities underflow.
const Z_LIMIT: f64 = 37.0;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Empirical-CDF quantile map with Hazen plotting positions and exponential tails.
///
/// Knots are the distinct training values; tied values share their mid-rank score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    values: Vec<f64>,
    scores: Vec<f64>,
    /// Mean excess above/below the outermost training points, used as the
    /// exponential tail scale.
    lower_scale: f64,
    upper_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gaussianizer {
    Identity,
    Empirical(QuantileMap),
}

impl Gaussianizer {
    pub fn fit(sample: &[f64]) -> Result<Self> {
        QuantileMap::fit(sample).map(Gaussianizer::Empirical)
    }

    /// Residual space to normal space.
    pub fn forward(&self, x: f64) -> f64 {
        match self {
            Gaussianizer::Identity => x,
            Gaussianizer::Empirical(m) => m.forward(x),
        }
    }

    /// Normal space back to residual space.
    pub fn inverse(&self, z: f64) -> f64 {
        match self {
            Gaussianizer::Identity => z,
            Gaussianizer::Empirical(m) => m.inverse(z),
        }
    }
}

fn tail_scale(sorted_outward: impl Iterator<Item = f64>, m: usize) -> f64 {
    // sorted_outward yields the extreme value first
    let tail: Vec<f64> = sorted_outward.take(m + 1).collect();
    let threshold = *tail.last().unwrap();
    let excess = tail[..tail.len() - 1]
        .iter()
        .map(|x| (x - threshold).abs())
        .sum::<f64>()
        / (tail.len() - 1) as f64;
    excess
}

impl QuantileMap {
    pub fn fit(sample: &[f64]) -> Result<Self> {
        if let Some(index) = sample.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let normal = std_normal();

        let mut values = Vec::new();
        let mut scores = Vec::new();
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let mid_rank = (i + j) as f64 / 2.0 + 0.5;
            values.push(sorted[i]);
            scores.push(normal.inverse_cdf(mid_rank / n as f64));
            i = j + 1;
        }
        if values.len() < 2 {
            return Err(Error::InvalidInput(
                "gaussianizer needs at least two distinct training values".into(),
            ));
        }

        let m = (n / 1000).clamp(5, 200).min(n - 1);
        let range = values[values.len() - 1] - values[0];
        let floor = 1e-6 * range;
        let upper_scale = tail_scale(sorted.iter().rev().copied(), m).max(floor);
        let lower_scale = tail_scale(sorted.iter().copied(), m).max(floor);
        Ok(Self {
            values,
            scores,
            lower_scale,
            upper_scale,
        })
    }

    pub fn knots(&self) -> usize {
        self.values.len()
    }

    pub fn forward(&self, x: f64) -> f64 {
        let last = self.values.len() - 1;
        if x < self.values[0] {
            let normal = std_normal();
            let p0 = normal.cdf(self.scores[0]);
            let p = p0 * (-(self.values[0] - x) / self.lower_scale).exp();
            return normal.inverse_cdf(p).max(-Z_LIMIT);
        }
        if x > self.values[last] {
            let normal = std_normal();
            let q0 = normal.sf(self.scores[last]);
            let q = q0 * (-(x - self.values[last]) / self.upper_scale).exp();
            return (-normal.inverse_cdf(q)).min(Z_LIMIT);
        }
        let j = self.values.partition_point(|&v| v <= x);
        if j > last {
            return self.scores[last];
        }
        let (x0, x1) = (self.values[j - 1], self.values[j]);
        let (z0, z1) = (self.scores[j - 1], self.scores[j]);
        z0 + (z1 - z0) * (x - x0) / (x1 - x0)
    }

    pub fn inverse(&self, z: f64) -> f64 {
        let last = self.scores.len() - 1;
        let z = z.clamp(-Z_LIMIT, Z_LIMIT);
        if z < self.scores[0] {
            let normal = std_normal();
            let ratio = normal.cdf(self.scores[0]) / normal.cdf(z);
            return self.values[0] - self.lower_scale * ratio.ln();
        }
        if z > self.scores[last] {
            let normal = std_normal();
            // sf is symmetric: sf(z) = cdf(-z), which keeps precision in the far tail
            let ratio = normal.cdf(-self.scores[last]) / normal.cdf(-z);
            return self.values[last] + self.upper_scale * ratio.ln();
        }
        let j = self.scores.partition_point(|&s| s <= z);
        if j > last {
            return self.values[last];
        }
        let (x0, x1) = (self.values[j - 1], self.values[j]);
        let (z0, z1) = (self.scores[j - 1], self.scores[j]);
        x0 + (x1 - x0) * (z - z0) / (z1 - z0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn skewed_sample(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let u = ((i as f64 * 0.618_033_988_7) % 1.0) * 0.998 + 0.001;
                (-u.ln()).powf(1.7) * 20.0 - 5.0
            })
            .collect()
    }

    #[test]
    fn bijective_on_training_points() {
        let xs = skewed_sample(5000);
        let g = Gaussianizer::fit(&xs).unwrap();
        for &x in &xs {
            let back = g.inverse(g.forward(x));
            assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0), "{x} -> {back}");
        }
    }

    #[test]
    fn ties_share_a_score() {
        let xs = [1.0, 2.0, 2.0, 2.0, 3.0];
        let m = QuantileMap::fit(&xs).unwrap();
        assert_eq!(m.knots(), 3);
        // the tie group holds ranks 2..=4 of 5, centred on the median
        assert!(m.forward(2.0).abs() < 1e-12);
    }

    #[test]
    fn tails_extrapolate_beyond_training_range() {
        let xs = skewed_sample(2000);
        let g = Gaussianizer::fit(&xs).unwrap();
        let max = xs.iter().cloned().fold(f64::MIN, f64::max);
        let min = xs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(g.inverse(6.0) > max);
        assert!(g.inverse(-6.0) < min);
        assert!(g.inverse(40.0).is_finite());
        assert!((g.forward(g.inverse(5.0)) - 5.0).abs() < 1e-6);
        assert!((g.forward(g.inverse(-5.0)) + 5.0).abs() < 1e-6);
    }

    #[test]
    fn constant_sample_is_rejected() {
        assert!(QuantileMap::fit(&[3.0; 10]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_both_ways(a in -8.0f64..8.0, b in -8.0f64..8.0) {
            let g = Gaussianizer::fit(&skewed_sample(3000)).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(g.inverse(lo) <= g.inverse(hi));
            let (x0, x1) = (g.inverse(lo), g.inverse(hi));
            prop_assert!(g.forward(x0) <= g.forward(x1) + 1e-12);
        }
    }
}
