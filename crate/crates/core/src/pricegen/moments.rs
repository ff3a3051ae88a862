//! Distribution statistics used to validate synthetic price years against history.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    pub skewness: f64,
}

/// Linear-interpolation quantile of sorted data (`numpy`'s default rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl MomentStats {
    /// Panics on an empty slice.
    pub fn of(xs: &[f64]) -> Self {
        assert!(!xs.is_empty(), "moments of an empty series");
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let std = if xs.len() > 1 { (m2 / (n - 1.0)).sqrt() } else { 0.0 };
        let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
        let (skewness, kurtosis) = if m2 > 0.0 {
            (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            std,
            min: sorted[0],
            q25: quantile_sorted(&sorted, 0.25),
            q50: quantile_sorted(&sorted, 0.5),
            q75: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
            kurtosis,
            skewness,
        }
    }

    pub fn named(&self) -> [(&'static str, f64); 9] {
        [
            ("mean", self.mean),
            ("std", self.std),
            ("min", self.min),
            ("25%", self.q25),
            ("50%", self.q50),
            ("75%", self.q75),
            ("max", self.max),
            ("kurtosis", self.kurtosis),
            ("skewness", self.skewness),
        ]
    }
}

/// Pass bands. A location statistic passes when `|Δ| <= max(rel·|ref|, abs)`,
/// so the absolute band only matters for references near zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTolerances {
    pub location_rel: f64,
    pub location_abs: f64,
    pub shape_rel: f64,
    pub shape_abs: f64,
}

impl Default for MomentTolerances {
    fn default() -> Self {
        Self {
            location_rel: 0.05,
            location_abs: 0.5,
            shape_rel: 0.05,
            shape_abs: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub statistic: String,
    pub historical: f64,
    pub synthetic: f64,
    pub delta: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub historical: MomentStats,
    pub synthetic: MomentStats,
    pub checks: Vec<MomentCheck>,
}

impl MomentReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &MomentCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

pub fn compare_moments(
    historical: &MomentStats,
    synthetic: &MomentStats,
    tol: &MomentTolerances,
) -> MomentReport {
    let checks = historical
        .named()
        .iter()
        .zip(synthetic.named())
        .map(|(&(name, h), (_, s))| {
            let (rel, abs) = match name {
                "kurtosis" | "skewness" => (tol.shape_rel, tol.shape_abs),
                _ => (tol.location_rel, tol.location_abs),
            };
            let delta = s - h;
            MomentCheck {
                statistic: name.to_string(),
                historical: h,
                synthetic: s,
                delta,
                pass: delta.abs() <= (rel * h.abs()).max(abs),
            }
        })
        .collect();
    MomentReport {
        historical: *historical,
        synthetic: *synthetic,
        checks,
    }
}

pub fn validate_moments(historical: &[f64], synthetic: &[f64], tol: &MomentTolerances) -> MomentReport {
    compare_moments(&MomentStats::of(historical), &MomentStats::of(synthetic), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_pass_with_zero_deltas() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 - 20.0).collect();
        let r = validate_moments(&xs, &xs, &MomentTolerances::default());
        assert!(r.all_pass());
        assert!(r.checks.iter().all(|c| c.delta == 0.0));
    }

    #[test]
    fn shifted_mean_fails() {
        let xs: Vec<f64> = (0..1000).map(|i| 30.0 + ((i * 37) % 101) as f64 * 0.2).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * 1.5).collect();
        let r = validate_moments(&xs, &ys, &MomentTolerances::default());
        assert!(!r.all_pass());
        assert!(r.failures().any(|c| c.statistic == "mean"));
    }

    #[test]
    fn prairie_island_table_columns_pass() {
        // reference historical vs synthetic moment columns
        let hist = MomentStats {
            mean: 9.4,
            std: 15.1,
            min: -66.2,
            q25: -0.5,
            q50: 0.5,
            q75: 21.5,
            max: 97.0,
            kurtosis: 1.2,
            skewness: 1.3,
        };
        let syn = MomentStats {
            q25: -0.6,
            q50: 0.6,
            ..hist
        };
        let r = compare_moments(&hist, &syn, &MomentTolerances::default());
        assert!(r.all_pass(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn quantiles_match_numpy_linear_rule() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.25), 1.75);
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        let m = MomentStats::of(&[1.0, 2.0, 3.0, 4.0, 100.0]);
        assert!(m.skewness > 1.0);
        assert_eq!(m.max, 100.0);
    }
}
