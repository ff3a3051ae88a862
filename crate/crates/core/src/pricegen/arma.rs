//! ARMA(P, Q) estimation in gaussianized residual space.
//!
//! Estimation runs in two stages: a Hannan–Rissanen regression gives starting
//! coefficients, then Levenberg–Marquardt minimizes the conditional sum of
//! squares, which is the Gaussian conditional likelihood up to a constant.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::gaussianize::Gaussianizer;
use crate::error::{Error, FitDiagnostics, Result};

/// Margin by which every AR root must lie outside the unit circle.
pub const STATIONARITY_MARGIN: f64 = 1e-9;

const MAX_ITERATIONS: usize = 200;
const BURN_IN: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    /// Innovation standard deviation in normal space.
    pub sigma: f64,
    pub gaussianizer: Gaussianizer,
}

/// Largest modulus among the inverse roots of `1 - Σ φ_i z^i`.
pub fn ar_inverse_root_max(phi: &[f64]) -> f64 {
    companion_spectral_radius(phi)
}

/// Largest modulus among the inverse roots of `1 + Σ θ_j z^j`.
pub fn ma_inverse_root_max(theta: &[f64]) -> f64 {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    companion_spectral_radius(&neg)
}

fn companion_spectral_radius(first_row: &[f64]) -> f64 {
    match first_row.len() {
        0 => 0.0,
        1 => first_row[0].abs(),
        p => {
            let mut m = DMatrix::<f64>::zeros(p, p);
            for (j, c) in first_row.iter().enumerate() {
                m[(0, j)] = *c;
            }
            for i in 1..p {
                m[(i, i - 1)] = 1.0;
            }
            m.complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
        }
    }
}

pub fn is_stationary(phi: &[f64]) -> bool {
    ar_inverse_root_max(phi) * (1.0 + STATIONARITY_MARGIN) < 1.0
}

impl ArmaModel {
    pub fn order(&self) -> (usize, usize) {
        (self.phi.len(), self.theta.len())
    }

    /// Simulates `n` normal-space values after a fixed burn-in.
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let p = self.phi.len();
        let q = self.theta.len();
        let total = n + BURN_IN;
        let mut y = vec![0.0; total];
        let mut e = vec![0.0; total];
        for t in 0..total {
            let eps: f64 = rng.sample::<f64, _>(StandardNormal) * self.sigma;
            let mut v = eps;
            for i in 1..=p.min(t) {
                v += self.phi[i - 1] * y[t - i];
            }
            for j in 1..=q.min(t) {
                v += self.theta[j - 1] * e[t - j];
            }
            y[t] = v;
            e[t] = eps;
        }
        y.split_off(BURN_IN)
    }
}

/// Gaussianizes a detrended residual and fits ARMA(p, q) to the result.
pub fn fit_arma(residual: &[f64], p: usize, q: usize) -> Result<ArmaModel> {
    if p + q == 0 {
        return Err(Error::InvalidInput("ARMA order must satisfy P + Q >= 1".into()));
    }
    let needed = 50 * (p + q);
    if residual.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: residual.len(),
        });
    }
    let gaussianizer = Gaussianizer::fit(residual)?;
    let z: Vec<f64> = residual.iter().map(|&x| gaussianizer.forward(x)).collect();
    let (phi, theta, sigma) = fit_normal_space(&z, p, q)?;
    Ok(ArmaModel {
        phi,
        theta,
        sigma,
        gaussianizer,
    })
}

/// Fits ARMA(p, q) directly to an already-normal series.
pub fn fit_normal_space(y: &[f64], p: usize, q: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let start = hannan_rissanen(y, p, q)?;
    let (params, sse) = minimize_css(y, p, start)?;
    let phi = params[..p].to_vec();
    let theta = params[p..].to_vec();
    let max_inverse_root = ar_inverse_root_max(&phi);
    if max_inverse_root * (1.0 + STATIONARITY_MARGIN) >= 1.0 {
        return Err(Error::NonStationary { max_inverse_root });
    }
    let sigma = (sse / (y.len() - p) as f64).sqrt();
    Ok((phi, theta, sigma))
}

/// Levinson–Durbin solution of the Yule–Walker equations.
fn yule_walker(y: &[f64], order: usize) -> Vec<f64> {
    let n = y.len() as f64;
    let acov: Vec<f64> = (0..=order)
        .map(|k| y.iter().zip(&y[k..]).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect();
    let mut a = vec![0.0; order];
    let mut err = acov[0];
    for k in 0..order {
        if err <= 0.0 {
            break;
        }
        let mut acc = acov[k + 1];
        for j in 0..k {
            acc -= a[j] * acov[k - j];
        }
        let refl = acc / err;
        let prev = a.clone();
        a[k] = refl;
        for j in 0..k {
            a[j] = prev[j] - refl * prev[k - 1 - j];
        }
        err *= 1.0 - refl * refl;
    }
    a
}

fn least_squares(rows: &[Vec<f64>], target: &[f64]) -> Option<Vec<f64>> {
    let k = rows.first()?.len();
    let mut ata = DMatrix::<f64>::zeros(k, k);
    let mut atb = DVector::<f64>::zeros(k);
    for (row, &b) in rows.iter().zip(target) {
        for i in 0..k {
            atb[i] += row[i] * b;
            for j in 0..k {
                ata[(i, j)] += row[i] * row[j];
            }
        }
    }
    ata.cholesky().map(|c| c.solve(&atb).iter().copied().collect())
}

fn shrink_to_admissible(mut params: Vec<f64>, p: usize) -> Vec<f64> {
    for _ in 0..200 {
        let (phi, theta) = params.split_at(p);
        if is_stationary(phi) && ma_inverse_root_max(theta) < 0.99 {
            return params;
        }
        params.iter_mut().for_each(|v| *v *= 0.9);
    }
    vec![0.0; params.len()]
}

fn hannan_rissanen(y: &[f64], p: usize, q: usize) -> Result<Vec<f64>> {
    if q == 0 {
        let phi = yule_walker(y, p);
        return Ok(shrink_to_admissible(phi, p));
    }
    let long = ((y.len() as f64).ln().powi(2) as usize).clamp(p + q + 1, 40);
    let a = yule_walker(y, long);
    let mut innov = vec![0.0; y.len()];
    for t in long..y.len() {
        innov[t] = y[t] - (1..=long).map(|i| a[i - 1] * y[t - i]).sum::<f64>();
    }
    let first = long + q.max(p);
    let rows: Vec<Vec<f64>> = (first..y.len())
        .map(|t| {
            (1..=p)
                .map(|i| y[t - i])
                .chain((1..=q).map(|j| innov[t - j]))
                .collect()
        })
        .collect();
    let coef = least_squares(&rows, &y[first..]).unwrap_or_else(|| vec![0.0; p + q]);
    Ok(shrink_to_admissible(coef, p))
}

/// Conditional residuals, their sum of squares, and the Gauss–Newton system.
fn css_system(y: &[f64], p: usize, params: &[f64]) -> (f64, DMatrix<f64>, DVector<f64>) {
    let k = params.len();
    let q = k - p;
    let (phi, theta) = params.split_at(p);
    let n = y.len();
    let mut e = vec![0.0; n];
    // de[t][m] = ∂e_t/∂param_m
    let mut de = vec![vec![0.0; k]; n];
    let mut jtj = DMatrix::<f64>::zeros(k, k);
    let mut jte = DVector::<f64>::zeros(k);
    let mut sse = 0.0;
    for t in p..n {
        let mut et = y[t];
        for i in 1..=p {
            et -= phi[i - 1] * y[t - i];
        }
        for j in 1..=q {
            if t >= p + j {
                et -= theta[j - 1] * e[t - j];
            }
        }
        e[t] = et;
        let mut grad = vec![0.0; k];
        for (i, g) in grad.iter_mut().enumerate().take(p) {
            *g = -y[t - i - 1];
        }
        for j in 1..=q {
            if t >= p + j {
                grad[p + j - 1] -= e[t - j];
                for (m, g) in grad.iter_mut().enumerate() {
                    *g -= theta[j - 1] * de[t - j][m];
                }
            }
        }
        for a in 0..k {
            jte[a] += grad[a] * et;
            for b in 0..k {
                jtj[(a, b)] += grad[a] * grad[b];
            }
        }
        de[t] = grad;
        sse += et * et;
    }
    (sse, jtj, jte)
}

fn css_value(y: &[f64], p: usize, params: &[f64]) -> f64 {
    let q = params.len() - p;
    let (phi, theta) = params.split_at(p);
    let mut e = vec![0.0; y.len()];
    let mut sse = 0.0;
    for t in p..y.len() {
        let mut et = y[t];
        for i in 1..=p {
            et -= phi[i - 1] * y[t - i];
        }
        for j in 1..=q {
            if t >= p + j {
                et -= theta[j - 1] * e[t - j];
            }
        }
        e[t] = et;
        sse += et * et;
    }
    sse
}

fn minimize_css(y: &[f64], p: usize, start: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let k = start.len();
    let mut params = start;
    let mut damping = 1e-3;
    let mut last_change = f64::INFINITY;
    let (mut sse, mut jtj, mut jte) = css_system(y, p, &params);
    for iter in 0..MAX_ITERATIONS {
        let mut lhs = jtj.clone();
        for i in 0..k {
            lhs[(i, i)] += damping * jtj[(i, i)].max(1e-12);
        }
        let step = match lhs.cholesky() {
            Some(c) => c.solve(&(-&jte)),
            None => {
                damping *= 10.0;
                continue;
            }
        };
        let candidate: Vec<f64> = params.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
        let (phi, theta) = candidate.split_at(p);
        let admissible = is_stationary(phi) && ma_inverse_root_max(theta) < 1.0;
        let cand_sse = if admissible {
            css_value(y, p, &candidate)
        } else {
            f64::INFINITY
        };
        if cand_sse < sse {
            last_change = (sse - cand_sse) / sse.max(f64::MIN_POSITIVE);
            params = candidate;
            let sys = css_system(y, p, &params);
            sse = sys.0;
            jtj = sys.1;
            jte = sys.2;
            damping = (damping / 10.0).max(1e-12);
            let step_norm = step.norm();
            if last_change < 1e-10 || step_norm < 1e-10 {
                log::debug!("CSS converged after {} iterations, sse {sse}", iter + 1);
                return Ok((params, sse));
            }
        } else {
            damping *= 10.0;
            if damping > 1e16 {
                // no descent direction left at working precision
                return Ok((params, sse));
            }
        }
    }
    Err(Error::NotConverged(FitDiagnostics {
        iterations: MAX_ITERATIONS,
        sum_of_squares: sse,
        last_relative_change: last_change,
        damping,
    }))
}
