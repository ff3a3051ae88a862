//! Synthetic electricity price years: Fourier trend plus gaussianized ARMA noise.

pub mod arma;
pub mod fourier;
pub mod gaussianize;
pub mod moments;
mod series;

use std::path::Path;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use arma::{fit_arma, ArmaModel};
pub use fourier::{fit_fourier, FourierModel, HarmonicSet};
pub use gaussianize::{Gaussianizer, QuantileMap};
pub use moments::{validate_moments, MomentReport, MomentStats, MomentTolerances};
pub use series::PriceSeries;

use crate::error::{Error, Result};

pub const MODEL_SCHEMA: &str = "pricegen.model.v1";

/// Structural choices for a price model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PriceModelSpec {
    pub periods_hours: Vec<f64>,
    pub harmonics: usize,
    pub ar_order: usize,
    pub ma_order: usize,
}

impl Default for PriceModelSpec {
    fn default() -> Self {
        Self {
            periods_hours: vec![8760.0, 168.0, 24.0],
            harmonics: 3,
            ar_order: 3,
            ma_order: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub site: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub hours: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPriceModel {
    pub schema: String,
    pub fourier: FourierModel,
    pub arma: ArmaModel,
    pub training: TrainingMeta,
}

/// Detrends `series`, gaussianizes the residual and fits the ARMA noise model.
pub fn train(series: &PriceSeries, site: &str, spec: &PriceModelSpec) -> Result<SyntheticPriceModel> {
    let prices = series.prices();
    let fourier = fit_fourier(prices, &spec.periods_hours, spec.harmonics)?;
    let residual: Vec<f64> = prices
        .iter()
        .enumerate()
        .map(|(t, x)| x - fourier.evaluate(t as f64))
        .collect();
    let arma = fit_arma(&residual, spec.ar_order, spec.ma_order)?;
    log::info!(
        "trained {site}: phi={:?} theta={:?} sigma={:.4}",
        arma.phi,
        arma.theta,
        arma.sigma
    );
    Ok(SyntheticPriceModel {
        schema: MODEL_SCHEMA.to_string(),
        fourier,
        arma,
        training: TrainingMeta {
            site: site.to_string(),
            start: series.start(),
            end: series.timestamp(series.len() - 1),
            hours: series.len(),
        },
    })
}

/// Draws `hours` synthetic prices; bit-identical for identical `(model, hours, seed)`.
///
/// The series starts at the training origin so the Fourier phase lines up
/// with the historical calendar.
pub fn generate(model: &SyntheticPriceModel, hours: usize, seed: u64) -> Result<PriceSeries> {
    if hours == 0 {
        return Err(Error::InvalidInput("cannot generate zero hours".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = model.arma.simulate(hours, &mut rng);
    let prices: Vec<f64> = noise
        .into_iter()
        .enumerate()
        .map(|(t, z)| model.fourier.evaluate(t as f64) + model.arma.gaussianizer.inverse(z))
        .collect();
    PriceSeries::new(model.training.start, prices)
}

impl SyntheticPriceModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if model.schema != MODEL_SCHEMA {
            return Err(Error::InvalidInput(format!(
                "{}: unsupported model schema `{}` (expected {MODEL_SCHEMA})",
                path.display(),
                model.schema
            )));
        }
        Ok(model)
    }
}
