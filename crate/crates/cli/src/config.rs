//! Scenario configuration: one JSON document per site, with data paths
//! resolved relative to the document.

use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use synfuel_ies::finance::FinancialParams;
use synfuel_ies::plantmodel::{IesConfiguration, SiteParams, TechnoParams};
use synfuel_ies::pricegen::PriceModelSpec;
use synfuel_ies::study::{default_suite, Perturbation, DEFAULT_REALIZATIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub site: SiteParams,
    #[serde(default)]
    pub techno: TechnoParams,
    #[serde(default)]
    pub finance: FinancialParams,
    pub data: DataPaths,
    #[serde(default)]
    pub study: StudySettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    /// `timestamp,price_usd_per_mwh`.
    pub price_history: PathBuf,
    /// `id,kind,capacity_tpy,concentration_pct,distance_km`.
    pub co2_sources: PathBuf,
    /// `kind,capture_usd_per_t,compression_usd_per_t`.
    pub capture_costs: PathBuf,
    /// `distance_km,flow_tpy,cost_usd_per_t`.
    pub transport_references: PathBuf,
    /// `year,fuel,usd_per_gal`.
    pub retail_prices: PathBuf,
    /// `state,fuel,tax_usd_per_gal,pct_of_retail,marketing_usd_per_gal,distribution_usd_per_gal`.
    pub adjustments: PathBuf,
    /// `date,naphtha_usd_per_gal,gasoline_usd_per_gal`.
    pub naphtha_history: PathBuf,
}

impl DataPaths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.price_history,
            &mut self.co2_sources,
            &mut self.capture_costs,
            &mut self.transport_references,
            &mut self.retail_prices,
            &mut self.adjustments,
            &mut self.naphtha_history,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    fn all(&self) -> [(&'static str, &Path); 7] {
        [
            ("price_history", &self.price_history),
            ("co2_sources", &self.co2_sources),
            ("capture_costs", &self.capture_costs),
            ("transport_references", &self.transport_references),
            ("retail_prices", &self.retail_prices),
            ("adjustments", &self.adjustments),
            ("naphtha_history", &self.naphtha_history),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    pub realizations: usize,
    pub base_seed: u64,
    /// Lattice points per capacity axis.
    pub sweep_points: usize,
    /// Calendar year of the first operating year; fuel prices are read from here.
    pub first_operating_year: i32,
    /// Streams at or above this CO₂ concentration skip capture.
    pub purity_threshold_pct: f64,
    pub price_model: PriceModelSpec,
    pub sensitivity: Vec<Perturbation>,
    /// Capacities for `npv`, `dispatch` and `sensitivity`. Without it,
    /// `sensitivity` uses the sweep optimum.
    pub configuration: Option<IesConfiguration>,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            realizations: DEFAULT_REALIZATIONS,
            base_seed: 0,
            sweep_points: 10,
            first_operating_year: 2026,
            purity_threshold_pct: 95.0,
            price_model: PriceModelSpec::default(),
            sensitivity: default_suite(),
            configuration: None,
        }
    }
}

/// JSON Schema of the configuration document.
pub fn schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(ScenarioConfig)).expect("schema serializes")
}

/// A parsed configuration plus the hash of its source bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub path: PathBuf,
    /// Hex SHA-256 of the configuration file.
    pub hash: String,
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<LoadedConfig> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: ScenarioConfig =
            serde_json::from_slice(&bytes).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.data.resolve(base);
        config.validate()?;
        let hash = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        Ok(LoadedConfig {
            config,
            path: path.to_path_buf(),
            hash,
        })
    }

    /// Schema-level checks; runs before any data is read.
    pub fn validate(&self) -> Result<()> {
        self.site.validate()?;
        self.techno.validate()?;
        self.finance.validate()?;
        ensure!(self.study.realizations >= 2, "study.realizations must be at least 2");
        ensure!(self.study.sweep_points >= 1, "study.sweep_points must be at least 1");
        ensure!(
            self.study.purity_threshold_pct > 0.0 && self.study.purity_threshold_pct <= 100.0,
            "study.purity_threshold_pct must lie in (0, 100]"
        );
        for (name, p) in self.data.all() {
            ensure!(p.is_file(), "data.{name}: file {} not found", p.display());
        }
        Ok(())
    }
}
