//! Reads a scenario's data files and assembles the inputs of a study.

use anyhow::{anyhow, Context, Result};
use synfuel_ies::co2supply::{
    build_supply_curve, fit_transport, read_sources, read_transport_references, CaptureCostTable, SupplyCurve,
    TransportParams,
};
use synfuel_ies::fuelmarket::{
    fit_naphtha_ratio, gate_track, read_adjustments, read_price_pairs, FuelPriceTrack, RetailTrack,
};
use synfuel_ies::plantmodel::co2_demand_upper_bound;
use synfuel_ies::pricegen::{train, PriceSeries, SyntheticPriceModel};
use synfuel_ies::study::SiteStudy;

use crate::config::ScenarioConfig;

pub fn load_history(config: &ScenarioConfig) -> Result<PriceSeries> {
    let path = &config.data.price_history;
    PriceSeries::read_csv(path).with_context(|| format!("reading {}", path.display()))
}

pub fn train_model(config: &ScenarioConfig) -> Result<SyntheticPriceModel> {
    let history = load_history(config)?;
    Ok(train(&history, &config.site.name, &config.study.price_model)?)
}

pub fn fitted_transport(config: &ScenarioConfig) -> Result<TransportParams> {
    let refs = read_transport_references(&config.data.transport_references)?;
    Ok(fit_transport(&refs)?)
}

/// Supply curve out to the largest CO₂ demand any configuration at this site can have.
pub fn supply_curve(config: &ScenarioConfig) -> Result<SupplyCurve> {
    let sources = read_sources(&config.data.co2_sources)?;
    let table = CaptureCostTable::read_csv(&config.data.capture_costs, config.study.purity_threshold_pct)?;
    let transport = fitted_transport(config)?;
    let bound = co2_demand_upper_bound(&config.site, &config.techno);
    Ok(build_supply_curve(&sources, bound, &table, &transport)?)
}

pub fn fuel_track(config: &ScenarioConfig) -> Result<FuelPriceTrack> {
    let retail = RetailTrack::read_csv(&config.site.fuel_region, &config.data.retail_prices)?;
    let adjustments = read_adjustments(&config.data.adjustments)?;
    let factors = adjustments
        .get(&config.site.state)
        .ok_or_else(|| anyhow!("no fuel adjustments for state {}", config.site.state))?;
    let ratio = fit_naphtha_ratio(&read_price_pairs(&config.data.naphtha_history)?)?;
    Ok(gate_track(&retail, factors, ratio)?)
}

pub fn build_study(config: &ScenarioConfig) -> Result<SiteStudy> {
    let track = fuel_track(config)?;
    let study = SiteStudy {
        site: config.site.clone(),
        tech: config.techno.clone(),
        fin: config.finance.clone(),
        fuel_prices: track.window(config.study.first_operating_year, config.finance.project_life_years as usize)?,
        supply_curve: Some(supply_curve(config)?),
    };
    study.validate()?;
    Ok(study)
}
