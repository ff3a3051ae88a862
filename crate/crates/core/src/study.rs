//! Monte Carlo NPV evaluation, capacity sweeps, optimum selection and the
//! input-perturbation sensitivity suite.
//!
//! Price years are drawn once per `(base_seed, realization, year)` and shared
//! by every configuration and sensitivity case evaluated against them, so
//! differences between cases carry no sampling noise of their own.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::co2supply::SupplyCurve;
use crate::dispatch::{annual_dispatch_summary, h2_value_per_kg, optimize_dispatch, DispatchProblem, DispatchSummary};
use crate::error::{Error, Result};
use crate::finance::{build_ledger, change_in_profitability, CashflowLedger, FinancialParams, LedgerInputs};
use crate::plantmodel::{htse_h2_rate, CapacityRanges, IesConfiguration, Products, SiteParams, TechnoParams};
use crate::pricegen::{generate, SyntheticPriceModel};

pub const HOURS_PER_SCENARIO_YEAR: usize = 8760;
pub const DEFAULT_REALIZATIONS: usize = 20;
/// Normal-approximation 95% quantile used for confidence half-widths.
pub const Z_95: f64 = 1.96;

/// Inputs that stay fixed across the configurations studied at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteStudy {
    pub site: SiteParams,
    pub tech: TechnoParams,
    pub fin: FinancialParams,
    /// Base-year refinery-gate prices, one entry per operating year.
    pub fuel_prices: Vec<Products>,
    pub supply_curve: Option<SupplyCurve>,
}

impl SiteStudy {
    pub fn life(&self) -> usize {
        self.fin.project_life_years as usize
    }

    /// Operating year `t` (1-based) with storage starting empty; hydrogen left in
    /// the tank is valued at that year's escalated credit-plus-fuel value.
    pub fn year_problem<'p>(&'p self, config: &IesConfiguration, prices: &'p [f64], t: usize) -> DispatchProblem<'p> {
        let escalation = (1.0 + self.fin.inflation).powi(t as i32);
        let fuel = self.fuel_prices[t - 1].scale(escalation);
        DispatchProblem {
            prices,
            config: *config,
            params: &self.tech,
            npp_capacity_mwe: self.site.npp_capacity_mwe,
            initial_storage_kg: 0.0,
            terminal_value_usd_per_kg: h2_value_per_kg(&self.tech, &fuel),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.site.validate()?;
        self.tech.validate()?;
        self.fin.validate()?;
        if self.fuel_prices.len() < self.life() {
            return Err(Error::InvalidInput(format!(
                "{} years of fuel prices for a {}-year project",
                self.fuel_prices.len(),
                self.life()
            )));
        }
        Ok(())
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator seed for one price year of one realization.
pub fn scenario_seed(base_seed: u64, realization: usize, year: usize) -> u64 {
    splitmix64(splitmix64(base_seed ^ splitmix64(realization as u64)) ^ year as u64)
}

/// Hourly price years indexed `[realization][year][hour]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceScenarios {
    pub base_seed: u64,
    pub years: Vec<Vec<Vec<f64>>>,
}

impl PriceScenarios {
    /// Draws `realizations × years` independent synthetic years.
    pub fn generate(model: &SyntheticPriceModel, realizations: usize, years: usize, base_seed: u64) -> Result<Self> {
        if realizations < 2 {
            return Err(Error::InvalidInput("at least two realizations are needed".into()));
        }
        let flat: Vec<Vec<f64>> = (0..realizations * years)
            .into_par_iter()
            .map(|i| {
                let seed = scenario_seed(base_seed, i / years, i % years);
                generate(model, HOURS_PER_SCENARIO_YEAR, seed).map(|s| s.into_prices())
            })
            .collect::<Result<_>>()?;
        let mut it = flat.into_iter();
        let years = (0..realizations).map(|_| it.by_ref().take(years).collect()).collect();
        Ok(Self { base_seed, years })
    }

    /// Wraps explicit price years (e.g. replayed history).
    pub fn from_years(years: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if years.len() < 2 {
            return Err(Error::InvalidInput("at least two realizations are needed".into()));
        }
        Ok(Self { base_seed: 0, years })
    }

    pub fn realizations(&self) -> usize {
        self.years.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    /// `Z_95 · std / √n`.
    pub ci95: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std = var.max(0.0).sqrt();
        Self {
            mean,
            std,
            ci95: Z_95 * std / n.sqrt(),
        }
    }
}

/// Aggregate outcome of one configuration over all realizations.
/// Statistics of an infeasible result are zero and carry no meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub config: IesConfiguration,
    pub feasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeasible_reason: Option<String>,
    pub realizations: usize,
    pub base_seed: u64,
    pub npv: Moments,
    pub delta_npv: Moments,
    /// Mean baseline (grid-only) NPV.
    pub baseline_npv_mean: f64,
    /// Mean credit share of IES revenue.
    pub ptc_share: f64,
    /// Mean discounted IES cashflow by category, $.
    pub cashflow_means: BTreeMap<String, f64>,
    /// Mean yearly fuel output per MWe of plant capacity, gal/MWe-yr.
    pub production_gal_per_mwe_yr: Products,
    pub grid_mwh_per_year: f64,
}

impl ScenarioResult {
    fn infeasible(config: IesConfiguration, scenarios: &PriceScenarios, reason: String) -> Self {
        let zero = Moments {
            mean: 0.0,
            std: 0.0,
            ci95: 0.0,
        };
        Self {
            config,
            feasible: false,
            infeasible_reason: Some(reason),
            realizations: scenarios.realizations(),
            base_seed: scenarios.base_seed,
            npv: zero,
            delta_npv: zero,
            baseline_npv_mean: 0.0,
            ptc_share: 0.0,
            cashflow_means: BTreeMap::new(),
            production_gal_per_mwe_yr: Products::default(),
            grid_mwh_per_year: 0.0,
        }
    }
}

struct Realization {
    npv: f64,
    baseline_npv: f64,
    ptc_share: f64,
    categories: Vec<(&'static str, f64)>,
    gallons_per_year: Products,
    grid_mwh_per_year: f64,
}

/// Evaluates configurations of one site against a fixed scenario set.
pub struct Evaluator<'a> {
    study: &'a SiteStudy,
    scenarios: &'a PriceScenarios,
    baseline_npv: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(study: &'a SiteStudy, scenarios: &'a PriceScenarios) -> Result<Self> {
        study.validate()?;
        let life = study.life();
        if let Some((k, _)) = scenarios.years.iter().enumerate().find(|(_, ys)| ys.len() < life) {
            return Err(Error::InvalidInput(format!(
                "realization {k} has fewer than {life} price years"
            )));
        }
        let baseline_npv = scenarios
            .years
            .par_iter()
            .map(|years| {
                let (ledger, _) = run_ledger(study, &IesConfiguration::zero(), years)?;
                Ok(ledger.npv(study.fin.wacc))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            study,
            scenarios,
            baseline_npv,
        })
    }

    pub fn study(&self) -> &SiteStudy {
        self.study
    }

    pub fn scenarios(&self) -> &PriceScenarios {
        self.scenarios
    }

    pub fn baseline_npv(&self) -> &[f64] {
        &self.baseline_npv
    }

    /// Monte Carlo NPV of `config`. Infeasible configurations or dispatches
    /// yield a result flagged infeasible rather than an error.
    pub fn evaluate(&self, config: &IesConfiguration) -> Result<ScenarioResult> {
        let study = self.study;
        if let Err(e) = config.validate(&study.site, &study.tech) {
            return Ok(ScenarioResult::infeasible(*config, self.scenarios, e.to_string()));
        }
        let outcomes: Vec<Result<Realization>> = self
            .scenarios
            .years
            .par_iter()
            .zip(&self.baseline_npv)
            .map(|(years, &baseline_npv)| {
                let (ledger, summaries) = run_ledger(study, config, years)?;
                let life = summaries.len() as f64;
                let gallons = summaries
                    .iter()
                    .map(|s| study.tech.gallons(&s.products_kg))
                    .fold(Products::default(), |acc, g| acc.zip_with(&g, |a, b| a + b));
                Ok(Realization {
                    npv: ledger.npv(study.fin.wacc),
                    baseline_npv,
                    ptc_share: ledger.ptc_share(),
                    categories: ledger.category_totals(Some(study.fin.wacc)),
                    gallons_per_year: gallons.scale(1.0 / life),
                    grid_mwh_per_year: summaries.iter().map(|s| s.grid_mwh).sum::<f64>() / life,
                })
            })
            .collect();
        let mut runs = Vec::with_capacity(outcomes.len());
        for outcome in outcomes {
            match outcome {
                Ok(r) => runs.push(r),
                Err(e @ Error::DispatchInfeasible { .. }) => {
                    return Ok(ScenarioResult::infeasible(*config, self.scenarios, e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
        Ok(self.aggregate(config, &runs))
    }

    fn aggregate(&self, config: &IesConfiguration, runs: &[Realization]) -> ScenarioResult {
        let n = runs.len() as f64;
        let npvs: Vec<f64> = runs.iter().map(|r| r.npv).collect();
        let deltas: Vec<f64> = runs.iter().map(|r| r.npv - r.baseline_npv).collect();
        let mut cashflow_means = BTreeMap::new();
        for r in runs {
            for (name, v) in &r.categories {
                *cashflow_means.entry(name.to_string()).or_insert(0.0) += v / n;
            }
        }
        let npp = self.study.site.npp_capacity_mwe;
        let production = runs
            .iter()
            .fold(Products::default(), |acc, r| acc.zip_with(&r.gallons_per_year, |a, b| a + b))
            .scale(1.0 / (n * npp));
        ScenarioResult {
            config: *config,
            feasible: true,
            infeasible_reason: None,
            realizations: runs.len(),
            base_seed: self.scenarios.base_seed,
            npv: Moments::of(&npvs),
            delta_npv: Moments::of(&deltas),
            baseline_npv_mean: runs.iter().map(|r| r.baseline_npv).sum::<f64>() / n,
            ptc_share: runs.iter().map(|r| r.ptc_share).sum::<f64>() / n,
            cashflow_means,
            production_gal_per_mwe_yr: production,
            grid_mwh_per_year: runs.iter().map(|r| r.grid_mwh_per_year).sum::<f64>() / n,
        }
    }
}

/// Dispatches every operating year of one realization and builds its ledger.
pub fn run_ledger(
    study: &SiteStudy,
    config: &IesConfiguration,
    years: &[Vec<f64>],
) -> Result<(CashflowLedger, Vec<DispatchSummary>)> {
    let life = study.life();
    let summaries = years[..life]
        .iter()
        .enumerate()
        .map(|(t, prices)| dispatch_year(study, config, prices, t + 1))
        .collect::<Result<Vec<_>>>()?;
    let inputs = LedgerInputs {
        dispatch: &summaries,
        fuel_prices: &study.fuel_prices,
        supply_curve: study.supply_curve.as_ref(),
        fin: &study.fin,
        tech: &study.tech,
        site: &study.site,
    };
    Ok((build_ledger(config, &inputs)?, summaries))
}

fn dispatch_year(study: &SiteStudy, config: &IesConfiguration, prices: &[f64], t: usize) -> Result<DispatchSummary> {
    let schedule = optimize_dispatch(&study.year_problem(config, prices, t))?;
    Ok(annual_dispatch_summary(&schedule, prices, &study.tech))
}

/// Convenience wrapper: draws `realizations` scenario sets from `model` and
/// evaluates one configuration.
pub fn monte_carlo_npv(
    config: &IesConfiguration,
    study: &SiteStudy,
    model: &SyntheticPriceModel,
    realizations: usize,
    base_seed: u64,
) -> Result<ScenarioResult> {
    let scenarios = PriceScenarios::generate(model, realizations, study.life(), base_seed)?;
    Evaluator::new(study, &scenarios)?.evaluate(config)
}

/// Lattice position and outcome of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: [usize; 3],
    pub result: ScenarioResult,
}

/// Sweep lattice: `points` values per axis; FT levels above the electrolyzer's
/// hydrogen output are skipped (recorded infeasible, not evaluated).
pub fn sweep_lattice(ranges: &CapacityRanges, points: usize) -> Vec<([usize; 3], IesConfiguration)> {
    let htse = ranges.htse_mwe.points(points);
    let ft = ranges.ft_kg_per_h.points(points);
    let storage = ranges.storage_kg.points(points);
    let mut lattice = Vec::new();
    for (i, &h) in htse.iter().enumerate() {
        for (j, &f) in ft.iter().enumerate() {
            for (l, &s) in storage.iter().enumerate() {
                lattice.push((
                    [i, j, l],
                    IesConfiguration {
                        htse_mwe: h,
                        ft_kg_per_h: f,
                        storage_kg: s,
                    },
                ));
            }
        }
    }
    // degenerate axes repeat configurations; keep the first occurrence
    let mut seen = BTreeSet::new();
    lattice.retain(|(_, c)| seen.insert([c.htse_mwe.to_bits(), c.ft_kg_per_h.to_bits(), c.storage_kg.to_bits()]));
    lattice
}

fn read_checkpoint(path: &Path) -> Result<Vec<SweepPoint>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut done = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn final line from an interrupted run is recomputed
        match serde_json::from_str::<SweepPoint>(&line) {
            Ok(p) => done.push(p),
            Err(e) => log::warn!("{}: skipping unreadable checkpoint line: {e}", path.display()),
        }
    }
    Ok(done)
}

/// Evaluates every lattice point. With a checkpoint path, completed points
/// are appended as JSON lines and reused on the next call.
pub fn capacity_sweep(
    evaluator: &Evaluator,
    ranges: &CapacityRanges,
    points: usize,
    checkpoint: Option<&Path>,
) -> Result<Vec<SweepPoint>> {
    if points == 0 {
        return Err(Error::InvalidInput("sweep needs at least one point per axis".into()));
    }
    let lattice = sweep_lattice(ranges, points);
    let mut done: BTreeMap<[usize; 3], SweepPoint> = BTreeMap::new();
    if let Some(path) = checkpoint {
        let seed = evaluator.scenarios().base_seed;
        let realizations = evaluator.scenarios().realizations();
        for p in read_checkpoint(path)? {
            let matches = p.result.base_seed == seed
                && p.result.realizations == realizations
                && lattice.iter().any(|(idx, c)| *idx == p.index && *c == p.result.config);
            if matches {
                done.insert(p.index, p);
            }
        }
        if !done.is_empty() {
            log::info!("resuming sweep: {} of {} points already done", done.len(), lattice.len());
        }
    }
    let todo: Vec<_> = lattice.iter().filter(|(idx, _)| !done.contains_key(idx)).collect();
    let mut writer = match checkpoint {
        Some(path) => Some(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?,
        ),
        None => None,
    };
    let chunk = rayon::current_num_threads().max(1) * 2;
    for batch in todo.chunks(chunk) {
        let results = batch
            .par_iter()
            .map(|(idx, config)| {
                evaluator.evaluate(config).map(|result| SweepPoint {
                    index: *idx,
                    result,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for point in results {
            if let (Some(w), Some(path)) = (writer.as_mut(), checkpoint) {
                let line = serde_json::to_string(&point).map_err(|e| Error::json(path, e))?;
                writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
                w.flush().map_err(|e| Error::io(path, e))?;
            }
            done.insert(point.index, point);
        }
    }
    Ok(done.into_values().collect())
}

/// Best feasible result by mean ΔNPV; exact ties go to the smaller storage,
/// then the smaller electrolyzer.
pub fn select_optimum<'r>(results: impl IntoIterator<Item = &'r ScenarioResult>) -> Result<&'r ScenarioResult> {
    results
        .into_iter()
        .filter(|r| r.feasible)
        .reduce(|best, r| {
            let better = r
                .delta_npv
                .mean
                .total_cmp(&best.delta_npv.mean)
                .then_with(|| best.config.storage_kg.total_cmp(&r.config.storage_kg))
                .then_with(|| best.config.htse_mwe.total_cmp(&r.config.htse_mwe));
            if better.is_gt() {
                r
            } else {
                best
            }
        })
        .ok_or(Error::NoFeasibleResult)
}

/// One input perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "parameter", content = "value", rename_all = "snake_case")]
pub enum Perturbation {
    /// Hydrogen credit, $/kg.
    H2Ptc(f64),
    /// Multiplier on gate fuel prices.
    FuelPriceFactor(f64),
    /// Multiplier on electrolyzer, FT and storage capital cost.
    CapexFactor(f64),
    /// Flat CO₂ cost added to the supply curve, $/t.
    Co2AdderUsdPerT(f64),
    /// Multiplier on fixed and variable O&M of the synfuel process.
    OmFactor(f64),
}

impl Perturbation {
    pub fn name(&self) -> &'static str {
        match self {
            Perturbation::H2Ptc(_) => "h2_ptc",
            Perturbation::FuelPriceFactor(_) => "fuel_price_factor",
            Perturbation::CapexFactor(_) => "capex_factor",
            Perturbation::Co2AdderUsdPerT(_) => "co2_adder_usd_per_t",
            Perturbation::OmFactor(_) => "om_factor",
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Perturbation::H2Ptc(v)
            | Perturbation::FuelPriceFactor(v)
            | Perturbation::CapexFactor(v)
            | Perturbation::Co2AdderUsdPerT(v)
            | Perturbation::OmFactor(v) => v,
        }
    }

    /// Copy of `study` with this perturbation applied. Factors multiply the
    /// reference values, so a factor of 1 or the reference credit/adder
    /// reproduces `study` exactly.
    pub fn apply(&self, study: &SiteStudy) -> SiteStudy {
        let mut s = study.clone();
        match *self {
            Perturbation::H2Ptc(v) => s.tech.h2_ptc_usd_per_kg = v,
            Perturbation::FuelPriceFactor(f) => {
                s.fuel_prices.iter_mut().for_each(|p| *p = p.scale(f));
            }
            Perturbation::CapexFactor(f) => {
                s.tech.htse_capex_usd_per_kw *= f;
                s.tech.ft_ref_capex_usd *= f;
                s.tech.storage_capex_usd_per_kg *= f;
            }
            Perturbation::Co2AdderUsdPerT(v) => s.fin.co2_price_adder_usd_per_t = v,
            Perturbation::OmFactor(f) => {
                s.tech.htse_fixed_om_usd_per_mw_yr *= f;
                s.tech.htse_var_om_usd_per_mwh *= f;
                s.tech.ft_fixed_om_ref_usd_per_yr *= f;
                s.tech.ft_var_om_ref_usd_per_yr *= f;
            }
        }
        s
    }
}

/// The reference perturbation set: credit {0, 1, 2.7} $/kg, fuel prices,
/// capital and O&M ±25%, CO₂ adders {30, 60} $/t.
pub fn default_suite() -> Vec<Perturbation> {
    vec![
        Perturbation::H2Ptc(0.0),
        Perturbation::H2Ptc(1.0),
        Perturbation::H2Ptc(2.7),
        Perturbation::FuelPriceFactor(0.75),
        Perturbation::FuelPriceFactor(1.25),
        Perturbation::CapexFactor(0.75),
        Perturbation::CapexFactor(1.25),
        Perturbation::Co2AdderUsdPerT(30.0),
        Perturbation::Co2AdderUsdPerT(60.0),
        Perturbation::OmFactor(0.75),
        Perturbation::OmFactor(1.25),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCase {
    pub perturbation: Perturbation,
    pub delta_npv_mean: f64,
    /// Change in profitability relative to the reference IES, as a fraction.
    pub change: f64,
}

/// Re-runs `config` under each perturbation on the evaluator's scenario set.
pub fn sensitivity_suite(
    evaluator: &Evaluator,
    reference: &ScenarioResult,
    suite: &[Perturbation],
) -> Result<Vec<SensitivityCase>> {
    if !reference.feasible {
        return Err(Error::NoFeasibleResult);
    }
    suite
        .iter()
        .map(|p| {
            let study = p.apply(evaluator.study());
            let perturbed = Evaluator::new(&study, evaluator.scenarios())?;
            let result = perturbed.evaluate(&reference.config)?;
            let change = if result.feasible {
                change_in_profitability(result.npv.mean, reference.npv.mean, reference.baseline_npv_mean)?
            } else {
                f64::NAN
            };
            Ok(SensitivityCase {
                perturbation: *p,
                delta_npv_mean: result.delta_npv.mean,
                change,
            })
        })
        .collect()
}

fn fmt_opt(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

/// `htse_mwe,ft_tph,storage_t,dnpv_mean,dnpv_std,feasible`, one row per lattice point.
pub fn write_sweep_csv(points: &[SweepPoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["htse_mwe", "ft_tph", "storage_t", "dnpv_mean", "dnpv_std", "feasible"])
        .map_err(|e| Error::csv(path, e))?;
    for p in points {
        let r = &p.result;
        w.write_record([
            r.config.htse_mwe.to_string(),
            (r.config.ft_kg_per_h / 1000.0).to_string(),
            (r.config.storage_kg / 1000.0).to_string(),
            if r.feasible { r.delta_npv.mean.to_string() } else { String::new() },
            if r.feasible { r.delta_npv.std.to_string() } else { String::new() },
            r.feasible.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `parameter,value,change_pct`.
pub fn write_sensitivity_csv(cases: &[SensitivityCase], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["parameter", "value", "change_pct"])
        .map_err(|e| Error::csv(path, e))?;
    for c in cases {
        w.write_record([
            c.perturbation.name().to_string(),
            c.perturbation.value().to_string(),
            fmt_opt(100.0 * c.change),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// FT intake over the electrolyzer's full hydrogen output.
pub fn ft_to_htse_ratio(config: &IesConfiguration, tech: &TechnoParams) -> f64 {
    let h2 = htse_h2_rate(config.htse_mwe, tech);
    if h2 > 0.0 {
        config.ft_kg_per_h / h2
    } else {
        0.0
    }
}

/// Storage expressed in hours of full electrolyzer output.
pub fn storage_hours(config: &IesConfiguration, tech: &TechnoParams) -> f64 {
    let h2 = htse_h2_rate(config.htse_mwe, tech);
    if h2 > 0.0 {
        config.storage_kg / h2
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::co2supply::{accumulate_offers, Offer};
    use crate::plantmodel::{capacity_ranges, Span};
    use proptest::prelude::*;

    const HOURS: usize = 168;
    const LIFE: u32 = 3;

    fn study() -> SiteStudy {
        let site = SiteParams {
            name: "test".into(),
            npp_capacity_mwe: 600.0,
            market: "PJM".into(),
            state: "OH".into(),
            state_tax_rate: 0.05,
            fuel_region: "enc_oh".into(),
            capacity_payment_usd_per_mw_yr: 30_000.0,
            station_capacity_mwe: None,
            station_units: 1,
        };
        let fin = FinancialParams {
            project_life_years: LIFE,
            ..FinancialParams::default()
        };
        let offers = vec![
            Offer {
                id: "near".into(),
                unit_cost: 20.0,
                capacity_tpy: 1.0e6,
            },
            Offer {
                id: "far".into(),
                unit_cost: 45.0,
                capacity_tpy: 1.0e8,
            },
        ];
        SiteStudy {
            site,
            tech: TechnoParams::default(),
            fin,
            fuel_prices: vec![
                Products {
                    naphtha: 1.9,
                    jet: 2.6,
                    diesel: 2.4,
                };
                LIFE as usize
            ],
            supply_curve: Some(accumulate_offers(offers, 5.0e7).unwrap()),
        }
    }

    /// Deterministic spiky week; `shift` separates realizations.
    fn week(shift: usize) -> Vec<f64> {
        (0..HOURS)
            .map(|h| {
                let k = h + 7 * shift;
                let daily = 25.0 + 12.0 * ((k % 24) as f64 / 24.0 * std::f64::consts::TAU).sin();
                if k % 37 == 0 {
                    daily + 150.0
                } else {
                    daily
                }
            })
            .collect()
    }

    fn scenarios(realizations: usize) -> PriceScenarios {
        let years = (0..realizations)
            .map(|r| (0..LIFE as usize).map(|y| week(r * 5 + y)).collect())
            .collect();
        PriceScenarios::from_years(years).unwrap()
    }

    fn full_corner(study: &SiteStudy) -> IesConfiguration {
        let r = capacity_ranges(&study.site, &study.tech).unwrap();
        let htse = r.htse_mwe.max;
        IesConfiguration {
            htse_mwe: htse,
            ft_kg_per_h: 0.8 * htse_h2_rate(htse, &study.tech),
            storage_kg: 0.5 * r.storage_kg.max,
        }
    }

    #[test]
    fn scenario_seeds_are_stable_and_distinct() {
        assert_eq!(scenario_seed(7, 3, 11), scenario_seed(7, 3, 11));
        let mut seen = BTreeSet::new();
        for r in 0..20 {
            for y in 0..20 {
                assert!(seen.insert(scenario_seed(7, r, y)));
            }
        }
        assert_ne!(scenario_seed(7, 0, 0), scenario_seed(8, 0, 0));
    }

    #[test]
    fn moments_use_sample_std_and_normal_interval() {
        let m = Moments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        let std = (5.0f64 / 3.0).sqrt();
        assert!((m.std - std).abs() < 1e-15);
        assert!((m.ci95 - Z_95 * std / 2.0).abs() < 1e-15);
        let single = Moments::of(&[4.0]);
        assert_eq!((single.std, single.ci95), (0.0, 0.0));
    }

    #[test]
    fn zero_configuration_has_zero_delta() {
        let (s, sc) = (study(), scenarios(3));
        let r = Evaluator::new(&s, &sc).unwrap().evaluate(&IesConfiguration::zero()).unwrap();
        assert!(r.feasible);
        assert_eq!(r.delta_npv.mean, 0.0);
        assert_eq!(r.delta_npv.std, 0.0);
        assert_eq!(r.npv.mean, r.baseline_npv_mean);
    }

    #[test]
    fn identical_realizations_give_zero_spread() {
        let s = study();
        let year: Vec<Vec<f64>> = (0..LIFE as usize).map(week).collect();
        let sc = PriceScenarios::from_years(vec![year.clone(), year.clone(), year]).unwrap();
        let r = Evaluator::new(&s, &sc).unwrap().evaluate(&full_corner(&s)).unwrap();
        assert!(r.feasible);
        let scale = r.delta_npv.mean.abs().max(1.0);
        assert!(r.delta_npv.std <= 1e-12 * scale);
        assert!(r.delta_npv.ci95 <= 1e-12 * scale);
    }

    #[test]
    fn evaluation_is_reproducible() {
        let (s, sc) = (study(), scenarios(3));
        let ev = Evaluator::new(&s, &sc).unwrap();
        let c = full_corner(&s);
        assert_eq!(ev.evaluate(&c).unwrap(), ev.evaluate(&c).unwrap());
    }

    #[test]
    fn ft_beyond_electrolyzer_output_is_flagged_not_raised() {
        let (s, sc) = (study(), scenarios(2));
        let mut c = full_corner(&s);
        c.ft_kg_per_h = 2.0 * htse_h2_rate(c.htse_mwe, &s.tech);
        let r = Evaluator::new(&s, &sc).unwrap().evaluate(&c).unwrap();
        assert!(!r.feasible);
        assert!(r.infeasible_reason.is_some());
        assert_eq!(r.delta_npv.mean, 0.0);
    }

    fn result(htse: f64, storage: f64, delta: f64, feasible: bool) -> ScenarioResult {
        let m = Moments {
            mean: delta,
            std: 0.0,
            ci95: 0.0,
        };
        ScenarioResult {
            config: IesConfiguration {
                htse_mwe: htse,
                ft_kg_per_h: 1000.0,
                storage_kg: storage,
            },
            feasible,
            infeasible_reason: None,
            realizations: 2,
            base_seed: 0,
            npv: m,
            delta_npv: m,
            baseline_npv_mean: 0.0,
            ptc_share: 0.0,
            cashflow_means: BTreeMap::new(),
            production_gal_per_mwe_yr: Products::default(),
            grid_mwh_per_year: 0.0,
        }
    }

    #[test]
    fn optimum_ties_prefer_less_storage_then_smaller_electrolyzer() {
        let rs = [
            result(500.0, 10.0, 5.0, true),
            result(400.0, 0.0, 5.0, true),
            result(300.0, 0.0, 5.0, true),
            result(900.0, 0.0, 9.0, false),
            result(200.0, 0.0, 4.0, true),
        ];
        let best = select_optimum(&rs).unwrap();
        assert_eq!((best.config.htse_mwe, best.config.storage_kg), (300.0, 0.0));
        assert_eq!(select_optimum(&rs[..1]).unwrap(), &rs[0]);
        assert!(matches!(select_optimum(&rs[3..4]), Err(Error::NoFeasibleResult)));
        assert!(matches!(select_optimum(&[]), Err(Error::NoFeasibleResult)));
    }

    #[test]
    fn degenerate_axes_collapse_the_lattice() {
        let point = Span { min: 100.0, max: 100.0 };
        let ranges = CapacityRanges {
            htse_mwe: point,
            ft_kg_per_h: Span { min: 1000.0, max: 1000.0 },
            storage_kg: Span { min: 0.0, max: 0.0 },
        };
        let lattice = sweep_lattice(&ranges, 5);
        assert_eq!(lattice.len(), 1);
        assert_eq!(lattice[0].0, [0, 0, 0]);
        let wide = CapacityRanges {
            storage_kg: Span { min: 0.0, max: 10.0 },
            ..ranges
        };
        assert_eq!(sweep_lattice(&wide, 4).len(), 4);
    }

    #[test]
    fn sweep_resumes_from_checkpoint_without_recomputing() {
        let (s, sc) = (study(), scenarios(2));
        let ev = Evaluator::new(&s, &sc).unwrap();
        let ranges = capacity_ranges(&s.site, &s.tech).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.jsonl");
        let first = capacity_sweep(&ev, &ranges, 2, Some(&path)).unwrap();
        assert_eq!(first.len(), 8);
        let lines = std::fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(lines, 8);

        // drop the last three points and tear the final line, as an interrupted run would
        let text = std::fs::read_to_string(&path).unwrap();
        let kept: Vec<&str> = text.lines().take(5).collect();
        std::fs::write(&path, kept.join("\n") + "\n{\"index\":[1,").unwrap();
        let resumed = capacity_sweep(&ev, &ranges, 2, Some(&path)).unwrap();
        assert_eq!(resumed, first);
        let again = capacity_sweep(&ev, &ranges, 2, Some(&path)).unwrap();
        assert_eq!(again, first);
        let grown = std::fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(grown, 5 + 1 + 3, "only the missing points are appended");
        assert_eq!(capacity_sweep(&ev, &ranges, 2, None).unwrap(), first);
    }

    #[test]
    fn checkpoint_from_another_seed_is_ignored() {
        let s = study();
        let sc = scenarios(2);
        let mut other = sc.clone();
        other.base_seed = 99;
        let ranges = capacity_ranges(&s.site, &s.tech).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.jsonl");
        capacity_sweep(&Evaluator::new(&s, &sc).unwrap(), &ranges, 2, Some(&path)).unwrap();
        let r = capacity_sweep(&Evaluator::new(&s, &other).unwrap(), &ranges, 2, Some(&path)).unwrap();
        assert!(r.iter().all(|p| p.result.base_seed == 99));
    }

    #[test]
    fn unperturbed_case_reproduces_the_reference() {
        let (s, sc) = (study(), scenarios(3));
        let ev = Evaluator::new(&s, &sc).unwrap();
        let reference = ev.evaluate(&full_corner(&s)).unwrap();
        let same = [
            Perturbation::H2Ptc(s.tech.h2_ptc_usd_per_kg),
            Perturbation::FuelPriceFactor(1.0),
            Perturbation::CapexFactor(1.0),
            Perturbation::Co2AdderUsdPerT(s.fin.co2_price_adder_usd_per_t),
            Perturbation::OmFactor(1.0),
        ];
        for p in same {
            let perturbed = p.apply(&s);
            assert_eq!(perturbed, s);
            let again = Evaluator::new(&perturbed, &sc).unwrap().evaluate(&reference.config).unwrap();
            assert_eq!(again, reference);
        }
        let cases = sensitivity_suite(&ev, &reference, &[Perturbation::FuelPriceFactor(1.0)]).unwrap();
        assert_eq!(cases[0].change, 0.0);
        assert_eq!(cases[0].delta_npv_mean, reference.delta_npv.mean);
    }

    #[test]
    fn zero_credit_costs_the_whole_credit() {
        let (s, sc) = (study(), scenarios(2));
        let ev = Evaluator::new(&s, &sc).unwrap();
        let reference = ev.evaluate(&full_corner(&s)).unwrap();
        let cases = sensitivity_suite(&ev, &reference, &[Perturbation::H2Ptc(0.0)]).unwrap();
        let credit = reference.cashflow_means["h2_ptc"];
        assert!(credit > 0.0);
        // the credit is untaxed and leaves dispatch unchanged only through the
        // terminal storage value, so ΔNPV falls by at least most of it
        assert!(reference.delta_npv.mean - cases[0].delta_npv_mean > 0.9 * credit);
    }

    #[test]
    fn perturbations_round_trip_through_json() {
        for p in default_suite() {
            let text = serde_json::to_string(&p).unwrap();
            assert_eq!(serde_json::from_str::<Perturbation>(&text).unwrap(), p);
        }
        let p: Perturbation = serde_json::from_str(r#"{"parameter":"h2_ptc","value":2.7}"#).unwrap();
        assert_eq!(p, Perturbation::H2Ptc(2.7));
    }

    #[test]
    fn ratio_and_hours_are_relative_to_electrolyzer_output() {
        let tech = TechnoParams::default();
        let rate = htse_h2_rate(500.0, &tech);
        let c = IesConfiguration {
            htse_mwe: 500.0,
            ft_kg_per_h: 0.9 * rate,
            storage_kg: 2.5 * rate,
        };
        assert!((ft_to_htse_ratio(&c, &tech) - 0.9).abs() < 1e-12);
        assert!((storage_hours(&c, &tech) - 2.5).abs() < 1e-12);
        assert_eq!(storage_hours(&IesConfiguration::zero(), &tech), 0.0);
    }

    #[test]
    fn sweep_csv_leaves_infeasible_statistics_empty() {
        let points = [
            SweepPoint {
                index: [0, 0, 0],
                result: result(100.0, 2000.0, 1.5e6, true),
            },
            SweepPoint {
                index: [0, 1, 0],
                result: result(100.0, 0.0, 0.0, false),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&points, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "htse_mwe,ft_tph,storage_t,dnpv_mean,dnpv_std,feasible");
        assert_eq!(rows[1], "100,1,2,1500000,0,true");
        assert_eq!(rows[2], "100,1,0,,,false");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn credit_never_lowers_and_co2_adder_never_raises_delta(
            low in 0.0f64..3.0, step in 0.05f64..2.0, adder in 0.0f64..60.0, bump in 1.0f64..40.0,
        ) {
            let (s, sc) = (study(), scenarios(2));
            let c = full_corner(&s);
            let delta = |p: Perturbation, base: &SiteStudy| {
                let st = p.apply(base);
                Evaluator::new(&st, &sc).unwrap().evaluate(&c).unwrap().delta_npv.mean
            };
            let slack = 1e-9 * delta(Perturbation::H2Ptc(low), &s).abs().max(1.0);
            prop_assert!(delta(Perturbation::H2Ptc(low + step), &s) >= delta(Perturbation::H2Ptc(low), &s) - slack);
            let a = delta(Perturbation::Co2AdderUsdPerT(adder), &s);
            let b = delta(Perturbation::Co2AdderUsdPerT(adder + bump), &s);
            prop_assert!(b <= a + slack);
        }
    }
}
