//! Subcommand implementations. Each writes its artifacts into an output
//! directory and returns the JSON document it wrote last.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{TimeZone, Utc};
use serde::Serialize;
use serde_json::{json, Value};
use synfuel_ies::dispatch::{annual_dispatch_summary, optimize_dispatch};
use synfuel_ies::plantmodel::{capacity_ranges, co2_demand, co2_demand_upper_bound, CapacityRanges, IesConfiguration};
use synfuel_ies::pricegen::{generate, validate_moments, MomentTolerances, PriceSeries};
use synfuel_ies::study::{
    capacity_sweep, ft_to_htse_ratio, run_ledger, scenario_seed, select_optimum, sensitivity_suite, storage_hours,
    write_sensitivity_csv, write_sweep_csv, Evaluator, PriceScenarios, ScenarioResult, SensitivityCase, SiteStudy,
    SweepPoint, HOURS_PER_SCENARIO_YEAR,
};

use crate::config::{LoadedConfig, ScenarioConfig};
use crate::scenario;

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SENSITIVITY_CSV: &str = "sensitivity.csv";

/// The requested capacities cannot operate at this site.
#[derive(Debug)]
pub struct InfeasibleConfiguration(pub String);

impl std::fmt::Display for InfeasibleConfiguration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration is infeasible: {}", self.0)
    }
}

impl std::error::Error for InfeasibleConfiguration {}

/// Settings shared by every subcommand; `None` falls back to the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    pub out: PathBuf,
    pub sweep_points: Option<usize>,
    pub configuration: Option<IesConfiguration>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: &'static str,
    pub site: String,
    pub config: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
}

/// A loaded configuration with the run options resolved against it.
pub struct Run {
    pub loaded: LoadedConfig,
    pub seed: u64,
    pub realizations: usize,
    pub sweep_points: usize,
    pub configuration: Option<IesConfiguration>,
    pub out: PathBuf,
}

impl Run {
    pub fn new(config_path: &Path, opts: &RunOptions) -> Result<Self> {
        let loaded = ScenarioConfig::load(config_path)?;
        let study = &loaded.config.study;
        let realizations = opts.realizations.unwrap_or(study.realizations);
        if realizations < 2 {
            bail!("--realizations must be at least 2");
        }
        let sweep_points = opts.sweep_points.unwrap_or(study.sweep_points);
        if sweep_points == 0 {
            bail!("--points must be at least 1");
        }
        fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
        Ok(Self {
            seed: opts.seed.unwrap_or(study.base_seed),
            configuration: opts.configuration.or(study.configuration),
            loaded,
            realizations,
            sweep_points,
            out: opts.out.clone(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.loaded.config
    }

    fn metadata(&self, command: &str, with_realizations: bool) -> Metadata {
        Metadata {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            site: self.config().site.name.clone(),
            config: self.loaded.path.display().to_string(),
            config_hash: self.loaded.hash.clone(),
            seed: self.seed,
            realizations: with_realizations.then_some(self.realizations),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Sweep checkpoint, keyed by the configuration hash so an edited
    /// configuration never resumes from stale points.
    pub fn checkpoint_path(&self) -> PathBuf {
        self.path(&format!("sweep.{}.checkpoint.jsonl", &self.loaded.hash[..16]))
    }

    fn write_json(&self, name: &str, value: &Value) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn scenarios(&self, study: &SiteStudy) -> Result<PriceScenarios> {
        let model = scenario::train_model(self.config())?;
        Ok(PriceScenarios::generate(&model, self.realizations, study.life(), self.seed)?)
    }

    fn fixed_configuration(&self) -> Result<IesConfiguration> {
        self.configuration.ok_or_else(|| {
            anyhow::anyhow!("no configuration given: set study.configuration or pass --htse-mwe/--ft-kg-per-h/--storage-kg")
        })
    }
}

/// `train`: fits the price model, writes it and checks one synthetic
/// history-length draw against the historical moments.
pub fn train(run: &Run) -> Result<Value> {
    let config = run.config();
    let history = scenario::load_history(config)?;
    let model = scenario::train_model(config)?;
    let model_path = run.path("price_model.json");
    fs::write(&model_path, serde_json::to_string_pretty(&model)? + "\n")
        .with_context(|| format!("writing {}", model_path.display()))?;
    let synthetic = generate(&model, history.len(), run.seed)?;
    let report = validate_moments(history.prices(), synthetic.prices(), &MomentTolerances::default());
    let mut w = csv::Writer::from_path(run.path("moments.csv"))?;
    w.write_record(["statistic", "historical", "synthetic", "delta", "pass"])?;
    for c in &report.checks {
        w.write_record([
            c.statistic.clone(),
            c.historical.to_string(),
            c.synthetic.to_string(),
            c.delta.to_string(),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    let doc = json!({
        "metadata": run.metadata("train", false),
        "model": "price_model.json",
        "moments": report,
        "moments_pass": report.failures().next().is_none(),
    });
    run.write_json("train.json", &doc)?;
    Ok(doc)
}

/// `generate`: one CSV per realization holding `years` synthetic years.
pub fn generate_prices(run: &Run, years: usize) -> Result<Value> {
    if years == 0 {
        bail!("--years must be at least 1");
    }
    let config = run.config();
    let model = scenario::train_model(config)?;
    let start = Utc
        .with_ymd_and_hms(config.study.first_operating_year, 1, 1, 0, 0, 0)
        .single()
        .context("first_operating_year out of range")?;
    let mut files = Vec::new();
    for r in 0..run.realizations {
        let mut prices = Vec::with_capacity(years * HOURS_PER_SCENARIO_YEAR);
        for y in 0..years {
            prices.extend(generate(&model, HOURS_PER_SCENARIO_YEAR, scenario_seed(run.seed, r, y))?.into_prices());
        }
        let name = format!("synthetic_prices_r{r:03}.csv");
        PriceSeries::new(start, prices)?.write_csv(run.path(&name))?;
        files.push(name);
    }
    let doc = json!({
        "metadata": run.metadata("generate", true),
        "years": years,
        "hours_per_year": HOURS_PER_SCENARIO_YEAR,
        "files": files,
    });
    run.write_json("generate.json", &doc)?;
    Ok(doc)
}

/// `dispatch`: hourly schedule for operating year 1 of realization 0.
pub fn dispatch(run: &Run) -> Result<Value> {
    let config = run.fixed_configuration()?;
    let study = scenario::build_study(run.config())?;
    let doc = write_dispatch(run, &study, &config)?;
    run.write_json("dispatch.json", &doc)?;
    Ok(doc)
}

/// Writes `dispatch.csv` and returns its description.
fn write_dispatch(run: &Run, study: &SiteStudy, config: &IesConfiguration) -> Result<Value> {
    let model = scenario::train_model(run.config())?;
    let prices = generate(&model, HOURS_PER_SCENARIO_YEAR, scenario_seed(run.seed, 0, 0))?.into_prices();
    let schedule = optimize_dispatch(&study.year_problem(config, &prices, 1))?;
    schedule.write_csv(&prices, run.path("dispatch.csv"))?;
    Ok(json!({
        "metadata": run.metadata("dispatch", false),
        "configuration": config,
        "realization": 0,
        "operating_year": 1,
        "objective_usd": schedule.objective_usd,
        "summary": annual_dispatch_summary(&schedule, &prices, &study.tech),
        "schedule": "dispatch.csv",
    }))
}

/// `supply-curve`: merit-order CO₂ curve out to the site's demand bound.
pub fn supply_curve(run: &Run) -> Result<Value> {
    let config = run.config();
    let curve = scenario::supply_curve(config)?;
    curve.write_csv(run.path("supply_curve.csv"))?;
    let bound = co2_demand_upper_bound(&config.site, &config.techno);
    let doc = json!({
        "metadata": run.metadata("supply-curve", false),
        "transport_fit": scenario::fitted_transport(config)?,
        "demand_bound_tpy": bound,
        "extent_tpy": curve.extent_tpy(),
        "average_cost_at_bound_usd_per_t": curve.average_cost(bound)?,
        "breakpoints": curve.breakpoints.len(),
        "curve": "supply_curve.csv",
    });
    run.write_json("supply_curve.json", &doc)?;
    Ok(doc)
}

/// `gate-prices`: refinery-gate price track and the fitted naphtha ratio.
pub fn gate_prices(run: &Run) -> Result<Value> {
    let config = run.config();
    let track = scenario::fuel_track(config)?;
    track.write_csv(run.path("gate_prices.csv"))?;
    let first = config.study.first_operating_year;
    let last = first + config.finance.project_life_years as i32 - 1;
    let doc = json!({
        "metadata": run.metadata("gate-prices", false),
        "region": track.region,
        "naphtha_ratio": track.naphtha_ratio,
        "first_year": track.first_year,
        "last_year": track.last_year(),
        "operating_mean_usd_per_gal": track.mean(first, last)?,
        "track": "gate_prices.csv",
    });
    run.write_json("gate_prices.json", &doc)?;
    Ok(doc)
}

fn result_doc(result: &ScenarioResult, study: &SiteStudy) -> Value {
    json!({
        "result": result,
        "ft_to_htse_ratio": ft_to_htse_ratio(&result.config, &study.tech),
        "storage_hours": storage_hours(&result.config, &study.tech),
    })
}

fn write_cashflows(run: &Run, study: &SiteStudy, scenarios: &PriceScenarios, result: &ScenarioResult) -> Result<()> {
    let (ledger, _) = run_ledger(study, &result.config, &scenarios.years[0])?;
    ledger.write_csv(run.path("cashflows.csv"), None)?;
    let mut w = csv::Writer::from_path(run.path("cashflow_means.csv"))?;
    w.write_record(["category", "discounted_usd"])?;
    for (category, usd) in &result.cashflow_means {
        w.write_record([category.as_str(), &usd.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `npv`: Monte Carlo NPV and ΔNPV of one configuration.
pub fn npv(run: &Run) -> Result<Value> {
    let config = run.fixed_configuration()?;
    let study = scenario::build_study(run.config())?;
    let scenarios = run.scenarios(&study)?;
    let evaluator = Evaluator::new(&study, &scenarios)?;
    let result = evaluator.evaluate(&config)?;
    if !result.feasible {
        let reason = result.infeasible_reason.as_deref().unwrap_or("unknown reason");
        return Err(InfeasibleConfiguration(reason.to_string()).into());
    }
    write_cashflows(run, &study, &scenarios, &result)?;
    let mut doc = result_doc(&result, &study);
    doc["metadata"] = json!(run.metadata("npv", true));
    run.write_json(SUMMARY_JSON, &doc)?;
    Ok(doc)
}

struct SweepOutcome {
    ranges: CapacityRanges,
    points: Vec<SweepPoint>,
}

fn run_sweep(run: &Run, evaluator: &Evaluator) -> Result<SweepOutcome> {
    let study = evaluator.study();
    let ranges = capacity_ranges(&study.site, &study.tech)?;
    let points = capacity_sweep(evaluator, &ranges, run.sweep_points, Some(&run.checkpoint_path()))?;
    write_sweep_csv(&points, run.path(SWEEP_CSV))?;
    Ok(SweepOutcome { ranges, points })
}

fn sweep_doc(run: &Run, study: &SiteStudy, outcome: &SweepOutcome, command: &str) -> Result<Value> {
    let optimum = select_optimum(outcome.points.iter().map(|p| &p.result))?;
    let infeasible = outcome.points.iter().filter(|p| !p.result.feasible).count();
    Ok(json!({
        "metadata": run.metadata(command, true),
        "sweep_points_per_axis": run.sweep_points,
        "evaluated": outcome.points.len(),
        "infeasible": infeasible,
        "ranges": outcome.ranges,
        "optimum": result_doc(optimum, study),
        "sweep": SWEEP_CSV,
    }))
}

/// `sweep`: capacity lattice with checkpointed resume.
pub fn sweep(run: &Run) -> Result<Value> {
    let study = scenario::build_study(run.config())?;
    let scenarios = run.scenarios(&study)?;
    let evaluator = Evaluator::new(&study, &scenarios)?;
    let outcome = run_sweep(run, &evaluator)?;
    let doc = sweep_doc(run, &study, &outcome, "sweep")?;
    run.write_json(SUMMARY_JSON, &doc)?;
    Ok(doc)
}

fn sensitivity_doc(run: &Run, reference: &ScenarioResult, cases: &[SensitivityCase]) -> Value {
    json!({
        "metadata": run.metadata("sensitivity", true),
        "reference": reference,
        "cases": cases,
        "sensitivity": SENSITIVITY_CSV,
    })
}

/// `sensitivity`: the configured suite around a reference configuration,
/// which is the configured one or else the sweep optimum.
pub fn sensitivity(run: &Run) -> Result<Value> {
    let study = scenario::build_study(run.config())?;
    let scenarios = run.scenarios(&study)?;
    let evaluator = Evaluator::new(&study, &scenarios)?;
    let reference = match run.configuration {
        Some(c) => evaluator.evaluate(&c)?,
        None => {
            let outcome = run_sweep(run, &evaluator)?;
            select_optimum(outcome.points.iter().map(|p| &p.result))?.clone()
        }
    };
    let cases = sensitivity_suite(&evaluator, &reference, &run.config().study.sensitivity)?;
    write_sensitivity_csv(&cases, run.path(SENSITIVITY_CSV))?;
    let doc = sensitivity_doc(run, &reference, &cases);
    run.write_json("sensitivity.json", &doc)?;
    Ok(doc)
}

/// `report`: the whole pipeline into one directory, with a combined summary.
pub fn report(run: &Run) -> Result<Value> {
    let config = run.config();
    let study = scenario::build_study(config)?;
    let track = scenario::fuel_track(config)?;
    track.write_csv(run.path("gate_prices.csv"))?;
    let curve = study.supply_curve.as_ref().context("study has no supply curve")?;
    curve.write_csv(run.path("supply_curve.csv"))?;

    let scenarios = run.scenarios(&study)?;
    let evaluator = Evaluator::new(&study, &scenarios)?;
    let outcome = run_sweep(run, &evaluator)?;
    let optimum = select_optimum(outcome.points.iter().map(|p| &p.result))?.clone();
    let cases = sensitivity_suite(&evaluator, &optimum, &config.study.sensitivity)?;
    write_sensitivity_csv(&cases, run.path(SENSITIVITY_CSV))?;
    write_cashflows(run, &study, &scenarios, &optimum)?;
    let dispatch = write_dispatch(run, &study, &optimum.config)?;

    let mut doc = sweep_doc(run, &study, &outcome, "report")?;
    let annual_co2 = co2_demand(optimum.config.ft_kg_per_h, &study.tech);
    doc["co2"] = json!({
        "annual_demand_tpy": annual_co2,
        "average_cost_usd_per_t": curve.average_cost(annual_co2)?,
        "curve": "supply_curve.csv",
    });
    doc["dispatch"] = dispatch["summary"].clone();
    doc["fuel"] = json!({ "naphtha_ratio": track.naphtha_ratio, "track": "gate_prices.csv" });
    doc["sensitivity"] = json!({ "cases": cases, "table": SENSITIVITY_CSV });
    doc["artifacts"] = json!([
        SWEEP_CSV,
        SENSITIVITY_CSV,
        "cashflows.csv",
        "cashflow_means.csv",
        "dispatch.csv",
        "supply_curve.csv",
        "gate_prices.csv",
    ]);
    run.write_json(SUMMARY_JSON, &doc)?;
    Ok(doc)
}
