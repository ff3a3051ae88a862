//! Hourly dispatch of plant output between the grid and the electrolyzer.
//!
//! The FT unit draws a constant hydrogen flow; the only freedom is when the
//! electrolyzer produces, bounded by its rating and by the storage tank. The
//! problem is a linear program with a chain structure. It is solved exactly by
//! propagating the convex, piecewise-linear cost of reaching each storage level
//! hour by hour, keeping each linear piece tagged with the hour whose
//! production it represents.

use std::cmp::{Ordering, Reverse};
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plantmodel::{ft_outputs, htse_h2_rate, IesConfiguration, Products, TechnoParams};

/// Gross value of one kg of hydrogen delivered to the FT unit, $/kg:
/// production tax credit plus product sales at the given $/gal prices.
pub fn h2_value_per_kg(params: &TechnoParams, fuel_prices_per_gal: &Products) -> f64 {
    let gallons_per_kg_h2 = params.gallons(&params.ft_yields);
    params.h2_ptc_usd_per_kg
        + gallons_per_kg_h2
            .zip_with(fuel_prices_per_gal, |g, p| g * p)
            .sum()
}

/// Electricity price, $/MWh, below which a marginal MWh is worth more in the
/// electrolyzer than on the grid.
pub fn marginal_h2_value(params: &TechnoParams, fuel_prices_per_gal: &Products) -> f64 {
    let per_kg = h2_value_per_kg(params, fuel_prices_per_gal)
        - params.htse_var_om_usd_per_mwh * params.mwh_per_kg();
    per_kg * 1000.0 / params.effective_elec_spec()
}

#[derive(Debug, Clone)]
pub struct DispatchProblem<'a> {
    /// $/MWh, one entry per hour.
    pub prices: &'a [f64],
    pub config: IesConfiguration,
    pub params: &'a TechnoParams,
    pub npp_capacity_mwe: f64,
    pub initial_storage_kg: f64,
    /// Credit per kg for hydrogen left in storage at the end of the horizon
    /// (debit if storage ends below its initial level).
    pub terminal_value_usd_per_kg: f64,
}

impl DispatchProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.prices.is_empty() {
            return Err(Error::InvalidInput("dispatch horizon must be at least one hour".into()));
        }
        if let Some(index) = self.prices.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let s0 = self.initial_storage_kg;
        if !(0.0..=self.config.storage_kg).contains(&s0) {
            return Err(Error::InvalidConfiguration(format!(
                "initial storage {s0} kg outside [0, {}]",
                self.config.storage_kg
            )));
        }
        let draw = self.config.htse_mwe + self.config.ft_elec_mwe(self.params);
        if draw > self.npp_capacity_mwe * (1.0 + 1e-9) {
            return Err(Error::InvalidConfiguration(format!(
                "IES draw {draw:.3} MWe exceeds plant capacity {:.3} MWe",
                self.npp_capacity_mwe
            )));
        }
        if !self.terminal_value_usd_per_kg.is_finite() {
            return Err(Error::InvalidInput("terminal value must be finite".into()));
        }
        Ok(())
    }

    fn max_h2_rate(&self) -> f64 {
        htse_h2_rate(self.config.htse_mwe, self.params)
    }

    /// Net cost of producing one kg in hour `t`, relative to banking it at the terminal value.
    fn unit_cost(&self, t: usize) -> f64 {
        (self.prices[t] + self.params.htse_var_om_usd_per_mwh) * self.params.mwh_per_kg()
            - self.terminal_value_usd_per_kg
    }

    /// Objective of an arbitrary production plan.
    pub fn evaluate(&self, h2_kg_h: &[f64]) -> f64 {
        let e = self.params.mwh_per_kg();
        let base = self.npp_capacity_mwe - self.config.ft_elec_mwe(self.params);
        let mut total = 0.0;
        let mut produced = 0.0;
        for (t, &h) in h2_kg_h.iter().enumerate() {
            let htse = h * e;
            total += self.prices[t] * (base - htse) - self.params.htse_var_om_usd_per_mwh * htse;
            produced += h;
        }
        let consumed = self.config.ft_kg_per_h * h2_kg_h.len() as f64;
        total + self.terminal_value_usd_per_kg * (produced - consumed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSchedule {
    pub grid_mw: Vec<f64>,
    pub htse_mw: Vec<f64>,
    pub h2_kg_h: Vec<f64>,
    /// Level at the end of each hour.
    pub storage_kg: Vec<f64>,
    pub initial_storage_kg: f64,
    pub ft_kg_per_h: f64,
    /// Grid revenue less electrolyzer variable cost plus terminal storage credit, $.
    pub objective_usd: f64,
}

impl DispatchSchedule {
    pub fn hours(&self) -> usize {
        self.grid_mw.len()
    }

    pub fn final_storage_kg(&self) -> f64 {
        self.storage_kg.last().copied().unwrap_or(self.initial_storage_kg)
    }

    pub fn write_csv(&self, prices: &[f64], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["hour", "price", "grid_mw", "htse_mw", "h2_kg_h", "storage_kg"])
            .map_err(|e| Error::csv(path, e))?;
        for t in 0..self.hours() {
            w.write_record(&[
                t.to_string(),
                prices[t].to_string(),
                self.grid_mw[t].to_string(),
                self.htse_mw[t].to_string(),
                self.h2_kg_h[t].to_string(),
                self.storage_kg[t].to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Slope key with a total order; ties are broken toward the latest hour first.
#[derive(Debug, Clone, Copy)]
struct Piece {
    slope: f64,
    hour: Reverse<usize>,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.slope
            .total_cmp(&other.slope)
            .then(self.hour.cmp(&other.hour))
    }
}

/// Solves the dispatch LP exactly.
///
/// Among optimal plans the one keeping storage lowest is returned: production
/// is committed as late as possible and nothing is banked at zero net gain.
pub fn optimize_dispatch(problem: &DispatchProblem) -> Result<DispatchSchedule> {
    problem.validate()?;
    let horizon = problem.prices.len();
    let h_max = problem.max_h2_rate();
    let ft = problem.config.ft_kg_per_h;
    let cap = problem.config.storage_kg;
    let eps = 1e-12 * (h_max + ft + cap).max(1.0);

    let mut produced = vec![0.0; horizon];
    let mut pieces: BTreeMap<Piece, f64> = BTreeMap::new();
    let mut left = problem.initial_storage_kg;
    let mut width = 0.0;

    for t in 0..horizon {
        if h_max > 0.0 {
            pieces.insert(
                Piece {
                    slope: problem.unit_cost(t),
                    hour: Reverse(t),
                },
                h_max,
            );
            width += h_max;
        }
        left -= ft;
        // production forced to keep the tank non-negative, cheapest first
        while left < -eps {
            let Some(mut entry) = pieces.first_entry() else {
                return Err(Error::DispatchInfeasible {
                    hour: t,
                    reason: format!(
                        "storage short by {:.3} kg; electrolyzer cannot sustain FT intake {ft:.3} kg/h",
                        -left
                    ),
                });
            };
            let take = entry.get().min(-left);
            produced[entry.key().hour.0] += take;
            *entry.get_mut() -= take;
            width -= take;
            left += take;
            if *entry.get() <= eps {
                entry.remove();
            }
        }
        left = left.max(0.0);
        // production that would overflow the tank is dropped, most expensive first
        let mut excess = left + width - cap;
        while excess > eps {
            let mut entry = pieces.last_entry().expect("excess implies pieces");
            let drop = entry.get().min(excess);
            *entry.get_mut() -= drop;
            width -= drop;
            excess -= drop;
            if *entry.get() <= eps {
                entry.remove();
            }
        }
    }
    // bank whatever is strictly profitable at the terminal value
    for (piece, len) in pieces {
        if piece.slope >= 0.0 {
            break;
        }
        produced[piece.hour.0] += len;
    }
    Ok(build_schedule(problem, produced))
}

fn build_schedule(problem: &DispatchProblem, mut h2_kg_h: Vec<f64>) -> DispatchSchedule {
    let params = problem.params;
    let e = params.mwh_per_kg();
    let h_max = problem.max_h2_rate();
    let base = problem.npp_capacity_mwe - problem.config.ft_elec_mwe(params);
    let ft = problem.config.ft_kg_per_h;
    let mut level = problem.initial_storage_kg;
    let mut storage = Vec::with_capacity(h2_kg_h.len());
    let mut grid = Vec::with_capacity(h2_kg_h.len());
    let mut htse = Vec::with_capacity(h2_kg_h.len());
    for h in h2_kg_h.iter_mut() {
        *h = h.clamp(0.0, h_max);
        level += *h - ft;
        storage.push(level.clamp(0.0, problem.config.storage_kg));
        let p = (*h * e).min(problem.config.htse_mwe);
        htse.push(p);
        grid.push(base - p);
    }
    let objective_usd = problem.evaluate(&h2_kg_h);
    DispatchSchedule {
        grid_mw: grid,
        htse_mw: htse,
        h2_kg_h,
        storage_kg: storage,
        initial_storage_kg: problem.initial_storage_kg,
        ft_kg_per_h: ft,
        objective_usd,
    }
}

/// Largest number of control sequences the oracle will enumerate.
pub const ORACLE_LIMIT: f64 = 5.0e7;

/// Best objective over electrolyzer levels restricted to `grid_points`
/// equidistant values per hour. Returns `None` if no lattice plan is feasible.
pub fn dispatch_oracle(problem: &DispatchProblem, grid_points: usize) -> Result<Option<f64>> {
    problem.validate()?;
    let horizon = problem.prices.len();
    if horizon > 8 || !(2..=21).contains(&grid_points) {
        return Err(Error::OracleTooLarge(format!(
            "horizon {horizon} (max 8), grid points {grid_points} (2..=21)"
        )));
    }
    if (grid_points as f64).powi(horizon as i32) > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge(format!(
            "{grid_points}^{horizon} plans exceeds {ORACLE_LIMIT}"
        )));
    }
    let h_max = problem.max_h2_rate();
    let levels: Vec<f64> = (0..grid_points)
        .map(|k| h_max * k as f64 / (grid_points - 1) as f64)
        .collect();
    let mut plan = vec![0.0; horizon];
    let mut best = None;
    search(problem, &levels, 0, problem.initial_storage_kg, &mut plan, &mut best);
    Ok(best)
}

fn search(
    problem: &DispatchProblem,
    levels: &[f64],
    t: usize,
    storage: f64,
    plan: &mut [f64],
    best: &mut Option<f64>,
) {
    if t == plan.len() {
        let value = problem.evaluate(plan);
        if best.map_or(true, |b| value > b) {
            *best = Some(value);
        }
        return;
    }
    let tol = 1e-9 * (problem.config.storage_kg + problem.config.ft_kg_per_h).max(1.0);
    for &h in levels {
        let next = storage + h - problem.config.ft_kg_per_h;
        if next < -tol || next > problem.config.storage_kg + tol {
            continue;
        }
        plan[t] = h;
        search(problem, levels, t + 1, next, plan, best);
    }
}

/// Gap allowed between the LP and the lattice-restricted oracle: one lattice
/// step of production per hour at the largest per-kg margin.
pub fn discretization_bound(problem: &DispatchProblem, grid_points: usize) -> f64 {
    let step = problem.max_h2_rate() / (grid_points.max(2) - 1) as f64;
    let worst = (0..problem.prices.len())
        .map(|t| problem.unit_cost(t).abs())
        .fold(0.0, f64::max);
    problem.prices.len() as f64 * step * worst
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DispatchSummary {
    pub hours: usize,
    pub grid_mwh: f64,
    pub grid_revenue_usd: f64,
    pub htse_mwh: f64,
    pub h2_produced_kg: f64,
    pub h2_to_ft_kg: f64,
    pub products_kg: Products,
    pub storage_start_kg: f64,
    pub storage_end_kg: f64,
}

impl DispatchSummary {
    pub fn mean_grid_mw(&self) -> f64 {
        if self.hours == 0 {
            0.0
        } else {
            self.grid_mwh / self.hours as f64
        }
    }
}

pub fn annual_dispatch_summary(
    schedule: &DispatchSchedule,
    prices: &[f64],
    params: &TechnoParams,
) -> DispatchSummary {
    let hours = schedule.hours();
    let h2_to_ft_kg = schedule.ft_kg_per_h * hours as f64;
    DispatchSummary {
        hours,
        grid_mwh: schedule.grid_mw.iter().sum(),
        grid_revenue_usd: schedule.grid_mw.iter().zip(prices).map(|(g, p)| g * p).sum(),
        htse_mwh: schedule.htse_mw.iter().sum(),
        h2_produced_kg: schedule.h2_kg_h.iter().sum(),
        h2_to_ft_kg,
        products_kg: ft_outputs(h2_to_ft_kg, params),
        storage_start_kg: schedule.initial_storage_kg,
        storage_end_kg: schedule.final_storage_kg(),
    }
}
