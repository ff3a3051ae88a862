//! Yearly cashflow ledgers, depreciation and discounting.

use std::path::Path;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::co2supply::SupplyCurve;
use crate::dispatch::DispatchSummary;
use crate::error::{Error, Result};
use crate::plantmodel::{IesConfiguration, Products, SiteParams, TechnoParams, HOURS_PER_YEAR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FinancialParams {
    pub project_life_years: u32,
    pub wacc: f64,
    pub inflation: f64,
    pub federal_tax: f64,
    pub macrs_class_years: u32,
    /// Years of operation that earn the hydrogen credit; `None` means the whole life.
    pub ptc_duration_years: Option<u32>,
    /// Flat $/t added to the CO₂ curve cost (tax-credit-driven price floor).
    pub co2_price_adder_usd_per_t: f64,
}

impl Default for FinancialParams {
    fn default() -> Self {
        Self {
            project_life_years: 20,
            wacc: 0.10,
            inflation: 0.0218,
            federal_tax: 0.21,
            macrs_class_years: 15,
            ptc_duration_years: None,
            co2_price_adder_usd_per_t: 0.0,
        }
    }
}

impl FinancialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wacc > 0.0 && self.wacc < 1.0) {
            return Err(Error::InvalidConfiguration("wacc must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.federal_tax) || self.project_life_years == 0 {
            return Err(Error::InvalidConfiguration(
                "federal tax must lie in [0, 1) and project life must be >= 1".into(),
            ));
        }
        if !self.inflation.is_finite() || self.inflation <= -1.0 {
            return Err(Error::InvalidConfiguration("inflation must exceed -100%".into()));
        }
        macrs_schedule(self.macrs_class_years).map(|_| ())
    }

    pub fn combined_tax_rate(&self, state_tax: f64) -> f64 {
        self.federal_tax + state_tax * (1.0 - self.federal_tax)
    }

    fn ptc_years(&self) -> u32 {
        self.ptc_duration_years.unwrap_or(self.project_life_years)
    }
}

/// MACRS half-year-convention fractions: declining balance switching to
/// straight line, `class_years + 1` entries.
pub fn macrs_schedule(class_years: u32) -> Result<Vec<f64>> {
    let factor = match class_years {
        3 | 5 | 7 | 10 => 2.0,
        15 | 20 => 1.5,
        other => return Err(Error::UnsupportedClassLife(other)),
    };
    let n = class_years as f64;
    let rate = factor / n;
    let mut remaining = 1.0;
    let mut out = Vec::with_capacity(class_years as usize + 1);
    for year in 1..=class_years {
        let d = if year == 1 {
            rate / 2.0
        } else {
            let life_left = n + 0.5 - (year - 1) as f64;
            (rate * remaining).max(remaining / life_left)
        };
        out.push(d);
        remaining -= d;
    }
    out.push(1.0 - out.iter().sum::<f64>());
    Ok(out)
}

pub fn npv(cashflows: &[f64], wacc: f64) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for cf in cashflows {
        total += cf / discount;
        discount *= 1.0 + wacc;
    }
    total
}

pub fn change_in_profitability(npv_case: f64, npv_ref: f64, npv_baseline: f64) -> Result<f64> {
    let denom = npv_ref - npv_baseline;
    if denom == 0.0 {
        return Err(Error::UndefinedReference);
    }
    Ok((npv_case - npv_ref) / denom)
}

/// One ledger year. Every amount is a non-negative magnitude in nominal $
/// except `taxable_income` and `net`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LedgerYear {
    pub year: u32,
    pub capex: f64,
    pub fixed_om: f64,
    pub variable_om: f64,
    pub electricity_revenue: f64,
    pub fuel_revenue: Products,
    pub h2_ptc: f64,
    pub capacity_payment: f64,
    pub co2_feedstock: f64,
    pub foregone_capacity_payment: f64,
    pub depreciation: f64,
    pub taxable_income: f64,
    pub tax: f64,
    pub net: f64,
}

impl LedgerYear {
    pub fn revenues(&self) -> f64 {
        self.electricity_revenue + self.fuel_revenue.sum() + self.h2_ptc + self.capacity_payment
    }

    pub fn cash_costs(&self) -> f64 {
        self.capex + self.fixed_om + self.variable_om + self.co2_feedstock + self.foregone_capacity_payment
    }

    /// Signed cash categories; they sum to `net`.
    pub fn categories(&self) -> [(&'static str, f64); 12] {
        [
            ("capex", -self.capex),
            ("fixed_om", -self.fixed_om),
            ("variable_om", -self.variable_om),
            ("electricity_revenue", self.electricity_revenue),
            ("naphtha_revenue", self.fuel_revenue.naphtha),
            ("jet_revenue", self.fuel_revenue.jet),
            ("diesel_revenue", self.fuel_revenue.diesel),
            ("h2_ptc", self.h2_ptc),
            ("capacity_payment", self.capacity_payment),
            ("co2_feedstock", -self.co2_feedstock),
            ("foregone_capacity_payment", -self.foregone_capacity_payment),
            ("tax", -self.tax),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashflowLedger {
    pub years: Vec<LedgerYear>,
}

impl CashflowLedger {
    pub fn net(&self) -> Vec<f64> {
        self.years.iter().map(|y| y.net).collect()
    }

    pub fn npv(&self, wacc: f64) -> f64 {
        npv(&self.net(), wacc)
    }

    /// Credit share of revenue from electricity, fuel and credit, undiscounted.
    pub fn ptc_share(&self) -> f64 {
        let (mut ptc, mut total) = (0.0, 0.0);
        for y in &self.years {
            ptc += y.h2_ptc;
            total += y.h2_ptc + y.electricity_revenue + y.fuel_revenue.sum();
        }
        if total > 0.0 {
            ptc / total
        } else {
            0.0
        }
    }

    /// Σ over years of each category, optionally discounted at `wacc`.
    pub fn category_totals(&self, wacc: Option<f64>) -> Vec<(&'static str, f64)> {
        let mut totals: Vec<(&'static str, f64)> =
            LedgerYear::default().categories().iter().map(|(k, _)| (*k, 0.0)).collect();
        for y in &self.years {
            let d = wacc.map_or(1.0, |w| (1.0 + w).powi(y.year as i32));
            for (slot, (_, v)) in totals.iter_mut().zip(y.categories()) {
                slot.1 += v / d;
            }
        }
        totals
    }

    /// Long-format CSV `year,category,amount_usd`, amounts discounted when `wacc` is given.
    pub fn write_csv(&self, path: impl AsRef<Path>, wacc: Option<f64>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["year", "category", "amount_usd"])
            .map_err(|e| Error::csv(path, e))?;
        for y in &self.years {
            let d = wacc.map_or(1.0, |w| (1.0 + w).powi(y.year as i32));
            let year = y.year.to_string();
            for (name, v) in y.categories() {
                w.write_record([year.as_str(), name, &(v / d).to_string()])
                    .map_err(|e| Error::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Everything the ledger needs besides the capacities.
pub struct LedgerInputs<'a> {
    /// One dispatch summary per operating year.
    pub dispatch: &'a [DispatchSummary],
    /// Gate prices, $/gal, one entry per operating year, in base-year dollars.
    pub fuel_prices: &'a [Products],
    pub supply_curve: Option<&'a SupplyCurve>,
    pub fin: &'a FinancialParams,
    pub tech: &'a TechnoParams,
    pub site: &'a SiteParams,
}

pub fn capex(config: &IesConfiguration, tech: &TechnoParams) -> f64 {
    config.htse_mwe * 1000.0 * tech.htse_capex_usd_per_kw
        + tech.ft_ref_capex_usd * tech.ft_cost_scale(config.ft_kg_per_h)
        + config.storage_kg * tech.storage_capex_usd_per_kg
}

pub fn build_ledger(config: &IesConfiguration, inputs: &LedgerInputs) -> Result<CashflowLedger> {
    let LedgerInputs {
        dispatch,
        fuel_prices,
        supply_curve,
        fin,
        tech,
        site,
    } = inputs;
    fin.validate()?;
    let life = fin.project_life_years as usize;
    if dispatch.len() < life || fuel_prices.len() < life {
        return Err(Error::InvalidInput(format!(
            "ledger needs {life} years of dispatch and fuel prices, got {} and {}",
            dispatch.len(),
            fuel_prices.len()
        )));
    }
    let tax_rate = fin.combined_tax_rate(site.state_tax_rate);
    let macrs = macrs_schedule(fin.macrs_class_years)?;
    let total_capex = capex(config, tech);
    let ft_scale = tech.ft_cost_scale(config.ft_kg_per_h);
    let fixed_base = config.htse_mwe * tech.htse_fixed_om_usd_per_mw_yr + tech.ft_fixed_om_ref_usd_per_yr * ft_scale;
    let cap_rate = site.capacity_payment_usd_per_mw_yr;

    let mut years = Vec::with_capacity(life + 1);
    years.push(LedgerYear {
        year: 0,
        capex: total_capex,
        net: -total_capex,
        ..Default::default()
    });
    for t in 1..=life {
        let d = &dispatch[t - 1];
        let escalation = (1.0 + fin.inflation).powi(t as i32);
        let prices = fuel_prices[t - 1].scale(escalation);
        let gallons = tech.gallons(&d.products_kg);
        let fuel_revenue = gallons.zip_with(&prices, |g, p| g * p);
        let h2_ptc = if t as u32 <= fin.ptc_years() {
            tech.h2_ptc_usd_per_kg * d.h2_to_ft_kg
        } else {
            0.0
        };
        let co2_tonnes = d.h2_to_ft_kg * tech.co2_per_h2 / 1000.0;
        let co2_feedstock = if co2_tonnes > 0.0 {
            let curve = supply_curve.ok_or_else(|| {
                Error::InvalidConfiguration("FT built but no CO2 supply curve provided".into())
            })?;
            (curve.feedstock_cost(co2_tonnes)? + fin.co2_price_adder_usd_per_t * co2_tonnes) * escalation
        } else {
            0.0
        };
        let ft_hours = if config.ft_built() { d.hours as f64 } else { 0.0 };
        let variable_om = (d.htse_mwh * tech.htse_var_om_usd_per_mwh
            + tech.ft_var_om_ref_usd_per_yr * ft_scale * ft_hours / HOURS_PER_YEAR)
            * escalation;
        let fixed_om = fixed_base * escalation;
        let capacity_payment = cap_rate * site.npp_capacity_mwe;
        let foregone_capacity_payment = cap_rate * (site.npp_capacity_mwe - d.mean_grid_mw()).max(0.0);
        let depreciation = total_capex * macrs.get(t - 1).copied().unwrap_or(0.0);
        let taxable_income = d.grid_revenue_usd + fuel_revenue.sum() + capacity_payment
            - fixed_om
            - variable_om
            - co2_feedstock
            - foregone_capacity_payment
            - depreciation;
        let tax = taxable_income.max(0.0) * tax_rate;
        let mut y = LedgerYear {
            year: t as u32,
            capex: 0.0,
            fixed_om,
            variable_om,
            electricity_revenue: d.grid_revenue_usd,
            fuel_revenue,
            h2_ptc,
            capacity_payment,
            co2_feedstock,
            foregone_capacity_payment,
            depreciation,
            taxable_income,
            tax,
            net: 0.0,
        };
        y.net = y.revenues() - y.cash_costs() - y.tax;
        years.push(y);
    }
    let ledger = CashflowLedger { years };
    for y in &ledger.years {
        let sum: f64 = y.categories().iter().map(|(_, v)| v).sum();
        assert!(
            (sum - y.net).abs() <= 1e-6 * (1.0 + y.net.abs()),
            "ledger year {} does not reconcile",
            y.year
        );
    }
    Ok(ledger)
}

pub fn delta_npv(ies: &CashflowLedger, bau: &CashflowLedger, fin: &FinancialParams) -> f64 {
    ies.npv(fin.wacc) - bau.npv(fin.wacc)
}
