//! Component transfer functions, cost parameters and sweep ranges.
//!
//! Every transfer function here is linear through the origin. Flows are in
//! kg/h, power in MWe, storage in kg.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LITERS_PER_GALLON: f64 = 3.785_411_784;
pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SiteParams {
    pub name: String,
    /// Net electrical output of the unit the IES is attached to.
    pub npp_capacity_mwe: f64,
    pub market: String,
    pub state: String,
    pub state_tax_rate: f64,
    pub fuel_region: String,
    pub capacity_payment_usd_per_mw_yr: f64,
    /// Whole-station capacity and unit count used for the CO2 demand bound.
    /// Defaults to the single attached unit.
    #[serde(default)]
    pub station_capacity_mwe: Option<f64>,
    #[serde(default = "one")]
    pub station_units: u32,
}

fn one() -> u32 {
    1
}

impl SiteParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.npp_capacity_mwe > 0.0) {
            return Err(Error::InvalidConfiguration(format!(
                "{}: npp_capacity_mwe must be positive",
                self.name
            )));
        }
        if !(0.0..1.0).contains(&self.state_tax_rate) {
            return Err(Error::InvalidConfiguration(format!(
                "{}: state_tax_rate must lie in [0, 1)",
                self.name
            )));
        }
        if self.capacity_payment_usd_per_mw_yr < 0.0 || self.station_units == 0 {
            return Err(Error::InvalidConfiguration(format!(
                "{}: capacity payment must be >= 0 and station_units >= 1",
                self.name
            )));
        }
        Ok(())
    }
}

/// Product split of Fischer–Tropsch output, kg of product (or kg/h) per kg of H2.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct Products {
    pub naphtha: f64,
    pub jet: f64,
    pub diesel: f64,
}

impl Products {
    pub fn scale(&self, k: f64) -> Self {
        Self {
            naphtha: self.naphtha * k,
            jet: self.jet * k,
            diesel: self.diesel * k,
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            naphtha: f(self.naphtha, other.naphtha),
            jet: f(self.jet, other.jet),
            diesel: f(self.diesel, other.diesel),
        }
    }

    pub fn sum(&self) -> f64 {
        self.naphtha + self.jet + self.diesel
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TechnoParams {
    pub htse_elec_spec_kwh_per_kg: f64,
    pub htse_thermal_spec_kwh_per_kg: f64,
    pub thermal_to_elec_eff: f64,
    /// Replaces the derived electric-equivalent consumption when set.
    pub effective_elec_spec_override: Option<f64>,
    pub htse_capex_usd_per_kw: f64,
    pub htse_fixed_om_usd_per_mw_yr: f64,
    pub htse_var_om_usd_per_mwh: f64,
    pub ft_elec_demand_mwe: f64,
    pub ft_yields: Products,
    pub ft_ref_capacity_kg_per_h: f64,
    pub ft_ref_capex_usd: f64,
    pub ft_fixed_om_ref_usd_per_yr: f64,
    pub ft_var_om_ref_usd_per_yr: f64,
    pub ft_scaling_exponent: f64,
    pub storage_capex_usd_per_kg: f64,
    pub co2_per_h2: f64,
    /// kg/L.
    pub fuel_densities: Products,
    pub h2_ptc_usd_per_kg: f64,
    pub min_total_power_mwe: f64,
    pub max_total_power_mwe: f64,
    pub storage_hours_max: f64,
}

impl Default for TechnoParams {
    fn default() -> Self {
        Self {
            htse_elec_spec_kwh_per_kg: 36.8,
            htse_thermal_spec_kwh_per_kg: 6.4,
            thermal_to_elec_eff: 0.33,
            effective_elec_spec_override: None,
            htse_capex_usd_per_kw: 703.0,
            htse_fixed_om_usd_per_mw_yr: 32_600.0,
            htse_var_om_usd_per_mwh: 3.4,
            ft_elec_demand_mwe: 14.9,
            ft_yields: Products {
                naphtha: 0.69,
                jet: 0.84,
                diesel: 0.46,
            },
            ft_ref_capacity_kg_per_h: 10_625.0,
            ft_ref_capex_usd: 158_102_945.0,
            ft_fixed_om_ref_usd_per_yr: 7_640_007.0,
            ft_var_om_ref_usd_per_yr: 21_732_221.0,
            ft_scaling_exponent: 1.0,
            storage_capex_usd_per_kg: 500.0,
            co2_per_h2: 6.20,
            fuel_densities: Products {
                naphtha: 0.745,
                jet: 0.80,
                diesel: 0.84,
            },
            h2_ptc_usd_per_kg: 3.0,
            min_total_power_mwe: 100.0,
            max_total_power_mwe: 1000.0,
            storage_hours_max: 24.0,
        }
    }
}

impl TechnoParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("htse_elec_spec_kwh_per_kg", self.htse_elec_spec_kwh_per_kg),
            ("ft_ref_capacity_kg_per_h", self.ft_ref_capacity_kg_per_h),
            ("co2_per_h2", self.co2_per_h2),
            ("fuel_densities.naphtha", self.fuel_densities.naphtha),
            ("fuel_densities.jet", self.fuel_densities.jet),
            ("fuel_densities.diesel", self.fuel_densities.diesel),
            ("max_total_power_mwe", self.max_total_power_mwe),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidConfiguration(format!("{name} must be positive")));
            }
        }
        let non_negative = [
            ("htse_thermal_spec_kwh_per_kg", self.htse_thermal_spec_kwh_per_kg),
            ("thermal_to_elec_eff", self.thermal_to_elec_eff),
            ("htse_capex_usd_per_kw", self.htse_capex_usd_per_kw),
            ("htse_fixed_om_usd_per_mw_yr", self.htse_fixed_om_usd_per_mw_yr),
            ("htse_var_om_usd_per_mwh", self.htse_var_om_usd_per_mwh),
            ("ft_elec_demand_mwe", self.ft_elec_demand_mwe),
            ("ft_ref_capex_usd", self.ft_ref_capex_usd),
            ("ft_fixed_om_ref_usd_per_yr", self.ft_fixed_om_ref_usd_per_yr),
            ("ft_var_om_ref_usd_per_yr", self.ft_var_om_ref_usd_per_yr),
            ("ft_scaling_exponent", self.ft_scaling_exponent),
            ("storage_capex_usd_per_kg", self.storage_capex_usd_per_kg),
            ("h2_ptc_usd_per_kg", self.h2_ptc_usd_per_kg),
            ("storage_hours_max", self.storage_hours_max),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) {
                return Err(Error::InvalidConfiguration(format!("{name} must be >= 0")));
            }
        }
        if let Some(v) = self.effective_elec_spec_override {
            if !(v > 0.0) {
                return Err(Error::InvalidConfiguration(
                    "effective_elec_spec_override must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// kWh of electricity per kg H2 once the thermal draw is charged as foregone electricity.
    pub fn effective_elec_spec(&self) -> f64 {
        effective_elec_spec(self)
    }

    /// MWh of HTSE input per kg of H2.
    pub fn mwh_per_kg(&self) -> f64 {
        effective_elec_spec(self) / 1000.0
    }

    pub fn gallons(&self, kg: &Products) -> Products {
        kg.zip_with(&self.fuel_densities, |m, rho| m / (rho * LITERS_PER_GALLON))
    }

    /// Scale factor applied to the reference FT plant's costs.
    pub fn ft_cost_scale(&self, ft_kg_per_h: f64) -> f64 {
        if ft_kg_per_h <= 0.0 {
            return 0.0;
        }
        (ft_kg_per_h / self.ft_ref_capacity_kg_per_h).powf(self.ft_scaling_exponent)
    }
}

pub fn effective_elec_spec(p: &TechnoParams) -> f64 {
    p.effective_elec_spec_override.unwrap_or(
        p.htse_elec_spec_kwh_per_kg + p.htse_thermal_spec_kwh_per_kg * p.thermal_to_elec_eff,
    )
}

/// Hydrogen output of the HTSE at `power_mwe`.
///
/// Panics if `power_mwe` is negative or not finite.
pub fn htse_h2_rate(power_mwe: f64, p: &TechnoParams) -> f64 {
    assert!(
        power_mwe >= 0.0 && power_mwe.is_finite(),
        "HTSE power must be finite and non-negative, got {power_mwe}"
    );
    power_mwe * 1000.0 / effective_elec_spec(p)
}

/// Product rates for a hydrogen feed into the FT unit.
pub fn ft_outputs(h2_in_kg_per_h: f64, p: &TechnoParams) -> Products {
    p.ft_yields.scale(h2_in_kg_per_h)
}

/// Annual CO2 requirement in tonnes for a steady hydrogen feed.
pub fn co2_demand(h2_in_kg_per_h: f64, p: &TechnoParams) -> f64 {
    h2_in_kg_per_h * p.co2_per_h2 * HOURS_PER_YEAR / 1000.0
}

/// Upper bound on CO2 demand for the whole station: every unit diverted
/// to its own HTSE + FT train with no cap on electrolyzer size.
pub fn co2_demand_upper_bound(site: &SiteParams, p: &TechnoParams) -> f64 {
    let station = site.station_capacity_mwe.unwrap_or(site.npp_capacity_mwe);
    let htse = (station - site.station_units as f64 * p.ft_elec_demand_mwe).max(0.0);
    co2_demand(htse_h2_rate(htse, p), p)
}

/// The three decision capacities of an IES.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct IesConfiguration {
    pub htse_mwe: f64,
    pub ft_kg_per_h: f64,
    pub storage_kg: f64,
}

/// Relative slack on the FT ≤ HTSE-output check, for lattice points computed
/// through slightly different float paths.
const CAPACITY_SLACK: f64 = 1e-9;

impl IesConfiguration {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn ft_built(&self) -> bool {
        self.ft_kg_per_h > 0.0
    }

    /// Electricity drawn by the FT unit (zero when it is not built).
    pub fn ft_elec_mwe(&self, p: &TechnoParams) -> f64 {
        if self.ft_built() {
            p.ft_elec_demand_mwe
        } else {
            0.0
        }
    }

    pub fn max_h2_rate(&self, p: &TechnoParams) -> f64 {
        htse_h2_rate(self.htse_mwe, p)
    }

    pub fn validate(&self, site: &SiteParams, p: &TechnoParams) -> Result<()> {
        if [self.htse_mwe, self.ft_kg_per_h, self.storage_kg]
            .iter()
            .any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidConfiguration(
                "capacities must be finite and non-negative".into(),
            ));
        }
        let draw = self.htse_mwe + self.ft_elec_mwe(p);
        if draw > site.npp_capacity_mwe * (1.0 + CAPACITY_SLACK) {
            return Err(Error::InvalidConfiguration(format!(
                "HTSE {:.1} MWe plus FT {:.1} MWe exceeds plant capacity {:.1} MWe",
                self.htse_mwe,
                self.ft_elec_mwe(p),
                site.npp_capacity_mwe
            )));
        }
        let h2max = self.max_h2_rate(p);
        if self.ft_kg_per_h > h2max * (1.0 + CAPACITY_SLACK) {
            return Err(Error::InvalidConfiguration(format!(
                "FT intake {:.1} kg/h exceeds HTSE output {:.1} kg/h",
                self.ft_kg_per_h, h2max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub min: f64,
    pub max: f64,
}

impl Span {
    /// `n` equidistant points with exact endpoints.
    pub fn points(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![self.min],
            _ => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        self.max
                    } else {
                        self.min + (self.max - self.min) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

/// Sweep ranges: HTSE in MWe, FT in kg/h, storage in kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityRanges {
    pub htse_mwe: Span,
    pub ft_kg_per_h: Span,
    pub storage_kg: Span,
}

pub fn capacity_ranges(site: &SiteParams, p: &TechnoParams) -> Result<CapacityRanges> {
    if site.npp_capacity_mwe <= p.min_total_power_mwe {
        return Err(Error::InfeasibleSite {
            site: site.name.clone(),
            capacity_mwe: site.npp_capacity_mwe,
            floor_mwe: p.min_total_power_mwe,
        });
    }
    let htse_min = p.min_total_power_mwe - p.ft_elec_demand_mwe;
    let htse_max = p.max_total_power_mwe.min(site.npp_capacity_mwe) - p.ft_elec_demand_mwe;
    let ft_min = htse_h2_rate(htse_min, p);
    let ft_max = htse_h2_rate(htse_max, p);
    Ok(CapacityRanges {
        htse_mwe: Span {
            min: htse_min,
            max: htse_max,
        },
        ft_kg_per_h: Span {
            min: ft_min,
            max: ft_max,
        },
        storage_kg: Span {
            min: 0.0,
            max: p.storage_hours_max * ft_max,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn site(name: &str, mwe: f64) -> SiteParams {
        SiteParams {
            name: name.into(),
            npp_capacity_mwe: mwe,
            market: "X".into(),
            state: "X".into(),
            state_tax_rate: 0.05,
            fuel_region: "X".into(),
            capacity_payment_usd_per_mw_yr: 0.0,
            station_capacity_mwe: None,
            station_units: 1,
        }
    }

    #[test]
    fn effective_spec_identity() {
        let p = TechnoParams::default();
        assert_relative_eq!(p.effective_elec_spec(), 38.912, epsilon = 1e-12);
        let p0 = TechnoParams {
            thermal_to_elec_eff: 0.0,
            ..TechnoParams::default()
        };
        assert_eq!(p0.effective_elec_spec(), 36.8);
    }

    #[test]
    fn htse_rate_examples() {
        let p = TechnoParams::default();
        assert_eq!(htse_h2_rate(0.0, &p), 0.0);
        assert_relative_eq!(htse_h2_rate(1.0, &p), 25.699, epsilon = 5e-4);
        let table3 = TechnoParams {
            effective_elec_spec_override: Some(39.72),
            ..TechnoParams::default()
        };
        let r = htse_h2_rate(985.1, &table3);
        assert!((r - 24_801.0).abs() < 1.0, "{r}");
    }

    #[test]
    #[should_panic]
    fn negative_power_is_a_contract_violation() {
        htse_h2_rate(-1.0, &TechnoParams::default());
    }

    #[test]
    fn ft_output_examples() {
        let p = TechnoParams::default();
        assert_eq!(ft_outputs(1.0, &p), p.ft_yields);
        assert_eq!(ft_outputs(0.0, &p).sum(), 0.0);
        let out = ft_outputs(10_625.0, &p);
        assert_relative_eq!(out.naphtha, 7331.25, epsilon = 1e-9);
        assert_relative_eq!(out.jet, 8925.0, epsilon = 1e-9);
        assert_relative_eq!(out.diesel, 4887.5, epsilon = 1e-9);
    }

    #[test]
    fn co2_per_h2_matches_carbon_balance() {
        // carbon mass fractions of typical naphtha (C7H16), jet (C12H26), diesel (C16H34)
        let c = |n: f64, h: f64| 12.011 * n / (12.011 * n + 1.008 * h);
        let y = TechnoParams::default().ft_yields;
        let co2 = (y.naphtha * c(7.0, 16.0) + y.jet * c(12.0, 26.0) + y.diesel * c(16.0, 34.0))
            * 44.009
            / 12.011;
        assert!((co2 - 6.20).abs() / 6.20 < 0.02, "{co2}");
    }

    #[test]
    fn cooper_scale_co2_demand() {
        let p = TechnoParams::default();
        let d = co2_demand(19_000.0, &p);
        assert!((d - 1.0e6).abs() / 1.0e6 < 0.05, "{d}");
        assert_eq!(co2_demand(0.0, &p), 0.0);
    }

    #[test]
    fn braidwood_ranges() {
        let p = TechnoParams {
            effective_elec_spec_override: Some(39.795),
            ..TechnoParams::default()
        };
        let r = capacity_ranges(&site("Braidwood", 1194.0), &p).unwrap();
        assert!((r.htse_mwe.min - 85.1).abs() < 1e-9);
        assert!((r.htse_mwe.max - 985.1).abs() < 1e-9);
        assert!((r.ft_kg_per_h.min / 1000.0 - 2.14).abs() < 0.01);
        assert!((r.ft_kg_per_h.max / 1000.0 - 24.8).abs() < 0.1);
        assert!((r.storage_kg.max / 1000.0 - 594.1).abs() < 0.1);
        let pi = capacity_ranges(&site("Prairie Island", 522.0), &p).unwrap();
        assert!((pi.htse_mwe.max - 507.1).abs() < 1e-9);
    }

    #[test]
    fn tiny_site_is_infeasible() {
        let err = capacity_ranges(&site("tiny", 100.0), &TechnoParams::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSite { .. }));
    }

    #[test]
    fn span_points_hit_endpoints() {
        let s = Span { min: 85.1, max: 985.1 };
        let pts = s.points(10);
        assert_eq!(pts.len(), 10);
        assert_eq!(pts[0], 85.1);
        assert_eq!(pts[9], 985.1);
        assert!((pts[1] - 185.1).abs() < 1e-9);
        assert_eq!(Span { min: 3.0, max: 3.0 }.points(1), vec![3.0]);
    }

    #[test]
    fn configuration_checks() {
        let p = TechnoParams::default();
        let s = site("s", 500.0);
        let ok = IesConfiguration {
            htse_mwe: 485.1,
            ft_kg_per_h: htse_h2_rate(485.1, &p),
            storage_kg: 0.0,
        };
        ok.validate(&s, &p).unwrap();
        let too_big = IesConfiguration {
            htse_mwe: 490.0,
            ..ok
        };
        assert!(too_big.validate(&s, &p).is_err());
        let ft_over = IesConfiguration {
            ft_kg_per_h: ok.ft_kg_per_h * 1.01,
            ..ok
        };
        assert!(ft_over.validate(&s, &p).is_err());
        IesConfiguration::zero().validate(&s, &p).unwrap();
    }

    proptest! {
        #[test]
        fn transfer_functions_are_homogeneous(x in 0.0f64..2000.0, k in 0.0f64..10.0) {
            let p = TechnoParams::default();
            let tol = 1e-9 * (1.0 + x * k);
            prop_assert!((htse_h2_rate(k * x, &p) - k * htse_h2_rate(x, &p)).abs() <= tol * 100.0);
            prop_assert!((co2_demand(k * x, &p) - k * co2_demand(x, &p)).abs() <= tol * 100.0);
            let a = ft_outputs(k * x, &p);
            let b = ft_outputs(x, &p).scale(k);
            prop_assert!((a.sum() - b.sum()).abs() <= tol * 10.0);
        }
    }
}
