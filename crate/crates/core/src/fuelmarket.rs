//! Refinery-gate fuel prices from regional retail forecasts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plantmodel::Products;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fuel {
    Naphtha,
    Jet,
    Diesel,
    Gasoline,
}

impl Fuel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fuel::Naphtha => "naphtha",
            Fuel::Jet => "jet",
            Fuel::Diesel => "diesel",
            Fuel::Gasoline => "gasoline",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "naphtha" => Ok(Fuel::Naphtha),
            "jet" => Ok(Fuel::Jet),
            "diesel" => Ok(Fuel::Diesel),
            "gasoline" => Ok(Fuel::Gasoline),
            other => Err(Error::InvalidInput(format!("unknown fuel `{other}`"))),
        }
    }
}

/// Deductions taking one fuel from retail to refinery gate, all per gallon
/// except `pct_of_retail`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FuelAdjustment {
    pub tax_usd_per_gal: f64,
    pub pct_of_retail: f64,
    pub marketing_usd_per_gal: f64,
    pub distribution_usd_per_gal: f64,
}

impl FuelAdjustment {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tax_usd_per_gal >= 0.0
            && (0.0..1.0).contains(&self.pct_of_retail)
            && self.marketing_usd_per_gal >= 0.0
            && self.distribution_usd_per_gal >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "adjustments must be non-negative with percentage below 100%".into(),
            ))
        }
    }
}

/// Adjustment factors for one state, keyed by fuel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdjustmentFactors {
    pub by_fuel: BTreeMap<Fuel, FuelAdjustment>,
}

impl AdjustmentFactors {
    pub fn get(&self, fuel: Fuel) -> FuelAdjustment {
        self.by_fuel.get(&fuel).copied().unwrap_or_default()
    }
}

#[derive(Debug, Deserialize)]
struct AdjustmentRow {
    state: String,
    fuel: String,
    tax_usd_per_gal: f64,
    pct_of_retail: f64,
    marketing_usd_per_gal: f64,
    distribution_usd_per_gal: f64,
}

/// Reads `state,fuel,tax_usd_per_gal,pct_of_retail,marketing_usd_per_gal,distribution_usd_per_gal`.
pub fn read_adjustments(path: impl AsRef<Path>) -> Result<BTreeMap<String, AdjustmentFactors>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out: BTreeMap<String, AdjustmentFactors> = BTreeMap::new();
    for row in rdr.deserialize::<AdjustmentRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let adj = FuelAdjustment {
            tax_usd_per_gal: row.tax_usd_per_gal,
            pct_of_retail: row.pct_of_retail,
            marketing_usd_per_gal: row.marketing_usd_per_gal,
            distribution_usd_per_gal: row.distribution_usd_per_gal,
        };
        adj.validate()?;
        out.entry(row.state)
            .or_default()
            .by_fuel
            .insert(Fuel::parse(&row.fuel)?, adj);
    }
    Ok(out)
}

pub fn retail_to_gate(retail: f64, adj: &FuelAdjustment) -> f64 {
    let gate = retail
        - adj.tax_usd_per_gal
        - adj.pct_of_retail * retail
        - adj.marketing_usd_per_gal
        - adj.distribution_usd_per_gal;
    if gate < 0.0 {
        log::warn!("gate price {gate:.3} $/gal from retail {retail:.3} floored at zero");
        0.0
    } else {
        gate
    }
}

pub fn naphtha_track(gasoline: &[f64], ratio: f64) -> Vec<f64> {
    gasoline.iter().map(|g| g * ratio).collect()
}

/// Least-squares slope through the origin of naphtha on gasoline prices.
pub fn fit_naphtha_ratio(pairs: &[(f64, f64)]) -> Result<f64> {
    let (sxy, sxx) = pairs
        .iter()
        .fold((0.0, 0.0), |(sxy, sxx), &(naphtha, gasoline)| {
            (sxy + naphtha * gasoline, sxx + gasoline * gasoline)
        });
    if pairs.is_empty() || sxx <= 0.0 {
        return Err(Error::InsufficientData {
            needed: 1,
            got: pairs.len(),
        });
    }
    Ok(sxy / sxx)
}

/// Reads `date,naphtha_usd_per_gal,gasoline_usd_per_gal` history.
pub fn read_price_pairs(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    #[derive(Deserialize)]
    struct Row {
        #[allow(dead_code)]
        date: String,
        naphtha_usd_per_gal: f64,
        gasoline_usd_per_gal: f64,
    }
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    rdr.deserialize::<Row>()
        .map(|r| {
            r.map(|r| (r.naphtha_usd_per_gal, r.gasoline_usd_per_gal))
                .map_err(|e| Error::csv(path, e))
        })
        .collect()
}

/// Yearly retail prices per fuel for one region, gaps filled by linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetailTrack {
    pub region: String,
    pub first_year: i32,
    pub by_fuel: BTreeMap<Fuel, Vec<f64>>,
}

impl RetailTrack {
    /// Reads `year,fuel,usd_per_gal`.
    pub fn read_csv(region: &str, path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            year: i32,
            fuel: String,
            usd_per_gal: f64,
        }
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut points: BTreeMap<Fuel, BTreeMap<i32, f64>> = BTreeMap::new();
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| Error::csv(path, e))?;
            if !(row.usd_per_gal > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{}: retail price must be positive ({} {})",
                    path.display(),
                    row.fuel,
                    row.year
                )));
            }
            points
                .entry(Fuel::parse(&row.fuel)?)
                .or_default()
                .insert(row.year, row.usd_per_gal);
        }
        Self::from_points(region, &points)
    }

    pub fn from_points(region: &str, points: &BTreeMap<Fuel, BTreeMap<i32, f64>>) -> Result<Self> {
        let first = points.values().filter_map(|p| p.keys().next()).min().copied();
        let last = points.values().filter_map(|p| p.keys().next_back()).max().copied();
        let (Some(first_year), Some(last_year)) = (first, last) else {
            return Err(Error::InvalidInput(format!("{region}: empty retail track")));
        };
        let mut by_fuel = BTreeMap::new();
        for (&fuel, pts) in points {
            let series = (first_year..=last_year)
                .map(|y| interpolate(pts, y))
                .collect::<Option<Vec<f64>>>()
                .ok_or(Error::TrackSpan {
                    region: region.to_string(),
                    year: *pts.keys().next().unwrap().max(&first_year),
                })?;
            by_fuel.insert(fuel, series);
        }
        Ok(Self {
            region: region.to_string(),
            first_year,
            by_fuel,
        })
    }

    pub fn last_year(&self) -> i32 {
        let len = self.by_fuel.values().map(Vec::len).max().unwrap_or(0);
        self.first_year + len as i32 - 1
    }

    pub fn fuel(&self, fuel: Fuel) -> Result<&[f64]> {
        self.by_fuel
            .get(&fuel)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidInput(format!("{}: no {} retail prices", self.region, fuel.as_str())))
    }
}

/// Linear interpolation strictly inside the known span; `None` outside it.
fn interpolate(pts: &BTreeMap<i32, f64>, year: i32) -> Option<f64> {
    if let Some(v) = pts.get(&year) {
        return Some(*v);
    }
    let (y0, v0) = pts.range(..year).next_back()?;
    let (y1, v1) = pts.range(year..).next()?;
    Some(v0 + (v1 - v0) * (year - y0) as f64 / (y1 - y0) as f64)
}

/// Gate prices of the three FT products for one region, $/gal by year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelPriceTrack {
    pub region: String,
    pub first_year: i32,
    pub prices: Vec<Products>,
    /// Naphtha/gasoline ratio used to build the naphtha line.
    pub naphtha_ratio: f64,
}

impl FuelPriceTrack {
    pub fn last_year(&self) -> i32 {
        self.first_year + self.prices.len() as i32 - 1
    }

    pub fn price(&self, year: i32) -> Result<Products> {
        let idx = year - self.first_year;
        if idx < 0 || idx as usize >= self.prices.len() {
            return Err(Error::TrackSpan {
                region: self.region.clone(),
                year,
            });
        }
        Ok(self.prices[idx as usize])
    }

    /// Prices for `years` consecutive years starting at `start`.
    pub fn window(&self, start: i32, years: usize) -> Result<Vec<Products>> {
        (0..years as i32).map(|k| self.price(start + k)).collect()
    }

    /// Arithmetic mean over the inclusive span.
    pub fn mean(&self, from: i32, to: i32) -> Result<Products> {
        let window = self.window(from, (to - from + 1).max(0) as usize)?;
        let n = window.len().max(1) as f64;
        let sum = window
            .iter()
            .fold(Products::default(), |acc, p| acc.zip_with(p, |a, b| a + b));
        Ok(sum.scale(1.0 / n))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["year", "fuel", "usd_per_gal"])
            .map_err(|e| Error::csv(path, e))?;
        for (k, p) in self.prices.iter().enumerate() {
            let year = (self.first_year + k as i32).to_string();
            for (fuel, v) in [("naphtha", p.naphtha), ("jet", p.jet), ("diesel", p.diesel)] {
                w.write_record([year.as_str(), fuel, &v.to_string()])
                    .map_err(|e| Error::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Gate-price track for the three products. Naphtha has no retail forecast of
/// its own: a naphtha retail line is derived from gasoline retail by `naphtha_ratio`
/// and then adjusted with the naphtha factors.
pub fn gate_track(
    retail: &RetailTrack,
    factors: &AdjustmentFactors,
    naphtha_ratio: f64,
) -> Result<FuelPriceTrack> {
    if !(naphtha_ratio > 0.0) {
        return Err(Error::InvalidInput("naphtha ratio must be positive".into()));
    }
    let diesel = retail.fuel(Fuel::Diesel)?;
    let jet = retail.fuel(Fuel::Jet)?;
    let naphtha = naphtha_track(retail.fuel(Fuel::Gasoline)?, naphtha_ratio);
    let (d_adj, j_adj, n_adj) = (
        factors.get(Fuel::Diesel),
        factors.get(Fuel::Jet),
        factors.get(Fuel::Naphtha),
    );
    let prices = (0..diesel.len().min(jet.len()).min(naphtha.len()))
        .map(|k| Products {
            naphtha: retail_to_gate(naphtha[k], &n_adj),
            jet: retail_to_gate(jet[k], &j_adj),
            diesel: retail_to_gate(diesel[k], &d_adj),
        })
        .collect();
    Ok(FuelPriceTrack {
        region: retail.region.clone(),
        first_year: retail.first_year,
        prices,
        naphtha_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diesel_tx() -> FuelAdjustment {
        FuelAdjustment {
            tax_usd_per_gal: 0.444,
            pct_of_retail: 0.202,
            ..Default::default()
        }
    }

    #[test]
    fn texas_diesel_example() {
        // 3.000 − 0.444 − 0.202·3.000
        assert!((retail_to_gate(3.0, &diesel_tx()) - 1.950).abs() < 1e-12);
    }

    #[test]
    fn zero_factors_are_identity() {
        assert_eq!(retail_to_gate(2.37, &FuelAdjustment::default()), 2.37);
    }

    #[test]
    fn jet_uses_per_gallon_items() {
        let jet = FuelAdjustment {
            tax_usd_per_gal: 0.219,
            pct_of_retail: 0.0,
            marketing_usd_per_gal: 0.06,
            distribution_usd_per_gal: 0.12,
        };
        assert!((retail_to_gate(2.5, &jet) - (2.5 - 0.219 - 0.18)).abs() < 1e-12);
    }

    #[test]
    fn floor_at_zero() {
        assert_eq!(retail_to_gate(0.3, &diesel_tx()), 0.0);
    }

    #[test]
    fn naphtha_ratio_regression() {
        assert_eq!(naphtha_track(&[1.0, 2.0], 1.0), vec![1.0, 2.0]);
        let pairs: Vec<(f64, f64)> = (1..20).map(|k| (0.8 * k as f64, k as f64)).collect();
        assert!((fit_naphtha_ratio(&pairs).unwrap() - 0.8).abs() < 1e-12);
        assert!(fit_naphtha_ratio(&[]).is_err());
    }

    #[test]
    fn retail_gaps_are_interpolated() {
        let mut pts = BTreeMap::new();
        pts.insert(Fuel::Diesel, BTreeMap::from([(2022, 3.0), (2025, 3.6)]));
        pts.insert(Fuel::Jet, BTreeMap::from([(2022, 2.0), (2025, 2.0)]));
        pts.insert(Fuel::Gasoline, BTreeMap::from([(2022, 3.0), (2025, 3.0)]));
        let t = RetailTrack::from_points("r", &pts).unwrap();
        assert_eq!(t.last_year(), 2025);
        assert!((t.fuel(Fuel::Diesel).unwrap()[1] - 3.2).abs() < 1e-12);
        let gate = gate_track(&t, &AdjustmentFactors::default(), 0.5).unwrap();
        assert_eq!(gate.price(2023).unwrap().naphtha, 1.5);
        assert!(gate.price(2026).is_err());
        let m = gate.mean(2022, 2025).unwrap();
        assert!((m.jet - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gate_csv_long_format() {
        let t = FuelPriceTrack {
            region: "r".into(),
            first_year: 2022,
            prices: vec![Products {
                naphtha: 0.7,
                jet: 1.9,
                diesel: 1.8,
            }],
            naphtha_ratio: 1.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        t.write_csv(&p).unwrap();
        assert_eq!(
            std::fs::read_to_string(p).unwrap(),
            "year,fuel,usd_per_gal\n2022,naphtha,0.7\n2022,jet,1.9\n2022,diesel,1.8\n"
        );
    }

    proptest! {
        #[test]
        fn gate_is_monotone_and_below_retail(
            a in 0.01f64..10.0, b in 0.01f64..10.0,
            tax in 0.0f64..1.0, pct in 0.0f64..0.5, mk in 0.0f64..0.2, dist in 0.0f64..0.5,
        ) {
            let adj = FuelAdjustment {
                tax_usd_per_gal: tax,
                pct_of_retail: pct,
                marketing_usd_per_gal: mk,
                distribution_usd_per_gal: dist,
            };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(retail_to_gate(lo, &adj) <= retail_to_gate(hi, &adj));
            if tax + pct + mk + dist > 0.0 {
                prop_assert!(retail_to_gate(hi, &adj) < hi);
            }
        }
    }
}
