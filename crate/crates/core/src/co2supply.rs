//! CO₂ feedstock supply curves: per-source capture and pipeline cost, merit
//! ordered and accumulated up to the site's demand bound.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Bioethanol,
    Ammonia,
    NaturalGas,
    Coal,
    Hydrogen,
    IronSteel,
    Cement,
}

impl SourceKind {
    pub const ALL: [SourceKind; 7] = [
        SourceKind::Bioethanol,
        SourceKind::Ammonia,
        SourceKind::NaturalGas,
        SourceKind::Coal,
        SourceKind::Hydrogen,
        SourceKind::IronSteel,
        SourceKind::Cement,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::Bioethanol => "bioethanol",
            SourceKind::Ammonia => "ammonia",
            SourceKind::NaturalGas => "natural_gas",
            SourceKind::Coal => "coal",
            SourceKind::Hydrogen => "hydrogen",
            SourceKind::IronSteel => "iron_steel",
            SourceKind::Cement => "cement",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SourceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::UnknownSourceKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Co2Source {
    pub id: String,
    pub kind: SourceKind,
    pub capacity_tpy: f64,
    pub concentration_pct: f64,
    pub distance_km: f64,
}

impl Co2Source {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_tpy > 0.0)
            || !(self.concentration_pct > 0.0 && self.concentration_pct <= 100.0)
            || !(self.distance_km >= 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "source {}: need capacity > 0, 0 < concentration <= 100, distance >= 0",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct SourceRow {
    id: String,
    kind: String,
    capacity_tpy: f64,
    concentration_pct: f64,
    distance_km: f64,
}

pub fn read_sources(path: impl AsRef<Path>) -> Result<Vec<Co2Source>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<SourceRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let source = Co2Source {
            kind: row.kind.parse()?,
            id: row.id,
            capacity_tpy: row.capacity_tpy,
            concentration_pct: row.concentration_pct,
            distance_km: row.distance_km,
        };
        source.validate()?;
        out.push(source);
    }
    Ok(out)
}

pub fn write_sources(sources: &[Co2Source], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["id", "kind", "capacity_tpy", "concentration_pct", "distance_km"])
        .map_err(|e| Error::csv(path, e))?;
    for s in sources {
        w.write_record(&[
            s.id.clone(),
            s.kind.to_string(),
            s.capacity_tpy.to_string(),
            s.concentration_pct.to_string(),
            s.distance_km.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindCost {
    pub capture_usd_per_t: f64,
    pub compression_usd_per_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureCostTable {
    /// Streams at or above this CO₂ concentration only need compression.
    pub purity_threshold_pct: f64,
    pub costs: BTreeMap<SourceKind, KindCost>,
}

#[derive(Debug, Deserialize)]
struct CostRow {
    kind: String,
    capture_usd_per_t: f64,
    compression_usd_per_t: f64,
}

impl CaptureCostTable {
    pub const DEFAULT_PURITY_PCT: f64 = 95.0;

    /// Reads `kind,capture_usd_per_t,compression_usd_per_t`.
    pub fn read_csv(path: impl AsRef<Path>, purity_threshold_pct: f64) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut costs = BTreeMap::new();
        for row in rdr.deserialize::<CostRow>() {
            let row = row.map_err(|e| Error::csv(path, e))?;
            costs.insert(
                row.kind.parse()?,
                KindCost {
                    capture_usd_per_t: row.capture_usd_per_t,
                    compression_usd_per_t: row.compression_usd_per_t,
                },
            );
        }
        Ok(Self {
            purity_threshold_pct,
            costs,
        })
    }
}

pub fn capture_cost(source: &Co2Source, table: &CaptureCostTable) -> Result<f64> {
    let cost = table
        .costs
        .get(&source.kind)
        .ok_or_else(|| Error::UnknownSourceKind(format!("{} (not in cost table)", source.kind)))?;
    Ok(if source.concentration_pct >= table.purity_threshold_pct {
        cost.compression_usd_per_t
    } else {
        cost.capture_usd_per_t + cost.compression_usd_per_t
    })
}

/// Pipeline cost surrogate `a·d·flow^(−β) + b·d + c`, $/t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub beta: f64,
}

pub fn transport_cost(distance_km: f64, flow_tpy: f64, p: &TransportParams) -> f64 {
    debug_assert!(distance_km >= 0.0 && flow_tpy > 0.0);
    p.a * distance_km * flow_tpy.powf(-p.beta) + p.b * distance_km + p.c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportReference {
    pub distance_km: f64,
    pub flow_tpy: f64,
    pub cost_usd_per_t: f64,
}

pub fn read_transport_references(path: impl AsRef<Path>) -> Result<Vec<TransportReference>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::csv(path, e)))
        .collect()
}

/// Least-squares fit of the surrogate: linear in (a, b, c) for each β on a
/// 0.005 grid over [0, 0.995], keeping the best.
pub fn fit_transport(points: &[TransportReference]) -> Result<TransportParams> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: points.len(),
        });
    }
    let target = DVector::from_iterator(points.len(), points.iter().map(|r| r.cost_usd_per_t));
    let mut best: Option<(f64, TransportParams)> = None;
    for step in 0..200 {
        let beta = step as f64 * 0.005;
        let design = DMatrix::from_fn(points.len(), 3, |i, j| match j {
            0 => points[i].distance_km * points[i].flow_tpy.powf(-beta),
            1 => points[i].distance_km,
            _ => 1.0,
        });
        let Ok(coef) = design.clone().svd(true, true).solve(&target, 1e-12) else {
            continue;
        };
        let sse = (&design * &coef - &target).norm_squared();
        if best.as_ref().map_or(true, |(b, _)| sse < *b) {
            best = Some((
                sse,
                TransportParams {
                    a: coef[0],
                    b: coef[1],
                    c: coef[2],
                    beta,
                },
            ));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::InvalidInput("transport reference points are degenerate".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub cum_qty_tpy: f64,
    pub cum_cost_usd: f64,
    pub avg_cost_usd_per_t: f64,
    /// Unit cost of the last source in the segment ending here.
    pub marginal_cost_usd_per_t: f64,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyCurve {
    pub breakpoints: Vec<Breakpoint>,
}

/// A priced offer: source id, unit cost $/t, available t/yr.
#[derive(Debug, Clone, PartialEq)]
pub struct Offer {
    pub id: String,
    pub unit_cost: f64,
    pub capacity_tpy: f64,
}

pub fn price_sources(
    sources: &[Co2Source],
    table: &CaptureCostTable,
    transport: &TransportParams,
) -> Result<Vec<Offer>> {
    sources
        .iter()
        .map(|s| {
            s.validate()?;
            Ok(Offer {
                id: s.id.clone(),
                unit_cost: capture_cost(s, table)?
                    + transport_cost(s.distance_km, s.capacity_tpy, transport),
                capacity_tpy: s.capacity_tpy,
            })
        })
        .collect()
}

/// Merit-orders offers by unit cost (ties by id) and accumulates to `bound_tpy`.
/// The last offer is taken only partially if it overshoots.
pub fn accumulate_offers(mut offers: Vec<Offer>, bound_tpy: f64) -> Result<SupplyCurve> {
    if !(bound_tpy > 0.0) {
        return Err(Error::InvalidInput("demand bound must be positive".into()));
    }
    let available: f64 = offers.iter().map(|o| o.capacity_tpy).sum();
    if available < bound_tpy {
        return Err(Error::SupplyShortfall {
            available_tpy: available,
            required_tpy: bound_tpy,
            deficit_tpy: bound_tpy - available,
        });
    }
    offers.sort_by(|a, b| a.unit_cost.total_cmp(&b.unit_cost).then_with(|| a.id.cmp(&b.id)));
    let mut breakpoints = Vec::new();
    let (mut qty, mut cost) = (0.0, 0.0);
    for offer in offers {
        if qty >= bound_tpy {
            break;
        }
        let take = offer.capacity_tpy.min(bound_tpy - qty);
        qty += take;
        cost += offer.unit_cost * take;
        breakpoints.push(Breakpoint {
            cum_qty_tpy: qty,
            cum_cost_usd: cost,
            avg_cost_usd_per_t: cost / qty,
            marginal_cost_usd_per_t: offer.unit_cost,
            source_id: offer.id,
        });
    }
    Ok(SupplyCurve { breakpoints })
}

pub fn build_supply_curve(
    sources: &[Co2Source],
    bound_tpy: f64,
    table: &CaptureCostTable,
    transport: &TransportParams,
) -> Result<SupplyCurve> {
    accumulate_offers(price_sources(sources, table, transport)?, bound_tpy)
}

/// Relative slack when comparing a demand to the curve extent.
const EXTENT_TOLERANCE: f64 = 1e-9;

impl SupplyCurve {
    pub fn extent_tpy(&self) -> f64 {
        self.breakpoints.last().map_or(0.0, |b| b.cum_qty_tpy)
    }

    /// Annual cost, $/yr, of buying `quantity_tpy` in merit order: the
    /// integral of the marginal cost from zero to the quantity.
    pub fn feedstock_cost(&self, quantity_tpy: f64) -> Result<f64> {
        if quantity_tpy <= 0.0 {
            return Ok(0.0);
        }
        let extent = self.extent_tpy();
        if quantity_tpy > extent * (1.0 + EXTENT_TOLERANCE) {
            return Err(Error::BeyondSupplyCurve {
                requested_tpy: quantity_tpy,
                extent_tpy: extent,
            });
        }
        let k = self
            .breakpoints
            .partition_point(|b| b.cum_qty_tpy < quantity_tpy)
            .min(self.breakpoints.len() - 1);
        let (q0, c0) = if k == 0 {
            (0.0, 0.0)
        } else {
            let prev = &self.breakpoints[k - 1];
            (prev.cum_qty_tpy, prev.cum_cost_usd)
        };
        Ok(c0 + self.breakpoints[k].marginal_cost_usd_per_t * (quantity_tpy - q0))
    }

    pub fn average_cost(&self, quantity_tpy: f64) -> Result<f64> {
        if quantity_tpy <= 0.0 {
            return Ok(self.breakpoints.first().map_or(0.0, |b| b.marginal_cost_usd_per_t));
        }
        Ok(self.feedstock_cost(quantity_tpy)? / quantity_tpy)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["cum_qty_tpy", "avg_cost_usd_per_t", "marginal_source"])
            .map_err(|e| Error::csv(path, e))?;
        for b in &self.breakpoints {
            w.write_record(&[
                b.cum_qty_tpy.to_string(),
                b.avg_cost_usd_per_t.to_string(),
                b.source_id.clone(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn offer(id: &str, unit_cost: f64, capacity_tpy: f64) -> Offer {
        Offer {
            id: id.into(),
            unit_cost,
            capacity_tpy,
        }
    }

    fn table() -> CaptureCostTable {
        let costs = SourceKind::ALL
            .into_iter()
            .map(|k| {
                (
                    k,
                    KindCost {
                        capture_usd_per_t: 40.0,
                        compression_usd_per_t: 12.0,
                    },
                )
            })
            .collect();
        CaptureCostTable {
            purity_threshold_pct: 95.0,
            costs,
        }
    }

    fn source(kind: SourceKind, pct: f64) -> Co2Source {
        Co2Source {
            id: "s".into(),
            kind,
            capacity_tpy: 1e5,
            concentration_pct: pct,
            distance_km: 10.0,
        }
    }

    #[test]
    fn purity_rule() {
        let t = table();
        assert_eq!(capture_cost(&source(SourceKind::Bioethanol, 99.8), &t).unwrap(), 12.0);
        assert_eq!(capture_cost(&source(SourceKind::Cement, 22.4), &t).unwrap(), 52.0);
        let open = CaptureCostTable {
            purity_threshold_pct: 0.0,
            ..t.clone()
        };
        assert_eq!(capture_cost(&source(SourceKind::Cement, 22.4), &open).unwrap(), 12.0);
        let empty = CaptureCostTable {
            costs: BTreeMap::new(),
            ..t
        };
        assert!(capture_cost(&source(SourceKind::Coal, 12.0), &empty).is_err());
        assert!(matches!("peat".parse::<SourceKind>(), Err(Error::UnknownSourceKind(_))));
    }

    #[test]
    fn transport_surrogate_shape() {
        let p = TransportParams {
            a: 2000.0,
            b: 0.01,
            c: 3.0,
            beta: 0.5,
        };
        assert_eq!(transport_cost(0.0, 1e5, &p), 3.0);
        assert!(transport_cost(100.0, 2e5, &p) < transport_cost(100.0, 1e5, &p));
    }

    #[test]
    fn surrogate_fit_recovers_planted_parameters() {
        let truth = TransportParams {
            a: 900.0,
            b: 0.02,
            c: 4.0,
            beta: 0.45,
        };
        let refs: Vec<TransportReference> = [10.0, 50.0, 120.0, 300.0]
            .iter()
            .flat_map(|&d| {
                [1e4, 1e5, 1e6].map(|f| TransportReference {
                    distance_km: d,
                    flow_tpy: f,
                    cost_usd_per_t: transport_cost(d, f, &truth),
                })
            })
            .collect();
        let fit = fit_transport(&refs).unwrap();
        assert!((fit.beta - 0.45).abs() < 1e-9);
        for r in &refs {
            let c = transport_cost(r.distance_km, r.flow_tpy, &fit);
            assert!((c - r.cost_usd_per_t).abs() < 1e-6 * r.cost_usd_per_t);
        }
    }

    #[test]
    fn two_source_hand_example() {
        let curve = accumulate_offers(vec![offer("b", 30.0, 1.0), offer("a", 10.0, 1.0)], 2.0).unwrap();
        let pts: Vec<(f64, f64)> = curve
            .breakpoints
            .iter()
            .map(|b| (b.cum_qty_tpy, b.avg_cost_usd_per_t))
            .collect();
        assert_eq!(pts, vec![(1.0, 10.0), (2.0, 20.0)]);
        assert_eq!(curve.feedstock_cost(0.0).unwrap(), 0.0);
        assert_eq!(curve.feedstock_cost(1.0).unwrap(), 10.0);
        // half-way into the second source: 10 + 0.5·30
        assert_eq!(curve.feedstock_cost(1.5).unwrap(), 25.0);
        assert!(matches!(
            curve.feedstock_cost(2.5),
            Err(Error::BeyondSupplyCurve { .. })
        ));
    }

    #[test]
    fn single_source_is_flat() {
        let curve = accumulate_offers(vec![offer("a", 17.0, 5.0)], 3.0).unwrap();
        assert_eq!(curve.breakpoints.len(), 1);
        assert_eq!(curve.extent_tpy(), 3.0);
        assert_eq!(curve.average_cost(1.7).unwrap(), 17.0);
    }

    #[test]
    fn shortfall_reports_deficit() {
        match accumulate_offers(vec![offer("a", 1.0, 2.0)], 5.0) {
            Err(Error::SupplyShortfall { deficit_tpy, .. }) => assert_eq!(deficit_tpy, 3.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let sources = vec![
            Co2Source {
                id: "eth-1".into(),
                kind: SourceKind::Bioethanol,
                capacity_tpy: 2e5,
                concentration_pct: 99.8,
                distance_km: 40.0,
            },
            Co2Source {
                id: "cem-1".into(),
                kind: SourceKind::Cement,
                capacity_tpy: 1e6,
                concentration_pct: 22.4,
                distance_km: 80.0,
            },
        ];
        let path = dir.path().join("reg.csv");
        write_sources(&sources, &path).unwrap();
        assert_eq!(read_sources(&path).unwrap(), sources);
        let curve = accumulate_offers(vec![offer("a", 10.0, 1.0)], 1.0).unwrap();
        let cpath = dir.path().join("curve.csv");
        curve.write_csv(&cpath).unwrap();
        let text = std::fs::read_to_string(cpath).unwrap();
        assert_eq!(text, "cum_qty_tpy,avg_cost_usd_per_t,marginal_source\n1,10,a\n");
    }

    fn offers_strategy() -> impl Strategy<Value = Vec<Offer>> {
        prop::collection::vec((1u32..200, 1u32..50), 1..25).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (c, q))| offer(&format!("s{i:02}"), c as f64, q as f64))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn averages_match_rational_arithmetic(offers in offers_strategy()) {
            let total: f64 = offers.iter().map(|o| o.capacity_tpy).sum();
            let curve = accumulate_offers(offers.clone(), total).unwrap();
            let mut sorted = offers;
            sorted.sort_by(|a, b| a.unit_cost.total_cmp(&b.unit_cost).then_with(|| a.id.cmp(&b.id)));
            let (mut num, mut den) = (Ratio::from_integer(0i64), Ratio::from_integer(0i64));
            for (o, b) in sorted.iter().zip(&curve.breakpoints) {
                num += Ratio::from_integer((o.unit_cost * o.capacity_tpy) as i64);
                den += Ratio::from_integer(o.capacity_tpy as i64);
                let exact = num / den;
                let approx = *exact.numer() as f64 / *exact.denom() as f64;
                prop_assert!((b.avg_cost_usd_per_t - approx).abs() <= 1e-12 * approx);
            }
        }

        #[test]
        fn permutation_invariant_and_monotone(offers in offers_strategy(), seed in any::<u64>()) {
            let total: f64 = offers.iter().map(|o| o.capacity_tpy).sum();
            let bound = (total * 0.7).max(1.0);
            let a = accumulate_offers(offers.clone(), bound).unwrap();
            let mut shuffled = offers.clone();
            let n = shuffled.len();
            for i in 0..n {
                shuffled.swap(i, (seed as usize).wrapping_add(i * 7919) % n);
            }
            prop_assert_eq!(&a, &accumulate_offers(shuffled, bound).unwrap());
            for w in a.breakpoints.windows(2) {
                prop_assert!(w[1].cum_qty_tpy > w[0].cum_qty_tpy);
                prop_assert!(w[1].avg_cost_usd_per_t >= w[0].avg_cost_usd_per_t);
            }
        }

        #[test]
        fn cheaper_entrant_lowers_averages(offers in offers_strategy(), q in 1u32..20) {
            let total: f64 = offers.iter().map(|o| o.capacity_tpy).sum();
            let base = accumulate_offers(offers.clone(), total).unwrap();
            let mut more = offers;
            more.push(offer("zz", 0.5, q as f64));
            let with = accumulate_offers(more, total).unwrap();
            for b in &base.breakpoints {
                prop_assert!(with.average_cost(b.cum_qty_tpy).unwrap() <= b.avg_cost_usd_per_t + 1e-12);
            }
        }

        #[test]
        fn feedstock_cost_integrates_marginals(offers in offers_strategy(), frac in 0.0f64..1.0) {
            let total: f64 = offers.iter().map(|o| o.capacity_tpy).sum();
            let curve = accumulate_offers(offers, total).unwrap();
            let q = frac * total;
            // integrate the merit-order step function in small slices
            let mut integral = 0.0;
            let mut lo = 0.0;
            for b in &curve.breakpoints {
                let hi = b.cum_qty_tpy.min(q);
                if hi > lo {
                    integral += b.marginal_cost_usd_per_t * (hi - lo);
                }
                lo = b.cum_qty_tpy;
            }
            prop_assert!((curve.feedstock_cost(q).unwrap() - integral).abs() <= 1e-9 * integral.max(1.0));
        }
    }
}
