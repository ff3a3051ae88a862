use std::path::Path;

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hourly electricity prices in $/MWh on a regular UTC grid.
///
/// Negative prices are allowed; non-finite values are not.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    start: DateTime<Utc>,
    prices: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PriceRecord {
    timestamp: String,
    price_usd_per_mwh: f64,
}

impl PriceSeries {
    pub fn new(start: DateTime<Utc>, prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::InvalidInput("price series is empty".into()));
        }
        if let Some(index) = prices.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { start, prices })
    }

    /// Builds a series from explicit timestamps, which must advance by exactly one hour.
    pub fn from_records(timestamps: &[DateTime<Utc>], prices: Vec<f64>) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return Err(Error::InvalidInput(format!(
                "{} timestamps for {} prices",
                timestamps.len(),
                prices.len()
            )));
        }
        for (i, pair) in timestamps.windows(2).enumerate() {
            let step = pair[1] - pair[0];
            if step <= Duration::zero() {
                return Err(Error::Timestamp {
                    row: i + 1,
                    reason: "timestamps must be strictly increasing".into(),
                });
            }
            if step != Duration::hours(1) {
                return Err(Error::Timestamp {
                    row: i + 1,
                    reason: format!("expected an hourly step, found {} minutes", step.num_minutes()),
                });
            }
        }
        let start = *timestamps
            .first()
            .ok_or_else(|| Error::InvalidInput("price series is empty".into()))?;
        Self::new(start, prices)
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn timestamp(&self, hour: usize) -> DateTime<Utc> {
        self.start + Duration::hours(hour as i64)
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn into_prices(self) -> Vec<f64> {
        self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Reads a `timestamp,price_usd_per_mwh` CSV.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut stamps = Vec::new();
        let mut prices = Vec::new();
        for (row, rec) in reader.deserialize::<PriceRecord>().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let ts = DateTime::parse_from_rfc3339(rec.timestamp.trim())
                .map_err(|e| Error::Timestamp {
                    row,
                    reason: format!("{}: {e}", rec.timestamp),
                })?
                .with_timezone(&Utc);
            stamps.push(ts);
            prices.push(rec.price_usd_per_mwh);
        }
        Self::from_records(&stamps, prices)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        for (i, &p) in self.prices.iter().enumerate() {
            writer
                .serialize(PriceRecord {
                    timestamp: self.timestamp(i).to_rfc3339_opts(SecondsFormat::Secs, true),
                    price_usd_per_mwh: p,
                })
                .map_err(|e| Error::csv(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn rejects_nan_and_empty() {
        assert!(matches!(
            PriceSeries::new(t0(), vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(PriceSeries::new(t0(), vec![]).is_err());
    }

    #[test]
    fn negative_prices_are_fine() {
        let s = PriceSeries::new(t0(), vec![-66.2, 12.0]).unwrap();
        assert_eq!(s.prices()[0], -66.2);
    }

    #[test]
    fn rejects_non_hourly_or_decreasing_stamps() {
        let a = t0();
        let stamps = [a, a + Duration::hours(2)];
        assert!(matches!(
            PriceSeries::from_records(&stamps, vec![1.0, 2.0]),
            Err(Error::Timestamp { row: 1, .. })
        ));
        let stamps = [a, a];
        assert!(PriceSeries::from_records(&stamps, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let s = PriceSeries::new(t0(), vec![1.5, -2.25, 8996.8]).unwrap();
        s.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("timestamp,price_usd_per_mwh\n2019-01-01T00:00:00Z,1.5\n"));
        assert_eq!(PriceSeries::read_csv(&path).unwrap(), s);
    }
}
