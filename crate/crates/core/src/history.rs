//! Monthly real-return histories: CSV ingestion and model-generated series.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::market::{path_rng, MarketParams, ReturnSampler};

/// Calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthId {
    pub year: i32,
    pub month: u32,
}

impl MonthId {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Data(format!("month {month} out of range")));
        }
        Ok(MonthId { year, month })
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            MonthId {
                year: self.year + 1,
                month: 1,
            }
        } else {
            MonthId {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    /// Parses `YYYY-MM`, `YYYY-MM-DD`, `YYYY/MM/DD`, `YYYYMM` or `YYYYMMDD`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Data(format!("unrecognised date `{s}`"));
        let (year, month) = if s.contains('-') || s.contains('/') {
            let mut parts = s.split(['-', '/']);
            let y = parts.next().ok_or_else(bad)?;
            let m = parts.next().ok_or_else(bad)?;
            (y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
        } else if (s.len() == 6 || s.len() == 8) && s.bytes().all(|b| b.is_ascii_digit()) {
            (
                s[..4].parse().map_err(|_| bad())?,
                s[4..6].parse().map_err(|_| bad())?,
            )
        } else {
            return Err(bad());
        };
        MonthId::new(year, month)
    }
}

impl fmt::Display for MonthId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Monthly log returns; `timestamps[i]` is the month in which return `i`
/// ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub timestamps: Vec<MonthId>,
    pub log_returns: Vec<f64>,
    pub dt: f64,
}

impl ReturnSeries {
    pub fn new(timestamps: Vec<MonthId>, log_returns: Vec<f64>) -> Result<Self> {
        if timestamps.len() != log_returns.len() {
            return Err(invalid("timestamps and returns differ in length"));
        }
        for w in timestamps.windows(2) {
            if w[1] != w[0].next() {
                return Err(Error::Data(format!(
                    "missing month between {} and {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(i) = log_returns.iter().position(|r| !r.is_finite()) {
            return Err(Error::Data(format!("non-finite return at index {i}")));
        }
        Ok(ReturnSeries {
            timestamps,
            log_returns,
            dt: 1.0 / 12.0,
        })
    }

    /// Series with synthetic consecutive month labels starting 1926-01.
    pub fn from_returns(log_returns: Vec<f64>) -> Self {
        let mut timestamps = Vec::with_capacity(log_returns.len());
        let mut m = MonthId {
            year: 1926,
            month: 1,
        };
        for _ in 0..log_returns.len() {
            timestamps.push(m);
            m = m.next();
        }
        ReturnSeries {
            timestamps,
            log_returns,
            dt: 1.0 / 12.0,
        }
    }

    pub fn len(&self) -> usize {
        self.log_returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_returns.is_empty()
    }

    pub fn years(&self) -> f64 {
        self.len() as f64 * self.dt
    }
}

/// Aligned stock and bond monthly real log returns.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedHistory {
    pub stock: ReturnSeries,
    pub bond: ReturnSeries,
}

impl PairedHistory {
    pub fn new(stock: ReturnSeries, bond: ReturnSeries) -> Result<Self> {
        if stock.timestamps != bond.timestamps {
            return Err(Error::Data("stock and bond series are not aligned".into()));
        }
        if stock.is_empty() {
            return Err(Error::Data("history is empty".into()));
        }
        Ok(PairedHistory { stock, bond })
    }

    pub fn len(&self) -> usize {
        self.stock.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stock.is_empty()
    }
}

#[derive(Deserialize)]
struct MarketRow {
    date: String,
    stock_index: f64,
    bill_index: f64,
    cpi: f64,
}

/// Reads monthly nominal index levels and the CPI (columns
/// `date,stock_index,bill_index,cpi`) and returns real monthly log returns.
pub fn ingest_market_csv_reader<R: std::io::Read>(reader: R) -> Result<PairedHistory> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut months = Vec::new();
    let mut real_s = Vec::new();
    let mut real_b = Vec::new();
    for (line, row) in rdr.deserialize().enumerate() {
        let row: MarketRow = row?;
        if !(row.stock_index > 0.0 && row.bill_index > 0.0 && row.cpi > 0.0) {
            return Err(Error::Data(format!(
                "non-positive level on data row {}",
                line + 1
            )));
        }
        months.push(MonthId::parse(&row.date)?);
        real_s.push(row.stock_index / row.cpi);
        real_b.push(row.bill_index / row.cpi);
    }
    if months.len() < 2 {
        return Err(Error::Data("need at least two monthly levels".into()));
    }
    for w in months.windows(2) {
        if w[1] != w[0].next() {
            return Err(Error::Data(format!(
                "missing month between {} and {}",
                w[0], w[1]
            )));
        }
    }
    let log_ret = |v: &[f64]| v.windows(2).map(|w| (w[1] / w[0]).ln()).collect::<Vec<_>>();
    let stamps = months[1..].to_vec();
    PairedHistory::new(
        ReturnSeries::new(stamps.clone(), log_ret(&real_s))?,
        ReturnSeries::new(stamps, log_ret(&real_b))?,
    )
}

pub fn ingest_market_csv(path: impl AsRef<Path>) -> Result<PairedHistory> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open market data {}: {e}", path.display())))?;
    ingest_market_csv_reader(file)
}

/// Monthly history of `years` years drawn from the parametric model.
pub fn simulate_history(params: &MarketParams, years: usize, seed: u64) -> Result<PairedHistory> {
    let sampler = ReturnSampler::new(params, 1.0 / 12.0)?;
    let mut rng = path_rng(seed, 0);
    let (s, b): (Vec<f64>, Vec<f64>) = (0..years * 12)
        .map(|_| sampler.sample_log(&mut rng))
        .unzip();
    PairedHistory::new(ReturnSeries::from_returns(s), ReturnSeries::from_returns(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_date_forms() {
        for s in ["1926-01", "1926-01-31", "1926/01/30", "192601", "19260131"] {
            assert_eq!(
                MonthId::parse(s).unwrap(),
                MonthId {
                    year: 1926,
                    month: 1
                }
            );
        }
        assert!(MonthId::parse("1926-13").is_err());
        assert!(MonthId::parse("Jan 1926").is_err());
    }

    #[test]
    fn constant_levels_give_zero_returns() {
        let csv = "date,stock_index,bill_index,cpi\n2000-01,5,7,100\n2000-02,5,7,100\n";
        let h = ingest_market_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(h.stock.log_returns, vec![0.0]);
        assert_eq!(h.bond.log_returns, vec![0.0]);
        assert_eq!(
            h.stock.timestamps,
            vec![MonthId {
                year: 2000,
                month: 2
            }]
        );
    }

    #[test]
    fn deflation_cancels_inflation() {
        let csv = "date,stock_index,bill_index,cpi\n2000-12,10,1,50\n2001-01,20,1.5,100\n";
        let h = ingest_market_csv_reader(csv.as_bytes()).unwrap();
        assert!(h.stock.log_returns[0].abs() < 1e-15);
        assert!((h.bond.log_returns[0] - (0.75f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_gaps_and_bad_levels() {
        let gap = "date,stock_index,bill_index,cpi\n2000-01,5,7,100\n2000-03,5,7,100\n";
        assert!(matches!(
            ingest_market_csv_reader(gap.as_bytes()),
            Err(Error::Data(_))
        ));
        let neg = "date,stock_index,bill_index,cpi\n2000-01,5,7,100\n2000-02,0,7,100\n";
        assert!(matches!(
            ingest_market_csv_reader(neg.as_bytes()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn ninety_three_years_gives_1115_returns() {
        let mut csv = String::from("date,stock_index,bill_index,cpi\n");
        let mut m = MonthId {
            year: 1926,
            month: 1,
        };
        for k in 0..1116 {
            csv.push_str(&format!("{m},{},{},{}\n", 1.0 + k as f64 * 0.01, 1.0, 1.0));
            m = m.next();
        }
        let h = ingest_market_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(h.len(), 1115);
        assert_eq!(
            h.stock.timestamps.last().unwrap(),
            &MonthId {
                year: 2018,
                month: 12
            }
        );
    }
}
