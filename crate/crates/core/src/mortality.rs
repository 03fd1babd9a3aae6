//! Period mortality tables and the conditional longevity horizon.

use std::path::Path;

use serde::Deserialize;

use crate::error::{invalid, Error, Result};

/// One-year death probabilities indexed by integer age.
///
/// Survival is built by cumulative products of `1 - q`, interpolated
/// linearly between integer ages, and is zero beyond `terminal_age`.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityTable {
    first_age: u32,
    q: Vec<f64>,
    survival: Vec<f64>,
}

#[derive(Deserialize)]
struct Row {
    age: u32,
    qx: f64,
}

impl MortalityTable {
    /// Builds a table from `(age, q)` rows. Ages must be contiguous and the
    /// last row (the terminal age) must have `q = 1`.
    pub fn new(entries: &[(u32, f64)]) -> Result<Self> {
        if entries.len() < 2 {
            return Err(invalid("mortality table needs at least two ages"));
        }
        for w in entries.windows(2) {
            if w[1].0 != w[0].0 + 1 {
                return Err(Error::Data(format!(
                    "mortality ages must be contiguous and increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(age, q)) = entries.iter().find(|(_, q)| !(0.0..=1.0).contains(q)) {
            return Err(Error::Data(format!(
                "q = {q} at age {age} is outside [0, 1]"
            )));
        }
        let &(terminal, q_last) = entries.last().expect("non-empty");
        if q_last != 1.0 {
            return Err(Error::Data(format!(
                "q at terminal age {terminal} must be 1, got {q_last}"
            )));
        }
        let q: Vec<f64> = entries.iter().map(|&(_, q)| q).collect();
        let mut survival = Vec::with_capacity(q.len());
        let mut s = 1.0;
        for &qx in &q {
            survival.push(s);
            s *= 1.0 - qx;
        }
        Ok(MortalityTable {
            first_age: entries[0].0,
            q,
            survival,
        })
    }

    /// Reads a two-column CSV with header `age,qx`.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "age" || &headers[1] != "qx" {
            return Err(Error::Data(format!(
                "mortality CSV header must be `age,qx`, got {headers:?}"
            )));
        }
        let mut entries = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            entries.push((row.age, row.qx));
        }
        Self::new(&entries)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| {
            Error::Data(format!(
                "cannot open mortality table {}: {e}",
                path.display()
            ))
        })?;
        Self::from_csv_reader(file)
    }

    /// Gompertz law `mu(x) = B c^x` with `B c^x0 / ln c = level` and growth
    /// `c`, tabulated as annual `q` up to `terminal_age`.
    pub fn gompertz(
        first_age: u32,
        terminal_age: u32,
        anchor_age: f64,
        level: f64,
        growth: f64,
    ) -> Result<Self> {
        if terminal_age <= first_age || !(growth > 1.0) || !(level > 0.0) {
            return Err(invalid(
                "gompertz table needs growth > 1, level > 0, terminal > first age",
            ));
        }
        let cumulative = |x: f64| level * (growth.powf(x - anchor_age) - 1.0);
        let mut entries: Vec<(u32, f64)> = (first_age..terminal_age)
            .map(|a| {
                let h = cumulative(a as f64 + 1.0) - cumulative(a as f64);
                (a, -(-h).exp_m1())
            })
            .collect();
        entries.push((terminal_age, 1.0));
        Self::new(&entries)
    }

    /// Stand-in for a male pensioner table: Gompertz mortality fitted so
    /// that a 65-year-old has a 13% chance of reaching 95 and a 2% chance of
    /// reaching 100. Used when no table file is configured.
    pub fn standin_male() -> Self {
        Self::gompertz(
            50,
            120,
            65.0,
            0.044_622_189_066_812_53,
            1.136_712_797_826_633_6,
        )
        .expect("fixed parameters are valid")
    }

    pub fn first_age(&self) -> u32 {
        self.first_age
    }

    pub fn terminal_age(&self) -> u32 {
        self.first_age + self.q.len() as u32 - 1
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.q
            .iter()
            .enumerate()
            .map(|(i, &q)| (self.first_age + i as u32, q))
    }

    /// Unconditional survival from the first tabulated age to `age`.
    pub fn survival(&self, age: f64) -> f64 {
        let first = self.first_age as f64;
        let terminal = self.terminal_age() as f64;
        if age <= first {
            return 1.0;
        }
        if age > terminal {
            return 0.0;
        }
        let k = ((age - first).floor() as usize).min(self.survival.len() - 1);
        let frac = age - first - k as f64;
        if frac == 0.0 || k + 1 >= self.survival.len() {
            return self.survival[k];
        }
        self.survival[k] + frac * (self.survival[k + 1] - self.survival[k])
    }

    /// Probability that a life aged `from` survives to `to`.
    pub fn survival_probability(&self, from: f64, to: f64) -> Result<f64> {
        let base = self.survival(from);
        if base <= 0.0 {
            return Err(Error::Domain(format!(
                "cohort aged {from} is already extinct"
            )));
        }
        Ok(self.survival(to) / base)
    }
}

/// Time `T*` (years since retirement at `x0`) by which all but `fraction`
/// of the cohort alive at age `x0 + t` is expected to have died.
pub fn conditional_horizon(table: &MortalityTable, x0: f64, t: f64, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid(format!(
            "survival fraction {fraction} must lie in (0, 1]"
        )));
    }
    let age = x0 + t;
    let terminal = table.terminal_age() as f64;
    if age < table.first_age() as f64 {
        return Err(Error::Domain(format!(
            "age {age} precedes the mortality table"
        )));
    }
    if age >= terminal {
        return Err(Error::Domain(format!(
            "cohort aged {age} is already extinct"
        )));
    }
    let base = table.survival(age);
    if base <= 0.0 {
        return Err(Error::Domain(format!(
            "cohort aged {age} is already extinct"
        )));
    }
    let target = fraction * base;
    if base <= target {
        return Ok(t);
    }
    // walk integer-age breakpoints; survival is linear between them
    let mut lo = age;
    let mut s_lo = base;
    loop {
        let hi = (lo.floor() + 1.0).min(terminal);
        let s_hi = table.survival(hi);
        if s_hi <= target {
            let a = if s_lo == s_hi {
                lo
            } else {
                lo + (s_lo - target) / (s_lo - s_hi) * (hi - lo)
            };
            return Ok(a - x0);
        }
        if hi >= terminal {
            // survival drops to zero just past the terminal age
            return Ok(terminal - x0);
        }
        lo = hi;
        s_lo = s_hi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_table(terminal: u32) -> MortalityTable {
        let mut e: Vec<(u32, f64)> = (60..terminal).map(|a| (a, 0.0)).collect();
        e.push((terminal, 1.0));
        MortalityTable::new(&e).unwrap()
    }

    #[test]
    fn fraction_one_gives_zero_horizon() {
        let t = MortalityTable::standin_male();
        assert_eq!(conditional_horizon(&t, 65.0, 3.5, 1.0).unwrap(), 3.5);
    }

    #[test]
    fn no_deaths_until_terminal() {
        let t = flat_table(100);
        for f in [0.01, 0.2, 0.5, 0.99] {
            assert_eq!(conditional_horizon(&t, 65.0, 0.0, f).unwrap(), 35.0);
            assert_eq!(conditional_horizon(&t, 65.0, 10.25, f).unwrap(), 35.0);
        }
    }

    #[test]
    fn standin_matches_anchor_survival() {
        let t = MortalityTable::standin_male();
        let p95 = t.survival_probability(65.0, 95.0).unwrap();
        let p100 = t.survival_probability(65.0, 100.0).unwrap();
        assert!((p95 - 0.13).abs() < 1e-9, "{p95}");
        assert!((p100 - 0.02).abs() < 1e-9, "{p100}");
    }

    #[test]
    fn horizon_hits_target_survival() {
        let t = MortalityTable::standin_male();
        for time in [0.0, 0.3, 7.0, 29.5] {
            let h = conditional_horizon(&t, 65.0, time, 0.2).unwrap();
            let p = t.survival_probability(65.0 + time, 65.0 + h).unwrap();
            assert!((p - 0.2).abs() < 1e-12, "t={time}: {p}");
        }
    }

    #[test]
    fn remaining_horizon_shrinks_with_age() {
        // holds while yearly death counts rise; past about age 100 the
        // piecewise-linear survival curve has a falling hazard at integer ages
        let t = MortalityTable::standin_male();
        let mut prev = f64::INFINITY;
        for k in 0..=310 {
            let time = k as f64 * 0.1;
            let rem = conditional_horizon(&t, 65.0, time, 0.2).unwrap() - time;
            assert!(rem <= prev + 1e-12, "t={time}: {rem} > {prev}");
            prev = rem;
        }
    }

    #[test]
    fn extinct_cohort_is_domain_error() {
        let t = flat_table(100);
        assert!(matches!(
            conditional_horizon(&t, 65.0, 35.0, 0.2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn csv_roundtrip_and_validation() {
        let good = "age,qx\n98,0.3\n99,0.5\n100,1\n";
        let t = MortalityTable::from_csv_reader(good.as_bytes()).unwrap();
        assert_eq!(t.terminal_age(), 100);
        assert!((t.survival(100.0) - 0.35).abs() < 1e-15);
        assert!(MortalityTable::from_csv_reader("age,qx\n98,0.3\n100,1\n".as_bytes()).is_err());
        assert!(MortalityTable::from_csv_reader("age,qx\n98,0.3\n99,0.5\n".as_bytes()).is_err());
        assert!(MortalityTable::from_csv_reader("age,q\n99,0.5\n100,1\n".as_bytes()).is_err());
    }
}
