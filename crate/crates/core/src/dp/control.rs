//! Stored optimal controls and their file format.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dp::grid::GridSpec;
use crate::dp::rebalance::ControlSlice;
use crate::dp::solver::ObjectiveParams;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

pub const CONTROL_FORMAT: &str = "decum-control";
pub const CONTROL_VERSION: u32 = 1;

/// Equity fraction as a function of post-withdrawal wealth at each
/// rebalancing date, with the committed `W*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlTable {
    pub format: String,
    pub version: u32,
    pub grid: GridSpec,
    pub scenario_hash: String,
    pub kappa: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub w_star: f64,
    pub slices: Vec<ControlSlice>,
}

/// SHA-256 of the canonical JSON form of a scenario.
pub fn scenario_hash(s: &Scenario) -> Result<String> {
    let bytes = serde_json::to_vec(s)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl ControlTable {
    pub fn new(
        grid: &GridSpec,
        scenario_hash: String,
        obj: ObjectiveParams,
        w_star: f64,
        slices: Vec<ControlSlice>,
    ) -> Self {
        ControlTable {
            format: CONTROL_FORMAT.into(),
            version: CONTROL_VERSION,
            grid: *grid,
            scenario_hash,
            kappa: obj.kappa,
            alpha: obj.alpha,
            epsilon: obj.epsilon,
            w_star,
            slices,
        }
    }

    pub fn objective(&self) -> ObjectiveParams {
        ObjectiveParams {
            kappa: self.kappa,
            alpha: self.alpha,
            epsilon: self.epsilon,
        }
    }

    /// Number of rebalancing dates covered.
    pub fn dates(&self) -> usize {
        self.slices.len()
    }

    /// Equity fraction at date `n` for post-withdrawal wealth `w`.
    pub fn control(&self, n: usize, w: f64) -> f64 {
        self.slices[n].control(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CONTROL_FORMAT || self.version != CONTROL_VERSION {
            return Err(Error::Data(format!(
                "unsupported control file {} v{}",
                self.format, self.version
            )));
        }
        for (k, s) in self.slices.iter().enumerate() {
            if s.n != k || s.w.len() != s.p.len() {
                return Err(Error::Data(format!("malformed control slice {k}")));
            }
            if s.w.windows(2).any(|w| !(w[0] < w[1])) || s.w.iter().any(|&w| !(w > 0.0)) {
                return Err(Error::Data(format!(
                    "slice {k}: wealth nodes must be positive and increasing"
                )));
            }
            if s.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Data(format!(
                    "slice {k}: equity fraction outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let table: ControlTable = serde_json::from_reader(std::io::BufReader::new(file))?;
        table.validate()?;
        Ok(table)
    }

    /// Writes `t,w,p` rows for nodes with `w_lo <= w <= w_hi`.
    pub fn write_heatmap<W: Write>(&self, out: W, w_lo: f64, w_hi: f64) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["t", "w", "p"])?;
        for s in &self.slices {
            for (&w, &p) in s.w.iter().zip(&s.p) {
                if w >= w_lo && w <= w_hi {
                    wr.write_record([s.t.to_string(), w.to_string(), p.to_string()])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}
