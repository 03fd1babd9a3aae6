//! Scenario configuration file (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arva::{ArvaConfig, WithdrawalRule};
use crate::dp::grid::GridSpec;
use crate::dp::solver::{ObjectiveParams, SearchConfig};
use crate::error::{invalid, Result};
use crate::market::{JumpParams, MarketParams};
use crate::mortality::MortalityTable;
use crate::scenario::Scenario;

/// Market parameters as flat keys. Absent jump rates mean jumps in that
/// direction never occur.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub mu_s: f64,
    pub sigma_s: f64,
    #[serde(default)]
    pub lambda_s: f64,
    #[serde(default = "one")]
    pub p_up_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta1_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta2_s: Option<f64>,
    pub mu_b: f64,
    pub sigma_b: f64,
    #[serde(default)]
    pub lambda_b: f64,
    #[serde(default = "one")]
    pub p_up_b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta1_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta2_b: Option<f64>,
    #[serde(default)]
    pub rho_sb: f64,
    #[serde(default)]
    pub mu_c_b: f64,
}

fn one() -> f64 {
    1.0
}

impl From<&MarketParams> for MarketConfig {
    fn from(m: &MarketParams) -> Self {
        let rate = |x: f64| x.is_finite().then_some(x);
        MarketConfig {
            mu_s: m.mu_s,
            sigma_s: m.sigma_s,
            lambda_s: m.jump_s.lambda,
            p_up_s: m.jump_s.p_up,
            eta1_s: rate(m.jump_s.eta1),
            eta2_s: rate(m.jump_s.eta2),
            mu_b: m.mu_b,
            sigma_b: m.sigma_b,
            lambda_b: m.jump_b.lambda,
            p_up_b: m.jump_b.p_up,
            eta1_b: rate(m.jump_b.eta1),
            eta2_b: rate(m.jump_b.eta2),
            rho_sb: m.rho_sb,
            mu_c_b: m.mu_c_b,
        }
    }
}

impl MarketConfig {
    pub fn params(&self) -> Result<MarketParams> {
        let jump = |lambda, p_up, eta1: Option<f64>, eta2: Option<f64>| JumpParams {
            lambda,
            p_up,
            eta1: eta1.unwrap_or(f64::INFINITY),
            eta2: eta2.unwrap_or(f64::INFINITY),
        };
        let m = MarketParams {
            mu_s: self.mu_s,
            sigma_s: self.sigma_s,
            jump_s: jump(self.lambda_s, self.p_up_s, self.eta1_s, self.eta2_s),
            mu_b: self.mu_b,
            sigma_b: self.sigma_b,
            jump_b: jump(self.lambda_b, self.p_up_b, self.eta1_b, self.eta2_b),
            rho_sb: self.rho_sb,
            mu_c_b: self.mu_c_b,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Monthly CSV with columns `date,stock_index,bill_index,cpi`.
    pub data: PathBuf,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_spread")]
    pub mu_c_b: f64,
}

fn default_beta() -> f64 {
    3.0
}
fn default_spread() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WithdrawalConfig {
    #[serde(default = "default_x0")]
    pub x0: f64,
    /// Annuity rate; defaults to the bond drift.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default = "default_survival")]
    pub survival_fraction: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// `age,qx` CSV; the built-in stand-in table is used when absent.
    #[serde(default)]
    pub mortality: Option<PathBuf>,
    /// Withdraw this amount every year instead of following the ARVA rule.
    #[serde(default)]
    pub constant_q: Option<f64>,
}

fn default_x0() -> f64 {
    65.0
}
fn default_survival() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub w0: f64,
    pub horizon: f64,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    #[serde(default)]
    pub kappas: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub search: SearchConfig,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_epsilon() -> f64 {
    -1e-4
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            kappas: Vec::new(),
            alpha: default_alpha(),
            epsilon: default_epsilon(),
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Synthetic,
    Bootstrap,
    Both,
}

impl Engine {
    pub fn synthetic(self) -> bool {
        matches!(self, Engine::Synthetic | Engine::Both)
    }
    pub fn bootstrap(self) -> bool {
        matches!(self, Engine::Bootstrap | Engine::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_engine")]
    pub engine: Engine,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    /// Constant equity weights evaluated alongside the optimal controls.
    #[serde(default)]
    pub constant_weights: Vec<f64>,
}

fn default_engine() -> Engine {
    Engine::Synthetic
}
fn default_paths() -> usize {
    200_000
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            engine: default_engine(),
            paths: default_paths(),
            seed: 0,
            constant_weights: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    /// Monthly CSV with columns `date,stock_index,bill_index,cpi`.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Resample a history simulated from the market parameters instead.
    #[serde(default)]
    pub simulated_years: Option<usize>,
    #[serde(default)]
    pub history_seed: u64,
    /// Expected block length in years.
    pub b_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_w_lo")]
    pub heatmap_w_min: f64,
    #[serde(default = "default_w_hi")]
    pub heatmap_w_max: f64,
    #[serde(default = "default_percentiles")]
    pub percentiles: Vec<f64>,
}

fn default_w_lo() -> f64 {
    0.0
}
fn default_w_hi() -> f64 {
    2000.0
}
fn default_percentiles() -> Vec<f64> {
    vec![5.0, 50.0, 95.0]
}

/// Everything needed for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub market: Option<MarketConfig>,
    #[serde(default)]
    pub calibration: Option<CalibrationConfig>,
    pub withdrawals: WithdrawalConfig,
    pub scenario: HorizonConfig,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    pub output: OutputConfig,
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| invalid(format!("bad override key '{key}'")))?;
    let mut t = table;
    for p in parts {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| invalid(format!("override '{key}': '{p}' is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

fn default_grid() -> GridSpec {
    GridSpec::square(512)
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    /// Like [`ScenarioConfig::load`], with `section.key = value` overrides
    /// applied before parsing. Values are read as TOML, falling back to a
    /// plain string.
    pub fn load_with_overrides(
        path: impl AsRef<Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut table: toml::Table = text.parse()?;
        for (key, raw) in overrides {
            set_dotted(&mut table, key, parse_value(raw))?;
        }
        let mut cfg: ScenarioConfig = toml::Value::Table(table).try_into()?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(c) = &mut self.calibration {
            fix(&mut c.data);
        }
        if let Some(m) = &mut self.withdrawals.mortality {
            fix(m);
        }
        if let Some(b) = &mut self.bootstrap {
            if let Some(d) = &mut b.data {
                fix(d);
            }
        }
        fix(&mut self.output.dir);
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.market, &self.calibration) {
            (None, None) => {
                return Err(invalid(
                    "config needs a [market] or a [calibration] section",
                ))
            }
            (Some(m), _) => {
                m.params()?;
            }
            _ => {}
        }
        for n in [self.grid.n_x, self.grid.n_y] {
            if !n.is_power_of_two() {
                return Err(invalid(format!("grid size {n} is not a power of two")));
            }
        }
        // Amounts below the grid are clamped up to its lower edge, so a high
        // edge quietly adds wealth whenever one asset is (nearly) empty.
        let floor = (self.grid.center.ln() - self.grid.half_width).exp();
        if floor > 0.01 * self.scenario.w0 {
            return Err(invalid(format!(
                "grid lower edge {floor:.3} is above 1% of initial wealth"
            )));
        }
        let mut files: Vec<&Path> = Vec::new();
        if let Some(c) = &self.calibration {
            files.push(&c.data);
        }
        if let Some(m) = &self.withdrawals.mortality {
            files.push(m);
        }
        if let Some(b) = &self.bootstrap {
            match (&b.data, b.simulated_years) {
                (Some(d), _) => files.push(d),
                (None, Some(_)) => {}
                (None, None) => return Err(invalid("[bootstrap] needs data or simulated_years")),
            }
            if !(b.b_hat > 0.0) {
                return Err(invalid("bootstrap b_hat must be > 0"));
            }
        }
        if self.simulation.engine.bootstrap() && self.bootstrap.is_none() {
            return Err(invalid(
                "bootstrap engine selected without a [bootstrap] section",
            ));
        }
        for f in files {
            if !f.is_file() {
                return Err(invalid(format!("file not found: {}", f.display())));
            }
        }
        for &k in &self.objective.kappas {
            self.objective_params(k).validate()?;
        }
        for p in &self.simulation.constant_weights {
            if !(0.0..=1.0).contains(p) {
                return Err(invalid(format!("constant weight {p} outside [0, 1]")));
            }
        }
        let q = &self.withdrawals;
        if !(q.q_min <= q.q_max) {
            return Err(invalid("q_min exceeds q_max"));
        }
        if self.scenario.m == 0 || !(self.scenario.horizon > 0.0) {
            return Err(invalid("scenario needs m >= 1 and a positive horizon"));
        }
        Ok(())
    }

    pub fn objective_params(&self, kappa: f64) -> ObjectiveParams {
        ObjectiveParams {
            kappa,
            alpha: self.objective.alpha,
            epsilon: self.objective.epsilon,
        }
    }

    pub fn mortality(&self) -> Result<MortalityTable> {
        match &self.withdrawals.mortality {
            Some(p) => MortalityTable::from_csv_path(p),
            None => Ok(MortalityTable::standin_male()),
        }
    }

    /// ARVA settings; the annuity rate defaults to the bond drift.
    pub fn arva_config(&self, market: &MarketParams) -> ArvaConfig {
        let w = &self.withdrawals;
        ArvaConfig {
            x0: w.x0,
            r: w.r.unwrap_or(market.mu_b),
            survival_fraction: w.survival_fraction,
            q_min: w.q_min,
            q_max: w.q_max,
            dt: self.scenario.horizon / self.scenario.m as f64,
        }
    }

    /// Builds the scenario around already resolved market parameters.
    pub fn scenario(&self, market: MarketParams) -> Result<Scenario> {
        let h = &self.scenario;
        let rule = match self.withdrawals.constant_q {
            Some(q) => WithdrawalRule::constant(q, h.m),
            None => WithdrawalRule::arva(&self.arva_config(&market), &self.mortality()?, h.m)?,
        };
        Scenario::new(market, rule, h.w0, h.horizon, h.m)
    }
}
