//! End-to-end runs, frontiers and CSV exports.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{calibrate_pair, PairCalibration};
use crate::config::{MarketConfig, ScenarioConfig};
use crate::dp::control::{scenario_hash, ControlTable};
use crate::dp::solver::Solver;
use crate::error::{invalid, Result};
use crate::history::{ingest_market_csv, simulate_history, PairedHistory};
use crate::market::MarketParams;
use crate::scenario::Scenario;
use crate::sim::source::{BootstrapSource, PathSource, SyntheticSource};
use crate::sim::stats::{ew_es_summary, percentile_fan, FanField, SummaryStats};
use crate::sim::strategy::{simulate_strategy, Strategy};

/// One point of an efficient frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    /// `"kappa"` for optimal controls, `"p"` for constant weights.
    pub sweep: String,
    pub param: f64,
    pub es: f64,
    pub ew_per_withdrawal: f64,
    pub median_terminal: f64,
    pub pareto: bool,
}

/// Flags points not dominated in (ES, EW): a point is dominated when another
/// is at least as good in both and strictly better in one.
pub fn mark_pareto(points: &mut [FrontierPoint]) {
    let snapshot: Vec<(f64, f64)> = points.iter().map(|p| (p.es, p.ew_per_withdrawal)).collect();
    for (i, p) in points.iter_mut().enumerate() {
        let (es, ew) = snapshot[i];
        p.pareto = !snapshot
            .iter()
            .enumerate()
            .any(|(j, &(e, w))| j != i && e >= es && w >= ew && (e > es || w > ew));
    }
}

/// Points that survive the Pareto filter.
pub fn pareto_front(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
    let mut all = points.to_vec();
    mark_pareto(&mut all);
    all.into_iter().filter(|p| p.pareto).collect()
}

/// Values swept to trace a frontier.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Kappas(Vec<f64>),
    Weights(Vec<f64>),
}

/// Market parameters from the config, calibrating first if requested.
pub fn resolve_market(cfg: &ScenarioConfig) -> Result<(MarketParams, Option<PairCalibration>)> {
    if let Some(m) = &cfg.market {
        return Ok((m.params()?, None));
    }
    let c = cfg
        .calibration
        .as_ref()
        .ok_or_else(|| invalid("no market parameters configured"))?;
    let history = ingest_market_csv(&c.data).map_err(|e| e.in_stage("ingest"))?;
    let fit = calibrate_pair(&history, c.beta, c.mu_c_b).map_err(|e| e.in_stage("calibrate"))?;
    Ok((fit.market, Some(fit)))
}

/// History for the bootstrap engine: the configured file, or a simulated one.
pub fn bootstrap_history(
    cfg: &ScenarioConfig,
    market: &MarketParams,
) -> Result<Option<PairedHistory>> {
    let Some(b) = &cfg.bootstrap else {
        return Ok(None);
    };
    if let Some(path) = &b.data {
        return Ok(Some(ingest_market_csv(path)?));
    }
    let years = b
        .simulated_years
        .ok_or_else(|| invalid("[bootstrap] needs data or simulated_years"))?;
    Ok(Some(simulate_history(market, years, b.history_seed)?))
}

struct Engines {
    synthetic: Option<SyntheticSource>,
    bootstrap: Option<BootstrapSource>,
}

impl Engines {
    fn new(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<Self> {
        let sim = &cfg.simulation;
        let synthetic = if sim.engine.synthetic() {
            Some(SyntheticSource::new(
                &scenario.market,
                scenario.dt(),
                scenario.m,
                sim.paths,
                sim.seed,
            )?)
        } else {
            None
        };
        let bootstrap = if sim.engine.bootstrap() {
            let history = bootstrap_history(cfg, &scenario.market)?
                .ok_or_else(|| invalid("missing [bootstrap]"))?;
            let b_hat = cfg.bootstrap.as_ref().map(|b| b.b_hat).unwrap_or(2.0);
            Some(BootstrapSource::new(
                &history,
                b_hat,
                scenario.dt(),
                scenario.m,
                sim.paths,
                sim.seed,
            )?)
        } else {
            None
        };
        Ok(Engines {
            synthetic,
            bootstrap,
        })
    }

    fn list(&self) -> Vec<(&'static str, &dyn PathSource)> {
        let mut v: Vec<(&'static str, &dyn PathSource)> = Vec::new();
        if let Some(s) = &self.synthetic {
            v.push(("synthetic", s));
        }
        if let Some(b) = &self.bootstrap {
            v.push(("bootstrap", b));
        }
        v
    }
}

/// Constant-weight strategy with the configured withdrawal rule.
pub fn constant_strategy(cfg: &ScenarioConfig, p: f64) -> Strategy {
    match cfg.withdrawals.constant_q {
        Some(q) => Strategy::ConstantWeightConstantQ { p, q },
        None => Strategy::ConstantWeightArva { p },
    }
}

/// One frontier point per swept value, evaluated on the synthetic market.
pub fn frontier_sweep(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    sweep: &Sweep,
) -> Result<Vec<FrontierPoint>> {
    let sim = &cfg.simulation;
    let source = SyntheticSource::new(
        &scenario.market,
        scenario.dt(),
        scenario.m,
        sim.paths,
        sim.seed,
    )?;
    let mut points = Vec::new();
    let alpha = cfg.objective.alpha;
    let (name, values) = match sweep {
        Sweep::Kappas(k) => ("kappa", k),
        Sweep::Weights(p) => ("p", p),
    };
    if values.is_empty() {
        return Err(invalid("frontier sweep needs at least one value"));
    }
    for &v in values {
        let strategy = match sweep {
            Sweep::Kappas(_) => {
                let solver = Solver::new(scenario, &cfg.grid, cfg.objective_params(v))?;
                Strategy::ControlTable(solver.solve_precommitment(&cfg.objective.search)?.table)
            }
            Sweep::Weights(_) => constant_strategy(cfg, v),
        };
        let stats = ew_es_summary(&simulate_strategy(&source, &strategy, scenario)?, alpha)?;
        points.push(FrontierPoint {
            sweep: name.into(),
            param: v,
            es: stats.es,
            ew_per_withdrawal: stats.ew_per_withdrawal,
            median_terminal: stats.median_terminal,
            pareto: false,
        });
    }
    mark_pareto(&mut points);
    Ok(points)
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub engine: String,
    pub strategy: String,
    pub param: f64,
    pub w_star: Option<f64>,
    pub stats: SummaryStats,
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record([
        "engine",
        "strategy",
        "param",
        "w_star",
        "es",
        "ew_per_withdrawal",
        "median_terminal",
        "mean_median_weight",
        "paths",
    ])?;
    for r in rows {
        let s = &r.stats;
        wr.write_record([
            r.engine.clone(),
            r.strategy.clone(),
            r.param.to_string(),
            r.w_star.map(|w| w.to_string()).unwrap_or_default(),
            s.es.to_string(),
            s.ew_per_withdrawal.to_string(),
            s.median_terminal.to_string(),
            s.mean_median_weight.to_string(),
            s.n_paths.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_frontier_csv<W: Write>(points: &[FrontierPoint], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record([
        "sweep",
        "param",
        "es",
        "ew_per_withdrawal",
        "median_terminal",
        "pareto",
    ])?;
    for p in points {
        wr.write_record([
            p.sweep.clone(),
            p.param.to_string(),
            p.es.to_string(),
            p.ew_per_withdrawal.to_string(),
            p.median_terminal.to_string(),
            p.pareto.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Rows `field,t,percentile,value` for every field of the outcomes.
pub fn write_fans_csv<W: Write>(
    out: W,
    outcomes: &crate::sim::PathOutcomes,
    dt: f64,
    percentiles: &[f64],
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["field", "t", "percentile", "value"])?;
    for (name, field) in [
        ("weight", FanField::Weight),
        ("withdrawal", FanField::Withdrawal),
        ("wealth", FanField::Wealth),
    ] {
        for point in percentile_fan(outcomes, percentiles, field)? {
            for (pct, v) in percentiles.iter().zip(&point.values) {
                wr.write_record([
                    name.to_string(),
                    (point.n as f64 * dt).to_string(),
                    pct.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Inputs and outputs of a run, enough to reproduce every file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_sha256: String,
    pub scenario_hash: String,
    pub simulation_seed: u64,
    pub history_seed: Option<u64>,
    pub paths: usize,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub market: MarketParams,
    pub calibration: Option<PairCalibration>,
    pub solutions: Vec<(f64, ControlTable, f64)>,
    pub rows: Vec<SummaryRow>,
    pub frontier: Vec<FrontierPoint>,
    pub manifest: Manifest,
}

fn create(
    dir: &Path,
    name: &str,
    outputs: &mut Vec<PathBuf>,
) -> Result<std::io::BufWriter<std::fs::File>> {
    let path = dir.join(name);
    let f = std::fs::File::create(&path)?;
    outputs.push(PathBuf::from(name));
    Ok(std::io::BufWriter::new(f))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Calibrate (optional), solve each kappa, simulate on every configured
/// engine, and write all outputs under the configured directory.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let (market, calibration) = resolve_market(cfg)?;
    let scenario = cfg.scenario(market).map_err(|e| e.in_stage("scenario"))?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let mut outputs = Vec::new();

    if calibration.is_some() {
        let mut f = create(dir, "market_calibrated.toml", &mut outputs)?;
        f.write_all(CalibratedMarket::new(&market).to_toml()?.as_bytes())?;
    }

    let engines = Engines::new(cfg, &scenario).map_err(|e| e.in_stage("engine"))?;
    let alpha = cfg.objective.alpha;
    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    for &kappa in &cfg.objective.kappas {
        let solver = Solver::new(&scenario, &cfg.grid, cfg.objective_params(kappa))
            .map_err(|e| e.in_stage("solve"))?;
        let sol = solver
            .solve_precommitment(&cfg.objective.search)
            .map_err(|e| e.in_stage("solve"))?;
        sol.table
            .save(dir.join(format!("control_kappa_{kappa}.json")))?;
        outputs.push(PathBuf::from(format!("control_kappa_{kappa}.json")));
        let heat = create(dir, &format!("heatmap_kappa_{kappa}.csv"), &mut outputs)?;
        sol.table
            .write_heatmap(heat, cfg.output.heatmap_w_min, cfg.output.heatmap_w_max)?;
        let strategy = Strategy::ControlTable(sol.table.clone());
        for (engine, source) in engines.list() {
            let out = simulate_strategy(source, &strategy, &scenario)
                .map_err(|e| e.in_stage("simulate"))?;
            let fan = create(
                dir,
                &format!("fan_{engine}_kappa_{kappa}.csv"),
                &mut outputs,
            )?;
            write_fans_csv(fan, &out, scenario.dt(), &cfg.output.percentiles)?;
            rows.push(SummaryRow {
                engine: engine.into(),
                strategy: "optimal".into(),
                param: kappa,
                w_star: Some(sol.w_star),
                stats: ew_es_summary(&out, alpha)?,
            });
        }
        solutions.push((kappa, sol.table, sol.value));
    }
    for &p in &cfg.simulation.constant_weights {
        let strategy = constant_strategy(cfg, p);
        for (engine, source) in engines.list() {
            let out = simulate_strategy(source, &strategy, &scenario)
                .map_err(|e| e.in_stage("simulate"))?;
            rows.push(SummaryRow {
                engine: engine.into(),
                strategy: "constant-weight".into(),
                param: p,
                w_star: None,
                stats: ew_es_summary(&out, alpha)?,
            });
        }
    }
    write_summary_csv(&rows, create(dir, "summary.csv", &mut outputs)?)?;

    let mut frontier = Vec::new();
    for engine in ["synthetic", "bootstrap"] {
        for (sweep, strategy) in [("kappa", "optimal"), ("p", "constant-weight")] {
            let mut pts: Vec<FrontierPoint> = rows
                .iter()
                .filter(|r| r.engine == engine && r.strategy == strategy)
                .map(|r| FrontierPoint {
                    sweep: format!("{engine}:{sweep}"),
                    param: r.param,
                    es: r.stats.es,
                    ew_per_withdrawal: r.stats.ew_per_withdrawal,
                    median_terminal: r.stats.median_terminal,
                    pareto: false,
                })
                .collect();
            mark_pareto(&mut pts);
            frontier.extend(pts);
        }
    }
    write_frontier_csv(&frontier, create(dir, "frontier.csv", &mut outputs)?)?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(cfg.to_toml()?.as_bytes()),
        scenario_hash: scenario_hash(&scenario)?,
        simulation_seed: cfg.simulation.seed,
        history_seed: cfg
            .bootstrap
            .as_ref()
            .filter(|b| b.data.is_none())
            .map(|b| b.history_seed),
        paths: cfg.simulation.paths,
        outputs: outputs.clone(),
    };
    let f = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(RunReport {
        market,
        calibration,
        solutions,
        rows,
        frontier,
        manifest,
    })
}

/// `[market]` fragment produced by a calibration run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibratedMarket {
    pub market: MarketConfig,
}

impl CalibratedMarket {
    pub fn new(market: &MarketParams) -> Self {
        CalibratedMarket {
            market: MarketConfig::from(market),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
