use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use decum_core::report::{
    bootstrap_history, constant_strategy, write_fans_csv, write_frontier_csv, write_summary_csv,
    CalibratedMarket, SummaryRow,
};
use decum_core::sim::{BootstrapSource, PathSource, SyntheticSource};
use decum_core::{
    calibrate_pair, ew_es_summary, frontier_sweep, ingest_market_csv, run_scenario,
    simulate_strategy, write_schedule_csv, ControlTable, ErrorKind, ScenarioConfig, Solver,
    Strategy, Sweep,
};

#[derive(Parser)]
#[command(
    name = "decum",
    version,
    about = "Optimal retirement decumulation with bounded ARVA spending"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit jump-diffusion parameters to a monthly index file.
    Calibrate {
        /// CSV with columns date,stock_index,bill_index,cpi.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        beta: f64,
        /// Borrowing spread written into the market fragment.
        #[arg(long, default_value_t = 0.02)]
        spread: f64,
        /// Write the [market] fragment here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for the optimal controls at one kappa.
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Defaults to the first kappa in the config.
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a strategy and print summary statistics.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[arg(long, value_enum, default_value_t = EngineArg::Synthetic)]
        engine: EngineArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep kappas or constant weights and export the frontier.
    Frontier {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', conflicts_with = "weights")]
        kappas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        /// Only write non-dominated points.
        #[arg(long)]
        pareto_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export stored controls as t,w,p rows.
    Heatmap {
        #[arg(long)]
        control: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        w_min: f64,
        #[arg(long, default_value_t = 2000.0)]
        w_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Percentiles of weight, withdrawal and wealth by date.
    Fan {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[arg(long, value_enum, default_value_t = EngineArg::Synthetic)]
        engine: EngineArg,
        #[arg(long, value_delimiter = ',', default_value = "5,50,95")]
        percentiles: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the withdrawal fractions by date for audit.
    Schedule {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage configured in the scenario file.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Override a config key, e.g. --set grid.n_x=1024.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct StrategyArgs {
    /// Stored control file.
    #[arg(long, conflicts_with = "weight")]
    control: Option<PathBuf>,
    /// Constant equity weight.
    #[arg(long)]
    weight: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Synthetic,
    Bootstrap,
}

impl ConfigArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let overrides = self
            .set
            .iter()
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .with_context(|| format!("override '{kv}' is not KEY=VALUE"))
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = ScenarioConfig::load_with_overrides(&self.config, &overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn strategy(cfg: &ScenarioConfig, args: &StrategyArgs) -> Result<(String, f64, Strategy)> {
    match (&args.control, args.weight) {
        (Some(path), _) => {
            let table = ControlTable::load(path)?;
            Ok(("optimal".into(), table.kappa, Strategy::ControlTable(table)))
        }
        (None, Some(p)) => Ok(("constant-weight".into(), p, constant_strategy(cfg, p))),
        (None, None) => bail!("give --control or --weight"),
    }
}

fn source(
    cfg: &ScenarioConfig,
    scenario: &decum_core::Scenario,
    engine: EngineArg,
) -> Result<Box<dyn PathSource>> {
    let sim = &cfg.simulation;
    Ok(match engine {
        EngineArg::Synthetic => Box::new(SyntheticSource::new(
            &scenario.market,
            scenario.dt(),
            scenario.m,
            sim.paths,
            sim.seed,
        )?),
        EngineArg::Bootstrap => {
            let b = cfg
                .bootstrap
                .as_ref()
                .context("bootstrap engine needs a [bootstrap] section")?;
            let history =
                bootstrap_history(cfg, &scenario.market)?.context("missing [bootstrap]")?;
            Box::new(BootstrapSource::new(
                &history,
                b.b_hat,
                scenario.dt(),
                scenario.m,
                sim.paths,
                sim.seed,
            )?)
        }
    })
}

fn warn_on_foreign_controls(strat: &Strategy, sc: &decum_core::Scenario) -> Result<()> {
    if let Strategy::ControlTable(t) = strat {
        if t.scenario_hash != decum_core::dp::scenario_hash(sc)? {
            eprintln!("warning: controls were solved for a different scenario");
        }
    }
    Ok(())
}

fn scenario(cfg: &ScenarioConfig) -> Result<decum_core::Scenario> {
    let (market, _) = decum_core::report::resolve_market(cfg)?;
    Ok(cfg.scenario(market)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate {
            data,
            beta,
            spread,
            out,
        } => {
            let history = ingest_market_csv(&data)?;
            let fit = calibrate_pair(&history, beta, spread)?;
            eprintln!(
                "{} months; {} stock jumps, {} bond jumps; GBM stock mu={:.5} sigma={:.5}, bond mu={:.5} sigma={:.5}, rho={:.5}",
                history.len(),
                fit.stock_jumps.len(),
                fit.bond_jumps.len(),
                fit.gbm_stock.0,
                fit.gbm_stock.1,
                fit.gbm_bond.0,
                fit.gbm_bond.1,
                fit.gbm_rho
            );
            for w in fit.stock.warnings.iter().chain(&fit.bond.warnings) {
                eprintln!("warning: {w}");
            }
            output(&out)?.write_all(CalibratedMarket::new(&fit.market).to_toml()?.as_bytes())?;
        }
        Command::Solve { cfg, kappa, out } => {
            let cfg = cfg.load()?;
            let kappa = match kappa.or_else(|| cfg.objective.kappas.first().copied()) {
                Some(k) => k,
                None => bail!("no kappa given and none in the config"),
            };
            let sc = scenario(&cfg)?;
            let solver = Solver::new(&sc, &cfg.grid, cfg.objective_params(kappa))?;
            let sol = solver.solve_precommitment(&cfg.objective.search)?;
            sol.table.save(&out)?;
            println!(
                "kappa={kappa} W*={:.4} J={:.4} ES={:.4} EW/(M+1)={:.4} E[W_T]={:.4}",
                sol.w_star,
                sol.value,
                sol.es,
                sol.ew / (sc.m + 1) as f64,
                sol.expected_terminal_wealth
            );
        }
        Command::Simulate {
            cfg,
            strategy: s,
            engine,
            out,
        } => {
            let cfg = cfg.load()?;
            let sc = scenario(&cfg)?;
            let (name, param, strat) = strategy(&cfg, &s)?;
            warn_on_foreign_controls(&strat, &sc)?;
            let src = source(&cfg, &sc, engine)?;
            let outcomes = simulate_strategy(src.as_ref(), &strat, &sc)?;
            let row = SummaryRow {
                engine: engine_name(engine).into(),
                strategy: name,
                param,
                w_star: match &strat {
                    Strategy::ControlTable(t) => Some(t.w_star),
                    _ => None,
                },
                stats: ew_es_summary(&outcomes, cfg.objective.alpha)?,
            };
            write_summary_csv(&[row], output(&out)?)?;
        }
        Command::Frontier {
            cfg,
            kappas,
            weights,
            pareto_only,
            out,
        } => {
            let cfg = cfg.load()?;
            let sc = scenario(&cfg)?;
            let sweep = if !kappas.is_empty() {
                Sweep::Kappas(kappas)
            } else if !weights.is_empty() {
                Sweep::Weights(weights)
            } else if !cfg.objective.kappas.is_empty() {
                Sweep::Kappas(cfg.objective.kappas.clone())
            } else {
                Sweep::Weights(cfg.simulation.constant_weights.clone())
            };
            let mut points = frontier_sweep(&cfg, &sc, &sweep)?;
            if pareto_only {
                points.retain(|p| p.pareto);
            }
            write_frontier_csv(&points, output(&out)?)?;
        }
        Command::Heatmap {
            control,
            w_min,
            w_max,
            out,
        } => {
            let table = ControlTable::load(&control)?;
            table.write_heatmap(output(&out)?, w_min, w_max)?;
        }
        Command::Fan {
            cfg,
            strategy: s,
            engine,
            percentiles,
            out,
        } => {
            let cfg = cfg.load()?;
            let sc = scenario(&cfg)?;
            let (_, _, strat) = strategy(&cfg, &s)?;
            warn_on_foreign_controls(&strat, &sc)?;
            let src = source(&cfg, &sc, engine)?;
            let outcomes = simulate_strategy(src.as_ref(), &strat, &sc)?;
            write_fans_csv(output(&out)?, &outcomes, sc.dt(), &percentiles)?;
        }
        Command::Schedule { cfg, out } => {
            let cfg = cfg.load()?;
            let (market, _) = decum_core::report::resolve_market(&cfg)?;
            write_schedule_csv(
                &cfg.arva_config(&market),
                &cfg.mortality()?,
                cfg.scenario.m,
                output(&out)?,
            )?;
        }
        Command::Run { cfg } => {
            let cfg = cfg.load()?;
            let report = run_scenario(&cfg)?;
            let mut stdout = io::stdout().lock();
            write_summary_csv(&report.rows, &mut stdout)?;
            eprintln!(
                "wrote {} files to {}",
                report.manifest.outputs.len() + 1,
                cfg.output.dir.display()
            );
        }
    }
    Ok(())
}

fn engine_name(e: EngineArg) -> &'static str {
    match e {
        EngineArg::Synthetic => "synthetic",
        EngineArg::Bootstrap => "bootstrap",
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err
        .chain()
        .find_map(|e| e.downcast_ref::<decum_core::Error>())
        .map(|e| e.kind())
    {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Data) => 3,
        Some(ErrorKind::Numerics) => 4,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
