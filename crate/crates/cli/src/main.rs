//! `clearnet` — clearing engine CLI.
//!
//! Exit codes: 0 full success, 1 configuration or input errors, 2 solver
//! failures on part of the requested work.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use clearnet_cli::config::{build_context, effective_config, load_config, ScenarioContext};
use clearnet_cli::grexit::{run_grexit, GrexitInputs};
use clearnet_cli::plots::{emit_plot_data, PlotKind, ResultsBundle};
use clearnet_cli::scenario::{
    run_sweep, shock_for, trace_csv, write_outputs, OUTPUT_SCHEMA_VERSION,
};
use clearnet_core::clearing::{
    clearing_holdings, diagnostics, equilibrium_set_scan, tatonnement, Direction,
};
use clearnet_core::network::PriceVector;

#[derive(Parser)]
#[command(
    name = "clearnet",
    version,
    about = "Clearing engine for financial networks with obligations in multiple illiquid assets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Greatest,
    Least,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario configuration and print the effective-config echo.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// One clearing run: tâtonnement at a shock, or a fixed-price clearing.
    Clear {
        #[arg(long)]
        config: PathBuf,
        /// Initial price of the swept asset.
        #[arg(long, conflicts_with_all = ["gamma0", "fixed_price"])]
        q0: Option<f64>,
        /// Pre-transacted quantity in the swept asset.
        #[arg(long, conflicts_with = "fixed_price")]
        gamma0: Option<f64>,
        /// Comma-separated full price vector: clear at this price without
        /// price dynamics.
        #[arg(long)]
        fixed_price: Option<String>,
        #[arg(long, value_enum, default_value_t = DirectionArg::Greatest)]
        direction: DirectionArg,
        /// Output directory; prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the price trace CSV (shock runs only).
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the configured shock sweep and write its artifacts.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = FormatArg::Both)]
        format: FormatArg,
    },
    /// Enumerate all clearing prices at one shock (two-asset markets).
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, conflicts_with = "gamma0")]
        q0: Option<f64>,
        #[arg(long)]
        gamma0: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Calibrate from aggregates, split off a home currency, and clear the
    /// counterfactual.
    Grexit {
        #[arg(long)]
        aggregates: PathBuf,
        #[arg(long)]
        liabilities: PathBuf,
        #[arg(long)]
        exposures: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        impact: f64,
        /// Comma-separated market-impact grid for the sensitivity sweep.
        #[arg(long)]
        impact_grid: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct ClearOutput {
    schema_version: u32,
    q_star: Vec<f64>,
    converged: bool,
    iterations: usize,
    residual: f64,
    selector: String,
    uniqueness_guaranteed: bool,
    defaulting: Vec<usize>,
    equity: Vec<f64>,
    holdings: Vec<Vec<f64>>,
    payments: Vec<Vec<f64>>,
}

fn clear_output(
    ctx: &ScenarioContext,
    result: &clearnet_core::clearing::ClearingResult<f64>,
    converged: bool,
) -> ClearOutput {
    let report = diagnostics(&ctx.net, &ctx.rel, result);
    let (n, m) = (ctx.net.n_firms(), ctx.net.n_assets());
    ClearOutput {
        schema_version: OUTPUT_SCHEMA_VERSION,
        q_star: result.prices.to_vec(),
        converged,
        iterations: result.iterations,
        residual: result.residual,
        selector: format!("{:?}", result.selector).to_lowercase(),
        uniqueness_guaranteed: result.uniqueness_guaranteed,
        defaulting: result.defaults.iter().map(|i| i + 1).collect(),
        equity: report.equity,
        holdings: (0..n)
            .map(|i| (0..m).map(|k| result.holdings[[i, k]]).collect())
            .collect(),
        payments: (0..n)
            .map(|i| (0..m).map(|k| result.payments[[i, k]]).collect())
            .collect(),
    }
}

fn load_context(path: &Path, seed: Option<u64>) -> anyhow::Result<ScenarioContext> {
    let mut config = load_config(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(build_context(&config)?)
}

/// The 0-based asset a scalar shock applies to.
fn shock_asset(ctx: &ScenarioContext) -> usize {
    ctx.config.sweep.as_ref().map_or(1, |s| s.asset - 1)
}

fn scalar_shock(
    ctx: &ScenarioContext,
    q0: Option<f64>,
    gamma0: Option<f64>,
) -> anyhow::Result<clearnet_core::market::ShockSpec<f64>> {
    let asset = shock_asset(ctx);
    if ctx.net.n_assets() < 2 {
        anyhow::bail!(
            "shock runs need at least two assets; use --fixed-price for single-asset networks"
        );
    }
    let shock = match (q0, gamma0) {
        (Some(value), None) => {
            shock_for(ctx, clearnet_cli::config::SweepQuantity::Q0, asset, value)?
        }
        (None, Some(value)) => shock_for(
            ctx,
            clearnet_cli::config::SweepQuantity::Gamma0,
            asset,
            value,
        )?,
        (None, None) => clearnet_core::market::ShockSpec::zero(ctx.net.n_assets()),
        _ => anyhow::bail!("--q0 and --gamma0 are mutually exclusive"),
    };
    Ok(shock)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Validate { config } => {
            let ctx = load_context(&config, None)?;
            let echo = effective_config(&ctx);
            println!("{}", serde_json::to_string_pretty(&echo)?);
            Ok(0)
        }
        Command::Clear {
            config,
            q0,
            gamma0,
            fixed_price,
            direction,
            out,
            trace,
            seed,
        } => {
            let ctx = load_context(&config, seed)?;
            let (output, trace_text) = if let Some(prices) = fixed_price {
                let values: Vec<f64> = prices
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()?;
                let q = PriceVector::new(values)?;
                let dir = match direction {
                    DirectionArg::Greatest => Direction::Greatest,
                    DirectionArg::Least => Direction::Least,
                };
                let result =
                    clearing_holdings(&ctx.net, &ctx.rel, &ctx.policies, &q, dir, &ctx.params)?;
                (clear_output(&ctx, &result, true), None)
            } else {
                let shock = scalar_shock(&ctx, q0, gamma0)?;
                let outcome = tatonnement(
                    &ctx.net,
                    &ctx.rel,
                    &ctx.policies,
                    &ctx.demand,
                    &shock,
                    &ctx.params,
                )?;
                let text = trace.then(|| trace_csv(&outcome.trace));
                (
                    clear_output(&ctx, &outcome.result, outcome.trace.converged),
                    text,
                )
            };
            let json = serde_json::to_string_pretty(&output)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("clearing.json"), &json)?;
                    if let Some(text) = trace_text {
                        std::fs::write(dir.join("trace.csv"), text)?;
                    }
                }
                None => println!("{json}"),
            }
            Ok(if output.converged { 0 } else { 2 })
        }
        Command::Sweep {
            config,
            out,
            seed,
            format,
        } => {
            let ctx = load_context(&config, seed)?;
            let outcome = run_sweep(&ctx)?;
            std::fs::create_dir_all(&out)?;
            let echo = serde_json::to_string_pretty(&effective_config(&ctx))?;
            std::fs::write(out.join("effective_config.json"), echo)?;
            match format {
                FormatArg::Csv => {
                    std::fs::write(
                        out.join("sweep.csv"),
                        clearnet_cli::scenario::sweep_csv(&outcome),
                    )?;
                }
                FormatArg::Json => {
                    let summary = serde_json::to_string_pretty(&outcome.summary)?;
                    std::fs::write(out.join("summary.json"), summary)?;
                }
                FormatArg::Both => write_outputs(&outcome, &out)?,
            }
            let bundle = ResultsBundle::Sweep(&outcome);
            std::fs::write(
                out.join("price_curve.csv"),
                emit_plot_data(&bundle, PlotKind::PriceCurve)?,
            )?;
            if outcome.summary.records.iter().any(|r| r.roots.is_some()) {
                std::fs::write(
                    out.join("equilibrium_set.csv"),
                    emit_plot_data(&bundle, PlotKind::EquilibriumSet)?,
                )?;
            }
            eprintln!(
                "sweep: {} points, {} failures -> {}",
                outcome.summary.n_points,
                outcome.summary.failures,
                out.display()
            );
            Ok(if outcome.summary.failures == 0 { 0 } else { 2 })
        }
        Command::Scan {
            config,
            q0,
            gamma0,
            out,
            seed,
        } => {
            let ctx = load_context(&config, seed)?;
            let shock = scalar_shock(&ctx, q0, gamma0)?;
            let roots = equilibrium_set_scan(
                &ctx.net,
                &ctx.rel,
                &ctx.policies,
                &ctx.demand,
                &shock,
                &ctx.params,
            )?;
            let asset = shock_asset(&ctx);
            let values: Vec<f64> = roots.iter().map(|r| r.get(asset)).collect();
            let mut csv = String::from("root_index,price\n");
            for (idx, v) in values.iter().enumerate() {
                csv.push_str(&format!("{idx},{v}\n"));
            }
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("scan.csv"), csv)?;
                }
                None => print!("{csv}"),
            }
            Ok(0)
        }
        Command::Grexit {
            aggregates,
            liabilities,
            exposures,
            impact,
            impact_grid,
            out,
        } => {
            let mut inputs = GrexitInputs::new(aggregates, liabilities, exposures);
            inputs.impact = impact;
            if let Some(grid) = impact_grid {
                inputs.impact_grid = grid
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()?;
            }
            let report = run_grexit(&inputs)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("grexit.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            std::fs::write(
                out.join("impact_sweep.csv"),
                emit_plot_data(
                    &ResultsBundle::Impact(&report.impact_curve),
                    PlotKind::ImpactSweep,
                )?,
            )?;
            eprintln!(
                "grexit: rate {:.5}, {} defaults -> {}",
                report.attained_rate,
                report.defaulting.len(),
                out.display()
            );
            let all_converged = report.converged && report.impact_curve.iter().all(|p| p.converged);
            Ok(if all_converged { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
