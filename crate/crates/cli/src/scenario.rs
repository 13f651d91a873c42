//! Shock sweeps: run the tâtonnement (and optionally the equilibrium-set
//! scan) over a grid of initial shocks and emit CSV/JSON artifacts.
//!
//! Sweep points are independent and dispatched to a worker pool; the
//! collected records keep grid order, so output files are bit-identical
//! across runs with the same configuration and seed.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use clearnet_core::clearing::{equilibrium_set_scan, tatonnement, TatonnementTrace};
use clearnet_core::error::{Error, Result};
use clearnet_core::market::ShockSpec;

use crate::config::{ScenarioContext, SweepQuantity, SweepSpec};

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

/// Build the shock for one sweep point. `asset` is 0-based here.
pub fn shock_for(
    ctx: &ScenarioContext,
    quantity: SweepQuantity,
    asset: usize,
    value: f64,
) -> Result<ShockSpec<f64>> {
    match quantity {
        SweepQuantity::Q0 => {
            let mut q0 = ctx.demand.price_at_zero().to_vec();
            q0[asset] = value;
            ShockSpec::from_price(&ctx.demand, &q0)
        }
        SweepQuantity::Gamma0 => {
            let mut gamma = vec![0.0; ctx.demand.n_assets()];
            gamma[asset] = value;
            ShockSpec::from_gamma(gamma)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    /// Grid value of the swept quantity.
    pub shock: f64,
    /// Initial price implied by the shock.
    pub q0: Vec<f64>,
    /// Attained price after the tâtonnement.
    pub q_star: Vec<f64>,
    pub converged: bool,
    pub steps: usize,
    pub residual: f64,
    pub n_defaults: usize,
    /// 1-based defaulting firm indices.
    pub defaulting: Vec<usize>,
    /// Equilibrium-set roots in the swept asset, when the scan ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roots: Option<Vec<f64>>,
    /// Solver failure at this point, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub sweep_quantity: SweepQuantity,
    pub sweep_asset: usize,
    pub n_points: usize,
    pub failures: usize,
    pub records: Vec<SweepRecord>,
}

/// Tâtonnement traces per sweep point, kept only when requested.
pub struct SweepOutcome {
    pub summary: SweepSummary,
    pub traces: Vec<Option<TatonnementTrace<f64>>>,
}

fn run_point(
    ctx: &ScenarioContext,
    sweep: &SweepSpec,
    value: f64,
) -> (SweepRecord, Option<TatonnementTrace<f64>>) {
    let asset = sweep.asset - 1;
    let attempt = || -> Result<(SweepRecord, Option<TatonnementTrace<f64>>)> {
        let shock = shock_for(ctx, sweep.quantity, asset, value)?;
        let q0 = shock.initial_price(&ctx.demand).to_vec();
        let out = tatonnement(
            &ctx.net,
            &ctx.rel,
            &ctx.policies,
            &ctx.demand,
            &shock,
            &ctx.params,
        )?;
        let roots = if sweep.scan {
            let found = equilibrium_set_scan(
                &ctx.net,
                &ctx.rel,
                &ctx.policies,
                &ctx.demand,
                &shock,
                &ctx.params,
            )?;
            Some(found.iter().map(|p| p.get(asset)).collect())
        } else {
            None
        };
        let record = SweepRecord {
            shock: value,
            q0,
            q_star: out.result.prices.to_vec(),
            converged: out.trace.converged,
            steps: out.trace.steps,
            residual: out.trace.residual,
            n_defaults: out.result.defaults.len(),
            defaulting: out.result.defaults.iter().map(|i| i + 1).collect(),
            roots,
            error: None,
        };
        let trace = sweep.write_traces.then_some(out.trace);
        Ok((record, trace))
    };
    attempt().unwrap_or_else(|err| {
        (
            SweepRecord {
                shock: value,
                q0: Vec::new(),
                q_star: Vec::new(),
                converged: false,
                steps: 0,
                residual: f64::NAN,
                n_defaults: 0,
                defaulting: Vec::new(),
                roots: None,
                error: Some(err.to_string()),
            },
            None,
        )
    })
}

/// Run every sweep point; solver failures are recorded per point and the
/// sweep continues.
pub fn run_sweep(ctx: &ScenarioContext) -> Result<SweepOutcome> {
    let sweep = ctx
        .config
        .sweep
        .clone()
        .ok_or_else(|| Error::InvalidInput("the configuration has no sweep section".into()))?;
    let points = sweep.grid.points()?;
    let results: Vec<(SweepRecord, Option<TatonnementTrace<f64>>)> = points
        .par_iter()
        .map(|&value| run_point(ctx, &sweep, value))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for (record, trace) in results {
        records.push(record);
        traces.push(trace);
    }
    let failures = records
        .iter()
        .filter(|r| r.error.is_some() || !r.converged)
        .count();
    Ok(SweepOutcome {
        summary: SweepSummary {
            schema_version: OUTPUT_SCHEMA_VERSION,
            config_hash: ctx.config_hash.clone(),
            seed: ctx.config.seed,
            sweep_quantity: sweep.quantity,
            sweep_asset: sweep.asset,
            n_points: records.len(),
            failures,
            records,
        },
        traces,
    })
}

/// The sweep table: one row per shock grid point.
pub fn sweep_csv(outcome: &SweepOutcome) -> String {
    let m = outcome
        .summary
        .records
        .iter()
        .find(|r| !r.q_star.is_empty())
        .map_or(0, |r| r.q_star.len());
    let mut text = String::from("schema_version,shock");
    for k in 1..=m {
        text.push_str(&format!(",q0_{k}"));
    }
    for k in 1..=m {
        text.push_str(&format!(",q_star_{k}"));
    }
    text.push_str(",converged,steps,n_defaults,defaulting_ids,branch_count,error\n");
    for record in &outcome.summary.records {
        text.push_str(&format!("{},{}", OUTPUT_SCHEMA_VERSION, record.shock));
        for k in 0..m {
            let v = record.q0.get(k).copied().unwrap_or(f64::NAN);
            text.push_str(&format!(",{v}"));
        }
        for k in 0..m {
            let v = record.q_star.get(k).copied().unwrap_or(f64::NAN);
            text.push_str(&format!(",{v}"));
        }
        let ids = record
            .defaulting
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let branches = record
            .roots
            .as_ref()
            .map_or(String::new(), |r| r.len().to_string());
        text.push_str(&format!(
            ",{},{},{},{},{},{}\n",
            record.converged,
            record.steps,
            record.n_defaults,
            ids,
            branches,
            record.error.as_deref().unwrap_or("")
        ));
    }
    text
}

/// One tâtonnement trace as CSV `(t, q_1, ..., q_m)`.
pub fn trace_csv(trace: &TatonnementTrace<f64>) -> String {
    let m = trace.samples.first().map_or(0, |s| s.prices.len());
    let mut text = String::from("t");
    for k in 1..=m {
        text.push_str(&format!(",q_{k}"));
    }
    text.push('\n');
    for sample in &trace.samples {
        text.push_str(&sample.time.to_string());
        for v in &sample.prices {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    text
}

pub fn write_outputs(outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("sweep.csv"), sweep_csv(outcome))?;
    let summary =
        serde_json::to_string_pretty(&outcome.summary).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), summary)?;
    for (idx, trace) in outcome.traces.iter().enumerate() {
        if let Some(trace) = trace {
            std::fs::write(dir.join(format!("trace_{idx:04}.csv")), trace_csv(trace))?;
        }
    }
    Ok(())
}
