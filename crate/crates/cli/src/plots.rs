//! Tidy CSV emission for external plotting.

use clearnet_core::clearing::TatonnementTrace;
use clearnet_core::error::{Error, Result};

use crate::grexit::ImpactPoint;
use crate::scenario::SweepOutcome;

/// What to lay out as columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `(shock, attained price, branch count)` per sweep point.
    PriceCurve,
    /// `(shock, root index, price)` — the full equilibrium set per point.
    EquilibriumSet,
    /// `(t, q_1, ..., q_m)` along one tâtonnement path.
    Trace,
    /// `(impact, attained price, defaults)` over a market-impact grid.
    ImpactSweep,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "price_curve" => Ok(PlotKind::PriceCurve),
            "equilibrium_set" => Ok(PlotKind::EquilibriumSet),
            "trace" => Ok(PlotKind::Trace),
            "impact_sweep" => Ok(PlotKind::ImpactSweep),
            other => Err(Error::InvalidInput(format!("unknown plot kind {other:?}"))),
        }
    }
}

/// Results a plot can be derived from.
pub enum ResultsBundle<'a> {
    Sweep(&'a SweepOutcome),
    Trace(&'a TatonnementTrace<f64>),
    Impact(&'a [ImpactPoint]),
}

/// Render plot data of the requested kind; mismatched bundles are errors.
pub fn emit_plot_data(results: &ResultsBundle<'_>, kind: PlotKind) -> Result<String> {
    match (results, kind) {
        (ResultsBundle::Sweep(outcome), PlotKind::PriceCurve) => {
            let asset = outcome.summary.sweep_asset;
            let mut text = format!("q0_{asset},q_star_{asset},branch_count\n");
            for record in &outcome.summary.records {
                let q0 = record.q0.get(asset - 1).copied().unwrap_or(f64::NAN);
                let q_star = record.q_star.get(asset - 1).copied().unwrap_or(f64::NAN);
                let branches = record
                    .roots
                    .as_ref()
                    .map_or(String::new(), |r| r.len().to_string());
                text.push_str(&format!("{q0},{q_star},{branches}\n"));
            }
            Ok(text)
        }
        (ResultsBundle::Sweep(outcome), PlotKind::EquilibriumSet) => {
            let asset = outcome.summary.sweep_asset;
            let mut text = format!("q0_{asset},root_index,q_{asset}\n");
            for record in &outcome.summary.records {
                let q0 = record.q0.get(asset - 1).copied().unwrap_or(f64::NAN);
                if let Some(roots) = &record.roots {
                    for (idx, root) in roots.iter().enumerate() {
                        text.push_str(&format!("{q0},{idx},{root}\n"));
                    }
                }
            }
            Ok(text)
        }
        (ResultsBundle::Trace(trace), PlotKind::Trace) => Ok(crate::scenario::trace_csv(trace)),
        (ResultsBundle::Impact(points), PlotKind::ImpactSweep) => {
            let mut text = String::from("b,q_star_2,n_defaults\n");
            for point in points.iter() {
                text.push_str(&format!(
                    "{},{},{}\n",
                    point.impact,
                    point.attained_rate,
                    point.defaulting.len()
                ));
            }
            Ok(text)
        }
        _ => Err(Error::InvalidInput(
            "plot kind does not match the supplied results".into(),
        )),
    }
}
