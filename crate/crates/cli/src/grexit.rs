//! Currency-secession pipeline: calibrate a single-currency network from
//! balance-sheet aggregates, re-denominate the home bloc into a second
//! currency, and clear under a priority regulation scheme where every firm
//! pays its local currency first.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use clearnet_core::behavior::BehaviorRule;
use clearnet_core::clearing::{
    clearing_at_price, price_equilibrium, tatonnement, ClearingResult, FirmPolicies, SolverParams,
};
use clearnet_core::error::{Error, Result};
use clearnet_core::market::{InverseDemand, ScalarCurve, ShockSpec};
use clearnet_core::network::{
    build_relative_liabilities, calibrate_from_aggregates, split_two_currency, MultiLayerNetwork,
    PriceVector, RelativeLiabilities,
};
use clearnet_core::payment::PaymentRule;

use crate::config::load_exposures;

pub const GREXIT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct GrexitInputs {
    pub aggregates: PathBuf,
    pub liabilities: PathBuf,
    pub exposures: PathBuf,
    /// Market impact of the new currency's inverse demand curve.
    pub impact: f64,
    /// Extra impact values for the sensitivity sweep.
    pub impact_grid: Vec<f64>,
    /// Arctan curve shape; the defaults give a price floor of 1/3.
    pub amplitude: f64,
    pub shift: f64,
    pub delta_scale: f64,
    pub params: SolverParams<f64>,
}

impl GrexitInputs {
    pub fn new(aggregates: PathBuf, liabilities: PathBuf, exposures: PathBuf) -> Self {
        Self {
            aggregates,
            liabilities,
            exposures,
            impact: 1e-4,
            impact_grid: Vec::new(),
            amplitude: 4.0,
            shift: 3.0,
            delta_scale: 1e-3,
            params: SolverParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ImpactPoint {
    pub impact: f64,
    /// Attained price of the new currency in the old one.
    pub attained_rate: f64,
    pub converged: bool,
    pub defaulting: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct GrexitReport {
    pub schema_version: u32,
    pub n_firms: usize,
    pub home_firms: Vec<String>,
    /// Defaults of the single-currency baseline clearing (no secession).
    pub baseline_defaults: Vec<String>,
    pub impact: f64,
    pub attained_rate: f64,
    pub converged: bool,
    pub defaulting: Vec<String>,
    pub impact_curve: Vec<ImpactPoint>,
}

/// The split system with its policies: home firms prioritize the new
/// currency, everyone else the old one; all firms trade minimally.
pub struct GrexitSystem {
    pub net: MultiLayerNetwork<f64>,
    pub rel: RelativeLiabilities<f64>,
    pub policies: FirmPolicies<f64>,
    pub names: Vec<String>,
    pub home: Vec<usize>,
}

pub fn demand_for_impact(inputs: &GrexitInputs, impact: f64) -> Result<InverseDemand<f64>> {
    InverseDemand::symmetric_two_asset(ScalarCurve::Atan {
        amplitude: inputs.amplitude,
        shift: inputs.shift,
        impact,
    })
}

/// Clear the split system at impact `b`; falls back to the tâtonnement when
/// the damped price iteration stalls.
pub fn clear_at_impact(
    system: &GrexitSystem,
    inputs: &GrexitInputs,
    impact: f64,
) -> Result<(ClearingResult<f64>, bool)> {
    let demand = demand_for_impact(inputs, impact)?;
    let shock = ShockSpec::zero(2);
    match price_equilibrium(
        &system.net,
        &system.rel,
        &system.policies,
        &demand,
        &shock,
        &inputs.params,
    ) {
        Ok(result) => Ok((result, true)),
        Err(Error::PriceNonConvergence { .. }) => {
            let out = tatonnement(
                &system.net,
                &system.rel,
                &system.policies,
                &demand,
                &shock,
                &inputs.params,
            )?;
            let converged = out.trace.converged;
            Ok((out.result, converged))
        }
        Err(e) => Err(e),
    }
}

/// Build the two-currency system from the calibration files.
pub fn build_system(inputs: &GrexitInputs) -> Result<(GrexitSystem, Vec<String>)> {
    let (names, aggregates) = clearnet_core::io::load_aggregates_csv(&inputs.aggregates)?;
    let matrix = clearnet_core::io::load_square_csv(&inputs.liabilities)?;
    let base = calibrate_from_aggregates(&aggregates, &matrix)?;
    let n = base.n_firms();

    // Single-currency baseline as-is.
    let rel_base = build_relative_liabilities(&base);
    let baseline_policies = FirmPolicies::uniform(
        PaymentRule::proportional().with_delta_scale(inputs.delta_scale),
        BehaviorRule::min_trading(),
        n,
    );
    let one = PriceVector::new(vec![1.0]).unwrap();
    let baseline = clearing_at_price(&base, &rel_base, &baseline_policies, &one, &inputs.params)?;
    let baseline_defaults = baseline
        .defaults
        .iter()
        .map(|&i| names[i].clone())
        .collect();

    let (exposure, home) = load_exposures(&inputs.exposures, &names)?;
    let net = split_two_currency(&base, &exposure, &home)?;
    let rel = build_relative_liabilities(&net);

    // Old currency first for foreign firms, new currency first at home.
    let foreign_rule = PaymentRule::priority(2)
        .with_delta_scale(inputs.delta_scale)
        .with_order(vec![0, 1]);
    let home_rule = PaymentRule::priority(2)
        .with_delta_scale(inputs.delta_scale)
        .with_order(vec![1, 0]);
    let mut policies = FirmPolicies::uniform(foreign_rule, BehaviorRule::min_trading(), n);
    for &i in &home {
        policies.set_payment(i, home_rule.clone());
    }

    Ok((
        GrexitSystem {
            net,
            rel,
            policies,
            names,
            home: home.into_iter().collect(),
        },
        baseline_defaults,
    ))
}

pub fn run_grexit(inputs: &GrexitInputs) -> Result<GrexitReport> {
    let (system, baseline_defaults) = build_system(inputs)?;
    let (result, converged) = clear_at_impact(&system, inputs, inputs.impact)?;
    let named = |defaults: &[usize]| -> Vec<String> {
        defaults.iter().map(|&i| system.names[i].clone()).collect()
    };
    let impact_curve: Vec<ImpactPoint> = inputs
        .impact_grid
        .par_iter()
        .map(|&b| {
            clear_at_impact(&system, inputs, b).map(|(res, ok)| ImpactPoint {
                impact: b,
                attained_rate: res.prices.get(1),
                converged: ok,
                defaulting: named(&res.defaults),
            })
        })
        .collect::<Result<_>>()?;
    Ok(GrexitReport {
        schema_version: GREXIT_SCHEMA_VERSION,
        n_firms: system.net.n_firms(),
        home_firms: system
            .home
            .iter()
            .map(|&i| system.names[i].clone())
            .collect(),
        baseline_defaults,
        impact: inputs.impact,
        attained_rate: result.prices.get(1),
        converged,
        defaulting: named(&result.defaults),
        impact_curve,
    })
}
