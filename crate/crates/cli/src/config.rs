//! Scenario configuration: one self-contained JSON document describing the
//! network source, the market, the regulation and utility rules, the shock
//! sweep, and the solver knobs.
//!
//! Indices in configuration files are 1-based to match the convention that
//! node 0 is the societal node and asset 1 is the numéraire; they are
//! converted to 0-based indices at the engine boundary.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use clearnet_core::behavior::{BehaviorRule, TieBreak};
use clearnet_core::clearing::{FirmPolicies, SolverParams};
use clearnet_core::error::{Error, Result};
use clearnet_core::market::{InverseDemand, ScalarCurve};
use clearnet_core::network::{
    build_relative_liabilities, random_network, split_two_currency, MultiLayerNetwork,
    RandomNetworkSpec, RelativeLiabilities,
};
use clearnet_core::payment::PaymentRule;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

fn schema_version_default() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn delta_scale_default() -> f64 {
    1e-3
}

fn sweep_asset_default() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub network: NetworkSource,
    pub inverse_demand: DemandSpec,
    #[serde(default)]
    pub payment_rule: PaymentRuleSpec,
    #[serde(default)]
    pub utility: UtilitySpec,
    #[serde(default)]
    pub firm_overrides: Vec<FirmOverride>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    /// A JSON network document on disk.
    File { path: PathBuf },
    /// A seeded random network.
    Random {
        n_firms: usize,
        #[serde(default = "two_assets")]
        n_assets: usize,
        link_prob: f64,
        #[serde(default = "one")]
        link_size: f64,
        #[serde(default = "one")]
        society_obligation: f64,
        #[serde(default)]
        endowment_low: f64,
        #[serde(default = "twenty")]
        endowment_high: f64,
    },
    /// Balance-sheet aggregates plus a square liabilities matrix, optionally
    /// split into two currencies.
    Calibrated {
        aggregates: PathBuf,
        liabilities: PathBuf,
        /// CSV `firm,exposure,home`; omit for a single-asset network.
        #[serde(default)]
        exposures: Option<PathBuf>,
    },
}

fn two_assets() -> usize {
    2
}
fn one() -> f64 {
    1.0
}
fn twenty() -> f64 {
    20.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandSpec {
    Constant {
        prices: Vec<f64>,
    },
    CappedLinear {
        intercept: Vec<f64>,
        slope: Vec<f64>,
        min_price: Vec<f64>,
        max_price: Vec<f64>,
    },
    /// Two-asset symmetric construction from the arctangent curve
    /// `f(z) = (amplitude·atan(−impact·z) + shift·π)/(shift·π)`.
    ArctanSymmetric {
        #[serde(default = "three")]
        amplitude: f64,
        #[serde(default = "two")]
        shift: f64,
        #[serde(default = "one")]
        impact: f64,
    },
    RatioForm {
        assets: usize,
        curve: CurveSpec,
    },
}

fn three() -> f64 {
    3.0
}
fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Constant {
        value: f64,
    },
    Atan {
        amplitude: f64,
        shift: f64,
        impact: f64,
    },
    CappedLinear {
        intercept: f64,
        slope: f64,
        min_value: f64,
        max_value: f64,
    },
    CappedExp {
        rate: f64,
        min_value: f64,
        max_value: f64,
    },
    Tabulated {
        points: Vec<(f64, f64)>,
    },
}

impl CurveSpec {
    pub fn to_curve(&self) -> ScalarCurve<f64> {
        match self {
            CurveSpec::Constant { value } => ScalarCurve::Constant { value: *value },
            CurveSpec::Atan {
                amplitude,
                shift,
                impact,
            } => ScalarCurve::Atan {
                amplitude: *amplitude,
                shift: *shift,
                impact: *impact,
            },
            CurveSpec::CappedLinear {
                intercept,
                slope,
                min_value,
                max_value,
            } => ScalarCurve::CappedLinear {
                intercept: *intercept,
                slope: *slope,
                lo: *min_value,
                hi: *max_value,
            },
            CurveSpec::CappedExp {
                rate,
                min_value,
                max_value,
            } => ScalarCurve::CappedExp {
                rate: *rate,
                lo: *min_value,
                hi: *max_value,
            },
            CurveSpec::Tabulated { points } => ScalarCurve::Tabulated {
                points: points.clone(),
            },
        }
    }
}

impl DemandSpec {
    pub fn build(&self) -> Result<InverseDemand<f64>> {
        match self {
            DemandSpec::Constant { prices } => InverseDemand::constant(prices.clone()),
            DemandSpec::CappedLinear {
                intercept,
                slope,
                min_price,
                max_price,
            } => InverseDemand::capped_linear(
                intercept.clone(),
                slope.clone(),
                min_price.clone(),
                max_price.clone(),
            ),
            DemandSpec::ArctanSymmetric {
                amplitude,
                shift,
                impact,
            } => InverseDemand::symmetric_two_asset(ScalarCurve::Atan {
                amplitude: *amplitude,
                shift: *shift,
                impact: *impact,
            }),
            DemandSpec::RatioForm { assets, curve } => {
                InverseDemand::ratio_form(curve.to_curve(), *assets)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PaymentRuleKind {
    Surplus,
    Priority,
    Proportional,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaymentRuleSpec {
    pub rule: PaymentRuleKind,
    /// Number of prioritized assets; defaults to all assets for the
    /// priority rule.
    #[serde(default)]
    pub mu: Option<usize>,
    #[serde(default = "delta_scale_default")]
    pub delta_scale: f64,
    /// Per-firm asset priority permutation, 1-based.
    #[serde(default)]
    pub priority_order: Option<Vec<usize>>,
}

impl Default for PaymentRuleSpec {
    fn default() -> Self {
        Self {
            rule: PaymentRuleKind::Surplus,
            mu: None,
            delta_scale: delta_scale_default(),
            priority_order: None,
        }
    }
}

impl PaymentRuleSpec {
    pub fn to_rule(&self, m: usize) -> Result<PaymentRule<f64>> {
        let rule = match self.rule {
            PaymentRuleKind::Surplus => PaymentRule::surplus(),
            PaymentRuleKind::Priority => PaymentRule::priority(self.mu.unwrap_or(m)),
            PaymentRuleKind::Proportional => PaymentRule::proportional(),
        };
        let mut rule = rule.with_delta_scale(self.delta_scale);
        if let Some(order) = &self.priority_order {
            let zero_based: Vec<usize> = order
                .iter()
                .map(|&k| {
                    k.checked_sub(1).ok_or_else(|| {
                        Error::InvalidInput("priority_order uses 1-based asset indices".into())
                    })
                })
                .collect::<Result<_>>()?;
            rule = rule.with_order(zero_based);
        }
        rule.validate(m)?;
        Ok(rule)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    MinTrading,
    AssetMax,
    ValueMax,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakSpec {
    #[default]
    LowestIndex,
    ProportionalSpread,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySpec {
    pub utility: UtilityKind,
    /// Target asset of the asset-max utility, 1-based.
    #[serde(default)]
    pub k_star: Option<usize>,
    #[serde(default)]
    pub tie_break: TieBreakSpec,
    /// Accepted for completeness: the societal node holds its inflow and
    /// never trades, so this setting does not change any equilibrium.
    #[serde(default)]
    pub society_utility: Option<UtilityKind>,
}

impl Default for UtilitySpec {
    fn default() -> Self {
        Self {
            utility: UtilityKind::MinTrading,
            k_star: None,
            tie_break: TieBreakSpec::default(),
            society_utility: None,
        }
    }
}

impl UtilitySpec {
    pub fn to_rule(&self, m: usize, reference: &[f64]) -> Result<BehaviorRule<f64>> {
        let rule = match self.utility {
            UtilityKind::MinTrading => BehaviorRule::min_trading(),
            UtilityKind::AssetMax => {
                let k = self
                    .k_star
                    .ok_or_else(|| Error::InvalidInput("asset_max utility needs k_star".into()))?;
                let k = k.checked_sub(1).ok_or_else(|| {
                    Error::InvalidInput("k_star uses 1-based asset indices".into())
                })?;
                BehaviorRule::asset_max(k)
            }
            UtilityKind::ValueMax => {
                let tie = match self.tie_break {
                    TieBreakSpec::LowestIndex => TieBreak::LowestIndex,
                    TieBreakSpec::ProportionalSpread => TieBreak::ProportionalSpread,
                };
                BehaviorRule::value_max(reference.to_vec()).with_tie_break(tie)
            }
        };
        rule.validate(m)?;
        Ok(rule)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmOverride {
    /// 1-based firm index.
    pub firm: usize,
    #[serde(default)]
    pub payment_rule: Option<PaymentRuleSpec>,
    #[serde(default)]
    pub utility: Option<UtilitySpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepQuantity {
    /// Initial price of the swept asset; the engine inverts the demand
    /// function to recover the pre-transacted quantity.
    #[default]
    Q0,
    /// Pre-transacted quantity in the swept asset.
    Gamma0,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values { values: Vec<f64> },
    Linspace { from: f64, to: f64, count: usize },
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        let points = match self {
            GridSpec::Values { values } => values.clone(),
            GridSpec::Linspace { from, to, count } => {
                if *count < 2 {
                    return Err(Error::InvalidInput("linspace grid needs count >= 2".into()));
                }
                (0..*count)
                    .map(|i| from + (to - from) * i as f64 / (*count as f64 - 1.0))
                    .collect()
            }
        };
        if points.is_empty() {
            return Err(Error::InvalidInput("sweep grid is empty".into()));
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub quantity: SweepQuantity,
    /// Swept asset, 1-based.
    #[serde(default = "sweep_asset_default")]
    pub asset: usize,
    pub grid: GridSpec,
    /// Also run the equilibrium-set scan at every sweep point.
    #[serde(default)]
    pub scan: bool,
    /// Write one tâtonnement trace CSV per sweep point.
    #[serde(default)]
    pub write_traces: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub fp_tol: Option<f64>,
    pub fp_max_iter: Option<usize>,
    pub step: Option<f64>,
    pub taton_tol: Option<f64>,
    pub taton_max_steps: Option<usize>,
    pub price_damping: Option<f64>,
    pub price_tol: Option<f64>,
    pub price_max_iter: Option<usize>,
    pub scan_grid: Option<usize>,
    pub trace_stride: Option<usize>,
}

impl SolverSpec {
    pub fn to_params(&self) -> SolverParams<f64> {
        let d = SolverParams::<f64>::default();
        SolverParams {
            fp_tol: self.fp_tol.unwrap_or(d.fp_tol),
            fp_max_iter: self.fp_max_iter.unwrap_or(d.fp_max_iter),
            taton_step: self.step.unwrap_or(d.taton_step),
            taton_tol: self.taton_tol.unwrap_or(d.taton_tol),
            taton_max_steps: self.taton_max_steps.unwrap_or(d.taton_max_steps),
            price_damping: self.price_damping.unwrap_or(d.price_damping),
            price_tol: self.price_tol.unwrap_or(d.price_tol),
            price_max_iter: self.price_max_iter.unwrap_or(d.price_max_iter),
            scan_grid: self.scan_grid.unwrap_or(d.scan_grid),
            trace_stride: self.trace_stride.unwrap_or(d.trace_stride),
        }
    }
}

/// Everything a scenario run needs, resolved from the configuration.
pub struct ScenarioContext {
    pub config: ScenarioConfig,
    pub net: MultiLayerNetwork<f64>,
    pub rel: RelativeLiabilities<f64>,
    pub demand: InverseDemand<f64>,
    pub policies: FirmPolicies<f64>,
    pub params: SolverParams<f64>,
    /// Firm names when the network came from calibration files.
    pub firm_names: Option<Vec<String>>,
    pub config_hash: String,
}

/// FNV-1a fingerprint of the canonical configuration JSON.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let canonical = serde_json::to_string(config).unwrap_or_default();
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in canonical.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// CSV `firm,exposure,home` aligned with the aggregates row order.
pub fn load_exposures(path: &Path, names: &[String]) -> Result<(Vec<f64>, BTreeSet<usize>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers != ["firm", "exposure", "home"] {
        return Err(Error::Parse(format!(
            "exposures CSV header {headers:?} does not match [\"firm\", \"exposure\", \"home\"]"
        )));
    }
    let mut exposure = Vec::new();
    let mut home = BTreeSet::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let firm = record.get(0).unwrap_or_default();
        if idx < names.len() && firm != names[idx] {
            return Err(Error::Parse(format!(
                "exposures row {} names firm {firm:?} but the aggregates list {:?}",
                idx + 2,
                names[idx]
            )));
        }
        let value: f64 = record
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::Parse(format!("exposures row {}: {e}", idx + 2)))?;
        let is_home: u8 = record
            .get(2)
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::Parse(format!("exposures row {}: {e}", idx + 2)))?;
        exposure.push(value);
        if is_home != 0 {
            home.insert(idx);
        }
    }
    if exposure.len() != names.len() {
        return Err(Error::Parse(format!(
            "exposures CSV has {} rows but the aggregates have {}",
            exposure.len(),
            names.len()
        )));
    }
    Ok((exposure, home))
}

/// Resolve a configuration into a runnable context.
pub fn build_context(config: &ScenarioConfig) -> Result<ScenarioContext> {
    if config.schema_version != CONFIG_SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported config schema_version {}, expected {}",
            config.schema_version, CONFIG_SCHEMA_VERSION
        )));
    }
    let mut firm_names = None;
    let net: MultiLayerNetwork<f64> = match &config.network {
        NetworkSource::File { path } => clearnet_core::io::load_network(path)?,
        NetworkSource::Random {
            n_firms,
            n_assets,
            link_prob,
            link_size,
            society_obligation,
            endowment_low,
            endowment_high,
        } => random_network(&RandomNetworkSpec {
            n_firms: *n_firms,
            n_assets: *n_assets,
            link_prob: *link_prob,
            link_size: *link_size,
            society_obligation: *society_obligation,
            endowment_range: (*endowment_low, *endowment_high),
            seed: config.seed,
        })?,
        NetworkSource::Calibrated {
            aggregates,
            liabilities,
            exposures,
        } => {
            let (names, aggs) = clearnet_core::io::load_aggregates_csv(aggregates)?;
            let matrix = clearnet_core::io::load_square_csv(liabilities)?;
            let base = clearnet_core::network::calibrate_from_aggregates(&aggs, &matrix)?;
            let net = match exposures {
                Some(path) => {
                    let (exposure, home) = load_exposures(path, &names)?;
                    split_two_currency(&base, &exposure, &home)?
                }
                None => base,
            };
            firm_names = Some(names);
            net
        }
    };
    let rel = build_relative_liabilities(&net);
    let demand = config.inverse_demand.build()?;
    if demand.n_assets() != net.n_assets() {
        return Err(Error::InvalidInput(format!(
            "inverse demand covers {} assets but the network has {}",
            demand.n_assets(),
            net.n_assets()
        )));
    }
    let m = net.n_assets();
    let n = net.n_firms();
    let reference = demand.price_at_zero().to_vec();
    let default_payment = config.payment_rule.to_rule(m)?;
    let default_utility = config.utility.to_rule(m, &reference)?;
    let mut policies = FirmPolicies::uniform(default_payment, default_utility, n);
    for over in &config.firm_overrides {
        let firm = over
            .firm
            .checked_sub(1)
            .ok_or_else(|| Error::InvalidInput("firm overrides use 1-based indices".into()))?;
        if firm >= n {
            return Err(Error::InvalidInput(format!(
                "firm override references firm {} but the network has {n} firms",
                over.firm
            )));
        }
        if let Some(spec) = &over.payment_rule {
            policies.set_payment(firm, spec.to_rule(m)?);
        }
        if let Some(spec) = &over.utility {
            policies.set_utility(firm, spec.to_rule(m, &reference)?);
        }
    }
    policies.validate(n, m)?;
    if let Some(sweep) = &config.sweep {
        if sweep.asset == 0 || sweep.asset > m {
            return Err(Error::InvalidInput(format!(
                "sweep asset {} is out of range for {} assets",
                sweep.asset, m
            )));
        }
        let (lo, hi) = demand.bounds();
        if matches!(sweep.quantity, SweepQuantity::Q0) {
            let k = sweep.asset - 1;
            for value in sweep.grid.points()? {
                if value < lo[k] - 1e-9 || value > hi[k] + 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "sweep value {value} lies outside the price bounds [{}, {}]",
                        lo[k], hi[k]
                    )));
                }
            }
        }
    }
    Ok(ScenarioContext {
        config_hash: config_hash(config),
        config: config.clone(),
        net,
        rel,
        demand,
        policies,
        params: config.solver.to_params(),
        firm_names,
    })
}

/// Fully-resolved configuration echo for auditability.
#[derive(Debug, Serialize)]
pub struct EffectiveConfig<'a> {
    pub config: &'a ScenarioConfig,
    pub config_hash: &'a str,
    pub n_firms: usize,
    pub n_assets: usize,
    pub price_bounds_low: Vec<f64>,
    pub price_bounds_high: Vec<f64>,
    pub unshocked_price: Vec<f64>,
    pub uniqueness_guaranteed: bool,
}

pub fn effective_config(ctx: &ScenarioContext) -> EffectiveConfig<'_> {
    let (lo, hi) = ctx.demand.bounds();
    EffectiveConfig {
        config: &ctx.config,
        config_hash: &ctx.config_hash,
        n_firms: ctx.net.n_firms(),
        n_assets: ctx.net.n_assets(),
        price_bounds_low: lo.to_vec(),
        price_bounds_high: hi.to_vec(),
        unshocked_price: ctx.demand.price_at_zero().to_vec(),
        uniqueness_guaranteed: clearnet_core::clearing::society_hypothesis(&ctx.net),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_specs_convert_with_one_based_indices() {
        let spec = PaymentRuleSpec {
            rule: PaymentRuleKind::Priority,
            mu: None,
            delta_scale: 1e-3,
            priority_order: Some(vec![2, 1]),
        };
        // mu defaults to m for the priority rule; the order is rebased.
        match spec.to_rule(2).unwrap() {
            PaymentRule::Priority { mu, order, .. } => {
                assert_eq!(mu, 2);
                assert_eq!(order, Some(vec![1, 0]));
            }
            other => panic!("unexpected rule {other:?}"),
        }

        let prop = PaymentRuleSpec {
            rule: PaymentRuleKind::Proportional,
            mu: None,
            delta_scale: 1e-3,
            priority_order: None,
        };
        assert!(matches!(
            prop.to_rule(2).unwrap(),
            PaymentRule::Priority { mu: 0, .. }
        ));

        let util = UtilitySpec {
            utility: UtilityKind::AssetMax,
            k_star: Some(2),
            tie_break: TieBreakSpec::LowestIndex,
            society_utility: None,
        };
        assert!(matches!(
            util.to_rule(2, &[1.0, 1.0]).unwrap(),
            BehaviorRule::AssetMax { asset: 1 }
        ));
        // k_star is mandatory for asset_max.
        let missing = UtilitySpec {
            k_star: None,
            ..util
        };
        assert!(missing.to_rule(2, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn grid_specs_produce_points() {
        let grid = GridSpec::Linspace {
            from: 0.0,
            to: 1.0,
            count: 5,
        };
        assert_eq!(grid.points().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let grid = GridSpec::Values { values: vec![] };
        assert!(grid.points().is_err());
    }

    #[test]
    fn config_hash_tracks_content() {
        let text = r#"{
            "network": {"type": "random", "n_firms": 3, "link_prob": 0.2},
            "inverse_demand": {"family": "constant", "prices": [1.0, 1.0]}
        }"#;
        let a: ScenarioConfig = serde_json::from_str(text).unwrap();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }
}
