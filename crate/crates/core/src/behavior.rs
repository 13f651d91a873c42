//! Firm utilities and the exact solver for the holdings optimization: each
//! firm picks final holdings above its payment floor without spending more
//! than its realized wealth.
//!
//! All three shipped utilities conserve mark-to-market wealth exactly: the
//! budget always binds, so `q' y = q' e` for every firm.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::network::{
    realized_inflow, HoldingsMatrix, MultiLayerNetwork, PriceVector, RelativeLiabilities,
};
use crate::payment::{payment_rows, PaymentRule};
use crate::scalar::{dot, pos, real, smax, Real};

/// Relative budget tolerance of the projection bisection.
const BUDGET_TOL: f64 = 1e-12;
const BISECT_MAX_ITER: usize = 200;
/// Floor value overshoots up to this relative rounding slack are clamped.
const FLOOR_SLACK: f64 = 1e-9;

/// How a firm uses wealth left over after payments.
#[derive(Debug, Clone, PartialEq)]
pub enum BehaviorRule<S> {
    /// Trade as little as possible: the Euclidean projection of the inflow
    /// onto the feasible set.
    MinTrading,
    /// Put all residual wealth into one asset.
    AssetMax { asset: usize },
    /// Maximize portfolio value at the reference (pre-crisis) prices.
    ValueMax {
        reference: Vec<S>,
        tie_break: TieBreak,
    },
}

/// Deterministic resolution when prices are proportional to the value-max
/// reference and every asset is equally attractive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    /// All residual wealth goes into the lowest-index best asset.
    LowestIndex,
    /// Residual wealth is spread over the best assets in equal value shares.
    ProportionalSpread,
}

impl<S: Real> BehaviorRule<S> {
    pub fn min_trading() -> Self {
        BehaviorRule::MinTrading
    }

    pub fn asset_max(asset: usize) -> Self {
        BehaviorRule::AssetMax { asset }
    }

    pub fn value_max(reference: Vec<S>) -> Self {
        BehaviorRule::ValueMax {
            reference,
            tie_break: TieBreak::LowestIndex,
        }
    }

    pub fn with_tie_break(mut self, tb: TieBreak) -> Self {
        if let BehaviorRule::ValueMax { tie_break, .. } = &mut self {
            *tie_break = tb;
        }
        self
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            BehaviorRule::MinTrading => Ok(()),
            BehaviorRule::AssetMax { asset } => {
                if *asset >= m {
                    Err(Error::InvalidInput(format!(
                        "asset-max target {} exceeds the asset count {m}",
                        asset + 1
                    )))
                } else {
                    Ok(())
                }
            }
            BehaviorRule::ValueMax { reference, .. } => {
                if reference.len() != m {
                    return Err(Error::InvalidInput(format!(
                        "value-max reference has {} components, expected {m}",
                        reference.len()
                    )));
                }
                if reference
                    .iter()
                    .any(|r| !(*r > S::zero()) || !r.is_finite())
                {
                    return Err(Error::InvalidInput(
                        "value-max reference prices must be finite and > 0".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// One firm's holdings problem: payment floor, realized inflow, prices.
#[derive(Debug, Clone, Copy)]
pub struct HoldingsProblem<'a, S> {
    pub floor: &'a [S],
    pub inflow: &'a [S],
    pub prices: &'a [S],
}

impl<'a, S: Real> HoldingsProblem<'a, S> {
    pub fn budget(&self) -> S {
        dot(self.prices, self.inflow)
    }
}

/// Maximize the firm's utility over `{y >= floor, q'y <= q'e}`.
///
/// The returned holdings always satisfy `q'y = q'e`: no wealth is thrown
/// away. A floor whose value exceeds the budget by more than rounding noise
/// is an internal contract violation.
pub fn solve_holdings<S: Real>(
    rule: &BehaviorRule<S>,
    problem: &HoldingsProblem<'_, S>,
) -> Result<Vec<S>> {
    let m = problem.floor.len();
    debug_assert_eq!(problem.inflow.len(), m);
    debug_assert_eq!(problem.prices.len(), m);
    let q = problem.prices;
    let wealth = problem.budget();

    let mut floor = problem.floor.to_vec();
    let floor_value = dot(q, &floor);
    if floor_value > wealth {
        let excess_rel = ((floor_value - wealth) / smax(S::one(), wealth))
            .to_f64()
            .unwrap_or(f64::INFINITY);
        if excess_rel > FLOOR_SLACK {
            return Err(Error::InfeasibleFloor { excess_rel });
        }
        // Rounding pushed the floor marginally past the budget; scale it back.
        let shrink = wealth / floor_value;
        for v in floor.iter_mut() {
            *v *= shrink;
        }
    }
    let floor_value = dot(q, &floor);
    let residual = pos(wealth - floor_value);

    let y = match rule {
        BehaviorRule::MinTrading => {
            let e = problem.inflow;
            if e.iter().zip(floor.iter()).all(|(&ek, &fk)| ek >= fk) {
                // Inflow already feasible: hold it unchanged.
                return Ok(e.to_vec());
            }
            // Projection of the inflow: y_k(lambda) = max(floor_k, e_k - lambda q_k)
            // with lambda >= 0 driving q'y(lambda) down to the budget.
            let holdings_at = |lambda: S| -> Vec<S> {
                (0..m)
                    .map(|k| smax(floor[k], e[k] - lambda * q[k]))
                    .collect()
            };
            let mut lo = S::zero();
            let mut hi = (0..m)
                .map(|k| pos(e[k] - floor[k]) / q[k])
                .fold(S::zero(), smax);
            let tol = real::<S>(BUDGET_TOL) * smax(S::one(), wealth);
            let mut best = holdings_at(hi);
            for _ in 0..BISECT_MAX_ITER {
                let mid = (lo + hi) / real::<S>(2.0);
                let y = holdings_at(mid);
                let gap = dot(q, &y) - wealth;
                if gap.abs() <= tol {
                    best = y;
                    break;
                }
                if gap > S::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                    best = y;
                }
            }
            best
        }
        BehaviorRule::AssetMax { asset } => {
            let mut y = floor.clone();
            y[*asset] += residual / q[*asset];
            y
        }
        BehaviorRule::ValueMax {
            reference,
            tie_break,
        } => {
            let ratios: Vec<S> = (0..m).map(|k| reference[k] / q[k]).collect();
            let best = ratios
                .iter()
                .fold(S::neg_infinity(), |acc, &r| smax(acc, r));
            let mut y = floor.clone();
            match tie_break {
                TieBreak::LowestIndex => {
                    let k = ratios.iter().position(|&r| r == best).expect("nonempty");
                    y[k] += residual / q[k];
                }
                TieBreak::ProportionalSpread => {
                    let window = real::<S>(1e-12) * best.abs();
                    let ties: Vec<usize> = (0..m).filter(|&k| ratios[k] >= best - window).collect();
                    let share = residual / real::<S>(ties.len() as f64);
                    for &k in &ties {
                        y[k] += share / q[k];
                    }
                }
            }
            y
        }
    };
    Ok(y)
}

/// One synchronous application of the clearing mechanism: realized inflows,
/// then payments, then utility-optimal holdings, all at the same input
/// holdings `y` and prices `q`.
#[derive(Debug, Clone)]
pub struct ClearingStep<S> {
    pub inflow: Array2<S>,
    pub payments: Array2<S>,
    pub holdings: Array2<S>,
}

pub fn clearing_step<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    payment_rules: &[PaymentRule<S>],
    utilities: &[BehaviorRule<S>],
    holdings: &HoldingsMatrix<S>,
    prices: &PriceVector<S>,
) -> Result<ClearingStep<S>> {
    let (n, m) = rel.totals().dim();
    debug_assert_eq!(utilities.len(), n);
    let inflow = realized_inflow(net, rel, holdings);
    let payments = payment_rows(payment_rules, rel.totals(), &inflow, prices);
    let mut next = Array2::zeros((n, m));
    for i in 0..n {
        let problem = HoldingsProblem {
            floor: payments.row(i).to_slice().expect("contiguous"),
            inflow: inflow.row(i).to_slice().expect("contiguous"),
            prices: prices.as_slice(),
        };
        let y = solve_holdings(&utilities[i], &problem)?;
        for k in 0..m {
            next[[i, k]] = y[k];
        }
    }
    Ok(ClearingStep {
        inflow,
        payments,
        holdings: next,
    })
}

/// The clearing mechanism `Y(y, q)`: updated holdings for every firm.
pub fn holdings_map<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    payment_rules: &[PaymentRule<S>],
    utilities: &[BehaviorRule<S>],
    holdings: &HoldingsMatrix<S>,
    prices: &PriceVector<S>,
) -> Result<HoldingsMatrix<S>> {
    Ok(clearing_step(net, rel, payment_rules, utilities, holdings, prices)?.holdings)
}
