//! Clearing engine for financial networks with obligations payable in
//! multiple illiquid assets.
//!
//! Firms owe each other (and an external societal node) physical quantities
//! of several assets. Given prices, each firm pays what a regulatory payment
//! scheme dictates and rebalances the remainder through a utility; the
//! clearing holdings are the fixed point of that mechanism. With price
//! impacts, an inverse demand function maps the firms' net trades back into
//! prices, and the engine computes joint price-holdings equilibria, the full
//! equilibrium set on two-asset markets, and the tâtonnement-attained
//! equilibrium under an initial shock.
//!
//! All numerics are generic over the scalar type through [`scalar::Real`];
//! the aliases below fix `f64` for ordinary use.

pub mod behavior;
pub mod clearing;
pub mod error;
pub mod io;
pub mod market;
pub mod network;
pub mod payment;
pub mod scalar;

pub use behavior::{BehaviorRule, HoldingsProblem, TieBreak};
pub use clearing::{
    ClearingResult, DiagnosticsReport, Direction, FictitiousDefaultOutcome, FirmPolicies, Selector,
    SolverParams, TatonnementOutcome, TatonnementTrace, TraceSample,
};
pub use error::{Error, Result};
pub use market::{InverseDemand, ScalarCurve, ShockSpec};
pub use network::{
    BalanceSheetAggregates, HoldingsMatrix, MultiLayerNetwork, PriceVector, RandomNetworkSpec,
    RelativeLiabilities,
};
pub use payment::{PaymentProblem, PaymentRule};
pub use scalar::Real;

/// `f64` network.
pub type Network = network::MultiLayerNetwork<f64>;
/// `f64` price vector.
pub type Prices = network::PriceVector<f64>;
/// `f64` holdings matrix.
pub type Holdings = network::HoldingsMatrix<f64>;
/// `f64` inverse demand function.
pub type Demand = market::InverseDemand<f64>;
/// `f64` clearing result.
pub type Clearing = clearing::ClearingResult<f64>;
