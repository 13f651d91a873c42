//! Equilibrium computations: clearing holdings at fixed prices, the
//! fictitious default cascade, joint price-holdings equilibria, the
//! tâtonnement price adjustment, and exhaustive two-asset equilibrium scans.
//!
//! The clearing mechanism is monotone in the holdings matrix, so the
//! greatest and least fixed points are reached by Picard iteration from the
//! top of the holdings lattice (every firm's full-payment wealth converted
//! into each asset) and from zero respectively. Price equilibria compose the
//! fixed-price clearing with the inverse demand function through the net
//! trade vector.

use ndarray::Array2;

use crate::behavior::{clearing_step, BehaviorRule};
use crate::error::{Error, Result};
use crate::market::{InverseDemand, ShockSpec};
use crate::network::{
    realized_inflow, society_inflow, HoldingsMatrix, MultiLayerNetwork, PriceVector,
    RelativeLiabilities,
};
use crate::payment::{payment_rows, PaymentRule};
use crate::scalar::{clamp, dot, pos, real, smax, smin, Real};

/// Default-classification tolerance: firm `i` defaults when
/// `y[i][k] < pbar[i][k] - DEFAULT_TOL * (1 + pbar[i][k])` for some asset.
const DEFAULT_TOL: f64 = 1e-9;

/// Which fixed point the Picard iteration targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Greatest,
    Least,
}

/// How the reported solution was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Greatest,
    Least,
    /// Terminal point of a price adjustment process.
    Attained,
}

/// Per-firm payment and utility rules.
#[derive(Debug, Clone)]
pub struct FirmPolicies<S> {
    pub payments: Vec<PaymentRule<S>>,
    pub utilities: Vec<BehaviorRule<S>>,
}

impl<S: Real> FirmPolicies<S> {
    pub fn uniform(payment: PaymentRule<S>, utility: BehaviorRule<S>, n: usize) -> Self {
        Self {
            payments: vec![payment; n],
            utilities: vec![utility; n],
        }
    }

    pub fn set_payment(&mut self, firm: usize, rule: PaymentRule<S>) {
        self.payments[firm] = rule;
    }

    pub fn set_utility(&mut self, firm: usize, rule: BehaviorRule<S>) {
        self.utilities[firm] = rule;
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.payments.len() != n || self.utilities.len() != n {
            return Err(Error::InvalidInput(format!(
                "policies cover {} payment rules and {} utilities, expected {n} each",
                self.payments.len(),
                self.utilities.len()
            )));
        }
        for rule in &self.payments {
            rule.validate(m)?;
        }
        for rule in &self.utilities {
            rule.validate(m)?;
        }
        Ok(())
    }
}

/// Solver knobs with the engine defaults.
#[derive(Debug, Clone)]
pub struct SolverParams<S> {
    /// Sup-norm tolerance of the holdings Picard iteration, scaled by
    /// `(1 + problem scale)`.
    pub fp_tol: S,
    pub fp_max_iter: usize,
    /// Euler step of the tâtonnement discretization.
    pub taton_step: S,
    /// Update-norm termination threshold of the tâtonnement.
    pub taton_tol: S,
    pub taton_max_steps: usize,
    /// Damping of the price Picard iteration.
    pub price_damping: S,
    /// Residual termination threshold of the price Picard iteration.
    pub price_tol: S,
    pub price_max_iter: usize,
    /// Grid resolution of the equilibrium-set scan.
    pub scan_grid: usize,
    /// Keep every `trace_stride`-th tâtonnement sample.
    pub trace_stride: usize,
}

impl<S: Real> Default for SolverParams<S> {
    fn default() -> Self {
        Self {
            fp_tol: real(1e-10),
            fp_max_iter: 10_000,
            taton_step: real(0.1),
            taton_tol: real(1e-10),
            taton_max_steps: 20_000,
            price_damping: real(0.5),
            price_tol: real(1e-9),
            price_max_iter: 5_000,
            scan_grid: 2_000,
            trace_stride: 1,
        }
    }
}

/// A clearing solution with its diagnostics.
#[derive(Debug, Clone)]
pub struct ClearingResult<S> {
    pub holdings: HoldingsMatrix<S>,
    pub prices: PriceVector<S>,
    /// Realized payments `pbar ∧ y`.
    pub payments: Array2<S>,
    /// Firms short of their obligation in some asset (0-based).
    pub defaults: Vec<usize>,
    pub iterations: usize,
    /// Fixed-point gap at exit (sup-norm of the last update).
    pub residual: S,
    pub selector: Selector,
    /// Whether every firm owes the societal node in every asset, which
    /// guarantees the fixed-price clearing is unique.
    pub uniqueness_guaranteed: bool,
}

/// Scale used to make tolerances relative: the largest endowment or
/// obligation in the system.
fn problem_scale<S: Real>(net: &MultiLayerNetwork<S>, rel: &RelativeLiabilities<S>) -> S {
    let mut scale = S::zero();
    for &v in net.endowments().iter() {
        scale = smax(scale, v);
    }
    for &v in rel.totals().iter() {
        scale = smax(scale, v);
    }
    scale
}

/// Do all firms owe the societal node in every asset?
pub fn society_hypothesis<S: Real>(net: &MultiLayerNetwork<S>) -> bool {
    (0..net.n_firms()).all(|i| (0..net.n_assets()).all(|k| net.liability(i, 0, k) > S::zero()))
}

/// Top of the holdings lattice at price `q`: each firm's full-payment wealth
/// converted entirely into each asset. Every clearing fixed point lies below
/// it componentwise.
pub fn top_holdings<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    prices: &PriceVector<S>,
) -> HoldingsMatrix<S> {
    let n = net.n_firms();
    let m = net.n_assets();
    let full_inflow = realized_inflow(net, rel, &rel.totals().clone());
    let mut top = Array2::zeros((n, m));
    for i in 0..n {
        let wealth = dot(
            prices.as_slice(),
            full_inflow.row(i).to_slice().expect("contiguous"),
        );
        for k in 0..m {
            top[[i, k]] = wealth / prices.get(k);
        }
    }
    top
}

/// Firms holding less than they owe in some asset, beyond rounding.
pub fn default_set<S: Real>(
    rel: &RelativeLiabilities<S>,
    holdings: &HoldingsMatrix<S>,
) -> Vec<usize> {
    let (n, m) = rel.totals().dim();
    let tol = real::<S>(DEFAULT_TOL);
    (0..n)
        .filter(|&i| {
            (0..m).any(|k| {
                let owed = rel.total(i, k);
                holdings[[i, k]] < owed - tol * (S::one() + owed)
            })
        })
        .collect()
}

/// Net quantities the firms hand to the market: the sum over firms of what
/// each has available minus what it ends up holding,
/// `Σ_i (x_i + Σ_j a_ji [pbar_j ∧ y_j] - y_i)` per asset.
///
/// Payments delivered to the societal node leave the interbank system and
/// are absorbed there; they are not sales into the market. (Summing
/// `x_i + [pbar_i ∧ y_i] - y_i` instead would silently dump the societal
/// node's inflow onto the market; the two agree exactly when no firm owes
/// node 0.)
pub fn net_trades<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    holdings: &HoldingsMatrix<S>,
) -> Vec<S> {
    let n = net.n_firms();
    let m = net.n_assets();
    let inflow = realized_inflow(net, rel, holdings);
    let mut z = vec![S::zero(); m];
    for i in 0..n {
        for k in 0..m {
            z[k] += inflow[[i, k]] - holdings[[i, k]];
        }
    }
    z
}

/// Greatest or least clearing holdings at a fixed price, by monotone Picard
/// iteration. Errors on non-convergence or if an iterate moves against the
/// lattice direction (the rules violate the monotonicity hypotheses).
pub fn clearing_holdings<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    policies: &FirmPolicies<S>,
    prices: &PriceVector<S>,
    direction: Direction,
    params: &SolverParams<S>,
) -> Result<ClearingResult<S>> {
    let n = net.n_firms();
    let m = net.n_assets();
    policies.validate(n, m)?;
    if prices.len() != m {
        return Err(Error::InvalidInput(format!(
            "price vector has {} components, expected {m}",
            prices.len()
        )));
    }
    let scale = problem_scale(net, rel);
    let tol = params.fp_tol * (S::one() + scale);
    let slack = real::<S>(1e-8) * (S::one() + scale);

    let mut y = match direction {
        Direction::Greatest => top_holdings(net, rel, prices),
        Direction::Least => Array2::zeros((n, m)),
    };
    let mut residual = S::infinity();
    let mut iterations = 0;
    while iterations < params.fp_max_iter {
        iterations += 1;
        let next = clearing_step(
            net,
            rel,
            &policies.payments,
            &policies.utilities,
            &y,
            prices,
        )?
        .holdings;
        let mut change = S::zero();
        for (a, b) in y.iter().zip(next.iter()) {
            change = smax(change, (*a - *b).abs());
            let drift = match direction {
                Direction::Greatest => *b - *a,
                Direction::Least => *a - *b,
            };
            if drift > slack {
                return Err(Error::MonotonicityViolation(format!(
                    "iterate moved {} past the previous one in a {:?} iteration",
                    drift, direction
                )));
            }
        }
        y = next;
        residual = change;
        if change <= tol {
            let payments = capped(rel, &y);
            let defaults = default_set(rel, &y);
            return Ok(ClearingResult {
                holdings: y,
                prices: prices.clone(),
                payments,
                defaults,
                iterations,
                residual,
                selector: match direction {
                    Direction::Greatest => Selector::Greatest,
                    Direction::Least => Selector::Least,
                },
                uniqueness_guaranteed: society_hypothesis(net),
            });
        }
    }
    Err(Error::NonConvergence {
        iterations,
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

fn capped<S: Real>(rel: &RelativeLiabilities<S>, holdings: &HoldingsMatrix<S>) -> Array2<S> {
    let (n, m) = rel.totals().dim();
    Array2::from_shape_fn((n, m), |(i, k)| smin(rel.total(i, k), holdings[[i, k]]))
}

/// Outcome of the fictitious default cascade.
#[derive(Debug, Clone)]
pub struct FictitiousDefaultOutcome<S> {
    pub result: ClearingResult<S>,
    /// Insolvency set after each cascade level (strictly growing).
    pub cascade: Vec<Vec<usize>>,
    /// Picard iterations spent on each level's restricted fixed point.
    pub inner_iterations: Vec<usize>,
}

/// Fictitious default algorithm: trial full payments, grow the insolvency
/// set by the mark-to-market test, and solve the payment fixed point
/// restricted to the defaulting firms at each level. Terminates in at most
/// `n` levels and reproduces the greatest clearing holdings.
pub fn fictitious_default<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    policies: &FirmPolicies<S>,
    prices: &PriceVector<S>,
    params: &SolverParams<S>,
) -> Result<FictitiousDefaultOutcome<S>> {
    let n = net.n_firms();
    let m = net.n_assets();
    policies.validate(n, m)?;
    let scale = problem_scale(net, rel);
    let tol = params.fp_tol * (S::one() + scale);
    let slack = real::<S>(1e-8) * (S::one() + scale);
    let q = prices.as_slice();

    let totals = rel.totals().clone();
    let mut payments = totals.clone();
    let mut insolvent: Vec<bool> = vec![false; n];
    let mut cascade: Vec<Vec<usize>> = Vec::new();
    let mut inner_iterations: Vec<usize> = Vec::new();

    for _level in 0..=n {
        // Trial holdings from the current payments, then the insolvency test
        // q'(y_i - pbar_i) < 0 with the default tolerance.
        let trial = realized_inflow(net, rel, &payments);
        let mut next_insolvent = insolvent.clone();
        for i in 0..n {
            if next_insolvent[i] {
                continue;
            }
            let equity = dot(q, trial.row(i).to_slice().expect("contiguous"))
                - dot(q, totals.row(i).to_slice().expect("contiguous"));
            let owed_value = dot(q, totals.row(i).to_slice().expect("contiguous"));
            if equity < -real::<S>(DEFAULT_TOL) * (S::one() + owed_value) {
                next_insolvent[i] = true;
            }
        }
        if next_insolvent == insolvent {
            // Stable insolvency set: finish with one holdings update.
            let step = clearing_step(
                net,
                rel,
                &policies.payments,
                &policies.utilities,
                &payments,
                prices,
            )?;
            let holdings = step.holdings;
            let check = clearing_step(
                net,
                rel,
                &policies.payments,
                &policies.utilities,
                &holdings,
                prices,
            )?
            .holdings;
            let mut residual = S::zero();
            for (a, b) in holdings.iter().zip(check.iter()) {
                residual = smax(residual, (*a - *b).abs());
            }
            let payments_out = capped(rel, &holdings);
            let defaults = default_set(rel, &holdings);
            return Ok(FictitiousDefaultOutcome {
                result: ClearingResult {
                    holdings,
                    prices: prices.clone(),
                    payments: payments_out,
                    defaults,
                    iterations: cascade.len(),
                    residual,
                    selector: Selector::Greatest,
                    uniqueness_guaranteed: society_hypothesis(net),
                },
                cascade,
                inner_iterations,
            });
        }
        insolvent = next_insolvent;
        cascade.push((0..n).filter(|&i| insolvent[i]).collect());

        // Maximal solution of the payment fixed point restricted to the
        // insolvent firms, by Picard iteration downward from full payment.
        let mut p = totals.clone();
        let mut iters = 0;
        loop {
            iters += 1;
            let inflow = realized_inflow(net, rel, &p);
            let solved = payment_rows(&policies.payments, &totals, &inflow, prices);
            let mut next = totals.clone();
            for i in 0..n {
                if insolvent[i] {
                    for k in 0..m {
                        next[[i, k]] = solved[[i, k]];
                    }
                }
            }
            let mut change = S::zero();
            for (a, b) in p.iter().zip(next.iter()) {
                change = smax(change, (*a - *b).abs());
                if *b - *a > slack {
                    return Err(Error::MonotonicityViolation(
                        "restricted payment iterate increased".into(),
                    ));
                }
            }
            p = next;
            if change <= tol {
                break;
            }
            if iters >= params.fp_max_iter {
                return Err(Error::NonConvergence {
                    iterations: iters,
                    residual: change.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        inner_iterations.push(iters);
        payments = p;
    }
    Err(Error::MonotonicityViolation(
        "fictitious default cascade exceeded n levels".into(),
    ))
}

/// Fixed-price clearing used inside the price maps: the greatest holdings,
/// which equal the unique ones whenever the societal-node hypothesis holds.
pub fn clearing_at_price<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    policies: &FirmPolicies<S>,
    prices: &PriceVector<S>,
    params: &SolverParams<S>,
) -> Result<ClearingResult<S>> {
    clearing_holdings(net, rel, policies, prices, Direction::Greatest, params)
}

/// The price-map residual `F(gamma0 + net_trades(y*(q))) - q` together with
/// the clearing behind it.
fn price_residual<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    policies: &FirmPolicies<S>,
    demand: &InverseDemand<S>,
    shock: &ShockSpec<S>,
    prices: &PriceVector<S>,
    params: &SolverParams<S>,
) -> Result<(Vec<S>, ClearingResult<S>)> {
    let clearing = clearing_at_price(net, rel, policies, prices, params)?;
    let mut z = net_trades(net, rel, &clearing.holdings);
    for (zk, g) in z.iter_mut().zip(shock.gamma0().iter()) {
        *zk += *g;
    }
    let mapped = demand.eval(&z);
    let residual: Vec<S> = (0..demand.n_assets())
        .map(|k| mapped.get(k) - prices.get(k))
        .collect();
    Ok((residual, clearing))
}

/// Joint price-holdings equilibrium by damped Picard iteration on the price,
/// starting from the shocked price `F(gamma0)`. Errors on non-convergence;
/// the tâtonnement is the fallback.
pub fn price_equilibrium<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    policies: &FirmPolicies<S>,
    demand: &InverseDemand<S>,
    shock: &ShockSpec<S>,
    params: &SolverParams<S>,
) -> Result<ClearingResult<S>> {
    if demand.n_assets() != net.n_assets() {
        return Err(Error::InvalidInput(
            "inverse demand and network disagree on the asset count".into(),
        ));
    }
    let (lo, hi) = demand.bounds();
    let price_scale = hi.iter().fold(S::one(), |acc, &v| smax(acc, v));
    let tol = params.price_tol * price_scale;
    let mut q = shock.initial_price(demand);
    let mut damping = params.price_damping;
    let mut flip_streak = vec![0usize; demand.n_assets()];
    let mut prev_sign = vec![0i8; demand.n_assets()];

    for iteration in 1..=params.price_max_iter {
        let (residual, clearing) = price_residual(net, rel, policies, demand, shock, &q, params)?;
        let sup = residual.iter().fold(S::zero(), |acc, r| smax(acc, r.abs()));
        if sup <= tol {
            return Ok(ClearingResult {
                prices: q,
                iterations: iteration,
                residual: sup,
                selector: Selector::Attained,
                ..clearing
            });
        }
        halve_on_oscillation(&residual, &mut prev_sign, &mut flip_streak, &mut damping);
        let next: Vec<S> = (0..q.len())
            .map(|k| clamp(q.get(k) + damping * residual[k], lo[k], hi[k]))
            .collect();
        q = PriceVector::new(next).expect("prices stay in the positive box");
    }
    Err(Error::PriceNonConvergence {
        iterations: params.price_max_iter,
        residual: f64::NAN,
    })
}

/// One recorded tâtonnement sample.
#[derive(Debug, Clone)]
pub struct TraceSample<S> {
    pub time: S,
    pub prices: Vec<S>,
}

/// The discretized price path of a tâtonnement run.
#[derive(Debug, Clone)]
pub struct TatonnementTrace<S> {
    pub samples: Vec<TraceSample<S>>,
    /// Whether the update norm dropped below tolerance within the budget.
    pub converged: bool,
    pub steps: usize,
    /// Step size at exit (halved on oscillation).
    pub final_step: S,
    /// Price-map residual of the deterministic tie-break selection at the
    /// terminal point. Where firm optima are set-valued (prices proportional
    /// to a value-max reference) the process converges onto the selection's
    /// sign change and this stays bounded away from zero even though the
    /// terminal price is an equilibrium of the set-valued map.
    pub residual: S,
}

/// Tâtonnement outcome: the trace plus the attained clearing solution.
#[derive(Debug, Clone)]
pub struct TatonnementOutcome<S> {
    pub trace: TatonnementTrace<S>,
    pub result: ClearingResult<S>,
}

/// Explicit Euler discretization of the price adjustment
/// `dq = [F(gamma0 + net_trades(q)) - q] dt` from `q0 = F(gamma0)`.
///
/// The step is halved whenever a residual component flips sign in two
/// consecutive steps; iteration stops once the update norm drops below the
/// tolerance. Exceeding the step budget is not an error: the partial trace
/// is returned with `converged = false`.
pub fn tatonnement<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    policies: &FirmPolicies<S>,
    demand: &InverseDemand<S>,
    shock: &ShockSpec<S>,
    params: &SolverParams<S>,
) -> Result<TatonnementOutcome<S>> {
    if demand.n_assets() != net.n_assets() {
        return Err(Error::InvalidInput(
            "inverse demand and network disagree on the asset count".into(),
        ));
    }
    if !(params.taton_step > S::zero() && params.taton_step <= S::one()) {
        return Err(Error::InvalidInput(format!(
            "tâtonnement step must lie in (0, 1], got {}",
            params.taton_step
        )));
    }
    let (lo, hi) = demand.bounds();
    let price_scale = hi.iter().fold(S::one(), |acc, &v| smax(acc, v));
    let tol = params.taton_tol * price_scale;
    let stride = params.trace_stride.max(1);

    let mut q = shock.initial_price(demand);
    let mut h = params.taton_step;
    let mut time = S::zero();
    let mut samples = vec![TraceSample {
        time,
        prices: q.to_vec(),
    }];
    let mut prev_sign = vec![0i8; demand.n_assets()];
    let mut flip_streak = vec![0usize; demand.n_assets()];
    let mut converged = false;
    let mut steps = 0;

    while steps < params.taton_max_steps {
        steps += 1;
        let (residual, _) = price_residual(net, rel, policies, demand, shock, &q, params)?;
        halve_on_oscillation(&residual, &mut prev_sign, &mut flip_streak, &mut h);
        let next: Vec<S> = (0..q.len())
            .map(|k| clamp(q.get(k) + h * residual[k], lo[k], hi[k]))
            .collect();
        let movement = next
            .iter()
            .zip(q.as_slice().iter())
            .fold(S::zero(), |acc, (a, b)| smax(acc, (*a - *b).abs()));
        q = PriceVector::new(next).expect("prices stay in the positive box");
        time += h;
        if steps % stride == 0 {
            samples.push(TraceSample {
                time,
                prices: q.to_vec(),
            });
        }
        if movement <= tol {
            converged = true;
            break;
        }
    }
    if samples.last().map(|s| s.time) != Some(time) {
        samples.push(TraceSample {
            time,
            prices: q.to_vec(),
        });
    }

    // Clear once more at the terminal price to report the attained solution.
    let (residual, clearing) = price_residual(net, rel, policies, demand, shock, &q, params)?;
    let sup = residual.iter().fold(S::zero(), |acc, r| smax(acc, r.abs()));
    Ok(TatonnementOutcome {
        trace: TatonnementTrace {
            samples,
            converged,
            steps,
            final_step: h,
            residual: sup,
        },
        result: ClearingResult {
            prices: q,
            iterations: steps,
            residual: sup,
            selector: Selector::Attained,
            ..clearing
        },
    })
}

/// Track residual sign flips per component and halve the step after two
/// consecutive flips, preserving the one-dimensional attractor argument.
fn halve_on_oscillation<S: Real>(
    residual: &[S],
    prev_sign: &mut [i8],
    flip_streak: &mut [usize],
    step: &mut S,
) {
    let floor = real::<S>(1e-15);
    for (k, r) in residual.iter().enumerate() {
        let sign: i8 = if *r > S::zero() {
            1
        } else if *r < S::zero() {
            -1
        } else {
            0
        };
        if sign != 0 && prev_sign[k] != 0 && sign != prev_sign[k] {
            flip_streak[k] += 1;
            if flip_streak[k] >= 2 {
                *step = smax(*step / real::<S>(2.0), floor);
                flip_streak[k] = 0;
            }
        } else if sign == prev_sign[k] {
            flip_streak[k] = 0;
        }
        if sign != 0 {
            prev_sign[k] = sign;
        }
    }
}

/// All clearing prices of a two-asset market: the residual
/// `F2(gamma0 + net_trades) - q2` is evaluated on a grid over the second
/// asset's price bounds, sign changes are bisected to `1e-10`, and roots are
/// deduplicated within `1e-8`. Asset 1 must be the numéraire (constant
/// first component).
pub fn equilibrium_set_scan<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    policies: &FirmPolicies<S>,
    demand: &InverseDemand<S>,
    shock: &ShockSpec<S>,
    params: &SolverParams<S>,
) -> Result<Vec<PriceVector<S>>> {
    if demand.n_assets() != 2 || net.n_assets() != 2 {
        return Err(Error::InvalidInput(
            "the equilibrium-set scan handles exactly two assets".into(),
        ));
    }
    let q1 = demand.price_at_zero().get(0);
    for probe in [-1e6, -1.0, 1.0, 1e6] {
        let z = vec![real::<S>(probe), real::<S>(probe)];
        if (demand.eval(&z).get(0) - q1).abs() > real::<S>(1e-9) * (S::one() + q1) {
            return Err(Error::InvalidInput(
                "the scan needs asset 1 as the numéraire (constant first price)".into(),
            ));
        }
    }
    let (lo, hi) = demand.bounds();
    let (lo2, hi2) = (lo[1], hi[1]);
    let grid_n = params.scan_grid.max(2);

    let residual_at = |q2: S| -> Result<S> {
        let q = PriceVector::new(vec![q1, q2]).expect("valid grid price");
        let (residual, _) = price_residual(net, rel, policies, demand, shock, &q, params)?;
        Ok(residual[1])
    };

    let zero_tol = real::<S>(1e-12) * (S::one() + hi2);
    let mut roots: Vec<S> = Vec::new();
    let mut prev_q = lo2;
    let mut prev_r = residual_at(prev_q)?;
    if prev_r.abs() <= zero_tol {
        roots.push(prev_q);
    }
    for idx in 1..grid_n {
        let t = real::<S>(idx as f64) / real::<S>((grid_n - 1) as f64);
        let q2 = lo2 + (hi2 - lo2) * t;
        let r = residual_at(q2)?;
        if r.abs() <= zero_tol {
            roots.push(q2);
        } else if prev_r.abs() > zero_tol && (prev_r > S::zero()) != (r > S::zero()) {
            // Bracketed sign change: refine by bisection.
            let mut a = prev_q;
            let mut b = q2;
            let mut ra = prev_r;
            for _ in 0..200 {
                if (b - a).abs() <= real::<S>(1e-10) {
                    break;
                }
                let mid = (a + b) / real::<S>(2.0);
                let rm = residual_at(mid)?;
                if rm.abs() <= zero_tol {
                    a = mid;
                    b = mid;
                    break;
                }
                if (ra > S::zero()) == (rm > S::zero()) {
                    a = mid;
                    ra = rm;
                } else {
                    b = mid;
                }
            }
            roots.push((a + b) / real::<S>(2.0));
        }
        prev_q = q2;
        prev_r = r;
    }

    roots.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
    let mut deduped: Vec<S> = Vec::new();
    for r in roots {
        if deduped
            .last()
            .map_or(true, |last| (r - *last).abs() > real::<S>(1e-8))
        {
            deduped.push(r);
        }
    }
    deduped
        .into_iter()
        .map(|q2| PriceVector::new(vec![q1, q2]))
        .collect()
}

/// Per-firm and aggregate health report for a clearing solution.
#[derive(Debug, Clone)]
pub struct DiagnosticsReport<S> {
    /// Mark-to-market equity `q'(y_i - pbar_i)` per firm.
    pub equity: Vec<S>,
    pub defaults: Vec<usize>,
    /// Value of payments absorbed by the societal node.
    pub society_value: S,
    /// Positive firm equity plus the societal node's absorbed value.
    pub aggregate_positive_equity: S,
    /// Total endowment value `Σ_i q'x_i`.
    pub aggregate_endowment_value: S,
    /// Relative gap of the wealth conservation identity.
    pub wealth_identity_gap: S,
}

/// Mark-to-market equities, default flags, and the aggregate wealth check
/// for a clearing result.
pub fn diagnostics<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    result: &ClearingResult<S>,
) -> DiagnosticsReport<S> {
    let n = net.n_firms();
    let m = net.n_assets();
    let q = result.prices.as_slice();
    let mut equity = Vec::with_capacity(n);
    let mut positive_total = S::zero();
    for i in 0..n {
        let mut value = S::zero();
        let mut positive = S::zero();
        for k in 0..m {
            let gap = result.holdings[[i, k]] - rel.total(i, k);
            value += q[k] * gap;
            positive += q[k] * pos(gap);
        }
        equity.push(value);
        positive_total += positive;
    }
    let society = society_inflow(net, rel, &result.holdings);
    let society_value = dot(q, society.as_slice().expect("contiguous"));
    let mut endowment_value = S::zero();
    for i in 0..n {
        for k in 0..m {
            endowment_value += q[k] * net.endowment(i, k);
        }
    }
    let aggregate = positive_total + society_value;
    let gap = (aggregate - endowment_value).abs() / smax(S::one(), endowment_value);
    DiagnosticsReport {
        equity,
        defaults: default_set(rel, &result.holdings),
        society_value,
        aggregate_positive_equity: aggregate,
        aggregate_endowment_value: endowment_value,
        wealth_identity_gap: gap,
    }
}
