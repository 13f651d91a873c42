//! Payment regulation schemes and the exact solver for the per-firm payment
//! optimization.
//!
//! Both shipped schemes are diagonal quadratics `h(p) = -1/2 (c - p)' D (c - p)`
//! whose center `c` and weights `D` encode the regulation: surplus transfers
//! (a firm only converts assets it does not owe) or prioritization of the
//! first `mu` assets with pro-rata payments on the rest. The maximizer over
//! the box-and-budget set is computed by water-filling on the budget
//! multiplier.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::network::{
    realized_inflow, HoldingsMatrix, MultiLayerNetwork, PriceVector, RelativeLiabilities,
};
use crate::scalar::{clamp, dot, pos, real, smax, smin, Real};

/// Relative budget tolerance of the water-filling bisection.
const BUDGET_TOL: f64 = 1e-12;
/// Iteration cap of the water-filling bisection.
const BISECT_MAX_ITER: usize = 200;

/// A payment regulation scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum PaymentRule<S> {
    /// Firms transfer only surpluses: assets already owed are paid in kind
    /// first, surplus wealth covers the rest.
    Surplus { delta_scale: S },
    /// The first `mu` assets (in `order`, default the natural order) are
    /// paid sequentially in full seniority; remaining obligations are filled
    /// pro rata. `mu = 0` is purely proportional payments, `mu = m` a strict
    /// seniority structure.
    Priority {
        mu: usize,
        delta_scale: S,
        /// Per-firm asset priority permutation; `None` means `0..m`.
        order: Option<Vec<usize>>,
    },
}

impl<S: Real> PaymentRule<S> {
    pub fn surplus() -> Self {
        PaymentRule::Surplus {
            delta_scale: real(1e-3),
        }
    }

    pub fn priority(mu: usize) -> Self {
        PaymentRule::Priority {
            mu,
            delta_scale: real(1e-3),
            order: None,
        }
    }

    /// Pro-rata payments across all assets.
    pub fn proportional() -> Self {
        Self::priority(0)
    }

    pub fn with_delta_scale(mut self, scale: S) -> Self {
        match &mut self {
            PaymentRule::Surplus { delta_scale } => *delta_scale = scale,
            PaymentRule::Priority { delta_scale, .. } => *delta_scale = scale,
        }
        self
    }

    pub fn with_order(self, new_order: Vec<usize>) -> Self {
        match self {
            PaymentRule::Priority {
                mu, delta_scale, ..
            } => PaymentRule::Priority {
                mu,
                delta_scale,
                order: Some(new_order),
            },
            other => other,
        }
    }

    /// Check the rule against an `m`-asset market.
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            PaymentRule::Surplus { delta_scale } => {
                if !(*delta_scale > S::zero()) {
                    return Err(Error::InvalidInput("delta scale must be > 0".into()));
                }
            }
            PaymentRule::Priority {
                mu,
                delta_scale,
                order,
            } => {
                if !(*delta_scale > S::zero()) {
                    return Err(Error::InvalidInput("delta scale must be > 0".into()));
                }
                if *mu > m {
                    return Err(Error::InvalidInput(format!(
                        "priority depth {mu} exceeds the asset count {m}"
                    )));
                }
                if let Some(order) = order {
                    let mut seen = vec![false; m];
                    if order.len() != m || order.iter().any(|&k| k >= m) {
                        return Err(Error::InvalidInput(
                            "priority order must be a permutation of the assets".into(),
                        ));
                    }
                    for &k in order {
                        if seen[k] {
                            return Err(Error::InvalidInput(
                                "priority order must be a permutation of the assets".into(),
                            ));
                        }
                        seen[k] = true;
                    }
                }
            }
        }
        Ok(())
    }
}

/// One firm's payment problem: obligation caps, realized inflow, prices.
#[derive(Debug, Clone, Copy)]
pub struct PaymentProblem<'a, S> {
    pub obligations: &'a [S],
    pub inflow: &'a [S],
    pub prices: &'a [S],
}

impl<'a, S: Real> PaymentProblem<'a, S> {
    /// Mark-to-market value of the firm's available assets.
    pub fn budget(&self) -> S {
        dot(self.prices, self.inflow)
    }
}

/// Regularizer keeping the quadratic's center strictly above the feasible
/// box: `delta_k = scale * (1 + max(pbar_k, e_k))`.
fn delta<S: Real>(scale: S, obligations: &[S], inflow: &[S]) -> Vec<S> {
    obligations
        .iter()
        .zip(inflow.iter())
        .map(|(&p, &e)| scale * (S::one() + smax(p, e)))
        .collect()
}

/// Center `c` and positive diagonal weights `d` of the quadratic payment
/// utility for the given rule and problem.
pub fn center_and_weights<S: Real>(
    rule: &PaymentRule<S>,
    problem: &PaymentProblem<'_, S>,
) -> (Vec<S>, Vec<S>) {
    let m = problem.obligations.len();
    let pbar = problem.obligations;
    let e = problem.inflow;
    let q = problem.prices;
    match rule {
        PaymentRule::Surplus { delta_scale } => {
            let dl = delta(*delta_scale, pbar, e);
            let c: Vec<S> = (0..m).map(|k| smax(pbar[k], e[k]) + dl[k]).collect();
            let d: Vec<S> = (0..m).map(|k| q[k] / (c[k] - e[k])).collect();
            debug_assert!(d.iter().all(|&w| w > S::zero()));
            (c, d)
        }
        PaymentRule::Priority {
            mu,
            delta_scale,
            order,
        } => {
            let identity: Vec<usize> = (0..m).collect();
            let ord = order.as_deref().unwrap_or(&identity);
            let dl = delta(*delta_scale, pbar, e);
            let c: Vec<S> = (0..m).map(|k| pbar[k] + dl[k]).collect();

            let wealth = problem.budget();
            // Sequential fill levels of the prioritized assets.
            let mut fill = vec![S::zero(); m];
            let mut earmarked = S::zero();
            for &k in ord.iter().take(*mu) {
                let s = smin(pbar[k], pos(wealth - earmarked) / q[k]);
                fill[k] = s;
                earmarked += q[k] * s;
            }
            let value_owed = dot(q, pbar);
            let numerator = smin(value_owed, wealth) - earmarked;
            let denominator = value_owed - earmarked;
            let pro_rata = if denominator > S::zero() {
                clamp(numerator / denominator, S::zero(), S::one())
            } else {
                // Priority assets exhaust all obligations; the remaining
                // centers are capped by pbar regardless.
                S::one()
            };

            let mut d = vec![S::zero(); m];
            for (pos_in_order, &k) in ord.iter().enumerate() {
                let anchor = if pos_in_order < *mu {
                    fill[k]
                } else {
                    pro_rata * pbar[k]
                };
                let denom = c[k] - anchor;
                debug_assert!(denom > S::zero());
                d[k] = q[k] / denom;
            }
            (c, d)
        }
    }
}

/// Exact maximizer of the payment utility over
/// `{0 <= p <= pbar, q'p <= q'e}`.
///
/// With the center above the box the unconstrained optimum clamps to `pbar`;
/// otherwise the budget binds and the multiplier `lambda` solves
/// `q' p(lambda) = q'e` with `p_k(lambda) = clamp(c_k - lambda q_k / d_k, 0, pbar_k)`,
/// a nonincreasing piecewise-linear map handled by bisection.
pub fn solve_payment<S: Real>(rule: &PaymentRule<S>, problem: &PaymentProblem<'_, S>) -> Vec<S> {
    let m = problem.obligations.len();
    debug_assert_eq!(problem.inflow.len(), m);
    debug_assert_eq!(problem.prices.len(), m);
    let pbar = problem.obligations;
    let q = problem.prices;

    if pbar.iter().all(|&p| p <= S::zero()) {
        return vec![S::zero(); m];
    }
    let wealth = problem.budget();
    if wealth <= S::zero() {
        return vec![S::zero(); m];
    }
    let value_owed = dot(q, pbar);
    if wealth >= value_owed {
        return pbar.to_vec();
    }

    let (c, d) = center_and_weights(rule, problem);
    let payment_at = |lambda: S| -> Vec<S> {
        (0..m)
            .map(|k| clamp(c[k] - lambda * q[k] / d[k], S::zero(), pbar[k]))
            .collect()
    };

    let mut lo = S::zero();
    let mut hi = (0..m).map(|k| c[k] * d[k] / q[k]).fold(S::zero(), smax);
    let tol = real::<S>(BUDGET_TOL) * smax(S::one(), wealth);
    let mut best = payment_at(hi);
    for _ in 0..BISECT_MAX_ITER {
        let mid = (lo + hi) / real::<S>(2.0);
        let p = payment_at(mid);
        let gap = dot(q, &p) - wealth;
        if gap.abs() <= tol {
            return p;
        }
        if gap > S::zero() {
            lo = mid;
        } else {
            hi = mid;
            best = p;
        }
    }
    // The bracket collapsed onto a clamping breakpoint; the kept iterate is
    // the feasible side of it.
    best
}

/// Apply the payment optimization firm by firm at holdings `y` and prices
/// `q`, returning the `n x m` payment matrix.
pub fn payment_map<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    rules: &[PaymentRule<S>],
    holdings: &HoldingsMatrix<S>,
    prices: &PriceVector<S>,
) -> Array2<S> {
    let inflow = realized_inflow(net, rel, holdings);
    payment_rows(rules, rel.totals(), &inflow, prices)
}

/// Row-wise payment solve against a precomputed inflow matrix.
pub fn payment_rows<S: Real>(
    rules: &[PaymentRule<S>],
    totals: &Array2<S>,
    inflow: &Array2<S>,
    prices: &PriceVector<S>,
) -> Array2<S> {
    let (n, m) = totals.dim();
    debug_assert_eq!(rules.len(), n);
    let mut payments = Array2::zeros((n, m));
    for i in 0..n {
        let problem = PaymentProblem {
            obligations: totals.row(i).to_slice().expect("contiguous"),
            inflow: inflow.row(i).to_slice().expect("contiguous"),
            prices: prices.as_slice(),
        };
        let p = solve_payment(&rules[i], &problem);
        for k in 0..m {
            payments[[i, k]] = p[k];
        }
    }
    payments
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_relative_liabilities;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem<'a>(
        obligations: &'a [f64],
        inflow: &'a [f64],
        prices: &'a [f64],
    ) -> PaymentProblem<'a, f64> {
        PaymentProblem {
            obligations,
            inflow,
            prices,
        }
    }

    /// Independent evaluation of the quadratic payment utility, recomputing
    /// the center and weights from the displayed formulas.
    fn utility_oracle(rule: &PaymentRule<f64>, pr: &PaymentProblem<'_, f64>, p: &[f64]) -> f64 {
        let m = pr.obligations.len();
        let delta: Vec<f64> = (0..m)
            .map(|k| {
                let scale = match rule {
                    PaymentRule::Surplus { delta_scale } => *delta_scale,
                    PaymentRule::Priority { delta_scale, .. } => *delta_scale,
                };
                scale * (1.0 + pr.obligations[k].max(pr.inflow[k]))
            })
            .collect();
        let (c, d): (Vec<f64>, Vec<f64>) = match rule {
            PaymentRule::Surplus { .. } => {
                let c: Vec<f64> = (0..m)
                    .map(|k| pr.obligations[k].max(pr.inflow[k]) + delta[k])
                    .collect();
                let d = (0..m)
                    .map(|k| pr.prices[k] / (c[k] - pr.inflow[k]))
                    .collect();
                (c, d)
            }
            PaymentRule::Priority { mu, order, .. } => {
                assert!(order.is_none(), "oracle covers the natural order");
                let c: Vec<f64> = (0..m).map(|k| pr.obligations[k] + delta[k]).collect();
                let wealth: f64 = (0..m).map(|k| pr.prices[k] * pr.inflow[k]).sum();
                let mut s = vec![0.0; m];
                for k in 0..*mu {
                    let spent: f64 = (0..k).map(|j| pr.prices[j] * s[j]).sum();
                    s[k] = pr.obligations[k].min((wealth - spent).max(0.0) / pr.prices[k]);
                }
                let owed: f64 = (0..m).map(|k| pr.prices[k] * pr.obligations[k]).sum();
                let spent: f64 = (0..*mu).map(|j| pr.prices[j] * s[j]).sum();
                let denom = owed - spent;
                let pi = if denom > 0.0 {
                    (owed.min(wealth) - spent) / denom
                } else {
                    1.0
                };
                let d = (0..m)
                    .map(|k| {
                        let anchor = if k < *mu {
                            s[k]
                        } else {
                            pi * pr.obligations[k]
                        };
                        pr.prices[k] / (c[k] - anchor)
                    })
                    .collect();
                (c, d)
            }
        };
        -0.5 * (0..m).map(|k| d[k] * (c[k] - p[k]).powi(2)).sum::<f64>()
    }

    #[test]
    fn surplus_center_and_weights() {
        let rule = PaymentRule::surplus().with_delta_scale(0.01);
        let q = [1.0, 1.0];
        let pbar = [1.0, 1.0];
        let e = [0.5, 1.0];
        let pr = problem(&pbar, &e, &q);
        let (c, d) = center_and_weights(&rule, &pr);
        let d1 = 0.01 * 2.0; // delta for max(pbar, e) = 1
        assert_abs_diff_eq!(c[0], 1.0 + d1);
        assert_abs_diff_eq!(c[1], 1.0 + d1);
        assert_abs_diff_eq!(d[0], 1.0 / (0.5 + d1), epsilon = 1e-10);
        assert_abs_diff_eq!(d[1], 1.0 / d1, epsilon = 1e-10);
    }

    #[test]
    fn priority_fill_levels() {
        let rule = PaymentRule::priority(2);
        let q = [1.0, 1.0];
        let pbar = [1.0, 1.0];
        let e = [0.0, 1.5];
        let pr = problem(&pbar, &e, &q);
        let (c, d) = center_and_weights(&rule, &pr);
        // s = (1, 0.5) from sequentially filling asset 1 then asset 2.
        let delta = 1e-3 * (1.0 + 1.5);
        let delta1 = 1e-3 * 2.0;
        assert_abs_diff_eq!(c[0], 1.0 + delta1);
        assert_abs_diff_eq!(d[0], 1.0 / (c[0] - 1.0));
        assert_abs_diff_eq!(d[1], 1.0 / (1.0 + delta - 0.5));
    }

    #[test]
    fn proportional_ratio() {
        let rule = PaymentRule::proportional();
        let q = [1.0, 1.0];
        let pbar = [1.0, 1.0];
        let e = [0.0, 1.5];
        let pr = problem(&pbar, &e, &q);
        let (c, d) = center_and_weights(&rule, &pr);
        // pi = min(2, 1.5) / 2 = 0.75
        let delta1 = 1e-3 * 2.0;
        let delta2 = 1e-3 * 2.5;
        assert_abs_diff_eq!(d[0], 1.0 / (c[0] - 0.75), epsilon = 1e-12);
        assert_abs_diff_eq!(c[0], 1.0 + delta1);
        assert_abs_diff_eq!(c[1], 1.0 + delta2);
        assert_abs_diff_eq!(d[1], 1.0 / (c[1] - 0.75), epsilon = 1e-12);
    }

    #[test]
    fn surplus_pays_held_asset_in_full() {
        let rule = PaymentRule::surplus();
        let q = [1.0, 1.0];
        let pbar = [1.0, 1.0];
        let e = [0.5, 1.0];
        let p = solve_payment(&rule, &problem(&pbar, &e, &q));
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn solvent_firm_pays_in_full() {
        let q = [1.0, 1.0];
        let pbar = [1.0, 1.0];
        let e = [2.0, 2.0];
        for rule in [
            PaymentRule::surplus(),
            PaymentRule::priority(2),
            PaymentRule::proportional(),
        ] {
            let p = solve_payment(&rule, &problem(&pbar, &e, &q));
            assert_eq!(p, vec![1.0, 1.0]);
        }
    }

    #[test]
    fn priority_and_proportional_split_the_budget() {
        let q = [1.0, 1.0];
        let pbar = [1.0, 1.0];
        let e = [0.0, 1.5];
        let p = solve_payment(&PaymentRule::priority(2), &problem(&pbar, &e, &q));
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-10);
        let p = solve_payment(&PaymentRule::proportional(), &problem(&pbar, &e, &q));
        assert_abs_diff_eq!(p[0], 0.75, epsilon = 1e-10);
        assert_abs_diff_eq!(p[1], 0.75, epsilon = 1e-10);
    }

    #[test]
    fn eisenberg_noe_reduction_single_asset() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let pbar = [rng.random_range(0.0..5.0)];
            let e = [rng.random_range(0.0..5.0)];
            let q = [rng.random_range(0.2..3.0)];
            let pr = problem(&pbar, &e, &q);
            let expected = pbar[0].min(q[0] * e[0] / q[0]);
            for rule in [PaymentRule::priority(1), PaymentRule::surplus()] {
                let p = solve_payment(&rule, &pr);
                assert_abs_diff_eq!(p[0], expected, epsilon = 1e-9 * (1.0 + expected));
            }
        }
    }

    #[test]
    fn degenerate_problems() {
        let q = [1.0, 2.0];
        let zero_pbar = [0.0, 0.0];
        let e = [1.0, 1.0];
        assert_eq!(
            solve_payment(&PaymentRule::surplus(), &problem(&zero_pbar, &e, &q)),
            vec![0.0, 0.0]
        );
        let pbar = [1.0, 1.0];
        let zero_e = [0.0, 0.0];
        assert_eq!(
            solve_payment(&PaymentRule::proportional(), &problem(&pbar, &zero_e, &q)),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn feasibility_and_budget_exhaustion_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..500 {
            let m = 1 + (trial % 3);
            let pbar: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..4.0)).collect();
            let e: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..4.0)).collect();
            let q: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..3.0)).collect();
            let rules = [
                PaymentRule::surplus(),
                PaymentRule::priority(m),
                PaymentRule::proportional(),
                PaymentRule::priority(m / 2),
            ];
            let pr = problem(&pbar, &e, &q);
            let wealth = pr.budget();
            let owed = dot(&q, &pbar);
            for rule in &rules {
                let p = solve_payment(rule, &pr);
                for k in 0..m {
                    assert!(p[k] >= -1e-14 && p[k] <= pbar[k] + 1e-14);
                }
                let value = dot(&q, &p);
                assert!(value <= wealth + 1e-10 * wealth.max(1.0));
                if wealth < owed {
                    // insolvent firms exhaust the budget
                    assert_abs_diff_eq!(value, wealth, epsilon = 1e-9 * wealth.max(1.0));
                } else {
                    assert_eq!(p, pbar);
                }
            }
        }
    }

    #[test]
    fn grid_oracle_on_two_assets() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let pbar = [rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)];
            let e = [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)];
            let q = [rng.random_range(0.2..2.0), rng.random_range(0.2..2.0)];
            let pr = problem(&pbar, &e, &q);
            let wealth = pr.budget();
            for rule in [PaymentRule::surplus(), PaymentRule::priority(1)] {
                let p = solve_payment(&rule, &pr);
                let h_star = utility_oracle(&rule, &pr, &p);
                let grid = 100;
                for i in 0..=grid {
                    for j in 0..=grid {
                        let cand = [
                            pbar[0] * i as f64 / grid as f64,
                            pbar[1] * j as f64 / grid as f64,
                        ];
                        if q[0] * cand[0] + q[1] * cand[1] <= wealth {
                            let h = utility_oracle(&rule, &pr, &cand);
                            assert!(
                                h_star >= h - 1e-8,
                                "solver beaten by grid point {cand:?}: {h_star} < {h}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_in_inflow() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..300 {
            let m = 2;
            let pbar: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3.0)).collect();
            let e: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3.0)).collect();
            let mut e_up = e.clone();
            for v in e_up.iter_mut() {
                *v += rng.random_range(0.0..2.0);
            }
            let q: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..2.0)).collect();
            for rule in [
                PaymentRule::surplus(),
                PaymentRule::priority(2),
                PaymentRule::proportional(),
            ] {
                let p = solve_payment(&rule, &problem(&pbar, &e, &q));
                let p_up = solve_payment(&rule, &problem(&pbar, &e_up, &q));
                for k in 0..m {
                    assert!(
                        p_up[k] >= p[k] - 1e-9,
                        "{rule:?}: payment fell from {p:?} to {p_up:?} as inflow rose"
                    );
                }
            }
        }
    }

    #[test]
    fn priority_order_relabels_assets() {
        let q = [1.0, 0.5];
        let pbar = [2.0, 1.0];
        let e = [0.5, 1.0];
        let natural = solve_payment(&PaymentRule::priority(1), &problem(&pbar, &e, &q));
        // Permuted problem: swap the two assets everywhere and prioritize
        // the (relabeled) second asset first.
        let q_s = [0.5, 1.0];
        let pbar_s = [1.0, 2.0];
        let e_s = [1.0, 0.5];
        let swapped = solve_payment(
            &PaymentRule::priority(1).with_order(vec![1, 0]),
            &problem(&pbar_s, &e_s, &q_s),
        );
        assert_abs_diff_eq!(natural[0], swapped[1], epsilon = 1e-12);
        assert_abs_diff_eq!(natural[1], swapped[0], epsilon = 1e-12);
    }

    #[test]
    fn payments_depend_on_capped_holdings_only() {
        // Two firms owing each other in one asset; raising a holding beyond
        // the obligation cap leaves every payment unchanged.
        let mut liab = Array3::zeros((2, 3, 1));
        liab[[0, 2, 0]] = 1.0;
        liab[[1, 1, 0]] = 2.0;
        let net = crate::network::MultiLayerNetwork::new(liab, array![[0.5], [0.5]]).unwrap();
        let rel = build_relative_liabilities(&net);
        let rules = vec![PaymentRule::surplus(); 2];
        let q = PriceVector::new(vec![1.0]).unwrap();
        let p1 = payment_map(&net, &rel, &rules, &array![[0.7], [1.4]], &q);
        let p2 = payment_map(&net, &rel, &rules, &array![[0.7], [9.0]], &q);
        // firm 2's holdings cap at pbar = 2, so only its own payment row moves
        assert_eq!(p1[[0, 0]], p2[[0, 0]]);
        assert!(p2[[1, 0]] >= p1[[1, 0]]);
        let p3 = payment_map(&net, &rel, &rules, &array![[0.7], [2.0]], &q);
        assert_eq!(p2, p3);
    }
}
