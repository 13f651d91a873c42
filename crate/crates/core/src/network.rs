//! Balance-sheet data model: multi-asset liability layers, endowments,
//! relative liabilities, and network constructors.
//!
//! Node indexing convention: the societal node is node `0` and firm `i`
//! (0-based, `i < n`) is node `i + 1`. The liability tensor has shape
//! `(n, n + 1, m)`: `liabilities[[i, j, k]]` is what firm `i` owes node `j`
//! in units of asset `k`. The societal node is a sink — it has no row.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{real, smin, Real};

/// Per-firm per-asset holdings, shape `(n, m)`.
pub type HoldingsMatrix<S> = Array2<S>;

/// Strictly positive per-asset prices in the numéraire.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVector<S> {
    values: Array1<S>,
}

impl<S: Real> PriceVector<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("price vector must be non-empty".into()));
        }
        for (k, &q) in values.iter().enumerate() {
            if !q.is_finite() || q <= S::zero() {
                return Err(Error::InvalidInput(format!(
                    "price of asset {} must be finite and strictly positive, got {}",
                    k + 1,
                    q
                )));
            }
        }
        Ok(Self {
            values: Array1::from(values),
        })
    }

    pub fn uniform(value: S, m: usize) -> Result<Self> {
        Self::new(vec![value; m])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        self.values.as_slice().expect("contiguous")
    }

    pub fn to_vec(&self) -> Vec<S> {
        self.values.to_vec()
    }

    pub fn get(&self, k: usize) -> S {
        self.values[k]
    }
}

impl<S: Real> std::ops::Index<usize> for PriceVector<S> {
    type Output = S;
    fn index(&self, k: usize) -> &S {
        &self.values[k]
    }
}

/// A financial network of `n` firms plus a societal node, with obligations
/// in `m` asset layers and per-firm endowments.
#[derive(Debug, Clone)]
pub struct MultiLayerNetwork<S> {
    n: usize,
    m: usize,
    liabilities: Array3<S>,
    endowments: Array2<S>,
}

impl<S: Real> MultiLayerNetwork<S> {
    /// Build a network from a `(n, n+1, m)` liability tensor (node column 0
    /// is the societal node) and a `(n, m)` endowment matrix.
    pub fn new(liabilities: Array3<S>, endowments: Array2<S>) -> Result<Self> {
        let (n, ncols, m) = liabilities.dim();
        if n == 0 || m == 0 {
            return Err(Error::InvalidNetwork(
                "network needs at least one firm and one asset".into(),
            ));
        }
        if ncols != n + 1 {
            return Err(Error::InvalidNetwork(format!(
                "liability tensor has {} node columns, expected n + 1 = {}",
                ncols,
                n + 1
            )));
        }
        if endowments.dim() != (n, m) {
            return Err(Error::InvalidNetwork(format!(
                "endowment matrix has shape {:?}, expected ({}, {})",
                endowments.dim(),
                n,
                m
            )));
        }
        for ((i, j, k), &v) in liabilities.indexed_iter() {
            if !v.is_finite() || v < S::zero() {
                return Err(Error::InvalidNetwork(format!(
                    "liability of firm {} to node {} in asset {} must be finite and >= 0, got {}",
                    i + 1,
                    j,
                    k + 1,
                    v
                )));
            }
            if j == i + 1 && v != S::zero() {
                return Err(Error::InvalidNetwork(format!(
                    "firm {} has an obligation to itself in asset {}",
                    i + 1,
                    k + 1
                )));
            }
        }
        for ((i, k), &v) in endowments.indexed_iter() {
            if !v.is_finite() || v < S::zero() {
                return Err(Error::InvalidNetwork(format!(
                    "endowment of firm {} in asset {} must be finite and >= 0, got {}",
                    i + 1,
                    k + 1,
                    v
                )));
            }
        }
        Ok(Self {
            n,
            m,
            liabilities,
            endowments,
        })
    }

    /// Convenience constructor from a firm-to-firm tensor `(n, n, m)` plus a
    /// separate `(n, m)` column of obligations to the societal node.
    pub fn from_parts(
        interfirm: Array3<S>,
        to_society: Array2<S>,
        endowments: Array2<S>,
    ) -> Result<Self> {
        let (n, n2, m) = interfirm.dim();
        if n2 != n {
            return Err(Error::InvalidNetwork(format!(
                "interfirm tensor has shape {:?}, expected (n, n, m)",
                interfirm.dim()
            )));
        }
        if to_society.dim() != (n, m) {
            return Err(Error::InvalidNetwork(format!(
                "society column has shape {:?}, expected ({}, {})",
                to_society.dim(),
                n,
                m
            )));
        }
        let mut liabilities = Array3::zeros((n, n + 1, m));
        for i in 0..n {
            for k in 0..m {
                liabilities[[i, 0, k]] = to_society[[i, k]];
                for j in 0..n {
                    liabilities[[i, j + 1, k]] = interfirm[[i, j, k]];
                }
            }
        }
        Self::new(liabilities, endowments)
    }

    pub fn n_firms(&self) -> usize {
        self.n
    }

    pub fn n_assets(&self) -> usize {
        self.m
    }

    /// Obligation of firm `i` towards node `j` (0 = society) in asset `k`.
    pub fn liability(&self, i: usize, node_j: usize, k: usize) -> S {
        self.liabilities[[i, node_j, k]]
    }

    pub fn liabilities(&self) -> &Array3<S> {
        &self.liabilities
    }

    pub fn endowment(&self, i: usize, k: usize) -> S {
        self.endowments[[i, k]]
    }

    pub fn endowments(&self) -> &Array2<S> {
        &self.endowments
    }

    /// Total liabilities per firm per asset: `pbar[i][k] = Σ_j L[i][j][k]`.
    pub fn total_liabilities(&self) -> Array2<S> {
        let mut pbar = Array2::zeros((self.n, self.m));
        for ((i, _, k), &v) in self.liabilities.indexed_iter() {
            pbar[[i, k]] += v;
        }
        pbar
    }
}

/// Row-stochastic obligation shares per asset layer plus the total
/// liabilities they were built from.
#[derive(Debug, Clone)]
pub struct RelativeLiabilities<S> {
    shares: Array3<S>,
    totals: Array2<S>,
}

impl<S: Real> RelativeLiabilities<S> {
    /// Share of firm `i`'s asset-`k` obligations owed to node `j`.
    pub fn share(&self, i: usize, node_j: usize, k: usize) -> S {
        self.shares[[i, node_j, k]]
    }

    pub fn shares(&self) -> &Array3<S> {
        &self.shares
    }

    /// `pbar[i][k]`, the total obligation of firm `i` in asset `k`.
    pub fn total(&self, i: usize, k: usize) -> S {
        self.totals[[i, k]]
    }

    pub fn totals(&self) -> &Array2<S> {
        &self.totals
    }
}

/// Compute relative liabilities and obligation totals for a network.
///
/// Rows with zero total obligations get the uniform share `1/(n+1)` over all
/// nodes including the societal node, keeping every row stochastic; the
/// value never enters a clearing computation because such rows pay nothing.
pub fn build_relative_liabilities<S: Real>(net: &MultiLayerNetwork<S>) -> RelativeLiabilities<S> {
    let n = net.n_firms();
    let m = net.n_assets();
    let totals = net.total_liabilities();
    let uniform = S::one() / real::<S>((n + 1) as f64);
    let mut shares = Array3::zeros((n, n + 1, m));
    for i in 0..n {
        for k in 0..m {
            let total = totals[[i, k]];
            for j in 0..=n {
                shares[[i, j, k]] = if total > S::zero() {
                    net.liability(i, j, k) / total
                } else {
                    uniform
                };
            }
        }
    }
    RelativeLiabilities { shares, totals }
}

/// Units of each asset firm `i` has immediately available when each firm `j`
/// holds `y[j]`: endowment plus capped interbank inflows,
/// `e[i][k] = x[i][k] + Σ_j a[j][i][k] · min(pbar[j][k], y[j][k])`.
pub fn realized_inflow<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    holdings: &HoldingsMatrix<S>,
) -> Array2<S> {
    let n = net.n_firms();
    let m = net.n_assets();
    debug_assert_eq!(holdings.dim(), (n, m));
    let mut inflow = net.endowments().clone();
    for j in 0..n {
        for k in 0..m {
            let paid = smin(rel.total(j, k), holdings[[j, k]]);
            if paid > S::zero() {
                for i in 0..n {
                    inflow[[i, k]] += rel.share(j, i + 1, k) * paid;
                }
            }
        }
    }
    inflow
}

/// Units of each asset delivered to the societal node (node 0) when each
/// firm `j` holds `y[j]`.
pub fn society_inflow<S: Real>(
    net: &MultiLayerNetwork<S>,
    rel: &RelativeLiabilities<S>,
    holdings: &HoldingsMatrix<S>,
) -> Array1<S> {
    let n = net.n_firms();
    let m = net.n_assets();
    let mut inflow = Array1::zeros(m);
    for j in 0..n {
        for k in 0..m {
            let paid = smin(rel.total(j, k), holdings[[j, k]]);
            inflow[k] += rel.share(j, 0, k) * paid;
        }
    }
    inflow
}

/// Parameters for the random network generator.
#[derive(Debug, Clone)]
pub struct RandomNetworkSpec {
    pub n_firms: usize,
    pub n_assets: usize,
    /// Probability that an ordered firm pair carries an obligation, per asset.
    pub link_prob: f64,
    /// Size of each interbank obligation.
    pub link_size: f64,
    /// Obligation of every firm to the societal node, in every asset.
    pub society_obligation: f64,
    /// Total endowment per firm is drawn uniformly from this range and then
    /// split evenly across the assets.
    pub endowment_range: (f64, f64),
    pub seed: u64,
}

/// Draw a random network: per asset layer, each ordered firm pair owes
/// `link_size` with probability `link_prob`, independently across layers.
/// Deterministic for a fixed seed.
pub fn random_network<S: Real>(spec: &RandomNetworkSpec) -> Result<MultiLayerNetwork<S>> {
    let n = spec.n_firms;
    let m = spec.n_assets;
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput(
            "random network needs at least one firm and one asset".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.link_prob) {
        return Err(Error::InvalidInput(format!(
            "link probability must lie in [0, 1], got {}",
            spec.link_prob
        )));
    }
    if spec.link_size < 0.0 || spec.society_obligation < 0.0 {
        return Err(Error::InvalidInput(
            "link size and society obligation must be >= 0".into(),
        ));
    }
    let (lo, hi) = spec.endowment_range;
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
        return Err(Error::InvalidInput(format!(
            "endowment range must satisfy 0 <= lo <= hi, got ({lo}, {hi})"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut liabilities = Array3::zeros((n, n + 1, m));
    for k in 0..m {
        for i in 0..n {
            liabilities[[i, 0, k]] = real(spec.society_obligation);
            for j in 0..n {
                if i != j && rng.random_bool(spec.link_prob) {
                    liabilities[[i, j + 1, k]] = real(spec.link_size);
                }
            }
        }
    }
    let split = 1.0 / m as f64;
    let mut endowments = Array2::zeros((n, m));
    for i in 0..n {
        let total = if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        for k in 0..m {
            endowments[[i, k]] = real(total * split);
        }
    }
    MultiLayerNetwork::new(liabilities, endowments)
}

/// Re-denominate a single-asset network into two currencies.
///
/// Firms in `home` keep all endowments and their obligations to other home
/// firms or to the societal node in the new second asset; every other firm
/// moves `exposure[i]` of its endowment into the second asset; all other
/// liabilities stay in asset 1. Layer sums reproduce the base network
/// exactly.
pub fn split_two_currency<S: Real>(
    base: &MultiLayerNetwork<S>,
    exposure: &[S],
    home: &BTreeSet<usize>,
) -> Result<MultiLayerNetwork<S>> {
    if base.n_assets() != 1 {
        return Err(Error::InvalidInput(format!(
            "two-currency split needs a single-asset base network, got m = {}",
            base.n_assets()
        )));
    }
    let n = base.n_firms();
    if exposure.len() != n {
        return Err(Error::InvalidInput(format!(
            "exposure vector has length {}, expected {}",
            exposure.len(),
            n
        )));
    }
    if let Some(&bad) = home.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!(
            "home set references firm {} but the network has {} firms",
            bad + 1,
            n
        )));
    }
    for (i, &ge) in exposure.iter().enumerate() {
        if home.contains(&i) {
            continue; // exposure of home firms is ignored by construction
        }
        if !ge.is_finite() || ge < S::zero() || ge > base.endowment(i, 0) {
            return Err(Error::InvalidInput(format!(
                "exposure of firm {} must lie in [0, endowment = {}], got {}",
                i + 1,
                base.endowment(i, 0),
                ge
            )));
        }
    }

    let mut liabilities = Array3::zeros((n, n + 1, 2));
    for i in 0..n {
        for j in 0..=n {
            let v = base.liability(i, j, 0);
            // Home-to-home and home-to-society obligations move to asset 2.
            let redenominate = home.contains(&i) && (j == 0 || home.contains(&(j - 1)));
            if redenominate {
                liabilities[[i, j, 1]] = v;
            } else {
                liabilities[[i, j, 0]] = v;
            }
        }
    }
    let mut endowments = Array2::zeros((n, 2));
    for i in 0..n {
        let x = base.endowment(i, 0);
        if home.contains(&i) {
            endowments[[i, 1]] = x;
        } else {
            endowments[[i, 0]] = x - exposure[i];
            endowments[[i, 1]] = exposure[i];
        }
    }
    MultiLayerNetwork::new(liabilities, endowments)
}

/// Per-firm balance-sheet aggregates used to calibrate a single-asset network.
#[derive(Debug, Clone)]
pub struct BalanceSheetAggregates<S> {
    pub total_assets: Vec<S>,
    pub capital: Vec<S>,
    pub interbank_liabilities: Vec<S>,
}

/// Calibrate a single-asset network from aggregates and a full interbank
/// liabilities matrix: `x_i = T_i − Σ_j L_ij`, `L_i0 = T_i − Σ_j L_ij − c_i`.
/// The output satisfies the net worth identity `c_i = T_i − pbar_i`.
pub fn calibrate_from_aggregates<S: Real>(
    aggregates: &BalanceSheetAggregates<S>,
    interbank: &Array2<S>,
) -> Result<MultiLayerNetwork<S>> {
    let n = aggregates.total_assets.len();
    if n == 0 {
        return Err(Error::Calibration("no firms in the aggregates".into()));
    }
    if aggregates.capital.len() != n || aggregates.interbank_liabilities.len() != n {
        return Err(Error::Calibration(
            "aggregate columns have inconsistent lengths".into(),
        ));
    }
    if interbank.dim() != (n, n) {
        return Err(Error::Calibration(format!(
            "liabilities matrix has shape {:?}, expected ({n}, {n})",
            interbank.dim()
        )));
    }

    let mut liabilities = Array3::zeros((n, n + 1, 1));
    let mut endowments = Array2::zeros((n, 1));
    for i in 0..n {
        let total = aggregates.total_assets[i];
        let capital = aggregates.capital[i];
        let row: Vec<S> = (0..n).map(|j| interbank[[i, j]]).collect();
        let row_sum = row.iter().fold(S::zero(), |acc, &v| acc + v);
        let stated = aggregates.interbank_liabilities[i];
        let tol = real::<S>(1e-9) * (S::one() + stated.abs());
        if (row_sum - stated).abs() > tol {
            return Err(Error::Calibration(format!(
                "row {} of the liabilities matrix sums to {}, but the aggregates state {}",
                i + 1,
                row_sum,
                stated
            )));
        }
        let endowment = total - row_sum;
        let external = endowment - capital;
        let zero_tol = real::<S>(1e-9) * (S::one() + total.abs());
        let endowment = snap_nonnegative(endowment, zero_tol).ok_or_else(|| {
            Error::Calibration(format!(
                "firm {} has negative implied endowment {}",
                i + 1,
                endowment
            ))
        })?;
        let external = snap_nonnegative(external, zero_tol).ok_or_else(|| {
            Error::Calibration(format!(
                "firm {} has negative implied external liability {}",
                i + 1,
                external
            ))
        })?;
        endowments[[i, 0]] = endowment;
        liabilities[[i, 0, 0]] = external;
        for j in 0..n {
            liabilities[[i, j + 1, 0]] = interbank[[i, j]];
        }
    }
    MultiLayerNetwork::new(liabilities, endowments)
}

/// Round tiny negatives (from catastrophic cancellation) up to zero; reject
/// anything more negative.
fn snap_nonnegative<S: Real>(v: S, tol: S) -> Option<S> {
    if v >= S::zero() {
        Some(v)
    } else if v >= -tol {
        Some(S::zero())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    /// Two banks, two assets: bank 1 holds (0,2) and owes 1 of asset 1 to
    /// bank 2; bank 2 holds (2,0) and owes 1 of asset 2 to bank 1.
    pub(crate) fn two_bank_network() -> MultiLayerNetwork<f64> {
        let mut liabilities = Array3::zeros((2, 3, 2));
        liabilities[[0, 2, 0]] = 1.0; // firm 1 -> firm 2 in asset 1
        liabilities[[1, 1, 1]] = 1.0; // firm 2 -> firm 1 in asset 2
        let endowments = array![[0.0, 2.0], [2.0, 0.0]];
        MultiLayerNetwork::new(liabilities, endowments).unwrap()
    }

    #[test]
    fn self_obligation_rejected() {
        let mut liabilities = Array3::zeros((2, 3, 1));
        liabilities[[0, 1, 0]] = 1.0; // firm 1 -> node 1 (itself)
        let endowments = Array2::zeros((2, 1));
        assert!(matches!(
            MultiLayerNetwork::new(liabilities, endowments),
            Err(Error::InvalidNetwork(_))
        ));
    }

    #[test]
    fn relative_liabilities_two_bank() {
        let net = two_bank_network();
        let rel = build_relative_liabilities(&net);
        assert_eq!(rel.total(0, 0), 1.0);
        assert_eq!(rel.total(0, 1), 0.0);
        assert_eq!(rel.total(1, 0), 0.0);
        assert_eq!(rel.total(1, 1), 1.0);
        assert_eq!(rel.share(0, 2, 0), 1.0);
        // degenerate rows spread 1/(n+1) over all nodes
        assert_abs_diff_eq!(rel.share(0, 0, 1), 1.0 / 3.0);
        assert_abs_diff_eq!(rel.share(0, 1, 1), 1.0 / 3.0);
    }

    #[test]
    fn relative_liabilities_all_zero() {
        let net =
            MultiLayerNetwork::<f64>::new(Array3::zeros((3, 4, 2)), Array2::zeros((3, 2))).unwrap();
        let rel = build_relative_liabilities(&net);
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..2 {
                    assert_abs_diff_eq!(rel.share(i, j, k), 0.25);
                }
            }
        }
    }

    #[test]
    fn relative_liabilities_equal_split() {
        let mut liabilities = Array3::zeros((2, 3, 1));
        liabilities[[0, 2, 0]] = 2.0;
        liabilities[[0, 0, 0]] = 2.0;
        let net = MultiLayerNetwork::new(liabilities, Array2::zeros((2, 1))).unwrap();
        let rel = build_relative_liabilities(&net);
        assert_eq!(rel.share(0, 2, 0), 0.5);
        assert_eq!(rel.share(0, 0, 0), 0.5);
        assert_eq!(rel.total(0, 0), 4.0);
    }

    #[test]
    fn inflow_at_full_payment() {
        let net = two_bank_network();
        let rel = build_relative_liabilities(&net);
        let e = realized_inflow(&net, &rel, &rel.totals().clone());
        assert_eq!(e[[0, 0]], 0.0);
        assert_eq!(e[[0, 1]], 3.0);
        assert_eq!(e[[1, 0]], 3.0);
        assert_eq!(e[[1, 1]], 0.0);
    }

    #[test]
    fn inflow_at_zero_payment_is_endowment() {
        let net = two_bank_network();
        let rel = build_relative_liabilities(&net);
        let e = realized_inflow(&net, &rel, &Array2::zeros((2, 2)));
        assert_eq!(e, *net.endowments());
    }

    #[test]
    fn inflow_caps_at_full_obligation() {
        let net = two_bank_network();
        let rel = build_relative_liabilities(&net);
        let capped = realized_inflow(&net, &rel, &array![[9.0, 9.0], [9.0, 9.0]]);
        let full = realized_inflow(&net, &rel, &rel.totals().clone());
        assert_eq!(capped, full);
    }

    #[test]
    fn random_network_link_prob_extremes() {
        let mut spec = RandomNetworkSpec {
            n_firms: 3,
            n_assets: 2,
            link_prob: 0.0,
            link_size: 1.0,
            society_obligation: 0.5,
            endowment_range: (0.0, 20.0),
            seed: 7,
        };
        let net: MultiLayerNetwork<f64> = random_network(&spec).unwrap();
        for i in 0..3 {
            for k in 0..2 {
                assert_eq!(net.liability(i, 0, k), 0.5);
                for j in 0..3 {
                    assert_eq!(net.liability(i, j + 1, k), 0.0);
                }
            }
        }
        spec.link_prob = 1.0;
        let net: MultiLayerNetwork<f64> = random_network(&spec).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..2 {
                    let expect = if i == j { 0.0 } else { 1.0 };
                    assert_eq!(net.liability(i, j + 1, k), expect);
                }
            }
        }
    }

    #[test]
    fn random_network_is_seed_deterministic_and_split_evenly() {
        let spec = RandomNetworkSpec {
            n_firms: 20,
            n_assets: 2,
            link_prob: 0.25,
            link_size: 1.0,
            society_obligation: 1.0,
            endowment_range: (0.0, 20.0),
            seed: 42,
        };
        let a: MultiLayerNetwork<f64> = random_network(&spec).unwrap();
        let b: MultiLayerNetwork<f64> = random_network(&spec).unwrap();
        assert_eq!(a.liabilities(), b.liabilities());
        assert_eq!(a.endowments(), b.endowments());
        for i in 0..20 {
            assert_eq!(a.endowment(i, 0), a.endowment(i, 1));
            assert!(a.endowment(i, 0) >= 0.0 && a.endowment(i, 0) <= 10.0);
        }
        assert!(matches!(
            random_network::<f64>(&RandomNetworkSpec {
                link_prob: 1.5,
                ..spec
            }),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn split_two_currency_rules() {
        // 3 firms, firm 3 home, dense single-asset liabilities.
        let mut interfirm = Array3::zeros((3, 3, 1));
        let mut society = Array2::zeros((3, 1));
        let mut next = 1.0;
        for i in 0..3 {
            society[[i, 0]] = next;
            next += 1.0;
            for j in 0..3 {
                if i != j {
                    interfirm[[i, j, 0]] = next;
                    next += 1.0;
                }
            }
        }
        let endowments = array![[10.0], [20.0], [30.0]];
        let base = MultiLayerNetwork::from_parts(interfirm, society, endowments).unwrap();
        let home: BTreeSet<usize> = [2].into_iter().collect();
        let ge = [0.5, 0.0, 123.0]; // home exposure ignored
        let split = split_two_currency(&base, &ge, &home).unwrap();

        // Endowments: non-home keep x - GE in asset 1, GE in asset 2.
        assert_eq!(split.endowment(0, 0), 9.5);
        assert_eq!(split.endowment(0, 1), 0.5);
        assert_eq!(split.endowment(1, 0), 20.0);
        assert_eq!(split.endowment(1, 1), 0.0);
        // Home firm: everything in asset 2.
        assert_eq!(split.endowment(2, 0), 0.0);
        assert_eq!(split.endowment(2, 1), 30.0);

        for i in 0..3 {
            for j in 0..=3 {
                let v = base.liability(i, j, 0);
                let to_home = j > 0 && home.contains(&(j - 1));
                let expect_asset2 = home.contains(&i) && (j == 0 || to_home);
                if expect_asset2 {
                    assert_eq!(split.liability(i, j, 1), v);
                    assert_eq!(split.liability(i, j, 0), 0.0);
                } else {
                    assert_eq!(split.liability(i, j, 0), v);
                    assert_eq!(split.liability(i, j, 1), 0.0);
                }
                // Conservation per entry.
                assert_eq!(split.liability(i, j, 0) + split.liability(i, j, 1), v);
            }
            assert_eq!(
                split.endowment(i, 0) + split.endowment(i, 1),
                base.endowment(i, 0)
            );
        }
    }

    #[test]
    fn split_two_currency_degenerate_cases() {
        let net = MultiLayerNetwork::<f64>::new(
            {
                let mut l = Array3::zeros((2, 3, 1));
                l[[0, 2, 0]] = 1.0;
                l[[1, 0, 0]] = 2.0;
                l
            },
            array![[3.0], [4.0]],
        )
        .unwrap();

        // Empty home set, zero exposure: asset 2 identically zero.
        let split = split_two_currency(&net, &[0.0, 0.0], &BTreeSet::new()).unwrap();
        for i in 0..2 {
            assert_eq!(split.endowment(i, 1), 0.0);
            for j in 0..=2 {
                assert_eq!(split.liability(i, j, 1), 0.0);
            }
        }

        // All firms home: everything moves to asset 2.
        let all: BTreeSet<usize> = [0, 1].into_iter().collect();
        let split = split_two_currency(&net, &[0.0, 0.0], &all).unwrap();
        for i in 0..2 {
            assert_eq!(split.endowment(i, 0), 0.0);
            for j in 0..=2 {
                assert_eq!(split.liability(i, j, 0), 0.0);
                assert_eq!(split.liability(i, j, 1), net.liability(i, j, 0));
            }
        }

        // Exposure above the endowment is rejected.
        assert!(split_two_currency(&net, &[5.0, 0.0], &BTreeSet::new()).is_err());
    }

    #[test]
    fn calibration_single_firm() {
        // A firm with T = 10, c = 2 owing 3 interbank: the counterparty
        // row is a second firm whose own sheet is inert.
        let aggregates = BalanceSheetAggregates {
            total_assets: vec![10.0, 10.0],
            capital: vec![2.0, 7.0],
            interbank_liabilities: vec![3.0, 0.0],
        };
        let interbank = array![[0.0, 3.0], [0.0, 0.0]];
        let net = calibrate_from_aggregates(&aggregates, &interbank).unwrap();
        assert_eq!(net.endowment(0, 0), 7.0);
        assert_eq!(net.liability(0, 0, 0), 5.0);
        let pbar = net.total_liabilities();
        assert_eq!(pbar[[0, 0]], 8.0);
        // net worth identity c = T - pbar
        assert_eq!(10.0 - pbar[[0, 0]], 2.0);

        // c = T with no interbank: x = T, no external liability.
        let free = BalanceSheetAggregates {
            total_assets: vec![10.0],
            capital: vec![10.0],
            interbank_liabilities: vec![0.0],
        };
        let net = calibrate_from_aggregates(&free, &Array2::zeros((1, 1))).unwrap();
        assert_eq!(net.endowment(0, 0), 10.0);
        assert_eq!(net.total_liabilities()[[0, 0]], 0.0);

        // interbank = T leaves x = 0 and L_i0 = -c: rejected.
        let broke = BalanceSheetAggregates {
            total_assets: vec![3.0, 10.0],
            capital: vec![2.0, 8.0],
            interbank_liabilities: vec![3.0, 0.0],
        };
        assert!(matches!(
            calibrate_from_aggregates(&broke, &interbank),
            Err(Error::Calibration(_))
        ));
    }
}
