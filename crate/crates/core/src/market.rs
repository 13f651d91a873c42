//! Inverse demand functions: maps from net asset sales to prices.
//!
//! Every family is continuous, componentwise nonincreasing, and bounded in
//! an explicit price box `[lo, hi]`. The two-asset symmetric construction
//! derives the buy-side price from the sell-side curve through the
//! change-of-numéraire identity `F2(-alpha(z)) * f(z) = 1` with
//! `alpha(z) = z * f(z)`.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::network::PriceVector;
use crate::scalar::{clamp, dot, real, smax, Real};

/// A scalar, continuous, nonincreasing curve used as the one-dimensional
/// ingredient of the inverse demand families.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarCurve<S> {
    /// `f(z) = value`.
    Constant { value: S },
    /// `f(z) = (amplitude * atan(-impact * z) + shift * pi) / (shift * pi)`.
    ///
    /// `impact = 0` gives the frictionless constant 1. Requires
    /// `amplitude < 2 * shift` so the curve stays strictly positive.
    Atan { amplitude: S, shift: S, impact: S },
    /// `f(z) = clamp(intercept - slope * z, lo, hi)`.
    CappedLinear {
        intercept: S,
        slope: S,
        lo: S,
        hi: S,
    },
    /// `f(z) = clamp(exp(-rate * z), lo, hi)`.
    CappedExp { rate: S, lo: S, hi: S },
    /// Piecewise-linear interpolation of `(z, f(z))` samples, constant
    /// beyond the first and last sample.
    Tabulated { points: Vec<(S, S)> },
}

impl<S: Real> ScalarCurve<S> {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarCurve::Constant { value } => {
                if !value.is_finite() || *value <= S::zero() {
                    return Err(Error::InverseDemand(format!(
                        "constant curve value must be finite and > 0, got {value}"
                    )));
                }
            }
            ScalarCurve::Atan {
                amplitude,
                shift,
                impact,
            } => {
                if *amplitude < S::zero() || *impact < S::zero() || *shift <= S::zero() {
                    return Err(Error::InverseDemand(
                        "atan curve needs amplitude >= 0, impact >= 0, shift > 0".into(),
                    ));
                }
                if *amplitude >= *shift + *shift {
                    return Err(Error::InverseDemand(
                        "atan curve needs amplitude < 2 * shift to stay positive".into(),
                    ));
                }
            }
            ScalarCurve::CappedLinear {
                intercept,
                slope,
                lo,
                hi,
            } => {
                if *slope < S::zero() {
                    return Err(Error::InverseDemand(
                        "capped-linear slope must be >= 0".into(),
                    ));
                }
                if !(*lo > S::zero() && *hi >= *lo && intercept.is_finite()) {
                    return Err(Error::InverseDemand(
                        "capped-linear curve needs 0 < lo <= hi and a finite intercept".into(),
                    ));
                }
            }
            ScalarCurve::CappedExp { rate, lo, hi } => {
                if *rate < S::zero() || !(*lo > S::zero() && *hi >= *lo) {
                    return Err(Error::InverseDemand(
                        "capped-exp curve needs rate >= 0 and 0 < lo <= hi".into(),
                    ));
                }
            }
            ScalarCurve::Tabulated { points } => {
                if points.is_empty() {
                    return Err(Error::InverseDemand("tabulated curve has no points".into()));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InverseDemand(
                            "tabulated curve abscissae must be strictly increasing".into(),
                        ));
                    }
                    if w[1].1 > w[0].1 {
                        return Err(Error::InverseDemand(
                            "tabulated curve must be nonincreasing".into(),
                        ));
                    }
                }
                if points
                    .iter()
                    .any(|&(_, v)| !(v > S::zero()) || !v.is_finite())
                {
                    return Err(Error::InverseDemand(
                        "tabulated curve values must be finite and > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, z: S) -> S {
        match self {
            ScalarCurve::Constant { value } => *value,
            ScalarCurve::Atan {
                amplitude,
                shift,
                impact,
            } => {
                let pi = S::PI();
                (*amplitude * (-*impact * z).atan() + *shift * pi) / (*shift * pi)
            }
            ScalarCurve::CappedLinear {
                intercept,
                slope,
                lo,
                hi,
            } => clamp(*intercept - *slope * z, *lo, *hi),
            ScalarCurve::CappedExp { rate, lo, hi } => clamp((-*rate * z).exp(), *lo, *hi),
            ScalarCurve::Tabulated { points } => {
                if z <= points[0].0 {
                    return points[0].1;
                }
                if z >= points[points.len() - 1].0 {
                    return points[points.len() - 1].1;
                }
                let idx = points.partition_point(|&(x, _)| x <= z);
                let (x0, y0) = points[idx - 1];
                let (x1, y1) = points[idx];
                let t = (z - x0) / (x1 - x0);
                y0 + t * (y1 - y0)
            }
        }
    }

    /// Infimum and supremum of the curve over all of `R`.
    pub fn range(&self) -> (S, S) {
        match self {
            ScalarCurve::Constant { value } => (*value, *value),
            ScalarCurve::Atan {
                amplitude,
                shift,
                impact,
            } => {
                if *impact == S::zero() || *amplitude == S::zero() {
                    (S::one(), S::one())
                } else {
                    let half = *amplitude / (*shift + *shift);
                    (S::one() - half, S::one() + half)
                }
            }
            ScalarCurve::CappedLinear {
                intercept,
                slope,
                lo,
                hi,
            } => {
                if *slope == S::zero() {
                    let v = clamp(*intercept, *lo, *hi);
                    (v, v)
                } else {
                    (*lo, *hi)
                }
            }
            ScalarCurve::CappedExp { rate, lo, hi } => {
                if *rate == S::zero() {
                    let v = clamp(S::one(), *lo, *hi);
                    (v, v)
                } else {
                    (*lo, *hi)
                }
            }
            ScalarCurve::Tabulated { points } => (points[points.len() - 1].1, points[0].1),
        }
    }
}

/// Net pre-transacted quantities that generate the initial price shock
/// `q0 = F(gamma0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockSpec<S> {
    gamma0: Vec<S>,
}

impl<S: Real> ShockSpec<S> {
    pub fn zero(m: usize) -> Self {
        Self {
            gamma0: vec![S::zero(); m],
        }
    }

    pub fn from_gamma(gamma0: Vec<S>) -> Result<Self> {
        if gamma0.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidInput(
                "shock quantities must be finite".into(),
            ));
        }
        Ok(Self { gamma0 })
    }

    /// Build the shock whose traded quantities reproduce the given initial
    /// price, `F(gamma0) = q0`.
    pub fn from_price(demand: &InverseDemand<S>, q0: &[S]) -> Result<Self> {
        let gamma0 = demand.invert(q0)?;
        Ok(Self { gamma0 })
    }

    pub fn gamma0(&self) -> &[S] {
        &self.gamma0
    }

    pub fn initial_price(&self, demand: &InverseDemand<S>) -> PriceVector<S> {
        demand.eval(&self.gamma0)
    }
}

#[derive(Debug, Clone)]
enum DemandFamily<S> {
    Constant {
        prices: Array1<S>,
    },
    CappedLinear {
        intercept: Array1<S>,
        slope: Array1<S>,
    },
    SymmetricTwoAsset {
        f: ScalarCurve<S>,
    },
    RatioForm {
        g: ScalarCurve<S>,
    },
}

/// Inverse demand function: a pure map from net sale quantities to a price
/// vector contained in `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct InverseDemand<S> {
    family: DemandFamily<S>,
    m: usize,
    lo: Array1<S>,
    hi: Array1<S>,
}

impl<S: Real> InverseDemand<S> {
    /// Frictionless market: prices never move.
    pub fn constant(prices: Vec<S>) -> Result<Self> {
        let q = PriceVector::new(prices)?;
        let arr = Array1::from(q.to_vec());
        Ok(Self {
            m: arr.len(),
            lo: arr.clone(),
            hi: arr.clone(),
            family: DemandFamily::Constant { prices: arr },
        })
    }

    /// Diagonal capped-linear impact: `F_k(z) = clamp(intercept_k - slope_k * z_k, lo_k, hi_k)`.
    pub fn capped_linear(intercept: Vec<S>, slope: Vec<S>, lo: Vec<S>, hi: Vec<S>) -> Result<Self> {
        let m = intercept.len();
        if m == 0 || slope.len() != m || lo.len() != m || hi.len() != m {
            return Err(Error::InverseDemand(
                "capped-linear parameter vectors must share a nonzero length".into(),
            ));
        }
        for k in 0..m {
            ScalarCurve::CappedLinear {
                intercept: intercept[k],
                slope: slope[k],
                lo: lo[k],
                hi: hi[k],
            }
            .validate()
            .map_err(|e| Error::InverseDemand(format!("asset {}: {e}", k + 1)))?;
        }
        Ok(Self {
            family: DemandFamily::CappedLinear {
                intercept: Array1::from(intercept),
                slope: Array1::from(slope),
            },
            m,
            lo: Array1::from(lo),
            hi: Array1::from(hi),
        })
    }

    /// Two assets with asset 1 as the numéraire: `F1 = 1`, and the second
    /// asset priced by `f` on the sell side and its reciprocal image on the
    /// buy side. Requires `f(0) = 1` (continuity at zero under the
    /// reciprocal symmetry) and `z * f(z)` strictly increasing.
    pub fn symmetric_two_asset(f: ScalarCurve<S>) -> Result<Self> {
        f.validate()?;
        let f0 = f.value(S::zero());
        if (f0 - S::one()).abs() > real::<S>(1e-9) {
            return Err(Error::InverseDemand(format!(
                "symmetric construction needs f(0) = 1, got {f0}"
            )));
        }
        // Nonincreasing f and strictly increasing alpha(z) = z f(z),
        // checked on a log-spaced grid of the sell side.
        let grid = validation_grid::<S>();
        let mut prev_f = f.value(S::zero());
        let mut prev_alpha = S::zero();
        for &z in grid.iter().skip(1) {
            let fz = f.value(z);
            let slack = real::<S>(8.0) * S::epsilon() * (S::one() + prev_f.abs());
            if fz > prev_f + slack {
                return Err(Error::InverseDemand(
                    "curve is not nonincreasing on the validation grid".into(),
                ));
            }
            let az = z * fz;
            let alpha_slack = real::<S>(8.0) * S::epsilon() * (S::one() + prev_alpha.abs());
            if az <= prev_alpha - alpha_slack {
                return Err(Error::InverseDemand(
                    "z * f(z) is not strictly increasing on the validation grid".into(),
                ));
            }
            prev_f = fz;
            prev_alpha = az;
        }
        let (f_lo, _) = f.range();
        let lo2 = f_lo;
        let hi2 = S::one() / f_lo;
        Ok(Self {
            family: DemandFamily::SymmetricTwoAsset { f },
            m: 2,
            lo: Array1::from(vec![S::one(), lo2]),
            hi: Array1::from(vec![S::one(), hi2]),
        })
    }

    /// m-asset ratio construction `F_k(z) = g(z_k) / g(z_1)`; asset 1 is the
    /// numéraire with `F1 = 1` identically.
    pub fn ratio_form(g: ScalarCurve<S>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InverseDemand(
                "ratio form needs at least one asset".into(),
            ));
        }
        g.validate()?;
        let (g_lo, g_hi) = g.range();
        if !(g_lo > S::zero()) {
            return Err(Error::InverseDemand(
                "ratio form needs a strictly positive curve".into(),
            ));
        }
        let mut lo = vec![g_lo / g_hi; m];
        let mut hi = vec![g_hi / g_lo; m];
        lo[0] = S::one();
        hi[0] = S::one();
        Ok(Self {
            family: DemandFamily::RatioForm { g },
            m,
            lo: Array1::from(lo),
            hi: Array1::from(hi),
        })
    }

    pub fn n_assets(&self) -> usize {
        self.m
    }

    /// Componentwise price bounds `(lo, hi)`.
    pub fn bounds(&self) -> (&Array1<S>, &Array1<S>) {
        (&self.lo, &self.hi)
    }

    /// Price at zero net trades (the unshocked price).
    pub fn price_at_zero(&self) -> PriceVector<S> {
        self.eval(&vec![S::zero(); self.m])
    }

    /// Evaluate the inverse demand function at net sales `z`.
    pub fn eval(&self, z: &[S]) -> PriceVector<S> {
        assert_eq!(z.len(), self.m, "net sale vector has wrong length");
        let values: Vec<S> = match &self.family {
            DemandFamily::Constant { prices } => prices.to_vec(),
            DemandFamily::CappedLinear { intercept, slope } => (0..self.m)
                .map(|k| clamp(intercept[k] - slope[k] * z[k], self.lo[k], self.hi[k]))
                .collect(),
            DemandFamily::SymmetricTwoAsset { f } => {
                let z2 = z[1];
                let q2 = if z2 >= S::zero() {
                    f.value(z2)
                } else {
                    S::one() / f.value(self.alpha_inv(-z2))
                };
                vec![S::one(), clamp(q2, self.lo[1], self.hi[1])]
            }
            DemandFamily::RatioForm { g } => {
                let base = g.value(z[0]);
                (0..self.m)
                    .map(|k| clamp(g.value(z[k]) / base, self.lo[k], self.hi[k]))
                    .collect()
            }
        };
        PriceVector::new(values).expect("family evaluation stays positive")
    }

    /// Units of the second asset whose sale buys `alpha(z) = z * f(z)` units
    /// of the numéraire; inverts `alpha` by safeguarded bisection.
    fn alpha_inv(&self, w: S) -> S {
        let f = match &self.family {
            DemandFamily::SymmetricTwoAsset { f } => f,
            _ => unreachable!("alpha_inv is only defined for the symmetric two-asset family"),
        };
        if w <= S::zero() {
            return S::zero();
        }
        let alpha = |z: S| z * f.value(z);
        let (f_lo, _) = f.range();
        // alpha(w / f_lo) >= w because f >= f_lo everywhere.
        let mut hi = w / f_lo;
        let mut grow = 0;
        while alpha(hi) < w && grow < 64 {
            hi = hi + hi;
            grow += 1;
        }
        let mut lo = S::zero();
        let tol = smax(real::<S>(1e-12), S::epsilon() * real::<S>(4.0)) * (S::one() + w);
        for _ in 0..200 {
            let mid = (lo + hi) / real::<S>(2.0);
            let a = alpha(mid);
            if (a - w).abs() <= tol {
                return mid;
            }
            if a < w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / real::<S>(2.0)
    }

    /// Find net sales `gamma0` with `F(gamma0) = q0`. Errors when `q0` lies
    /// outside the price box or off the family's reachable set.
    pub fn invert(&self, q0: &[S]) -> Result<Vec<S>> {
        if q0.len() != self.m {
            return Err(Error::InvalidInput(format!(
                "initial price has {} components, expected {}",
                q0.len(),
                self.m
            )));
        }
        let tol = |scale: S| real::<S>(1e-9) * (S::one() + scale.abs());
        for k in 0..self.m {
            if q0[k] < self.lo[k] - tol(self.lo[k]) || q0[k] > self.hi[k] + tol(self.hi[k]) {
                return Err(Error::PriceNotInvertible(format!(
                    "price {} of asset {} lies outside the bounds [{}, {}]",
                    q0[k],
                    k + 1,
                    self.lo[k],
                    self.hi[k]
                )));
            }
        }
        match &self.family {
            DemandFamily::Constant { prices } => {
                for k in 0..self.m {
                    if (q0[k] - prices[k]).abs() > tol(prices[k]) {
                        return Err(Error::PriceNotInvertible(format!(
                            "constant family only produces price {} in asset {}",
                            prices[k],
                            k + 1
                        )));
                    }
                }
                Ok(vec![S::zero(); self.m])
            }
            DemandFamily::CappedLinear { intercept, slope } => {
                let mut z = vec![S::zero(); self.m];
                for k in 0..self.m {
                    if slope[k] == S::zero() {
                        if (q0[k] - intercept[k]).abs() > tol(intercept[k]) {
                            return Err(Error::PriceNotInvertible(format!(
                                "asset {} has no impact; only price {} is reachable",
                                k + 1,
                                intercept[k]
                            )));
                        }
                    } else {
                        let target = clamp(q0[k], self.lo[k], self.hi[k]);
                        z[k] = (intercept[k] - target) / slope[k];
                    }
                }
                Ok(z)
            }
            DemandFamily::SymmetricTwoAsset { f } => {
                if (q0[0] - S::one()).abs() > tol(S::one()) {
                    return Err(Error::PriceNotInvertible(
                        "asset 1 is the numéraire; its price must be 1".into(),
                    ));
                }
                let q2 = clamp(q0[1], self.lo[1], self.hi[1]);
                let z2 = if q2 == S::one() {
                    S::zero()
                } else if q2 < S::one() {
                    invert_nonincreasing(|z| f.value(z), q2, false)?
                } else {
                    let zf = invert_nonincreasing(|z| f.value(z), S::one() / q2, false)?;
                    -(zf * f.value(zf))
                };
                Ok(vec![S::zero(), z2])
            }
            DemandFamily::RatioForm { g } => {
                if (q0[0] - S::one()).abs() > tol(S::one()) {
                    return Err(Error::PriceNotInvertible(
                        "asset 1 is the numéraire; its price must be 1".into(),
                    ));
                }
                let g0 = g.value(S::zero());
                let mut z = vec![S::zero(); self.m];
                for k in 1..self.m {
                    z[k] = invert_nonincreasing(|x| g.value(x), q0[k] * g0, true)?;
                }
                Ok(z)
            }
        }
    }

    /// Sample the liquidation-value monotonicity condition
    /// `z <= z' (z != z') implies z' F(z') > z F(z)` on random ordered pairs;
    /// returns human-readable warnings for observed violations. The shipped
    /// families satisfy it, so warnings normally come only from user-supplied
    /// tabulated curves.
    pub fn validate_liquidation_value(&self, samples: usize, seed: u64) -> Vec<String> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut warnings = Vec::new();
        for _ in 0..samples {
            let z: Vec<S> = (0..self.m)
                .map(|_| real::<S>(rng.random_range(-20.0..20.0)))
                .collect();
            let mut z2 = z.clone();
            for v in z2.iter_mut() {
                *v += real::<S>(rng.random_range(0.0..5.0));
            }
            let lv1 = dot(&z, self.eval(&z).as_slice());
            let lv2 = dot(&z2, self.eval(&z2).as_slice());
            if lv2 <= lv1 {
                warnings.push(format!(
                    "liquidation value not strictly increasing: {:?} -> {:?} gives {} -> {}",
                    z.iter()
                        .map(|v| v.to_f64().unwrap_or(f64::NAN))
                        .collect::<Vec<_>>(),
                    z2.iter()
                        .map(|v| v.to_f64().unwrap_or(f64::NAN))
                        .collect::<Vec<_>>(),
                    lv1,
                    lv2
                ));
                if warnings.len() >= 8 {
                    break;
                }
            }
        }
        warnings
    }
}

/// Solve `curve(z) = target` for a nonincreasing positive curve by bracket
/// growth plus bisection. `two_sided` searches all of `R`, otherwise `[0, inf)`.
fn invert_nonincreasing<S: Real>(curve: impl Fn(S) -> S, target: S, two_sided: bool) -> Result<S> {
    let mut lo = if two_sided { -S::one() } else { S::zero() };
    let mut hi = S::one();
    let mut grow = 0;
    while curve(hi) > target && grow < 200 {
        hi = hi + hi;
        grow += 1;
    }
    if curve(hi) > target {
        return Err(Error::PriceNotInvertible(format!(
            "price {target} is below the curve's reachable range"
        )));
    }
    grow = 0;
    while curve(lo) < target && grow < 200 {
        if !two_sided && lo == S::zero() {
            return Err(Error::PriceNotInvertible(format!(
                "price {target} is above the curve's reachable range"
            )));
        }
        lo = lo + lo;
        grow += 1;
    }
    if curve(lo) < target {
        return Err(Error::PriceNotInvertible(format!(
            "price {target} is above the curve's reachable range"
        )));
    }
    let tol = smax(real::<S>(1e-13), S::epsilon() * real::<S>(4.0)) * (S::one() + target.abs());
    for _ in 0..200 {
        let mid = (lo + hi) / real::<S>(2.0);
        let v = curve(mid);
        if (v - target).abs() <= tol {
            return Ok(mid);
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / real::<S>(2.0))
}

/// Log-spaced sell-side grid used for construction-time curve checks.
fn validation_grid<S: Real>() -> Vec<S> {
    let mut grid = vec![S::zero()];
    let mut z = 1e-6_f64;
    while z <= 1e8 {
        grid.push(real(z));
        z *= 2.0;
    }
    grid
}

/// The capped-linear market of the two-bank worked example: numéraire first
/// asset and `F2(z) = clamp(1 - b * z2, lo, hi)`.
pub fn two_bank_example_market<S: Real>(b: S, lo2: S, hi2: S) -> Result<InverseDemand<S>> {
    InverseDemand::capped_linear(
        vec![S::one(), S::one()],
        vec![S::zero(), b],
        vec![S::one(), lo2],
        vec![S::one(), hi2],
    )
}
