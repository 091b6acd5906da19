//! Absorption terms `g` and their C¹ truncations `g_n`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::FracOrder;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied nondecreasing `g` with `g(0) ≥ 0`.
#[derive(Clone)]
pub struct CustomNonlinearity {
    name: String,
    f: Evaluator,
    growth: f64,
    lambda: Option<f64>,
}

impl CustomNonlinearity {
    /// `growth` is the power `q` with `g(s) ≈ s^q` for large `s`, used to
    /// weight the grid representation of `g(u)`; `lambda` is the constant in
    /// `g(s + t) ≤ λ(g(s) + g(t))` when known.
    pub fn new<F>(name: &str, f: F, growth: f64, lambda: Option<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.to_string(), f: Arc::new(f), growth, lambda }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomNonlinearity")
            .field("name", &self.name)
            .field("growth", &self.growth)
            .field("lambda", &self.lambda)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Nonlinearity {
    Power(f64),
    Zero,
    Custom(CustomNonlinearity),
}

/// Built-in custom nonlinearities addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedCustom {
    /// `s² / ln(e + s)`
    SquareOverLog,
    /// `s^{3/2} + s`
    PowerPlusLinear,
}

impl NamedCustom {
    pub fn build(self) -> Nonlinearity {
        match self {
            Self::SquareOverLog => Nonlinearity::Custom(CustomNonlinearity::new(
                "square_over_log",
                |s: f64| s * s / (std::f64::consts::E + s).ln(),
                2.0,
                Some(2.0),
            )),
            Self::PowerPlusLinear => Nonlinearity::Custom(CustomNonlinearity::new(
                "power_plus_linear",
                |s: f64| s.powf(1.5) + s,
                1.5,
                Some(2f64.sqrt()),
            )),
        }
    }
}

impl Nonlinearity {
    pub fn power(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 {
            Ok(Self::Power(p))
        } else {
            Err(Error::Domain(format!("power p = {p} must be positive")))
        }
    }

    /// `g(s)` for `s ≥ 0`; negative arguments are clamped to zero.
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match self {
            Self::Power(p) => s.powf(*p),
            Self::Zero => 0.0,
            Self::Custom(c) => (c.f)(s),
        }
    }

    /// `g'(s)`, by central differences for custom `g`.
    pub fn derivative(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match self {
            Self::Power(p) => {
                if s == 0.0 {
                    if *p >= 1.0 {
                        if *p == 1.0 {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        f64::INFINITY
                    }
                } else {
                    p * s.powf(p - 1.0)
                }
            }
            Self::Zero => 0.0,
            Self::Custom(c) => {
                let h = 1e-6 * (1.0 + s);
                let lo = (s - h).max(0.0);
                ((c.f)(s + h) - (c.f)(lo)) / (s + h - lo)
            }
        }
    }

    /// Power `q` with `g(s) ~ s^q` at infinity.
    pub fn growth(&self) -> f64 {
        match self {
            Self::Power(p) => *p,
            Self::Zero => 0.0,
            Self::Custom(c) => c.growth,
        }
    }

    /// `λ` in `g(s + t) ≤ λ(g(s) + g(t))`; `max(1, 2^{p-1})` for powers.
    pub fn subadditivity_constant(&self) -> Option<f64> {
        match self {
            Self::Power(p) => Some(2f64.powf(p - 1.0).max(1.0)),
            Self::Zero => Some(1.0),
            Self::Custom(c) => c.lambda,
        }
    }

    /// Checks positivity of `p`, `g(0) ≥ 0` and monotonicity on samples.
    pub fn validate(&self) -> Result<()> {
        if let Self::Power(p) = self {
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::Domain(format!("power p = {p} must be positive")));
            }
        }
        let g0 = self.eval(0.0);
        if !(g0 >= 0.0 && g0.is_finite()) {
            return Err(Error::Domain(format!("g(0) = {g0} must be finite and nonnegative")));
        }
        let mut prev = g0;
        for i in 1..=400 {
            let s = 1e-4 * 1.06f64.powi(i);
            let v = self.eval(s);
            if !(v >= prev) {
                return Err(Error::Domain(format!("g is not nondecreasing near s = {s:.4e}")));
            }
            prev = v;
        }
        Ok(())
    }

    /// Whether `∫_1^∞ g(s) s^{-1-p*} ds < ∞` for powers, `None` otherwise.
    pub fn power_satisfies_g1(&self, order: FracOrder) -> Option<bool> {
        match self {
            Self::Power(p) => Some(*p < order.p_star()),
            Self::Zero => Some(true),
            Self::Custom(_) => None,
        }
    }
}

/// `g_n = h_n ∘ g` with `h_n` the identity below `n - w`, the constant `n`
/// above `n + w`, and the quadratic joining them in between, so `g_n` is C¹,
/// nondecreasing in `s` and in `n`, and `sup g_n = n`.
#[derive(Debug, Clone)]
pub struct TruncatedNonlinearity {
    base: Nonlinearity,
    level: f64,
    band: f64,
}

/// Relative half-width of the smoothing band.
pub const TRUNCATION_BAND: f64 = 1e-3;

pub fn truncate(g: &Nonlinearity, n: f64) -> Result<TruncatedNonlinearity> {
    let g0 = g.eval(0.0);
    if !(n.is_finite() && n > g0) {
        return Err(Error::InvalidLevel(format!("level n = {n} must exceed g(0) = {g0}")));
    }
    let band = (TRUNCATION_BAND * n).min(0.5 * (n - g0));
    Ok(TruncatedNonlinearity { base: g.clone(), level: n, band })
}

impl TruncatedNonlinearity {
    pub fn base(&self) -> &Nonlinearity {
        &self.base
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    fn cap(&self, a: f64) -> (f64, f64) {
        let lo = self.level - self.band;
        if a <= lo {
            (a, 1.0)
        } else if a >= self.level + self.band {
            (self.level, 0.0)
        } else {
            let d = a - lo;
            (a - d * d / (4.0 * self.band), 1.0 - d / (2.0 * self.band))
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.cap(self.base.eval(s)).0
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let (_, slope) = self.cap(self.base.eval(s));
        if slope == 0.0 {
            0.0
        } else {
            slope * self.base.derivative(s)
        }
    }
}

/// The absorption term handed to the solver.
#[derive(Debug, Clone)]
pub enum Reaction {
    Full(Nonlinearity),
    Truncated(TruncatedNonlinearity),
}

impl From<Nonlinearity> for Reaction {
    fn from(g: Nonlinearity) -> Self {
        Self::Full(g)
    }
}

impl From<TruncatedNonlinearity> for Reaction {
    fn from(g: TruncatedNonlinearity) -> Self {
        Self::Truncated(g)
    }
}

impl Reaction {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::Full(g) => g.eval(s),
            Self::Truncated(g) => g.eval(s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Self::Full(g) => g.derivative(s),
            Self::Truncated(g) => g.derivative(s),
        }
    }

    pub fn base(&self) -> &Nonlinearity {
        match self {
            Self::Full(g) => g,
            Self::Truncated(g) => g.base(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.base(), Nonlinearity::Zero)
    }

    /// Exponent `e` such that `g(u)·ρ^e` stays bounded when `u ~ ρ^{α-1}`;
    /// bounded truncations need none.
    pub fn weight_exponent(&self, order: FracOrder) -> f64 {
        match self {
            Self::Full(g) => g.growth().max(0.0) * (1.0 - order.alpha()),
            Self::Truncated(_) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn truncation_caps_and_passes_through() {
        let g = Nonlinearity::power(2.0).unwrap();
        let gn = truncate(&g, 4.0).unwrap();
        assert_eq!(gn.eval(1.0), 1.0);
        assert_eq!(gn.eval(3.0), 4.0);
        assert!((gn.eval(2.0) - 4.0).abs() < 4e-3);
        assert!(matches!(truncate(&g, 0.0), Err(Error::InvalidLevel(_))));
        let shifted = Nonlinearity::Custom(CustomNonlinearity::new("shift", |s| 1.0 + s, 1.0, None));
        assert!(matches!(truncate(&shifted, 1.0), Err(Error::InvalidLevel(_))));
        assert_eq!(truncate(&shifted, 2.0).unwrap().eval(0.0), 1.0);
    }

    #[test]
    fn truncation_is_c1_across_the_band() {
        let g = Nonlinearity::power(1.5).unwrap();
        let gn = truncate(&g, 10.0).unwrap();
        let s_lo = (10.0f64 - 0.01).powf(1.0 / 1.5);
        let s_hi = (10.0f64 + 0.01).powf(1.0 / 1.5);
        for s in [s_lo, s_hi] {
            let h = 1e-9;
            let fd = (gn.eval(s + h) - gn.eval(s - h)) / (2.0 * h);
            assert!((fd - gn.derivative(s)).abs() < 1e-5, "{fd} vs {}", gn.derivative(s));
        }
    }

    #[test]
    fn truncations_converge_locally() {
        let g = Nonlinearity::power(2.5).unwrap();
        let mut last = f64::INFINITY;
        for n in [10.0, 100.0, 1000.0, 1e4] {
            let gn = truncate(&g, n).unwrap();
            let err = (0..=100).map(|i| (g.eval(0.1 * i as f64) - gn.eval(0.1 * i as f64)).abs()).fold(0.0, f64::max);
            assert!(err <= last);
            last = err;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn custom_validation() {
        let bad = Nonlinearity::Custom(CustomNonlinearity::new("dec", |s| -s, 1.0, None));
        assert!(bad.validate().is_err());
        assert!(NamedCustom::SquareOverLog.build().validate().is_ok());
        assert!(Nonlinearity::power(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn truncations_are_ordered(n in 0.5f64..50.0, s in 0.0f64..20.0, p in 0.3f64..4.0) {
            let g = Nonlinearity::power(p).unwrap();
            let a = truncate(&g, n).unwrap();
            let b = truncate(&g, n + 1.0).unwrap();
            prop_assert!(a.eval(s) <= b.eval(s) + 1e-12);
            prop_assert!(b.eval(s) <= g.eval(s) + 1e-12);
            prop_assert!(a.eval(s) <= n);
            prop_assert!(a.eval(s) <= a.eval(s + 0.01) + 1e-15);
        }
    }
}
