//! The one-dimensional truncated-Laplacian constant
//!
//! ```text
//! C(τ) = ∫_0^∞ [χ_(0,1)(t)|1-t|^τ + (1+t)^τ - 2] / t^{1+2α} dt,   τ ∈ (-1, 0)
//! ```
//!
//! and its zero `τ₀(α)`, which equals `α - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::FracOrder;
use crate::quadrature::{Integrator, Interval, SingularitySpec, DEFAULT_TOL_1D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CTauValue {
    pub tau: f64,
    pub value: f64,
    pub error_estimate: f64,
}

/// `C(τ)` to the default 1D tolerance.
pub fn c_tau(order: FracOrder, tau: f64) -> Result<CTauValue> {
    c_tau_with_tol(order, tau, DEFAULT_TOL_1D)
}

pub fn c_tau_with_tol(order: FracOrder, tau: f64, tol: f64) -> Result<CTauValue> {
    if !(tau > -1.0 && tau < 0.0) {
        return Err(Error::Domain(format!("tau = {tau} is not in (-1, 0)")));
    }
    let a = order.alpha();
    let q = Integrator::absolute(tol / 3.0);

    // [0, 1/2]: the bracket is the even part of the binomial series,
    // 2 Σ_j C(τ, 2j) t^{2j}, summed directly to avoid cancellation
    let near_zero = q.integrate(
        |t| {
            let t2 = t * t;
            let mut coef = tau * (tau - 1.0) / 2.0;
            let mut pow = t2;
            let mut bracket = 0.0;
            let mut j = 1.0;
            loop {
                let term = coef * pow;
                bracket += term;
                if term.abs() <= 1e-17 * bracket.abs() {
                    break;
                }
                coef *= (tau - 2.0 * j) * (tau - 2.0 * j - 1.0) / ((2.0 * j + 1.0) * (2.0 * j + 2.0));
                pow *= t2;
                j += 1.0;
            }
            2.0 * bracket * t.powf(-1.0 - 2.0 * a)
        },
        Interval::Finite(0.0, 0.5),
        SingularitySpec::left(1.0 - 2.0 * a),
    )?;
    // [1/2, 1] written in s = 1 - t so the |1-t|^τ singularity sits at s = 0.
    // The bare s^τ part is integrated exactly; for τ close to -1 its mass sits
    // below the smallest representable s.
    let exact_part = 0.5f64.powf(1.0 + tau) / (1.0 + tau);
    let near_one = q.integrate(
        |s| {
            let w = (1.0 - s).powf(-1.0 - 2.0 * a);
            s.powf(tau) * (w - 1.0) + ((2.0 - s).powf(tau) - 2.0) * w
        },
        Interval::Finite(0.0, 0.5),
        SingularitySpec::left(1.0 + tau),
    )?;
    // [1, ∞): bracket → -2
    let tail = q.integrate(
        |t| ((1.0 + t).powf(tau) - 2.0) * t.powf(-1.0 - 2.0 * a),
        Interval::SemiInfinite(1.0),
        SingularitySpec::tail(0.0, 1.0 + 2.0 * a),
    )?;

    Ok(CTauValue {
        tau,
        value: near_zero.value + exact_part + near_one.value + tail.value,
        error_estimate: near_zero.error_estimate + near_one.error_estimate + tail.error_estimate,
    })
}

/// Evaluates `C` on `n` equispaced points of `[-0.99, -0.01]`.
pub fn scan(order: FracOrder, n: usize) -> Result<Vec<CTauValue>> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let tau = -0.99 + 0.98 * i as f64 / (n - 1) as f64;
            c_tau(order, tau)
        })
        .collect()
}

/// Number of sign changes of `C` along a scan.
pub fn sign_changes(values: &[CTauValue]) -> usize {
    values
        .windows(2)
        .filter(|w| (w[0].value > 0.0) != (w[1].value > 0.0))
        .count()
}

/// Root of `τ ↦ C(τ)` in `(-1, 0)` by bisection down to bracket width `tol`.
pub fn tau0(order: FracOrder, tol: f64) -> Result<f64> {
    tau0_with_quad_tol(order, tol, DEFAULT_TOL_1D)
}

pub fn tau0_with_quad_tol(order: FracOrder, tol: f64, quad_tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance {tol} must be positive")));
    }
    let eval = |tau: f64| c_tau_with_tol(order, tau, quad_tol).map(|v| v.value);
    const SCAN: usize = 50;
    let eps = 1e-3;
    let grid: Vec<f64> = (0..SCAN)
        .map(|i| -1.0 + eps + (1.0 - 2.0 * eps) * i as f64 / (SCAN - 1) as f64)
        .collect();
    let mut prev = (grid[0], eval(grid[0])?);
    let mut bracket = None;
    for &tau in &grid[1..] {
        let v = eval(tau)?;
        if v == 0.0 {
            return Ok(tau);
        }
        if (v > 0.0) != (prev.1 > 0.0) {
            bracket = Some((prev, (tau, v)));
            break;
        }
        prev = (tau, v);
    }
    let Some(((mut lo, mut flo), (mut hi, _))) = bracket else {
        return Err(Error::Bracket(format!(
            "C(tau) keeps one sign on [{}, {}] for alpha = {}",
            grid[0],
            grid[SCAN - 1],
            order.alpha()
        )));
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = eval(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_at_alpha_minus_one() {
        for &(a, t) in &[(0.5, -0.5), (0.25, -0.75)] {
            let v = c_tau(FracOrder::new(a).unwrap(), t).unwrap();
            assert!(v.value.abs() < 1e-6, "alpha {a}: {v:?}");
        }
    }

    #[test]
    fn rejects_tau_outside_interval() {
        let o = FracOrder::new(0.5).unwrap();
        assert!(matches!(c_tau(o, 0.0), Err(Error::Domain(_))));
        assert!(matches!(c_tau(o, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn root_for_reference_orders() {
        for &a in &[0.5, 0.9] {
            let r = tau0(FracOrder::new(a).unwrap(), 1e-8).unwrap();
            assert!((r - (a - 1.0)).abs() < 1e-7, "alpha {a}: {r}");
        }
    }

    #[test]
    fn single_sign_change_on_scan() {
        for &a in &[0.2, 0.5, 0.8] {
            let s = scan(FracOrder::new(a).unwrap(), 50).unwrap();
            assert_eq!(sign_changes(&s), 1, "alpha {a}");
        }
    }

    #[test]
    fn continuous_in_tau() {
        let o = FracOrder::new(0.4).unwrap();
        let base = c_tau(o, -0.3).unwrap().value;
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let h = 0.1 / f64::powi(2.0, k);
            let d = (c_tau(o, -0.3 + h).unwrap().value - base).abs();
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-2);
    }
}
