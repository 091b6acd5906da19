//! Pointwise evaluation of `(-Δ)^α u(x)` for closed-form `u` supported in the
//! closed disk.
//!
//! With `δ = ρ(x)/2` the principal value splits as
//!
//! ```text
//! (-Δ)^α u(x) = -½ ∫_{|h|<δ} (u(x+h) + u(x-h) - 2u(x)) |h|^{-2-2α} dh
//!             + u(x) π δ^{-2α} / α
//!             - ∫_{B ∖ B_δ(x)} u(z) |z-x|^{-2-2α} dz.
//! ```
//!
//! The first term is summed over dyadic shells `δ 2^{-j-1} < |h| < δ 2^{-j}`
//! and the partial sums are extrapolated in the shell radius.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SupersolutionFailure};
use crate::geometry::{disk_integral_about, BallDomain, BallPoint, Ray};
use crate::order::FracOrder;
use crate::quadrature::Integrator;

/// A function on the disk, extended by zero outside, with `u ~ ρ^β` at the
/// circle.
pub trait ExplicitField: Send + Sync {
    fn value(&self, x: &BallPoint) -> f64;
    fn boundary_exponent(&self) -> f64;
}

impl<F: ExplicitField + ?Sized> ExplicitField for &F {
    fn value(&self, x: &BallPoint) -> f64 {
        (**self).value(x)
    }
    fn boundary_exponent(&self) -> f64 {
        (**self).boundary_exponent()
    }
}

/// `u = ρ^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistancePower {
    pub exponent: f64,
}

impl ExplicitField for DistancePower {
    fn value(&self, x: &BallPoint) -> f64 {
        x.rho().powf(self.exponent)
    }
    fn boundary_exponent(&self) -> f64 {
        self.exponent
    }
}

/// `u = (1 - |x|²)^s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallPower {
    pub exponent: f64,
}

impl ExplicitField for BallPower {
    fn value(&self, x: &BallPoint) -> f64 {
        x.one_minus_r2().powf(self.exponent)
    }
    fn boundary_exponent(&self) -> f64 {
        self.exponent
    }
}

/// `c·u`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<F> {
    pub factor: f64,
    pub inner: F,
}

impl<F: ExplicitField> ExplicitField for Scaled<F> {
    fn value(&self, x: &BallPoint) -> f64 {
        self.factor * self.inner.value(x)
    }
    fn boundary_exponent(&self) -> f64 {
        self.inner.boundary_exponent()
    }
}

/// `u ∘ R` for the planar rotation `R` by `angle`.
#[derive(Debug, Clone, Copy)]
pub struct Rotated<F> {
    pub angle: f64,
    pub inner: F,
}

impl<F: ExplicitField> ExplicitField for Rotated<F> {
    fn value(&self, x: &BallPoint) -> f64 {
        self.inner.value(&x.rotated(self.angle))
    }
    fn boundary_exponent(&self) -> f64 {
        self.inner.boundary_exponent()
    }
}

/// A closure with a declared boundary exponent.
pub struct FnField<F> {
    pub f: F,
    pub exponent: f64,
}

impl<F: Fn(&BallPoint) -> f64 + Send + Sync> ExplicitField for FnField<F> {
    fn value(&self, x: &BallPoint) -> f64 {
        (self.f)(x)
    }
    fn boundary_exponent(&self) -> f64 {
        self.exponent
    }
}

/// Radial field `u = v(|x|²)·(1 - |x|²)^β` with `v` a Chebyshev interpolant
/// in `s = |x|²`. Smooth radial data such as the Hausdorff potential are
/// represented to near machine precision with modest degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    exponent: f64,
    coeffs: Vec<f64>,
}

impl RadialProfile {
    /// Interpolates `u(ρ)` at `degree + 1` Chebyshev nodes.
    pub fn fit<F>(exponent: f64, degree: usize, u: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let n = degree + 1;
        let mut vals = Vec::with_capacity(n);
        for k in 0..n {
            let half_angle = PI * (k as f64 + 0.5) / (2.0 * n as f64);
            // 1 - s = sin², ρ = (1 - s)/(1 + √s)
            let w = half_angle.sin().powi(2);
            let s = 1.0 - w;
            let rho = w / (1.0 + s.sqrt());
            vals.push(u(rho)? * w.powf(-exponent));
        }
        let coeffs = (0..n)
            .map(|j| {
                let c: f64 = (0..n)
                    .map(|k| vals[k] * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                    .sum();
                if j == 0 {
                    c / n as f64
                } else {
                    2.0 * c / n as f64
                }
            })
            .collect();
        Ok(Self { exponent, coeffs })
    }

    /// Largest absolute coefficient among the last three, relative to the first.
    pub fn tail_size(&self) -> f64 {
        let n = self.coeffs.len();
        let tail = self.coeffs[n.saturating_sub(3)..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        tail / self.coeffs[0].abs().max(f64::MIN_POSITIVE)
    }

    fn smooth_part(&self, w: f64) -> f64 {
        // t = 2s - 1 = 1 - 2w
        let t = 1.0 - 2.0 * w;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coeffs[0]
    }

    pub fn at_rho(&self, rho: f64) -> f64 {
        let w = rho * (2.0 - rho);
        self.smooth_part(w) * w.powf(self.exponent)
    }
}

impl ExplicitField for RadialProfile {
    fn value(&self, x: &BallPoint) -> f64 {
        let w = x.one_minus_r2();
        self.smooth_part(w) * w.powf(self.exponent)
    }
    fn boundary_exponent(&self) -> f64 {
        self.exponent
    }
}

/// Radial field `u = v(ρ)·ρ^{-β}` with `v` the clamped cubic spline in
/// `ln ρ` through given knots, flat at both ends. It continues as the first
/// knot value towards the circle, like the grid interpolant, and is C¹ at the
/// center, so its fractional Laplacian is finite everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineProfile {
    exponent: f64,
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl SplineProfile {
    /// Knots `(ρ_j, v_j)` with `ρ` increasing, the last one at most 1.
    pub fn new(exponent: f64, rho: &[f64], values: &[f64]) -> Result<Self> {
        if rho.len() != values.len() || rho.len() < 2 {
            return Err(Error::Precondition("spline needs at least two matching knots".into()));
        }
        if rho.windows(2).any(|w| !(w[1] > w[0])) || !(rho[0] > 0.0) || rho[rho.len() - 1] > 1.0 {
            return Err(Error::Precondition("spline knots must increase inside (0, 1]".into()));
        }
        let knots: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
        let second = clamped_second_derivatives(&knots, values);
        Ok(Self { exponent, knots, values: values.to_vec(), second })
    }

    /// Spline through the angular means of a grid field, center included.
    pub fn from_field(field: &crate::grid::FieldOnGrid) -> Result<Self> {
        let grid = field.grid();
        let n = grid.n_theta();
        let mut rho = grid.levels().to_vec();
        let mut v: Vec<f64> = (0..grid.n_levels())
            .map(|j| field.normalized()[j * n..(j + 1) * n].iter().sum::<f64>() / n as f64)
            .collect();
        rho.push(1.0);
        v.push(field.center_value());
        Self::new(field.exponent(), &rho, &v)
    }

    /// Normalized value `v(ρ)`.
    pub fn normalized_at(&self, rho: f64) -> f64 {
        let t = rho.ln();
        let last = self.knots.len() - 1;
        if t <= self.knots[0] {
            return self.values[0];
        }
        if t >= self.knots[last] {
            return self.values[last];
        }
        let i = self.knots.partition_point(|&k| k <= t).min(last) - 1;
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = 1.0 - a;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }

    pub fn at_rho(&self, rho: f64) -> f64 {
        self.normalized_at(rho) * rho.powf(-self.exponent)
    }
}

impl ExplicitField for SplineProfile {
    fn value(&self, x: &BallPoint) -> f64 {
        self.at_rho(x.rho())
    }
    fn boundary_exponent(&self) -> f64 {
        -self.exponent
    }
}

/// Second derivatives of the cubic spline with zero end slopes.
fn clamped_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    diag[0] = h[0] / 3.0;
    upper[0] = h[0] / 6.0;
    rhs[0] = (y[1] - y[0]) / h[0];
    for i in 1..n - 1 {
        diag[i] = (h[i - 1] + h[i]) / 3.0;
        upper[i] = h[i] / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1];
    }
    diag[n - 1] = h[n - 2] / 3.0;
    rhs[n - 1] = -(y[n - 1] - y[n - 2]) / h[n - 2];
    // symmetric tridiagonal system, lower band equal to the upper one
    for i in 1..n {
        let w = upper[i - 1] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut m = vec![0.0; n];
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
    }
    m
}

/// Points closer than this to the circle are rejected.
pub const MIN_RHO: f64 = 1e-6;

const MAX_SHELLS: usize = 16;

/// `(-Δ)^α u(x)` to absolute accuracy `tol·|u(x)|·ρ(x)^{-2α}` (planar only).
pub fn frac_lap_eval<F: ExplicitField + ?Sized>(
    dom: &BallDomain,
    order: FracOrder,
    u: &F,
    x: &BallPoint,
    tol: f64,
) -> Result<f64> {
    dom.require_disk("frac_lap_eval")?;
    if x.dim() != 2 || !(x.rho() >= MIN_RHO && x.rho() <= 1.0) {
        return Err(Error::Domain(format!("rho = {} is not at least {MIN_RHO} inside the disk", x.rho())));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance {tol} must be positive")));
    }
    let a = order.alpha();
    let rho = x.rho();
    let ux = u.value(x);
    let delta = 0.5 * rho;
    let scale = ux.abs().max(f64::MIN_POSITIVE) * rho.powf(-2.0 * a);
    let abs_tol = tol * scale;

    let exterior = ux * PI * delta.powf(-2.0 * a) / a;
    let far = disk_integral_about(
        *x,
        delta,
        |z, s| u.value(z) * s.powf(-2.0 - 2.0 * a),
        0.0,
        u.boundary_exponent(),
        0.25 * abs_tol,
    )?
    .value;
    let near = near_field(order, u, x, ux, delta, 0.25 * abs_tol)?;
    Ok(near + exterior - far)
}

/// `-∫_0^δ s^{-1-2α} A(s) ds`, `A(s) = ∫_0^π (u(x+se) + u(x-se) - 2u(x)) dφ`.
fn near_field<F: ExplicitField + ?Sized>(
    order: FracOrder,
    u: &F,
    x: &BallPoint,
    ux: f64,
    delta: f64,
    abs_tol: f64,
) -> Result<f64> {
    let a = order.alpha();
    let radial = Integrator::absolute(0.1 * abs_tol).with_max_subdivisions(500);
    let failure = std::cell::RefCell::new(None);
    let second_difference = |s: f64| -> f64 {
        let inner = |phi: f64| {
            let fwd = Ray::new(*x, phi);
            let bwd = Ray::new(*x, phi + PI);
            u.value(&fwd.point(s, fwd.reach - s)) + u.value(&bwd.point(s, bwd.reach - s)) - 2.0 * ux
        };
        // an error η in A(s) costs about η s^{-2α} in the shell integral
        let local = Integrator::absolute(0.05 * abs_tol * s.powf(2.0 * a)).with_max_subdivisions(500);
        match local.adaptive(&inner, 0.0, PI) {
            Ok(q) => q.value * s.powf(-1.0 - 2.0 * a),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };

    let mut partial = 0.0;
    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut outer = delta;
    for j in 0..MAX_SHELLS {
        let inner = 0.5 * outer;
        let shell = radial.adaptive(&second_difference, inner, outer);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        partial -= shell?.value;
        outer = inner;

        // extrapolate the truncation error c₁ε^{2-2α} + c₂ε^{4-2α} + …
        let mut row = vec![partial];
        if let Some(prev) = table.last() {
            for m in 1..=j.min(3) {
                let factor = 2f64.powf(2.0 * m as f64 - 2.0 * a) - 1.0;
                let v = row[m - 1] + (row[m - 1] - prev[m - 1]) / factor;
                row.push(v);
            }
        }
        history.push(*row.last().unwrap());
        table.push(row);
        let n = history.len();
        if n >= 3 && j >= 3 {
            let d1 = (history[n - 1] - history[n - 2]).abs();
            let d2 = (history[n - 2] - history[n - 3]).abs();
            if d1 <= abs_tol && d2 <= abs_tol {
                return Ok(history[n - 1]);
            }
        }
    }
    Err(Error::NonConvergence(format!(
        "principal value at rho = {} did not stabilize over {MAX_SHELLS} shells",
        x.rho()
    )))
}

/// Outcome of a super-solution check for `λ₀ ρ^{-2α/(p-1)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionReport {
    pub alpha: f64,
    pub p: f64,
    /// `inf_x (-Δ)^α w_p(x) ρ(x)^{2α/(p-1)+2α}` over the probed points
    pub c_p: f64,
    /// same quantity, supremum
    pub c_sup: f64,
    pub lambda0: f64,
    /// whether `p < (1+α)/(1-α)`, the range of the existence theory
    pub subcritical: bool,
    pub points: Vec<SupersolutionPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionPoint {
    pub rho: f64,
    /// `(-Δ)^α w_p · ρ^{2α/(p-1)+2α}`
    pub scaled_laplacian: f64,
    /// `((-Δ)^α(λw) + (λw)^p) / (λ ρ^{-2α/(p-1)-2α})` at `λ = λ₀`
    pub relative_residual: f64,
}

impl SupersolutionReport {
    /// Relative residuals of `λ w_p` at the probed points.
    pub fn residuals_at(&self, lambda: f64) -> Vec<f64> {
        self.points
            .iter()
            .map(|pt| pt.scaled_laplacian + lambda.powf(self.p - 1.0))
            .collect()
    }
}

/// Estimates `c(p)` from the points, sets `λ₀ = |c(p)|^{1/(p-1)}` and checks
/// `(-Δ)^α(λ₀w_p) + (λ₀w_p)^p ≥ -tol·(local scale)` at each point.
pub fn check_supersolution(
    dom: &BallDomain,
    order: FracOrder,
    p: f64,
    points: &[BallPoint],
    tol: f64,
) -> Result<SupersolutionReport> {
    use rayon::prelude::*;
    let a = order.alpha();
    if !(p > order.family_threshold()) {
        return Err(Error::Precondition(format!(
            "p = {p} must exceed 1 + 2α = {} for w_p to be integrable",
            order.family_threshold()
        )));
    }
    if points.is_empty() {
        return Err(Error::Precondition("no points to check".into()));
    }
    let beta = -2.0 * a / (p - 1.0);
    let w = DistancePower { exponent: beta };
    let scaled: Vec<f64> = points
        .par_iter()
        .map(|x| frac_lap_eval(dom, order, &w, x, 1e-6).map(|l| l * x.rho().powf(2.0 * a - beta)))
        .collect::<Result<_>>()?;
    let c_p = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_sup = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(c_p < 0.0) {
        return Err(Error::Precondition(format!(
            "(-Δ)^α w_p is nonnegative at every probed point (min scaled value {c_p:e})"
        )));
    }
    let lambda0 = c_p.abs().powf(1.0 / (p - 1.0));
    let mut report = SupersolutionReport {
        alpha: a,
        p,
        c_p,
        c_sup,
        lambda0,
        subcritical: p < order.p_star(),
        points: Vec::with_capacity(points.len()),
    };
    let mut failures = Vec::new();
    for (x, &m) in points.iter().zip(&scaled) {
        let residual = m + lambda0.powf(p - 1.0);
        if residual < -tol {
            failures.push(SupersolutionFailure { rho: x.rho(), relative_residual: residual });
        }
        report.points.push(SupersolutionPoint { rho: x.rho(), scaled_laplacian: m, relative_residual: residual });
    }
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(Error::SupersolutionViolated(failures))
    }
}

/// `(-Δ)^α` of `(1 - |x|²)_+^α` in the disk, a constant.
pub fn torsion_laplacian(order: FracOrder) -> f64 {
    use crate::green::normalization_constant;
    use crate::special::gamma;
    let a = order.alpha();
    4f64.powf(a) * gamma(1.0 + a) * gamma(1.0 + a) / normalization_constant(2, order)
}

/// Constant `c'` with `(-Δ)^α_{R^N} v(x_N) = c' (-Δ)^α_{R} v` for functions of
/// one coordinate.
pub fn flat_reduction_constant(dim: usize, order: FracOrder) -> f64 {
    use crate::special::gamma;
    let a = order.alpha();
    let n = dim as f64;
    PI.powf(0.5 * (n - 1.0)) * gamma(0.5 + a) / gamma(0.5 * n + a)
}
