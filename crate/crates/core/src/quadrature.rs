//! Adaptive Gauss–Kronrod quadrature for integrands with algebraic endpoint
//! singularities and algebraic tails.
//!
//! A declared endpoint exponent `e` (integrand `~ t^e`) is flattened by the
//! substitution `t = u^m` with `m = 2 / (1 + e)`, after which the transformed
//! integrand vanishes linearly at the endpoint and ordinary adaptive
//! bisection converges quickly. Tails `[a, ∞)` are folded onto a finite
//! interval by `t = a + L / w`, which turns a decay `t^{-b}` into an endpoint
//! exponent `w^{b-2}` at `w = 0`.
//!
//! Singular points away from zero lose relative precision in `t` itself, so
//! callers that need the last digits near an interior singularity should
//! shift it to the origin before integrating.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance for one-dimensional integrals.
pub const DEFAULT_TOL_1D: f64 = 1e-10;
/// Default absolute tolerance for two-dimensional integrals.
pub const DEFAULT_TOL_2D: f64 = 1e-7;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integration domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Interval {
    Finite(f64, f64),
    /// `[a, ∞)`
    SemiInfinite(f64),
}

/// Behavior of the integrand at the right end of the interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RightBehavior {
    /// Finite endpoint with `f ~ (b - t)^exponent`.
    Endpoint { exponent: f64 },
    /// Unbounded interval with `f ~ t^{-decay}`.
    Tail { decay: f64 },
}

/// Declared algebraic behavior of an integrand at the ends of its interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularitySpec {
    pub left_exponent: f64,
    pub right: RightBehavior,
}

impl SingularitySpec {
    pub fn regular() -> Self {
        Self { left_exponent: 0.0, right: RightBehavior::Endpoint { exponent: 0.0 } }
    }

    pub fn left(exponent: f64) -> Self {
        Self { left_exponent: exponent, right: RightBehavior::Endpoint { exponent: 0.0 } }
    }

    pub fn right(exponent: f64) -> Self {
        Self { left_exponent: 0.0, right: RightBehavior::Endpoint { exponent } }
    }

    pub fn both(left: f64, right: f64) -> Self {
        Self { left_exponent: left, right: RightBehavior::Endpoint { exponent: right } }
    }

    pub fn tail(left: f64, decay: f64) -> Self {
        Self { left_exponent: left, right: RightBehavior::Tail { decay } }
    }

    pub fn validate(&self, interval: &Interval) -> Result<()> {
        if !(self.left_exponent > -1.0) {
            return Err(Error::InvalidSpec(format!(
                "left exponent {} must exceed -1",
                self.left_exponent
            )));
        }
        match (interval, self.right) {
            (Interval::Finite(a, b), RightBehavior::Endpoint { exponent }) => {
                if !(exponent > -1.0) {
                    return Err(Error::InvalidSpec(format!("right exponent {exponent} must exceed -1")));
                }
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    return Err(Error::InvalidSpec(format!("bad interval [{a}, {b}]")));
                }
            }
            (Interval::SemiInfinite(a), RightBehavior::Tail { decay }) => {
                if !(decay > 1.0) {
                    return Err(Error::InvalidSpec(format!("tail decay {decay} must exceed 1")));
                }
                if !a.is_finite() {
                    return Err(Error::InvalidSpec("left end must be finite".into()));
                }
            }
            (Interval::Finite(..), RightBehavior::Tail { .. }) => {
                return Err(Error::InvalidSpec("tail behavior declared on a finite interval".into()))
            }
            (Interval::SemiInfinite(_), RightBehavior::Endpoint { .. }) => {
                return Err(Error::InvalidSpec("unbounded interval needs a tail decay".into()))
            }
        }
        Ok(())
    }
}

/// Value of an integral together with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

impl QuadResult {
    fn zero() -> Self {
        Self { value: 0.0, error_estimate: 0.0, evaluations: 0 }
    }

    fn add(&mut self, other: QuadResult) {
        self.value += other.value;
        self.error_estimate += other.error_estimate;
        self.evaluations += other.evaluations;
    }
}

/// Adaptive integrator configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { abs_tol: DEFAULT_TOL_1D, rel_tol: 0.0, max_subdivisions: 4000 }
    }
}

impl Integrator {
    pub fn absolute(tol: f64) -> Self {
        Self { abs_tol: tol, ..Self::default() }
    }

    pub fn relative(rel_tol: f64) -> Self {
        Self { abs_tol: 0.0, rel_tol, ..Self::default() }
    }

    pub fn with_abs_floor(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_subdivisions(mut self, n: usize) -> Self {
        self.max_subdivisions = n;
        self
    }

    /// Integrates `f` over `interval` honoring the declared endpoint behavior.
    pub fn integrate<F>(&self, f: F, interval: Interval, spec: SingularitySpec) -> Result<QuadResult>
    where
        F: Fn(f64) -> f64,
    {
        if !(self.abs_tol > 0.0 || self.rel_tol > 0.0) {
            return Err(Error::Precondition("tolerance must be positive".into()));
        }
        spec.validate(&interval)?;
        match (interval, spec.right) {
            (Interval::Finite(a, b), RightBehavior::Endpoint { exponent }) => {
                self.finite(&f, a, b, spec.left_exponent, exponent)
            }
            (Interval::SemiInfinite(a), RightBehavior::Tail { decay }) => {
                self.semi_infinite(&f, a, spec.left_exponent, decay)
            }
            _ => unreachable!("validated above"),
        }
    }

    fn finite(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64, left: f64, right: f64) -> Result<QuadResult> {
        if a == b {
            return Ok(QuadResult::zero());
        }
        let ml = flattening_power(left);
        let mr = flattening_power(right);
        if ml == 1.0 && mr == 1.0 {
            return self.adaptive(f, a, b);
        }
        let c = 0.5 * (a + b);
        let half = Integrator { abs_tol: 0.5 * self.abs_tol, ..*self };
        let mut out = QuadResult::zero();
        out.add(half.from_endpoint(f, a, c - a, ml)?);
        out.add(half.from_endpoint(f, b, c - b, mr)?);
        Ok(out)
    }

    /// `∫` between `origin` and `origin + span` with `t = origin + span·u^m`.
    fn from_endpoint(&self, f: &dyn Fn(f64) -> f64, origin: f64, span: f64, m: f64) -> Result<QuadResult> {
        let sign = span.signum();
        let len = span.abs();
        let g = move |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let um1 = if m == 1.0 { 1.0 } else { u.powf(m - 1.0) };
            let offset = len * u * um1;
            let t = origin + sign * offset;
            if t == origin {
                // closer to the endpoint than the floating-point grid resolves
                return 0.0;
            }
            let v = f(t) * len * m * um1;
            if !v.is_finite() && offset < 1e-250 * len.max(1.0) {
                return 0.0;
            }
            v
        };
        self.adaptive(&g, 0.0, 1.0)
    }

    fn semi_infinite(&self, f: &dyn Fn(f64) -> f64, a: f64, left: f64, decay: f64) -> Result<QuadResult> {
        let scale = a.abs() + 1.0;
        check_tail(f, a, scale, decay)?;
        let half = Integrator { abs_tol: 0.5 * self.abs_tol, ..*self };
        let mut out = half.finite(f, a, a + scale, left, 0.0)?;
        // t = a + L/w maps [a + L, ∞) onto (0, 1]; integrand ~ w^{decay-2}
        let folded = move |w: f64| {
            if w <= 0.0 {
                return 0.0;
            }
            let t = a + scale / w;
            if !t.is_finite() {
                return 0.0;
            }
            f(t) * scale / (w * w)
        };
        out.add(half.finite(&folded, 0.0, 1.0, decay - 2.0, 0.0)?);
        Ok(out)
    }

    /// Global adaptive G7/K15 bisection on a regular (or mildly singular) integrand.
    pub fn adaptive(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<QuadResult> {
        let first = Segment::new(f, a, b);
        let mut evaluations = 15;
        let mut value = first.value;
        let mut error = first.error;
        let mut heap = BinaryHeap::new();
        heap.push(first);
        let mut splits = 0;
        while error > self.abs_tol.max(self.rel_tol * value.abs()) {
            if !value.is_finite() {
                return Err(Error::NonConvergence(format!("non-finite integrand on [{a}, {b}]")));
            }
            let Some(worst) = heap.pop() else { break };
            let mid = 0.5 * (worst.a + worst.b);
            if splits >= self.max_subdivisions || mid <= worst.a || mid >= worst.b {
                return Err(Error::NonConvergence(format!(
                    "{splits} subdivisions on [{a}, {b}]: value {value:e}, error {error:e}"
                )));
            }
            let left = Segment::new(f, worst.a, mid);
            let right = Segment::new(f, mid, worst.b);
            evaluations += 30;
            splits += 1;
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
            // resum occasionally so round-off in the running totals stays bounded
            if splits % 64 == 0 {
                value = heap.iter().map(|s| s.value).sum();
                error = heap.iter().map(|s| s.error).sum();
            }
        }
        if !value.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite integrand on [{a}, {b}]")));
        }
        Ok(QuadResult { value, error_estimate: error.max(0.0), evaluations })
    }
}

/// Power `m` in `t = u^m` that turns `t^e` into `u^1`. Smooth endpoints
/// (`e` a nonnegative integer or `e ≥ 1`) are left alone.
fn flattening_power(exponent: f64) -> f64 {
    if exponent >= 1.0 || exponent == exponent.round() && exponent >= 0.0 {
        1.0
    } else {
        2.0 / (1.0 + exponent)
    }
}

/// Rejects tails that decay visibly slower than `t^{-1}`.
fn check_tail(f: &dyn Fn(f64) -> f64, a: f64, scale: f64, decay: f64) -> Result<()> {
    let r1 = a + 1e6 * scale;
    let r2 = a + 2e6 * scale;
    let (f1, f2) = (f(r1).abs(), f(r2).abs());
    if f1 == 0.0 || f2 == 0.0 || !f1.is_finite() || !f2.is_finite() {
        return Ok(());
    }
    let observed = (f1 / f2).log2();
    if observed < 0.5 * (1.0 + decay.min(3.0)) - 0.5 {
        return Err(Error::InvalidSpec(format!(
            "declared tail decay {decay} but integrand decays like t^-{observed:.3}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl Segment {
    fn new(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Self {
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let fc = f(center);
        let mut kronrod = fc * WGK[7];
        let mut gauss = fc * WG[3];
        let mut abs_sum = fc.abs() * WGK[7];
        let mut fv = [0.0; 14];
        for j in 0..7 {
            let dx = half * XGK[j];
            let f1 = f(center - dx);
            let f2 = f(center + dx);
            fv[2 * j] = f1;
            fv[2 * j + 1] = f2;
            kronrod += WGK[j] * (f1 + f2);
            abs_sum += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                gauss += WG[j / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * kronrod;
        let mut asc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
        }
        let hl = half.abs();
        let resasc = asc * hl;
        let resabs = abs_sum * hl;
        let mut error = ((kronrod - gauss) * half).abs();
        if resasc != 0.0 && error != 0.0 {
            error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            error = error.max(50.0 * f64::EPSILON * resabs);
        }
        Self { a, b, value: kronrod * half, error }
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `interval` to absolute tolerance `tol`.
pub fn integrate<F>(f: F, interval: Interval, spec: SingularitySpec, tol: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance {tol} must be positive")));
    }
    Integrator::absolute(tol).integrate(f, interval, spec)
}

/// Integrates `f(r, θ)` over the unit disk, `∫_0^{2π} ∫_0^1 f(r, θ) r dr dθ`.
///
/// `radial_spec` describes `f` itself near `r = 0` and `r = 1`; the Jacobian
/// `r` is accounted for here.
pub fn integrate_2d_polar<F>(f: F, radial_spec: SingularitySpec, tol: f64) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> f64,
{
    integrate_polar_region(f, (0.0, 1.0), (0.0, 2.0 * PI), radial_spec, tol)
}

/// Tensorized polar quadrature over an annular sector.
pub fn integrate_polar_region<F>(
    f: F,
    radii: (f64, f64),
    angles: (f64, f64),
    radial_spec: SingularitySpec,
    tol: f64,
) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance {tol} must be positive")));
    }
    let (r0, r1) = radii;
    let (t0, t1) = angles;
    let inner_spec = if r0 == 0.0 {
        SingularitySpec { left_exponent: radial_spec.left_exponent + 1.0, ..radial_spec }
    } else {
        radial_spec
    };
    inner_spec.validate(&Interval::Finite(r0, r1))?;
    let inner_tol = 0.25 * tol / (t1 - t0).abs().max(1e-300);
    let inner = Integrator::absolute(inner_tol);
    let evaluations = std::cell::Cell::new(0usize);
    let failure = std::cell::RefCell::new(None);
    let outer = |theta: f64| match inner.integrate(|r| f(r, theta) * r, Interval::Finite(r0, r1), inner_spec) {
        Ok(q) => {
            evaluations.set(evaluations.get() + q.evaluations);
            q.value
        }
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let res = Integrator::absolute(0.5 * tol).adaptive(&outer, t0, t1);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut res = res?;
    res.error_estimate += 0.25 * tol;
    res.evaluations = evaluations.get();
    Ok(res)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Newton on P_n from the Chebyshev-like initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
