//! Green kernel of `(-Δ)^α` on the unit ball, its boundary (Martin) kernel
//! and the volume Green operator.
//!
//! The operator is taken without a normalizing constant,
//! `(-Δ)^α u(x) = PV ∫ (u(x) - u(z)) / |x - z|^{N+2α} dz`, so the kernel is
//! the classical ball formula scaled by the constant `c_{N,α}` that the
//! normalized operator carries:
//!
//! ```text
//! G(x, y) = c_{N,α} κ_{N,α} |x - y|^{2α-N} ∫_0^{r₀} s^{α-1} (1 + s)^{-N/2} ds,
//! r₀ = (1 - |x|²)(1 - |y|²) / |x - y|²,
//! κ_{N,α} = Γ(N/2) / (2^{2α} π^{N/2} Γ(α)²).
//! ```
//!
//! The inner integral is an incomplete beta function in `r₀ / (1 + r₀)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boundary_point, disk_integral_about, BallDomain, BallPoint};
use crate::grid::FieldOnGrid;
use crate::order::FracOrder;
use crate::special::{gamma, IncompleteBeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub error_estimate: f64,
}

/// `κ_{N,α}`, the constant of the ball kernel for the normalized operator.
pub fn ball_kernel_constant(dim: usize, order: FracOrder) -> f64 {
    let a = order.alpha();
    let h = dim as f64 / 2.0;
    gamma(h) / (4f64.powf(a) * PI.powf(h) * gamma(a).powi(2))
}

/// `c_{N,α}`: the normalized fractional Laplacian is `c_{N,α}` times ours.
pub fn normalization_constant(dim: usize, order: FracOrder) -> f64 {
    let a = order.alpha();
    let h = dim as f64 / 2.0;
    // |Γ(-α)| = Γ(1-α)/α
    4f64.powf(a) * gamma(h + a) * a / (PI.powf(h) * gamma(1.0 - a))
}

/// Precomputed Green kernel for one `(N, α)`.
#[derive(Debug, Clone, Copy)]
pub struct GreenKernel {
    alpha: f64,
    half_dim: f64,
    scale: f64,
    beta: IncompleteBeta,
}

impl GreenKernel {
    pub fn new(dim: usize, order: FracOrder) -> Self {
        let alpha = order.alpha();
        let half_dim = dim as f64 / 2.0;
        Self {
            alpha,
            half_dim,
            scale: normalization_constant(dim, order) * ball_kernel_constant(dim, order),
            beta: IncompleteBeta::new(alpha, half_dim - alpha),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Overall constant `c_{N,α} κ_{N,α}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Kernel from `1 - |x|²`, `1 - |y|²` and `|x - y|²`.
    #[inline]
    pub fn from_parts(&self, ax: f64, ay: f64, d2: f64) -> f64 {
        let num = ax * ay;
        let den = num + d2;
        self.scale * d2.powf(self.alpha - self.half_dim) * self.beta.eval(num / den, d2 / den)
    }

    pub fn eval(&self, x: &BallPoint, y: &BallPoint) -> f64 {
        self.from_parts(x.one_minus_r2(), y.one_minus_r2(), x.dist2(y))
    }

    /// Boundary kernel at `x` against a boundary point at squared direction
    /// distance `dir_d2 = |x/|x| - z|²`, by Richardson extrapolation of
    /// `t^{-α} G(x, (1 - t) z)` on `t = t₀ 2^{-j}`.
    pub(crate) fn martin_parts(&self, x: &BallPoint, dir_d2: f64, rel_tol: f64) -> Result<KernelValue> {
        const MAX_LEVELS: usize = 18;
        let rho = x.rho();
        let r = x.radius();
        let ax = x.one_minus_r2();
        let h = |t: f64| {
            let d2 = (rho - t) * (rho - t) + r * (1.0 - t) * dir_d2;
            self.from_parts(ax, t * (2.0 - t), d2) * t.powf(-self.alpha)
        };
        let t0 = 1e-2 * rho;
        let mut prev_row: Vec<f64> = vec![h(t0)];
        let mut prev_best = prev_row[0];
        for j in 1..MAX_LEVELS {
            let mut row = Vec::with_capacity(j + 1);
            row.push(h(t0 * 0.5f64.powi(j as i32)));
            let mut pow = 1.0;
            for m in 1..=j {
                pow *= 2.0;
                let v = row[m - 1] + (row[m - 1] - prev_row[m - 1]) / (pow - 1.0);
                row.push(v);
            }
            let best = row[j];
            let diff = (best - prev_best).abs();
            if j >= 2 && diff <= rel_tol * best.abs() {
                return Ok(KernelValue { value: best, error_estimate: diff });
            }
            prev_best = best;
            prev_row = row;
        }
        Err(Error::NonConvergence(format!(
            "boundary kernel extrapolation at rho = {rho} did not stabilize (last value {prev_best:e})"
        )))
    }
}

fn require_interior(x: &BallPoint, dom: &BallDomain) -> Result<()> {
    if x.dim() != dom.dim() {
        return Err(Error::Domain(format!("point of dimension {} in a ball of dimension {}", x.dim(), dom.dim())));
    }
    if !x.is_interior() || x.radius() < 0.0 {
        return Err(Error::Domain(format!("point with rho = {} is not inside the open ball", x.rho())));
    }
    Ok(())
}

/// `G_α(x, y)` on the unit ball.
pub fn green_kernel(dom: &BallDomain, order: FracOrder, x: &BallPoint, y: &BallPoint) -> Result<KernelValue> {
    require_interior(x, dom)?;
    require_interior(y, dom)?;
    let d2 = x.dist2(y);
    if d2 == 0.0 {
        return Err(Error::Domain("x = y".into()));
    }
    let value = GreenKernel::new(dom.dim(), order).from_parts(x.one_minus_r2(), y.one_minus_r2(), d2);
    Ok(KernelValue { value, error_estimate: 1e-14 * value })
}

/// Relative tolerance of the boundary-kernel extrapolation.
pub const MARTIN_TOL: f64 = 1e-10;

/// `M_α(x, z) = lim_{t→0⁺} t^{-α} G_α(x, z + t n_z)` with `n_z` the inward
/// normal at `z`.
pub fn martin_kernel(dom: &BallDomain, order: FracOrder, x: &BallPoint, z: &[f64]) -> Result<KernelValue> {
    martin_kernel_with_tol(dom, order, x, z, MARTIN_TOL)
}

pub fn martin_kernel_with_tol(
    dom: &BallDomain,
    order: FracOrder,
    x: &BallPoint,
    z: &[f64],
    rel_tol: f64,
) -> Result<KernelValue> {
    require_interior(x, dom)?;
    if z.len() != dom.dim() {
        return Err(Error::Domain(format!("boundary point of dimension {}", z.len())));
    }
    let z = boundary_point(z)?;
    let dir_d2: f64 = x.dir().iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
    GreenKernel::new(dom.dim(), order).martin_parts(x, dir_d2, rel_tol)
}

/// Volume potential `∫_B G_α(x, y) f(y) dy` of a field on the disk.
pub fn green_apply(dom: &BallDomain, order: FracOrder, f: &FieldOnGrid, x: &BallPoint) -> Result<f64> {
    let scale = f.normalized().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        require_interior(x, dom)?;
        return Ok(0.0);
    }
    let growth = f.boundary_growth();
    green_apply_with(dom, order, |y| f.interpolate(y), growth, x, 1e-9 * scale)
}

/// Volume potential of a closed-form density `f ~ ρ^{-growth}` near the
/// circle, to absolute tolerance `tol`.
pub fn green_apply_with<F>(
    dom: &BallDomain,
    order: FracOrder,
    f: F,
    growth: f64,
    x: &BallPoint,
    tol: f64,
) -> Result<f64>
where
    F: Fn(&BallPoint) -> f64,
{
    dom.require_disk("the volume Green operator")?;
    require_interior(x, dom)?;
    let a = order.alpha();
    if growth >= 1.0 + a {
        return Err(Error::DivergentIntegrand(format!(
            "density grows like rho^-{growth:.4}, at least rho^-(1+alpha) = rho^-{:.4}",
            1.0 + a
        )));
    }
    let kernel = GreenKernel::new(2, order);
    let ax = x.one_minus_r2();
    let q = disk_integral_about(
        *x,
        0.0,
        |y, s| kernel.from_parts(ax, y.one_minus_r2(), s * s) * f(y),
        2.0 * a - 2.0,
        (a - growth).min(0.0),
        tol,
    )?;
    Ok(q.value)
}
