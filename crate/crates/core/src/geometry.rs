//! The unit ball and points inside it.
//!
//! Points are stored as `(ρ, direction)` with `ρ = 1 - |x|` the distance to
//! the boundary, so that quantities such as `1 - |x|²` and `|x - y|` keep full
//! relative precision arbitrarily close to the sphere.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{Integrator, QuadResult};
use crate::special::sphere_area;

/// Unit ball in `R^N`. Dimensions 2 and 3 are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallDomain {
    dim: usize,
}

impl BallDomain {
    pub fn new(dim: usize) -> Result<Self> {
        match dim {
            2 | 3 => Ok(Self { dim }),
            _ => Err(Error::Domain(format!("dimension {dim} unsupported (expected 2 or 3)"))),
        }
    }

    pub fn disk() -> Self {
        Self { dim: 2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `|∂B|`, the Hausdorff measure of the unit sphere.
    pub fn boundary_area(&self) -> f64 {
        sphere_area(self.dim)
    }

    pub(crate) fn require_disk(&self, what: &str) -> Result<()> {
        if self.dim == 2 {
            Ok(())
        } else {
            Err(Error::Domain(format!("{what} is implemented for N = 2 only")))
        }
    }
}

/// A point of the closed unit ball, `x = (1 - ρ)·dir`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallPoint {
    rho: f64,
    dir: [f64; 3],
    dim: u8,
}

impl BallPoint {
    /// Point at boundary distance `rho` along `dir` (normalized here).
    pub fn new(rho: f64, dir: &[f64]) -> Result<Self> {
        let dim = dir.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension {dim} unsupported")));
        }
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Domain("direction must be nonzero".into()));
        }
        let mut d = [0.0; 3];
        for (o, v) in d.iter_mut().zip(dir) {
            *o = v / norm;
        }
        Ok(Self { rho, dir: d, dim: dim as u8 })
    }

    /// Planar point in polar form.
    pub fn polar(rho: f64, theta: f64) -> Self {
        Self { rho, dir: [theta.cos(), theta.sin(), 0.0], dim: 2 }
    }

    pub fn from_cartesian(x: &[f64]) -> Result<Self> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            let mut dir = vec![0.0; x.len()];
            if let Some(first) = dir.first_mut() {
                *first = 1.0;
            }
            return Self::new(1.0, &dir);
        }
        Self::new(1.0 - r, x)
    }

    pub fn center(dim: usize) -> Self {
        Self { rho: 1.0, dir: [1.0, 0.0, 0.0], dim: dim as u8 }
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.rho
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        1.0 - self.rho
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn dir(&self) -> &[f64] {
        &self.dir[..self.dim as usize]
    }

    /// Polar angle of the direction (planar points).
    pub fn theta(&self) -> f64 {
        self.dir[1].atan2(self.dir[0])
    }

    pub fn cartesian(&self) -> Vec<f64> {
        self.dir().iter().map(|d| d * self.radius()).collect()
    }

    /// `1 - |x|²` without cancellation.
    #[inline]
    pub fn one_minus_r2(&self) -> f64 {
        self.rho * (2.0 - self.rho)
    }

    pub fn is_interior(&self) -> bool {
        self.rho > 0.0 && self.rho <= 1.0
    }

    /// `|x - y|²`.
    pub fn dist2(&self, other: &BallPoint) -> f64 {
        let dr = self.rho - other.rho;
        dr * dr + self.radius() * other.radius() * dir_dist2(self.dir(), other.dir())
    }

    /// `|x - z|²` for `z` on the unit sphere.
    pub fn dist2_to_boundary(&self, z: &[f64]) -> f64 {
        self.rho * self.rho + self.radius() * dir_dist2(self.dir(), z)
    }

    /// Image under a planar rotation by `angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let mut out = *self;
        out.dir[0] = c * self.dir[0] - s * self.dir[1];
        out.dir[1] = s * self.dir[0] + c * self.dir[1];
        out
    }
}

#[inline]
fn dir_dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Validates and normalizes a boundary point.
pub fn boundary_point(z: &[f64]) -> Result<Vec<f64>> {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("|z| = {norm} is not on the unit sphere")));
    }
    Ok(z.iter().map(|v| v / norm).collect())
}

/// Geometry of the ray `x + s·e(φ)` leaving the disk, where `φ` is measured
/// from the outward direction at `x`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ray {
    x: BallPoint,
    cos: f64,
    sin: f64,
    /// exit distance
    pub reach: f64,
    /// `(1 - |x|²) / reach`, the magnitude of the second root
    back: f64,
}

impl Ray {
    pub(crate) fn new(x: BallPoint, phi: f64) -> Self {
        let (sin, cos) = phi.sin_cos();
        let r = x.radius();
        let a = x.one_minus_r2();
        let b = r * cos;
        let disc = (b * b + a).sqrt();
        let reach = if b >= 0.0 { a / (b + disc) } else { disc - b };
        Self { x, cos, sin, reach, back: a / reach }
    }

    /// Point at distance `s` from `x`, with `gap = reach - s` supplied exactly.
    pub(crate) fn point(&self, s: f64, gap: f64) -> BallPoint {
        let w = (gap * (s + self.back)).max(0.0); // 1 - |z|²
        let rz2 = (1.0 - w).max(0.0);
        let rz = rz2.sqrt();
        let rho = w / (1.0 + rz);
        let d = self.x.dir;
        let r = self.x.radius();
        // in-plane basis: d and its perpendicular
        let px = r * d[0] + s * (self.cos * d[0] - self.sin * d[1]);
        let py = r * d[1] + s * (self.cos * d[1] + self.sin * d[0]);
        let dir = if rz > 0.0 { [px / rz, py / rz, 0.0] } else { [1.0, 0.0, 0.0] };
        BallPoint { rho, dir, dim: 2 }
    }
}

/// `∫_{B ∖ B_inner(x)} f(z, |z - x|) dz` over the unit disk in polar
/// coordinates centered at `x`.
///
/// `center_exponent` is the behavior of `f` as `s → 0` (used only when
/// `inner == 0`), `exit_exponent` the behavior as the boundary is approached.
pub(crate) fn disk_integral_about<F>(
    x: BallPoint,
    inner: f64,
    f: F,
    center_exponent: f64,
    exit_exponent: f64,
    tol: f64,
) -> Result<QuadResult>
where
    F: Fn(&BallPoint, f64) -> f64,
{
    use crate::quadrature::{Interval, SingularitySpec};
    let radial = Integrator::absolute(0.1 * tol / PI).with_max_subdivisions(2000);
    let failure = std::cell::RefCell::new(None);
    let evals = std::cell::Cell::new(0usize);
    let along = |phi: f64| -> f64 {
        let ray = Ray::new(x, phi);
        if ray.reach <= inner {
            return 0.0;
        }
        let mid = inner + 0.5 * (ray.reach - inner);
        let near = radial.integrate(
            |s| f(&ray.point(s, ray.reach - s), s) * s,
            Interval::Finite(inner, mid),
            if inner == 0.0 { SingularitySpec::left(center_exponent + 1.0) } else { SingularitySpec::regular() },
        );
        let far = radial.integrate(
            |gap| {
                let s = ray.reach - gap;
                f(&ray.point(s, gap), s) * s
            },
            Interval::Finite(0.0, ray.reach - mid),
            SingularitySpec::left(exit_exponent),
        );
        match (near, far) {
            (Ok(a), Ok(b)) => {
                evals.set(evals.get() + a.evaluations + b.evaluations);
                a.value + b.value
            }
            (Err(e), _) | (_, Err(e)) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let outer = Integrator::absolute(0.4 * tol).with_max_subdivisions(2000);
    let mut total = QuadResult { value: 0.0, error_estimate: 0.1 * tol, evaluations: 0 };
    for (a, b) in [(-PI, 0.0), (0.0, PI)] {
        let part = outer.adaptive(&along, a, b);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        let part = part?;
        total.value += part.value;
        total.error_estimate += part.error_estimate;
    }
    total.evaluations = evals.get();
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_keep_precision_near_the_boundary() {
        let x = BallPoint::polar(1e-14, 0.0);
        let y = BallPoint::polar(2e-14, 0.0);
        assert!((x.dist2(&y).sqrt() - 1e-14).abs() < 1e-28);
        assert!((x.one_minus_r2() - 2e-14).abs() < 1e-27);
        let z = [1.0, 0.0];
        assert!((x.dist2_to_boundary(&z).sqrt() - 1e-14).abs() < 1e-28);
    }

    #[test]
    fn cartesian_round_trip() {
        let p = BallPoint::from_cartesian(&[0.3, -0.4]).unwrap();
        assert!((p.rho() - 0.5).abs() < 1e-15);
        let c = p.cartesian();
        assert!((c[0] - 0.3).abs() < 1e-15 && (c[1] + 0.4).abs() < 1e-15);
        assert_eq!(BallPoint::from_cartesian(&[0.0, 0.0]).unwrap().rho(), 1.0);
    }

    #[test]
    fn ray_exit_and_points() {
        let x = BallPoint::polar(0.25, 0.7);
        for &phi in &[0.0, 0.3, 1.5, 3.0, -2.0] {
            let ray = Ray::new(x, phi);
            let exit = ray.point(ray.reach, 0.0);
            assert!(exit.rho().abs() < 1e-14, "phi {phi}: {}", exit.rho());
            let mid = ray.point(0.5 * ray.reach, 0.5 * ray.reach);
            assert!(mid.rho() > 0.0);
            assert!((mid.dist2(&x).sqrt() - 0.5 * ray.reach).abs() < 1e-12);
        }
        assert!((Ray::new(x, 0.0).reach - 0.25).abs() < 1e-15);
        assert!((Ray::new(x, PI).reach - 1.75).abs() < 1e-15);
    }

    #[test]
    fn disk_area_from_interior_point() {
        let x = BallPoint::polar(0.3, 1.0);
        let q = disk_integral_about(x, 0.0, |_, _| 1.0, 0.0, 0.0, 1e-9).unwrap();
        assert!((q.value - PI).abs() < 1e-8, "{q:?}");
        let q = disk_integral_about(x, 0.1, |_, _| 1.0, 0.0, 0.0, 1e-9).unwrap();
        assert!((q.value - PI * (1.0 - 0.01)).abs() < 1e-8, "{q:?}");
    }
}
