//! Boundary measures and their potentials `∫_{∂B} M_α(x, z) dμ(z)`.

use std::cell::RefCell;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boundary_point, BallDomain, BallPoint};
use crate::green::{GreenKernel, MARTIN_TOL};
use crate::grid::{FieldOnGrid, GradedGrid};
use crate::order::FracOrder;
use crate::quadrature::Integrator;
use crate::special::sphere_area;

/// A nonnegative measure on the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryMeasure {
    /// Surface measure `ω`.
    Hausdorff,
    /// Unit point mass at `anchor`.
    Dirac { anchor: Vec<f64> },
    /// `Σ wᵢ μᵢ`.
    Sum { parts: Vec<(f64, BoundaryMeasure)> },
}

impl BoundaryMeasure {
    pub fn dirac(anchor: &[f64]) -> Self {
        Self::Dirac { anchor: anchor.to_vec() }
    }

    /// `ω + δ_{z₀}`.
    pub fn hausdorff_plus_dirac(anchor: &[f64]) -> Self {
        Self::Sum { parts: vec![(1.0, Self::Hausdorff), (1.0, Self::dirac(anchor))] }
    }

    pub fn validate(&self, dom: &BallDomain) -> Result<()> {
        match self {
            Self::Hausdorff => Ok(()),
            Self::Dirac { anchor } => {
                if anchor.len() != dom.dim() {
                    return Err(Error::Domain(format!("anchor of dimension {}", anchor.len())));
                }
                boundary_point(anchor).map(|_| ())
            }
            Self::Sum { parts } => {
                for (w, m) in parts {
                    if !(w.is_finite() && *w >= 0.0) {
                        return Err(Error::Domain(format!("weight {w} must be finite and nonnegative")));
                    }
                    m.validate(dom)?;
                }
                Ok(())
            }
        }
    }

    /// True when the potential depends on `ρ` only.
    pub fn is_rotation_invariant(&self) -> bool {
        match self {
            Self::Hausdorff => true,
            Self::Dirac { .. } => false,
            Self::Sum { parts } => parts.iter().all(|(w, m)| *w == 0.0 || m.is_rotation_invariant()),
        }
    }

    pub fn has_point_mass(&self) -> bool {
        match self {
            Self::Hausdorff => false,
            Self::Dirac { .. } => true,
            Self::Sum { parts } => parts.iter().any(|(w, m)| *w > 0.0 && m.has_point_mass()),
        }
    }
}

/// Evaluator of the potential of one measure.
#[derive(Debug, Clone)]
pub struct Potential {
    dom: BallDomain,
    kernel: GreenKernel,
    measure: BoundaryMeasure,
    rel_tol: f64,
}

impl Potential {
    pub fn new(dom: BallDomain, order: FracOrder, measure: BoundaryMeasure) -> Result<Self> {
        measure.validate(&dom)?;
        Ok(Self { dom, kernel: GreenKernel::new(dom.dim(), order), measure, rel_tol: 1e-9 })
    }

    pub fn measure(&self) -> &BoundaryMeasure {
        &self.measure
    }

    pub fn eval(&self, x: &BallPoint) -> Result<f64> {
        if x.dim() != self.dom.dim() || !x.is_interior() {
            return Err(Error::Domain(format!("point with rho = {} is not inside the ball", x.rho())));
        }
        self.eval_measure(&self.measure, x)
    }

    fn eval_measure(&self, m: &BoundaryMeasure, x: &BallPoint) -> Result<f64> {
        match m {
            BoundaryMeasure::Hausdorff => self.hausdorff(x),
            BoundaryMeasure::Dirac { anchor } => {
                let z = boundary_point(anchor)?;
                let d2: f64 = x.dir().iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok(self.kernel.martin_parts(x, d2, MARTIN_TOL)?.value)
            }
            BoundaryMeasure::Sum { parts } => {
                let mut total = 0.0;
                for (w, part) in parts {
                    if *w != 0.0 {
                        total += w * self.eval_measure(part, x)?;
                    }
                }
                Ok(total)
            }
        }
    }

    /// `|S^{N-2}| ∫_0^π M(x, z(φ)) sin^{N-2}φ dφ`, with `φ` the angle between
    /// `z` and the direction of `x`. The peak of width `ρ` around `φ = 0` is
    /// split off at `4ρ`.
    fn hausdorff(&self, x: &BallPoint) -> Result<f64> {
        let n = self.dom.dim();
        let failure = RefCell::new(None);
        let integrand = |phi: f64| {
            let s = (0.5 * phi).sin();
            match self.kernel.martin_parts(x, 4.0 * s * s, MARTIN_TOL) {
                Ok(m) => m.value * phi.sin().powi(n as i32 - 2),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let q = Integrator::relative(self.rel_tol).with_max_subdivisions(2000);
        let split = (4.0 * x.rho()).min(PI);
        let mut total = 0.0;
        for (a, b) in [(0.0, split), (split, PI)] {
            if b > a {
                let part = q.adaptive(&integrand, a, b);
                if let Some(e) = failure.borrow_mut().take() {
                    return Err(e);
                }
                total += part?.value;
            }
        }
        Ok(sphere_area(n - 1) * total)
    }
}

/// Potential of `mu` at `x`.
pub fn potential(dom: &BallDomain, order: FracOrder, mu: &BoundaryMeasure, x: &BallPoint) -> Result<f64> {
    Potential::new(*dom, order, mu.clone())?.eval(x)
}

/// A potential sampled on a grid, stored as `P·ρ^{1-α}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    pub measure: BoundaryMeasure,
    pub samples: FieldOnGrid,
}

/// Evaluates the potential at every node of `grid` (planar grids only).
pub fn potential_field(
    dom: &BallDomain,
    order: FracOrder,
    mu: &BoundaryMeasure,
    grid: &GradedGrid,
) -> Result<PotentialField> {
    dom.require_disk("potential_field")?;
    let pot = Potential::new(*dom, order, mu.clone())?;
    let beta = 1.0 - order.alpha();
    let raw: Vec<f64> = if mu.is_rotation_invariant() {
        // one evaluation per level, copied around the circle
        let mut per_level: Vec<f64> = grid
            .levels()
            .par_iter()
            .map(|&rho| pot.eval(&BallPoint::polar(rho, 0.0)))
            .collect::<Result<_>>()?;
        per_level.push(pot.eval(&BallPoint::center(2))?);
        (0..grid.node_count())
            .map(|i| per_level[grid.split_index(i).map_or(grid.n_levels(), |(j, _)| j)])
            .collect()
    } else {
        grid.nodes().par_iter().map(|x| pot.eval(x)).collect::<Result<_>>()?
    };
    if let Some(i) = raw.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::NonConvergence(format!("potential value {} at node {i}", raw[i])));
    }
    Ok(PotentialField { measure: mu.clone(), samples: FieldOnGrid::from_raw(grid.clone(), beta, &raw)? })
}
