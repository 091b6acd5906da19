//! Solutions of `u + 𝔾_α[g(u)] = kP_μ` on a graded grid, and families in `k`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BallDomain;
use crate::grid::{FieldOnGrid, GradedGrid};
use crate::measures::{potential_field, BoundaryMeasure};
use crate::nonlinearity::{Nonlinearity, Reaction};
use crate::operator::GreenOperator;
use crate::order::FracOrder;

/// Iteration used to reach the fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `u ↦ kP - 𝔾[g(u)]` from `u = kP`.
    Picard,
    /// Damped Newton on `u + 𝔾[g(u)] - kP = 0`.
    Newton,
    /// Picard while it contracts fast enough, then Newton.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stopping threshold on the change of `u`, relative to `kP` nodewise.
    pub tol: f64,
    pub max_iterations: usize,
    pub scheme: Scheme,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iterations: 200, scheme: Scheme::Auto }
    }
}

impl SolveOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub k: f64,
    /// `u` stored as `u·ρ^{1-α}`.
    pub solution: FieldOnGrid,
    pub iterations: usize,
    /// `max |u + 𝔾[g(u)] - kP| / kP` over the nodes.
    pub residual: f64,
    /// `kP - 𝔾[g(kP)] ≤ u ≤ kP` at every node.
    pub sandwich_ok: bool,
    pub scheme: Scheme,
}

/// Precomputed potential and operator for one problem; solves for any `k`.
#[derive(Debug, Clone)]
pub struct Solver {
    order: FracOrder,
    reaction: Reaction,
    measure: BoundaryMeasure,
    potential: Vec<f64>,
    operator: GreenOperator,
}

/// Relative slack of the pointwise order checks.
const ORDER_SLACK: f64 = 1e-8;

impl Solver {
    pub fn new(
        dom: &BallDomain,
        order: FracOrder,
        reaction: impl Into<Reaction>,
        mu: &BoundaryMeasure,
        grid: &GradedGrid,
    ) -> Result<Self> {
        dom.require_disk("the solver")?;
        let reaction = reaction.into();
        check_admissible(&reaction, order, mu)?;
        let field = potential_field(dom, order, mu, grid)?;
        let operator = GreenOperator::assemble(order, grid, reaction.weight_exponent(order))?;
        Ok(Self { order, reaction, measure: mu.clone(), potential: field.samples.raw(), operator })
    }

    pub fn grid(&self) -> &GradedGrid {
        self.operator.grid()
    }

    pub fn order(&self) -> FracOrder {
        self.order
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn measure(&self) -> &BoundaryMeasure {
        &self.measure
    }

    pub fn operator(&self) -> &GreenOperator {
        &self.operator
    }

    /// Raw nodal values of `P_μ`.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `𝔾[g(u)]` at the nodes.
    pub fn correction(&self, u: &[f64]) -> Vec<f64> {
        let gu: Vec<f64> = u.iter().map(|&v| self.reaction.eval(v)).collect();
        self.operator.apply(&gu)
    }

    /// Solves for one `k`, starting from `initial` (raw values) when given.
    pub fn solve(&self, k: f64, opts: &SolveOptions, initial: Option<&[f64]>) -> Result<SolveResult> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Domain(format!("k = {k} must be positive")));
        }
        if !(opts.tol > 0.0) || opts.max_iterations == 0 {
            return Err(Error::Domain("tolerance and iteration budget must be positive".into()));
        }
        let kp: Vec<f64> = self.potential.iter().map(|p| k * p).collect();
        let (u, iterations, scheme) = match opts.scheme {
            Scheme::Picard => {
                let (u, it, _) = self.picard(&kp, opts, false)?;
                (u, it, Scheme::Picard)
            }
            Scheme::Newton => {
                let start = initial.map_or_else(|| kp.clone(), |s| clamp_to(s, &kp));
                let (u, it) = self.newton(&kp, start, opts, 0)?;
                (u, it, Scheme::Newton)
            }
            Scheme::Auto => match initial {
                Some(s) => {
                    let (u, it) = self.newton(&kp, clamp_to(s, &kp), opts, 0)?;
                    (u, it, Scheme::Newton)
                }
                None => match self.picard(&kp, opts, true)? {
                    (u, it, true) => (u, it, Scheme::Picard),
                    (u, it, false) => {
                        let (u, total) = self.newton(&kp, u, opts, it)?;
                        (u, total, Scheme::Auto)
                    }
                },
            },
        };
        self.finish(k, &kp, u, iterations, scheme)
    }

    fn finish(&self, k: f64, kp: &[f64], u: Vec<f64>, iterations: usize, scheme: Scheme) -> Result<SolveResult> {
        let residual = self.residual(&u, kp);
        let lower = self.correction(kp);
        let sandwich_ok = u.iter().zip(kp).zip(&lower).all(|((&v, &top), &c)| {
            let slack = ORDER_SLACK * top;
            v <= top + slack && v >= top - c - slack
        });
        if let Some(i) = u.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonConvergence(format!("nonpositive solution value {} at node {i}", u[i])));
        }
        let solution = FieldOnGrid::from_raw(self.grid().clone(), 1.0 - self.order.alpha(), &u)?;
        Ok(SolveResult { k, solution, iterations, residual, sandwich_ok, scheme })
    }

    fn residual(&self, u: &[f64], kp: &[f64]) -> f64 {
        let c = self.correction(u);
        u.iter()
            .zip(&c)
            .zip(kp)
            .map(|((v, c), p)| (v + c - p).abs() / p)
            .fold(0.0, f64::max)
    }

    /// Picard sweeps, returning the iterate, the sweep count and whether the
    /// tolerance was met. With `probe`, stops early once the contraction rate
    /// shows Newton will be faster.
    fn picard(&self, kp: &[f64], opts: &SolveOptions, probe: bool) -> Result<(Vec<f64>, usize, bool)> {
        let mut u = kp.to_vec();
        let mut last_diff = f64::INFINITY;
        for it in 1..=opts.max_iterations {
            let c = self.correction(&u);
            let next: Vec<f64> = kp.iter().zip(&c).map(|(p, c)| p - c).collect();
            let diff = relative_change(&u, &next, kp);
            if !diff.is_finite() {
                return Err(Error::NonConvergence(format!("Picard iterate {it} is not finite")));
            }
            if diff < opts.tol {
                return Ok((next, it, true));
            }
            let rate = diff / last_diff;
            if probe && it >= 3 && rate > 0.5 {
                // the true fixed point lies between consecutive iterates
                let mid: Vec<f64> = u.iter().zip(&next).map(|(a, b)| 0.5 * (a + b).max(0.0)).collect();
                return Ok((mid, it, false));
            }
            last_diff = diff;
            u = next;
        }
        if probe {
            return Ok((u, opts.max_iterations, false));
        }
        Err(Error::NonConvergence(format!(
            "Picard did not reach {:e} in {} iterations (last change {last_diff:e})",
            opts.tol, opts.max_iterations
        )))
    }

    /// Damped Newton with iterates kept in `[0, kP]`.
    fn newton(&self, kp: &[f64], mut u: Vec<f64>, opts: &SolveOptions, spent: usize) -> Result<(Vec<f64>, usize)> {
        let w = self.operator.dense();
        let size = u.len();
        let weight = |u: &[f64]| -> Vec<f64> { u.iter().map(|&v| self.reaction.eval(v)).collect() };
        let mut f = self.defect(&u, &weight(&u), kp);
        let mut norm = scaled_norm(&f, kp);
        for it in spent + 1..=opts.max_iterations.max(spent + 1) {
            let mut jac = w.clone();
            for (col, &v) in u.iter().enumerate() {
                let d = self.reaction.derivative(v);
                let d = if d.is_finite() { d } else { 0.0 };
                jac.column_mut(col).scale_mut(d);
            }
            for i in 0..size {
                jac[(i, i)] += 1.0;
            }
            let step = solve_dense(jac, &f)?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial: Vec<f64> =
                    u.iter().zip(&step).zip(kp).map(|((v, s), p)| (v - lambda * s).clamp(0.0, *p)).collect();
                let tg = weight(&trial);
                let tf = self.defect(&trial, &tg, kp);
                let tn = scaled_norm(&tf, kp);
                if tn <= (1.0 - 1e-4 * lambda) * norm || tn < 0.1 * opts.tol {
                    let change = relative_change(&u, &trial, kp);
                    u = trial;
                    f = tf;
                    norm = tn;
                    accepted = true;
                    if change < opts.tol && norm < opts.tol {
                        return Ok((u, it));
                    }
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                if norm < opts.tol {
                    return Ok((u, it));
                }
                return Err(Error::NonConvergence(format!("Newton line search stalled at residual {norm:e}")));
            }
        }
        Err(Error::NonConvergence(format!(
            "Newton did not reach {:e} in {} iterations (residual {norm:e})",
            opts.tol, opts.max_iterations
        )))
    }

    fn defect(&self, u: &[f64], gu: &[f64], kp: &[f64]) -> Vec<f64> {
        let c = self.operator.apply(gu);
        u.iter().zip(&c).zip(kp).map(|((v, c), p)| v + c - p).collect()
    }
}

fn relative_change(a: &[f64], b: &[f64], scale: &[f64]) -> f64 {
    a.iter().zip(b).zip(scale).map(|((x, y), s)| (x - y).abs() / s).fold(0.0, f64::max)
}

fn scaled_norm(f: &[f64], scale: &[f64]) -> f64 {
    f.iter().zip(scale).map(|(v, s)| v.abs() / s).fold(0.0, f64::max)
}

fn clamp_to(start: &[f64], top: &[f64]) -> Vec<f64> {
    start.iter().zip(top).map(|(v, t)| v.clamp(0.0, *t)).collect()
}

fn solve_dense(jac: DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let b = nalgebra::DVector::from_column_slice(rhs);
    jac.lu()
        .solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::NonConvergence("singular Newton system".into()))
}

fn check_admissible(reaction: &Reaction, order: FracOrder, mu: &BoundaryMeasure) -> Result<()> {
    let g = reaction.base();
    g.validate()?;
    let p_star = order.p_star();
    match g {
        Nonlinearity::Power(p) if *p >= p_star => {
            return Err(Error::SubcriticalityViolated(format!("p = {p} is not below p* = {p_star:.6}")));
        }
        Nonlinearity::Custom(c) if g.growth() >= p_star => {
            return Err(Error::SubcriticalityViolated(format!(
                "{} grows like s^{} which is not below p* = {p_star:.6}",
                c.name(),
                g.growth()
            )));
        }
        _ => {}
    }
    if mu.has_point_mass() && g.subadditivity_constant().is_none() {
        return Err(Error::Precondition(
            "a custom nonlinearity needs a subadditivity constant with point masses".into(),
        ));
    }
    Ok(())
}

/// Single solve with a fresh [`Solver`].
pub fn solve(
    dom: &BallDomain,
    order: FracOrder,
    g: impl Into<Reaction>,
    mu: &BoundaryMeasure,
    k: f64,
    grid: &GradedGrid,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    Solver::new(dom, order, g, mu, grid)?.solve(k, opts, None)
}

/// Solutions for increasing `ks`, each warm-started from the previous one.
/// Fails when the family is not pointwise nondecreasing in `k`.
pub fn solve_family(solver: &Solver, ks: &[f64], opts: &SolveOptions) -> Result<Vec<SolveResult>> {
    if ks.is_empty() || ks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("k values must be strictly increasing".into()));
    }
    let mut out: Vec<SolveResult> = Vec::with_capacity(ks.len());
    for &k in ks {
        let start = out.last().map(|r| r.solution.raw());
        let res = solver.solve(k, opts, start.as_deref())?;
        if let Some(prev) = out.last() {
            let (a, b) = (prev.solution.normalized(), res.solution.normalized());
            if let Some(i) = a.iter().zip(b).position(|(x, y)| *y < x - ORDER_SLACK.max(10.0 * opts.tol) * x) {
                return Err(Error::NonConvergence(format!(
                    "family decreases from k = {} to k = {k} at node {i}",
                    prev.k
                )));
            }
        }
        out.push(res);
    }
    Ok(out)
}
