//! Boundary rates, weak-norm decay, subcriticality verdicts and the regime
//! of a family of solutions.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraclap::{frac_lap_eval, SplineProfile};
use crate::geometry::BallDomain;
use crate::grid::FieldOnGrid;
use crate::nonlinearity::{Nonlinearity, Reaction};
use crate::order::FracOrder;
use crate::quadrature::Integrator;
use crate::solver::SolveResult;

/// Default fitting window for boundary rates.
pub const RATE_WINDOW: (f64, f64) = (1e-4, 1e-2);

/// Fewest levels a rate fit accepts.
pub const MIN_FIT_LEVELS: usize = 8;

/// `u ≈ e^{intercept} ρ^{exponent}` on the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub rho_window: (f64, f64),
}

/// Least-squares slope of `ln ū(ρ_j)` against `ln ρ_j` over the levels in
/// `window`, with `ū` the angular mean.
pub fn fit_boundary_rate(field: &FieldOnGrid, window: (f64, f64)) -> Result<RateFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi && hi <= 0.5) {
        return Err(Error::InsufficientWindow(format!("window [{lo}, {hi}] is not inside (0, 0.5]")));
    }
    let grid = field.grid();
    let levels = grid.levels_in(lo, hi);
    if levels.len() < MIN_FIT_LEVELS {
        return Err(Error::InsufficientWindow(format!(
            "{} levels in [{lo:e}, {hi:e}], need {MIN_FIT_LEVELS}",
            levels.len()
        )));
    }
    let mut pts = Vec::with_capacity(levels.len());
    for &j in &levels {
        let m = field.angular_mean(j);
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::DegenerateField(format!("angular mean {m} at rho = {:e}", grid.levels()[j])));
        }
        pts.push((grid.levels()[j].ln(), m.ln()));
    }
    let (slope, intercept, r_squared) = least_squares(&pts);
    Ok(RateFit { exponent: slope, intercept, r_squared, rho_window: window })
}

/// Slope, intercept and `R²` of the line through `pts`.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    (slope, my - slope * mx, r2)
}

/// Distribution of a field against `ρ^α dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakNormEstimate {
    pub kappa: f64,
    /// Slope of `ln m(λ)` against `ln λ`.
    pub fitted_decay: f64,
    /// `sup λ^κ m(λ)` over the probed levels.
    pub band_constant: f64,
    /// Probed `(λ, m(λ))`.
    pub samples: Vec<(f64, f64)>,
}

/// Number of probed levels `λ`.
const WEAK_NORM_SAMPLES: usize = 24;

/// Sub-intervals per cell used to bracket crossings of `u = λ`.
const CROSSING_PROBES: usize = 16;

/// `m(λ) = ∫_{u > λ} ρ^α dx` for the interpolated field, per angular ray.
pub fn superlevel_mass(field: &FieldOnGrid, order: FracOrder, lambda: f64) -> f64 {
    let a = order.alpha();
    let grid = field.grid();
    let n = grid.n_theta();
    let beta = field.exponent();
    let levels = grid.levels();
    let v = field.normalized();
    let center = field.center_value();
    let ray_mass = |i: usize| {
        let at = |j: usize| v[j * n + i];
        // below the first level, u = v₀ ρ^{-β}
        let mut total = below_first_level(at(0), beta, levels[0], a, lambda);
        let mut cells: Vec<(f64, f64, f64, f64)> =
            levels.windows(2).enumerate().map(|(j, w)| (w[0], w[1], at(j), at(j + 1))).collect();
        cells.push((levels[levels.len() - 1], 1.0, at(levels.len() - 1), center));
        for (r0, r1, v0, v1) in cells {
            total += cell_mass(r0, r1, v0, v1, beta, a, lambda);
        }
        total
    };
    let sum: f64 = (0..n).map(ray_mass).sum();
    2.0 * PI / n as f64 * sum
}

/// `∫ ρ^α (1 - ρ) dρ` over `[r0, r1]`.
fn weight_integral(r0: f64, r1: f64, a: f64) -> f64 {
    let f = |r: f64| r.powf(a + 1.0) / (a + 1.0) - r.powf(a + 2.0) / (a + 2.0);
    f(r1) - f(r0)
}

fn below_first_level(v0: f64, beta: f64, rho0: f64, a: f64, lambda: f64) -> f64 {
    if v0 <= 0.0 {
        return 0.0;
    }
    if beta > 0.0 {
        let edge = (v0 / lambda).powf(1.0 / beta).min(rho0);
        weight_integral(0.0, edge, a)
    } else if beta < 0.0 {
        let edge = (lambda / v0).powf(-1.0 / beta).min(rho0);
        weight_integral(edge, rho0, a)
    } else if v0 > lambda {
        weight_integral(0.0, rho0, a)
    } else {
        0.0
    }
}

/// Mass of `{u > λ}` in a cell where `v` is linear in `ln ρ`.
fn cell_mass(r0: f64, r1: f64, v0: f64, v1: f64, beta: f64, a: f64, lambda: f64) -> f64 {
    let span = (r1 / r0).ln();
    let excess = |rho: f64| {
        let t = (rho / r0).ln() / span;
        (v0 + t * (v1 - v0)) * rho.powf(-beta) - lambda
    };
    let ratio = r1 / r0;
    let mut total = 0.0;
    let mut lo = r0;
    let mut f_lo = excess(lo);
    for s in 1..=CROSSING_PROBES {
        let hi = if s == CROSSING_PROBES { r1 } else { r0 * ratio.powf(s as f64 / CROSSING_PROBES as f64) };
        let f_hi = excess(hi);
        match (f_lo > 0.0, f_hi > 0.0) {
            (true, true) => total += weight_integral(lo, hi, a),
            (false, false) => {}
            (inside_lo, _) => {
                let root = bisect(&excess, lo, hi, f_lo);
                total += if inside_lo { weight_integral(lo, root, a) } else { weight_integral(root, hi, a) };
            }
        }
        lo = hi;
        f_lo = f_hi;
    }
    total
}

fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sign = fa > 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) > 0.0) == sign {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Decay of `m(λ)` for `λ` between the angular means of `u` at the levels
/// nearest `ρ = 1e-2` and at the first level, where the boundary layer of
/// the field sets the super-level sets.
pub fn weak_norm_decay(field: &FieldOnGrid, order: FracOrder, kappa: f64) -> Result<WeakNormEstimate> {
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa = {kappa} must exceed 1")));
    }
    let raw = field.raw();
    if let Some(v) = raw.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateField(format!("value {v} is not positive")));
    }
    let (min, max) = raw.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if max - min <= 1e-12 * max {
        return Err(Error::DegenerateField("field is constant".into()));
    }
    let grid = field.grid();
    let outer = grid.levels().partition_point(|&r| r < RATE_WINDOW.1).min(grid.n_levels() - 1);
    let lam_lo = field.angular_mean(outer).max(min);
    let lam_hi = field.angular_mean(0).min(max);
    if !(lam_hi > lam_lo * 1.5) {
        return Err(Error::DegenerateField(format!("no boundary layer: u ranges over [{lam_lo:e}, {lam_hi:e}]")));
    }
    let samples: Vec<(f64, f64)> = (0..WEAK_NORM_SAMPLES)
        .into_par_iter()
        .map(|i| {
            let lambda = lam_lo * (lam_hi / lam_lo).powf(i as f64 / (WEAK_NORM_SAMPLES - 1) as f64);
            (lambda, superlevel_mass(field, order, lambda))
        })
        .collect();
    let pts: Vec<(f64, f64)> = samples.iter().filter(|s| s.1 > 0.0).map(|(l, m)| (l.ln(), m.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateField("super-level sets are empty".into()));
    }
    let (fitted_decay, _, _) = least_squares(&pts);
    let band_constant = samples.iter().map(|(l, m)| l.powf(kappa) * m).fold(0.0, f64::max);
    Ok(WeakNormEstimate { kappa, fitted_decay, band_constant, samples })
}

/// Outcome of an integrability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self == Self::Convergent
    }
}

/// Verdicts for `∫_1^∞ g(s) s^{-1-q} ds < ∞` with `q = p*` and `q = p*_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubcriticalReport {
    pub p_star: f64,
    pub p_star_n: f64,
    pub boundary_condition: Verdict,
    pub point_mass_condition: Verdict,
}

/// Blocks of the tail integral, each a factor 16 in `s`.
const TAIL_BLOCKS: usize = 32;
const TAIL_BLOCK_LOG: f64 = 4.0 * std::f64::consts::LN_2;
/// Trailing blocks examined by the ratio test.
const TAIL_WINDOW: usize = 8;

pub fn subcritical_check(g: &Nonlinearity, order: FracOrder, dim: usize) -> SubcriticalReport {
    let p_star = order.p_star();
    let p_star_n = order.p_star_n(dim);
    let verdict = |q: f64| match g {
        Nonlinearity::Power(p) => {
            if *p < q {
                Verdict::Convergent
            } else {
                Verdict::Divergent
            }
        }
        Nonlinearity::Zero => Verdict::Convergent,
        Nonlinearity::Custom(_) => tail_verdict(g, q),
    };
    SubcriticalReport {
        p_star,
        p_star_n,
        boundary_condition: verdict(p_star),
        point_mass_condition: verdict(p_star_n),
    }
}

/// Ratio test on blocks `∫ g(e^t) e^{-qt} dt` of equal width in `t = ln s`:
/// geometric decay with a negligible remainder is convergent, blocks that
/// stop decreasing are divergent, anything else is inconclusive.
fn tail_verdict(g: &Nonlinearity, q: f64) -> Verdict {
    let integrand = |t: f64| g.eval(t.exp()) * (-q * t).exp();
    let quad = Integrator::relative(1e-10);
    let mut blocks = Vec::with_capacity(TAIL_BLOCKS);
    for j in 0..TAIL_BLOCKS {
        let a = j as f64 * TAIL_BLOCK_LOG;
        match quad.adaptive(&integrand, a, a + TAIL_BLOCK_LOG) {
            Ok(r) if r.value.is_finite() => blocks.push(r.value),
            _ => return Verdict::Inconclusive,
        }
    }
    let total: f64 = blocks.iter().sum();
    let ratios: Vec<f64> = blocks.windows(2).rev().take(TAIL_WINDOW).map(|w| w[1] / w[0]).collect();
    if ratios.iter().any(|r| !r.is_finite()) {
        return Verdict::Inconclusive;
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    // blocks that stay level within quadrature error do not decay
    if ratios.iter().all(|&r| r >= 1.0 - 1e-8) {
        return Verdict::Divergent;
    }
    if worst < 0.95 {
        let last = blocks[TAIL_BLOCKS - 1];
        let remainder = last * worst / (1.0 - worst);
        if remainder <= 1e-6 * total {
            return Verdict::Convergent;
        }
    }
    Verdict::Inconclusive
}

/// Fractional threshold on the growth of the probe value for a limit.
pub const CAUCHY_THRESHOLD: f64 = 0.05;
/// Growth factor of the probe value that signals blow-up.
pub const BLOW_UP_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    StrongLimit { rate: RateFit },
    FamilyBlowUp,
}

/// Raw numbers behind a regime verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeStatistics {
    /// `(k, u_k(x*))` for each member, with `x*` the center.
    pub probe: Vec<(f64, f64)>,
    /// Reference member for the last decade: the one closest to `k_max/10`.
    pub decade_start: f64,
    /// `u_{k_max}(x*) / u_{k_ref}(x*)`.
    pub decade_growth: f64,
    /// Relative increment between the last two members.
    pub last_increment: f64,
    /// Boundary exponent expected for a limit, `-2α/(p-1)` when `p > 1`.
    pub expected_exponent: Option<f64>,
}

pub fn regime_statistics(family: &[SolveResult], order: FracOrder, p: f64) -> Result<RegimeStatistics> {
    if family.len() < 2 {
        return Err(Error::Precondition("a family needs at least two members".into()));
    }
    if family.windows(2).any(|w| !(w[1].k > w[0].k)) {
        return Err(Error::Precondition("family members must have increasing k".into()));
    }
    let k_max = family[family.len() - 1].k;
    if k_max / family[0].k < 1e3 * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("k spans {:.3} decades, need 3", (k_max / family[0].k).log10())));
    }
    let probe: Vec<(f64, f64)> = family.iter().map(|r| (r.k, r.solution.center_value())).collect();
    let target = (k_max / 10.0).ln();
    let reference = probe
        .iter()
        .min_by(|a, b| (a.0.ln() - target).abs().total_cmp(&(b.0.ln() - target).abs()))
        .copied()
        .expect("family is not empty");
    let n = probe.len();
    let last = probe[n - 1].1;
    Ok(RegimeStatistics {
        decade_start: reference.0,
        decade_growth: last / reference.1,
        last_increment: (last - probe[n - 2].1) / probe[n - 2].1,
        expected_exponent: (p > 1.0).then(|| -2.0 * order.alpha() / (p - 1.0)),
        probe,
    })
}

/// Limit when the center value grows by less than 5% over the last decade
/// of `k`, blow-up when it at least doubles.
pub fn classify_regime(family: &[SolveResult], order: FracOrder, p: f64) -> Result<Regime> {
    let stats = regime_statistics(family, order, p)?;
    let growth = stats.decade_growth;
    if growth - 1.0 < CAUCHY_THRESHOLD {
        let last = &family[family.len() - 1];
        let rate = fit_boundary_rate(&last.solution, RATE_WINDOW)?;
        Ok(Regime::StrongLimit { rate })
    } else if growth >= BLOW_UP_FACTOR {
        Ok(Regime::FamilyBlowUp)
    } else {
        Err(Error::Inconclusive(format!(
            "center value grows by a factor {growth:.4} from k = {} to k = {} (last step {:.2}%)",
            stats.decade_start,
            stats.probe[stats.probe.len() - 1].0,
            100.0 * stats.last_increment
        )))
    }
}

/// Pointwise residual of the differential equation at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub rho: f64,
    /// `|(-Δ)^α u + g(u)| ρ^{1+α}`
    pub scaled_residual: f64,
    /// `|(-Δ)^α u + g(u)| / (u ρ^{-2α} + g(u))`, free of the amplitude of `u`
    pub relative_residual: f64,
}

/// `(-Δ)^α u + g(u)` at the given levels of a rotation-invariant solution,
/// scaled by `ρ^{1+α}`. The solution enters through the clamped spline in
/// `ln ρ` of its angular means, which is smooth enough for the principal
/// value.
pub fn classical_residual(
    order: FracOrder,
    reaction: &Reaction,
    result: &SolveResult,
    levels: &[usize],
) -> Result<Vec<ResidualPoint>> {
    let dom = BallDomain::disk();
    let a = order.alpha();
    let profile = SplineProfile::from_field(&result.solution)?;
    let grid = result.solution.grid();
    levels
        .par_iter()
        .map(|&j| {
            let rho = *grid
                .levels()
                .get(j)
                .ok_or_else(|| Error::Domain(format!("level {j} is not on the grid")))?;
            let x = crate::geometry::BallPoint::polar(rho, 0.0);
            let lap = frac_lap_eval(&dom, order, &profile, &x, 1e-6)?;
            let u = profile.at_rho(rho);
            let gu = reaction.eval(u);
            let defect = (lap + gu).abs();
            Ok(ResidualPoint {
                rho,
                scaled_residual: defect * rho.powf(1.0 + a),
                relative_residual: defect / (u * rho.powf(-2.0 * a) + gu),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GradedGrid;
    use crate::nonlinearity::{CustomNonlinearity, NamedCustom};

    #[test]
    fn exact_powers_are_recovered() {
        let grid = GradedGrid::new(1e-5, 1.3, 4).unwrap();
        let f = FieldOnGrid::from_fn(grid, 0.5, |x| 2.5 * x.rho().powf(-0.3)).unwrap();
        let fit = fit_boundary_rate(&f, RATE_WINDOW).unwrap();
        assert!((fit.exponent + 0.3).abs() < 1e-10);
        assert!((fit.intercept - 2.5f64.ln()).abs() < 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert!(matches!(fit_boundary_rate(&f, (1e-3, 2e-3)), Err(Error::InsufficientWindow(_))));
        assert!(matches!(fit_boundary_rate(&f, (1e-3, 0.9)), Err(Error::InsufficientWindow(_))));
    }

    #[test]
    fn superlevel_mass_of_a_pure_power() {
        let o = FracOrder::new(0.5).unwrap();
        let grid = GradedGrid::new(1e-4, 1.35, 1).unwrap();
        let f = FieldOnGrid::from_fn(grid, 0.5, |x| x.rho().powf(-0.5)).unwrap();
        for lambda in [3.0f64, 20.0, 90.0, 1e3] {
            let r = lambda.powf(-2.0);
            let exact = 2.0 * PI * (r.powf(1.5) / 1.5 - r.powf(2.5) / 2.5);
            let m = superlevel_mass(&f, o, lambda);
            assert!((m / exact - 1.0).abs() < 1e-9, "λ {lambda}: {m} vs {exact}");
        }
    }

    #[test]
    fn weak_norm_is_scale_equivariant() {
        let o = FracOrder::new(0.5).unwrap();
        let grid = GradedGrid::new(1e-4, 1.35, 4).unwrap();
        let f = FieldOnGrid::from_fn(grid, 0.5, |x| x.one_minus_r2().powf(-0.5) * (1.2 + x.theta().cos() * 0.1))
            .unwrap();
        let a = weak_norm_decay(&f, o, 3.0).unwrap();
        let b = weak_norm_decay(&f.scaled(3.0), o, 3.0).unwrap();
        assert!((a.fitted_decay - b.fitted_decay).abs() < 1e-6);
        assert!((b.band_constant / a.band_constant / 27.0 - 1.0).abs() < 1e-6);
        assert!((a.fitted_decay + 3.0).abs() < 0.15);
        let flat = FieldOnGrid::from_fn(f.grid().clone(), 0.0, |_| 1.0).unwrap();
        assert!(matches!(weak_norm_decay(&flat, o, 3.0), Err(Error::DegenerateField(_))));
    }

    #[test]
    fn subcriticality_verdicts() {
        let o = FracOrder::new(0.5).unwrap();
        let r = subcritical_check(&Nonlinearity::power(2.0).unwrap(), o, 2);
        assert_eq!(r.boundary_condition, Verdict::Convergent);
        assert_eq!(r.point_mass_condition, Verdict::Divergent);
        let r = subcritical_check(&Nonlinearity::power(3.0).unwrap(), o, 2);
        assert_eq!(r.boundary_condition, Verdict::Divergent);
        let r = subcritical_check(&NamedCustom::SquareOverLog.build(), o, 2);
        assert_eq!(r.boundary_condition, Verdict::Convergent);
        assert_eq!(r.point_mass_condition, Verdict::Divergent);
        let cube = Nonlinearity::Custom(CustomNonlinearity::new("cube", |s| s * s * s, 3.0, None));
        assert_eq!(subcritical_check(&cube, o, 2).boundary_condition, Verdict::Divergent);
        let borderline =
            Nonlinearity::Custom(CustomNonlinearity::new("edge", |s| s.powi(3) / (std::f64::consts::E + s).ln(), 3.0, None));
        assert_eq!(subcritical_check(&borderline, o, 2).boundary_condition, Verdict::Inconclusive);
    }
}
