//! Radially graded polar grids on the disk and fields sampled on them.
//!
//! Nodes sit on geometric levels `ρ_j = ρ_min·q^j` (boundary distance) with
//! `n_θ` equispaced angles per level, plus one node at the center. Fields are
//! stored normalized, `v = u·ρ^β`, and interpolated piecewise-linearly in
//! `(log ρ, θ)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BallPoint;

/// Geometric radial grid refined toward the unit circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedGrid {
    rho_min: f64,
    ratio: f64,
    n_theta: usize,
    levels: Vec<f64>,
}

impl GradedGrid {
    pub const DEFAULT_RHO_MIN: f64 = 1e-4;
    pub const DEFAULT_RATIO: f64 = 1.35;
    pub const DEFAULT_THETA: usize = 64;

    /// Deepest level accepted. Points are stored by boundary distance, so
    /// levels far below `1e-5` keep full precision.
    pub const MIN_RHO_MIN: f64 = 1e-40;

    pub fn new(rho_min: f64, ratio: f64, n_theta: usize) -> Result<Self> {
        if !(rho_min >= Self::MIN_RHO_MIN && rho_min < 0.5) {
            return Err(Error::Domain(format!("rho_min = {rho_min} outside [{}, 0.5)", Self::MIN_RHO_MIN)));
        }
        if !(ratio > 1.0 && ratio <= 4.0) {
            return Err(Error::Domain(format!("level ratio {ratio} outside (1, 4]")));
        }
        if n_theta == 0 || n_theta > 4096 {
            return Err(Error::Domain(format!("{n_theta} angular nodes")));
        }
        let mut levels = Vec::new();
        let mut rho = rho_min;
        // stop short of the center, which has its own node
        while rho < 0.95 {
            levels.push(rho);
            rho *= ratio;
        }
        Ok(Self { rho_min, ratio, n_theta, levels })
    }

    /// One angular node per level, for rotation-invariant fields.
    pub fn radial(rho_min: f64, ratio: f64) -> Result<Self> {
        Self::new(rho_min, ratio, 1)
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn is_radial(&self) -> bool {
        self.n_theta == 1
    }

    pub fn theta(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n_theta as f64
    }

    /// Number of nodes including the center.
    pub fn node_count(&self) -> usize {
        self.levels.len() * self.n_theta + 1
    }

    pub fn center_index(&self) -> usize {
        self.levels.len() * self.n_theta
    }

    pub fn index(&self, level: usize, angle: usize) -> usize {
        level * self.n_theta + angle
    }

    /// `(level, angle)` of a non-center node.
    pub fn split_index(&self, idx: usize) -> Option<(usize, usize)> {
        (idx < self.center_index()).then(|| (idx / self.n_theta, idx % self.n_theta))
    }

    pub fn node_rho(&self, idx: usize) -> f64 {
        match self.split_index(idx) {
            Some((j, _)) => self.levels[j],
            None => 1.0,
        }
    }

    pub fn node(&self, idx: usize) -> BallPoint {
        match self.split_index(idx) {
            Some((j, i)) => BallPoint::polar(self.levels[j], self.theta(i)),
            None => BallPoint::center(2),
        }
    }

    pub fn nodes(&self) -> Vec<BallPoint> {
        (0..self.node_count()).map(|i| self.node(i)).collect()
    }

    /// Indices of the levels with `lo ≤ ρ_j ≤ hi`.
    pub fn levels_in(&self, lo: f64, hi: f64) -> Vec<usize> {
        let slack = 1e-12;
        (0..self.levels.len())
            .filter(|&j| self.levels[j] >= lo * (1.0 - slack) && self.levels[j] <= hi * (1.0 + slack))
            .collect()
    }

    /// Where `ρ` falls between levels: `Below`, `Between(j, λ)` for
    /// `ρ_j ≤ ρ < ρ_{j+1}`, or `Top(λ)` between the last level and the center.
    fn locate(&self, rho: f64) -> Slot {
        let n = self.levels.len();
        if rho <= self.levels[0] {
            return Slot::Below;
        }
        let last = self.levels[n - 1];
        if rho >= last {
            let lam = (rho / last).ln() / (1.0 / last).ln();
            return Slot::Top(lam.clamp(0.0, 1.0));
        }
        let j = self.levels.partition_point(|&l| l <= rho) - 1;
        let lam = (rho / self.levels[j]).ln() / self.ratio.ln();
        Slot::Between(j, lam)
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Below,
    Between(usize, f64),
    Top(f64),
}

/// Field on a [`GradedGrid`], stored as `v = u·ρ^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldOnGrid {
    grid: GradedGrid,
    exponent: f64,
    normalized: Vec<f64>,
}

impl FieldOnGrid {
    /// From normalized node values (center last).
    pub fn new(grid: GradedGrid, exponent: f64, normalized: Vec<f64>) -> Result<Self> {
        if normalized.len() != grid.node_count() {
            return Err(Error::Domain(format!(
                "{} values for a grid with {} nodes",
                normalized.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = normalized.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, exponent, normalized })
    }

    /// From raw node values `u`.
    pub fn from_raw(grid: GradedGrid, exponent: f64, raw: &[f64]) -> Result<Self> {
        let normalized = raw
            .iter()
            .enumerate()
            .map(|(i, u)| u * grid.node_rho(i).powf(exponent))
            .collect();
        Self::new(grid, exponent, normalized)
    }

    /// Samples `u` at every node.
    pub fn from_fn<F: Fn(&BallPoint) -> f64>(grid: GradedGrid, exponent: f64, u: F) -> Result<Self> {
        let raw: Vec<f64> = grid.nodes().iter().map(&u).collect();
        Self::from_raw(grid, exponent, &raw)
    }

    pub fn grid(&self) -> &GradedGrid {
        &self.grid
    }

    /// `β` in `v = u·ρ^β`.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.normalized[idx] * self.grid.node_rho(idx).powf(-self.exponent)
    }

    pub fn raw(&self) -> Vec<f64> {
        (0..self.normalized.len()).map(|i| self.value(i)).collect()
    }

    pub fn center_value(&self) -> f64 {
        self.normalized[self.grid.center_index()]
    }

    /// Mean of `u` over the angular nodes of level `j`.
    pub fn angular_mean(&self, j: usize) -> f64 {
        let n = self.grid.n_theta;
        let s: f64 = self.normalized[j * n..(j + 1) * n].iter().sum();
        s / n as f64 * self.grid.levels[j].powf(-self.exponent)
    }

    fn on_level(&self, j: usize, theta: f64) -> f64 {
        let n = self.grid.n_theta;
        let row = &self.normalized[j * n..(j + 1) * n];
        if n == 1 {
            return row[0];
        }
        let pos = theta.rem_euclid(2.0 * PI) / (2.0 * PI) * n as f64;
        let i = (pos.floor() as usize).min(n - 1);
        let lam = pos - i as f64;
        (1.0 - lam) * row[i] + lam * row[(i + 1) % n]
    }

    /// Interpolated normalized value `v` at `x`.
    pub fn interpolate_normalized(&self, x: &BallPoint) -> f64 {
        let theta = x.theta();
        match self.grid.locate(x.rho()) {
            Slot::Below => self.on_level(0, theta),
            Slot::Between(j, lam) => (1.0 - lam) * self.on_level(j, theta) + lam * self.on_level(j + 1, theta),
            Slot::Top(lam) => {
                let last = self.grid.levels.len() - 1;
                (1.0 - lam) * self.on_level(last, theta) + lam * self.center_value()
            }
        }
    }

    /// Interpolated `u(x)`.
    pub fn interpolate(&self, x: &BallPoint) -> f64 {
        self.interpolate_normalized(x) * x.rho().powf(-self.exponent)
    }

    /// Growth exponent `γ` with `u ~ ρ^{-γ}` on the first levels, estimated
    /// from the normalized angular means of the three outermost levels.
    pub fn boundary_growth(&self) -> f64 {
        let n = self.grid.n_levels();
        if n < 3 {
            return self.exponent;
        }
        let mean = |j: usize| {
            let k = self.grid.n_theta;
            self.normalized[j * k..(j + 1) * k].iter().map(|v| v.abs()).sum::<f64>() / k as f64
        };
        let (v0, v2) = (mean(0), mean(2));
        if v0 == 0.0 || v2 == 0.0 {
            return self.exponent;
        }
        let slope = (v2 / v0).ln() / (self.grid.levels[2] / self.grid.levels[0]).ln();
        self.exponent - slope
    }

    /// Same field with every normalized value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            exponent: self.exponent,
            normalized: self.normalized.iter().map(|v| c * v).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn level_layout() {
        let g = GradedGrid::new(1e-4, 1.35, 64).unwrap();
        assert_eq!(g.n_levels(), 31);
        assert_eq!(g.node_count(), 31 * 64 + 1);
        assert!(g.levels().windows(2).all(|w| (w[1] / w[0] - 1.35).abs() < 1e-12));
        assert_eq!(g.node_rho(g.center_index()), 1.0);
        assert!(GradedGrid::new(0.0, 1.35, 8).is_err());
        assert!(GradedGrid::new(1e-3, 1.0, 8).is_err());
    }

    #[test]
    fn exact_powers_interpolate_exactly() {
        // u = ρ^{-0.3} stored with β = 0.3 is constant after normalization
        let g = GradedGrid::new(1e-4, 1.5, 8).unwrap();
        let f = FieldOnGrid::from_fn(g, 0.3, |x| x.rho().powf(-0.3)).unwrap();
        for &(rho, th) in &[(3e-5, 0.1), (2e-3, 2.0), (0.5, 4.0), (0.99, 1.0)] {
            let x = BallPoint::polar(rho, th);
            let u = f.interpolate(&x);
            assert!((u / rho.powf(-0.3) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_growth_of_a_power() {
        let g = GradedGrid::radial(1e-6, 1.3).unwrap();
        let f = FieldOnGrid::from_fn(g, 0.5, |x| x.rho().powf(-1.2)).unwrap();
        assert!((f.boundary_growth() - 1.2).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn interpolation_is_bounded_by_node_values(rho in 1e-6f64..1.0, theta in 0.0f64..6.3) {
            let g = GradedGrid::new(1e-4, 1.4, 12).unwrap();
            let f = FieldOnGrid::from_fn(g, 0.0, |x| 2.0 + x.rho().sin() * x.theta().cos()).unwrap();
            let lo = f.normalized().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = f.normalized().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let v = f.interpolate(&BallPoint::polar(rho, theta));
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}
