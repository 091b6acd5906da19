//! Product-integration discretization of the volume Green operator on a
//! graded grid.
//!
//! A density is represented by its nodal values `f_s`; between nodes the
//! weighted values `f·ρ^e` are interpolated piecewise-linearly in
//! `(log ρ, θ)` and continued as a constant below the first level. The
//! operator is then integrated exactly against this interpolant, up to
//! quadrature error, so `(W f)_t = ∫ G(x_t, y) f̃(y) dy`.
//!
//! Rotation invariance makes `W` block circulant in the angular index, and
//! only the blocks for targets at `θ = 0` are stored.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::green::GreenKernel;
use crate::grid::GradedGrid;
use crate::order::FracOrder;
use crate::quadrature::gauss_legendre;

/// Discrete Green operator on one grid for one density weighting.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    grid: GradedGrid,
    weight_exponent: f64,
    n_levels: usize,
    n_theta: usize,
    /// `[j][l][d]`: source `(l, d)` into target `(j, 0)`
    blocks: Vec<f64>,
    /// center source into target `(j, ·)`
    from_center: Vec<f64>,
    /// any node of level `l` into the center
    to_center: Vec<f64>,
    center_center: f64,
    node_weight: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Level(usize),
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Basis {
    Level(usize),
    Center,
}

/// Quadrature node in `ρ` with the exact offset from the target level.
#[derive(Debug, Clone, Copy)]
struct RhoNode {
    rho: f64,
    offset: f64,
    weight: f64,
    /// weight of the upper basis function; the lower one gets `1 - lam`
    lam: f64,
}

struct Piece {
    lower: Basis,
    upper: Option<Basis>,
    nodes: Vec<RhoNode>,
}

struct Rules {
    g8: (Vec<f64>, Vec<f64>),
    g16: (Vec<f64>, Vec<f64>),
}

const GRADING_RATIO: f64 = 0.2;
const GRADING_STEPS: usize = 28;
const SUB_GRID_DECADES: i32 = 6;

impl Rules {
    fn new() -> Self {
        Self { g8: gauss_legendre(8), g16: gauss_legendre(16) }
    }

    fn pick(&self, fine: bool) -> &(Vec<f64>, Vec<f64>) {
        if fine {
            &self.g16
        } else {
            &self.g8
        }
    }
}

impl GreenOperator {
    /// Assembles the operator for densities weighted by `ρ^e` on `grid`.
    pub fn assemble(order: FracOrder, grid: &GradedGrid, weight_exponent: f64) -> Result<Self> {
        let a = order.alpha();
        if !(a - weight_exponent > -1.0) {
            return Err(Error::DivergentIntegrand(format!(
                "density weight rho^{weight_exponent} is not integrable against rho^alpha"
            )));
        }
        let kernel = GreenKernel::new(2, order);
        let rules = Rules::new();
        let l = grid.n_levels();
        let n = grid.n_theta();
        let asm = Assembler { kernel, grid, e: weight_exponent, alpha: a, rules: &rules };

        let rows: Vec<(Vec<f64>, f64)> = (0..l).into_par_iter().map(|j| asm.level_row(j)).collect();
        let mut blocks = Vec::with_capacity(l * l * n);
        let mut from_center = Vec::with_capacity(l);
        for (row, c) in rows {
            blocks.extend(row);
            from_center.push(c);
        }
        let (to_center, center_center) = asm.center_row();
        let mut node_weight: Vec<f64> = (0..grid.node_count())
            .map(|s| grid.node_rho(s).powf(weight_exponent))
            .collect();
        node_weight[grid.center_index()] = 1.0;
        let op = Self {
            grid: grid.clone(),
            weight_exponent,
            n_levels: l,
            n_theta: n,
            blocks,
            from_center,
            to_center,
            center_center,
            node_weight,
        };
        if op.blocks.iter().chain(&op.from_center).chain(&op.to_center).any(|v| !v.is_finite()) {
            return Err(Error::NonConvergence("non-finite operator entry".into()));
        }
        Ok(op)
    }

    pub fn grid(&self) -> &GradedGrid {
        &self.grid
    }

    pub fn weight_exponent(&self) -> f64 {
        self.weight_exponent
    }

    pub fn size(&self) -> usize {
        self.grid.node_count()
    }

    /// `W f` for nodal density values `f`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let (l, n) = (self.n_levels, self.n_theta);
        let fh: Vec<f64> = f.iter().zip(&self.node_weight).map(|(v, w)| v * w).collect();
        let fc = fh[self.grid.center_index()];
        let mut out = vec![0.0; self.size()];
        out[..l * n].par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            for (i, o) in row.iter_mut().enumerate() {
                let mut acc = self.from_center[j] * fc;
                for src in 0..l {
                    let blk = &self.blocks[(j * l + src) * n..(j * l + src + 1) * n];
                    let vals = &fh[src * n..(src + 1) * n];
                    for (m, v) in vals.iter().enumerate() {
                        acc += blk[(m + n - i) % n] * v;
                    }
                }
                *o = acc;
            }
        });
        let mut c = self.center_center * fc;
        for src in 0..l {
            c += self.to_center[src] * fh[src * n..(src + 1) * n].iter().sum::<f64>();
        }
        out[self.grid.center_index()] = c;
        out
    }

    /// Dense matrix acting on raw nodal values.
    pub fn dense(&self) -> DMatrix<f64> {
        let (l, n) = (self.n_levels, self.n_theta);
        let size = self.size();
        let c = self.grid.center_index();
        let mut m = DMatrix::zeros(size, size);
        for j in 0..l {
            for i in 0..n {
                let t = j * n + i;
                for src in 0..l {
                    for mm in 0..n {
                        let s = src * n + mm;
                        m[(t, s)] = self.blocks[(j * l + src) * n + (mm + n - i) % n] * self.node_weight[s];
                    }
                }
                m[(t, c)] = self.from_center[j];
            }
        }
        for src in 0..l {
            for mm in 0..n {
                let s = src * n + mm;
                m[(c, s)] = self.to_center[src] * self.node_weight[s];
            }
        }
        m[(c, c)] = self.center_center;
        m
    }
}

struct Assembler<'a> {
    kernel: GreenKernel,
    grid: &'a GradedGrid,
    e: f64,
    alpha: f64,
    rules: &'a Rules,
}

impl Assembler<'_> {
    fn level_row(&self, j: usize) -> (Vec<f64>, f64) {
        let (l, n) = (self.grid.n_levels(), self.grid.n_theta());
        let target = Target::Level(j);
        let mut row = vec![0.0; l * n];
        let mut center = 0.0;
        let mut moments = vec![0.0; n];
        for piece in self.pieces(target) {
            for node in &piece.nodes {
                self.level_moments(j, node.rho, node.offset, &mut moments);
                let base = node.weight * node.rho.powf(-self.e) * (1.0 - node.rho);
                let mut add = |basis: Basis, phi: f64| {
                    if phi == 0.0 {
                        return;
                    }
                    match basis {
                        Basis::Level(src) => {
                            for (d, m) in moments.iter().enumerate() {
                                row[src * n + d] += base * phi * m;
                            }
                        }
                        Basis::Center => center += base * phi * moments.iter().sum::<f64>(),
                    }
                };
                add(piece.lower, 1.0 - node.lam);
                if let Some(up) = piece.upper {
                    add(up, node.lam);
                }
            }
        }
        (row, center)
    }

    fn center_row(&self) -> (Vec<f64>, f64) {
        let (l, n) = (self.grid.n_levels(), self.grid.n_theta());
        let mut row = vec![0.0; l];
        let mut center = 0.0;
        for piece in self.pieces(Target::Center) {
            for node in &piece.nodes {
                let r = -node.offset;
                let g = self.kernel.from_parts(1.0, node.rho * (2.0 - node.rho), r * r);
                let base = node.weight * node.rho.powf(-self.e) * r * g * 2.0 * PI;
                let mut add = |basis: Basis, phi: f64| match basis {
                    Basis::Level(src) => row[src] += base * phi / n as f64,
                    Basis::Center => center += base * phi,
                };
                add(piece.lower, 1.0 - node.lam);
                if let Some(up) = piece.upper {
                    add(up, node.lam);
                }
            }
        }
        (row, center)
    }

    fn target_rho(&self, t: Target) -> f64 {
        match t {
            Target::Level(j) => self.grid.levels()[j],
            Target::Center => 1.0,
        }
    }

    /// Radial pieces with quadrature nodes for one target.
    fn pieces(&self, t: Target) -> Vec<Piece> {
        let lv = self.grid.levels();
        let l = lv.len();
        let tr = self.target_rho(t);
        let level_of = |t: Target| match t {
            Target::Level(j) => Some(j),
            Target::Center => None,
        };
        let tj = level_of(t);
        let mut pieces = Vec::with_capacity(l + 2);

        // below the first level: constant continuation of level 0
        let mut sub = Vec::new();
        let top = lv[0];
        let mut hi = top;
        for k in 0..SUB_GRID_DECADES {
            let lo = hi / 10.0;
            if k == 0 && tj == Some(0) {
                // graded only over the last grid ratio, where the target sits
                let mid = hi / self.grid.ratio();
                sub.extend(self.log_gauss(lo, mid, true, tr, |_| 0.0));
                sub.extend(self.graded(mid, hi, false, tr, |_| 0.0));
            } else {
                sub.extend(self.log_gauss(lo, hi, true, tr, |_| 0.0));
            }
            hi = lo;
        }
        sub.extend(self.flattened_tail(hi, tr));
        pieces.push(Piece { lower: Basis::Level(0), upper: None, nodes: sub });

        // between levels, hats linear in log ρ
        let ln_q = self.grid.ratio().ln();
        for c in 0..l.saturating_sub(1) {
            let (a, b) = (lv[c], lv[c + 1]);
            let lam = move |rho: f64| (rho / a).ln() / ln_q;
            let nodes = match tj {
                Some(j) if j == c => self.graded(a, b, true, tr, lam),
                Some(j) if j == c + 1 => self.graded(a, b, false, tr, lam),
                Some(j) => self.log_gauss(a, b, j.abs_diff(c) <= 2, tr, lam),
                None => self.log_gauss(a, b, false, tr, lam),
            };
            pieces.push(Piece { lower: Basis::Level(c), upper: Some(Basis::Level(c + 1)), nodes });
        }

        // last level to the center
        let a = lv[l - 1];
        let span = -a.ln();
        let lam = move |rho: f64| (rho / a).ln() / span;
        let nodes = match t {
            Target::Level(j) if j == l - 1 => self.graded(a, 1.0, true, tr, lam),
            Target::Center => self.graded(a, 1.0, false, tr, lam),
            _ => self.log_gauss(a, 1.0, true, tr, lam),
        };
        pieces.push(Piece { lower: Basis::Level(l - 1), upper: Some(Basis::Center), nodes });
        pieces
    }

    fn log_gauss(&self, a: f64, b: f64, fine: bool, tr: f64, lam: impl Fn(f64) -> f64) -> Vec<RhoNode> {
        let (x, w) = self.rules.pick(fine);
        let (ua, ub) = (a.ln(), b.ln());
        let (mid, half) = (0.5 * (ua + ub), 0.5 * (ub - ua));
        x.iter()
            .zip(w)
            .map(|(xi, wi)| {
                let rho = (mid + half * xi).exp();
                RhoNode { rho, offset: rho - tr, weight: wi * half * rho, lam: lam(rho) }
            })
            .collect()
    }

    /// Geometric grading toward one end of `[a, b]`, which must be the target.
    fn graded(&self, a: f64, b: f64, toward_lower: bool, _tr: f64, lam: impl Fn(f64) -> f64) -> Vec<RhoNode> {
        let (x, w) = &self.rules.g8;
        let span = b - a;
        let mut out = Vec::with_capacity((GRADING_STEPS + 1) * x.len());
        let mut outer = span;
        for k in 0..=GRADING_STEPS {
            let inner = if k == GRADING_STEPS { 0.0 } else { outer * GRADING_RATIO };
            let (mid, half) = (0.5 * (inner + outer), 0.5 * (outer - inner));
            for (xi, wi) in x.iter().zip(w) {
                let d = mid + half * xi;
                let (rho, offset) = if toward_lower { (a + d, d) } else { (b - d, -d) };
                out.push(RhoNode { rho, offset, weight: wi * half, lam: lam(rho) });
            }
            outer = inner;
        }
        out
    }

    /// `[0, top]` with `ρ = top·s^m` flattening `ρ^{α-e}`.
    fn flattened_tail(&self, top: f64, tr: f64) -> Vec<RhoNode> {
        let gamma = self.alpha - self.e;
        let m = if gamma >= 1.0 { 1.0 } else { 2.0 / (1.0 + gamma) };
        let (x, w) = &self.rules.g16;
        x.iter()
            .zip(w)
            .map(|(xi, wi)| {
                let s = 0.5 * (1.0 + xi);
                let rho = top * s.powf(m);
                let weight = 0.5 * wi * top * m * s.powf(m - 1.0);
                RhoNode { rho, offset: rho - tr, weight, lam: 0.0 }
            })
            .collect()
    }

    /// Angular moments `∫ G(x_j, (ρ, θ)) ψ_d(θ) dθ` against the periodic
    /// hat functions of the angular grid (the full circle when `n = 1`).
    fn level_moments(&self, j: usize, rho: f64, offset: f64, out: &mut [f64]) {
        let n = out.len();
        let rj = self.grid.levels()[j];
        let (aj, ay) = (rj * (2.0 - rj), rho * (2.0 - rho));
        let rr = (1.0 - rj) * (1.0 - rho);
        let g = |theta: f64| {
            let s = (0.5 * theta).sin();
            self.kernel.from_parts(aj, ay, offset * offset + 4.0 * rr * s * s)
        };
        let width = offset.abs() / rr.sqrt();
        out.iter_mut().for_each(|v| *v = 0.0);
        if n == 1 {
            let (lo, hi) = self.cell(&g, 0.0, PI, width, true, PI);
            out[0] = 2.0 * (lo + hi);
            return;
        }
        let h = 2.0 * PI / n as f64;
        for c in 0..(n + 1) / 2 {
            let (lo_w, hi_w) = self.cell(&g, c as f64 * h, h, width, c == 0, h);
            // cell c feeds hats c and c+1; its mirror n-1-c feeds n-c and n-1-c
            out[c] += lo_w;
            out[(c + 1) % n] += hi_w;
            let mirror = n - 1 - c;
            if mirror != c {
                out[(n - c) % n] += lo_w;
                out[mirror] += hi_w;
            }
        }
    }

    /// `(∫ g (1 - t), ∫ g t)` over `[start, start + len]`, `t` the relative
    /// position in the cell. When the cell touches the kernel peak at `θ = 0`
    /// and the peak is narrower than the cell, `θ = w sinh v` resolves it.
    fn cell(&self, g: &dyn Fn(f64) -> f64, start: f64, len: f64, width: f64, at_peak: bool, hat: f64) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        if at_peak && width < len {
            let (x, w) = &self.rules.g8;
            let vmax = (len / width).asinh();
            let pieces = vmax.ceil().max(1.0) as usize;
            let dv = vmax / pieces as f64;
            for p in 0..pieces {
                let mid = (p as f64 + 0.5) * dv;
                for (xi, wi) in x.iter().zip(w) {
                    let v = mid + 0.5 * dv * xi;
                    let theta = width * v.sinh();
                    let val = g(theta) * width * v.cosh() * wi * 0.5 * dv;
                    let t = theta / hat;
                    lo += val * (1.0 - t);
                    hi += val * t;
                }
            }
        } else {
            let (x, w) = self.rules.pick(at_peak);
            for (xi, wi) in x.iter().zip(w) {
                let t = 0.5 * (1.0 + xi);
                let val = g(start + t * len) * wi * 0.5 * len;
                lo += val * (1.0 - t);
                hi += val * t;
            }
        }
        (lo, hi)
    }
}
