//! Gamma and incomplete beta functions.
//!
//! Only what the kernels need: `ln Γ` through the Lanczos approximation
//! (g = 7, nine coefficients) and the incomplete beta integral through the
//! modified Lentz continued fraction.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of `|Γ(x)|`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEFFS[0];
        for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// `Γ(x)` for any non-pole real argument.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        ln_gamma(x).exp()
    }
}

/// Complete beta function `B(a, b)` for `a, b > 0`.
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Unnormalized lower incomplete beta `∫_0^x s^{a-1}(1-s)^{b-1} ds`.
///
/// `one_minus_x` is passed separately so that callers who know `1 - x` to
/// full relative precision (the kernels do) do not lose it to cancellation.
pub fn inc_beta(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    IncompleteBeta::new(a, b).eval(x, one_minus_x)
}

/// Incomplete beta with fixed parameters and the complete integral cached,
/// for repeated evaluation in kernel loops.
#[derive(Debug, Clone, Copy)]
pub struct IncompleteBeta {
    a: f64,
    b: f64,
    total: f64,
    switch: f64,
}

impl IncompleteBeta {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b, total: beta(a, b), switch: (a + 1.0) / (a + b + 2.0) }
    }

    /// `B(a, b)`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn eval(&self, x: f64, one_minus_x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if one_minus_x <= 0.0 {
            return self.total;
        }
        if x < self.switch {
            lower_cf(self.a, self.b, x, one_minus_x)
        } else {
            self.total - lower_cf(self.b, self.a, one_minus_x, x)
        }
    }
}

fn lower_cf(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    let front = (a * x.ln() + b * one_minus_x.ln()).exp() / a;
    front * beta_continued_fraction(a, b, x)
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_reference_values() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-13);
        assert!((gamma(5.0) - 24.0).abs() < 1e-11);
        assert!((gamma(1.5) - 0.5 * PI.sqrt()).abs() < 1e-13);
        // Γ(-1/2) = -2√π
        assert!((gamma(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-12);
        assert!((ln_gamma(100.0) - 359.134_205_369_575_4).abs() < 1e-9);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_area(1) - 2.0).abs() < 1e-13);
    }

    fn inc_beta_midpoint(a: f64, b: f64, x: f64) -> f64 {
        // s = x v^m flattens the s^{a-1} endpoint
        let m = 2.0 / a;
        let n = 200_000;
        let h = 1.0 / n as f64;
        (0..n)
            .map(|i| {
                let v: f64 = (i as f64 + 0.5) * h;
                let s = x * v.powf(m);
                s.powf(a - 1.0) * (1.0 - s).powf(b - 1.0) * x * m * v.powf(m - 1.0) * h
            })
            .sum()
    }

    #[test]
    fn inc_beta_matches_midpoint_sum() {
        for &(a, b, x) in &[(0.5, 0.5, 0.3), (0.3, 0.7, 0.9), (0.25, 1.25, 0.5), (0.7, 0.3, 0.05)] {
            let got = inc_beta(a, b, x, 1.0 - x);
            let want = inc_beta_midpoint(a, b, x);
            assert!((got - want).abs() < 1e-7 * want.abs().max(1.0), "{a} {b} {x}: {got} vs {want}");
        }
    }

    #[test]
    fn inc_beta_limits() {
        let b = beta(0.5, 0.5);
        assert!((b - PI).abs() < 1e-12);
        assert!((inc_beta(0.5, 0.5, 1.0 - 1e-18, 1e-18) - b).abs() < 1e-8);
        // small x: x^a / a
        let x = 1e-20;
        assert!((inc_beta(0.5, 0.5, x, 1.0) / (x.sqrt() / 0.5) - 1.0).abs() < 1e-12);
    }
}
