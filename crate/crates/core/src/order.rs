use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order `α ∈ (0, 1)` of the fractional Laplacian `(-Δ)^α`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::Domain(format!("alpha = {alpha} is not in (0, 1)")))
        }
    }

    #[inline]
    pub fn alpha(self) -> f64 {
        self.0
    }

    /// Critical exponent `(1 + α) / (1 - α)` for the boundary Hausdorff measure.
    pub fn p_star(self) -> f64 {
        (1.0 + self.0) / (1.0 - self.0)
    }

    /// Critical exponent `(N + α) / (N - α)` for a boundary Dirac mass.
    pub fn p_star_n(self, dim: usize) -> f64 {
        let n = dim as f64;
        (n + self.0) / (n - self.0)
    }

    /// Exponent `1 + 2α` separating the two regimes of the `k → ∞` family.
    pub fn family_threshold(self) -> f64 {
        1.0 + 2.0 * self.0
    }

    /// Boundary rate `α - 1` of the Hausdorff potential.
    pub fn hausdorff_rate(self) -> f64 {
        self.0 - 1.0
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = Error;
    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<FracOrder> for f64 {
    fn from(o: FracOrder) -> f64 {
        o.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(FracOrder::new(0.0).is_err());
        assert!(FracOrder::new(1.0).is_err());
        assert!(FracOrder::new(f64::NAN).is_err());
        assert_eq!(FracOrder::new(0.5).unwrap().p_star(), 3.0);
    }

    proptest! {
        #[test]
        fn critical_exponents_are_ordered(alpha in 0.001f64..0.999, dim in 2usize..8) {
            let o = FracOrder::new(alpha).unwrap();
            prop_assert!(o.p_star() > 1.0);
            prop_assert!(o.p_star() > o.p_star_n(dim));
            prop_assert!(o.p_star_n(dim) > 1.0);
        }
    }
}
