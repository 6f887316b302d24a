/// Huber kernel on the squared Mahalanobis norm `s`:
/// `ρ(s) = s` for `s ≤ δ²`, `2δ√s − δ²` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Huber {
    pub delta: f64,
}

/// 95% chi-square quantile, 2 degrees of freedom.
pub const CHI2_2DOF_95: f64 = 5.991;
/// 95% chi-square quantile, 3 degrees of freedom.
pub const CHI2_3DOF_95: f64 = 7.815;

impl Huber {
    pub fn new(delta: f64) -> Self {
        Self { delta }
    }

    /// Kernel whose quadratic region ends at the given squared-norm quantile.
    pub fn from_chi2(quantile: f64) -> Self {
        Self {
            delta: quantile.sqrt(),
        }
    }

    pub fn rho(&self, s: f64) -> f64 {
        let d2 = self.delta * self.delta;
        if s <= d2 {
            s
        } else {
            2.0 * self.delta * s.sqrt() - d2
        }
    }

    /// `ρ'(s)`, the IRLS weight.
    pub fn weight(&self, s: f64) -> f64 {
        if s <= self.delta * self.delta {
            1.0
        } else {
            self.delta / s.sqrt()
        }
    }
}

pub(crate) fn robust_cost(kernel: Option<&Huber>, s: f64) -> f64 {
    kernel.map_or(s, |k| k.rho(s))
}

pub(crate) fn robust_weight(kernel: Option<&Huber>, s: f64) -> f64 {
    kernel.map_or(1.0, |k| k.weight(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_is_continuous_with_matching_slope() {
        let k = Huber::new(2.0);
        let s = 4.0;
        assert!((k.rho(s - 1e-9) - k.rho(s + 1e-9)).abs() < 1e-8);
        let h = 1e-6;
        let slope = (k.rho(9.0 + h) - k.rho(9.0 - h)) / (2.0 * h);
        assert!((slope - k.weight(9.0)).abs() < 1e-8);
    }

    #[test]
    fn hand_values() {
        assert_eq!(Huber::new(1.0).rho(25.0), 9.0);
        assert_eq!(Huber::new(10.0).rho(25.0), 25.0);
        assert_eq!(robust_cost(None, 25.0), 25.0);
    }
}
