//! Weight functions `w` defining the curve space norm
//! `|f(0)|^2 + int_0^inf w(x) |f'(x)|^2 dx`.
//!
//! A weight must satisfy `w(0) = 1`, be non-decreasing and have an
//! integrable reciprocal. Built-in families carry closed-form antiderivatives
//! where they exist; everything else falls back to quadrature.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const QUAD_TOL: f64 = 1e-14;

/// Lower bound `inf_x w'(x)/w(x)`, either exact or estimated from samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaW {
    pub value: f64,
    pub exact: bool,
}

#[derive(Clone)]
enum Family {
    Exponential { rho: f64 },
    Polynomial { q: f64 },
    PolynomialExponential { q: f64, rho: f64 },
    Custom { eval: ScalarFn, deriv: ScalarFn, label: String },
}

#[derive(Clone)]
pub struct WeightFunction {
    family: Family,
    inv_total: f64,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction")
            .field("family", &self.describe())
            .field("inv_integral_total", &self.inv_total)
            .finish()
    }
}

impl WeightFunction {
    /// `w(x) = exp(rho x)`.
    pub fn exponential(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidWeight(format!(
                "exponential rate must be positive, got {rho}"
            )));
        }
        Ok(Self::build(Family::Exponential { rho }))
    }

    /// `w(x) = (1 + x)^q`, which needs `q > 1` for `1/w` to be integrable.
    pub fn polynomial(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 1.0) {
            return Err(Error::InvalidWeight(format!(
                "polynomial exponent must exceed 1, got {q}"
            )));
        }
        Ok(Self::build(Family::Polynomial { q }))
    }

    /// `w(x) = (1 + x)^q exp(rho x)`; reduces to the pure families when one
    /// parameter vanishes.
    pub fn polynomial_exponential(q: f64, rho: f64) -> Result<Self> {
        if !(q.is_finite() && q >= 0.0 && rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidWeight(format!(
                "need q >= 0 and rho >= 0, got q = {q}, rho = {rho}"
            )));
        }
        if q == 0.0 {
            return Self::exponential(rho);
        }
        if rho == 0.0 {
            return Self::polynomial(q);
        }
        Ok(Self::build(Family::PolynomialExponential { q, rho }))
    }

    /// Arbitrary weight given by its value and derivative. All integrals are
    /// computed by quadrature and `alpha_w` is a sampled estimate.
    pub fn custom<F, D>(label: impl Into<String>, eval: F, deriv: D) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut w = WeightFunction {
            family: Family::Custom {
                eval: Arc::new(eval),
                deriv: Arc::new(deriv),
                label: label.into(),
            },
            inv_total: f64::NAN,
        };
        // shape checks first: quadrature of a non-integrable 1/w is expensive
        w.validate_shape()?;
        w.inv_total = w.compute_inv_total();
        w.validate()?;
        Ok(w)
    }

    fn build(family: Family) -> Self {
        let mut w = WeightFunction {
            family,
            inv_total: f64::NAN,
        };
        w.inv_total = w.compute_inv_total();
        w
    }

    pub fn describe(&self) -> String {
        match &self.family {
            Family::Exponential { rho } => format!("exp({rho} x)"),
            Family::Polynomial { q } => format!("(1+x)^{q}"),
            Family::PolynomialExponential { q, rho } => format!("(1+x)^{q} exp({rho} x)"),
            Family::Custom { label, .. } => format!("custom({label})"),
        }
    }

    /// `rho` for a pure exponential weight `exp(rho x)`.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self.family {
            Family::Exponential { rho } => Some(rho),
            _ => None,
        }
    }

    /// `q` for a pure polynomial weight `(1+x)^q`.
    pub fn polynomial_exponent(&self) -> Option<f64> {
        match self.family {
            Family::Polynomial { q } => Some(q),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.family {
            Family::Exponential { rho } => (rho * x).exp(),
            Family::Polynomial { q } => (1.0 + x).powf(*q),
            Family::PolynomialExponential { q, rho } => (1.0 + x).powf(*q) * (rho * x).exp(),
            Family::Custom { eval, .. } => eval(x),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match &self.family {
            Family::Exponential { rho } => rho * (rho * x).exp(),
            Family::Polynomial { q } => q * (1.0 + x).powf(q - 1.0),
            Family::PolynomialExponential { q, rho } => {
                (1.0 + x).powf(q - 1.0) * (rho * x).exp() * (q + rho * (1.0 + x))
            }
            Family::Custom { deriv, .. } => deriv(x),
        }
    }

    /// Whether `integral` and `cell_mass` are closed-form.
    pub fn has_exact_antiderivative(&self) -> bool {
        matches!(
            self.family,
            Family::Exponential { .. } | Family::Polynomial { .. }
        )
    }

    /// `W(x) = int_0^x w`.
    pub fn integral(&self, x: f64) -> f64 {
        match &self.family {
            Family::Exponential { rho } => (rho * x).exp_m1() / rho,
            Family::Polynomial { q } => ((1.0 + x).powf(q + 1.0) - 1.0) / (q + 1.0),
            _ => quadrature::integrate_from_zero(&|s| self.eval(s), x, QUAD_TOL),
        }
    }

    /// `int_a^b w`. Closed form for the pure families, one Simpson cell otherwise.
    pub fn cell_mass(&self, a: f64, b: f64) -> f64 {
        match &self.family {
            Family::Exponential { rho } => (rho * a).exp() * (rho * (b - a)).exp_m1() / rho,
            Family::Polynomial { q } => {
                ((1.0 + b).powf(q + 1.0) - (1.0 + a).powf(q + 1.0)) / (q + 1.0)
            }
            _ => (b - a) / 6.0 * (self.eval(a) + 4.0 * self.eval(0.5 * (a + b)) + self.eval(b)),
        }
    }

    /// `V(x) = int_0^x 1/w`.
    pub fn inv_integral(&self, x: f64) -> f64 {
        match &self.family {
            Family::Exponential { rho } => -(-rho * x).exp_m1() / rho,
            Family::Polynomial { q } => (1.0 - (1.0 + x).powf(1.0 - q)) / (q - 1.0),
            _ => quadrature::integrate_from_zero(&|s| 1.0 / self.eval(s), x, QUAD_TOL),
        }
    }

    /// `int_a^b 1/w`.
    pub fn inv_cell_mass(&self, a: f64, b: f64) -> f64 {
        match &self.family {
            Family::Exponential { rho } => {
                (-rho * a).exp() * -(-rho * (b - a)).exp_m1() / rho
            }
            Family::Polynomial { q } => {
                ((1.0 + a).powf(1.0 - q) - (1.0 + b).powf(1.0 - q)) / (q - 1.0)
            }
            _ => quadrature::adaptive_simpson(&|s| 1.0 / self.eval(s), a, b, QUAD_TOL),
        }
    }

    /// `int_x^inf 1/w`.
    pub fn inv_integral_tail(&self, x: f64) -> f64 {
        match &self.family {
            Family::Exponential { rho } => (-rho * x).exp() / rho,
            Family::Polynomial { q } => (1.0 + x).powf(1.0 - q) / (q - 1.0),
            _ => quadrature::integrate_half_line(&|s| 1.0 / self.eval(x + s), QUAD_TOL),
        }
    }

    /// `int_0^inf 1/w`.
    pub fn inv_integral_total(&self) -> f64 {
        self.inv_total
    }

    fn compute_inv_total(&self) -> f64 {
        match &self.family {
            Family::Exponential { rho } => 1.0 / rho,
            Family::Polynomial { q } => 1.0 / (q - 1.0),
            _ => quadrature::integrate_half_line(&|s| 1.0 / self.eval(s), QUAD_TOL),
        }
    }

    /// `inf_x w'(x)/w(x)`.
    pub fn alpha_w(&self) -> AlphaW {
        match &self.family {
            Family::Exponential { rho } => AlphaW { value: *rho, exact: true },
            // q/(1+x) decreases to 0
            Family::Polynomial { .. } => AlphaW { value: 0.0, exact: true },
            // q/(1+x) + rho decreases to rho
            Family::PolynomialExponential { rho, .. } => AlphaW { value: *rho, exact: true },
            Family::Custom { .. } => {
                let min = (0..=5000)
                    .map(|k| {
                        let x = k as f64 * 0.01;
                        self.deriv(x) / self.eval(x)
                    })
                    .fold(f64::INFINITY, f64::min);
                AlphaW {
                    value: if min > 0.0 { 0.99 * min } else { min },
                    exact: false,
                }
            }
        }
    }

    /// Checks the defining properties on a sample grid.
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if !(self.inv_total.is_finite() && self.inv_total > 0.0) {
            return Err(Error::InvalidWeight(format!(
                "1/w is not integrable (total {})",
                self.inv_total
            )));
        }
        Ok(())
    }

    fn validate_shape(&self) -> Result<()> {
        let w0 = self.eval(0.0);
        if (w0 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeight(format!("w(0) = {w0}, expected 1")));
        }
        for k in 0..=2000 {
            let x = k as f64 * 0.025;
            let (v, d) = (self.eval(x), self.deriv(x));
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidWeight(format!("w({x}) = {v} is not positive")));
            }
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::InvalidWeight(format!("w'({x}) = {d} is negative")));
            }
        }
        // x / w(x) must vanish for 1/w to be integrable
        let far = 1e6;
        if !(far / self.eval(far) < 1.0) {
            return Err(Error::InvalidWeight("1/w does not decay fast enough to be integrable".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-5 * (1.0 + x);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn families() -> Vec<WeightFunction> {
        vec![
            WeightFunction::exponential(1.0).unwrap(),
            WeightFunction::exponential(0.5).unwrap(),
            WeightFunction::polynomial(3.0).unwrap(),
            WeightFunction::polynomial_exponential(2.0, 0.5).unwrap(),
            WeightFunction::custom("cosh", |x: f64| x.cosh() + x.sinh(), |x: f64| x.sinh() + x.cosh())
                .unwrap(),
        ]
    }

    #[test]
    fn antiderivatives_are_consistent_with_eval() {
        for w in families() {
            w.validate().unwrap();
            for &x in &[0.3, 1.0, 2.7, 6.0] {
                let dw = central_diff(|s| w.integral(s), x);
                assert!(
                    (dw - w.eval(x)).abs() <= 1e-6 * w.eval(x),
                    "{}: W'({x}) = {dw} vs w = {}",
                    w.describe(),
                    w.eval(x)
                );
                let dv = central_diff(|s| w.inv_integral(s), x);
                assert!((dv - 1.0 / w.eval(x)).abs() <= 1e-6 / w.eval(x));
                let dd = central_diff(|s| w.eval(s), x);
                assert!((dd - w.deriv(x)).abs() <= 1e-6 * w.deriv(x).max(1.0));
            }
        }
    }

    #[test]
    fn totals_and_tails_add_up() {
        for w in families() {
            for &x in &[0.0, 0.5, 3.0] {
                let sum = w.inv_integral(x) + w.inv_integral_tail(x);
                assert!(
                    (sum - w.inv_integral_total()).abs() < 1e-9,
                    "{}: {sum} vs {}",
                    w.describe(),
                    w.inv_integral_total()
                );
            }
        }
    }

    #[test]
    fn cell_mass_matches_integral_difference() {
        for w in families() {
            let (a, b) = (1.25, 1.25 + 1.0 / 64.0);
            let direct = w.integral(b) - w.integral(a);
            assert!((w.cell_mass(a, b) - direct).abs() <= 1e-9 * direct);
            let inv = w.inv_integral(b) - w.inv_integral(a);
            assert!((w.inv_cell_mass(a, b) - inv).abs() <= 1e-9 * inv.abs().max(1e-3));
        }
    }

    #[test]
    fn alpha_for_exponential_is_rate() {
        let a = WeightFunction::exponential(1.7).unwrap().alpha_w();
        assert_eq!(a, AlphaW { value: 1.7, exact: true });
        let est = families()[4].alpha_w();
        assert!(!est.exact);
        assert!((est.value - 0.99).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(WeightFunction::exponential(0.0).is_err());
        assert!(WeightFunction::polynomial(1.0).is_err());
        assert!(WeightFunction::custom("flat", |_| 1.0, |_| 0.0).is_err());
        assert!(WeightFunction::custom("decreasing", |x: f64| (-x).exp(), |x: f64| -(-x).exp()).is_err());
    }
}
