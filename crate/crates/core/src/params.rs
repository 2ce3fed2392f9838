use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of Armijo's condition and the step grid `{beta^m * delta0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearchParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta0: f64,
    /// Gradient norms below this are treated as critical.
    pub grad_tol: f64,
    /// Largest shrink exponent `m` a search may try.
    pub max_halvings: u32,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams {
            alpha: 0.5,
            beta: 0.5,
            delta0: 1.0,
            grad_tol: 1e-10,
            max_halvings: 60,
        }
    }
}

impl LineSearchParams {
    pub fn new(alpha: f64, beta: f64, delta0: f64) -> Result<Self> {
        LineSearchParams {
            alpha,
            beta,
            delta0,
            ..Default::default()
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(
                "alpha",
                format!("{} not in (0, 1)", self.alpha),
            ));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::param("beta", format!("{} not in (0, 1)", self.beta)));
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::param(
                "delta0",
                format!("{} is not positive", self.delta0),
            ));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::param(
                "grad_tol",
                format!("{} is not positive", self.grad_tol),
            ));
        }
        if self.max_halvings == 0 {
            return Err(Error::param("max_halvings", "must be positive"));
        }
        Ok(self)
    }

    /// `beta^m * delta0`, built by repeated multiplication (or division for
    /// negative `m`) so the same exponent always yields the same bits.
    pub fn grid(&self, exponent: i32) -> f64 {
        let mut delta = self.delta0;
        if exponent >= 0 {
            for _ in 0..exponent {
                delta *= self.beta;
            }
        } else {
            for _ in 0..exponent.unsigned_abs() {
                delta /= self.beta;
            }
        }
        delta
    }
}
