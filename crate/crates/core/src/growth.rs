//! Caps `h` on the step size of the unbounded search.
//!
//! Any cap must satisfy `t * h(t) -> 0` as `t -> 0`, so that steps taken near
//! a critical point still shrink. [`GrowthFunction::custom`] checks a finite
//! witness of that limit on the grid `t = 1e-1, ..., 1e-12`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Product bound `t * h(t)` must respect below the declared threshold.
pub const VANISHING_PRODUCT_BOUND: f64 = 1e-6;

/// Log grid `1e-1, 1e-2, ..., 1e-12` on which growth functions are checked.
pub fn log_grid() -> impl Iterator<Item = f64> {
    (1..=12).map(|k| 10f64.powi(-k))
}

#[derive(Clone)]
pub enum GrowthKind {
    /// `c * t^(-gamma)` with `0 < gamma < 1`.
    PowerLaw {
        c: f64,
        gamma: f64,
    },
    Constant(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

#[derive(Clone)]
pub struct GrowthFunction {
    kind: GrowthKind,
    description: String,
    threshold: f64,
}

impl GrowthFunction {
    pub fn power_law(c: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidGrowth(format!(
                "power law needs C > 0, got {c}"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidGrowth(format!(
                "power law needs gamma in (0, 1), got {gamma}"
            )));
        }
        // t * c * t^-gamma <= bound  <=>  t <= (bound / c)^(1 / (1 - gamma))
        let threshold = (VANISHING_PRODUCT_BOUND / c).powf(1.0 / (1.0 - gamma));
        Ok(GrowthFunction {
            kind: GrowthKind::PowerLaw { c, gamma },
            description: format!("{c} * t^-{gamma}"),
            threshold,
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidGrowth(format!(
                "constant cap must be positive, got {c}"
            )));
        }
        Ok(GrowthFunction {
            kind: GrowthKind::Constant(c),
            description: format!("constant {c}"),
            threshold: VANISHING_PRODUCT_BOUND / c,
        })
    }

    /// The harness default, `delta0 * t^-0.5`.
    pub fn default_for(delta0: f64) -> Result<Self> {
        Self::power_law(delta0, 0.5)
    }

    /// Wraps an arbitrary cap. `threshold` is the declared `t*` below which
    /// `t * h(t) <= 1e-6`; the claim is checked on the log grid together with
    /// positivity and finiteness of `h`.
    pub fn custom(
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        threshold: f64,
        description: impl Into<String>,
    ) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidGrowth(format!(
                "declared threshold must be positive, got {threshold}"
            )));
        }
        let mut checked = 0;
        for t in log_grid() {
            let v = h(t);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidGrowth(format!(
                    "h({t:e}) = {v} is not a positive number"
                )));
            }
            if t <= threshold {
                checked += 1;
                // Equality passes; the slack absorbs rounding in t * h(t).
                if t * v > VANISHING_PRODUCT_BOUND * (1.0 + 1e-9) {
                    return Err(Error::InvalidGrowth(format!(
                        "t * h(t) = {:e} at t = {t:e} does not vanish",
                        t * v
                    )));
                }
            }
        }
        if checked == 0 {
            return Err(Error::InvalidGrowth(format!(
                "threshold {threshold:e} lies below the check grid"
            )));
        }
        Ok(GrowthFunction {
            kind: GrowthKind::Custom(Arc::new(h)),
            description: description.into(),
            threshold,
        })
    }

    pub fn kind(&self) -> &GrowthKind {
        &self.kind
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// `t*` such that `t * h(t) <= 1e-6` for `t <= t*`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `h(t)` for `t > 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::param(
                "t",
                format!("growth cap needs t > 0, got {t}"),
            ));
        }
        let v = match &self.kind {
            GrowthKind::PowerLaw { c, gamma } => c * t.powf(-gamma),
            GrowthKind::Constant(c) => *c,
            GrowthKind::Custom(h) => h(t),
        };
        if !(v > 0.0) || v.is_nan() {
            return Err(Error::InvalidGrowth(format!("h({t:e}) = {v}")));
        }
        Ok(v)
    }

    /// `max(h(t), delta0)`: never below the largest backtracking step.
    pub fn effective(&self, t: f64, delta0: f64) -> Result<f64> {
        if !(delta0 > 0.0) {
            return Err(Error::param("delta0", format!("{delta0} is not positive")));
        }
        Ok(self.eval(t)?.max(delta0))
    }
}

impl fmt::Debug for GrowthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrowthFunction({})", self.description)
    }
}

/// Config-file form, e.g. `{ "kind": "power_law", "C": 1.0, "gamma": 0.5 }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GrowthSpec {
    PowerLaw {
        #[serde(rename = "C")]
        c: f64,
        gamma: f64,
    },
    Constant {
        #[serde(alias = "C")]
        c: f64,
    },
}

impl GrowthSpec {
    pub fn build(&self) -> Result<GrowthFunction> {
        match *self {
            GrowthSpec::PowerLaw { c, gamma } => GrowthFunction::power_law(c, gamma),
            GrowthSpec::Constant { c } => GrowthFunction::constant(c),
        }
    }
}
