use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vector::Vector;

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Writes the gradient at the first argument into the second.
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type PointFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;

/// Local Lipschitz data: on the ball `B(x, r(x))` the gradient is
/// Lipschitz with constant `L(x)`.
#[derive(Clone)]
pub struct LocalLipschitz {
    radius: PointFn,
    constant: PointFn,
}

impl LocalLipschitz {
    pub fn new(
        radius: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        constant: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
    ) -> Self {
        LocalLipschitz {
            radius: Arc::new(radius),
            constant: Arc::new(constant),
        }
    }

    /// Returns `(r(x), L(x))`, both required to be finite and positive.
    pub fn at(&self, x: &Vector) -> Result<(f64, f64)> {
        let r = (self.radius)(x);
        let l = (self.constant)(x);
        if !(r > 0.0 && r.is_finite() && l > 0.0 && l.is_finite()) {
            return Err(Error::NonFinite(format!(
                "Lipschitz data at {x} must be positive and finite, got r={r}, L={l}"
            )));
        }
        Ok((r, l))
    }
}

impl fmt::Debug for LocalLipschitz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LocalLipschitz { .. }")
    }
}

/// What is known analytically about an objective.
#[derive(Clone, Debug, Default)]
pub struct KnownAnalysis {
    pub critical_points: Vec<Vector>,
    pub lipschitz: Option<LocalLipschitz>,
    pub global_min: Option<f64>,
    pub unbounded_below: bool,
}

impl KnownAnalysis {
    /// Closest listed critical point to `x`, with its distance.
    pub fn nearest_critical(&self, x: &Vector) -> Option<(Vector, f64)> {
        self.critical_points
            .iter()
            .filter(|c| c.dim() == x.dim())
            .map(|c| (c.clone(), c.distance(x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub value: u64,
    pub gradient: u64,
}

/// A differentiable cost function with counted access to `f` and `grad f`.
///
/// Counters live in a `Cell`, so an `Objective` is owned by one run at a time.
pub struct Objective {
    name: String,
    dim: usize,
    value_fn: ValueFn,
    gradient_fn: GradientFn,
    counts: Cell<EvalCounts>,
    analysis: Option<KnownAnalysis>,
}

impl Objective {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        assert!(dim >= 1, "objective dimension must be positive");
        Objective {
            name: name.into(),
            dim,
            value_fn: Arc::new(value),
            gradient_fn: Arc::new(gradient),
            counts: Cell::new(EvalCounts::default()),
            analysis: None,
        }
    }

    pub fn with_analysis(mut self, analysis: KnownAnalysis) -> Self {
        self.analysis = Some(analysis);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn analysis(&self) -> Option<&KnownAnalysis> {
        self.analysis.as_ref()
    }

    pub fn lipschitz(&self) -> Option<&LocalLipschitz> {
        self.analysis.as_ref().and_then(|a| a.lipschitz.as_ref())
    }

    pub fn counts(&self) -> EvalCounts {
        self.counts.get()
    }

    pub fn reset_counts(&self) {
        self.counts.set(EvalCounts::default());
    }

    /// Same functions and metadata, counters at zero.
    pub fn fresh(&self) -> Self {
        Objective {
            counts: Cell::new(EvalCounts::default()),
            ..self.clone()
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// One counted value evaluation. The result may be non-finite; callers
    /// at trial points decide what that means.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut c = self.counts.get();
        c.value += 1;
        self.counts.set(c);
        Ok((self.value_fn)(x))
    }

    /// One counted gradient evaluation.
    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x.dim())?;
        let mut c = self.counts.get();
        c.gradient += 1;
        self.counts.set(c);
        let mut g = vec![0.0; self.dim];
        (self.gradient_fn)(x.as_slice(), &mut g);
        Vector::new(g).map_err(|e| Error::NonFinite(format!("gradient at {x}: {e}")))
    }

    /// `(f(x), grad f(x))`, counting one value and one gradient evaluation.
    pub fn evaluate(&self, x: &Vector) -> Result<(f64, Vector)> {
        let fx = self.value_at(x.as_slice())?;
        let g = self.gradient(x)?;
        if !fx.is_finite() {
            return Err(Error::NonFinite(format!("f({x}) = {fx}")));
        }
        Ok((fx, g))
    }

    /// Uncounted value, for audits and finite differences.
    pub fn peek_value(&self, x: &[f64]) -> f64 {
        (self.value_fn)(x)
    }

    /// Uncounted gradient, for audits and finite differences.
    pub fn peek_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        (self.gradient_fn)(x, &mut g);
        g
    }
}

impl Clone for Objective {
    fn clone(&self) -> Self {
        Objective {
            name: self.name.clone(),
            dim: self.dim,
            value_fn: Arc::clone(&self.value_fn),
            gradient_fn: Arc::clone(&self.gradient_fn),
            counts: self.counts.clone(),
            analysis: self.analysis.clone(),
        }
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("counts", &self.counts.get())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square(dim: usize) -> Objective {
        Objective::new(
            "half-square",
            dim,
            |x| 0.5 * x.iter().map(|c| c * c).sum::<f64>(),
            |x, g| g.copy_from_slice(x),
        )
    }

    #[test]
    fn evaluate_quadratic() {
        let obj = half_square(2);
        let (f, g) = obj.evaluate(&Vector::new(vec![2.0, 0.0]).unwrap()).unwrap();
        assert_eq!(f, 2.0);
        assert_eq!(g.as_slice(), &[2.0, 0.0]);
        assert_eq!(
            obj.counts(),
            EvalCounts {
                value: 1,
                gradient: 1
            }
        );
    }

    #[test]
    fn evaluate_quartic() {
        let obj = Objective::new("q", 1, |x| 0.25 * x[0].powi(4), |x, g| g[0] = x[0].powi(3));
        let (f, g) = obj.evaluate(&Vector::new(vec![1.0]).unwrap()).unwrap();
        assert_eq!((f, g[0]), (0.25, 1.0));
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let obj = half_square(2);
        let err = obj.evaluate(&Vector::zeros(3)).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                got: 3
            }
        ));
        assert_eq!(obj.counts(), EvalCounts::default());
    }

    #[test]
    fn non_finite_output_is_flagged() {
        let obj = Objective::new(
            "blowup",
            1,
            |x| 1.0 / x[0],
            |x, g| g[0] = -1.0 / (x[0] * x[0]),
        );
        let err = obj.evaluate(&Vector::zeros(1)).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn fresh_resets_counts() {
        let obj = half_square(1);
        obj.value_at(&[1.0]).unwrap();
        assert_eq!(obj.counts().value, 1);
        assert_eq!(obj.fresh().counts().value, 0);
        assert_eq!(obj.clone().counts().value, 1);
    }
}
