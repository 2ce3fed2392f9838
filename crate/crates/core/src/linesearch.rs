//! Armijo's condition and the step-size searches built on it.
//!
//! Every search walks the grid `{beta^m * delta0 : m in Z}` by integer
//! exponent and accepts ties in Armijo's inequality.

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::GrowthFunction;
use crate::objective::Objective;
use crate::params::LineSearchParams;
use crate::vector::Vector;

/// A point together with `f` and `grad f` there.
#[derive(Clone, Debug)]
pub struct Evaluated {
    pub x: Vector,
    pub f: f64,
    pub grad: Vector,
    pub grad_norm_sq: f64,
}

impl Evaluated {
    /// Counted evaluation of `obj` at `x`.
    pub fn at(obj: &Objective, x: Vector) -> Result<Self> {
        let (f, grad) = obj.evaluate(&x)?;
        Ok(Self::from_parts(x, f, grad))
    }

    pub fn from_parts(x: Vector, f: f64, grad: Vector) -> Self {
        let grad_norm_sq = grad.norm_sq();
        Evaluated {
            x,
            f,
            grad,
            grad_norm_sq,
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad_norm_sq.sqrt()
    }

    /// `x - delta * grad`.
    pub fn step(&self, delta: f64) -> Vec<f64> {
        self.x.step(delta, &self.grad)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    Shrunk,
    Grew,
    Unchanged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub delta: f64,
    /// `m` with `delta == params.grid(m)`.
    pub exponent: i32,
    pub n_value_evals: u64,
    pub phase: Phase,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoCheck {
    pub holds: bool,
    /// `f` at the trial point was NaN or infinite.
    pub overflow: bool,
    pub f_trial: f64,
}

/// Evaluates `f(x - delta g) - f(x) <= -alpha * delta * ||g||^2` with one
/// value evaluation. A non-finite trial value fails the test and sets
/// `overflow`.
pub fn armijo_check(
    obj: &Objective,
    at: &Evaluated,
    delta: f64,
    alpha: f64,
) -> Result<ArmijoCheck> {
    let trial = at.step(delta);
    let f_trial = obj.value_at(&trial)?;
    if !f_trial.is_finite() {
        return Ok(ArmijoCheck {
            holds: false,
            overflow: true,
            f_trial,
        });
    }
    Ok(ArmijoCheck {
        holds: f_trial - at.f <= -alpha * delta * at.grad_norm_sq,
        overflow: false,
        f_trial,
    })
}

pub fn armijo_holds(obj: &Objective, at: &Evaluated, delta: f64, alpha: f64) -> Result<bool> {
    Ok(armijo_check(obj, at, delta, alpha)?.holds)
}

fn require_non_critical(at: &Evaluated, params: &LineSearchParams) -> Result<()> {
    let gn = at.grad_norm();
    if gn < params.grad_tol {
        return Err(Error::Usage(format!(
            "line search called at a critical point (||grad f|| = {gn:e} < {:e})",
            params.grad_tol
        )));
    }
    Ok(())
}

/// Shrinks from exponent `start` until Armijo holds.
fn shrink_from(
    obj: &Objective,
    at: &Evaluated,
    params: &LineSearchParams,
    start: i32,
    mut evals: u64,
) -> Result<(i32, u64)> {
    let last = i32::try_from(params.max_halvings).unwrap_or(i32::MAX);
    for m in start..=last {
        evals += 1;
        if armijo_holds(obj, at, params.grid(m), params.alpha)? {
            return Ok((m, evals));
        }
    }
    Err(Error::SearchExhausted {
        max_halvings: params.max_halvings,
    })
}

fn result(
    params: &LineSearchParams,
    exponent: i32,
    n_value_evals: u64,
    phase: Phase,
) -> SearchResult {
    SearchResult {
        delta: params.grid(exponent),
        exponent,
        n_value_evals,
        phase,
    }
}

/// Largest `beta^m * delta0`, `m = 0, 1, 2, ...`, satisfying Armijo's condition.
pub fn backtracking_search(
    obj: &Objective,
    at: &Evaluated,
    params: &LineSearchParams,
) -> Result<SearchResult> {
    require_non_critical(at, params)?;
    let (m, evals) = shrink_from(obj, at, params, 0, 0)?;
    let phase = if m == 0 {
        Phase::Unchanged
    } else {
        Phase::Shrunk
    };
    Ok(result(params, m, evals, phase))
}

/// Unbounded search: backtrack from `delta0` if Armijo fails there,
/// otherwise multiply by `1/beta` while Armijo still holds and the step stays
/// below `max(h(||grad f||), delta0)`.
pub fn growth_search(
    obj: &Objective,
    at: &Evaluated,
    params: &LineSearchParams,
    h: &GrowthFunction,
) -> Result<SearchResult> {
    require_non_critical(at, params)?;
    if !armijo_holds(obj, at, params.delta0, params.alpha)? {
        let (m, evals) = shrink_from(obj, at, params, 1, 1)?;
        return Ok(result(params, m, evals, Phase::Shrunk));
    }
    let cap = h.effective(at.grad_norm(), params.delta0)?;
    let mut m = 0;
    let mut evals = 1;
    loop {
        let next = params.grid(m - 1);
        if !(next <= cap) {
            break;
        }
        evals += 1;
        if !armijo_holds(obj, at, next, params.alpha)? {
            break;
        }
        m -= 1;
    }
    let phase = if m < 0 { Phase::Grew } else { Phase::Unchanged };
    Ok(result(params, m, evals, phase))
}

/// Grid exponent for a previous step size: the smallest `m >= 0` with
/// `beta^m * delta0 <= delta_prev`. Values outside `(0, delta0]` map to 0.
pub fn exponent_for(delta_prev: f64, params: &LineSearchParams) -> i32 {
    if !(delta_prev > 0.0 && delta_prev <= params.delta0) {
        warn!(
            "previous step {delta_prev} outside (0, {}]; clamping to delta0",
            params.delta0
        );
        return 0;
    }
    let last = i32::try_from(params.max_halvings).unwrap_or(i32::MAX);
    let tol = delta_prev * 1e-12;
    (0..last)
        .find(|&m| params.grid(m) <= delta_prev + tol)
        .unwrap_or(last)
}

/// Two-way search warm-started at `delta_prev` and capped at `delta0`.
pub fn two_way_search(
    obj: &Objective,
    at: &Evaluated,
    delta_prev: f64,
    params: &LineSearchParams,
) -> Result<SearchResult> {
    two_way_search_from(obj, at, exponent_for(delta_prev, params), params)
}

/// [`two_way_search`] keyed by the previous grid exponent.
pub fn two_way_search_from(
    obj: &Objective,
    at: &Evaluated,
    prev_exponent: i32,
    params: &LineSearchParams,
) -> Result<SearchResult> {
    require_non_critical(at, params)?;
    let start = prev_exponent.max(0);
    if !armijo_holds(obj, at, params.grid(start), params.alpha)? {
        let (m, evals) = shrink_from(obj, at, params, start + 1, 1)?;
        return Ok(result(params, m, evals, Phase::Shrunk));
    }
    let mut m = start;
    let mut evals = 1;
    while m > 0 {
        evals += 1;
        if !armijo_holds(obj, at, params.grid(m - 1), params.alpha)? {
            break;
        }
        m -= 1;
    }
    let phase = if m < start {
        Phase::Grew
    } else {
        Phase::Unchanged
    };
    Ok(result(params, m, evals, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half_square() -> Objective {
        Objective::new("q", 1, |x| 0.5 * x[0] * x[0], |x, g| g[0] = x[0])
    }

    fn quartic() -> Objective {
        Objective::new("q4", 1, |x| 0.25 * x[0].powi(4), |x, g| g[0] = x[0].powi(3))
    }

    fn at(obj: &Objective, x: f64) -> Evaluated {
        Evaluated::at(obj, Vector::new(vec![x]).unwrap()).unwrap()
    }

    // Brute-force oracle on the grid, independent of the search loops.
    fn armijo_direct(
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
        x: f64,
        delta: f64,
        alpha: f64,
    ) -> bool {
        let g = df(x);
        f(x - delta * g) - f(x) <= -alpha * delta * g * g
    }

    #[test]
    fn armijo_on_half_square() {
        let obj = half_square();
        let p = at(&obj, 2.0);
        assert!(armijo_holds(&obj, &p, 1.0, 0.5).unwrap());
        assert!(!armijo_holds(&obj, &p, 2.0, 0.5).unwrap());
    }

    #[test]
    fn armijo_vacuous_at_zero_gradient() {
        let obj = half_square();
        let p = at(&obj, 0.0);
        for d in [1e-3, 1.0, 1e6] {
            assert!(armijo_holds(&obj, &p, d, 0.5).unwrap());
        }
    }

    #[test]
    fn armijo_counts_one_value_eval() {
        let obj = half_square();
        let p = at(&obj, 2.0);
        let before = obj.counts();
        armijo_holds(&obj, &p, 1.0, 0.5).unwrap();
        assert_eq!(obj.counts().value, before.value + 1);
        assert_eq!(obj.counts().gradient, before.gradient);
    }

    #[test]
    fn armijo_overflow_is_false_with_flag() {
        let obj = half_square();
        let p = at(&obj, 2.0);
        let c = armijo_check(&obj, &p, 1e308, 0.5).unwrap();
        assert!(!c.holds);
        assert!(c.overflow);
    }

    #[test]
    fn backtracking_half_square() {
        let obj = half_square();
        let r = backtracking_search(&obj, &at(&obj, 2.0), &LineSearchParams::default()).unwrap();
        assert_eq!((r.delta, r.exponent, r.phase), (1.0, 0, Phase::Unchanged));
    }

    #[test]
    fn backtracking_quartic() {
        let f = |x: f64| 0.25 * x.powi(4);
        let df = |x: f64| x.powi(3);
        assert!(!armijo_direct(f, df, 1.0, 1.0, 0.5));
        assert!(!armijo_direct(f, df, 1.0, 0.5, 0.5));
        assert!(armijo_direct(f, df, 1.0, 0.25, 0.5));

        let obj = quartic();
        let r = backtracking_search(&obj, &at(&obj, 1.0), &LineSearchParams::default()).unwrap();
        assert_eq!((r.delta, r.exponent, r.n_value_evals), (0.25, 2, 3));
        assert_eq!(r.phase, Phase::Shrunk);
    }

    #[test]
    fn search_at_critical_point_is_rejected() {
        let obj = half_square();
        let p = LineSearchParams::default();
        let zero = at(&obj, 0.0);
        assert!(matches!(
            backtracking_search(&obj, &zero, &p),
            Err(Error::Usage(_))
        ));
        let h = GrowthFunction::default_for(1.0).unwrap();
        assert!(growth_search(&obj, &zero, &p, &h).is_err());
        assert!(two_way_search(&obj, &zero, 1.0, &p).is_err());
    }

    #[test]
    fn exhausted_search_reports_failure() {
        // Ascent direction everywhere: f decreases along +grad, never along -grad.
        let obj = Objective::new("liar", 1, |x| -x[0], |_, g| g[0] = -1.0);
        let bad = Objective::new("liar", 1, |x| x[0], |_, g| g[0] = -1.0);
        let p = LineSearchParams {
            max_halvings: 5,
            ..Default::default()
        };
        let ok = backtracking_search(&obj, &at(&obj, 0.0), &p).unwrap();
        assert_eq!(ok.delta, 1.0);
        let err = backtracking_search(&bad, &at(&bad, 0.0), &p).unwrap_err();
        assert!(matches!(err, Error::SearchExhausted { max_halvings: 5 }));
        assert_eq!(bad.counts().value, 1 + 6);
    }

    #[test]
    fn growth_falls_back_to_backtracking() {
        let obj = quartic();
        let h = GrowthFunction::default_for(1.0).unwrap();
        let r = growth_search(&obj, &at(&obj, 1.0), &LineSearchParams::default(), &h).unwrap();
        assert_eq!((r.delta, r.exponent, r.phase), (0.25, 2, Phase::Shrunk));
    }

    #[test]
    fn growth_on_flat_quartic_stops_at_cap() {
        let f = |x: f64| 0.25 * x.powi(4);
        let df = |x: f64| x.powi(3);
        for d in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
            assert!(armijo_direct(f, df, 0.1, d, 0.5), "oracle: Armijo at {d}");
        }
        let cap = 1.0_f64.max((0.1f64.powi(3)).powf(-0.5));
        assert!((16.0..32.0).contains(&cap));

        let obj = quartic();
        let h = GrowthFunction::custom(|t| t.powf(-0.5).max(1.0), 1e-12, "max(1, t^-1/2)").unwrap();
        let r = growth_search(&obj, &at(&obj, 0.1), &LineSearchParams::default(), &h).unwrap();
        assert_eq!((r.delta, r.exponent, r.phase), (16.0, -4, Phase::Grew));
    }

    #[test]
    fn growth_blocked_by_constant_cap() {
        let obj = half_square();
        let h = GrowthFunction::constant(1.0).unwrap();
        let r = growth_search(&obj, &at(&obj, 2.0), &LineSearchParams::default(), &h).unwrap();
        assert_eq!((r.delta, r.exponent, r.phase), (1.0, 0, Phase::Unchanged));
    }

    #[test]
    fn two_way_grows_to_cap() {
        let obj = half_square();
        let r = two_way_search(&obj, &at(&obj, 2.0), 0.25, &LineSearchParams::default()).unwrap();
        assert_eq!((r.delta, r.exponent, r.phase), (1.0, 0, Phase::Grew));
    }

    #[test]
    fn two_way_keeps_previous_on_quartic() {
        let obj = quartic();
        let r = two_way_search(&obj, &at(&obj, 1.0), 0.25, &LineSearchParams::default()).unwrap();
        assert_eq!((r.delta, r.exponent, r.phase), (0.25, 2, Phase::Unchanged));
    }

    #[test]
    fn two_way_at_delta0_is_unchanged() {
        let obj = half_square();
        let r = two_way_search(&obj, &at(&obj, 2.0), 1.0, &LineSearchParams::default()).unwrap();
        assert_eq!((r.delta, r.phase), (1.0, Phase::Unchanged));
    }

    #[test]
    fn two_way_clamps_out_of_range_previous() {
        let p = LineSearchParams::default();
        assert_eq!(exponent_for(5.0, &p), 0);
        assert_eq!(exponent_for(-1.0, &p), 0);
        assert_eq!(exponent_for(0.25, &p), 2);
        assert_eq!(exponent_for(0.3, &p), 2);
    }

    fn quartic_2d() -> Objective {
        Objective::new(
            "q4",
            2,
            |x| 0.25 * (x[0].powi(4) + x[1].powi(4)) + 0.5 * x[0] * x[1],
            |x, g| {
                g[0] = x[0].powi(3) + 0.5 * x[1];
                g[1] = x[1].powi(3) + 0.5 * x[0];
            },
        )
    }

    proptest! {
        #[test]
        fn searches_return_armijo_points_on_grid(
            x0 in -3.0f64..3.0,
            x1 in -3.0f64..3.0,
            alpha in 0.05f64..0.95,
            beta in 0.1f64..0.9,
            delta0 in 0.01f64..4.0,
            prev in 0.0f64..1.0,
        ) {
            let obj = quartic_2d();
            let params = LineSearchParams::new(alpha, beta, delta0).unwrap();
            let p = Evaluated::at(&obj, Vector::new(vec![x0, x1]).unwrap()).unwrap();
            prop_assume!(p.grad_norm() >= params.grad_tol);
            let h = GrowthFunction::default_for(delta0).unwrap();
            let results = [
                backtracking_search(&obj, &p, &params).unwrap(),
                growth_search(&obj, &p, &params, &h).unwrap(),
                two_way_search(&obj, &p, prev * delta0, &params).unwrap(),
            ];
            for r in results {
                prop_assert!(armijo_holds(&obj, &p, r.delta, alpha).unwrap());
                prop_assert_eq!(r.delta, params.grid(r.exponent));
                let pow = delta0 * beta.powi(r.exponent);
                prop_assert!((r.delta - pow).abs() <= 1e-12 * pow);
            }

            let basic = results[0];
            prop_assert!(basic.exponent >= 0 && basic.delta <= delta0);
            if basic.exponent >= 1 {
                prop_assert!(!armijo_holds(&obj, &p, params.grid(basic.exponent - 1), alpha).unwrap());
            }

            let grown = results[1];
            prop_assert!(grown.delta >= basic.delta);
            let cap = h.effective(p.grad_norm(), delta0).unwrap();
            prop_assert!(grown.delta <= cap.max(basic.delta));
            if grown.phase == Phase::Grew {
                let up = params.grid(grown.exponent - 1);
                prop_assert!(up > cap || !armijo_holds(&obj, &p, up, alpha).unwrap());
            }

            prop_assert!(results[2].delta <= delta0);
        }
    }
}
