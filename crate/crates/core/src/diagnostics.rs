//! Post-run audits of a [`Trace`].
//!
//! Each check is recomputed from the trace plus objective metadata, never from
//! driver state:
//!
//! * every line-searched step satisfies Armijo's inequality and `f` descends;
//! * step norms shrink (first vs last decile) unless `f -> -inf`;
//! * partial sums `S_n = sum_j delta_j ||grad f(x_j)||^2` level off;
//! * on objectives with local Lipschitz data, searched steps respect
//!   `delta >= min(beta / L(x), beta r(x) / ||grad f(x)||, delta0)`;
//! * hybrid runs backtrack at least once in every `N + 1` consecutive steps.

use serde::Serialize;

use crate::drivers::{RunConfig, Scheme};
use crate::error::{Error, Result};
use crate::objective::{EvalCounts, Objective};
use crate::params::LineSearchParams;
use crate::trace::{Mode, Termination, Trace};
use crate::vector::Vector;

/// Slack on Armijo's inequality, relative to `max(1, |f(x_n)|)`.
pub const ARMIJO_SLACK: f64 = 1e-12;
/// Slack on the step-size lower bound.
pub const LOWER_BOUND_SLACK: f64 = 1e-12;
/// Runs shorter than this are too short for the trend witnesses.
pub const WITNESS_MIN_STEPS: usize = 50;
/// Last-decile mean step norm must fall below this on converged runs.
pub const STEP_NORM_LIMIT: f64 = 1e-6;
/// Largest share of `S_N` allowed in the last decile of a converged run.
pub const TAIL_FRACTION_LIMIT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepTrend {
    pub first_decile_mean: f64,
    pub last_decile_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NearestCritical {
    pub point: Vector,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremAudit {
    pub steps: usize,
    pub armijo_ok: bool,
    pub descent_ok: bool,
    pub step_norm_trend: StepTrend,
    pub partial_sum_tail_fraction: f64,
    pub final_grad_norm: Option<f64>,
    pub nearest_known_critical: Option<NearestCritical>,
    pub delta_lower_bound_ok: Option<bool>,
    pub hybrid_window_ok: Option<bool>,
    pub termination: Termination,
}

impl TheoremAudit {
    /// Step-norm witness: `None` when the run is not a converged run of at
    /// least [`WITNESS_MIN_STEPS`] steps.
    pub fn step_norm_witness(&self) -> Option<bool> {
        (self.termination == Termination::CriticalPoint && self.steps >= WITNESS_MIN_STEPS).then(
            || {
                let t = self.step_norm_trend;
                t.last_decile_mean < t.first_decile_mean && t.last_decile_mean < STEP_NORM_LIMIT
            },
        )
    }

    /// Partial-sum witness under the same applicability rule.
    pub fn partial_sum_witness(&self) -> Option<bool> {
        (self.termination == Termination::CriticalPoint && self.steps >= WITNESS_MIN_STEPS)
            .then_some(self.partial_sum_tail_fraction < TAIL_FRACTION_LIMIT)
    }
}

fn decile_len(n: usize) -> usize {
    (n / 10).max(1)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean step norm over the first and last tenth of the records.
pub fn step_norm_trend(trace: &Trace) -> StepTrend {
    let n = trace.len();
    if n == 0 {
        return StepTrend {
            first_decile_mean: 0.0,
            last_decile_mean: 0.0,
        };
    }
    let k = decile_len(n);
    StepTrend {
        first_decile_mean: mean(trace.records[..k].iter().map(|r| r.step_norm)),
        last_decile_mean: mean(trace.records[n - k..].iter().map(|r| r.step_norm)),
    }
}

/// `S_n = sum_{j <= n} delta_j ||grad f(x_j)||^2`.
pub fn partial_sums(trace: &Trace) -> Vec<f64> {
    trace
        .records
        .iter()
        .scan(0.0, |s, r| {
            *s += r.delta * r.grad_norm * r.grad_norm;
            Some(*s)
        })
        .collect()
}

/// Share of `S_N` contributed by the last tenth of the steps.
pub fn partial_sum_tail_fraction(trace: &Trace) -> f64 {
    let sums = partial_sums(trace);
    let Some(&total) = sums.last() else {
        return 0.0;
    };
    if total == 0.0 {
        return 0.0;
    }
    let k = decile_len(sums.len());
    let head = if sums.len() > k {
        sums[sums.len() - k - 1]
    } else {
        0.0
    };
    (total - head) / total
}

/// Indices of line-searched records whose step breaks Armijo's inequality.
pub fn armijo_violations(trace: &Trace, alpha: f64) -> Vec<usize> {
    trace
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.mode != Mode::Standard)
        .filter_map(|(i, r)| {
            let next = trace.next_f(i)?;
            let bound = -alpha * r.delta * r.grad_norm * r.grad_norm
                + ARMIJO_SLACK * r.f_val.abs().max(1.0);
            (next - r.f_val > bound).then_some(i)
        })
        .collect()
}

fn descent_holds(trace: &Trace) -> bool {
    trace
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.mode != Mode::Standard)
        .all(|(i, r)| trace.next_f(i).is_none_or(|next| next <= r.f_val))
}

/// `min(beta / L, beta r / ||g||, delta0)`.
pub fn step_lower_bound(params: &LineSearchParams, r: f64, l: f64, grad_norm: f64) -> f64 {
    (params.beta / l)
        .min(params.beta * r / grad_norm)
        .min(params.delta0)
}

/// Whether every searched step (modes Backtrack and Growth) meets the local
/// Lipschitz lower bound. `None` without Lipschitz data.
pub fn delta_lower_bound_ok(
    trace: &Trace,
    obj: &Objective,
    params: &LineSearchParams,
) -> Option<bool> {
    let lip = obj.lipschitz()?;
    Some(
        trace
            .records
            .iter()
            .filter(|r| matches!(r.mode, Mode::Backtrack | Mode::Growth))
            .all(|r| match lip.at(&r.x) {
                Ok((radius, l)) => {
                    r.delta >= step_lower_bound(params, radius, l, r.grad_norm) - LOWER_BOUND_SLACK
                }
                Err(_) => false,
            }),
    )
}

/// Every window of `period + 1` consecutive records holds a Backtrack step.
pub fn hybrid_window_ok(trace: &Trace, period: usize) -> bool {
    let w = period + 1;
    if trace.len() < w {
        return trace.is_empty() || trace.records.iter().any(|r| r.mode == Mode::Backtrack);
    }
    trace
        .records
        .windows(w)
        .all(|win| win.iter().any(|r| r.mode == Mode::Backtrack))
}

/// Audits a finished run. Pure in `(trace, obj metadata, cfg)`.
pub fn audit(trace: &Trace, obj: &Objective, cfg: &RunConfig) -> TheoremAudit {
    TheoremAudit {
        steps: trace.len(),
        armijo_ok: armijo_violations(trace, cfg.params.alpha).is_empty(),
        descent_ok: descent_holds(trace),
        step_norm_trend: step_norm_trend(trace),
        partial_sum_tail_fraction: partial_sum_tail_fraction(trace),
        final_grad_norm: trace.final_grad_norm,
        nearest_known_critical: obj
            .analysis()
            .and_then(|a| a.nearest_critical(&trace.final_x))
            .map(|(point, distance)| NearestCritical { point, distance }),
        delta_lower_bound_ok: delta_lower_bound_ok(trace, obj, &cfg.params),
        hybrid_window_ok: match cfg.scheme {
            Scheme::Hybrid { period } => Some(hybrid_window_ok(trace, period)),
            _ => None,
        },
        termination: trace.termination,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub scheme: String,
    /// First `n` with the target predicate true at `x_n`; `None` if never.
    pub iters_to_target: Option<usize>,
    pub value_evals: u64,
    pub gradient_evals: u64,
    pub termination: Termination,
}

/// Iterations to reach `target`, plus evaluation totals, per scheme.
pub fn compare(
    traces: &[(String, Trace)],
    target: impl Fn(&Vector) -> bool,
) -> Result<Vec<ComparisonRow>> {
    if let Some((_, first)) = traces.first() {
        for (label, t) in traces {
            if t.objective != first.objective || t.x0 != first.x0 {
                return Err(Error::Usage(format!(
                    "trace `{label}` ({} from {}) does not match {} from {}",
                    t.objective, t.x0, first.objective, first.x0
                )));
            }
        }
    }
    Ok(traces
        .iter()
        .map(|(label, t)| {
            let EvalCounts { value, gradient } = t.total_evals();
            ComparisonRow {
                scheme: label.clone(),
                iters_to_target: (0..=t.len()).find(|&n| t.point(n).is_some_and(&target)),
                value_evals: value,
                gradient_evals: gradient,
                termination: t.termination,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::lookup;
    use crate::drivers::run;
    use crate::growth::GrowthFunction;

    fn v(x: f64) -> Vector {
        Vector::new(vec![x]).unwrap()
    }

    #[test]
    fn quadratic_one_step_audit() {
        let obj = lookup("quadratic-1d").unwrap().objective;
        let cfg = RunConfig::new(Scheme::Backtracking, v(2.0));
        let t = run(&obj, &cfg).unwrap();
        let a = audit(&t, &obj, &cfg);
        assert!(a.armijo_ok && a.descent_ok);
        assert_eq!(a.final_grad_norm, Some(0.0));
        let near = a.nearest_known_critical.unwrap();
        assert_eq!((near.point.as_slice(), near.distance), (&[0.0][..], 0.0));
        assert_eq!(a.delta_lower_bound_ok, Some(true));
        assert_eq!(a.hybrid_window_ok, None);
    }

    #[test]
    fn linear_divergence_keeps_constant_steps() {
        let entry = lookup("linear").unwrap();
        let obj = entry.objective.clone();
        let cfg = entry.run_config(Scheme::Backtracking, v(0.0));
        let t = run(&obj, &cfg).unwrap();
        let a = audit(&t, &obj, &cfg);
        assert!(a.termination.is_diverging());
        assert_eq!(a.step_norm_trend.first_decile_mean, 1.0);
        assert_eq!(a.step_norm_trend.last_decile_mean, 1.0);
        assert!(a.armijo_ok);
        assert_eq!(a.step_norm_witness(), None);
    }

    #[test]
    fn empty_trace_is_vacuously_fine() {
        let obj = lookup("rosenbrock").unwrap().objective;
        let cfg = RunConfig::new(
            Scheme::Hybrid { period: 4 },
            Vector::new(vec![1.0, 1.0]).unwrap(),
        );
        let t = run(&obj, &cfg).unwrap();
        assert!(t.is_empty());
        let a = audit(&t, &obj, &cfg);
        assert!(a.armijo_ok && a.descent_ok);
        assert_eq!(a.delta_lower_bound_ok, Some(true));
        assert_eq!(a.hybrid_window_ok, Some(true));
        assert_eq!(a.partial_sum_tail_fraction, 0.0);
    }

    #[test]
    fn audit_is_repeatable() {
        let obj = lookup("quartic-1d").unwrap().objective;
        let cfg = RunConfig::new(Scheme::Hybrid { period: 3 }, v(1.0)).with_max_iters(500);
        let t = run(&obj, &cfg).unwrap();
        assert_eq!(audit(&t, &obj, &cfg), audit(&t, &obj, &cfg));
        assert_eq!(audit(&t, &obj, &cfg).hybrid_window_ok, Some(true));
    }

    #[test]
    fn tampered_trace_fails_armijo() {
        let obj = lookup("quartic-1d").unwrap().objective;
        let cfg = RunConfig::new(Scheme::Backtracking, v(1.0)).with_max_iters(20);
        let mut t = run(&obj, &cfg).unwrap();
        t.records[3].delta *= 8.0;
        assert_eq!(armijo_violations(&t, 0.5), vec![3]);
        t.records[5].mode = Mode::Reuse;
        assert!(!hybrid_window_ok(&t, 0));
    }

    #[test]
    fn partial_sums_are_monotone() {
        let obj = lookup("double-well").unwrap().objective;
        let cfg = RunConfig::new(Scheme::Backtracking, v(1.7));
        let t = run(&obj, &cfg).unwrap();
        let s = partial_sums(&t);
        assert!(s.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn compare_quadratic_all_tie() {
        let entry = lookup("quadratic-1d").unwrap();
        let schemes = [
            Scheme::Backtracking,
            Scheme::Unbounded(GrowthFunction::default_for(1.0).unwrap()),
            Scheme::TwoWay,
            Scheme::Hybrid { period: 5 },
        ];
        let traces: Vec<_> = schemes
            .iter()
            .map(|s| {
                let obj = entry.objective.fresh();
                (
                    s.to_string(),
                    run(&obj, &RunConfig::new(s.clone(), v(2.0))).unwrap(),
                )
            })
            .collect();
        let rows = compare(&traces, |x| x[0].abs() < 1e-8).unwrap();
        assert!(rows.iter().all(|r| r.iters_to_target == Some(1)));
    }

    #[test]
    fn compare_divergent_standard_never_reaches() {
        let obj = lookup("quadratic-1d").unwrap().objective;
        let t = run(
            &obj,
            &RunConfig::new(Scheme::Standard { delta: 2.5 }, v(1.0)),
        )
        .unwrap();
        let rows = compare(&[("standard".into(), t)], |x| x[0].abs() < 1e-3).unwrap();
        assert_eq!(rows[0].iters_to_target, None);
    }

    #[test]
    fn compare_rejects_mismatched_runs() {
        let obj = lookup("quadratic-1d").unwrap().objective;
        let a = run(&obj, &RunConfig::new(Scheme::Backtracking, v(2.0))).unwrap();
        let b = run(&obj, &RunConfig::new(Scheme::Backtracking, v(1.0))).unwrap();
        assert!(compare(&[("a".into(), a), ("b".into(), b)], |_| true).is_err());
    }
}
