//! Iteration loops for each step-size scheme.
//!
//! All drivers share one loop: evaluate at `x_n`, stop if the point is
//! critical, diverging or the budget is spent, otherwise ask the scheme for a
//! step size and move to `x_n - delta_n * grad f(x_n)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::growth::GrowthFunction;
use crate::linesearch::{self, Evaluated, Phase, SearchResult};
use crate::objective::{EvalCounts, Objective};
use crate::params::LineSearchParams;
use crate::trace::{Mode, StepRecord, Termination, Trace};
use crate::vector::Vector;

pub const DEFAULT_MAX_ITERS: usize = 100_000;
pub const DEFAULT_DIVERGENCE_X: f64 = 1e8;
pub const DEFAULT_DIVERGENCE_F: f64 = -1e12;

#[derive(Clone, Debug)]
pub enum Scheme {
    /// Fixed step size, no line search.
    Standard {
        delta: f64,
    },
    Backtracking,
    Unbounded(GrowthFunction),
    TwoWay,
    /// Backtrack at every step `n` with `n % period == 0`, reuse the previous
    /// step size otherwise unless it fails Armijo's condition.
    Hybrid {
        period: usize,
    },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Standard { .. } => "standard",
            Scheme::Backtracking => "backtracking",
            Scheme::Unbounded(_) => "unbounded",
            Scheme::TwoWay => "twoway",
            Scheme::Hybrid { .. } => "hybrid",
        }
    }

    pub fn is_armijo(&self) -> bool {
        !matches!(self, Scheme::Standard { .. })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Standard { delta } => write!(f, "standard:{delta}"),
            Scheme::Hybrid { period } => write!(f, "hybrid:{period}"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub params: LineSearchParams,
    pub max_iters: usize,
    pub x0: Vector,
    pub divergence_x_threshold: f64,
    pub divergence_f_threshold: f64,
}

impl RunConfig {
    pub fn new(scheme: Scheme, x0: Vector) -> Self {
        RunConfig {
            scheme,
            params: LineSearchParams::default(),
            max_iters: DEFAULT_MAX_ITERS,
            x0,
            divergence_x_threshold: DEFAULT_DIVERGENCE_X,
            divergence_f_threshold: DEFAULT_DIVERGENCE_F,
        }
    }

    pub fn with_params(mut self, params: LineSearchParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self, obj: &Objective) -> Result<()> {
        self.params.validated()?;
        if self.x0.dim() != obj.dim() {
            return Err(Error::DimensionMismatch {
                expected: obj.dim(),
                got: self.x0.dim(),
            });
        }
        if !(self.divergence_x_threshold > 0.0) {
            return Err(Error::param("divergence_x_threshold", "must be positive"));
        }
        if self.divergence_f_threshold.is_nan() {
            return Err(Error::param("divergence_f_threshold", "is NaN"));
        }
        match &self.scheme {
            Scheme::Standard { delta } if !(*delta > 0.0 && delta.is_finite()) => Err(
                Error::param("delta", format!("fixed step {delta} is not positive")),
            ),
            Scheme::Hybrid { period: 0 } => Err(Error::param("N", "hybrid period must be >= 1")),
            _ => Ok(()),
        }
    }
}

struct Choice {
    delta: f64,
    exponent: Option<i32>,
    mode: Mode,
}

impl Choice {
    fn searched(r: SearchResult) -> Self {
        Choice {
            delta: r.delta,
            exponent: Some(r.exponent),
            mode: if r.phase == Phase::Grew {
                Mode::Growth
            } else {
                Mode::Backtrack
            },
        }
    }
}

/// Picks `delta_n` at an evaluated, non-critical iterate.
trait StepRule {
    fn choose(&mut self, obj: &Objective, iter: usize, at: &Evaluated) -> Result<Choice>;
}

struct Fixed(f64);

impl StepRule for Fixed {
    fn choose(&mut self, _: &Objective, _: usize, _: &Evaluated) -> Result<Choice> {
        Ok(Choice {
            delta: self.0,
            exponent: None,
            mode: Mode::Standard,
        })
    }
}

struct Basic(LineSearchParams);

impl StepRule for Basic {
    fn choose(&mut self, obj: &Objective, _: usize, at: &Evaluated) -> Result<Choice> {
        linesearch::backtracking_search(obj, at, &self.0).map(Choice::searched)
    }
}

struct Growth(LineSearchParams, GrowthFunction);

impl StepRule for Growth {
    fn choose(&mut self, obj: &Objective, _: usize, at: &Evaluated) -> Result<Choice> {
        linesearch::growth_search(obj, at, &self.0, &self.1).map(Choice::searched)
    }
}

struct TwoWay {
    params: LineSearchParams,
    prev_exponent: i32,
}

impl StepRule for TwoWay {
    fn choose(&mut self, obj: &Objective, _: usize, at: &Evaluated) -> Result<Choice> {
        let r = linesearch::two_way_search_from(obj, at, self.prev_exponent, &self.params)?;
        self.prev_exponent = r.exponent;
        Ok(Choice::searched(r))
    }
}

struct Hybrid {
    params: LineSearchParams,
    period: usize,
    prev_exponent: Option<i32>,
}

impl StepRule for Hybrid {
    fn choose(&mut self, obj: &Objective, iter: usize, at: &Evaluated) -> Result<Choice> {
        if !iter.is_multiple_of(self.period) {
            if let Some(m) = self.prev_exponent {
                let delta = self.params.grid(m);
                // Reused steps must still satisfy Armijo's condition, which
                // also guarantees f(x_{n+1}) <= f(x_n).
                if linesearch::armijo_holds(obj, at, delta, self.params.alpha)? {
                    return Ok(Choice {
                        delta,
                        exponent: Some(m),
                        mode: Mode::Reuse,
                    });
                }
            }
        }
        let r = linesearch::backtracking_search(obj, at, &self.params)?;
        self.prev_exponent = Some(r.exponent);
        Ok(Choice {
            delta: r.delta,
            exponent: Some(r.exponent),
            mode: Mode::Backtrack,
        })
    }
}

fn diff(after: EvalCounts, before: EvalCounts) -> EvalCounts {
    EvalCounts {
        value: after.value - before.value,
        gradient: after.gradient - before.gradient,
    }
}

fn drive(obj: &Objective, cfg: &RunConfig, rule: &mut dyn StepRule) -> Result<Trace> {
    cfg.validate(obj)?;
    let mut records = Vec::new();
    let mut x = cfg.x0.clone();

    let finish = |records: Vec<StepRecord>,
                  termination: Termination,
                  final_x: Vector,
                  final_point: Option<(f64, f64)>,
                  terminal_evals: EvalCounts| Trace {
        objective: obj.name().to_string(),
        x0: cfg.x0.clone(),
        records,
        termination,
        final_x,
        final_f: final_point.map(|p| p.0),
        final_grad_norm: final_point.map(|p| p.1),
        terminal_evals,
    };

    for iter in 0.. {
        let before = obj.counts();
        let at = match Evaluated::at(obj, x.clone()) {
            Ok(at) => at,
            Err(Error::NonFinite(msg)) => {
                log::debug!("{}: evaluation failed at step {iter}: {msg}", obj.name());
                let spent = diff(obj.counts(), before);
                return Ok(finish(
                    records,
                    Termination::NumericalFailure,
                    x,
                    None,
                    spent,
                ));
            }
            Err(e) => return Err(e),
        };
        let grad_norm = at.grad_norm();
        let stop = if grad_norm < cfg.params.grad_tol {
            Some(Termination::CriticalPoint)
        } else if at.f < cfg.divergence_f_threshold {
            Some(Termination::DivergingF)
        } else if at.x.norm() > cfg.divergence_x_threshold {
            Some(Termination::DivergingX)
        } else if iter >= cfg.max_iters {
            Some(Termination::MaxIters)
        } else {
            None
        };
        if let Some(termination) = stop {
            let spent = diff(obj.counts(), before);
            return Ok(finish(
                records,
                termination,
                at.x,
                Some((at.f, grad_norm)),
                spent,
            ));
        }

        let choice = match rule.choose(obj, iter, &at) {
            Ok(c) => c,
            Err(Error::SearchExhausted { .. }) | Err(Error::NonFinite(_)) => {
                let spent = diff(obj.counts(), before);
                return Ok(finish(
                    records,
                    Termination::NumericalFailure,
                    at.x,
                    Some((at.f, grad_norm)),
                    spent,
                ));
            }
            Err(e) => return Err(e),
        };
        let next = match Vector::new(at.step(choice.delta)) {
            Ok(v) => v,
            Err(_) => {
                let spent = diff(obj.counts(), before);
                return Ok(finish(
                    records,
                    Termination::NumericalFailure,
                    at.x,
                    Some((at.f, grad_norm)),
                    spent,
                ));
            }
        };
        let spent = diff(obj.counts(), before);
        records.push(StepRecord {
            iter,
            x: at.x,
            f_val: at.f,
            grad_norm,
            delta: choice.delta,
            exponent: choice.exponent,
            step_norm: choice.delta * grad_norm,
            n_value_evals: spent.value,
            n_grad_evals: spent.gradient,
            mode: choice.mode,
        });
        x = next;
    }
    unreachable!("iteration loop only exits by returning")
}

fn wrong_scheme(expected: &str, cfg: &RunConfig) -> Error {
    Error::Usage(format!(
        "{expected} driver called with scheme `{}`",
        cfg.scheme
    ))
}

/// Fixed-step gradient descent.
pub fn run_standard(obj: &Objective, cfg: &RunConfig) -> Result<Trace> {
    match cfg.scheme {
        Scheme::Standard { delta } => drive(obj, cfg, &mut Fixed(delta)),
        _ => Err(wrong_scheme("standard", cfg)),
    }
}

/// Backtracking GD: `delta_n` is the largest grid value satisfying Armijo.
pub fn run_backtracking(obj: &Objective, cfg: &RunConfig) -> Result<Trace> {
    match cfg.scheme {
        Scheme::Backtracking => drive(obj, cfg, &mut Basic(cfg.params)),
        _ => Err(wrong_scheme("backtracking", cfg)),
    }
}

/// Unbounded backtracking GD with the discrete growth construction.
pub fn run_unbounded(obj: &Objective, cfg: &RunConfig) -> Result<Trace> {
    match &cfg.scheme {
        Scheme::Unbounded(h) => drive(obj, cfg, &mut Growth(cfg.params, h.clone())),
        _ => Err(wrong_scheme("unbounded", cfg)),
    }
}

/// Two-way backtracking, warm-started at the previous accepted step.
pub fn run_twoway(obj: &Objective, cfg: &RunConfig) -> Result<Trace> {
    match cfg.scheme {
        Scheme::TwoWay => drive(
            obj,
            cfg,
            &mut TwoWay {
                params: cfg.params,
                prev_exponent: 0,
            },
        ),
        _ => Err(wrong_scheme("twoway", cfg)),
    }
}

/// Periodic backtracking with step-size reuse in between.
pub fn run_hybrid(obj: &Objective, cfg: &RunConfig) -> Result<Trace> {
    match cfg.scheme {
        Scheme::Hybrid { period } => drive(
            obj,
            cfg,
            &mut Hybrid {
                params: cfg.params,
                period: period.max(1),
                prev_exponent: None,
            },
        ),
        _ => Err(wrong_scheme("hybrid", cfg)),
    }
}

/// Dispatches on `cfg.scheme`.
pub fn run(obj: &Objective, cfg: &RunConfig) -> Result<Trace> {
    match cfg.scheme {
        Scheme::Standard { .. } => run_standard(obj, cfg),
        Scheme::Backtracking => run_backtracking(obj, cfg),
        Scheme::Unbounded(_) => run_unbounded(obj, cfg),
        Scheme::TwoWay => run_twoway(obj, cfg),
        Scheme::Hybrid { .. } => run_hybrid(obj, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square() -> Objective {
        Objective::new("q", 1, |x| 0.5 * x[0] * x[0], |x, g| g[0] = x[0])
    }

    fn quartic() -> Objective {
        Objective::new("q4", 1, |x| 0.25 * x[0].powi(4), |x, g| g[0] = x[0].powi(3))
    }

    fn line() -> Objective {
        Objective::new("line", 1, |x| -x[0], |_, g| g[0] = -1.0)
    }

    fn v(x: f64) -> Vector {
        Vector::new(vec![x]).unwrap()
    }

    fn default_unbounded() -> Scheme {
        Scheme::Unbounded(GrowthFunction::default_for(1.0).unwrap())
    }

    #[test]
    fn backtracking_quadratic_one_step() {
        let t = run_backtracking(
            &half_square(),
            &RunConfig::new(Scheme::Backtracking, v(2.0)),
        )
        .unwrap();
        assert_eq!(t.termination, Termination::CriticalPoint);
        assert_eq!(t.len(), 1);
        assert_eq!(t.final_x.as_slice(), &[0.0]);
        assert_eq!(t.records[0].delta, 1.0);
    }

    #[test]
    fn backtracking_on_line_takes_full_steps() {
        let mut cfg = RunConfig::new(Scheme::Backtracking, v(0.0));
        cfg.divergence_x_threshold = 1e3;
        let t = run_backtracking(&line(), &cfg).unwrap();
        assert!(t.termination.is_diverging());
        for (n, r) in t.records.iter().enumerate() {
            assert_eq!(r.delta, 1.0);
            assert_eq!(r.f_val, -(n as f64));
        }
    }

    #[test]
    fn critical_start_takes_no_steps() {
        let obj = half_square();
        for scheme in [
            Scheme::Backtracking,
            default_unbounded(),
            Scheme::TwoWay,
            Scheme::Hybrid { period: 3 },
        ] {
            let t = run(&obj, &RunConfig::new(scheme, v(0.0))).unwrap();
            assert_eq!(t.termination, Termination::CriticalPoint);
            assert!(t.is_empty());
            assert_eq!(
                t.total_evals(),
                EvalCounts {
                    value: 1,
                    gradient: 1
                }
            );
        }
    }

    #[test]
    fn unbounded_matches_backtracking_on_quadratic() {
        let a = run(
            &half_square(),
            &RunConfig::new(Scheme::Backtracking, v(2.0)),
        )
        .unwrap();
        let b = run(&half_square(), &RunConfig::new(default_unbounded(), v(2.0))).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_x, b.final_x);
    }

    #[test]
    fn twoway_matches_backtracking_on_quadratic() {
        let a = run(
            &half_square(),
            &RunConfig::new(Scheme::Backtracking, v(2.0)),
        )
        .unwrap();
        let b = run(&half_square(), &RunConfig::new(Scheme::TwoWay, v(2.0))).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn twoway_steps_never_exceed_delta0() {
        let t = run(
            &quartic(),
            &RunConfig::new(Scheme::TwoWay, v(1.0)).with_max_iters(2000),
        )
        .unwrap();
        assert!(t.deltas().all(|d| d <= 1.0));
        assert_eq!(t.records[0].delta, 0.25);
    }

    #[test]
    fn hybrid_period_one_is_backtracking() {
        let cfg = RunConfig::new(Scheme::Backtracking, v(1.0)).with_max_iters(500);
        let a = run(&quartic(), &cfg).unwrap();
        let b = run(
            &quartic(),
            &cfg.clone().with_scheme(Scheme::Hybrid { period: 1 }),
        )
        .unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.termination, b.termination);
    }

    #[test]
    fn hybrid_quadratic_converges_in_one_step() {
        let t = run(
            &half_square(),
            &RunConfig::new(Scheme::Hybrid { period: 5 }, v(2.0)),
        )
        .unwrap();
        assert_eq!(t.termination, Termination::CriticalPoint);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn hybrid_reuses_between_backtracks() {
        let t = run(
            &quartic(),
            &RunConfig::new(Scheme::Hybrid { period: 3 }, v(1.0)).with_max_iters(300),
        )
        .unwrap();
        assert!(t.records.iter().any(|r| r.mode == Mode::Reuse));
        for r in &t.records {
            if r.iter % 3 == 0 {
                assert_eq!(r.mode, Mode::Backtrack);
            }
        }
        for w in t.records.windows(2) {
            assert!(w[1].f_val <= w[0].f_val);
        }
    }

    #[test]
    fn standard_exact_one_step() {
        let t = run(
            &half_square(),
            &RunConfig::new(Scheme::Standard { delta: 1.0 }, v(2.0)),
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.final_x.as_slice(), &[0.0]);
    }

    #[test]
    fn standard_diverges_with_large_step() {
        let t = run(
            &half_square(),
            &RunConfig::new(Scheme::Standard { delta: 2.5 }, v(1.0)),
        )
        .unwrap();
        assert_eq!(t.termination, Termination::DivergingX);
        for r in &t.records {
            let expected = 1.5f64.powi(r.iter as i32);
            assert!((r.x[0].abs() - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn standard_contracts_with_small_step() {
        let t = run(
            &half_square(),
            &RunConfig::new(Scheme::Standard { delta: 0.1 }, v(1.0)),
        )
        .unwrap();
        assert_eq!(t.termination, Termination::CriticalPoint);
        for r in &t.records {
            let expected = 0.9f64.powi(r.iter as i32);
            assert!((r.x[0] - expected).abs() <= 1e-12);
        }
        // 0.9^n < 1e-10  <=>  n > 10 / -log10(0.9) ~ 218.5
        assert_eq!(t.len(), 219);
    }

    #[test]
    fn eval_counts_are_exact() {
        let obj = quartic();
        let t = run(
            &obj,
            &RunConfig::new(default_unbounded(), v(1.5)).with_max_iters(400),
        )
        .unwrap();
        assert_eq!(t.total_evals(), obj.counts());
    }

    #[test]
    fn wrong_scheme_is_usage_error() {
        let cfg = RunConfig::new(Scheme::TwoWay, v(1.0));
        assert!(matches!(
            run_backtracking(&half_square(), &cfg),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cfg = RunConfig::new(Scheme::Backtracking, Vector::zeros(2));
        assert!(matches!(
            run(&half_square(), &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hybrid_zero_period_rejected() {
        let cfg = RunConfig::new(Scheme::Hybrid { period: 0 }, v(1.0));
        assert!(run(&half_square(), &cfg).is_err());
    }

    #[test]
    fn overflowing_standard_run_is_numerical_failure() {
        let obj = quartic();
        let mut cfg = RunConfig::new(Scheme::Standard { delta: 1.0 }, v(10.0));
        cfg.divergence_x_threshold = f64::MAX;
        cfg.divergence_f_threshold = f64::NEG_INFINITY;
        let t = run(&obj, &cfg).unwrap();
        assert_eq!(t.termination, Termination::NumericalFailure);
    }
}
