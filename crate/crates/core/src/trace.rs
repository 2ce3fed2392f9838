use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::objective::EvalCounts;
use crate::vector::Vector;

/// How the step size of a record was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Backtrack,
    Growth,
    Reuse,
    Standard,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Backtrack => "backtrack",
            Mode::Growth => "growth",
            Mode::Reuse => "reuse",
            Mode::Standard => "standard",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "backtrack" => Ok(Mode::Backtrack),
            "growth" => Ok(Mode::Growth),
            "reuse" => Ok(Mode::Reuse),
            "standard" => Ok(Mode::Standard),
            other => Err(Error::Usage(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    CriticalPoint,
    MaxIters,
    DivergingF,
    DivergingX,
    NumericalFailure,
}

impl Termination {
    pub fn is_diverging(self) -> bool {
        matches!(self, Termination::DivergingF | Termination::DivergingX)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One accepted update `x_{n+1} = x_n - delta_n * grad f(x_n)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub iter: usize,
    pub x: Vector,
    pub f_val: f64,
    pub grad_norm: f64,
    pub delta: f64,
    /// `m` with `delta = beta^m * delta0`; `None` for fixed-step records.
    pub exponent: Option<i32>,
    /// Length of the update, `delta * grad_norm`.
    pub step_norm: f64,
    /// Value evaluations spent on this step, including the one at `x`.
    pub n_value_evals: u64,
    pub n_grad_evals: u64,
    pub mode: Mode,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub objective: String,
    pub x0: Vector,
    pub records: Vec<StepRecord>,
    pub termination: Termination,
    pub final_x: Vector,
    /// `f(final_x)`, absent when the final evaluation failed.
    pub final_f: Option<f64>,
    pub final_grad_norm: Option<f64>,
    /// Evaluations made after the last record (the terminating check, or a
    /// failed search).
    pub terminal_evals: EvalCounts,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Iterate `x_n`; `n == len()` is the final point.
    pub fn point(&self, n: usize) -> Option<&Vector> {
        match n.cmp(&self.records.len()) {
            std::cmp::Ordering::Less => Some(&self.records[n].x),
            std::cmp::Ordering::Equal => Some(&self.final_x),
            std::cmp::Ordering::Greater => None,
        }
    }

    /// `f(x_{n+1})` for record `n`, taken from the next record or the final point.
    pub fn next_f(&self, n: usize) -> Option<f64> {
        if n + 1 < self.records.len() {
            Some(self.records[n + 1].f_val)
        } else if n + 1 == self.records.len() {
            self.final_f
        } else {
            None
        }
    }

    pub fn total_evals(&self) -> EvalCounts {
        self.records
            .iter()
            .fold(self.terminal_evals, |acc, r| EvalCounts {
                value: acc.value + r.n_value_evals,
                gradient: acc.gradient + r.n_grad_evals,
            })
    }

    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.delta)
    }
}
