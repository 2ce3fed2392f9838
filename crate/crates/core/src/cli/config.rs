use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::corpus::{self, CorpusEntry};
use crate::drivers::{
    RunConfig, Scheme, DEFAULT_DIVERGENCE_F, DEFAULT_DIVERGENCE_X, DEFAULT_MAX_ITERS,
};
use crate::error::{Error, Result};
use crate::growth::{GrowthFunction, GrowthSpec};
use crate::params::LineSearchParams;
use crate::vector::Vector;

pub const MAX_ITERS_ENV: &str = "UBGD_MAX_ITERS";

const KNOWN_KEYS: &[&str] = &[
    "objective",
    "x0",
    "seeds",
    "scheme",
    "alpha",
    "beta",
    "delta0",
    "step",
    "N",
    "growth",
    "grad_tol",
    "max_halvings",
    "max_iters",
    "divergence_x_threshold",
    "divergence_f_threshold",
    "target",
    "output",
];

/// Success region for comparisons: `||x - center|| < radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub center: Vector,
    pub radius: f64,
}

impl Target {
    pub fn contains(&self, x: &Vector) -> bool {
        x.distance(&self.center) < self.radius
    }
}

/// A parsed experiment file.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub objective: String,
    pub x0: Option<Vector>,
    pub seeds: Vec<u64>,
    pub scheme: String,
    pub params: LineSearchParams,
    /// Fixed step of the standard scheme; defaults to `delta0`.
    pub step: Option<f64>,
    pub period: Option<usize>,
    pub growth: Option<GrowthSpec>,
    pub max_iters: usize,
    /// Explicit threshold; otherwise the corpus entry's, then the default.
    pub divergence_x_threshold: Option<f64>,
    pub divergence_f_threshold: f64,
    pub target: Option<Target>,
    pub output: PathBuf,
}

fn number(map: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| Error::config(key, format!("expected a number, got {v}"))),
    }
}

fn count(map: &Map<String, Value>, key: &str) -> Result<Option<u64>> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| Error::config(key, format!("expected a non-negative integer, got {v}"))),
    }
}

fn vector(value: &Value, key: &str) -> Result<Vector> {
    let coords = value
        .as_array()
        .ok_or_else(|| Error::config(key, "expected an array of numbers"))?
        .iter()
        .map(|c| {
            c.as_f64()
                .ok_or_else(|| Error::config(key, format!("`{c}` is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    Vector::new(coords).map_err(|e| Error::config(key, e.to_string()))
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::config("<file>", format!("invalid JSON: {e}")))?;
        let map = value
            .as_object()
            .ok_or_else(|| Error::config("<file>", "top level must be an object"))?;
        if let Some(key) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::config(key.clone(), "unknown key"));
        }

        let objective = map
            .get("objective")
            .ok_or_else(|| Error::config("objective", "missing"))?
            .as_str()
            .ok_or_else(|| Error::config("objective", "expected a string"))?
            .to_string();
        let entry = corpus::lookup(&objective).ok_or_else(|| {
            Error::config("objective", format!("unknown objective `{objective}`"))
        })?;

        let x0 = map.get("x0").map(|v| vector(v, "x0")).transpose()?;
        if let Some(x) = &x0 {
            if x.dim() != entry.dim() {
                return Err(Error::config(
                    "x0",
                    format!(
                        "dimension {} does not match `{objective}` (dimension {})",
                        x.dim(),
                        entry.dim()
                    ),
                ));
            }
        }
        let seeds = match map.get("seeds") {
            None | Some(Value::Null) => Vec::new(),
            Some(v) => v
                .as_array()
                .ok_or_else(|| Error::config("seeds", "expected an array of integers"))?
                .iter()
                .map(|s| {
                    s.as_u64()
                        .ok_or_else(|| Error::config("seeds", format!("`{s}` is not a seed")))
                })
                .collect::<Result<_>>()?,
        };
        match (&x0, seeds.is_empty()) {
            (None, true) => return Err(Error::config("x0", "missing (give x0 or seeds)")),
            (Some(_), false) => return Err(Error::config("seeds", "cannot be combined with x0")),
            _ => {}
        }

        let scheme = match map.get("scheme") {
            None => "backtracking".to_string(),
            Some(v) => v
                .as_str()
                .ok_or_else(|| Error::config("scheme", "expected a string"))?
                .to_string(),
        };

        let defaults = LineSearchParams::default();
        let max_halvings = match count(map, "max_halvings")? {
            None => defaults.max_halvings,
            Some(m) => u32::try_from(m).map_err(|_| Error::config("max_halvings", "too large"))?,
        };
        let params = LineSearchParams {
            alpha: number(map, "alpha")?.unwrap_or(defaults.alpha),
            beta: number(map, "beta")?.unwrap_or(defaults.beta),
            delta0: number(map, "delta0")?.unwrap_or(defaults.delta0),
            grad_tol: number(map, "grad_tol")?.unwrap_or(defaults.grad_tol),
            max_halvings,
        }
        .validated()
        .map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(name, reason),
            other => other,
        })?;

        let growth = match map.get("growth") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                serde_json::from_value::<GrowthSpec>(v.clone())
                    .map_err(|e| Error::config("growth", e.to_string()))?,
            ),
        };
        if let Some(g) = &growth {
            g.build()
                .map_err(|e| Error::config("growth", e.to_string()))?;
        }

        let period = count(map, "N")?.map(|n| n as usize);
        if period == Some(0) {
            return Err(Error::config("N", "must be >= 1"));
        }

        let mut max_iters = count(map, "max_iters")?.map_or(DEFAULT_MAX_ITERS, |m| m as usize);
        if let Ok(over) = std::env::var(MAX_ITERS_ENV) {
            max_iters = over.trim().parse().map_err(|_| {
                Error::config(MAX_ITERS_ENV, format!("`{over}` is not an iteration count"))
            })?;
        }

        let target = match map.get("target") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let t = v.as_object().ok_or_else(|| {
                    Error::config("target", "expected {\"center\": [...], \"radius\": r}")
                })?;
                let radius = number(t, "radius")
                    .map_err(|_| Error::config("target.radius", "expected a number"))?
                    .filter(|r| *r > 0.0)
                    .ok_or_else(|| Error::config("target.radius", "missing or not positive"))?;
                let center = match t.get("center") {
                    Some(c) => vector(c, "target.center")?,
                    None => default_center(&entry).ok_or_else(|| {
                        Error::config(
                            "target.center",
                            "missing and the objective has no known critical point",
                        )
                    })?,
                };
                if center.dim() != entry.dim() {
                    return Err(Error::config(
                        "target.center",
                        "dimension does not match the objective",
                    ));
                }
                Some(Target { center, radius })
            }
        };

        let output = match map.get("output") {
            None => return Err(Error::config("output", "missing")),
            Some(v) => PathBuf::from(
                v.as_str()
                    .ok_or_else(|| Error::config("output", "expected a path string"))?,
            ),
        };

        let step = number(map, "step")?;
        if step.is_some_and(|s| s <= 0.0) {
            return Err(Error::config("step", "must be positive"));
        }

        let cfg = ExperimentConfig {
            objective,
            x0,
            seeds,
            scheme,
            params,
            step,
            period,
            growth,
            max_iters,
            divergence_x_threshold: number(map, "divergence_x_threshold")?,
            divergence_f_threshold: number(map, "divergence_f_threshold")?
                .unwrap_or(DEFAULT_DIVERGENCE_F),
            target,
            output,
        };
        cfg.build_scheme(&cfg.scheme)
            .map_err(|e| Error::config("scheme", e.to_string()))?;
        if cfg.divergence_x_threshold.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::config("divergence_x_threshold", "must be positive"));
        }
        Ok(cfg)
    }

    pub fn entry(&self) -> CorpusEntry {
        corpus::lookup(&self.objective).expect("objective validated at load")
    }

    /// Parses `name[:param]`: `standard[:step]`, `backtracking`,
    /// `unbounded`, `twoway`, `hybrid[:N]`. Missing parameters come from the
    /// config (`step`/`delta0`, `N`, `growth`).
    pub fn build_scheme(&self, spec: &str) -> Result<Scheme> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec.trim(), None),
        };
        let bad_arg = |a: &str| Error::Usage(format!("bad parameter `{a}` for scheme `{name}`"));
        match name {
            "standard" => {
                let delta = match arg {
                    Some(a) => a.parse::<f64>().map_err(|_| bad_arg(a))?,
                    None => self.step.unwrap_or(self.params.delta0),
                };
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(Error::Usage(format!(
                        "standard step {delta} must be positive"
                    )));
                }
                Ok(Scheme::Standard { delta })
            }
            "backtracking" if arg.is_none() => Ok(Scheme::Backtracking),
            "twoway" | "two-way" if arg.is_none() => Ok(Scheme::TwoWay),
            "unbounded" if arg.is_none() => {
                let h = match &self.growth {
                    Some(g) => g.build()?,
                    None => GrowthFunction::default_for(self.params.delta0)?,
                };
                Ok(Scheme::Unbounded(h))
            }
            "hybrid" => {
                let period = match arg {
                    Some(a) => a.parse::<usize>().map_err(|_| bad_arg(a))?,
                    None => self
                        .period
                        .ok_or_else(|| Error::Usage("hybrid scheme needs `N`".into()))?,
                };
                if period == 0 {
                    return Err(Error::Usage("hybrid period N must be >= 1".into()));
                }
                Ok(Scheme::Hybrid { period })
            }
            "backtracking" | "twoway" | "two-way" | "unbounded" => {
                Err(bad_arg(arg.unwrap_or_default()))
            }
            other => Err(Error::Usage(format!("unknown scheme `{other}`"))),
        }
    }

    /// Starting points: the explicit `x0`, or one sample per seed.
    pub fn starts(&self) -> Vec<(Option<u64>, Vector)> {
        match &self.x0 {
            Some(x) => vec![(None, x.clone())],
            None => {
                let entry = self.entry();
                self.seeds
                    .iter()
                    .map(|&s| (Some(s), entry.sample_starts(1, s).remove(0)))
                    .collect()
            }
        }
    }

    pub fn run_config(&self, scheme: Scheme, x0: Vector) -> RunConfig {
        RunConfig {
            scheme,
            params: self.params,
            max_iters: self.max_iters,
            x0,
            divergence_x_threshold: self
                .divergence_x_threshold
                .or(self.entry().divergence_x_threshold)
                .unwrap_or(DEFAULT_DIVERGENCE_X),
            divergence_f_threshold: self.divergence_f_threshold,
        }
    }

    /// Target for comparisons; defaults to a 1e-3 ball around the first
    /// known critical point.
    pub fn target_or_default(&self) -> Result<Target> {
        if let Some(t) = &self.target {
            return Ok(t.clone());
        }
        default_center(&self.entry())
            .map(|center| Target {
                center,
                radius: 1e-3,
            })
            .ok_or_else(|| {
                Error::config(
                    "target",
                    "required: the objective has no known critical point",
                )
            })
    }
}

fn default_center(entry: &CorpusEntry) -> Option<Vector> {
    entry
        .objective
        .analysis()
        .and_then(|a| a.critical_points.first().cloned())
}
