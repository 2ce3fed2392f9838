//! Test objectives with hand-coded gradients, known critical points and
//! local Lipschitz data `(r(x), L(x))`.
//!
//! Entry names are stable identifiers used on the command line.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::drivers::{RunConfig, Scheme};
use crate::objective::{KnownAnalysis, LocalLipschitz, Objective};
use crate::vector::{norm, Vector};

/// Stand-in for `r(x) = infinity` on globally Lipschitz gradients.
pub const UNBOUNDED_RADIUS: f64 = 1e6;
/// `||x||` divergence threshold for the linear entry.
pub const LINEAR_DIVERGENCE_X: f64 = 1e4;

const CHECK_SEED: u64 = 0x5eed_0bad_cafe;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    FlatGradient,
    Saddle,
    UnboundedBelow,
    CountableCritical,
    MultiMin,
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub objective: Objective,
    /// Per-coordinate sampling interval.
    pub test_box: Vec<(f64, f64)>,
    pub tags: Vec<Scenario>,
    /// Overrides the default `||x||` divergence threshold for runs on this
    /// entry, for objectives that descend too slowly to reach the default
    /// within the iteration budget.
    pub divergence_x_threshold: Option<f64>,
}

impl CorpusEntry {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn has_tag(&self, tag: Scenario) -> bool {
        self.tags.contains(&tag)
    }

    pub fn sample_point(&self, rng: &mut impl Rng) -> Vector {
        let coords = self
            .test_box
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..hi))
            .collect();
        Vector::new(coords).expect("test box is finite")
    }

    /// `count` starting points drawn from the test box with a fixed seed.
    pub fn sample_starts(&self, count: usize, seed: u64) -> Vec<Vector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample_point(&mut rng)).collect()
    }

    /// Run configuration with this entry's threshold overrides applied.
    pub fn run_config(&self, scheme: Scheme, x0: Vector) -> RunConfig {
        let mut cfg = RunConfig::new(scheme, x0);
        if let Some(t) = self.divergence_x_threshold {
            cfg.divergence_x_threshold = t;
        }
        cfg
    }

    fn box_diameter(&self) -> f64 {
        self.test_box
            .iter()
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }
}

fn vec1(x: f64) -> Vector {
    Vector::new(vec![x]).expect("finite")
}

fn cube(dim: usize, half_width: f64) -> Vec<(f64, f64)> {
    vec![(-half_width, half_width); dim]
}

fn quadratic(name: &'static str, dim: usize) -> CorpusEntry {
    let objective = Objective::new(
        name,
        dim,
        |x| 0.5 * x.iter().map(|c| c * c).sum::<f64>(),
        |x, g| g.copy_from_slice(x),
    )
    .with_analysis(KnownAnalysis {
        critical_points: vec![Vector::zeros(dim)],
        lipschitz: Some(LocalLipschitz::new(|_| UNBOUNDED_RADIUS, |_| 1.0)),
        global_min: Some(0.0),
        unbounded_below: false,
    });
    CorpusEntry {
        name,
        objective,
        test_box: cube(dim, 2.0),
        tags: vec![Scenario::CountableCritical],
        divergence_x_threshold: None,
    }
}

fn quartic(name: &'static str, dim: usize) -> CorpusEntry {
    let objective = Objective::new(
        name,
        dim,
        |x| 0.25 * x.iter().map(|c| c.powi(4)).sum::<f64>(),
        |x, g| {
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi = xi.powi(3);
            }
        },
    )
    .with_analysis(KnownAnalysis {
        critical_points: vec![Vector::zeros(dim)],
        // Hessian diag(3 x_i^2); on B(x, 1) every |y_i| <= max|x_i| + 1.
        lipschitz: Some(LocalLipschitz::new(
            |_| 1.0,
            |x| 3.0 * (x.max_abs() + 1.0).powi(2),
        )),
        global_min: Some(0.0),
        unbounded_below: false,
    });
    CorpusEntry {
        name,
        objective,
        test_box: cube(dim, 2.0),
        tags: vec![Scenario::FlatGradient, Scenario::CountableCritical],
        divergence_x_threshold: None,
    }
}

fn rosenbrock() -> CorpusEntry {
    let objective = Objective::new(
        "rosenbrock",
        2,
        |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
        |x, g| {
            let r = x[1] - x[0] * x[0];
            g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * r;
            g[1] = 200.0 * r;
        },
    )
    .with_analysis(KnownAnalysis {
        critical_points: vec![Vector::new(vec![1.0, 1.0]).expect("finite")],
        // Frobenius bound on the Hessian over B(x, 1).
        lipschitz: Some(LocalLipschitz::new(
            |_| 1.0,
            |x| {
                let a = x[0].abs() + 1.0;
                let b = x[1].abs() + 1.0;
                let h11 = 1200.0 * a * a + 400.0 * b + 2.0;
                let h12 = 400.0 * a;
                (h11 * h11 + 2.0 * h12 * h12 + 200.0 * 200.0).sqrt()
            },
        )),
        global_min: Some(0.0),
        unbounded_below: false,
    });
    CorpusEntry {
        name: "rosenbrock",
        objective,
        test_box: cube(2, 2.0),
        tags: vec![Scenario::CountableCritical],
        divergence_x_threshold: None,
    }
}

fn saddle() -> CorpusEntry {
    let objective = Objective::new(
        "saddle",
        2,
        |x| x[0] * x[0] - x[1] * x[1],
        |x, g| {
            g[0] = 2.0 * x[0];
            g[1] = -2.0 * x[1];
        },
    )
    .with_analysis(KnownAnalysis {
        critical_points: vec![Vector::zeros(2)],
        lipschitz: Some(LocalLipschitz::new(|_| UNBOUNDED_RADIUS, |_| 2.0)),
        global_min: None,
        unbounded_below: true,
    });
    CorpusEntry {
        name: "saddle",
        objective,
        test_box: cube(2, 1.0),
        tags: vec![
            Scenario::Saddle,
            Scenario::UnboundedBelow,
            Scenario::CountableCritical,
        ],
        divergence_x_threshold: None,
    }
}

fn linear() -> CorpusEntry {
    let objective = Objective::new("linear", 1, |x| -x.iter().sum::<f64>(), |_, g| g.fill(-1.0))
        .with_analysis(KnownAnalysis {
            critical_points: vec![],
            lipschitz: Some(LocalLipschitz::new(|_| UNBOUNDED_RADIUS, |_| 1.0)),
            global_min: None,
            unbounded_below: true,
        });
    CorpusEntry {
        name: "linear",
        objective,
        test_box: cube(1, 10.0),
        tags: vec![Scenario::UnboundedBelow],
        // Unit steps cross 1e4 well inside the default 1e5 iterations.
        divergence_x_threshold: Some(LINEAR_DIVERGENCE_X),
    }
}

fn double_well() -> CorpusEntry {
    let objective = Objective::new(
        "double-well",
        1,
        |x| (x[0] * x[0] - 1.0).powi(2),
        |x, g| g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0),
    )
    .with_analysis(KnownAnalysis {
        critical_points: vec![vec1(-1.0), vec1(0.0), vec1(1.0)],
        // |12 y^2 - 4| <= 12 (|x| + 1)^2 on B(x, 1).
        lipschitz: Some(LocalLipschitz::new(
            |_| 1.0,
            |x| 12.0 * (x[0].abs() + 1.0).powi(2),
        )),
        global_min: Some(0.0),
        unbounded_below: false,
    });
    CorpusEntry {
        name: "double-well",
        objective,
        test_box: cube(1, 2.0),
        tags: vec![Scenario::MultiMin, Scenario::CountableCritical],
        divergence_x_threshold: None,
    }
}

fn cubic() -> CorpusEntry {
    let objective = Objective::new(
        "cubic",
        1,
        |x| x[0].powi(3),
        |x, g| g[0] = 3.0 * x[0] * x[0],
    )
    .with_analysis(KnownAnalysis {
        critical_points: vec![vec1(0.0)],
        lipschitz: Some(LocalLipschitz::new(|_| 1.0, |x| 6.0 * (x[0].abs() + 1.0))),
        global_min: None,
        unbounded_below: true,
    });
    CorpusEntry {
        name: "cubic",
        objective,
        test_box: cube(1, 1.0),
        tags: vec![
            Scenario::FlatGradient,
            Scenario::UnboundedBelow,
            Scenario::CountableCritical,
        ],
        divergence_x_threshold: None,
    }
}

/// Every corpus objective, in a fixed order.
pub fn corpus_list() -> Vec<CorpusEntry> {
    vec![
        quadratic("quadratic-1d", 1),
        quadratic("quadratic-2d", 2),
        quadratic("quadratic-10d", 10),
        quartic("quartic-1d", 1),
        quartic("quartic-2d", 2),
        rosenbrock(),
        saddle(),
        linear(),
        double_well(),
        cubic(),
    ]
}

pub fn names() -> Vec<&'static str> {
    corpus_list().into_iter().map(|e| e.name).collect()
}

pub fn lookup(name: &str) -> Option<CorpusEntry> {
    corpus_list().into_iter().find(|e| e.name == name)
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientCheckReport {
    pub name: String,
    pub samples: usize,
    /// Max over samples of `||g_fd - g||_inf / max(1, ||g||_inf)`.
    pub max_rel_error: f64,
    pub worst_point: Option<Vector>,
}

/// Central differences of the value, one coordinate at a time.
pub fn central_difference(obj: &Objective, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let hi = x[i] + step;
            let lo = x[i] - step;
            probe[i] = hi;
            let f_hi = obj.peek_value(&probe);
            probe[i] = lo;
            let f_lo = obj.peek_value(&probe);
            probe[i] = x[i];
            // Divide by the representable spacing, not 2 * step.
            (f_hi - f_lo) / (hi - lo)
        })
        .collect()
}

/// Compares the analytic gradient to central differences at points sampled
/// from the test box.
pub fn gradient_check(entry: &CorpusEntry, n_samples: usize, fd_step: f64) -> GradientCheckReport {
    assert!(fd_step > 0.0, "finite-difference step must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED);
    let mut worst = (0.0_f64, None);
    for _ in 0..n_samples {
        let x = entry.sample_point(&mut rng);
        let analytic = entry.objective.peek_gradient(x.as_slice());
        let numeric = central_difference(&entry.objective, x.as_slice(), fd_step);
        let scale = analytic.iter().fold(1.0_f64, |m, g| m.max(g.abs()));
        let err = analytic
            .iter()
            .zip(&numeric)
            .fold(0.0_f64, |m, (a, n)| m.max((a - n).abs()))
            / scale;
        if err > worst.0 || worst.1.is_none() {
            worst = (err, Some(x));
        }
    }
    GradientCheckReport {
        name: entry.name.to_string(),
        samples: n_samples,
        max_rel_error: worst.0,
        worst_point: worst.1,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub name: String,
    pub pairs: usize,
    /// Max of `||grad f(y) - grad f(x)|| / (L(x) ||y - x||)`.
    pub worst_ratio: f64,
    /// Pairs breaking `||grad f(y) - grad f(x)|| <= L(x) ||y - x|| + 1e-12`.
    pub violations: usize,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples `x` in the test box and `y` in `B(x, r(x))` (radius capped at the
/// box diameter) and checks the local Lipschitz bound. Returns `None` when the
/// entry declares no Lipschitz data.
pub fn lipschitz_audit(entry: &CorpusEntry, n_pairs: usize) -> Option<LipschitzReport> {
    let Some(lip) = entry.objective.lipschitz() else {
        log::info!("{}: no Lipschitz data, audit skipped", entry.name);
        return None;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED ^ 0x11);
    let diameter = entry.box_diameter();
    let dim = entry.dim();
    let mut worst_ratio = 0.0_f64;
    let mut violations = 0;
    for _ in 0..n_pairs {
        let x = entry.sample_point(&mut rng);
        let (r, l) = lip.at(&x).expect("corpus Lipschitz data is positive");
        let dir = loop {
            let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = norm(&d);
            if n > 1e-3 && n <= 1.0 {
                break d.into_iter().map(|c| c / n).collect::<Vec<_>>();
            }
        };
        let rho = r.min(diameter) * rng.random_range(0.0..1.0f64).powf(1.0 / dim as f64);
        let y: Vec<f64> = x
            .as_slice()
            .iter()
            .zip(&dir)
            .map(|(xi, di)| xi + rho * di)
            .collect();
        let dist = norm(
            &x.as_slice()
                .iter()
                .zip(&y)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        if dist == 0.0 {
            continue;
        }
        let gx = entry.objective.peek_gradient(x.as_slice());
        let gy = entry.objective.peek_gradient(&y);
        let dg = norm(&gx.iter().zip(&gy).map(|(a, b)| a - b).collect::<Vec<_>>());
        if dg > l * dist + 1e-12 {
            violations += 1;
        }
        worst_ratio = worst_ratio.max(dg / (l * dist));
    }
    Some(LipschitzReport {
        name: entry.name.to_string(),
        pairs: n_pairs,
        worst_ratio,
        violations,
    })
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}
