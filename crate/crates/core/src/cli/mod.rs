//! Command-line harness: `run`, `compare`, `check` and `list`.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use crate::corpus::{self, CorpusEntry};
use crate::diagnostics::{self, ComparisonRow};
use crate::drivers::{self, Scheme};
use crate::error::Error;
use crate::trace::{Termination, Trace};

pub use config::{ExperimentConfig, Target};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

/// Samples and step used by `check`.
pub const CHECK_SAMPLES: usize = 100;
pub const CHECK_FD_STEP: f64 = 1e-6;
pub const CHECK_FD_TOLERANCE: f64 = 1e-5;
pub const CHECK_LIPSCHITZ_PAIRS: usize = 1000;

pub fn exit_code(termination: Termination) -> i32 {
    match termination {
        Termination::CriticalPoint | Termination::MaxIters => EXIT_OK,
        Termination::DivergingF | Termination::DivergingX => EXIT_DIVERGED,
        Termination::NumericalFailure => EXIT_NUMERICAL,
    }
}

fn error_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn report(err: &Error) -> i32 {
    eprintln!("error: {err}");
    error_code(err)
}

fn seeded_path(base: &Path, seed: Option<u64>) -> PathBuf {
    match seed {
        None => base.to_path_buf(),
        Some(s) => {
            let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
            let ext = base.extension().and_then(|e| e.to_str()).unwrap_or("csv");
            base.with_file_name(format!("{stem}.seed{s}.{ext}"))
        }
    }
}

/// Executes the configured run(s), writing a trace CSV and an
/// `.audit.json` beside it for each starting point.
pub fn cmd_run(config_path: &Path) -> i32 {
    let cfg = match ExperimentConfig::from_path(config_path) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    let scheme = match cfg.build_scheme(&cfg.scheme) {
        Ok(s) => s,
        Err(e) => return report(&Error::config("scheme", e.to_string())),
    };
    let entry = cfg.entry();
    let mut code = EXIT_OK;
    for (seed, x0) in cfg.starts() {
        let obj = entry.objective.fresh();
        let run_cfg = cfg.run_config(scheme.clone(), x0);
        let trace = match drivers::run(&obj, &run_cfg) {
            Ok(t) => t,
            Err(e) => return report(&e),
        };
        let audit = diagnostics::audit(&trace, &obj, &run_cfg);
        let csv_path = seeded_path(&cfg.output, seed);
        if let Err(e) = output::write_run(&csv_path, &trace, &run_cfg, &audit) {
            return report(&e);
        }
        println!(
            "{}: {} from {} -> {} after {} steps (f = {}), trace {}",
            entry.name,
            run_cfg.scheme,
            trace.x0,
            trace.termination,
            trace.len(),
            trace
                .final_f
                .map_or("n/a".to_string(), |f| format!("{f:e}")),
            csv_path.display()
        );
        code = code.max(exit_code(trace.termination));
    }
    code
}

/// Runs every scheme from the same starting point(s) and writes a
/// comparison table to `<output stem>.compare.csv`.
pub fn cmd_compare(config_path: &Path, schemes: &[String]) -> i32 {
    if schemes.len() < 2 {
        eprintln!(
            "error: compare needs at least two schemes, got {}",
            schemes.len()
        );
        return EXIT_USAGE;
    }
    let cfg = match ExperimentConfig::from_path(config_path) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    let built: Result<Vec<Scheme>, Error> = schemes.iter().map(|s| cfg.build_scheme(s)).collect();
    let built = match built {
        Ok(b) => b,
        Err(e) => return report(&Error::config("schemes", e.to_string())),
    };
    let target = match cfg.target_or_default() {
        Ok(t) => t,
        Err(e) => return report(&e),
    };
    let entry = cfg.entry();
    for (seed, x0) in cfg.starts() {
        let rows = match compare_schemes(&entry, &cfg, schemes, &built, &x0, &target) {
            Ok(r) => r,
            Err(e) => return report(&e),
        };
        let path = seeded_path(&cfg.output, seed).with_extension("compare.csv");
        if let Err(e) = output::write_comparison(&path, &rows) {
            return report(&e);
        }
        println!(
            "{} from {x0}, target ||x - {}|| < {}",
            entry.name, target.center, target.radius
        );
        print!("{}", output::comparison_table(&rows));
    }
    EXIT_OK
}

/// Runs the schemes concurrently on separate objective instances; rows come
/// back in the order given.
pub fn compare_schemes(
    entry: &CorpusEntry,
    cfg: &ExperimentConfig,
    labels: &[String],
    schemes: &[Scheme],
    x0: &crate::vector::Vector,
    target: &Target,
) -> Result<Vec<ComparisonRow>, Error> {
    let results: Vec<Result<Trace, Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = schemes
            .iter()
            .map(|scheme| {
                let obj = entry.objective.fresh();
                let run_cfg = cfg.run_config(scheme.clone(), x0.clone());
                scope.spawn(move || drivers::run(&obj, &run_cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("driver thread panicked"))
            .collect()
    });
    let traces = labels
        .iter()
        .cloned()
        .zip(results)
        .map(|(label, r)| r.map(|t| (label, t)))
        .collect::<Result<Vec<_>, _>>()?;
    diagnostics::compare(&traces, |x| target.contains(x))
}

#[derive(Clone, Debug)]
pub struct CheckLine {
    pub name: &'static str,
    pub max_fd_error: f64,
    pub worst_lipschitz_ratio: Option<f64>,
    pub passed: bool,
}

/// Gradient and Lipschitz checks for one entry.
pub fn check_entry(entry: &CorpusEntry) -> CheckLine {
    let fd = corpus::gradient_check(entry, CHECK_SAMPLES, CHECK_FD_STEP);
    let lip = corpus::lipschitz_audit(entry, CHECK_LIPSCHITZ_PAIRS);
    let passed = fd.max_rel_error < CHECK_FD_TOLERANCE && lip.as_ref().is_none_or(|l| l.passed());
    CheckLine {
        name: entry.name,
        max_fd_error: fd.max_rel_error,
        worst_lipschitz_ratio: lip.map(|l| l.worst_ratio),
        passed,
    }
}

pub fn check_lines(name: &str) -> Result<Vec<CheckLine>, Error> {
    let entries = if name == "all" {
        corpus::corpus_list()
    } else {
        vec![corpus::lookup(name)
            .ok_or_else(|| Error::Usage(format!("unknown objective `{name}`")))?]
    };
    Ok(entries.iter().map(check_entry).collect())
}

pub fn cmd_check(name: &str) -> i32 {
    let lines = match check_lines(name) {
        Ok(l) => l,
        Err(e) => return report(&e),
    };
    for l in &lines {
        println!(
            "{:<14} fd_rel_err={:.3e} lipschitz_ratio={} {}",
            l.name,
            l.max_fd_error,
            l.worst_lipschitz_ratio
                .map_or("skipped".to_string(), |r| format!("{r:.4}")),
            if l.passed { "ok" } else { "FAIL" }
        );
    }
    if lines.iter().all(|l| l.passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

pub fn cmd_list() -> i32 {
    for e in corpus::corpus_list() {
        let tags: Vec<String> = e.tags.iter().map(|t| t.to_string()).collect();
        println!("{:<14} dim={:<3} {}", e.name, e.dim(), tags.join(","));
    }
    EXIT_OK
}
