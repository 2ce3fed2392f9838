//! Trace CSV, audit JSON and comparison tables.
//!
//! Floats are written with 17 significant digits so every value parses back
//! to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{ComparisonRow, TheoremAudit};
use crate::drivers::RunConfig;
use crate::error::{Error, Result};
use crate::trace::{Mode, Trace};
use crate::vector::Vector;

pub const TRACE_HEADER: &str =
    "iter,f,grad_norm,delta,delta_exponent,step_norm,n_value_evals,n_grad_evals,mode";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.f_val),
            fmt_f64(r.grad_norm),
            fmt_f64(r.delta),
            r.exponent.map_or(String::new(), |m| m.to_string()),
            fmt_f64(r.step_norm),
            r.n_value_evals,
            r.n_grad_evals,
            r.mode
        );
    }
    out
}

/// One parsed trace CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub delta: f64,
    pub delta_exponent: Option<i32>,
    pub step_norm: f64,
    pub n_value_evals: u64,
    pub n_grad_evals: u64,
    pub mode: Mode,
}

fn field<T: std::str::FromStr>(line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Usage(format!("line {line}: bad {name} `{raw}`")))
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(Error::Usage("missing or unexpected trace header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let n = i + 2;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 9 {
                return Err(Error::Usage(format!(
                    "line {n}: expected 9 columns, got {}",
                    cols.len()
                )));
            }
            Ok(CsvRow {
                iter: field(n, "iter", cols[0])?,
                f: field(n, "f", cols[1])?,
                grad_norm: field(n, "grad_norm", cols[2])?,
                delta: field(n, "delta", cols[3])?,
                delta_exponent: if cols[4].is_empty() {
                    None
                } else {
                    Some(field(n, "delta_exponent", cols[4])?)
                },
                step_norm: field(n, "step_norm", cols[5])?,
                n_value_evals: field(n, "n_value_evals", cols[6])?,
                n_grad_evals: field(n, "n_grad_evals", cols[7])?,
                mode: cols[8].parse()?,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct AuditFile<'a> {
    objective: &'a str,
    scheme: String,
    x0: &'a Vector,
    alpha: f64,
    beta: f64,
    delta0: f64,
    grad_tol: f64,
    max_iters: usize,
    termination: String,
    steps: usize,
    final_x: &'a Vector,
    final_f: Option<f64>,
    total_value_evals: u64,
    total_grad_evals: u64,
    step_norm_witness: Option<bool>,
    partial_sum_witness: Option<bool>,
    audit: &'a TheoremAudit,
}

pub fn audit_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("audit.json")
}

pub fn audit_json(trace: &Trace, cfg: &RunConfig, audit: &TheoremAudit) -> String {
    let totals = trace.total_evals();
    let file = AuditFile {
        objective: &trace.objective,
        scheme: cfg.scheme.to_string(),
        x0: &trace.x0,
        alpha: cfg.params.alpha,
        beta: cfg.params.beta,
        delta0: cfg.params.delta0,
        grad_tol: cfg.params.grad_tol,
        max_iters: cfg.max_iters,
        termination: trace.termination.to_string(),
        steps: trace.len(),
        final_x: &trace.final_x,
        final_f: trace.final_f,
        total_value_evals: totals.value,
        total_grad_evals: totals.gradient,
        step_norm_witness: audit.step_norm_witness(),
        partial_sum_witness: audit.partial_sum_witness(),
        audit,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("audit serializes");
    s.push('\n');
    s
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Writes `path` (trace CSV) and the matching `.audit.json`.
pub fn write_run(path: &Path, trace: &Trace, cfg: &RunConfig, audit: &TheoremAudit) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, trace_csv(trace))?;
    fs::write(audit_path(path), audit_json(trace, cfg, audit))?;
    Ok(())
}

pub const COMPARISON_HEADER: &str = "scheme,iters_to_target,value_evals,gradient_evals,termination";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.scheme,
            r.iters_to_target
                .map_or("inf".to_string(), |n| n.to_string()),
            r.value_evals,
            r.gradient_evals,
            r.termination
        );
    }
    out
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut out = format!(
        "{:<16} {:>15} {:>12} {:>12}  {}\n",
        "scheme", "iters_to_target", "value_evals", "grad_evals", "termination"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>15} {:>12} {:>12}  {}",
            r.scheme,
            r.iters_to_target
                .map_or("inf".to_string(), |n| n.to_string()),
            r.value_evals,
            r.gradient_evals,
            r.termination
        );
    }
    out
}

pub fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, comparison_csv(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::lookup;
    use crate::drivers::{run, Scheme};
    use proptest::prelude::*;

    #[test]
    fn csv_parses_back_exactly() {
        let obj = lookup("rosenbrock").unwrap().objective;
        let cfg = RunConfig::new(
            Scheme::Hybrid { period: 3 },
            Vector::new(vec![-1.2, 1.0]).unwrap(),
        )
        .with_max_iters(200);
        let t = run(&obj, &cfg).unwrap();
        let rows = parse_trace_csv(&trace_csv(&t)).unwrap();
        assert_eq!(rows.len(), t.len());
        for (row, rec) in rows.iter().zip(&t.records) {
            assert_eq!(row.f, rec.f_val);
            assert_eq!(row.delta, rec.delta);
            assert_eq!(row.step_norm, rec.step_norm);
            assert_eq!(row.delta_exponent, rec.exponent);
            assert_eq!(row.mode, rec.mode);
        }
    }

    #[test]
    fn standard_rows_have_no_exponent() {
        let obj = lookup("quadratic-1d").unwrap().objective;
        let t = run(
            &obj,
            &RunConfig::new(
                Scheme::Standard { delta: 0.5 },
                Vector::new(vec![1.0]).unwrap(),
            ),
        )
        .unwrap();
        let text = trace_csv(&t);
        assert!(text.lines().nth(1).unwrap().contains(",,"));
        assert!(parse_trace_csv(&text)
            .unwrap()
            .iter()
            .all(|r| r.delta_exponent.is_none()));
    }

    #[test]
    fn rejects_malformed_csv() {
        assert!(parse_trace_csv("iter,f\n").is_err());
        assert!(parse_trace_csv(&format!("{TRACE_HEADER}\n0,1,2\n")).is_err());
    }

    #[test]
    fn audit_path_sits_beside_csv() {
        assert_eq!(
            audit_path(Path::new("out/run.csv")),
            PathBuf::from("out/run.audit.json")
        );
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
