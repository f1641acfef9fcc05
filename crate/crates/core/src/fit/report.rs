use std::fmt::Write;

use super::engine::FitResult;

/// Human-readable `key = value ± sigma` report.
pub fn format_report(r: &FitResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model = {}", r.model);
    let _ = writeln!(s, "converged = {}", r.converged);
    let _ = writeln!(s, "iterations = {}", r.iterations);
    for ((name, v), sigma) in r.names.iter().zip(&r.params).zip(&r.sigma) {
        let _ = writeln!(s, "{name} = {v:.10e} ± {sigma:.3e}");
    }
    for (name, v, sigma) in &r.derived {
        let _ = writeln!(s, "{name} = {v:.10e} ± {sigma:.3e}");
    }
    let _ = writeln!(s, "r_squared = {:.6}", r.r_squared);
    let _ = writeln!(s, "cost = {:.6e}", r.cost);
    for d in &r.diagnostics {
        let _ = writeln!(s, "diagnostic = {d}");
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning = {w}");
    }
    s
}
