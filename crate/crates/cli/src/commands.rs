use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use qgeo::estimates::{self, BoundsReport, WeakC2};
use qgeo::mesh::{self, ScalarField};
use qgeo::operator::AdmissibilityReport;
use qgeo::solver::{self, TraceRecord};
use qgeo::symcone;
use serde::Serialize;
use serde_json::json;

use crate::config::{self, Loaded};
use crate::{plot, CliError};

/// Measurements below this are treated as rounding noise in growth ratios.
pub const ROUNDING_FLOOR: f64 = 1e-10;

struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    fn trace(&self, trace: &[TraceRecord]) -> Result<(), CliError> {
        self.write("trace.jsonl", |w| {
            for r in trace {
                serde_json::to_writer(&mut *w, r)?;
                writeln!(w)?;
            }
            Ok(())
        })?;
        self.write("newton_residual.csv", |w| plot::write_newton(trace, w))
    }

    fn field(&self, stem: &str, u: &ScalarField, binary: bool) -> Result<(), CliError> {
        self.write(&format!("{stem}.csv"), |w| mesh::write_csv(u, w).map_err(io::Error::other))?;
        if binary {
            self.write(&format!("{stem}.bin"), |w| mesh::write_binary(u, w).map_err(io::Error::other))?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Refinement {
    n: usize,
    nt: usize,
    hx: f64,
    sup_error: f64,
    newton_iters: usize,
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    converged: bool,
    final_residual_sup: f64,
    newton_iters_total: usize,
    c_star: Option<f64>,
    bounds_passed: bool,
    sup_error_exact: Option<f64>,
    refinement: Vec<Refinement>,
    observed_orders: Vec<f64>,
    passed: bool,
}

/// Solves the configured problem and writes the solution with its reports.
pub fn solve(l: &Loaded, out_dir: &Path) -> Result<bool, CliError> {
    let grid = l.grid()?;
    let spec = l.spec_on(grid)?;
    if !spec.is_nondegenerate() {
        return Err(CliError::Config("solve needs f > 0 at every node; use `sweep` for the degenerate limit".into()));
    }
    let problem = l.problem()?;
    if !problem.refine.is_empty() && problem.exact.is_none() {
        return Err(CliError::Config("refinement levels need problem.exact".into()));
    }
    let opts = &l.config.solver;
    let out = Out::new(out_dir)?;

    let mut trace = Vec::new();
    let result = solver::continuation_solve_traced(&spec, opts, &mut trace);
    out.trace(&trace)?;
    let res = result.map_err(|e| CliError::Numerical(e.to_string()))?;
    out.write("continuation.csv", |w| plot::write_continuation(&res.continuation_trace, w))?;

    let c = match res.c_star {
        Some(c) => c,
        None => solver::compute_c_star(&spec).map_err(|e| CliError::Numerical(e.to_string()))?.value,
    };
    let bounds = estimates::bounds_report(&res.u, &spec, c);
    out.field("solution", &res.u, l.config.output.binary)?;
    out.json("bounds.json", &bounds)?;
    report_bounds(&bounds);

    let sup_error_exact = l.exact_on(grid)?.map(|e| res.u.sup_distance(&e));
    let mut refinement = Vec::new();
    for &[n, nt] in &problem.refine {
        let g = l.grid_at(n, nt)?;
        let s = l.spec_on(g)?;
        let r = solver::continuation_solve(&s, opts).map_err(|e| CliError::Numerical(format!("refinement level {n}x{nt}: {e}")))?;
        let exact = l.exact_on(g)?.expect("checked above");
        refinement.push(Refinement { n, nt, hx: g.hx(), sup_error: r.u.sup_distance(&exact), newton_iters: r.newton_iters_total });
    }
    let observed_orders: Vec<f64> = refinement
        .windows(2)
        .map(|w| (w[0].sup_error / w[1].sup_error).ln() / (w[0].hx / w[1].hx).ln())
        .collect();
    let orders_ok = observed_orders.iter().all(|&p| p >= problem.min_order);
    if let Some(e) = sup_error_exact {
        println!("sup error against exact solution: {e:e}");
    }
    for (w, p) in refinement.windows(2).zip(&observed_orders) {
        println!("observed order {}x{} -> {}x{}: {p:.3}", w[0].n, w[0].nt, w[1].n, w[1].nt);
    }

    let passed = res.converged && bounds.passed && orders_ok;
    out.json(
        "summary.json",
        &SolveSummary {
            converged: res.converged,
            final_residual_sup: res.final_residual_sup,
            newton_iters_total: res.newton_iters_total,
            c_star: res.c_star,
            bounds_passed: bounds.passed,
            sup_error_exact,
            refinement,
            observed_orders,
            passed,
        },
    )?;
    println!(
        "solve: converged = {}, residual = {:e}, newton iterations = {}, checks {}",
        res.converged,
        res.final_residual_sup,
        res.newton_iters_total,
        if passed { "passed" } else { "FAILED" }
    );
    Ok(passed)
}

#[derive(Debug, Serialize)]
struct Uniformity {
    measurement: &'static str,
    tail: Vec<f64>,
    /// Largest tail value over the value at the largest tail `ε`.
    growth: f64,
    /// Largest over smallest tail value.
    spread: f64,
}

fn uniformity(measurement: &'static str, tail: Vec<f64>) -> Uniformity {
    let max = tail.iter().cloned().fold(0.0, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let first = tail.first().copied().unwrap_or(0.0);
    let growth = if max <= ROUNDING_FLOOR { 1.0 } else { max / first.max(ROUNDING_FLOOR) };
    let spread = if max <= ROUNDING_FLOOR { 1.0 } else { max / min.max(ROUNDING_FLOOR) };
    Uniformity { measurement, tail, growth, spread }
}

/// Runs the `ε`-ladder and checks that weak-C² measurements stay bounded.
pub fn sweep(l: &Loaded, out_dir: &Path) -> Result<bool, CliError> {
    let spec = l.spec_on(l.grid()?)?;
    let cfg = &l.config.sweep;
    let out = Out::new(out_dir)?;
    let mut trace = Vec::new();
    let entries = solver::epsilon_sweep_traced(&spec, &cfg.eps, &l.config.solver, &mut trace)
        .map_err(|e| CliError::Config(e.to_string()))?;
    out.trace(&trace)?;

    let mut rows: Vec<(f64, WeakC2)> = Vec::new();
    let mut all_ok = true;
    out.write("sweep.jsonl", |w| {
        for entry in &entries {
            let line = match &entry.outcome {
                Ok((res, bounds)) => json!({
                    "eps": entry.eps,
                    "converged": res.converged,
                    "warm_started": entry.warm_started,
                    "newton_iters": res.newton_iters_total,
                    "residual": res.final_residual_sup,
                    "bounds": bounds,
                }),
                Err(e) => json!({ "eps": entry.eps, "converged": false, "error": e.to_string() }),
            };
            serde_json::to_writer(&mut *w, &line)?;
            writeln!(w)?;
        }
        Ok(())
    })?;
    for entry in &entries {
        match &entry.outcome {
            Ok((res, bounds)) => {
                rows.push((entry.eps, bounds.weak_c2));
                if !(res.converged && bounds.passed) {
                    all_ok = false;
                    eprintln!("eps = {:e}: checks failed", entry.eps);
                    report_bounds(bounds);
                }
                println!(
                    "eps = {:e}: sup u_tt = {:e}, sup |lap u| = {:e}, sup |grad u_t| = {:e}",
                    entry.eps, bounds.weak_c2.sup_utt, bounds.weak_c2.sup_lap_u, bounds.weak_c2.sup_grad_ut
                );
            }
            Err(e) => {
                all_ok = false;
                eprintln!("{e}");
            }
        }
    }
    out.write("weak_c2.csv", |w| plot::write_weak_c2(&rows, w))?;
    if let Some((res, _)) = entries.iter().rev().find_map(|e| e.outcome.as_ref().ok()) {
        out.field("solution_last", &res.u, l.config.output.binary)?;
    }

    let tail: Vec<&WeakC2> = rows.iter().filter(|(e, _)| *e <= cfg.tail_below).map(|(_, w)| w).collect();
    let measures = vec![
        uniformity("sup_utt", tail.iter().map(|w| w.sup_utt).collect()),
        uniformity("sup_lap_u", tail.iter().map(|w| w.sup_lap_u).collect()),
        uniformity("sup_grad_ut", tail.iter().map(|w| w.sup_grad_ut).collect()),
    ];
    let max_growth = measures.iter().map(|m| m.growth).fold(0.0, f64::max);
    let uniform = !tail.is_empty() && max_growth <= cfg.max_growth;
    let passed = all_ok && uniform;
    out.json(
        "uniformity.json",
        &json!({
            "tail_below": cfg.tail_below,
            "max_growth_allowed": cfg.max_growth,
            "max_growth": max_growth,
            "measurements": measures,
            "all_rungs_passed": all_ok,
            "passed": passed,
        }),
    )?;
    println!(
        "sweep: {} rungs, tail growth {max_growth:.3} (limit {}), checks {}",
        entries.len(),
        cfg.max_growth,
        if passed { "passed" } else { "FAILED" }
    );
    Ok(passed)
}

/// Midpoint-concavity scan plus the comparison battery.
pub fn scan(l: &Loaded, out_dir: &Path) -> Result<bool, CliError> {
    let cfg = &l.config.scan;
    let report = symcone::midpoint_concavity_scan(cfg.k, cfg.n, cfg.field, cfg.trials, cfg.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let out = Out::new(out_dir)?;
    out.write("scan.jsonl", |w| report.write_lines(w))?;
    let battery = (cfg.comparison_trials > 0).then(|| symcone::comparison_battery(cfg.n, cfg.comparison_trials, cfg.seed));
    if let Some(b) = &battery {
        out.json("comparison.json", b)?;
    }
    let scan_ok = !report.theorem_backed || report.violations == 0;
    let battery_ok = battery.as_ref().is_none_or(|b| b.violations == 0);
    let passed = scan_ok && battery_ok;
    println!(
        "scan k = {} n = {} ({:?}): {} trials, {} violations, {} sampling failures, worst margin {:e}{}",
        report.k,
        report.n,
        report.field,
        report.trials,
        report.violations,
        report.sampling_failures,
        report.worst_margin,
        if report.theorem_backed { "" } else { " (exploratory)" }
    );
    if let Some(b) = &battery {
        println!("comparison battery: {} trials, {} violations, {} sampling failures", b.trials, b.violations, b.sampling_failures);
    }
    if let Some(t) = report.worst_trial.filter(|_| report.violations > 0) {
        eprintln!("worst violation at trial {t}");
    }
    Ok(passed)
}

/// Re-checks a dumped solution against the configured problem.
pub fn verify(l: &Loaded, solution: &Path, out_dir: &Path) -> Result<bool, CliError> {
    let grid = l.grid()?;
    let spec = l.spec_on(grid)?;
    let u = config::read_field(solution, grid)?;
    let c = solver::compute_c_star(&spec).map_err(|e| CliError::Numerical(e.to_string()))?.value;
    let bounds = estimates::bounds_report(&u, &spec, c);
    let boundary_ok = spec.matches_boundary(&u);
    let residual_tol = 10.0 * l.config.solver.newton_tol;
    let residual_ok = bounds.residual_sup <= residual_tol;
    let passed = bounds.passed && boundary_ok && residual_ok;
    let out = Out::new(out_dir)?;
    out.json(
        "verify.json",
        &json!({
            "solution": solution.display().to_string(),
            "boundary_matches": boundary_ok,
            "residual_tolerance": residual_tol,
            "residual_ok": residual_ok,
            "bounds": bounds,
            "passed": passed,
        }),
    )?;
    if !boundary_ok {
        eprintln!("boundary layers do not match u0 and u1");
    }
    if !residual_ok {
        eprintln!("residual {:e} exceeds {residual_tol:e}", bounds.residual_sup);
    }
    report_bounds(&bounds);
    println!("verify: checks {}", if passed { "passed" } else { "FAILED" });
    Ok(passed)
}

fn report_admissibility(a: &AdmissibilityReport) {
    if a.min_utt <= 0.0 {
        eprintln!("cone violation: u_tt = {:e} at layer {}, node {}", a.min_utt, a.at_utt.0, a.at_utt.1);
    }
    if a.min_b <= 0.0 {
        eprintln!("cone violation: B = {:e} at layer {}, node {}", a.min_b, a.at_b.0, a.at_b.1);
    }
    if a.min_q <= 0.0 {
        eprintln!("cone violation: Q = {:e} at layer {}, node {}", a.min_q, a.at_q.0, a.at_q.1);
    }
}

fn report_bounds(b: &BoundsReport) {
    report_admissibility(&b.admissibility);
    if !b.c0.passed() {
        eprintln!("C0 sandwich fails: worst lower {:e}, worst upper {:e}", b.c0.worst_lower, b.c0.worst_upper);
    }
    if !b.ut_boundary_bounds.passed() {
        eprintln!(
            "u_t chain fails: worst violation {:e}, {} extremality failures",
            b.ut_boundary_bounds.worst_chain_violation, b.ut_boundary_bounds.extremality_failures
        );
    }
}
