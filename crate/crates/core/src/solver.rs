//! Barrier paths, damped Newton iteration, the continuity method and the
//! degenerate `ε`-sweep.
//!
//! Every solve starts from the barrier `U_{-c} = -c·t(1-t) + (1-t)u0 + t·u1`,
//! which sits inside the admissibility cone once `c ≥ c*`, and marches the
//! right-hand side from `Q(U_{-c})` to the target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimates::{self, BoundsReport};
use crate::linalg::{LinalgError, LinearSolver};
use crate::mesh::{self, Layers, ScalarField};
use crate::operator::{self, AdmissibilityReport, ConeQuantities, OperatorError, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Fraction-to-boundary parameter `τ`.
    pub damping_fraction: f64,
    pub continuation_steps: usize,
    pub min_step_shrink: f64,
    pub linear_solver: LinearSolver,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton_iters: 50,
            damping_fraction: 0.95,
            continuation_steps: 10,
            min_step_shrink: 1e-4,
            linear_solver: LinearSolver::Auto,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = self.newton_tol > 0.0
            && self.max_newton_iters > 0
            && self.damping_fraction > 0.0
            && self.damping_fraction < 1.0
            && self.continuation_steps > 0
            && self.min_step_shrink > 0.0
            && self.min_step_shrink < 1.0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::Input(format!("invalid solver options {self:?}")))
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("Newton did not converge in {iters} iterations; residual {residual:e} worst at layer {layer}, node {node}")]
    NonConvergence { iters: usize, residual: f64, layer: usize, node: usize },
    #[error("line search collapsed at iteration {iteration} (alpha < {alpha:e}); residual {residual:e} worst at layer {layer}, node {node}")]
    StepCollapse { iteration: usize, alpha: f64, residual: f64, layer: usize, node: usize },
    #[error("iterate left the cone: {quantity} = {value:e} at layer {layer}, node {node}")]
    LostAdmissibility { quantity: &'static str, value: f64, layer: usize, node: usize },
    #[error("boundary data not in the admissible set: min B = {0:e}")]
    Barrier(f64),
    #[error("linear solve failed: {0}")]
    Linear(#[from] LinalgError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("{0}")]
    Input(String),
    #[error("at {phase} = {value}: {source}")]
    AtParameter { phase: Phase, value: f64, source: Box<SolverError> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Newton,
    S,
    Eps,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Newton => "newton",
            Phase::S => "s",
            Phase::Eps => "eps",
        })
    }
}

/// One accepted (or initial) Newton iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub phase: Phase,
    /// Continuation parameter `s` or sweep value `ε`; `1` for a bare solve.
    pub param: f64,
    pub iteration: usize,
    pub residual: f64,
    pub min_utt: f64,
    pub min_b: f64,
    pub min_q: f64,
    /// Step length; `0` on the record of the starting point.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationPoint {
    pub s: f64,
    pub residual: f64,
    pub newton_iters: usize,
    pub admissibility: AdmissibilityReport,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: ScalarField,
    pub final_residual_sup: f64,
    pub newton_iters_total: usize,
    pub continuation_trace: Vec<ContinuationPoint>,
    pub admissibility: AdmissibilityReport,
    pub converged: bool,
    /// `c*` of the barrier the solve started from, when it started from one.
    pub c_star: Option<f64>,
}

/// `U_c = c·t(1-t) + (1-t)u0 + t·u1`.
pub fn barrier(spec: &ProblemSpec, c: f64) -> ScalarField {
    let grid = *spec.grid();
    let m = grid.layer_len();
    let (u0, u1) = (spec.u0().values(), spec.u1().values());
    let mut values = Vec::with_capacity(grid.time_nodes() * m);
    for k in 0..grid.time_nodes() {
        let t = grid.time(k);
        values.extend((0..m).map(|i| c * t * (1.0 - t) + (1.0 - t) * u0[i] + t * u1[i]));
    }
    let last = grid.time_nodes() - 1;
    values[..m].copy_from_slice(u0);
    values[last * m..].copy_from_slice(u1);
    ScalarField::from_values(grid, Layers::All, values).expect("finite data")
}

/// The ingredients of `c*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CStar {
    pub value: f64,
    /// `min ((1-t)B_{u0} + t·B_{u1})` over nodes and layers.
    pub min_b_interp: f64,
    /// `sup |∇u0 - ∇u1|²`.
    pub grad_diff_sq: f64,
    pub sup_f: f64,
}

impl CStar {
    /// Smallest `c` with `2c·min_b_interp - grad_diff_sq ≥ target`.
    pub fn candidate(&self, target: f64) -> f64 {
        (target + self.grad_diff_sq) / (2.0 * self.min_b_interp)
    }
}

pub fn compute_c_star(spec: &ProblemSpec) -> Result<CStar, SolverError> {
    let b0 = mesh::inf(&spec.b_of_slice(spec.u0()));
    let b1 = mesh::inf(&spec.b_of_slice(spec.u1()));
    let min_b_interp = b0.min(b1);
    if !(min_b_interp > 0.0) {
        return Err(SolverError::Barrier(min_b_interp));
    }
    let diff = spec.u0().zip_with(spec.u1(), |a, b| a - b);
    let grad_diff_sq = mesh::sup(&mesh::grad_norm_sq(&diff));
    let sup_f = mesh::sup(spec.f());
    let mut c = CStar { value: 0.0, min_b_interp, grad_diff_sq, sup_f };
    c.value = c.candidate(sup_f.max(1.0));
    Ok(c)
}

/// `u + A·t + B`.
pub fn normalize_shift(u: &ScalarField, a: f64, b: f64) -> ScalarField {
    let grid = *u.grid();
    let mut out = u.clone();
    for k in u.layer_range() {
        let shift = a * grid.time(k) + b;
        for v in out.layer_mut(k) {
            *v += shift;
        }
    }
    out
}

fn admissibility_error(rep: &AdmissibilityReport) -> SolverError {
    let (quantity, value, (layer, node)) = if !(rep.min_utt > 0.0) {
        ("u_tt", rep.min_utt, rep.at_utt)
    } else if !(rep.min_b > 0.0) {
        ("B", rep.min_b, rep.at_b)
    } else {
        ("Q", rep.min_q, rep.at_q)
    };
    SolverError::LostAdmissibility { quantity, value, layer, node }
}

fn worst_node(r: &ScalarField) -> (usize, usize) {
    let i = r
        .values()
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
        .0;
    r.locate(i)
}

fn record(phase: Phase, param: f64, iteration: usize, residual: f64, adm: &AdmissibilityReport, alpha: f64) -> TraceRecord {
    TraceRecord { phase, param, iteration, residual, min_utt: adm.min_utt, min_b: adm.min_b, min_q: adm.min_q, alpha }
}

fn keeps_margin(trial: &ScalarField, current: &ScalarField, keep: f64) -> bool {
    trial.values().iter().zip(current.values()).all(|(&t, &c)| t >= keep * c)
}

fn add_interior(u: &ScalarField, h: &[f64], alpha: f64) -> ScalarField {
    let m = u.grid().layer_len();
    let mut out = u.clone();
    for (v, d) in out.values_mut()[m..].iter_mut().zip(h) {
        *v += alpha * d;
    }
    out
}

/// Damped Newton for `Q(u) = rhs` with the boundary layers of `u_init`.
pub fn newton_solve(
    spec: &ProblemSpec,
    rhs: &ScalarField,
    u_init: &ScalarField,
    opts: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    newton_solve_traced(spec, rhs, u_init, opts, 1.0, &mut Vec::new())
}

/// [`newton_solve`] that appends one record per accepted iterate to `trace`,
/// tagged with `param`.
pub fn newton_solve_traced(
    spec: &ProblemSpec,
    rhs: &ScalarField,
    u_init: &ScalarField,
    opts: &SolveOptions,
    param: f64,
    trace: &mut Vec<TraceRecord>,
) -> Result<SolveResult, SolverError> {
    opts.validate()?;
    if u_init.layers() != Layers::All || !u_init.grid().same_shape(spec.grid()) {
        return Err(SolverError::Input("initial guess must cover every layer of the problem grid".into()));
    }
    let keep = 1.0 - opts.damping_fraction;
    let mut u = u_init.clone();
    let mut cone = ConeQuantities::new(&u, spec);
    let mut adm = cone.admissibility();
    if !adm.admissible {
        return Err(admissibility_error(&adm));
    }
    let (mut r, mut rsup) = operator::residual_from(&cone.q, rhs);
    trace.push(record(Phase::Newton, param, 0, rsup, &adm, 0.0));

    for iteration in 1..=opts.max_newton_iters {
        if rsup <= opts.newton_tol {
            return Ok(SolveResult {
                u,
                final_residual_sup: rsup,
                newton_iters_total: iteration - 1,
                continuation_trace: Vec::new(),
                admissibility: adm,
                converged: true,
                c_star: None,
            });
        }
        let mut system = operator::assemble_dq_with(&cone, spec);
        system.set_rhs(&r.map(|v| -v), None);
        let h = system.solve(opts.linear_solver)?;

        let mut alpha = 1.0;
        loop {
            let trial = add_interior(&u, &h, alpha);
            let tc = ConeQuantities::new(&trial, spec);
            if keeps_margin(&tc.utt, &cone.utt, keep)
                && keeps_margin(&tc.b, &cone.b, keep)
                && keeps_margin(&tc.q, &cone.q, keep)
            {
                let (tr, tsup) = operator::residual_from(&tc.q, rhs);
                if tsup < rsup {
                    u = trial;
                    adm = tc.admissibility();
                    cone = tc;
                    r = tr;
                    rsup = tsup;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < opts.min_step_shrink {
                let (layer, node) = worst_node(&r);
                return Err(SolverError::StepCollapse { iteration, alpha, residual: rsup, layer, node });
            }
        }
        if !adm.admissible {
            return Err(admissibility_error(&adm));
        }
        log::debug!("newton {iteration}: residual {rsup:e}, alpha {alpha}");
        trace.push(record(Phase::Newton, param, iteration, rsup, &adm, alpha));
    }
    if rsup <= opts.newton_tol {
        return Ok(SolveResult {
            u,
            final_residual_sup: rsup,
            newton_iters_total: opts.max_newton_iters,
            continuation_trace: Vec::new(),
            admissibility: adm,
            converged: true,
            c_star: None,
        });
    }
    let (layer, node) = worst_node(&r);
    Err(SolverError::NonConvergence { iters: opts.max_newton_iters, residual: rsup, layer, node })
}

/// `(1-s)·start + s·target` on every layer.
fn blend(start: &ScalarField, target: &ScalarField, s: f64) -> ScalarField {
    start.axpby(1.0 - s, target, s)
}

fn with_boundary_layers(interior: &ScalarField, fill: &ScalarField) -> ScalarField {
    let mut out = fill.clone();
    for k in interior.layer_range() {
        out.layer_mut(k).copy_from_slice(interior.layer(k));
    }
    out
}

/// The continuity family `Q(u) = (1-s)Q(U_{-c*}) + s·f`, marched from
/// `s = 0` to `s = 1`.
pub fn continuation_solve(spec: &ProblemSpec, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    continuation_solve_traced(spec, opts, &mut Vec::new())
}

pub fn continuation_solve_traced(
    spec: &ProblemSpec,
    opts: &SolveOptions,
    trace: &mut Vec<TraceRecord>,
) -> Result<SolveResult, SolverError> {
    let c = compute_c_star(spec)?;
    let mut result = continuation_from(spec, &barrier(spec, -c.value), opts, trace)?;
    result.c_star = Some(c.value);
    Ok(result)
}

/// Continuation from an arbitrary admissible start `u_init`, whose own
/// `Q` anchors the `s = 0` end of the ladder.
pub fn continuation_from(
    spec: &ProblemSpec,
    u_init: &ScalarField,
    opts: &SolveOptions,
    trace: &mut Vec<TraceRecord>,
) -> Result<SolveResult, SolverError> {
    opts.validate()?;
    if !spec.is_nondegenerate() {
        return Err(SolverError::Input("continuation needs f > 0 at every node".into()));
    }
    if !spec.matches_boundary(u_init) {
        return Err(SolverError::Input("initial guess does not carry the boundary data".into()));
    }
    let cone = ConeQuantities::new(u_init, spec);
    let adm = cone.admissibility();
    if !adm.admissible {
        return Err(admissibility_error(&adm));
    }
    let anchor = with_boundary_layers(&cone.q, spec.f());
    let (_, r0) = operator::residual_from(&cone.q, &anchor);
    let mut points = vec![ContinuationPoint { s: 0.0, residual: r0, newton_iters: 0, admissibility: adm }];
    trace.push(record(Phase::S, 0.0, 0, r0, &adm, 0.0));

    let mut u = u_init.clone();
    let mut last = None;
    let mut s = 0.0;
    let mut ds = 1.0 / opts.continuation_steps as f64;
    let mut total = 0;
    while s < 1.0 {
        let next = if s + ds > 1.0 - 1e-12 { 1.0 } else { s + ds };
        let rhs = blend(&anchor, spec.f(), next);
        let mut local = Vec::new();
        match newton_solve_traced(spec, &rhs, &u, opts, next, &mut local) {
            Ok(res) => {
                trace.extend(local.into_iter().map(|r| TraceRecord { phase: Phase::S, ..r }));
                total += res.newton_iters_total;
                points.push(ContinuationPoint {
                    s: next,
                    residual: res.final_residual_sup,
                    newton_iters: res.newton_iters_total,
                    admissibility: res.admissibility,
                });
                u = res.u.clone();
                last = Some(res);
                s = next;
            }
            Err(err) => {
                trace.extend(local.into_iter().map(|r| TraceRecord { phase: Phase::S, ..r }));
                ds *= 0.5;
                log::info!("continuation step to s = {next} failed ({err}); halving to ds = {ds:e}");
                if ds < opts.min_step_shrink {
                    return Err(SolverError::AtParameter { phase: Phase::S, value: next, source: Box::new(err) });
                }
            }
        }
    }
    let res = last.expect("ladder takes at least one step");
    Ok(SolveResult {
        final_residual_sup: res.final_residual_sup,
        admissibility: res.admissibility,
        converged: res.converged,
        u: res.u,
        newton_iters_total: total,
        continuation_trace: points,
        c_star: None,
    })
}

/// Outcome of one rung of an `ε`-sweep.
#[derive(Debug)]
pub struct SweepEntry {
    pub eps: f64,
    pub outcome: Result<(SolveResult, BoundsReport), SolverError>,
    pub warm_started: bool,
}

/// Right-hand side `ε·f / sup f`, or `ε` everywhere when `f ≡ 0`.
pub fn scaled_rhs(spec: &ProblemSpec, eps: f64) -> ScalarField {
    let sup_f = mesh::sup(spec.f());
    if sup_f > 0.0 {
        spec.f().map(|v| eps * v / sup_f)
    } else {
        ScalarField::constant(*spec.grid(), eps)
    }
}

/// Solves `Q(u) = ε·f̂` down a decreasing ladder of `ε`, warm-starting each
/// rung from the previous solution and falling back to a cold continuation.
pub fn epsilon_sweep(spec: &ProblemSpec, epsilons: &[f64], opts: &SolveOptions) -> Result<Vec<SweepEntry>, SolverError> {
    epsilon_sweep_traced(spec, epsilons, opts, &mut Vec::new())
}

pub fn epsilon_sweep_traced(
    spec: &ProblemSpec,
    epsilons: &[f64],
    opts: &SolveOptions,
    trace: &mut Vec<TraceRecord>,
) -> Result<Vec<SweepEntry>, SolverError> {
    opts.validate()?;
    if epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(SolverError::Input("sweep values must be positive".into()));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SolverError::Input("sweep values must be strictly decreasing".into()));
    }
    let mut entries = Vec::with_capacity(epsilons.len());
    let mut previous: Option<ScalarField> = None;
    for &eps in epsilons {
        let local_spec = spec.with_f(scaled_rhs(spec, eps))?;
        let c = compute_c_star(&local_spec)?;
        let mut local = Vec::new();
        let mut warm_started = false;
        let mut outcome = Err(SolverError::Input("not attempted".into()));
        if let Some(prev) = &previous {
            outcome = newton_solve_traced(&local_spec, local_spec.f(), prev, opts, eps, &mut local);
            warm_started = outcome.is_ok();
            if let Err(e) = &outcome {
                log::info!("warm start at eps = {eps} failed ({e}); restarting from the barrier");
            }
        }
        if outcome.is_err() {
            outcome = continuation_solve_traced(&local_spec, opts, &mut local);
        }
        trace.extend(local.into_iter().map(|r| TraceRecord { phase: Phase::Eps, param: eps, ..r }));
        let outcome = outcome
            .map(|mut res| {
                res.c_star = Some(c.value);
                let bounds = estimates::bounds_report(&res.u, &local_spec, c.value);
                previous = Some(res.u.clone());
                (res, bounds)
            })
            .map_err(|e| SolverError::AtParameter { phase: Phase::Eps, value: eps, source: Box::new(e) });
        entries.push(SweepEntry { eps, outcome, warm_started });
    }
    Ok(entries)
}

/// Solves from `U_{-c*}` and from `U_{-2c*}` and returns the sup-distance of
/// the two solutions.
pub fn uniqueness_probe(spec: &ProblemSpec, opts: &SolveOptions) -> Result<f64, SolverError> {
    let c = compute_c_star(spec)?.value;
    let first = continuation_from(spec, &barrier(spec, -c), opts, &mut Vec::new())?;
    let second = continuation_from(spec, &barrier(spec, -2.0 * c), opts, &mut Vec::new())?;
    Ok(first.u.sup_distance(&second.u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{GridSpec, SpaceField};

    fn flat(grid: GridSpec, f: f64) -> ProblemSpec {
        ProblemSpec::new(
            SpaceField::constant(grid, 1.0),
            0.0,
            ScalarField::constant(grid, f),
            SpaceField::constant(grid, 0.0),
            SpaceField::constant(grid, 0.0),
        )
        .unwrap()
    }

    fn exact(grid: GridSpec, scale: f64) -> ScalarField {
        ScalarField::from_fn(grid, |_, _, t| scale * (t * t - t))
    }

    #[test]
    fn barrier_examples() {
        let g = GridSpec::new(1, 8, 5).unwrap();
        let spec = flat(g, 2.0);
        let u = barrier(&spec, -2.0);
        assert_eq!(u.at(2, 3), -0.5);
        let lin = SpaceField::from_fn(g, |x, _| 0.1 * x.sin());
        let spec = spec.with_boundary(lin.clone(), SpaceField::constant(g, 0.3)).unwrap();
        let u = barrier(&spec, 0.0);
        assert_eq!(u.layer(0), lin.values());
        assert_eq!(u.layer(4), vec![0.3; 8].as_slice());
        assert!((u.at(1, 2) - (0.75 * lin.values()[2] + 0.25 * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn c_star_examples() {
        let g = GridSpec::new(1, 16, 5).unwrap();
        let c = compute_c_star(&flat(g, 2.0)).unwrap();
        assert_eq!(c.value, 1.0);
        let tiny = compute_c_star(&flat(g, 0.25)).unwrap();
        assert_eq!(tiny.value, 0.5);
        assert_eq!(tiny.candidate(0.5), 2.0 * tiny.candidate(0.25));

        let a = SpaceField::from_fn(g, |x, _| 2.0 + x.cos());
        let u0 = SpaceField::from_fn(g, |x, _| 0.1 * x.sin());
        let spec = ProblemSpec::new(a, 0.5, ScalarField::constant(g, 3.0), u0.clone(), u0.clone()).unwrap();
        let c = compute_c_star(&spec).unwrap();
        assert_eq!(c.grad_diff_sq, 0.0);
        let m = mesh::inf(&spec.b_of_slice(&u0));
        assert!((c.value - 3.0 / (2.0 * m)).abs() < 1e-14);

        let q0 = operator::apply_q(&barrier(&spec, -c.value), &spec);
        assert!(mesh::inf(&q0) >= 3.0 - 1e-12);
    }

    #[test]
    fn c_star_rejects_boundary_outside_cone() {
        let g = GridSpec::new(1, 16, 5).unwrap();
        let spec = flat(g, 1.0);
        let bad = SpaceField::from_fn(g, |x, _| 2.0 * x.sin());
        assert!(spec.with_boundary(bad, SpaceField::constant(g, 0.0)).is_err());
    }

    #[test]
    fn separable_solution_needs_no_iterations() {
        let g = GridSpec::new(1, 64, 33).unwrap();
        let spec = flat(g, 2.0);
        let res = continuation_solve(&spec, &SolveOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.newton_iters_total, 0);
        assert!(res.u.sup_distance(&exact(g, 1.0)) <= 1e-8);
        assert_eq!(res.continuation_trace[0].residual, 0.0);
        assert_eq!(res.continuation_trace.len(), 11);
    }

    #[test]
    fn newton_recovers_other_constant() {
        let g = GridSpec::new(1, 32, 17).unwrap();
        let spec = flat(g, 8.0);
        let init = barrier(&spec, -1.0);
        let mut trace = Vec::new();
        let res = newton_solve_traced(&spec, spec.f(), &init, &SolveOptions::default(), 1.0, &mut trace).unwrap();
        assert!(res.u.sup_distance(&exact(g, 4.0)) < 1e-9);
        assert_eq!(res.newton_iters_total, 1);
        for w in trace.windows(2) {
            assert!(w[1].residual < w[0].residual);
            assert!(w[1].min_utt > 0.0 && w[1].min_b > 0.0 && w[1].min_q > 0.0);
        }
    }

    #[test]
    fn manufactured_inverse_crime() {
        let g = GridSpec::new(1, 32, 17).unwrap();
        let u0 = SpaceField::from_fn(g, |x, _| 0.1 * x.sin());
        let star = ScalarField::from_fn(g, |x, _, t| t * t - t + 0.1 * x.sin());
        let base = ProblemSpec::new(
            SpaceField::constant(g, 1.0),
            0.0,
            ScalarField::constant(g, 1.0),
            u0.clone(),
            u0,
        )
        .unwrap();
        let q = operator::apply_q(&star, &base);
        let spec = base.with_f(with_boundary_layers(&q, base.f())).unwrap();
        let res = continuation_solve(&spec, &SolveOptions::default()).unwrap();
        assert!(res.final_residual_sup <= 1e-10);
        assert!(res.u.sup_distance(&star) < 1e-9);
    }

    #[test]
    fn larger_rhs_gives_smaller_solution() {
        let g = GridSpec::new(1, 32, 17).unwrap();
        let a = SpaceField::from_fn(g, |x, _| 1.0 + 0.3 * x.sin());
        let u0 = SpaceField::from_fn(g, |x, _| 0.1 * x.cos());
        let u1 = SpaceField::from_fn(g, |x, _| 0.05 * (2.0 * x).sin());
        let f_small = ScalarField::from_fn(g, |x, _, t| 1.0 + 0.2 * (x + t).sin());
        let f_large = f_small.map(|v| v + 0.5);
        let opts = SolveOptions::default();
        let small = ProblemSpec::new(a.clone(), 0.3, f_small, u0.clone(), u1.clone()).unwrap();
        let large = small.with_f(f_large).unwrap();
        let us = continuation_solve(&small, &opts).unwrap().u;
        let ul = continuation_solve(&large, &opts).unwrap().u;
        let tol = 10.0 * opts.newton_tol;
        assert!(ul.values().iter().zip(us.values()).all(|(l, s)| *l <= s + tol));
    }

    #[test]
    fn errors_carry_locations() {
        let g = GridSpec::new(1, 16, 9).unwrap();
        let spec = flat(g, 2.0);
        let mut bad = barrier(&spec, -1.0);
        bad.set(4, 5, 1.0);
        match newton_solve(&spec, spec.f(), &bad, &SolveOptions::default()) {
            Err(SolverError::LostAdmissibility { quantity: "u_tt", layer, node, .. }) => {
                assert!((3..=5).contains(&layer));
                assert_eq!(node, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
        let opts = SolveOptions { max_newton_iters: 1, ..Default::default() };
        let wavy = spec.with_boundary(SpaceField::from_fn(g, |x, _| 0.2 * x.sin()), SpaceField::constant(g, 0.0)).unwrap();
        let init = barrier(&wavy, -3.0);
        assert!(matches!(
            newton_solve(&wavy, wavy.f(), &init, &opts),
            Err(SolverError::NonConvergence { iters: 1, .. })
        ));
        let opts = SolveOptions { damping_fraction: 1.0, ..Default::default() };
        assert!(matches!(continuation_solve(&spec, &opts), Err(SolverError::Input(_))));
    }

    #[test]
    fn degenerate_target_is_refused_by_continuation() {
        let g = GridSpec::new(1, 16, 9).unwrap();
        let spec = flat(g, 0.0);
        assert!(matches!(continuation_solve(&spec, &SolveOptions::default()), Err(SolverError::Input(_))));
    }

    #[test]
    fn normalize_shift_examples() {
        let g = GridSpec::new(2, 8, 9).unwrap();
        let u = ScalarField::from_fn(g, |x, y, t| t * t - t + 0.1 * x.sin() * y.cos());
        assert_eq!(normalize_shift(&u, 0.0, 0.0), u);
        let spec = flat(g, 1.0);
        let v = normalize_shift(&u, 0.5, -0.25);
        let (q, qv) = (operator::apply_q(&u, &spec), operator::apply_q(&v, &spec));
        let scale = mesh::sup_norm(&q).max(1.0);
        assert!(q.sup_distance(&qv) <= 1e-13 * scale);
        let last = g.time_nodes() - 1;
        for i in 0..g.layer_len() {
            assert_eq!(v.at(0, i), u.at(0, i) - 0.25);
            assert!((v.at(last, i) - (u.at(last, i) + 0.25)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_rung_sweep_matches_continuation() {
        let g = GridSpec::new(1, 16, 9).unwrap();
        let spec = flat(g, 2.0);
        let opts = SolveOptions::default();
        let sweep = epsilon_sweep(&spec, &[1.0], &opts).unwrap();
        let direct = continuation_solve(&spec.with_f(scaled_rhs(&spec, 1.0)).unwrap(), &opts).unwrap();
        let (res, _) = sweep[0].outcome.as_ref().unwrap();
        assert_eq!(res.u, direct.u);
        assert!(epsilon_sweep(&spec, &[0.1, 1.0], &opts).is_err());
        assert!(epsilon_sweep(&spec, &[1.0, -1.0], &opts).is_err());
    }

    #[test]
    fn uniqueness_on_exact_instance() {
        let g = GridSpec::new(1, 16, 9).unwrap();
        let d = uniqueness_probe(&flat(g, 2.0), &SolveOptions::default()).unwrap();
        assert!(d <= 1e-9);
    }
}
