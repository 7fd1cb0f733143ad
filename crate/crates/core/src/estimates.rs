//! Checks of the a priori bounds on computed solutions.
//!
//! The sandwich `U_{-c} ≤ u ≤ (1-t)u0 + t·u1` and the boundary chain for
//! `u_t` are pass/fail; the weak-`C²` quantities are measurements only.

use serde::{Deserialize, Serialize};

use crate::mesh::{self, Layers, ScalarField};
use crate::operator::{self, AdmissibilityReport, ConeQuantities, ProblemSpec};
use crate::solver;

/// Relative slack of the pointwise inequalities.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C0Check {
    pub c0_lower_ok: bool,
    pub c0_upper_ok: bool,
    /// `max (U_{-c} - u)`; positive values are violations.
    pub worst_lower: f64,
    /// `max (u - ((1-t)u0 + t·u1))`.
    pub worst_upper: f64,
    pub slack: f64,
}

impl C0Check {
    pub fn passed(&self) -> bool {
        self.c0_lower_ok && self.c0_upper_ok
    }
}

fn scale_of(u: &ScalarField, c: f64) -> f64 {
    mesh::sup_norm(u).max(c.abs()).max(1.0)
}

pub fn check_c0(u: &ScalarField, spec: &ProblemSpec, c: f64) -> C0Check {
    let lower = solver::barrier(spec, -c);
    let upper = solver::barrier(spec, 0.0);
    let slack = CHECK_TOL * scale_of(u, c);
    let worst_lower = lower.values().iter().zip(u.values()).map(|(l, v)| l - v).fold(f64::NEG_INFINITY, f64::max);
    let worst_upper = u.values().iter().zip(upper.values()).map(|(v, h)| v - h).fold(f64::NEG_INFINITY, f64::max);
    C0Check { c0_lower_ok: worst_lower <= slack, c0_upper_ok: worst_upper <= slack, worst_lower, worst_upper, slack }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtBounds {
    pub min_ut0: f64,
    pub max_ut0: f64,
    pub min_ut1: f64,
    pub max_ut1: f64,
    /// Admissible ranges `[min(u1-u0) - c, max(u1-u0)]` and `[min(u1-u0), max(u1-u0) + c]`.
    pub range_ut0: (f64, f64),
    pub range_ut1: (f64, f64),
    pub chain_ok: bool,
    /// Largest amount by which any link of the chain fails; `≤ 0` when it holds.
    pub worst_chain_violation: f64,
    pub slack: f64,
    pub boundary_extremal: bool,
    /// Spatial columns whose `u_t` extremes are not on the boundary layers.
    pub extremality_failures: usize,
}

impl UtBounds {
    pub fn passed(&self) -> bool {
        self.chain_ok && self.boundary_extremal
    }
}

/// `-c + u1 - u0 ≤ u_t(0) ≤ u1 - u0 ≤ u_t(1) ≤ u1 - u0 + c` nodewise, and
/// extremes of `u_t` on the boundary layers in every column.
pub fn check_ut_bounds(u: &ScalarField, spec: &ProblemSpec, c: f64) -> UtBounds {
    let grid = *u.grid();
    let (ut0, ut1) = mesh::d_t_boundary(u);
    let ut = mesh::d_t(u);
    let utt = mesh::d_tt(u);
    let d = spec.u1().zip_with(spec.u0(), |a, b| a - b);

    let m = grid.layer_len();
    let ht = grid.ht();
    let mut uttt: f64 = 0.0;
    for k in 1..grid.time_nodes() - 2 {
        for node in 0..m {
            uttt = uttt.max((utt.at(k + 1, node) - utt.at(k, node)).abs() / ht);
        }
    }
    let slack = CHECK_TOL * scale_of(u, c) + ht * ht * uttt;

    let mut worst = f64::NEG_INFINITY;
    for i in 0..m {
        let (a, b, di) = (ut0.values()[i], ut1.values()[i], d.values()[i]);
        for v in [(-c + di) - a, a - di, di - b, b - (di + c)] {
            worst = worst.max(v);
        }
    }

    let mut failures = 0;
    for i in 0..m {
        let (lo, hi) = (ut0.values()[i], ut1.values()[i]);
        let inner = grid.interior_layers().map(|k| ut.at(k, i));
        let (imin, imax) = inner.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !(lo <= imin && hi >= imax && lo <= hi) {
            failures += 1;
        }
    }

    let stats = |f: &crate::mesh::SpaceField| (mesh::inf(f), mesh::sup(f));
    let (min_ut0, max_ut0) = stats(&ut0);
    let (min_ut1, max_ut1) = stats(&ut1);
    let (dmin, dmax) = stats(&d);
    UtBounds {
        min_ut0,
        max_ut0,
        min_ut1,
        max_ut1,
        range_ut0: (dmin - c, dmax),
        range_ut1: (dmin, dmax + c),
        chain_ok: worst <= slack,
        worst_chain_violation: worst,
        slack,
        boundary_extremal: failures == 0,
        extremality_failures: failures,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakC2 {
    pub sup_utt: f64,
    pub at_utt: (usize, usize),
    pub sup_lap_u: f64,
    pub at_lap_u: (usize, usize),
    pub sup_grad_ut: f64,
    pub at_grad_ut: (usize, usize),
    pub sup_grad_u: f64,
    pub at_grad_u: (usize, usize),
    /// `sup |Δ(u - (1-t)u0 - t·u1)|`, which vanishes on the constant path.
    pub sup_lap_dev: f64,
}

fn argmax(field: &ScalarField, op: impl Fn(f64) -> f64) -> (f64, (usize, usize)) {
    let (i, v) = field
        .values()
        .iter()
        .map(|&v| op(v))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) });
    (v, field.locate(i))
}

fn norm_of(components: &[ScalarField]) -> ScalarField {
    let first = &components[0];
    let mut out = first.map(|v| v * v);
    for c in &components[1..] {
        out = out.zip_with(c, |acc, v| acc + v * v);
    }
    out.map(f64::sqrt)
}

pub fn weak_c2_report(u: &ScalarField, spec: &ProblemSpec) -> WeakC2 {
    let (sup_utt, at_utt) = argmax(&mesh::d_tt(u), |v| v);
    let (sup_lap_u, at_lap_u) = argmax(&mesh::laplacian(u), f64::abs);
    let (sup_grad_ut, at_grad_ut) = argmax(&norm_of(&mesh::grad_t(u)), |v| v);
    let (sup_grad_u, at_grad_u) = argmax(&norm_of(&mesh::gradient(u)), |v| v);
    let dev = u.axpby(1.0, &solver::barrier(spec, 0.0), -1.0);
    WeakC2 {
        sup_utt,
        at_utt,
        sup_lap_u,
        at_lap_u,
        sup_grad_ut,
        at_grad_ut,
        sup_grad_u,
        at_grad_u,
        sup_lap_dev: mesh::sup_norm(&mesh::laplacian(&dev)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityErrors {
    /// `sup |dQ(t)|`.
    pub dq_t: f64,
    /// `sup |dQ(t²) - 2B_u|`.
    pub dq_t2: f64,
    /// `sup |dQ(u) - (2·rhs - (a + b|∇u|²)u_tt)|`.
    pub dq_u: f64,
}

/// `dQ(t)`, `dQ(t²)` and `dQ(u)` on interior layers.
pub fn identity_fields(u: &ScalarField, spec: &ProblemSpec) -> [ScalarField; 3] {
    let grid = *u.grid();
    let system = operator::assemble_dq(u, spec);
    let t = ScalarField::from_fn(grid, |_, _, t| t);
    let t2 = ScalarField::from_fn(grid, |_, _, t| t * t);
    [system.apply(&t), system.apply(&t2), system.apply(u)]
}

/// `(a + b|∇u|²)·u_tt` on interior layers.
pub fn potential_term(u: &ScalarField, spec: &ProblemSpec) -> ScalarField {
    let grid = *u.grid();
    let g2 = mesh::grad_norm_sq(&u.interior());
    let utt = mesh::d_tt(u);
    let m = grid.layer_len();
    let a = spec.a().values();
    let vals = (0..utt.values().len()).map(|i| (a[i % m] + spec.b() * g2.values()[i]) * utt.values()[i]).collect();
    ScalarField::from_values(grid, Layers::Interior, vals).expect("finite")
}

pub fn identity_suite(u: &ScalarField, spec: &ProblemSpec, rhs: &ScalarField) -> IdentityErrors {
    let [dq_t, dq_t2, dq_u] = identity_fields(u, spec);
    let b = operator::compute_b(u, spec).interior();
    let pot = potential_term(u, spec);
    let rhs = rhs.interior();
    IdentityErrors {
        dq_t: mesh::sup_norm(&dq_t),
        dq_t2: dq_t2.axpby(1.0, &b, -2.0).values().iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        dq_u: dq_u.zip_with(&rhs, |d, r| d - 2.0 * r).axpby(1.0, &pot, 1.0).values().iter().fold(0.0, |m: f64, v| m.max(v.abs())),
    }
}

/// Quantities of `f` that the interior estimates depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhsDependencies {
    pub sup_f: f64,
    pub sup_neg_ftt: f64,
    /// `sup f_t²/f` over nodes with `f > 0`.
    pub sup_ft2_over_f: f64,
    pub sup_neg_lap_f: f64,
    pub sup_grad_sqrt_f: f64,
}

pub fn rhs_dependencies(f: &ScalarField) -> RhsDependencies {
    let ftt = mesh::d_tt(f);
    let ft = mesh::d_t(f);
    let fi = f.interior();
    let ft2 = ft
        .values()
        .iter()
        .zip(fi.values())
        .filter(|(_, &v)| v > 0.0)
        .map(|(d, v)| d * d / v)
        .fold(0.0, f64::max);
    let lap = mesh::laplacian(f);
    let sqrt_f = f.map(|v| v.max(0.0).sqrt());
    RhsDependencies {
        sup_f: mesh::sup(f),
        sup_neg_ftt: (-mesh::inf(&ftt)).max(0.0),
        sup_ft2_over_f: ft2,
        sup_neg_lap_f: (-mesh::inf(&lap)).max(0.0),
        sup_grad_sqrt_f: mesh::sup(&norm_of(&mesh::gradient(&sqrt_f))),
    }
}

/// Where `h = ½(|∇u|² + λu²)` peaks, and how well the first-order relation
/// `u_k u_tk + λ u u_t = 0` holds there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientProbe {
    pub lambda: f64,
    pub value: f64,
    pub layer: usize,
    pub node: usize,
    pub on_boundary: bool,
    /// `|u_k u_tk + λ u u_t|` at the maximum; `0` when it sits on a boundary layer.
    pub first_order_residual: f64,
    pub tolerance: f64,
    pub first_order_ok: bool,
}

pub fn gradient_estimate_probe(u: &ScalarField, lambda: f64) -> GradientProbe {
    let grid = *u.grid();
    let grad = mesh::gradient(u);
    let g2 = mesh::grad_norm_sq(u);
    let h = g2.zip_with(u, |g, v| 0.5 * (g + lambda * v * v));
    let (value, (layer, node)) = argmax(&h, |v| v);
    let on_boundary = layer == 0 || layer == grid.time_nodes() - 1;
    let sup_htt = mesh::sup_norm(&mesh::d_tt(&h));
    let tolerance = grid.ht() * sup_htt + (grid.hx().powi(2) + grid.ht().powi(2)) * (1.0 + mesh::sup_norm(&h));
    let first_order_residual = if on_boundary {
        0.0
    } else {
        let ut = mesh::d_t(u);
        let gut = mesh::grad_t(u);
        let mixed: f64 = grad.iter().zip(&gut).map(|(g, gt)| g.at(layer, node) * gt.at(layer, node)).sum();
        (mixed + lambda * u.at(layer, node) * ut.at(layer, node)).abs()
    };
    GradientProbe {
        lambda,
        value,
        layer,
        node,
        on_boundary,
        first_order_residual,
        tolerance,
        first_order_ok: first_order_residual <= tolerance,
    }
}

/// Every check and measurement for one solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub c_used: f64,
    pub residual_sup: f64,
    pub admissibility: AdmissibilityReport,
    pub c0: C0Check,
    pub ut_boundary_bounds: UtBounds,
    pub weak_c2: WeakC2,
    pub identity_errors: IdentityErrors,
    pub rhs_dependencies: RhsDependencies,
    pub passed: bool,
}

/// Runs all checks against the problem's own `f`.
pub fn bounds_report(u: &ScalarField, spec: &ProblemSpec, c: f64) -> BoundsReport {
    let cone = ConeQuantities::new(u, spec);
    let admissibility = cone.admissibility();
    let (_, residual_sup) = operator::residual(u, spec, spec.f());
    let c0 = check_c0(u, spec, c);
    let ut_boundary_bounds = check_ut_bounds(u, spec, c);
    BoundsReport {
        c_used: c,
        residual_sup,
        admissibility,
        c0,
        ut_boundary_bounds,
        weak_c2: weak_c2_report(u, spec),
        identity_errors: identity_suite(u, spec, spec.f()),
        rhs_dependencies: rhs_dependencies(spec.f()),
        passed: admissibility.admissible && c0.passed() && ut_boundary_bounds.passed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{GridSpec, SpaceField};

    fn flat(grid: GridSpec, u0: SpaceField) -> ProblemSpec {
        ProblemSpec::new(SpaceField::constant(grid, 1.0), 0.0, ScalarField::constant(grid, 2.0), u0.clone(), u0).unwrap()
    }

    #[test]
    fn separable_solution_passes_everything() {
        let g = GridSpec::new(1, 32, 17).unwrap();
        let spec = flat(g, SpaceField::constant(g, 0.0));
        let u = ScalarField::from_fn(g, |_, _, t| t * t - t);
        let c0 = check_c0(&u, &spec, 1.0);
        assert!(c0.passed());
        assert!(c0.worst_upper.abs() < 1e-15);
        let ut = check_ut_bounds(&u, &spec, 1.0);
        assert!(ut.passed());
        assert!((ut.min_ut0 + 1.0).abs() < 1e-12 && (ut.max_ut1 - 1.0).abs() < 1e-12);
        let w = weak_c2_report(&u, &spec);
        assert!((w.sup_utt - 2.0).abs() < 1e-9);
        assert_eq!(w.sup_lap_u, 0.0);
        assert_eq!(w.sup_grad_ut, 0.0);
        let ids = identity_suite(&u, &spec, spec.f());
        assert!(ids.dq_t < 1e-12 && ids.dq_t2 < 1e-11 && ids.dq_u < 1e-11);
        let rep = bounds_report(&u, &spec, 1.0);
        assert!(rep.passed);
        let json = serde_json::to_value(rep).unwrap();
        for key in ["c_used", "c0", "ut_boundary_bounds", "weak_c2", "identity_errors", "rhs_dependencies"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn constant_path_degenerates_to_equalities() {
        let g = GridSpec::new(1, 16, 9).unwrap();
        let u0 = SpaceField::from_fn(g, |x, _| 0.1 * x.sin());
        let spec = flat(g, u0.clone());
        let u = ScalarField::from_fn(g, |x, _, _| 0.1 * x.sin());
        let ut = check_ut_bounds(&u, &spec, 0.5);
        assert!(ut.chain_ok);
        assert!(ut.max_ut0.abs() < 1e-12 && ut.min_ut1.abs() < 1e-12);
        let w = weak_c2_report(&u, &spec);
        assert!(w.sup_utt.abs() < 1e-12 && w.sup_grad_ut < 1e-12 && w.sup_lap_dev < 1e-12);
    }

    #[test]
    fn manufactured_laplacian_measurement() {
        let g = GridSpec::new(1, 64, 9).unwrap();
        let u = ScalarField::from_fn(g, |x, _, t| t * t - t + 0.1 * x.sin());
        let spec = flat(g, SpaceField::from_fn(g, |x, _| 0.1 * x.sin()));
        let w = weak_c2_report(&u, &spec);
        assert!((w.sup_lap_u - 0.1).abs() < 0.1 * g.hx().powi(2));
    }

    #[test]
    fn violations_are_detected() {
        let g = GridSpec::new(1, 16, 9).unwrap();
        let spec = flat(g, SpaceField::constant(g, 0.0));
        let mut u = ScalarField::from_fn(g, |_, _, t| t * t - t);
        u.set(4, 3, 0.2);
        let c0 = check_c0(&u, &spec, 1.0);
        assert!(!c0.c0_upper_ok && c0.c0_lower_ok);
        let deep = ScalarField::from_fn(g, |_, _, t| 3.0 * (t * t - t));
        assert!(!check_c0(&deep, &spec, 1.0).c0_lower_ok);
        assert!(!check_ut_bounds(&deep, &spec, 1.0).chain_ok);
        let concave = ScalarField::from_fn(g, |_, _, t| t - t * t);
        assert!(!check_ut_bounds(&concave, &spec, 1.0).boundary_extremal);
    }

    #[test]
    fn rhs_dependency_examples() {
        let g = GridSpec::new(1, 32, 17).unwrap();
        let d = rhs_dependencies(&ScalarField::constant(g, 2.0));
        assert_eq!((d.sup_f, d.sup_neg_ftt, d.sup_ft2_over_f, d.sup_neg_lap_f, d.sup_grad_sqrt_f), (2.0, 0.0, 0.0, 0.0, 0.0));
        let f = ScalarField::from_fn(g, |x, _, _| 1.0 + x.cos());
        let d = rhs_dependencies(&f);
        assert!((d.sup_neg_lap_f - 1.0).abs() < 1e-2);
        assert!((d.sup_grad_sqrt_f - 0.5_f64.sqrt()).abs() < 2e-2);
    }

    #[test]
    fn gradient_probe_examples() {
        let g = GridSpec::new(1, 16, 9).unwrap();
        let flat_u = ScalarField::from_fn(g, |_, _, t| t * t - t - 1.0);
        let p = gradient_estimate_probe(&flat_u, 1.0);
        assert_eq!(p.layer, 4);
        assert!(!p.on_boundary && p.first_order_ok);
        assert!(p.first_order_residual < 1e-12);
        let p0 = gradient_estimate_probe(&flat_u, 0.0);
        assert_eq!(p0.value, 0.0);
        let u = ScalarField::from_fn(g, |x, _, t| t * t - t - 1.0 + 0.1 * x.sin() * (1.0 + t));
        let p = gradient_estimate_probe(&u, 0.0);
        assert!(p.on_boundary && p.first_order_ok);
    }
}
