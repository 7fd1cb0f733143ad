//! The nonlinear operator `Q(u) = u_tt·B_u - |∇u_t|²` with
//! `B_u = Δu - b|∇u|² + a`, its linearisation `dQ`, and the pointwise cone
//! checks that decide where `dQ` is elliptic.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CsrMatrix, LinalgError, LinearSolver};
use crate::mesh::{self, GridSpec, Layers, ScalarField, SpaceField};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("coefficient a must be positive; a = {value} at node {node}")]
    NonPositiveA { node: usize, value: f64 },
    #[error("b must be finite and nonnegative, got {0}")]
    NegativeB(f64),
    #[error("right-hand side must be nonnegative; f = {value} at layer {layer}, node {node}")]
    NegativeF { layer: usize, node: usize, value: f64 },
    #[error("boundary data {which} leaves the admissible set: B = {value} at node {node}")]
    NotInH { which: &'static str, node: usize, value: f64 },
    #[error("field shapes disagree: {0}")]
    Shape(String),
}

/// One Dirichlet problem: coefficients, right-hand side and boundary data.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: GridSpec,
    a: SpaceField,
    b: f64,
    f: ScalarField,
    u0: SpaceField,
    u1: SpaceField,
}

impl ProblemSpec {
    pub fn new(
        a: SpaceField,
        b: f64,
        f: ScalarField,
        u0: SpaceField,
        u1: SpaceField,
    ) -> Result<Self, OperatorError> {
        let grid = *a.grid();
        for (name, g) in [("f", f.grid()), ("u0", u0.grid()), ("u1", u1.grid())] {
            if !g.same_shape(&grid) {
                return Err(OperatorError::Shape(format!("{name} lives on a different grid than a")));
            }
        }
        if f.layers() != Layers::All {
            return Err(OperatorError::Shape("f must carry every time layer".into()));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(OperatorError::NegativeB(b));
        }
        if let Some((node, &value)) = a.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(OperatorError::NonPositiveA { node, value });
        }
        if let Some((i, &value)) = f.values().iter().enumerate().find(|(_, &v)| !(v >= 0.0)) {
            let (layer, node) = f.locate(i);
            return Err(OperatorError::NegativeF { layer, node, value });
        }
        let spec = Self { grid, a, b, f, u0, u1 };
        for (which, data) in [("u0", &spec.u0), ("u1", &spec.u1)] {
            let bu = spec.b_of_slice(data);
            if let Some((node, &value)) = bu.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
                return Err(OperatorError::NotInH { which, node, value });
            }
        }
        Ok(spec)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn a(&self) -> &SpaceField {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn u0(&self) -> &SpaceField {
        &self.u0
    }

    pub fn u1(&self) -> &SpaceField {
        &self.u1
    }

    /// `f > 0` at every node.
    pub fn is_nondegenerate(&self) -> bool {
        self.f.values().iter().all(|&v| v > 0.0)
    }

    /// Same problem with a different right-hand side.
    pub fn with_f(&self, f: ScalarField) -> Result<Self, OperatorError> {
        Self::new(self.a.clone(), self.b, f, self.u0.clone(), self.u1.clone())
    }

    /// Same problem with shifted boundary data.
    pub fn with_boundary(&self, u0: SpaceField, u1: SpaceField) -> Result<Self, OperatorError> {
        Self::new(self.a.clone(), self.b, self.f.clone(), u0, u1)
    }

    /// `B` of a single time slice.
    pub fn b_of_slice(&self, v: &SpaceField) -> SpaceField {
        let lap = mesh::laplacian(v);
        let g2 = mesh::grad_norm_sq(v);
        let vals = lap
            .values()
            .iter()
            .zip(g2.values())
            .zip(self.a.values())
            .map(|((l, g), a)| l - self.b * g + a)
            .collect();
        SpaceField::from_parts(self.grid, vals)
    }

    /// A field agreeing with the boundary data on layers 0 and `Nt - 1`.
    pub fn matches_boundary(&self, u: &ScalarField) -> bool {
        u.layers() == Layers::All
            && u.layer(0) == self.u0.values()
            && u.layer(self.grid.time_nodes() - 1) == self.u1.values()
    }
}

/// `B_u = Δu - b|∇u|² + a` on every layer.
pub fn compute_b(u: &ScalarField, spec: &ProblemSpec) -> ScalarField {
    let lap = mesh::laplacian(u);
    let g2 = mesh::grad_norm_sq(u);
    let m = spec.grid.layer_len();
    let a = spec.a.values();
    let vals =
        lap.values().iter().zip(g2.values()).enumerate().map(|(i, (l, g))| l - spec.b * g + a[i % m]).collect();
    ScalarField::from_parts(*u.grid(), u.layers(), vals)
}

/// Pointwise quantities the equation is built from, on interior layers.
#[derive(Debug, Clone)]
pub struct ConeQuantities {
    pub utt: ScalarField,
    pub b: ScalarField,
    pub grad_u: Vec<ScalarField>,
    pub grad_ut: Vec<ScalarField>,
    pub q: ScalarField,
}

impl ConeQuantities {
    pub fn new(u: &ScalarField, spec: &ProblemSpec) -> Self {
        let utt = mesh::d_tt(u);
        let b = compute_b(u, spec).interior();
        let grad_u = mesh::gradient(&u.interior());
        let grad_ut = mesh::grad_t(u);
        let q_vals = (0..utt.values().len())
            .map(|i| {
                let z2: f64 = grad_ut.iter().map(|g| g.values()[i] * g.values()[i]).sum();
                utt.values()[i] * b.values()[i] - z2
            })
            .collect();
        let q = ScalarField::from_parts(*u.grid(), Layers::Interior, q_vals);
        Self { utt, b, grad_u, grad_ut, q }
    }

    pub fn grad_ut_sq(&self, i: usize) -> f64 {
        self.grad_ut.iter().map(|g| g.values()[i] * g.values()[i]).sum()
    }

    pub fn admissibility(&self) -> AdmissibilityReport {
        let (min_utt, at_utt) = argmin(&self.utt);
        let (min_b, at_b) = argmin(&self.b);
        let (min_q, at_q) = argmin(&self.q);
        AdmissibilityReport {
            min_utt,
            min_b,
            min_q,
            at_utt,
            at_b,
            at_q,
            admissible: min_utt > 0.0 && min_b > 0.0 && min_q > 0.0,
        }
    }
}

fn argmin(field: &ScalarField) -> (f64, (usize, usize)) {
    let (i, v) = field
        .values()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
    (v, field.locate(i))
}

/// `Q(u)` on interior layers.
pub fn apply_q(u: &ScalarField, spec: &ProblemSpec) -> ScalarField {
    ConeQuantities::new(u, spec).q
}

/// `Q(u) - rhs` on interior layers, with its sup-norm.
pub fn residual(u: &ScalarField, spec: &ProblemSpec, rhs: &ScalarField) -> (ScalarField, f64) {
    residual_from(&apply_q(u, spec), rhs)
}

pub(crate) fn residual_from(q: &ScalarField, rhs: &ScalarField) -> (ScalarField, f64) {
    let grid = *q.grid();
    let m = grid.layer_len();
    let vals: Vec<f64> = grid
        .interior_layers()
        .flat_map(|k| (0..m).map(move |node| (k, node)))
        .map(|(k, node)| q.at(k, node) - rhs.at(k, node))
        .collect();
    let sup = vals.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
    (ScalarField::from_parts(grid, Layers::Interior, vals), sup)
}

/// Minimum values of `u_tt`, `B_u`, `Q` over interior nodes and where they sit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub min_utt: f64,
    pub min_b: f64,
    pub min_q: f64,
    pub at_utt: (usize, usize),
    pub at_b: (usize, usize),
    pub at_q: (usize, usize),
    pub admissible: bool,
}

/// `dQ` at a fixed `u`, discretised over interior unknowns.
///
/// Columns of `matrix` index interior nodes `(k - 1)·N^d + node`; columns of
/// `boundary` index layer-0 nodes then layer-`Nt-1` nodes. The Newton step
/// keeps boundary values fixed, so only `matrix` enters the solve.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    grid: GridSpec,
    pub matrix: CsrMatrix,
    pub boundary: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `dQ(h)` for a full-layer field `h`, boundary layers included.
    pub fn apply(&self, h: &ScalarField) -> ScalarField {
        assert_eq!(h.layers(), Layers::All);
        let m = self.grid.layer_len();
        let last = self.grid.time_nodes() - 1;
        let interior = &h.values()[m..last * m];
        let mut bvals = h.layer(0).to_vec();
        bvals.extend_from_slice(h.layer(last));
        let mut out = self.matrix.mul_vec(interior);
        for (o, v) in out.iter_mut().zip(self.boundary.mul_vec(&bvals)) {
            *o += v;
        }
        ScalarField::from_parts(self.grid, Layers::Interior, out)
    }

    /// Sets `rhs = target - (boundary coupling of h_bdry)` so that solving
    /// gives the interior values of the `h` with `dQ(h) = target` and the
    /// given boundary layers.
    pub fn set_rhs(&mut self, target: &ScalarField, boundary_values: Option<&ScalarField>) {
        let m = self.grid.layer_len();
        let mut rhs: Vec<f64> =
            self.grid.interior_layers().flat_map(|k| (0..m).map(move |n| (k, n))).map(|(k, n)| target.at(k, n)).collect();
        if let Some(h) = boundary_values {
            let last = self.grid.time_nodes() - 1;
            let mut bvals = h.layer(0).to_vec();
            bvals.extend_from_slice(h.layer(last));
            for (r, v) in rhs.iter_mut().zip(self.boundary.mul_vec(&bvals)) {
                *r -= v;
            }
        }
        self.rhs = rhs;
    }

    pub fn solve(&self, method: LinearSolver) -> Result<Vec<f64>, LinalgError> {
        linalg::solve(&self.matrix, &self.rhs, self.grid.layer_len(), method)
    }

    /// Coordinate triplets `row col value`, one per line.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "% {} {} {}", self.matrix.nrows(), self.matrix.ncols(), self.matrix.nnz())?;
        for (r, c, v) in self.matrix.triplets() {
            writeln!(out, "{r} {c} {v:?}")?;
        }
        Ok(())
    }
}

/// Assembles `dQ(h) = u_tt(Δh - 2b∇u·∇h) + B_u h_tt - 2∇u_t·∇h_t` with the
/// same stencils used for `Q`, so it is the exact Jacobian of the discrete
/// operator.
pub fn assemble_dq(u: &ScalarField, spec: &ProblemSpec) -> LinearSystem {
    assemble_dq_with(&ConeQuantities::new(u, spec), spec)
}

pub fn assemble_dq_with(cone: &ConeQuantities, spec: &ProblemSpec) -> LinearSystem {
    let grid = spec.grid;
    let m = grid.layer_len();
    let last = grid.time_nodes() - 1;
    let dim = grid.spatial_dim();
    let inv_hx2 = 1.0 / (grid.hx() * grid.hx());
    let inv_2hx = 0.5 / grid.hx();
    let inv_ht2 = 1.0 / (grid.ht() * grid.ht());
    let inv_4hxht = 0.25 / (grid.hx() * grid.ht());

    enum Col {
        Interior(usize),
        Boundary(usize),
    }
    let col = |k: usize, node: usize| -> Col {
        if k == 0 {
            Col::Boundary(node)
        } else if k == last {
            Col::Boundary(m + node)
        } else {
            Col::Interior((k - 1) * m + node)
        }
    };

    let mut rows = Vec::with_capacity(grid.interior_len());
    let mut brows = Vec::with_capacity(grid.interior_len());
    for k in grid.interior_layers() {
        for node in 0..m {
            let i = (k - 1) * m + node;
            let utt = cone.utt.values()[i];
            let bu = cone.b.values()[i];
            let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * dim + 3);
            // u_tt Δh
            entries.push((k, node, -2.0 * dim as f64 * utt * inv_hx2));
            for axis in 0..dim {
                let plus = grid.neighbor(node, axis, 1);
                let minus = grid.neighbor(node, axis, -1);
                let gu = cone.grad_u[axis].values()[i];
                let gut = cone.grad_ut[axis].values()[i];
                let drift = -2.0 * spec.b * utt * gu * inv_2hx;
                entries.push((k, plus, utt * inv_hx2 + drift));
                entries.push((k, minus, utt * inv_hx2 - drift));
                // -2 ∇u_t · ∇h_t
                let mixed = -2.0 * gut * inv_4hxht;
                entries.push((k + 1, plus, mixed));
                entries.push((k + 1, minus, -mixed));
                entries.push((k - 1, plus, -mixed));
                entries.push((k - 1, minus, mixed));
            }
            // B h_tt
            entries.push((k + 1, node, bu * inv_ht2));
            entries.push((k, node, -2.0 * bu * inv_ht2));
            entries.push((k - 1, node, bu * inv_ht2));

            let mut row = Vec::with_capacity(entries.len());
            let mut brow = Vec::new();
            for (kk, nn, v) in entries {
                match col(kk, nn) {
                    Col::Interior(c) => row.push((c, v)),
                    Col::Boundary(c) => brow.push((c, v)),
                }
            }
            rows.push(row);
            brows.push(brow);
        }
    }
    let n = grid.interior_len();
    LinearSystem {
        grid,
        matrix: CsrMatrix::from_rows(n, rows),
        boundary: CsrMatrix::from_rows(2 * m, brows),
        rhs: vec![0.0; n],
    }
}

/// `dQ(h)` evaluated by composing field stencils; independent of the
/// assembled matrix.
pub fn apply_dq(u: &ScalarField, spec: &ProblemSpec, h: &ScalarField) -> ScalarField {
    let cone = ConeQuantities::new(u, spec);
    let lap_h = mesh::laplacian(&h.interior());
    let grad_h = mesh::gradient(&h.interior());
    let htt = mesh::d_tt(h);
    let grad_ht = mesh::grad_t(h);
    let vals = (0..htt.values().len())
        .map(|i| {
            let drift: f64 = (0..grad_h.len()).map(|a| cone.grad_u[a].values()[i] * grad_h[a].values()[i]).sum();
            let mixed: f64 = (0..grad_h.len()).map(|a| cone.grad_ut[a].values()[i] * grad_ht[a].values()[i]).sum();
            cone.utt.values()[i] * (lap_h.values()[i] - 2.0 * spec.b * drift) + cone.b.values()[i] * htt.values()[i]
                - 2.0 * mixed
        })
        .collect();
    ScalarField::from_parts(*h.grid(), Layers::Interior, vals)
}

/// First derivatives `(φ_t, ∇φ)` on interior layers.
#[derive(Debug, Clone)]
pub struct Jet {
    pub dt: ScalarField,
    pub grad: Vec<ScalarField>,
}

impl Jet {
    pub fn of(phi: &ScalarField) -> Self {
        Self { dt: mesh::d_t(phi), grad: mesh::gradient(&phi.interior()) }
    }

    /// The constant jet `(dt, grad)` at every node.
    pub fn constant(grid: GridSpec, dt: f64, grad: &[f64]) -> Self {
        assert_eq!(grad.len(), grid.spatial_dim());
        let interior = |v: f64| ScalarField::from_parts(grid, Layers::Interior, vec![v; grid.interior_len()]);
        Self { dt: interior(dt), grad: grad.iter().map(|&g| interior(g)).collect() }
    }
}

/// `q_u(Dφ, Dψ) = u_tt ∇φ·∇ψ + B_u φ_t ψ_t - ∇u_t·(φ_t ∇ψ + ψ_t ∇φ)`.
pub fn q_form(u: &ScalarField, spec: &ProblemSpec, dphi: &Jet, dpsi: &Jet) -> ScalarField {
    q_form_with(&ConeQuantities::new(u, spec), dphi, dpsi)
}

pub fn q_form_with(cone: &ConeQuantities, dphi: &Jet, dpsi: &Jet) -> ScalarField {
    let dim = cone.grad_ut.len();
    let vals = (0..cone.utt.values().len())
        .map(|i| {
            let (pt, st) = (dphi.dt.values()[i], dpsi.dt.values()[i]);
            let mut grad_dot = 0.0;
            let mut cross = 0.0;
            for a in 0..dim {
                let (pg, sg) = (dphi.grad[a].values()[i], dpsi.grad[a].values()[i]);
                grad_dot += pg * sg;
                cross += cone.grad_ut[a].values()[i] * (pt * sg + st * pg);
            }
            cone.utt.values()[i] * grad_dot + cone.b.values()[i] * pt * st - cross
        })
        .collect();
    ScalarField::from_parts(*cone.utt.grid(), Layers::Interior, vals)
}

/// `[[B, -z], [-zᵀ, u_tt·I]]`, the principal symbol of `dQ` at one node.
pub fn symbol_matrix(utt: f64, b: f64, grad_ut: &[f64]) -> DMatrix<f64> {
    let n = grad_ut.len();
    let mut s = DMatrix::zeros(n + 1, n + 1);
    s[(0, 0)] = b;
    for (a, &z) in grad_ut.iter().enumerate() {
        s[(0, a + 1)] = -z;
        s[(a + 1, 0)] = -z;
        s[(a + 1, a + 1)] = utt;
    }
    s
}

/// Positive definiteness of [`symbol_matrix`] through its Schur complement.
pub fn symbol_is_positive_definite(utt: f64, b: f64, grad_ut: &[f64]) -> bool {
    let z2: f64 = grad_ut.iter().map(|z| z * z).sum();
    utt > 0.0 && utt * b - z2 > 0.0
}

#[derive(Debug, Clone)]
pub struct EllipticityReport {
    pub admissibility: AdmissibilityReport,
    /// Symbol verdict per interior node, in interior storage order.
    pub elliptic: Vec<bool>,
}

impl EllipticityReport {
    pub fn elliptic_count(&self) -> usize {
        self.elliptic.iter().filter(|&&e| e).count()
    }
}

pub fn ellipticity_check(u: &ScalarField, spec: &ProblemSpec) -> EllipticityReport {
    let cone = ConeQuantities::new(u, spec);
    let elliptic = (0..cone.utt.values().len())
        .map(|i| {
            let z: Vec<f64> = cone.grad_ut.iter().map(|g| g.values()[i]).collect();
            symbol_is_positive_definite(cone.utt.values()[i], cone.b.values()[i], &z)
        })
        .collect();
    EllipticityReport { admissibility: cone.admissibility(), elliptic }
}
