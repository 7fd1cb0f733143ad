#![allow(dead_code)]

use std::f64::consts::PI;

use qgeo::mesh::{GridSpec, ScalarField, SpaceField};
use qgeo::operator::ProblemSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small random trigonometric polynomial in `x` (and `y` on `T²`).
pub struct Trig {
    terms: Vec<(f64, f64, f64, f64)>,
}

impl Trig {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, amplitude: f64) -> Self {
        let mut terms = Vec::new();
        for m in 1..=2 {
            let c = amplitude * rng.random_range(-1.0..1.0) / (m * m) as f64;
            let ky = if dim == 2 { rng.random_range(0..=1) as f64 } else { 0.0 };
            terms.push((c, m as f64, ky, rng.random_range(0.0..2.0 * PI)));
        }
        Self { terms }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|&(c, kx, ky, p)| c * (kx * x + ky * y + p).sin()).sum()
    }

    pub fn field(&self, grid: GridSpec) -> SpaceField {
        SpaceField::from_fn(grid, |x, y| self.eval(x, y))
    }
}

/// Random nondegenerate problem with smooth data well inside the cone.
pub fn random_instance(seed: u64, grid: GridSpec) -> ProblemSpec {
    let mut r = rng(seed);
    let dim = grid.spatial_dim();
    let alpha = r.random_range(0.0..0.3);
    let phase = r.random_range(0.0..2.0 * PI);
    let a = SpaceField::from_fn(grid, |x, y| 1.0 + alpha * (x + 0.5 * y + phase).sin());
    let b = if r.random_bool(0.5) { r.random_range(0.0..0.5) } else { 0.0 };
    let u0 = Trig::random(&mut r, dim, 0.1).field(grid);
    let u1 = Trig::random(&mut r, dim, 0.1).field(grid);
    let (f0, f1, fp) = (r.random_range(0.5..2.0), r.random_range(0.0..0.3), r.random_range(0.0..2.0 * PI));
    let f = ScalarField::from_fn(grid, |x, y, t| f0 * (1.0 + f1 * (x - y + 2.0 * t + fp).sin()));
    ProblemSpec::new(a, b, f, u0, u1).expect("random instance is admissible")
}

/// Random problem whose boundary slices are half a period or so out of
/// phase, so `u1 - u0` is `O(1)` and the degenerate limit keeps `u_tt` away
/// from zero.
pub fn random_generic_instance(seed: u64, grid: GridSpec) -> ProblemSpec {
    let mut r = rng(seed);
    let alpha = r.random_range(0.0..0.2);
    let a = SpaceField::from_fn(grid, |x, y| 1.0 + alpha * (x + y).cos());
    let b = r.random_range(0.0..0.3);
    let slice = |amp: f64, phase: f64| SpaceField::from_fn(grid, move |x, y| amp * (x + phase).sin() + 0.05 * (x - y).cos());
    let phase = r.random_range(0.0..2.0 * PI);
    let u0 = slice(r.random_range(0.2..0.35), phase);
    let u1 = slice(r.random_range(0.2..0.35), phase + r.random_range(0.5 * PI..1.5 * PI));
    let f = ScalarField::from_fn(grid, |x, _, t| 1.0 + 0.2 * (x + t).sin());
    ProblemSpec::new(a, b, f, u0, u1).expect("generic instance is admissible")
}

/// Random problem with `u0 = u1`.
pub fn random_flat_instance(seed: u64, grid: GridSpec) -> ProblemSpec {
    let spec = random_instance(seed, grid);
    spec.with_boundary(spec.u0().clone(), spec.u0().clone()).unwrap()
}

pub fn constant_problem(grid: GridSpec, f: f64) -> ProblemSpec {
    ProblemSpec::new(
        SpaceField::constant(grid, 1.0),
        0.0,
        ScalarField::constant(grid, f),
        SpaceField::constant(grid, 0.0),
        SpaceField::constant(grid, 0.0),
    )
    .unwrap()
}

/// `u* = t² - t + 0.1 sin x` with its analytic right-hand side `2(1 - 0.1 sin x)`.
pub fn manufactured(grid: GridSpec) -> (ProblemSpec, ScalarField) {
    let u0 = SpaceField::from_fn(grid, |x, _| 0.1 * x.sin());
    let f = ScalarField::from_fn(grid, |x, _, _| 2.0 * (1.0 - 0.1 * x.sin()));
    let spec = ProblemSpec::new(SpaceField::constant(grid, 1.0), 0.0, f, u0.clone(), u0).unwrap();
    let star = ScalarField::from_fn(grid, |x, _, t| t * t - t + 0.1 * x.sin());
    (spec, star)
}

/// Least-squares slope of `log e` against `log h`.
pub fn observed_order(h: &[f64], e: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `σ_k` as a sum of products over `k`-subsets.
pub fn sigma_by_subsets(lam: &[f64], k: usize) -> f64 {
    subsets(lam.len(), k).map(|s| s.iter().map(|&i| lam[i]).product::<f64>()).sum()
}

/// `σ_k` of a matrix as the sum of its principal `k×k` minors.
pub fn sigma_by_minors(r: &nalgebra::DMatrix<f64>, k: usize) -> f64 {
    let n = r.nrows();
    subsets(n, k).map(|s| principal(r, &s).determinant()).sum()
}

pub fn subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << n).filter(move |m| m.count_ones() as usize == k).map(move |m| (0..n).filter(|i| m >> i & 1 == 1).collect())
}

pub fn principal(r: &nalgebra::DMatrix<f64>, idx: &[usize]) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(idx.len(), idx.len(), |i, j| r[(idx[i], idx[j])])
}

/// `∂σ_k/∂R` as a sum over `k`-subsets of embedded adjugates of the
/// principal submatrix.
pub fn transform_by_adjugates(r: &nalgebra::DMatrix<f64>, k: usize) -> nalgebra::DMatrix<f64> {
    let n = r.nrows();
    let mut out = nalgebra::DMatrix::zeros(n, n);
    for s in subsets(n, k) {
        let sub = principal(r, &s);
        let adj = adjugate(&sub);
        for (a, &i) in s.iter().enumerate() {
            for (b, &j) in s.iter().enumerate() {
                out[(i, j)] += adj[(a, b)];
            }
        }
    }
    out
}

/// Cofactor transpose from minors.
pub fn adjugate(m: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let n = m.nrows();
    if n == 1 {
        return nalgebra::DMatrix::from_element(1, 1, 1.0);
    }
    nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let minor = m.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> nalgebra::DMatrix<f64> {
    let a = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}
