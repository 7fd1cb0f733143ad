//! Elementary symmetric functions, `Γ_k⁺` cones and the block operators
//!
//! ```text
//! F_k(r) = r00·σ_k(R) - zᵀ T_{k-1}(R) z        (R real symmetric)
//! G_k(r) = r00·σ_k(R) - z* T_{k-1}(R) z        (R Hermitian)
//! ```
//!
//! `T_{k-1}` is the Newton transformation, `∂σ_k/∂R`. `F_1` is the operator
//! of the main equation written on the triple `(u_tt, tr R, ∇u_t)`; `F_n`
//! is the determinant of the full `(n+1)×(n+1)` block matrix.

mod scan;

pub use scan::{
    comparison_battery, comparison_check, midpoint_concavity_scan, ComparisonBattery, ComparisonReport, PointDump,
    ScanField, ScanRecord, ScanReport, COMPARISON_TOL, VIOLATION_TOL,
};

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConeError {
    #[error("k = {k} outside 1..={n}")]
    Order { k: usize, n: usize },
    #[error("log form needs x > 0, y > 0 and xy - |z|² > 0 (got x = {x}, y = {y}, xy - |z|² = {det})")]
    Domain { x: f64, y: f64, det: f64 },
    #[error("comparison needs Q(A) = Q(B) > 0 and positive 00-entries: {0}")]
    Comparison(String),
}

/// `σ_k(λ)` by the product-expansion recurrence `e_j ← e_j + λ_i e_{j-1}`.
/// `σ_0 = 1`; `σ_k = 0` for `k > n`.
pub fn sigma_k(eigenvalues: &[f64], k: usize) -> f64 {
    all_sigmas(eigenvalues, k)[k]
}

/// `[σ_0, …, σ_k]` in one pass.
pub fn all_sigmas(eigenvalues: &[f64], k: usize) -> Vec<f64> {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (i, &lam) in eigenvalues.iter().enumerate() {
        for j in (1..=k.min(i + 1)).rev() {
            e[j] += lam * e[j - 1];
        }
    }
    e
}

/// `σ_k(λ | i)`: `σ_k` of the eigenvalues with the `i`-th removed.
pub fn sigma_k_without(eigenvalues: &[f64], k: usize, skip: usize) -> f64 {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    let mut seen = 0;
    for (i, &lam) in eigenvalues.iter().enumerate() {
        if i == skip {
            continue;
        }
        seen += 1;
        for j in (1..=k.min(seen)).rev() {
            e[j] += lam * e[j - 1];
        }
    }
    e[k]
}

fn check_order(k: usize, n: usize) -> Result<(), ConeError> {
    if k == 0 || k > n {
        Err(ConeError::Order { k, n })
    } else {
        Ok(())
    }
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(r: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = r.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(r: &DMatrix<Complex<f64>>) -> Vec<f64> {
    let mut v: Vec<f64> = r.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Membership of `R` in `Γ_k⁺`: `σ_1, …, σ_k > 0` on its eigenvalues.
pub fn gamma_k_membership(r: &DMatrix<f64>, k: usize) -> Result<bool, ConeError> {
    check_order(k, r.nrows())?;
    Ok(in_gamma_k(&symmetric_eigenvalues(r), k))
}

pub fn hermitian_gamma_k_membership(r: &DMatrix<Complex<f64>>, k: usize) -> Result<bool, ConeError> {
    check_order(k, r.nrows())?;
    Ok(in_gamma_k(&hermitian_eigenvalues(r), k))
}

pub fn in_gamma_k(eigenvalues: &[f64], k: usize) -> bool {
    all_sigmas(eigenvalues, k)[1..].iter().all(|&s| s > 0.0)
}

/// `T_{k-1}(R) = U diag(σ_{k-1}(λ|i)) Uᵀ`; `T_0 = I`.
pub fn newton_transform(r: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>, ConeError> {
    let n = r.nrows();
    check_order(k, n)?;
    if k == 1 {
        return Ok(DMatrix::identity(n, n));
    }
    let eig = r.clone().symmetric_eigen();
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let d = DVector::from_iterator(n, (0..n).map(|i| sigma_k_without(&lam, k - 1, i)));
    let u = &eig.eigenvectors;
    Ok(u * DMatrix::from_diagonal(&d) * u.transpose())
}

/// Hermitian `T_{k-1}(R) = U diag(σ_{k-1}(λ|i)) U*`.
pub fn hermitian_newton_transform(r: &DMatrix<Complex<f64>>, k: usize) -> Result<DMatrix<Complex<f64>>, ConeError> {
    let n = r.nrows();
    check_order(k, n)?;
    if k == 1 {
        return Ok(DMatrix::identity(n, n));
    }
    let eig = r.clone().symmetric_eigen();
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let d = DVector::from_iterator(n, (0..n).map(|i| Complex::new(sigma_k_without(&lam, k - 1, i), 0.0)));
    let u = &eig.eigenvectors;
    Ok(u * DMatrix::from_diagonal(&d) * u.adjoint())
}

/// Argument `(r00, R, z)` of `F_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePoint {
    pub r00: f64,
    pub r: DMatrix<f64>,
    pub z: DVector<f64>,
}

/// Argument `(r00, R, z)` of `G_k`, `R` Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianConePoint {
    pub r00: f64,
    pub r: DMatrix<Complex<f64>>,
    pub z: DVector<Complex<f64>>,
}

impl ConePoint {
    pub fn new(r00: f64, r: DMatrix<f64>, z: DVector<f64>) -> Self {
        assert!(r.is_square() && r.nrows() == z.len(), "R must be n×n and z length n");
        Self { r00, r, z }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// `r00 > 0`, `R ∈ Γ_k⁺` and `F_k > 0`.
    pub fn is_admissible(&self, k: usize) -> Result<bool, ConeError> {
        Ok(self.r00 > 0.0 && gamma_k_membership(&self.r, k)? && f_k_eval(self, k)? > 0.0)
    }

    /// Convex combination `s·self + (1-s)·other`.
    pub fn lerp(&self, other: &Self, s: f64) -> Self {
        Self {
            r00: s * self.r00 + (1.0 - s) * other.r00,
            r: &self.r * s + &other.r * (1.0 - s),
            z: &self.z * s + &other.z * (1.0 - s),
        }
    }

    /// The full `(n+1)×(n+1)` matrix `[[r00, zᵀ], [z, R]]`.
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = self.r00;
        for i in 0..n {
            m[(0, i + 1)] = self.z[i];
            m[(i + 1, 0)] = self.z[i];
            for j in 0..n {
                m[(i + 1, j + 1)] = self.r[(i, j)];
            }
        }
        m
    }
}

impl HermitianConePoint {
    pub fn new(r00: f64, r: DMatrix<Complex<f64>>, z: DVector<Complex<f64>>) -> Self {
        assert!(r.is_square() && r.nrows() == z.len(), "R must be n×n and z length n");
        Self { r00, r, z }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn is_admissible(&self, k: usize) -> Result<bool, ConeError> {
        Ok(self.r00 > 0.0 && hermitian_gamma_k_membership(&self.r, k)? && g_k_eval(self, k)? > 0.0)
    }

    pub fn lerp(&self, other: &Self, s: f64) -> Self {
        let cs = Complex::new(s, 0.0);
        let ct = Complex::new(1.0 - s, 0.0);
        Self {
            r00: s * self.r00 + (1.0 - s) * other.r00,
            r: &self.r * cs + &other.r * ct,
            z: &self.z * cs + &other.z * ct,
        }
    }
}

/// `F_k = r00·σ_k(R) - zᵀ T_{k-1}(R) z`.
pub fn f_k_eval(p: &ConePoint, k: usize) -> Result<f64, ConeError> {
    let n = p.dim();
    check_order(k, n)?;
    if k == 1 {
        return Ok(p.r00 * p.r.trace() - p.z.norm_squared());
    }
    let eig = p.r.clone().symmetric_eigen();
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    // zᵀ U diag(d) Uᵀ z = Σ d_i (u_iᵀ z)²
    let w = eig.eigenvectors.transpose() * &p.z;
    let pairing: f64 = (0..n).map(|i| sigma_k_without(&lam, k - 1, i) * w[i] * w[i]).sum();
    Ok(p.r00 * sigma_k(&lam, k) - pairing)
}

/// `G_k = r00·σ_k(R) - z* T_{k-1}(R) z`; real for Hermitian `R`.
pub fn g_k_eval(p: &HermitianConePoint, k: usize) -> Result<f64, ConeError> {
    let n = p.dim();
    check_order(k, n)?;
    if k == 1 {
        let tr: f64 = (0..n).map(|i| p.r[(i, i)].re).sum();
        return Ok(p.r00 * tr - p.z.norm_squared());
    }
    let eig = p.r.clone().symmetric_eigen();
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let w = eig.eigenvectors.adjoint() * &p.z;
    let pairing: f64 = (0..n).map(|i| sigma_k_without(&lam, k - 1, i) * w[i].norm_sqr()).sum();
    Ok(p.r00 * sigma_k(&lam, k) - pairing)
}

/// `log(xy - |z|²)`.
pub fn log_form(x: f64, y: f64, z: &[f64]) -> Result<f64, ConeError> {
    let det = x * y - z.iter().map(|v| v * v).sum::<f64>();
    if !(x > 0.0 && y > 0.0 && det > 0.0) {
        return Err(ConeError::Domain { x, y, det });
    }
    Ok(det.ln())
}

/// Analytic Hessian of `log(xy - |z|²)` in the variables `(x, y, z_1, …, z_n)`.
pub fn lemma22_hessian(x: f64, y: f64, z: &[f64]) -> Result<DMatrix<f64>, ConeError> {
    let z2: f64 = z.iter().map(|v| v * v).sum();
    let d = x * y - z2;
    if !(x > 0.0 && y > 0.0 && d > 0.0) {
        return Err(ConeError::Domain { x, y, det: d });
    }
    let n = z.len();
    let d2 = d * d;
    let mut h = DMatrix::zeros(n + 2, n + 2);
    h[(0, 0)] = -y * y / d2;
    h[(1, 1)] = -x * x / d2;
    h[(0, 1)] = -z2 / d2;
    h[(1, 0)] = -z2 / d2;
    for i in 0..n {
        let xz = 2.0 * y * z[i] / d2;
        let yz = 2.0 * x * z[i] / d2;
        h[(0, i + 2)] = xz;
        h[(i + 2, 0)] = xz;
        h[(1, i + 2)] = yz;
        h[(i + 2, 1)] = yz;
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            h[(i + 2, j + 2)] = (-2.0 * delta * d - 4.0 * z[i] * z[j]) / d2;
        }
    }
    Ok(h)
}
