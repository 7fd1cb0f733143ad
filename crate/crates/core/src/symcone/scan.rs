//! Randomised searches for concavity violations of `log F_k` / `log G_k`
//! and for failures of the comparison inequalities of the `k = 1` form.
//!
//! Trials run in fixed-size chunks; chunk `c` draws from ChaCha stream `c`
//! of the master seed, so reports do not depend on the thread count.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    all_sigmas, f_k_eval, g_k_eval, hermitian_newton_transform, in_gamma_k, newton_transform, symmetric_eigenvalues,
    hermitian_eigenvalues, ConeError, ConePoint, HermitianConePoint,
};

/// Margins below this count as violations.
pub const VIOLATION_TOL: f64 = -1e-9;
/// Slack for the comparison inequalities, relative to `max(1, Q(A))`.
pub const COMPARISON_TOL: f64 = 1e-10;

const CHUNK: usize = 512;
const MAX_REJECTIONS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanField {
    Real,
    Complex,
}

/// Full-precision copy of a sampled point, kept for violating trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDump {
    pub r00: f64,
    /// Row-major `R`; complex entries as `[re, im]`.
    pub r: Vec<[f64; 2]>,
    pub z: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub trial: usize,
    pub k: usize,
    pub n: usize,
    pub margin: f64,
    pub value_p: f64,
    pub value_q: f64,
    pub value_mid: f64,
    pub violation: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<[PointDump; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub k: usize,
    pub n: usize,
    pub field: ScanField,
    pub seed: u64,
    pub trials: usize,
    /// `k = 1` or `k = n`: concavity is a theorem there.
    pub theorem_backed: bool,
    pub sampling_failures: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub worst_trial: Option<usize>,
    #[serde(skip)]
    pub records: Vec<ScanRecord>,
}

impl ScanReport {
    /// One JSON object per trial, then a summary line.
    pub fn write_lines<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec)?;
            writeln!(out)?;
        }
        serde_json::to_writer(&mut out, self)?;
        writeln!(out)
    }
}

enum Sample {
    Real(ConePoint),
    Complex(HermitianConePoint),
}

impl Sample {
    fn value(&self, k: usize) -> f64 {
        match self {
            Sample::Real(p) => f_k_eval(p, k).expect("order checked"),
            Sample::Complex(p) => g_k_eval(p, k).expect("order checked"),
        }
    }

    fn midpoint(&self, other: &Sample) -> Sample {
        match (self, other) {
            (Sample::Real(a), Sample::Real(b)) => Sample::Real(a.lerp(b, 0.5)),
            (Sample::Complex(a), Sample::Complex(b)) => Sample::Complex(a.lerp(b, 0.5)),
            _ => unreachable!("mixed fields"),
        }
    }

    fn dump(&self) -> PointDump {
        match self {
            Sample::Real(p) => PointDump {
                r00: p.r00,
                r: row_major(&p.r).map(|v| [v, 0.0]).collect(),
                z: p.z.iter().map(|&v| [v, 0.0]).collect(),
            },
            Sample::Complex(p) => PointDump {
                r00: p.r00,
                r: row_major(&p.r).map(|v| [v.re, v.im]).collect(),
                z: p.z.iter().map(|v| [v.re, v.im]).collect(),
            },
        }
    }
}

fn row_major<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> impl Iterator<Item = T> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

/// Smallest `s` with `λ + s·1 ∈ Γ_k⁺` (the admissible shifts form a half-line).
fn minimal_shift(eigenvalues: &[f64], k: usize) -> f64 {
    let max = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted = |s: f64| eigenvalues.iter().map(|l| l + s).collect::<Vec<_>>();
    let (mut lo, mut hi) = (-max, -min + 1e-12);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if in_gamma_k(&shifted(mid), k) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo..hi))
}

fn sample_real(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Option<ConePoint> {
    for _ in 0..MAX_REJECTIONS {
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let s = (&a + a.transpose()) * 0.5;
        let lam = symmetric_eigenvalues(&s);
        let shift = minimal_shift(&lam, k) + log_uniform(rng, -3.0, 0.5);
        let r = s + DMatrix::identity(n, n) * shift;
        let lam_r = symmetric_eigenvalues(&r);
        if !in_gamma_k(&lam_r, k) {
            continue;
        }
        let r00 = log_uniform(rng, -1.0, 1.0);
        let sigma = all_sigmas(&lam_r, k)[k];
        let z0 = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let t = newton_transform(&r, k).ok()?;
        let pair = (z0.transpose() * &t * &z0)[(0, 0)];
        let frac: f64 = rng.random();
        if !(pair > 0.0) {
            continue;
        }
        let z = z0 * (frac * r00 * sigma / pair).sqrt();
        let p = ConePoint::new(r00, r, z);
        if f_k_eval(&p, k).ok()? > 0.0 {
            return Some(p);
        }
    }
    None
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex<f64> {
    Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn sample_complex(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Option<HermitianConePoint> {
    for _ in 0..MAX_REJECTIONS {
        let a = DMatrix::<Complex<f64>>::from_fn(n, n, |_, _| complex_normal(rng));
        let s = (&a + a.adjoint()) * Complex::new(0.5, 0.0);
        let lam = hermitian_eigenvalues(&s);
        let shift = minimal_shift(&lam, k) + log_uniform(rng, -3.0, 0.5);
        let r = s + DMatrix::identity(n, n) * Complex::new(shift, 0.0);
        let lam_r = hermitian_eigenvalues(&r);
        if !in_gamma_k(&lam_r, k) {
            continue;
        }
        let r00 = log_uniform(rng, -1.0, 1.0);
        let sigma = all_sigmas(&lam_r, k)[k];
        let z0 = DVector::<Complex<f64>>::from_fn(n, |_, _| complex_normal(rng));
        let t = hermitian_newton_transform(&r, k).ok()?;
        let pair = (z0.adjoint() * &t * &z0)[(0, 0)].re;
        let frac: f64 = rng.random();
        if !(pair > 0.0) {
            continue;
        }
        let z = z0 * Complex::new((frac * r00 * sigma / pair).sqrt(), 0.0);
        let p = HermitianConePoint::new(r00, r, z);
        if g_k_eval(&p, k).ok()? > 0.0 {
            return Some(p);
        }
    }
    None
}

fn sample(rng: &mut ChaCha8Rng, field: ScanField, k: usize, n: usize) -> Option<Sample> {
    match field {
        ScanField::Real => sample_real(rng, k, n).map(Sample::Real),
        ScanField::Complex => sample_complex(rng, k, n).map(Sample::Complex),
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Midpoint test `log F(½(p+q)) ≥ ½(log F(p) + log F(q))` over random
/// admissible pairs.
pub fn midpoint_concavity_scan(
    k: usize,
    n: usize,
    field: ScanField,
    trials: usize,
    seed: u64,
) -> Result<ScanReport, ConeError> {
    if k == 0 || k > n {
        return Err(ConeError::Order { k, n });
    }
    let chunks = trials.div_ceil(CHUNK);
    let per_chunk: Vec<(Vec<ScanRecord>, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut records = Vec::new();
            let mut failures = 0;
            for trial in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let (Some(p), Some(q)) = (sample(&mut rng, field, k, n), sample(&mut rng, field, k, n)) else {
                    failures += 1;
                    continue;
                };
                let (vp, vq) = (p.value(k), q.value(k));
                let mid = p.midpoint(&q);
                let vm = mid.value(k);
                let margin = if vm > 0.0 { vm.ln() - 0.5 * (vp.ln() + vq.ln()) } else { f64::NEG_INFINITY };
                let violation = margin < VIOLATION_TOL;
                records.push(ScanRecord {
                    trial,
                    k,
                    n,
                    margin,
                    value_p: vp,
                    value_q: vq,
                    value_mid: vm,
                    violation,
                    counterexample: violation.then(|| [p.dump(), q.dump()]),
                });
            }
            (records, failures)
        })
        .collect();

    let mut records = Vec::with_capacity(trials);
    let mut sampling_failures = 0;
    for (recs, fails) in per_chunk {
        records.extend(recs);
        sampling_failures += fails;
    }
    let violations = records.iter().filter(|r| r.violation).count();
    let worst = records.iter().min_by(|a, b| a.margin.total_cmp(&b.margin));
    Ok(ScanReport {
        k,
        n,
        field,
        seed,
        trials,
        theorem_backed: k == 1 || k == n,
        sampling_failures,
        violations,
        worst_margin: worst.map_or(f64::INFINITY, |r| r.margin),
        worst_trial: worst.map(|r| r.trial),
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `min_s Q(sA + (1-s)B) - Q(A)` over the sampled `s` grid.
    pub min_segment_margin: f64,
    /// `Q(A - B)`.
    pub q_difference: f64,
    pub segment_ok: bool,
    pub difference_ok: bool,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.segment_ok && self.difference_ok
    }
}

const SEGMENT_SAMPLES: usize = 32;

/// `|r00·tr R| + |z|²`, the size of the terms that cancel in `F_1`.
fn term_scale(p: &ConePoint) -> f64 {
    (p.r00 * p.r.trace()).abs() + p.z.norm_squared()
}

/// Checks `Q(sA + (1-s)B) ≥ Q(A)` on `s ∈ [0, 1]` and `Q(A - B) ≤ 0` for the
/// `k = 1` form `Q = r00·tr R - |z|²`, given `Q(A) = Q(B) > 0`.
pub fn comparison_check(a: &ConePoint, b: &ConePoint) -> Result<ComparisonReport, ConeError> {
    let qa = f_k_eval(a, 1)?;
    let qb = f_k_eval(b, 1)?;
    let terms = term_scale(a).max(term_scale(b));
    if !(qa > 0.0 && (qa - qb).abs() <= 1e-12 * terms) {
        return Err(ConeError::Comparison(format!("Q(A) = {qa}, Q(B) = {qb}")));
    }
    if !(a.r00 > 0.0 && b.r00 > 0.0) {
        return Err(ConeError::Comparison(format!("A00 = {}, B00 = {}", a.r00, b.r00)));
    }
    let tol = COMPARISON_TOL * qa.max(1.0);
    let min_segment_margin = (0..=SEGMENT_SAMPLES)
        .map(|i| {
            let s = i as f64 / SEGMENT_SAMPLES as f64;
            f_k_eval(&a.lerp(b, s), 1).expect("k = 1") - qa
        })
        .fold(f64::INFINITY, f64::min);
    let diff = ConePoint::new(a.r00 - b.r00, &a.r - &b.r, &a.z - &b.z);
    let q_difference = f_k_eval(&diff, 1)?;
    Ok(ComparisonReport {
        min_segment_margin,
        q_difference,
        segment_ok: min_segment_margin >= -tol,
        difference_ok: q_difference <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBattery {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub violations: usize,
    pub sampling_failures: usize,
    pub worst_segment_margin: f64,
    pub worst_difference: f64,
}

/// Random pairs equalised by scaling `B` with `√(Q(A)/Q(B))`.
pub fn comparison_battery(n: usize, trials: usize, seed: u64) -> ComparisonBattery {
    let chunks = trials.div_ceil(CHUNK);
    let results: Vec<(Vec<ComparisonReport>, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed ^ 0xC0FF_EE00, c);
            let mut out = Vec::new();
            let mut failures = 0;
            for _ in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let (Some(a), Some(b)) = (sample_real(&mut rng, 1, n), sample_real(&mut rng, 1, n)) else {
                    failures += 1;
                    continue;
                };
                let qa = f_k_eval(&a, 1).expect("k = 1");
                let qb = f_k_eval(&b, 1).expect("k = 1");
                let scale = (qa / qb).sqrt();
                let b = ConePoint::new(b.r00 * scale, &b.r * scale, &b.z * scale);
                match comparison_check(&a, &b) {
                    Ok(rep) => out.push(rep),
                    Err(_) => failures += 1,
                }
            }
            (out, failures)
        })
        .collect();
    let mut battery = ComparisonBattery {
        n,
        trials,
        seed,
        violations: 0,
        sampling_failures: 0,
        worst_segment_margin: f64::INFINITY,
        worst_difference: f64::NEG_INFINITY,
    };
    for (reps, fails) in results {
        battery.sampling_failures += fails;
        for r in reps {
            battery.violations += usize::from(!r.passed());
            battery.worst_segment_margin = battery.worst_segment_margin.min(r.min_segment_margin);
            battery.worst_difference = battery.worst_difference.max(r.q_difference);
        }
    }
    battery
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(r00: f64, trace_slot: f64, z: f64) -> ConePoint {
        ConePoint::new(r00, DMatrix::from_element(1, 1, trace_slot), DVector::from_element(1, z))
    }

    #[test]
    fn comparison_hand_example() {
        let a = pt(1.0, 2.0, 0.0);
        let b = pt(2.0, 1.0, 0.0);
        let rep = comparison_check(&a, &b).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.q_difference, -1.0);
        assert!((f_k_eval(&a.lerp(&b, 0.5), 1).unwrap() - 2.25).abs() < 1e-15);
        let same = comparison_check(&a, &a).unwrap();
        assert_eq!(same.q_difference, 0.0);
        assert_eq!(same.min_segment_margin, 0.0);
        assert!(matches!(comparison_check(&a, &pt(1.0, 1.0, 0.0)), Err(ConeError::Comparison(_))));
    }

    #[test]
    fn samples_are_admissible() {
        let mut rng = chunk_rng(5, 0);
        for (k, n) in [(1, 3), (2, 3), (3, 3), (2, 5)] {
            for _ in 0..50 {
                let p = sample_real(&mut rng, k, n).unwrap();
                assert!(p.is_admissible(k).unwrap());
                let h = sample_complex(&mut rng, k, n).unwrap();
                assert!(h.is_admissible(k).unwrap());
            }
        }
    }

    #[test]
    fn minimal_shift_lands_on_cone_boundary() {
        let lam = [-2.0, 0.5, 1.0];
        for k in 1..=3 {
            let s = minimal_shift(&lam, k);
            let inside: Vec<f64> = lam.iter().map(|l| l + s + 1e-9).collect();
            let outside: Vec<f64> = lam.iter().map(|l| l + s - 1e-9).collect();
            assert!(in_gamma_k(&inside, k) && !in_gamma_k(&outside, k));
        }
    }

    #[test]
    fn scan_is_deterministic_and_thread_independent() {
        let a = midpoint_concavity_scan(2, 3, ScanField::Complex, 1500, 42).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| midpoint_concavity_scan(2, 3, ScanField::Complex, 1500, 42).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.records.len() + a.sampling_failures, 1500);
        let c = midpoint_concavity_scan(2, 3, ScanField::Complex, 1500, 43).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn empty_scan() {
        let r = midpoint_concavity_scan(1, 3, ScanField::Real, 0, 42).unwrap();
        assert!(r.records.is_empty());
        assert_eq!(r.violations, 0);
        let mut buf = Vec::new();
        r.write_lines(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn bad_order_is_rejected() {
        assert!(matches!(midpoint_concavity_scan(4, 3, ScanField::Real, 10, 1), Err(ConeError::Order { .. })));
    }
}
