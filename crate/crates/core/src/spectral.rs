//! Dominant eigenstructure, eventual positivity and the system matrix `E`.
//!
//! A real matrix is eventually positive exactly when both it and its
//! transpose have the strong Perron–Frobenius property and the spectral
//! radius strictly dominates every other eigenvalue in modulus.
//! [`is_eventually_positive`] checks that spectral characterisation;
//! [`eventual_positivity_oracle`] checks the definition directly by
//! forming powers.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, PerronClause, Result};
use crate::linalg;
use crate::matrix::SignedMatrix;
use crate::tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCertificate {
    pub rho: f64,
    pub dominant_eig: f64,
    pub simple: bool,
    /// Right eigenvector of `dominant_eig`, ‖·‖∞ = 1 with a positive pivot.
    pub v_right: Vec<f64>,
    /// Left eigenvector (eigenvector of Aᵀ), normalised likewise.
    pub v_left: Vec<f64>,
    pub eventually_positive: bool,
    /// First power from which Aᵏ > 0, present only when the oracle ran.
    pub k0: Option<usize>,
    #[serde(skip)]
    pub failed_clause: Option<PerronClause>,
}

/// Outcome of the Perron analysis of a single matrix (no transpose).
#[derive(Debug, Clone)]
struct PerronAnalysis {
    rho: f64,
    dominant_eig: f64,
    simple: bool,
    vector: Vec<f64>,
    /// Clause of the strong Perron–Frobenius property that failed, if any.
    strong_pf_failure: Option<PerronClause>,
    strictly_dominant: bool,
}

pub fn spectrum(a: &SignedMatrix) -> Result<Vec<Complex<f64>>> {
    linalg::eigenvalues(a.entries())
}

pub fn spectral_radius(a: &SignedMatrix) -> Result<f64> {
    Ok(spectrum(a)?.iter().fold(0.0, |m, z| m.max(z.norm())))
}

/// `ρ(A) − max{|λ| : λ ≠ λ_dominant}`; negative or zero when ρ is shared.
pub fn dominance_gap(a: &SignedMatrix) -> Result<f64> {
    let eigs = spectrum(a)?;
    let Some(idx) = max_modulus_index(&eigs) else {
        return Ok(0.0);
    };
    let rho = eigs[idx].norm();
    let other = eigs
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != idx)
        .fold(0.0f64, |m, (_, z)| m.max(z.norm()));
    Ok(rho - other)
}

fn max_modulus_index(eigs: &[Complex<f64>]) -> Option<usize> {
    eigs.iter()
        .enumerate()
        .max_by(|x, y| {
            x.1.norm()
                .total_cmp(&y.1.norm())
                // prefer the eigenvalue with the larger real part on ties
                .then(x.1.re.total_cmp(&y.1.re))
        })
        .map(|(i, _)| i)
}

fn analyze(a: &SignedMatrix, tol: f64) -> Result<PerronAnalysis> {
    let n = a.n();
    let eigs = spectrum(a)?;
    if n == 0 {
        return Ok(PerronAnalysis {
            rho: 0.0,
            dominant_eig: 0.0,
            simple: false,
            vector: Vec::new(),
            strong_pf_failure: Some(PerronClause::RhoNotPositiveEigenvalue),
            strictly_dominant: false,
        });
    }
    let rho = eigs.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let scale = tol * rho.max(1.0);

    // ρ is an eigenvalue iff some eigenvalue sits (numerically) at +ρ.
    let at_rho = eigs
        .iter()
        .enumerate()
        .filter(|(_, z)| z.im.abs() <= scale && (z.re - rho).abs() <= scale)
        .min_by(|x, y| (x.1.re - rho).abs().total_cmp(&(y.1.re - rho).abs()))
        .map(|(i, _)| i);

    let dom_idx = at_rho.unwrap_or_else(|| max_modulus_index(&eigs).expect("n > 0"));
    let dominant = eigs[dom_idx];
    let simple = eigs
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != dom_idx)
        .all(|(_, z)| (z - dominant).norm() > scale);
    let other_max = eigs
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != dom_idx)
        .fold(0.0f64, |m, (_, z)| m.max(z.norm()));
    let strictly_dominant = rho - other_max > scale;

    let shifted = a.entries() - DMatrix::identity(n, n) * dominant.re;
    let v = linalg::inf_normalize(&linalg::least_singular_vector(&shifted));
    let vector: Vec<f64> = v.iter().copied().collect();

    let strong_pf_failure = if at_rho.is_none() || rho <= tol {
        Some(PerronClause::RhoNotPositiveEigenvalue)
    } else if !simple {
        Some(PerronClause::NotSimple)
    } else if vector.iter().any(|&x| x <= tolerances::PERRON_POSITIVE) {
        Some(PerronClause::RightVectorNotPositive)
    } else {
        None
    };

    Ok(PerronAnalysis {
        rho,
        dominant_eig: dominant.re,
        simple,
        vector,
        strong_pf_failure,
        strictly_dominant,
    })
}

/// ρ(A) is a simple positive eigenvalue with a strictly positive right
/// eigenvector. Strict modulus dominance is *not* required here.
pub fn has_strong_pf_property(a: &SignedMatrix, tol: f64) -> Result<bool> {
    Ok(analyze(a, tol)?.strong_pf_failure.is_none())
}

pub fn is_eventually_positive(a: &SignedMatrix, tol: f64) -> Result<SpectralCertificate> {
    let right = analyze(a, tol)?;
    let left = analyze(&a.transpose(), tol)?;
    let failed_clause = if let Some(c) = right.strong_pf_failure {
        Some(c)
    } else if let Some(c) = left.strong_pf_failure {
        Some(match c {
            PerronClause::RightVectorNotPositive => PerronClause::LeftVectorNotPositive,
            other => other,
        })
    } else if !right.strictly_dominant {
        Some(PerronClause::NotStrictlyDominant)
    } else {
        None
    };
    Ok(SpectralCertificate {
        rho: right.rho,
        dominant_eig: right.dominant_eig,
        simple: right.simple,
        v_right: right.vector,
        v_left: left.vector,
        eventually_positive: failed_clause.is_none(),
        k0: None,
        failed_clause,
    })
}

/// [`is_eventually_positive`] plus the brute-force power check, filling `k0`.
pub fn is_eventually_positive_with_oracle(
    a: &SignedMatrix,
    tol: f64,
    k_max: usize,
) -> Result<SpectralCertificate> {
    let mut cert = is_eventually_positive(a, tol)?;
    cert.k0 = eventual_positivity_oracle(a, k_max);
    Ok(cert)
}

/// Smallest `k0` such that Aᵏ > 0 for every k in `[k0, k_max]`.
///
/// Powers are renormalised by their max-abs entry at every step, which keeps
/// the sign pattern. A positive run must cover at least half of the horizon:
/// a matrix whose powers alternate in sign would otherwise report
/// `k0 = k_max` whenever `k_max` lands on a positive power.
pub fn eventual_positivity_oracle(a: &SignedMatrix, k_max: usize) -> Option<usize> {
    if k_max == 0 || a.n() == 0 {
        return None;
    }
    let a = a.entries();
    let mut power = a.clone();
    let mut run_start: Option<usize> = None;
    for k in 1..=k_max {
        if k > 1 {
            power = &power * a;
        }
        let scale = power.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        power /= scale;
        if power.iter().all(|&v| v > 0.0) {
            run_start.get_or_insert(k);
        } else {
            run_start = None;
        }
    }
    let k0 = run_start?;
    let min_run = k_max.div_ceil(2);
    (k_max + 1 - k0 >= min_run).then_some(k0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// σ = ρ(B)
    CriticalA1,
    /// σ > ρ(B)
    StrictA1,
    /// d = ρ(C)
    CriticalA2,
    /// d > ρ(C)
    StrictA2,
}

impl Regime {
    pub fn is_critical(self) -> bool {
        matches!(self, Regime::CriticalA1 | Regime::CriticalA2)
    }
}

/// Diagonal shift data `C = B + D`, `E = C − dI`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub d_diag: Vec<f64>,
    pub c: SignedMatrix,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMatrix {
    pub e: SignedMatrix,
    pub b: SignedMatrix,
    pub sigma: Vec<f64>,
    pub shift: Option<Shift>,
    pub regime: Regime,
    /// Eventual-positivity certificate of `B` (A1 path) or `C` (A2 path);
    /// its `v_right` is the v_r of the convergence statements.
    pub perron: SpectralCertificate,
}

impl SystemMatrix {
    pub fn n(&self) -> usize {
        self.e.n()
    }

    pub fn v_r(&self) -> &[f64] {
        &self.perron.v_right
    }
}

fn within(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn require_eventually_positive(m: &SignedMatrix, tol: f64) -> Result<SpectralCertificate> {
    let cert = is_eventually_positive(m, tol)?;
    match cert.failed_clause {
        Some(c) => Err(Error::NotEventuallyPositive(c)),
        None => Ok(cert),
    }
}

/// `E = B − σI` with B eventually positive and σ ≥ ρ(B).
pub fn build_system_a1(b: &SignedMatrix, sigma: f64, tol: f64) -> Result<SystemMatrix> {
    let perron = require_eventually_positive(b, tol)?;
    let rho = perron.rho;
    let critical = within(sigma, rho, tolerances::REGIME.max(tol));
    if !critical && sigma < rho {
        return Err(Error::SigmaBelowRho { sigma, rho });
    }
    let n = b.n();
    let e = SignedMatrix::new(b.entries() - DMatrix::identity(n, n) * sigma)?;
    Ok(SystemMatrix {
        e,
        b: b.clone(),
        sigma: vec![sigma; n],
        shift: None,
        regime: if critical {
            Regime::CriticalA1
        } else {
            Regime::StrictA1
        },
        perron,
    })
}

/// A1 path with σ = ρ(B).
pub fn build_system_a1_critical(b: &SignedMatrix) -> Result<SystemMatrix> {
    let rho = spectral_radius(b)?;
    build_system_a1(b, rho, tolerances::SIMPLE_EIG)
}

/// `E = C − dI` with `C = B + D` eventually positive and d ≥ ρ(C).
pub fn build_system_a2(b: &SignedMatrix, d_diag: &[f64], d: f64, tol: f64) -> Result<SystemMatrix> {
    let c = b.add_diagonal(d_diag)?;
    let perron = require_eventually_positive(&c, tol)?;
    let rho = perron.rho;
    let critical = within(d, rho, tolerances::REGIME.max(tol));
    if !critical && d < rho {
        return Err(Error::ShiftBelowRho { d, rho });
    }
    let sigma: Vec<f64> = d_diag.iter().map(|di| d - di).collect();
    if let Some((agent, &s)) = sigma.iter().enumerate().find(|(_, s)| **s <= 0.0) {
        return Err(Error::NonPositiveSigma { agent, sigma: s });
    }
    let n = b.n();
    let e = SignedMatrix::new(c.entries() - DMatrix::identity(n, n) * d)?;
    Ok(SystemMatrix {
        e,
        b: b.clone(),
        sigma,
        shift: Some(Shift {
            d_diag: d_diag.to_vec(),
            c,
            d,
        }),
        regime: if critical {
            Regime::CriticalA2
        } else {
            Regime::StrictA2
        },
        perron,
    })
}

/// A2 path with d = ρ(B + D).
pub fn build_system_a2_critical(b: &SignedMatrix, d_diag: &[f64]) -> Result<SystemMatrix> {
    let rho = spectral_radius(&b.add_diagonal(d_diag)?)?;
    build_system_a2(b, d_diag, rho, tolerances::SIMPLE_EIG)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCandidate {
    pub d_diag: Vec<f64>,
    pub c: SignedMatrix,
    /// ρ(C)
    pub d: f64,
    /// Eventual-positivity evaluations spent, including the accepted one.
    pub evaluations: usize,
}

/// Searches for a diagonal `D ≥ 0` making `B + D` eventually positive.
///
/// Order of candidates: `D = 0`, the caller's seeds, uniform shifts `δI` on a
/// geometric grid, then a greedy per-coordinate increase that bumps the
/// coordinate where the current Perron candidate (right or left) is smallest.
/// Every candidate costs one unit of `budget`.
pub fn find_shift_d(b: &SignedMatrix, budget: usize, seeds: &[Vec<f64>]) -> Option<ShiftCandidate> {
    let n = b.n();
    let tol = tolerances::SIMPLE_EIG;
    let mut evaluations = 0usize;
    let try_candidate = |d_diag: &[f64], evaluations: &mut usize| -> Option<ShiftCandidate> {
        if *evaluations >= budget || d_diag.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return None;
        }
        *evaluations += 1;
        let c = b.add_diagonal(d_diag).ok()?;
        let cert = is_eventually_positive(&c, tol).ok()?;
        cert.eventually_positive.then(|| ShiftCandidate {
            d_diag: d_diag.to_vec(),
            c,
            d: cert.rho,
            evaluations: *evaluations,
        })
    };

    if let Some(found) = try_candidate(&vec![0.0; n], &mut evaluations) {
        return Some(found);
    }
    for seed in seeds.iter().filter(|s| s.len() == n) {
        if let Some(found) = try_candidate(seed, &mut evaluations) {
            return Some(found);
        }
    }
    let scale = b.max_abs().max(1e-12);
    let grid: Vec<f64> = (0..12).map(|k| scale * 2f64.powi(k - 6)).collect();
    for &delta in &grid {
        if let Some(found) = try_candidate(&vec![delta; n], &mut evaluations) {
            return Some(found);
        }
    }

    let step = 0.25 * scale;
    let mut current = vec![0.0; n];
    while evaluations < budget {
        let c = b.add_diagonal(&current).ok()?;
        let weakest = weakest_coordinate(&c)?;
        current[weakest] += step;
        for delta in [0.0, scale, 4.0 * scale] {
            let cand: Vec<f64> = current.iter().map(|v| v + delta).collect();
            if let Some(found) = try_candidate(&cand, &mut evaluations) {
                return Some(found);
            }
            if evaluations >= budget {
                return None;
            }
        }
    }
    None
}

/// Coordinate where the right or left eigenvector of the real eigenvalue
/// with the largest real part is smallest (after orienting by sum).
fn weakest_coordinate(c: &SignedMatrix) -> Option<usize> {
    let n = c.n();
    let eigs = spectrum(c).ok()?;
    let lead = eigs
        .iter()
        .filter(|z| z.im.abs() <= 1e-12 * z.norm().max(1.0))
        .map(|z| z.re)
        .max_by(|a, b| a.total_cmp(b))?;
    let oriented = |m: &DMatrix<f64>| {
        let v = linalg::least_singular_vector(&(m - DMatrix::identity(n, n) * lead));
        let s: f64 = v.iter().sum();
        let v = if s < 0.0 { -v } else { v };
        let norm = linalg::inf_norm(v.as_slice()).max(f64::MIN_POSITIVE);
        v / norm
    };
    let right = oriented(c.entries());
    let left = oriented(&c.entries().transpose());
    (0..n).min_by(|&i, &j| right[i].min(left[i]).total_cmp(&right[j].min(left[j])))
}
