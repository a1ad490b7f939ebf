//! Diagonal stability certificates `H(ΓE) ⪯ 0`, `rank H(ΓE) = rank E`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::SignedMatrix;
use crate::spectral;
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaMethod {
    UserSupplied,
    Identity,
    MMatrixPath,
    Search,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub gamma: Vec<f64>,
    #[serde(rename = "lambda_max_H")]
    pub lambda_max_h: f64,
    #[serde(rename = "rank_H")]
    pub rank_h: usize,
    #[serde(rename = "rank_E")]
    pub rank_e: usize,
    pub valid: bool,
    pub method: GammaMethod,
}

/// `H(ΓE) = (ΓE + EᵀΓ)/2`.
pub fn h_gamma(e: &SignedMatrix, gamma: &[f64]) -> DMatrix<f64> {
    let ge = DMatrix::from_diagonal(&DVector::from_column_slice(gamma)) * e.entries();
    linalg::sym_part(&ge)
}

fn validate_gamma(e: &SignedMatrix, gamma: &[f64]) -> Result<()> {
    if gamma.len() != e.n() {
        return Err(Error::DimensionMismatch {
            expected: e.n(),
            got: gamma.len(),
        });
    }
    match gamma
        .iter()
        .enumerate()
        .find(|(_, g)| !(**g > 0.0 && g.is_finite()))
    {
        Some((index, &value)) => Err(Error::NonPositiveGamma { index, value }),
        None => Ok(()),
    }
}

/// Certifies `Γ`; `tol` is relative to ‖H(ΓE)‖₂.
pub fn check_gamma(e: &SignedMatrix, gamma: &[f64], tol: f64) -> Result<StabilityCertificate> {
    validate_gamma(e, gamma)?;
    let identity = gamma.iter().all(|g| *g == 1.0);
    Ok(certify(
        e,
        gamma,
        tol,
        if identity {
            GammaMethod::Identity
        } else {
            GammaMethod::UserSupplied
        },
    ))
}

fn certify(e: &SignedMatrix, gamma: &[f64], tol: f64, method: GammaMethod) -> StabilityCertificate {
    let h = h_gamma(e, gamma);
    let lambda_max_h = linalg::sym_max_eigenvalue(&h);
    let h_norm = linalg::norm2(&h);
    let rank_h = linalg::rank(&h, tolerances::RANK_REL);
    let rank_e = linalg::rank(e.entries(), tolerances::RANK_REL);
    let valid = e.n() > 0 && lambda_max_h <= tol * h_norm && rank_h == rank_e;
    StabilityCertificate {
        gamma: gamma.to_vec(),
        lambda_max_h,
        rank_h,
        rank_e,
        valid,
        method,
    }
}

/// Derivative-free search over `Γ = diag(e^θ)`.
///
/// Minimises `λ_max(H(ΓE)) / max γ` by coordinate golden-section sweeps from
/// three starts run in parallel: θ = 0, the ratio of the left and right null
/// vectors of `E` when both are sign-definite (in the singular case the kernel
/// of H must contain the kernel of E, which pins Γ up to scale), and a seeded
/// random start. The null-vector ratio itself is tried before any search.
/// Returns the first valid certificate in start order.
pub fn search_gamma(e: &SignedMatrix, budget: usize, tol: f64) -> Option<StabilityCertificate> {
    let n = e.n();
    if n == 0 {
        return None;
    }
    let ones = vec![1.0; n];
    let first = certify(e, &ones, tol, GammaMethod::Identity);
    if first.valid {
        return Some(first);
    }
    let kernel = kernel_ratio_start(e);
    if let Some(theta) = &kernel {
        let exact = certify(e, &to_gamma(theta), tol, GammaMethod::Search);
        if exact.valid {
            return Some(exact);
        }
    }
    let mut starts = vec![vec![0.0; n]];
    starts.extend(kernel);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_6a11);
    starts.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    let per_start = budget.saturating_sub(1) / starts.len();

    let results: Vec<Option<StabilityCertificate>> = starts
        .par_iter()
        .map(|theta0| coordinate_search(e, theta0.clone(), per_start, tol))
        .collect();
    results
        .into_iter()
        .flatten()
        // never trust the optimiser's bookkeeping
        .map(|c| certify(e, &c.gamma, tol, GammaMethod::Search))
        .find(|c| c.valid)
}

fn kernel_ratio_start(e: &SignedMatrix) -> Option<Vec<f64>> {
    let s = linalg::singular_values(e.entries());
    let smax = *s.first()?;
    if *s.last()? > tolerances::RANK_REL * smax.max(f64::MIN_POSITIVE) {
        return None;
    }
    let orient = |v: DVector<f64>| {
        let v = linalg::inf_normalize(&v);
        v.iter().all(|x| *x > 0.0).then_some(v)
    };
    let right = orient(linalg::least_singular_vector(e.entries()))?;
    let left = orient(linalg::least_singular_vector(&e.entries().transpose()))?;
    Some((0..e.n()).map(|i| (left[i] / right[i]).ln()).collect())
}

fn objective(e: &SignedMatrix, theta: &[f64]) -> f64 {
    linalg::sym_max_eigenvalue(&h_gamma(e, &to_gamma(theta)))
}

fn to_gamma(theta: &[f64]) -> Vec<f64> {
    let top = theta.iter().fold(f64::NEG_INFINITY, |m, t| m.max(*t));
    theta.iter().map(|t| (t - top).exp()).collect()
}

fn coordinate_search(
    e: &SignedMatrix,
    mut theta: Vec<f64>,
    budget: usize,
    tol: f64,
) -> Option<StabilityCertificate> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let n = e.n();
    let mut evals = 1usize;
    let mut best = objective(e, &theta);
    let mut width = 2.0f64;
    while evals < budget {
        let before = best;
        for i in 0..n {
            let centre = theta[i];
            let (mut lo, mut hi) = (centre - width, centre + width);
            let mut probe = theta.clone();
            let eval_at = |t: f64, probe: &mut Vec<f64>, evals: &mut usize| {
                probe[i] = t;
                *evals += 1;
                objective(e, probe)
            };
            let mut x1 = hi - INV_PHI * (hi - lo);
            let mut x2 = lo + INV_PHI * (hi - lo);
            let mut f1 = eval_at(x1, &mut probe, &mut evals);
            let mut f2 = eval_at(x2, &mut probe, &mut evals);
            while hi - lo > 1e-10 * width.max(1.0) && evals < budget {
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - INV_PHI * (hi - lo);
                    f1 = eval_at(x1, &mut probe, &mut evals);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + INV_PHI * (hi - lo);
                    f2 = eval_at(x2, &mut probe, &mut evals);
                }
            }
            let (t, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
            if f < best {
                best = f;
                theta[i] = t;
                let cert = certify(e, &to_gamma(&theta), tol, GammaMethod::Search);
                if cert.valid {
                    return Some(cert);
                }
            }
            if evals >= budget {
                break;
            }
        }
        if (before - best).abs() <= 1e-14 * before.abs().max(1e-300) {
            width *= 0.5;
            if width < 1e-9 {
                break;
            }
        }
    }
    let cert = certify(e, &to_gamma(&theta), tol, GammaMethod::Search);
    cert.valid.then_some(cert)
}

/// Real normal matrix with real spectrum, i.e. `UEUᵀ` diagonal for some
/// orthogonal `U`.
pub fn is_orthogonally_diagonalizable(e: &SignedMatrix, tol: f64) -> Result<bool> {
    let m = e.entries();
    let scale = linalg::norm2(m).max(1.0);
    let commutator = m * m.transpose() - m.transpose() * m;
    if linalg::norm2(&commutator) > tol * scale * scale {
        return Ok(false);
    }
    let eigs = linalg::eigenvalues(m)?;
    Ok(eigs.iter().all(|z| z.im.abs() <= tol * scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSpaceReport {
    pub rank_a: usize,
    pub rank_ha: usize,
    pub same_null_space: bool,
    /// Every null vector of `A` is (numerically) annihilated by `H(A)`.
    pub containment: bool,
}

/// Rank and kernel relations between `A` and `H(A)` for `H(A) ⪯ 0`.
///
/// `tol` is relative to ‖H(A)‖₂ for the semidefiniteness hypothesis. The
/// containment bound uses `‖Hv‖² ≤ ‖H‖ (|vᵀHv| + 2 λ₊)` for unit `v`, which
/// holds for any symmetric `H` with largest eigenvalue `λ₊`.
pub fn null_space_lemma_check(a: &SignedMatrix, tol: f64) -> Result<NullSpaceReport> {
    let h = linalg::sym_part(a.entries());
    let h_norm = linalg::norm2(&h);
    let lambda_max = linalg::sym_max_eigenvalue(&h);
    if a.n() > 0 && lambda_max > tol * h_norm {
        return Err(Error::NotNegativeSemidefinite(lambda_max));
    }
    let rank_a = linalg::rank(a.entries(), tolerances::RANK_REL);
    let rank_ha = linalg::rank(&h, tolerances::RANK_REL);
    let lambda_plus = lambda_max.max(0.0);
    let containment = linalg::null_space(a.entries(), tolerances::RANK_REL)
        .iter()
        .all(|v| {
            let hv = (&h * v).norm();
            let q = v.dot(&(&h * v)).abs();
            let bound = (h_norm * (q + 2.0 * lambda_plus)).sqrt() + tol * h_norm;
            hv <= bound.max(tol)
        });
    Ok(NullSpaceReport {
        rank_a,
        rank_ha,
        same_null_space: rank_a == rank_ha,
        containment,
    })
}

/// `(λ_max(M) ≤ tol, λ_max(M))` for symmetric `M`.
pub fn semidefinite_check(m: &DMatrix<f64>, tol: f64) -> Result<(bool, f64)> {
    let asym = linalg::norm2(&(m - m.transpose()));
    if asym > tol * linalg::norm2(m).max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let lambda_max = linalg::sym_max_eigenvalue(&linalg::sym_part(m));
    Ok((lambda_max <= tol, lambda_max))
}

/// For NSD `M`: `xᵀMx = 0` forces `Mx = 0`. Returns `None` when the premise
/// `|xᵀMx| ≤ tol‖x‖²` fails, otherwise whether `‖Mx‖ ≤ √(tol‖M‖)·‖x‖`.
pub fn kernel_direction_probe(m: &DMatrix<f64>, x: &[f64], tol: f64) -> Option<bool> {
    let x = DVector::from_column_slice(x);
    let nx2 = x.norm_squared();
    let mx = m * &x;
    if x.dot(&mx).abs() > tol * nx2 {
        return None;
    }
    let bound = (tol * linalg::norm2(m).max(1.0)).sqrt() * nx2.sqrt() * (1.0 + 1e-12);
    Some(mx.norm() <= bound)
}

/// Classical diagonal-stability certificate for `E = B − σI` with `B ≥ 0`
/// and `σ > ρ(B)`: with `A = −E`, `x = A⁻¹𝟏`, `y = A⁻ᵀ𝟏`, take
/// `γ_i = y_i / x_i`. Falls back to [`search_gamma`] if that fails.
pub fn m_matrix_gamma(b: &SignedMatrix, sigma: f64) -> Result<StabilityCertificate> {
    let n = b.n();
    for c in 0..n {
        for r in 0..n {
            if b[(r, c)] < 0.0 {
                return Err(Error::NegativeEntry { row: r, col: c });
            }
        }
    }
    let rho = spectral::spectral_radius(b)?;
    if !(sigma > rho) || (sigma - rho).abs() <= tolerances::REGIME * rho.max(1.0) {
        return Err(Error::SigmaNotAboveRho { sigma, rho });
    }
    let e = SignedMatrix::new(b.entries() - DMatrix::identity(n, n) * sigma)?;
    let a = -e.entries();
    let ones = DVector::from_element(n, 1.0);
    let lu = a.clone().lu();
    let lu_t = a.transpose().lu();
    let gamma: Option<Vec<f64>> = match (lu.solve(&ones), lu_t.solve(&ones)) {
        (Some(x), Some(y)) if x.iter().chain(y.iter()).all(|v| *v > 0.0) => {
            Some((0..n).map(|i| y[i] / x[i]).collect())
        }
        _ => None,
    };
    if let Some(g) = gamma {
        let cert = certify(&e, &g, 0.0, GammaMethod::MMatrixPath);
        // strict: H(ΓE) ≺ 0
        if cert.valid && cert.lambda_max_h < 0.0 {
            return Ok(cert);
        }
    }
    search_gamma(&e, tolerances::GAMMA_BUDGET, tolerances::NSD_REL).ok_or(Error::MissingCertificate)
}
