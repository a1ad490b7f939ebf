//! Equilibrium structure: index partitions, permuted blocks, boundary
//! equilibria, and the Lyapunov functions of the convergence arguments.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ScenarioSpec, Trajectory};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::SignedMatrix;

/// Split of the agents by whether their susceptibility vanishes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPartition {
    /// Agents with `a_i(x_i) = 0` (0-based, ascending).
    pub i_a0: Vec<usize>,
    /// Agents with `a_i(x_i) > 0` (0-based, ascending).
    pub i_aplus: Vec<usize>,
    /// `permutation[k]` is the original index placed at position `k`.
    pub permutation: Vec<usize>,
}

impl IndexPartition {
    /// Partition with an explicit zero set (e.g. the argmax set of v_r).
    pub fn from_zero_set(n: usize, zero: &[usize]) -> Self {
        let mut i_a0: Vec<usize> = zero.to_vec();
        i_a0.sort_unstable();
        i_a0.dedup();
        let i_aplus: Vec<usize> = (0..n).filter(|i| i_a0.binary_search(i).is_err()).collect();
        let permutation = i_a0.iter().chain(&i_aplus).copied().collect();
        Self {
            i_a0,
            i_aplus,
            permutation,
        }
    }

    pub fn n(&self) -> usize {
        self.permutation.len()
    }
}

pub fn partition_indices(scenario: &ScenarioSpec, x: &[f64], tol: f64) -> IndexPartition {
    let zero: Vec<usize> = (0..x.len())
        .filter(|&i| scenario.a(i, x[i]) <= tol)
        .collect();
    IndexPartition::from_zero_set(x.len(), &zero)
}

/// Blocks of `Ē = P E Pᵀ`, split at `|I_a0|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSystem {
    pub partition: IndexPartition,
    pub e11: Vec<Vec<f64>>,
    pub e12: Vec<Vec<f64>>,
    pub e21: Vec<Vec<f64>>,
    pub e22: Vec<Vec<f64>>,
    pub y1_star: Option<Vec<f64>>,
    pub y2_star: Option<Vec<f64>>,
}

fn dm(rows: &[Vec<f64>], r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

impl BlockSystem {
    pub fn k(&self) -> usize {
        self.partition.i_a0.len()
    }

    pub fn e22_matrix(&self) -> DMatrix<f64> {
        let m = self.partition.i_aplus.len();
        dm(&self.e22, m, m)
    }

    pub fn e21_matrix(&self) -> DMatrix<f64> {
        dm(&self.e21, self.partition.i_aplus.len(), self.k())
    }

    /// `Pᵀ Ē P`.
    pub fn reassemble(&self) -> SignedMatrix {
        let n = self.partition.n();
        let k = self.k();
        let p = &self.partition.permutation;
        let mut e = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let v = match (a < k, b < k) {
                    (true, true) => self.e11[a][b],
                    (true, false) => self.e12[a][b - k],
                    (false, true) => self.e21[a - k][b],
                    (false, false) => self.e22[a - k][b - k],
                };
                e[(p[a], p[b])] = v;
            }
        }
        SignedMatrix::new(e).expect("blocks are finite")
    }

    /// Original-coordinate state with `y1` on `I_a0` and `y2` on `I_a+`.
    pub fn embed(&self, y1: &[f64], y2: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.partition.n()];
        for (v, &i) in y1.iter().zip(&self.partition.i_a0) {
            x[i] = *v;
        }
        for (v, &i) in y2.iter().zip(&self.partition.i_aplus) {
            x[i] = *v;
        }
        x
    }
}

pub fn block_decompose(e: &SignedMatrix, part: &IndexPartition) -> BlockSystem {
    let k = part.i_a0.len();
    let p = &part.permutation;
    let block = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| -> Vec<Vec<f64>> {
        rows.map(|a| cols.clone().map(|b| e[(p[a], p[b])]).collect())
            .collect()
    };
    let n = part.n();
    BlockSystem {
        partition: part.clone(),
        e11: block(0..k, 0..k),
        e12: block(0..k, k..n),
        e21: block(k..n, 0..k),
        e22: block(k..n, k..n),
        y1_star: None,
        y2_star: None,
    }
}

/// Reciprocal condition number below which `Ē₂₂` counts as singular.
const RCOND_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEquilibrium {
    pub y2_star: Option<Vec<f64>>,
    pub strictly_inside: bool,
    /// `−1 ≤ y2* < 1`.
    pub half_open_inside: bool,
    pub min_singular_e22: f64,
    pub diagnostic: Option<String>,
}

/// `y2* = −Ē₂₂⁻¹ Ē₂₁ y1*`.
pub fn boundary_equilibrium(blocks: &BlockSystem, y1_star: &[f64]) -> Result<BoundaryEquilibrium> {
    let k = blocks.k();
    if y1_star.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: y1_star.len(),
        });
    }
    let e22 = blocks.e22_matrix();
    let m = e22.nrows();
    if m == 0 {
        return Ok(BoundaryEquilibrium {
            y2_star: Some(Vec::new()),
            strictly_inside: true,
            half_open_inside: true,
            min_singular_e22: f64::INFINITY,
            diagnostic: None,
        });
    }
    let s = linalg::singular_values(&e22);
    let (smax, smin) = (s[0], *s.last().unwrap());
    if smax == 0.0 || smin <= RCOND_GUARD * smax {
        return Ok(BoundaryEquilibrium {
            y2_star: None,
            strictly_inside: false,
            half_open_inside: false,
            min_singular_e22: smin,
            diagnostic: Some(format!(
                "E22 is numerically singular (s_min = {smin:e}, s_max = {smax:e})"
            )),
        });
    }
    let rhs = -(blocks.e21_matrix() * DVector::from_column_slice(y1_star));
    let y2 = e22
        .lu()
        .solve(&rhs)
        .expect("nonsingular by the condition guard");
    let y2: Vec<f64> = y2.iter().copied().collect();
    Ok(BoundaryEquilibrium {
        strictly_inside: y2.iter().all(|v| v.abs() < 1.0),
        half_open_inside: y2.iter().all(|v| (-1.0..1.0).contains(v)),
        y2_star: Some(y2),
        min_singular_e22: smin,
        diagnostic: None,
    })
}

/// The seven Lyapunov functions, by the case each one covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LyapunovKind {
    /// Positives, `x < 1`: `Σ γ_i [−2x_i − 2 ln(1 − x_i)]`.
    PositivesInterior,
    /// Positives on a pinned face, in `s = y2 − y2*`.
    PositivesFace,
    /// Neutrals, `x > 0`: `2 Σ γ_i ln(1 + x_i)`.
    NeutralsPositive,
    /// Neutrals, `x < 0`: `2 Σ γ_i ln(ε − x_i)`.
    NeutralsNegative,
    /// Neutrals with mixed or zero signs.
    NeutralsMixed,
    /// Extremists, interior: `−½ Σ γ_i ln(1 − x_i²)`.
    ExtremistsInterior,
    /// Extremists on a pinned face, in `s = y2 − y2*`.
    ExtremistsFace,
}

impl LyapunovKind {
    pub const ALL: [LyapunovKind; 7] = [
        LyapunovKind::PositivesInterior,
        LyapunovKind::PositivesFace,
        LyapunovKind::NeutralsPositive,
        LyapunovKind::NeutralsNegative,
        LyapunovKind::NeutralsMixed,
        LyapunovKind::ExtremistsInterior,
        LyapunovKind::ExtremistsFace,
    ];

    /// Short label (P1, P2, N1, N2, N3, X1, X2).
    pub fn label(self) -> &'static str {
        match self {
            LyapunovKind::PositivesInterior => "P1",
            LyapunovKind::PositivesFace => "P2",
            LyapunovKind::NeutralsPositive => "N1",
            LyapunovKind::NeutralsNegative => "N2",
            LyapunovKind::NeutralsMixed => "N3",
            LyapunovKind::ExtremistsInterior => "X1",
            LyapunovKind::ExtremistsFace => "X2",
        }
    }
}

/// Pinned face data for the reduced-coordinate functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceParams {
    /// Pinned agents (ascending); every other agent is free.
    pub pinned: Vec<usize>,
    /// Boundary equilibrium on the free agents, in ascending index order.
    pub y2_star: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub gamma: Vec<f64>,
    pub epsilon: f64,
    pub face: Option<FaceParams>,
    /// For the mixed neutrals function: `true` where the agent started negative.
    pub negative_mask: Option<Vec<bool>>,
}

impl LyapunovParams {
    pub fn new(gamma: Vec<f64>) -> Self {
        Self {
            gamma,
            epsilon: 1e-3,
            face: None,
            negative_mask: None,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_face(mut self, pinned: Vec<usize>, y2_star: Vec<f64>) -> Self {
        self.face = Some(FaceParams { pinned, y2_star });
        self
    }

    /// Sign partition read off an initial state.
    pub fn with_signs_of(mut self, x0: &[f64]) -> Self {
        self.negative_mask = Some(x0.iter().map(|v| *v < 0.0).collect());
        self
    }
}

fn ln_checked(component: usize, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v.ln())
    } else {
        Err(Error::LyapunovDomain {
            component,
            value: v,
        })
    }
}

/// Free coordinates `(original index, γ_i, u_i = x_i, y2*_i)` of a face.
fn face_terms<'a>(
    params: &'a LyapunovParams,
    x: &'a [f64],
) -> Result<impl Iterator<Item = (usize, f64, f64, f64)> + 'a> {
    let face = params.face.as_ref().ok_or(Error::LyapunovParams(
        "face",
        "pinned set and y2* are required",
    ))?;
    let free: Vec<usize> = (0..x.len())
        .filter(|i| face.pinned.binary_search(i).is_err())
        .collect();
    if free.len() != face.y2_star.len() {
        return Err(Error::DimensionMismatch {
            expected: free.len(),
            got: face.y2_star.len(),
        });
    }
    Ok(free
        .into_iter()
        .zip(face.y2_star.iter())
        .map(move |(i, &ys)| (i, params.gamma[i], x[i], ys)))
}

pub fn lyapunov_value(kind: LyapunovKind, params: &LyapunovParams, x: &[f64]) -> Result<f64> {
    if params.gamma.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: params.gamma.len(),
        });
    }
    let g = &params.gamma;
    let eps = params.epsilon;
    let mut v = 0.0;
    match kind {
        LyapunovKind::PositivesInterior => {
            for (i, &xi) in x.iter().enumerate() {
                v += g[i] * (-2.0 * xi - 2.0 * ln_checked(i, 1.0 - xi)?);
            }
        }
        LyapunovKind::NeutralsPositive => {
            for (i, &xi) in x.iter().enumerate() {
                v += 2.0 * g[i] * ln_checked(i, 1.0 + xi)?;
            }
        }
        LyapunovKind::NeutralsNegative => {
            for (i, &xi) in x.iter().enumerate() {
                v += 2.0 * g[i] * ln_checked(i, eps - xi)?;
            }
        }
        LyapunovKind::NeutralsMixed => {
            let mask = params.negative_mask.as_ref().ok_or(Error::LyapunovParams(
                "negative_mask",
                "sign partition is required",
            ))?;
            for (i, &xi) in x.iter().enumerate() {
                let arg = if mask[i] { eps - xi } else { xi + 1.0 };
                v += 2.0 * g[i] * ln_checked(i, arg)?;
            }
        }
        LyapunovKind::ExtremistsInterior => {
            for (i, &xi) in x.iter().enumerate() {
                v += -0.5 * g[i] * ln_checked(i, 1.0 - xi * xi)?;
            }
        }
        LyapunovKind::PositivesFace => {
            for (i, gi, u, ys) in face_terms(params, x)? {
                let s = u - ys;
                v += -gi * (2.0 * s + 2.0 * (1.0 - ys) * ln_checked(i, 1.0 - u)?);
            }
        }
        LyapunovKind::ExtremistsFace => {
            // derivative in u = s + y2* is s/(1 − u²), the weight that turns
            // V̇ into sᵀ H(Γ̄₂ Ē₂₂) s
            for (i, gi, u, ys) in face_terms(params, x)? {
                let l1 = ln_checked(i, 1.0 + u)?;
                let l2 = ln_checked(i, 1.0 - u)?;
                v += -0.5 * gi * (ys * (l1 - l2) + l1 + l2);
            }
        }
    }
    Ok(v)
}

/// The variant `−½ Σ γ̄ [y* ln(Φ₁/Φ₂) − ln Φ₂]`.
/// Kept for comparison; it is not monotone along trajectories.
pub fn extremists_face_log_ratio(params: &LyapunovParams, x: &[f64]) -> Result<f64> {
    let mut v = 0.0;
    for (i, gi, u, ys) in face_terms(params, x)? {
        let l1 = ln_checked(i, 1.0 + u)?;
        let l2 = ln_checked(i, 1.0 - u)?;
        v += -0.5 * gi * (ys * (l1 - l2) - l2);
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub max_increase: f64,
    pub violations: usize,
    /// Pairs compared before a domain exit (or all of them).
    pub checked_pairs: usize,
    /// Sample index at which the trajectory left the domain.
    pub exit_index: Option<usize>,
}

/// Counts consecutive samples where `V` rises by more than `1e−8 (1 + |V|)`.
pub fn lyapunov_monotone_check(
    traj: &Trajectory,
    kind: LyapunovKind,
    params: &LyapunovParams,
) -> MonotoneReport {
    lyapunov_monotone_with(traj, |x| lyapunov_value(kind, params, x))
}

pub fn lyapunov_monotone_with(
    traj: &Trajectory,
    v: impl Fn(&[f64]) -> Result<f64>,
) -> MonotoneReport {
    let mut report = MonotoneReport {
        max_increase: 0.0,
        violations: 0,
        checked_pairs: 0,
        exit_index: None,
    };
    let mut prev: Option<f64> = None;
    for (k, x) in traj.states.iter().enumerate() {
        let cur = match v(x) {
            Ok(val) => val,
            Err(_) => {
                report.exit_index = Some(k);
                break;
            }
        };
        if let Some(p) = prev {
            let inc = cur - p;
            report.max_increase = report.max_increase.max(inc);
            if inc > 1e-8 * (1.0 + p.abs()) {
                report.violations += 1;
            }
            report.checked_pairs += 1;
        }
        prev = Some(cur);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, IntegrateOptions};
    use crate::fixtures;

    #[test]
    fn partition_examples() {
        let p = partition_indices(&ScenarioSpec::positives(), &[1.0, 0.3], 0.0);
        assert_eq!((p.i_a0, p.i_aplus), (vec![0], vec![1]));
        let p = partition_indices(&ScenarioSpec::neutrals(), &[0.0, 0.0, 0.5], 0.0);
        assert_eq!(p.i_a0, vec![0, 1]);
        let p = partition_indices(&ScenarioSpec::extremists(), &[1.0, -1.0, 0.2], 0.0);
        assert_eq!(p.i_a0, vec![0, 1]);
        assert_eq!(p.permutation, vec![0, 1, 2]);
        let p = IndexPartition::from_zero_set(3, &[2]);
        assert_eq!(p.permutation, vec![2, 0, 1]);
    }

    #[test]
    fn block_examples() {
        let e = fixtures::example2_system().e;
        let none = block_decompose(&e, &IndexPartition::from_zero_set(3, &[]));
        assert_eq!(none.e22, e.to_rows());
        assert!(none.e11.is_empty() && none.e21.iter().all(|r| r.is_empty()));
        let all = block_decompose(&e, &IndexPartition::from_zero_set(3, &[0, 1, 2]));
        assert_eq!(all.e11, e.to_rows());
        let b = block_decompose(&e, &IndexPartition::from_zero_set(3, &[2]));
        assert!((b.e22[0][0] - -1.3129).abs() < 5e-5);
        assert_eq!(b.e22[0][1], 1.7877);
        assert_eq!(b.e22[1][0], -0.7678);
        assert!((b.e22[1][1] - -0.5797).abs() < 5e-5);
        assert_eq!(b.reassemble(), e);
    }

    #[test]
    fn boundary_examples() {
        let sys = fixtures::example2_system();
        let b = block_decompose(&sys.e, &IndexPartition::from_zero_set(3, &[2]));
        let up = boundary_equilibrium(&b, &[1.0]).unwrap();
        let y = up.y2_star.unwrap();
        assert!((y[0] - sys.v_r()[0]).abs() < 1e-9 && (y[1] - sys.v_r()[1]).abs() < 1e-9);
        assert!(up.strictly_inside);
        let down = boundary_equilibrium(&b, &[-1.0]).unwrap().y2_star.unwrap();
        assert!((down[0] + y[0]).abs() < 1e-15 && (down[1] + y[1]).abs() < 1e-15);

        let diag = SignedMatrix::from_rows(&[&[-1.0, 0.0], &[0.0, -2.0]]).unwrap();
        let b = block_decompose(&diag, &IndexPartition::from_zero_set(2, &[0]));
        assert_eq!(
            boundary_equilibrium(&b, &[1.0]).unwrap().y2_star.unwrap(),
            vec![0.0]
        );

        let sing = SignedMatrix::from_rows(&[&[-1.0, 1.0], &[1.0, 0.0]]).unwrap();
        let b = block_decompose(&sing, &IndexPartition::from_zero_set(2, &[0]));
        let r = boundary_equilibrium(&b, &[1.0]).unwrap();
        assert!(r.y2_star.is_none() && r.diagnostic.is_some());
    }

    #[test]
    fn lyapunov_values() {
        let p = LyapunovParams::new(vec![1.0, 1.0]);
        assert_eq!(
            lyapunov_value(LyapunovKind::PositivesInterior, &p, &[0.0, 0.0]).unwrap(),
            0.0
        );
        assert_eq!(
            lyapunov_value(LyapunovKind::ExtremistsInterior, &p, &[0.0, 0.0]).unwrap(),
            0.0
        );
        let v = lyapunov_value(LyapunovKind::PositivesInterior, &p, &[0.5, 0.5]).unwrap();
        assert!((v - 2.0 * (-1.0 - 2.0 * 0.5f64.ln())).abs() < 1e-12);
        assert!((v - 0.772_588_722_239_781).abs() < 1e-12);
        assert!(matches!(
            lyapunov_value(LyapunovKind::PositivesInterior, &p, &[1.0, 0.0]),
            Err(Error::LyapunovDomain { component: 0, .. })
        ));
        assert!(lyapunov_value(LyapunovKind::NeutralsMixed, &p, &[0.1, -0.1]).is_err());
        assert!(lyapunov_value(LyapunovKind::PositivesFace, &p, &[1.0, 0.1]).is_err());
    }

    #[test]
    fn equilibrium_trajectory_has_zero_increase() {
        let sys = fixtures::example2_system();
        let x0: Vec<f64> = sys.v_r().iter().map(|v| 0.5 * v).collect();
        let o = IntegrateOptions {
            t_max: 1.0,
            ..IntegrateOptions::default()
        };
        let tr = integrate(&sys, &ScenarioSpec::extremists(), &x0, &o).unwrap();
        let p = LyapunovParams::new(fixtures::EXAMPLE2_GAMMA.to_vec());
        let r = lyapunov_monotone_check(&tr, LyapunovKind::ExtremistsInterior, &p);
        assert!(r.max_increase.abs() <= 1e-12);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn log_ratio_face_function_differs() {
        let p = LyapunovParams::new(vec![1.0; 3]).with_face(vec![2], vec![0.4, 0.6]);
        let a = lyapunov_value(LyapunovKind::ExtremistsFace, &p, &[0.1, 0.2, 1.0]).unwrap();
        let b = extremists_face_log_ratio(&p, &[0.1, 0.2, 1.0]).unwrap();
        assert!((a - b).abs() > 1e-3);
    }
}
