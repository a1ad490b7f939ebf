//! Theorem-clause prediction and the sampling harness that checks predicted
//! limits numerically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate, span_projection, Clock, IntegrateOptions, ScenarioKind, ScenarioSpec, Termination,
    Trajectory,
};
use crate::equilibria::{block_decompose, boundary_equilibrium, IndexPartition};
use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::SystemMatrix;
use crate::stability::StabilityCertificate;
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremClause {
    #[serde(rename = "T1.1")]
    T1_1,
    #[serde(rename = "T1.2")]
    T1_2,
    #[serde(rename = "T1.3")]
    T1_3,
    #[serde(rename = "T2.pos")]
    T2Pos,
    #[serde(rename = "T2.neg")]
    T2Neg,
    #[serde(rename = "T2.mixed")]
    T2Mixed,
    #[serde(rename = "T2.strict")]
    T2Strict,
    #[serde(rename = "T3.1")]
    T3_1,
    #[serde(rename = "T3.2")]
    T3_2,
    #[serde(rename = "T3.3")]
    T3_3,
    #[serde(rename = "T3.4")]
    T3_4,
}

impl TheoremClause {
    pub const ALL: [TheoremClause; 11] = [
        TheoremClause::T1_1,
        TheoremClause::T1_2,
        TheoremClause::T1_3,
        TheoremClause::T2Pos,
        TheoremClause::T2Neg,
        TheoremClause::T2Mixed,
        TheoremClause::T2Strict,
        TheoremClause::T3_1,
        TheoremClause::T3_2,
        TheoremClause::T3_3,
        TheoremClause::T3_4,
    ];

    pub fn id(self) -> &'static str {
        match self {
            TheoremClause::T1_1 => "T1.1",
            TheoremClause::T1_2 => "T1.2",
            TheoremClause::T1_3 => "T1.3",
            TheoremClause::T2Pos => "T2.pos",
            TheoremClause::T2Neg => "T2.neg",
            TheoremClause::T2Mixed => "T2.mixed",
            TheoremClause::T2Strict => "T2.strict",
            TheoremClause::T3_1 => "T3.1",
            TheoremClause::T3_2 => "T3.2",
            TheoremClause::T3_3 => "T3.3",
            TheoremClause::T3_4 => "T3.4",
        }
    }
}

impl std::str::FromStr for TheoremClause {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        TheoremClause::ALL
            .into_iter()
            .find(|c| c.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown theorem clause `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpectedLimit {
    /// `α v_r` with α in the given bracket.
    SpanOfVr {
        lo: f64,
        hi: f64,
        lo_closed: bool,
        hi_closed: bool,
    },
    Point {
        x: Vec<f64>,
    },
    Zero,
    /// `sign · v_r / ‖v_r‖∞`.
    BetaVr {
        sign: i8,
    },
    Unsupported {
        reason: String,
    },
}

/// How the free (non-pinned) agents are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FreeSampling {
    /// Independent uniform draws on `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// Uniform on `[lo, hi]`, redrawn until at least one agent is positive
    /// and one negative.
    MixedSigns { lo: f64, hi: f64 },
}

/// Admissible initial conditions of a clause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// `(agent, value)` held exactly.
    pub pinned: Vec<(usize, f64)>,
    pub free: FreeSampling,
    pub description: String,
}

impl Region {
    /// Draws one initial state; pinned agents get their exact values.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let free: Vec<usize> = (0..n)
            .filter(|i| !self.pinned.iter().any(|(j, _)| j == i))
            .collect();
        let mut x = vec![0.0; n];
        for &(j, v) in &self.pinned {
            x[j] = v;
        }
        let (lo, hi, mixed) = match self.free {
            FreeSampling::Interval { lo, hi } => (lo, hi, false),
            FreeSampling::MixedSigns { lo, hi } => (lo, hi, true),
        };
        loop {
            for &i in &free {
                x[i] = rng.random_range(lo..=hi);
            }
            let has_pos = x.iter().any(|v| *v > 0.0);
            let has_neg = x.iter().any(|v| *v < 0.0);
            if !mixed || free.len() < 2 || (has_pos && has_neg) {
                return x;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremPrediction {
    /// `None` when no clause applies.
    pub theorem_id: Option<TheoremClause>,
    /// The symmetric-network variant, certified by Γ = I without search.
    pub corollary: bool,
    pub region: Region,
    pub expected_limit: ExpectedLimit,
    pub j_set: Option<Vec<usize>>,
    /// `1 / ‖v_r‖∞`.
    pub beta: f64,
}

impl TheoremPrediction {
    pub fn is_supported(&self) -> bool {
        self.theorem_id.is_some()
    }

    /// Original-coordinate limit for point-type expectations.
    pub fn limit_point(&self, v_r: &[f64]) -> Option<Vec<f64>> {
        match &self.expected_limit {
            ExpectedLimit::Point { x } => Some(x.clone()),
            ExpectedLimit::Zero => Some(vec![0.0; v_r.len()]),
            ExpectedLimit::BetaVr { sign } => Some(
                v_r.iter()
                    .map(|v| f64::from(*sign) * self.beta * v)
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// `{j : v_rj ≥ ‖v_r‖∞ (1 − tie)}`.
pub fn argmax_set(v_r: &[f64], tie: f64) -> Vec<usize> {
    let m = linalg::inf_norm(v_r);
    (0..v_r.len())
        .filter(|&j| v_r[j] >= m * (1.0 - tie))
        .collect()
}

/// Agents whose susceptibility vanishes at `x0`, with their values.
fn stubborn_agents(scenario: &ScenarioSpec, x0: &[f64]) -> Vec<(usize, f64)> {
    (0..x0.len())
        .filter(|&i| scenario.a(i, x0[i]) == 0.0)
        .map(|i| (i, x0[i]))
        .collect()
}

/// Selects the applicable clause for `x0`.
///
/// A certificate is required unless `B` is symmetric, in which case Γ = I is
/// used and the prediction is flagged as a corollary.
pub fn predict(
    sys: &SystemMatrix,
    scenario: &ScenarioSpec,
    x0: &[f64],
    cert: Option<&StabilityCertificate>,
) -> Result<TheoremPrediction> {
    if x0.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            expected: sys.n(),
            got: x0.len(),
        });
    }
    if let Some((i, v)) = x0.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
        return Err(Error::StateOutOfBox {
            index: i,
            value: *v,
        });
    }
    let valid_cert = cert.is_some_and(|c| c.valid && c.gamma.len() == sys.n());
    let corollary = !valid_cert && sys.b.is_symmetric(0.0);
    if !valid_cert && !corollary {
        return Err(Error::MissingCertificate);
    }

    let n = sys.n();
    let v_r = sys.v_r();
    let beta = 1.0 / linalg::inf_norm(v_r);
    let critical = sys.regime.is_critical();
    let j_set = critical.then(|| argmax_set(v_r, tolerances::TIE));
    let v_r_is_ones = j_set.as_ref().is_some_and(|j| j.len() == n);
    let eps = tolerances::SAMPLING_MARGIN;
    let pins = stubborn_agents(scenario, x0);
    let pinned_idx: Vec<usize> = pins.iter().map(|(i, _)| *i).collect();

    let mut pred = TheoremPrediction {
        theorem_id: None,
        corollary,
        region: Region {
            pinned: pins.clone(),
            free: FreeSampling::Interval { lo: -1.0, hi: 1.0 },
            description: String::new(),
        },
        expected_limit: ExpectedLimit::Unsupported {
            reason: String::new(),
        },
        j_set: j_set.clone(),
        beta,
    };
    let unsupported = |mut p: TheoremPrediction, reason: String| {
        p.region.description = "initial state only".into();
        p.expected_limit = ExpectedLimit::Unsupported { reason };
        p
    };
    let span = |lo: f64, hi: f64, lo_closed: bool, hi_closed: bool| ExpectedLimit::SpanOfVr {
        lo,
        hi,
        lo_closed,
        hi_closed,
    };

    // limit on a pinned face from the boundary equilibrium
    let face_point = |strict_inside: bool| -> std::result::Result<Vec<f64>, String> {
        if pins.len() == n {
            return Err("every agent is stubborn; no free agents remain".into());
        }
        let part = IndexPartition::from_zero_set(n, &pinned_idx);
        let blocks = block_decompose(&sys.e, &part);
        let y1: Vec<f64> = part.i_a0.iter().map(|&i| x0[i]).collect();
        let eq = boundary_equilibrium(&blocks, &y1).map_err(|e| e.to_string())?;
        let Some(y2) = eq.y2_star.clone() else {
            return Err(eq.diagnostic.unwrap_or_else(|| "E22 is singular".into()));
        };
        let ok = if strict_inside {
            eq.strictly_inside
        } else {
            eq.half_open_inside
        };
        if !ok {
            let worst = y2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            return Err(format!(
                "boundary equilibrium leaves the admissible box (max |y2*| = {worst:.6})"
            ));
        }
        Ok(blocks.embed(&y1, &y2))
    };

    match scenario.kind {
        ScenarioKind::StubbornPositives => {
            let free_sampling = FreeSampling::Interval {
                lo: -1.0,
                hi: 1.0 - eps,
            };
            pred.region.free = free_sampling;
            if pins.is_empty() {
                pred.theorem_id = Some(TheoremClause::T1_1);
                pred.region.description = "x < 1".into();
                pred.expected_limit = if critical {
                    span(-beta, beta, true, false)
                } else {
                    ExpectedLimit::Zero
                };
                return Ok(pred);
            }
            if critical && !v_r_is_ones && j_set.as_deref() == Some(pinned_idx.as_slice()) {
                pred.theorem_id = Some(TheoremClause::T1_3);
                pred.region.description = "x_J = 1, other agents in [-1, 1)".into();
                pred.expected_limit = ExpectedLimit::BetaVr { sign: 1 };
                return Ok(pred);
            }
            match face_point(false) {
                Ok(x) => {
                    pred.theorem_id = Some(TheoremClause::T1_2);
                    pred.region.description =
                        "stubborn agents at 1, other agents in [-1, 1)".into();
                    pred.expected_limit = ExpectedLimit::Point { x };
                    Ok(pred)
                }
                Err(reason) => Ok(unsupported(pred, reason)),
            }
        }
        ScenarioKind::StubbornNeutrals => {
            if !critical {
                pred.theorem_id = Some(TheoremClause::T2Strict);
                pred.region.pinned.clear();
                pred.region.free = FreeSampling::Interval { lo: -1.0, hi: 1.0 };
                pred.region.description = "[-1, 1]^N".into();
                pred.expected_limit = ExpectedLimit::Zero;
                return Ok(pred);
            }
            pred.region.pinned.clear();
            if x0.iter().all(|v| *v > 0.0) {
                pred.theorem_id = Some(TheoremClause::T2Pos);
                pred.region.free = FreeSampling::Interval { lo: eps, hi: 1.0 };
                pred.region.description = "x > 0".into();
                pred.expected_limit = span(0.0, beta, false, true);
            } else if x0.iter().all(|v| *v < 0.0) {
                pred.theorem_id = Some(TheoremClause::T2Neg);
                pred.region.free = FreeSampling::Interval { lo: -1.0, hi: -eps };
                pred.region.description = "x < 0".into();
                pred.expected_limit = span(-beta, 0.0, true, false);
            } else {
                pred.theorem_id = Some(TheoremClause::T2Mixed);
                pred.region.free = FreeSampling::MixedSigns { lo: -1.0, hi: 1.0 };
                pred.region.description = "mixed signs".into();
                pred.expected_limit = ExpectedLimit::Zero;
            }
            Ok(pred)
        }
        ScenarioKind::StubbornExtremists => {
            pred.region.free = FreeSampling::Interval {
                lo: -1.0 + eps,
                hi: 1.0 - eps,
            };
            if pins.is_empty() {
                pred.theorem_id = Some(TheoremClause::T3_1);
                pred.region.description = "(-1, 1)^N".into();
                pred.expected_limit = if critical {
                    span(-beta, beta, false, false)
                } else {
                    ExpectedLimit::Zero
                };
                return Ok(pred);
            }
            if critical && !v_r_is_ones && j_set.as_deref() == Some(pinned_idx.as_slice()) {
                let up = pins.iter().all(|(_, v)| *v == 1.0);
                let down = pins.iter().all(|(_, v)| *v == -1.0);
                if up || down {
                    pred.theorem_id = Some(if up {
                        TheoremClause::T3_3
                    } else {
                        TheoremClause::T3_4
                    });
                    pred.region.description = format!(
                        "x_J = {}, other agents in (-1, 1)",
                        if up { "1" } else { "-1" }
                    );
                    pred.expected_limit = ExpectedLimit::BetaVr {
                        sign: if up { 1 } else { -1 },
                    };
                    return Ok(pred);
                }
            }
            match face_point(true) {
                Ok(x) => {
                    pred.theorem_id = Some(TheoremClause::T3_2);
                    pred.region.description =
                        "stubborn agents at +-1, other agents in (-1, 1)".into();
                    pred.expected_limit = ExpectedLimit::Point { x };
                    Ok(pred)
                }
                Err(reason) => Ok(unsupported(pred, reason)),
            }
        }
        ScenarioKind::Custom => Ok(unsupported(
            pred,
            "no clause covers custom susceptibilities".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Limit tolerance for span-type expectations (distance to span(v_r)).
    pub span_tol: f64,
    /// Limit tolerance for point-type expectations (∞-norm).
    pub point_tol: f64,
    pub alpha_slack: f64,
    /// Overrides the per-clause integration defaults.
    pub integrate: Option<IntegrateOptions>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            span_tol: 1e-4,
            point_tol: 1e-3,
            alpha_slack: tolerances::ALPHA_SLACK,
            integrate: None,
        }
    }
}

/// Integration settings used for a clause when none are given.
///
/// Neutral trajectories slow down algebraically near the origin, so the
/// neutral clauses run on the susceptibility-normalised clock.
pub fn default_integration(clause: TheoremClause) -> IntegrateOptions {
    match clause {
        TheoremClause::T2Mixed | TheoremClause::T2Strict => IntegrateOptions {
            step: 0.05,
            t_max: 400.0,
            clock: Clock::Susceptibility { floor: 1e-12 },
            ..IntegrateOptions::default()
        },
        TheoremClause::T2Pos | TheoremClause::T2Neg => IntegrateOptions {
            step: 0.05,
            t_max: 4000.0,
            clock: Clock::Susceptibility { floor: 1e-12 },
            ..IntegrateOptions::default()
        },
        _ => IntegrateOptions::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub x0: Vec<f64>,
    pub final_state: Vec<f64>,
    pub final_time: f64,
    pub terminated_by: Termination,
    /// Distance to span(v_r) or to the expected point (∞-norm).
    pub distance: f64,
    pub alpha: f64,
    pub alpha_excess: f64,
    pub alpha_ok: bool,
    pub pinning_ok: bool,
    pub sign_ok: bool,
    pub unanimous: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem_id: TheoremClause,
    pub expected_limit: ExpectedLimit,
    pub samples: Vec<SampleRecord>,
    pub all_passed: bool,
    pub worst_distance: f64,
    pub worst_alpha_excess: f64,
}

impl VerificationReport {
    pub fn failures(&self) -> usize {
        self.samples.iter().filter(|s| !s.pass).count()
    }
}

/// True if every stored state keeps the pinned agents bit-identical.
pub fn pinning_preserved(traj: &Trajectory, pinned: &[(usize, f64)]) -> bool {
    traj.states
        .iter()
        .all(|x| pinned.iter().all(|&(i, v)| x[i].to_bits() == v.to_bits()))
}

fn sign3(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// True if every stored state has the sign pattern of the initial state.
pub fn sign_pattern_preserved(traj: &Trajectory) -> bool {
    let s0: Vec<i8> = traj.states[0].iter().map(|v| sign3(*v)).collect();
    traj.states
        .iter()
        .all(|x| x.iter().zip(&s0).all(|(v, s)| sign3(*v) == *s))
}

/// All components on one side of zero, up to `tol`.
pub fn is_unanimous(x: &[f64], tol: f64) -> bool {
    x.iter().all(|v| *v >= -tol) || x.iter().all(|v| *v <= tol)
}

/// How far `alpha` lies outside the bracket (0 inside).
fn bracket_excess(alpha: f64, lo: f64, hi: f64) -> f64 {
    (lo - alpha).max(alpha - hi).max(0.0)
}

fn bracket_ok(alpha: f64, lo: f64, hi: f64, lo_closed: bool, hi_closed: bool, slack: f64) -> bool {
    let lo_ok = if lo_closed {
        alpha >= lo - slack
    } else {
        alpha > lo
    };
    let hi_ok = if hi_closed {
        alpha <= hi + slack
    } else {
        alpha < hi
    };
    lo_ok && hi_ok
}

fn check_sample(
    pred: &TheoremPrediction,
    sys: &SystemMatrix,
    scenario: &ScenarioSpec,
    x0: Vec<f64>,
    iopts: &IntegrateOptions,
    opts: &VerifyOptions,
) -> Result<SampleRecord> {
    let traj = integrate(sys, scenario, &x0, iopts)?;
    assess_trajectory(pred, sys, scenario, &traj, opts)
}

/// Checks one finished trajectory against a supported prediction.
pub fn assess_trajectory(
    pred: &TheoremPrediction,
    sys: &SystemMatrix,
    scenario: &ScenarioSpec,
    traj: &Trajectory,
    opts: &VerifyOptions,
) -> Result<SampleRecord> {
    let clause = pred.theorem_id.ok_or(Error::Unsupported)?;
    let x0 = traj.states[0].clone();
    let xf = traj.final_state().to_vec();
    let v_r = sys.v_r();
    let (span_dist, alpha) = span_projection(&xf, v_r);
    let pinning_ok = pinning_preserved(&traj, &pred.region.pinned);
    let sign_ok = scenario.kind != ScenarioKind::StubbornNeutrals || sign_pattern_preserved(&traj);

    let (distance, alpha_excess, alpha_ok, needs_unanimity) = match &pred.expected_limit {
        ExpectedLimit::SpanOfVr {
            lo,
            hi,
            lo_closed,
            hi_closed,
        } => {
            // attainment of the half-open upper end is not asserted
            let hi_closed = *hi_closed || clause == TheoremClause::T1_1;
            let ok = bracket_ok(alpha, *lo, *hi, *lo_closed, hi_closed, opts.alpha_slack);
            (span_dist, bracket_excess(alpha, *lo, *hi), ok, true)
        }
        ExpectedLimit::Unsupported { .. } => return Err(Error::Unsupported),
        _ => {
            let target = pred.limit_point(v_r).expect("point-type expectation");
            let d = xf
                .iter()
                .zip(&target)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let unanimity = matches!(pred.expected_limit, ExpectedLimit::BetaVr { .. });
            (d, 0.0, true, unanimity)
        }
    };
    let tol = match pred.expected_limit {
        ExpectedLimit::SpanOfVr { .. } => opts.span_tol,
        _ => opts.point_tol,
    };
    let unanimous = is_unanimous(&xf, 1e-6);
    let pass = traj.terminated_by != Termination::Diverged
        && distance <= tol
        && alpha_ok
        && pinning_ok
        && sign_ok
        && (!needs_unanimity || unanimous);
    Ok(SampleRecord {
        x0,
        final_state: xf,
        final_time: traj.final_time(),
        terminated_by: traj.terminated_by,
        distance,
        alpha,
        alpha_excess,
        alpha_ok,
        pinning_ok,
        sign_ok,
        unanimous,
        pass,
    })
}

/// The initial states `verify_theorem` would draw for `seed`.
pub fn sample_initial_states(
    pred: &TheoremPrediction,
    n: usize,
    samples: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| pred.region.sample(n, &mut rng))
        .collect()
}

/// Samples the prediction's region, integrates each state and checks the
/// limit. Results do not depend on the number of worker threads.
pub fn verify_theorem(
    pred: &TheoremPrediction,
    sys: &SystemMatrix,
    scenario: &ScenarioSpec,
    samples: usize,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let clause = pred.theorem_id.ok_or(Error::Unsupported)?;
    if matches!(pred.expected_limit, ExpectedLimit::Unsupported { .. }) {
        return Err(Error::Unsupported);
    }
    let iopts = opts
        .integrate
        .clone()
        .unwrap_or_else(|| default_integration(clause));
    let starts = sample_initial_states(pred, sys.n(), samples, opts.seed);
    let records = starts
        .into_par_iter()
        .map(|x0| check_sample(pred, sys, scenario, x0, &iopts, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport {
        theorem_id: clause,
        expected_limit: pred.expected_limit.clone(),
        all_passed: records.iter().all(|r| r.pass),
        worst_distance: records.iter().fold(0.0, |m, r| m.max(r.distance)),
        worst_alpha_excess: records.iter().fold(0.0, |m, r| m.max(r.alpha_excess)),
        samples: records,
    })
}
