//! The field `ẋ = A(x)Ex`, its Jacobian and fixed-step RK4 integration on
//! the box `[−1, 1]^N`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::SystemMatrix;
use crate::tolerances;

/// Per-agent map `(i, x_i) ↦ value`.
pub type AgentMap = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// `a_i = 0.5(1 − x_i)`
    StubbornPositives,
    /// `a_i = x_i²`
    StubbornNeutrals,
    /// `a_i = 1 − x_i²`
    StubbornExtremists,
    Custom,
}

#[derive(Clone)]
pub struct CustomSusceptibility {
    pub a: AgentMap,
    pub derivative: Option<AgentMap>,
    /// Declared Lipschitz bound of every `a_i` on `[−1, 1]`.
    pub lipschitz: f64,
}

#[derive(Clone)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub custom: Option<CustomSusceptibility>,
}

impl fmt::Debug for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("ScenarioSpec");
        d.field("kind", &self.kind);
        if let Some(c) = &self.custom {
            d.field("lipschitz", &c.lipschitz)
                .field("analytic_derivative", &c.derivative.is_some());
        }
        d.finish()
    }
}

const PROBE_POINTS: usize = 201;

impl ScenarioSpec {
    pub fn positives() -> Self {
        Self::builtin(ScenarioKind::StubbornPositives)
    }

    pub fn neutrals() -> Self {
        Self::builtin(ScenarioKind::StubbornNeutrals)
    }

    pub fn extremists() -> Self {
        Self::builtin(ScenarioKind::StubbornExtremists)
    }

    /// Built-in scenario; `Custom` is rejected here, use [`ScenarioSpec::custom`].
    pub fn builtin(kind: ScenarioKind) -> Self {
        assert!(kind != ScenarioKind::Custom, "custom scenarios need a map");
        Self { kind, custom: None }
    }

    /// Custom susceptibility for `n` agents, range-checked on a grid of
    /// probe points in `[−1, 1]`.
    pub fn custom(
        n: usize,
        a: AgentMap,
        derivative: Option<AgentMap>,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidOptions(format!(
                "Lipschitz bound {lipschitz}"
            )));
        }
        for agent in 0..n {
            for k in 0..PROBE_POINTS {
                let x = -1.0 + 2.0 * k as f64 / (PROBE_POINTS - 1) as f64;
                let value = a(agent, x);
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::SusceptibilityOutOfRange { agent, x, value });
                }
            }
        }
        Ok(Self {
            kind: ScenarioKind::Custom,
            custom: Some(CustomSusceptibility {
                a,
                derivative,
                lipschitz,
            }),
        })
    }

    #[inline]
    pub fn a(&self, i: usize, x: f64) -> f64 {
        match self.kind {
            ScenarioKind::StubbornPositives => 0.5 * (1.0 - x),
            ScenarioKind::StubbornNeutrals => x * x,
            ScenarioKind::StubbornExtremists => 1.0 - x * x,
            ScenarioKind::Custom => (self.custom.as_ref().expect("custom map").a)(i, x),
        }
    }

    /// `a_i′(x)`; custom maps without a derivative use central differences.
    pub fn da(&self, i: usize, x: f64) -> f64 {
        match self.kind {
            ScenarioKind::StubbornPositives => -0.5,
            ScenarioKind::StubbornNeutrals => 2.0 * x,
            ScenarioKind::StubbornExtremists => -2.0 * x,
            ScenarioKind::Custom => {
                let c = self.custom.as_ref().expect("custom map");
                match &c.derivative {
                    Some(d) => d(i, x),
                    None => {
                        let h = tolerances::JACOBIAN_FD_STEP;
                        (c.a.as_ref()(i, x + h) - c.a.as_ref()(i, x - h)) / (2.0 * h)
                    }
                }
            }
        }
    }
}

fn check_box(x: &[f64]) -> Result<()> {
    match x
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.abs() <= 1.0 + 1e-12))
    {
        Some((index, &value)) => Err(Error::StateOutOfBox { index, value }),
        None => Ok(()),
    }
}

fn check_dim(sys: &SystemMatrix, x: &[f64]) -> Result<()> {
    if x.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            expected: sys.n(),
            got: x.len(),
        });
    }
    Ok(())
}

pub fn susceptibility(scenario: &ScenarioSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_box(x)?;
    x.iter()
        .enumerate()
        .map(|(agent, &xi)| {
            let value = scenario.a(agent, xi);
            if (0.0..=1.0).contains(&value) {
                Ok(value)
            } else {
                Err(Error::SusceptibilityOutOfRange {
                    agent,
                    x: xi,
                    value,
                })
            }
        })
        .collect()
}

/// `A(x)Ex`.
pub fn vector_field(sys: &SystemMatrix, scenario: &ScenarioSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(sys, x)?;
    let ex = sys.e.mul_vec(x);
    Ok(ex
        .iter()
        .enumerate()
        .map(|(i, v)| scenario.a(i, x[i]) * v)
        .collect())
}

/// Product-rule Jacobian `a_i′(x_i)(Ex)_i δ_ij + a_i(x_i) e_ij`.
pub fn field_jacobian(
    sys: &SystemMatrix,
    scenario: &ScenarioSpec,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    check_dim(sys, x)?;
    let e = sys.e.entries();
    let ex = sys.e.mul_vec(x);
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    for r in 0..n {
        let a = scenario.a(r, x[r]);
        for c in 0..n {
            j[(r, c)] = a * e[(r, c)];
        }
        j[(r, r)] += scenario.da(r, x[r]) * ex[r];
    }
    Ok(j)
}

/// Neutrals Jacobian in factored form `diag(x)·K`, with `K_ij = x_i e_ij`
/// off the diagonal and `K_ii = η_i = e_ii x_i + 2 Σ_j e_ij x_j`.
pub fn neutrals_jacobian_factored(sys: &SystemMatrix, x: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(sys, x)?;
    let e = sys.e.entries();
    let ex = sys.e.mul_vec(x);
    let n = x.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            e[(i, i)] * x[i] + 2.0 * ex[i]
        } else {
            x[i] * e[(i, j)]
        }
    });
    Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(x)) * k)
}

/// Integration clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Clock {
    /// Step in model time `t`.
    Model,
    /// Step in `τ` with `dt/dτ = 1/s(x)`, `s(x) = max(max_i a_i(x_i), floor)`.
    ///
    /// Orbits are unchanged; only their parametrisation is. This keeps the
    /// step count bounded when every susceptibility decays at the limit
    /// (neutral agents near the origin). `t_max` then bounds `τ`, while the
    /// recorded times are model times.
    Susceptibility { floor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub step: f64,
    pub t_max: f64,
    pub convergence_tol: f64,
    pub clock: Clock,
    /// Store every `stride`-th state (the initial and final states are always kept).
    pub stride: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            step: tolerances::STEP,
            t_max: tolerances::T_MAX,
            convergence_tol: tolerances::CONVERGENCE,
            clock: Clock::Model,
            stride: 1,
        }
    }
}

impl IntegrateOptions {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidOptions(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidOptions(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::InvalidOptions(
                "convergence_tol must be nonnegative".into(),
            ));
        }
        if self.stride == 0 {
            return Err(Error::InvalidOptions("stride must be at least 1".into()));
        }
        if let Clock::Susceptibility { floor } = self.clock {
            if !(floor > 0.0) {
                return Err(Error::InvalidOptions("clock floor must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    TimeLimit,
    Converged,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub limit_estimate: Vec<f64>,
    pub alpha: Option<f64>,
    pub residual_field: f64,
    pub distance_to_span: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminated_by: Termination,
    pub convergence: Option<ConvergenceReport>,
    pub diagnostic: Option<String>,
    /// Largest pre-clamp distance outside the box over all steps.
    pub max_excursion: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states
            .last()
            .expect("trajectory has the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has the initial time")
    }

    /// CSV with header `t,x1,...,xN`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t}"));
            for v in x {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// `‖x − (vᵀx / vᵀv) v‖∞` and the coefficient `vᵀx / vᵀv`.
pub fn span_projection(x: &[f64], v: &[f64]) -> (f64, f64) {
    let vv: f64 = v.iter().map(|a| a * a).sum();
    let alpha = if vv > 0.0 {
        x.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / vv
    } else {
        0.0
    };
    let dist = x
        .iter()
        .zip(v)
        .fold(0.0f64, |m, (a, b)| m.max((a - alpha * b).abs()));
    (dist, alpha)
}

pub fn convergence_report(
    sys: &SystemMatrix,
    scenario: &ScenarioSpec,
    x: &[f64],
    tol: f64,
) -> Result<ConvergenceReport> {
    let residual_field = linalg::inf_norm(&vector_field(sys, scenario, x)?);
    let (distance_to_span, alpha) = span_projection(x, sys.v_r());
    Ok(ConvergenceReport {
        limit_estimate: x.to_vec(),
        alpha: (distance_to_span <= 10.0 * tol).then_some(alpha),
        residual_field,
        distance_to_span,
    })
}

/// Row-major field evaluator used inside the integrators.
struct Field<'a> {
    e: Vec<f64>,
    n: usize,
    scenario: &'a ScenarioSpec,
}

impl<'a> Field<'a> {
    fn new(sys: &SystemMatrix, scenario: &'a ScenarioSpec) -> Self {
        Self {
            e: sys.e.to_row_major(),
            n: sys.n(),
            scenario,
        }
    }

    /// Writes `A(x)Ex` into `out`, returning the largest susceptibility.
    fn eval(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let n = self.n;
        let mut smax = 0.0f64;
        for i in 0..n {
            let row = &self.e[i * n..(i + 1) * n];
            let ex: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            let a = self.scenario.a(i, x[i]);
            smax = smax.max(a);
            out[i] = a * ex;
        }
        smax
    }
}

struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

/// One RK4 step of `dx/ds = F(x)/w(x)`, `dt/ds = 1/w(x)`; returns Δt.
/// `w ≡ 1` for the model clock.
fn rk4_step(f: &Field, clock: Clock, x: &mut [f64], h: f64, s: &mut Rk4Scratch) -> f64 {
    let n = x.len();
    let weight = |smax: f64| match clock {
        Clock::Model => 1.0,
        Clock::Susceptibility { floor } => smax.max(floor),
    };
    let stage = |xin: &[f64], out: &mut [f64]| -> f64 {
        let w = weight(f.eval(xin, out));
        if w != 1.0 {
            out.iter_mut().for_each(|v| *v /= w);
        }
        1.0 / w
    };
    let r1 = stage(x, &mut s.k1);
    for i in 0..n {
        s.tmp[i] = x[i] + 0.5 * h * s.k1[i];
    }
    let r2 = stage(&s.tmp, &mut s.k2);
    for i in 0..n {
        s.tmp[i] = x[i] + 0.5 * h * s.k2[i];
    }
    let r3 = stage(&s.tmp, &mut s.k3);
    for i in 0..n {
        s.tmp[i] = x[i] + h * s.k3[i];
    }
    let r4 = stage(&s.tmp, &mut s.k4);
    for i in 0..n {
        x[i] += h / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
    }
    h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
}

/// Clamps into the box; returns the excursion or an abort diagnostic.
fn clamp_box(x: &mut [f64]) -> std::result::Result<f64, String> {
    let mut excursion = 0.0f64;
    for (i, v) in x.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(format!("state component {} became non-finite", i + 1));
        }
        let out = v.abs() - 1.0;
        if out > 0.0 {
            excursion = excursion.max(out);
            if out > tolerances::CLAMP_ABORT {
                return Err(format!(
                    "state component {} left the box by {out:e} (value {v})",
                    i + 1
                ));
            }
            *v = v.clamp(-1.0, 1.0);
        }
    }
    Ok(excursion)
}

/// Fixed-step RK4 with box clamping and joint residual/stagnation stopping.
pub fn integrate(
    sys: &SystemMatrix,
    scenario: &ScenarioSpec,
    x0: &[f64],
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    check_dim(sys, x0)?;
    check_box(x0)?;
    let n = x0.len();
    let field = Field::new(sys, scenario);
    let mut scratch = Rk4Scratch::new(n);
    let mut x = x0.to_vec();
    let mut t = 0.0f64;
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let window = tolerances::STAGNATION_WINDOW;
    let mut history: Vec<Vec<f64>> = vec![x.clone(); window + 1];
    let mut residual = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut max_excursion = 0.0f64;
    let max_steps = (opts.t_max / opts.step).ceil() as usize;
    let mut terminated_by = Termination::TimeLimit;
    let mut diagnostic = None;
    let mut steps = 0usize;
    field.eval(&x, &mut residual);
    if residual.iter().all(|r| *r == 0.0) {
        terminated_by = Termination::Converged;
    }

    while steps < max_steps && terminated_by != Termination::Converged {
        let h = opts
            .step
            .min(opts.t_max - steps as f64 * opts.step)
            .max(f64::MIN_POSITIVE);
        prev.copy_from_slice(&x);
        let t_prev = t;
        let dt = rk4_step(&field, opts.clock, &mut x, h, &mut scratch);
        steps += 1;
        t += dt;
        match clamp_box(&mut x) {
            Ok(ex) => max_excursion = max_excursion.max(ex),
            Err(msg) => {
                terminated_by = Termination::Diverged;
                diagnostic = Some(msg);
                // the endpoint is the last state that stayed in the box
                if states.last() != Some(&prev) {
                    times.push(t_prev);
                    states.push(prev.clone());
                }
                break;
            }
        }
        history[steps % (window + 1)].copy_from_slice(&x);

        let smax = field.eval(&x, &mut residual);
        let scale = match opts.clock {
            Clock::Model => 1.0,
            Clock::Susceptibility { floor } => smax.max(floor),
        };
        let res = linalg::inf_norm(&residual) / scale;
        let converged = if res == 0.0 {
            true
        } else if res < opts.convergence_tol && steps >= window {
            let old = &history[(steps - window) % (window + 1)];
            let moved = x
                .iter()
                .zip(old)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            moved < opts.convergence_tol
        } else {
            false
        };
        let last = converged || steps == max_steps;
        if steps % opts.stride == 0 || last {
            times.push(t);
            states.push(x.clone());
        }
        if converged {
            terminated_by = Termination::Converged;
            break;
        }
    }
    let convergence = match terminated_by {
        Termination::Diverged => None,
        _ => Some(convergence_report(
            sys,
            scenario,
            states.last().unwrap(),
            opts.convergence_tol,
        )?),
    };
    Ok(Trajectory {
        times,
        states,
        terminated_by,
        convergence,
        diagnostic,
        max_excursion,
        steps,
    })
}

/// `M(t_end)` for the variational equation `Ṁ = DF(x(t))M`, `M(0) = I`,
/// co-integrated with the state by RK4 in model time.
pub fn flow_jacobian(
    sys: &SystemMatrix,
    scenario: &ScenarioSpec,
    x0: &[f64],
    t_end: f64,
    step: f64,
) -> Result<DMatrix<f64>> {
    check_dim(sys, x0)?;
    check_box(x0)?;
    if !(step > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidOptions(
            "step must be positive and t_end nonnegative".into(),
        ));
    }
    let n = x0.len();
    let mut m = DMatrix::<f64>::identity(n, n);
    if t_end == 0.0 {
        return Ok(m);
    }
    let field = Field::new(sys, scenario);
    let mut x = x0.to_vec();
    let steps = (t_end / step).ceil() as usize;
    let h = t_end / steps as f64;
    let mut buf = vec![0.0; n];
    let mut f = |x: &[f64], m: &DMatrix<f64>| -> Result<(Vec<f64>, DMatrix<f64>)> {
        field.eval(x, &mut buf);
        let dm = field_jacobian(sys, scenario, x)? * m;
        Ok((buf.clone(), dm))
    };
    for _ in 0..steps {
        let (k1, m1) = f(&x, &m)?;
        let x2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
        let (k2, m2) = f(&x2, &(&m + &m1 * (0.5 * h)))?;
        let x3: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k2[i]).collect();
        let (k3, m3) = f(&x3, &(&m + &m2 * (0.5 * h)))?;
        let x4: Vec<f64> = (0..n).map(|i| x[i] + h * k3[i]).collect();
        let (k4, m4) = f(&x4, &(&m + &m3 * h))?;
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        m += (m1 + m2 * 2.0 + m3 * 2.0 + m4) * (h / 6.0);
        clamp_box(&mut x).map_err(Error::LeftBox)?;
    }
    Ok(m)
}
