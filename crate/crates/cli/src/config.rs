//! Experiment configuration (TOML or JSON) and system construction.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use opdyn::dynamics::Clock;
use opdyn::signed_graph::{load_csv, load_edge_list};
use opdyn::spectral::{self, SpectralCertificate};
use opdyn::stability::{check_gamma, search_gamma};
use opdyn::TheoremClause;
use opdyn::{
    fixtures, tolerances, IntegrateOptions, ScenarioSpec, SignedMatrix, StabilityCertificate,
    SystemMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Kind};

/// Candidate evaluations allowed when searching for a diagonal shift.
pub const SHIFT_BUDGET: usize = 2000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputSource,
    #[serde(default)]
    pub sigma_mode: SigmaMode,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub gamma: GammaSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSource {
    /// Path to an edge list (`n N` header, then `i j w` lines), relative to the config file.
    EdgeList(PathBuf),
    /// Dense matrix, one row per line.
    Csv(String),
    Fixture(Fixture),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    Example2,
    Karate,
    KarateUnsigned,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaMode {
    /// σ = ρ(B).
    Critical,
    /// A common forgetting factor.
    Scalar { sigma: f64 },
    /// `C = B + diag(d_diag)`, `E = C − dI`; `d` defaults to ρ(C).
    Shift { d_diag: Vec<f64>, d: Option<f64> },
    /// σ = ρ(B) if B is eventually positive, otherwise a searched shift with d = ρ(C).
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Positives,
    Neutrals,
    Extremists,
}

impl Scenario {
    pub fn spec(self) -> ScenarioSpec {
        match self {
            Scenario::Positives => ScenarioSpec::positives(),
            Scenario::Neutrals => ScenarioSpec::neutrals(),
            Scenario::Extremists => ScenarioSpec::extremists(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaKeyword {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Keyword(GammaKeyword),
    Explicit(Vec<f64>),
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec::Keyword(GammaKeyword::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0Spec {
    List(Vec<f64>),
    /// Comma-separated values.
    Text(String),
    /// Independent uniform draws from `run.seed`.
    Uniform {
        uniform: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockSpec {
    Model,
    Susceptibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub x0: Option<X0Spec>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub convergence_tol: Option<f64>,
    #[serde(default)]
    pub clock: Option<ClockSpec>,
    #[serde(default)]
    pub stride: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Clause the experiment expects to exercise.
    #[serde(default)]
    pub clause: Option<TheoremClause>,
    #[serde(default = "default_span_tol")]
    pub span_tol: f64,
    #[serde(default = "default_point_tol")]
    pub point_tol: f64,
    #[serde(default = "default_alpha_slack")]
    pub alpha_slack: f64,
}

fn default_samples() -> usize {
    20
}
fn default_span_tol() -> f64 {
    1e-4
}
fn default_point_tol() -> f64 {
    1e-3
}
fn default_alpha_slack() -> f64 {
    tolerances::ALPHA_SLACK
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            x0: None,
            step: None,
            t_max: None,
            convergence_tol: None,
            clock: None,
            stride: None,
            seed: 0,
            samples: default_samples(),
            clause: None,
            span_tol: default_span_tol(),
            point_tol: default_point_tol(),
            alpha_slack: default_alpha_slack(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub trajectory: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> anyhow::Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(|e| e.context(Failure::new(Kind::Config, "unreadable_config")))?;
        let json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg: Self = if json {
            serde_json::from_str(&text)
                .map_err(|e| Failure::wrap(Kind::Config, "invalid_config", e.into()))?
        } else {
            toml::from_str(&text)
                .map_err(|e| Failure::wrap(Kind::Config, "invalid_config", e.into()))?
        };
        cfg.validate()
            .map_err(|e| e.context(Failure::new(Kind::Config, "invalid_config")))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let r = &self.run;
        for (name, v) in [
            ("span_tol", Some(r.span_tol)),
            ("point_tol", Some(r.point_tol)),
            ("alpha_slack", Some(r.alpha_slack)),
            ("step", r.step),
            ("t_max", r.t_max),
            ("convergence_tol", r.convergence_tol),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bail!("run.{name} must be positive, got {v}");
                }
            }
        }
        if r.stride == Some(0) {
            bail!("run.stride must be at least 1");
        }
        if let GammaSpec::Explicit(g) = &self.gamma {
            if let Some(v) = g.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                bail!("gamma entries must be positive, got {v}");
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> anyhow::Result<Scenario> {
        self.scenario.ok_or_else(|| {
            Failure::wrap(
                Kind::Config,
                "missing_scenario",
                anyhow::anyhow!("config has no `scenario`"),
            )
        })
    }

    /// Integration settings: the explicit run fields over `base`. With
    /// `thin`, an unset stride is chosen to keep output files small.
    pub fn integration(&self, base: IntegrateOptions, thin: bool) -> IntegrateOptions {
        let r = &self.run;
        let mut o = base;
        if let Some(v) = r.step {
            o.step = v;
        }
        if let Some(v) = r.t_max {
            o.t_max = v;
        }
        if let Some(v) = r.convergence_tol {
            o.convergence_tol = v;
        }
        match r.clock {
            Some(ClockSpec::Model) => o.clock = Clock::Model,
            Some(ClockSpec::Susceptibility) if o.clock == Clock::Model => {
                o.clock = Clock::Susceptibility { floor: 1e-12 }
            }
            _ => {}
        }
        o.stride = match r.stride {
            Some(k) => k,
            None if thin => auto_stride(&o),
            None => o.stride,
        };
        o
    }

    pub fn initial_state(&self, n: usize) -> anyhow::Result<Option<Vec<f64>>> {
        let x0 = match &self.run.x0 {
            None => return Ok(None),
            Some(X0Spec::List(v)) => v.clone(),
            Some(X0Spec::Text(s)) => s
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| {
                    Failure::wrap(Kind::Config, "invalid_x0", anyhow::anyhow!("run.x0: {e}"))
                })?,
            Some(X0Spec::Uniform { uniform: [lo, hi] }) => {
                if !(-1.0 <= *lo && lo <= hi && *hi <= 1.0) {
                    return Err(Failure::wrap(
                        Kind::Config,
                        "invalid_x0",
                        anyhow::anyhow!("run.x0.uniform must satisfy -1 <= lo <= hi <= 1"),
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.run.seed);
                (0..n).map(|_| rng.random_range(*lo..=*hi)).collect()
            }
        };
        if x0.len() != n {
            return Err(Failure::wrap(
                Kind::Config,
                "invalid_x0",
                anyhow::anyhow!(
                    "run.x0 has {} entries, the network has {n} agents",
                    x0.len()
                ),
            ));
        }
        if let Some(v) = x0.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(Failure::wrap(
                Kind::Config,
                "invalid_x0",
                anyhow::anyhow!("run.x0 entry {v} lies outside [-1, 1]"),
            ));
        }
        Ok(Some(x0))
    }
}

/// Keeps stored trajectories near 2000 rows.
pub fn auto_stride(o: &IntegrateOptions) -> usize {
    ((o.t_max / o.step) / 2000.0).ceil().max(1.0) as usize
}

impl InputSource {
    pub fn label(&self) -> String {
        match self {
            InputSource::EdgeList(p) => format!("edge_list:{}", p.display()),
            InputSource::Csv(_) => "csv:inline".into(),
            InputSource::Fixture(f) => format!(
                "fixture:{}",
                serde_json::to_value(f).unwrap().as_str().unwrap()
            ),
        }
    }

    pub fn load(&self, base: &Path) -> anyhow::Result<SignedMatrix> {
        let parsed = match self {
            InputSource::EdgeList(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(|e| e.context(Failure::new(Kind::Config, "unreadable_input")))?;
                load_edge_list(&text)
            }
            InputSource::Csv(text) => load_csv(text),
            InputSource::Fixture(Fixture::Example2) => Ok(fixtures::example2_b()),
            InputSource::Fixture(Fixture::Karate) => Ok(fixtures::karate_signed()),
            InputSource::Fixture(Fixture::KarateUnsigned) => Ok(fixtures::karate_unsigned()),
        };
        parsed.map_err(|e| Failure::wrap(Kind::Config, "parse_error", e.into()))
    }

    /// Shift candidates tried before the generic search.
    fn shift_seeds(&self) -> Vec<Vec<f64>> {
        match self {
            InputSource::Fixture(Fixture::Example2) => vec![fixtures::EXAMPLE2_D.to_vec()],
            _ => Vec::new(),
        }
    }
}

/// How σ was resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaRecord {
    pub mode: SigmaMode,
    /// `rho_B` or `find_shift_D` for auto, otherwise the mode name.
    pub path: String,
    #[serde(rename = "rho_B")]
    pub rho_b: f64,
    pub b_eventually_positive: bool,
    pub sigma: Option<f64>,
    pub d_diag: Option<Vec<f64>>,
    pub d: Option<f64>,
    pub shift_evaluations: Option<usize>,
}

/// Result of building `E`; `system` is absent with a reason when infeasible.
pub struct Built {
    pub b_spectral: SpectralCertificate,
    pub sigma: SigmaRecord,
    pub system: Result<SystemMatrix, String>,
}

pub fn build_system(
    b: &SignedMatrix,
    input: &InputSource,
    mode: &SigmaMode,
) -> anyhow::Result<Built> {
    let b_spectral = spectral::is_eventually_positive(b, tolerances::SIMPLE_EIG)?;
    let b_ep = b_spectral.failed_clause.is_none();
    let mut rec = SigmaRecord {
        mode: mode.clone(),
        path: String::new(),
        rho_b: b_spectral.rho,
        b_eventually_positive: b_ep,
        sigma: None,
        d_diag: None,
        d: None,
        shift_evaluations: None,
    };
    let system = match mode {
        SigmaMode::Critical => {
            rec.path = "critical".into();
            rec.sigma = Some(b_spectral.rho);
            spectral::build_system_a1_critical(b).map_err(|e| e.to_string())
        }
        SigmaMode::Scalar { sigma } => {
            rec.path = "scalar".into();
            rec.sigma = Some(*sigma);
            spectral::build_system_a1(b, *sigma, tolerances::SIMPLE_EIG).map_err(|e| e.to_string())
        }
        SigmaMode::Shift { d_diag, d } => {
            rec.path = "shift".into();
            rec.d_diag = Some(d_diag.clone());
            if d_diag.len() != b.n() {
                return Err(Failure::wrap(
                    Kind::Config,
                    "invalid_shift",
                    anyhow::anyhow!(
                        "sigma_mode.d_diag has {} entries, the network has {}",
                        d_diag.len(),
                        b.n()
                    ),
                ));
            }
            let built = match d {
                Some(d) => spectral::build_system_a2(b, d_diag, *d, tolerances::SIMPLE_EIG),
                None => spectral::build_system_a2_critical(b, d_diag),
            };
            rec.d = built
                .as_ref()
                .ok()
                .and_then(|s| s.shift.as_ref().map(|s| s.d));
            built.map_err(|e| e.to_string())
        }
        SigmaMode::Auto if b_ep => {
            rec.path = "rho_B".into();
            rec.sigma = Some(b_spectral.rho);
            spectral::build_system_a1_critical(b).map_err(|e| e.to_string())
        }
        SigmaMode::Auto => {
            rec.path = "find_shift_D".into();
            match spectral::find_shift_d(b, SHIFT_BUDGET, &input.shift_seeds()) {
                Some(cand) => {
                    rec.d_diag = Some(cand.d_diag.clone());
                    rec.d = Some(cand.d);
                    rec.shift_evaluations = Some(cand.evaluations);
                    spectral::build_system_a2_critical(b, &cand.d_diag).map_err(|e| e.to_string())
                }
                None => Err(format!(
                    "B is not eventually positive and no diagonal shift was found in {SHIFT_BUDGET} evaluations"
                )),
            }
        }
    };
    Ok(Built {
        b_spectral,
        sigma: rec,
        system,
    })
}

/// Resolves Γ; `Err` carries the machine-readable reason.
pub fn certificate(
    sys: &SystemMatrix,
    gamma: &GammaSpec,
) -> anyhow::Result<Result<StabilityCertificate, String>> {
    match gamma {
        GammaSpec::Keyword(GammaKeyword::Auto) => Ok(search_gamma(
            &sys.e,
            tolerances::GAMMA_BUDGET,
            tolerances::NSD_REL,
        )
        .ok_or_else(|| {
            format!(
                "no diagonal certificate found in {} evaluations",
                tolerances::GAMMA_BUDGET
            )
        })),
        GammaSpec::Explicit(g) => {
            if g.len() != sys.n() {
                return Err(Failure::wrap(
                    Kind::Config,
                    "invalid_gamma",
                    anyhow::anyhow!("gamma has {} entries, the network has {}", g.len(), sys.n()),
                ));
            }
            let c = check_gamma(&sys.e, g, tolerances::NSD_REL)?;
            Ok(if c.valid {
                Ok(c)
            } else {
                Err(format!(
                    "supplied gamma is not a certificate (lambda_max_H = {:e}, rank_H = {}, rank_E = {})",
                    c.lambda_max_h, c.rank_h, c.rank_e
                ))
            })
        }
    }
}
