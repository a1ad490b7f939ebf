//! Panel-by-panel runs of the two bundled networks.

use opdyn::dynamics::integrate;
use opdyn::verify::{
    argmax_set, assess_trajectory, default_integration, is_unanimous, pinning_preserved, predict,
    sign_pattern_preserved, VerifyOptions,
};
use opdyn::{
    fixtures, tolerances, ExpectedLimit, IntegrateOptions, Regime, StabilityCertificate,
    SystemMatrix, Termination, TheoremClause,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::{to_json, write, write_panel};
use crate::config::{
    auto_stride, build_system, certificate, Fixture, GammaSpec, InputSource, Scenario, SigmaMode,
    SigmaRecord,
};
use crate::{Format, Session};

/// Initial-condition family of a panel, before sampling the free agents.
enum Family {
    Interior,
    Positive,
    Negative,
    MixedSigns,
    /// Argmax agents of v_r held at the value.
    PinJ(f64),
    /// `(agent, value)` pairs held; others interior.
    Pins(Vec<(usize, f64)>),
}

struct Panel {
    name: &'static str,
    scenario: Scenario,
    family: Family,
    description: &'static str,
}

fn panels(example: u8, n: usize) -> Vec<Panel> {
    use Family::*;
    use Scenario::*;
    let p = |name, scenario, family, description| Panel {
        name,
        scenario,
        family,
        description,
    };
    match example {
        1 => vec![
            p("4a", Positives, Interior, "all |x_i(0)| < 1"),
            p(
                "4b",
                Positives,
                PinJ(1.0),
                "argmax agents of v_r at +1, others interior",
            ),
            p(
                "4b-x33",
                Positives,
                Pins(vec![(32, 1.0)]),
                "x_33(0) = 1, others interior",
            ),
            p("5a", Neutrals, Positive, "all x_i(0) > 0"),
            p(
                "5b",
                Neutrals,
                MixedSigns,
                "some x_i(0) > 0, some x_j(0) < 0",
            ),
            p("6a", Extremists, Interior, "all |x_i(0)| < 1"),
            p(
                "6b",
                Extremists,
                PinJ(1.0),
                "argmax agents of v_r at +1, others interior",
            ),
            p(
                "6b-x33",
                Extremists,
                Pins(vec![(32, 1.0)]),
                "x_33(0) = 1, others interior",
            ),
            p(
                "6c",
                Extremists,
                PinJ(-1.0),
                "argmax agents of v_r at -1, others interior",
            ),
            p(
                "6c-x33",
                Extremists,
                Pins(vec![(32, -1.0)]),
                "x_33(0) = -1, others interior",
            ),
            p(
                "6d",
                Extremists,
                Pins(vec![(n - 1, 1.0), (0, -1.0)]),
                "John A. (member 34) at +1, Mr. Hi (member 1) at -1",
            ),
        ],
        _ => vec![
            p("7a", Positives, Interior, "all |x_i(0)| < 1"),
            p("7b", Positives, PinJ(1.0), "x_3(0) = 1, others interior"),
            p("8a", Neutrals, Positive, "all x_i(0) > 0"),
            p(
                "8b",
                Neutrals,
                MixedSigns,
                "some x_i(0) > 0, some x_j(0) < 0",
            ),
            p("8c", Neutrals, Negative, "all x_i(0) < 0"),
            p("9a", Extremists, Interior, "all |x_i(0)| < 1"),
            p("9b", Extremists, PinJ(1.0), "x_3(0) = 1, others interior"),
            p("9c", Extremists, PinJ(-1.0), "x_3(0) = -1, others interior"),
            p(
                "9d",
                Extremists,
                Pins(vec![(0, 1.0), (1, -1.0)]),
                "x_1(0) = 1, x_2(0) = -1",
            ),
        ],
    }
}

/// Representative state of a family; `predict` turns it into a region.
fn nominal(family: &Family, n: usize, j: &[usize]) -> Vec<f64> {
    match family {
        Family::Interior => vec![0.0; n],
        Family::Positive => vec![0.5; n],
        Family::Negative => vec![-0.5; n],
        Family::MixedSigns => (0..n)
            .map(|i| if i % 2 == 0 { 0.5 } else { -0.5 })
            .collect(),
        Family::PinJ(v) => {
            let mut x = vec![0.0; n];
            for &i in j {
                x[i] = *v;
            }
            x
        }
        Family::Pins(p) => {
            let mut x = vec![0.0; n];
            for &(i, v) in p {
                x[i] = v;
            }
            x
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PanelRecord {
    pub panel: &'static str,
    pub description: &'static str,
    pub scenario: Scenario,
    pub theorem_id: Option<TheoremClause>,
    pub corollary: bool,
    pub expected_limit: ExpectedLimit,
    /// `span_of_v_r`, `beta_v_r`, `point`, `zero` or `unsupported`.
    pub classification: &'static str,
    pub x0: Vec<f64>,
    pub terminated_by: Termination,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub max_excursion: f64,
    pub distance: Option<f64>,
    pub alpha: Option<f64>,
    pub pass: Option<bool>,
    pub pinned_constant: bool,
    pub sign_pattern_constant: bool,
    pub unanimous: bool,
    pub csv: String,
    pub plot: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemRecord {
    pub input: String,
    pub n: usize,
    pub regime: Regime,
    pub sigma: SigmaRecord,
    pub v_r: Vec<f64>,
    pub j_set: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproduceSummary {
    pub command: &'static str,
    pub example: u8,
    pub seed: u64,
    pub system: SystemRecord,
    pub certificate: Option<StabilityCertificate>,
    pub certificate_reason: Option<String>,
    pub panels: Vec<PanelRecord>,
    pub supported_panels: usize,
    pub supported_passed: usize,
}

fn classification(limit: &ExpectedLimit) -> &'static str {
    match limit {
        ExpectedLimit::SpanOfVr { .. } => "span_of_v_r",
        ExpectedLimit::BetaVr { .. } => "beta_v_r",
        ExpectedLimit::Point { .. } => "point",
        ExpectedLimit::Zero => "zero",
        ExpectedLimit::Unsupported { .. } => "unsupported",
    }
}

fn setup(example: u8) -> anyhow::Result<(InputSource, SigmaMode, GammaSpec)> {
    Ok(match example {
        1 => (
            InputSource::Fixture(Fixture::Karate),
            SigmaMode::Auto,
            GammaSpec::default(),
        ),
        2 => (
            InputSource::Fixture(Fixture::Example2),
            SigmaMode::Shift {
                d_diag: fixtures::EXAMPLE2_D.to_vec(),
                d: None,
            },
            GammaSpec::Explicit(fixtures::EXAMPLE2_GAMMA.to_vec()),
        ),
        e => anyhow::bail!("unknown example {e}"),
    })
}

fn run_panel(
    k: usize,
    panel: &Panel,
    sys: &SystemMatrix,
    cert: Option<&StabilityCertificate>,
    seed: u64,
    session: &Session,
) -> anyhow::Result<PanelRecord> {
    let n = sys.n();
    let j = argmax_set(sys.v_r(), tolerances::TIE);
    let spec = panel.scenario.spec();
    let pred = predict(sys, &spec, &nominal(&panel.family, n, &j), cert)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(k as u64));
    let x0 = pred.region.sample(n, &mut rng);
    let base = pred
        .theorem_id
        .map_or_else(IntegrateOptions::default, default_integration);
    let opts = IntegrateOptions {
        stride: auto_stride(&base),
        ..base
    };
    let traj = integrate(sys, &spec, &x0, &opts)?;
    let assessment = if pred.is_supported() {
        let v = VerifyOptions {
            seed,
            integrate: Some(opts),
            ..VerifyOptions::default()
        };
        Some(assess_trajectory(&pred, sys, &spec, &traj, &v)?)
    } else {
        None
    };
    let title = format!(
        "{} ({:?}): {}",
        panel.name, panel.scenario, panel.description
    );
    let (csv, plot) = write_panel(&session.out, panel.name, &title, &traj)?;
    Ok(PanelRecord {
        panel: panel.name,
        description: panel.description,
        scenario: panel.scenario,
        theorem_id: pred.theorem_id,
        corollary: pred.corollary,
        classification: classification(&pred.expected_limit),
        expected_limit: pred.expected_limit.clone(),
        terminated_by: traj.terminated_by,
        final_time: traj.final_time(),
        final_state: traj.final_state().to_vec(),
        max_excursion: traj.max_excursion,
        distance: assessment.as_ref().map(|a| a.distance),
        alpha: assessment.as_ref().map(|a| a.alpha),
        pass: assessment.as_ref().map(|a| a.pass),
        pinned_constant: pinning_preserved(&traj, &pred.region.pinned),
        sign_pattern_constant: sign_pattern_preserved(&traj),
        unanimous: is_unanimous(traj.final_state(), 1e-6),
        x0,
        csv,
        plot,
    })
}

fn panels_csv(s: &ReproduceSummary) -> String {
    let mut out = String::from("panel,scenario,theorem_id,classification,terminated_by,distance,alpha,pass,pinned_constant,unanimous\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for p in &s.panels {
        out.push_str(&format!(
            "{},{:?},{},{},{:?},{},{},{},{},{}\n",
            p.panel,
            p.scenario,
            p.theorem_id.map_or("", |c| c.id()),
            p.classification,
            p.terminated_by,
            opt(p.distance),
            opt(p.alpha),
            p.pass.map_or(String::new(), |b| b.to_string()),
            p.pinned_constant,
            p.unanimous
        ));
    }
    out
}

pub fn reproduce(session: &Session, example: u8) -> anyhow::Result<()> {
    let seed = session.seed.unwrap_or(0);
    let (input, mode, gamma) = setup(example)?;
    let b = input.load(std::path::Path::new(""))?;
    let built = build_system(&b, &input, &mode)?;
    let sys = built
        .system
        .map_err(|r| anyhow::anyhow!("bundled system is infeasible: {r}"))?;
    let cert = certificate(&sys, &gamma)?;
    let records = panels(example, sys.n())
        .iter()
        .enumerate()
        .map(|(k, p)| run_panel(k, p, &sys, cert.as_ref().ok(), seed, session))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let supported: Vec<_> = records.iter().filter_map(|r| r.pass).collect();
    let summary = ReproduceSummary {
        command: "reproduce",
        example,
        seed,
        system: SystemRecord {
            input: input.label(),
            n: sys.n(),
            regime: sys.regime,
            sigma: built.sigma,
            v_r: sys.v_r().to_vec(),
            j_set: argmax_set(sys.v_r(), tolerances::TIE),
        },
        certificate: cert.clone().ok(),
        certificate_reason: cert.err(),
        supported_panels: supported.len(),
        supported_passed: supported.iter().filter(|p| **p).count(),
        panels: records,
    };
    let json = to_json(&summary);
    write(&session.out.join("summary.json"), &json)?;
    session.emit(match session.format {
        Format::Json => json,
        Format::Csv => panels_csv(&summary),
    });
    Ok(())
}
