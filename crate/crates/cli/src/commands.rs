//! `analyze`, `simulate` and `verify`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use opdyn::dynamics::integrate;
use opdyn::signed_graph::{is_irreducible, is_weight_balanced, laplacian};
use opdyn::verify::{
    assess_trajectory, default_integration, predict, verify_theorem, SampleRecord, VerifyOptions,
};
use opdyn::{
    Error, IntegrateOptions, Regime, SpectralCertificate, StabilityCertificate, SystemMatrix,
    Termination, TheoremPrediction, Trajectory, VerificationReport,
};
use serde::Serialize;

use crate::config::{build_system, certificate, ExperimentConfig, Scenario, SigmaRecord};
use crate::failure::{Failure, Kind};
use crate::{plot, Format, Session};

#[derive(Debug, Clone, Serialize)]
pub struct LaplacianStats {
    pub row_sum_min: f64,
    pub row_sum_max: f64,
    pub trace: f64,
    pub frobenius: f64,
}

fn laplacian_stats(b: &opdyn::SignedMatrix) -> LaplacianStats {
    let l = laplacian(b);
    let n = b.n();
    let rows: Vec<f64> = (0..n).map(|i| (0..n).map(|j| l[(i, j)]).sum()).collect();
    LaplacianStats {
        row_sum_min: rows.iter().copied().fold(f64::INFINITY, f64::min),
        row_sum_max: rows.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        trace: (0..n).map(|i| l[(i, i)]).sum(),
        frobenius: l.entries().norm(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeSummary {
    pub command: &'static str,
    pub input: String,
    pub n: usize,
    pub sigma: SigmaRecord,
    pub regime: Option<Regime>,
    #[serde(rename = "rho_C", skip_serializing_if = "Option::is_none")]
    pub rho_c: Option<f64>,
    /// Perron data of `B`.
    pub spectral_b: SpectralCertificate,
    /// Perron data of the matrix whose eigenvector is v_r (`B` or `C`).
    pub spectral: Option<SpectralCertificate>,
    pub stability: Option<StabilityCertificate>,
    pub reason: Option<String>,
    pub laplacian: LaplacianStats,
    pub weight_balanced: bool,
    pub irreducible: bool,
    pub symmetric: bool,
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

impl AnalyzeSummary {
    fn to_csv(&self) -> String {
        let mut rows: Vec<(&str, String)> = vec![
            ("input", self.input.clone()),
            ("n", self.n.to_string()),
            ("sigma_path", self.sigma.path.clone()),
            (
                "regime",
                self.regime.map_or(String::new(), |r| format!("{r:?}")),
            ),
            ("rho_B", self.spectral_b.rho.to_string()),
            ("rho_C", self.rho_c.map_or(String::new(), |r| r.to_string())),
            (
                "v_r",
                self.spectral
                    .as_ref()
                    .map_or(String::new(), |s| join(&s.v_right)),
            ),
        ];
        if let Some(c) = &self.stability {
            rows.extend([
                ("certificate_valid", c.valid.to_string()),
                ("gamma", join(&c.gamma)),
                ("lambda_max_H", c.lambda_max_h.to_string()),
                ("rank_H", c.rank_h.to_string()),
                ("rank_E", c.rank_e.to_string()),
            ]);
        } else {
            rows.push(("certificate_valid", "false".into()));
        }
        rows.extend([
            ("reason", self.reason.clone().unwrap_or_default()),
            ("weight_balanced", self.weight_balanced.to_string()),
            ("irreducible", self.irreducible.to_string()),
            ("symmetric", self.symmetric.to_string()),
        ]);
        let mut s = String::from("key,value\n");
        for (k, v) in rows {
            s.push_str(&format!("{k},{}\n", csv_field(&v)));
        }
        s
    }
}

fn csv_field(v: &str) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

pub fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summaries serialise");
    s.push('\n');
    s
}

fn output_path(
    session: &Session,
    configured: &Option<PathBuf>,
    default: &str,
) -> (PathBuf, String) {
    let rel = configured.clone().unwrap_or_else(|| PathBuf::from(default));
    (session.out.join(&rel), rel.display().to_string())
}

struct Prepared {
    cfg: ExperimentConfig,
    label: String,
    system: SystemMatrix,
    certificate: Result<StabilityCertificate, String>,
}

fn prepare(session: &Session, config: &Path) -> anyhow::Result<Prepared> {
    let (mut cfg, base) = ExperimentConfig::load(config)?;
    if let Some(seed) = session.seed {
        cfg.run.seed = seed;
    }
    let b = cfg.input.load(&base)?;
    let built = build_system(&b, &cfg.input, &cfg.sigma_mode)?;
    let system = built
        .system
        .map_err(|r| Failure::wrap(Kind::Certificate, "system_infeasible", anyhow::anyhow!(r)))?;
    let certificate = certificate(&system, &cfg.gamma)?;
    Ok(Prepared {
        label: cfg.input.label(),
        cfg,
        system,
        certificate,
    })
}

pub fn analyze(session: &Session, config: &Path) -> anyhow::Result<()> {
    let (mut cfg, base) = ExperimentConfig::load(config)?;
    if let Some(seed) = session.seed {
        cfg.run.seed = seed;
    }
    let b = cfg.input.load(&base)?;
    let built = build_system(&b, &cfg.input, &cfg.sigma_mode)?;
    let (regime, rho_c, spectral, stability, reason) = match &built.system {
        Ok(sys) => {
            let cert = certificate(sys, &cfg.gamma)?;
            let rho_c = sys.shift.as_ref().map(|_| sys.perron.rho);
            let (stab, reason) = match cert {
                Ok(c) => (Some(c), None),
                Err(r) => (None, Some(r)),
            };
            (
                Some(sys.regime),
                rho_c,
                Some(sys.perron.clone()),
                stab,
                reason,
            )
        }
        Err(r) => (None, None, None, None, Some(r.clone())),
    };
    let summary = AnalyzeSummary {
        command: "analyze",
        input: cfg.input.label(),
        n: b.n(),
        sigma: built.sigma,
        regime,
        rho_c,
        spectral_b: built.b_spectral,
        spectral,
        stability,
        reason: reason.clone(),
        laplacian: laplacian_stats(&b),
        weight_balanced: is_weight_balanced(&b, 1e-12),
        irreducible: is_irreducible(&b),
        symmetric: b.is_symmetric(0.0),
    };
    let (path, _) = output_path(session, &cfg.outputs.summary, "analysis.json");
    let json = to_json(&summary);
    write(&path, &json)?;
    session.emit(match session.format {
        Format::Json => json,
        Format::Csv => summary.to_csv(),
    });
    match reason {
        Some(r) => Err(Failure::wrap(
            Kind::Certificate,
            "certificate_infeasible",
            anyhow::anyhow!(r),
        )),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Files {
    pub trajectory: Option<String>,
    pub plot: Option<String>,
    pub summary: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub command: &'static str,
    pub input: String,
    pub n: usize,
    pub regime: Regime,
    pub v_r: Vec<f64>,
    pub scenario: Scenario,
    pub x0: Vec<f64>,
    pub integration: IntegrateOptions,
    pub terminated_by: Termination,
    pub steps: usize,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub max_excursion: f64,
    pub diagnostic: Option<String>,
    pub convergence: Option<opdyn::ConvergenceReport>,
    pub certificate: Option<StabilityCertificate>,
    pub certificate_reason: Option<String>,
    pub prediction: Option<TheoremPrediction>,
    pub prediction_reason: Option<String>,
    pub assessment: Option<SampleRecord>,
    pub files: Files,
}

fn box_error(e: Error) -> anyhow::Error {
    match e {
        Error::StateOutOfBox { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidOptions(_) => Failure::wrap(Kind::Config, "invalid_run", e.into()),
        e => e.into(),
    }
}

fn verify_options(cfg: &ExperimentConfig, integrate: IntegrateOptions) -> VerifyOptions {
    VerifyOptions {
        seed: cfg.run.seed,
        span_tol: cfg.run.span_tol,
        point_tol: cfg.run.point_tol,
        alpha_slack: cfg.run.alpha_slack,
        integrate: Some(integrate),
    }
}

pub fn simulate(session: &Session, config: &Path) -> anyhow::Result<()> {
    let p = prepare(session, config)?;
    let cfg = &p.cfg;
    let scenario = cfg.scenario()?;
    let spec = scenario.spec();
    let sys = &p.system;
    let x0 = match cfg.initial_state(sys.n())? {
        Some(x) => x,
        None => {
            let mut c = cfg.clone();
            c.run.x0 = Some(crate::config::X0Spec::Uniform {
                uniform: [-1.0, 1.0],
            });
            c.initial_state(sys.n())?.expect("sampler yields a state")
        }
    };
    let (prediction, prediction_reason) =
        match predict(sys, &spec, &x0, p.certificate.as_ref().ok()) {
            Ok(pred) => (Some(pred), None),
            Err(Error::MissingCertificate) => (None, Some(Error::MissingCertificate.to_string())),
            Err(e) => return Err(box_error(e)),
        };
    let clause = prediction.as_ref().and_then(|p| p.theorem_id);
    let base = clause.map_or_else(IntegrateOptions::default, default_integration);
    let opts = cfg.integration(base, true);
    let traj = integrate(sys, &spec, &x0, &opts).map_err(box_error)?;
    let assessment = match &prediction {
        Some(pred) if pred.is_supported() => Some(assess_trajectory(
            pred,
            sys,
            &spec,
            &traj,
            &verify_options(cfg, opts.clone()),
        )?),
        _ => None,
    };

    let (csv_path, csv_rel) = output_path(session, &cfg.outputs.trajectory, "trajectory.csv");
    let (svg_path, svg_rel) = output_path(session, &cfg.outputs.plot, "trajectory.svg");
    let (sum_path, sum_rel) = output_path(session, &cfg.outputs.summary, "summary.json");
    let csv = traj.to_csv();
    write(&csv_path, &csv)?;
    write(
        &svg_path,
        &plot::svg(&traj, &format!("{} / {:?}", p.label, scenario)),
    )?;

    let summary = SimulateSummary {
        command: "simulate",
        input: p.label.clone(),
        n: sys.n(),
        regime: sys.regime,
        v_r: sys.v_r().to_vec(),
        scenario,
        x0,
        integration: opts,
        terminated_by: traj.terminated_by,
        steps: traj.steps,
        final_time: traj.final_time(),
        final_state: traj.final_state().to_vec(),
        max_excursion: traj.max_excursion,
        diagnostic: traj.diagnostic.clone(),
        convergence: traj.convergence.clone(),
        certificate: p.certificate.clone().ok(),
        certificate_reason: p.certificate.clone().err(),
        prediction,
        prediction_reason,
        assessment,
        files: Files {
            trajectory: Some(csv_rel),
            plot: Some(svg_rel),
            summary: sum_rel,
        },
    };
    let json = to_json(&summary);
    write(&sum_path, &json)?;
    session.emit(match session.format {
        Format::Json => json,
        Format::Csv => csv,
    });
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub command: &'static str,
    pub input: String,
    pub n: usize,
    pub regime: Regime,
    pub scenario: Scenario,
    pub certificate: Option<StabilityCertificate>,
    pub certificate_reason: Option<String>,
    pub prediction: Option<TheoremPrediction>,
    pub reason: Option<String>,
    pub options: Option<VerifyOptions>,
    pub samples: usize,
    pub report: Option<VerificationReport>,
}

fn report_csv(r: &VerificationReport) -> String {
    let n = r.samples.first().map_or(0, |s| s.x0.len());
    let mut s = String::from(
        "sample,pass,terminated_by,distance,alpha,alpha_ok,pinning_ok,sign_ok,unanimous,final_time",
    );
    for i in 1..=n {
        s.push_str(&format!(",x0_{i}"));
    }
    for i in 1..=n {
        s.push_str(&format!(",xf_{i}"));
    }
    s.push('\n');
    for (k, r) in r.samples.iter().enumerate() {
        s.push_str(&format!(
            "{k},{},{:?},{},{},{},{},{},{},{}",
            r.pass,
            r.terminated_by,
            r.distance,
            r.alpha,
            r.alpha_ok,
            r.pinning_ok,
            r.sign_ok,
            r.unanimous,
            r.final_time
        ));
        for v in r.x0.iter().chain(&r.final_state) {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

pub fn verify(session: &Session, config: &Path) -> anyhow::Result<()> {
    let p = prepare(session, config)?;
    let cfg = &p.cfg;
    let scenario = cfg.scenario()?;
    let spec = scenario.spec();
    let sys = &p.system;
    let x0 = cfg
        .initial_state(sys.n())?
        .unwrap_or_else(|| vec![0.0; sys.n()]);
    let mut summary = VerifySummary {
        command: "verify",
        input: p.label.clone(),
        n: sys.n(),
        regime: sys.regime,
        scenario,
        certificate: p.certificate.clone().ok(),
        certificate_reason: p.certificate.clone().err(),
        prediction: None,
        reason: None,
        options: None,
        samples: cfg.run.samples,
        report: None,
    };
    let (sum_path, _) = output_path(session, &cfg.outputs.summary, "report.json");
    let finish = |summary: &VerifySummary, err: Option<anyhow::Error>| -> anyhow::Result<()> {
        let json = to_json(summary);
        write(&sum_path, &json)?;
        session.emit(match (session.format, &summary.report) {
            (Format::Csv, Some(r)) => report_csv(r),
            _ => json,
        });
        err.map_or(Ok(()), Err)
    };

    let pred = match predict(sys, &spec, &x0, p.certificate.as_ref().ok()) {
        Ok(pred) => pred,
        Err(Error::MissingCertificate) => {
            summary.reason = Some(Error::MissingCertificate.to_string());
            let err = Failure::wrap(
                Kind::Certificate,
                "certificate_infeasible",
                Error::MissingCertificate.into(),
            );
            return finish(&summary, Some(err));
        }
        Err(e) => return Err(box_error(e)),
    };
    summary.prediction = Some(pred.clone());
    let Some(clause) = pred.theorem_id else {
        summary.reason = Some("no theorem clause applies to the initial region".into());
        let err = Failure::wrap(
            Kind::Config,
            "unsupported_region",
            Error::Unsupported.into(),
        );
        return finish(&summary, Some(err));
    };
    if let Some(want) = cfg.run.clause {
        if want != clause {
            let msg = format!(
                "run.clause is {} but the initial region selects {}",
                want.id(),
                clause.id()
            );
            summary.reason = Some(msg.clone());
            return finish(
                &summary,
                Some(Failure::wrap(
                    Kind::Config,
                    "clause_mismatch",
                    anyhow::anyhow!(msg),
                )),
            );
        }
    }
    let opts = verify_options(cfg, cfg.integration(default_integration(clause), false));
    let report = verify_theorem(&pred, sys, &spec, cfg.run.samples, &opts)?;
    let failures = report.failures();
    summary.options = Some(opts);
    summary.report = Some(report);
    let err = (failures > 0).then(|| {
        Failure::wrap(
            Kind::Verification,
            "verification_failures",
            anyhow::anyhow!("{failures} of {} samples failed", cfg.run.samples),
        )
    });
    finish(&summary, err)
}

/// Stored-trajectory CSV and SVG for a panel.
pub fn write_panel(
    dir: &Path,
    name: &str,
    title: &str,
    traj: &Trajectory,
) -> anyhow::Result<(String, String)> {
    let csv = format!("{name}.csv");
    let svg = format!("{name}.svg");
    write(&dir.join(&csv), &traj.to_csv())?;
    write(&dir.join(&svg), &plot::svg(traj, title))?;
    Ok((csv, svg))
}
