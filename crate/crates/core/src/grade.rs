//! One evaluation of one artifact against one brief: mesh checks, solver,
//! namespace, verdicts.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::Duration;

use serde::Serialize;

use crate::artifact::{load_artifact, Artifact};
use crate::blueprint::extract_claims;
use crate::brief::Brief;
use crate::checker::{build_namespace, evaluate, CaseVerdict, Status, Verdict};
use crate::doc;
use crate::error::{Error, Result};
use crate::fea::{parse_solver_report, run_analysis, Request, SolverReportDoc};
use crate::feedback::{render_feedback, FeedbackLevel, FeedbackReport, FEEDBACK_FILE, SOLVER_REPORT_FILE};
use crate::mesh::{validity, ValidityReport};
use crate::supervise::{run_with_timeout, Outcome};

pub const VERDICT_FILE: &str = "verdict.v1";
pub const SOLVER_ENV: &str = "HEPH_SOLVER";

/// Which solver fills the report when the artifact does not ship one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solver {
    Builtin,
    /// Shell command. It runs in the artifact directory with `HEPH_MODEL`
    /// (model path), `HEPH_REQUESTS` (comma-separated, e.g. `static:LC1,modal`)
    /// and `HEPH_REPORT` (where to write a `solver_report/1` document).
    External(String),
}

impl Solver {
    /// `HEPH_SOLVER` when set and nonempty, the built-in solver otherwise.
    pub fn from_env() -> Self {
        match std::env::var(SOLVER_ENV) {
            Ok(cmd) if !cmd.trim().is_empty() => Solver::External(cmd),
            _ => Solver::Builtin,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub solver: Solver,
    pub solver_timeout: Duration,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            solver: Solver::Builtin,
            solver_timeout: Duration::from_secs(900),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub verdict: CaseVerdict,
    pub report: Option<SolverReportDoc>,
    pub validity: Option<ValidityReport>,
    /// Why the artifact or its namespace could not be used, if it could not.
    pub artifact_error: Option<String>,
}

impl Evaluation {
    pub fn feedback(&self, level: FeedbackLevel, attempt: usize) -> FeedbackReport {
        let failures = self.report.as_ref().map(|r| r.errors.as_slice()).unwrap_or_default();
        render_feedback(&self.verdict, level, attempt).with_analysis_failures(failures)
    }

    /// Write `verdict.v1`, `solver_report.v1` (when a report exists) and
    /// `feedback.v1` into `dir`.
    pub fn write(&self, dir: &Path, level: FeedbackLevel, attempt: usize) -> Result<()> {
        doc::write_file(&dir.join(VERDICT_FILE), &self.verdict)?;
        if let Some(r) = &self.report {
            doc::write_file(&dir.join(SOLVER_REPORT_FILE), r)?;
        }
        doc::write_file(&dir.join(FEEDBACK_FILE), &self.feedback(level, attempt))
    }
}

/// Analyses the brief's evaluable requirements need from `model_lcs`.
pub fn requests_for(brief: &Brief, model_lcs: &[&str]) -> Vec<Request> {
    let mut out = BTreeSet::new();
    for req in brief.requirements.iter().filter(|r| brief.is_evaluable(r)) {
        let lcs = req.applies_to.iter().filter(|s| model_lcs.contains(&s.as_str()));
        match req.rtype.analysis_card() {
            Some("*STATIC") => out.extend(lcs.map(|lc| Request::Static(lc.clone()))),
            Some("*BUCKLE") => out.extend(lcs.map(|lc| Request::Buckle(lc.clone()))),
            Some("*FREQUENCY") => {
                out.insert(Request::Modal);
            }
            _ => {}
        }
    }
    out.into_iter().collect()
}

fn failed_report(requests: &[Request], message: &str) -> SolverReportDoc {
    let mut r = SolverReportDoc::new("none", "no analysis ran");
    for q in requests {
        r.fail(q.card(), q.load_case(), message.to_string());
    }
    r
}

fn run_external(cmd: &str, artifact: &Artifact, model_yaml: &str, requests: &[Request], limit: Duration) -> SolverReportDoc {
    let attempt = || -> Result<SolverReportDoc> {
        let tmp = std::env::temp_dir().join(format!("heph-solve-{}-{}", std::process::id(), unique()));
        std::fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let model = tmp.join("model.yaml");
        let out = tmp.join(SOLVER_REPORT_FILE);
        std::fs::write(&model, model_yaml).map_err(|e| Error::io(&model, e))?;
        let list: Vec<String> = requests.iter().map(|r| r.to_string()).collect();
        let done = run_with_timeout(
            Command::new("sh")
                .args(["-c", cmd])
                .current_dir(&artifact.dir)
                .env("HEPH_MODEL", &model)
                .env("HEPH_REQUESTS", list.join(","))
                .env("HEPH_REPORT", &out),
            limit,
            Some(&tmp.join("solver.log")),
        )?;
        let result = match done.outcome {
            Outcome::TimedOut => Err(Error::InvalidArgument(format!("external solver exceeded {limit:?}"))),
            Outcome::Exited(s) if !s.success() => {
                Err(Error::InvalidArgument(format!("external solver exited with {s}")))
            }
            Outcome::Exited(_) => parse_solver_report(&out),
        };
        let _ = std::fs::remove_dir_all(&tmp);
        result
    };
    attempt().unwrap_or_else(|e| failed_report(requests, &e.to_string()))
}

fn unique() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static N: AtomicU64 = AtomicU64::new(0);
    N.fetch_add(1, Ordering::Relaxed)
}

/// Produce the solver report for an artifact. A shipped report wins over
/// running a solver; an invalid mesh turns every requested analysis into a
/// solver error.
fn solver_report(brief: &Brief, artifact: &Artifact, opts: &EvalOptions, mesh_problem: Option<&str>) -> Option<SolverReportDoc> {
    let model = artifact.model.as_ref();
    let lcs: Vec<&str> = match model {
        Some(m) => {
            let mut v: Vec<&str> = m.load_cases.iter().map(|l| l.id.as_str()).collect();
            v.extend(brief.declared_load_cases());
            v
        }
        None => brief.declared_load_cases(),
    };
    let requests = requests_for(brief, &lcs);
    if let Some(problem) = mesh_problem {
        if model.is_some() || artifact.solver_report.is_some() {
            return Some(failed_report(&requests, &format!("analysis skipped: {problem}")));
        }
    }
    if let Some(r) = &artifact.solver_report {
        return Some(r.clone());
    }
    let model = match model?.with_brief_loads(brief) {
        Ok(m) => m,
        Err(e) => return Some(failed_report(&requests, &e.to_string())),
    };
    Some(match &opts.solver {
        Solver::Builtin => run_analysis(&model, &requests),
        Solver::External(cmd) => run_external(cmd, artifact, &model.to_yaml(), &requests, opts.solver_timeout),
    })
}

/// A verdict in which every evaluable requirement is unbound for `note`.
pub fn unusable_artifact(brief: &Brief, note: &str) -> CaseVerdict {
    let verdicts: Vec<Verdict> = brief
        .requirements
        .iter()
        .map(|req| {
            let mut v = crate::checker::evaluate_requirement(brief, req, &Default::default());
            if v.status != Status::NotEvaluable {
                v.status = Status::Unbound;
                v.binding_note = Some(note.to_string());
            }
            v
        })
        .collect();
    CaseVerdict::from_verdicts(&brief.id, verdicts)
}

/// Evaluate a loaded artifact.
pub fn evaluate_artifact(brief: &Brief, artifact: &Artifact, opts: &EvalOptions) -> Evaluation {
    let validity = artifact.mesh.as_ref().map(validity);
    let mesh_problem = match (&artifact.mesh_error, validity) {
        (Some(e), _) => Some(format!("mesh could not be loaded ({e})")),
        (None, Some(v)) if !v.valid_solid => Some("submitted mesh is not a valid solid".to_string()),
        _ => None,
    };
    let report = solver_report(brief, artifact, opts, mesh_problem.as_deref());
    let claims = artifact.blueprint.as_ref().map(|bp| extract_claims(bp, brief));
    match build_namespace(brief, artifact, report.as_ref(), claims.as_ref()) {
        Ok(ns) => Evaluation {
            verdict: evaluate(brief, &ns),
            report,
            validity,
            artifact_error: mesh_problem,
        },
        Err(e) => {
            let note = format!("metric namespace rejected: {e}");
            Evaluation {
                verdict: unusable_artifact(brief, &note),
                report,
                validity,
                artifact_error: Some(note),
            }
        }
    }
}

/// Load and evaluate; an artifact that cannot be loaded grades as unbound.
pub fn evaluate_path(brief: &Brief, path: &Path, opts: &EvalOptions) -> Evaluation {
    match load_artifact(path) {
        Ok(a) => evaluate_artifact(brief, &a, opts),
        Err(e) => {
            let note = format!("artifact could not be loaded: {e}");
            Evaluation {
                verdict: unusable_artifact(brief, &note),
                report: None,
                validity: None,
                artifact_error: Some(note),
            }
        }
    }
}
