//! The bounded retry loop around an external design agent.
//!
//! Workspace layout per case:
//!
//! ```text
//! <root>/<case_id>/attempt_01/
//!     input/    brief.v1, feedback.v1?, inspection.v1?, views/?, templates/?
//!     output/   written by the agent: artifact_manifest.v1 plus artifact files
//!     eval/     verdict.v1, solver_report.v1?, feedback.v1 (deep), attempt.v1
//!     agent.log
//! ```
//!
//! Files under `input/`, `output/` and `eval/` are made read-only once the
//! attempt is evaluated and their hashes are kept in the attempt record.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::{load_artifact, MANIFEST_FILE};
use crate::brief::Brief;
use crate::checker::{grade_suite, CaseVerdict, SuiteGrade};
use crate::doc;
use crate::error::{Error, Result};
use crate::feedback::{
    parse_inspection, redact_for_level, FeedbackLevel, FEEDBACK_FILE, INSPECTION_FILE,
};
use crate::grade::{evaluate_path, unusable_artifact, EvalOptions, Evaluation, Solver};
use crate::render::{render_bundle, RenderConfig};
use crate::supervise::{run_with_timeout, Outcome};

pub const BRIEF_FILE: &str = "brief.v1";
pub const ATTEMPT_FILE: &str = "attempt.v1";
pub const CASE_FILE: &str = "case.v1";
pub const VIEWS_DIR: &str = "views";
pub const TEMPLATES_DIR: &str = "templates";
pub const MAX_ATTEMPTS_CAP: usize = 15;

/// Environment passed to command agents when no allowlist is configured.
pub const DEFAULT_ENV_ALLOWLIST: [&str; 4] = ["PATH", "HOME", "LANG", "TMPDIR"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackMode {
    Basic,
    DeepFeedback,
}

impl FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(FeedbackMode::Basic),
            "deep-feedback" | "deep" => Ok(FeedbackMode::DeepFeedback),
            other => Err(Error::InvalidArgument(format!("unknown feedback mode `{other}`"))),
        }
    }
}

/// First attempt that receives each upgrade; `None` disables it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub rich_view_from: Option<usize>,
    pub deep_from: Option<usize>,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            rich_view_from: Some(2),
            deep_from: Some(7),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub max_attempts: usize,
    pub jobs: usize,
    pub timeout_model: Duration,
    pub timeout_eval: Duration,
    pub feedback_mode: FeedbackMode,
    /// When false, the schedule's rich-view upgrades are ignored.
    pub require_rich_view: bool,
    pub schedule: Schedule,
    pub early_stop: bool,
    /// Report each case's best attempt so far rather than its latest one.
    pub keep_best: bool,
    pub env_allowlist: Vec<String>,
    pub solver: Solver,
    pub render: RenderConfig,
    /// Files copied into every attempt's `input/templates/`.
    pub templates: Option<PathBuf>,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_attempts: 10,
            jobs: 8,
            timeout_model: Duration::from_secs(2400),
            timeout_eval: Duration::from_secs(900),
            feedback_mode: FeedbackMode::DeepFeedback,
            require_rich_view: true,
            schedule: Schedule::default(),
            early_stop: true,
            keep_best: true,
            env_allowlist: DEFAULT_ENV_ALLOWLIST.iter().map(|s| s.to_string()).collect(),
            solver: Solver::Builtin,
            render: RenderConfig::default(),
            templates: None,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ATTEMPTS_CAP).contains(&self.max_attempts) {
            return Err(Error::InvalidArgument(format!(
                "max_attempts must be in 1..={MAX_ATTEMPTS_CAP}, got {}",
                self.max_attempts
            )));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidArgument("jobs must be at least 1".into()));
        }
        if self.timeout_model.is_zero() || self.timeout_eval.is_zero() {
            return Err(Error::InvalidArgument("timeouts must be positive".into()));
        }
        Ok(())
    }
}

/// What attempt `k` receives besides the brief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptInputs {
    pub feedback: Option<FeedbackLevel>,
    pub rich_view: bool,
}

/// Attempt 1 gets the brief only; later attempts get feedback at the
/// scheduled level and, when scheduled, the rich-view bundle. Basic mode
/// overrides the schedule.
pub fn feedback_for_attempt(k: usize, cfg: &LoopConfig) -> AttemptInputs {
    if k <= 1 {
        return AttemptInputs {
            feedback: None,
            rich_view: false,
        };
    }
    let reached = |from: Option<usize>| from.is_some_and(|f| k >= f);
    let deep = cfg.feedback_mode == FeedbackMode::DeepFeedback && reached(cfg.schedule.deep_from);
    AttemptInputs {
        feedback: Some(if deep { FeedbackLevel::Deep } else { FeedbackLevel::Basic }),
        rich_view: cfg.require_rich_view && reached(cfg.schedule.rich_view_from),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Submitted,
    ModelTimeout,
    EvalTimeout,
    AgentError,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Submitted => "submitted",
            Termination::ModelTimeout => "model_timeout",
            Termination::EvalTimeout => "eval_timeout",
            Termination::AgentError => "agent_error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub workspace: PathBuf,
    pub agent_wall_s: f64,
    pub eval_wall_s: f64,
    pub inputs: AttemptInputs,
    pub termination: Termination,
    pub verdict: CaseVerdict,
    /// Path relative to the attempt directory → sha256 hex.
    pub artifact_hashes: BTreeMap<String, String>,
}

/// What the agent sees for one attempt.
#[derive(Debug, Clone)]
pub struct AgentContext {
    pub case_id: String,
    pub attempt: usize,
    pub workspace: PathBuf,
}

impl AgentContext {
    pub fn input(&self) -> PathBuf {
        self.workspace.join("input")
    }

    pub fn output(&self) -> PathBuf {
        self.workspace.join("output")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentOutcome {
    Finished { success: bool },
    TimedOut,
}

pub trait AgentAdapter: Sync {
    /// Produce `output/` for one attempt within `limit`.
    fn run(&self, ctx: &AgentContext, limit: Duration) -> Result<AgentOutcome>;
}

/// An external command run through `sh -c` in the attempt directory.
/// It sees only the allowlisted environment plus `HEPH_CASE_ID`,
/// `HEPH_ATTEMPT` and `HEPH_WORKSPACE`.
#[derive(Debug, Clone)]
pub struct CommandAgent {
    pub command: String,
    pub env_allowlist: Vec<String>,
}

impl CommandAgent {
    pub fn new(command: impl Into<String>) -> Self {
        CommandAgent {
            command: command.into(),
            env_allowlist: DEFAULT_ENV_ALLOWLIST.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl AgentAdapter for CommandAgent {
    fn run(&self, ctx: &AgentContext, limit: Duration) -> Result<AgentOutcome> {
        let mut cmd = Command::new("sh");
        cmd.args(["-c", &self.command]).current_dir(&ctx.workspace).env_clear();
        for k in &self.env_allowlist {
            if let Ok(v) = std::env::var(k) {
                cmd.env(k, v);
            }
        }
        cmd.env("HEPH_CASE_ID", &ctx.case_id)
            .env("HEPH_ATTEMPT", ctx.attempt.to_string())
            .env("HEPH_WORKSPACE", &ctx.workspace);
        let done = run_with_timeout(&mut cmd, limit, Some(&ctx.workspace.join("agent.log")))?;
        Ok(match done.outcome {
            Outcome::TimedOut => AgentOutcome::TimedOut,
            Outcome::Exited(s) => AgentOutcome::Finished { success: s.success() },
        })
    }
}

/// In-process agent for tests and scripted stubs.
pub struct ScriptedAgent<F> {
    pub step: F,
}

impl<F> AgentAdapter for ScriptedAgent<F>
where
    F: Fn(&AgentContext) -> Result<()> + Sync,
{
    fn run(&self, ctx: &AgentContext, _limit: Duration) -> Result<AgentOutcome> {
        Ok(AgentOutcome::Finished {
            success: (self.step)(ctx).is_ok(),
        })
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Hashes of every regular file below `base/sub`, keyed by path relative to `base`.
pub fn hash_tree(base: &Path, sub: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![base.join(sub)];
    while let Some(dir) = stack.pop() {
        if !dir.is_dir() {
            continue;
        }
        for e in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let p = e.map_err(|e| Error::io(&dir, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.is_file() {
                let rel = p.strip_prefix(base).expect("walk stays below base");
                out.insert(rel.to_string_lossy().replace('\\', "/"), sha256_file(&p)?);
            }
        }
    }
    Ok(out)
}

fn freeze(base: &Path, files: &BTreeMap<String, String>) -> Result<()> {
    use std::os::unix::fs::PermissionsExt;
    for rel in files.keys() {
        let p = base.join(rel);
        fs::set_permissions(&p, fs::Permissions::from_mode(0o444)).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Hashes that no longer match the files on disk.
pub fn verify_hashes(record: &AttemptRecord) -> Vec<String> {
    record
        .artifact_hashes
        .iter()
        .filter(|(rel, h)| sha256_file(&record.workspace.join(rel)).ok().as_ref() != Some(*h))
        .map(|(rel, _)| rel.clone())
        .collect()
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn copy_tree(from: &Path, to: &Path) -> Result<()> {
    mkdir(to)?;
    for e in fs::read_dir(from).map_err(|e| Error::io(from, e))? {
        let p = e.map_err(|e| Error::io(from, e))?.path();
        let dest = to.join(p.file_name().expect("entry has a name"));
        if p.is_dir() {
            copy_tree(&p, &dest)?;
        } else {
            fs::copy(&p, &dest).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(())
}

fn attempt_dir(case_root: &Path, k: usize) -> PathBuf {
    case_root.join(format!("attempt_{k:02}"))
}

/// Write attempt `k`'s inputs from the previous attempt's results.
fn prepare_inputs(brief: &Brief, cfg: &LoopConfig, ws: &Path, k: usize, prior: Option<&AttemptRecord>) -> Result<AttemptInputs> {
    let input = ws.join("input");
    mkdir(&input)?;
    mkdir(&ws.join("output"))?;
    mkdir(&ws.join("eval"))?;
    let brief_path = input.join(BRIEF_FILE);
    fs::write(&brief_path, brief.to_yaml()).map_err(|e| Error::io(&brief_path, e))?;
    if let Some(t) = &cfg.templates {
        copy_tree(t, &input.join(TEMPLATES_DIR))?;
    }
    let inputs = feedback_for_attempt(k, cfg);
    let Some(prior) = prior else {
        return Ok(inputs);
    };
    if let Some(level) = inputs.feedback {
        let deep = crate::feedback::parse_feedback(&prior.workspace.join("eval").join(FEEDBACK_FILE))?;
        let mut fb = redact_for_level(&deep, level);
        let inspection = prior.workspace.join("output").join(INSPECTION_FILE);
        if let Ok(rec) = parse_inspection(&inspection) {
            fb = fb.with_inspection(&rec);
            doc::write_file(&input.join(INSPECTION_FILE), &rec)?;
        }
        doc::write_file(&input.join(FEEDBACK_FILE), &fb)?;
    }
    if inputs.rich_view {
        if let Ok(a) = load_artifact(&prior.workspace.join("output")) {
            if let Some(mesh) = a.mesh.as_ref().filter(|m| !m.triangles.is_empty()) {
                render_bundle(mesh, &input.join(VIEWS_DIR), &cfg.render)?;
            }
        }
    }
    Ok(inputs)
}

fn evaluate_with_timeout(brief: &Brief, output: PathBuf, opts: EvalOptions, limit: Duration) -> Option<Evaluation> {
    let (tx, rx) = mpsc::channel();
    let brief = brief.clone();
    std::thread::spawn(move || {
        let _ = tx.send(evaluate_path(&brief, &output, &opts));
    });
    rx.recv_timeout(limit).ok()
}

fn unusable(brief: &Brief, note: &str) -> Evaluation {
    Evaluation {
        verdict: unusable_artifact(brief, note),
        report: None,
        validity: None,
        artifact_error: Some(note.to_string()),
    }
}

fn run_attempt(
    brief: &Brief,
    agent: &dyn AgentAdapter,
    cfg: &LoopConfig,
    case_root: &Path,
    k: usize,
    prior: Option<&AttemptRecord>,
) -> Result<AttemptRecord> {
    let ws = attempt_dir(case_root, k);
    if ws.exists() {
        return Err(Error::InvalidArgument(format!("{} already exists; attempts are never overwritten", ws.display())));
    }
    let inputs = prepare_inputs(brief, cfg, &ws, k, prior)?;
    let ctx = AgentContext {
        case_id: brief.id.clone(),
        attempt: k,
        workspace: ws.clone(),
    };
    let start = Instant::now();
    let outcome = agent.run(&ctx, cfg.timeout_model)?;
    let agent_wall_s = start.elapsed().as_secs_f64();

    let mut termination = match outcome {
        AgentOutcome::TimedOut => Termination::ModelTimeout,
        AgentOutcome::Finished { success: false } => Termination::AgentError,
        AgentOutcome::Finished { success: true } if !ctx.output().join(MANIFEST_FILE).is_file() => {
            Termination::AgentError
        }
        AgentOutcome::Finished { success: true } => Termination::Submitted,
    };
    // Inputs and outputs are frozen before evaluation reads them.
    let mut hashes = hash_tree(&ws, "input")?;
    hashes.extend(hash_tree(&ws, "output")?);
    freeze(&ws, &hashes)?;

    let start = Instant::now();
    let evaluation = match termination {
        Termination::Submitted => {
            let opts = EvalOptions {
                solver: cfg.solver.clone(),
                solver_timeout: cfg.timeout_eval,
            };
            evaluate_with_timeout(brief, ctx.output(), opts, cfg.timeout_eval).unwrap_or_else(|| {
                termination = Termination::EvalTimeout;
                unusable(brief, &format!("evaluation exceeded {:?}", cfg.timeout_eval))
            })
        }
        other => unusable(brief, &format!("no artifact evaluated: {other}")),
    };
    let eval_wall_s = start.elapsed().as_secs_f64();
    evaluation.write(&ws.join("eval"), FeedbackLevel::Deep, k)?;
    let eval_hashes = hash_tree(&ws, "eval")?;
    freeze(&ws, &eval_hashes)?;
    hashes.extend(eval_hashes);

    let record = AttemptRecord {
        attempt: k,
        workspace: ws.clone(),
        agent_wall_s,
        eval_wall_s,
        inputs,
        termination,
        verdict: evaluation.verdict,
        artifact_hashes: hashes,
    };
    doc::write_file(&ws.join(ATTEMPT_FILE), &record)?;
    Ok(record)
}

/// Run one case. Records stop after the first strict pass unless early stop
/// is off. Only launch and workspace I/O failures are errors.
pub fn run_case(brief: &Brief, agent: &dyn AgentAdapter, cfg: &LoopConfig, root: &Path) -> Result<Vec<AttemptRecord>> {
    cfg.validate()?;
    let case_root = root.join(&brief.id);
    mkdir(&case_root)?;
    let mut records: Vec<AttemptRecord> = Vec::new();
    for k in 1..=cfg.max_attempts {
        let rec = run_attempt(brief, agent, cfg, &case_root, k, records.last())?;
        let stop = cfg.early_stop && rec.verdict.strict_pass;
        records.push(rec);
        if stop {
            break;
        }
    }
    doc::write_file(&case_root.join(CASE_FILE), &records)?;
    Ok(records)
}

/// Highest requirement pass fraction; ties go to the earliest attempt.
pub fn best_attempt(records: &[AttemptRecord]) -> Option<&AttemptRecord> {
    records.iter().fold(None, |best: Option<&AttemptRecord>, r| match best {
        Some(b) if b.verdict.req_pass_fraction >= r.verdict.req_pass_fraction => Some(b),
        _ => Some(r),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub case_id: String,
    pub attempt: usize,
    pub cum_model_s: f64,
    pub eval_s: f64,
    pub req_pass_fraction: f64,
    pub strict: bool,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollupRow {
    pub attempt: usize,
    pub cases: usize,
    pub mean_req_pass: f64,
    pub strict_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingLog {
    pub rows: Vec<ScalingRow>,
    pub rollup: Vec<RollupRow>,
}

impl ScalingLog {
    pub const CSV_HEADER: &'static str = "case_id,attempt,cum_model_s,eval_s,req_pass_fraction,strict,termination";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.3},{:.3},{:.6},{},{}\n",
                r.case_id, r.attempt, r.cum_model_s, r.eval_s, r.req_pass_fraction, r.strict, r.termination
            ));
        }
        out
    }

    pub fn rollup_csv(&self) -> String {
        let mut out = String::from("attempt,cases,mean_req_pass,strict_count\n");
        for r in &self.rollup {
            out.push_str(&format!("{},{},{:.6},{}\n", r.attempt, r.cases, r.mean_req_pass, r.strict_count));
        }
        out
    }
}

/// Per-case rows plus, for each attempt index, the suite state reached by
/// then (best so far with `keep_best`, latest otherwise; stopped cases keep
/// their last state).
pub fn scaling_log(cases: &[(String, Vec<AttemptRecord>)], keep_best: bool) -> ScalingLog {
    let mut rows = Vec::new();
    for (id, recs) in cases {
        let mut cum = 0.0;
        for r in recs {
            cum += r.agent_wall_s;
            rows.push(ScalingRow {
                case_id: id.clone(),
                attempt: r.attempt,
                cum_model_s: cum,
                eval_s: r.eval_wall_s,
                req_pass_fraction: r.verdict.req_pass_fraction,
                strict: r.verdict.strict_pass,
                termination: r.termination,
            });
        }
    }
    let last = cases.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
    let rollup = (1..=last)
        .map(|k| {
            let states: Vec<&CaseVerdict> = cases.iter().filter_map(|(_, r)| state_at(r, k, keep_best)).collect();
            let n = states.len();
            RollupRow {
                attempt: k,
                cases: n,
                mean_req_pass: states.iter().map(|c| c.req_pass_fraction).sum::<f64>() / n.max(1) as f64,
                strict_count: states.iter().filter(|c| c.strict_pass).count(),
            }
        })
        .collect();
    ScalingLog { rows, rollup }
}

/// Verdict a case reports after `k` attempts: the best so far or the latest.
pub fn state_at(records: &[AttemptRecord], k: usize, keep_best: bool) -> Option<&CaseVerdict> {
    let upto = &records[..k.min(records.len())];
    if keep_best {
        best_attempt(upto).map(|r| &r.verdict)
    } else {
        upto.last().map(|r| &r.verdict)
    }
}

#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub brief: Brief,
    pub group: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    /// Grade from each case's reported attempt.
    pub grade: SuiteGrade,
    /// Grade of the suite state reached by each attempt index.
    pub per_attempt: BTreeMap<usize, SuiteGrade>,
    pub scaling: ScalingLog,
    /// Case id → records.
    pub records: BTreeMap<String, Vec<AttemptRecord>>,
}

fn failed_launch(brief: &Brief, case_root: &Path, e: &Error) -> AttemptRecord {
    AttemptRecord {
        attempt: 1,
        workspace: attempt_dir(case_root, 1),
        agent_wall_s: 0.0,
        eval_wall_s: 0.0,
        inputs: AttemptInputs {
            feedback: None,
            rich_view: false,
        },
        termination: Termination::AgentError,
        verdict: unusable_artifact(brief, &e.to_string()),
        artifact_hashes: BTreeMap::new(),
    }
}

/// Run every case across `jobs` workers. Aggregation is keyed by case id,
/// so results do not depend on scheduling.
pub fn run_suite(cases: &[SuiteCase], agent: &dyn AgentAdapter, cfg: &LoopConfig, root: &Path) -> Result<SuiteOutcome> {
    cfg.validate()?;
    if cases.is_empty() {
        return Err(Error::InvalidArgument("suite has no briefs".into()));
    }
    let mut groups = BTreeMap::new();
    for c in cases {
        if groups.insert(c.brief.id.clone(), c.group.clone()).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate case id `{}`", c.brief.id)));
        }
    }
    mkdir(root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let results: Vec<(String, Vec<AttemptRecord>)> = pool.install(|| {
        cases
            .par_iter()
            .map(|c| {
                let recs = match run_case(&c.brief, agent, cfg, root) {
                    Ok(r) => r,
                    Err(e @ Error::Io { .. }) => return Err(e),
                    Err(e) => vec![failed_launch(&c.brief, &root.join(&c.brief.id), &e)],
                };
                Ok((c.brief.id.clone(), recs))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let records: BTreeMap<String, Vec<AttemptRecord>> = results.into_iter().collect();
    let ordered: Vec<(String, Vec<AttemptRecord>)> = records.iter().map(|(k, v)| (k.clone(), v.clone())).collect();

    let reported: Vec<CaseVerdict> = ordered
        .iter()
        .filter_map(|(_, r)| state_at(r, r.len(), cfg.keep_best).cloned())
        .collect();
    let grade = grade_suite(&reported, &groups)?;
    let last = ordered.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
    let mut per_attempt = BTreeMap::new();
    for k in 1..=last {
        let states: Vec<CaseVerdict> = ordered.iter().filter_map(|(_, r)| state_at(r, k, cfg.keep_best).cloned()).collect();
        per_attempt.insert(k, grade_suite(&states, &groups)?);
    }
    let scaling = scaling_log(&ordered, cfg.keep_best);
    doc::write_file(&root.join("suite_grade.v1"), &grade)?;
    let csv = root.join("scaling_log.csv");
    fs::write(&csv, scaling.to_csv()).map_err(|e| Error::io(&csv, e))?;
    Ok(SuiteOutcome {
        grade,
        per_attempt,
        scaling,
        records,
    })
}
