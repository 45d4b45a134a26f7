//! `heph`: command-line front end.
//!
//! Exit codes: 0 success, 1 evaluated with failures, 2 usage or input error,
//! 3 internal error. Tables go to stdout; machine documents go to files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use heph_core::artifact::MANIFEST_FILE;
use heph_core::blueprint::{check_envelopes, extract_claims, parse_blueprint_bytes};
use heph_core::brief::{parse_brief_bytes, validate_brief, Brief};
use heph_core::checker::{grade_suite, CaseVerdict};
use heph_core::controller::{
    scaling_log, state_at, AttemptRecord, CommandAgent, FeedbackMode, LoopConfig, SuiteCase, BRIEF_FILE, CASE_FILE,
    MAX_ATTEMPTS_CAP,
};
use heph_core::diag::{has_errors, Diagnostic};
use heph_core::doc;
use heph_core::fea::{parse_model, run_analysis, Request, SolverReportDoc};
use heph_core::feedback::FeedbackLevel;
use heph_core::grade::{evaluate_path, requests_for, EvalOptions, Solver};
use heph_core::mesh::load_mesh;
use heph_core::metrics::{compare_meshes, MetricConfig};
use heph_core::render::{render_bundle, RenderConfig};
use heph_core::{Error, Mesh, Model};

const SEED_ENV: &str = "HEPH_SEED";
const GROUPS_FILE: &str = "groups.v1";

#[derive(Parser, Debug)]
#[command(name = "heph", version, about = "Engineering-validation harness for CAD artifacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a brief and report schema and semantic diagnostics.
    ValidateBrief {
        brief: PathBuf,
        /// Write diagnostics as a document.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a blueprint, check envelopes and, with --brief, claim binding.
    ValidateBlueprint {
        blueprint: PathBuf,
        #[arg(long)]
        brief: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grade one case workdir: brief plus submitted artifact.
    Grade(GradeArgs),
    /// Compare a generated mesh against a reference mesh.
    Metrics(MetricsArgs),
    /// Render the 21-view inspection bundle of a mesh.
    RenderViews {
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 960)]
        width: usize,
        #[arg(long, default_value_t = 720)]
        height: usize,
    },
    /// Run the built-in truss solver on an analysis model.
    Solve {
        model: PathBuf,
        /// Apply the brief's loads and run only what its requirements need.
        #[arg(long)]
        brief: Option<PathBuf>,
        #[arg(long, default_value = "solver_report.v1")]
        out: PathBuf,
    },
    /// Run the attempt loop over a set of briefs.
    RunLoop(LoopArgs),
    /// Aggregate stored attempt records into suite tables and the scaling log.
    BenchReport {
        out_root: PathBuf,
        /// Where to write the report files; defaults to the out root.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report each case's latest attempt instead of its best.
        #[arg(long)]
        latest: bool,
    },
}

#[derive(Args, Debug)]
struct GradeArgs {
    workdir: PathBuf,
    /// Defaults to `<workdir>/brief.v1`, then `<workdir>/input/brief.v1`.
    #[arg(long)]
    brief: Option<PathBuf>,
    /// Defaults to `<workdir>/output` when it holds a manifest, else the workdir.
    #[arg(long)]
    artifact: Option<PathBuf>,
    /// Defaults to `<workdir>/eval`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "deep-feedback")]
    feedback_mode: String,
    #[arg(long, default_value_t = 1)]
    attempt: usize,
    #[arg(long, default_value_t = 900)]
    timeout_eval: u64,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    generated: PathBuf,
    reference: PathBuf,
    #[arg(long, default_value_t = 8192)]
    samples: usize,
    /// F-score threshold as a fraction of the reference bbox diagonal.
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    #[arg(long, default_value_t = 64)]
    voxel_res: usize,
    /// Sampling seed; defaults to HEPH_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long, default_value = "metrics.v1")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LoopArgs {
    /// Directory searched for `brief.v1` files. A brief at
    /// `<set>/<group>/<case>/brief.v1` belongs to `<group>`.
    #[arg(long)]
    set: PathBuf,
    /// `all`, a group name or a case id.
    #[arg(long, default_value = "all")]
    scope: String,
    /// Agent command, run with `sh -c` inside each attempt directory.
    #[arg(long)]
    agent: String,
    #[arg(long)]
    out_root: PathBuf,
    #[arg(long, default_value_t = 8)]
    jobs: usize,
    #[arg(long, default_value_t = 10)]
    max_attempts: usize,
    #[arg(long, default_value_t = 2400)]
    timeout_model: u64,
    #[arg(long, default_value_t = 900)]
    timeout_eval: u64,
    #[arg(long, default_value = "deep-feedback")]
    feedback_mode: String,
    #[arg(long)]
    no_early_stop: bool,
    #[arg(long)]
    no_rich_view: bool,
    /// Extra files copied into every attempt's input directory.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Pass this variable through to the agent; repeatable.
    #[arg(long = "allow-env")]
    allow_env: Vec<String>,
}

/// Exit code plus message for stderr.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

type Outcome = std::result::Result<u8, Failure>;

trait Ctx<T> {
    /// Errors reading user input are usage errors.
    fn input(self) -> std::result::Result<T, Failure>;
    fn internal(self) -> std::result::Result<T, Failure>;
}

impl<T> Ctx<T> for heph_core::Result<T> {
    fn input(self) -> std::result::Result<T, Failure> {
        self.map_err(|e| match e {
            Error::AgentLaunch(_) | Error::NoConvergence { .. } => Failure::internal(e.to_string()),
            _ => Failure::usage(e.to_string()),
        })
    }

    fn internal(self) -> std::result::Result<T, Failure> {
        self.map_err(|e| Failure::internal(e.to_string()))
    }
}

fn read(path: &Path) -> std::result::Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn load_brief(path: &Path) -> std::result::Result<Brief, Failure> {
    let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("brief");
    parse_brief_bytes(&read(path)?, fallback).input()
}

fn print_diagnostics(diags: &[Diagnostic]) {
    for d in diags {
        println!("{d}");
    }
    let errors = diags.iter().filter(|d| d.severity == heph_core::diag::Severity::Error).count();
    println!("{} diagnostics, {errors} errors", diags.len());
}

fn write_doc<T: serde::Serialize>(path: &Path, value: &T) -> std::result::Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::internal(format!("{}: {e}", parent.display())))?;
    }
    doc::write_file(path, value).internal()
}

#[derive(serde::Serialize)]
struct DiagnosticsDoc<'a> {
    schema: &'static str,
    source: String,
    diagnostics: &'a [Diagnostic],
}

fn diagnostics_exit(source: &Path, diags: &[Diagnostic], out: Option<&Path>) -> Outcome {
    print_diagnostics(diags);
    if let Some(out) = out {
        let d = DiagnosticsDoc {
            schema: "diagnostics/1",
            source: source.display().to_string(),
            diagnostics: diags,
        };
        write_doc(out, &d)?;
    }
    Ok(u8::from(has_errors(diags)))
}

fn validate_brief_cmd(path: &Path, out: Option<&Path>) -> Outcome {
    let brief = load_brief(path)?;
    diagnostics_exit(path, &validate_brief(&brief), out)
}

fn validate_blueprint_cmd(path: &Path, brief: Option<&Path>, out: Option<&Path>) -> Outcome {
    let bp = parse_blueprint_bytes(&read(path)?).input()?;
    let mut diags = check_envelopes(&bp);
    if let Some(b) = brief {
        let brief = load_brief(b)?;
        diags.extend(extract_claims(&bp, &brief).diagnostics);
    }
    diagnostics_exit(path, &diags, out)
}

fn verdict_table(v: &CaseVerdict) -> String {
    let mut s = format!("case {}\n", v.case_id);
    let _ = writeln!(s, "{:<8} {:<14} {:>14} {:>10} {:<12} metric", "id", "status", "measured", "margin", "worst");
    for r in &v.verdicts {
        let num = |x: Option<f64>| x.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<8} {:<14} {:>14} {:>10} {:<12} {}",
            r.id,
            r.status.to_string(),
            num(r.measured),
            num(r.margin),
            r.worst_scope.as_deref().unwrap_or("-"),
            r.metric
        );
    }
    let _ = writeln!(
        s,
        "{}/{} evaluable pass, strict pass: {}",
        v.pass_count,
        v.evaluable_count,
        if v.strict_pass { "yes" } else { "no" }
    );
    s
}

fn grade_cmd(a: &GradeArgs) -> Outcome {
    let level: FeedbackLevel = a.feedback_mode.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    let brief_path = match &a.brief {
        Some(p) => p.clone(),
        None => [a.workdir.join(BRIEF_FILE), a.workdir.join("input").join(BRIEF_FILE)]
            .into_iter()
            .find(|p| p.is_file())
            .ok_or_else(|| Failure::usage(format!("no {BRIEF_FILE} in {}", a.workdir.display())))?,
    };
    let brief = load_brief(&brief_path)?;
    let artifact = a.artifact.clone().unwrap_or_else(|| {
        let out = a.workdir.join("output");
        if out.join(MANIFEST_FILE).is_file() {
            out
        } else {
            a.workdir.clone()
        }
    });
    let opts = EvalOptions {
        solver: Solver::from_env(),
        solver_timeout: Duration::from_secs(a.timeout_eval),
    };
    let eval = evaluate_path(&brief, &artifact, &opts);
    let out = a.out.clone().unwrap_or_else(|| a.workdir.join("eval"));
    std::fs::create_dir_all(&out).map_err(|e| Failure::internal(format!("{}: {e}", out.display())))?;
    eval.write(&out, level, a.attempt).internal()?;
    print!("{}", verdict_table(&eval.verdict));
    if let Some(note) = &eval.artifact_error {
        println!("artifact: {note}");
    }
    Ok(u8::from(!eval.verdict.strict_pass))
}

fn load_any_mesh(path: &Path) -> std::result::Result<Mesh, Failure> {
    load_mesh::<f64>(path).input()
}

fn metrics_cmd(a: &MetricsArgs) -> Outcome {
    let seed = match a.seed {
        Some(s) => s,
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Failure::usage(format!("{SEED_ENV} must be an integer")))?,
            Err(_) => 0,
        },
    };
    let cfg = MetricConfig {
        sample_n: a.samples,
        tau_fraction: a.tau,
        voxel_res: a.voxel_res,
        seed,
        normalize: !a.no_normalize,
    };
    let generated = load_any_mesh(&a.generated)?;
    let reference = load_any_mesh(&a.reference)?;
    let r = compare_meshes(&generated, &reference, &cfg).input()?;
    write_doc(&a.out, &r)?;
    let cd = r.chamfer_sq_normalized.map(|c| format!("{c:.6e}")).unwrap_or_else(|| "invalid".into());
    println!("chamfer   {cd}");
    println!("f_score   {:.6} (precision {:.6}, recall {:.6}, tau {})", r.f_score, r.precision, r.recall, r.tau);
    println!("voxel_iou {:.6}", r.voxel_iou);
    println!("box_iou   {:.6}", r.box_iou);
    println!("valid     {}", r.valid_solid);
    for w in &r.warnings {
        println!("warning: {w}");
    }
    Ok(u8::from(!r.valid_solid))
}

fn render_cmd(mesh: &Path, out: &Path, width: usize, height: usize) -> Outcome {
    if width < 16 || height < 16 {
        return Err(Failure::usage("image size must be at least 16x16"));
    }
    let m = load_any_mesh(mesh)?;
    let cfg = RenderConfig {
        width,
        height,
        ..RenderConfig::default()
    };
    std::fs::create_dir_all(out).map_err(|e| Failure::internal(format!("{}: {e}", out.display())))?;
    let manifest = render_bundle(&m, out, &cfg).input()?;
    println!("{} views at {}x{} in {}", manifest.views.len(), width, height, out.display());
    Ok(0)
}

fn report_table(r: &SolverReportDoc) -> String {
    let mut s = String::new();
    for (lc, metrics) in &r.load_cases {
        for (k, v) in metrics {
            let _ = writeln!(s, "{lc:<8} {k:<40} {:>16.6} {}", v.value, v.unit);
        }
    }
    for (i, f) in r.modal.frequencies_hz.iter().enumerate() {
        let _ = writeln!(s, "modal    mode {:<35} {:>16.6} Hz", i + 1, f);
    }
    for e in &r.errors {
        let _ = writeln!(s, "error    {} {}: {}", e.analysis_class, e.load_case.as_deref().unwrap_or("-"), e.message);
    }
    s
}

fn solve_cmd(model: &Path, brief: Option<&Path>, out: &Path) -> Outcome {
    let mut m: Model = parse_model(model).input()?;
    let requests = match brief {
        Some(b) => {
            let brief = load_brief(b)?;
            m = m.with_brief_loads(&brief).input()?;
            let lcs: Vec<&str> = m.load_cases.iter().map(|l| l.id.as_str()).collect();
            requests_for(&brief, &lcs)
        }
        None => Request::all(&m),
    };
    let report = run_analysis(&m, &requests);
    write_doc(out, &report)?;
    print!("{}", report_table(&report));
    Ok(u8::from(!report.errors.is_empty()))
}

/// Briefs under `set`, with their group. Sorted by path.
fn discover_set(set: &Path) -> std::result::Result<Vec<(PathBuf, String)>, Failure> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let p = e.path();
            if p.is_dir() {
                walk(&p, out)?;
            } else if p.file_name().is_some_and(|n| n == BRIEF_FILE) {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut found = Vec::new();
    walk(set, &mut found).map_err(|e| Failure::usage(format!("cannot read set {}: {e}", set.display())))?;
    Ok(found
        .into_iter()
        .map(|p| {
            let rel: Vec<String> = p
                .strip_prefix(set)
                .unwrap_or(&p)
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect();
            let group = if rel.len() >= 3 { rel[0].clone() } else { "default".to_string() };
            (p, group)
        })
        .collect())
}

fn run_loop_cmd(a: &LoopArgs) -> Outcome {
    let feedback_mode: FeedbackMode = a.feedback_mode.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    if !(1..=MAX_ATTEMPTS_CAP).contains(&a.max_attempts) {
        return Err(Failure::usage(format!("--max-attempts must lie in 1..={MAX_ATTEMPTS_CAP}")));
    }
    let mut cfg = LoopConfig {
        max_attempts: a.max_attempts,
        jobs: a.jobs,
        timeout_model: Duration::from_secs(a.timeout_model),
        timeout_eval: Duration::from_secs(a.timeout_eval),
        feedback_mode,
        require_rich_view: !a.no_rich_view,
        early_stop: !a.no_early_stop,
        solver: Solver::from_env(),
        templates: a.templates.clone(),
        ..LoopConfig::default()
    };
    cfg.env_allowlist.extend(a.allow_env.iter().cloned());
    cfg.validate().input()?;

    let mut cases = Vec::new();
    for (path, group) in discover_set(&a.set)? {
        let brief = load_brief(&path)?;
        if a.scope == "all" || a.scope == group || a.scope == brief.id {
            cases.push(SuiteCase { brief, group });
        }
    }
    if cases.is_empty() {
        return Err(Failure::usage(format!("no briefs in {} match scope `{}`", a.set.display(), a.scope)));
    }
    let mut agent = CommandAgent::new(a.agent.clone());
    agent.env_allowlist = cfg.env_allowlist.clone();
    let outcome = heph_core::controller::run_suite(&cases, &agent, &cfg, &a.out_root).internal()?;
    let groups: BTreeMap<String, String> = cases.iter().map(|c| (c.brief.id.clone(), c.group.clone())).collect();
    write_doc(&a.out_root.join(GROUPS_FILE), &groups)?;
    print!("{}", outcome.grade.to_table());
    let all_strict = outcome.grade.overall.strict_count == outcome.grade.overall.cases;
    Ok(u8::from(!all_strict))
}

fn bench_report_cmd(root: &Path, out: Option<&Path>, latest: bool) -> Outcome {
    let mut entries: Vec<_> = std::fs::read_dir(root)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(CASE_FILE).is_file())
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Failure::usage(format!("no {CASE_FILE} records under {}", root.display())));
    }
    let mut cases: Vec<(String, Vec<AttemptRecord>)> = Vec::new();
    for dir in entries {
        let records: Vec<AttemptRecord> = doc::from_bytes(&read(&dir.join(CASE_FILE))?).input()?;
        let id = records
            .first()
            .map(|r| r.verdict.case_id.clone())
            .unwrap_or_else(|| dir.file_name().unwrap_or_default().to_string_lossy().into_owned());
        cases.push((id, records));
    }
    cases.sort_by(|a, b| a.0.cmp(&b.0));
    let groups: BTreeMap<String, String> = match std::fs::read(root.join(GROUPS_FILE)) {
        Ok(b) => doc::from_bytes(&b).input()?,
        Err(_) => cases.iter().map(|(id, _)| (id.clone(), "default".to_string())).collect(),
    };
    let keep_best = !latest;
    let reported: Vec<CaseVerdict> = cases
        .iter()
        .filter_map(|(_, r)| state_at(r, r.len(), keep_best).cloned())
        .collect();
    let grade = grade_suite(&reported, &groups).input()?;
    let scaling = scaling_log(&cases, keep_best);
    let out = out.unwrap_or(root);
    write_doc(&out.join("suite_grade.v1"), &grade)?;
    for (name, text) in [
        ("suite_grade.csv", grade.to_csv()),
        ("scaling_log.csv", scaling.to_csv()),
        ("scaling_rollup.csv", scaling.rollup_csv()),
    ] {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| Failure::internal(format!("{}: {e}", p.display())))?;
    }
    print!("{}", grade.to_table());
    println!();
    println!("{:>7} {:>6} {:>14} {:>7}", "attempt", "cases", "mean req pass", "strict");
    for r in &scaling.rollup {
        println!("{:>7} {:>6} {:>13.1}% {:>7}", r.attempt, r.cases, 100.0 * r.mean_req_pass, r.strict_count);
    }
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::ValidateBrief { brief, out } => validate_brief_cmd(brief, out.as_deref()),
        Command::ValidateBlueprint { blueprint, brief, out } => {
            validate_blueprint_cmd(blueprint, brief.as_deref(), out.as_deref())
        }
        Command::Grade(a) => grade_cmd(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::RenderViews { mesh, out, width, height } => render_cmd(mesh, out, *width, *height),
        Command::Solve { model, brief, out } => solve_cmd(model, brief.as_deref(), out),
        Command::RunLoop(a) => run_loop_cmd(a),
        Command::BenchReport { out_root, out, latest } => bench_report_cmd(out_root, out.as_deref(), *latest),
    }
}

fn main() -> ExitCode {
    // Clap exits with 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("heph: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
