use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use heph_core::brief::{parse_brief_str, Brief};
use heph_core::checker::Status;
use heph_core::controller::{
    run_case, run_suite, verify_hashes, AttemptRecord, CommandAgent, LoopConfig, Schedule, SuiteCase, Termination,
    ATTEMPT_FILE, BRIEF_FILE, VIEWS_DIR,
};
use heph_core::feedback::{parse_feedback, FeedbackLevel, FEEDBACK_FILE};
use heph_core::render::{RenderConfig, VIEWS_MANIFEST_FILE, VIEW_NAMES};
use heph_core::sample_pack::{brief_text, CASES};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn brief(case: &str) -> Brief {
    parse_brief_str(brief_text(case).unwrap()).unwrap()
}

/// Stub agent replaying fixture variants, one step per attempt.
fn stub(case: &str, steps: &str) -> CommandAgent {
    let fx = fixtures();
    CommandAgent::new(format!("sh {}/stub_agent.sh {}/{case} {steps}", fx.display(), fx.display()))
}

/// Small renders keep the loop tests fast; the full-size contract is
/// covered by the acceptance suite.
fn quick() -> LoopConfig {
    LoopConfig {
        max_attempts: 4,
        jobs: 2,
        render: RenderConfig {
            width: 96,
            height: 72,
            ..RenderConfig::default()
        },
        ..LoopConfig::default()
    }
}

#[test]
fn early_stop_ends_on_first_strict_pass() {
    let dir = tempfile::tempdir().unwrap();
    let recs = run_case(&brief("baja"), &stub("baja", "failing_stress passing"), &quick(), dir.path()).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(!recs[0].verdict.strict_pass);
    assert!(recs[1].verdict.strict_pass);
    assert!(dir.path().join("baja/case.v1").is_file());
}

#[test]
fn without_early_stop_every_attempt_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LoopConfig {
        max_attempts: 3,
        early_stop: false,
        ..quick()
    };
    let recs = run_case(&brief("baseplate"), &stub("baseplate", "passing"), &cfg, dir.path()).unwrap();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| r.verdict.strict_pass));
}

#[test]
fn stalled_agent_is_killed_and_graded_unbound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LoopConfig {
        max_attempts: 1,
        timeout_model: Duration::from_millis(300),
        ..quick()
    };
    let start = Instant::now();
    let recs = run_case(&brief("bracket"), &stub("bracket", "sleep:30"), &cfg, dir.path()).unwrap();
    assert!(start.elapsed() < Duration::from_secs(10));
    assert_eq!(recs[0].termination, Termination::ModelTimeout);
    assert!(recs[0].verdict.verdicts.iter().all(|v| v.status == Status::Unbound));
}

#[test]
fn failing_agent_is_an_agent_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LoopConfig { max_attempts: 2, ..quick() };
    let recs = run_case(&brief("baja"), &stub("baja", "fail passing"), &cfg, dir.path()).unwrap();
    assert_eq!(recs[0].termination, Termination::AgentError);
    assert_eq!(recs[1].termination, Termination::Submitted);
    assert!(recs[1].verdict.strict_pass);
}

#[test]
fn mass_alias_flips_unbound_to_pass_without_geometry_change() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LoopConfig {
        schedule: Schedule {
            rich_view_from: Some(2),
            deep_from: Some(2),
        },
        ..quick()
    };
    let recs = run_case(&brief("bracket"), &stub("bracket", "failing_unbound passing"), &cfg, dir.path()).unwrap();
    assert_eq!(recs.len(), 2);
    let r4 = |r: &AttemptRecord| r.verdict.verdict("R4").unwrap().status;
    assert_eq!(r4(&recs[0]), Status::Unbound);
    assert_eq!(r4(&recs[1]), Status::Pass);
    for f in ["output/part.obj", "output/model.yaml"] {
        assert_eq!(recs[0].artifact_hashes[f], recs[1].artifact_hashes[f], "{f} changed");
    }
    let fb = parse_feedback(&recs[1].workspace.join("input").join(FEEDBACK_FILE)).unwrap();
    assert_eq!(fb.level, FeedbackLevel::Deep);
    let issue = fb.issues.iter().find(|i| i.id == "R4").unwrap();
    assert_eq!(issue.status, Status::Unbound);
    assert_eq!(issue.key.as_deref(), Some("mass"));
}

#[test]
fn default_schedule_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LoopConfig {
        max_attempts: 7,
        jobs: 1,
        ..quick()
    };
    let recs = run_case(&brief("baja"), &stub("baja", "failing_unbound"), &cfg, dir.path()).unwrap();
    assert_eq!(recs.len(), 7);
    let input = |k: usize| recs[k - 1].workspace.join("input");
    assert!(input(1).join(BRIEF_FILE).is_file());
    assert!(!input(1).join(FEEDBACK_FILE).exists());
    assert!(!input(1).join(VIEWS_DIR).exists());
    for k in 2..=7 {
        let views = input(k).join(VIEWS_DIR);
        for name in VIEW_NAMES {
            assert!(views.join(format!("{name}.ppm")).is_file(), "attempt {k} lacks {name}");
        }
        assert!(views.join(VIEWS_MANIFEST_FILE).is_file());
        let level = parse_feedback(&input(k).join(FEEDBACK_FILE)).unwrap().level;
        let want = if k >= 7 { FeedbackLevel::Deep } else { FeedbackLevel::Basic };
        assert_eq!(level, want, "attempt {k}");
    }
}

#[test]
fn attempt_files_are_frozen_and_hashed() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let cfg = LoopConfig { max_attempts: 1, ..quick() };
    let recs = run_case(&brief("enclosure"), &stub("enclosure", "passing"), &cfg, dir.path()).unwrap();
    let rec = &recs[0];
    assert!(rec.artifact_hashes.keys().any(|k| k.starts_with("input/")));
    assert!(rec.artifact_hashes.keys().any(|k| k.starts_with("output/")));
    assert!(rec.artifact_hashes.keys().any(|k| k.starts_with("eval/")));
    assert!(verify_hashes(rec).is_empty());
    let target = rec.workspace.join("output/part.obj");
    assert_eq!(std::fs::metadata(&target).unwrap().permissions().mode() & 0o222, 0);
    std::fs::set_permissions(&target, std::fs::Permissions::from_mode(0o644)).unwrap();
    std::fs::write(&target, "tampered").unwrap();
    assert_eq!(verify_hashes(rec), ["output/part.obj"]);
    assert!(rec.workspace.join(ATTEMPT_FILE).is_file());
}

#[test]
fn rerunning_into_an_existing_attempt_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LoopConfig { max_attempts: 1, ..quick() };
    run_case(&brief("baja"), &stub("baja", "passing"), &cfg, dir.path()).unwrap();
    assert!(run_case(&brief("baja"), &stub("baja", "passing"), &cfg, dir.path()).is_err());
}

/// Everything in a suite outcome except wall-clock fields.
fn fingerprint(root: &Path, jobs: usize) -> String {
    let cases: Vec<SuiteCase> = CASES
        .iter()
        .map(|c| SuiteCase {
            brief: brief(c),
            group: if *c == "baja" { "competition".into() } else { "aerospace".into() },
        })
        .collect();
    let fx = fixtures();
    let agent = CommandAgent::new(format!(
        "sh {0}/stub_agent.sh {0}/$HEPH_CASE_ID failing_unbound failing_stress passing",
        fx.display()
    ));
    let cfg = LoopConfig { jobs, ..quick() };
    let out = run_suite(&cases, &agent, &cfg, root).unwrap();
    let mut s = serde_json::to_string(&out.grade).unwrap();
    s += &serde_json::to_string(&out.per_attempt).unwrap();
    for row in &out.scaling.rows {
        s += &format!("{},{},{},{},{}\n", row.case_id, row.attempt, row.req_pass_fraction, row.strict, row.termination);
    }
    s += &serde_json::to_string(&out.scaling.rollup).unwrap();
    for (id, recs) in &out.records {
        for r in recs {
            s += &format!("{id}/{} {:?} {:?}\n", r.attempt, r.termination, r.inputs);
            s += &serde_json::to_string(&r.verdict).unwrap();
            s += &serde_json::to_string(&r.artifact_hashes).unwrap();
        }
    }
    s
}

#[test]
fn suite_results_do_not_depend_on_jobs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = fingerprint(a.path(), 1);
    let eight = fingerprint(b.path(), 8);
    assert_eq!(one, eight);
    assert!(a.path().join("suite_grade.v1").is_file());
    assert!(a.path().join("scaling_log.csv").is_file());
}
