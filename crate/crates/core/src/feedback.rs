//! Per-attempt feedback documents: the engineering report in basic and deep
//! form, and the inspection record written after a rich-view review.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::checker::{CaseVerdict, Provenance, Status};
use crate::doc;
use crate::error::{Error, Result};
use crate::fea::AnalysisFailure;
use crate::render::is_view_name;

pub const FEEDBACK_SCHEMA: &str = "feedback/1";
pub const INSPECTION_SCHEMA: &str = "inspection/1";

/// Default file names inside an attempt workspace.
pub const FEEDBACK_FILE: &str = "feedback.v1";
pub const INSPECTION_FILE: &str = "inspection.v1";
pub const SOLVER_REPORT_FILE: &str = "solver_report.v1";

/// Serialized feedback never exceeds this many bytes.
pub const MAX_FEEDBACK_BYTES: usize = 64 * 1024;
const MAX_NOTE_CHARS: usize = 400;
const MAX_NAME_CHARS: usize = 200;
const MAX_FREE_TEXT_CHARS: usize = 4000;
const MAX_FAILURES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackLevel {
    Basic,
    Deep,
}

impl fmt::Display for FeedbackLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedbackLevel::Basic => "basic",
            FeedbackLevel::Deep => "deep",
        })
    }
}

impl FromStr for FeedbackLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(FeedbackLevel::Basic),
            "deep" | "deep-feedback" => Ok(FeedbackLevel::Deep),
            other => Err(Error::InvalidArgument(format!("unknown feedback level `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementStatus {
    pub id: String,
    pub status: Status,
}

/// One non-passing requirement. Everything past `status` is deep-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Issue {
    pub id: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    /// Canonical key the metric resolved to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_scope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding_note: Option<String>,
}

impl Issue {
    fn basic(id: &str, status: Status) -> Self {
        Issue {
            id: id.into(),
            status,
            metric: None,
            key: None,
            measured: None,
            limit: None,
            unit: None,
            margin: None,
            worst_scope: None,
            provenance: None,
            binding_note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackReport {
    pub schema: String,
    pub level: FeedbackLevel,
    pub attempt: usize,
    pub case_id: String,
    /// `k/n pass` over evaluable requirements.
    pub summary: String,
    pub strict_pass: bool,
    pub counts: BTreeMap<Status, usize>,
    pub requirements: Vec<RequirementStatus>,
    pub issues: Vec<Issue>,
    #[serde(default)]
    pub analysis_failures: Vec<AnalysisFailure>,
    /// Pass-through slots filled by the inspection layer or the agent.
    #[serde(default)]
    pub failure_category: Option<String>,
    #[serde(default)]
    pub primary_claim_id: Option<String>,
    #[serde(default)]
    pub retry_advice: Option<String>,
}

fn clip(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        return s.to_string();
    }
    let mut out: String = s.chars().take(max.saturating_sub(3)).collect();
    out.push_str("...");
    out
}

fn finite(v: Option<f64>) -> Option<f64> {
    v.filter(|x| x.is_finite())
}

/// Build the feedback document for one graded attempt.
pub fn render_feedback(case: &CaseVerdict, level: FeedbackLevel, attempt: usize) -> FeedbackReport {
    let mut counts = BTreeMap::new();
    for v in &case.verdicts {
        *counts.entry(v.status).or_insert(0) += 1;
    }
    let issues = case
        .verdicts
        .iter()
        .filter(|v| !matches!(v.status, Status::Pass | Status::NotEvaluable))
        .map(|v| match level {
            FeedbackLevel::Basic => Issue::basic(&v.id, v.status),
            FeedbackLevel::Deep => Issue {
                metric: Some(clip(&v.metric, MAX_NAME_CHARS)),
                key: Some(clip(&v.key, MAX_NAME_CHARS)),
                measured: finite(v.measured),
                limit: Some(v.limit),
                unit: Some(v.unit.clone()),
                margin: finite(v.margin),
                worst_scope: v.worst_scope.clone(),
                provenance: v.provenance,
                binding_note: v.binding_note.as_deref().map(|n| clip(n, MAX_NOTE_CHARS)),
                ..Issue::basic(&v.id, v.status)
            },
        })
        .collect();
    FeedbackReport {
        schema: FEEDBACK_SCHEMA.into(),
        level,
        attempt,
        case_id: case.case_id.clone(),
        summary: format!("{}/{} pass", case.pass_count, case.evaluable_count),
        strict_pass: case.strict_pass,
        counts,
        requirements: case
            .verdicts
            .iter()
            .map(|v| RequirementStatus {
                id: v.id.clone(),
                status: v.status,
            })
            .collect(),
        issues,
        analysis_failures: Vec::new(),
        failure_category: None,
        primary_claim_id: None,
        retry_advice: None,
    }
}

impl FeedbackReport {
    /// Attach solver failures; messages are clipped to keep the report compact.
    pub fn with_analysis_failures(mut self, failures: &[AnalysisFailure]) -> Self {
        self.analysis_failures = failures
            .iter()
            .take(MAX_FAILURES)
            .map(|f| AnalysisFailure {
                message: clip(&f.message, MAX_NOTE_CHARS),
                ..f.clone()
            })
            .collect();
        self
    }

    /// Copy the pass-through slots from an inspection record verbatim
    /// (clipped only for size).
    pub fn with_inspection(mut self, rec: &InspectionRecord) -> Self {
        let c = |s: &Option<String>| s.as_deref().map(|t| clip(t, MAX_FREE_TEXT_CHARS));
        self.failure_category = c(&rec.failure_category);
        self.primary_claim_id = c(&rec.primary_claim_id);
        self.retry_advice = c(&rec.retry_advice);
        self
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        doc::to_string(self).into_bytes()
    }
}

/// Project a report onto a level. Lowering to basic strips every deep field;
/// a basic report cannot be raised, so asking for deep returns it unchanged.
pub fn redact_for_level(report: &FeedbackReport, level: FeedbackLevel) -> FeedbackReport {
    let mut out = report.clone();
    if level == FeedbackLevel::Basic {
        out.level = FeedbackLevel::Basic;
        out.issues = report.issues.iter().map(|i| Issue::basic(&i.id, i.status)).collect();
    }
    out
}

pub fn parse_feedback_bytes(bytes: &[u8]) -> Result<FeedbackReport> {
    let r: FeedbackReport = doc::from_bytes(bytes)?;
    if r.schema != FEEDBACK_SCHEMA {
        return Err(Error::schema("$.schema", format!("expected `{FEEDBACK_SCHEMA}`")));
    }
    Ok(r)
}

pub fn parse_feedback(path: &Path) -> Result<FeedbackReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_feedback_bytes(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InspectionVerdict {
    Ready,
    Revise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectionIssue {
    #[serde(default)]
    pub view_name: Option<String>,
    pub description: String,
}

/// Review of a rich-view bundle, written by the agent or an inspector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectionRecord {
    pub schema: String,
    pub verdict: InspectionVerdict,
    pub summary: String,
    #[serde(default)]
    pub issues: Vec<InspectionIssue>,
    #[serde(default)]
    pub failure_category: Option<String>,
    #[serde(default)]
    pub primary_claim_id: Option<String>,
    #[serde(default)]
    pub retry_advice: Option<String>,
}

impl InspectionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.schema != INSPECTION_SCHEMA {
            return Err(Error::schema("$.schema", format!("expected `{INSPECTION_SCHEMA}`")));
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if let Some(v) = &issue.view_name {
                if !is_view_name(v) {
                    return Err(Error::schema(format!("$.issues[{i}].view_name"), format!("`{v}` is not a view name")));
                }
            }
        }
        Ok(())
    }
}

pub fn parse_inspection_bytes(bytes: &[u8]) -> Result<InspectionRecord> {
    let r: InspectionRecord = doc::from_bytes(bytes)?;
    r.validate()?;
    Ok(r)
}

pub fn parse_inspection(path: &Path) -> Result<InspectionRecord> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_inspection_bytes(&bytes)
}
