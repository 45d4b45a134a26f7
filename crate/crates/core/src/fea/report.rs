//! `solver_report/1`: the neutral exchange between any solver and the checker.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::doc;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::solve::{buckling_factors, modal_with, static_with, System};
use super::AnalysisModel;

pub const REPORT_SCHEMA: &str = "solver_report/1";
pub const CARD_STATIC: &str = "*STATIC";
pub const CARD_BUCKLE: &str = "*BUCKLE";
pub const CARD_FREQUENCY: &str = "*FREQUENCY";

const BUILTIN_EXTRACTION: &str =
    "pin-jointed truss: stress is member |F/A| (von Mises proxy); Euler buckling per member with K = 1; lumped nodal masses";
const RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Ok,
    SolverError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricValue {
    pub value: f64,
    #[serde(default)]
    pub unit: String,
    /// Producing analysis card, e.g. `*STATIC`.
    #[serde(default)]
    pub analysis: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalEntry {
    #[serde(default)]
    pub frequencies_hz: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BucklingEntry {
    /// Ascending; the first entry is the first mode.
    #[serde(default)]
    pub load_factors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BucklingEntry {
    pub const NO_COMPRESSION: &'static str = "no compressive member";

    /// True when the analysis ran and found nothing in compression.
    pub fn is_unbounded(&self) -> bool {
        self.load_factors.is_empty() && self.note.as_deref() == Some(Self::NO_COMPRESSION)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisFailure {
    pub analysis_class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_case: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverReportDoc {
    pub schema: String,
    #[serde(default)]
    pub solver: String,
    /// How field maxima were extracted.
    pub extraction: String,
    pub status: ReportStatus,
    /// Load case → canonical metric key → value.
    #[serde(default)]
    pub load_cases: BTreeMap<String, BTreeMap<String, MetricValue>>,
    #[serde(default)]
    pub modal: ModalEntry,
    #[serde(default)]
    pub buckling: BTreeMap<String, BucklingEntry>,
    #[serde(default)]
    pub errors: Vec<AnalysisFailure>,
}

impl SolverReportDoc {
    pub fn new(solver: impl Into<String>, extraction: impl Into<String>) -> Self {
        SolverReportDoc {
            schema: REPORT_SCHEMA.into(),
            solver: solver.into(),
            extraction: extraction.into(),
            status: ReportStatus::Ok,
            load_cases: BTreeMap::new(),
            modal: ModalEntry::default(),
            buckling: BTreeMap::new(),
            errors: Vec::new(),
        }
    }

    pub fn metric(&self, lc: &str, key: &str) -> Option<&MetricValue> {
        self.load_cases.get(lc)?.get(key)
    }

    pub fn metric_count(&self) -> usize {
        self.load_cases.values().map(|m| m.len()).sum::<usize>() + self.modal.frequencies_hz.len()
    }

    /// Failures recorded for an analysis card (`*STATIC`, ...).
    pub fn failures_for<'a>(&'a self, card: &'a str) -> impl Iterator<Item = &'a AnalysisFailure> + 'a {
        self.errors.iter().filter(move |e| e.analysis_class == card)
    }

    /// Record a failed analysis and mark the report as errored.
    pub fn fail(&mut self, card: &str, lc: Option<&str>, message: String) {
        self.status = ReportStatus::SolverError;
        self.errors.push(AnalysisFailure {
            analysis_class: card.into(),
            load_case: lc.map(str::to_string),
            message,
        });
    }

    fn put(&mut self, lc: &str, key: impl Into<String>, value: f64, unit: &str, card: &str) {
        self.load_cases.entry(lc.to_string()).or_default().insert(
            key.into(),
            MetricValue {
                value,
                unit: unit.into(),
                analysis: card.into(),
            },
        );
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != REPORT_SCHEMA {
            return Err(Error::schema("$.schema", format!("expected `{REPORT_SCHEMA}`")));
        }
        if self.status == ReportStatus::Ok && !self.errors.is_empty() {
            return Err(Error::schema("$.errors", "status ok with recorded errors"));
        }
        for (lc, metrics) in &self.load_cases {
            for (k, v) in metrics {
                if !v.value.is_finite() {
                    return Err(Error::schema(format!("$.load_cases.{lc}.{k}"), "value must be finite"));
                }
            }
        }
        if self.modal.frequencies_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::schema("$.modal.frequencies_hz", "frequencies must be finite and positive"));
        }
        for (lc, b) in &self.buckling {
            if b.load_factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
                return Err(Error::schema(format!("$.buckling.{lc}"), "load factors must be finite and positive"));
            }
        }
        Ok(())
    }
}

pub fn parse_solver_report_bytes(bytes: &[u8]) -> Result<SolverReportDoc> {
    let r: SolverReportDoc = doc::from_bytes(bytes)?;
    r.validate()?;
    Ok(r)
}

pub fn parse_solver_report(path: &Path) -> Result<SolverReportDoc> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_solver_report_bytes(&bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Request {
    Static(String),
    Buckle(String),
    Modal,
}

impl Request {
    /// Static and buckling for every load case, plus modal.
    pub fn all<T: Scalar>(model: &AnalysisModel<T>) -> Vec<Request> {
        let mut r: Vec<Request> = model.load_cases.iter().map(|lc| Request::Static(lc.id.clone())).collect();
        r.extend(model.load_cases.iter().map(|lc| Request::Buckle(lc.id.clone())));
        r.push(Request::Modal);
        r
    }

    pub fn card(&self) -> &'static str {
        match self {
            Request::Static(_) => CARD_STATIC,
            Request::Buckle(_) => CARD_BUCKLE,
            Request::Modal => CARD_FREQUENCY,
        }
    }

    pub fn load_case(&self) -> Option<&str> {
        match self {
            Request::Static(lc) | Request::Buckle(lc) => Some(lc),
            Request::Modal => None,
        }
    }
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Request::Static(lc) => write!(f, "static:{lc}"),
            Request::Buckle(lc) => write!(f, "buckle:{lc}"),
            Request::Modal => f.write_str("modal"),
        }
    }
}

impl FromStr for Request {
    type Err = Error;

    /// `static:LC1`, `buckle:LC4` or `modal`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("static", lc)) if !lc.is_empty() => Ok(Request::Static(lc.into())),
            Some(("buckle", lc)) if !lc.is_empty() => Ok(Request::Buckle(lc.into())),
            None if s == "modal" => Ok(Request::Modal),
            _ => Err(Error::InvalidArgument(format!("unknown analysis request `{s}`"))),
        }
    }
}

/// Run the requested analyses and collect them into one report. Buckling of
/// a load case solves its static case first; only requested classes appear
/// in the output. Failures become error entries, never an `Err`.
pub fn run_analysis<T: Scalar>(model: &AnalysisModel<T>, requests: &[Request]) -> SolverReportDoc {
    let mut report = SolverReportDoc::new("mini_fea", BUILTIN_EXTRACTION);
    let requests: BTreeSet<&Request> = requests.iter().collect();
    let sys = match System::new(model) {
        Ok(s) => s,
        Err(e) => {
            for r in &requests {
                report.fail(r.card(), r.load_case(), e.to_string());
            }
            return report;
        }
    };
    let static_lcs: BTreeSet<&str> = requests.iter().filter_map(|r| r.load_case()).collect();
    for lc in static_lcs {
        let want_static = requests.contains(&Request::Static(lc.to_string()));
        let want_buckle = requests.contains(&Request::Buckle(lc.to_string()));
        let stat = match static_with(model, &sys, lc) {
            Ok(s) if s.residual.f64() <= RESIDUAL_LIMIT => s,
            Ok(s) => {
                let msg = format!("equilibrium residual {:.3e} exceeds {RESIDUAL_LIMIT:e}", s.residual.f64());
                report.fail(CARD_STATIC, Some(lc), msg);
                continue;
            }
            Err(e) => {
                if want_static {
                    report.fail(CARD_STATIC, Some(lc), e.to_string());
                }
                if want_buckle {
                    report.fail(CARD_BUCKLE, Some(lc), format!("prerequisite static solve failed: {e}"));
                }
                continue;
            }
        };
        if want_static {
            report.put(lc, "max_von_mises_stress", stat.max_stress().f64(), "MPa", CARD_STATIC);
            report.put(lc, "max_displacement", stat.max_displacement().f64(), "mm", CARD_STATIC);
            for (name, nodes) in &model.node_sets {
                let d = stat.max_displacement_in(nodes).f64();
                report.put(lc, format!("max_displacement_at_{name}"), d, "mm", CARD_STATIC);
            }
            for (a, axis) in ["x", "y", "z"].iter().enumerate() {
                report.put(lc, format!("reaction_sum_{axis}"), stat.reaction_sum[a].f64(), "N", CARD_STATIC);
            }
        }
        if want_buckle {
            let b = buckling_factors(model, &stat);
            let entry = BucklingEntry {
                load_factors: b.member_factors.iter().map(|x| x.1.f64()).collect(),
                note: b.member_factors.is_empty().then(|| BucklingEntry::NO_COMPRESSION.to_string()),
            };
            if b.first_mode.is_finite() {
                report.put(lc, "first_mode_load_factor", b.first_mode.f64(), "", CARD_BUCKLE);
            }
            report.buckling.insert(lc.to_string(), entry);
        }
    }
    if requests.contains(&Request::Modal) {
        match modal_with(model, &sys) {
            Ok(m) => report.modal.frequencies_hz = vec![m.frequency_hz.f64()],
            Err(e) => report.fail(CARD_FREQUENCY, None, e.to_string()),
        }
    }
    report
}
