//! `report.json` layout and its schema check.

use std::sync::OnceLock;

use serde::Serialize;

use tracelens_core::cluster::ClusterExtent;
use tracelens_core::distfit::TailSummary;
use tracelens_core::ingest::IngestStats;
use tracelens_core::trace_model::{FittedDistribution, JobClass};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "ok")]
    Ok,
    #[serde(rename = "insufficient data")]
    InsufficientData,
    #[serde(rename = "error")]
    Error,
}

/// One report section: a status, and either a body or the reason there is none.
#[derive(Debug, Clone, Serialize)]
pub struct Section<T> {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(flatten)]
    pub body: Option<T>,
}

impl<T> Section<T> {
    pub fn ok(body: T) -> Self {
        Section { status: Status::Ok, reason: None, body: Some(body) }
    }

    pub fn insufficient(reason: impl Into<String>) -> Self {
        Section { status: Status::InsufficientData, reason: Some(reason.into()), body: None }
    }

    pub fn error(reason: impl Into<String>) -> Self {
        Section { status: Status::Error, reason: Some(reason.into()), body: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSection {
    pub jobs: u64,
    pub jobs_with_usage: u64,
    pub jobs_with_runtime: u64,
    pub censored_jobs: u64,
    /// Trace-level statistics, when `ingest_stats.json` sits next to the job table.
    pub trace: Option<IngestStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UsageCenter {
    pub cpu: f64,
    pub memory: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassEntry {
    pub label: JobClass,
    pub count: usize,
    pub share: f64,
    pub center: UsageCenter,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobClassesBody {
    pub classes: Vec<ClassEntry>,
    pub excluded_jobs: usize,
    pub wcss: f64,
    pub silhouette: Option<f64>,
    pub silhouette_sampled: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub k: usize,
    pub wcss: f64,
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KSweepBody {
    pub k_min: usize,
    /// Upper end actually swept; lowered when there are fewer distinct points.
    pub k_max: usize,
    pub entries: Vec<SweepEntry>,
    pub best_k: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArrivalBody {
    pub k: usize,
    pub silhouette: Option<f64>,
    pub sweep: Vec<SweepEntry>,
    pub clusters: Vec<ClusterExtent>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitBody {
    pub fit: FittedDistribution,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryBody {
    pub summary: TailSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fits {
    pub interarrival: Section<FitBody>,
    pub cpu_usage: Section<FitBody>,
    pub memory_usage: Section<FitBody>,
    pub runtime: Section<FitBody>,
    pub runtime_summary: Section<SummaryBody>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Annotation {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub seed: u64,
    pub ingest_stats: IngestSection,
    pub job_classes: Section<JobClassesBody>,
    pub k_sweep: Section<KSweepBody>,
    pub arrival_clusters: Section<ArrivalBody>,
    pub fits: Fits,
    pub annotations: Vec<Annotation>,
}

impl Report {
    pub fn statuses(&self) -> [Status; 8] {
        [
            self.job_classes.status,
            self.k_sweep.status,
            self.arrival_clusters.status,
            self.fits.interarrival.status,
            self.fits.cpu_usage.status,
            self.fits.memory_usage.status,
            self.fits.runtime.status,
            self.fits.runtime_summary.status,
        ]
    }

    /// True when some section failed and none succeeded.
    pub fn nothing_succeeded(&self) -> bool {
        let s = self.statuses();
        !s.contains(&Status::Ok) && s.contains(&Status::Error)
    }
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).expect("bundled schema is JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Schema violations of `value`, one message per error.
pub fn schema_errors(value: &serde_json::Value) -> Vec<String> {
    validator().iter_errors(value).map(|e| format!("{}: {}", e.instance_path, e)).collect()
}

pub fn validate_report(value: &serde_json::Value) -> CliResult<()> {
    let errors = schema_errors(value);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::internal(format!("report violates its schema: {}", errors.join("; "))))
    }
}
