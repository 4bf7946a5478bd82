//! Row-level trace records and the per-job aggregate built from them.
//!
//! Times are integer microseconds since trace start. Resource values are
//! fractions normalized to the largest machine in the cell, as in the
//! clusterdata-2011 format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Microseconds since trace start, or [`Timestamp::MISSING`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(u64);

impl Timestamp {
    /// Sentinel for absent or out-of-trace times. Never compares equal to a
    /// valid timestamp and is rejected by every arithmetic helper.
    pub const MISSING: Timestamp = Timestamp(u64::MAX);

    /// Largest representable valid timestamp.
    pub const MAX_VALID: u64 = u64::MAX - 1;

    /// Clusterdata marks events that happen after the trace window with 2^63 - 1.
    pub const TRACE_END_MARKER: u64 = i64::MAX as u64;

    pub fn from_micros(us: u64) -> Self {
        if us > Self::MAX_VALID {
            Self::MISSING
        } else {
            Timestamp(us)
        }
    }

    pub fn is_missing(self) -> bool {
        self == Self::MISSING
    }

    pub fn micros(self) -> Option<u64> {
        if self.is_missing() {
            None
        } else {
            Some(self.0)
        }
    }

    /// `self - earlier` in microseconds; `None` if either side is missing or
    /// the difference would be negative.
    pub fn since(self, earlier: Timestamp) -> Option<u64> {
        self.micros()?.checked_sub(earlier.micros()?)
    }

    pub fn as_secs_f64(self) -> Option<f64> {
        self.micros().map(|us| us as f64 / 1e6)
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.micros() {
            Some(us) => write!(f, "Timestamp({us})"),
            None => f.write_str("Timestamp(MISSING)"),
        }
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.micros() {
            Some(us) => s.serialize_some(&us),
            None => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Option<u64> = Option::deserialize(d)?;
        Ok(v.map(Timestamp::from_micros).unwrap_or(Timestamp::MISSING))
    }
}

/// Job and task lifecycle transitions, with their clusterdata codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventType {
    Submit,
    Schedule,
    Evict,
    Fail,
    Finish,
    Kill,
    Lost,
    UpdatePending,
    UpdateRunning,
}

impl EventType {
    pub fn from_code(code: u8) -> Option<Self> {
        use EventType::*;
        Some(match code {
            0 => Submit,
            1 => Schedule,
            2 => Evict,
            3 => Fail,
            4 => Finish,
            5 => Kill,
            6 => Lost,
            7 => UpdatePending,
            8 => UpdateRunning,
            _ => return None,
        })
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Events that end a job's life.
    pub fn terminal(self) -> Option<TerminalEvent> {
        match self {
            EventType::Finish => Some(TerminalEvent::Finish),
            EventType::Fail => Some(TerminalEvent::Fail),
            EventType::Kill => Some(TerminalEvent::Kill),
            EventType::Lost => Some(TerminalEvent::Lost),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobEvent {
    pub time: Timestamp,
    pub job_id: u64,
    pub event_type: EventType,
    pub scheduling_class: u8,
    pub user: String,
    pub job_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvent {
    pub time: Timestamp,
    pub job_id: u64,
    pub task_index: u32,
    pub machine_id: Option<u64>,
    pub event_type: EventType,
    pub priority: u32,
    pub cpu_request: Option<f64>,
    pub memory_request: Option<f64>,
    pub disk_request: Option<f64>,
}

/// One measurement window of a task's resource usage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskUsage {
    pub start_time: Timestamp,
    pub end_time: Timestamp,
    pub job_id: u64,
    pub task_index: u32,
    pub machine_id: Option<u64>,
    pub cpu_rate: Option<f64>,
    pub canonical_memory: Option<f64>,
    pub assigned_memory: Option<f64>,
    pub page_cache_total: Option<f64>,
    pub disk_io_time: Option<f64>,
    pub local_disk_space: Option<f64>,
    /// Parsed and carried through; no analysis reads them.
    pub cycles_per_instruction: Option<f64>,
    pub memory_accesses_per_instruction: Option<f64>,
}

impl TaskUsage {
    /// Window length in microseconds. Always positive for parsed rows.
    pub fn duration(&self) -> u64 {
        self.end_time.since(self.start_time).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MachineEventType {
    Add,
    Remove,
    Update,
}

impl MachineEventType {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Add),
            1 => Some(Self::Remove),
            2 => Some(Self::Update),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineEvent {
    pub time: Timestamp,
    pub machine_id: u64,
    pub event_type: MachineEventType,
    pub platform: String,
    pub cpu_capacity: Option<f64>,
    pub memory_capacity: Option<f64>,
}

/// How a job's observed life ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TerminalEvent {
    Finish,
    Fail,
    Kill,
    Lost,
    /// No terminal event inside the ingested window.
    Censored,
}

impl TerminalEvent {
    /// Whether a runtime may be attached to a job ending this way.
    pub fn has_runtime(self) -> bool {
        matches!(self, Self::Finish | Self::Fail | Self::Kill)
    }
}

impl fmt::Display for TerminalEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Finish => "FINISH",
            Self::Fail => "FAIL",
            Self::Kill => "KILL",
            Self::Lost => "LOST",
            Self::Censored => "CENSORED",
        })
    }
}

/// Per-job feature vector produced by ingestion.
///
/// `arrival_time` is the job's first SUBMIT. `runtime` runs from the first
/// SCHEDULE to the first terminal event and is absent for censored and lost
/// jobs, or when either endpoint was not observed. Resource means are
/// duration-weighted over all usage rows of the job's tasks and are absent
/// when no row carried that resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: u64,
    pub arrival_time: Timestamp,
    pub runtime: Option<u64>,
    pub mean_cpu: Option<f64>,
    pub mean_memory: Option<f64>,
    pub task_count: u32,
    pub terminal_event: TerminalEvent,
}

impl JobRecord {
    pub fn runtime_secs(&self) -> Option<f64> {
        self.runtime.map(|us| us as f64 / 1e6)
    }

    /// `(mean_cpu, mean_memory)` when both are present and finite.
    pub fn usage(&self) -> Option<(f64, f64)> {
        match (self.mean_cpu, self.mean_memory) {
            (Some(c), Some(m)) if c.is_finite() && m.is_finite() => Some((c, m)),
            _ => None,
        }
    }
}

/// Resource-usage class of a job. Ordered by cluster-center magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobClass {
    Minor,
    Mediocre,
    Major,
}

impl JobClass {
    pub const ALL: [JobClass; 3] = [JobClass::Minor, JobClass::Mediocre, JobClass::Major];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobClass::Minor => "MINOR",
            JobClass::Mediocre => "MEDIOCRE",
            JobClass::Major => "MAJOR",
        }
    }
}

impl fmt::Display for JobClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JobClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MINOR" => Ok(JobClass::Minor),
            "MEDIOCRE" => Ok(JobClass::Mediocre),
            "MAJOR" => Ok(JobClass::Major),
            other => Err(format!("unknown job class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionParams {
    Weibull { shape: f64, scale: f64 },
    Zipf { exponent: f64, support_size: u64 },
    ParetoTail { exponent: f64, xmin: f64, tail_count: u64 },
}

/// Conditions a fit reports alongside its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum FitFlag {
    /// Zero samples were replaced by the smallest positive double.
    ZerosShifted { count: u64 },
    /// Tail exponent fell outside (0, 2].
    ExponentOutsideHeavyTailRange,
    /// Input had no spread; parameters are placeholders.
    DegenerateInput,
}

/// A parametric model fitted to one feature, with its goodness of fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedDistribution {
    pub params: DistributionParams,
    /// Kolmogorov-Smirnov distance to the fitted CDF (Weibull, Pareto tail).
    pub ks_statistic: Option<f64>,
    /// Coefficient of determination of the log-log rank regression (Zipf).
    pub r_squared: Option<f64>,
    pub sample_count: u64,
    #[serde(default)]
    pub flags: Vec<FitFlag>,
}

impl FittedDistribution {
    pub fn has_flag(&self, flag: &FitFlag) -> bool {
        self.flags.contains(flag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn missing_is_distinct_and_inert() {
        assert!(Timestamp::MISSING.is_missing());
        assert_eq!(Timestamp::from_micros(Timestamp::TRACE_END_MARKER).micros(), Some(Timestamp::TRACE_END_MARKER));
        assert_eq!(Timestamp::from_micros(u64::MAX), Timestamp::MISSING);
        assert_eq!(Timestamp::MISSING.since(Timestamp::from_micros(0)), None);
        assert_eq!(Timestamp::from_micros(5).since(Timestamp::MISSING), None);
        assert_eq!(Timestamp::from_micros(9).since(Timestamp::from_micros(5)), Some(4));
        assert_eq!(Timestamp::from_micros(5).since(Timestamp::from_micros(9)), None);
    }

    #[test]
    fn event_codes_round_trip() {
        for code in 0..9u8 {
            assert_eq!(EventType::from_code(code).unwrap().code(), code);
        }
        assert!(EventType::from_code(9).is_none());
        assert!(EventType::from_code(99).is_none());
    }

    #[test]
    fn fitted_distribution_json_round_trip() {
        let fit = FittedDistribution {
            params: DistributionParams::ParetoTail { exponent: 1.25, xmin: 3.5, tail_count: 77 },
            ks_statistic: Some(0.031),
            r_squared: None,
            sample_count: 1000,
            flags: vec![FitFlag::ZerosShifted { count: 2 }, FitFlag::ExponentOutsideHeavyTailRange],
        };
        let text = serde_json::to_string(&fit).unwrap();
        let back: FittedDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, fit);
    }

    proptest! {
        #[test]
        fn valid_timestamps_never_equal_missing(us in 0u64..=Timestamp::MAX_VALID) {
            let t = Timestamp::from_micros(us);
            prop_assert_ne!(t, Timestamp::MISSING);
            prop_assert_eq!(t.micros(), Some(us));
        }

        #[test]
        fn job_record_json_round_trip(
            job_id in any::<u64>(),
            arrival in 0u64..1u64 << 50,
            runtime in proptest::option::of(1u64..1u64 << 45),
            cpu in proptest::option::of(0.0f64..4.0),
            mem in proptest::option::of(0.0f64..4.0),
            tasks in 0u32..10_000,
        ) {
            let rec = JobRecord {
                job_id,
                arrival_time: Timestamp::from_micros(arrival),
                runtime,
                mean_cpu: cpu,
                mean_memory: mem,
                task_count: tasks,
                terminal_event: if runtime.is_some() { TerminalEvent::Finish } else { TerminalEvent::Censored },
            };
            let text = serde_json::to_string(&rec).unwrap();
            let back: JobRecord = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, rec);
        }
    }
}
