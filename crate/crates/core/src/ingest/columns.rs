//! Table layouts and per-row parsing.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use csv::StringRecord;
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::trace_model::{
    EventType, JobEvent, MachineEvent, MachineEventType, TaskEvent, TaskUsage, Timestamp,
};

/// The trace tables this crate reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    JobEvents,
    TaskEvents,
    TaskUsage,
    MachineEvents,
}

impl Table {
    pub const ALL: [Table; 4] = [Table::JobEvents, Table::TaskEvents, Table::TaskUsage, Table::MachineEvents];

    /// Subdirectory name under the trace root.
    pub fn dir_name(self) -> &'static str {
        match self {
            Table::JobEvents => "job_events",
            Table::TaskEvents => "task_events",
            Table::TaskUsage => "task_usage",
            Table::MachineEvents => "machine_events",
        }
    }

    /// Field names in default column order.
    pub fn fields(self) -> &'static [&'static str] {
        match self {
            Table::JobEvents => &JOB_EVENT_FIELDS,
            Table::TaskEvents => &TASK_EVENT_FIELDS,
            Table::TaskUsage => &TASK_USAGE_FIELDS,
            Table::MachineEvents => &MACHINE_EVENT_FIELDS,
        }
    }

    fn from_dir_name(name: &str) -> Option<Table> {
        Table::ALL.into_iter().find(|t| t.dir_name() == name)
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

pub const JOB_EVENT_FIELDS: [&str; 8] = [
    "timestamp", "missing_info", "job_id", "event_type", "user", "scheduling_class", "job_name",
    "logical_job_name",
];

pub const TASK_EVENT_FIELDS: [&str; 13] = [
    "timestamp", "missing_info", "job_id", "task_index", "machine_id", "event_type", "user",
    "scheduling_class", "priority", "cpu_request", "memory_request", "disk_request",
    "different_machines",
];

pub const TASK_USAGE_FIELDS: [&str; 20] = [
    "start_time", "end_time", "job_id", "task_index", "machine_id", "cpu_rate", "canonical_memory",
    "assigned_memory", "unmapped_page_cache", "total_page_cache", "max_memory", "mean_disk_io_time",
    "mean_local_disk_space", "max_cpu_rate", "max_disk_io_time", "cpi", "mai", "sample_portion",
    "aggregation_type", "sampled_cpu_usage",
];

pub const MACHINE_EVENT_FIELDS: [&str; 6] =
    ["timestamp", "machine_id", "event_type", "platform_id", "cpu_capacity", "memory_capacity"];

/// Resolved column index for every field of one table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableColumns {
    table: Table,
    index: Vec<usize>,
}

impl TableColumns {
    pub fn default_for(table: Table) -> Self {
        TableColumns { table, index: (0..table.fields().len()).collect() }
    }

    pub fn table(&self) -> Table {
        self.table
    }

    /// Column index of `field`, if the table has such a field.
    pub fn column_of(&self, field: &str) -> Option<usize> {
        self.table.fields().iter().position(|f| *f == field).map(|i| self.index[i])
    }

    fn get<'r>(&self, record: &'r StringRecord, field: usize) -> &'r str {
        record.get(self.index[field]).unwrap_or("").trim()
    }
}

/// Column layout for all tables, optionally remapped for non-Google traces.
///
/// The remap file is TOML with one section per table:
///
/// ```toml
/// [task_usage]
/// cpu_rate = 3
/// canonical_memory = 4
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    tables: BTreeMap<Table, TableColumns>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap { tables: Table::ALL.into_iter().map(|t| (t, TableColumns::default_for(t))).collect() }
    }
}

impl ColumnMap {
    pub fn from_toml_str(text: &str) -> Result<Self, IngestError> {
        let raw: BTreeMap<String, BTreeMap<String, i64>> =
            toml::from_str(text).map_err(|e| IngestError::ColumnMap(e.to_string()))?;
        let mut map = ColumnMap::default();
        for (table_name, fields) in raw {
            let table = Table::from_dir_name(&table_name)
                .ok_or_else(|| IngestError::ColumnMap(format!("unknown table `{table_name}`")))?;
            let cols = map.tables.get_mut(&table).expect("all tables present");
            for (field, column) in fields {
                let pos = table.fields().iter().position(|f| *f == field).ok_or_else(|| {
                    IngestError::ColumnMap(format!("unknown field `{table_name}.{field}`"))
                })?;
                let column = usize::try_from(column).map_err(|_| {
                    IngestError::ColumnMap(format!("negative column for `{table_name}.{field}`"))
                })?;
                cols.index[pos] = column;
            }
        }
        Ok(map)
    }

    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn table(&self, table: Table) -> &TableColumns {
        &self.tables[&table]
    }
}

/// Why a row was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowError {
    Missing(&'static str),
    Invalid(&'static str),
    OutOfRange(&'static str),
    UnknownEventCode(String),
    EmptyInterval,
    Malformed,
}

impl RowError {
    /// Stable key used in skip statistics.
    pub fn kind(&self) -> String {
        match self {
            RowError::Missing(f) => format!("missing_{f}"),
            RowError::Invalid(f) => format!("invalid_{f}"),
            RowError::OutOfRange(f) => format!("out_of_range_{f}"),
            RowError::UnknownEventCode(_) => "unknown_event_code".to_string(),
            RowError::EmptyInterval => "empty_interval".to_string(),
            RowError::Malformed => "malformed_record".to_string(),
        }
    }
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowError::UnknownEventCode(code) => write!(f, "unknown event code `{code}`"),
            other => f.write_str(&other.kind()),
        }
    }
}

/// Anything that carries a time usable for window filtering.
pub trait Timestamped {
    fn timestamp(&self) -> Timestamp;
}

/// A record type stored in one trace table.
pub trait TraceRow: Timestamped + Sized + Send {
    const TABLE: Table;

    fn parse(record: &StringRecord, cols: &TableColumns) -> Result<Self, RowError>;
}

fn opt_u64(s: &str, field: &'static str) -> Result<Option<u64>, RowError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<u64>().map(Some).map_err(|_| RowError::Invalid(field))
}

fn req_u64(s: &str, field: &'static str) -> Result<u64, RowError> {
    opt_u64(s, field)?.ok_or(RowError::Missing(field))
}

fn req_u32(s: &str, field: &'static str) -> Result<u32, RowError> {
    u32::try_from(req_u64(s, field)?).map_err(|_| RowError::OutOfRange(field))
}

/// Times past the trace end are recorded as MISSING.
fn req_time(s: &str, field: &'static str) -> Result<Timestamp, RowError> {
    let us = req_u64(s, field)?;
    if us >= Timestamp::TRACE_END_MARKER {
        return Ok(Timestamp::MISSING);
    }
    Ok(Timestamp::from_micros(us))
}

/// Non-negative finite real; `None` when the field is empty.
fn opt_nonneg(s: &str, field: &'static str) -> Result<Option<f64>, RowError> {
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| RowError::Invalid(field))?;
    if !v.is_finite() || v < 0.0 {
        return Err(RowError::OutOfRange(field));
    }
    Ok(Some(v))
}

fn opt_fraction(s: &str, field: &'static str) -> Result<Option<f64>, RowError> {
    match opt_nonneg(s, field)? {
        Some(v) if v > 1.0 => Err(RowError::OutOfRange(field)),
        other => Ok(other),
    }
}

fn event_type(s: &str) -> Result<EventType, RowError> {
    if s.is_empty() {
        return Err(RowError::Missing("event_type"));
    }
    s.parse::<u8>()
        .ok()
        .and_then(EventType::from_code)
        .ok_or_else(|| RowError::UnknownEventCode(s.to_string()))
}

impl Timestamped for JobEvent {
    fn timestamp(&self) -> Timestamp {
        self.time
    }
}

impl TraceRow for JobEvent {
    const TABLE: Table = Table::JobEvents;

    fn parse(r: &StringRecord, c: &TableColumns) -> Result<Self, RowError> {
        let scheduling_class = match opt_u64(c.get(r, 5), "scheduling_class")? {
            None => 0,
            Some(v) if v <= 3 => v as u8,
            Some(_) => return Err(RowError::OutOfRange("scheduling_class")),
        };
        Ok(JobEvent {
            time: req_time(c.get(r, 0), "timestamp")?,
            job_id: req_u64(c.get(r, 2), "job_id")?,
            event_type: event_type(c.get(r, 3))?,
            user: c.get(r, 4).to_string(),
            scheduling_class,
            job_name: c.get(r, 6).to_string(),
        })
    }
}

impl Timestamped for TaskEvent {
    fn timestamp(&self) -> Timestamp {
        self.time
    }
}

impl TraceRow for TaskEvent {
    const TABLE: Table = Table::TaskEvents;

    fn parse(r: &StringRecord, c: &TableColumns) -> Result<Self, RowError> {
        Ok(TaskEvent {
            time: req_time(c.get(r, 0), "timestamp")?,
            job_id: req_u64(c.get(r, 2), "job_id")?,
            task_index: req_u32(c.get(r, 3), "task_index")?,
            machine_id: opt_u64(c.get(r, 4), "machine_id")?,
            event_type: event_type(c.get(r, 5))?,
            priority: opt_u64(c.get(r, 8), "priority")?
                .map(|p| u32::try_from(p).map_err(|_| RowError::OutOfRange("priority")))
                .transpose()?
                .unwrap_or(0),
            cpu_request: opt_fraction(c.get(r, 9), "cpu_request")?,
            memory_request: opt_fraction(c.get(r, 10), "memory_request")?,
            disk_request: opt_fraction(c.get(r, 11), "disk_request")?,
        })
    }
}

impl Timestamped for TaskUsage {
    fn timestamp(&self) -> Timestamp {
        self.start_time
    }
}

impl TraceRow for TaskUsage {
    const TABLE: Table = Table::TaskUsage;

    fn parse(r: &StringRecord, c: &TableColumns) -> Result<Self, RowError> {
        let start_time = req_time(c.get(r, 0), "start_time")?;
        let end_time = req_time(c.get(r, 1), "end_time")?;
        match end_time.since(start_time) {
            Some(d) if d > 0 => {}
            _ => return Err(RowError::EmptyInterval),
        }
        Ok(TaskUsage {
            start_time,
            end_time,
            job_id: req_u64(c.get(r, 2), "job_id")?,
            task_index: req_u32(c.get(r, 3), "task_index")?,
            machine_id: opt_u64(c.get(r, 4), "machine_id")?,
            cpu_rate: opt_nonneg(c.get(r, 5), "cpu_rate")?,
            canonical_memory: opt_nonneg(c.get(r, 6), "canonical_memory")?,
            assigned_memory: opt_nonneg(c.get(r, 7), "assigned_memory")?,
            page_cache_total: opt_nonneg(c.get(r, 9), "total_page_cache")?,
            disk_io_time: opt_nonneg(c.get(r, 11), "mean_disk_io_time")?,
            local_disk_space: opt_nonneg(c.get(r, 12), "mean_local_disk_space")?,
            cycles_per_instruction: opt_nonneg(c.get(r, 15), "cpi")?,
            memory_accesses_per_instruction: opt_nonneg(c.get(r, 16), "mai")?,
        })
    }
}

impl Timestamped for MachineEvent {
    fn timestamp(&self) -> Timestamp {
        self.time
    }
}

impl TraceRow for MachineEvent {
    const TABLE: Table = Table::MachineEvents;

    fn parse(r: &StringRecord, c: &TableColumns) -> Result<Self, RowError> {
        let code = c.get(r, 2);
        let event_type = code
            .parse::<u8>()
            .ok()
            .and_then(MachineEventType::from_code)
            .ok_or_else(|| RowError::UnknownEventCode(code.to_string()))?;
        Ok(MachineEvent {
            time: req_time(c.get(r, 0), "timestamp")?,
            machine_id: req_u64(c.get(r, 1), "machine_id")?,
            event_type,
            platform: c.get(r, 3).to_string(),
            cpu_capacity: opt_fraction(c.get(r, 4), "cpu_capacity")?,
            memory_capacity: opt_fraction(c.get(r, 5), "memory_capacity")?,
        })
    }
}
