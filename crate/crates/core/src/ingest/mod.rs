//! Streaming ingestion of trace tables and per-job aggregation.
//!
//! Tables live under `<root>/<table>/part-NNNNN-of-MMMMM.csv[.gz]`: headerless
//! CSV, gzip detected by magic bytes, empty field = missing value.

mod columns;
pub mod exact;
mod jobs;
mod stream;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use columns::{
    ColumnMap, RowError, Table, TableColumns, Timestamped, TraceRow, JOB_EVENT_FIELDS,
    MACHINE_EVENT_FIELDS, TASK_EVENT_FIELDS, TASK_USAGE_FIELDS,
};
pub use jobs::{build_job_table, interarrival_times, read_job_csv, write_job_csv, JobAccumulator, JobTable};
pub use stream::{part_files, TableStats, TableStream};

use crate::trace_model::{JobEvent, TaskUsage, Timestamp};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("column map: {0}")]
    ColumnMap(String),
}

/// Opens a row stream over one table. Equivalent to [`TableStream::open`].
pub fn open_table<T: TraceRow>(root: &Path, columns: &ColumnMap) -> Result<TableStream<T>, IngestError> {
    TableStream::open(root, columns.table(T::TABLE))
}

/// Half-open time window `[start, end)` in microseconds; `end = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: u64,
    pub end: Option<u64>,
}

impl TimeWindow {
    pub const ALL: TimeWindow = TimeWindow { start: 0, end: None };

    pub fn new(start: u64, end: Option<u64>) -> Result<Self, IngestError> {
        if let Some(end) = end {
            if start > end {
                return Err(IngestError::InvalidArgument(format!(
                    "window start {start} is after window end {end}"
                )));
            }
        }
        Ok(TimeWindow { start, end })
    }

    /// Missing timestamps are never inside a window.
    pub fn contains(&self, t: Timestamp) -> bool {
        match t.micros() {
            None => false,
            Some(us) => us >= self.start && self.end.map_or(true, |end| us < end),
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.start == 0 && self.end.is_none()
    }
}

impl<T: Timestamped, E> Timestamped for Result<T, E> {
    /// Errors are passed through the filter, so they report time 0.
    fn timestamp(&self) -> Timestamp {
        match self {
            Ok(row) => row.timestamp(),
            Err(_) => Timestamp::from_micros(0),
        }
    }
}

/// Iterator adapter returned by [`filter_window`].
pub struct WindowFilter<I> {
    inner: I,
    window: TimeWindow,
    dropped: u64,
}

impl<I> WindowFilter<I> {
    /// Rows removed because they fell outside the window.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn into_inner(self) -> I {
        self.inner
    }

    pub fn inner(&self) -> &I {
        &self.inner
    }
}

impl<T, E, I> Iterator for WindowFilter<I>
where
    T: Timestamped,
    I: Iterator<Item = Result<T, E>>,
{
    type Item = Result<T, E>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.inner.next()? {
                Ok(row) if !self.window.contains(row.timestamp()) => self.dropped += 1,
                item => return Some(item),
            }
        }
    }
}

/// Keeps rows whose timestamp (start time for usage rows) lies in `[start, end)`.
pub fn filter_window<I>(rows: I, start: u64, end: Option<u64>) -> Result<WindowFilter<I::IntoIter>, IngestError>
where
    I: IntoIterator,
{
    Ok(WindowFilter { inner: rows.into_iter(), window: TimeWindow::new(start, end)?, dropped: 0 })
}

/// Options for [`ingest_directory`].
#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub columns: ColumnMap,
    pub window: Option<TimeWindow>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowedStats {
    #[serde(flatten)]
    pub table: TableStats,
    /// Valid rows dropped by the time window.
    pub rows_outside_window: u64,
}

/// Row and job accounting for one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub job_events: WindowedStats,
    pub task_usage: WindowedStats,
    pub jobs: u64,
    pub censored_jobs: u64,
    pub jobs_without_submit: u64,
    pub usage_only_jobs: u64,
    pub window: Option<TimeWindow>,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOutput {
    pub table: JobTable,
    pub stats: IngestStats,
}

fn fold_files<T, F>(
    files: &[PathBuf],
    columns: &TableColumns,
    window: TimeWindow,
    add: F,
) -> Result<(JobAccumulator, WindowedStats), IngestError>
where
    T: TraceRow,
    F: Fn(&mut JobAccumulator, &T) + Sync,
{
    files
        .par_iter()
        .map(|file| {
            let mut acc = JobAccumulator::new();
            let mut rows = filter_window(TableStream::<T>::from_files(vec![file.clone()], columns), window.start, window.end)?;
            for row in rows.by_ref() {
                add(&mut acc, &row?);
            }
            let dropped = rows.dropped();
            let stats = WindowedStats { table: rows.into_inner().into_stats(), rows_outside_window: dropped };
            Ok((acc, stats))
        })
        .try_reduce(
            || (JobAccumulator::new(), WindowedStats::default()),
            |(mut acc, mut stats), (other_acc, other_stats)| {
                acc.merge(other_acc);
                stats.table.merge(&other_stats.table);
                stats.rows_outside_window += other_stats.rows_outside_window;
                Ok((acc, stats))
            },
        )
}

/// Reads job events and task usage under `root` and builds the job table.
///
/// Part files are parsed in parallel on the current rayon pool; each file
/// yields a partial aggregate and the partials are merged. The merge is
/// exact, so the result does not depend on file order or thread count.
pub fn ingest_directory(root: &Path, options: &IngestOptions) -> Result<IngestOutput, IngestError> {
    let window = options.window.unwrap_or(TimeWindow::ALL);
    let event_files = part_files(root, Table::JobEvents)?;
    let usage_files = part_files(root, Table::TaskUsage)?;

    let (mut acc, event_stats) = fold_files::<JobEvent, _>(
        &event_files,
        options.columns.table(Table::JobEvents),
        window,
        |acc, ev| acc.add_event(ev),
    )?;
    let (usage_acc, usage_stats) = fold_files::<TaskUsage, _>(
        &usage_files,
        options.columns.table(Table::TaskUsage),
        window,
        |acc, row| acc.add_usage(row),
    )?;
    acc.merge(usage_acc);
    let table = acc.finish();
    let stats = IngestStats {
        job_events: event_stats,
        task_usage: usage_stats,
        jobs: table.records.len() as u64,
        censored_jobs: table.censored_jobs,
        jobs_without_submit: table.jobs_without_submit,
        usage_only_jobs: table.usage_only_jobs,
        window: options.window,
    };
    Ok(IngestOutput { table, stats })
}
