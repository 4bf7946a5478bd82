//! Aggregation of job events and task usage into [`JobRecord`]s.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::exact::WeightedMean;
use super::IngestError;
use crate::trace_model::{EventType, JobEvent, JobRecord, TaskUsage, TerminalEvent, Timestamp};

#[derive(Debug, Clone, Default)]
struct JobState {
    in_events: bool,
    first_submit: Option<u64>,
    first_schedule: Option<u64>,
    first_terminal: Option<(u64, TerminalEvent)>,
    cpu: WeightedMean,
    memory: WeightedMean,
    tasks: HashSet<u32>,
}

fn min_opt<T: Ord + Copy>(a: Option<T>, b: Option<T>) -> Option<T> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn terminal_rank(t: TerminalEvent) -> u8 {
    t as u8
}

fn earlier_terminal(a: Option<(u64, TerminalEvent)>, b: Option<(u64, TerminalEvent)>) -> Option<(u64, TerminalEvent)> {
    match (a, b) {
        (Some(x), Some(y)) => {
            if (x.0, terminal_rank(x.1)) <= (y.0, terminal_rank(y.1)) {
                Some(x)
            } else {
                Some(y)
            }
        }
        (x, None) => x,
        (None, y) => y,
    }
}

impl JobState {
    fn merge(&mut self, other: JobState) {
        self.in_events |= other.in_events;
        self.first_submit = min_opt(self.first_submit, other.first_submit);
        self.first_schedule = min_opt(self.first_schedule, other.first_schedule);
        self.first_terminal = earlier_terminal(self.first_terminal, other.first_terminal);
        self.cpu.merge(&other.cpu);
        self.memory.merge(&other.memory);
        self.tasks.extend(other.tasks);
    }
}

/// Partial per-job aggregate. Merging is associative and commutative, so
/// part files can be folded in any order or in parallel.
#[derive(Debug, Clone, Default)]
pub struct JobAccumulator {
    jobs: HashMap<u64, JobState>,
}

/// Result of [`build_job_table`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JobTable {
    /// One record per job with a SUBMIT, sorted by `job_id`.
    pub records: Vec<JobRecord>,
    /// Jobs seen in job events without any SUBMIT.
    pub jobs_without_submit: u64,
    /// Records whose terminal event is CENSORED.
    pub censored_jobs: u64,
    /// Jobs with usage rows but no job events.
    pub usage_only_jobs: u64,
}

impl JobAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn distinct_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn add_event(&mut self, ev: &JobEvent) {
        let state = self.jobs.entry(ev.job_id).or_default();
        state.in_events = true;
        let Some(t) = ev.time.micros() else { return };
        match ev.event_type {
            EventType::Submit => state.first_submit = min_opt(state.first_submit, Some(t)),
            EventType::Schedule => state.first_schedule = min_opt(state.first_schedule, Some(t)),
            other => {
                if let Some(term) = other.terminal() {
                    state.first_terminal = earlier_terminal(state.first_terminal, Some((t, term)));
                }
            }
        }
    }

    pub fn add_usage(&mut self, row: &TaskUsage) {
        let weight = row.duration();
        let state = self.jobs.entry(row.job_id).or_default();
        state.tasks.insert(row.task_index);
        if let Some(cpu) = row.cpu_rate {
            state.cpu.add(weight, cpu);
        }
        if let Some(mem) = row.canonical_memory {
            state.memory.add(weight, mem);
        }
    }

    pub fn merge(&mut self, other: JobAccumulator) {
        if self.jobs.len() < other.jobs.len() {
            let mine = std::mem::replace(&mut self.jobs, other.jobs);
            for (id, state) in mine {
                self.jobs.entry(id).or_default().merge(state);
            }
        } else {
            for (id, state) in other.jobs {
                self.jobs.entry(id).or_default().merge(state);
            }
        }
    }

    pub fn finish(self) -> JobTable {
        let mut table = JobTable::default();
        for (job_id, state) in self.jobs {
            if !state.in_events {
                table.usage_only_jobs += 1;
                continue;
            }
            let Some(submit) = state.first_submit else {
                table.jobs_without_submit += 1;
                continue;
            };
            let terminal_event = state.first_terminal.map(|(_, k)| k).unwrap_or(TerminalEvent::Censored);
            let runtime = match (state.first_schedule, state.first_terminal) {
                (Some(start), Some((end, kind))) if kind.has_runtime() => {
                    end.checked_sub(start).filter(|&d| d > 0)
                }
                _ => None,
            };
            if terminal_event == TerminalEvent::Censored {
                table.censored_jobs += 1;
            }
            table.records.push(JobRecord {
                job_id,
                arrival_time: Timestamp::from_micros(submit),
                runtime,
                mean_cpu: state.cpu.mean(),
                mean_memory: state.memory.mean(),
                task_count: state.tasks.len() as u32,
                terminal_event,
            });
        }
        table.records.sort_unstable_by_key(|r| r.job_id);
        table
    }
}

/// Folds a job-event stream and a task-usage stream into per-job records.
///
/// Both inputs are consumed in one pass; memory grows with the number of
/// distinct jobs (and their task indices), never with row count. The first
/// fatal error from either stream is returned.
pub fn build_job_table<J, U>(job_events: J, task_usage: U) -> Result<JobTable, IngestError>
where
    J: IntoIterator<Item = Result<JobEvent, IngestError>>,
    U: IntoIterator<Item = Result<TaskUsage, IngestError>>,
{
    let mut acc = JobAccumulator::new();
    for ev in job_events {
        acc.add_event(&ev?);
    }
    for row in task_usage {
        acc.add_usage(&row?);
    }
    Ok(acc.finish())
}

/// Sorted consecutive differences of job arrival times, in microseconds.
pub fn interarrival_times(records: &[JobRecord]) -> Result<Vec<u64>, IngestError> {
    let mut arrivals: Vec<u64> = records.iter().filter_map(|r| r.arrival_time.micros()).collect();
    if arrivals.len() < 2 {
        return Err(IngestError::InvalidArgument(format!(
            "interarrival times need at least 2 arrivals, got {}",
            arrivals.len()
        )));
    }
    arrivals.sort_unstable();
    Ok(arrivals.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Writes records as CSV with a header row.
pub fn write_job_csv<W: Write>(out: W, records: &[JobRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record([
            "job_id",
            "arrival_time",
            "runtime",
            "mean_cpu",
            "mean_memory",
            "task_count",
            "terminal_event",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_job_csv<R: Read>(input: R) -> Result<Vec<JobRecord>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: u64, job: u64, kind: EventType) -> Result<JobEvent, IngestError> {
        Ok(JobEvent {
            time: Timestamp::from_micros(t),
            job_id: job,
            event_type: kind,
            scheduling_class: 0,
            user: String::new(),
            job_name: String::new(),
        })
    }

    fn usage(start: u64, end: u64, job: u64, task: u32, cpu: Option<f64>, mem: Option<f64>) -> Result<TaskUsage, IngestError> {
        Ok(TaskUsage {
            start_time: Timestamp::from_micros(start),
            end_time: Timestamp::from_micros(end),
            job_id: job,
            task_index: task,
            machine_id: None,
            cpu_rate: cpu,
            canonical_memory: mem,
            assigned_memory: None,
            page_cache_total: None,
            disk_io_time: None,
            local_disk_space: None,
            cycles_per_instruction: None,
            memory_accesses_per_instruction: None,
        })
    }

    #[test]
    fn single_job_aggregation() {
        let events = vec![ev(10, 1, EventType::Submit), ev(20, 1, EventType::Schedule), ev(50, 1, EventType::Finish)];
        let rows = vec![usage(20, 50, 1, 0, Some(0.4), Some(0.1))];
        let table = build_job_table(events, rows).unwrap();
        assert_eq!(table.records.len(), 1);
        let r = &table.records[0];
        assert_eq!(r.arrival_time, Timestamp::from_micros(10));
        assert_eq!(r.runtime, Some(30));
        assert_eq!(r.mean_cpu, Some(0.4));
        assert_eq!(r.task_count, 1);
        assert_eq!(r.terminal_event, TerminalEvent::Finish);
    }

    #[test]
    fn duration_weighted_mean() {
        let events = vec![ev(0, 1, EventType::Submit)];
        let rows = vec![usage(0, 10, 1, 0, Some(0.2), None), usage(10, 40, 1, 1, Some(0.6), None)];
        let r = &build_job_table(events, rows).unwrap().records[0];
        assert!((r.mean_cpu.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(r.mean_memory, None);
        assert_eq!(r.task_count, 2);
        assert_eq!(r.terminal_event, TerminalEvent::Censored);
        assert_eq!(r.runtime, None);
    }

    #[test]
    fn missing_resource_contributes_zero_weight() {
        let events = vec![ev(0, 1, EventType::Submit)];
        let rows = vec![usage(0, 10, 1, 0, Some(0.2), Some(0.3)), usage(10, 40, 1, 0, None, Some(0.3))];
        let r = &build_job_table(events, rows).unwrap().records[0];
        assert_eq!(r.mean_cpu, Some(0.2));
        assert_eq!(r.mean_memory, Some(0.3));
    }

    #[test]
    fn terminal_without_schedule_keeps_event_but_no_runtime() {
        let events = vec![ev(5, 3, EventType::Submit), ev(9, 3, EventType::Kill)];
        let r = &build_job_table(events, Vec::new()).unwrap().records[0];
        assert_eq!(r.runtime, None);
        assert_eq!(r.terminal_event, TerminalEvent::Kill);
        assert_eq!(r.task_count, 0);
        assert_eq!(r.mean_cpu, None);
    }

    #[test]
    fn job_without_submit_is_skipped_and_counted() {
        let events = vec![ev(5, 3, EventType::Schedule), ev(9, 3, EventType::Finish), ev(1, 4, EventType::Submit)];
        let table = build_job_table(events, Vec::new()).unwrap();
        assert_eq!(table.records.len(), 1);
        assert_eq!(table.records[0].job_id, 4);
        assert_eq!(table.jobs_without_submit, 1);
        assert_eq!(table.censored_jobs, 1);
    }

    #[test]
    fn resubmission_keeps_first_submit() {
        let events = vec![
            ev(100, 1, EventType::Submit),
            ev(110, 1, EventType::Schedule),
            ev(150, 1, EventType::Evict),
            ev(160, 1, EventType::Submit),
            ev(170, 1, EventType::Schedule),
            ev(300, 1, EventType::Finish),
        ];
        let r = &build_job_table(events, Vec::new()).unwrap().records[0];
        assert_eq!(r.arrival_time, Timestamp::from_micros(100));
        assert_eq!(r.runtime, Some(190));
    }

    #[test]
    fn lost_jobs_have_no_runtime() {
        let events = vec![ev(0, 1, EventType::Submit), ev(1, 1, EventType::Schedule), ev(9, 1, EventType::Lost)];
        let r = &build_job_table(events, Vec::new()).unwrap().records[0];
        assert_eq!(r.terminal_event, TerminalEvent::Lost);
        assert_eq!(r.runtime, None);
    }

    #[test]
    fn usage_only_jobs_are_not_records() {
        let table = build_job_table(Vec::new(), vec![usage(0, 5, 9, 0, Some(0.1), Some(0.1))]).unwrap();
        assert!(table.records.is_empty());
        assert_eq!(table.usage_only_jobs, 1);
    }

    #[test]
    fn fatal_error_propagates() {
        let events: Vec<Result<JobEvent, IngestError>> =
            vec![Err(IngestError::InvalidArgument("boom".into()))];
        assert!(build_job_table(events, Vec::new()).is_err());
    }

    fn with_arrivals(arrivals: &[u64]) -> Vec<JobRecord> {
        arrivals
            .iter()
            .enumerate()
            .map(|(i, &a)| JobRecord {
                job_id: i as u64,
                arrival_time: Timestamp::from_micros(a),
                runtime: None,
                mean_cpu: None,
                mean_memory: None,
                task_count: 0,
                terminal_event: TerminalEvent::Censored,
            })
            .collect()
    }

    #[test]
    fn interarrivals() {
        assert_eq!(interarrival_times(&with_arrivals(&[0, 0, 0])).unwrap(), vec![0, 0]);
        assert_eq!(interarrival_times(&with_arrivals(&[10, 3, 7])).unwrap(), vec![4, 3]);
        assert!(interarrival_times(&with_arrivals(&[10])).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut recs = with_arrivals(&[5, 17]);
        recs[0].runtime = Some(44);
        recs[0].mean_cpu = Some(0.1 + 0.2);
        recs[0].mean_memory = Some(1.0 / 3.0);
        recs[0].task_count = 3;
        recs[0].terminal_event = TerminalEvent::Finish;
        let mut buf = Vec::new();
        write_job_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("job_id,arrival_time,runtime,mean_cpu,mean_memory,task_count,terminal_event\n"));
        assert_eq!(read_job_csv(&buf[..]).unwrap(), recs);

        let mut empty = Vec::new();
        write_job_csv(&mut empty, &[]).unwrap();
        assert_eq!(empty.iter().filter(|&&b| b == b'\n').count(), 1);
        assert!(read_job_csv(&empty[..]).unwrap().is_empty());
    }
}
