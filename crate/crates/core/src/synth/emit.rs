use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SynthError, SyntheticJob, SyntheticTrace, SynthesisSpec};
use crate::ingest::Table;
use crate::trace_model::EventType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub table: String,
    /// Relative to the output directory.
    pub path: String,
    pub rows: u64,
}

/// Description of an emitted trace, written next to it as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub job_count: u64,
    pub job_event_rows: u64,
    pub task_usage_rows: u64,
    pub clamp_events: u64,
    pub files: Vec<ManifestFile>,
    pub spec: SynthesisSpec,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.to_path_buf(), source }
}

fn part_name(shard: u32, shards: u32) -> String {
    format!("part-{shard:05}-of-{shards:05}.csv.gz")
}

/// `[SUBMIT, SCHEDULE, FINISH]` times. SCHEDULE follows SUBMIT by one
/// microsecond so the recovered runtime is exactly the drawn one.
fn event_times(job: &SyntheticJob) -> [u64; 3] {
    let submit = job.record.arrival_time.micros().expect("generated arrivals are present");
    let schedule = submit + 1;
    [submit, schedule, schedule + job.record.runtime.expect("generated runtimes are present")]
}

fn write_job_events<W: Write>(w: &mut W, jobs: &[&SyntheticJob]) -> std::io::Result<u64> {
    for job in jobs {
        let id = job.record.job_id;
        let times = event_times(job);
        for (t, ev) in times.into_iter().zip([EventType::Submit, EventType::Schedule, EventType::Finish]) {
            writeln!(w, "{t},,{id},{},synth,0,job{id},job{id}", ev.code())?;
        }
    }
    Ok(3 * jobs.len() as u64)
}

/// One usage row per task; the tasks split `[SCHEDULE, FINISH)` into
/// contiguous windows and all carry the job's usage, so the
/// duration-weighted mean recovers it exactly.
fn write_task_usage<W: Write>(w: &mut W, jobs: &[&SyntheticJob]) -> std::io::Result<u64> {
    let mut rows = 0;
    for job in jobs {
        let r = &job.record;
        let [_, start, end] = event_times(job);
        let span = end - start;
        let tasks = r.task_count.max(1) as u64;
        let cpu = r.mean_cpu.unwrap_or(0.0);
        let mem = r.mean_memory.unwrap_or(0.0);
        for t in 0..tasks {
            let a = start + (span as u128 * t as u128 / tasks as u128) as u64;
            let b = start + (span as u128 * (t + 1) as u128 / tasks as u128) as u64;
            writeln!(w, "{a},{b},{},{t},,{cpu},{mem},{mem},,,,,,,,,,,,", r.job_id)?;
        }
        rows += tasks;
    }
    Ok(rows)
}

fn write_part(
    path: &Path,
    jobs: &[&SyntheticJob],
    body: fn(&mut BufWriter<GzEncoder<File>>, &[&SyntheticJob]) -> std::io::Result<u64>,
) -> Result<u64, SynthError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(GzEncoder::new(file, Compression::default()));
    let rows = body(&mut w, jobs).map_err(io_err(path))?;
    let gz = w.into_inner().map_err(|e| SynthError::Io { path: path.to_path_buf(), source: e.into_error() })?;
    gz.finish().map_err(io_err(path))?;
    Ok(rows)
}

fn ensure_table_dir(dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        if entry.file_name().to_string_lossy().starts_with("part-") {
            return Err(SynthError::OutputNotEmpty(dir.to_path_buf()));
        }
    }
    Ok(())
}

/// Writes `trace` as gzipped `job_events` and `task_usage` part files
/// under `out_dir`, sharded by job id, plus `manifest.json`.
///
/// Output is byte-identical for identical inputs. Existing part files in
/// either table directory are an error rather than being overwritten.
pub fn emit_trace(trace: &SyntheticTrace, spec: &SynthesisSpec, out_dir: &Path) -> Result<Manifest, SynthError> {
    spec.validate()?;
    let shards = spec.output.shards;
    let tables = [Table::JobEvents, Table::TaskUsage];
    for t in tables {
        ensure_table_dir(&out_dir.join(t.dir_name()))?;
    }

    let mut by_shard: Vec<Vec<&SyntheticJob>> = vec![Vec::new(); shards as usize];
    for job in &trace.jobs {
        by_shard[(job.record.job_id % shards as u64) as usize].push(job);
    }

    let jobs_per_part: Vec<(Table, u32)> =
        tables.iter().flat_map(|&t| (0..shards).map(move |s| (t, s))).collect();
    let written: Vec<ManifestFile> = jobs_per_part
        .par_iter()
        .map(|&(table, shard)| {
            let rel: PathBuf = [table.dir_name(), &part_name(shard, shards)].iter().collect();
            let jobs = &by_shard[shard as usize];
            let rows = match table {
                Table::JobEvents => write_part(&out_dir.join(&rel), jobs, write_job_events)?,
                _ => write_part(&out_dir.join(&rel), jobs, write_task_usage)?,
            };
            Ok(ManifestFile {
                table: table.dir_name().to_string(),
                path: format!("{}/{}", table.dir_name(), part_name(shard, shards)),
                rows,
            })
        })
        .collect::<Result<_, SynthError>>()?;

    let rows_of = |t: Table| written.iter().filter(|f| f.table == t.dir_name()).map(|f| f.rows).sum();
    let manifest = Manifest {
        job_count: trace.jobs.len() as u64,
        job_event_rows: rows_of(Table::JobEvents),
        task_usage_rows: rows_of(Table::TaskUsage),
        clamp_events: trace.clamp_events,
        files: written,
        spec: spec.clone(),
    };
    let path = out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ingest_directory, IngestOptions};
    use crate::synth::{gen_job_stream, TasksKind, TasksSpec};

    #[test]
    fn round_trips_through_ingest() {
        let spec = SynthesisSpec {
            job_count: 300,
            tasks: TasksSpec { kind: TasksKind::Geometric, count: 1, p: 0.4 },
            output: crate::synth::OutputSpec { shards: 3 },
            ..Default::default()
        };
        let trace = gen_job_stream(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = emit_trace(&trace, &spec, dir.path()).unwrap();
        assert_eq!(manifest.files.len(), 6);
        assert_eq!(manifest.job_event_rows, 900);

        let out = ingest_directory(dir.path(), &IngestOptions::default()).unwrap();
        let recovered = &out.table.records;
        assert_eq!(recovered.len(), 300);
        for (got, want) in recovered.iter().zip(&trace.jobs) {
            assert_eq!(got, &want.record);
        }
    }

    #[test]
    fn refuses_to_mix_outputs() {
        let spec = SynthesisSpec { job_count: 5, ..Default::default() };
        let trace = gen_job_stream(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_trace(&trace, &spec, dir.path()).unwrap();
        assert!(matches!(emit_trace(&trace, &spec, dir.path()), Err(SynthError::OutputNotEmpty(_))));
    }
}
