use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tracelens_core::cluster::{
    classify_jobs, cluster_arrivals, distinct_count, label_classes, sweep_k, usage_points, ClusterConfig, ClusterError,
    ClusterModel, MinMaxScaler, Point,
};
use tracelens_core::distfit::{ecdf, fit_pareto_tail, fit_weibull, fit_zipf, tail_skewness_report, FitError};
use tracelens_core::ingest::{
    ingest_directory, interarrival_times, read_job_csv, write_job_csv, ColumnMap, IngestOptions, IngestStats,
    TimeWindow,
};
use tracelens_core::synth::{emit_trace, gen_job_stream, SynthesisSpec};
use tracelens_core::trace_model::{DistributionParams, FittedDistribution, JobRecord, TerminalEvent};

use crate::error::{CliError, CliResult};
use crate::plots;
use crate::report::*;

pub const JOBS_FILE: &str = "jobs.csv";
pub const INGEST_STATS_FILE: &str = "ingest_stats.json";
pub const REPORT_FILE: &str = "report.json";
/// Arrival threshold of the arrival-rate model, taken to be in seconds.
const ARRIVAL_THRESHOLD_SECS: f64 = 5.0;

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone)]
pub struct IngestArgs {
    pub trace_root: PathBuf,
    pub out: PathBuf,
    pub window_start: Option<u64>,
    pub window_end: Option<u64>,
    pub colmap: Option<PathBuf>,
}

/// Returns the paths of the job table and the stats file.
pub fn run_ingest(args: &IngestArgs) -> CliResult<Vec<PathBuf>> {
    let columns = match &args.colmap {
        Some(p) => ColumnMap::from_file(p)?,
        None => ColumnMap::default(),
    };
    let window = match (args.window_start, args.window_end) {
        (None, None) => None,
        (start, end) => Some(TimeWindow::new(start.unwrap_or(0), end)?),
    };
    let out = ingest_directory(&args.trace_root, &IngestOptions { columns, window })?;
    let s = &out.stats;
    info!(
        "ingested {} jobs ({} job-event rows, {} usage rows, {} skipped)",
        s.jobs,
        s.job_events.table.rows_read,
        s.task_usage.table.rows_read,
        s.job_events.table.rows_skipped + s.task_usage.table.rows_skipped
    );
    if s.jobs_without_submit > 0 {
        warn!("{} jobs had no SUBMIT event and were dropped", s.jobs_without_submit);
    }

    create_dir(&args.out)?;
    let jobs_path = args.out.join(JOBS_FILE);
    let file = fs::File::create(&jobs_path).map_err(|e| CliError::io(&jobs_path, e))?;
    write_job_csv(std::io::BufWriter::new(file), &out.table.records).map_err(|e| CliError::io(&jobs_path, e))?;
    let stats_path = args.out.join(INGEST_STATS_FILE);
    write_json(&stats_path, &out.stats)?;
    Ok(vec![jobs_path, stats_path])
}

#[derive(Debug, Clone)]
pub struct GenerateArgs {
    pub spec: PathBuf,
    pub out_dir: PathBuf,
}

/// Returns the manifest path.
pub fn run_generate(args: &GenerateArgs) -> CliResult<PathBuf> {
    let text = fs::read_to_string(&args.spec).map_err(|e| CliError::io(&args.spec, e))?;
    let spec = SynthesisSpec::from_str_validated(&text)?;
    let trace = gen_job_stream(&spec)?;
    create_dir(&args.out_dir)?;
    let manifest = emit_trace(&trace, &spec, &args.out_dir)?;
    info!(
        "generated {} jobs: {} job-event rows, {} usage rows",
        manifest.job_count, manifest.job_event_rows, manifest.task_usage_rows
    );
    if manifest.clamp_events > 0 {
        warn!("{} resource draws were clamped to [0, 1]", manifest.clamp_events);
    }
    Ok(args.out_dir.join("manifest.json"))
}

#[derive(Debug, Clone)]
pub struct AnalyzeArgs {
    pub jobs: PathBuf,
    pub out_dir: PathBuf,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
}

pub struct AnalyzeOutput {
    pub report: Report,
    pub report_path: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Independent stream per analysis so that sections don't perturb each other.
fn section_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn cluster_section<T>(e: ClusterError) -> Section<T> {
    match e {
        ClusterError::InsufficientData { .. } | ClusterError::Degenerate(_) => Section::insufficient(e.to_string()),
        other => Section::error(other.to_string()),
    }
}

fn fit_section<T>(e: FitError) -> Section<T> {
    match e {
        FitError::TooFewSamples { .. } | FitError::TooFewTailSamples { .. } => Section::insufficient(e.to_string()),
        other => Section::error(other.to_string()),
    }
}

pub fn run_analyze(args: &AnalyzeArgs) -> CliResult<AnalyzeOutput> {
    if args.k_min < 2 || args.k_min > args.k_max {
        return Err(CliError::usage(format!("k range {}..={} must satisfy 2 <= k-min <= k-max", args.k_min, args.k_max)));
    }
    if args.restarts == 0 {
        return Err(CliError::usage("--restarts must be positive"));
    }
    let file = fs::File::open(&args.jobs).map_err(|e| CliError::io(&args.jobs, e))?;
    let records = read_job_csv(std::io::BufReader::new(file))
        .map_err(|e| CliError::usage(format!("{}: malformed job table: {e}", args.jobs.display())))?;
    info!("analyzing {} jobs", records.len());
    create_dir(&args.out_dir)?;
    let cfg = ClusterConfig { restarts: args.restarts, ..ClusterConfig::default() };
    let mut files = Vec::new();
    let mut annotations = Vec::new();

    let ingest_stats = ingest_section(&records, &args.jobs)?;

    let (k_sweep, swept_three) = usage_sweep(&records, args, &cfg);
    // a sweep that covered k = 3 already holds the classification model
    let classified = match swept_three {
        Some(model) => {
            let (points, excluded) = usage_points(&records);
            label_classes(&points, excluded, model)
        }
        None => classify_jobs(&records, &mut section_rng(args.seed, 1), &cfg),
    };
    let job_classes = match classified {
        Ok(c) => {
            files.push(plots::write_job_classes(&args.out_dir.join("job_classes.csv"), &c.labels)?);
            Section::ok(JobClassesBody {
                classes: c
                    .classes
                    .iter()
                    .map(|s| ClassEntry {
                        label: s.label,
                        count: s.count,
                        share: s.share,
                        center: UsageCenter { cpu: s.center[0], memory: s.center[1] },
                    })
                    .collect(),
                excluded_jobs: c.excluded,
                wcss: c.model.wcss,
                silhouette: c.model.silhouette_mean,
                silhouette_sampled: c.model.silhouette_sampled,
                iterations: c.model.iterations,
            })
        }
        Err(e) => cluster_section(e),
    };

    let arrival_clusters = arrival_section(&records, args, &cfg, &mut files)?;
    let fits = fit_all(&records, &args.out_dir, &mut files, &mut annotations)?;

    let early = records
        .iter()
        .filter(|r| r.arrival_time.as_secs_f64().is_some_and(|t| t <= ARRIVAL_THRESHOLD_SECS))
        .count();
    annotations.push(Annotation {
        id: "arrival_threshold".into(),
        text: format!(
            "The arrival-rate model distinguishes jobs with arrival time T <= 5; the unit is unstated and taken as \
             seconds since trace start. Reported only, not used by any fit: {early} of {} jobs arrive by T = 5 s.",
            records.len()
        ),
    });
    annotations.push(Annotation {
        id: "usage_rank_quantity".into(),
        text: "Zipf fits rank per-job duration-weighted mean usage, cpu and memory separately; jobs with zero or \
               missing usage are left out."
            .into(),
    });

    let report = Report {
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        ingest_stats,
        job_classes,
        k_sweep,
        arrival_clusters,
        fits,
        annotations,
    };
    let value = serde_json::to_value(&report).map_err(|e| CliError::internal(e.to_string()))?;
    validate_report(&value)?;
    let report_path = args.out_dir.join(REPORT_FILE);
    write_json(&report_path, &value)?;
    Ok(AnalyzeOutput { report, report_path, files })
}

fn ingest_section(records: &[JobRecord], jobs_path: &Path) -> CliResult<IngestSection> {
    let stats_path = jobs_path.with_file_name(INGEST_STATS_FILE);
    let trace = if stats_path.is_file() {
        let text = fs::read_to_string(&stats_path).map_err(|e| CliError::io(&stats_path, e))?;
        match serde_json::from_str::<IngestStats>(&text) {
            Ok(s) => Some(s),
            Err(e) => {
                warn!("ignoring {}: {e}", stats_path.display());
                None
            }
        }
    } else {
        None
    };
    Ok(IngestSection {
        jobs: records.len() as u64,
        jobs_with_usage: records.iter().filter(|r| r.usage().is_some()).count() as u64,
        jobs_with_runtime: records.iter().filter(|r| r.runtime.is_some()).count() as u64,
        censored_jobs: records.iter().filter(|r| r.terminal_event == TerminalEvent::Censored).count() as u64,
        trace,
    })
}

/// The usage k sweep, plus its k = 3 model when the sweep covered it.
fn usage_sweep(records: &[JobRecord], args: &AnalyzeArgs, cfg: &ClusterConfig) -> (Section<KSweepBody>, Option<ClusterModel>) {
    let (points, _) = usage_points(records);
    if points.is_empty() {
        return (Section::insufficient("no jobs with usage"), None);
    }
    let distinct = distinct_count(&points);
    if distinct < args.k_min {
        return (Section::insufficient(format!("{distinct} distinct usage points, need at least {}", args.k_min)), None);
    }
    let k_max = args.k_max.min(distinct);
    let normalized = MinMaxScaler::fit(&points).transform_points(&points);
    match sweep_k(&normalized, args.k_min..=k_max, &mut section_rng(args.seed, 2), cfg) {
        Ok(models) => {
            let entries: Vec<SweepEntry> = models
                .iter()
                .map(|(k, m)| SweepEntry { k: *k, wcss: m.wcss, silhouette: m.silhouette_mean })
                .collect();
            let three = models.into_iter().find(|(k, _)| *k == 3).map(|(_, m)| m);
            (Section::ok(KSweepBody { k_min: args.k_min, k_max, best_k: best_by_silhouette(&entries), entries }), three)
        }
        Err(e) => (cluster_section(e), None),
    }
}

/// Highest silhouette, smallest k on ties.
fn best_by_silhouette(entries: &[SweepEntry]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for e in entries {
        if let Some(s) = e.silhouette {
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((e.k, s));
            }
        }
    }
    best.map(|(k, _)| k)
}

fn arrival_section(
    records: &[JobRecord],
    args: &AnalyzeArgs,
    cfg: &ClusterConfig,
    files: &mut Vec<PathBuf>,
) -> CliResult<Section<ArrivalBody>> {
    let arrivals: Vec<(u64, f64)> =
        records.iter().filter_map(|r| r.arrival_time.as_secs_f64().map(|t| (r.job_id, t))).collect();
    let points: Vec<Point> = arrivals.iter().map(|&(_, t)| Point::new(vec![t])).collect();
    let distinct = if points.is_empty() { 0 } else { distinct_count(&points) };
    if distinct < args.k_min {
        return Ok(Section::insufficient(format!("{distinct} distinct arrival times, need at least {}", args.k_min)));
    }
    let mut rng = section_rng(args.seed, 3);
    let mut sweep = Vec::new();
    let mut best = None;
    for k in args.k_min..=args.k_max.min(distinct) {
        let clusters = match cluster_arrivals(records, k, &mut rng, cfg) {
            Ok(c) => c,
            Err(e) => return Ok(cluster_section(e)),
        };
        let entry = SweepEntry { k, wcss: clusters.model.wcss, silhouette: clusters.model.silhouette_mean };
        let better = match (&best, entry.silhouette) {
            (None, _) => true,
            (Some((s, _)), Some(v)) => v > *s,
            (Some(_), None) => false,
        };
        if better {
            best = Some((entry.silhouette.unwrap_or(f64::NEG_INFINITY), clusters));
        }
        sweep.push(entry);
    }
    let (_, chosen) = best.expect("k range is non-empty");
    let rows: Vec<(u64, f64, usize)> =
        arrivals.iter().zip(&chosen.model.assignment).map(|(&(id, t), &c)| (id, t, c)).collect();
    files.push(plots::write_arrival_clusters(&args.out_dir.join("arrival_clusters.csv"), &rows)?);
    Ok(Section::ok(ArrivalBody {
        k: chosen.model.k,
        silhouette: chosen.model.silhouette_mean,
        sweep,
        clusters: chosen.extents,
    }))
}

fn fit_all(
    records: &[JobRecord],
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
    annotations: &mut Vec<Annotation>,
) -> CliResult<Fits> {
    let interarrival = match interarrival_times(records) {
        Ok(gaps) => {
            let secs: Vec<f64> = gaps.iter().map(|&us| us as f64 / 1e6).collect();
            match fit_weibull(&secs) {
                Ok(fit) => {
                    if let DistributionParams::Weibull { shape, scale } = fit.params {
                        let e = ecdf(&secs).map_err(|e| CliError::internal(e.to_string()))?;
                        files.extend(plots::write_weibull_overlay(out_dir, "interarrival", &e, shape, scale)?);
                    }
                    Section::ok(FitBody { fit })
                }
                Err(e) => fit_section(e),
            }
        }
        Err(e) => Section::insufficient(e.to_string()),
    };

    let mut usage_fit = |name: &str, pick: fn(&JobRecord) -> Option<f64>| -> CliResult<Section<FitBody>> {
        let present: Vec<f64> = records.iter().filter_map(pick).collect();
        let values: Vec<f64> = present.iter().copied().filter(|v| *v > 0.0).collect();
        if values.len() < present.len() {
            annotations.push(Annotation {
                id: format!("{name}_zeros"),
                text: format!("{} jobs with zero {name} left out of the rank fit", present.len() - values.len()),
            });
        }
        Ok(match fit_zipf(&values) {
            Ok(fit) => {
                if let DistributionParams::Zipf { exponent, .. } = fit.params {
                    let path = out_dir.join(format!("{name}_rank_frequency.csv"));
                    files.push(plots::write_rank_frequency(&path, &values, exponent)?);
                }
                Section::ok(FitBody { fit })
            }
            Err(e) => fit_section(e),
        })
    };
    let cpu_usage = usage_fit("cpu", |r| r.mean_cpu.filter(|v| v.is_finite()))?;
    let memory_usage = usage_fit("memory", |r| r.mean_memory.filter(|v| v.is_finite()))?;

    let runtimes: Vec<f64> = records.iter().filter_map(|r| r.runtime_secs()).collect();
    let runtime = match fit_pareto_tail(&runtimes) {
        Ok(fit) => {
            if let DistributionParams::ParetoTail { exponent, xmin, tail_count } = fit.params {
                let e = ecdf(&runtimes).map_err(|e| CliError::internal(e.to_string()))?;
                files.push(plots::write_cdf(&out_dir.join("runtime_ecdf.csv"), &e.curve(tracelens_core::distfit::OVERLAY_POINTS))?);
                files.push(plots::write_runtime_tail(&out_dir.join("runtime_tail.csv"), &e, exponent, xmin, tail_count)?);
            }
            note_heavy_tail(&fit, annotations);
            Section::ok(FitBody { fit })
        }
        Err(e) => fit_section(e),
    };
    let runtime_summary = match tail_skewness_report(&runtimes) {
        Ok(summary) => Section::ok(SummaryBody { summary }),
        Err(e) => fit_section(e),
    };
    Ok(Fits { interarrival, cpu_usage, memory_usage, runtime, runtime_summary })
}

fn note_heavy_tail(fit: &FittedDistribution, annotations: &mut Vec<Annotation>) {
    if !fit.flags.is_empty() {
        annotations.push(Annotation {
            id: "runtime_tail_flags".into(),
            text: "runtime tail exponent lies outside (0, 2]; the tail is not heavy in the infinite-variance sense"
                .into(),
        });
    }
}
