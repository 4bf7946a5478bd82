//! Synthetic workload generation from fitted model parameters.

mod emit;
mod spec;

pub use emit::{emit_trace, Manifest, ManifestFile};
pub use spec::{
    ClassResources, OutputSpec, ResourceKind, ResourceSpec, RuntimeSpec, SynthesisSpec, TasksKind, TasksSpec,
    WeibullSpec, DEFAULT_RUNTIME_CAP_SECS,
};

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace_model::{JobClass, JobRecord, TerminalEvent, Timestamp};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec key `{key}`: {message}")]
    InvalidSpec { key: String, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} already contains trace part files")]
    OutputNotEmpty(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticJob {
    pub record: JobRecord,
    pub class: JobClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    /// In arrival order; job ids are `1..=job_count`.
    pub jobs: Vec<SyntheticJob>,
    /// Resource draws that fell outside `[0, 1]` and were clamped.
    pub clamp_events: u64,
}

/// `n` Weibull inter-arrival times in seconds by inverse-CDF sampling.
pub fn gen_interarrivals<R: Rng + ?Sized>(
    n: usize,
    shape: f64,
    scale: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SynthError> {
    if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
        return Err(SynthError::InvalidArgument(format!(
            "Weibull parameters must be positive and finite (shape = {shape}, scale = {scale})"
        )));
    }
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            scale * (-(-u).ln_1p()).powf(1.0 / shape)
        })
        .collect())
}

fn draw_class<R: Rng>(mix: &[f64; 3], rng: &mut R) -> JobClass {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for class in JobClass::ALL {
        acc += mix[class.index()];
        if u < acc {
            return class;
        }
    }
    // rounding left a sliver above the last boundary; give it to the last
    // class that has weight
    *JobClass::ALL.iter().rev().find(|c| mix[c.index()] > 0.0).expect("mix sums to 1")
}

fn draw_usage<R: Rng>(r: &ResourceSpec, rng: &mut R, clamps: &mut u64) -> (f64, f64) {
    let mut pair = [0.0; 2];
    match r.kind {
        ResourceKind::Gaussian => {
            for (v, c) in pair.iter_mut().zip(r.center) {
                let z: f64 = StandardNormal.sample(rng);
                *v = c + r.spread * z;
            }
        }
        ResourceKind::Zipf => {
            let zipf = Zipf::new(r.support, r.exponent).expect("validated");
            for (v, s) in pair.iter_mut().zip(r.scale) {
                *v = s * zipf.sample(rng).powf(-r.exponent);
            }
        }
    }
    for v in &mut pair {
        if !(0.0..=1.0).contains(v) {
            *clamps += 1;
            *v = v.clamp(0.0, 1.0);
        }
    }
    (pair[0], pair[1])
}

/// Draws a complete job population.
///
/// Arrivals accumulate Weibull inter-arrival gaps; each job then gets a
/// class from `class_mix`, a usage pair from its class model, a Pareto
/// runtime scaled by the class multiplier and capped, and a task count.
/// The same spec always produces the same jobs.
pub fn gen_job_stream(spec: &SynthesisSpec) -> Result<SyntheticTrace, SynthError> {
    spec.validate()?;
    let n = usize::try_from(spec.job_count)
        .map_err(|_| SynthError::InvalidArgument("job_count too large".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gaps = gen_interarrivals(n, spec.interarrival.shape, spec.interarrival.scale, &mut rng)?;

    let rt = &spec.runtime;
    let geometric = match spec.tasks.kind {
        TasksKind::Geometric => Some(Geometric::new(spec.tasks.p).expect("validated")),
        TasksKind::Constant => None,
    };
    let mut clamp_events = 0;
    let mut clock = 0.0f64;
    let mut jobs = Vec::with_capacity(n);
    for (i, gap) in gaps.into_iter().enumerate() {
        clock += gap;
        let arrival_us = (clock * 1e6).round();
        if !(arrival_us < Timestamp::TRACE_END_MARKER as f64) {
            return Err(SynthError::InvalidArgument(format!("arrival of job {} overflows the trace clock", i + 1)));
        }
        let class = draw_class(&spec.class_mix, &mut rng);
        let (cpu, memory) = draw_usage(spec.resources.get(class), &mut rng, &mut clamp_events);

        let u: f64 = rng.gen();
        let secs = (rt.xmin * (1.0 - u).powf(-1.0 / rt.exponent) * rt.multipliers[class.index()]).min(rt.cap);
        let runtime_us = ((secs * 1e6).round() as u64).max(1);

        let tasks = match geometric {
            Some(g) => g.sample(&mut rng).saturating_add(1),
            None => spec.tasks.count as u64,
        };
        // every task needs at least a microsecond of usage window
        let tasks = tasks.min(runtime_us).min(u32::MAX as u64) as u32;

        jobs.push(SyntheticJob {
            record: JobRecord {
                job_id: i as u64 + 1,
                arrival_time: Timestamp::from_micros(arrival_us as u64),
                runtime: Some(runtime_us),
                mean_cpu: Some(cpu),
                mean_memory: Some(memory),
                task_count: tasks,
                terminal_event: TerminalEvent::Finish,
            },
            class,
        });
    }
    Ok(SyntheticTrace { jobs, clamp_events })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interarrivals_positive_and_reproducible() {
        let a = gen_interarrivals(100, 1.5, 2.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = gen_interarrivals(100, 1.5, 2.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| *x >= 0.0 && x.is_finite()));
        assert!(gen_interarrivals(3, 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(4)).is_err());
    }

    #[test]
    fn stream_respects_spec() {
        let spec = SynthesisSpec {
            job_count: 2000,
            tasks: TasksSpec { kind: TasksKind::Geometric, count: 1, p: 0.3 },
            ..Default::default()
        };
        let trace = gen_job_stream(&spec).unwrap();
        assert_eq!(trace.jobs.len(), 2000);
        let mut last = 0;
        for (i, j) in trace.jobs.iter().enumerate() {
            let r = &j.record;
            assert_eq!(r.job_id, i as u64 + 1);
            let t = r.arrival_time.micros().unwrap();
            assert!(t >= last);
            last = t;
            let rt = r.runtime.unwrap();
            let m = spec.runtime.multipliers[j.class.index()];
            assert!(rt as f64 >= (spec.runtime.xmin * m * 1e6).round() - 1.0);
            assert!(rt as f64 <= spec.runtime.cap * 1e6);
            assert!(r.task_count >= 1);
            let (c, mem) = r.usage().unwrap();
            assert!((0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&mem));
        }
        assert_eq!(gen_job_stream(&spec).unwrap(), trace);
    }

    #[test]
    fn class_mix_is_followed() {
        let spec = SynthesisSpec { job_count: 20_000, class_mix: [0.5, 0.0, 0.5], ..Default::default() };
        let trace = gen_job_stream(&spec).unwrap();
        let mut counts = [0usize; 3];
        for j in &trace.jobs {
            counts[j.class.index()] += 1;
        }
        assert_eq!(counts[1], 0);
        // 4.5 sigma band for Binomial(20000, 0.5)
        assert!((counts[0] as f64 - 10_000.0).abs() < 320.0, "{counts:?}");
    }

    #[test]
    fn clamping_is_counted() {
        let mut spec = SynthesisSpec { job_count: 500, class_mix: [1.0, 0.0, 0.0], ..Default::default() };
        spec.resources.minor = ResourceSpec::gaussian(0.0, 1.0, 0.2);
        let trace = gen_job_stream(&spec).unwrap();
        // half of each coordinate's draws land outside [0, 1]
        assert!(trace.clamp_events > 300, "{}", trace.clamp_events);
        assert!(trace.jobs.iter().any(|j| j.record.mean_cpu == Some(0.0)));
    }
}
