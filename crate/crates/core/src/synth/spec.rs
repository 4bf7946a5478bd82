//! Generator configuration.
//!
//! The on-disk form is flat `key = value` lines with dotted section names
//! (a subset of TOML):
//!
//! ```text
//! job_count = 1000
//! seed = 7
//! class_mix = [0.75, 0.15, 0.10]
//! interarrival.shape = 1.5
//! interarrival.scale = 2.0
//! runtime.exponent = 1.5
//! runtime.xmin = 10.0
//! runtime.multipliers = [1.0, 4.0, 16.0]
//! resources.major.center = [0.85, 0.8]
//! tasks.kind = "geometric"
//! tasks.p = 0.5
//! ```
//!
//! Every key is optional; omitted keys take the values of
//! [`SynthesisSpec::default`].

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::trace_model::JobClass;

/// Longest runtime emitted by default: 29 days, in seconds.
pub const DEFAULT_RUNTIME_CAP_SECS: f64 = 29.0 * 24.0 * 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeibullSpec {
    pub shape: f64,
    /// Seconds.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    /// Independent normal draws around `center` with std-dev `spread`.
    Gaussian,
    /// `scale * r^(-exponent)` with rank `r` drawn from Zipf(exponent, support).
    Zipf,
}

/// How one class draws its `(cpu, memory)` usage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceSpec {
    pub kind: ResourceKind,
    pub center: [f64; 2],
    pub spread: f64,
    pub exponent: f64,
    pub support: u64,
    pub scale: [f64; 2],
}

impl Default for ResourceSpec {
    fn default() -> Self {
        ResourceSpec {
            kind: ResourceKind::Gaussian,
            center: [0.05, 0.05],
            spread: 0.01,
            exponent: 1.0,
            support: 100,
            scale: [0.1, 0.1],
        }
    }
}

impl ResourceSpec {
    pub fn gaussian(cpu: f64, memory: f64, spread: f64) -> Self {
        ResourceSpec { kind: ResourceKind::Gaussian, center: [cpu, memory], spread, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassResources {
    pub minor: ResourceSpec,
    pub mediocre: ResourceSpec,
    pub major: ResourceSpec,
}

impl Default for ClassResources {
    fn default() -> Self {
        ClassResources {
            minor: ResourceSpec::gaussian(0.05, 0.05, 0.01),
            mediocre: ResourceSpec::gaussian(0.4, 0.4, 0.03),
            major: ResourceSpec::gaussian(0.85, 0.85, 0.03),
        }
    }
}

impl ClassResources {
    pub fn get(&self, class: JobClass) -> &ResourceSpec {
        match class {
            JobClass::Minor => &self.minor,
            JobClass::Mediocre => &self.mediocre,
            JobClass::Major => &self.major,
        }
    }
}

/// Pareto runtimes in seconds, scaled per class and capped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeSpec {
    pub exponent: f64,
    pub xmin: f64,
    /// Per-class multipliers (minor, mediocre, major); strictly increasing.
    pub multipliers: [f64; 3],
    pub cap: f64,
}

impl Default for RuntimeSpec {
    fn default() -> Self {
        RuntimeSpec { exponent: 1.5, xmin: 10.0, multipliers: [1.0, 4.0, 16.0], cap: DEFAULT_RUNTIME_CAP_SECS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TasksKind {
    Constant,
    /// Number of trials up to the first success: support 1, 2, ...
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TasksSpec {
    pub kind: TasksKind,
    pub count: u32,
    pub p: f64,
}

impl Default for TasksSpec {
    fn default() -> Self {
        TasksSpec { kind: TasksKind::Constant, count: 1, p: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Part files per table; job `id` goes to shard `id % shards`.
    pub shards: u32,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { shards: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSpec {
    pub job_count: u64,
    pub seed: u64,
    pub interarrival: WeibullSpec,
    /// Weights of (minor, mediocre, major); must sum to 1.
    pub class_mix: [f64; 3],
    pub resources: ClassResources,
    pub runtime: RuntimeSpec,
    pub tasks: TasksSpec,
    pub output: OutputSpec,
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        SynthesisSpec {
            job_count: 1000,
            seed: 1,
            interarrival: WeibullSpec { shape: 1.5, scale: 2.0 },
            class_mix: [0.75, 0.15, 0.10],
            resources: ClassResources::default(),
            runtime: RuntimeSpec::default(),
            tasks: TasksSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

impl Default for WeibullSpec {
    fn default() -> Self {
        WeibullSpec { shape: 1.5, scale: 2.0 }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> SynthError {
    SynthError::InvalidSpec { key: key.to_string(), message: message.into() }
}

fn positive(key: &str, v: f64) -> Result<(), SynthError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

impl SynthesisSpec {
    /// Parses and validates the key-value form.
    pub fn from_str_validated(text: &str) -> Result<Self, SynthError> {
        let spec: SynthesisSpec = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = unknown_key(&message)
                .or_else(|| e.span().and_then(|span| key_at(text, span.start)))
                .unwrap_or_else(|| "spec".to_string());
            SynthError::InvalidSpec { key, message }
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.job_count == 0 {
            return Err(invalid("job_count", "must be at least 1"));
        }
        positive("interarrival.shape", self.interarrival.shape)?;
        positive("interarrival.scale", self.interarrival.scale)?;

        if self.class_mix.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("class_mix", "weights must be non-negative"));
        }
        let total: f64 = self.class_mix.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("class_mix", format!("weights sum to {total}, expected 1")));
        }

        for class in JobClass::ALL {
            let r = self.resources.get(class);
            let prefix = format!("resources.{}", class.as_str().to_ascii_lowercase());
            match r.kind {
                ResourceKind::Gaussian => {
                    if r.center.iter().any(|c| !(0.0..=1.0).contains(c)) {
                        return Err(invalid(&format!("{prefix}.center"), "coordinates must lie in [0, 1]"));
                    }
                    positive(&format!("{prefix}.spread"), r.spread)?;
                }
                ResourceKind::Zipf => {
                    positive(&format!("{prefix}.exponent"), r.exponent)?;
                    if r.support == 0 {
                        return Err(invalid(&format!("{prefix}.support"), "must be at least 1"));
                    }
                    for s in r.scale {
                        positive(&format!("{prefix}.scale"), s)?;
                    }
                }
            }
        }

        positive("runtime.exponent", self.runtime.exponent)?;
        positive("runtime.xmin", self.runtime.xmin)?;
        positive("runtime.cap", self.runtime.cap)?;
        for m in self.runtime.multipliers {
            positive("runtime.multipliers", m)?;
        }
        let [a, b, c] = self.runtime.multipliers;
        if !(a < b && b < c) {
            return Err(invalid("runtime.multipliers", "must be strictly increasing (minor < mediocre < major)"));
        }

        match self.tasks.kind {
            TasksKind::Constant if self.tasks.count == 0 => {
                return Err(invalid("tasks.count", "must be at least 1"));
            }
            TasksKind::Geometric if !(self.tasks.p > 0.0 && self.tasks.p <= 1.0) => {
                return Err(invalid("tasks.p", "must lie in (0, 1]"));
            }
            _ => {}
        }
        if self.output.shards == 0 {
            return Err(invalid("output.shards", "must be at least 1"));
        }
        Ok(())
    }
}

/// Pulls the key name out of a serde "unknown field" message.
fn unknown_key(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

/// Key on the line containing byte offset `at`.
fn key_at(text: &str, at: usize) -> Option<String> {
    let line_start = text[..at.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next()?;
    let key = line.split_once('=')?.0.trim();
    (!key.is_empty()).then(|| key.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let spec = SynthesisSpec::default();
        spec.validate().unwrap();
        let text = spec.to_config_string();
        assert_eq!(SynthesisSpec::from_str_validated(&text).unwrap(), spec);
    }

    #[test]
    fn dotted_keys() {
        let spec = SynthesisSpec::from_str_validated(
            "job_count = 10\nseed = 3\ninterarrival.shape = 0.8\nresources.major.kind = \"zipf\"\nresources.major.exponent = 1.1\ntasks.kind = \"geometric\"\ntasks.p = 0.25\n",
        )
        .unwrap();
        assert_eq!(spec.job_count, 10);
        assert_eq!(spec.interarrival.shape, 0.8);
        assert_eq!(spec.interarrival.scale, 2.0);
        assert_eq!(spec.resources.major.kind, ResourceKind::Zipf);
        assert_eq!(spec.tasks.kind, TasksKind::Geometric);
    }

    fn key_of(text: &str) -> String {
        match SynthesisSpec::from_str_validated(text).unwrap_err() {
            SynthError::InvalidSpec { key, .. } => key,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_names_the_key() {
        assert_eq!(key_of("class_mix = [0.7, 0.1, 0.1]"), "class_mix");
        assert_eq!(key_of("job_count = 0"), "job_count");
        assert_eq!(key_of("interarrival.scale = -1.0"), "interarrival.scale");
        assert_eq!(key_of("runtime.multipliers = [1.0, 1.0, 2.0]"), "runtime.multipliers");
        assert_eq!(key_of("resources.minor.center = [1.5, 0.1]"), "resources.minor.center");
        assert_eq!(key_of("tasks.kind = \"geometric\"\ntasks.p = 0.0"), "tasks.p");
        assert_eq!(key_of("bogus = 1"), "bogus");
        assert_eq!(key_of("seed = 1\nruntime.xmin = \"ten\""), "runtime.xmin");
    }
}
