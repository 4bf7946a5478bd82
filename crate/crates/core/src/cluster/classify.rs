use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kmeans::{cmp_coords, distinct_count, kmeanspp_seed, lloyd, validate_points};
use super::silhouette::silhouette_summary;
use super::{ClusterConfig, ClusterError, ClusterModel, Point};
use crate::trace_model::{JobClass, JobRecord};

/// Per-dimension min-max scaling to [0, 1]. Constant dimensions map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(points: &[Point]) -> Self {
        let dim = points.first().map_or(0, |p| p.coords.len());
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for p in points {
            for d in 0..dim {
                min[d] = min[d].min(p.coords[d]);
                max[d] = max[d].max(p.coords[d]);
            }
        }
        MinMaxScaler { min, max }
    }

    pub fn transform(&self, coords: &[f64]) -> Vec<f64> {
        coords
            .iter()
            .enumerate()
            .map(|(d, &x)| {
                let range = self.max[d] - self.min[d];
                if range > 0.0 {
                    (x - self.min[d]) / range
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn inverse(&self, coords: &[f64]) -> Vec<f64> {
        coords.iter().enumerate().map(|(d, &x)| self.min[d] + x * (self.max[d] - self.min[d])).collect()
    }

    pub fn transform_points(&self, points: &[Point]) -> Vec<Point> {
        points.iter().map(|p| Point { coords: self.transform(&p.coords), source_id: p.source_id }).collect()
    }
}

/// Indices of `points` in lexicographic coordinate order (then id, then
/// position), so results do not depend on input order.
fn canonical_order(points: &[Point]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        cmp_coords(&points[a].coords, &points[b].coords)
            .then(points[a].source_id.cmp(&points[b].source_id))
            .then(a.cmp(&b))
    });
    order
}

/// Best-of-`cfg.restarts` K-means++ + Lloyd for a single k.
///
/// Points are put in canonical order before seeding; the returned
/// assignment is in the caller's order. The silhouette is attached when at
/// least two clusters are non-empty.
pub fn cluster_best_of<R: Rng + ?Sized>(
    points: &[Point],
    k: usize,
    rng: &mut R,
    cfg: &ClusterConfig,
) -> Result<ClusterModel, ClusterError> {
    validate_points(points)?;
    if cfg.restarts == 0 {
        return Err(ClusterError::InvalidArgument("restarts must be positive".into()));
    }
    let order = canonical_order(points);
    let sorted: Vec<Point> = order.iter().map(|&i| points[i].clone()).collect();

    let mut best: Option<ClusterModel> = None;
    for _ in 0..cfg.restarts {
        let mut run_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let seeds = kmeanspp_seed(&sorted, k, &mut run_rng)?;
        let model = lloyd(&sorted, &seeds, cfg.max_iter, cfg.tol)?;
        if best.as_ref().map_or(true, |b| model.wcss < b.wcss) {
            best = Some(model);
        }
    }
    let mut model = best.expect("restarts > 0");

    let mut assignment = vec![0; points.len()];
    for (pos, &orig) in order.iter().enumerate() {
        assignment[orig] = model.assignment[pos];
    }
    model.assignment = assignment;

    let nonempty = model.cluster_sizes().iter().filter(|&&s| s > 0).count();
    if nonempty >= 2 {
        let mut sil_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let summary = silhouette_summary(points, &model.assignment, cfg.silhouette_cap, &mut sil_rng)?;
        model.silhouette_mean = Some(summary.mean);
        model.silhouette_sampled = summary.sampled;
    }
    Ok(model)
}

/// Clusters `points` for every k in `k_range`, keeping the lowest-wcss
/// model of `cfg.restarts` runs per k, each with its mean silhouette.
pub fn sweep_k<R: Rng + ?Sized>(
    points: &[Point],
    k_range: RangeInclusive<usize>,
    rng: &mut R,
    cfg: &ClusterConfig,
) -> Result<Vec<(usize, ClusterModel)>, ClusterError> {
    validate_points(points)?;
    let (lo, hi) = (*k_range.start(), *k_range.end());
    let distinct = distinct_count(points);
    if lo < 2 || lo > hi || hi > distinct {
        return Err(ClusterError::InvalidArgument(format!(
            "k range {lo}..={hi} must lie within 2..={distinct}"
        )));
    }
    k_range.map(|k| cluster_best_of(points, k, rng, cfg).map(|m| (k, m))).collect()
}

/// Renumbers clusters so that old index `perm[new]` becomes `new`.
fn relabel(model: &mut ClusterModel, perm: &[usize]) {
    let mut inverse = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    model.centers = perm.iter().map(|&old| model.centers[old].clone()).collect();
    for a in &mut model.assignment {
        *a = inverse[*a];
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub label: JobClass,
    pub count: usize,
    pub share: f64,
    /// `[mean_cpu, mean_memory]` in input units.
    pub center: Vec<f64>,
}

/// Tri-modal job classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobClassification {
    /// Cluster `i` is class `JobClass::ALL[i]`. Centers are in input units;
    /// wcss and silhouette are measured in the normalized space.
    pub model: ClusterModel,
    pub normalized_centers: Vec<Vec<f64>>,
    pub scaler: MinMaxScaler,
    /// `(job_id, class)` for every classified job, in input order.
    pub labels: Vec<(u64, JobClass)>,
    pub classes: Vec<ClassSummary>,
    /// Records left out because a usage mean was missing.
    pub excluded: usize,
}

/// Usage points `[mean_cpu, mean_memory]` tagged with their job ids, and the
/// number of records left out for lacking a usage mean.
pub fn usage_points(records: &[JobRecord]) -> (Vec<Point>, usize) {
    let points: Vec<Point> = records
        .iter()
        .filter_map(|r| r.usage().map(|(c, m)| Point::with_id(vec![c, m], r.job_id)))
        .collect();
    let excluded = records.len() - points.len();
    (points, excluded)
}

fn check_classifiable(points: &[Point]) -> Result<(), ClusterError> {
    if points.len() < 3 {
        return Err(ClusterError::InsufficientData { needed: 3, got: points.len() });
    }
    let distinct = distinct_count(points);
    if distinct == 1 {
        return Err(ClusterError::Degenerate("all jobs have identical usage".into()));
    }
    if distinct < 3 {
        return Err(ClusterError::Degenerate(format!("only {distinct} distinct usage points")));
    }
    Ok(())
}

/// Splits jobs into MINOR / MEDIOCRE / MAJOR by (mean_cpu, mean_memory).
///
/// Features are min-max normalized, clustered with k = 3, and clusters are
/// ranked by the L2 norm of their de-normalized centers (ties broken by
/// cpu, then memory).
pub fn classify_jobs<R: Rng + ?Sized>(
    records: &[JobRecord],
    rng: &mut R,
    cfg: &ClusterConfig,
) -> Result<JobClassification, ClusterError> {
    let (points, excluded) = usage_points(records);
    check_classifiable(&points)?;
    let scaler = MinMaxScaler::fit(&points);
    let normalized = scaler.transform_points(&points);
    let model = cluster_best_of(&normalized, 3, rng, cfg)?;
    label_classes(&points, excluded, model)
}

/// Turns a k = 3 model fitted to the min-max normalized `points` (as from
/// [`usage_points`]) into a classification, so a k sweep that already
/// covers k = 3 need not cluster again.
pub fn label_classes(points: &[Point], excluded: usize, mut model: ClusterModel) -> Result<JobClassification, ClusterError> {
    check_classifiable(points)?;
    if model.k != 3 || model.assignment.len() != points.len() {
        return Err(ClusterError::InvalidArgument(format!(
            "need a k = 3 model over {} points, got k = {} over {}",
            points.len(),
            model.k,
            model.assignment.len()
        )));
    }
    let scaler = MinMaxScaler::fit(points);
    let real: Vec<Vec<f64>> = model.centers.iter().map(|c| scaler.inverse(c)).collect();
    let norm = |c: &[f64]| c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut perm: Vec<usize> = (0..3).collect();
    perm.sort_by(|&a, &b| {
        norm(&real[a])
            .total_cmp(&norm(&real[b]))
            .then(real[a][0].total_cmp(&real[b][0]))
            .then(real[a][1].total_cmp(&real[b][1]))
    });
    relabel(&mut model, &perm);
    let normalized_centers = model.centers.clone();
    model.centers = normalized_centers.iter().map(|c| scaler.inverse(c)).collect();

    let labels: Vec<(u64, JobClass)> = points
        .iter()
        .zip(&model.assignment)
        .map(|(p, &a)| (p.source_id.unwrap_or_default(), JobClass::ALL[a]))
        .collect();
    let sizes = model.cluster_sizes();
    let classes = JobClass::ALL
        .iter()
        .map(|&label| ClassSummary {
            label,
            count: sizes[label.index()],
            share: sizes[label.index()] as f64 / points.len() as f64,
            center: model.centers[label.index()].clone(),
        })
        .collect();
    Ok(JobClassification { model, normalized_centers, scaler, labels, classes, excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterExtent {
    pub cluster: usize,
    pub count: usize,
    /// Earliest and latest arrival in the cluster, seconds.
    pub start: f64,
    pub end: f64,
    pub extent: f64,
}

/// Arrival-time clusters, numbered in order of their earliest arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalClusters {
    pub model: ClusterModel,
    pub extents: Vec<ClusterExtent>,
}

/// Clusters jobs on arrival time (seconds since trace start) with k clusters.
pub fn cluster_arrivals<R: Rng + ?Sized>(
    records: &[JobRecord],
    k: usize,
    rng: &mut R,
    cfg: &ClusterConfig,
) -> Result<ArrivalClusters, ClusterError> {
    let points: Vec<Point> = records
        .iter()
        .filter_map(|r| r.arrival_time.as_secs_f64().map(|t| Point::with_id(vec![t], r.job_id)))
        .collect();
    if k == 0 {
        return Err(ClusterError::InvalidArgument("k must be positive".into()));
    }
    if points.len() < k {
        return Err(ClusterError::InsufficientData { needed: k, got: points.len() });
    }
    let mut model = cluster_best_of(&points, k, rng, cfg)?;

    let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY, 0usize); k];
    for (p, &a) in points.iter().zip(&model.assignment) {
        let b = &mut bounds[a];
        b.0 = b.0.min(p.coords[0]);
        b.1 = b.1.max(p.coords[0]);
        b.2 += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by(|&a, &b| bounds[a].0.total_cmp(&bounds[b].0).then(a.cmp(&b)));
    relabel(&mut model, &perm);
    let extents = perm
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            let (start, end, count) = bounds[old];
            ClusterExtent { cluster: new, count, start, end, extent: if count > 0 { end - start } else { 0.0 } }
        })
        .collect();
    Ok(ArrivalClusters { model, extents })
}
