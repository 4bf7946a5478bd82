use rand::Rng;
use rayon::prelude::*;

use super::{ClusterError, ClusterModel, Point};

/// Below this many points the assignment step runs serially.
const PARALLEL_ASSIGN_MIN: usize = 8192;

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Checks that all points are finite and share one dimension; returns it.
pub(crate) fn validate_points(points: &[Point]) -> Result<usize, ClusterError> {
    let Some(first) = points.first() else {
        return Err(ClusterError::InvalidArgument("no points".into()));
    };
    let dim = first.coords.len();
    if dim == 0 {
        return Err(ClusterError::InvalidArgument("points must have at least one coordinate".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if p.coords.len() != dim {
            return Err(ClusterError::InvalidArgument(format!(
                "point {i} has dimension {} but expected {dim}",
                p.coords.len()
            )));
        }
        if p.coords.iter().any(|c| !c.is_finite()) {
            return Err(ClusterError::InvalidArgument(format!("point {i} has a non-finite coordinate")));
        }
    }
    Ok(dim)
}

/// Number of distinct coordinate vectors.
pub fn distinct_count(points: &[Point]) -> usize {
    let mut coords: Vec<&[f64]> = points.iter().map(|p| p.coords.as_slice()).collect();
    coords.sort_by(|a, b| cmp_coords(a, b));
    coords.dedup_by(|a, b| cmp_coords(a, b).is_eq());
    coords.len()
}

pub(crate) fn cmp_coords(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// K-means++ seeding.
///
/// The first center is a uniformly chosen data point; each further center
/// is drawn with probability proportional to the squared distance from a
/// point to its nearest already-chosen center. Chosen points have zero
/// weight, so the result is `k` distinct points.
pub fn kmeanspp_seed<R: Rng + ?Sized>(points: &[Point], k: usize, rng: &mut R) -> Result<Vec<Point>, ClusterError> {
    validate_points(points)?;
    if k == 0 {
        return Err(ClusterError::InvalidArgument("k must be positive".into()));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(ClusterError::InvalidArgument(format!(
            "k = {k} exceeds the {distinct} distinct points"
        )));
    }

    let n = points.len();
    let first = rng.gen_range(0..n);
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(&p.coords, &points[first].coords)).collect();

    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.gen::<f64>() * total;
        let mut cumulative = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            cumulative += w;
            pick = Some(i);
            if cumulative > target {
                break;
            }
        }
        let next = pick.expect("k <= distinct points leaves positive weight");
        chosen.push(next);
        let c = &points[next].coords;
        for (w, p) in d2.iter_mut().zip(points) {
            let d = sq_dist(&p.coords, c);
            if d < *w {
                *w = d;
            }
        }
    }
    Ok(chosen.into_iter().map(|i| points[i].clone()).collect())
}

fn nearest(coords: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(coords, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &[Point], centers: &[Vec<f64>]) -> Vec<(usize, f64)> {
    if points.len() >= PARALLEL_ASSIGN_MIN {
        points.par_iter().map(|p| nearest(&p.coords, centers)).collect()
    } else {
        points.iter().map(|p| nearest(&p.coords, centers)).collect()
    }
}

/// Lloyd refinement; see [`lloyd_traced`].
pub fn lloyd(points: &[Point], initial_centers: &[Point], max_iter: usize, tol: f64) -> Result<ClusterModel, ClusterError> {
    lloyd_traced(points, initial_centers, max_iter, tol).map(|(model, _)| model)
}

/// Lloyd iterations from the given centers, also returning the
/// within-cluster sum of squares after every iteration.
///
/// Each iteration recomputes centers as the mean of their points, then
/// reassigns every point to its nearest center (ties go to the lower
/// index). Stops once no center moved more than `tol` (Euclidean) or after
/// `max_iter` iterations. A center left without points is moved onto the
/// point farthest from its own center, keeping `k` fixed.
pub fn lloyd_traced(
    points: &[Point],
    initial_centers: &[Point],
    max_iter: usize,
    tol: f64,
) -> Result<(ClusterModel, Vec<f64>), ClusterError> {
    let dim = validate_points(points)?;
    if initial_centers.is_empty() {
        return Err(ClusterError::InvalidArgument("no initial centers".into()));
    }
    if initial_centers.iter().any(|c| c.coords.len() != dim || c.coords.iter().any(|x| !x.is_finite())) {
        return Err(ClusterError::InvalidArgument("initial centers must be finite and match the point dimension".into()));
    }
    if max_iter == 0 {
        return Err(ClusterError::InvalidArgument("max_iter must be positive".into()));
    }
    if !(tol >= 0.0) {
        return Err(ClusterError::InvalidArgument("tol must be non-negative".into()));
    }

    let k = initial_centers.len();
    let mut centers: Vec<Vec<f64>> = initial_centers.iter().map(|c| c.coords.clone()).collect();
    let mut assigned = assign(points, &centers);
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in points.iter().zip(&assigned) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(&p.coords) {
                *s += x;
            }
        }
        let mut taken = vec![false; points.len()];
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(k);
        for j in 0..k {
            if counts[j] > 0 {
                let n = counts[j] as f64;
                next.push(sums[j].iter().map(|s| s / n).collect());
            } else {
                // farthest point from its assigned center, not already used for a repair
                let far = assigned
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken[*i])
                    .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .expect("more points than empty clusters");
                taken[far] = true;
                next.push(points[far].coords.clone());
            }
        }

        let movement = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0f64, f64::max);
        centers = next;
        assigned = assign(points, &centers);
        let wcss: f64 = assigned.iter().map(|&(_, d)| d).sum();
        debug_assert!(
            history.last().map_or(true, |&prev: &f64| wcss <= prev * (1.0 + 1e-12) + 1e-300),
            "wcss increased: {history:?} -> {wcss}"
        );
        history.push(wcss);
        if movement <= tol {
            break;
        }
    }

    let wcss = *history.last().expect("at least one iteration");
    let model = ClusterModel {
        k,
        centers,
        assignment: assigned.into_iter().map(|(c, _)| c).collect(),
        wcss,
        iterations,
        silhouette_mean: None,
        silhouette_sampled: false,
    };
    Ok((model, history))
}
