//! Silhouette scores with Euclidean distance.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::kmeans::validate_points;
use super::{ClusterError, Point};

/// One-dimensional inputs above this size use the sorted prefix-sum path.
const PREFIX_SUM_MIN: usize = 4096;

/// Per-point silhouette scores and their arithmetic mean.
///
/// `s(i) = (b - a) / max(a, b)` where `a` is the mean distance to the other
/// members of the point's cluster and `b` the smallest mean distance to
/// another non-empty cluster. Members of singleton clusters score 0.
pub fn silhouette(points: &[Point], assignment: &[usize]) -> Result<(Vec<f64>, f64), ClusterError> {
    let dim = validate_points(points)?;
    if assignment.len() != points.len() {
        return Err(ClusterError::InvalidArgument(format!(
            "{} assignments for {} points",
            assignment.len(),
            points.len()
        )));
    }
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &a in assignment {
        counts[a] += 1;
    }
    let nonempty = counts.iter().filter(|&&c| c > 0).count();
    if nonempty < 2 {
        return Err(ClusterError::InvalidArgument(
            "silhouette needs at least two non-empty clusters".into(),
        ));
    }

    let scores = if dim == 1 && points.len() >= PREFIX_SUM_MIN {
        scores_1d(points, assignment, &counts)
    } else {
        scores_pairwise(points, assignment, &counts, dim)
    };
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((scores, mean))
}

fn score(own: usize, counts: &[usize], sums: &[f64]) -> f64 {
    if counts[own] <= 1 {
        return 0.0;
    }
    let a = sums[own] / (counts[own] - 1) as f64;
    let b = sums
        .iter()
        .zip(counts)
        .enumerate()
        .filter(|&(c, (_, &n))| c != own && n > 0)
        .map(|(_, (s, &n))| s / n as f64)
        .fold(f64::INFINITY, f64::min);
    let denom = a.max(b);
    if denom > 0.0 {
        ((b - a) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Points per block in the pairwise path.
const BLOCK: usize = 1024;
/// Distances computed per inner pass; sized to stay in L1.
const CHUNK: usize = 512;

/// Distances from `x` to points `range` of `cols`, written to `buf`.
fn distances_into(cols: &[Vec<f64>], x: &[f64], range: std::ops::Range<usize>, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend(cols[0][range.clone()].iter().map(|&v| {
        let t = v - x[0];
        t * t
    }));
    for (d, col) in cols.iter().enumerate().skip(1) {
        for (b, &v) in buf.iter_mut().zip(&col[range.clone()]) {
            let t = v - x[d];
            *b += t * t;
        }
    }
    for b in buf.iter_mut() {
        *b = b.sqrt();
    }
}

fn lane_sum(v: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = v.chunks_exact(4);
    let tail = chunks.remainder();
    for ch in chunks {
        for lane in 0..4 {
            acc[lane] += ch[lane];
        }
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for &x in tail {
        total += x;
    }
    total
}

/// Exact pairwise path. Each unordered pair is evaluated once: block `I`
/// walks the points at or after its own start, keeping row sums for its
/// members and returning column sums for the later points. Column
/// contributions are reduced in block order, so the arithmetic does not
/// depend on the thread count.
fn scores_pairwise(points: &[Point], assignment: &[usize], counts: &[usize], dim: usize) -> Vec<f64> {
    let n = points.len();
    let k = counts.len();
    // group points by cluster, column-major
    let mut starts = vec![0usize; k + 1];
    for c in 0..k {
        starts[c + 1] = starts[c] + counts[c];
    }
    let mut fill = starts.clone();
    let mut cols = vec![vec![0.0; n]; dim];
    let mut label = vec![0usize; n];
    let mut position = vec![0usize; n];
    for (i, (p, &a)) in points.iter().zip(assignment).enumerate() {
        let pos = fill[a];
        fill[a] += 1;
        label[pos] = a;
        position[i] = pos;
        for d in 0..dim {
            cols[d][pos] = p.coords[d];
        }
    }
    // cluster segments clipped to [from, n)
    let segments = |from: usize| -> Vec<(usize, std::ops::Range<usize>)> {
        (0..k).filter_map(|c| {
            let r = starts[c].max(from)..starts[c + 1];
            (!r.is_empty()).then_some((c, r))
        })
        .collect()
    };

    let blocks = n.div_ceil(BLOCK);
    // sums[pos * k + c]: distance from sorted point pos to cluster c
    let mut sums = vec![0.0f64; n * k];
    let batch = rayon::current_num_threads().max(1);
    for first in (0..blocks).step_by(batch) {
        let parts: Vec<(Vec<f64>, Vec<f64>)> = (first..(first + batch).min(blocks))
            .into_par_iter()
            .map(|b| {
                let lo = b * BLOCK;
                let hi = (lo + BLOCK).min(n);
                let mut rows = vec![0.0f64; (hi - lo) * k];
                // column sums for positions lo.., one run per row cluster
                let mut tail = vec![0.0f64; k * (n - lo)];
                let width = n - lo;
                let mut buf = Vec::with_capacity(CHUNK);
                let mut x = vec![0.0; dim];
                for i in lo..hi {
                    for d in 0..dim {
                        x[d] = cols[d][i];
                    }
                    let ci = label[i];
                    for (c, seg) in segments(i + 1) {
                        let mut row = 0.0;
                        for start in seg.clone().step_by(CHUNK) {
                            let r = start..(start + CHUNK).min(seg.end);
                            distances_into(&cols, &x, r.clone(), &mut buf);
                            row += lane_sum(&buf);
                            let run = &mut tail[ci * width + r.start - lo..ci * width + r.end - lo];
                            for (t, &dist) in run.iter_mut().zip(&buf) {
                                *t += dist;
                            }
                        }
                        rows[(i - lo) * k + c] += row;
                    }
                }
                (rows, tail)
            })
            .collect();
        for (offset, (rows, tail)) in parts.into_iter().enumerate() {
            let lo = (first + offset) * BLOCK;
            let width = n - lo;
            for c in 0..k {
                for (j, t) in tail[c * width..(c + 1) * width].iter().enumerate() {
                    sums[(lo + j) * k + c] += t;
                }
            }
            for (s, r) in sums[lo * k..].iter_mut().zip(&rows) {
                *s += r;
            }
        }
    }

    (0..n).into_par_iter().map(|i| {
        let pos = position[i];
        score(assignment[i], counts, &sums[pos * k..(pos + 1) * k])
    })
    .collect()
}

/// Exact 1-D path: per-cluster sorted values with prefix sums, O(n k log n).
fn scores_1d(points: &[Point], assignment: &[usize], counts: &[usize]) -> Vec<f64> {
    let k = counts.len();
    // values stored relative to the cluster minimum to limit cancellation
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (p, &a) in points.iter().zip(assignment) {
        values[a].push(p.coords[0]);
    }
    let clusters: Vec<(f64, Vec<f64>, Vec<f64>)> = values
        .into_iter()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            let base = v.first().copied().unwrap_or(0.0);
            let shifted: Vec<f64> = v.iter().map(|x| x - base).collect();
            let mut prefix = Vec::with_capacity(shifted.len() + 1);
            prefix.push(0.0);
            let mut run = 0.0;
            for s in &shifted {
                run += s;
                prefix.push(run);
            }
            (base, shifted, prefix)
        })
        .collect();

    points
        .par_iter()
        .zip(assignment.par_iter())
        .map(|(p, &own)| {
            let sums: Vec<f64> = clusters
                .iter()
                .map(|(base, sorted, prefix)| {
                    let m = sorted.len();
                    if m == 0 {
                        return 0.0;
                    }
                    let x = p.coords[0] - base;
                    let below = sorted.partition_point(|&v| v < x);
                    let lower = x * below as f64 - prefix[below];
                    let upper = (prefix[m] - prefix[below]) - x * (m - below) as f64;
                    lower.max(0.0) + upper.max(0.0)
                })
                .collect();
            score(own, counts, &sums)
        })
        .collect()
}

/// Mean silhouette, exact up to `cap` points and on a seeded uniform
/// subsample of `cap` points beyond that. One-dimensional data is always
/// scored exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SilhouetteSummary {
    pub mean: f64,
    pub sampled: bool,
    pub evaluated: usize,
}

pub fn silhouette_summary<R: Rng + ?Sized>(
    points: &[Point],
    assignment: &[usize],
    cap: usize,
    rng: &mut R,
) -> Result<SilhouetteSummary, ClusterError> {
    let dim = validate_points(points)?;
    if points.len() <= cap || dim == 1 {
        let (_, mean) = silhouette(points, assignment)?;
        return Ok(SilhouetteSummary { mean, sampled: false, evaluated: points.len() });
    }
    let mut picked = index::sample(rng, points.len(), cap).into_vec();
    picked.sort_unstable();
    let sub_points: Vec<Point> = picked.iter().map(|&i| points[i].clone()).collect();
    let sub_assign: Vec<usize> = picked.iter().map(|&i| assignment[i]).collect();
    let (_, mean) = silhouette(&sub_points, &sub_assign)?;
    Ok(SilhouetteSummary { mean, sampled: true, evaluated: cap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Point> {
        v.iter().map(|&x| Point::new(vec![x])).collect()
    }

    #[test]
    fn singletons_score_zero() {
        let (s, mean) = silhouette(&pts(&[0.0, 5.0]), &[0, 1]).unwrap();
        assert_eq!(s, vec![0.0, 0.0]);
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn tight_clusters_score_one() {
        let (s, mean) = silhouette(&pts(&[0.0, 0.0, 10.0, 10.0]), &[0, 0, 1, 1]).unwrap();
        assert_eq!(s, vec![1.0; 4]);
        assert_eq!(mean, 1.0);
    }

    #[test]
    fn single_cluster_is_rejected() {
        assert!(silhouette(&pts(&[0.0, 1.0]), &[0, 0]).is_err());
        // empty label 0 does not count as a cluster
        assert!(silhouette(&pts(&[0.0, 1.0]), &[1, 1]).is_err());
        assert!(silhouette(&pts(&[0.0, 1.0]), &[0]).is_err());
    }

    #[test]
    fn one_dimensional_paths_agree() {
        // deterministic pseudo-random 1-D data in three groups
        let mut x = 0.123_f64;
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..5000 {
            x = (x * 9301.0 + 49297.0) % 233280.0;
            let g = i % 3;
            values.push(g as f64 * 1000.0 + x / 2332.8);
            labels.push(g);
        }
        let points = pts(&values);
        let (fast, _) = silhouette(&points, &labels).unwrap();
        let counts = vec![1667, 1667, 1666];
        let slow = scores_pairwise(&points, &labels, &counts, 1);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
