//! Plot-ready CSV files. Data only; figures are drawn elsewhere.

use std::path::{Path, PathBuf};

use tracelens_core::distfit::{weibull_cdf, Ecdf, OVERLAY_POINTS};
use tracelens_core::trace_model::JobClass;

use crate::error::{CliError, CliResult};

fn write_rows<const N: usize>(path: &Path, header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> CliResult<PathBuf> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Two-column `(x, F(x))` curve at the overlay quantile points.
pub fn write_cdf(path: &Path, points: &[(f64, f64)]) -> CliResult<PathBuf> {
    write_rows(path, ["x", "cdf"], points.iter().map(|(x, f)| [x.to_string(), f.to_string()]))
}

/// Empirical curve and the fitted Weibull CDF at the same abscissae.
pub fn write_weibull_overlay(dir: &Path, stem: &str, ecdf: &Ecdf, shape: f64, scale: f64) -> CliResult<Vec<PathBuf>> {
    let empirical = ecdf.curve(OVERLAY_POINTS);
    let fitted: Vec<(f64, f64)> =
        empirical.iter().map(|&(x, _)| (x, weibull_cdf(x, shape, scale).unwrap_or(f64::NAN))).collect();
    Ok(vec![
        write_cdf(&dir.join(format!("{stem}_ecdf.csv")), &empirical)?,
        write_cdf(&dir.join(format!("{stem}_weibull_cdf.csv")), &fitted)?,
    ])
}

/// Descending values against rank, with the fitted power law
/// `c·rank^(-θ)` (`c` is the least-squares intercept).
pub fn write_rank_frequency(path: &Path, values: &[f64], theta: f64) -> CliResult<PathBuf> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len() as f64;
    let mean_ln_rank = (1..=sorted.len()).map(|r| (r as f64).ln()).sum::<f64>() / n;
    let mean_ln_value = sorted.iter().map(|v| v.ln()).sum::<f64>() / n;
    let ln_c = mean_ln_value + theta * mean_ln_rank;
    write_rows(
        path,
        ["rank", "value", "fitted"],
        sorted.iter().enumerate().map(|(i, v)| {
            let rank = (i + 1) as f64;
            [(i + 1).to_string(), v.to_string(), (ln_c - theta * rank.ln()).exp().to_string()]
        }),
    )
}

/// Empirical survival of all runtimes against the fitted tail, which is
/// scaled by the tail's share of the sample and left blank below `xmin`.
pub fn write_runtime_tail(path: &Path, ecdf: &Ecdf, exponent: f64, xmin: f64, tail_count: u64) -> CliResult<PathBuf> {
    let share = tail_count as f64 / ecdf.len() as f64;
    write_rows(
        path,
        ["x", "empirical_survival", "fitted_survival"],
        ecdf.curve(OVERLAY_POINTS).into_iter().map(|(x, f)| {
            let fitted = if x > xmin { (share * (x / xmin).powf(-exponent)).to_string() } else { String::new() };
            [x.to_string(), (1.0 - f).to_string(), fitted]
        }),
    )
}

pub fn write_job_classes(path: &Path, labels: &[(u64, JobClass)]) -> CliResult<PathBuf> {
    write_rows(
        path,
        ["job_id", "cluster_index", "label"],
        labels.iter().map(|(id, c)| [id.to_string(), c.index().to_string(), c.as_str().to_string()]),
    )
}

/// `(job_id, arrival seconds, cluster)` rows.
pub fn write_arrival_clusters(path: &Path, rows: &[(u64, f64, usize)]) -> CliResult<PathBuf> {
    write_rows(
        path,
        ["job_id", "arrival_secs", "cluster"],
        rows.iter().map(|(id, t, c)| [id.to_string(), t.to_string(), c.to_string()]),
    )
}
