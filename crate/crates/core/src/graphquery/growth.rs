//! Monthly counts of first-seen revisions and blobs, with an exponential fit.

use std::fmt;

use chrono::{DateTime, Datelike};

use super::{ArchiveGraph, Direction, GraphError};
use crate::model::ObjectType;

/// A calendar month in UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn of_timestamp(seconds: i64) -> Month {
        let date = DateTime::from_timestamp(seconds, 0).unwrap_or(DateTime::UNIX_EPOCH);
        Month {
            year: date.year(),
            month: date.month(),
        }
    }

    /// Months since year 0.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Month {
        Month {
            year: ordinal.div_euclid(12) as i32,
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthBucket {
    pub month: Month,
    pub original_commits: u64,
    pub original_blobs: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSeries {
    /// Every month from the first to the last dated revision.
    pub buckets: Vec<GrowthBucket>,
    /// `None` when fewer than two months have a non-zero cumulative count.
    /// Infinite when the series does not grow.
    pub commit_doubling_months: Option<f64>,
    pub blob_doubling_months: Option<f64>,
}

/// Counts each revision in its committer month and each blob in the month
/// of its earliest containing revision, then fits log2 of the cumulative
/// counts against time.
pub fn growth_stats(graph: &ArchiveGraph) -> Result<GrowthSeries, GraphError> {
    let mut revisions: Vec<(i64, crate::model::ObjectId, u32)> = graph
        .revision_indexes()
        .map(|(i, info)| (info.committer_date.seconds, graph.node(i).id, i))
        .collect();
    revisions.sort_unstable();
    let (Some(first), Some(last)) = (revisions.first(), revisions.last()) else {
        return Err(GraphError::UndefinedFit(0));
    };
    let start = Month::of_timestamp(first.0).ordinal();
    let months = (Month::of_timestamp(last.0).ordinal() - start + 1) as usize;
    if months < 2 {
        return Err(GraphError::UndefinedFit(months));
    }
    let mut buckets: Vec<GrowthBucket> = (0..months)
        .map(|i| GrowthBucket {
            month: Month::from_ordinal(start + i as i64),
            original_commits: 0,
            original_blobs: 0,
        })
        .collect();

    // Sweeping in date order, the first revision to reach a node is its
    // earliest occurrence; nodes already seen need not be re-entered.
    let mut seen = vec![false; graph.node_count()];
    for &(seconds, _, index) in &revisions {
        let bucket = &mut buckets[(Month::of_timestamp(seconds).ordinal() - start) as usize];
        bucket.original_commits += 1;
        let Some(tree) = graph.node_index(&graph.revision(index).expect("revision").tree) else {
            continue;
        };
        let mut fresh = 0;
        let reached = graph.reach([tree], Direction::Forward, |i| {
            let node = graph.node(i);
            if seen[i as usize] || !matches!(node.object_type, ObjectType::Directory | ObjectType::Content) {
                return false;
            }
            if node.object_type == ObjectType::Content {
                fresh += 1;
            }
            true
        });
        for (i, r) in reached.into_iter().enumerate() {
            seen[i] |= r;
        }
        bucket.original_blobs += fresh;
    }
    let commit_doubling_months = doubling_time(buckets.iter().map(|b| b.original_commits));
    let blob_doubling_months = doubling_time(buckets.iter().map(|b| b.original_blobs));
    Ok(GrowthSeries {
        buckets,
        commit_doubling_months,
        blob_doubling_months,
    })
}

/// 1 / slope of the least-squares line through (month, log2 cumulative).
pub fn doubling_time(monthly: impl Iterator<Item = u64>) -> Option<f64> {
    let mut total = 0u64;
    let points: Vec<(f64, f64)> = monthly
        .enumerate()
        .filter_map(|(i, n)| {
            total += n;
            (total > 0).then(|| (i as f64, (total as f64).log2()))
        })
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    Some(if slope > 0.0 { 1.0 / slope } else { f64::INFINITY })
}
