//! Duration-debiasing baselines: play-complete rate, per-duration z-score
//! gain, and duration-binned quantiles.

use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::normal_cdf;

/// Completion ratio `w / d`. Replays can push it above 1.
pub fn label_pcr(w: f64, d: u32) -> f64 {
    w / d.max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupWatchStats {
    pub d: u32,
    pub mu_w: f64,
    /// Population standard deviation.
    pub sigma_w: f64,
    pub count: usize,
}

/// Mean and standard deviation of watch time per duration.
pub fn group_watch_stats(dataset: &Dataset) -> BTreeMap<u32, GroupWatchStats> {
    dataset
        .duration_groups()
        .into_iter()
        .map(|(d, idx)| {
            let values: Vec<f64> = idx.iter().map(|&i| dataset.rows[i].watch_time_s).collect();
            let (mu_w, var) = crate::math::mean_and_variance(&values);
            (
                d,
                GroupWatchStats {
                    d,
                    mu_w,
                    sigma_w: var.sqrt(),
                    count: values.len(),
                },
            )
        })
        .collect()
}

/// Gaussian CDF of the within-duration z-score; 0.5 for a constant group.
pub fn label_wtg(w: f64, stats: &GroupWatchStats) -> f64 {
    if stats.sigma_w == 0.0 {
        return 0.5;
    }
    normal_cdf((w - stats.mu_w) / stats.sigma_w)
}

/// One equal-frequency duration bin with its watch times sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationBin {
    pub min_duration: u32,
    pub max_duration: u32,
    descending: Vec<f64>,
}

impl DurationBin {
    pub fn new(min_duration: u32, max_duration: u32, mut watch_times: Vec<f64>) -> Self {
        watch_times.sort_by(|a, b| b.total_cmp(a));
        DurationBin {
            min_duration,
            max_duration,
            descending: watch_times,
        }
    }

    pub fn size(&self) -> usize {
        self.descending.len()
    }

    /// Descending rank of `w` in `[1, size]`; tied values share their
    /// average rank.
    pub fn rank(&self, w: f64) -> f64 {
        let greater = self.descending.partition_point(|&x| x > w);
        let not_less = self.descending.partition_point(|&x| x >= w);
        let ties = not_less - greater;
        if ties == 0 {
            greater as f64 + 0.5
        } else {
            greater as f64 + (ties as f64 + 1.0) / 2.0
        }
    }
}

/// `(size - rank) / size` within the row's bin.
pub fn label_d2q(w: f64, bin: &DurationBin) -> f64 {
    let size = bin.size() as f64;
    (size - bin.rank(w)) / size
}

/// Equal-frequency partition of a dataset by duration.
///
/// Bin upper bounds are the `j/M` duration quantiles, and every row of one
/// duration lands in the same bin. Heavy durations can swallow a quantile, so
/// fewer than `M` bins may come back; empty bins are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationBins {
    pub bins: Vec<DurationBin>,
    /// Bin index of each dataset row.
    pub assignment: Vec<usize>,
}

impl DurationBins {
    pub fn build(dataset: &Dataset, m: usize) -> Result<Self> {
        let n = dataset.len();
        if m == 0 || m > n {
            return Err(Error::InvalidParameter(format!("bin count {m} must be in [1, {n}]")));
        }
        let mut sorted = dataset.durations();
        sorted.sort_unstable();
        let mut bounds: Vec<u32> = (1..=m).map(|j| sorted[j * n / m - 1]).collect();
        bounds.dedup();
        let mut assignment = vec![0; n];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); bounds.len()];
        for (i, row) in dataset.rows.iter().enumerate() {
            let b = bounds.partition_point(|&q| q < row.duration_s);
            assignment[i] = b;
            members[b].push(i);
        }
        let bins = members
            .into_iter()
            .map(|idx| {
                let durations = idx.iter().map(|&i| dataset.rows[i].duration_s);
                let lo = durations.clone().min().unwrap_or(0);
                let hi = durations.max().unwrap_or(0);
                DurationBin::new(lo, hi, idx.iter().map(|&i| dataset.rows[i].watch_time_s).collect())
            })
            .collect();
        Ok(DurationBins { bins, assignment })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Zeroes every label whose row watched less than `threshold_s` seconds.
pub fn denoise_postprocess(labels: &[f64], dataset: &Dataset, threshold_s: f64) -> Result<Vec<f64>> {
    if labels.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: labels.len(),
        });
    }
    Ok(labels
        .iter()
        .zip(&dataset.rows)
        .map(|(&l, row)| if row.watch_time_s < threshold_s { 0.0 } else { l })
        .collect())
}
