//! Per-duration estimates of the bias term `w+(d)` and noise term `w-(d)`.
//!
//! Each duration group gets its own two-component mixture fit; the fitted
//! means are then smoothed across neighbouring durations with a
//! frequency-weighted moving average.

mod gmm;
mod smoothing;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use gmm::{fit_group_gmm, fit_group_gmm_traced, single_gaussian_loglik, GmmOptions, GmmTrace, GroupEstimate};
pub use smoothing::{read_curves_csv, smooth_curves, write_curves_csv, BiasNoiseCurves, CurvePoint, PointSource};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// A duration group that produced no usable fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MissingGroup {
    TooSmall { count: usize },
    Degenerate { count: usize, value: f64 },
}

impl MissingGroup {
    pub fn count(&self) -> usize {
        match *self {
            MissingGroup::TooSmall { count } | MissingGroup::Degenerate { count, .. } => count,
        }
    }
}

/// Fitted and unfitted duration groups, keyed by duration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupFits {
    pub fitted: BTreeMap<u32, GroupEstimate>,
    pub missing: BTreeMap<u32, MissingGroup>,
}

impl GroupFits {
    pub fn from_estimates(estimates: impl IntoIterator<Item = GroupEstimate>) -> Self {
        GroupFits {
            fitted: estimates.into_iter().map(|e| (e.d, e)).collect(),
            missing: BTreeMap::new(),
        }
    }
}

/// Fits every duration group of `dataset` in parallel.
pub fn fit_all_groups(dataset: &Dataset, options: &GmmOptions) -> Result<GroupFits> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let groups: Vec<(u32, Vec<f64>)> = dataset
        .duration_groups()
        .into_iter()
        .map(|(d, idx)| (d, idx.iter().map(|&i| dataset.rows[i].watch_time_s).collect()))
        .collect();

    let results: Vec<(u32, Result<GroupEstimate>)> = groups
        .par_iter()
        .map(|(d, values)| (*d, fit_group_gmm(*d, values, options)))
        .collect();

    let mut fits = GroupFits::default();
    for (d, res) in results {
        match res {
            Ok(est) => {
                fits.fitted.insert(d, est);
            }
            Err(Error::GroupTooSmall { count, .. }) => {
                fits.missing.insert(d, MissingGroup::TooSmall { count });
            }
            Err(Error::DegenerateGroup { value, count }) => {
                fits.missing.insert(d, MissingGroup::Degenerate { count, value });
            }
            Err(e) => return Err(e),
        }
    }
    if fits.fitted.is_empty() {
        return Err(Error::NoFittableGroups);
    }
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, Interaction};

    fn rows_for(d: u32, n: usize) -> Vec<Interaction> {
        (0..n)
            .map(|i| {
                let w = if i % 3 == 0 {
                    0.5 + (i % 7) as f64 * 0.1
                } else {
                    d as f64 * 0.8 + (i % 5) as f64
                };
                Interaction::new("u", "i", w, d)
            })
            .collect()
    }

    #[test]
    fn one_estimate_per_populated_group() {
        let mut rows = rows_for(10, 1_000);
        rows.extend(rows_for(20, 1_000));
        rows.extend(rows_for(30, 5));
        let fits = fit_all_groups(&Dataset::new(FeatureSchema::default(), rows), &GmmOptions::default()).unwrap();
        assert_eq!(fits.fitted.keys().copied().collect::<Vec<_>>(), [10, 20]);
        assert_eq!(fits.missing.get(&30), Some(&MissingGroup::TooSmall { count: 5 }));
    }

    #[test]
    fn singleton_groups_are_not_fittable() {
        let rows = (1..=40).map(|d| Interaction::new("u", "i", 1.0, d)).collect();
        let err = fit_all_groups(&Dataset::new(FeatureSchema::default(), rows), &GmmOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoFittableGroups));
    }

    #[test]
    fn constant_group_recorded_as_missing() {
        let mut rows = rows_for(10, 200);
        rows.extend((0..100).map(|_| Interaction::new("u", "i", 15.0, 15)));
        let fits = fit_all_groups(&Dataset::new(FeatureSchema::default(), rows), &GmmOptions::default()).unwrap();
        assert!(matches!(
            fits.missing.get(&15),
            Some(MissingGroup::Degenerate { count: 100, .. })
        ));
    }
}
