//! Ranking metrics against ground-truth interest.
//!
//! GAUC weights each user's AUC by their row count; nDCG@k averages users
//! uniformly. Users with no positives (and, for GAUC, no negatives) are
//! skipped and counted.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{derive_interest_label, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub n_users_evaluated: usize,
    pub n_users_skipped: usize,
}

fn check_aligned(scores: &[f64], labels: &[bool], users: &[&str]) -> Result<()> {
    for len in [labels.len(), users.len()] {
        if len != scores.len() {
            return Err(Error::LengthMismatch {
                expected: scores.len(),
                actual: len,
            });
        }
    }
    Ok(())
}

/// Row indices per user, users in sorted order.
fn by_user<'a>(users: &[&'a str]) -> BTreeMap<&'a str, Vec<usize>> {
    let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, u) in users.iter().enumerate() {
        map.entry(*u).or_default().push(i);
    }
    map
}

/// AUC with tied scores counting one half, via average ranks.
/// `None` when the rows are all positive or all negative.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn gauc(scores: &[f64], labels: &[bool], users: &[&str]) -> Result<MetricValue> {
    check_aligned(scores, labels, users)?;
    let mut weighted = 0.0;
    let mut weight = 0usize;
    let (mut evaluated, mut skipped) = (0, 0);
    for idx in by_user(users).values() {
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        match auc(&s, &l) {
            Some(a) => {
                weighted += a * idx.len() as f64;
                weight += idx.len();
                evaluated += 1;
            }
            None => skipped += 1,
        }
    }
    if evaluated == 0 {
        return Err(Error::NoEvaluableUsers);
    }
    Ok(MetricValue {
        value: weighted / weight as f64,
        n_users_evaluated: evaluated,
        n_users_skipped: skipped,
    })
}

/// Indices sorted by score descending; ties keep row order.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    order
}

/// DCG@k of one ranked list with binary relevance.
pub fn dcg_at_k(scores: &[f64], labels: &[bool], k: usize) -> f64 {
    ranked(scores)
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &i)| labels[i])
        .map(|(pos, _)| 1.0 / ((pos + 2) as f64).log2())
        .sum()
}

fn ideal_dcg(positives: usize, k: usize) -> f64 {
    (0..positives.min(k)).map(|pos| 1.0 / ((pos + 2) as f64).log2()).sum()
}

pub fn ndcg_at_k(scores: &[f64], labels: &[bool], users: &[&str], k: usize) -> Result<MetricValue> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    check_aligned(scores, labels, users)?;
    let mut total = 0.0;
    let (mut evaluated, mut skipped) = (0, 0);
    for idx in by_user(users).values() {
        let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        let positives = l.iter().filter(|&&x| x).count();
        if positives == 0 {
            skipped += 1;
            continue;
        }
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        total += dcg_at_k(&s, &l, k) / ideal_dcg(positives, k);
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::NoEvaluableUsers);
    }
    Ok(MetricValue {
        value: total / evaluated as f64,
        n_users_evaluated: evaluated,
        n_users_skipped: skipped,
    })
}

/// Kendall's tau-b in O(n log n) (Knight's merge-sort count).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two points".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let pairs = |len: u64| len * len.saturating_sub(1) / 2;
    let (mut tied_x, mut tied_xy) = (0u64, 0u64);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[order[j]] == x[order[i]] {
            j += 1;
        }
        tied_x += pairs((j - i) as u64);
        let mut a = i;
        while a < j {
            let mut b = a + 1;
            while b < j && y[order[b]] == y[order[a]] {
                b += 1;
            }
            tied_xy += pairs((b - a) as u64);
            a = b;
        }
        i = j;
    }

    let mut ys: Vec<f64> = order.iter().map(|&k| y[k]).collect();
    let swaps = merge_count(&mut ys);

    let mut tied_y = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        tied_y += pairs((j - i) as u64);
        i = j;
    }

    let total = pairs(n as u64);
    let concordant_minus_discordant =
        total as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    let denom = ((total - tied_x) as f64 * (total - tied_y) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::InvalidParameter("one variable is constant".into()));
    }
    Ok(concordant_minus_discordant / denom)
}

/// Sorts ascending, returning the number of strict inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..]);
    v.copy_from_slice(&merged);
    swaps
}

/// Metrics for one equal-frequency duration range `(lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeMetrics {
    pub lo: u32,
    pub hi: u32,
    pub n_rows: usize,
    /// `None` when the range is empty or has no evaluable user.
    pub gauc: Option<f64>,
    pub ndcg: BTreeMap<usize, Option<f64>>,
}

/// Upper boundaries of `n_ranges` equal-frequency duration ranges.
pub fn duration_range_bounds(durations: &[u32], n_ranges: usize) -> Vec<u32> {
    let mut sorted = durations.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    (1..=n_ranges).map(|j| sorted[(j * n / n_ranges).max(1) - 1]).collect()
}

/// Splits rows into equal-frequency duration ranges and evaluates each one
/// on its own. Every row lands in exactly one range.
pub fn duration_breakdown(
    scores: &[f64],
    labels: &[bool],
    users: &[&str],
    durations: &[u32],
    n_ranges: usize,
    ks: &[usize],
) -> Result<Vec<RangeMetrics>> {
    check_aligned(scores, labels, users)?;
    if durations.len() != scores.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            actual: durations.len(),
        });
    }
    if n_ranges == 0 {
        return Err(Error::InvalidParameter("need at least one duration range".into()));
    }
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let bounds = duration_range_bounds(durations, n_ranges);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_ranges];
    for (i, &d) in durations.iter().enumerate() {
        let r = bounds.partition_point(|&b| b < d).min(n_ranges - 1);
        members[r].push(i);
    }
    let mut out = Vec::with_capacity(n_ranges);
    for (r, idx) in members.iter().enumerate() {
        let lo = if r == 0 { 0 } else { bounds[r - 1] };
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        let u: Vec<&str> = idx.iter().map(|&i| users[i]).collect();
        let gauc_value = gauc(&s, &l, &u).ok().map(|m| m.value);
        let ndcg = ks
            .iter()
            .map(|&k| (k, ndcg_at_k(&s, &l, &u, k).ok().map(|m| m.value)))
            .collect();
        out.push(RangeMetrics {
            lo,
            hi: bounds[r],
            n_rows: idx.len(),
            gauc: gauc_value,
            ndcg,
        });
    }
    Ok(out)
}

/// Share of the watch-time-to-oracle gap that a method closes.
pub fn improve_percentage(v_method: f64, v_watchtime: f64, v_oracle: f64) -> Result<f64> {
    let denom = v_oracle - v_watchtime;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateDenominator(v_oracle));
    }
    Ok((v_method - v_watchtime) / denom)
}

/// Source of ground-truth interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    /// The long-view rule on watch time and duration.
    LongView,
    /// The recorded `true_interest` column; every row must have it.
    Recorded,
    /// Recorded interest when every row has it, long view otherwise.
    Auto,
}

pub fn oracle_labels(dataset: &Dataset, source: GroundTruth) -> Result<Vec<bool>> {
    let all_recorded = dataset.rows.iter().all(|r| r.true_interest.is_some());
    let recorded = match source {
        GroundTruth::LongView => false,
        GroundTruth::Recorded => true,
        GroundTruth::Auto => all_recorded && !dataset.is_empty(),
    };
    if recorded {
        dataset
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.true_interest.ok_or(Error::MissingGroundTruth(i)))
            .collect()
    } else {
        Ok(dataset.rows.iter().map(derive_interest_label).collect())
    }
}

/// Test-set metrics for one method (and one run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub seed: u64,
    pub gauc: f64,
    pub ndcg_at: BTreeMap<usize, f64>,
    pub ranges: Vec<RangeMetrics>,
    /// Per-range improve percentage of GAUC against watch time and oracle.
    pub improve_pct: Vec<Option<f64>>,
    pub n_users_evaluated: usize,
    pub n_users_skipped: usize,
}

impl EvalReport {
    pub fn evaluate(
        method: &str,
        seed: u64,
        scores: &[f64],
        labels: &[bool],
        dataset: &Dataset,
        ks: &[usize],
        n_ranges: usize,
    ) -> Result<EvalReport> {
        let users = dataset.user_ids();
        let g = gauc(scores, labels, &users)?;
        let ndcg_at = ks
            .iter()
            .map(|&k| ndcg_at_k(scores, labels, &users, k).map(|m| (k, m.value)))
            .collect::<Result<_>>()?;
        let ranges = duration_breakdown(scores, labels, &users, &dataset.durations(), n_ranges, ks)?;
        Ok(EvalReport {
            method: method.to_string(),
            seed,
            gauc: g.value,
            ndcg_at,
            improve_pct: vec![None; ranges.len()],
            ranges,
            n_users_evaluated: g.n_users_evaluated,
            n_users_skipped: g.n_users_skipped,
        })
    }

    /// Fills `improve_pct` from the matching watch-time and oracle reports.
    pub fn set_improvement(&mut self, watch_time: &EvalReport, oracle: &EvalReport) {
        self.improve_pct = self
            .ranges
            .iter()
            .zip(&watch_time.ranges)
            .zip(&oracle.ranges)
            .map(|((m, w), o)| match (m.gauc, w.gauc, o.gauc) {
                (Some(m), Some(w), Some(o)) => improve_percentage(m, w, o).ok(),
                _ => None,
            })
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Pairwise AUC oracle: ties count one half.
    fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        Ordering::Greater => 1.0,
                        Ordering::Equal => 0.5,
                        Ordering::Less => 0.0,
                    };
                }
            }
        }
        num / den
    }

    fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
        let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let sx = (x[i] - x[j]).signum() * f64::from(x[i] != x[j]);
                let sy = (y[i] - y[j]).signum() * f64::from(y[i] != y[j]);
                if sx == 0.0 && sy == 0.0 {
                } else if sx == 0.0 {
                    tx += 1.0;
                } else if sy == 0.0 {
                    ty += 1.0;
                } else if sx == sy {
                    c += 1.0;
                } else {
                    d += 1.0;
                }
            }
        }
        (c - d) / ((c + d + tx) * (c + d + ty)).sqrt()
    }

    #[test]
    fn gauc_examples() {
        let v = gauc(&[0.9, 0.1], &[true, false], &["u", "u"]).unwrap();
        assert_eq!(v.value, 1.0);
        let v = gauc(&[0.5, 0.5], &[true, false], &["u", "u"]).unwrap();
        assert_eq!(v.value, 0.5);
        let scores = [0.9, 0.8, 0.2, 0.1, 0.3, 0.3];
        let labels = [true, true, false, false, true, false];
        let users = ["a", "a", "a", "a", "b", "b"];
        let v = gauc(&scores, &labels, &users).unwrap();
        assert!((v.value - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!((v.n_users_evaluated, v.n_users_skipped), (2, 0));
    }

    #[test]
    fn gauc_skips_single_class_users() {
        let v = gauc(&[0.9, 0.1, 0.4], &[true, false, true], &["a", "a", "b"]).unwrap();
        assert_eq!((v.value, v.n_users_skipped), (1.0, 1));
        assert!(matches!(
            gauc(&[0.1, 0.2], &[true, true], &["a", "a"]),
            Err(Error::NoEvaluableUsers)
        ));
    }

    #[test]
    fn auc_matches_pairwise_count() {
        let scores = [0.3, 0.3, 0.1, 0.9, 0.5, 0.5, 0.5, 0.2];
        let labels = [true, false, false, true, true, false, true, false];
        assert!((auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn ndcg_examples() {
        let v = ndcg_at_k(&[0.9, 0.1], &[true, false], &["u", "u"], 1).unwrap();
        assert_eq!(v.value, 1.0);
        let v = ndcg_at_k(&[0.9, 0.1], &[false, true], &["u", "u"], 2).unwrap();
        assert!((v.value - 1.0 / 3f64.log2()).abs() < 1e-12);
        for k in 1..5 {
            let v = ndcg_at_k(&[0.1, 0.7, 0.3], &[true; 3], &["u"; 3], k).unwrap();
            assert!((v.value - 1.0).abs() < 1e-12);
        }
        assert!(ndcg_at_k(&[0.1], &[true], &["u"], 0).is_err());
    }

    #[test]
    fn ndcg_ties_keep_row_order() {
        let v = ndcg_at_k(&[0.5, 0.5], &[false, true], &["u", "u"], 1).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn tau_b_matches_brute_force() {
        let x = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0, 0.5, 7.0];
        let y = [0.3, 0.1, 0.1, 0.9, 0.2, 0.2, 0.8, 0.0, 0.8];
        assert!((kendall_tau_b(&x, &y).unwrap() - brute_tau_b(&x, &y)).abs() < 1e-12);
        let z: Vec<f64> = x.iter().map(|v| v * 3.0 + 1.0).collect();
        assert!((kendall_tau_b(&x, &z).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn breakdown_single_range_equals_global() {
        let scores = [0.9, 0.8, 0.2, 0.1, 0.3, 0.3];
        let labels = [true, true, false, false, true, false];
        let users = ["a", "a", "a", "a", "b", "b"];
        let durations = [10, 20, 30, 40, 50, 60];
        let r = duration_breakdown(&scores, &labels, &users, &durations, 1, &[1, 3]).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].gauc, Some(gauc(&scores, &labels, &users).unwrap().value));
        assert_eq!(r[0].n_rows, 6);
        assert_eq!((r[0].lo, r[0].hi), (0, 60));
    }

    #[test]
    fn breakdown_assigns_each_row_once() {
        let durations: Vec<u32> = (0..90).map(|i| 1 + (i * 37 % 240) as u32).collect();
        let scores: Vec<f64> = (0..90).map(|i| (i * 13 % 7) as f64).collect();
        let labels: Vec<bool> = (0..90).map(|i| i % 3 == 0).collect();
        let users: Vec<&str> = (0..90).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
        let r = duration_breakdown(&scores, &labels, &users, &durations, 3, &[1]).unwrap();
        assert_eq!(r.iter().map(|m| m.n_rows).sum::<usize>(), 90);
        assert!(r.iter().all(|m| m.n_rows == 30));
    }

    #[test]
    fn breakdown_reports_empty_ranges_as_absent() {
        let r = duration_breakdown(&[0.1, 0.2], &[true, false], &["a", "a"], &[5, 5], 2, &[1]).unwrap();
        let empty = r.iter().find(|m| m.n_rows == 0).unwrap();
        assert_eq!(empty.gauc, None);
        assert_eq!(empty.ndcg[&1], None);
    }

    #[test]
    fn improve_percentage_examples() {
        assert_eq!(improve_percentage(0.409, 0.380, 0.409).unwrap(), 1.0);
        assert_eq!(improve_percentage(0.380, 0.380, 0.409).unwrap(), 0.0);
        let v = improve_percentage(0.391, 0.380, 0.409).unwrap();
        assert!((v - 0.368).abs() < 0.05);
        assert!(matches!(
            improve_percentage(0.4, 0.5, 0.5),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn oracle_sources() {
        use crate::data::{FeatureSchema, Interaction};
        let mut a = Interaction::new("u", "i", 19.0, 20);
        let b = Interaction::new("u", "j", 14.0, 15);
        let ds = Dataset::new(FeatureSchema::default(), vec![a.clone(), b.clone()]);
        assert_eq!(oracle_labels(&ds, GroundTruth::Auto).unwrap(), [true, false]);
        assert!(matches!(
            oracle_labels(&ds, GroundTruth::Recorded),
            Err(Error::MissingGroundTruth(0))
        ));
        a.true_interest = Some(false);
        let mut b = b;
        b.true_interest = Some(true);
        let ds = Dataset::new(FeatureSchema::default(), vec![a, b]);
        assert_eq!(oracle_labels(&ds, GroundTruth::Auto).unwrap(), [false, true]);
        assert_eq!(oracle_labels(&ds, GroundTruth::LongView).unwrap(), [true, false]);
    }
}
