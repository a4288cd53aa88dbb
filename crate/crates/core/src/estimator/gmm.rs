//! Two-component one-dimensional Gaussian mixture fitted by EM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_add_exp, mean_and_variance, percentile_sorted};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmOptions {
    pub min_group_size: usize,
    /// Stop when the relative log-likelihood change drops below this.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Lower bound on each component variance, in seconds squared.
    pub variance_floor: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            min_group_size: 50,
            tolerance: 1e-6,
            max_iter: 200,
            variance_floor: 1e-4,
        }
    }
}

/// Mixture fit for one duration group. The component with the larger mean is
/// the interest branch (`plus`), the other the noise branch (`minus`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEstimate {
    pub d: u32,
    pub w_plus_hat: f64,
    pub w_minus_hat: f64,
    pub var_plus: f64,
    pub var_minus: f64,
    /// Mixture weight of the interest branch; the group's mean interest.
    pub weight_plus: f64,
    pub count: usize,
    pub converged: bool,
    pub loglik: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Params {
    mean: [f64; 2],
    var: [f64; 2],
    weight: [f64; 2],
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * var.ln() - (x - mean).powi(2) / (2.0 * var)
}

/// E-step: responsibilities of component 1 and the log-likelihood of `p`.
fn e_step(values: &[f64], p: &Params, resp: &mut [f64]) -> f64 {
    let lw = [p.weight[0].ln(), p.weight[1].ln()];
    let mut ll = 0.0;
    for (x, r) in values.iter().zip(resp.iter_mut()) {
        let a = lw[0] + log_normal_pdf(*x, p.mean[0], p.var[0]);
        let b = lw[1] + log_normal_pdf(*x, p.mean[1], p.var[1]);
        let total = log_add_exp(a, b);
        *r = (b - total).exp();
        ll += total;
    }
    ll
}

fn m_step(values: &[f64], resp: &[f64], floor: f64) -> Params {
    let n = values.len() as f64;
    let mut nk = [0.0; 2];
    let mut sum = [0.0; 2];
    for (x, r1) in values.iter().zip(resp) {
        let r = [1.0 - r1, *r1];
        for k in 0..2 {
            nk[k] += r[k];
            sum[k] += r[k] * x;
        }
    }
    let mut mean = [0.0; 2];
    let mut var = [floor; 2];
    let mut weight = [0.0; 2];
    for k in 0..2 {
        // a component that lost every point keeps a tiny weight so logs stay finite
        let nk_k = nk[k].max(f64::MIN_POSITIVE);
        mean[k] = sum[k] / nk_k;
        weight[k] = (nk[k] / n).clamp(1e-300, 1.0);
    }
    let mut sq = [0.0; 2];
    for (x, r1) in values.iter().zip(resp) {
        let r = [1.0 - r1, *r1];
        for k in 0..2 {
            sq[k] += r[k] * (x - mean[k]).powi(2);
        }
    }
    for k in 0..2 {
        var[k] = (sq[k] / nk[k].max(f64::MIN_POSITIVE)).max(floor);
    }
    Params { mean, var, weight }
}

/// Fit result plus the log-likelihood after each E-step.
#[derive(Debug, Clone)]
pub struct GmmTrace {
    pub estimate: GroupEstimate,
    pub loglik_trace: Vec<f64>,
}

/// Fits the mixture to one group's watch times.
///
/// Values are sorted first, so the fit does not depend on input order. A
/// group whose values are all equal has no mixture structure and is reported
/// as [`Error::DegenerateGroup`] so callers can fill it by interpolation.
pub fn fit_group_gmm(d: u32, watch_times: &[f64], options: &GmmOptions) -> Result<GroupEstimate> {
    fit_group_gmm_traced(d, watch_times, options).map(|t| t.estimate)
}

pub fn fit_group_gmm_traced(d: u32, watch_times: &[f64], options: &GmmOptions) -> Result<GmmTrace> {
    let count = watch_times.len();
    if count < options.min_group_size.max(2) {
        return Err(Error::GroupTooSmall {
            count,
            min: options.min_group_size.max(2),
        });
    }
    if let Some(bad) = watch_times.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidParameter(format!("watch time {bad} in group {d}s")));
    }
    let mut values = watch_times.to_vec();
    values.sort_by(f64::total_cmp);
    if values[0] == values[count - 1] {
        return Err(Error::DegenerateGroup {
            value: values[0],
            count,
        });
    }

    let (_, sample_var) = mean_and_variance(&values);
    let init_var = sample_var.max(options.variance_floor);
    let mut params = Params {
        mean: [percentile_sorted(&values, 0.1), percentile_sorted(&values, 0.9)],
        var: [init_var; 2],
        weight: [0.5; 2],
    };

    let mut resp = vec![0.0; count];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut loglik = e_step(&values, &params, &mut resp);
    trace.push(loglik);
    while iterations < options.max_iter {
        params = m_step(&values, &resp, options.variance_floor);
        iterations += 1;
        let next = e_step(&values, &params, &mut resp);
        trace.push(next);
        let rel = (next - loglik).abs() / loglik.abs().max(f64::MIN_POSITIVE);
        loglik = next;
        if rel < options.tolerance {
            converged = true;
            break;
        }
    }

    let (minus, plus) = if params.mean[0] <= params.mean[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    Ok(GmmTrace {
        estimate: GroupEstimate {
            d,
            w_plus_hat: params.mean[plus],
            w_minus_hat: params.mean[minus],
            var_plus: params.var[plus],
            var_minus: params.var[minus],
            weight_plus: params.weight[plus],
            count,
            converged,
            loglik,
            iterations,
        },
        loglik_trace: trace,
    })
}

/// Log-likelihood of the maximum-likelihood single Gaussian.
pub fn single_gaussian_loglik(values: &[f64], variance_floor: f64) -> f64 {
    let (mean, var) = mean_and_variance(values);
    let var = var.max(variance_floor);
    values.iter().map(|x| log_normal_pdf(*x, mean, var)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn mixture(n: usize, w_low: f64, low: (f64, f64), high: (f64, f64), seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = Normal::new(low.0, low.1).unwrap();
        let hi = Normal::new(high.0, high.1).unwrap();
        // watch times are non-negative: redraw below zero
        (0..n)
            .map(|_| {
                let dist = if rng.random_bool(w_low) { &lo } else { &hi };
                loop {
                    let x = dist.sample(&mut rng);
                    if x >= 0.0 {
                        return x;
                    }
                }
            })
            .collect()
    }

    #[test]
    fn recovers_separated_components() {
        let values = mixture(10_000, 0.3, (5.0, 1.0), (40.0, 4.0), 42);
        let est = fit_group_gmm(30, &values, &GmmOptions::default()).unwrap();
        assert!(est.converged);
        assert!((est.w_minus_hat - 5.0).abs() < 0.2, "{est:?}");
        assert!((est.w_plus_hat - 40.0).abs() < 0.5, "{est:?}");
        assert!((est.weight_plus - 0.7).abs() < 0.03, "{est:?}");
    }

    #[test]
    fn loglik_never_decreases() {
        for seed in 0..10 {
            let values = mixture(2_000, 0.6, (2.0, 1.5), (6.0, 3.0), seed);
            let fit = fit_group_gmm_traced(10, &values, &GmmOptions::default()).unwrap();
            for w in fit.loglik_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn constant_group_is_degenerate() {
        let values = vec![12.0; 100];
        match fit_group_gmm(12, &values, &GmmOptions::default()) {
            Err(Error::DegenerateGroup { value, count }) => {
                assert_eq!(value, 12.0);
                assert_eq!(count, 100);
            }
            other => panic!("expected degenerate group, got {other:?}"),
        }
    }

    #[test]
    fn small_group_is_rejected() {
        let err = fit_group_gmm(1, &[1.0; 10], &GmmOptions::default()).unwrap_err();
        assert!(matches!(err, Error::GroupTooSmall { count: 10, min: 50 }));
    }

    #[test]
    fn order_does_not_matter() {
        let mut values = mixture(500, 0.5, (3.0, 1.0), (20.0, 3.0), 9);
        let a = fit_group_gmm(7, &values, &GmmOptions::default()).unwrap();
        values.reverse();
        values.swap(3, 400);
        let b = fit_group_gmm(7, &values, &GmmOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn repeated_values_respect_floor() {
        let mut values = vec![30.0; 300];
        values.extend(mixture(200, 1.0, (4.0, 1.0), (0.0, 1.0), 5));
        let opts = GmmOptions::default();
        let est = fit_group_gmm(30, &values, &opts).unwrap();
        assert!(est.var_plus >= opts.variance_floor && est.var_minus >= opts.variance_floor);
        assert!(est.w_minus_hat <= est.w_plus_hat);
        assert!((est.w_plus_hat - 30.0).abs() < 1e-3);
    }

    #[test]
    fn bimodal_beats_single_gaussian() {
        let values = mixture(3_000, 0.5, (5.0, 1.0), (15.0, 2.0), 1);
        let est = fit_group_gmm(20, &values, &GmmOptions::default()).unwrap();
        assert!(est.loglik > single_gaussian_loglik(&values, 1e-4));
    }
}
