//! Synthetic watch-time logs with known interest and known bias/noise curves.
//!
//! Each row is drawn from the two-branch causal model: interest
//! `r ~ Bernoulli(p)`, then watch time from the interest branch centred on
//! the bias curve `w+(d)` or from the noise branch centred on `w-(d)`. So
//! `E[w | x] = p * w+(d) + (1 - p) * w-(d)` holds by construction.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema, Interaction};
use crate::error::{Error, Result};
use crate::math::sigmoid;

/// A parametric curve over duration (seconds) giving mean watch time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CurveFamily {
    /// `scale * d^exponent`
    PowerLaw {
        scale: f64,
        exponent: f64,
    },
    /// `ceiling * (1 - exp(-d / timescale))`
    Saturating {
        ceiling: f64,
        timescale: f64,
    },
    Constant {
        value: f64,
    },
    /// Linear interpolation through `(d, w)` knots, flat beyond the ends.
    Piecewise {
        knots: Vec<(f64, f64)>,
    },
}

impl CurveFamily {
    pub fn eval(&self, d: f64) -> f64 {
        match self {
            CurveFamily::PowerLaw { scale, exponent } => scale * d.powf(*exponent),
            CurveFamily::Saturating { ceiling, timescale } => ceiling * -(-d / timescale).exp_m1(),
            CurveFamily::Constant { value } => *value,
            CurveFamily::Piecewise { knots } => piecewise(knots, d),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            CurveFamily::PowerLaw { scale, exponent } => scale.is_finite() && exponent.is_finite(),
            CurveFamily::Saturating { ceiling, timescale } => ceiling.is_finite() && *timescale > 0.0,
            CurveFamily::Constant { value } => value.is_finite(),
            CurveFamily::Piecewise { knots } => {
                !knots.is_empty()
                    && knots.windows(2).all(|w| w[0].0 < w[1].0)
                    && knots.iter().all(|(d, w)| d.is_finite() && w.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad curve parameters {self:?}")))
        }
    }
}

fn piecewise(knots: &[(f64, f64)], d: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if d <= first.0 {
        return first.1;
    }
    if d >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= d);
    let (d0, w0) = knots[i - 1];
    let (d1, w1) = knots[i];
    w0 + (w1 - w0) * (d - d0) / (d1 - d0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    pub latent_dim: usize,
    /// Standard deviation of each latent coordinate.
    pub latent_std: f64,
    /// Inclusive `[d_min, d_max]` in seconds. Each item draws its duration
    /// log-uniformly from this range.
    pub duration_range: (u32, u32),
    pub bias_curve: CurveFamily,
    pub noise_curve: CurveFamily,
    pub noise_std_plus: f64,
    pub noise_std_minus: f64,
    /// Weight of standardized log-duration in the interest logit.
    pub duration_interest_coupling: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 500,
            n_items: 200,
            n_interactions: 50_000,
            latent_dim: 8,
            latent_std: 1.0,
            duration_range: (5, 240),
            bias_curve: CurveFamily::PowerLaw {
                scale: 2.0,
                exponent: 0.7,
            },
            noise_curve: CurveFamily::Saturating {
                ceiling: 10.0,
                timescale: 60.0,
            },
            noise_std_plus: 2.0,
            noise_std_minus: 1.0,
            duration_interest_coupling: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.duration_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidConfig(format!(
                "duration range ({lo}, {hi}) must satisfy 1 <= min <= max"
            )));
        }
        if self.n_users == 0 || self.n_items == 0 || self.latent_dim == 0 {
            return Err(Error::InvalidConfig(
                "users, items and latent_dim must be positive".into(),
            ));
        }
        if !(self.noise_std_plus >= 0.0 && self.noise_std_minus >= 0.0 && self.latent_std >= 0.0) {
            return Err(Error::InvalidConfig("standard deviations must be non-negative".into()));
        }
        if !self.duration_interest_coupling.is_finite() {
            return Err(Error::InvalidConfig("coupling must be finite".into()));
        }
        self.bias_curve.validate()?;
        self.noise_curve.validate()?;
        for d in lo..=hi {
            let (w_plus, w_minus) = self.curves_at(d);
            if !(w_minus >= 0.0 && w_minus < w_plus) {
                return Err(Error::CurveOrderViolation { d, w_plus, w_minus });
            }
        }
        Ok(())
    }

    fn curves_at(&self, d: u32) -> (f64, f64) {
        (self.bias_curve.eval(d as f64), self.noise_curve.eval(d as f64))
    }

    /// Log-duration standardized against the log-uniform duration law.
    pub fn standardized_log_duration(&self, d: u32) -> f64 {
        let (lo, hi) = self.duration_range;
        let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
        if b <= a {
            return 0.0;
        }
        let mean = (a + b) / 2.0;
        let std = (b - a) / 12f64.sqrt();
        ((d as f64).ln() - mean) / std
    }
}

/// Bias and noise curve values at `d`.
pub fn true_curves(config: &SynthConfig, d: u32) -> Result<(f64, f64)> {
    let (min, max) = config.duration_range;
    if d < min || d > max {
        return Err(Error::OutOfRangeDuration { d, min, max });
    }
    Ok(config.curves_at(d))
}

/// Hidden state behind one generated row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub p_interest: f64,
    pub r_sample: bool,
    pub w_plus_d: f64,
    pub w_minus_d: f64,
}

impl GroundTruthRecord {
    pub fn expected_watch_time(&self) -> f64 {
        self.p_interest * self.w_plus_d + (1.0 - self.p_interest) * self.w_minus_d
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return mean.max(0.0);
    }
    // mean >= 0 keeps the acceptance rate at or above one half
    let normal = Normal::new(mean, std).expect("validated std");
    loop {
        let w = normal.sample(rng);
        if w >= 0.0 {
            return w;
        }
    }
}

/// Draws a log; rows are row-aligned with the returned ground truth.
///
/// Item `v` gets its own duration, so every interaction with `v` shares it.
/// Timestamps are the row index, so chronological order is generation order.
pub fn generate(config: &SynthConfig) -> Result<(Dataset, Vec<GroundTruthRecord>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.latent_dim;
    let latent = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n * k)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * config.latent_std
            })
            .collect()
    };
    let users = latent(config.n_users, &mut rng);
    let items = latent(config.n_items, &mut rng);

    let (lo, hi) = config.duration_range;
    let (ln_lo, ln_hi) = ((lo as f64).ln(), (hi as f64).ln());
    let item_durations: Vec<u32> = (0..config.n_items)
        .map(|_| {
            let x = if ln_hi > ln_lo {
                rng.random_range(ln_lo..ln_hi)
            } else {
                ln_lo
            };
            (x.exp().round() as u32).clamp(lo, hi)
        })
        .collect();

    let mut rows = Vec::with_capacity(config.n_interactions);
    let mut truth = Vec::with_capacity(config.n_interactions);
    for t in 0..config.n_interactions {
        let u = rng.random_range(0..config.n_users);
        let v = rng.random_range(0..config.n_items);
        let d = item_durations[v];
        let affinity: f64 = users[u * k..(u + 1) * k]
            .iter()
            .zip(&items[v * k..(v + 1) * k])
            .map(|(a, b)| a * b)
            .sum();
        let p = sigmoid(affinity + config.duration_interest_coupling * config.standardized_log_duration(d));
        let r = rng.random_bool(p);
        let (w_plus, w_minus) = config.curves_at(d);
        let w = if r {
            truncated_normal(&mut rng, w_plus, config.noise_std_plus)
        } else {
            truncated_normal(&mut rng, w_minus, config.noise_std_minus)
        };
        let mut row = Interaction::new(format!("u{u}"), format!("i{v}"), w, d).with_timestamp(t as i64);
        row.true_interest = Some(r);
        rows.push(row);
        truth.push(GroundTruthRecord {
            p_interest: p,
            r_sample: r,
            w_plus_d: w_plus,
            w_minus_d: w_minus,
        });
    }
    Ok((Dataset::new(FeatureSchema::default(), rows), truth))
}

/// Copy of `dataset` whose watch times are replaced by their expectation.
pub fn with_expected_watch_time(dataset: &Dataset, truth: &[GroundTruthRecord]) -> Result<Dataset> {
    if dataset.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: truth.len(),
        });
    }
    let mut out = dataset.clone();
    for (row, gt) in out.rows.iter_mut().zip(truth) {
        row.watch_time_s = gt.expected_watch_time();
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct SidecarRow {
    p_interest: f64,
    r_sample: u8,
    w_plus_d: f64,
    w_minus_d: f64,
}

pub fn write_sidecar<W: Write>(truth: &[GroundTruthRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for gt in truth {
        wtr.serialize(SidecarRow {
            p_interest: gt.p_interest,
            r_sample: u8::from(gt.r_sample),
            w_plus_d: gt.w_plus_d,
            w_minus_d: gt.w_minus_d,
        })?;
    }
    wtr.flush().map_err(|e| Error::io("<sidecar writer>", e))?;
    Ok(())
}

pub fn read_sidecar<R: Read>(reader: R) -> Result<Vec<GroundTruthRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<SidecarRow>()
        .map(|row| {
            let row = row?;
            Ok(GroundTruthRecord {
                p_interest: row.p_interest,
                r_sample: row.r_sample != 0,
                w_plus_d: row.w_plus_d,
                w_minus_d: row.w_minus_d,
            })
        })
        .collect()
}
