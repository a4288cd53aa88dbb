//! Watch time to interest label transforms.

mod baselines;
mod d2co;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baselines::{
    denoise_postprocess, group_watch_stats, label_d2q, label_pcr, label_wtg, DurationBin, DurationBins, GroupWatchStats,
};
pub use d2co::{
    error_decomposition, label_d2co_affine, label_d2co_sensitivity, sensitivity_affine,
    sensitivity_scontrolled_numeric, ErrorPoint,
};

use crate::data::{compute_stats, Dataset};
use crate::error::{Error, Result};
use crate::estimator::BiasNoiseCurves;
use crate::eval::{oracle_labels, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `w / w_max`
    WatchTime,
    Pcr,
    PcrDenoise,
    Wtg,
    WtgDenoise,
    D2q,
    D2qDenoise,
    D2coA,
    D2coS,
    /// Ground-truth interest used directly as the label.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::WatchTime,
        Method::Pcr,
        Method::PcrDenoise,
        Method::Wtg,
        Method::WtgDenoise,
        Method::D2q,
        Method::D2qDenoise,
        Method::D2coA,
        Method::D2coS,
        Method::Oracle,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::WatchTime => "watch_time",
            Method::Pcr => "pcr",
            Method::PcrDenoise => "pcr_denoise",
            Method::Wtg => "wtg",
            Method::WtgDenoise => "wtg_denoise",
            Method::D2q => "d2q",
            Method::D2qDenoise => "d2q_denoise",
            Method::D2coA => "d2co_a",
            Method::D2coS => "d2co_s",
            Method::Oracle => "oracle",
        }
    }

    pub fn is_denoised(self) -> bool {
        matches!(self, Method::PcrDenoise | Method::WtgDenoise | Method::D2qDenoise)
    }

    /// The undenoised variant of a denoised baseline.
    pub fn raw_variant(self) -> Method {
        match self {
            Method::PcrDenoise => Method::Pcr,
            Method::WtgDenoise => Method::Wtg,
            Method::D2qDenoise => Method::D2q,
            m => m,
        }
    }

    pub fn needs_curves(self) -> bool {
        matches!(self, Method::D2coA | Method::D2coS)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionParams {
    pub method: Method,
    /// Smoothed curves; required by the affine and exponential corrections.
    pub curves: Option<BiasNoiseCurves>,
    /// Sensitivity control term; required (non-zero) by the exponential
    /// correction.
    pub alpha: Option<f64>,
    /// Number of equal-frequency duration bins for the quantile baseline.
    pub bins: usize,
    pub denoise_threshold_s: f64,
    pub clip: bool,
}

impl CorrectionParams {
    pub fn new(method: Method) -> Self {
        CorrectionParams {
            method,
            curves: None,
            alpha: None,
            bins: 60,
            denoise_threshold_s: 5.0,
            clip: true,
        }
    }

    pub fn with_curves(mut self, curves: BiasNoiseCurves) -> Self {
        self.curves = Some(curves);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.method.needs_curves() && self.curves.is_none() {
            return Err(Error::InvalidParameter(format!(
                "{} needs bias/noise curves",
                self.method
            )));
        }
        if self.method == Method::D2coS {
            match self.alpha {
                Some(a) if a != 0.0 && a.is_finite() => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "d2co_s needs a finite non-zero alpha, got {other:?}"
                    )))
                }
            }
        }
        if matches!(self.method, Method::D2q | Method::D2qDenoise) && self.bins == 0 {
            return Err(Error::InvalidParameter("d2q needs at least one bin".into()));
        }
        Ok(())
    }
}

/// Labels for every row of a dataset, row-aligned, tagged with the method.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedDataset {
    pub method: Method,
    pub labels: Vec<f64>,
}

fn clip01(r: f64, clip: bool) -> f64 {
    if clip {
        r.clamp(0.0, 1.0)
    } else {
        r
    }
}

/// Labels every row of `dataset` with the configured method.
pub fn apply_method(dataset: &Dataset, params: &CorrectionParams) -> Result<CorrectedDataset> {
    params.validate()?;
    let stats = compute_stats(dataset)?;
    let rows = &dataset.rows;
    let clip = params.clip;
    let labels: Vec<f64> = match params.method.raw_variant() {
        Method::WatchTime => {
            if stats.w_max > 0.0 {
                rows.iter().map(|r| r.watch_time_s / stats.w_max).collect()
            } else {
                vec![0.0; rows.len()]
            }
        }
        Method::Pcr => rows
            .iter()
            .map(|r| clip01(label_pcr(r.watch_time_s, r.duration_s), clip))
            .collect(),
        Method::Wtg => {
            let groups = group_watch_stats(dataset);
            rows.iter()
                .map(|r| label_wtg(r.watch_time_s, &groups[&r.duration_s]))
                .collect()
        }
        Method::D2q => {
            let bins = DurationBins::build(dataset, params.bins)?;
            rows.iter()
                .zip(&bins.assignment)
                .map(|(r, &b)| label_d2q(r.watch_time_s, &bins.bins[b]))
                .collect()
        }
        Method::D2coA => {
            let curves = params.curves.as_ref().expect("validated");
            rows.par_iter()
                .map(|r| {
                    let (wp, wm) = curves.lookup(r.duration_s);
                    label_d2co_affine(r.watch_time_s, wp, wm, clip)
                })
                .collect::<Result<_>>()?
        }
        Method::D2coS => {
            let curves = params.curves.as_ref().expect("validated");
            let alpha = params.alpha.expect("validated");
            rows.par_iter()
                .map(|r| {
                    let (wp, wm) = curves.lookup(r.duration_s);
                    label_d2co_sensitivity(r.watch_time_s, wp, wm, alpha, clip)
                })
                .collect::<Result<_>>()?
        }
        Method::Oracle => oracle_labels(dataset, GroundTruth::Auto)?
            .into_iter()
            .map(|b| if b { 1.0 } else { 0.0 })
            .collect(),
        _ => unreachable!("raw_variant strips denoise"),
    };
    let labels = if params.method.is_denoised() {
        denoise_postprocess(&labels, dataset, params.denoise_threshold_s)?
    } else {
        labels
    };
    Ok(CorrectedDataset {
        method: params.method,
        labels,
    })
}

/// Writes the dataset with `label` and `method` columns appended.
pub fn write_corrected_csv<W: Write>(dataset: &Dataset, corrected: &CorrectedDataset, writer: W) -> Result<()> {
    if corrected.labels.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: corrected.labels.len(),
        });
    }
    let mut base = Vec::new();
    crate::data::write_csv(dataset, &mut base)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(base.as_slice());
    let mut wtr = csv::Writer::from_writer(writer);
    for (i, rec) in rdr.records().enumerate() {
        let mut rec = rec?;
        if i == 0 {
            rec.push_field("label");
            rec.push_field("method");
        } else {
            rec.push_field(&corrected.labels[i - 1].to_string());
            rec.push_field(corrected.method.id());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<labels writer>", e))?;
    Ok(())
}

/// Reads the `label` column of a file written by [`write_corrected_csv`].
pub fn read_labels_csv<R: std::io::Read>(reader: R) -> Result<(Method, Vec<f64>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::MissingColumn("label".into()))?;
    let method_col = headers
        .iter()
        .position(|h| h == "method")
        .ok_or_else(|| Error::MissingColumn("method".into()))?;
    let mut method = None;
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let raw = rec.get(label_col).unwrap_or("");
        labels.push(raw.parse::<f64>().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("label `{raw}` is not a number"),
        })?);
        if method.is_none() {
            method = Some(rec.get(method_col).unwrap_or("").parse::<Method>()?);
        }
    }
    let method = method.ok_or(Error::EmptyDataset)?;
    Ok((method, labels))
}
