//! Frequency-weighted moving average over sorted duration keys.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{GroupFits, MissingGroup};
use crate::error::{Error, Result};

const REPAIR_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    Fitted,
    /// Filled linearly between the nearest fitted neighbours.
    Interpolated,
    /// Copied from the nearest fitted key at either end.
    Extended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub d: u32,
    pub count: usize,
    pub w_plus_raw: f64,
    pub w_minus_raw: f64,
    pub w_plus_smooth: f64,
    pub w_minus_smooth: f64,
    pub weight_plus: Option<f64>,
    pub converged: bool,
    pub source: PointSource,
    /// The smoothed noise term had to be pushed below the bias term.
    pub repaired: bool,
}

/// Smoothed bias and noise terms for every duration key seen in the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasNoiseCurves {
    pub window: usize,
    pub points: Vec<CurvePoint>,
}

impl BiasNoiseCurves {
    pub fn durations(&self) -> impl Iterator<Item = u32> + '_ {
        self.points.iter().map(|p| p.d)
    }

    /// Smoothed `(w+, w-)` at `d`: exact for a known key, linear between keys,
    /// nearest key outside the table.
    pub fn lookup(&self, d: u32) -> (f64, f64) {
        let pts = &self.points;
        let i = pts.partition_point(|p| p.d < d);
        if i < pts.len() && pts[i].d == d {
            return (pts[i].w_plus_smooth, pts[i].w_minus_smooth);
        }
        if i == 0 {
            return (pts[0].w_plus_smooth, pts[0].w_minus_smooth);
        }
        if i == pts.len() {
            let last = &pts[pts.len() - 1];
            return (last.w_plus_smooth, last.w_minus_smooth);
        }
        let (a, b) = (&pts[i - 1], &pts[i]);
        let t = (d - a.d) as f64 / (b.d - a.d) as f64;
        (
            a.w_plus_smooth + t * (b.w_plus_smooth - a.w_plus_smooth),
            a.w_minus_smooth + t * (b.w_minus_smooth - a.w_minus_smooth),
        )
    }

    /// Re-runs the moving average with another window over the stored raw
    /// values, keeping fills and counts.
    pub fn resmooth(&self, window: usize) -> BiasNoiseCurves {
        let mut points = self.points.clone();
        apply_window(&mut points, window);
        BiasNoiseCurves { window, points }
    }
}

/// Builds smoothed curves from per-group fits.
///
/// Every key in `fits` (fitted or missing) gets a point. Missing keys between
/// fitted ones are interpolated linearly in `d`; missing keys outside the
/// fitted span copy the nearest fitted key. The window then runs over
/// positions in the sorted key list, shrinking at both ends, with each key
/// weighted by its row count.
pub fn smooth_curves(fits: &GroupFits, window: usize) -> Result<BiasNoiseCurves> {
    if fits.fitted.is_empty() {
        return Err(Error::EmptyCurve);
    }
    let fitted: Vec<(u32, f64, f64)> = fits
        .fitted
        .values()
        .map(|e| (e.d, e.w_plus_hat, e.w_minus_hat))
        .collect();

    let mut keys: Vec<u32> = fits.fitted.keys().chain(fits.missing.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();

    let mut points = Vec::with_capacity(keys.len());
    for d in keys {
        if let Some(est) = fits.fitted.get(&d) {
            points.push(CurvePoint {
                d,
                count: est.count,
                w_plus_raw: est.w_plus_hat,
                w_minus_raw: est.w_minus_hat,
                w_plus_smooth: est.w_plus_hat,
                w_minus_smooth: est.w_minus_hat,
                weight_plus: Some(est.weight_plus),
                converged: est.converged,
                source: PointSource::Fitted,
                repaired: false,
            });
            continue;
        }
        let count = fits.missing.get(&d).map(MissingGroup::count).unwrap_or(0);
        let i = fitted.partition_point(|f| f.0 < d);
        let (w_plus, w_minus, source) = if i == 0 {
            (fitted[0].1, fitted[0].2, PointSource::Extended)
        } else if i == fitted.len() {
            let last = fitted[fitted.len() - 1];
            (last.1, last.2, PointSource::Extended)
        } else {
            let (a, b) = (fitted[i - 1], fitted[i]);
            let t = (d - a.0) as f64 / (b.0 - a.0) as f64;
            (a.1 + t * (b.1 - a.1), a.2 + t * (b.2 - a.2), PointSource::Interpolated)
        };
        points.push(CurvePoint {
            d,
            count,
            w_plus_raw: w_plus,
            w_minus_raw: w_minus,
            w_plus_smooth: w_plus,
            w_minus_smooth: w_minus,
            weight_plus: None,
            converged: false,
            source,
            repaired: false,
        });
    }
    apply_window(&mut points, window);
    Ok(BiasNoiseCurves { window, points })
}

fn apply_window(points: &mut [CurvePoint], window: usize) {
    let raw: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|p| (p.count as f64, p.w_plus_raw, p.w_minus_raw))
        .collect();
    let n = raw.len();
    for (i, p) in points.iter_mut().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(n - 1);
        let (mut mass, mut sp, mut sm) = (0.0, 0.0, 0.0);
        for &(c, wp, wm) in &raw[lo..=hi] {
            mass += c;
            sp += c * wp;
            sm += c * wm;
        }
        if window == 0 || mass <= 0.0 {
            p.w_plus_smooth = p.w_plus_raw;
            p.w_minus_smooth = p.w_minus_raw;
        } else {
            p.w_plus_smooth = sp / mass;
            p.w_minus_smooth = sm / mass;
        }
        p.repaired = p.w_minus_smooth >= p.w_plus_smooth;
        if p.repaired {
            p.w_minus_smooth = if p.w_plus_smooth > 0.0 {
                p.w_plus_smooth * (1.0 - REPAIR_EPSILON)
            } else {
                p.w_plus_smooth - REPAIR_EPSILON
            };
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    d: u32,
    w_plus_raw: f64,
    w_minus_raw: f64,
    w_plus_smooth: f64,
    w_minus_smooth: f64,
    weight_plus: Option<f64>,
    count: usize,
    converged: bool,
}

pub fn write_curves_csv<W: Write>(curves: &BiasNoiseCurves, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for p in &curves.points {
        wtr.serialize(CurveRow {
            d: p.d,
            w_plus_raw: p.w_plus_raw,
            w_minus_raw: p.w_minus_raw,
            w_plus_smooth: p.w_plus_smooth,
            w_minus_smooth: p.w_minus_smooth,
            weight_plus: p.weight_plus,
            count: p.count,
            converged: p.converged,
        })?;
    }
    wtr.flush().map_err(|e| Error::io("<curves writer>", e))?;
    Ok(())
}

/// Reads a curve table written by [`write_curves_csv`]. Rows without a
/// mixture weight were filled, not fitted; the window is not stored in the
/// file and must be supplied.
pub fn read_curves_csv<R: Read>(reader: R, window: usize) -> Result<BiasNoiseCurves> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut points: Vec<CurvePoint> = Vec::new();
    for row in rdr.deserialize::<CurveRow>() {
        let row = row?;
        points.push(CurvePoint {
            d: row.d,
            count: row.count,
            w_plus_raw: row.w_plus_raw,
            w_minus_raw: row.w_minus_raw,
            w_plus_smooth: row.w_plus_smooth,
            w_minus_smooth: row.w_minus_smooth,
            weight_plus: row.weight_plus,
            converged: row.converged,
            source: if row.weight_plus.is_some() {
                PointSource::Fitted
            } else {
                PointSource::Interpolated
            },
            repaired: false,
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if points.windows(2).any(|w| w[0].d >= w[1].d) {
        return Err(Error::InvalidParameter(
            "curve durations must be strictly increasing".into(),
        ));
    }
    Ok(BiasNoiseCurves { window, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::GroupEstimate;

    fn est(d: u32, count: usize, w_plus: f64, w_minus: f64) -> GroupEstimate {
        GroupEstimate {
            d,
            w_plus_hat: w_plus,
            w_minus_hat: w_minus,
            var_plus: 1.0,
            var_minus: 1.0,
            weight_plus: 0.5,
            count,
            converged: true,
            loglik: 0.0,
            iterations: 1,
        }
    }

    fn three() -> GroupFits {
        GroupFits::from_estimates([est(10, 2, 10.0, 1.0), est(20, 3, 20.0, 2.0), est(30, 5, 30.0, 3.0)])
    }

    #[test]
    fn hand_example_middle_key() {
        let curves = smooth_curves(&three(), 1).unwrap();
        assert!((curves.points[1].w_plus_smooth - 23.0).abs() < 1e-12);
        // boundary window shrinks to keys 0..=1
        assert!((curves.points[0].w_plus_smooth - 80.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_window_is_identity() {
        let curves = smooth_curves(&three(), 0).unwrap();
        for p in &curves.points {
            assert_eq!(p.w_plus_smooth, p.w_plus_raw);
            assert_eq!(p.w_minus_smooth, p.w_minus_raw);
        }
    }

    #[test]
    fn full_window_is_global_mean() {
        let curves = smooth_curves(&three(), 3).unwrap();
        for p in &curves.points {
            assert!((p.w_plus_smooth - 23.0).abs() < 1e-12);
            assert!((p.w_minus_smooth - 2.3).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_fits() {
        assert!(matches!(
            smooth_curves(&GroupFits::default(), 1),
            Err(Error::EmptyCurve)
        ));
    }

    #[test]
    fn missing_keys_are_filled() {
        let mut fits = GroupFits::from_estimates([est(10, 100, 10.0, 1.0), est(30, 100, 30.0, 3.0)]);
        fits.missing.insert(5, MissingGroup::TooSmall { count: 3 });
        fits.missing.insert(20, MissingGroup::TooSmall { count: 4 });
        fits.missing.insert(40, MissingGroup::TooSmall { count: 2 });
        let curves = smooth_curves(&fits, 0).unwrap();
        let ds: Vec<u32> = curves.durations().collect();
        assert_eq!(ds, [5, 10, 20, 30, 40]);
        assert_eq!(curves.points[0].source, PointSource::Extended);
        assert_eq!(curves.points[0].w_plus_smooth, 10.0);
        assert_eq!(curves.points[2].source, PointSource::Interpolated);
        assert_eq!(curves.points[2].w_plus_smooth, 20.0);
        assert_eq!(curves.points[2].w_minus_smooth, 2.0);
        assert_eq!(curves.points[4].w_plus_smooth, 30.0);
    }

    #[test]
    fn crossing_is_repaired() {
        let curves = smooth_curves(&GroupFits::from_estimates([est(10, 10, 5.0, 5.0)]), 0).unwrap();
        let p = &curves.points[0];
        assert!(p.repaired);
        assert!((p.w_minus_smooth - 5.0 * (1.0 - 1e-3)).abs() < 1e-12);
    }

    #[test]
    fn lookup_between_and_beyond_keys() {
        let curves = smooth_curves(&three(), 0).unwrap();
        assert_eq!(curves.lookup(20), (20.0, 2.0));
        assert_eq!(curves.lookup(15), (15.0, 1.5));
        assert_eq!(curves.lookup(1), (10.0, 1.0));
        assert_eq!(curves.lookup(99), (30.0, 3.0));
    }

    #[test]
    fn csv_round_trip_and_resmooth() {
        let curves = smooth_curves(&three(), 1).unwrap();
        let mut buf = Vec::new();
        write_curves_csv(&curves, &mut buf).unwrap();
        let back = read_curves_csv(buf.as_slice(), 1).unwrap();
        assert_eq!(back.points.len(), 3);
        assert_eq!(back.points[1].w_plus_smooth, curves.points[1].w_plus_smooth);
        assert_eq!(back.resmooth(0).points[1].w_plus_smooth, 20.0);
        assert_eq!(back.resmooth(1), curves.resmooth(1));
    }
}
