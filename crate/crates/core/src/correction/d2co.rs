//! Affine and exponential debias/denoise corrections and their sensitivity
//! to errors in the estimated curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::BiasNoiseCurves;

fn check_curves(w_plus: f64, w_minus: f64) -> Result<()> {
    if w_plus > w_minus {
        Ok(())
    } else {
        Err(Error::CurveCollapse { w_plus, w_minus })
    }
}

fn clip01(r: f64, clip: bool) -> f64 {
    if clip {
        r.clamp(0.0, 1.0)
    } else {
        r
    }
}

/// `(w - w-) / (w+ - w-)`: the interest probability when `w` is the
/// expected watch time and the curves are exact.
pub fn label_d2co_affine(w: f64, w_plus: f64, w_minus: f64, clip: bool) -> Result<f64> {
    check_curves(w_plus, w_minus)?;
    Ok(clip01((w - w_minus) / (w_plus - w_minus), clip))
}

/// `(e^{aw} - e^{aw-}) / (e^{aw+} - e^{aw-})`.
///
/// The larger exponential is factored out (`e^{a w-}` for `a > 0`,
/// `e^{a w+}` for `a < 0`) and differences go through `exp_m1`, so the
/// result stays accurate as `a -> 0`.
pub fn label_d2co_sensitivity(w: f64, w_plus: f64, w_minus: f64, alpha: f64, clip: bool) -> Result<f64> {
    check_curves(w_plus, w_minus)?;
    let r = exp_ratio(w, w_plus, w_minus, alpha)?;
    Ok(clip01(r, clip))
}

fn exp_ratio(w: f64, w_plus: f64, w_minus: f64, alpha: f64) -> Result<f64> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be finite and non-zero, got {alpha}"
        )));
    }
    let r = if alpha > 0.0 {
        (alpha * (w - w_minus)).exp_m1() / (alpha * (w_plus - w_minus)).exp_m1()
    } else {
        let low = (alpha * (w_minus - w_plus)).exp_m1();
        ((alpha * (w - w_plus)).exp_m1() - low) / -low
    };
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::NumericOverflow { alpha, w })
    }
}

fn check_interval(w: f64, w_plus: f64, w_minus: f64) -> Result<()> {
    check_curves(w_plus, w_minus)?;
    if w < w_minus || w > w_plus {
        return Err(Error::OutOfInterval { w, w_minus, w_plus });
    }
    Ok(())
}

/// Closed-form sensitivity of the affine label to disturbances `delta_plus`
/// of `w+` and `delta_minus` of `w-`. Returns `(S+, S-)`.
pub fn sensitivity_affine(w: f64, w_plus: f64, w_minus: f64, delta_plus: f64, delta_minus: f64) -> Result<(f64, f64)> {
    check_interval(w, w_plus, w_minus)?;
    let span2 = (w_plus - w_minus).powi(2);
    Ok((
        (w - w_minus) / span2 * delta_plus.abs(),
        (w_plus - w) / span2 * delta_minus.abs(),
    ))
}

/// Sensitivity of the exponential label, by central finite differences with
/// step `min(1e-4, |delta| / 10)`. Returns `(S'+, S'-)`.
pub fn sensitivity_scontrolled_numeric(
    w: f64,
    w_plus: f64,
    w_minus: f64,
    alpha: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    check_interval(w, w_plus, w_minus)?;
    let h = (1e-4f64).min(delta.abs() / 10.0);
    if h == 0.0 {
        return Ok((0.0, 0.0));
    }
    let f = |wp: f64, wm: f64| exp_ratio(w, wp, wm, alpha);
    let d_plus = (f(w_plus + h, w_minus)? - f(w_plus - h, w_minus)?) / (2.0 * h);
    let d_minus = (f(w_plus, w_minus + h)? - f(w_plus, w_minus - h)?) / (2.0 * h);
    Ok((d_plus.abs() * delta.abs(), d_minus.abs() * delta.abs()))
}

/// Per-duration gap between scaled watch time and interest, split into the
/// part caused by duration bias and the part caused by noisy watching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub d: u32,
    pub bias_err: f64,
    pub noise_err: f64,
}

pub fn error_decomposition(curves: &BiasNoiseCurves, w_max: f64) -> Result<Vec<ErrorPoint>> {
    if curves.points.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if !(w_max > 0.0) {
        return Err(Error::InvalidParameter(format!("w_max must be positive, got {w_max}")));
    }
    Ok(curves
        .points
        .iter()
        .map(|p| ErrorPoint {
            d: p.d,
            bias_err: (w_max - p.w_plus_smooth) / w_max,
            noise_err: p.w_minus_smooth / w_max,
        })
        .collect())
}
