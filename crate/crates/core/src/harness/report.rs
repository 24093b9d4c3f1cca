//! Log-log scaling fits over sweep summaries.
//!
//! The headline accuracy bound predicts the achieved gradient norm shrinks
//! like n^{−1/3} in the data axis and like (√d/(nε))^{1/2} in the privacy
//! axis. The report fits ordinary least squares on log(median grad norm)
//! against each axis and prints the slope with a 95% interval next to the
//! predicted exponent; at desk scale only the sign and rough magnitude are
//! expected to match.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::harness::sweep::SweepRow;
use crate::verify::normal_quantile;

/// Reference exponents the fits print beside.
pub const REFERENCE_N_EXPONENT: f64 = -1.0 / 3.0;
pub const REFERENCE_PRIVACY_EXPONENT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisFit {
    /// Human-readable predictor description.
    pub axis: String,
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reference: f64,
}

impl fmt::Display for AxisFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: slope {:+.4} (95% CI [{:+.4}, {:+.4}], {} points) vs reference {:+.4}",
            self.axis, self.slope, self.ci_low, self.ci_high, self.points, self.reference
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    /// log(grad median) vs log(n).
    pub n_fit: Option<AxisFit>,
    /// log(grad median) vs log(√d/(nε)); skips ε=∞ rows (predictor 0).
    pub privacy_fit: Option<AxisFit>,
}

impl fmt::Display for ScalingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.n_fit {
            Some(fit) => writeln!(f, "{fit}")?,
            None => writeln!(f, "data axis: fewer than 3 distinct n values")?,
        }
        match &self.privacy_fit {
            Some(fit) => write!(f, "{fit}"),
            None => write!(f, "privacy axis: fewer than 3 distinct finite √d/(nε) values"),
        }
    }
}

/// OLS of y on x with the normal-theory 95% band for the slope.
fn ols(points: &[(f64, f64)], axis: &str, reference: f64) -> Option<AxisFit> {
    let m = points.len();
    if m < 3 {
        return None;
    }
    let mf = m as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / mf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (ssr / (mf - 2.0) / sxx).sqrt();
    let z = normal_quantile(0.975).expect("0.975 is in range");
    Some(AxisFit {
        axis: axis.to_string(),
        points: m,
        slope,
        intercept,
        stderr,
        ci_low: slope - z * stderr,
        ci_high: slope + z * stderr,
        reference,
    })
}

/// Count of distinct predictor values, to enforce the ≥3-point rule on the
/// axis rather than on raw row count.
fn distinct(mut xs: Vec<f64>) -> usize {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.len()
}

pub fn scaling_report(rows: &[SweepRow]) -> Result<ScalingReport> {
    let usable: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.grad_median.is_some_and(|g| g > 0.0))
        .collect();
    let n_points: Vec<(f64, f64)> = usable
        .iter()
        .map(|r| ((r.n as f64).ln(), r.grad_median.unwrap().ln()))
        .collect();
    let n_fit = if distinct(n_points.iter().map(|p| p.0).collect()) >= 3 {
        ols(&n_points, "log grad median vs log n", REFERENCE_N_EXPONENT)
    } else {
        None
    };
    let privacy_points: Vec<(f64, f64)> = usable
        .iter()
        .filter(|r| r.eps.is_finite())
        .map(|r| {
            let predictor = (r.dim as f64).sqrt() / (r.n as f64 * r.eps);
            (predictor.ln(), r.grad_median.unwrap().ln())
        })
        .collect();
    let privacy_fit = if distinct(privacy_points.iter().map(|p| p.0).collect()) >= 3 {
        ols(
            &privacy_points,
            "log grad median vs log √d/(nε)",
            REFERENCE_PRIVACY_EXPONENT,
        )
    } else {
        None
    };
    if n_fit.is_none() && privacy_fit.is_none() {
        return Err(Error::TooFewSamples {
            min: 3,
            got: distinct(n_points.iter().map(|p| p.0).collect())
                .max(distinct(privacy_points.iter().map(|p| p.0).collect())),
        });
    }
    Ok(ScalingReport { n_fit, privacy_fit })
}
