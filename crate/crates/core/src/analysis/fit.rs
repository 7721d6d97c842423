//! Two-parameter exponential fit of a distance profile:
//! w̄(r) = a · exp(−(r − 2)/b), solved as a linear fit in log space.

use serde::{Deserialize, Serialize};

use super::{AnalysisError, DistanceProfile};

/// Fit region used throughout: 2 ≤ r ≤ 6.
pub const DEFAULT_FIT_RANGE: (usize, usize) = (2, 6);

/// Result of the exponential fit. `b` is the decay length in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub b: f64,
    pub a_err: f64,
    pub b_err: f64,
    pub r_range: (usize, usize),
}

/// Least squares of ln w̄(r) against (r − 2) over `r_min..=r_max`, weighted
/// by the profile standard errors when all of them are positive. Requires at
/// least three points with strictly positive w̄ in the range.
pub fn fit_exponential(
    profile: &DistanceProfile,
    r_min: usize,
    r_max: usize,
) -> Result<ExpFit, AnalysisError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sigmas = Vec::new();
    for (k, &r) in profile.r_values.iter().enumerate() {
        if r < r_min || r > r_max {
            continue;
        }
        let w = profile.w_bar[k];
        if !(w > 0.0) {
            return Err(AnalysisError::FitDomain { r, value: w });
        }
        xs.push((r as f64) - 2.0);
        ys.push(w.ln());
        // the error of ln w is stderr/w
        sigmas.push(profile.stderr[k] / w);
    }
    let n = xs.len();
    if n < 3 {
        return Err(AnalysisError::TooFewPoints { min: 3 });
    }

    let weighted = sigmas.iter().all(|&s| s > 0.0);
    let weights: Vec<f64> = if weighted {
        sigmas.iter().map(|s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; n]
    };

    let s_w: f64 = weights.iter().sum();
    let s_x: f64 = weights.iter().zip(&xs).map(|(w, x)| w * x).sum();
    let s_y: f64 = weights.iter().zip(&ys).map(|(w, y)| w * y).sum();
    let s_xx: f64 = weights.iter().zip(&xs).map(|(w, x)| w * x * x).sum();
    let s_xy: f64 = weights
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(w, (x, y))| w * x * y)
        .sum();
    let delta = s_w * s_xx - s_x * s_x;
    let slope = (s_w * s_xy - s_x * s_y) / delta;
    let intercept = (s_xx * s_y - s_x * s_xy) / delta;

    let (slope_var, intercept_var) = if weighted {
        // known per-point errors
        (s_w / delta, s_xx / delta)
    } else {
        // scale by the residual variance
        let ssr: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let res = y - (intercept + slope * x);
                res * res
            })
            .sum();
        let sigma2 = if n > 2 { ssr / (n - 2) as f64 } else { 0.0 };
        (sigma2 * s_w / delta, sigma2 * s_xx / delta)
    };

    if !(slope < 0.0) {
        return Err(AnalysisError::FitDegenerate);
    }
    let a = intercept.exp();
    let b = -1.0 / slope;
    Ok(ExpFit {
        a,
        b,
        a_err: a * intercept_var.max(0.0).sqrt(),
        b_err: slope_var.max(0.0).sqrt() / (slope * slope),
        r_range: (r_min, r_max),
    })
}

/// Builds a noiseless profile from the generator w̄(r) = a·e^{−(r−2)/b}.
#[cfg(test)]
pub(crate) fn synthetic_profile(a: f64, b: f64, r_max: usize) -> DistanceProfile {
    let r_values: Vec<usize> = (1..=r_max).collect();
    let w_bar: Vec<f64> = r_values
        .iter()
        .map(|&r| a * (-((r as f64) - 2.0) / b).exp())
        .collect();
    let stderr = vec![0.0; r_values.len()];
    DistanceProfile {
        origin: (1, 1),
        r_values,
        w_bar,
        stderr,
    }
}
