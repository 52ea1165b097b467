use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Result of fitting `A·[1 + V·cos(2θ + φ)]` to rates at polarizer angles θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    /// Mean level A.
    pub amplitude: f64,
    pub visibility: f64,
    pub phase_deg: f64,
    /// Fitted extrema `A·(1 ± V)`, after clamping.
    pub c_max: f64,
    pub c_min: f64,
    /// One-sigma uncertainties from the fit covariance.
    pub amplitude_err: f64,
    pub visibility_err: f64,
    /// L2 norm of the unweighted residuals.
    pub residual_norm: f64,
    /// Weighted residual sum of squares per degree of freedom (0 when there
    /// are no spare points).
    pub reduced_chi2: f64,
    /// Set when the unclamped visibility exceeded 1.
    pub clamped: bool,
}

/// Inverse of the normal matrix, `None` if singular. Regressors are bounded
/// by 1, so `m[0][0]³` bounds the determinant.
fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m[0][0].powi(3);
    if !(scale > 0.0) || det.abs() <= 1e-10 * scale {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *v = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    Some(inv)
}

/// Weighted linear least squares on the regressors `{1, cos 2θ, sin 2θ}`.
///
/// `angles_deg` are polarizer-equivalent analyzer angles (twice the
/// half-wave-plate angle). With `sigmas`, weights are `1/σ²` and the
/// covariance is absolute; without, weights are uniform and the covariance
/// is scaled by the residual variance.
pub fn fit_sinusoid(
    angles_deg: &[f64],
    rates: &[f64],
    sigmas: Option<&[f64]>,
) -> Result<SinusoidFit> {
    let n = angles_deg.len();
    if rates.len() != n || sigmas.is_some_and(|s| s.len() != n) {
        return Err(Error::param(
            "rates",
            "angles, rates and uncertainties must have equal length",
        ));
    }
    if angles_deg.iter().chain(rates).any(|v| !v.is_finite()) {
        return Err(Error::param("rates", "angles and rates must be finite"));
    }
    let weights: Vec<f64> = match sigmas {
        Some(s) => {
            if s.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
                return Err(Error::param("uncertainties", "must be finite and >= 0"));
            }
            // zero uncertainties are raised to the smallest positive one
            let floor = s
                .iter()
                .copied()
                .filter(|&v| v > 0.0)
                .fold(f64::INFINITY, f64::min);
            let floor = if floor.is_finite() { floor } else { 1.0 };
            s.iter().map(|&v| 1.0 / v.max(floor).powi(2)).collect()
        }
        None => vec![1.0; n],
    };

    let basis = |deg: f64| {
        let x = (2.0 * deg).to_radians();
        [1.0, x.cos(), x.sin()]
    };
    let mut xtx = [[0.0; 3]; 3];
    let mut xty = [0.0; 3];
    for ((&a, &y), &w) in angles_deg.iter().zip(rates).zip(&weights) {
        let f = basis(a);
        for i in 0..3 {
            xty[i] += w * f[i] * y;
            for k in 0..3 {
                xtx[i][k] += w * f[i] * f[k];
            }
        }
    }
    let inv = invert3(xtx).ok_or(Error::RankDeficient)?;
    let c: Vec<f64> = (0..3)
        .map(|i| (0..3).map(|k| inv[i][k] * xty[k]).sum())
        .collect();

    let (mut rss, mut wrss) = (0.0, 0.0);
    for ((&a, &y), &w) in angles_deg.iter().zip(rates).zip(&weights) {
        let f = basis(a);
        let r = y - (c[0] * f[0] + c[1] * f[1] + c[2] * f[2]);
        rss += r * r;
        wrss += w * r * r;
    }
    let dof = n.saturating_sub(3);
    let reduced_chi2 = if dof > 0 { wrss / dof as f64 } else { 0.0 };
    let cov_scale = if sigmas.is_some() { 1.0 } else { reduced_chi2 };

    let offset = c[0];
    if !(offset > 0.0) {
        return Err(Error::UndefinedVisibility);
    }
    let amp = c[1].hypot(c[2]);
    let raw_v = amp / offset;
    let clamped = raw_v > 1.0;
    let visibility = raw_v.min(1.0);

    // delta method for V = |(c1, c2)| / c0
    let grad = if amp > 0.0 {
        [
            -raw_v / offset,
            c[1] / (amp * offset),
            c[2] / (amp * offset),
        ]
    } else {
        [0.0, 1.0 / offset, 0.0]
    };
    let mut var_v = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            var_v += grad[i] * inv[i][k] * grad[k];
        }
    }

    Ok(SinusoidFit {
        amplitude: offset,
        visibility,
        phase_deg: (-c[2]).atan2(c[1]).to_degrees(),
        c_max: offset * (1.0 + visibility),
        c_min: offset * (1.0 - visibility),
        amplitude_err: (inv[0][0] * cov_scale).sqrt(),
        visibility_err: (var_v * cov_scale).max(0.0).sqrt(),
        residual_norm: rss.sqrt(),
        reduced_chi2,
        clamped,
    })
}

/// Fringe contrast `(C_max − C_min)/(C_max + C_min)`.
pub fn visibility(c_max: f64, c_min: f64) -> Result<f64> {
    if !(c_min >= 0.0 && c_max >= c_min && c_max.is_finite()) {
        return Err(Error::param("c_max, c_min", "require C_max >= C_min >= 0"));
    }
    if c_max == 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok((c_max - c_min) / (c_max + c_min))
}

/// Rates with a constant accidental rate removed, and the refit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundCorrection {
    pub accidental_rate: f64,
    pub corrected_rates: Vec<f64>,
    /// Points whose corrected rate was negative and set to 0.
    pub clamped_points: usize,
    pub fit: SinusoidFit,
}

/// Subtracts `accidental` from every rate, clamps at 0 and refits. The
/// uncertainties, if given, are carried over unchanged.
pub fn background_correct(
    angles_deg: &[f64],
    rates: &[f64],
    sigmas: Option<&[f64]>,
    accidental: f64,
) -> Result<BackgroundCorrection> {
    if !(accidental.is_finite() && accidental >= 0.0) {
        return Err(Error::param("accidental", "must be a finite value >= 0"));
    }
    let raw = fit_sinusoid(angles_deg, rates, sigmas)?;
    if accidental > raw.c_max {
        return Err(Error::DegenerateCorrection {
            accidental,
            c_max: raw.c_max,
        });
    }
    let mut clamped_points = 0;
    let corrected_rates: Vec<f64> = rates
        .iter()
        .map(|&r| {
            let c = r - accidental;
            if c < 0.0 {
                clamped_points += 1;
                0.0
            } else {
                c
            }
        })
        .collect();
    let fit = fit_sinusoid(angles_deg, &corrected_rates, sigmas)?;
    Ok(BackgroundCorrection {
        accidental_rate: accidental,
        corrected_rates,
        clamped_points,
        fit,
    })
}
