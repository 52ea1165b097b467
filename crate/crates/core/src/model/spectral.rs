//! Spectral bookkeeping for the signal photons and timing-window acceptance.

use serde::{Deserialize, Serialize};

use super::fiber::SPEED_OF_LIGHT;
use super::params::SourceParams;
use crate::{Error, Result};

/// Crystal temperatures over which the linear tuning slope was measured.
pub const CALIBRATED_TEMPERATURE_C: (f64, f64) = (25.0, 45.0);

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunedWavelength {
    pub wavelength_nm: f64,
    /// Set when the temperature lies outside [`CALIBRATED_TEMPERATURE_C`].
    pub extrapolated: bool,
}

/// Signal center wavelength at crystal temperature `temperature_c`, from the
/// linear tuning curve through the source's reference point.
pub fn signal_wavelength(temperature_c: f64, source: &SourceParams) -> TunedWavelength {
    let (lo, hi) = CALIBRATED_TEMPERATURE_C;
    TunedWavelength {
        wavelength_nm: source.ref_wavelength_nm
            + source.wl_temp_slope_nm_per_k * (temperature_c - source.ref_temperature_c),
        extrapolated: !(lo..=hi).contains(&temperature_c),
    }
}

/// Removes a Gaussian instrument response from a measured Gaussian width.
pub fn gaussian_deconvolve(measured_fwhm: f64, resolution_fwhm: f64) -> Result<f64> {
    if !(resolution_fwhm >= 0.0) {
        return Err(Error::param("resolution_fwhm", "must be >= 0"));
    }
    if measured_fwhm < resolution_fwhm {
        return Err(Error::NonPhysicalDeconvolution {
            measured: measured_fwhm,
            resolution: resolution_fwhm,
        });
    }
    Ok(((measured_fwhm - resolution_fwhm) * (measured_fwhm + resolution_fwhm)).sqrt())
}

/// Optical bandwidth in GHz for a wavelength width `delta_nm` at `center_nm`.
pub fn bandwidth_to_frequency_ghz(delta_nm: f64, center_nm: f64) -> Result<f64> {
    if !(center_nm > 0.0) {
        return Err(Error::param("center_nm", "must be > 0"));
    }
    if !(delta_nm >= 0.0) {
        return Err(Error::param("delta_nm", "must be >= 0"));
    }
    let nu = SPEED_OF_LIGHT * (delta_nm * 1e-9) / (center_nm * 1e-9).powi(2);
    Ok(nu * 1e-9)
}

/// FWHM of the arrival-time difference for independent Gaussian contributions.
pub fn combined_fwhm_ps(contributions: &[f64]) -> f64 {
    contributions.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Fraction of true pairs whose detection-time difference falls inside a
/// window of full width `window_ns` centred on the correlation peak.
pub fn window_acceptance(
    jitter1_fwhm_ps: f64,
    jitter2_fwhm_ps: f64,
    pair_fwhm_ps: f64,
    window_ns: f64,
) -> Result<f64> {
    if !(window_ns > 0.0) {
        return Err(Error::param("window_ns", "must be > 0"));
    }
    let fwhm = combined_fwhm_ps(&[jitter1_fwhm_ps, jitter2_fwhm_ps, pair_fwhm_ps]);
    if fwhm == 0.0 {
        return Ok(1.0);
    }
    let sigma = fwhm / FWHM_PER_SIGMA;
    let half = window_ns * 1e3 / 2.0;
    Ok(libm::erf(half / (sigma * std::f64::consts::SQRT_2)))
}
