//! Fiber propagation: group delay and chromatic pulse spreading.

use super::params::FiberParams;
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Group delay through the fiber in microseconds, `L·n_g/c`.
pub fn propagation_delay_us(fiber: &FiberParams) -> f64 {
    fiber.length_km * 1e3 * fiber.group_index / SPEED_OF_LIGHT * 1e6
}

/// Group delay rounded to whole picoseconds, as applied to timestamps.
pub fn propagation_delay_ps(fiber: &FiberParams) -> u64 {
    (propagation_delay_us(fiber) * 1e6).round() as u64
}

/// Dispersion coefficient D(λ) in ps/(nm km) from the standard G.652 form
/// `D = S0/4 · (λ − λ0⁴/λ³)`.
pub fn dispersion_coefficient(fiber: &FiberParams, wavelength_nm: f64) -> f64 {
    let l0 = fiber.zero_dispersion_nm;
    fiber.dispersion_slope / 4.0 * (wavelength_nm - l0.powi(4) / wavelength_nm.powi(3))
}

/// Temporal FWHM spread (ps) picked up by a pulse of spectral FWHM
/// `bandwidth_nm` centred at `center_nm`.
///
/// First-order term `|D|·Δλ·L` combined in quadrature with the second-order
/// slope term `S0·Δλ²·L/8`, which dominates at the zero-dispersion point.
pub fn chromatic_broadening_ps(
    fiber: &FiberParams,
    center_nm: f64,
    bandwidth_nm: f64,
) -> Result<f64> {
    if !(bandwidth_nm >= 0.0 && bandwidth_nm.is_finite()) {
        return Err(Error::param("bandwidth_nm", "must be >= 0"));
    }
    if !(center_nm > 0.0) {
        return Err(Error::param("center_nm", "must be > 0"));
    }
    let l = fiber.length_km;
    let first = dispersion_coefficient(fiber, center_nm).abs() * bandwidth_nm * l;
    let second = fiber.dispersion_slope * bandwidth_nm * bandwidth_nm * l / 8.0;
    Ok(first.hypot(second))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_km_delay() {
        let f = FiberParams::smf28(50.0);
        let d = propagation_delay_us(&f);
        assert!((d - 244.8).abs() < 0.05, "{d}");
        // within 2% of the observed ~247 us peak shift
        assert!((d - 247.0).abs() / 247.0 < 0.02);
        assert_eq!(propagation_delay_us(&FiberParams::smf28(0.0)), 0.0);
        let d100 = propagation_delay_us(&FiberParams::smf28(100.0));
        assert!((d100 - 489.5).abs() < 0.1, "{d100}");
        assert!((d100 - 2.0 * d).abs() < 1e-9);
    }

    #[test]
    fn delay_in_ps_rounds() {
        let f = FiberParams::smf28(50.0);
        let ps = propagation_delay_ps(&f);
        assert!((ps as f64 - propagation_delay_us(&f) * 1e6).abs() <= 0.5);
    }

    #[test]
    fn zero_dispersion_point_uses_slope_term() {
        let mut f = FiberParams::smf28(50.0);
        f.zero_dispersion_nm = 1310.0;
        let w = chromatic_broadening_ps(&f, 1310.0, 0.7).unwrap();
        // 0.092 * 0.49 * 50 / 8
        assert!((w - 0.28175).abs() < 1e-4, "{w}");
        assert_eq!(chromatic_broadening_ps(&f, 1310.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn c_band_dispersion() {
        let f = FiberParams::smf28(50.0);
        let d = dispersion_coefficient(&f, 1550.0);
        assert!((d - 17.0).abs() < 0.5, "{d}");
        let w = chromatic_broadening_ps(&f, 1550.0, 0.7).unwrap();
        assert!((w - 600.0).abs() < 15.0, "{w}");
    }
}
