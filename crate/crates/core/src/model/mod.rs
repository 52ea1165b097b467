//! Scenario types and closed-form link physics.
//!
//! Every function here is pure. Angles are polarizer-equivalent degrees,
//! wavelengths nm, rates s⁻¹, windows ns, timing spreads ps.

mod correlation;
mod fiber;
mod params;
mod rates;
mod spectral;

pub use correlation::{coincidence_probability, joint_outcomes};
pub use fiber::{
    chromatic_broadening_ps, dispersion_coefficient, propagation_delay_ps, propagation_delay_us,
    SPEED_OF_LIGHT,
};
pub use params::{AnalyzerSetting, DetectorParams, FiberParams, LinkScenario, SourceParams};
pub use rates::{accidental_rate, expected_rates, pair_spread_fwhm_ps, RatePrediction};
pub use spectral::{
    bandwidth_to_frequency_ghz, combined_fwhm_ps, gaussian_deconvolve, signal_wavelength,
    window_acceptance, TunedWavelength, CALIBRATED_TEMPERATURE_C,
};
