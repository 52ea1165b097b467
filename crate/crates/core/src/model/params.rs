use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Photon-pair source. Wavelengths in nm, widths in nm or ps as named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceParams {
    /// Pair generation rate per mW of pump, pairs/s/mW.
    pub brightness_per_mw: f64,
    pub pump_power_mw: f64,
    /// Intrinsic correlation visibility in the H/V basis.
    pub visibility_hv: f64,
    /// Intrinsic correlation visibility in the D/A basis.
    pub visibility_da: f64,
    pub signal_center_nm: f64,
    pub signal_bandwidth_nm: f64,
    pub idler_center_nm: f64,
    /// Intrinsic signal/idler emission time spread (FWHM).
    pub pair_correlation_fwhm_ps: f64,
    pub wl_temp_slope_nm_per_k: f64,
    pub ref_temperature_c: f64,
    pub ref_wavelength_nm: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            brightness_per_mw: 1.0e6,
            pump_power_mw: 1.0,
            visibility_hv: 1.0,
            visibility_da: 1.0,
            signal_center_nm: 1310.12,
            signal_bandwidth_nm: 0.7,
            idler_center_nm: 586.0,
            pair_correlation_fwhm_ps: 4.0,
            wl_temp_slope_nm_per_k: 0.8,
            ref_temperature_c: 33.4,
            ref_wavelength_nm: 1310.12,
        }
    }
}

impl SourceParams {
    /// Pair emission rate in pairs/s.
    pub fn pair_rate(&self) -> f64 {
        self.brightness_per_mw * self.pump_power_mw
    }

    pub fn validate(&self) -> Result<()> {
        positive("source.brightness_per_mw", self.brightness_per_mw)?;
        non_negative("source.pump_power_mw", self.pump_power_mw)?;
        unit_interval("source.visibility_hv", self.visibility_hv)?;
        unit_interval("source.visibility_da", self.visibility_da)?;
        positive("source.signal_center_nm", self.signal_center_nm)?;
        positive("source.signal_bandwidth_nm", self.signal_bandwidth_nm)?;
        positive("source.idler_center_nm", self.idler_center_nm)?;
        non_negative(
            "source.pair_correlation_fwhm_ps",
            self.pair_correlation_fwhm_ps,
        )?;
        finite("source.wl_temp_slope_nm_per_k", self.wl_temp_slope_nm_per_k)?;
        finite("source.ref_temperature_c", self.ref_temperature_c)?;
        positive("source.ref_wavelength_nm", self.ref_wavelength_nm)
    }
}

/// Single-mode fiber span carrying the signal photons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberParams {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub group_index: f64,
    pub zero_dispersion_nm: f64,
    /// Dispersion slope S0 at the zero-dispersion wavelength, ps/(nm^2 km).
    pub dispersion_slope: f64,
    /// Connector/splice loss on top of the distributed attenuation.
    pub extra_loss_db: f64,
    /// Scalar polarization decoherence: both visibilities scale by (1 - depolarization).
    pub depolarization: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self {
            length_km: 0.0,
            attenuation_db_per_km: 0.34,
            group_index: 1.4677,
            zero_dispersion_nm: 1313.0,
            dispersion_slope: 0.092,
            extra_loss_db: 0.0,
            depolarization: 0.0,
        }
    }
}

impl FiberParams {
    pub fn smf28(length_km: f64) -> Self {
        Self {
            length_km,
            ..Self::default()
        }
    }

    pub fn loss_db(&self) -> f64 {
        self.length_km * self.attenuation_db_per_km + self.extra_loss_db
    }

    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.loss_db() / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("fiber.length_km", self.length_km)?;
        non_negative("fiber.attenuation_db_per_km", self.attenuation_db_per_km)?;
        if !(self.group_index >= 1.0 && self.group_index.is_finite()) {
            return Err(Error::param(
                "fiber.group_index",
                "must be a finite value >= 1",
            ));
        }
        if !(1200.0..=1400.0).contains(&self.zero_dispersion_nm) {
            return Err(Error::param(
                "fiber.zero_dispersion_nm",
                "must lie within 1200-1400 nm",
            ));
        }
        non_negative("fiber.dispersion_slope", self.dispersion_slope)?;
        non_negative("fiber.extra_loss_db", self.extra_loss_db)?;
        unit_interval("fiber.depolarization", self.depolarization)
    }
}

/// Single-photon detector. Afterpulsing is off unless `afterpulse_probability > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub jitter_fwhm_ps: f64,
    pub dead_time_ns: f64,
    /// Specified maximum count rate; informational only.
    pub max_count_rate_hz: f64,
    #[serde(default)]
    pub afterpulse_probability: f64,
    #[serde(default = "default_afterpulse_delay")]
    pub afterpulse_delay_ns: f64,
}

fn default_afterpulse_delay() -> f64 {
    100.0
}

impl DetectorParams {
    /// Free-running InGaAs APD for the 1310 nm arm.
    pub fn ingaas() -> Self {
        Self {
            efficiency: 0.15,
            dark_rate_hz: 1000.0,
            jitter_fwhm_ps: 250.0,
            dead_time_ns: 1000.0,
            max_count_rate_hz: 1.0e6,
            afterpulse_probability: 0.0,
            afterpulse_delay_ns: default_afterpulse_delay(),
        }
    }

    /// Thick-junction Si APD for the visible arm.
    pub fn si_apd() -> Self {
        Self {
            efficiency: 0.60,
            dark_rate_hz: 500.0,
            jitter_fwhm_ps: 500.0,
            dead_time_ns: 22.0,
            max_count_rate_hz: 3.0e7,
            afterpulse_probability: 0.0,
            afterpulse_delay_ns: default_afterpulse_delay(),
        }
    }

    /// Noise-free detector with the given efficiency.
    pub fn ideal(efficiency: f64) -> Self {
        Self {
            efficiency,
            dark_rate_hz: 0.0,
            jitter_fwhm_ps: 0.0,
            dead_time_ns: 0.0,
            max_count_rate_hz: f64::INFINITY,
            afterpulse_probability: 0.0,
            afterpulse_delay_ns: default_afterpulse_delay(),
        }
    }

    pub fn dead_time_s(&self) -> f64 {
        self.dead_time_ns * 1e-9
    }

    /// Non-paralyzable dead-time throughput for an incoming Poisson rate.
    pub fn observed_rate(&self, incoming_hz: f64) -> f64 {
        incoming_hz / (1.0 + incoming_hz * self.dead_time_s())
    }

    pub fn validate(&self, arm: &str) -> Result<()> {
        unit_interval(&format!("detector.{arm}.efficiency"), self.efficiency)?;
        non_negative(&format!("detector.{arm}.dark_rate_hz"), self.dark_rate_hz)?;
        non_negative(
            &format!("detector.{arm}.jitter_fwhm_ps"),
            self.jitter_fwhm_ps,
        )?;
        non_negative(&format!("detector.{arm}.dead_time_ns"), self.dead_time_ns)?;
        if self.max_count_rate_hz.is_nan() || self.max_count_rate_hz < 0.0 {
            return Err(Error::param(
                format!("detector.{arm}.max_count_rate_hz"),
                "must be >= 0",
            ));
        }
        unit_interval(
            &format!("detector.{arm}.afterpulse_probability"),
            self.afterpulse_probability,
        )?;
        positive(
            &format!("detector.{arm}.afterpulse_delay_ns"),
            self.afterpulse_delay_ns,
        )
    }
}

/// Polarizer-equivalent analyzer angles in degrees, taken modulo 180.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerSetting {
    pub signal_deg: f64,
    pub idler_deg: f64,
}

impl AnalyzerSetting {
    pub fn new(signal_deg: f64, idler_deg: f64) -> Self {
        Self {
            signal_deg,
            idler_deg,
        }
    }

    /// Half-wave-plate angles rotate the polarization by twice the plate angle.
    pub fn from_hwp(signal_hwp_deg: f64, idler_hwp_deg: f64) -> Self {
        Self::new(2.0 * signal_hwp_deg, 2.0 * idler_hwp_deg)
    }
}

/// One complete experiment: source, fiber, two detectors, analyzers and window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkScenario {
    pub source: SourceParams,
    pub fiber: FiberParams,
    pub detector_signal: DetectorParams,
    pub detector_idler: DetectorParams,
    pub path_efficiency_signal: f64,
    pub path_efficiency_idler: f64,
    pub analyzer: Option<AnalyzerSetting>,
    pub coincidence_window_ns: f64,
}

impl Default for LinkScenario {
    fn default() -> Self {
        Self {
            source: SourceParams::default(),
            fiber: FiberParams::default(),
            detector_signal: DetectorParams::ingaas(),
            detector_idler: DetectorParams::si_apd(),
            path_efficiency_signal: 1.0,
            path_efficiency_idler: 1.0,
            analyzer: None,
            coincidence_window_ns: 1.25,
        }
    }
}

impl LinkScenario {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.fiber.validate()?;
        self.detector_signal.validate("signal")?;
        self.detector_idler.validate("idler")?;
        unit_interval("path.signal_efficiency", self.path_efficiency_signal)?;
        unit_interval("path.idler_efficiency", self.path_efficiency_idler)?;
        if let Some(a) = &self.analyzer {
            finite("analyzer.signal_deg", a.signal_deg)?;
            finite("analyzer.idler_deg", a.idler_deg)?;
        }
        positive("coincidence.window_ns", self.coincidence_window_ns)
    }

    /// Signal-arm transmission up to (not including) the detector.
    pub fn signal_transmission(&self) -> f64 {
        self.path_efficiency_signal * self.fiber.transmission()
    }

    /// Total signal efficiency including the detector.
    pub fn eta_signal(&self) -> f64 {
        self.signal_transmission() * self.detector_signal.efficiency
    }

    pub fn eta_idler(&self) -> f64 {
        self.path_efficiency_idler * self.detector_idler.efficiency
    }

    /// Visibilities after fiber depolarization, `(hv, da)`.
    pub fn effective_visibilities(&self) -> (f64, f64) {
        let keep = 1.0 - self.fiber.depolarization;
        (
            self.source.visibility_hv * keep,
            self.source.visibility_da * keep,
        )
    }

    pub fn with_pump(&self, pump_power_mw: f64) -> Self {
        let mut s = self.clone();
        s.source.pump_power_mw = pump_power_mw;
        s
    }

    pub fn with_analyzer(&self, analyzer: Option<AnalyzerSetting>) -> Self {
        let mut s = self.clone();
        s.analyzer = analyzer;
        s
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, "must be finite"))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be > 0, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be >= 0, got {v}")))
    }
}

pub(crate) fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must lie within [0, 1], got {v}"),
        ))
    }
}
