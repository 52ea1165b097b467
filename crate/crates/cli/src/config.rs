//! TOML scenario files. Key names are documented in `docs/config.md`.

use std::path::{Path, PathBuf};

use entlink::analysis::{IdlerSetting, ScanPlan};
use entlink::model::{AnalyzerSetting, DetectorParams, FiberParams, LinkScenario, SourceParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ENTLINK_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub source: SourceParams,
    #[serde(default)]
    pub fiber: FiberParams,
    #[serde(default)]
    pub detector: DetectorsConfig,
    #[serde(default)]
    pub path: PathConfig,
    pub analyzer: Option<AnalyzerConfig>,
    #[serde(default)]
    pub coincidence: CoincidenceConfig,
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub keyrate: KeyRateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub duration_s: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub sweep_pump_mw: Option<Vec<f64>>,
    pub event_budget: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration_s: 1.0,
            seed: 1,
            output_dir: None,
            sweep_pump_mw: None,
            event_budget: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorsConfig {
    #[serde(default)]
    pub signal: DetectorConfig,
    #[serde(default)]
    pub idler: DetectorConfig,
}

/// Overrides on top of the arm's default detector model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: Option<f64>,
    pub dark_rate_hz: Option<f64>,
    pub jitter_fwhm_ps: Option<f64>,
    pub dead_time_ns: Option<f64>,
    pub max_count_rate_hz: Option<f64>,
    pub afterpulse_probability: Option<f64>,
    pub afterpulse_delay_ns: Option<f64>,
}

impl DetectorConfig {
    fn apply(&self, mut d: DetectorParams) -> DetectorParams {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut d.efficiency, self.efficiency);
        set(&mut d.dark_rate_hz, self.dark_rate_hz);
        set(&mut d.jitter_fwhm_ps, self.jitter_fwhm_ps);
        set(&mut d.dead_time_ns, self.dead_time_ns);
        set(&mut d.max_count_rate_hz, self.max_count_rate_hz);
        set(&mut d.afterpulse_probability, self.afterpulse_probability);
        set(&mut d.afterpulse_delay_ns, self.afterpulse_delay_ns);
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    pub signal_efficiency: f64,
    pub idler_efficiency: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            signal_efficiency: 1.0,
            idler_efficiency: 1.0,
        }
    }
}

/// Half-wave-plate angles; the polarizer-equivalent angle is twice these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerConfig {
    pub signal_hwp_deg: f64,
    pub idler_hwp_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoincidenceConfig {
    pub window_ns: f64,
    pub accidental_displacement_ns: f64,
    pub symmetric_accidentals: bool,
    /// Peak position of `t_signal − t_idler`; the fiber delay when absent.
    pub offset_ps: Option<i64>,
}

impl Default for CoincidenceConfig {
    fn default() -> Self {
        Self {
            window_ns: 1.25,
            accidental_displacement_ns: 7.0,
            symmetric_accidentals: false,
            offset_ps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    /// Idler analyzer settings by name: H, V, D or A.
    pub idler_settings: Vec<String>,
    pub hwp_start_deg: f64,
    pub hwp_step_deg: f64,
    /// Signal half-wave-plate range covered, from the start angle.
    pub hwp_span_deg: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            idler_settings: ["H", "V", "D", "A"].map(String::from).to_vec(),
            hwp_start_deg: 0.0,
            hwp_step_deg: 7.5,
            hwp_span_deg: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeyRateConfig {
    pub ec_efficiency: f64,
    pub sifting: f64,
}

impl Default for KeyRateConfig {
    fn default() -> Self {
        Self {
            ec_efficiency: 1.1,
            sifting: 1.0,
        }
    }
}

/// Idler half-wave-plate angle for a named polarization.
fn idler_hwp(name: &str) -> Option<f64> {
    match name {
        "H" => Some(0.0),
        "V" => Some(45.0),
        "D" => Some(22.5),
        "A" => Some(67.5),
        _ => None,
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The physical scenario, validated.
    pub fn scenario(&self) -> Result<LinkScenario, CliError> {
        let s = LinkScenario {
            source: self.source.clone(),
            fiber: self.fiber.clone(),
            detector_signal: self.detector.signal.apply(DetectorParams::ingaas()),
            detector_idler: self.detector.idler.apply(DetectorParams::si_apd()),
            path_efficiency_signal: self.path.signal_efficiency,
            path_efficiency_idler: self.path.idler_efficiency,
            analyzer: self
                .analyzer
                .as_ref()
                .map(|a| AnalyzerSetting::from_hwp(a.signal_hwp_deg, a.idler_hwp_deg)),
            coincidence_window_ns: self.coincidence.window_ns,
        };
        s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn validate_run(&self) -> Result<(), CliError> {
        let d = self.run.duration_s;
        if !(d.is_finite() && d > 0.0) {
            return Err(CliError::Config(
                "run.duration_s: must be a finite value > 0".into(),
            ));
        }
        if self.run.event_budget == 0 {
            return Err(CliError::Config("run.event_budget: must be > 0".into()));
        }
        Ok(())
    }

    /// Scan plan from the `[scan]`, `[coincidence]` and `[keyrate]` tables.
    pub fn scan_plan(&self) -> Result<ScanPlan, CliError> {
        let scan = self
            .scan
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [scan] table".into()))?;
        let idler_settings = scan
            .idler_settings
            .iter()
            .map(|name| {
                idler_hwp(name)
                    .map(|hwp| IdlerSetting::new(name, 2.0 * hwp))
                    .ok_or_else(|| {
                        CliError::Config(format!(
                            "scan.idler_settings: unknown setting '{name}', use H, V, D or A"
                        ))
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (step, span) = (scan.hwp_step_deg, scan.hwp_span_deg);
        if !(step.is_finite() && step > 0.0 && span.is_finite() && span > 0.0) {
            return Err(CliError::Config(
                "scan.hwp_step_deg, scan.hwp_span_deg: must be finite values > 0".into(),
            ));
        }
        let n = (span / step).round() as usize;
        if n > 10_000 {
            return Err(CliError::Config(
                "scan.hwp_step_deg: too many scan points".into(),
            ));
        }
        let signal_angles_deg = (0..n)
            .map(|k| 2.0 * (scan.hwp_start_deg + k as f64 * step))
            .collect();
        let plan = ScanPlan {
            idler_settings,
            signal_angles_deg,
            accidental_displacement_ns: self.coincidence.accidental_displacement_ns,
            symmetric_accidentals: self.coincidence.symmetric_accidentals,
            offset_ps: self.coincidence.offset_ps,
            ec_efficiency: self.keyrate.ec_efficiency,
            sifting: self.keyrate.sifting,
        };
        plan.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(plan)
    }

    /// `--out` flag, then `run.output_dir`, then the environment, then `.`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        resolve_output_dir(flag, self.run.output_dir.as_deref())
    }
}

pub fn resolve_output_dir(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    flag.or(configured)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_uses_defaults() {
        let c = ScenarioConfig::from_toml("").unwrap();
        let s = c.scenario().unwrap();
        assert_eq!(s, LinkScenario::default());
        assert!(c.scan_plan().is_err());
    }

    #[test]
    fn partial_detector_keeps_arm_defaults() {
        let c = ScenarioConfig::from_toml("[detector.idler]\ndark_rate_hz = 10.0\n").unwrap();
        let s = c.scenario().unwrap();
        assert_eq!(s.detector_idler.dark_rate_hz, 10.0);
        assert_eq!(
            s.detector_idler.efficiency,
            DetectorParams::si_apd().efficiency
        );
        assert_eq!(s.detector_signal, DetectorParams::ingaas());
    }

    #[test]
    fn unknown_key_is_named() {
        let e = ScenarioConfig::from_toml("[source]\nbrightnes = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("brightnes"), "{e}");
        let e = ScenarioConfig::from_toml("[sauce]\n").unwrap_err();
        assert!(e.to_string().contains("sauce"), "{e}");
    }

    #[test]
    fn validation_names_the_key() {
        let c = ScenarioConfig::from_toml("[path]\nsignal_efficiency = 1.5\n").unwrap();
        assert!(c
            .scenario()
            .unwrap_err()
            .to_string()
            .contains("path.signal_efficiency"));
    }

    #[test]
    fn scan_plan_converts_plate_angles() {
        let c = ScenarioConfig::from_toml("[scan]\n").unwrap();
        let p = c.scan_plan().unwrap();
        assert_eq!(p.signal_angles_deg.len(), 12);
        assert_eq!(p.signal_angles_deg[1], 15.0);
        let idler: Vec<f64> = p.idler_settings.iter().map(|s| s.polarizer_deg).collect();
        assert_eq!(idler, vec![0.0, 90.0, 45.0, 135.0]);
        let bad = ScenarioConfig::from_toml("[scan]\nidler_settings = [\"X\"]\n").unwrap();
        assert!(bad.scan_plan().is_err());
    }

    #[test]
    fn output_dir_precedence() {
        let flag = Path::new("/flag");
        let cfg = Path::new("/cfg");
        assert_eq!(
            resolve_output_dir(Some(flag), Some(cfg)),
            PathBuf::from("/flag")
        );
        assert_eq!(resolve_output_dir(None, Some(cfg)), PathBuf::from("/cfg"));
    }
}
