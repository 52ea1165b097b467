//! Physics results from coincidence data: fringe fits and visibilities,
//! background correction, heralding efficiency, QBER and BBM92 key rates,
//! plus scenario scans and pump-power sweeps.

mod fit;
mod keyrate;
mod measure;

pub use fit::{background_correct, fit_sinusoid, visibility, BackgroundCorrection, SinusoidFit};
pub use keyrate::{bbm92_key_rate, binary_entropy, heralding_efficiency, qber, KeyRateEstimate};
pub use measure::{
    dead_time_corrected_rate, measure_scenario, measure_series, power_sweep, write_scan_csv,
    write_sweep_csv, IdlerSetting, Mode, ScanPlan, ScanPoint, ScenarioMeasurement, SweepRow,
    VisibilityResult, SCAN_CSV_HEADER, SWEEP_CSV_HEADER,
};
