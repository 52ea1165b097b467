use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{background_correct, fit_sinusoid};
use super::keyrate::{bbm92_key_rate, qber, KeyRateEstimate};
use crate::model::{
    expected_rates, propagation_delay_ps, AnalyzerSetting, DetectorParams, LinkScenario,
};
use crate::simkit::{derive_seed, simulate_link, SimOptions};
use crate::tsproc::{displaced_window_rate, find_coincidences, symmetric_displaced_window_rate};
use crate::{Error, Result};

/// One fixed analyzer setting on the idler side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdlerSetting {
    pub label: String,
    /// Polarizer-equivalent angle.
    pub polarizer_deg: f64,
}

impl IdlerSetting {
    pub fn new(label: &str, polarizer_deg: f64) -> Self {
        Self {
            label: label.to_string(),
            polarizer_deg,
        }
    }

    /// Which visibility average the setting contributes to.
    fn basis(&self) -> Option<Basis> {
        let r = self.polarizer_deg.rem_euclid(90.0);
        if r.min(90.0 - r) < 1e-9 {
            Some(Basis::Hv)
        } else if (r - 45.0).abs() < 1e-9 {
            Some(Basis::Da)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Basis {
    Hv,
    Da,
}

/// Correlation scan: every signal angle is measured against every idler
/// setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub idler_settings: Vec<IdlerSetting>,
    /// Polarizer-equivalent signal angles.
    pub signal_angles_deg: Vec<f64>,
    pub accidental_displacement_ns: f64,
    /// Average the `+` and `−` displaced windows instead of `+` only.
    pub symmetric_accidentals: bool,
    /// Peak position of `t_signal − t_idler`; the fiber delay when `None`.
    pub offset_ps: Option<i64>,
    pub ec_efficiency: f64,
    pub sifting: f64,
}

impl Default for ScanPlan {
    /// H, V, D, A on the idler; twelve signal angles 15° apart.
    fn default() -> Self {
        Self {
            idler_settings: vec![
                IdlerSetting::new("H", 0.0),
                IdlerSetting::new("V", 90.0),
                IdlerSetting::new("D", 45.0),
                IdlerSetting::new("A", 135.0),
            ],
            signal_angles_deg: (0..12).map(|k| 15.0 * k as f64).collect(),
            accidental_displacement_ns: 7.0,
            symmetric_accidentals: false,
            offset_ps: None,
            ec_efficiency: 1.1,
            sifting: 1.0,
        }
    }
}

impl ScanPlan {
    pub fn validate(&self) -> Result<()> {
        let has = |b| self.idler_settings.iter().any(|s| s.basis() == Some(b));
        if !(has(Basis::Hv) && has(Basis::Da)) {
            return Err(Error::param(
                "scan.idler_settings",
                "need at least one H/V (0° mod 90°) and one D/A (45° mod 90°) setting",
            ));
        }
        if self
            .idler_settings
            .iter()
            .any(|s| !s.polarizer_deg.is_finite())
        {
            return Err(Error::param("scan.idler_settings", "angles must be finite"));
        }
        if self.signal_angles_deg.iter().any(|a| !a.is_finite()) {
            return Err(Error::param("scan.signal_angles", "angles must be finite"));
        }
        let mut distinct: Vec<f64> = self
            .signal_angles_deg
            .iter()
            .map(|a| a.rem_euclid(180.0))
            .collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        if distinct.len() < 3 {
            return Err(Error::param(
                "scan.signal_angles",
                "need at least 3 distinct polarizer angles modulo 180°",
            ));
        }
        Ok(())
    }
}

/// How rates are obtained for each setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Monte Carlo streams; `duration_s` is split evenly across settings.
    Simulated {
        duration_s: f64,
        seed: u64,
        options: SimOptions,
    },
    /// Noiseless expected rates.
    Analytic,
}

/// Rates at one (idler, signal) analyzer setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub idler_label: String,
    pub idler_deg: f64,
    pub signal_deg: f64,
    /// Coincidence count in the peak window (0 in analytic mode).
    pub coincidences: u64,
    pub rate_hz: f64,
    /// Poisson uncertainty `√count / T` (0 in analytic mode).
    pub rate_err: f64,
    pub accidental_rate_hz: f64,
    pub singles_signal_hz: f64,
    pub singles_idler_hz: f64,
}

/// Fringe fits for one idler setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub basis: String,
    pub idler_deg: f64,
    pub amplitude: f64,
    pub amplitude_err: f64,
    pub phase_deg: f64,
    pub v_raw: f64,
    pub v_raw_err: f64,
    pub v_corr: f64,
    pub v_corr_err: f64,
    pub c_max: f64,
    pub c_min: f64,
    pub c_max_corr: f64,
    pub c_min_corr: f64,
    /// Mean displaced-window rate over this setting's scan.
    pub accidental_rate: f64,
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub clamped_raw: bool,
    pub clamped_corr: bool,
    /// Corrected rates that went negative and were set to 0.
    pub clamped_points: usize,
    /// No fringe survives background subtraction; corrected values are 0.
    pub degenerate: bool,
}

/// Everything extracted from one scenario's correlation scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeasurement {
    pub pump_mw: f64,
    pub mode: String,
    pub seed: Option<u64>,
    /// Total virtual time over all settings (0 in analytic mode).
    pub duration_s: f64,
    pub window_ns: f64,
    pub offset_ps: i64,
    pub points: Vec<ScanPoint>,
    pub bases: Vec<VisibilityResult>,
    pub v_hv_raw: f64,
    pub v_da_raw: f64,
    pub v_avg_raw: f64,
    pub v_avg_raw_err: f64,
    pub v_hv_corr: f64,
    pub v_da_corr: f64,
    pub v_avg_corr: f64,
    pub v_avg_corr_err: f64,
    /// `C_max + C_min` averaged over idler settings: the rate of pairs
    /// detected in any one setting.
    pub pair_rate: f64,
    pub pair_rate_err: f64,
    pub accidental_rate: f64,
    pub singles_signal_hz: f64,
    pub singles_idler_hz: f64,
    pub key: KeyRateEstimate,
}

fn measure_point(
    scenario: &LinkScenario,
    plan: &ScanPlan,
    mode: &Mode,
    offset_ps: i64,
    per_setting_s: f64,
    index: usize,
    idler: &IdlerSetting,
    signal_deg: f64,
) -> Result<ScanPoint> {
    let s = scenario.with_analyzer(Some(AnalyzerSetting::new(signal_deg, idler.polarizer_deg)));
    let window = s.coincidence_window_ns;
    let base = ScanPoint {
        idler_label: idler.label.clone(),
        idler_deg: idler.polarizer_deg,
        signal_deg,
        coincidences: 0,
        rate_hz: 0.0,
        rate_err: 0.0,
        accidental_rate_hz: 0.0,
        singles_signal_hz: 0.0,
        singles_idler_hz: 0.0,
    };
    match mode {
        Mode::Analytic => {
            let p = expected_rates(&s)?;
            Ok(ScanPoint {
                rate_hz: p.total_coincidences,
                accidental_rate_hz: p.accidental_coincidences,
                singles_signal_hz: p.singles_signal,
                singles_idler_hz: p.singles_idler,
                ..base
            })
        }
        Mode::Simulated { seed, options, .. } => {
            let run = simulate_link(&s, per_setting_s, derive_seed(*seed, index as u64), options)?;
            let c = find_coincidences(&run.idler, &run.signal, window, offset_ps)?;
            let acc = if plan.symmetric_accidentals {
                symmetric_displaced_window_rate(
                    &run.idler,
                    &run.signal,
                    window,
                    offset_ps,
                    plan.accidental_displacement_ns,
                )?
            } else {
                displaced_window_rate(
                    &run.idler,
                    &run.signal,
                    window,
                    offset_ps,
                    plan.accidental_displacement_ns,
                )?
            };
            let t = c.overlap_s;
            Ok(ScanPoint {
                coincidences: c.count,
                rate_hz: c.rate_hz,
                rate_err: if t > 0.0 {
                    (c.count as f64).sqrt() / t
                } else {
                    0.0
                },
                accidental_rate_hz: acc,
                singles_signal_hz: run.signal.len() as f64 / per_setting_s,
                singles_idler_hz: run.idler.len() as f64 / per_setting_s,
                ..base
            })
        }
    }
}

fn fit_setting(
    idler: &IdlerSetting,
    points: &[ScanPoint],
    weighted: bool,
) -> Result<VisibilityResult> {
    let angles: Vec<f64> = points.iter().map(|p| p.signal_deg).collect();
    let rates: Vec<f64> = points.iter().map(|p| p.rate_hz).collect();
    let errs: Vec<f64> = points.iter().map(|p| p.rate_err).collect();
    let sigmas = weighted.then_some(errs.as_slice());
    let accidental = points.iter().map(|p| p.accidental_rate_hz).sum::<f64>() / points.len() as f64;
    let raw = match fit_sinusoid(&angles, &rates, sigmas) {
        Err(Error::UndefinedVisibility) => {
            return Ok(VisibilityResult::no_fringe(idler, accidental, &rates))
        }
        r => r?,
    };
    let corr = match background_correct(&angles, &rates, sigmas, accidental) {
        Err(Error::UndefinedVisibility | Error::DegenerateCorrection { .. }) => None,
        // a remainder at rounding level is no fringe either
        r => Some(r?).filter(|c| c.fit.amplitude > 1e-9 * raw.amplitude),
    };
    let (v_corr, v_corr_err, c_max_corr, c_min_corr, clamped_corr, clamped_points) = match &corr {
        Some(c) => (
            c.fit.visibility,
            c.fit.visibility_err,
            c.fit.c_max,
            c.fit.c_min,
            c.fit.clamped,
            c.clamped_points,
        ),
        None => (0.0, 0.0, 0.0, 0.0, false, rates.len()),
    };
    Ok(VisibilityResult {
        basis: idler.label.clone(),
        idler_deg: idler.polarizer_deg,
        amplitude: raw.amplitude,
        amplitude_err: raw.amplitude_err,
        phase_deg: raw.phase_deg,
        v_raw: raw.visibility,
        v_raw_err: raw.visibility_err,
        v_corr,
        v_corr_err,
        c_max: raw.c_max,
        c_min: raw.c_min,
        c_max_corr,
        c_min_corr,
        accidental_rate: accidental,
        residual_norm: raw.residual_norm,
        reduced_chi2: raw.reduced_chi2,
        clamped_raw: raw.clamped,
        clamped_corr,
        clamped_points,
        degenerate: corr.is_none(),
    })
}

impl VisibilityResult {
    /// Placeholder for a scan with no coincidences above zero.
    fn no_fringe(idler: &IdlerSetting, accidental: f64, rates: &[f64]) -> Self {
        Self {
            basis: idler.label.clone(),
            idler_deg: idler.polarizer_deg,
            amplitude: 0.0,
            amplitude_err: 0.0,
            phase_deg: 0.0,
            v_raw: 0.0,
            v_raw_err: 0.0,
            v_corr: 0.0,
            v_corr_err: 0.0,
            c_max: 0.0,
            c_min: 0.0,
            c_max_corr: 0.0,
            c_min_corr: 0.0,
            accidental_rate: accidental,
            residual_norm: rates.iter().map(|r| r * r).sum::<f64>().sqrt(),
            reduced_chi2: 0.0,
            clamped_raw: false,
            clamped_corr: false,
            clamped_points: rates.len(),
            degenerate: true,
        }
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Runs the full correlation scan of `plan` on `scenario` and derives
/// visibilities, the pair rate and the key-rate estimate.
///
/// Settings are measured in parallel; each uses the seed
/// `derive_seed(seed, setting index)`, so results do not depend on the
/// thread count.
pub fn measure_scenario(
    scenario: &LinkScenario,
    plan: &ScanPlan,
    mode: &Mode,
) -> Result<ScenarioMeasurement> {
    scenario.validate()?;
    plan.validate()?;
    let n_settings = plan.idler_settings.len() * plan.signal_angles_deg.len();
    let (per_setting_s, total_s, seed) = match mode {
        Mode::Simulated {
            duration_s, seed, ..
        } => {
            if !(duration_s.is_finite() && *duration_s > 0.0) {
                return Err(Error::param("duration_s", "must be a finite value > 0"));
            }
            (duration_s / n_settings as f64, *duration_s, Some(*seed))
        }
        Mode::Analytic => (0.0, 0.0, None),
    };
    let offset_ps = plan
        .offset_ps
        .unwrap_or_else(|| propagation_delay_ps(&scenario.fiber) as i64);

    let jobs: Vec<(usize, &IdlerSetting, f64)> = plan
        .idler_settings
        .iter()
        .flat_map(|i| plan.signal_angles_deg.iter().map(move |&s| (i, s)))
        .enumerate()
        .map(|(k, (i, s))| (k, i, s))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(k, idler, sig)| {
            measure_point(
                scenario,
                plan,
                mode,
                offset_ps,
                per_setting_s,
                k,
                idler,
                sig,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let weighted = matches!(mode, Mode::Simulated { .. });
    let per_idler = plan.signal_angles_deg.len();
    let bases = plan
        .idler_settings
        .iter()
        .zip(points.chunks(per_idler))
        .map(|(idler, pts)| fit_setting(idler, pts, weighted))
        .collect::<Result<Vec<_>>>()?;

    let in_basis = |b: Basis| {
        plan.idler_settings
            .iter()
            .zip(&bases)
            .filter(move |(s, _)| s.basis() == Some(b))
            .map(|(_, r)| r)
    };
    let v_hv_raw = mean(in_basis(Basis::Hv).map(|r| r.v_raw));
    let v_da_raw = mean(in_basis(Basis::Da).map(|r| r.v_raw));
    let v_hv_corr = mean(in_basis(Basis::Hv).map(|r| r.v_corr));
    let v_da_corr = mean(in_basis(Basis::Da).map(|r| r.v_corr));
    let v_avg_raw = 0.5 * (v_hv_raw + v_da_raw);
    let v_avg_corr = 0.5 * (v_hv_corr + v_da_corr);
    // each basis mean carries 1/n_b of its members' variance
    let avg_err = |f: fn(&VisibilityResult) -> f64| {
        let var = |b| {
            let (s, n) = in_basis(b).fold((0.0, 0), |(s, n), r| (s + f(r).powi(2), n + 1));
            s / (n * n) as f64
        };
        0.5 * (var(Basis::Hv) + var(Basis::Da)).sqrt()
    };
    let v_avg_raw_err = avg_err(|r| r.v_raw_err);
    let v_avg_corr_err = avg_err(|r| r.v_corr_err);

    let pair_rate = mean(bases.iter().map(|r| r.c_max + r.c_min));
    let pair_rate_err = 2.0
        * bases
            .iter()
            .map(|r| r.amplitude_err.powi(2))
            .sum::<f64>()
            .sqrt()
        / bases.len() as f64;
    let key = bbm92_key_rate(
        pair_rate,
        v_avg_raw.clamp(0.0, 1.0),
        plan.ec_efficiency,
        plan.sifting,
    )?;

    Ok(ScenarioMeasurement {
        pump_mw: scenario.source.pump_power_mw,
        mode: if weighted { "simulated" } else { "analytic" }.to_string(),
        seed,
        duration_s: total_s,
        window_ns: scenario.coincidence_window_ns,
        offset_ps,
        accidental_rate: mean(bases.iter().map(|r| r.accidental_rate)),
        singles_signal_hz: mean(points.iter().map(|p| p.singles_signal_hz)),
        singles_idler_hz: mean(points.iter().map(|p| p.singles_idler_hz)),
        points,
        bases,
        v_hv_raw,
        v_da_raw,
        v_avg_raw,
        v_avg_raw_err,
        v_hv_corr,
        v_da_corr,
        v_avg_corr,
        v_avg_corr_err,
        pair_rate,
        pair_rate_err,
        key,
    })
}

/// Undoes non-paralyzable dead-time losses on a coincidence rate, given the
/// observed singles on both arms.
pub fn dead_time_corrected_rate(
    coincidence_rate: f64,
    singles_signal_hz: f64,
    singles_idler_hz: f64,
    detector_signal: &DetectorParams,
    detector_idler: &DetectorParams,
) -> Result<f64> {
    let live_s = 1.0 - singles_signal_hz * detector_signal.dead_time_s();
    let live_i = 1.0 - singles_idler_hz * detector_idler.dead_time_s();
    if !(live_s > 0.0 && live_i > 0.0) {
        return Err(Error::param(
            "singles",
            "observed rate saturates the detector dead time",
        ));
    }
    Ok(coincidence_rate / (live_s * live_i))
}

/// One row of a pump-power sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub pump_mw: f64,
    pub c: f64,
    pub c_acc: f64,
    pub v_hv_raw: f64,
    pub v_da_raw: f64,
    pub v_avg_raw: f64,
    pub v_avg_corr: f64,
    pub qber: f64,
    pub key_rate: f64,
}

impl From<&ScenarioMeasurement> for SweepRow {
    fn from(m: &ScenarioMeasurement) -> Self {
        Self {
            pump_mw: m.pump_mw,
            c: m.pair_rate,
            c_acc: m.accidental_rate,
            v_hv_raw: m.v_hv_raw,
            v_da_raw: m.v_da_raw,
            v_avg_raw: m.v_avg_raw,
            v_avg_corr: m.v_avg_corr,
            qber: qber(m.v_avg_raw),
            key_rate: m.key.key_rate,
        }
    }
}

/// Measures each scenario in turn; row `k` of a simulated series uses the
/// master seed `derive_seed(seed, k)`.
pub fn measure_series(
    scenarios: &[LinkScenario],
    plan: &ScanPlan,
    mode: &Mode,
) -> Result<Vec<ScenarioMeasurement>> {
    scenarios
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let row_mode = match *mode {
                Mode::Simulated {
                    duration_s,
                    seed,
                    options,
                } => Mode::Simulated {
                    duration_s,
                    seed: derive_seed(seed, k as u64),
                    options,
                },
                Mode::Analytic => Mode::Analytic,
            };
            measure_scenario(s, plan, &row_mode)
        })
        .collect()
}

/// Pump-power sweep over scenarios that differ only in pump power.
pub fn power_sweep(
    scenarios: &[LinkScenario],
    plan: &ScanPlan,
    mode: &Mode,
) -> Result<(Vec<SweepRow>, Vec<ScenarioMeasurement>)> {
    if let Some(first) = scenarios.first() {
        for (k, s) in scenarios.iter().enumerate() {
            if s.with_pump(first.source.pump_power_mw) != *first {
                return Err(Error::param(
                    format!("scenarios[{k}]"),
                    "sweep scenarios may differ only in source.pump_power_mw",
                ));
            }
        }
    }
    let m = measure_series(scenarios, plan, mode)?;
    Ok((m.iter().map(SweepRow::from).collect(), m))
}

pub const SWEEP_CSV_HEADER: &str =
    "pump_mW,C,C_acc,V_hv_raw,V_da_raw,V_avg_raw,V_avg_corr,QBER,key_rate";

pub fn write_sweep_csv(rows: &[SweepRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.pump_mw,
            r.c,
            r.c_acc,
            r.v_hv_raw,
            r.v_da_raw,
            r.v_avg_raw,
            r.v_avg_corr,
            r.qber,
            r.key_rate
        )?;
    }
    Ok(())
}

pub const SCAN_CSV_HEADER: &str =
    "idler,idler_deg,signal_deg,signal_hwp_deg,coincidences,rate_hz,rate_err,accidental_hz,singles_signal_hz,singles_idler_hz";

/// Fringe data, one row per analyzer setting. Angles are polarizer-equivalent;
/// `signal_hwp_deg` is the matching half-wave-plate angle.
pub fn write_scan_csv(points: &[ScanPoint], mut w: impl Write) -> Result<()> {
    writeln!(w, "{SCAN_CSV_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            p.idler_label,
            p.idler_deg,
            p.signal_deg,
            p.signal_deg / 2.0,
            p.coincidences,
            p.rate_hz,
            p.rate_err,
            p.accidental_rate_hz,
            p.singles_signal_hz,
            p.singles_idler_hz
        )?;
    }
    Ok(())
}
