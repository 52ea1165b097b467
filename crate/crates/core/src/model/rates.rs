//! Closed-form expected count rates for a [`LinkScenario`].

use serde::{Deserialize, Serialize};

use super::correlation::coincidence_probability;
use super::fiber::chromatic_broadening_ps;
use super::params::LinkScenario;
use super::spectral::window_acceptance;
use crate::{Error, Result};

/// Expected detector rates in s⁻¹.
///
/// Singles are reported after the non-paralyzable dead-time filter.
/// `accidental_coincidences` is the Poisson estimate `S1·S2·τ` and
/// `true_coincidences` is the rate a one-to-one matcher registers on top of
/// it, so `total_coincidences` is exactly `true + accidental`. The true rate
/// carries the dead-time survival of both photons and first-order
/// corrections for detections that are not independent of the pairs:
///
/// - another detection on either detector inside the window of a detected
///   pair shares one match with it;
/// - a detected partner leaves its detector dead across the window, so the
///   Poisson estimate over-counts accidentals on the other photon;
/// - a partner lost to dead time means its detector fired shortly before,
///   which raises the accidental chance of the other photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub pair_rate: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub true_coincidences: f64,
    pub accidental_coincidences: f64,
    pub total_coincidences: f64,
    pub window_acceptance: f64,
    /// Fraction of each arm's detections surviving dead time.
    pub dead_time_survival_signal: f64,
    pub dead_time_survival_idler: f64,
    /// `total / sqrt(S1·S2)`, zero when either singles rate vanishes.
    pub heralding_efficiency: f64,
}

/// Poisson estimate of uncorrelated coincidences, `S1·S2·τ`.
pub fn accidental_rate(singles_1: f64, singles_2: f64, window_ns: f64) -> Result<f64> {
    if !(singles_1 >= 0.0 && singles_2 >= 0.0) {
        return Err(Error::param("singles", "rates must be >= 0"));
    }
    if !(window_ns >= 0.0) {
        return Err(Error::param("window_ns", "must be >= 0"));
    }
    Ok(singles_1 * singles_2 * window_ns * 1e-9)
}

/// Combined FWHM (ps) of everything that spreads the signal photon relative
/// to its partner before detection: intrinsic pair correlation and fiber
/// dispersion.
pub fn pair_spread_fwhm_ps(scenario: &LinkScenario) -> Result<f64> {
    let chromatic = chromatic_broadening_ps(
        &scenario.fiber,
        scenario.source.signal_center_nm,
        scenario.source.signal_bandwidth_nm,
    )?;
    Ok(scenario.source.pair_correlation_fwhm_ps.hypot(chromatic))
}

/// Mean number of other detections within `±τ/2` of a given detection of a
/// non-paralyzable detector with incoming rate `incoming`.
fn shared_rate(incoming: f64, dead_time_s: f64, tau: f64) -> f64 {
    incoming * (tau - 2.0 * dead_time_s).max(0.0)
}

/// Probability that a detector found dead at `t` fired within `τ/2` before
/// it; the age of the last detection is uniform over the dead time.
fn recent_fire_probability(dead_time_s: f64, tau: f64) -> f64 {
    if dead_time_s > 0.0 {
        (0.5 * tau / dead_time_s).min(1.0)
    } else {
        0.0
    }
}

pub fn expected_rates(scenario: &LinkScenario) -> Result<RatePrediction> {
    scenario.validate()?;
    let pair_rate = scenario.source.pair_rate();
    let eta_s = scenario.eta_signal();
    let eta_i = scenario.eta_idler();

    let (joint, marginal) = match &scenario.analyzer {
        Some(a) => {
            let (v_hv, v_da) = scenario.effective_visibilities();
            (
                coincidence_probability(a.signal_deg, a.idler_deg, v_hv, v_da)?,
                0.5,
            )
        }
        None => (1.0, 1.0),
    };

    let det_s = &scenario.detector_signal;
    let det_i = &scenario.detector_idler;
    let incoming_s = pair_rate * eta_s * marginal + det_s.dark_rate_hz;
    let incoming_i = pair_rate * eta_i * marginal + det_i.dark_rate_hz;
    let survival_s = 1.0 / (1.0 + incoming_s * det_s.dead_time_s());
    let survival_i = 1.0 / (1.0 + incoming_i * det_i.dead_time_s());
    let singles_s = incoming_s * survival_s * (1.0 + det_s.afterpulse_probability);
    let singles_i = incoming_i * survival_i * (1.0 + det_i.afterpulse_probability);

    let acceptance = window_acceptance(
        det_s.jitter_fwhm_ps,
        det_i.jitter_fwhm_ps,
        pair_spread_fwhm_ps(scenario)?,
        scenario.coincidence_window_ns,
    )?;
    let tau = scenario.coincidence_window_ns * 1e-9;
    let arriving = pair_rate * eta_s * eta_i * joint;
    let both = arriving * survival_s * survival_i;
    let physical = both * acceptance;
    let shared_s = shared_rate(incoming_s, det_s.dead_time_s(), tau);
    let shared_i = shared_rate(incoming_i, det_i.dead_time_s(), tau);
    let shared = physical * (1.0 - (-(shared_s + shared_i)).exp());
    let blocked =
        both * ((singles_i * tau - shared_i).max(0.0) + (singles_s * tau - shared_s).max(0.0));
    let recent = arriving
        * (survival_s
            * (1.0 - survival_i)
            * (recent_fire_probability(det_i.dead_time_s(), tau) - singles_i * tau)
            + survival_i
                * (1.0 - survival_s)
                * (recent_fire_probability(det_s.dead_time_s(), tau) - singles_s * tau));
    let true_coincidences = physical - shared - blocked + recent;
    let accidental = accidental_rate(singles_s, singles_i, scenario.coincidence_window_ns)?;
    let total = true_coincidences + accidental;
    let heralding = if singles_s > 0.0 && singles_i > 0.0 {
        total / (singles_s * singles_i).sqrt()
    } else {
        0.0
    };

    Ok(RatePrediction {
        pair_rate,
        singles_signal: singles_s,
        singles_idler: singles_i,
        true_coincidences,
        accidental_coincidences: accidental,
        total_coincidences: total,
        window_acceptance: acceptance,
        dead_time_survival_signal: survival_s,
        dead_time_survival_idler: survival_i,
        heralding_efficiency: heralding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnalyzerSetting, DetectorParams, FiberParams};
    use proptest::prelude::*;

    fn ideal(pump_mw: f64) -> LinkScenario {
        let mut s = LinkScenario::default();
        s.source.brightness_per_mw = 1e6;
        s.source.pump_power_mw = pump_mw;
        s.source.pair_correlation_fwhm_ps = 0.0;
        s.fiber = FiberParams::smf28(0.0);
        s.fiber.dispersion_slope = 0.0;
        s.detector_signal = DetectorParams::ideal(0.15);
        s.detector_idler = DetectorParams::ideal(0.60);
        s
    }

    #[test]
    fn accidental_examples() {
        let r = accidental_rate(3.8e6, 1e5, 1.25).unwrap();
        assert!((r - 475.0).abs() < 1e-9);
        assert_eq!(accidental_rate(0.0, 123.0, 1.25).unwrap(), 0.0);
        let r2 = accidental_rate(7.6e6, 2e5, 1.25).unwrap();
        assert!((r2 - 4.0 * r).abs() < 1e-9);
        assert!(accidental_rate(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn ideal_hundred_microwatt() {
        let p = expected_rates(&ideal(0.1)).unwrap();
        assert!((p.singles_signal - 1.5e4).abs() < 1e-6);
        assert!((p.singles_idler - 6e4).abs() < 1e-6);
        // 9000 physical pairs, minus the sub-1e-4 shared-window correction
        assert!((p.true_coincidences - 9e3).abs() / 9e3 < 1e-4);
        assert!((p.heralding_efficiency - 0.30).abs() < 1e-3);
    }

    #[test]
    fn zero_pump_leaves_only_darks() {
        let mut s = LinkScenario::default().with_pump(0.0);
        s.detector_signal.dead_time_ns = 0.0;
        s.detector_idler.dead_time_ns = 0.0;
        let p = expected_rates(&s).unwrap();
        assert_eq!(p.singles_signal, s.detector_signal.dark_rate_hz);
        assert_eq!(p.singles_idler, s.detector_idler.dark_rate_hz);
        assert_eq!(p.true_coincidences, 0.0);
    }

    #[test]
    fn crossed_analyzers_block_true_pairs() {
        let s = ideal(1.0).with_analyzer(Some(AnalyzerSetting::new(0.0, 90.0)));
        let p = expected_rates(&s).unwrap();
        assert!(p.true_coincidences < 1e-9);
        assert!((p.singles_signal - 0.5 * 1e6 * 0.15).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn homogeneous_in_pump_without_dead_time(pump in 0.01..50.0f64) {
            let mut s = LinkScenario::default();
            s.detector_signal.dead_time_ns = 0.0;
            s.detector_idler.dead_time_ns = 0.0;
            s.detector_signal.dark_rate_hz = 0.0;
            s.detector_idler.dark_rate_hz = 0.0;
            let a = expected_rates(&s.with_pump(pump)).unwrap();
            let b = expected_rates(&s.with_pump(2.0 * pump)).unwrap();
            let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-300);
            prop_assert!(rel(b.singles_signal, 2.0 * a.singles_signal) < 1e-12);
            prop_assert!(rel(b.singles_idler, 2.0 * a.singles_idler) < 1e-12);
            prop_assert!(rel(b.accidental_coincidences, 4.0 * a.accidental_coincidences) < 1e-12);
            let phys = |p: &RatePrediction| {
                p.true_coincidences
                    / (-(p.singles_signal + p.singles_idler) * s.coincidence_window_ns * 1e-9).exp()
            };
            prop_assert!(rel(phys(&b), 2.0 * phys(&a)) < 1e-9);
        }

        #[test]
        fn totals_add_up(pump in 0.0..20.0f64, len in 0.0..100.0f64) {
            let mut s = LinkScenario::default().with_pump(pump);
            s.fiber.length_km = len;
            let p = expected_rates(&s).unwrap();
            prop_assert!((p.total_coincidences - p.true_coincidences - p.accidental_coincidences).abs()
                <= 1e-12 * p.total_coincidences.max(1.0));
            prop_assert!(p.true_coincidences >= 0.0 && p.accidental_coincidences >= 0.0);
        }

        #[test]
        fn heralding_ceiling(e1 in 0.01..=1.0f64, e2 in 0.01..=1.0f64) {
            let mut s = ideal(0.01);
            s.detector_signal.efficiency = e1;
            s.detector_idler.efficiency = e2;
            let p = expected_rates(&s).unwrap();
            prop_assert!((p.heralding_efficiency - (e1 * e2).sqrt()).abs() < 1e-4);
        }
    }
}
