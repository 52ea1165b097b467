//! Polarization correlations of the |Φ−⟩ = (|HH⟩ − |VV⟩)/√2 state with
//! basis-dependent visibility.

use super::params::unit_interval;
use crate::Result;

/// Probability that both photons pass polarizers at `signal_deg` and
/// `idler_deg`:
///
/// `p = ¼·[1 + V_hv·cos2α·cos2β − V_da·sin2α·sin2β]`
///
/// With unit visibilities this is `½·cos²(α + β)`.
pub fn coincidence_probability(
    signal_deg: f64,
    idler_deg: f64,
    visibility_hv: f64,
    visibility_da: f64,
) -> Result<f64> {
    unit_interval("visibility_hv", visibility_hv)?;
    unit_interval("visibility_da", visibility_da)?;
    Ok(probability_unchecked(
        signal_deg,
        idler_deg,
        visibility_hv,
        visibility_da,
    ))
}

fn probability_unchecked(signal_deg: f64, idler_deg: f64, v_hv: f64, v_da: f64) -> f64 {
    let a = (2.0 * signal_deg).to_radians();
    let b = (2.0 * idler_deg).to_radians();
    let p = 0.25 * (1.0 + v_hv * a.cos() * b.cos() - v_da * a.sin() * b.sin());
    // cos/sin rounding can push the perfectly anti-correlated case a hair below zero
    p.max(0.0)
}

/// Joint analyzer outcomes for one pair, in the order
/// `[both pass, signal only, idler only, neither]`.
///
/// "Signal only" means the signal photon is transmitted and the idler photon
/// is blocked, i.e. the idler is found in the orthogonal polarization.
pub fn joint_outcomes(
    signal_deg: f64,
    idler_deg: f64,
    visibility_hv: f64,
    visibility_da: f64,
) -> Result<[f64; 4]> {
    unit_interval("visibility_hv", visibility_hv)?;
    unit_interval("visibility_da", visibility_da)?;
    let p = |s: f64, i: f64| probability_unchecked(s, i, visibility_hv, visibility_da);
    Ok([
        p(signal_deg, idler_deg),
        p(signal_deg, idler_deg + 90.0),
        p(signal_deg + 90.0, idler_deg),
        p(signal_deg + 90.0, idler_deg + 90.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pure_state_examples() {
        assert!((coincidence_probability(0.0, 0.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(coincidence_probability(45.0, 45.0, 1.0, 1.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn measured_visibilities_at_hh() {
        let p = coincidence_probability(0.0, 0.0, 0.940, 0.910).unwrap();
        assert!((p - 0.485).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_visibility() {
        assert!(coincidence_probability(0.0, 0.0, -0.1, 1.0).is_err());
        assert!(coincidence_probability(0.0, 0.0, 1.0, 1.01).is_err());
    }

    proptest! {
        #[test]
        fn reduces_to_cos_squared(a in -360.0..360.0f64, b in -360.0..360.0f64) {
            let p = coincidence_probability(a, b, 1.0, 1.0).unwrap();
            let expect = 0.5 * (a + b).to_radians().cos().powi(2);
            prop_assert!((p - expect).abs() < 1e-12);
        }

        #[test]
        fn period_and_exchange_symmetry(
            a in -360.0..360.0f64, b in -360.0..360.0f64,
            vhv in 0.0..=1.0f64, vda in 0.0..=1.0f64,
        ) {
            let p = coincidence_probability(a, b, vhv, vda).unwrap();
            let shifted = coincidence_probability(a + 180.0, b, vhv, vda).unwrap();
            let swapped = coincidence_probability(b, a, vhv, vda).unwrap();
            prop_assert!((p - shifted).abs() < 1e-12);
            prop_assert!((p - swapped).abs() < 1e-12);
        }

        #[test]
        fn projections_are_complete(
            a in -360.0..360.0f64, b in -360.0..360.0f64,
            vhv in 0.0..=1.0f64, vda in 0.0..=1.0f64,
        ) {
            let o = joint_outcomes(a, b, vhv, vda).unwrap();
            prop_assert!((o.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // each photon's marginal is one half whatever the partner does
            prop_assert!((o[0] + o[1] - 0.5).abs() < 1e-12);
            prop_assert!((o[0] + o[2] - 0.5).abs() < 1e-12);
        }
    }
}
