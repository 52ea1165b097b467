use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pair-to-singles ratio `C/√(S1·S2)`.
pub fn heralding_efficiency(coincidences: f64, singles_1: f64, singles_2: f64) -> Result<f64> {
    if !(singles_1 > 0.0 && singles_2 > 0.0 && singles_1.is_finite() && singles_2.is_finite()) {
        return Err(Error::param(
            "singles",
            "both singles rates must be finite and > 0",
        ));
    }
    if !(coincidences >= 0.0) {
        return Err(Error::param("coincidences", "must be >= 0"));
    }
    let bound = (singles_1 * singles_2).sqrt();
    if coincidences > bound {
        return Err(Error::InconsistentHeralding {
            coincidences,
            bound,
        });
    }
    Ok(coincidences / bound)
}

/// Shannon entropy of a binary variable, in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::param("x", "probability must lie within [0, 1]"));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(x) + term(1.0 - x))
}

/// Quantum bit error rate of a source with fringe visibility `v`.
pub fn qber(v: f64) -> f64 {
    (1.0 - v) / 2.0
}

/// Asymptotic BBM92 key-rate estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateEstimate {
    pub coincidence_rate: f64,
    pub visibility: f64,
    pub qber: f64,
    pub ec_efficiency: f64,
    /// `1 − f·h2(e) − h2(e)` before clamping.
    pub secret_fraction: f64,
    pub sifting: f64,
    pub key_rate: f64,
    /// Set when the secret fraction is negative and the rate clamps to 0.
    pub below_threshold: bool,
}

/// `R = C·sifting·max(0, 1 − f·h2(e) − h2(e))` with `e = (1 − V)/2`.
///
/// `sifting = 1` counts every matched-basis coincidence; `0.5` models
/// passive random basis choice on both sides.
pub fn bbm92_key_rate(
    coincidence_rate: f64,
    visibility: f64,
    ec_efficiency: f64,
    sifting: f64,
) -> Result<KeyRateEstimate> {
    if !(coincidence_rate.is_finite() && coincidence_rate >= 0.0) {
        return Err(Error::param(
            "coincidence_rate",
            "must be a finite value >= 0",
        ));
    }
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::param("visibility", "must lie within [0, 1]"));
    }
    if !(ec_efficiency.is_finite() && ec_efficiency >= 1.0) {
        return Err(Error::param("ec_efficiency", "must be a finite value >= 1"));
    }
    if !(sifting > 0.0 && sifting <= 1.0) {
        return Err(Error::param("sifting", "must lie within (0, 1]"));
    }
    let e = qber(visibility);
    let h = binary_entropy(e)?;
    let r = 1.0 - ec_efficiency * h - h;
    Ok(KeyRateEstimate {
        coincidence_rate,
        visibility,
        qber: e,
        ec_efficiency,
        secret_fraction: r,
        sifting,
        key_rate: coincidence_rate * sifting * r.max(0.0),
        below_threshold: r < 0.0,
    })
}
