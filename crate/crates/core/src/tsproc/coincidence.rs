use serde::{Deserialize, Serialize};

use crate::simkit::{check_sorted, EventStream};
use crate::{Error, Result};

/// Outcome of a windowed coincidence search between two streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceResult {
    pub count: u64,
    /// `count` divided by `overlap_s`.
    pub rate_hz: f64,
    /// Full window width.
    pub window_ns: f64,
    /// Offset subtracted from `t_b − t_a` before windowing.
    pub applied_offset_ps: i64,
    /// Length of the time range covered by both streams once `b` is shifted
    /// back by the offset.
    pub overlap_s: f64,
    /// `(index in a, index in b)` for every match, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matches: Option<Vec<(usize, usize)>>,
}

pub(crate) fn window_to_ps(window_ns: f64) -> Result<u64> {
    if !(window_ns.is_finite() && window_ns > 0.0) {
        return Err(Error::param("window_ns", "must be a finite value > 0"));
    }
    Ok((window_ns * 1e3).round() as u64)
}

/// Greedy earliest-first one-to-one matching on sorted slices.
///
/// A pair `(i, j)` is eligible when `|b[j] − a[i] − offset| ≤ window/2`;
/// `window_ps` is the full width. Each event joins at most one pair. Runs in
/// `O(n + m)`. Inputs are assumed sorted.
pub(crate) fn match_sorted(
    a: &[u64],
    b: &[u64],
    window_ps: u64,
    offset_ps: i64,
    mut on_match: impl FnMut(usize, usize),
) -> u64 {
    let w = window_ps as i128;
    let off = offset_ps as i128;
    let (mut i, mut j, mut count) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        let d = b[j] as i128 - a[i] as i128 - off;
        if 2 * d.abs() <= w {
            on_match(i, j);
            count += 1;
            i += 1;
            j += 1;
        } else if d < 0 {
            j += 1;
        } else {
            i += 1;
        }
    }
    count
}

/// Coincidence count on raw timestamp slices, checking that both are sorted.
pub fn count_coincidences(a: &[u64], b: &[u64], window_ns: f64, offset_ps: i64) -> Result<u64> {
    check_sorted(a)?;
    check_sorted(b)?;
    Ok(match_sorted(
        a,
        b,
        window_to_ps(window_ns)?,
        offset_ps,
        |_, _| {},
    ))
}

/// Overlap (ps) of `[0, Ta]` and `[0, Tb]` shifted back by `offset_ps`.
pub(crate) fn overlap_ps(a: &EventStream, b: &EventStream, offset_ps: i64) -> f64 {
    let ta = a.duration_ps() as f64;
    let tb = b.duration_ps() as f64 - offset_ps as f64;
    (ta.min(tb) - 0f64.max(-(offset_ps as f64))).max(0.0)
}

fn search(
    a: &EventStream,
    b: &EventStream,
    window_ns: f64,
    offset_ps: i64,
    keep: bool,
) -> Result<CoincidenceResult> {
    check_sorted(a.times())?;
    check_sorted(b.times())?;
    let w = window_to_ps(window_ns)?;
    let mut matches = keep.then(Vec::new);
    let count = match_sorted(a.times(), b.times(), w, offset_ps, |i, j| {
        if let Some(m) = matches.as_mut() {
            m.push((i, j));
        }
    });
    let overlap_s = overlap_ps(a, b, offset_ps) * 1e-12;
    Ok(CoincidenceResult {
        count,
        rate_hz: if overlap_s > 0.0 {
            count as f64 / overlap_s
        } else {
            0.0
        },
        window_ns,
        applied_offset_ps: offset_ps,
        overlap_s,
        matches,
    })
}

/// Counts coincidences between `a` and `b` in a window of full width
/// `window_ns` centered on `t_b − t_a = offset_ps`.
pub fn find_coincidences(
    a: &EventStream,
    b: &EventStream,
    window_ns: f64,
    offset_ps: i64,
) -> Result<CoincidenceResult> {
    search(a, b, window_ns, offset_ps, false)
}

/// Same as [`find_coincidences`], also returning the matched index pairs.
pub fn find_coincidences_with_matches(
    a: &EventStream,
    b: &EventStream,
    window_ns: f64,
    offset_ps: i64,
) -> Result<CoincidenceResult> {
    search(a, b, window_ns, offset_ps, true)
}

/// Accidental-coincidence estimate from a window of the same width displaced
/// by `displacement_ns` from the correlation peak.
pub fn displaced_window_rate(
    a: &EventStream,
    b: &EventStream,
    window_ns: f64,
    offset_ps: i64,
    displacement_ns: f64,
) -> Result<f64> {
    window_to_ps(window_ns)?;
    if !(displacement_ns.is_finite() && displacement_ns.abs() > window_ns) {
        return Err(Error::param(
            "displacement_ns",
            format!("|{displacement_ns}| must exceed the window width {window_ns} so windows do not overlap"),
        ));
    }
    let shift = (displacement_ns * 1e3).round() as i64;
    let shifted = offset_ps
        .checked_add(shift)
        .ok_or_else(|| Error::param("displacement_ns", "offset plus displacement overflows"))?;
    Ok(find_coincidences(a, b, window_ns, shifted)?.rate_hz)
}

/// Mean of the displaced-window rates at `+displacement` and `−displacement`.
pub fn symmetric_displaced_window_rate(
    a: &EventStream,
    b: &EventStream,
    window_ns: f64,
    offset_ps: i64,
    displacement_ns: f64,
) -> Result<f64> {
    let plus = displaced_window_rate(a, b, window_ns, offset_ps, displacement_ns.abs())?;
    let minus = displaced_window_rate(a, b, window_ns, offset_ps, -displacement_ns.abs())?;
    Ok(0.5 * (plus + minus))
}
