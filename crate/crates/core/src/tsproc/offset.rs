use serde::{Deserialize, Serialize};

use super::histogram::{accumulate, bin_count};
use crate::simkit::{check_sorted, EventStream};
use crate::{Error, Result};

/// Minimum peak score accepted as a genuine correlation.
pub const SIGNIFICANCE_THRESHOLD: f64 = 5.0;

/// Approximate pair-difference budget for the coarse pass.
const COARSE_PAIR_BUDGET: f64 = 5e7;

/// Final refinement bin width.
const FINE_BIN_PS: u64 = 10;

/// Recovered delay between two correlated streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetEstimate {
    /// Center of the correlation peak in `t_b − t_a`.
    pub offset_ps: i64,
    /// Coarse peak height over the expected maximum of a flat background.
    pub significance: f64,
    pub coarse_bin_ps: u64,
    pub final_bin_ps: u64,
    /// Counts in the fullest coarse bin, and the mean coarse bin content.
    pub peak_count: u64,
    pub background_per_bin: f64,
    /// Events of `a` used in the coarse pass.
    pub coarse_events: usize,
}

/// Peak score: the peak count divided by the level that the largest of `n`
/// Poisson bins of mean `mu` would typically reach by chance.
fn significance(peak: u64, mu: f64, n: usize) -> f64 {
    let m = mu.max(1.0);
    peak as f64 / (m + (2.0 * m * (n.max(2) as f64).ln()).sqrt())
}

/// Count-weighted centroid of the bins at or above half the maximum, taken
/// from the contiguous run around the peak.
fn half_max_centroid(counts: &[u64], min_dt: i64, bin: u64) -> f64 {
    let peak = (0..counts.len())
        .max_by_key(|&k| (counts[k], std::cmp::Reverse(k)))
        .unwrap_or(0);
    let half = counts[peak].div_ceil(2);
    let mut lo = peak;
    while lo > 0 && counts[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < counts.len() && counts[hi + 1] >= half {
        hi += 1;
    }
    let (mut sw, mut sx) = (0.0, 0.0);
    for (k, &c) in counts.iter().enumerate().take(hi + 1).skip(lo) {
        let x = min_dt as f64 + (k as f64 + 0.5) * bin as f64;
        sw += c as f64;
        sx += c as f64 * x;
    }
    sx / sw
}

/// Locates the correlation peak of `t_b − t_a` within `±search_span_s`.
///
/// A coarse histogram with `coarse_bin_ns` bins over the full span finds the
/// peak; narrower histograms around it then shrink the bin width by 8 per
/// step down to 10 ps. The coarse pass uses a contiguous slice of `a` sized
/// so that about 5·10⁷ differences are binned.
pub fn find_offset(
    a: &EventStream,
    b: &EventStream,
    search_span_s: f64,
    coarse_bin_ns: f64,
) -> Result<OffsetEstimate> {
    check_sorted(a.times())?;
    check_sorted(b.times())?;
    if !(search_span_s.is_finite() && search_span_s > 0.0) {
        return Err(Error::param("search_span_s", "must be a finite value > 0"));
    }
    if !(coarse_bin_ns.is_finite() && coarse_bin_ns > 0.0) {
        return Err(Error::param("coarse_bin_ns", "must be a finite value > 0"));
    }
    let span_ps = (search_span_s * 1e12).round() as i64;
    let coarse_bin = ((coarse_bin_ns * 1e3).round() as u64).max(1);
    let range = (-span_ps, span_ps);
    let bins = bin_count(coarse_bin, range)?;

    let (ta, tb) = (a.times(), b.times());
    if ta.is_empty() || tb.is_empty() {
        return Err(Error::NoCorrelation {
            score: 0.0,
            threshold: SIGNIFICANCE_THRESHOLD,
        });
    }
    // b events falling in one span-wide window around each a event
    let b_rate_ps = tb.len() as f64 / b.duration_ps().max(1) as f64;
    let per_a = (b_rate_ps * 2.0 * span_ps as f64).max(1.0);
    let take = ((COARSE_PAIR_BUDGET / per_a) as usize).clamp(1, ta.len());
    // skip the first span of a so partners at negative delay are on record
    let start = ta
        .partition_point(|&t| t < span_ps as u64)
        .min(ta.len() - take);
    let subset = &ta[start..start + take];

    let mut coarse = vec![0u64; bins];
    let total = accumulate(subset, tb, coarse_bin, range.0, &mut coarse, 0);
    let peak_k = (0..bins)
        .max_by_key(|&k| (coarse[k], std::cmp::Reverse(k)))
        .unwrap();
    let peak_count = coarse[peak_k];
    let mu = total as f64 / bins as f64;
    let score = significance(peak_count, mu, bins);
    if score < SIGNIFICANCE_THRESHOLD {
        return Err(Error::NoCorrelation {
            score,
            threshold: SIGNIFICANCE_THRESHOLD,
        });
    }

    let mut center = range.0 as f64 + (peak_k as f64 + 0.5) * coarse_bin as f64;
    let mut bin = coarse_bin;
    while bin > FINE_BIN_PS {
        let half_width = (4 * bin) as i64;
        bin = bin.div_ceil(8).max(FINE_BIN_PS);
        let lo = center.round() as i64 - half_width;
        let n = bin_count(bin, (lo, lo + 2 * half_width))?;
        let mut counts = vec![0u64; n];
        accumulate(ta, tb, bin, lo, &mut counts, 0);
        center = half_max_centroid(&counts, lo, bin);
    }

    Ok(OffsetEstimate {
        offset_ps: center.round() as i64,
        significance: score,
        coarse_bin_ps: coarse_bin,
        final_bin_ps: bin,
        peak_count,
        background_per_bin: mu,
        coarse_events: take,
    })
}
