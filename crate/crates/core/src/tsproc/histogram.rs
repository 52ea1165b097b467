use serde::{Deserialize, Serialize};

use crate::simkit::{check_sorted, EventStream};
use crate::{Error, Result};

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// Histogram of arrival-time differences `t_b − t_a − offset`.
///
/// Bin `k` covers `[min_dt_ps + k·w, min_dt_ps + (k+1)·w)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bin_width_ps: u64,
    pub min_dt_ps: i64,
    /// Upper edge, `min_dt_ps + bins·bin_width_ps`.
    pub max_dt_ps: i64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl CorrelationHistogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_center_ps(&self, k: usize) -> f64 {
        self.min_dt_ps as f64 + (k as f64 + 0.5) * self.bin_width_ps as f64
    }

    /// Index of the fullest bin (first one on ties).
    pub fn peak_bin(&self) -> Option<usize> {
        let max = *self.counts.iter().max()?;
        self.counts.iter().position(|&c| c == max)
    }

    /// Least-squares fit of a Gaussian peak on a flat background.
    pub fn fit_gaussian(&self) -> Result<GaussianFit> {
        fit_gaussian(self)
    }
}

/// `amplitude·exp(−(x−center)²/2σ²) + background`, in counts per bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center_ps: f64,
    pub sigma_ps: f64,
    pub fwhm_ps: f64,
    pub background: f64,
    /// Weighted sum of squared residuals at the optimum.
    pub chi2: f64,
}

/// Counts `t_b − t_a − offset_ps` into bins on sorted slices.
///
/// One pass over `a` with a lower pointer into `b` that never moves back, so
/// the cost is `O(n + m + pairs in range)`.
pub(crate) fn accumulate(
    a: &[u64],
    b: &[u64],
    bin_width_ps: u64,
    min_dt_ps: i64,
    counts: &mut [u64],
    offset_ps: i64,
) -> u64 {
    let w = bin_width_ps as i128;
    let span = w * counts.len() as i128;
    let lo_off = offset_ps as i128 + min_dt_ps as i128;
    let mut lo = 0usize;
    let mut total = 0u64;
    for &ta in a {
        let start = ta as i128 + lo_off;
        while lo < b.len() && (b[lo] as i128) < start {
            lo += 1;
        }
        for &tb in &b[lo..] {
            let rel = tb as i128 - start;
            if rel >= span {
                break;
            }
            counts[(rel / w) as usize] += 1;
            total += 1;
        }
    }
    total
}

pub(crate) fn bin_count(bin_width_ps: u64, range_ps: (i64, i64)) -> Result<usize> {
    if bin_width_ps == 0 {
        return Err(Error::param("bin_width_ps", "must be > 0"));
    }
    let (min, max) = range_ps;
    let span = max as i128 - min as i128;
    if span < bin_width_ps as i128 {
        return Err(Error::param(
            "range_ps",
            format!("[{min}, {max}) must span at least one {bin_width_ps} ps bin"),
        ));
    }
    let n = (span + bin_width_ps as i128 - 1) / bin_width_ps as i128;
    if n > 1 << 28 {
        return Err(Error::param(
            "range_ps",
            format!("{n} bins exceed the 2^28 limit"),
        ));
    }
    Ok(n as usize)
}

/// Histogram of all pairwise differences `t_b − t_a − offset_ps` inside
/// `[range.0, range.1)`. The range is rounded up to a whole number of bins.
pub fn correlation_histogram(
    a: &EventStream,
    b: &EventStream,
    bin_width_ps: u64,
    range_ps: (i64, i64),
    offset_ps: i64,
) -> Result<CorrelationHistogram> {
    histogram_slices(a.times(), b.times(), bin_width_ps, range_ps, offset_ps)
}

/// [`correlation_histogram`] on raw sorted timestamp slices.
pub fn histogram_slices(
    a: &[u64],
    b: &[u64],
    bin_width_ps: u64,
    range_ps: (i64, i64),
    offset_ps: i64,
) -> Result<CorrelationHistogram> {
    check_sorted(a)?;
    check_sorted(b)?;
    let n = bin_count(bin_width_ps, range_ps)?;
    let mut counts = vec![0u64; n];
    let total = accumulate(a, b, bin_width_ps, range_ps.0, &mut counts, offset_ps);
    Ok(CorrelationHistogram {
        bin_width_ps,
        min_dt_ps: range_ps.0,
        max_dt_ps: range_ps.0 + (n as u64 * bin_width_ps) as i64,
        counts,
        total,
    })
}

fn model(p: &[f64; 4], x: f64) -> (f64, [f64; 4]) {
    let [amp, mu, sigma, bg] = *p;
    let z = (x - mu) / sigma;
    let g = (-0.5 * z * z).exp();
    let f = amp * g + bg;
    (f, [g, amp * g * z / sigma, amp * g * z * z / sigma, 1.0])
}

fn chi2(p: &[f64; 4], xs: &[f64], ys: &[f64], ws: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(ws)
        .map(|((&x, &y), &w)| {
            let r = y - model(p, x).0;
            w * r * r
        })
        .sum()
}

/// Solves `m·x = v` by Gaussian elimination with partial pivoting.
fn solve4(mut m: [[f64; 4]; 4], mut v: [f64; 4]) -> Option<[f64; 4]> {
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        v.swap(c, p);
        for r in c + 1..4 {
            let f = m[r][c] / m[c][c];
            for k in c..4 {
                m[r][k] -= f * m[c][k];
            }
            v[r] -= f * v[c];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|k| m[r][k] * x[k]).sum();
        x[r] = (v[r] - s) / m[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn fit_gaussian(h: &CorrelationHistogram) -> Result<GaussianFit> {
    let fail = |why: &str| Error::param("histogram", format!("gaussian fit failed: {why}"));
    if h.bins() < 5 {
        return Err(fail("fewer than 5 bins"));
    }
    let xs: Vec<f64> = (0..h.bins()).map(|k| h.bin_center_ps(k)).collect();
    let ys: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
    let ws: Vec<f64> = ys.iter().map(|&y| 1.0 / y.max(1.0)).collect();
    let peak = h.peak_bin().unwrap();

    let edge = (h.bins() / 10).max(1);
    let bg0 = {
        let side: Vec<f64> = ys[..edge]
            .iter()
            .chain(&ys[h.bins() - edge..])
            .copied()
            .collect();
        side.iter().sum::<f64>() / side.len() as f64
    };
    let amp0 = ys[peak] - bg0;
    if amp0 <= 0.0 {
        return Err(fail("no peak above background"));
    }
    let above = ys.iter().filter(|&&y| y - bg0 >= 0.5 * amp0).count() as f64;
    let bw = h.bin_width_ps as f64;
    let mut p = [
        amp0,
        xs[peak],
        (above * bw / FWHM_PER_SIGMA).max(0.5 * bw),
        bg0.max(0.0),
    ];

    let mut lambda = 1e-3;
    let mut cost = chi2(&p, &xs, &ys, &ws);
    for _ in 0..200 {
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for ((&x, &y), &w) in xs.iter().zip(&ys).zip(&ws) {
            let (f, d) = model(&p, x);
            let r = y - f;
            for i in 0..4 {
                jtr[i] += w * d[i] * r;
                for k in 0..4 {
                    jtj[i][k] += w * d[i] * d[k];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut m = jtj;
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-300);
            }
            let Some(step) = solve4(m, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [
                p[0] + step[0],
                p[1] + step[1],
                p[2] + step[2],
                p[3] + step[3],
            ];
            let c = if trial[2] > 0.0 {
                chi2(&trial, &xs, &ys, &ws)
            } else {
                f64::INFINITY
            };
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                p = trial;
                cost = c;
                lambda = (lambda * 0.1).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let [amplitude, center_ps, sigma, background] = p;
    if !(amplitude > 0.0 && sigma > 0.0 && center_ps.is_finite()) {
        return Err(fail("non-physical optimum"));
    }
    Ok(GaussianFit {
        amplitude,
        center_ps,
        sigma_ps: sigma,
        fwhm_ps: sigma * FWHM_PER_SIGMA,
        background,
        chi2: cost,
    })
}
