//! Per-event stream transformations: thinning, timing jitter, dark counts,
//! dead time and fixed delays.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use super::rng::{stage_rng, Stage};
use super::stream::{EventLabel, EventStream};
use crate::model::DetectorParams;
use crate::{Error, Result};

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// Working buffer: unsorted timestamps with optional labels.
pub(crate) struct Events {
    pub times: Vec<u64>,
    pub labels: Option<Vec<EventLabel>>,
}

impl Events {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn retain_by(&mut self, mut keep: impl FnMut(u64) -> bool) {
        match &mut self.labels {
            None => self.times.retain(|&t| keep(t)),
            Some(labels) => {
                let mut w = 0;
                for r in 0..self.times.len() {
                    let t = self.times[r];
                    if keep(t) {
                        self.times[w] = t;
                        labels[w] = labels[r];
                        w += 1;
                    }
                }
                self.times.truncate(w);
                labels.truncate(w);
            }
        }
    }

    fn push(&mut self, t: u64, label: EventLabel) {
        self.times.push(t);
        if let Some(l) = &mut self.labels {
            l.push(label);
        }
    }

    pub fn sort(&mut self) {
        match &mut self.labels {
            None => self.times.sort_unstable(),
            Some(labels) => {
                let mut zipped: Vec<(u64, EventLabel)> = self
                    .times
                    .iter()
                    .copied()
                    .zip(labels.iter().copied())
                    .collect();
                zipped.sort_unstable();
                for (i, (t, l)) in zipped.into_iter().enumerate() {
                    self.times[i] = t;
                    labels[i] = l;
                }
            }
        }
    }
}

pub(crate) fn bernoulli_thin(events: &mut Events, p: f64, rng: &mut ChaCha8Rng) {
    if p >= 1.0 {
        return;
    }
    events.retain_by(|_| rng.random::<f64>() < p);
}

/// Adds zero-mean Gaussian offsets of the given FWHM, rounded to whole ps.
/// Events pushed outside `[0, duration_ps]` are dropped.
pub(crate) fn gaussian_jitter(
    events: &mut Events,
    fwhm_ps: f64,
    duration_ps: u64,
    rng: &mut ChaCha8Rng,
) {
    if fwhm_ps <= 0.0 {
        return;
    }
    let sigma = fwhm_ps / FWHM_PER_SIGMA;
    let mut dropped = false;
    for t in events.times.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        let shifted = *t as i64 + (sigma * z).round() as i64;
        if shifted < 0 || shifted as u64 > duration_ps {
            *t = u64::MAX;
            dropped = true;
        } else {
            *t = shifted as u64;
        }
    }
    if dropped {
        events.retain_by(|t| t != u64::MAX);
    }
}

/// Homogeneous Poisson event times on `[0, duration_ps]`.
pub(crate) fn poisson_times(rate_hz: f64, duration_ps: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut out = Vec::new();
    if rate_hz <= 0.0 || duration_ps == 0 {
        return out;
    }
    let mean_gap_ps = 1e12 / rate_hz;
    let end = duration_ps as f64;
    out.reserve((rate_hz * end * 1e-12 * 1.01) as usize + 16);
    let mut t = 0.0;
    loop {
        let gap: f64 = rng.sample(Exp1);
        t += gap * mean_gap_ps;
        if t > end {
            break;
        }
        out.push(t.round() as u64);
    }
    out
}

/// Non-paralyzable dead time on sorted events: an event is kept only if at
/// least `dead_ps` has elapsed since the previously kept one.
pub(crate) fn dead_time_filter(events: &mut Events, dead_ps: u64) {
    if dead_ps == 0 {
        return;
    }
    let mut last: Option<u64> = None;
    events.retain_by(|t| match last {
        Some(l) if t - l < dead_ps => false,
        _ => {
            last = Some(t);
            true
        }
    });
}

/// Afterpulses following kept detections, then a second dead-time pass.
fn afterpulse(
    events: &mut Events,
    det: &DetectorParams,
    duration_ps: u64,
    dead_ps: u64,
    rng: &mut ChaCha8Rng,
) -> u64 {
    let p = det.afterpulse_probability;
    if p <= 0.0 {
        return 0;
    }
    let mean_ps = det.afterpulse_delay_ns * 1e3;
    let mut extra = Vec::new();
    for &t in &events.times {
        if rng.random::<f64>() < p {
            let gap: f64 = rng.sample(Exp1);
            let at = t + dead_ps + (gap * mean_ps).round() as u64;
            if at <= duration_ps {
                extra.push(at);
            }
        }
    }
    let n = extra.len() as u64;
    for t in extra {
        events.push(t, EventLabel::DARK);
    }
    events.sort();
    dead_time_filter(events, dead_ps);
    n
}

pub(crate) fn dead_time_ps(det: &DetectorParams) -> u64 {
    (det.dead_time_ns * 1e3).round() as u64
}

/// Counts from the detector stages after efficiency thinning.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct DetectorTally {
    pub dark_counts: u64,
    pub afterpulses: u64,
}

/// Everything after efficiency thinning: jitter, darks, sort, dead time and
/// optional afterpulsing. Input need not be sorted.
pub(crate) fn detect_after_efficiency(
    events: &mut Events,
    det: &DetectorParams,
    channel: u16,
    duration_ps: u64,
    seed: u64,
) -> DetectorTally {
    let mut rng = stage_rng(seed, Stage::Jitter, channel, 0);
    gaussian_jitter(events, det.jitter_fwhm_ps, duration_ps, &mut rng);

    let mut rng = stage_rng(seed, Stage::Darks, channel, 0);
    let darks = poisson_times(det.dark_rate_hz, duration_ps, &mut rng);
    let dark_counts = darks.len() as u64;
    events.times.reserve(darks.len());
    for t in darks {
        events.push(t, EventLabel::DARK);
    }
    events.sort();

    let dead_ps = dead_time_ps(det);
    dead_time_filter(events, dead_ps);
    let mut rng = stage_rng(seed, Stage::Afterpulse, channel, 0);
    let afterpulses = afterpulse(events, det, duration_ps, dead_ps, &mut rng);
    DetectorTally {
        dark_counts,
        afterpulses,
    }
}

/// Keeps each event independently with probability `survival_p`.
pub fn thin(stream: &EventStream, survival_p: f64, seed: u64) -> Result<EventStream> {
    if !(0.0..=1.0).contains(&survival_p) {
        return Err(Error::param("survival_p", "must lie within [0, 1]"));
    }
    let (channel, times, labels, duration) = stream.clone().into_parts();
    let mut ev = Events { times, labels };
    let mut rng = stage_rng(seed, Stage::Thin, channel, 0);
    bernoulli_thin(&mut ev, survival_p, &mut rng);
    Ok(EventStream::from_parts_unchecked(
        channel, ev.times, ev.labels, duration,
    ))
}

/// Passes a photon stream through a detector: efficiency thinning, Gaussian
/// timing jitter, Poisson dark counts, re-sort, non-paralyzable dead time.
pub fn apply_detector(
    stream: &EventStream,
    det: &DetectorParams,
    seed: u64,
) -> Result<EventStream> {
    det.validate("apply")?;
    let (channel, times, labels, duration) = stream.clone().into_parts();
    let mut ev = Events { times, labels };
    let mut rng = stage_rng(seed, Stage::Efficiency, channel, 0);
    bernoulli_thin(&mut ev, det.efficiency, &mut rng);
    detect_after_efficiency(&mut ev, det, channel, duration, seed);
    Ok(EventStream::from_parts_unchecked(
        channel, ev.times, ev.labels, duration,
    ))
}

/// Shifts every timestamp (and the stream end) by `delay_ps`.
pub fn delay_stream(stream: &EventStream, delay_ps: u64) -> Result<EventStream> {
    let overflow = || Error::TimestampOverflow { delay_ps };
    let duration = stream
        .duration_ps()
        .checked_add(delay_ps)
        .ok_or_else(overflow)?;
    let times = stream
        .times()
        .iter()
        .map(|&t| t.checked_add(delay_ps).ok_or_else(overflow))
        .collect::<Result<Vec<_>>>()?;
    Ok(EventStream::from_parts_unchecked(
        stream.channel(),
        times,
        stream.labels().map(<[_]>::to_vec),
        duration,
    ))
}
