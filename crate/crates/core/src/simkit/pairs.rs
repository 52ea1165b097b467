use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::detector::Events;
use super::rng::{stage_rng, Stage};
use super::stream::{EventLabel, EventStream};
use super::{SimOptions, IDLER_CHANNEL, SIGNAL_CHANNEL};
use crate::model::LinkScenario;
use crate::{Error, Result};

/// Expected pairs per emission block. Fixed so that block boundaries, and
/// therefore random sub-streams, depend only on the scenario.
const BLOCK_PAIRS: f64 = (1u64 << 20) as f64;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// Poisson pair-emission times split into fixed blocks.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EmissionPlan {
    rate_per_ps: f64,
    block_len_ps: f64,
    duration_ps: f64,
    pub blocks: u64,
}

impl EmissionPlan {
    pub fn new(pair_rate_hz: f64, duration_ps: u64) -> Self {
        let rate_per_ps = pair_rate_hz * 1e-12;
        let duration = duration_ps as f64;
        if rate_per_ps <= 0.0 || duration_ps == 0 {
            return Self {
                rate_per_ps: 0.0,
                block_len_ps: duration,
                duration_ps: duration,
                blocks: 0,
            };
        }
        let block_len_ps = BLOCK_PAIRS / rate_per_ps;
        Self {
            rate_per_ps,
            block_len_ps,
            duration_ps: duration,
            blocks: (duration / block_len_ps).ceil().max(1.0) as u64,
        }
    }

    /// Emission times (ps, unrounded) falling in block `k`, appended to `out`.
    pub fn block(&self, seed: u64, k: u64, out: &mut Vec<f64>) {
        let start = k as f64 * self.block_len_ps;
        let end = (start + self.block_len_ps).min(self.duration_ps);
        let mut rng = stage_rng(seed, Stage::Emission, 0, k);
        let mean_gap = 1.0 / self.rate_per_ps;
        let mut t = start;
        loop {
            let gap: f64 = rng.sample(Exp1);
            t += gap * mean_gap;
            if t >= end {
                break;
            }
            out.push(t);
        }
    }
}

pub(crate) fn duration_to_ps(duration_s: f64) -> Result<u64> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::param("duration_s", "must be a finite value > 0"));
    }
    let ps = duration_s * 1e12;
    if ps >= u64::MAX as f64 / 4.0 {
        return Err(Error::param(
            "duration_s",
            "too long for picosecond timestamps",
        ));
    }
    Ok(ps.round() as u64)
}

/// Upper Poisson bound used for memory budgeting.
pub(crate) fn check_budget(expected_events: f64, opts: &SimOptions) -> Result<()> {
    let bound = expected_events + 6.0 * expected_events.sqrt();
    if bound > opts.event_budget as f64 {
        return Err(Error::Capacity {
            requested: bound.ceil() as u64,
            budget: opts.event_budget,
        });
    }
    Ok(())
}

/// Both photons of every emitted pair, before any loss.
#[derive(Debug, Clone)]
pub struct PairStreams {
    pub signal: EventStream,
    pub idler: EventStream,
    /// `(idler index, signal index)` for every pair, in emission order.
    pub truth: Vec<(usize, usize)>,
}

impl PairStreams {
    pub fn generated_pairs(&self) -> usize {
        self.truth.len()
    }
}

/// Samples Poisson pair emission at `brightness × pump` for `duration_s`.
///
/// The idler photon carries the emission time; the signal photon is offset
/// by a Gaussian of FWHM `pair_correlation_fwhm_ps`, clamped to the record.
pub fn synthesize_pairs(
    scenario: &LinkScenario,
    duration_s: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<PairStreams> {
    scenario.validate()?;
    let duration_ps = duration_to_ps(duration_s)?;
    let pair_rate = scenario.source.pair_rate();
    check_budget(pair_rate * duration_s, opts)?;

    let plan = EmissionPlan::new(pair_rate, duration_ps);
    let mut emission = Vec::new();
    for k in 0..plan.blocks {
        plan.block(seed, k, &mut emission);
    }

    let idler_times: Vec<u64> = emission.iter().map(|t| t.round() as u64).collect();
    let sigma = scenario.source.pair_correlation_fwhm_ps / FWHM_PER_SIGMA;
    let mut rng = stage_rng(seed, Stage::PairOffset, SIGNAL_CHANNEL, 0);
    let signal_times: Vec<u64> = idler_times
        .iter()
        .map(|&t| {
            let z: f64 = if sigma > 0.0 {
                rng.sample(StandardNormal)
            } else {
                0.0
            };
            (t as i64 + (sigma * z).round() as i64).clamp(0, duration_ps as i64) as u64
        })
        .collect();

    let n = idler_times.len();
    let ids: Vec<EventLabel> = (0..n as u64).map(EventLabel::pair).collect();
    let mut signal = Events {
        times: signal_times,
        labels: Some(ids.clone()),
    };
    signal.sort();
    let mut truth = vec![(0usize, 0usize); n];
    for (pos, label) in signal.labels.as_ref().unwrap().iter().enumerate() {
        let id = label.pair_id().unwrap() as usize;
        truth[id] = (id, pos);
    }

    Ok(PairStreams {
        signal: EventStream::from_parts_unchecked(
            SIGNAL_CHANNEL,
            signal.times,
            signal.labels,
            duration_ps,
        ),
        idler: EventStream::from_parts_unchecked(
            IDLER_CHANNEL,
            idler_times,
            Some(ids),
            duration_ps,
        ),
        truth,
    })
}
