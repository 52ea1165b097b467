use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::detector::{detect_after_efficiency, Events};
use super::pairs::{check_budget, duration_to_ps, EmissionPlan};
use super::rng::{stage_rng, Stage};
use super::stream::{EventLabel, EventStream};
use super::{SimOptions, IDLER_CHANNEL, SIGNAL_CHANNEL};
use crate::model::{chromatic_broadening_ps, joint_outcomes, propagation_delay_ps, LinkScenario};
use crate::Result;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// Photon counts surviving each stage of one arm.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub after_analyzer: u64,
    /// After path (and, on the signal arm, fiber) transmission.
    pub after_loss: u64,
    /// After detector efficiency.
    pub after_detection: u64,
    /// Pair photons still present after dead time.
    pub after_dead_time: u64,
    pub dark_counts: u64,
    pub afterpulses: u64,
    /// Final stream size, pair photons plus noise.
    pub final_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub duration_s: f64,
    pub generated_pairs: u64,
    pub signal: ArmCounts,
    pub idler: ArmCounts,
    /// Pairs with both photons present in the final streams.
    pub coincident_truth_pairs: u64,
    pub fiber_delay_ps: u64,
    pub chromatic_fwhm_ps: f64,
}

/// Output of [`simulate_link`]. Streams carry ground-truth labels.
#[derive(Debug, Clone)]
pub struct LinkRun {
    pub signal: EventStream,
    pub idler: EventStream,
    pub report: SimulationReport,
}

/// Runs the full link: pair emission → joint analyzer projection → path and
/// fiber loss → (signal) delay and dispersion → detectors.
///
/// Emission is processed in fixed blocks so memory scales with the number
/// of detected photons, not emitted pairs. The idler stream spans
/// `duration_s`; the signal stream is longer by the fiber delay.
pub fn simulate_link(
    scenario: &LinkScenario,
    duration_s: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<LinkRun> {
    scenario.validate()?;
    let duration_ps = duration_to_ps(duration_s)?;
    let pair_rate = scenario.source.pair_rate();
    let marginal = if scenario.analyzer.is_some() {
        0.5
    } else {
        1.0
    };
    let expected_s = (pair_rate * scenario.eta_signal() * marginal
        + scenario.detector_signal.dark_rate_hz)
        * duration_s;
    let expected_i = (pair_rate * scenario.eta_idler() * marginal
        + scenario.detector_idler.dark_rate_hz)
        * duration_s;
    check_budget(expected_s + expected_i, opts)?;

    // cumulative thresholds for [both, signal only, idler only, neither]
    let outcome_cdf = match &scenario.analyzer {
        Some(a) => {
            let (v_hv, v_da) = scenario.effective_visibilities();
            let p = joint_outcomes(a.signal_deg, a.idler_deg, v_hv, v_da)?;
            Some([p[0], p[0] + p[1], p[0] + p[1] + p[2]])
        }
        None => None,
    };

    let mut sig = Arm::new(
        scenario.signal_transmission(),
        scenario.detector_signal.efficiency,
    );
    let mut idl = Arm::new(
        scenario.path_efficiency_idler,
        scenario.detector_idler.efficiency,
    );

    let plan = EmissionPlan::new(pair_rate, duration_ps);
    let mut emission = Vec::new();
    let mut next_id = 0u64;
    for k in 0..plan.blocks {
        emission.clear();
        plan.block(seed, k, &mut emission);
        let mut analyzer = stage_rng(seed, Stage::Analyzer, 0, k);
        let mut loss_s = stage_rng(seed, Stage::Loss, SIGNAL_CHANNEL, k);
        let mut loss_i = stage_rng(seed, Stage::Loss, IDLER_CHANNEL, k);

        for &t in &emission {
            let id = next_id;
            next_id += 1;
            let (signal_pass, idler_pass) = match &outcome_cdf {
                None => (true, true),
                Some(cdf) => {
                    let u: f64 = analyzer.random();
                    if u < cdf[0] {
                        (true, true)
                    } else if u < cdf[1] {
                        (true, false)
                    } else if u < cdf[2] {
                        (false, true)
                    } else {
                        (false, false)
                    }
                }
            };
            let t = t.round() as u64;
            if signal_pass {
                sig.photon(t, id, &mut loss_s);
            }
            if idler_pass {
                idl.photon(t, id, &mut loss_i);
            }
        }
    }

    // signal arm: pair offset, fiber delay, chromatic spread (all rounded to ps)
    let delay_ps = propagation_delay_ps(&scenario.fiber);
    let chromatic = chromatic_broadening_ps(
        &scenario.fiber,
        scenario.source.signal_center_nm,
        scenario.source.signal_bandwidth_nm,
    )?;
    let signal_duration = duration_ps + delay_ps;
    let pair_sigma = scenario.source.pair_correlation_fwhm_ps / FWHM_PER_SIGMA;
    let chrom_sigma = chromatic / FWHM_PER_SIGMA;
    let mut offset_rng = stage_rng(seed, Stage::PairOffset, SIGNAL_CHANNEL, 0);
    let mut chrom_rng = stage_rng(seed, Stage::Chromatic, SIGNAL_CHANNEL, 0);
    let mut out_of_range = false;
    for t in sig.events.times.iter_mut() {
        let mut shifted = *t as i64 + delay_ps as i64;
        if pair_sigma > 0.0 {
            let z: f64 = offset_rng.sample(StandardNormal);
            shifted += (pair_sigma * z).round() as i64;
        }
        if chrom_sigma > 0.0 {
            let z: f64 = chrom_rng.sample(StandardNormal);
            shifted += (chrom_sigma * z).round() as i64;
        }
        if shifted < 0 || shifted as u64 > signal_duration {
            *t = u64::MAX;
            out_of_range = true;
        } else {
            *t = shifted as u64;
        }
    }
    if out_of_range {
        sig.events.retain_by(|t| t != u64::MAX);
    }

    let tally_s = detect_after_efficiency(
        &mut sig.events,
        &scenario.detector_signal,
        SIGNAL_CHANNEL,
        signal_duration,
        seed,
    );
    let tally_i = detect_after_efficiency(
        &mut idl.events,
        &scenario.detector_idler,
        IDLER_CHANNEL,
        duration_ps,
        seed,
    );
    sig.finish(tally_s.dark_counts, tally_s.afterpulses);
    idl.finish(tally_i.dark_counts, tally_i.afterpulses);

    let coincident = count_shared_pairs(&sig.events, &idl.events, next_id);
    let report = SimulationReport {
        seed,
        duration_s,
        generated_pairs: next_id,
        signal: sig.counts,
        idler: idl.counts,
        coincident_truth_pairs: coincident,
        fiber_delay_ps: delay_ps,
        chromatic_fwhm_ps: chromatic,
    };
    Ok(LinkRun {
        signal: EventStream::from_parts_unchecked(
            SIGNAL_CHANNEL,
            sig.events.times,
            sig.events.labels,
            signal_duration,
        ),
        idler: EventStream::from_parts_unchecked(
            IDLER_CHANNEL,
            idl.events.times,
            idl.events.labels,
            duration_ps,
        ),
        report,
    })
}

/// One arm's transmission chain. A single uniform `u` per photon decides
/// every stage: it survives loss if `u < transmission` and is detected if
/// `u < transmission·efficiency`, which reproduces independent Bernoulli
/// stages with one draw.
struct Arm {
    transmission: f64,
    detected: f64,
    counts: ArmCounts,
    events: Events,
}

impl Arm {
    fn new(transmission: f64, efficiency: f64) -> Self {
        Self {
            transmission,
            detected: transmission * efficiency,
            counts: ArmCounts::default(),
            events: Events {
                times: Vec::new(),
                labels: Some(Vec::new()),
            },
        }
    }

    #[inline]
    fn photon(&mut self, t: u64, id: u64, rng: &mut ChaCha8Rng) {
        self.counts.after_analyzer += 1;
        let u: f64 = rng.random();
        if u < self.transmission {
            self.counts.after_loss += 1;
            if u < self.detected {
                self.counts.after_detection += 1;
                self.events.times.push(t);
                self.events
                    .labels
                    .as_mut()
                    .unwrap()
                    .push(EventLabel::pair(id));
            }
        }
    }

    fn finish(&mut self, dark_counts: u64, afterpulses: u64) {
        let labels = self.events.labels.as_ref().unwrap();
        self.counts.after_dead_time = labels.iter().filter(|l| !l.is_dark()).count() as u64;
        self.counts.dark_counts = dark_counts;
        self.counts.afterpulses = afterpulses;
        self.counts.final_events = self.events.len() as u64;
    }
}

fn count_shared_pairs(a: &Events, b: &Events, n_ids: u64) -> u64 {
    let (Some(la), Some(lb)) = (&a.labels, &b.labels) else {
        return 0;
    };
    let mut seen = vec![0u64; (n_ids as usize).div_ceil(64)];
    for id in la.iter().filter_map(|l| l.pair_id()) {
        seen[(id / 64) as usize] |= 1 << (id % 64);
    }
    lb.iter()
        .filter_map(|l| l.pair_id())
        .filter(|&id| seen[(id / 64) as usize] & (1 << (id % 64)) != 0)
        .count() as u64
}
