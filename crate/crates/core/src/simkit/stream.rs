use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ground-truth origin of a simulated detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventLabel(u64);

impl EventLabel {
    /// Dark counts and afterpulses.
    pub const DARK: EventLabel = EventLabel(u64::MAX);

    pub fn pair(id: u64) -> Self {
        debug_assert!(id != u64::MAX);
        EventLabel(id)
    }

    pub fn pair_id(self) -> Option<u64> {
        (self != Self::DARK).then_some(self.0)
    }

    pub fn is_dark(self) -> bool {
        self == Self::DARK
    }
}

/// One detector channel's photodetection timestamps, in picoseconds,
/// sorted and bounded by `duration_ps`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    channel: u16,
    times: Vec<u64>,
    duration_ps: u64,
    labels: Option<Vec<EventLabel>>,
}

impl EventStream {
    pub fn new(channel: u16, times: Vec<u64>, duration_ps: u64) -> Result<Self> {
        check_sorted(&times)?;
        if let Some(&last) = times.last() {
            if last > duration_ps {
                return Err(Error::param(
                    "duration_ps",
                    format!("last timestamp {last} lies beyond the stream duration {duration_ps}"),
                ));
            }
        }
        Ok(Self {
            channel,
            times,
            duration_ps,
            labels: None,
        })
    }

    pub fn with_labels(
        channel: u16,
        times: Vec<u64>,
        labels: Vec<EventLabel>,
        duration_ps: u64,
    ) -> Result<Self> {
        if labels.len() != times.len() {
            return Err(Error::param(
                "labels",
                format!("{} labels for {} events", labels.len(), times.len()),
            ));
        }
        let mut s = Self::new(channel, times, duration_ps)?;
        s.labels = Some(labels);
        Ok(s)
    }

    pub fn empty(channel: u16, duration_ps: u64) -> Self {
        Self {
            channel,
            times: Vec::new(),
            duration_ps,
            labels: None,
        }
    }

    pub(crate) fn from_parts_unchecked(
        channel: u16,
        times: Vec<u64>,
        labels: Option<Vec<EventLabel>>,
        duration_ps: u64,
    ) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        debug_assert!(times.last().map_or(true, |&t| t <= duration_ps));
        debug_assert!(labels.as_ref().map_or(true, |l| l.len() == times.len()));
        Self {
            channel,
            times,
            duration_ps,
            labels,
        }
    }

    pub fn channel(&self) -> u16 {
        self.channel
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn labels(&self) -> Option<&[EventLabel]> {
        self.labels.as_deref()
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 * 1e-12
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Mean count rate over the stream duration, s⁻¹.
    pub fn rate_hz(&self) -> f64 {
        if self.duration_ps == 0 {
            0.0
        } else {
            self.len() as f64 / self.duration_s()
        }
    }

    /// Drops the ground-truth labels.
    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    pub(crate) fn into_parts(self) -> (u16, Vec<u64>, Option<Vec<EventLabel>>, u64) {
        (self.channel, self.times, self.labels, self.duration_ps)
    }
}

/// Checks timestamps are non-decreasing, reporting the first offending index.
pub fn check_sorted(times: &[u64]) -> Result<()> {
    match times.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(Error::Unsorted { index: i + 1 }),
        None => Ok(()),
    }
}
