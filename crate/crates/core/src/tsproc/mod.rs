//! Timestamp stream I/O, coincidence counting, correlation histograms and
//! delay recovery.
//!
//! All analyses borrow immutable streams and can run concurrently.

mod coincidence;
mod histogram;
pub mod io;
mod offset;

pub use coincidence::{
    count_coincidences, displaced_window_rate, find_coincidences, find_coincidences_with_matches,
    symmetric_displaced_window_rate, CoincidenceResult,
};
pub use histogram::{correlation_histogram, histogram_slices, CorrelationHistogram, GaussianFit};
pub use io::{read_stream, read_stream_csv, write_histogram_csv, write_stream, write_stream_csv};
pub use offset::{find_offset, OffsetEstimate, SIGNIFICANCE_THRESHOLD};
