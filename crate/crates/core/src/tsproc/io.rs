//! Timestamp file formats.
//!
//! Binary layout, all integers little-endian:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `PLNK`                  |
//! | 4      | 2    | format version (1)            |
//! | 6      | 2    | channel id                    |
//! | 8      | 8    | record count                  |
//! | 16     | 8·n  | timestamps (ps), non-decreasing |
//!
//! The stream duration is not stored; a stream read back ends at its last
//! timestamp.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::histogram::CorrelationHistogram;
use crate::simkit::EventStream;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PLNK";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 16;

/// Writes the binary format to any sink.
pub fn write_stream_to(stream: &EventStream, mut w: impl Write) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&stream.channel().to_le_bytes())?;
    w.write_all(&(stream.len() as u64).to_le_bytes())?;
    for t in stream.times() {
        w.write_all(&t.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_stream(stream: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_stream_to(stream, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Parses the binary format from memory. `path` is only used in errors.
pub fn parse_stream(bytes: &[u8], path: &Path) -> Result<EventStream> {
    let path = || path.to_path_buf();
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic { path: path() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path(),
            expected: 0,
            found: 0,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path(),
            version,
        });
    }
    let channel = u16::from_le_bytes([bytes[6], bytes[7]]);
    let expected = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    let found = (body.len() / 8) as u64;
    if found < expected {
        return Err(Error::Truncated {
            path: path(),
            expected,
            found,
        });
    }
    let used = expected as usize * 8;
    if body.len() > used {
        return Err(Error::TrailingData {
            path: path(),
            extra: body.len() - used,
        });
    }
    let mut times = Vec::with_capacity(expected as usize);
    for (i, chunk) in body.chunks_exact(8).enumerate() {
        let t = u64::from_le_bytes(chunk.try_into().unwrap());
        if times.last().is_some_and(|&prev| t < prev) {
            return Err(Error::NonMonotone {
                path: path(),
                record: i as u64,
            });
        }
        times.push(t);
    }
    let end = times.last().copied().unwrap_or(0);
    EventStream::new(channel, times, end)
}

pub fn read_stream(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    parse_stream(&bytes, path)
}

/// Text alternative: a `# channel=<id>` header, then one timestamp per line.
pub fn write_stream_csv(stream: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# channel={}", stream.channel())?;
    for t in stream.times() {
        writeln!(w, "{t}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stream_csv(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let channel = header
        .trim()
        .strip_prefix("# channel=")
        .ok_or_else(|| parse_err(1, "expected header '# channel=<id>'".into()))?
        .parse::<u16>()
        .map_err(|e| parse_err(1, format!("bad channel id: {e}")))?;
    let mut times = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let t = text
            .parse::<u64>()
            .map_err(|e| parse_err(i + 2, format!("bad timestamp '{text}': {e}")))?;
        if times.last().is_some_and(|&prev| t < prev) {
            return Err(Error::NonMonotone {
                path: path.to_path_buf(),
                record: times.len() as u64,
            });
        }
        times.push(t);
    }
    let end = times.last().copied().unwrap_or(0);
    EventStream::new(channel, times, end)
}

/// `bin_center_ps,count` rows with a header line.
pub fn write_histogram_csv_to(h: &CorrelationHistogram, mut w: impl Write) -> Result<()> {
    writeln!(w, "bin_center_ps,count")?;
    for (k, c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{c}", h.bin_center_ps(k))?;
    }
    Ok(())
}

pub fn write_histogram_csv(h: &CorrelationHistogram, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_histogram_csv_to(h, &mut w)?;
    w.flush()?;
    Ok(())
}
