//! Timestamp files.
//!
//! Binary layout (little endian): a 16-byte header `"CTTS"`, `version: u16`,
//! `flags: u16`, `count: u64`, then `count` records of `channel: u8`,
//! `timestamp_ps: u64` and, when flag bit 0 is set, `origin: u8`.
//! The CSV alternative has the header `channel,timestamp_ps` with an optional
//! `origin` column.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EventOrigin, PhotonEvent, TimestampStream};
use crate::error::{Error, Result};
use crate::tomography::csv_error;

const MAGIC: &[u8; 4] = b"CTTS";
const VERSION: u16 = 1;
const FLAG_TRUTH: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamFormat {
    Binary,
    Csv,
}

impl StreamFormat {
    /// CSV for a `.csv` extension, binary otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => StreamFormat::Csv,
            _ => StreamFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportReport {
    /// Events sorted by time; `duration` is one past the last timestamp and
    /// no config snapshot is attached.
    pub stream: TimestampStream,
    /// Normalizations applied while reading.
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    channel: u8,
    timestamp_ps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<EventOrigin>,
}

/// Writes `stream` in the format implied by the extension of `path`. Truth
/// tags are kept only when `truth` is set.
pub fn export_stream(stream: &TimestampStream, path: &Path, truth: bool) -> Result<()> {
    match StreamFormat::from_path(path) {
        StreamFormat::Binary => write_binary(stream, path, truth),
        StreamFormat::Csv => write_csv(stream, path, truth),
    }
}

pub fn import_stream(path: &Path) -> Result<ImportReport> {
    let events = match StreamFormat::from_path(path) {
        StreamFormat::Binary => read_binary(path)?,
        StreamFormat::Csv => read_csv(path)?,
    };
    let mut warnings = Vec::new();
    let mut last: Vec<Option<(usize, u64)>> = vec![None; 256];
    for (i, e) in events.iter().enumerate() {
        let slot = &mut last[e.channel as usize];
        if let Some((_, prev)) = *slot {
            if e.timestamp < prev {
                warnings.push(format!(
                    "record {}: timestamp {} on channel {} precedes {}; events re-sorted",
                    i + 1,
                    e.timestamp,
                    e.channel,
                    prev
                ));
            }
        }
        *slot = Some((i, e.timestamp));
    }
    for w in &warnings {
        log::warn!("{}: {w}", path.display());
    }
    let duration = events.iter().map(|e| e.timestamp + 1).max().unwrap_or(0);
    Ok(ImportReport {
        stream: TimestampStream::new(events, duration, None)?,
        warnings,
    })
}

fn write_binary(stream: &TimestampStream, path: &Path, truth: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let flags = if truth { FLAG_TRUTH } else { 0 };
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&flags.to_le_bytes()).map_err(io)?;
    w.write_all(&(stream.events.len() as u64).to_le_bytes()).map_err(io)?;
    for e in &stream.events {
        w.write_all(&[e.channel]).map_err(io)?;
        w.write_all(&e.timestamp.to_le_bytes()).map_err(io)?;
        if truth {
            w.write_all(&[e.origin.map_or(0, EventOrigin::code)]).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn read_binary(path: &Path) -> Result<Vec<PhotonEvent>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let parse = |index: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        index,
        message,
    };
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| parse(0, "file shorter than the 16-byte header".into()))?;
    if &header[0..4] != MAGIC {
        return Err(parse(0, "missing CTTS magic".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(parse(0, format!("unsupported version {version}")));
    }
    let flags = u16::from_le_bytes([header[6], header[7]]);
    if flags & !FLAG_TRUTH != 0 {
        return Err(parse(0, format!("unknown flags {flags:#06x}")));
    }
    let truth = flags & FLAG_TRUTH != 0;
    let count = u64::from_le_bytes(header[8..16].try_into().expect("8-byte slice"));
    let record_len = if truth { 10 } else { 9 };
    let mut buf = [0u8; 10];
    let mut events = Vec::new();
    for i in 0..count as usize {
        r.read_exact(&mut buf[..record_len])
            .map_err(|_| parse(i + 1, format!("truncated record; header declares {count}")))?;
        let origin = if truth {
            EventOrigin::from_code(buf[9]).ok_or_else(|| parse(i + 1, format!("bad origin code {}", buf[9])))?
        } else {
            None
        };
        events.push(PhotonEvent {
            channel: buf[0],
            timestamp: u64::from_le_bytes(buf[1..9].try_into().expect("8-byte slice")),
            origin,
        });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if !rest.is_empty() {
        return Err(parse(
            count as usize + 1,
            format!("{} trailing bytes after the declared records", rest.len()),
        ));
    }
    Ok(events)
}

fn write_csv(stream: &TimestampStream, path: &Path, truth: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    if stream.events.is_empty() {
        let header: &[&str] = if truth {
            &["channel", "timestamp_ps", "origin"]
        } else {
            &["channel", "timestamp_ps"]
        };
        w.write_record(header).map_err(|e| csv_error(path, 0, e))?;
    }
    for (i, e) in stream.events.iter().enumerate() {
        let row = CsvRow {
            channel: e.channel,
            timestamp_ps: e.timestamp,
            origin: if truth { e.origin } else { None },
        };
        if truth && row.origin.is_none() {
            return Err(Error::validation(format!("event {i} has no truth tag to export")));
        }
        w.serialize(row).map_err(|err| csv_error(path, i + 1, err))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv(path: &Path) -> Result<Vec<PhotonEvent>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e))?;
    reader
        .deserialize::<CsvRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| csv_error(path, i + 1, e))?;
            Ok(PhotonEvent {
                channel: row.channel,
                timestamp: row.timestamp_ps,
                origin: row.origin,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{projector_for, PolarizationBasis};
    use crate::sim::{simulate_projection_run, EmitterConfig};

    fn sample() -> TimestampStream {
        let cfg = EmitterConfig {
            background_rate: 1e6,
            ..EmitterConfig::lossless()
        };
        let pair = (projector_for(PolarizationBasis::D), projector_for(PolarizationBasis::H));
        let (mut a, b) = simulate_projection_run(&cfg, pair, 500, 1).unwrap();
        a.events.extend(b.events);
        TimestampStream::new(a.events, a.duration, None).unwrap()
    }

    #[test]
    fn round_trips_in_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let stream = sample();
        for name in ["s.ctts", "s.csv"] {
            let path = dir.path().join(name);
            export_stream(&stream, &path, true).unwrap();
            let back = import_stream(&path).unwrap();
            assert!(back.warnings.is_empty());
            assert_eq!(back.stream.events, stream.events);

            export_stream(&stream, &path, false).unwrap();
            let stripped = import_stream(&path).unwrap().stream;
            assert!(stripped.events.iter().all(|e| e.origin.is_none()));
            let mut expected = stream.clone();
            expected.strip_truth();
            assert_eq!(stripped.events, expected.events);
        }
    }

    #[test]
    fn binary_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let stream = sample();
        export_stream(&stream, &path, false).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"CTTS");
        assert_eq!(bytes.len(), 16 + 9 * stream.len());
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), stream.len() as u64);
        let e = stream.events[0];
        assert_eq!(bytes[16], e.channel);
        assert_eq!(u64::from_le_bytes(bytes[17..25].try_into().unwrap()), e.timestamp);
    }

    #[test]
    fn empty_stream_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let empty = TimestampStream::new(vec![], 0, None).unwrap();
        for name in ["e.ctts", "e.csv"] {
            let path = dir.path().join(name);
            export_stream(&empty, &path, false).unwrap();
            let back = import_stream(&path).unwrap().stream;
            assert!(back.is_empty());
            assert_eq!(back.duration, 0);
        }
        assert_eq!(std::fs::read(dir.path().join("e.ctts")).unwrap().len(), 16);
    }

    #[test]
    fn decreasing_timestamps_are_sorted_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "channel,timestamp_ps\n0,500\n1,100\n0,200\n0,900\n").unwrap();
        let report = import_stream(&path).unwrap();
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].starts_with("record 3"));
        assert_eq!(report.stream.all_timestamps(), vec![100, 200, 500, 900]);
        assert_eq!(report.stream.timestamps(0), vec![200, 500, 900]);
        assert_eq!(report.stream.duration, 901);
    }

    #[test]
    fn malformed_files_name_the_record() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("bad.csv");
        std::fs::write(&csv_path, "channel,timestamp_ps\n0,5\n0,-7\n").unwrap();
        match import_stream(&csv_path) {
            Err(Error::Parse { index, .. }) => assert_eq!(index, 2),
            other => panic!("{other:?}"),
        }

        let bin = dir.path().join("bad.ctts");
        export_stream(&sample(), &bin, false).unwrap();
        let mut bytes = std::fs::read(&bin).unwrap();
        bytes.truncate(16 + 9 * 3 + 4);
        std::fs::write(&bin, &bytes).unwrap();
        match import_stream(&bin) {
            Err(Error::Parse { index, .. }) => assert_eq!(index, 4),
            other => panic!("{other:?}"),
        }
        bytes[0] = b'X';
        std::fs::write(&bin, &bytes).unwrap();
        assert!(matches!(import_stream(&bin), Err(Error::Parse { index: 0, .. })));
    }

    #[test]
    fn export_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("1.ctts"), dir.path().join("2.ctts"));
        export_stream(&sample(), &p1, false).unwrap();
        export_stream(&sample(), &p2, false).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }
}
