//! Stream file IO: the two on-disk forms a sample stream can take.
//!
//! **CSV**: a header line of comma-separated signal names, then one row of
//! comma-separated values per sample. A line starting with `#boundary` marks
//! a stream boundary (no window may span it); any other line starting with
//! `#` is a comment. Rows that fail to parse are surfaced as
//! [`StreamEvent::Malformed`] so the host can count them rather than
//! silently skip.
//!
//! **Binary**: magic `SNS1`, then a u32 signal count, then each signal name
//! as a u16 length prefix plus UTF-8 bytes, then length-prefixed frames: a
//! u32 value count followed by that many 32-bit little-endian floats. A
//! count of zero is a boundary marker; any other count must equal the signal
//! count. Binary streams are assumed machine-written, so a width mismatch or
//! truncation is a hard error, not a malformed-row event.
//!
//! [`open_stream`] sniffs the magic and picks the right reader.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

/// Binary stream magic.
pub const STREAM_MAGIC: [u8; 4] = *b"SNS1";

/// One item pulled from a stream file.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamEvent {
    /// A sample row, one value per schema signal. Values are *not*
    /// validated here; the engine rejects non-finite or mis-sized rows and
    /// counts them.
    Sample(Vec<f64>),
    /// A stream boundary: history must not carry across it.
    Boundary,
    /// A row that could not be parsed at all (1-based line number).
    Malformed { line: u64 },
}

/// Why a stream failed to open or read.
#[derive(Debug, Error)]
pub enum StreamError {
    /// Underlying IO failure.
    #[error("io: {0}")]
    Io(#[from] io::Error),
    /// The file has no header line.
    #[error("stream has no header line")]
    MissingHeader,
    /// The header declares no signals.
    #[error("stream header declares no signals")]
    EmptySchema,
    /// A signal name is not valid UTF-8 (binary form only).
    #[error("signal name is not valid UTF-8")]
    BadName,
    /// A binary frame declares a width other than the schema's.
    #[error("binary frame has {got} values, schema has {expected} signals")]
    FrameWidth { expected: usize, got: usize },
    /// The binary file ended mid-frame.
    #[error("binary stream truncated mid-frame")]
    Truncated,
}

/// A stream file opened for reading, either form.
pub struct StreamReader {
    schema: Vec<String>,
    inner: ReaderKind,
}

enum ReaderKind {
    Csv {
        lines: io::Lines<BufReader<File>>,
        line_no: u64,
    },
    Binary {
        r: BufReader<File>,
        width: usize,
    },
}

/// Opens a stream file, sniffing CSV vs binary by the leading magic.
pub fn open_stream(path: &Path) -> Result<StreamReader, StreamError> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 4];
    let n = file.read(&mut magic)?;
    if n == 4 && magic == STREAM_MAGIC {
        let mut r = BufReader::new(file);
        let width = read_u32(&mut r)? as usize;
        if width == 0 {
            return Err(StreamError::EmptySchema);
        }
        let mut schema = Vec::with_capacity(width);
        for _ in 0..width {
            let len = read_u16(&mut r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(eof_as_truncated)?;
            schema.push(String::from_utf8(buf).map_err(|_| StreamError::BadName)?);
        }
        return Ok(StreamReader {
            schema,
            inner: ReaderKind::Binary { r, width },
        });
    }

    // Not binary: reopen as text and take the header line.
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(StreamError::MissingHeader),
    };
    let schema: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if schema.is_empty() || schema.iter().any(|s| s.is_empty()) {
        return Err(StreamError::EmptySchema);
    }
    Ok(StreamReader {
        schema,
        inner: ReaderKind::Csv { lines, line_no: 1 },
    })
}

impl StreamReader {
    /// Signal names, in column order.
    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    /// Pulls the next event; `None` at a clean end of stream.
    pub fn next_event(&mut self) -> Result<Option<StreamEvent>, StreamError> {
        match &mut self.inner {
            ReaderKind::Csv { lines, line_no } => loop {
                let line = match lines.next() {
                    Some(line) => line?,
                    None => return Ok(None),
                };
                *line_no += 1;
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                if let Some(rest) = trimmed.strip_prefix('#') {
                    if rest.trim_start().starts_with("boundary") {
                        return Ok(Some(StreamEvent::Boundary));
                    }
                    continue; // comment
                }
                let mut row = Vec::with_capacity(self.schema.len());
                let mut ok = true;
                for field in trimmed.split(',') {
                    match field.trim().parse::<f64>() {
                        Ok(v) => row.push(v),
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    return Ok(Some(StreamEvent::Malformed { line: *line_no }));
                }
                return Ok(Some(StreamEvent::Sample(row)));
            },
            ReaderKind::Binary { r, width } => {
                let mut count_buf = [0u8; 4];
                match r.read_exact(&mut count_buf) {
                    Ok(()) => {}
                    Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
                    Err(e) => return Err(e.into()),
                }
                let count = u32::from_le_bytes(count_buf) as usize;
                if count == 0 {
                    return Ok(Some(StreamEvent::Boundary));
                }
                if count != *width {
                    return Err(StreamError::FrameWidth {
                        expected: *width,
                        got: count,
                    });
                }
                let mut payload = vec![0u8; count * 4];
                r.read_exact(&mut payload).map_err(eof_as_truncated)?;
                let row = payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("chunk is 4 bytes")) as f64)
                    .collect();
                Ok(Some(StreamEvent::Sample(row)))
            }
        }
    }
}

fn eof_as_truncated(e: io::Error) -> StreamError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        StreamError::Truncated
    } else {
        StreamError::Io(e)
    }
}

fn read_u16(r: &mut impl Read) -> Result<u16, StreamError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b).map_err(eof_as_truncated)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32, StreamError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(eof_as_truncated)?;
    Ok(u32::from_le_bytes(b))
}

/// Writes a CSV stream. Values use Rust's shortest round-trip formatting,
/// so writing is deterministic and lossless for `f64`.
pub struct CsvStreamWriter {
    w: BufWriter<File>,
}

impl CsvStreamWriter {
    /// Creates the file and writes the header.
    pub fn create(path: &Path, schema: &[String]) -> Result<CsvStreamWriter, StreamError> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", schema.join(","))?;
        Ok(CsvStreamWriter { w })
    }

    /// Appends one sample row.
    pub fn write_sample(&mut self, row: &[f64]) -> Result<(), StreamError> {
        let mut line = String::new();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(self.w, "{line}")?;
        Ok(())
    }

    /// Appends a boundary marker.
    pub fn write_boundary(&mut self) -> Result<(), StreamError> {
        writeln!(self.w, "#boundary")?;
        Ok(())
    }

    /// Flushes and closes the file.
    pub fn finish(mut self) -> Result<(), StreamError> {
        self.w.flush()?;
        Ok(())
    }
}

/// Writes a binary stream. Values are stored as 32-bit floats.
pub struct BinaryStreamWriter {
    w: BufWriter<File>,
    width: usize,
}

impl BinaryStreamWriter {
    /// Creates the file and writes the magic and schema.
    pub fn create(path: &Path, schema: &[String]) -> Result<BinaryStreamWriter, StreamError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&STREAM_MAGIC)?;
        w.write_all(&(schema.len() as u32).to_le_bytes())?;
        for name in schema {
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
        Ok(BinaryStreamWriter {
            w,
            width: schema.len(),
        })
    }

    /// Appends one sample frame.
    pub fn write_sample(&mut self, row: &[f64]) -> Result<(), StreamError> {
        if row.len() != self.width {
            return Err(StreamError::FrameWidth {
                expected: self.width,
                got: row.len(),
            });
        }
        self.w.write_all(&(row.len() as u32).to_le_bytes())?;
        for &v in row {
            self.w.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    /// Appends a boundary marker (an empty frame).
    pub fn write_boundary(&mut self) -> Result<(), StreamError> {
        self.w.write_all(&0u32.to_le_bytes())?;
        Ok(())
    }

    /// Flushes and closes the file.
    pub fn finish(mut self) -> Result<(), StreamError> {
        self.w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn csv_roundtrip_with_boundary_and_comment() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let schema = names(&["a", "b"]);
        let mut w = CsvStreamWriter::create(&path, &schema).unwrap();
        w.write_sample(&[1.0, 2.5]).unwrap();
        w.write_boundary().unwrap();
        w.write_sample(&[-0.125, 1e-9]).unwrap();
        w.finish().unwrap();

        let mut r = open_stream(&path).unwrap();
        assert_eq!(r.schema(), schema.as_slice());
        assert_eq!(
            r.next_event().unwrap(),
            Some(StreamEvent::Sample(vec![1.0, 2.5]))
        );
        assert_eq!(r.next_event().unwrap(), Some(StreamEvent::Boundary));
        assert_eq!(
            r.next_event().unwrap(),
            Some(StreamEvent::Sample(vec![-0.125, 1e-9]))
        );
        assert_eq!(r.next_event().unwrap(), None);
    }

    #[test]
    fn csv_malformed_rows_are_reported_with_line_numbers() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "a,b\n1,2\nx,3\n# note\n4,5\n").unwrap();
        let mut r = open_stream(&path).unwrap();
        assert_eq!(
            r.next_event().unwrap(),
            Some(StreamEvent::Sample(vec![1.0, 2.0]))
        );
        assert_eq!(
            r.next_event().unwrap(),
            Some(StreamEvent::Malformed { line: 3 })
        );
        assert_eq!(
            r.next_event().unwrap(),
            Some(StreamEvent::Sample(vec![4.0, 5.0]))
        );
        assert_eq!(r.next_event().unwrap(), None);
    }

    #[test]
    fn csv_preserves_f64_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let schema = names(&["x"]);
        let values = [0.1, 1.0 / 3.0, f64::MIN_POSITIVE, 12345.678901234567];
        let mut w = CsvStreamWriter::create(&path, &schema).unwrap();
        for &v in &values {
            w.write_sample(&[v]).unwrap();
        }
        w.finish().unwrap();
        let mut r = open_stream(&path).unwrap();
        for &v in &values {
            assert_eq!(r.next_event().unwrap(), Some(StreamEvent::Sample(vec![v])));
        }
    }

    #[test]
    fn binary_roundtrip_with_boundary() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let schema = names(&["left", "right", "up"]);
        let mut w = BinaryStreamWriter::create(&path, &schema).unwrap();
        w.write_sample(&[1.0, 2.0, 3.0]).unwrap();
        w.write_boundary().unwrap();
        w.write_sample(&[0.5, -0.5, 0.0]).unwrap();
        w.finish().unwrap();

        let mut r = open_stream(&path).unwrap();
        assert_eq!(r.schema(), schema.as_slice());
        assert_eq!(
            r.next_event().unwrap(),
            Some(StreamEvent::Sample(vec![1.0, 2.0, 3.0]))
        );
        assert_eq!(r.next_event().unwrap(), Some(StreamEvent::Boundary));
        assert_eq!(
            r.next_event().unwrap(),
            Some(StreamEvent::Sample(vec![0.5, -0.5, 0.0]))
        );
        assert_eq!(r.next_event().unwrap(), None);
    }

    #[test]
    fn binary_truncation_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let schema = names(&["a"]);
        let mut w = BinaryStreamWriter::create(&path, &schema).unwrap();
        w.write_sample(&[1.0]).unwrap();
        w.finish().unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.bin");
        std::fs::write(&cut, &bytes[..bytes.len() - 2]).unwrap();
        let mut r = open_stream(&cut).unwrap();
        assert!(matches!(
            r.next_event().unwrap_err(),
            StreamError::Truncated
        ));
    }

    #[test]
    fn binary_width_mismatch_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let schema = names(&["a", "b"]);
        let w = BinaryStreamWriter::create(&path, &schema).unwrap();
        w.finish().unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&5u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 20]);
        std::fs::write(&path, &bytes).unwrap();
        let mut r = open_stream(&path).unwrap();
        assert!(matches!(
            r.next_event().unwrap_err(),
            StreamError::FrameWidth { expected: 2, got: 5 }
        ));
    }

    #[test]
    fn missing_header_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        match open_stream(&path) {
            Err(StreamError::MissingHeader) => {}
            Err(other) => panic!("wrong error: {other}"),
            Ok(_) => panic!("empty file accepted"),
        }
    }
}
