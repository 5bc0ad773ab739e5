//! GPSQ container: a run-length-encoded binary format for parsing-frame
//! sequences, little-endian throughout, with a CRC32 integrity footer.
//!
//! Layout:
//! ```text
//! magic  "GPSQ"           4 bytes
//! version u8 (= 1)
//! K       u8 (class count)
//! H, W    u16 each
//! N       u32 (frame count)
//! per frame:
//!   run_count u32, then run_count x (label u8, length u32)
//! CRC32   u32 over all bytes after the magic, up to this footer
//! ```

use std::path::Path;

use thiserror::Error;

use crate::frame::{GaitParsingSequence, ParsingFrame};
use crate::NUM_CLASSES;

const MAGIC: &[u8; 4] = b"GPSQ";
const VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("bad magic: expected \"GPSQ\"")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported class count {0} (must be 1..={NUM_CLASSES})")]
    UnsupportedClassCount(u8),
    #[error("truncated stream: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("frame {index}: run lengths sum to {got}, expected {expected}")]
    RunSumMismatch { index: usize, expected: u64, got: u64 },
    #[error("frame {index}: zero-length run")]
    ZeroLengthRun { index: usize },
    #[error("frame {index}: label {label} out of range for K={k}")]
    LabelOutOfRange { index: usize, label: u8, k: u8 },
    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("{0} trailing bytes after CRC footer")]
    TrailingBytes(usize),
    #[error("stream declares empty {what}")]
    EmptyField { what: &'static str },
    #[error("frame {index} is {got_h}x{got_w}, sequence is {h}x{w}")]
    FrameDimensionMismatch {
        index: usize,
        h: usize,
        w: usize,
        got_h: usize,
        got_w: usize,
    },
    #[error("sequence does not fit format limits: {0}")]
    Overflow(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Serializes the frames of a sequence into a GPSQ byte stream. Identity
/// metadata travels in the dataset manifest, not in the container.
pub fn encode_gps(seq: &GaitParsingSequence) -> Result<Vec<u8>, CodecError> {
    let (h, w) = (seq.height(), seq.width());
    for (i, f) in seq.frames().iter().enumerate() {
        if f.height() != h || f.width() != w {
            return Err(CodecError::FrameDimensionMismatch {
                index: i,
                h,
                w,
                got_h: f.height(),
                got_w: f.width(),
            });
        }
    }
    if h > u16::MAX as usize || w > u16::MAX as usize {
        return Err(CodecError::Overflow(format!("frame size {h}x{w} exceeds u16")));
    }
    if seq.len() > u32::MAX as usize {
        return Err(CodecError::Overflow(format!("{} frames exceed u32", seq.len())));
    }

    let mut out = Vec::with_capacity(16 + seq.len() * 64);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(NUM_CLASSES as u8);
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.extend_from_slice(&(w as u16).to_le_bytes());
    out.extend_from_slice(&(seq.len() as u32).to_le_bytes());

    for frame in seq.frames() {
        let runs = rle_encode(frame.labels());
        out.extend_from_slice(&(runs.len() as u32).to_le_bytes());
        for (label, len) in runs {
            out.push(label);
            out.extend_from_slice(&len.to_le_bytes());
        }
    }

    let crc = crc32fast::hash(&out[MAGIC.len()..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parses a GPSQ byte stream back into frames. Exact inverse of
/// [`encode_gps`]; validates magic, version, run-length totals, and CRC.
pub fn decode_gps(bytes: &[u8]) -> Result<Vec<ParsingFrame>, CodecError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CodecError::BadMagic);
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let k = r.u8()?;
    if k == 0 || k as usize > NUM_CLASSES {
        return Err(CodecError::UnsupportedClassCount(k));
    }
    let h = r.u16()? as usize;
    let w = r.u16()? as usize;
    if h == 0 || w == 0 {
        return Err(CodecError::EmptyField { what: "frame dimensions" });
    }
    let n = r.u32()? as usize;
    if n == 0 {
        return Err(CodecError::EmptyField { what: "frame count" });
    }

    let plane = (h * w) as u64;
    let mut frames = Vec::with_capacity(n);
    for index in 0..n {
        let run_count = r.u32()? as usize;
        let mut labels = Vec::with_capacity(h * w);
        let mut total = 0u64;
        for _ in 0..run_count {
            let label = r.u8()?;
            let len = r.u32()? as u64;
            if label >= k {
                return Err(CodecError::LabelOutOfRange { index, label, k });
            }
            if len == 0 {
                return Err(CodecError::ZeroLengthRun { index });
            }
            total += len;
            if total > plane {
                return Err(CodecError::RunSumMismatch { index, expected: plane, got: total });
            }
            labels.extend(std::iter::repeat(label).take(len as usize));
        }
        if total != plane {
            return Err(CodecError::RunSumMismatch { index, expected: plane, got: total });
        }
        // Labels are already validated against K <= NUM_CLASSES.
        let frame = ParsingFrame::new(h, w, labels)
            .expect("validated run data must form a well-formed frame");
        frames.push(frame);
    }

    let payload_end = r.pos;
    let stored = r.u32()?;
    let computed = crc32fast::hash(&bytes[MAGIC.len()..payload_end]);
    if stored != computed {
        return Err(CodecError::CrcMismatch { stored, computed });
    }
    if r.pos != bytes.len() {
        return Err(CodecError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(frames)
}

/// Encodes and writes a sequence to `path`.
pub fn write_gpsq(path: &Path, seq: &GaitParsingSequence) -> Result<(), CodecError> {
    let bytes = encode_gps(seq)?;
    std::fs::write(path, bytes).map_err(|source| CodecError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads and decodes the frames stored at `path`.
pub fn read_gpsq(path: &Path) -> Result<Vec<ParsingFrame>, CodecError> {
    let bytes = std::fs::read(path).map_err(|source| CodecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_gps(&bytes)
}

fn rle_encode(labels: &[u8]) -> Vec<(u8, u32)> {
    let mut runs = Vec::new();
    let mut iter = labels.iter();
    let Some(&first) = iter.next() else {
        return runs;
    };
    let mut current = first;
    let mut len = 1u32;
    for &l in iter {
        if l == current && len < u32::MAX {
            len += 1;
        } else {
            runs.push((current, len));
            current = l;
            len = 1;
        }
    }
    runs.push((current, len));
    runs
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.bytes.len() {
            return Err(CodecError::Truncated {
                offset: self.pos,
                needed: self.pos + n - self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
