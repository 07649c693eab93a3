//! TTAG v1 binary format, little-endian.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TTAG" (54 54 41 47)
//! 4       2     version = 1
//! 6       2     channel_count
//! 8       8     resolution_ps = 1
//! 16      16·n  records: u64 timestamp_ps, u8 channel, 7 zero bytes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::TimeTagRecord;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"TTAG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 16;
const RESOLUTION_PS: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TtagHeader {
    pub channel_count: u16,
}

impl TtagHeader {
    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&VERSION.to_le_bytes());
        b[6..8].copy_from_slice(&self.channel_count.to_le_bytes());
        b[8..16].copy_from_slice(&RESOLUTION_PS.to_le_bytes());
        b
    }

    fn parse(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN {
            return Err(Error::format(b.len() as u64, "truncated header"));
        }
        if b[0..4] != MAGIC {
            return Err(Error::format(0, "bad magic"));
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let channel_count = u16::from_le_bytes([b[6], b[7]]);
        let resolution = u64::from_le_bytes(b[8..16].try_into().unwrap());
        if resolution != RESOLUTION_PS {
            return Err(Error::format(8, format!("unsupported resolution {resolution} ps")));
        }
        Ok(TtagHeader { channel_count })
    }
}

fn record_bytes(r: &TimeTagRecord) -> [u8; RECORD_LEN] {
    let mut b = [0u8; RECORD_LEN];
    b[0..8].copy_from_slice(&r.timestamp.to_le_bytes());
    b[8] = r.channel;
    b
}

/// Streaming writer; rejects records that would produce an invalid file.
pub struct TtagWriter<W: Write> {
    inner: W,
    channel_count: u16,
    last: u64,
    written: u64,
}

impl<W: Write> TtagWriter<W> {
    pub fn new(mut inner: W, channel_count: u16) -> Result<Self> {
        inner.write_all(&TtagHeader { channel_count }.to_bytes())?;
        Ok(TtagWriter {
            inner,
            channel_count,
            last: 0,
            written: 0,
        })
    }

    pub fn write(&mut self, r: &TimeTagRecord) -> Result<()> {
        if u16::from(r.channel) >= self.channel_count {
            return Err(Error::Stream(format!(
                "record {}: channel {} outside 0..{}",
                self.written, r.channel, self.channel_count
            )));
        }
        if r.timestamp < self.last {
            return Err(Error::Stream(format!(
                "record {}: timestamp {} before {}",
                self.written, r.timestamp, self.last
            )));
        }
        self.inner.write_all(&record_bytes(r))?;
        self.last = r.timestamp;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streaming reader yielding validated records.
pub struct TtagReader<R: Read> {
    inner: R,
    header: TtagHeader,
    offset: u64,
    last: u64,
    done: bool,
}

impl<R: Read> TtagReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut b = [0u8; HEADER_LEN];
        let n = read_full(&mut inner, &mut b)?;
        let header = TtagHeader::parse(&b[..n])?;
        Ok(TtagReader {
            inner,
            header,
            offset: HEADER_LEN as u64,
            last: 0,
            done: false,
        })
    }

    pub fn header(&self) -> TtagHeader {
        self.header
    }

    fn next_record(&mut self) -> Result<Option<TimeTagRecord>> {
        let mut b = [0u8; RECORD_LEN];
        let n = read_full(&mut self.inner, &mut b)?;
        if n == 0 {
            return Ok(None);
        }
        let at = self.offset;
        if n < RECORD_LEN {
            return Err(Error::format(at, format!("truncated record ({n} of {RECORD_LEN} bytes)")));
        }
        let timestamp = u64::from_le_bytes(b[0..8].try_into().unwrap());
        let channel = b[8];
        if b[9..].iter().any(|&x| x != 0) {
            return Err(Error::format(at + 9, "nonzero padding"));
        }
        if u16::from(channel) >= self.header.channel_count {
            return Err(Error::format(
                at + 8,
                format!("channel {channel} outside 0..{}", self.header.channel_count),
            ));
        }
        if timestamp < self.last {
            return Err(Error::format(
                at,
                format!("timestamp {timestamp} decreases from {}", self.last),
            ));
        }
        self.last = timestamp;
        self.offset += RECORD_LEN as u64;
        Ok(Some(TimeTagRecord { timestamp, channel }))
    }
}

impl<R: Read> Iterator for TtagReader<R> {
    type Item = Result<TimeTagRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let r = self.next_record().transpose();
        if !matches!(r, Some(Ok(_))) {
            self.done = true;
        }
        r
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(n)
}

pub fn encode(stream: &[TimeTagRecord], channel_count: u16) -> Result<Vec<u8>> {
    let mut w = TtagWriter::new(Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.len()), channel_count)?;
    for r in stream {
        w.write(r)?;
    }
    w.finish()
}

pub fn decode(bytes: &[u8]) -> Result<(TtagHeader, Vec<TimeTagRecord>)> {
    let reader = TtagReader::new(bytes)?;
    let header = reader.header();
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, records))
}

pub fn write_ttag(stream: &[TimeTagRecord], channel_count: u16, path: impl AsRef<Path>) -> Result<()> {
    let mut w = TtagWriter::new(BufWriter::new(File::create(path)?), channel_count)?;
    for r in stream {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

pub fn read_ttag(path: impl AsRef<Path>) -> Result<(TtagHeader, Vec<TimeTagRecord>)> {
    let reader = TtagReader::new(BufReader::new(File::open(path)?))?;
    let header = reader.header();
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64, c: u8) -> TimeTagRecord {
        TimeTagRecord::new(t, c)
    }

    fn offset_of(e: Error) -> u64 {
        match e {
            Error::Format { offset, .. } => offset,
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn empty_stream_is_header_only() {
        let b = encode(&[], 4).unwrap();
        assert_eq!(b.len(), 16);
        assert_eq!(b, [0x54, 0x54, 0x41, 0x47, 1, 0, 4, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn three_records_hex_layout() {
        let b = encode(&[rec(0, 0), rec(1000, 2), rec(0x0102_0304_0506_0708, 3)], 4).unwrap();
        assert_eq!(b.len(), 64);
        let hex: String = b.iter().map(|x| format!("{x:02x}")).collect();
        let expected = concat!(
            "54544147", "0100", "0400", "0100000000000000",
            "0000000000000000", "00", "00000000000000",
            "e803000000000000", "02", "00000000000000",
            "0807060504030201", "03", "00000000000000",
        );
        assert_eq!(hex, expected);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let stream = vec![rec(5, 1), rec(5, 0), rec(9, 3), rec(u64::MAX, 2)];
        let b = encode(&stream, 4).unwrap();
        let (h, back) = decode(&b).unwrap();
        assert_eq!(h.channel_count, 4);
        assert_eq!(back, stream);
        assert_eq!(encode(&back, 4).unwrap(), b);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ttag");
        let stream = vec![rec(1, 0), rec(2, 1)];
        write_ttag(&stream, 2, &p).unwrap();
        assert_eq!(read_ttag(&p).unwrap().1, stream);
    }

    #[test]
    fn reader_errors_carry_offsets() {
        let good = encode(&[rec(10, 0), rec(20, 1)], 2).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(offset_of(decode(&bad).unwrap_err()), 0);

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(offset_of(decode(&bad).unwrap_err()), 4);

        let mut bad = good.clone();
        bad[32..40].copy_from_slice(&5u64.to_le_bytes());
        assert_eq!(offset_of(decode(&bad).unwrap_err()), 32);

        assert_eq!(offset_of(decode(&good[..40]).unwrap_err()), 32);
        assert_eq!(offset_of(decode(&good[..10]).unwrap_err()), 10);

        let mut bad = good.clone();
        bad[16 + 8] = 7;
        assert_eq!(offset_of(decode(&bad).unwrap_err()), 24);

        let mut bad = good;
        bad[16 + 12] = 1;
        assert_eq!(offset_of(decode(&bad).unwrap_err()), 25);
    }

    #[test]
    fn writer_rejects_invalid_streams() {
        assert!(encode(&[rec(2, 0), rec(1, 0)], 1).is_err());
        assert!(encode(&[rec(2, 3)], 2).is_err());
    }
}
