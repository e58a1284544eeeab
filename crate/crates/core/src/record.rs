//! Records, identifiers and the canonical record wire format.
//!
//! A record is encoded as
//!
//! ```text
//! [key_len: u32 LE][key bytes][value_len: u32 LE][value bytes]
//! ```
//!
//! The layout is self-delimiting, so a file of concatenated records can be
//! decoded front to back without any framing.

use std::fmt;
use std::io::{Read, Write};

use crate::error::{DecodeError, Error, Result};

/// Processing element index, stable for the lifetime of a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PeId(pub u32);

impl PeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PE {}", self.0)
    }
}

/// Step 0 is input ingestion; step k >= 1 is the k-th MapReduce step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepId(pub u64);

impl StepId {
    pub const INGEST: StepId = StepId(0);

    pub fn next(self) -> StepId {
        StepId(self.0 + 1)
    }
}

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}", self.0)
    }
}

/// An opaque key/value pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Record {
    pub key: Vec<u8>,
    pub value: Vec<u8>,
}

impl Record {
    pub fn new(key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) -> Self {
        Record {
            key: key.into(),
            value: value.into(),
        }
    }

    /// Bytes accounted for this record in all volume metrics.
    pub fn size(&self) -> u64 {
        (self.key.len() + self.value.len()) as u64
    }

    pub fn encoded_len(&self) -> usize {
        8 + self.key.len() + self.value.len()
    }
}

/// Appends the canonical encoding of `record` to `out`.
pub fn encode_record_into(record: &Record, out: &mut Vec<u8>) -> Result<()> {
    for field in [&record.key, &record.value] {
        let len = u32::try_from(field.len()).map_err(|_| Error::Encode { len: field.len() })?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(field);
    }
    Ok(())
}

pub fn encode_record(record: &Record) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(record.encoded_len());
    encode_record_into(record, &mut out)?;
    Ok(out)
}

/// Decodes one record from the front of `bytes`, returning it together with
/// the number of bytes consumed. Trailing bytes are left untouched.
pub fn decode_record(bytes: &[u8]) -> Result<(Record, usize), DecodeError> {
    let mut pos = 0;
    let key = read_field(bytes, &mut pos)?;
    let value = read_field(bytes, &mut pos)?;
    Ok((Record { key, value }, pos))
}

fn read_field(bytes: &[u8], pos: &mut usize) -> Result<Vec<u8>, DecodeError> {
    let start = *pos;
    let prefix = bytes.get(start..start + 4).ok_or(DecodeError {
        offset: start,
        reason: "truncated length prefix",
    })?;
    let len = u32::from_le_bytes(prefix.try_into().expect("4 bytes")) as usize;
    let body_start = start + 4;
    let body = body_start
        .checked_add(len)
        .and_then(|end| bytes.get(body_start..end))
        .ok_or(DecodeError {
            offset: body_start,
            reason: "truncated field body",
        })?;
    *pos = body_start + len;
    Ok(body.to_vec())
}

/// Decodes a concatenation of records. Offsets in errors are relative to the
/// start of `bytes`.
pub fn decode_records(bytes: &[u8]) -> Result<Vec<Record>, DecodeError> {
    let mut records = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let (record, used) = decode_record(&bytes[pos..]).map_err(|e| DecodeError {
            offset: e.offset + pos,
            reason: e.reason,
        })?;
        records.push(record);
        pos += used;
    }
    Ok(records)
}

pub fn encode_records(records: &[Record]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(records.iter().map(Record::encoded_len).sum());
    for r in records {
        encode_record_into(r, &mut out)?;
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut w: W, records: &[Record]) -> Result<()> {
    w.write_all(&encode_records(records)?)?;
    Ok(())
}

pub fn read_records<R: Read>(mut r: R) -> Result<Vec<Record>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(Error::Io)?;
    Ok(decode_records(&buf)?)
}

/// Canonical ordering for comparing record multisets: by key, then value.
pub fn sort_records(records: &mut [Record]) {
    records.sort_unstable();
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Shuffle,
    /// Share `share` of `of` of the self-message that `origin` sent to `dest`
    /// at this step. `msg` indexes the message within the origin's log.
    BackupShare {
        origin: PeId,
        dest: PeId,
        msg: u32,
        share: u32,
        of: u32,
    },
}

/// Unit of communication between PEs within one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub src: PeId,
    pub dst: PeId,
    pub step: StepId,
    pub kind: MessageKind,
    pub payload: Vec<Record>,
}

impl Message {
    pub fn shuffle(src: PeId, dst: PeId, step: StepId, payload: Vec<Record>) -> Self {
        Message {
            src,
            dst,
            step,
            kind: MessageKind::Shuffle,
            payload,
        }
    }

    pub fn bytes(&self) -> u64 {
        self.payload.iter().map(Record::size).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_record_is_eight_zero_bytes() {
        let bytes = encode_record(&Record::default()).unwrap();
        assert_eq!(bytes, vec![0u8; 8]);
        assert_eq!(decode_record(&bytes).unwrap(), (Record::default(), 8));
    }

    #[test]
    fn single_byte_key_layout() {
        let bytes = encode_record(&Record::new("a", "")).unwrap();
        assert_eq!(bytes, vec![1, 0, 0, 0, 0x61, 0, 0, 0, 0]);
    }

    #[test]
    fn concatenation_decodes_in_order() {
        let a = Record::new("k1", "v1");
        let b = Record::new("", "value two");
        let bytes = encode_records(&[a.clone(), b.clone()]).unwrap();
        let (first, used) = decode_record(&bytes).unwrap();
        assert_eq!(first, a);
        let (second, used2) = decode_record(&bytes[used..]).unwrap();
        assert_eq!(second, b);
        assert_eq!(used + used2, bytes.len());
        assert_eq!(decode_records(&bytes).unwrap(), vec![a, b]);
    }

    #[test]
    fn seven_bytes_fail_at_offset_four() {
        let err = decode_record(&[0u8; 7]).unwrap_err();
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn truncated_body_reports_body_offset() {
        let err = decode_record(&[3, 0, 0, 0, b'a']).unwrap_err();
        assert_eq!(err.offset, 4);
        let mut bytes = encode_record(&Record::new("x", "y")).unwrap();
        bytes.extend_from_slice(&[9, 0, 0, 0]);
        let err = decode_records(&bytes).unwrap_err();
        assert_eq!(err.offset, bytes.len());
    }

    #[test]
    fn huge_length_prefix_does_not_overflow() {
        let err = decode_record(&[0xff, 0xff, 0xff, 0xff]).unwrap_err();
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn seeded_round_trip_thousand_records() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let klen = rng.gen_range(0..40);
            let vlen = rng.gen_range(0..40);
            let r = Record::new(
                (0..klen).map(|_| rng.gen()).collect::<Vec<u8>>(),
                (0..vlen).map(|_| rng.gen()).collect::<Vec<u8>>(),
            );
            let bytes = encode_record(&r).unwrap();
            assert_eq!(bytes.len(), r.encoded_len());
            assert_eq!(decode_record(&bytes).unwrap(), (r, bytes.len()));
        }
    }

    proptest! {
        #[test]
        fn stream_round_trip(records in prop::collection::vec(
            (prop::collection::vec(any::<u8>(), 0..24), prop::collection::vec(any::<u8>(), 0..24)), 0..16)
        ) {
            let records: Vec<Record> = records.into_iter().map(|(k, v)| Record::new(k, v)).collect();
            let bytes = encode_records(&records).unwrap();
            prop_assert_eq!(decode_records(&bytes).unwrap(), records);
        }
    }
}
