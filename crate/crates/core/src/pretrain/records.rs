//! Length-prefixed, checksummed record file.
//!
//! ```text
//! header:  "RBTW" | u16 version | u32 max_seq_length | u32 max_predictions
//! record:  u32 payload length | payload | u32 CRC-32 of payload
//! payload: u32 n | n x u32 token id | n x u8 segment id | u8 is_random_next
//!          | u32 m | m x u32 position | m x u32 label id
//! ```
//! Little-endian throughout.

use std::io::{self, Read, Write};

use serde::Serialize;

use super::{PretrainError, PretrainInstance};

pub const RECORD_MAGIC: &[u8; 4] = b"RBTW";
pub const RECORD_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RecordHeader {
    pub max_seq_length: u32,
    pub max_predictions_per_seq: u32,
}

impl RecordHeader {
    pub const SIZE: usize = 14;

    fn check(&self, inst: &PretrainInstance) -> Result<(), String> {
        inst.validate(self.max_seq_length as usize, self.max_predictions_per_seq as usize)
    }
}

pub struct RecordWriter<W: Write> {
    sink: W,
    header: RecordHeader,
    written: usize,
    buf: Vec<u8>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut sink: W, header: RecordHeader) -> Result<Self, PretrainError> {
        sink.write_all(RECORD_MAGIC)?;
        sink.write_all(&RECORD_VERSION.to_le_bytes())?;
        sink.write_all(&header.max_seq_length.to_le_bytes())?;
        sink.write_all(&header.max_predictions_per_seq.to_le_bytes())?;
        Ok(Self {
            sink,
            header,
            written: 0,
            buf: Vec::new(),
        })
    }

    pub fn write(&mut self, inst: &PretrainInstance) -> Result<(), PretrainError> {
        self.header.check(inst).map_err(PretrainError::InvalidInstance)?;
        let buf = &mut self.buf;
        buf.clear();
        buf.extend_from_slice(&(inst.token_ids.len() as u32).to_le_bytes());
        for id in &inst.token_ids {
            buf.extend_from_slice(&id.to_le_bytes());
        }
        buf.extend_from_slice(&inst.segment_ids);
        buf.push(inst.is_random_next as u8);
        buf.extend_from_slice(&(inst.masked_positions.len() as u32).to_le_bytes());
        for p in inst.masked_positions.iter().chain(&inst.masked_label_ids) {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        self.sink.write_all(&(buf.len() as u32).to_le_bytes())?;
        self.sink.write_all(buf)?;
        self.sink.write_all(&crc32fast::hash(buf).to_le_bytes())?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<W, PretrainError> {
        self.sink.flush()?;
        Ok(self.sink)
    }
}

fn corrupt(msg: impl Into<String>) -> PretrainError {
    PretrainError::CorruptRecord(msg.into())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), PretrainError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => corrupt(format!("truncated {what}")),
        _ => PretrainError::Io(e),
    })
}

struct Payload<'a> {
    bytes: &'a [u8],
}

impl Payload<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], PretrainError> {
        if self.bytes.len() < n {
            return Err(corrupt("payload shorter than its counts"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, PretrainError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<u32>, PretrainError> {
        Ok(self
            .take(n.checked_mul(4).ok_or_else(|| corrupt("count overflow"))?)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn decode(bytes: &[u8], header: &RecordHeader) -> Result<PretrainInstance, PretrainError> {
    let mut p = Payload { bytes };
    let n = p.u32()? as usize;
    if n > header.max_seq_length as usize {
        return Err(corrupt(format!("{n} tokens exceed header limit")));
    }
    let token_ids = p.u32s(n)?;
    let segment_ids = p.take(n)?.to_vec();
    let is_random_next = match p.take(1)?[0] {
        0 => false,
        1 => true,
        other => return Err(corrupt(format!("is_random_next byte {other}"))),
    };
    let m = p.u32()? as usize;
    if m > header.max_predictions_per_seq as usize {
        return Err(corrupt(format!("{m} predictions exceed header limit")));
    }
    let masked_positions = p.u32s(m)?;
    let masked_label_ids = p.u32s(m)?;
    if !p.bytes.is_empty() {
        return Err(corrupt("payload longer than its counts"));
    }
    let inst = PretrainInstance {
        token_ids,
        segment_ids,
        is_random_next,
        masked_positions,
        masked_label_ids,
    };
    header.check(&inst).map_err(corrupt)?;
    Ok(inst)
}

pub struct RecordReader<R: Read> {
    source: R,
    header: RecordHeader,
    failed: bool,
}

impl<R: Read> RecordReader<R> {
    pub fn new(mut source: R) -> Result<Self, PretrainError> {
        let mut head = [0u8; RecordHeader::SIZE];
        read_exact_or(&mut source, &mut head, "header")?;
        if &head[..4] != RECORD_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes([head[4], head[5]]);
        if version != RECORD_VERSION {
            return Err(PretrainError::VersionMismatch {
                found: version,
                expected: RECORD_VERSION,
            });
        }
        let header = RecordHeader {
            max_seq_length: u32::from_le_bytes(head[6..10].try_into().unwrap()),
            max_predictions_per_seq: u32::from_le_bytes(head[10..14].try_into().unwrap()),
        };
        Ok(Self {
            source,
            header,
            failed: false,
        })
    }

    pub fn header(&self) -> RecordHeader {
        self.header
    }

    fn next_record(&mut self) -> Result<Option<PretrainInstance>, PretrainError> {
        let mut len = [0u8; 4];
        let mut got = 0;
        while got < 4 {
            match self.source.read(&mut len[got..]) {
                Ok(0) if got == 0 => return Ok(None),
                Ok(0) => return Err(corrupt("truncated length prefix")),
                Ok(k) => got += k,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let len = u32::from_le_bytes(len) as u64;
        let max = 4 + 5 * self.header.max_seq_length as u64 + 1 + 4 + 8 * self.header.max_predictions_per_seq as u64;
        if len > max {
            return Err(corrupt(format!("payload length {len} exceeds header bound {max}")));
        }
        let mut payload = vec![0u8; len as usize];
        read_exact_or(&mut self.source, &mut payload, "payload")?;
        let mut crc = [0u8; 4];
        read_exact_or(&mut self.source, &mut crc, "checksum")?;
        if crc32fast::hash(&payload) != u32::from_le_bytes(crc) {
            return Err(corrupt("checksum mismatch"));
        }
        decode(&payload, &self.header).map(Some)
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<PretrainInstance, PretrainError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self.next_record().transpose();
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

pub fn write_records<'a, I, W>(instances: I, sink: W, header: RecordHeader) -> Result<usize, PretrainError>
where
    I: IntoIterator<Item = &'a PretrainInstance>,
    W: Write,
{
    let mut writer = RecordWriter::new(sink, header)?;
    for inst in instances {
        writer.write(inst)?;
    }
    let n = writer.written();
    writer.finish()?;
    Ok(n)
}

pub fn read_records<R: Read>(source: R) -> Result<(RecordHeader, Vec<PretrainInstance>), PretrainError> {
    let reader = RecordReader::new(source)?;
    let header = reader.header();
    let instances = reader.collect::<Result<_, _>>()?;
    Ok((header, instances))
}

/// One JSON object per line, for inspection.
pub fn write_debug_json<'a, I, W>(instances: I, mut sink: W) -> Result<usize, PretrainError>
where
    I: IntoIterator<Item = &'a PretrainInstance>,
    W: Write,
{
    let mut n = 0;
    for inst in instances {
        serde_json::to_writer(&mut sink, inst).map_err(io::Error::from)?;
        sink.write_all(b"\n")?;
        n += 1;
    }
    sink.flush()?;
    Ok(n)
}
