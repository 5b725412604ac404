//! Byte-exact wire message for one sparse upload or broadcast.
//!
//! ```text
//! header        13 bytes  version u8 | round u32 | client u32 | segment u16 | tensors u16
//! tensor table  12 bytes  id u16 | dense_len u32 | nnz u32 | golomb_m u16     (per tensor)
//! payload       bits      gap codes of tensor 0, 1, ... then every value, MSB-first
//! padding       0..7      zero bits up to the byte boundary
//! ```
//!
//! Header integers are little-endian. The low six bits of the version byte
//! carry [`PROTOCOL_VERSION`]; bit 6 marks fixed 32-bit positions instead of
//! gap codes (omitted for fully dense tensors) and bit 7 marks 32-bit values
//! instead of binary16. The default message has both bits clear.

use std::fmt::Write as _;

use half::f16;
use serde::{Deserialize, Serialize};

use super::bits::{BitReader, BitWriter};
use super::golomb::{self, GolombParam};
use crate::sparsifier::{SparseTensor, SparseUpdate};
use crate::{Error, Result};

pub const PROTOCOL_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 13;
pub const TENSOR_ENTRY_LEN: usize = 12;

const FLAG_FIXED_POSITIONS: u8 = 0x40;
const FLAG_F32_VALUES: u8 = 0x80;
const VERSION_MASK: u8 = 0x3F;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueFormat {
    #[default]
    F16,
    F32,
}

impl ValueFormat {
    pub fn bits(self) -> u32 {
        match self {
            ValueFormat::F16 => 16,
            ValueFormat::F32 => 32,
        }
    }

    /// The value a receiver sees after transmission.
    pub fn quantize(self, v: f32) -> f32 {
        match self {
            ValueFormat::F16 => f16::from_f32(v).to_f32(),
            ValueFormat::F32 => v,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionCoding {
    /// Gap codes with the optimal Golomb divisor for the tensor's density.
    #[default]
    Golomb,
    /// Gap codes restricted to power-of-two divisors.
    Rice,
    /// Absolute 32-bit positions, no entropy coding.
    Fixed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireFormat {
    pub positions: PositionCoding,
    pub values: ValueFormat,
}

impl WireFormat {
    fn version_byte(self) -> u8 {
        let mut v = PROTOCOL_VERSION;
        if self.positions == PositionCoding::Fixed {
            v |= FLAG_FIXED_POSITIONS;
        }
        if self.values == ValueFormat::F32 {
            v |= FLAG_F32_VALUES;
        }
        v
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageHeader {
    pub round: u32,
    pub client_id: u32,
    pub segment_id: u16,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedMessage {
    pub header: MessageHeader,
    pub format: WireFormat,
    pub update: SparseUpdate,
    /// Divisor used per tensor; `None` for fixed-width positions.
    pub golomb: Vec<Option<GolombParam>>,
    /// Payload length before padding.
    pub payload_bits: usize,
}

fn divisor(t: &SparseTensor, coding: PositionCoding) -> Option<GolombParam> {
    let (nnz, len) = (t.nnz(), t.dense_len as usize);
    match coding {
        PositionCoding::Golomb => Some(golomb::param_for_density(nnz, len, false)),
        PositionCoding::Rice => Some(golomb::param_for_density(nnz, len, true)),
        PositionCoding::Fixed => None,
    }
}

/// Serialises `update`. Values are converted to the wire format with
/// round-to-nearest-even.
pub fn encode_message(
    update: &SparseUpdate,
    header: MessageHeader,
    format: WireFormat,
) -> Result<Vec<u8>> {
    let count = u16::try_from(update.tensors.len()).map_err(|_| {
        Error::MessageTooLarge(format!("{} tensors exceed u16", update.tensors.len()))
    })?;
    let mut out = Vec::with_capacity(HEADER_LEN + TENSOR_ENTRY_LEN * update.tensors.len());
    out.push(format.version_byte());
    out.extend_from_slice(&header.round.to_le_bytes());
    out.extend_from_slice(&header.client_id.to_le_bytes());
    out.extend_from_slice(&header.segment_id.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());

    let mut params = Vec::with_capacity(update.tensors.len());
    for t in &update.tensors {
        t.validate()?;
        let nnz = u32::try_from(t.nnz())
            .map_err(|_| Error::MessageTooLarge(format!("tensor {} nonzero count", t.id)))?;
        let m = divisor(t, format.positions);
        out.extend_from_slice(&t.id.to_le_bytes());
        out.extend_from_slice(&t.dense_len.to_le_bytes());
        out.extend_from_slice(&nnz.to_le_bytes());
        let m_field = m.map_or(0, |m| m.get() as u16);
        out.extend_from_slice(&m_field.to_le_bytes());
        params.push(m);
    }

    let mut w = BitWriter::new();
    for (t, m) in update.tensors.iter().zip(&params) {
        match m {
            Some(m) => golomb::encode_gaps_into(&mut w, &t.positions, *m)?,
            None if t.nnz() as u64 == t.dense_len as u64 => {}
            None => {
                for &p in &t.positions {
                    w.write_bits(p as u64, 32);
                }
            }
        }
    }
    for t in &update.tensors {
        for &v in &t.values {
            match format.values {
                ValueFormat::F16 => w.write_bits(f16::from_f32(v).to_bits() as u64, 16),
                ValueFormat::F32 => w.write_bits(v.to_bits() as u64, 32),
            }
        }
    }
    out.extend(w.into_bytes());
    Ok(out)
}

struct TableEntry {
    id: u16,
    dense_len: u32,
    nnz: u32,
    m: u16,
}

fn read_header(bytes: &[u8]) -> Result<(MessageHeader, WireFormat, Vec<TableEntry>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::CorruptHeader(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = bytes[0];
    if version & VERSION_MASK != PROTOCOL_VERSION {
        return Err(Error::CorruptHeader(format!(
            "unsupported protocol version {}",
            version & VERSION_MASK
        )));
    }
    let format = WireFormat {
        positions: if version & FLAG_FIXED_POSITIONS != 0 {
            PositionCoding::Fixed
        } else {
            PositionCoding::Golomb
        },
        values: if version & FLAG_F32_VALUES != 0 {
            ValueFormat::F32
        } else {
            ValueFormat::F16
        },
    };
    let header = MessageHeader {
        round: u32_at(1),
        client_id: u32_at(5),
        segment_id: u16_at(9),
    };
    let count = u16_at(11) as usize;
    let table_end = HEADER_LEN + count * TENSOR_ENTRY_LEN;
    if bytes.len() < table_end {
        return Err(Error::CorruptHeader(format!(
            "tensor table for {count} tensors truncated"
        )));
    }
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let o = HEADER_LEN + i * TENSOR_ENTRY_LEN;
        let e = TableEntry {
            id: u16_at(o),
            dense_len: u32_at(o + 2),
            nnz: u32_at(o + 6),
            m: u16_at(o + 10),
        };
        if e.nnz > e.dense_len {
            return Err(Error::CorruptHeader(format!(
                "tensor {}: {} nonzeros in {} slots",
                e.id, e.nnz, e.dense_len
            )));
        }
        if format.positions != PositionCoding::Fixed && e.m == 0 {
            return Err(Error::CorruptHeader(format!("tensor {}: golomb divisor 0", e.id)));
        }
        entries.push(e);
    }
    Ok((header, format, entries))
}

/// Parses a message produced by [`encode_message`].
pub fn decode_message(bytes: &[u8]) -> Result<DecodedMessage> {
    let (header, format, entries) = read_header(bytes)?;
    let payload = &bytes[HEADER_LEN + entries.len() * TENSOR_ENTRY_LEN..];
    let mut r = BitReader::new(payload);

    let mut golomb_params = Vec::with_capacity(entries.len());
    let mut positions = Vec::with_capacity(entries.len());
    for e in &entries {
        let nnz = e.nnz as usize;
        let pos = if format.positions == PositionCoding::Fixed {
            golomb_params.push(None);
            if e.nnz == e.dense_len {
                (0..e.dense_len).collect()
            } else {
                let mut pos = Vec::with_capacity(nnz.min(r.remaining() / 32));
                for code_index in 0..nnz {
                    let p = r.read_bits(32).ok_or(Error::CorruptMessage {
                        tensor: e.id,
                        code_index,
                        reason: "bitstream ends inside a fixed position",
                    })? as u32;
                    pos.push(p);
                }
                pos
            }
        } else {
            let m = GolombParam::new(e.m as u32)?;
            golomb_params.push(Some(m));
            golomb::decode_gaps(&mut r, nnz, m, e.id)?
        };
        let bad_order = pos.windows(2).position(|w| w[0] >= w[1]);
        if let Some(i) = bad_order {
            return Err(Error::CorruptMessage {
                tensor: e.id,
                code_index: i + 1,
                reason: "positions not strictly increasing",
            });
        }
        if let Some(i) = pos.iter().position(|&p| p >= e.dense_len) {
            return Err(Error::CorruptMessage {
                tensor: e.id,
                code_index: i,
                reason: "position beyond dense length",
            });
        }
        positions.push(pos);
    }

    let mut tensors = Vec::with_capacity(entries.len());
    for (e, pos) in entries.iter().zip(positions) {
        let mut values = Vec::with_capacity(pos.len());
        for code_index in 0..pos.len() {
            let raw = r.read_bits(format.values.bits()).ok_or(Error::CorruptMessage {
                tensor: e.id,
                code_index,
                reason: "bitstream ends inside the value block",
            })?;
            values.push(match format.values {
                ValueFormat::F16 => f16::from_bits(raw as u16).to_f32(),
                ValueFormat::F32 => f32::from_bits(raw as u32),
            });
        }
        tensors.push(SparseTensor {
            id: e.id,
            dense_len: e.dense_len,
            positions: pos,
            values,
        });
    }

    let payload_bits = r.position();
    let padding = r.remaining();
    if padding >= 8 || r.read_bits(padding as u32) != Some(0) {
        return Err(Error::CorruptHeader(format!(
            "{padding} trailing bits after the payload are not zero padding"
        )));
    }
    Ok(DecodedMessage {
        header,
        format,
        update: SparseUpdate { tensors },
        golomb: golomb_params,
        payload_bits,
    })
}

/// Annotated hex listing of a message, for debugging.
pub fn dump_annotated(bytes: &[u8]) -> Result<String> {
    let msg = decode_message(bytes)?;
    let mut s = String::new();
    let hex = |b: &[u8]| b.iter().map(|x| format!("{x:02x}")).collect::<Vec<_>>().join(" ");
    let row = |s: &mut String, off: usize, b: &[u8], note: String| {
        let _ = writeln!(s, "{off:08x}  {:<36} {note}", hex(b));
    };
    row(
        &mut s,
        0,
        &bytes[0..1],
        format!(
            "version {} ({:?} positions, {:?} values)",
            bytes[0] & VERSION_MASK,
            msg.format.positions,
            msg.format.values
        ),
    );
    row(&mut s, 1, &bytes[1..5], format!("round {}", msg.header.round));
    row(&mut s, 5, &bytes[5..9], format!("client {}", msg.header.client_id));
    row(&mut s, 9, &bytes[9..11], format!("segment {}", msg.header.segment_id));
    row(&mut s, 11, &bytes[11..13], format!("tensors {}", msg.update.tensors.len()));
    for (i, (t, m)) in msg.update.tensors.iter().zip(&msg.golomb).enumerate() {
        let o = HEADER_LEN + i * TENSOR_ENTRY_LEN;
        let m = m.map_or("fixed".to_string(), |m| m.get().to_string());
        row(
            &mut s,
            o,
            &bytes[o..o + TENSOR_ENTRY_LEN],
            format!("tensor {} len {} nnz {} M {m}", t.id, t.dense_len, t.nnz()),
        );
    }
    let start = HEADER_LEN + msg.update.tensors.len() * TENSOR_ENTRY_LEN;
    let _ = writeln!(
        s,
        "payload: {} bytes, {} bits used, {} padding bits",
        bytes.len() - start,
        msg.payload_bits,
        (bytes.len() - start) * 8 - msg.payload_bits
    );
    for (i, chunk) in bytes[start..].chunks(16).enumerate() {
        let _ = writeln!(s, "{:08x}  {}", start + i * 16, hex(chunk));
    }
    for t in &msg.update.tensors {
        let shown = t.nnz().min(8);
        let _ = writeln!(
            s,
            "tensor {}: positions {:?}{} values {:?}{}",
            t.id,
            &t.positions[..shown],
            if t.nnz() > shown { " ..." } else { "" },
            &t.values[..shown],
            if t.nnz() > shown { " ..." } else { "" },
        );
    }
    Ok(s)
}
