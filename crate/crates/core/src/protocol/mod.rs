//! Coordinator/worker messages, their wire encoding, and the transports that
//! carry them.
//!
//! # Frame layout
//!
//! Little-endian throughout:
//!
//! ```text
//! magic u32 = 0x4D444C31 | type u8 | payload_len u64 | payload | crc32 u32
//! ```
//!
//! The CRC (IEEE) covers every byte before it. Vectors are encoded as a u32
//! length followed by f64 entries, matrices as u32 rows, u32 cols and the
//! row-major f64 entries.

mod cluster;
mod tcp;
mod worker;

use std::io::Read;

pub use cluster::{ChannelCluster, Cluster, CommStats, DirectCluster};
pub use tcp::{serve_worker, TcpCluster};
pub use worker::{Worker, WorkerConfig};

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

pub const MAGIC: u32 = 0x4D44_4C31;
pub const HEADER_LEN: usize = 4 + 1 + 8;
pub const CRC_LEN: usize = 4;

/// Largest payload accepted by [`read_message`].
pub const MAX_PAYLOAD: u64 = 1 << 32;

/// Broadcast modes.
pub const MODE_SUMMARY: u8 = 0;
pub const MODE_GRADIENT: u8 = 1;
/// Reply with the indicator Gram matrix `(1/n) Σ x̃x̃ᵀ 1{1 − y x̃ᵀβ ≥ 0}` in
/// the `V` slot of a [`Message::SummaryReply`] (and zero `U`).
pub const MODE_INDICATOR_GRAM: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    InitRequest,
    InitReply {
        beta0: Vector,
    },
    BetaBroadcast {
        round: u32,
        h: f64,
        lambda: f64,
        beta: Vector,
        mode: u8,
    },
    SummaryReply {
        shard_id: u32,
        u: Vector,
        v: Matrix,
        count: u64,
    },
    GradReply {
        shard_id: u32,
        w: Vector,
        count: u64,
    },
    Shutdown,
}

impl Message {
    pub fn type_code(&self) -> u8 {
        match self {
            Message::InitRequest => 1,
            Message::InitReply { .. } => 2,
            Message::BetaBroadcast { .. } => 3,
            Message::SummaryReply { .. } => 4,
            Message::GradReply { .. } => 5,
            Message::Shutdown => 6,
        }
    }

    /// Shard id carried by a reply, if any.
    pub fn shard_id(&self) -> Option<u32> {
        match self {
            Message::SummaryReply { shard_id, .. } | Message::GradReply { shard_id, .. } => {
                Some(*shard_id)
            }
            _ => None,
        }
    }

    fn payload_len(&self) -> usize {
        let vec_len = |v: &Vector| 4 + 8 * v.len();
        match self {
            Message::InitRequest | Message::Shutdown => 0,
            Message::InitReply { beta0 } => vec_len(beta0),
            Message::BetaBroadcast { beta, .. } => 4 + 8 + 8 + vec_len(beta) + 1,
            Message::SummaryReply { u, v, .. } => 4 + vec_len(u) + 8 + 8 * v.rows() * v.cols() + 8,
            Message::GradReply { w, .. } => 4 + vec_len(w) + 8,
        }
    }
}

/// Size of the encoded frame, without encoding it.
pub fn encoded_len(msg: &Message) -> usize {
    HEADER_LEN + msg.payload_len() + CRC_LEN
}

fn put_vector(out: &mut Vec<u8>, v: &Vector) {
    out.extend_from_slice(&(v.len() as u32).to_le_bytes());
    for x in v.iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_matrix(out: &mut Vec<u8>, m: &Matrix) {
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for x in m.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode(msg: &Message) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(msg));
    out.extend_from_slice(&MAGIC.to_le_bytes());
    out.push(msg.type_code());
    out.extend_from_slice(&(msg.payload_len() as u64).to_le_bytes());
    match msg {
        Message::InitRequest | Message::Shutdown => {}
        Message::InitReply { beta0 } => put_vector(&mut out, beta0),
        Message::BetaBroadcast {
            round,
            h,
            lambda,
            beta,
            mode,
        } => {
            out.extend_from_slice(&round.to_le_bytes());
            out.extend_from_slice(&h.to_le_bytes());
            out.extend_from_slice(&lambda.to_le_bytes());
            put_vector(&mut out, beta);
            out.push(*mode);
        }
        Message::SummaryReply {
            shard_id,
            u,
            v,
            count,
        } => {
            out.extend_from_slice(&shard_id.to_le_bytes());
            put_vector(&mut out, u);
            put_matrix(&mut out, v);
            out.extend_from_slice(&count.to_le_bytes());
        }
        Message::GradReply { shard_id, w, count } => {
            out.extend_from_slice(&shard_id.to_le_bytes());
            put_vector(&mut out, w);
            out.extend_from_slice(&count.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).ok_or(Error::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn floats(&mut self, k: usize) -> Result<Vec<f64>> {
        let bytes = self.take(k.checked_mul(8).ok_or(Error::Truncated)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn vector(&mut self) -> Result<Vector> {
        let len = self.u32()? as usize;
        Ok(Vector::from_vec(self.floats(len)?))
    }

    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let data = self.floats(rows.checked_mul(cols).ok_or(Error::Truncated)?)?;
        Matrix::from_row_major(rows, cols, data)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Message> {
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(Error::Truncated);
    }
    if u32::from_le_bytes(bytes[..4].try_into().unwrap()) != MAGIC {
        return Err(Error::BadMagic);
    }
    let kind = bytes[4];
    let payload_len = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
    let total = (HEADER_LEN as u64)
        .checked_add(payload_len)
        .and_then(|t| t.checked_add(CRC_LEN as u64))
        .ok_or(Error::Truncated)?;
    if (bytes.len() as u64) < total {
        return Err(Error::Truncated);
    }
    if bytes.len() as u64 > total {
        return Err(Error::DimMismatch {
            expected: total as usize,
            found: bytes.len(),
        });
    }
    let body_end = bytes.len() - CRC_LEN;
    let crc = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
    if crc32fast::hash(&bytes[..body_end]) != crc {
        return Err(Error::BadChecksum);
    }
    let mut cur = Cursor {
        buf: &bytes[HEADER_LEN..body_end],
        pos: 0,
    };
    let msg = match kind {
        1 => Message::InitRequest,
        2 => Message::InitReply {
            beta0: cur.vector()?,
        },
        3 => {
            let round = cur.u32()?;
            let h = cur.f64()?;
            let lambda = cur.f64()?;
            let beta = cur.vector()?;
            let mode = cur.u8()?;
            if mode > MODE_INDICATOR_GRAM {
                return Err(Error::BadMode(mode));
            }
            Message::BetaBroadcast {
                round,
                h,
                lambda,
                beta,
                mode,
            }
        }
        4 => {
            let shard_id = cur.u32()?;
            let u = cur.vector()?;
            let v = cur.matrix()?;
            let count = cur.u64()?;
            if v.rows() != u.len() || v.cols() != u.len() {
                return Err(Error::DimMismatch {
                    expected: u.len(),
                    found: v.rows().max(v.cols()),
                });
            }
            Message::SummaryReply {
                shard_id,
                u,
                v,
                count,
            }
        }
        5 => {
            let shard_id = cur.u32()?;
            let w = cur.vector()?;
            let count = cur.u64()?;
            Message::GradReply { shard_id, w, count }
        }
        6 => Message::Shutdown,
        other => return Err(Error::UnknownType(other)),
    };
    if cur.pos != cur.buf.len() {
        return Err(Error::DimMismatch {
            expected: cur.pos,
            found: cur.buf.len(),
        });
    }
    Ok(msg)
}

/// Read one whole frame from a byte stream.
///
/// Returns `Ok(None)` on a clean end of stream before the first byte.
pub fn read_frame(reader: &mut impl Read) -> Result<Option<Vec<u8>>> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match reader.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(Error::Truncated),
            Ok(k) => filled += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    if u32::from_le_bytes(header[..4].try_into().unwrap()) != MAGIC {
        return Err(Error::BadMagic);
    }
    let payload_len = u64::from_le_bytes(header[5..13].try_into().unwrap());
    if payload_len > MAX_PAYLOAD {
        return Err(Error::DimMismatch {
            expected: MAX_PAYLOAD as usize,
            found: payload_len as usize,
        });
    }
    let mut frame = header.to_vec();
    frame.resize(HEADER_LEN + payload_len as usize + CRC_LEN, 0);
    reader.read_exact(&mut frame[HEADER_LEN..]).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated
        } else {
            e.into()
        }
    })?;
    Ok(Some(frame))
}

/// Read and decode one message; `Ok(None)` on a clean end of stream.
pub fn read_message(reader: &mut impl Read) -> Result<Option<Message>> {
    read_frame(reader)?.map(|f| decode(&f)).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(p: usize) -> Message {
        let d = p + 1;
        Message::SummaryReply {
            shard_id: 3,
            u: Vector::from_vec((0..d).map(|i| 0.1 * i as f64 - 1.0 / 3.0).collect()),
            v: Matrix::from_fn(d, d, |i, j| 1.0 / (1 + i + j) as f64),
            count: 250,
        }
    }

    #[test]
    fn shutdown_frame_is_seventeen_bytes() {
        let bytes = encode(&Message::Shutdown);
        assert_eq!(bytes.len(), 17);
        assert_eq!(encoded_len(&Message::Shutdown), 17);
        assert_eq!(decode(&bytes).unwrap(), Message::Shutdown);
    }

    #[test]
    fn summary_round_trip_is_bit_exact() {
        let msg = summary(4);
        let bytes = encode(&msg);
        assert_eq!(bytes.len(), encoded_len(&msg));
        let back = decode(&bytes).unwrap();
        match (&msg, &back) {
            (
                Message::SummaryReply { u: u1, v: v1, .. },
                Message::SummaryReply { u: u2, v: v2, .. },
            ) => {
                for (a, b) in u1.iter().zip(u2.iter()) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
                for (a, b) in v1.as_slice().iter().zip(v2.as_slice()) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
            _ => panic!("variant changed"),
        }
        assert_eq!(msg, back);
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let msg = Message::BetaBroadcast {
            round: 2,
            h: 0.04,
            lambda: 0.0,
            beta: Vector::from_vec(vec![0.0, 0.35, 0.35]),
            mode: MODE_SUMMARY,
        };
        let mut bytes = encode(&msg);
        bytes[HEADER_LEN + 6] ^= 0x10;
        assert!(matches!(decode(&bytes), Err(Error::BadChecksum)));
    }

    #[test]
    fn header_errors() {
        let mut bytes = encode(&Message::InitRequest);
        bytes[0] ^= 1;
        assert!(matches!(decode(&bytes), Err(Error::BadMagic)));

        let bytes = encode(&summary(2));
        assert!(matches!(
            decode(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated)
        ));

        let mut bytes = encode(&Message::Shutdown);
        bytes[4] = 42;
        let crc = crc32fast::hash(&bytes[..13]);
        bytes[13..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::UnknownType(42))));
    }

    #[test]
    fn inconsistent_dims_rejected() {
        let msg = Message::SummaryReply {
            shard_id: 0,
            u: Vector::zeros(3),
            v: Matrix::zeros(2, 2),
            count: 1,
        };
        assert!(matches!(
            decode(&encode(&msg)),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn stream_reading() {
        let mut stream = encode(&summary(1));
        stream.extend(encode(&Message::Shutdown));
        let mut reader = stream.as_slice();
        assert_eq!(read_message(&mut reader).unwrap(), Some(summary(1)));
        assert_eq!(read_message(&mut reader).unwrap(), Some(Message::Shutdown));
        assert_eq!(read_message(&mut reader).unwrap(), None);
    }
}
