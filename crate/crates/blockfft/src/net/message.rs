//! The control-plane wire format.
//!
//! Every frame is a 4-byte little-endian length followed by a 1-byte tag and
//! the variant's fields, all little-endian fixed width, strings prefixed with
//! a u16 length. The length counts everything after itself (tag included)
//! and is capped at 1 MiB — sample data never crosses this channel, only
//! assignments and completions.
//!
//! ```text
//! tag 1  Hello        worker_id: u16 len + bytes (<= 64), cores: u16
//! tag 2  Assign       block_index u64, byte_offset u64, byte_length u64,
//!                     record_count u64, pad_samples u32, fft_size u32,
//!                     sample_format u8, kernel u8, scale_inverse u8,
//!                     has_input_crc u8, input_crc u64
//! tag 3  BlockDone    block_index u64, output_crc u64,
//!                     read_ns u64, compute_ns u64, write_ns u64
//! tag 4  BlockFailed  block_index u64, reason: u16 len + bytes
//! tag 5  Shutdown     (no fields)
//! ```

use std::io::{Read, Write};

use thiserror::Error;

use crate::block::{BlockDescriptor, SampleFormat};
use crate::engine::Kernel;

/// Default coordinator port.
pub const DEFAULT_PORT: u16 = 7341;

/// Control frames stay small; anything larger is a corrupt or hostile peer.
pub const MAX_FRAME_LEN: u32 = 1 << 20;

/// Longest worker id accepted on the wire.
pub const MAX_WORKER_ID_LEN: usize = 64;

const TAG_HELLO: u8 = 1;
const TAG_ASSIGN: u8 = 2;
const TAG_BLOCK_DONE: u8 = 3;
const TAG_BLOCK_FAILED: u8 = 4;
const TAG_SHUTDOWN: u8 = 5;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("oversize frame: {0} bytes exceeds the {MAX_FRAME_LEN}-byte limit")]
    Oversize(u32),
    #[error("empty frame")]
    EmptyFrame,
    #[error("frame declares {declared} bytes but carries {actual}")]
    LengthMismatch { declared: u32, actual: usize },
    #[error("truncated frame: field needs {needed} more bytes")]
    Truncated { needed: usize },
    #[error("frame has {0} bytes of trailing garbage")]
    TrailingBytes(usize),
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("invalid {field} value {value}")]
    BadField { field: &'static str, value: u64 },
    #[error("worker id is {0} bytes, limit {MAX_WORKER_ID_LEN}")]
    WorkerIdTooLong(usize),
    #[error("string field is {0} bytes, limit 65535")]
    StringTooLong(usize),
    #[error("string field is not valid UTF-8")]
    BadUtf8,
    #[error("connection closed")]
    Closed,
    #[error("i/o failure on control connection: {0}")]
    Io(#[from] std::io::Error),
}

/// One block assignment plus the job parameters a worker needs to run it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub descriptor: BlockDescriptor,
    pub fft_size: u32,
    pub sample_format: SampleFormat,
    pub kernel: Kernel,
    pub scale_inverse: bool,
    /// Expected CRC-64 of the block's input bytes, when the manifest has one.
    pub input_crc: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Hello {
        worker_id: String,
        cores: u16,
    },
    Assign(Assignment),
    BlockDone {
        block_index: u64,
        output_crc: u64,
        read_ns: u64,
        compute_ns: u64,
        write_ns: u64,
    },
    BlockFailed {
        block_index: u64,
        reason: String,
    },
    Shutdown,
}

fn format_to_wire(format: SampleFormat) -> u8 {
    match format {
        SampleFormat::RealF32 => 0,
        SampleFormat::ComplexF32 => 1,
    }
}

fn format_from_wire(value: u8) -> Result<SampleFormat, ProtocolError> {
    match value {
        0 => Ok(SampleFormat::RealF32),
        1 => Ok(SampleFormat::ComplexF32),
        v => Err(ProtocolError::BadField {
            field: "sample_format",
            value: v as u64,
        }),
    }
}

fn kernel_to_wire(kernel: Kernel) -> u8 {
    match kernel {
        Kernel::FftForward => 0,
        Kernel::FftInverse => 1,
        Kernel::Identity => 2,
    }
}

fn kernel_from_wire(value: u8) -> Result<Kernel, ProtocolError> {
    match value {
        0 => Ok(Kernel::FftForward),
        1 => Ok(Kernel::FftInverse),
        2 => Ok(Kernel::Identity),
        v => Err(ProtocolError::BadField {
            field: "kernel",
            value: v as u64,
        }),
    }
}

fn push_string(body: &mut Vec<u8>, s: &str) -> Result<(), ProtocolError> {
    if s.len() > u16::MAX as usize {
        return Err(ProtocolError::StringTooLong(s.len()));
    }
    body.extend_from_slice(&(s.len() as u16).to_le_bytes());
    body.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Encodes a message as one complete frame, length prefix included.
pub fn encode_message(msg: &Message) -> Result<Vec<u8>, ProtocolError> {
    let mut body = Vec::with_capacity(64);
    match msg {
        Message::Hello { worker_id, cores } => {
            if worker_id.len() > MAX_WORKER_ID_LEN {
                return Err(ProtocolError::WorkerIdTooLong(worker_id.len()));
            }
            body.push(TAG_HELLO);
            push_string(&mut body, worker_id)?;
            body.extend_from_slice(&cores.to_le_bytes());
        }
        Message::Assign(a) => {
            body.push(TAG_ASSIGN);
            body.extend_from_slice(&a.descriptor.block_index.to_le_bytes());
            body.extend_from_slice(&a.descriptor.byte_offset.to_le_bytes());
            body.extend_from_slice(&a.descriptor.byte_length.to_le_bytes());
            body.extend_from_slice(&a.descriptor.record_count.to_le_bytes());
            body.extend_from_slice(&a.descriptor.pad_samples.to_le_bytes());
            body.extend_from_slice(&a.fft_size.to_le_bytes());
            body.push(format_to_wire(a.sample_format));
            body.push(kernel_to_wire(a.kernel));
            body.push(a.scale_inverse as u8);
            body.push(a.input_crc.is_some() as u8);
            body.extend_from_slice(&a.input_crc.unwrap_or(0).to_le_bytes());
        }
        Message::BlockDone {
            block_index,
            output_crc,
            read_ns,
            compute_ns,
            write_ns,
        } => {
            body.push(TAG_BLOCK_DONE);
            body.extend_from_slice(&block_index.to_le_bytes());
            body.extend_from_slice(&output_crc.to_le_bytes());
            body.extend_from_slice(&read_ns.to_le_bytes());
            body.extend_from_slice(&compute_ns.to_le_bytes());
            body.extend_from_slice(&write_ns.to_le_bytes());
        }
        Message::BlockFailed {
            block_index,
            reason,
        } => {
            body.push(TAG_BLOCK_FAILED);
            body.extend_from_slice(&block_index.to_le_bytes());
            push_string(&mut body, reason)?;
        }
        Message::Shutdown => {
            body.push(TAG_SHUTDOWN);
        }
    }

    debug_assert!(body.len() as u32 <= MAX_FRAME_LEN);
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_le_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

struct FieldReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> FieldReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        FieldReader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        let remaining = self.bytes.len() - self.pos;
        if remaining < n {
            return Err(ProtocolError::Truncated {
                needed: n - remaining,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, ProtocolError> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| ProtocolError::BadUtf8)
    }

    fn finish(&self) -> Result<(), ProtocolError> {
        if self.pos != self.bytes.len() {
            return Err(ProtocolError::TrailingBytes(self.bytes.len() - self.pos));
        }
        Ok(())
    }
}

fn decode_body(body: &[u8]) -> Result<Message, ProtocolError> {
    let mut r = FieldReader::new(body);
    let msg = match r.u8()? {
        TAG_HELLO => {
            let worker_id = r.string()?;
            if worker_id.len() > MAX_WORKER_ID_LEN {
                return Err(ProtocolError::WorkerIdTooLong(worker_id.len()));
            }
            let cores = r.u16()?;
            Message::Hello { worker_id, cores }
        }
        TAG_ASSIGN => {
            let descriptor = BlockDescriptor {
                block_index: r.u64()?,
                byte_offset: r.u64()?,
                byte_length: r.u64()?,
                record_count: r.u64()?,
                pad_samples: r.u32()?,
            };
            let fft_size = r.u32()?;
            let sample_format = format_from_wire(r.u8()?)?;
            let kernel = kernel_from_wire(r.u8()?)?;
            let scale_inverse = match r.u8()? {
                0 => false,
                1 => true,
                v => {
                    return Err(ProtocolError::BadField {
                        field: "scale_inverse",
                        value: v as u64,
                    })
                }
            };
            let has_crc = match r.u8()? {
                0 => false,
                1 => true,
                v => {
                    return Err(ProtocolError::BadField {
                        field: "has_input_crc",
                        value: v as u64,
                    })
                }
            };
            let crc = r.u64()?;
            Message::Assign(Assignment {
                descriptor,
                fft_size,
                sample_format,
                kernel,
                scale_inverse,
                input_crc: has_crc.then_some(crc),
            })
        }
        TAG_BLOCK_DONE => Message::BlockDone {
            block_index: r.u64()?,
            output_crc: r.u64()?,
            read_ns: r.u64()?,
            compute_ns: r.u64()?,
            write_ns: r.u64()?,
        },
        TAG_BLOCK_FAILED => Message::BlockFailed {
            block_index: r.u64()?,
            reason: r.string()?,
        },
        TAG_SHUTDOWN => Message::Shutdown,
        tag => return Err(ProtocolError::UnknownTag(tag)),
    };
    r.finish()?;
    Ok(msg)
}

/// Decodes one complete frame as produced by [`encode_message`].
pub fn decode_message(frame: &[u8]) -> Result<Message, ProtocolError> {
    if frame.len() < 4 {
        return Err(ProtocolError::Truncated {
            needed: 4 - frame.len(),
        });
    }
    let declared = u32::from_le_bytes(frame[..4].try_into().unwrap());
    if declared == 0 {
        return Err(ProtocolError::EmptyFrame);
    }
    if declared > MAX_FRAME_LEN {
        return Err(ProtocolError::Oversize(declared));
    }
    let body = &frame[4..];
    if body.len() != declared as usize {
        return Err(ProtocolError::LengthMismatch {
            declared,
            actual: body.len(),
        });
    }
    decode_body(body)
}

/// Writes one frame to a stream.
pub fn write_message(w: &mut impl Write, msg: &Message) -> Result<(), ProtocolError> {
    let frame = encode_message(msg)?;
    w.write_all(&frame)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame from a stream. A clean close at a frame boundary yields
/// [`ProtocolError::Closed`]; a close mid-frame is a truncated frame.
pub fn read_message(r: &mut impl Read) -> Result<Message, ProtocolError> {
    let mut len_bytes = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = r.read(&mut len_bytes[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Err(ProtocolError::Closed);
            }
            return Err(ProtocolError::Truncated { needed: 4 - filled });
        }
        filled += n;
    }
    let declared = u32::from_le_bytes(len_bytes);
    if declared == 0 {
        return Err(ProtocolError::EmptyFrame);
    }
    if declared > MAX_FRAME_LEN {
        return Err(ProtocolError::Oversize(declared));
    }
    let mut body = vec![0u8; declared as usize];
    r.read_exact(&mut body).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            ProtocolError::Truncated {
                needed: declared as usize,
            }
        } else {
            ProtocolError::Io(e)
        }
    })?;
    decode_body(&body)
}
