//! Framed host↔display codec.
//!
//! Every frame is
//!
//! ```text
//! +------+--------+-----+-------------+----------+
//! | 0xA5 | opcode | len | payload ... | checksum |
//! +------+--------+-----+-------------+----------+
//! ```
//!
//! where `checksum` is the XOR of every byte from `opcode` through the last
//! payload byte. There is no byte stuffing: payloads may contain `0xA5` and
//! the length field is what delimits a frame. A [`StreamDecoder`] scans for
//! the start byte to resynchronize after corruption.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::rc::Rc;

use thiserror::Error;

use crate::taxel::{Bitmap, GridDims};

pub const SOF: u8 = 0xA5;
pub const MAX_PAYLOAD: usize = u8::MAX as usize;
const HEADER_LEN: usize = 3;

pub mod opcode {
    pub const SHOW: u8 = 0x01;
    pub const CLEAR: u8 = 0x02;
    pub const STATUS: u8 = 0x03;
    pub const PING: u8 = 0x04;
    pub const ACK: u8 = 0x81;
    pub const BUSY: u8 = 0x82;
    pub const STATUS_REPLY: u8 = 0x83;
    pub const PONG: u8 = 0x84;
    pub const NAK: u8 = 0x85;
}

/// Reason codes carried by [`Response::Nak`].
pub mod nak {
    pub const BAD_SOF: u8 = 0x01;
    pub const BAD_CHECKSUM: u8 = 0x02;
    pub const UNKNOWN_COMMAND: u8 = 0x03;
    pub const LENGTH_MISMATCH: u8 = 0x04;
    pub const BAD_DIMS: u8 = 0x05;
    pub const UNEXPECTED_RESPONSE: u8 = 0x06;
    pub const HAZARD_ABORT: u8 = 0x10;
    pub const INTERNAL: u8 = 0x7f;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("expected start byte 0xA5, got {0:#04x}")]
    BadSof(u8),
    #[error("frame incomplete: {needed} more byte(s) required")]
    Incomplete { needed: usize },
    #[error("checksum mismatch: frame carries {found:#04x}, computed {computed:#04x}")]
    BadChecksum { found: u8, computed: u8 },
    #[error("unknown opcode {0:#04x}")]
    UnknownCommand(u8),
    #[error("opcode {opcode:#04x} expects a {expected}-byte payload, got {actual}")]
    LengthMismatch {
        opcode: u8,
        expected: usize,
        actual: usize,
    },
    #[error("bitmap payload of {actual} bytes does not match {dims} ({expected} bytes)")]
    BadDims {
        dims: GridDims,
        expected: usize,
        actual: usize,
    },
    #[error("payload of {0} bytes exceeds one frame")]
    Oversized(usize),
}

impl ProtocolError {
    /// Code reported back to the host in a NAK.
    pub fn nak_code(&self) -> u8 {
        match self {
            ProtocolError::BadSof(_) | ProtocolError::Incomplete { .. } => nak::BAD_SOF,
            ProtocolError::BadChecksum { .. } => nak::BAD_CHECKSUM,
            ProtocolError::UnknownCommand(_) => nak::UNKNOWN_COMMAND,
            ProtocolError::LengthMismatch { .. } | ProtocolError::Oversized(_) => {
                nak::LENGTH_MISMATCH
            }
            ProtocolError::BadDims { .. } => nak::BAD_DIMS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Show(Bitmap),
    Clear,
    Status,
    Ping,
}

/// Payload of a STATUS reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusReport {
    pub state_code: u8,
    pub set_pulses: u16,
    pub reset_pulses: u16,
    pub shadow: Bitmap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    Ack,
    Busy,
    Status(StatusReport),
    Pong,
    Nak { reason_code: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Command(Command),
    Response(Response),
}

impl From<Command> for Message {
    fn from(c: Command) -> Self {
        Message::Command(c)
    }
}

impl From<Response> for Message {
    fn from(r: Response) -> Self {
        Message::Response(r)
    }
}

/// XOR fold.
pub fn checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

impl Message {
    fn opcode(&self) -> u8 {
        match self {
            Message::Command(Command::Show(_)) => opcode::SHOW,
            Message::Command(Command::Clear) => opcode::CLEAR,
            Message::Command(Command::Status) => opcode::STATUS,
            Message::Command(Command::Ping) => opcode::PING,
            Message::Response(Response::Ack) => opcode::ACK,
            Message::Response(Response::Busy) => opcode::BUSY,
            Message::Response(Response::Status(_)) => opcode::STATUS_REPLY,
            Message::Response(Response::Pong) => opcode::PONG,
            Message::Response(Response::Nak { .. }) => opcode::NAK,
        }
    }

    fn payload(&self) -> Vec<u8> {
        match self {
            Message::Command(Command::Show(frame)) => frame.to_bytes(),
            Message::Response(Response::Status(s)) => {
                let mut p = Vec::with_capacity(5 + s.shadow.dims().frame_bytes());
                p.push(s.state_code);
                p.extend_from_slice(&s.set_pulses.to_be_bytes());
                p.extend_from_slice(&s.reset_pulses.to_be_bytes());
                p.extend_from_slice(&s.shadow.to_bytes());
                p
            }
            Message::Response(Response::Nak { reason_code }) => vec![*reason_code],
            _ => Vec::new(),
        }
    }
}

/// Serializes one message into a frame.
pub fn encode(msg: &Message) -> Result<Vec<u8>, ProtocolError> {
    let payload = msg.payload();
    if payload.len() > MAX_PAYLOAD {
        return Err(ProtocolError::Oversized(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 1);
    out.push(SOF);
    out.push(msg.opcode());
    out.push(payload.len() as u8);
    out.extend_from_slice(&payload);
    out.push(checksum(&out[1..]));
    Ok(out)
}

fn expect_len(op: u8, expected: usize, actual: usize) -> Result<(), ProtocolError> {
    if expected != actual {
        return Err(ProtocolError::LengthMismatch {
            opcode: op,
            expected,
            actual,
        });
    }
    Ok(())
}

fn parse_bitmap(dims: GridDims, bytes: &[u8]) -> Result<Bitmap, ProtocolError> {
    Bitmap::from_bytes(dims, bytes).map_err(|_| ProtocolError::BadDims {
        dims,
        expected: dims.frame_bytes(),
        actual: bytes.len(),
    })
}

/// Decodes the frame at the start of `bytes`, returning the message and the
/// number of bytes it occupied. Bytes after the frame are not examined.
/// Bitmap payloads are interpreted with `dims`.
pub fn decode(bytes: &[u8], dims: GridDims) -> Result<(Message, usize), ProtocolError> {
    match bytes.first() {
        None => return Err(ProtocolError::Incomplete { needed: HEADER_LEN + 1 }),
        Some(&b) if b != SOF => return Err(ProtocolError::BadSof(b)),
        _ => {}
    }
    if bytes.len() < HEADER_LEN {
        return Err(ProtocolError::Incomplete {
            needed: HEADER_LEN + 1 - bytes.len(),
        });
    }
    let op = bytes[1];
    let len = usize::from(bytes[2]);
    let total = HEADER_LEN + len + 1;
    if bytes.len() < total {
        return Err(ProtocolError::Incomplete {
            needed: total - bytes.len(),
        });
    }
    let computed = checksum(&bytes[1..total - 1]);
    let found = bytes[total - 1];
    if computed != found {
        return Err(ProtocolError::BadChecksum { found, computed });
    }
    let payload = &bytes[HEADER_LEN..HEADER_LEN + len];
    let msg = match op {
        opcode::SHOW => Message::Command(Command::Show(parse_bitmap(dims, payload)?)),
        opcode::CLEAR => {
            expect_len(op, 0, len)?;
            Command::Clear.into()
        }
        opcode::STATUS => {
            expect_len(op, 0, len)?;
            Command::Status.into()
        }
        opcode::PING => {
            expect_len(op, 0, len)?;
            Command::Ping.into()
        }
        opcode::ACK => {
            expect_len(op, 0, len)?;
            Response::Ack.into()
        }
        opcode::BUSY => {
            expect_len(op, 0, len)?;
            Response::Busy.into()
        }
        opcode::PONG => {
            expect_len(op, 0, len)?;
            Response::Pong.into()
        }
        opcode::NAK => {
            expect_len(op, 1, len)?;
            Response::Nak {
                reason_code: payload[0],
            }
            .into()
        }
        opcode::STATUS_REPLY => {
            if len < 5 {
                return Err(ProtocolError::LengthMismatch {
                    opcode: op,
                    expected: 5 + dims.frame_bytes(),
                    actual: len,
                });
            }
            Response::Status(StatusReport {
                state_code: payload[0],
                set_pulses: u16::from_be_bytes([payload[1], payload[2]]),
                reset_pulses: u16::from_be_bytes([payload[3], payload[4]]),
                shadow: parse_bitmap(dims, &payload[5..])?,
            })
            .into()
        }
        other => return Err(ProtocolError::UnknownCommand(other)),
    };
    Ok((msg, total))
}

/// Incremental decoder over a byte stream.
#[derive(Debug, Clone)]
pub struct StreamDecoder {
    dims: GridDims,
    buf: Vec<u8>,
    discarded: usize,
}

impl StreamDecoder {
    pub fn new(dims: GridDims) -> Self {
        Self {
            dims,
            buf: Vec::new(),
            discarded: 0,
        }
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes still waiting for a complete frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    /// Bytes dropped while resynchronizing.
    pub fn discarded(&self) -> usize {
        self.discarded
    }

    fn drop_front(&mut self, n: usize) {
        self.buf.drain(..n);
        self.discarded += n;
    }

    /// Next decoded message, `Some(Err(_))` for a rejected frame, or `None`
    /// once the buffer holds no complete frame.
    ///
    /// A candidate frame that is still incomplete is abandoned if a complete,
    /// valid frame starts later in the buffer, so a corrupted length byte
    /// cannot stall the stream.
    pub fn next_message(&mut self) -> Option<Result<Message, ProtocolError>> {
        let skip = self.buf.iter().position(|&b| b == SOF).unwrap_or(self.buf.len());
        self.drop_front(skip);
        if self.buf.is_empty() {
            return None;
        }
        match decode(&self.buf, self.dims) {
            Ok((msg, used)) => {
                self.buf.drain(..used);
                Some(Ok(msg))
            }
            Err(ProtocolError::Incomplete { needed }) => {
                let later = (1..self.buf.len())
                    .filter(|&i| self.buf[i] == SOF)
                    .find(|&i| decode(&self.buf[i..], self.dims).is_ok())?;
                self.drop_front(later);
                Some(Err(ProtocolError::Incomplete { needed }))
            }
            Err(e) => {
                self.drop_front(1);
                Some(Err(e))
            }
        }
    }
}

/// In-memory ordered byte pipe. Two halves from [`loopback`] form a
/// full-duplex link.
#[derive(Debug, Clone)]
pub struct LoopbackPort {
    rx: Rc<RefCell<VecDeque<u8>>>,
    tx: Rc<RefCell<VecDeque<u8>>>,
}

/// Connected `(host, device)` ports.
pub fn loopback() -> (LoopbackPort, LoopbackPort) {
    let a = Rc::new(RefCell::new(VecDeque::new()));
    let b = Rc::new(RefCell::new(VecDeque::new()));
    (
        LoopbackPort {
            rx: Rc::clone(&a),
            tx: Rc::clone(&b),
        },
        LoopbackPort { rx: b, tx: a },
    )
}

impl LoopbackPort {
    pub fn available(&self) -> usize {
        self.rx.borrow().len()
    }
}

impl Read for LoopbackPort {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let mut rx = self.rx.borrow_mut();
        let n = buf.len().min(rx.len());
        for (dst, src) in buf.iter_mut().zip(rx.drain(..n)) {
            *dst = src;
        }
        Ok(n)
    }
}

impl Write for LoopbackPort {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx.borrow_mut().extend(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc(m: impl Into<Message>) -> Vec<u8> {
        encode(&m.into()).unwrap()
    }

    const REF: GridDims = GridDims::reference();

    #[test]
    fn checksum_examples() {
        assert_eq!(checksum(&[]), 0);
        assert_eq!(checksum(&[0x01, 0x20]), 0x21);
        let x = [0x13, 0xfe, 0x00, 0xa5];
        let mut y = x.to_vec();
        y.push(checksum(&x));
        assert_eq!(checksum(&y), 0);
    }

    #[test]
    fn worked_frames() {
        assert_eq!(enc(Command::Ping), [0xA5, 0x04, 0x00, 0x04]);
        assert_eq!(enc(Command::Clear), [0xA5, 0x02, 0x00, 0x02]);
        let show = enc(Command::Show(Bitmap::new(REF)));
        assert_eq!(show.len(), 36);
        assert_eq!(&show[..3], &[0xA5, 0x01, 0x20]);
        assert!(show[3..35].iter().all(|&b| b == 0));
        assert_eq!(show[35], 0x21);
    }

    #[test]
    fn ping_round_trip() {
        let bytes = enc(Command::Ping);
        assert_eq!(decode(&bytes, REF).unwrap(), (Command::Ping.into(), 4));
    }

    #[test]
    fn bad_checksum() {
        assert_eq!(
            decode(&[0xA5, 0x04, 0x00, 0x05], REF),
            Err(ProtocolError::BadChecksum {
                found: 0x05,
                computed: 0x04
            })
        );
    }

    #[test]
    fn short_show_payload() {
        let mut f = vec![0xA5, 0x01, 0x1F];
        f.extend([0u8; 31]);
        f.push(checksum(&f[1..]));
        assert!(matches!(
            decode(&f, REF),
            Err(ProtocolError::BadDims {
                expected: 32,
                actual: 31,
                ..
            })
        ));
    }

    #[test]
    fn other_errors() {
        assert_eq!(decode(&[0x00, 0x04], REF), Err(ProtocolError::BadSof(0)));
        assert_eq!(
            decode(&[0xA5, 0x04], REF),
            Err(ProtocolError::Incomplete { needed: 2 })
        );
        assert_eq!(
            decode(&[0xA5, 0x40, 0x00, 0x40], REF),
            Err(ProtocolError::UnknownCommand(0x40))
        );
        assert!(matches!(
            decode(&[0xA5, 0x02, 0x01, 0x00, 0x03], REF),
            Err(ProtocolError::LengthMismatch {
                opcode: 0x02,
                expected: 0,
                actual: 1
            })
        ));
    }

    #[test]
    fn oversized_rejected() {
        let big = GridDims::new(256, 8).unwrap();
        assert_eq!(
            encode(&Command::Show(Bitmap::new(big)).into()),
            Err(ProtocolError::Oversized(256))
        );
    }

    #[test]
    fn trailing_bytes_left_alone() {
        let mut bytes = enc(Command::Clear);
        bytes.extend(enc(Command::Ping));
        let (m, used) = decode(&bytes, REF).unwrap();
        assert_eq!(m, Command::Clear.into());
        assert_eq!(decode(&bytes[used..], REF).unwrap().0, Command::Ping.into());
    }

    #[test]
    fn status_reply_layout() {
        let mut shadow = Bitmap::new(REF);
        shadow.set(0, 0, true);
        let s = Response::Status(StatusReport {
            state_code: 2,
            set_pulses: 0x0102,
            reset_pulses: 0x0304,
            shadow,
        });
        let bytes = enc(s.clone());
        assert_eq!(&bytes[..8], &[0xA5, 0x83, 37, 2, 0x01, 0x02, 0x03, 0x04]);
        assert_eq!(bytes[8], 0x80);
        assert_eq!(decode(&bytes, REF).unwrap().0, s.into());
    }

    #[test]
    fn stream_resyncs_past_junk() {
        let mut d = StreamDecoder::new(REF);
        d.push(&[0x00, 0x13, 0xA5, 0x04, 0x00]);
        d.push(&enc(Command::Ping));
        let mut got = Vec::new();
        while let Some(r) = d.next_message() {
            got.push(r);
        }
        assert_eq!(got.last(), Some(&Ok(Command::Ping.into())));
        assert_eq!(d.pending(), 0);
    }

    #[test]
    fn stalled_length_abandoned() {
        let mut d = StreamDecoder::new(REF);
        // Corrupted header claims a 200-byte payload.
        d.push(&[0xA5, 0x01, 200]);
        d.push(&enc(Command::Clear));
        let mut last = None;
        while let Some(r) = d.next_message() {
            last = Some(r);
        }
        assert_eq!(last, Some(Ok(Command::Clear.into())));
    }

    #[test]
    fn partial_frame_waits() {
        let bytes = enc(Command::Show(Bitmap::filled(REF)));
        let mut d = StreamDecoder::new(REF);
        d.push(&bytes[..10]);
        assert_eq!(d.next_message(), None);
        d.push(&bytes[10..]);
        assert_eq!(
            d.next_message(),
            Some(Ok(Command::Show(Bitmap::filled(REF)).into()))
        );
    }

    #[test]
    fn loopback_is_full_duplex() {
        let (mut host, mut dev) = loopback();
        host.write_all(&[1, 2, 3]).unwrap();
        dev.write_all(&[9]).unwrap();
        let mut buf = [0u8; 8];
        assert_eq!(dev.read(&mut buf).unwrap(), 3);
        assert_eq!(&buf[..3], &[1, 2, 3]);
        assert_eq!(host.available(), 1);
        assert_eq!(host.read(&mut buf).unwrap(), 1);
        assert_eq!(buf[0], 9);
        assert_eq!(host.read(&mut buf).unwrap(), 0);
    }
}
