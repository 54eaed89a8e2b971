//! Length-prefixed framing for the loopback transport.
//!
//! Frame layout: 4-byte big-endian length of everything after it, a 1-byte
//! message type, then the payload.
//!
//! | type | name       | payload                                              |
//! |------|------------|------------------------------------------------------|
//! | 0x01 | PROBE      | u32 BE echo size `n`, then `n` arbitrary bytes       |
//! | 0x02 | PROBE_ACK  | empty                                                |
//! | 0x03 | ACTIVATION | u8 stage tag, u32 BE layer index, activation bytes   |
//! | 0x04 | RESULT     | u64 BE latency in nanoseconds                        |
//!
//! A receiver that sees an unknown type drops the connection.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::thread::{self, JoinHandle};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::link::RttTransport;

pub const TYPE_PROBE: u8 = 0x01;
pub const TYPE_PROBE_ACK: u8 = 0x02;
pub const TYPE_ACTIVATION: u8 = 0x03;
pub const TYPE_RESULT: u8 = 0x04;

/// Upper bound on the length prefix a receiver will accept.
pub const MAX_FRAME_LEN: u32 = 256 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Probe { filler: Vec<u8> },
    ProbeAck,
    Activation { stage: u8, layer: u32, data: Vec<u8> },
    Result { latency_ns: u64 },
}

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("malformed {kind} frame: {reason}")]
    Malformed { kind: &'static str, reason: String },
    #[error("frame length {0} exceeds limit")]
    TooLarge(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<WireError> for Error {
    fn from(e: WireError) -> Self {
        Error::Wire(e.to_string())
    }
}

impl Frame {
    pub fn message_type(&self) -> u8 {
        match self {
            Frame::Probe { .. } => TYPE_PROBE,
            Frame::ProbeAck => TYPE_PROBE_ACK,
            Frame::Activation { .. } => TYPE_ACTIVATION,
            Frame::Result { .. } => TYPE_RESULT,
        }
    }

    fn payload_len(&self) -> usize {
        match self {
            Frame::Probe { filler } => 4 + filler.len(),
            Frame::ProbeAck => 0,
            Frame::Activation { data, .. } => 5 + data.len(),
            Frame::Result { .. } => 8,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let body = 1 + self.payload_len();
        let mut out = Vec::with_capacity(4 + body);
        out.extend_from_slice(&(body as u32).to_be_bytes());
        out.push(self.message_type());
        match self {
            Frame::Probe { filler } => {
                out.extend_from_slice(&(filler.len() as u32).to_be_bytes());
                out.extend_from_slice(filler);
            }
            Frame::ProbeAck => {}
            Frame::Activation { stage, layer, data } => {
                out.push(*stage);
                out.extend_from_slice(&layer.to_be_bytes());
                out.extend_from_slice(data);
            }
            Frame::Result { latency_ns } => out.extend_from_slice(&latency_ns.to_be_bytes()),
        }
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.encode())?;
        w.flush()
    }

    /// Decodes one frame body (type byte plus payload, without the length prefix).
    pub fn decode_body(body: &[u8]) -> Result<Frame, WireError> {
        let (&ty, payload) = body.split_first().ok_or(WireError::Malformed {
            kind: "empty",
            reason: "missing type byte".into(),
        })?;
        let malformed = |kind, reason: String| WireError::Malformed { kind, reason };
        match ty {
            TYPE_PROBE => {
                if payload.len() < 4 {
                    return Err(malformed("PROBE", "missing echo size".into()));
                }
                let n = u32::from_be_bytes(payload[..4].try_into().unwrap()) as usize;
                if payload.len() - 4 != n {
                    return Err(malformed(
                        "PROBE",
                        format!("declared {n} bytes, carried {}", payload.len() - 4),
                    ));
                }
                Ok(Frame::Probe {
                    filler: payload[4..].to_vec(),
                })
            }
            TYPE_PROBE_ACK => {
                if !payload.is_empty() {
                    return Err(malformed("PROBE_ACK", "payload must be empty".into()));
                }
                Ok(Frame::ProbeAck)
            }
            TYPE_ACTIVATION => {
                if payload.len() < 5 {
                    return Err(malformed("ACTIVATION", "header shorter than 5 bytes".into()));
                }
                Ok(Frame::Activation {
                    stage: payload[0],
                    layer: u32::from_be_bytes(payload[1..5].try_into().unwrap()),
                    data: payload[5..].to_vec(),
                })
            }
            TYPE_RESULT => {
                let bytes: [u8; 8] = payload
                    .try_into()
                    .map_err(|_| malformed("RESULT", format!("expected 8 bytes, got {}", payload.len())))?;
                Ok(Frame::Result {
                    latency_ns: u64::from_be_bytes(bytes),
                })
            }
            other => Err(WireError::UnknownType(other)),
        }
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Frame, WireError> {
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let len = u32::from_be_bytes(len);
        if len > MAX_FRAME_LEN {
            return Err(WireError::TooLarge(len));
        }
        let mut body = vec![0u8; len as usize];
        r.read_exact(&mut body)?;
        Frame::decode_body(&body)
    }
}

/// Echo endpoint: acknowledges probes and answers activations with their
/// receive time.
pub struct LoopbackServer {
    addr: SocketAddr,
    _accept: JoinHandle<()>,
}

impl LoopbackServer {
    pub fn spawn() -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let accept = thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                thread::spawn(move || serve(stream));
            }
        });
        Ok(Self {
            addr,
            _accept: accept,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}

fn serve(mut stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    loop {
        let started = Instant::now();
        let reply = match Frame::read_from(&mut stream) {
            Ok(Frame::Probe { .. }) => Frame::ProbeAck,
            Ok(Frame::Activation { .. }) => Frame::Result {
                latency_ns: started.elapsed().as_nanos() as u64,
            },
            // peers never send acks or results to the receiver
            Ok(_) | Err(_) => {
                let _ = stream.shutdown(Shutdown::Both);
                return;
            }
        };
        if reply.write_to(&mut stream).is_err() {
            return;
        }
    }
}

/// Client side of one loopback hop; round trips are wall-clock timed.
pub struct LoopbackClient {
    name: String,
    stream: TcpStream,
}

impl LoopbackClient {
    pub fn connect(name: impl Into<String>, addr: SocketAddr) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            name: name.into(),
            stream,
        })
    }

    /// Sends a PROBE of `size` filler bytes and waits for the ack.
    pub fn probe(&mut self, size: u64) -> Result<f64> {
        let frame = Frame::Probe {
            filler: vec![0u8; size as usize],
        };
        let started = Instant::now();
        frame.write_to(&mut self.stream).map_err(WireError::from)?;
        match Frame::read_from(&mut self.stream)? {
            Frame::ProbeAck => Ok(started.elapsed().as_secs_f64()),
            other => Err(Error::Wire(format!(
                "expected PROBE_ACK, got type 0x{:02x}",
                other.message_type()
            ))),
        }
    }

    /// Ships an activation and waits for the RESULT, returning wall-clock seconds.
    pub fn send_activation(&mut self, stage: u8, layer: u32, bytes: u64) -> Result<f64> {
        let frame = Frame::Activation {
            stage,
            layer,
            data: vec![0u8; bytes as usize],
        };
        let started = Instant::now();
        frame.write_to(&mut self.stream).map_err(WireError::from)?;
        match Frame::read_from(&mut self.stream)? {
            Frame::Result { .. } => Ok(started.elapsed().as_secs_f64()),
            other => Err(Error::Wire(format!(
                "expected RESULT, got type 0x{:02x}",
                other.message_type()
            ))),
        }
    }

    pub fn stream_mut(&mut self) -> &mut TcpStream {
        &mut self.stream
    }
}

impl RttTransport for LoopbackClient {
    fn hop_id(&self) -> String {
        self.name.clone()
    }

    fn rtt(&mut self, payload: u64) -> Result<f64> {
        self.probe(payload)
    }
}
