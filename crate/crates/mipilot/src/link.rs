//! Frame transports and the actuator sinks on their far end.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use mipilot_core::comlink::{decode, elevon_step, CommandFrame, ElevonState, QuadCommandLog, FRAME_LEN};
use mipilot_core::Result;

/// Drops frames whose sequence number is not ahead of the last one passed
/// (modulo 2¹⁶, looking at most half the ring ahead).
#[derive(Clone, Debug, Default)]
pub struct FreshnessGate {
    last: Option<u16>,
    pub dropped: u64,
}

impl FreshnessGate {
    pub fn admit(&mut self, seq: u16) -> bool {
        let fresh = self.last.is_none_or(|l| (1..0x8000).contains(&seq.wrapping_sub(l)));
        if fresh {
            self.last = Some(seq);
        } else {
            self.dropped += 1;
        }
        fresh
    }
}

/// Something that consumes frames and reports its new state as a log line.
pub trait Sink {
    /// `Ok(None)` when the frame was accepted but changed nothing worth logging.
    fn deliver(&mut self, frame: &CommandFrame) -> Result<Option<String>>;
}

#[derive(Clone, Debug, Default)]
pub struct ElevonSink {
    pub state: ElevonState,
}

fn deg(v: f64) -> f64 {
    // avoid printing -0
    v + 0.0
}

impl Sink for ElevonSink {
    fn deliver(&mut self, frame: &CommandFrame) -> Result<Option<String>> {
        self.state = elevon_step(self.state, frame)?;
        Ok(Some(format!(
            "elevon L={} R={}",
            deg(self.state.left_deg),
            deg(self.state.right_deg)
        )))
    }
}

#[derive(Clone, Debug, Default)]
pub struct QuadSink {
    pub log: QuadCommandLog,
    clock: u64,
}

impl Sink for QuadSink {
    fn deliver(&mut self, frame: &CommandFrame) -> Result<Option<String>> {
        self.clock += 1;
        Ok(self
            .log
            .ingest(frame, self.clock)
            .then(|| format!("quad seq={} cmd={}", frame.seq, frame.cmd)))
    }
}

/// Sending half of a one-frame-per-datagram link.
pub struct UdpSender {
    socket: UdpSocket,
    peer: SocketAddr,
}

impl UdpSender {
    pub fn connect(peer: impl ToSocketAddrs) -> io::Result<Self> {
        let peer = peer
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no address"))?;
        let bind: SocketAddr = if peer.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().unwrap();
        Ok(Self {
            socket: UdpSocket::bind(bind)?,
            peer,
        })
    }

    pub fn send(&self, frame: &[u8; FRAME_LEN]) -> io::Result<()> {
        self.socket.send_to(frame, self.peer).map(|_| ())
    }
}

/// Receiving half. Malformed and stale datagrams are counted and skipped.
pub struct UdpReceiver {
    socket: UdpSocket,
    gate: FreshnessGate,
    pub malformed: u64,
}

impl UdpReceiver {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(Self {
            socket: UdpSocket::bind(addr)?,
            gate: FreshnessGate::default(),
            malformed: 0,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn stale(&self) -> u64 {
        self.gate.dropped
    }

    /// Next fresh frame, or `None` once `timeout` passes without one.
    pub fn recv(&mut self, timeout: Duration) -> io::Result<Option<CommandFrame>> {
        self.socket.set_read_timeout(Some(timeout))?;
        let mut buf = [0u8; 64];
        loop {
            let n = match self.socket.recv(&mut buf) {
                Ok(n) => n,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => return Ok(None),
                Err(e) => return Err(e),
            };
            match decode(&buf[..n]) {
                Ok(f) if self.gate.admit(f.seq) => return Ok(Some(f)),
                Ok(_) => {}
                Err(_) => self.malformed += 1,
            }
        }
    }
}
