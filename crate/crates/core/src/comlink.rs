//! Command frames and simulated actuator sinks.
//!
//! Frame layout, 5 bytes:
//!
//! | byte | field                               |
//! |------|-------------------------------------|
//! | 0    | sync, `0xA5`                         |
//! | 1    | command                              |
//! | 2..4 | sequence number, little-endian `u16` |
//! | 4    | XOR of bytes 0..4                    |

use alloc::vec::Vec;
use core::fmt;

use crate::signal::ClassId;
use crate::stream::{Decision, DecisionClass};
use crate::{Error, Result};

pub const SYNC: u8 = 0xA5;
pub const FRAME_LEN: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Command {
    Left = 0,
    Right = 1,
    Forward = 2,
    Back = 3,
    Hold = 255,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Left,
        Command::Right,
        Command::Forward,
        Command::Back,
        Command::Hold,
    ];

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Command::Left),
            1 => Ok(Command::Right),
            2 => Ok(Command::Forward),
            3 => Ok(Command::Back),
            255 => Ok(Command::Hold),
            other => Err(Error::BadCommand(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Left => "LEFT",
            Command::Right => "RIGHT",
            Command::Forward => "FORWARD",
            Command::Back => "BACK",
            Command::Hold => "HOLD",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CommandFrame {
    pub cmd: Command,
    pub seq: u16,
}

fn checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

impl CommandFrame {
    pub fn new(cmd: Command, seq: u16) -> Self {
        Self { cmd, seq }
    }

    pub fn to_bytes(self) -> [u8; FRAME_LEN] {
        let [lo, hi] = self.seq.to_le_bytes();
        let mut out = [SYNC, self.cmd as u8, lo, hi, 0];
        out[4] = checksum(&out[..4]);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        decode(bytes)
    }
}

/// Which command each task class drives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandMap {
    entries: Vec<(ClassId, Command)>,
}

impl CommandMap {
    pub fn new(entries: Vec<(ClassId, Command)>) -> Self {
        Self { entries }
    }

    /// Task 1 → LEFT, 2 → RIGHT, 3 → FORWARD, 4 → BACK.
    pub fn four_class() -> Self {
        let [a, b, c, d] = ClassId::all();
        Self::new(alloc::vec![
            (a, Command::Left),
            (b, Command::Right),
            (c, Command::Forward),
            (d, Command::Back),
        ])
    }

    /// Lower class → LEFT, higher → RIGHT.
    pub fn two_class(lower: ClassId, upper: ClassId) -> Self {
        Self::new(alloc::vec![(lower, Command::Left), (upper, Command::Right)])
    }

    pub fn get(&self, class: ClassId) -> Option<Command> {
        self.entries.iter().find(|(c, _)| *c == class).map(|&(_, cmd)| cmd)
    }
}

/// Frame for a decision. Hold decisions always map to [`Command::Hold`].
pub fn encode(decision: &Decision, mapping: &CommandMap, seq: u16) -> Result<[u8; FRAME_LEN]> {
    let cmd = match decision.class {
        DecisionClass::Hold => Command::Hold,
        DecisionClass::Class(c) => mapping.get(c).ok_or(Error::UnmappedClass(c))?,
    };
    Ok(CommandFrame::new(cmd, seq).to_bytes())
}

pub fn decode(bytes: &[u8]) -> Result<CommandFrame> {
    if bytes.len() != FRAME_LEN {
        return Err(Error::BadLength(bytes.len()));
    }
    if bytes[0] != SYNC {
        return Err(Error::BadSync(bytes[0]));
    }
    let expected = checksum(&bytes[..4]);
    if bytes[4] != expected {
        return Err(Error::BadChecksum {
            expected,
            found: bytes[4],
        });
    }
    Ok(CommandFrame {
        cmd: Command::from_byte(bytes[1])?,
        seq: u16::from_le_bytes([bytes[2], bytes[3]]),
    })
}

/// Hands out consecutive sequence numbers, wrapping at 2¹⁶.
#[derive(Clone, Debug, Default)]
pub struct FrameEncoder {
    next_seq: u16,
}

impl FrameEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn encode(&mut self, decision: &Decision, mapping: &CommandMap) -> Result<[u8; FRAME_LEN]> {
        let bytes = encode(decision, mapping, self.next_seq)?;
        self.next_seq = self.next_seq.wrapping_add(1);
        Ok(bytes)
    }
}

pub const ELEVON_STEP_DEG: f64 = 5.0;
pub const ELEVON_LIMIT_DEG: f64 = 30.0;

/// Servo angles of a delta-wing elevon pair.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElevonState {
    pub left_deg: f64,
    pub right_deg: f64,
}

fn clamp_deg(x: f64) -> f64 {
    x.clamp(-ELEVON_LIMIT_DEG, ELEVON_LIMIT_DEG)
}

fn decay(x: f64) -> f64 {
    if x > 0.0 {
        (x - ELEVON_STEP_DEG).max(0.0)
    } else {
        (x + ELEVON_STEP_DEG).min(0.0)
    }
}

/// LEFT raises the left surface and lowers the right by one step, RIGHT the
/// mirror image, HOLD moves both one step back toward neutral.
pub fn elevon_step(state: ElevonState, frame: &CommandFrame) -> Result<ElevonState> {
    let s = match frame.cmd {
        Command::Left => ElevonState {
            left_deg: state.left_deg + ELEVON_STEP_DEG,
            right_deg: state.right_deg - ELEVON_STEP_DEG,
        },
        Command::Right => ElevonState {
            left_deg: state.left_deg - ELEVON_STEP_DEG,
            right_deg: state.right_deg + ELEVON_STEP_DEG,
        },
        Command::Hold => ElevonState {
            left_deg: decay(state.left_deg),
            right_deg: decay(state.right_deg),
        },
        other => return Err(Error::UnsupportedCommand(other)),
    };
    Ok(ElevonState {
        left_deg: clamp_deg(s.left_deg),
        right_deg: clamp_deg(s.right_deg),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadEntry {
    pub seq: u16,
    pub cmd: Command,
    pub received_at: u64,
}

/// Append-only record of commands accepted by the quadrotor sink.
///
/// A frame is accepted when its sequence number is ahead of the last accepted
/// one by 1..=32767 (modulo 2¹⁶); repeats are counted as duplicates and
/// anything behind as stale. Both are dropped.
#[derive(Clone, Debug, Default)]
pub struct QuadCommandLog {
    entries: Vec<QuadEntry>,
    duplicates: u64,
    stale: u64,
}

impl QuadCommandLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[QuadEntry] {
        &self.entries
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    pub fn stale(&self) -> u64 {
        self.stale
    }

    pub fn last_seq(&self) -> Option<u16> {
        self.entries.last().map(|e| e.seq)
    }

    /// Returns whether the frame was appended.
    pub fn ingest(&mut self, frame: &CommandFrame, received_at: u64) -> bool {
        if let Some(last) = self.last_seq() {
            let ahead = frame.seq.wrapping_sub(last);
            if ahead == 0 {
                self.duplicates += 1;
                return false;
            }
            if ahead >= 0x8000 {
                self.stale += 1;
                return false;
            }
        }
        self.entries.push(QuadEntry {
            seq: frame.seq,
            cmd: frame.cmd,
            received_at,
        });
        true
    }
}

/// Functional form of [`QuadCommandLog::ingest`].
pub fn quad_ingest(mut log: QuadCommandLog, frame: &CommandFrame, received_at: u64) -> QuadCommandLog {
    log.ingest(frame, received_at);
    log
}
