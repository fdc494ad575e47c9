use alloc::boxed::Box;
use core::fmt;

use crate::comlink::Command;
use crate::signal::ClassId;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// `tr(E Eᵀ)` is zero or denormal.
    ZeroSignal,
    EmptyClass(ClassId),
    UnknownClass(ClassId),
    /// Upper band edge at or above Nyquist.
    BandOutOfRange {
        high_hz: f64,
        nyquist_hz: f64,
    },
    InvalidBand(&'static str),
    IndexOutOfRange {
        index: usize,
        len: usize,
    },
    DuplicateIndex(usize),
    WindowTooLong {
        length: usize,
        available: usize,
    },
    InvalidWindow(&'static str),
    InvalidTrial(&'static str),
    /// Composite covariance has an eigenvalue below the rank tolerance.
    RankDeficient {
        min_eigenvalue: f64,
        tolerance: f64,
    },
    BadM {
        m: usize,
        channels: usize,
    },
    ChannelMismatch {
        expected: usize,
        found: usize,
    },
    DegenerateVariance,
    DegenerateScatter,
    DimMismatch {
        expected: usize,
        found: usize,
    },
    SingleClass,
    NoConvergence {
        iterations: usize,
    },
    WrongClassCount {
        expected: usize,
        found: usize,
    },
    /// A pairwise machine of a one-vs-one model failed to fit.
    PairFit {
        pair: (ClassId, ClassId),
        source: Box<Error>,
    },
    InvalidSpec(&'static str),
    ModelMismatch(&'static str),
    TrialTooLong {
        seconds: f64,
        max_seconds: f64,
    },
    UnmappedClass(ClassId),
    BadSync(u8),
    BadChecksum {
        expected: u8,
        found: u8,
    },
    BadLength(usize),
    BadCommand(u8),
    UnsupportedCommand(Command),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroSignal => write!(f, "trial has zero signal power"),
            Error::EmptyClass(c) => write!(f, "no trials carry class {c}"),
            Error::UnknownClass(c) => write!(f, "class {c} has no profile"),
            Error::BandOutOfRange { high_hz, nyquist_hz } => {
                write!(f, "band upper edge {high_hz} Hz is not below Nyquist {nyquist_hz} Hz")
            }
            Error::InvalidBand(why) => write!(f, "invalid band: {why}"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "channel index {index} out of range for {len} channels")
            }
            Error::DuplicateIndex(i) => write!(f, "channel index {i} listed twice"),
            Error::WindowTooLong { length, available } => {
                write!(f, "window of {length} samples does not fit in {available} samples")
            }
            Error::InvalidWindow(why) => write!(f, "invalid window: {why}"),
            Error::InvalidTrial(why) => write!(f, "invalid trial: {why}"),
            Error::RankDeficient {
                min_eigenvalue,
                tolerance,
            } => write!(
                f,
                "composite covariance is rank deficient (eigenvalue {min_eigenvalue:e} < {tolerance:e})"
            ),
            Error::BadM { m, channels } => {
                write!(f, "{m} filter pairs need at least {} channels, have {channels}", 2 * m)
            }
            Error::ChannelMismatch { expected, found } => {
                write!(f, "expected {expected} channels, found {found}")
            }
            Error::DegenerateVariance => write!(f, "filtered signal has degenerate variance"),
            Error::DegenerateScatter => write!(f, "within-class scatter is singular"),
            Error::DimMismatch { expected, found } => {
                write!(f, "expected dimension {expected}, found {found}")
            }
            Error::SingleClass => write!(f, "training labels contain a single class"),
            Error::NoConvergence { iterations } => {
                write!(f, "solver did not converge in {iterations} iterations")
            }
            Error::WrongClassCount { expected, found } => {
                write!(f, "expected exactly {expected} classes, found {found}")
            }
            Error::PairFit { pair, source } => {
                write!(f, "machine for classes {} vs {}: {source}", pair.0, pair.1)
            }
            Error::InvalidSpec(why) => write!(f, "invalid spec: {why}"),
            Error::ModelMismatch(why) => write!(f, "model mismatch: {why}"),
            Error::TrialTooLong { seconds, max_seconds } => {
                write!(f, "trial lasts {seconds} s, longer than {max_seconds} s")
            }
            Error::UnmappedClass(c) => write!(f, "class {c} has no command mapping"),
            Error::BadSync(b) => write!(f, "bad sync byte 0x{b:02X}"),
            Error::BadChecksum { expected, found } => write!(
                f,
                "bad checksum: computed 0x{expected:02X}, frame carries 0x{found:02X}"
            ),
            Error::BadLength(n) => write!(f, "frame has {n} bytes, expected 5"),
            Error::BadCommand(b) => write!(f, "unknown command byte 0x{b:02X}"),
            Error::UnsupportedCommand(c) => write!(f, "command {c} is not supported by this sink"),
        }
    }
}

impl core::error::Error for Error {}
