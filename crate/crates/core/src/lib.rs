//! Motor-imagery EEG classification core.
//!
//! Common spatial pattern filtering, a two-class Fisher discriminant, a
//! polynomial-kernel SVM with a one-vs-one four-class reduction, a streaming
//! classifier built on incremental windowed variance, a synthetic EEG
//! generator and a five-byte command frame for actuator sinks.
//!
//! The crate is `no_std` (with `alloc`). File formats, threads, clocks and the
//! command-line tool live in the `mipilot` companion crate.

#![cfg_attr(not(test), no_std)]
// `!(x > y)` is how NaN is rejected; index loops mirror the matrix math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

mod error;
mod math;

pub mod comlink;
pub mod csp;
pub mod filter;
pub mod lda;
pub mod linalg;
pub mod signal;
pub mod stream;
pub mod svm;
pub mod synth;
pub mod training;

pub use comlink::{Command, CommandFrame, CommandMap, ElevonState, QuadCommandLog};
pub use csp::{CspFilters, CspModel, FeatureVector};
pub use error::{Error, Result};
pub use filter::{BandSpec, SosFilter};
pub use lda::{FitReport, LdaModel};
pub use linalg::Matrix;
pub use signal::{ClassId, EegTrial, Epoch, SpatialCovariance};
pub use stream::{Decision, DecisionClass, PipelineConfig, StreamClassifier};
pub use svm::{BinarySvmModel, KernelSpec, MultiClassSvmModel};
pub use synth::SynthSpec;
pub use training::{Classifier, Mode, TrainConfig, TrainedModel};
