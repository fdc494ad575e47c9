//! Float functions that `core` does not provide.

pub(crate) use libm::{cos, log, pow, sin, sqrt, tan};

pub(crate) fn powi(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}
