//! Butterworth band-pass filters as cascaded second-order sections.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::math::{pow, tan};
use crate::signal::EegTrial;
use crate::{Error, Result};

/// Pass band and total filter order (poles of the band-pass, so twice the
/// order of the low-pass prototype).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub filter_order: usize,
}

impl Default for BandSpec {
    /// 8-30 Hz, order 4: alpha plus beta, the sensorimotor rhythms.
    fn default() -> Self {
        Self {
            low_hz: 8.0,
            high_hz: 30.0,
            filter_order: 4,
        }
    }
}

impl BandSpec {
    pub fn new(low_hz: f64, high_hz: f64, filter_order: usize) -> Result<Self> {
        if !(low_hz > 0.0 && low_hz.is_finite()) {
            return Err(Error::InvalidBand("low edge must be positive"));
        }
        if !(high_hz > low_hz && high_hz.is_finite()) {
            return Err(Error::InvalidBand("high edge must exceed low edge"));
        }
        if filter_order == 0 || !filter_order.is_multiple_of(2) {
            return Err(Error::InvalidBand("order must be even and positive"));
        }
        Ok(Self {
            low_hz,
            high_hz,
            filter_order,
        })
    }

    /// Checks the band against a sample rate.
    pub fn validate_for(&self, sample_rate: f64) -> Result<()> {
        Self::new(self.low_hz, self.high_hz, self.filter_order)?;
        let nyquist_hz = sample_rate / 2.0;
        if self.high_hz >= nyquist_hz {
            return Err(Error::BandOutOfRange {
                high_hz: self.high_hz,
                nyquist_hz,
            });
        }
        Ok(())
    }
}

/// One second-order section, `a0` normalized to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        let num = self.b[0] + zi * self.b[1] + zi2 * self.b[2];
        let den = 1.0 + zi * self.a[0] + zi2 * self.a[1];
        num / den
    }
}

/// Designs a digital Butterworth band-pass by the bilinear transform, with
/// band edges prewarped. Unity gain at the geometric centre frequency.
pub fn design_bandpass(band: &BandSpec, sample_rate: f64) -> Result<Vec<Biquad>> {
    band.validate_for(sample_rate)?;
    let n = band.filter_order / 2;
    let wl = tan(PI * band.low_hz / sample_rate);
    let wh = tan(PI * band.high_hz / sample_rate);
    let bw = wh - wl;
    let w0_sq = wl * wh;

    let mut analog_pairs: Vec<(Complex64, Complex64)> = Vec::with_capacity(n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta);
        if p.im < -1e-12 {
            continue;
        }
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0_sq).sqrt();
        let s1 = (pb + disc) * 0.5;
        let s2 = (pb - disc) * 0.5;
        if p.im.abs() <= 1e-12 {
            analog_pairs.push((s1, s2));
        } else {
            analog_pairs.push((s1, s1.conj()));
            analog_pairs.push((s2, s2.conj()));
        }
    }

    let bilinear = |s: Complex64| (1.0 + s) / (1.0 - s);
    let mut sections: Vec<Biquad> = analog_pairs
        .into_iter()
        .map(|(sa, sb)| {
            let za = bilinear(sa);
            let zb = bilinear(sb);
            Biquad {
                b: [1.0, 0.0, -1.0],
                a: [-(za + zb).re, (za * zb).re],
            }
        })
        .collect();

    let center = Complex64::from_polar(1.0, 2.0 * libm::atan(libm::sqrt(w0_sq)));
    let total = sections
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(center));
    let per_section = pow(1.0 / total.norm(), 1.0 / sections.len() as f64);
    for s in &mut sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }
    Ok(sections)
}

/// Stateful cascade of biquads in transposed direct form II.
#[derive(Clone, Debug)]
pub struct SosFilter {
    sections: Vec<Biquad>,
    state: Vec<[f64; 2]>,
}

impl SosFilter {
    pub fn new(sections: Vec<Biquad>) -> Self {
        let state = vec![[0.0; 2]; sections.len()];
        Self { sections, state }
    }

    pub fn bandpass(band: &BandSpec, sample_rate: f64) -> Result<Self> {
        Ok(Self::new(design_bandpass(band, sample_rate)?))
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = [0.0; 2]);
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let mut v = x;
        for (s, z) in self.sections.iter().zip(self.state.iter_mut()) {
            let y = s.b[0] * v + z[0];
            z[0] = s.b[1] * v - s.a[0] * y + z[1];
            z[1] = s.b[2] * v - s.a[1] * y;
            v = y;
        }
        v
    }

    pub fn process_slice(&mut self, input: &[f64], output: &mut [f64]) {
        for (o, &x) in output.iter_mut().zip(input) {
            *o = self.process(x);
        }
    }

    /// Magnitude response at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * freq_hz / sample_rate);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z))
            .norm()
    }

    /// Sum of the squared impulse response over `len` samples: the output
    /// variance for unit-variance white input.
    pub fn noise_power_gain(&self, len: usize) -> f64 {
        let mut f = Self::new(self.sections.clone());
        let mut acc = 0.0;
        for t in 0..len {
            let h = f.process(if t == 0 { 1.0 } else { 0.0 });
            acc += h * h;
        }
        acc
    }
}

/// Band-pass every channel. `zero_phase` runs the cascade forward and then
/// backward (squared magnitude, no phase shift); otherwise the filter is
/// causal, as used in streaming.
pub fn bandpass(trial: &EegTrial, band: &BandSpec, zero_phase: bool) -> Result<EegTrial> {
    let sections = design_bandpass(band, trial.sample_rate())?;
    let mut filter = SosFilter::new(sections);
    Ok(trial.map_channels(|x, y| {
        filter.reset();
        filter.process_slice(x, y);
        if zero_phase {
            filter.reset();
            y.reverse();
            for v in y.iter_mut() {
                *v = filter.process(*v);
            }
            y.reverse();
        }
    }))
}
