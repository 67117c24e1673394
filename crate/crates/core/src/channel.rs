//! Frequency-selective channel realizations and AWGN.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constellation::SourceStats;
use crate::error::{Error, Result};
use crate::numerics::{dft, norm_sqr};
use crate::precoder::Precoder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdpKind {
    /// `E|h_l|^2 = exp(-l / 10)`.
    Exponential,
    /// `E|h_l|^2 = 1`.
    Uniform,
}

impl PdpKind {
    pub fn label(self) -> &'static str {
        match self {
            PdpKind::Exponential => "exp",
            PdpKind::Uniform => "uniform",
        }
    }
}

/// Power delay profile of an order-`order` channel (`order + 1` taps).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pdp {
    pub kind: PdpKind,
    pub order: usize,
}

impl Pdp {
    pub fn new(kind: PdpKind, order: usize) -> Self {
        Self { kind, order }
    }

    pub fn taps(&self) -> usize {
        self.order + 1
    }

    /// Expected tap powers.
    pub fn powers(&self) -> Vec<f64> {
        (0..self.taps())
            .map(|l| match self.kind {
                PdpKind::Exponential => (-(l as f64) / 10.0).exp(),
                PdpKind::Uniform => 1.0,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Tap magnitudes fixed at `sqrt(PDP)`, phases uniform on `[0, 2 pi)`.
    FixedMagnitude,
    /// Circularly-symmetric complex Gaussian taps with variance `PDP`.
    Rayleigh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<Complex64>,
    pub response: Vec<Complex64>,
    /// Factor the taps were multiplied by (1 when unnormalized).
    pub scale: f64,
}

impl ChannelRealization {
    pub fn from_taps(taps: Vec<Complex64>, m: usize, scale: f64) -> Result<Self> {
        let response = freq_response(&taps, m)?;
        Ok(Self {
            taps,
            response,
            scale,
        })
    }
}

/// Draws one channel. With `normalize`, fixed-magnitude taps are scaled to
/// unit energy exactly and Rayleigh taps to unit expected energy.
pub fn sample_channel<R: Rng + ?Sized>(
    pdp: &Pdp,
    mode: ChannelMode,
    normalize: bool,
    m: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let powers = pdp.powers();
    let mut taps: Vec<Complex64> = match mode {
        ChannelMode::FixedMagnitude => powers
            .iter()
            .map(|&pw| Complex64::from_polar(pw.sqrt(), rng.random_range(0.0..2.0 * PI)))
            .collect(),
        ChannelMode::Rayleigh => powers
            .iter()
            .map(|&pw| complex_gaussian(rng) * pw.sqrt())
            .collect(),
    };
    let scale = if normalize {
        // Same expected total for both modes; the realized one only for
        // fixed magnitudes.
        1.0 / powers.iter().sum::<f64>().sqrt()
    } else {
        1.0
    };
    taps.iter_mut().for_each(|h| *h *= scale);
    ChannelRealization::from_taps(taps, m, scale)
}

/// M-point frequency response of zero-padded taps.
pub fn freq_response(h: &[Complex64], m: usize) -> Result<Vec<Complex64>> {
    if h.len() > m {
        return Err(Error::CpInsufficient {
            taps: h.len(),
            supported: m,
        });
    }
    dft(h, m)
}

/// Per-subcarrier complex noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_n2: f64,
}

impl NoiseSpec {
    pub fn new(sigma_n2: f64) -> Result<Self> {
        if !sigma_n2.is_finite() || sigma_n2 < 0.0 {
            return Err(Error::Config(format!(
                "noise variance {sigma_n2} must be finite and >= 0"
            )));
        }
        Ok(Self { sigma_n2 })
    }

    pub fn noiseless() -> Self {
        Self { sigma_n2: 0.0 }
    }

    /// Noise variance giving `snr_db` relative to the average precoded
    /// transmit power of a white source, `sigma_d2 * tr(P) / M`.
    pub fn for_snr(snr_db: f64, pre: &Precoder, sigma_d2: f64) -> Self {
        Self::for_snr_with_source(snr_db, pre, &SourceStats::white(sigma_d2))
    }

    /// As [`Self::for_snr`] but for an arbitrary source; the reference
    /// power is `tr(W R_d W^T) / M`.
    pub fn for_snr_with_source(snr_db: f64, pre: &Precoder, source: &SourceStats) -> Self {
        Self {
            sigma_n2: pre.transmit_power(source) / 10f64.powf(snr_db / 10.0),
        }
    }
}

/// Unit-variance circularly-symmetric complex Gaussian sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Adds i.i.d. CN(0, sigma_n2) noise in place.
pub fn add_awgn_in_place<R: Rng + ?Sized>(y: &mut [Complex64], spec: NoiseSpec, rng: &mut R) {
    if spec.sigma_n2 == 0.0 {
        return;
    }
    let sd = spec.sigma_n2.sqrt();
    y.iter_mut().for_each(|v| *v += complex_gaussian(rng) * sd);
}

pub fn add_awgn<R: Rng + ?Sized>(y: &[Complex64], spec: NoiseSpec, rng: &mut R) -> Vec<Complex64> {
    let mut out = y.to_vec();
    add_awgn_in_place(&mut out, spec, rng);
    out
}

/// Channel energy `sum |h_l|^2`.
pub fn tap_energy(h: &[Complex64]) -> f64 {
    norm_sqr(h)
}
