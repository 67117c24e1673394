//! Split PAM constellation: the positive half of a Q-ary PAM alphabet goes
//! on even subcarriers, the negative half on odd ones. Every frame then
//! carries the known 0/pi phase pattern the blind phase estimator relies on.
//!
//! Each subset is the (Q/2)-ary PAM alphabet translated by +Q/2 or -Q/2
//! levels, so both subsets share one Gray labeling by position: position 0
//! is the most negative level of the subset (`+1` on the right, `-(Q-1)` on
//! the left).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConstellation {
    order: u32,
    right: Vec<f64>,
    left: Vec<f64>,
    sigma_d2: f64,
}

impl SplitConstellation {
    /// Builds the split of a Q-ary PAM alphabet with odd-integer levels.
    ///
    /// `Q = 2` is accepted for testing; it carries no payload bits.
    pub fn new(order: u32) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::InvalidOrder(order));
        }
        let half = order as usize / 2;
        let right: Vec<f64> = (0..half).map(|i| (2 * i + 1) as f64).collect();
        let left: Vec<f64> = (0..half)
            .map(|i| (2 * i + 1) as f64 - order as f64)
            .collect();
        let sigma_d2 = right.iter().map(|x| x * x).sum::<f64>() / half as f64;
        Ok(Self {
            order,
            right,
            left,
            sigma_d2,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Levels for even subcarriers, ascending.
    pub fn right_subset(&self) -> &[f64] {
        &self.right
    }

    /// Levels for odd subcarriers, ascending.
    pub fn left_subset(&self) -> &[f64] {
        &self.left
    }

    /// Average symbol energy, identical to that of the unsplit alphabet.
    pub fn sigma_d2(&self) -> f64 {
        self.sigma_d2
    }

    /// Mean magnitude of a subset symbol, `Q/2`. Even subcarriers have mean
    /// `+Q/2`, odd ones `-Q/2`.
    pub fn mean_magnitude(&self) -> f64 {
        self.right.iter().sum::<f64>() / self.right.len() as f64
    }

    /// Payload bits per subcarrier, `log2(Q) - 1`.
    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize - 1
    }

    fn subset(&self, subcarrier: usize) -> &[f64] {
        if subcarrier.is_multiple_of(2) {
            &self.right
        } else {
            &self.left
        }
    }

    /// Maps `M * (log2(Q) - 1)` bits onto a parity-constrained frame.
    pub fn map_bits(&self, bits: &[bool], m: usize) -> Result<Vec<Complex64>> {
        check_frame(m)?;
        let k = self.bits_per_symbol();
        if bits.len() != m * k {
            return Err(Error::BitLength {
                expected: m * k,
                got: bits.len(),
            });
        }
        Ok((0..m)
            .map(|i| {
                let label = bits[i * k..(i + 1) * k]
                    .iter()
                    .fold(0usize, |acc, &b| (acc << 1) | b as usize);
                Complex64::new(self.subset(i)[gray_decode(label)], 0.0)
            })
            .collect())
    }

    /// Draws a uniformly random frame.
    pub fn random_frame<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Vec<Complex64>> {
        check_frame(m)?;
        // Uniform labels and uniform positions coincide under the Gray map.
        Ok((0..m)
            .map(|i| {
                let subset = self.subset(i);
                Complex64::new(subset[rng.random_range(0..subset.len())], 0.0)
            })
            .collect())
    }

    /// Nearest-level decisions, returned as subset positions.
    pub fn decide(&self, d_hat: &[Complex64]) -> Vec<usize> {
        d_hat
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let subset = self.subset(i);
                // Levels are spaced by 2 starting at subset[0].
                let pos = ((v.re - subset[0]) / 2.0).round();
                pos.clamp(0.0, (subset.len() - 1) as f64) as usize
            })
            .collect()
    }

    /// Slices each subcarrier to its subset and inverts the Gray map.
    pub fn demap(&self, d_hat: &[Complex64]) -> Vec<bool> {
        let k = self.bits_per_symbol();
        self.decide(d_hat)
            .into_iter()
            .flat_map(|pos| {
                let label = gray_encode(pos);
                (0..k).rev().map(move |b| (label >> b) & 1 == 1)
            })
            .collect()
    }

    /// Subset position of an exact level on subcarrier `i`, if it belongs there.
    pub fn position_of(&self, i: usize, level: f64) -> Option<usize> {
        self.subset(i).iter().position(|&x| x == level)
    }
}

/// First- and second-order statistics of the transmitted symbols.
///
/// Subcarrier `i` has mean `(-1)^i * mean_magnitude` and mean energy
/// `energy`, symbols being independent across subcarriers. A zero mean
/// gives the white source `R_d = energy * I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceStats {
    pub energy: f64,
    pub mean_magnitude: f64,
}

impl SourceStats {
    pub fn white(energy: f64) -> Self {
        Self {
            energy,
            mean_magnitude: 0.0,
        }
    }

    /// Per-subcarrier variance, `energy - mean^2`.
    pub fn variance(&self) -> f64 {
        self.energy - self.mean_magnitude * self.mean_magnitude
    }
}

impl From<&SplitConstellation> for SourceStats {
    fn from(c: &SplitConstellation) -> Self {
        Self {
            energy: c.sigma_d2(),
            mean_magnitude: c.mean_magnitude(),
        }
    }
}

fn gray_encode(n: usize) -> usize {
    n ^ (n >> 1)
}

fn gray_decode(mut g: usize) -> usize {
    let mut n = 0;
    while g != 0 {
        n ^= g;
        g >>= 1;
    }
    n
}

pub(crate) fn check_frame(m: usize) -> Result<()> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::InvalidFrame(m));
    }
    Ok(())
}

/// The alternating `[0, pi, 0, pi, ...]` phase pattern of a split frame.
pub fn phase_pattern(m: usize) -> Result<Vec<f64>> {
    check_frame(m)?;
    Ok((0..m).map(|i| if i % 2 == 0 { 0.0 } else { PI }).collect())
}
