//! Non-redundant frequency-domain precoder `W = (1-p) I + p v v^T` with
//! `v_i = (-1)^i`: unit diagonal and `p (-1)^(i+j)` off the diagonal.
//!
//! For a split frame `d` the precoded vector `s = W d` keeps the sign
//! pattern of `d`, since `s_i = (-1)^i ((1-p)|d_i| + p sum_j |d_j|)`.

use num_complex::Complex64;

use crate::constellation::{check_frame, SourceStats};
use crate::error::{Error, Result};
use crate::numerics::HermitianMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    m: usize,
    p: f64,
    w: HermitianMatrix,
    gram: HermitianMatrix,
}

#[inline]
fn sign(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl Precoder {
    pub fn new(m: usize, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidWeight(p));
        }
        check_frame(m)?;
        let w = HermitianMatrix::from_upper(m, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(p * sign(i + j), 0.0)
            }
        });
        let mf = m as f64;
        let off = 2.0 * p * (1.0 - p) + p * p * mf;
        let diag = (1.0 - p) * (1.0 - p) + off;
        let gram = HermitianMatrix::from_upper(m, |i, j| {
            if i == j {
                Complex64::new(diag, 0.0)
            } else {
                Complex64::new(off * sign(i + j), 0.0)
            }
        });
        // The estimator divides element-wise by the Gram matrix.
        assert!(off > 0.0, "Gram off-diagonal magnitude must be positive");
        Ok(Self { m, p, w, gram })
    }

    pub fn subcarriers(&self) -> usize {
        self.m
    }

    pub fn weight(&self) -> f64 {
        self.p
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.w
    }

    /// `P = W W^H`.
    pub fn gram(&self) -> &HermitianMatrix {
        &self.gram
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.m {
            return Err(Error::Dimension {
                expected: self.m,
                got: len,
            });
        }
        Ok(())
    }

    /// `s = W d`, in O(M).
    pub fn apply(&self, d: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(d.len())?;
        let vd: Complex64 = d.iter().enumerate().map(|(i, x)| x * sign(i)).sum();
        let p = self.p;
        Ok(d.iter()
            .enumerate()
            .map(|(i, x)| x * (1.0 - p) + vd * (p * sign(i)))
            .collect())
    }

    /// `W^{-1} s` through the Sherman-Morrison form
    /// `W^{-1} = (I - p / ((1-p) + p M) v v^T) / (1-p)`.
    pub fn invert_apply(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(s.len())?;
        let p = self.p;
        let k = p / ((1.0 - p) + p * self.m as f64);
        let vs: Complex64 = s.iter().enumerate().map(|(i, x)| x * sign(i)).sum();
        Ok(s.iter()
            .enumerate()
            .map(|(i, x)| (x - vs * (k * sign(i))) / (1.0 - p))
            .collect())
    }

    /// Covariance of `s = W d` for the given source, divided by the source
    /// energy: `W R_d W^T / sigma_d^2`. Equals [`Self::gram`] for a white source.
    pub fn effective_gram(&self, source: &SourceStats) -> HermitianMatrix {
        let (a, b) = self.transmit_cov_coeffs(source);
        let diag = (a + b) / source.energy;
        let off = b / source.energy;
        HermitianMatrix::from_upper(self.m, |i, j| {
            if i == j {
                Complex64::new(diag, 0.0)
            } else {
                Complex64::new(off * sign(i + j), 0.0)
            }
        })
    }

    /// Average transmit power per subcarrier, `tr(W R_d W^T) / M`.
    pub fn transmit_power(&self, source: &SourceStats) -> f64 {
        let (a, b) = self.transmit_cov_coeffs(source);
        a + b
    }

    // W R_d W^T = a I + b v v^T. Both W and R_d act as scalars on v and on
    // its orthogonal complement.
    fn transmit_cov_coeffs(&self, source: &SourceStats) -> (f64, f64) {
        let p = self.p;
        let mf = self.m as f64;
        let alpha = source.variance();
        let beta = source.mean_magnitude * source.mean_magnitude;
        let on_v = ((1.0 - p) + p * mf).powi(2) * (alpha + beta * mf);
        let a = (1.0 - p) * (1.0 - p) * alpha;
        (a, (on_v - a) / mf)
    }
}
