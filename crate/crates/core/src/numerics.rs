//! Numeric kernels shared by the transceiver and the estimator: the
//! unscaled DFT pair, Hermitian matrices with a dominant-eigenpair solver,
//! and circular statistics on phase samples.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;
const POWER_EIG_TOL: f64 = 1e-13;
const POWER_RESIDUAL_TOL: f64 = 1e-13;
const MEAN_RESULTANT_MIN: f64 = 1e-12;

/// Forward M-point DFT, `X_k = sum_n x_n exp(-j 2 pi k n / M)`, no scaling.
/// Inputs shorter than `m` are zero-padded.
pub fn dft(x: &[Complex64], m: usize) -> Result<Vec<Complex64>> {
    if m == 0 || x.len() > m {
        return Err(Error::Dimension {
            expected: m,
            got: x.len(),
        });
    }
    let mut buf = x.to_vec();
    buf.resize(m, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    Ok(buf)
}

/// Inverse of [`dft`]: `x_n = (1/M) sum_k X_k exp(j 2 pi k n / M)`.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let m = x.len();
    if m == 0 {
        return Vec::new();
    }
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Squared Euclidean norm.
pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// Neumaier-compensated sum of complex terms.
pub fn compensated_sum<I: IntoIterator<Item = Complex64>>(terms: I) -> Complex64 {
    fn add(sum: &mut f64, comp: &mut f64, x: f64) {
        let t = *sum + x;
        if sum.abs() >= x.abs() {
            *comp += (*sum - t) + x;
        } else {
            *comp += (x - t) + *sum;
        }
        *sum = t;
    }
    let (mut re, mut re_c, mut im, mut im_c) = (0.0, 0.0, 0.0, 0.0);
    for z in terms {
        add(&mut re, &mut re_c, z.re);
        add(&mut im, &mut im_c, z.im);
    }
    Complex64::new(re + re_c, im + im_c)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Weighted circular mean `arg(sum_i w_i exp(j theta_i))` in `(-pi, pi]`.
pub fn circular_mean(angles: &[f64], weights: &[f64]) -> Result<f64> {
    if angles.len() != weights.len() {
        return Err(Error::Dimension {
            expected: angles.len(),
            got: weights.len(),
        });
    }
    let mut acc = CircularAccumulator::default();
    for (&theta, &w) in angles.iter().zip(weights) {
        acc.push(theta, w);
    }
    acc.mean()
}

/// Streaming form of [`circular_mean`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CircularAccumulator {
    resultant: Complex64,
    total: f64,
}

impl CircularAccumulator {
    pub fn push(&mut self, theta: f64, weight: f64) {
        self.resultant += Complex64::from_polar(weight, theta);
        self.total += weight;
    }

    pub fn merge(&mut self, other: &CircularAccumulator) {
        self.resultant += other.resultant;
        self.total += other.total;
    }

    pub fn resultant(&self) -> Complex64 {
        self.resultant
    }

    pub fn mean(&self) -> Result<f64> {
        // Judge cancellation relative to the total weight so the guard is scale-free.
        let magnitude = if self.total > 0.0 {
            self.resultant.norm() / self.total
        } else {
            0.0
        };
        if magnitude < MEAN_RESULTANT_MIN {
            return Err(Error::UndefinedMean {
                resultant: magnitude,
            });
        }
        Ok(canonical_angle(self.resultant.arg()))
    }
}

/// Maps `-pi` onto `pi` so results lie in the half-open `(-pi, pi]`.
pub(crate) fn canonical_angle(theta: f64) -> f64 {
    if theta <= -PI {
        PI
    } else {
        theta
    }
}

/// Dense M x M complex matrix that is conjugate-symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Builds a matrix from row-major entries, validating Hermitian symmetry
    /// relative to the largest entry magnitude.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: data.len(),
            });
        }
        let m = Self { dim, data };
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        let asymmetry = m.max_asymmetry();
        if asymmetry > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { asymmetry });
        }
        Ok(m)
    }

    /// Builds the upper triangle from `f` and mirrors it; diagonal entries
    /// keep only their real part.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(f(i, i).re, 0.0);
            for j in i + 1..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v.conj();
            }
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_upper(dim, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm_sqr(&self.data).sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Element-wise difference `self - other`.
    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Smallest eigenvalue via a full symmetric decomposition.
    pub fn smallest_eigenvalue(&self) -> f64 {
        self.to_dmatrix()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `min_i (a_ii - sum_{j != i} |a_ij|)`, a lower bound on the spectrum.
    pub fn gershgorin_lower_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let radius: f64 = self
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v.norm())
                    .sum();
                self.get(i, i).re - radius
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.data[i * self.dim + i] += shift;
        }
        out
    }
}

/// Largest (algebraic) eigenvalue and its unit-norm eigenvector.
///
/// Power iteration with Rayleigh-quotient eigenvalue estimates. The plain
/// iteration finds the eigenvalue of largest magnitude; if that one is
/// negative, or the iteration stalls between eigenvalues of similar
/// magnitude, the matrix is shifted by its Gershgorin lower bound so the
/// spectrum is non-negative and iterated again. The eigenvector is rotated
/// so its largest-magnitude entry is real-positive.
pub fn dominant_eigpair(a: &HermitianMatrix) -> Result<(f64, Vec<Complex64>)> {
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        let mut v = vec![Complex64::new(0.0, 0.0); a.dim()];
        v[0] = Complex64::new(1.0, 0.0);
        return Ok((0.0, v));
    }
    let (lambda, v) = match power_iteration(a, scale) {
        Ok((lambda, v)) if lambda >= 0.0 => (lambda, v),
        _ => {
            let shift = (-a.gershgorin_lower_bound()).max(0.0);
            let (mu, v) = power_iteration(&a.shifted(shift), scale + shift)?;
            (mu - shift, v)
        }
    };
    Ok((lambda, canonical_phase(v)))
}

fn power_iteration(a: &HermitianMatrix, scale: f64) -> Result<(f64, Vec<Complex64>)> {
    let n = a.dim();
    let mut v = start_vector(a);
    let mut lambda = rayleigh(a, &v);
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        let w = a.mul_vec(&v);
        let norm = norm_sqr(&w).sqrt();
        if norm == 0.0 {
            // v lies in the null space; the start vector was orthogonal to
            // everything else, so zero is the best available answer.
            return Ok((0.0, v));
        }
        v = w.iter().map(|x| x / norm).collect();
        let next = rayleigh(a, &v);
        let av = a.mul_vec(&v);
        residual = (0..n)
            .map(|i| (av[i] - v[i] * next).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let settled = (next - lambda).abs() <= POWER_EIG_TOL * next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        if settled && residual <= POWER_RESIDUAL_TOL * scale {
            return Ok((lambda, v));
        }
    }
    Err(Error::Convergence {
        iterations: POWER_MAX_ITER,
        residual,
    })
}

fn rayleigh(a: &HermitianMatrix, v: &[Complex64]) -> f64 {
    let av = a.mul_vec(v);
    v.iter()
        .zip(&av)
        .map(|(x, y)| (x.conj() * y).re)
        .sum::<f64>()
        / norm_sqr(v)
}

/// Largest column of `a` plus a fixed dense perturbation, normalized.
fn start_vector(a: &HermitianMatrix) -> Vec<Complex64> {
    let n = a.dim();
    let best = (0..n)
        .max_by(|&i, &j| {
            let ci: f64 = (0..n).map(|r| a.get(r, i).norm_sqr()).sum();
            let cj: f64 = (0..n).map(|r| a.get(r, j).norm_sqr()).sum();
            ci.total_cmp(&cj)
        })
        .unwrap_or(0);
    let col: Vec<Complex64> = (0..n).map(|r| a.get(r, best)).collect();
    let col_norm = norm_sqr(&col).sqrt().max(f64::MIN_POSITIVE);
    let jitter = 0.1 / (n as f64).sqrt();
    let v: Vec<Complex64> = col
        .iter()
        .enumerate()
        .map(|(k, c)| c / col_norm + Complex64::from_polar(jitter, 0.7 + 1.3 * k as f64))
        .collect();
    let norm = norm_sqr(&v).sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn canonical_phase(v: Vec<Complex64>) -> Vec<Complex64> {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() == 0.0 {
        return v;
    }
    let rot = pivot.conj() / pivot.norm();
    v.into_iter().map(|x| x * rot).collect()
}
