//! Blind channel estimation from second-order statistics.
//!
//! The received covariance of a precoded frame has the structure
//! `R = sigma_d^2 (H H^H) . G + sigma_n^2 I`, where `.` is the element-wise
//! product and `G` is the precoder Gram matrix (`W W^H` for a white source).
//! Every entry of `G` is nonzero, so dividing it out of the de-noised sample
//! covariance leaves an estimate of the rank-one matrix `H H^H`, whose
//! dominant eigenpair gives `H` up to one unknown phase `phi`.
//!
//! That phase is recovered blindly from the split constellation: even
//! subcarriers carry zero-phase symbols and odd ones phase-pi symbols, so
//! `arg(H_est_i) - arg(y_i) + B_i` estimates `phi` on every subcarrier of
//! every frame.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::SourceStats;
use crate::error::{Error, Result};
use crate::numerics::{
    compensated_sum, dft, dominant_eigpair, idft, wrap_angle, CircularAccumulator, HermitianMatrix,
};
use crate::precoder::Precoder;

const PSD_TOL: f64 = 1e-10;

/// Running sum of `y y^H` over received frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAccumulator {
    dim: usize,
    sum: Vec<Complex64>,
    count: usize,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            sum: vec![Complex64::new(0.0, 0.0); dim * dim],
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn accumulate(&mut self, y: &[Complex64]) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: y.len(),
            });
        }
        // Upper triangle only; finalize mirrors it.
        for i in 0..self.dim {
            let yi = y[i];
            let row = &mut self.sum[i * self.dim..(i + 1) * self.dim];
            for j in i..self.dim {
                row[j] += yi * y[j].conj();
            }
        }
        self.count += 1;
        Ok(())
    }

    /// Folds another accumulator of the same dimension into this one.
    pub fn merge(&mut self, other: &CovarianceAccumulator) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: other.dim,
            });
        }
        self.sum
            .iter_mut()
            .zip(&other.sum)
            .for_each(|(a, b)| *a += b);
        self.count += other.count;
        Ok(())
    }

    /// Sample covariance `(1/N) sum_k y(k) y(k)^H`.
    pub fn finalize(&self) -> Result<HermitianMatrix> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let n = self.count as f64;
        let d = self.dim;
        Ok(HermitianMatrix::from_upper(d, |i, j| {
            self.sum[i * d + j] / n
        }))
    }
}

/// `sigma_d2 (H H^H) . gram + sigma_n2 I`.
pub fn analytic_covariance(
    response: &[Complex64],
    gram: &HermitianMatrix,
    sigma_d2: f64,
    sigma_n2: f64,
) -> Result<HermitianMatrix> {
    if response.len() != gram.dim() {
        return Err(Error::Dimension {
            expected: gram.dim(),
            got: response.len(),
        });
    }
    Ok(HermitianMatrix::from_upper(gram.dim(), |i, j| {
        let noise = if i == j { sigma_n2 } else { 0.0 };
        response[i] * response[j].conj() * gram.get(i, j) * sigma_d2 + noise
    }))
}

/// `diag(H) W R_d W^H diag(H)^H + sigma_n2 I` evaluated as plain matrix
/// products, for any source covariance `R_d` (row-major, M x M).
pub fn transceiver_covariance(
    response: &[Complex64],
    pre: &Precoder,
    source_cov: &[Complex64],
    sigma_n2: f64,
) -> Result<HermitianMatrix> {
    let m = pre.subcarriers();
    if response.len() != m || source_cov.len() != m * m {
        return Err(Error::Dimension {
            expected: m,
            got: response.len(),
        });
    }
    let w = pre.matrix();
    let mut a = vec![Complex64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            a[i * m + j] = response[i] * w.get(i, j);
        }
    }
    let mut ar = vec![Complex64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            ar[i * m + j] = compensated_sum((0..m).map(|k| a[i * m + k] * source_cov[k * m + j]));
        }
    }
    let mut r = vec![Complex64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            let v = compensated_sum((0..m).map(|k| ar[i * m + k] * a[j * m + k].conj()));
            r[i * m + j] = v + if i == j { sigma_n2 } else { 0.0 };
        }
    }
    HermitianMatrix::from_row_major(m, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "sigma_n2")]
pub enum NoiseMode {
    /// Receiver is told the noise variance.
    Known(f64),
    /// Smallest eigenvalue of the sample covariance. Heuristic: it is exact
    /// only when the noiseless covariance is singular.
    Estimated,
}

/// Receiver-side knowledge used by [`joint_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub sigma_d2: f64,
    /// Element-wise divisor: `W R_d W^H / sigma_d2`.
    pub gram: HermitianMatrix,
    pub noise: NoiseMode,
    /// Project onto responses of channels with this many taps.
    pub denoise_taps: Option<usize>,
    pub min_gram_entry: f64,
}

impl EstimatorConfig {
    /// Configuration for a precoder fed by the given source.
    pub fn new(pre: &Precoder, source: &SourceStats, noise: NoiseMode) -> Result<Self> {
        Self::with_gram(source.energy, pre.effective_gram(source), noise)
    }

    /// Configuration with an explicit Gram matrix, e.g. `W W^H` for a white source.
    pub fn with_gram(sigma_d2: f64, gram: HermitianMatrix, noise: NoiseMode) -> Result<Self> {
        if sigma_d2.is_nan() || sigma_d2 <= 0.0 {
            return Err(Error::Config(format!(
                "source energy {sigma_d2} must be positive"
            )));
        }
        let min_gram_entry = 1e-6 * gram.max_abs();
        Ok(Self {
            sigma_d2,
            gram,
            noise,
            denoise_taps: None,
            min_gram_entry,
        })
    }

    pub fn with_denoise_taps(mut self, taps: Option<usize>) -> Self {
        self.denoise_taps = taps;
        self
    }
}

/// Estimates `H` up to a global phase from a sample covariance.
pub fn joint_estimate(r_hat: &HermitianMatrix, cfg: &EstimatorConfig) -> Result<Vec<Complex64>> {
    let m = r_hat.dim();
    if cfg.gram.dim() != m {
        return Err(Error::Dimension {
            expected: m,
            got: cfg.gram.dim(),
        });
    }
    for i in 0..m {
        for j in i..m {
            let g = cfg.gram.get(i, j).norm();
            if g < cfg.min_gram_entry {
                return Err(Error::GramSingularity {
                    row: i,
                    col: j,
                    value: g,
                });
            }
        }
    }
    let noise = match cfg.noise {
        NoiseMode::Known(v) => v,
        NoiseMode::Estimated => r_hat.smallest_eigenvalue().max(0.0),
    };
    let target = HermitianMatrix::from_upper(m, |i, j| {
        let denoised = if i == j {
            r_hat.get(i, j) - noise
        } else {
            r_hat.get(i, j)
        };
        denoised / (cfg.gram.get(i, j) * cfg.sigma_d2)
    });
    let (lambda, u) = dominant_eigpair(&target)?;
    if lambda <= 0.0 {
        return Err(Error::DegenerateCovariance(lambda));
    }
    let amp = lambda.sqrt();
    let h_est: Vec<Complex64> = u.into_iter().map(|x| x * amp).collect();
    match cfg.denoise_taps {
        Some(taps) if taps < m => Ok(project_to_taps(&h_est, taps)),
        _ => Ok(h_est),
    }
}

/// Orthogonal projection onto the span of the first `taps` DFT columns:
/// responses of channels supported on delays `0..taps`.
pub fn project_to_taps(response: &[Complex64], taps: usize) -> Vec<Complex64> {
    let m = response.len();
    let mut h = idft(response);
    h.truncate(taps.min(m));
    dft(&h, m).expect("truncated taps fit the frame")
}

/// Per-subcarrier and pooled estimates of the phase ambiguity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseEstimate {
    pub phi: f64,
    /// Magnitude-weighted circular mean over frames for each subcarrier.
    pub per_subcarrier: Vec<f64>,
}

/// Blind phase-ambiguity estimate.
///
/// Each sample `wrap(arg(H_est_i) - arg(y_i) + B_i)` is weighted by `|y_i|`,
/// so faded subcarriers count less, and the samples are pooled with a
/// circular mean to survive the wrap at `+-pi`.
pub fn estimate_phase_ambiguity(
    h_est: &[Complex64],
    frames: &[Vec<Complex64>],
    pattern: &[f64],
) -> Result<PhaseEstimate> {
    let mut acc = PhaseAccumulator::new(h_est, pattern)?;
    for y in frames {
        acc.push(y)?;
    }
    acc.finish()
}

/// Streaming form of [`estimate_phase_ambiguity`], one frame at a time.
#[derive(Debug, Clone)]
pub struct PhaseAccumulator {
    base: Vec<f64>,
    pooled: CircularAccumulator,
    per_subcarrier: Vec<CircularAccumulator>,
    frames: usize,
}

impl PhaseAccumulator {
    pub fn new(h_est: &[Complex64], pattern: &[f64]) -> Result<Self> {
        let m = h_est.len();
        if pattern.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: pattern.len(),
            });
        }
        Ok(Self {
            base: h_est
                .iter()
                .zip(pattern)
                .map(|(h, b)| h.arg() + b)
                .collect(),
            pooled: CircularAccumulator::default(),
            per_subcarrier: vec![CircularAccumulator::default(); m],
            frames: 0,
        })
    }

    pub fn push(&mut self, y: &[Complex64]) -> Result<()> {
        if y.len() != self.base.len() {
            return Err(Error::Dimension {
                expected: self.base.len(),
                got: y.len(),
            });
        }
        for ((yi, base), sub) in y.iter().zip(&self.base).zip(&mut self.per_subcarrier) {
            let theta = wrap_angle(base - yi.arg());
            let w = yi.norm();
            self.pooled.push(theta, w);
            sub.push(theta, w);
        }
        self.frames += 1;
        Ok(())
    }

    pub fn finish(&self) -> Result<PhaseEstimate> {
        let unresolvable = |e| Error::AmbiguityUnresolvable(Box::new(e));
        if self.frames == 0 {
            return Err(unresolvable(Error::UndefinedMean { resultant: 0.0 }));
        }
        Ok(PhaseEstimate {
            phi: self.pooled.mean().map_err(unresolvable)?,
            per_subcarrier: self
                .per_subcarrier
                .iter()
                .map(|a| crate::numerics::canonical_angle(a.resultant().arg()))
                .collect(),
        })
    }
}

/// Removes the estimated ambiguity, `H_est_i exp(-j phi)`.
pub fn correct_phase(h_est: &[Complex64], phi: f64) -> Vec<Complex64> {
    let rot = Complex64::from_polar(1.0, -phi);
    h_est.iter().map(|h| h * rot).collect()
}

/// Semi-blind phase from one frame with a known symbol on `pilot_index`.
pub fn pilot_phase_baseline(
    h_est: &[Complex64],
    y: &[Complex64],
    pilot_index: usize,
    pilot_symbol: Complex64,
) -> Result<f64> {
    pilot_phase_over_frames(
        h_est,
        std::slice::from_ref(&y.to_vec()),
        pilot_index,
        &[pilot_symbol],
    )
}

/// Semi-blind phase pooled over frames with a circular mean. `pilots[k]` is
/// the known transmitted symbol on `pilot_index` in frame `k`.
pub fn pilot_phase_over_frames(
    h_est: &[Complex64],
    frames: &[Vec<Complex64>],
    pilot_index: usize,
    pilots: &[Complex64],
) -> Result<f64> {
    if frames.len() != pilots.len() {
        return Err(Error::Dimension {
            expected: frames.len(),
            got: pilots.len(),
        });
    }
    let mut acc = PilotPhaseAccumulator::new(h_est, pilot_index)?;
    for (y, &s) in frames.iter().zip(pilots) {
        acc.push(y, s)?;
    }
    acc.finish()
}

/// Streaming form of [`pilot_phase_over_frames`].
#[derive(Debug, Clone)]
pub struct PilotPhaseAccumulator {
    index: usize,
    base: f64,
    acc: CircularAccumulator,
}

impl PilotPhaseAccumulator {
    pub fn new(h_est: &[Complex64], pilot_index: usize) -> Result<Self> {
        let h = h_est.get(pilot_index).ok_or(Error::PilotIndex {
            index: pilot_index,
            len: h_est.len(),
        })?;
        Ok(Self {
            index: pilot_index,
            base: h.arg(),
            acc: CircularAccumulator::default(),
        })
    }

    pub fn push(&mut self, y: &[Complex64], pilot: Complex64) -> Result<()> {
        if pilot.norm() == 0.0 {
            return Err(Error::InvalidPilot);
        }
        let yi = y.get(self.index).ok_or(Error::PilotIndex {
            index: self.index,
            len: y.len(),
        })?;
        self.acc
            .push(wrap_angle(self.base - (yi / pilot).arg()), 1.0);
        Ok(())
    }

    pub fn finish(&self) -> Result<f64> {
        self.acc
            .mean()
            .map_err(|e| Error::AmbiguityUnresolvable(Box::new(e)))
    }
}

/// Least-squares alignment phase `arg(sum_i H_est_i conj(H_i))`: the
/// rotation of `H_est` closest to `H`.
pub fn alignment_phase(h_est: &[Complex64], truth: &[Complex64]) -> f64 {
    let z: Complex64 = h_est.iter().zip(truth).map(|(a, b)| a * b.conj()).sum();
    crate::numerics::canonical_angle(z.arg())
}

/// Result of the full blind pipeline on one estimation window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelEstimate {
    /// Eigen-based estimate carrying the unknown phase.
    pub h_est: Vec<Complex64>,
    pub phi_est: f64,
    /// `h_est` rotated by `-phi_est`.
    pub h_estimate: Vec<Complex64>,
    pub per_subcarrier_phase: Vec<f64>,
}

/// Covariance, joint estimate and blind phase correction in one call.
pub fn blind_estimate(
    frames: &[Vec<Complex64>],
    cfg: &EstimatorConfig,
    pattern: &[f64],
) -> Result<ChannelEstimate> {
    let m = pattern.len();
    let mut acc = CovarianceAccumulator::new(m);
    for y in frames {
        acc.accumulate(y)?;
    }
    let h_est = joint_estimate(&acc.finalize()?, cfg)?;
    let phase = estimate_phase_ambiguity(&h_est, frames, pattern)?;
    let h_estimate = correct_phase(&h_est, phase.phi);
    Ok(ChannelEstimate {
        h_est,
        phi_est: phase.phi,
        h_estimate,
        per_subcarrier_phase: phase.per_subcarrier,
    })
}

/// Hermitian positive semi-definiteness within `1e-10` of the largest entry.
pub fn is_hermitian_psd(r: &HermitianMatrix) -> bool {
    let scale = r.max_abs().max(f64::MIN_POSITIVE);
    r.max_asymmetry() <= PSD_TOL * scale && r.smallest_eigenvalue() >= -PSD_TOL * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_gaussian, freq_response, NoiseSpec};
    use crate::constellation::{phase_pattern, SplitConstellation};
    use crate::numerics::norm_sqr;
    use crate::ofdm::rx_freq_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// min over phi of ||a - b e^{j phi}||^2 / ||b||^2.
    fn phase_free_nmse(a: &[Complex64], b: &[Complex64]) -> f64 {
        let rot = Complex64::from_polar(1.0, alignment_phase(a, b));
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y * rot).norm_sqr())
            .sum::<f64>()
            / norm_sqr(b)
    }

    fn random_response(rng: &mut ChaCha8Rng, m: usize, taps: usize) -> Vec<Complex64> {
        let h: Vec<Complex64> = (0..taps).map(|_| complex_gaussian(rng)).collect();
        freq_response(&h, m).unwrap()
    }

    fn split_frames(
        rng: &mut ChaCha8Rng,
        pre: &Precoder,
        con: &SplitConstellation,
        response: &[Complex64],
        noise: NoiseSpec,
        n: usize,
    ) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
        let m = pre.subcarriers();
        let mut ys = Vec::new();
        let mut ss = Vec::new();
        for _ in 0..n {
            let s = pre.apply(&con.random_frame(m, rng).unwrap()).unwrap();
            ys.push(rx_freq_model(&s, response, noise, rng).unwrap());
            ss.push(s);
        }
        (ys, ss)
    }

    #[test]
    fn accumulate_outer_product() {
        let mut acc = CovarianceAccumulator::new(2);
        acc.accumulate(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let r = acc.finalize().unwrap();
        assert_eq!(
            r.as_slice(),
            &[c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(1.0, 0.0)]
        );
        for _ in 0..9 {
            acc.accumulate(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        }
        assert!(acc.finalize().unwrap().max_abs_diff(&r) < 1e-15);
        assert!(matches!(
            acc.accumulate(&[c(1.0, 0.0)]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            CovarianceAccumulator::new(3).finalize(),
            Err(Error::EmptyAccumulator)
        ));
    }

    #[test]
    fn merged_accumulators_equal_single_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames: Vec<Vec<Complex64>> = (0..20)
            .map(|_| (0..4).map(|_| complex_gaussian(&mut rng)).collect())
            .collect();
        let mut whole = CovarianceAccumulator::new(4);
        let mut a = CovarianceAccumulator::new(4);
        let mut b = CovarianceAccumulator::new(4);
        for (k, y) in frames.iter().enumerate() {
            whole.accumulate(y).unwrap();
            if k % 3 == 0 {
                a.accumulate(y).unwrap()
            } else {
                b.accumulate(y).unwrap()
            }
        }
        a.merge(&b).unwrap();
        assert_eq!(a.count(), 20);
        assert!(
            a.finalize()
                .unwrap()
                .max_abs_diff(&whole.finalize().unwrap())
                < 1e-12
        );
        assert!(is_hermitian_psd(&whole.finalize().unwrap()));
    }

    #[test]
    fn analytic_flat_channel_is_scaled_gram() {
        let pre = Precoder::new(8, 0.5).unwrap();
        let r = analytic_covariance(&[c(1.0, 0.0); 8], pre.gram(), 2.0, 0.0).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((r.get(i, j) - pre.gram().get(i, j) * 2.0).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn analytic_small_example_entrywise() {
        // M=2, H=[1, 2j], p=0.5: P = [[1.25, -1], [-1, 1.25]].
        let pre = Precoder::new(2, 0.5).unwrap();
        let h = [c(1.0, 0.0), c(0.0, 2.0)];
        let r = analytic_covariance(&h, pre.gram(), 1.0, 0.0).unwrap();
        assert!((r.get(0, 0) - c(1.25, 0.0)).norm() < 1e-15);
        assert!((r.get(1, 1) - c(5.0, 0.0)).norm() < 1e-15);
        // H_0 conj(H_1) P_01 = 1 * (-2j) * (-1) = 2j.
        assert!((r.get(0, 1) - c(0.0, 2.0)).norm() < 1e-15);
        let id: Vec<Complex64> = (0..4)
            .map(|k| if k % 3 == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) })
            .collect();
        let direct = transceiver_covariance(&h, &pre, &id, 0.0).unwrap();
        assert!(direct.max_abs_diff(&r) < 1e-12);
    }

    #[test]
    fn sample_covariance_converges_to_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = 8;
        let pre = Precoder::new(m, 0.5).unwrap();
        let con = SplitConstellation::new(8).unwrap();
        let source = SourceStats::from(&con);
        let resp = random_response(&mut rng, m, 3);
        let noise = NoiseSpec::for_snr_with_source(10.0, &pre, &source);
        let mut acc = CovarianceAccumulator::new(m);
        for _ in 0..100_000 {
            let s = pre.apply(&con.random_frame(m, &mut rng).unwrap()).unwrap();
            acc.accumulate(&rx_freq_model(&s, &resp, noise, &mut rng).unwrap())
                .unwrap();
        }
        let r_hat = acc.finalize().unwrap();
        let model = analytic_covariance(
            &resp,
            &pre.effective_gram(&source),
            source.energy,
            noise.sigma_n2,
        )
        .unwrap();
        for i in 0..m {
            for j in 0..m {
                let want = model.get(i, j);
                assert!(
                    (r_hat.get(i, j) - want).norm() <= 0.05 * want.norm(),
                    "({i},{j})"
                );
            }
        }
        assert!(is_hermitian_psd(&r_hat));
    }

    #[test]
    fn exact_covariance_recovers_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [4, 8, 16, 64] {
            for p in [0.1, 0.5, 0.9] {
                let pre = Precoder::new(m, p).unwrap();
                let resp = random_response(&mut rng, m, 3.min(m));
                let sigma_n2 = 0.3;
                let r = analytic_covariance(&resp, pre.gram(), 1.7, sigma_n2).unwrap();
                let cfg =
                    EstimatorConfig::with_gram(1.7, pre.gram().clone(), NoiseMode::Known(sigma_n2))
                        .unwrap();
                let h_est = joint_estimate(&r, &cfg).unwrap();
                assert!(phase_free_nmse(&h_est, &resp) < 1e-10, "m={m} p={p}");
            }
        }
    }

    #[test]
    fn flat_channel_recovered_up_to_phase() {
        let pre = Precoder::new(8, 0.5).unwrap();
        let ones = vec![c(1.0, 0.0); 8];
        let r = analytic_covariance(&ones, pre.gram(), 1.0, 0.0).unwrap();
        let cfg =
            EstimatorConfig::with_gram(1.0, pre.gram().clone(), NoiseMode::Known(0.0)).unwrap();
        let h_est = joint_estimate(&r, &cfg).unwrap();
        // Canonical phase makes the flat estimate real-positive.
        for h in &h_est {
            assert!((h - c(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn projection_keeps_in_subspace_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = 64;
        let pre = Precoder::new(m, 0.5).unwrap();
        let resp = random_response(&mut rng, m, 3);
        let r = analytic_covariance(&resp, pre.gram(), 1.0, 0.0).unwrap();
        let base =
            EstimatorConfig::with_gram(1.0, pre.gram().clone(), NoiseMode::Known(0.0)).unwrap();
        let plain = joint_estimate(&r, &base).unwrap();
        let projected = joint_estimate(&r, &base.clone().with_denoise_taps(Some(3))).unwrap();
        let diff = plain
            .iter()
            .zip(&projected)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn estimated_noise_mode_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 16;
        let pre = Precoder::new(m, 0.5).unwrap();
        let resp = random_response(&mut rng, m, 3);
        let r = analytic_covariance(&resp, pre.gram(), 1.0, 0.01).unwrap();
        let cfg =
            EstimatorConfig::with_gram(1.0, pre.gram().clone(), NoiseMode::Estimated).unwrap();
        let h_est = joint_estimate(&r, &cfg).unwrap();
        // The noise guess is biased high, so recovery is approximate.
        assert!(phase_free_nmse(&h_est, &resp) < 0.1);
    }

    #[test]
    fn gram_guard_and_degenerate_covariance() {
        let pre = Precoder::new(4, 0.5).unwrap();
        let mut cfg =
            EstimatorConfig::with_gram(1.0, pre.gram().clone(), NoiseMode::Known(0.0)).unwrap();
        cfg.min_gram_entry = 10.0;
        let r = analytic_covariance(&[c(1.0, 0.0); 4], pre.gram(), 1.0, 0.0).unwrap();
        assert!(matches!(
            joint_estimate(&r, &cfg),
            Err(Error::GramSingularity { .. })
        ));

        let cfg =
            EstimatorConfig::with_gram(1.0, pre.gram().clone(), NoiseMode::Known(100.0)).unwrap();
        let r = analytic_covariance(&[c(0.1, 0.0); 4], pre.gram(), 1.0, 0.0).unwrap();
        assert!(matches!(
            joint_estimate(&r, &cfg),
            Err(Error::DegenerateCovariance(_))
        ));
    }

    fn synthetic_phase_case(rng: &mut ChaCha8Rng, phi: f64, noise: NoiseSpec, n: usize) -> f64 {
        let m = 64;
        let pre = Precoder::new(m, 0.5).unwrap();
        let con = SplitConstellation::new(8).unwrap();
        let resp = random_response(rng, m, 3);
        let (frames, _) = split_frames(rng, &pre, &con, &resp, noise, n);
        let h_est = correct_phase(&resp, -phi);
        estimate_phase_ambiguity(&h_est, &frames, &phase_pattern(m).unwrap())
            .unwrap()
            .phi
    }

    #[test]
    fn noiseless_phase_injection() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(
            (synthetic_phase_case(&mut rng, 0.7, NoiseSpec::noiseless(), 5) - 0.7).abs() < 1e-8
        );
        assert!(synthetic_phase_case(&mut rng, 0.0, NoiseSpec::noiseless(), 5).abs() < 1e-8);
        for _ in 0..200 {
            let phi = wrap_angle(rng.random_range(-PI..PI) + 1e-9);
            let est = synthetic_phase_case(&mut rng, phi, NoiseSpec::noiseless(), 2);
            assert!(wrap_angle(est - phi).abs() < 1e-6);
        }
    }

    #[test]
    fn phase_near_pi_does_not_alias() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 64;
        let pre = Precoder::new(m, 0.5).unwrap();
        let con = SplitConstellation::new(8).unwrap();
        let source = SourceStats::from(&con);
        let noise = NoiseSpec::for_snr_with_source(30.0, &pre, &source);
        let phi = PI - 0.05;
        let est = synthetic_phase_case(&mut rng, phi, noise, 500);
        assert!((est - phi).abs() < 0.02, "{est}");
        assert!(est > 0.0);
    }

    #[test]
    fn correct_phase_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_response(&mut rng, 16, 3);
        assert_eq!(correct_phase(&h, 0.0), h);
        let rotated = correct_phase(&h, -1.3);
        let back = correct_phase(&rotated, 1.3);
        for ((a, b), r) in back.iter().zip(&h).zip(&rotated) {
            assert!((a - b).norm() < 1e-12);
            assert!((r.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn pilot_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = 16;
        let pre = Precoder::new(m, 0.5).unwrap();
        let con = SplitConstellation::new(4).unwrap();
        let resp = random_response(&mut rng, m, 3);
        let (frames, sent) = split_frames(&mut rng, &pre, &con, &resp, NoiseSpec::noiseless(), 3);
        let h_est = correct_phase(&resp, -2.1);
        let phi = pilot_phase_baseline(&h_est, &frames[0], 0, sent[0][0]).unwrap();
        assert!((phi - 2.1).abs() < 1e-10);
        assert!(
            pilot_phase_baseline(&resp, &frames[1], 3, sent[1][3])
                .unwrap()
                .abs()
                < 1e-10
        );
        let pilots: Vec<Complex64> = sent.iter().map(|s| s[5]).collect();
        let pooled = pilot_phase_over_frames(&h_est, &frames, 5, &pilots).unwrap();
        assert!((pooled - 2.1).abs() < 1e-10);
        assert!(matches!(
            pilot_phase_baseline(&h_est, &frames[0], 0, c(0.0, 0.0)),
            Err(Error::InvalidPilot)
        ));
        assert!(matches!(
            pilot_phase_baseline(&h_est, &frames[0], 16, c(1.0, 0.0)),
            Err(Error::PilotIndex { .. })
        ));
    }

    #[test]
    fn blind_pipeline_noiseless() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = 32;
        let pre = Precoder::new(m, 0.5).unwrap();
        let con = SplitConstellation::new(8).unwrap();
        let source = SourceStats::from(&con);
        let resp = random_response(&mut rng, m, 3);
        let (frames, _) = split_frames(&mut rng, &pre, &con, &resp, NoiseSpec::noiseless(), 4000);
        let cfg = EstimatorConfig::new(&pre, &source, NoiseMode::Known(0.0)).unwrap();
        let est = blind_estimate(&frames, &cfg, &phase_pattern(m).unwrap()).unwrap();
        let err = est
            .h_estimate
            .iter()
            .zip(&resp)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / norm_sqr(&resp);
        assert!(err < 1e-2, "{err}");
        for (a, b) in est.h_estimate.iter().zip(&est.h_est) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn two_covariance_forms_agree(seed in any::<u64>(), p in 0.05f64..0.95, sigma_n2 in 0.0f64..2.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = 8;
                let pre = Precoder::new(m, p).unwrap();
                let resp = random_response(&mut rng, m, 3);
                let id: Vec<Complex64> = (0..m * m)
                    .map(|k| if k % (m + 1) == 0 { c(2.5, 0.0) } else { c(0.0, 0.0) })
                    .collect();
                let a = analytic_covariance(&resp, pre.gram(), 2.5, sigma_n2).unwrap();
                let b = transceiver_covariance(&resp, &pre, &id, sigma_n2).unwrap();
                prop_assert!(a.max_abs_diff(&b) < 1e-12 * a.max_abs().max(1.0));
            }

            #[test]
            fn correction_preserves_magnitudes(seed in any::<u64>(), phi in -10.0f64..10.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = random_response(&mut rng, 16, 4);
                for (a, b) in correct_phase(&h, phi).iter().zip(&h) {
                    prop_assert!((a.norm() - b.norm()).abs() <= 1e-12 * b.norm().max(1.0));
                }
            }
        }
    }
}
