use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{sample_channel, ChannelMode, NoiseSpec, Pdp, PdpKind};
use crate::constellation::{phase_pattern, SplitConstellation};
use crate::error::Result;
use crate::estimator::{
    analytic_covariance, correct_phase, estimate_phase_ambiguity, joint_estimate,
    transceiver_covariance, EstimatorConfig, NoiseMode,
};
use crate::ofdm::{rx_freq_model, rx_time_chain};
use crate::precoder::Precoder;
use crate::sim::run::nmse;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error.
    pub worst: f64,
    pub tolerance: f64,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: worst {:e} (tolerance {:e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

fn check(name: &'static str, worst: f64, tolerance: f64) -> Check {
    Check {
        name,
        passed: worst < tolerance,
        worst,
        tolerance,
    }
}

/// Joint estimation from exact covariances followed by noiseless blind
/// phase correction, on `trials` channels per PDP.
pub fn exact_recovery(trials: usize, m: usize, taps: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pre = Precoder::new(m, 0.5)?;
    let con = SplitConstellation::new(8)?;
    let pattern = phase_pattern(m)?;
    let cfg =
        EstimatorConfig::with_gram(con.sigma_d2(), pre.gram().clone(), NoiseMode::Known(0.0))?;
    let mut worst = 0.0f64;
    for kind in [PdpKind::Exponential, PdpKind::Uniform] {
        for _ in 0..trials {
            let ch = sample_channel(
                &Pdp::new(kind, taps),
                ChannelMode::Rayleigh,
                true,
                m,
                &mut rng,
            )?;
            let r = analytic_covariance(&ch.response, pre.gram(), con.sigma_d2(), 0.0)?;
            let h_est = joint_estimate(&r, &cfg)?;
            let frames = (0..4)
                .map(|_| {
                    let s = pre.apply(&con.random_frame(m, &mut rng)?)?;
                    rx_freq_model(&s, &ch.response, NoiseSpec::noiseless(), &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let phase = estimate_phase_ambiguity(&h_est, &frames, &pattern)?;
            worst = worst.max(nmse(&correct_phase(&h_est, phase.phi), &ch.response)?);
        }
    }
    Ok(check("exact-covariance recovery", worst, 1e-10))
}

/// Matrix-product and Hadamard covariance forms on random unit-scale
/// instances.
pub fn covariance_identity(trials: usize, m: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let p = rng.random_range(0.05..0.95);
        let sigma_d2 = rng.random_range(0.5..2.0);
        let sigma_n2 = rng.random_range(0.0..2.0);
        let pre = Precoder::new(m, p)?;
        let ch = sample_channel(
            &Pdp::new(PdpKind::Exponential, 2),
            ChannelMode::Rayleigh,
            true,
            m,
            &mut rng,
        )?;
        let rd: Vec<Complex64> = (0..m * m)
            .map(|k| Complex64::new(if k / m == k % m { sigma_d2 } else { 0.0 }, 0.0))
            .collect();
        let a = transceiver_covariance(&ch.response, &pre, &rd, sigma_n2)?;
        let b = analytic_covariance(&ch.response, pre.gram(), sigma_d2, sigma_n2)?;
        worst = worst.max(a.max_abs_diff(&b));
    }
    Ok(check("covariance product vs hadamard form", worst, 1e-12))
}

/// Time-domain chain against the per-subcarrier model, noiseless, with
/// the prefix exactly as long as the channel order.
pub fn chain_equivalence(blocks: usize, m: usize, taps: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pre = Precoder::new(m, 0.5)?;
    let con = SplitConstellation::new(8)?;
    let mut worst = 0.0f64;
    for _ in 0..blocks {
        let ch = sample_channel(
            &Pdp::new(PdpKind::Uniform, taps),
            ChannelMode::Rayleigh,
            true,
            m,
            &mut rng,
        )?;
        let s = pre.apply(&con.random_frame(m, &mut rng)?)?;
        let fast = rx_freq_model(&s, &ch.response, NoiseSpec::noiseless(), &mut rng)?;
        let slow = rx_time_chain(&s, &ch.taps, taps, NoiseSpec::noiseless(), &mut rng)?;
        let scale = fast
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let diff = fast
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    Ok(check("time chain vs frequency model", worst, 1e-9))
}

/// The oracle checks run by the `selftest` command.
pub fn run_selftest(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        exact_recovery(25, 64, 2, seed)?,
        covariance_identity(100, 16, seed ^ 1)?,
        chain_equivalence(100, 64, 2, seed ^ 2)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest(11).unwrap() {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn display_marks_failures() {
        let c = check("x", 1.0, 0.5);
        assert!(c.to_string().starts_with("FAIL x"));
    }
}
