//! OFDM transmit/receive chain.
//!
//! Two routes produce the received frequency-domain frame: the diagonal
//! model `y_i = H_i s_i + n_i`, and the explicit time-domain chain (IDFT,
//! cyclic prefix, linear convolution, CP removal, DFT). Under a sufficient
//! prefix the two agree exactly, which the tests check.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{add_awgn_in_place, NoiseSpec};
use crate::error::{Error, Result};
use crate::numerics::{dft, idft};

const SINGULAR_TOL: f64 = 1e-12;

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// `y_i = H_i s_i + n_i`.
pub fn rx_freq_model<R: Rng + ?Sized>(
    s: &[Complex64],
    response: &[Complex64],
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    check_len(s.len(), response.len())?;
    let mut y: Vec<Complex64> = s.iter().zip(response).map(|(a, h)| a * h).collect();
    add_awgn_in_place(&mut y, noise, rng);
    Ok(y)
}

/// One time-domain OFDM block with its cyclic prefix in front.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainBlock {
    pub samples: Vec<Complex64>,
    pub cp_len: usize,
}

impl TimeDomainBlock {
    pub fn body(&self) -> &[Complex64] {
        &self.samples[self.cp_len..]
    }
}

/// IDFT of `s` (scaled by 1/M so it inverts [`dft`]) with the last `cp_len`
/// samples prepended.
pub fn modulate_time(s: &[Complex64], cp_len: usize) -> Result<TimeDomainBlock> {
    if cp_len > s.len() {
        return Err(Error::Config(format!(
            "cyclic prefix of {cp_len} exceeds block length {}",
            s.len()
        )));
    }
    let body = idft(s);
    let m = body.len();
    let mut samples = Vec::with_capacity(m + cp_len);
    samples.extend_from_slice(&body[m - cp_len..]);
    samples.extend_from_slice(&body);
    Ok(TimeDomainBlock { samples, cp_len })
}

/// Linear convolution with `h`, truncated to the block length. Each block is
/// simulated on its own: the prefix absorbs the channel memory, so the tail
/// of the previous block is not carried over.
pub fn channel_pass_time(x: &TimeDomainBlock, h: &[Complex64]) -> Result<TimeDomainBlock> {
    let order = h.len().saturating_sub(1);
    if x.cp_len < order {
        return Err(Error::CpInsufficient {
            taps: h.len(),
            supported: x.cp_len + 1,
        });
    }
    let n = x.samples.len();
    let samples = (0..n)
        .map(|t| {
            h.iter()
                .enumerate()
                .take(t + 1)
                .map(|(l, hl)| hl * x.samples[t - l])
                .sum()
        })
        .collect();
    Ok(TimeDomainBlock {
        samples,
        cp_len: x.cp_len,
    })
}

/// Strips the prefix and returns the M-point DFT of the body.
pub fn demodulate_time(rx: &TimeDomainBlock, m: usize, cp_len: usize) -> Result<Vec<Complex64>> {
    check_len(m + cp_len, rx.samples.len())?;
    dft(&rx.samples[cp_len..], m)
}

/// Full time-domain chain. Noise is added to the received samples with
/// variance `sigma_n2 / M` so each frequency bin sees `sigma_n2`.
pub fn rx_time_chain<R: Rng + ?Sized>(
    s: &[Complex64],
    h: &[Complex64],
    cp_len: usize,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let m = s.len();
    let tx = modulate_time(s, cp_len)?;
    let mut rx = channel_pass_time(&tx, h)?;
    let per_sample = NoiseSpec {
        sigma_n2: noise.sigma_n2 / m as f64,
    };
    add_awgn_in_place(&mut rx.samples, per_sample, rng);
    demodulate_time(&rx, m, cp_len)
}

/// Zero-forcing one-tap equalizer, `s_hat_i = y_i / H_hat_i`.
pub fn equalize(y: &[Complex64], h_hat: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len(y.len(), h_hat.len())?;
    if let Some(index) = h_hat.iter().position(|h| h.norm() < SINGULAR_TOL) {
        return Err(Error::SingularSubcarrier { index });
    }
    Ok(y.iter().zip(h_hat).map(|(a, h)| a / h).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_gaussian, freq_response};
    use crate::constellation::SplitConstellation;
    use crate::precoder::Precoder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| complex_gaussian(rng)).collect()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn freq_model_identity_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_vec(&mut rng, 8);
        let y = rx_freq_model(&s, &[c(1.0, 0.0); 8], NoiseSpec::noiseless(), &mut rng).unwrap();
        assert_eq!(y, s);
        let h = random_vec(&mut rng, 8);
        let mut e0 = vec![c(0.0, 0.0); 8];
        e0[0] = c(1.0, 0.0);
        let y = rx_freq_model(&e0, &h, NoiseSpec::noiseless(), &mut rng).unwrap();
        assert_eq!(y[0], h[0]);
        assert!(y[1..].iter().all(|v| v.norm() == 0.0));
        assert!(rx_freq_model(&e0, &h[..4], NoiseSpec::noiseless(), &mut rng).is_err());
    }

    #[test]
    fn modulate_all_ones_is_impulse() {
        let blk = modulate_time(&[c(1.0, 0.0); 8], 3).unwrap();
        assert_eq!(blk.samples.len(), 11);
        assert!((blk.body()[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(blk.body()[1..].iter().all(|v| v.norm() < 1e-15));
        assert!(blk.samples[..3].iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn cyclic_prefix_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for cp in [0, 1, 4, 16] {
            let blk = modulate_time(&random_vec(&mut rng, 16), cp).unwrap();
            assert_eq!(&blk.samples[..cp], &blk.samples[16..16 + cp]);
        }
    }

    #[test]
    fn time_round_trip_without_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_vec(&mut rng, 32);
        let blk = modulate_time(&s, 4).unwrap();
        let rx = channel_pass_time(&blk, &[c(1.0, 0.0)]).unwrap();
        assert_eq!(rx, blk);
        let back = demodulate_time(&rx, 32, 4).unwrap();
        assert!(max_diff(&back, &s) < 1e-12);
    }

    #[test]
    fn delay_channel_shifts_impulse() {
        let mut samples = vec![c(0.0, 0.0); 6];
        samples[2] = c(1.0, 0.0);
        let blk = TimeDomainBlock { samples, cp_len: 1 };
        let out = channel_pass_time(&blk, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(out.samples[3], c(1.0, 0.0));
        assert_eq!(out.samples.iter().filter(|v| v.norm() > 0.0).count(), 1);
    }

    #[test]
    fn insufficient_prefix_is_rejected() {
        let blk = modulate_time(&[c(1.0, 0.0); 8], 1).unwrap();
        assert!(matches!(
            channel_pass_time(&blk, &[c(1.0, 0.0); 3]),
            Err(Error::CpInsufficient { .. })
        ));
    }

    #[test]
    fn body_equals_circular_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = 16;
        let s = random_vec(&mut rng, m);
        let h = random_vec(&mut rng, 3);
        let tx = modulate_time(&s, 2).unwrap();
        let rx = channel_pass_time(&tx, &h).unwrap();
        let body = tx.body();
        for n in 0..m {
            let circ: Complex64 = h
                .iter()
                .enumerate()
                .map(|(l, hl)| hl * body[(n + m - l) % m])
                .sum();
            assert!((rx.body()[n] - circ).norm() < 1e-12);
        }
    }

    #[test]
    fn chain_matches_frequency_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let m = 64;
            let s = random_vec(&mut rng, m);
            let h = random_vec(&mut rng, 3);
            let resp = freq_response(&h, m).unwrap();
            let fast = rx_freq_model(&s, &resp, NoiseSpec::noiseless(), &mut rng).unwrap();
            let slow = rx_time_chain(&s, &h, 2, NoiseSpec::noiseless(), &mut rng).unwrap();
            let scale = fast.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(max_diff(&fast, &slow) <= 1e-9 * scale);
        }
        let zero = rx_time_chain(
            &[c(0.0, 0.0); 8],
            &[c(1.0, 0.0), c(0.5, 0.5)],
            1,
            NoiseSpec::noiseless(),
            &mut rng,
        )
        .unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn chain_noise_power_per_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = 16;
        let h = [c(0.8, 0.1), c(0.2, -0.3)];
        let resp = freq_response(&h, m).unwrap();
        let noise = NoiseSpec::new(0.25).unwrap();
        let blocks = 10_000;
        let mut err = 0.0;
        for _ in 0..blocks {
            let s = random_vec(&mut rng, m);
            let y = rx_time_chain(&s, &h, 1, noise, &mut rng).unwrap();
            err += y
                .iter()
                .zip(s.iter().zip(&resp))
                .map(|(yi, (si, hi))| (yi - si * hi).norm_sqr())
                .sum::<f64>()
                / m as f64;
        }
        let per_bin = err / blocks as f64;
        assert!((per_bin - 0.25).abs() < 0.02 * 0.25, "{per_bin}");
    }

    #[test]
    fn equalizer_inverts_known_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_vec(&mut rng, 8);
        let h = random_vec(&mut rng, 8);
        let y = rx_freq_model(&s, &h, NoiseSpec::noiseless(), &mut rng).unwrap();
        assert!(max_diff(&equalize(&y, &h).unwrap(), &s) < 1e-12);
        let mut bad = h.clone();
        bad[5] = c(0.0, 0.0);
        assert!(matches!(
            equalize(&y, &bad),
            Err(Error::SingularSubcarrier { index: 5 })
        ));
    }

    #[test]
    fn uncorrected_pi_rotation_flips_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = 16;
        let con = SplitConstellation::new(8).unwrap();
        let pre = Precoder::new(m, 0.5).unwrap();
        let h = freq_response(&[c(0.9, 0.2), c(-0.3, 0.1), c(0.1, 0.05)], m).unwrap();
        let bits: Vec<bool> = (0..m * 2).map(|_| rng.random()).collect();
        let d = con.map_bits(&bits, m).unwrap();
        let y = rx_freq_model(
            &pre.apply(&d).unwrap(),
            &h,
            NoiseSpec::noiseless(),
            &mut rng,
        )
        .unwrap();

        let decide = |h_hat: &[Complex64]| {
            let s_hat = equalize(&y, h_hat).unwrap();
            con.demap(&pre.invert_apply(&s_hat).unwrap())
        };
        assert_eq!(decide(&h), bits);

        let flipped: Vec<Complex64> = h.iter().map(|v| -v).collect();
        let s_hat = equalize(&y, &flipped).unwrap();
        let d_hat = pre.invert_apply(&s_hat).unwrap();
        // Every even subcarrier now lands on the negative axis and vice versa.
        for (i, v) in d_hat.iter().enumerate() {
            assert_eq!(v.re.signum(), if i % 2 == 0 { -1.0 } else { 1.0 });
        }
        let errors = decide(&flipped)
            .iter()
            .zip(&bits)
            .filter(|(a, b)| a != b)
            .count();
        assert!(errors > 0);
    }
}
