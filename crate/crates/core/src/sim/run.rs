use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{sample_channel, NoiseSpec, Pdp, PdpKind};
use crate::constellation::{phase_pattern, SourceStats, SplitConstellation};
use crate::error::{Error, Result};
use crate::estimator::{
    alignment_phase, correct_phase, joint_estimate, ChannelEstimate, CovarianceAccumulator,
    EstimatorConfig, NoiseMode, PhaseAccumulator, PilotPhaseAccumulator,
};
use crate::numerics::{norm_sqr, wrap_angle};
use crate::ofdm::{equalize, rx_freq_model, rx_time_chain};
use crate::precoder::Precoder;
use crate::sim::config::{EstimatorMode, NoiseKnowledge, SignalPath, SimConfig};

/// Frames used for the symbol-error measurement after estimation.
pub const SER_FRAMES: usize = 100;
/// Subcarrier that carries the known symbol in semi-blind mode.
pub const PILOT_INDEX: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub run: usize,
    pub snr_db: f64,
    pub n_blocks: usize,
    pub mode: EstimatorMode,
    pub pdp: PdpKind,
    pub nmse: f64,
    /// `wrap(phi_est - phi_true)`, with `phi_true` the least-squares
    /// alignment phase of the eigen estimate.
    pub phase_error: f64,
    pub ser: f64,
    pub elapsed_s: f64,
}

/// Everything a single run produced, including the estimate itself.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub result: RunResult,
    pub estimate: ChannelEstimate,
    pub truth: Vec<Complex64>,
    pub phi_true: f64,
    pub sigma_n2: f64,
}

/// `||h_hat - h||^2 / ||h||^2`.
pub fn nmse(h_hat: &[Complex64], h: &[Complex64]) -> Result<f64> {
    if h_hat.len() != h.len() {
        return Err(Error::Dimension {
            expected: h.len(),
            got: h_hat.len(),
        });
    }
    let energy = norm_sqr(h);
    if energy == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    let err: f64 = h_hat.iter().zip(h).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / energy)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a sequence of words into one seed.
pub fn derive_seed(words: &[u64]) -> u64 {
    words.iter().fold(0x6a09_e667_f3bc_c908, |acc, &w| {
        splitmix64(acc ^ splitmix64(w))
    })
}

/// Channel draws depend on the master seed and run index only, so every
/// sweep point of a run sees the same channel.
fn channel_rng(cfg: &SimConfig, run: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, 1, run as u64]))
}

/// Data and noise draws are keyed by the sweep point's values rather than
/// its position in the lists, so adding points never perturbs others.
fn data_rng(cfg: &SimConfig, run: usize, snr_db: f64, n_blocks: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[
        cfg.seed,
        2,
        run as u64,
        snr_db.to_bits(),
        n_blocks as u64,
    ]))
}

/// One Monte-Carlo run at the first SNR and block count of `cfg`.
pub fn run_single(cfg: &SimConfig, run: usize) -> Result<RunResult> {
    Ok(run_point(cfg, cfg.snr_db[0], cfg.blocks[0], run)?.result)
}

/// One Monte-Carlo run at an explicit sweep point.
pub fn run_point(cfg: &SimConfig, snr_db: f64, n_blocks: usize, run: usize) -> Result<RunOutcome> {
    let wrap = |e: Error| Error::Run {
        run,
        snr_db,
        n_blocks,
        source: Box::new(e),
    };
    cfg.validate()?;
    run_point_inner(cfg, snr_db, n_blocks, run).map_err(wrap)
}

fn run_point_inner(
    cfg: &SimConfig,
    snr_db: f64,
    n_blocks: usize,
    run: usize,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let m = cfg.subcarriers;
    let pre = Precoder::new(m, cfg.p)?;
    let con = SplitConstellation::new(cfg.pam_order)?;
    let source = SourceStats::from(&con);
    let pattern = phase_pattern(m)?;
    let noise = NoiseSpec::for_snr_with_source(snr_db, &pre, &source);

    let channel = sample_channel(
        &Pdp::new(cfg.pdp, cfg.taps),
        cfg.channel_mode,
        cfg.normalize_channel,
        m,
        &mut channel_rng(cfg, run),
    )?;
    let truth = channel.response.clone();
    let mut rng = data_rng(cfg, run, snr_db, n_blocks);
    let cp_len = cfg.effective_cp_len();
    let transmit = |s: &[Complex64], rng: &mut ChaCha8Rng| match cfg.path {
        SignalPath::Freq => rx_freq_model(s, &truth, noise, rng),
        SignalPath::Time => rx_time_chain(s, &channel.taps, cp_len, noise, rng),
    };

    let next_frame = |rng: &mut ChaCha8Rng| -> Result<(Complex64, Vec<Complex64>)> {
        let s = pre.apply(&con.random_frame(m, rng)?)?;
        Ok((s[PILOT_INDEX], transmit(&s, rng)?))
    };

    // Frames are replayed from a cloned generator for the phase step rather
    // than stored, keeping memory independent of the block count.
    let replay = rng.clone();
    let mut acc = CovarianceAccumulator::new(m);
    for _ in 0..n_blocks {
        acc.accumulate(&next_frame(&mut rng)?.1)?;
    }

    let noise_mode = match cfg.noise {
        NoiseKnowledge::Known => NoiseMode::Known(noise.sigma_n2),
        NoiseKnowledge::Estimated => NoiseMode::Estimated,
    };
    let est_cfg =
        EstimatorConfig::new(&pre, &source, noise_mode)?.with_denoise_taps(cfg.denoise_taps);
    let h_est = joint_estimate(&acc.finalize()?, &est_cfg)?;
    let phi_true = alignment_phase(&h_est, &truth);

    let mut blind = PhaseAccumulator::new(&h_est, &pattern)?;
    let mut pilot = PilotPhaseAccumulator::new(&h_est, PILOT_INDEX)?;
    let mut rng_replay = replay;
    for _ in 0..n_blocks {
        let (s0, y) = next_frame(&mut rng_replay)?;
        blind.push(&y)?;
        if cfg.mode == EstimatorMode::Semiblind {
            pilot.push(&y, s0)?;
        }
    }
    let blind = blind.finish()?;
    let phi_est = match cfg.mode {
        EstimatorMode::Blind => blind.phi,
        EstimatorMode::Semiblind => pilot.finish()?,
        EstimatorMode::GeniePhase => phi_true,
    };
    let h_estimate = correct_phase(&h_est, phi_est);
    let nmse = nmse(&h_estimate, &truth)?;

    let mut symbol_errors = 0usize;
    for _ in 0..SER_FRAMES {
        let d = con.random_frame(m, &mut rng)?;
        let y = transmit(&pre.apply(&d)?, &mut rng)?;
        let d_hat = pre.invert_apply(&equalize(&y, &h_estimate)?)?;
        let sent = d.iter().enumerate().map(|(i, x)| con.position_of(i, x.re));
        symbol_errors += con
            .decide(&d_hat)
            .into_iter()
            .zip(sent)
            .filter(|(got, want)| Some(*got) != *want)
            .count();
    }
    let ser = symbol_errors as f64 / (SER_FRAMES * m) as f64;

    let elapsed_s = if cfg.timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    Ok(RunOutcome {
        result: RunResult {
            run,
            snr_db,
            n_blocks,
            mode: cfg.mode,
            pdp: cfg.pdp,
            nmse,
            phase_error: wrap_angle(phi_est - phi_true),
            ser,
            elapsed_s,
        },
        estimate: ChannelEstimate {
            h_est,
            phi_est,
            h_estimate,
            per_subcarrier_phase: blind.per_subcarrier,
        },
        truth,
        phi_true,
        sigma_n2: noise.sigma_n2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    /// Rayon worker pool; `None` uses the global pool.
    Parallel(Option<usize>),
}

/// Runs every `(snr, blocks, run)` combination. Results come back sorted
/// by that key whatever the execution order.
pub fn sweep(cfg: &SimConfig, exec: Execution) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let mut tasks = Vec::with_capacity(cfg.snr_db.len() * cfg.blocks.len() * cfg.runs);
    for &snr in &cfg.snr_db {
        for &blocks in &cfg.blocks {
            for run in 0..cfg.runs {
                tasks.push((snr, blocks, run));
            }
        }
    }
    let one = |&(snr, blocks, run): &(f64, usize, usize)| {
        run_point(cfg, snr, blocks, run).map(|o| o.result)
    };
    let outcomes: Vec<Result<RunResult>> = match exec {
        Execution::Serial => tasks.iter().map(one).collect(),
        Execution::Parallel(None) => tasks.par_iter().map(one).collect(),
        Execution::Parallel(Some(threads)) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| tasks.par_iter().map(one).collect())
        }
    };
    let mut results = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| {
        a.snr_db
            .total_cmp(&b.snr_db)
            .then(a.n_blocks.cmp(&b.n_blocks))
            .then(a.run.cmp(&b.run))
    });
    Ok(results)
}

/// Median of a sample; `NaN` for an empty one.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median NMSE of the rows at one sweep point.
pub fn median_nmse(results: &[RunResult], snr_db: f64, n_blocks: usize) -> f64 {
    let v: Vec<f64> = results
        .iter()
        .filter(|r| r.snr_db == snr_db && r.n_blocks == n_blocks)
        .map(|r| r.nmse)
        .collect();
    median(&v)
}
