use blindofdm::channel::{sample_channel, ChannelMode, NoiseSpec, Pdp, PdpKind};
use blindofdm::constellation::{phase_pattern, SourceStats, SplitConstellation};
use blindofdm::estimator::{blind_estimate, EstimatorConfig, NoiseMode};
use blindofdm::ofdm::rx_freq_model;
use blindofdm::sim::{median, nmse};
use blindofdm::Precoder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn noiseless_median_nmse_shrinks_with_frames() {
    let m = 64;
    let pre = Precoder::new(m, 0.5).unwrap();
    let con = SplitConstellation::new(8).unwrap();
    let cfg = EstimatorConfig::new(&pre, &SourceStats::from(&con), NoiseMode::Known(0.0)).unwrap();
    let pattern = phase_pattern(m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut medians = Vec::new();
    for n in [10, 100, 1000] {
        let mut errs = Vec::new();
        for _ in 0..50 {
            let ch = sample_channel(
                &Pdp::new(PdpKind::Exponential, 2),
                ChannelMode::Rayleigh,
                true,
                m,
                &mut rng,
            )
            .unwrap();
            let frames: Vec<_> = (0..n)
                .map(|_| {
                    let s = pre.apply(&con.random_frame(m, &mut rng).unwrap()).unwrap();
                    rx_freq_model(&s, &ch.response, NoiseSpec::noiseless(), &mut rng).unwrap()
                })
                .collect();
            let est = blind_estimate(&frames, &cfg, &pattern).unwrap();
            errs.push(nmse(&est.h_estimate, &ch.response).unwrap());
        }
        medians.push(median(&errs));
    }
    assert!(
        medians[1] <= medians[0] && medians[2] <= medians[1],
        "{medians:?}"
    );
}
