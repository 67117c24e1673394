use blindofdm::channel::PdpKind;
use blindofdm::sim::{self, median_nmse, sweep, Execution, SignalPath, SimConfig};
use blindofdm::EstimatorMode;

fn baseline(mode: EstimatorMode) -> SimConfig {
    SimConfig {
        runs: 20,
        seed: 77,
        mode,
        ..SimConfig::default()
    }
}

/// Smallest block count whose median NMSE is within 10% of the largest
/// count's.
fn blocks_to_converge(mode: EstimatorMode, grid: &[usize]) -> usize {
    let cfg = SimConfig {
        blocks: grid.to_vec(),
        ..baseline(mode)
    };
    let rows = sweep(&cfg, Execution::Parallel(None)).unwrap();
    let last = median_nmse(&rows, 30.0, *grid.last().unwrap());
    *grid
        .iter()
        .find(|&&n| median_nmse(&rows, 30.0, n) <= 1.1 * last)
        .unwrap()
}

#[test]
fn high_snr_blind_matches_semiblind() {
    let b = sweep(&baseline(EstimatorMode::Blind), Execution::Parallel(None)).unwrap();
    let s = sweep(
        &baseline(EstimatorMode::Semiblind),
        Execution::Parallel(None),
    )
    .unwrap();
    let (mb, ms) = (median_nmse(&b, 30.0, 500), median_nmse(&s, 30.0, 500));
    assert!(mb <= 2.0 * ms, "blind {mb} semi-blind {ms}");
}

#[test]
fn semiblind_converges_no_slower() {
    let grid = [20, 50, 100, 200, 300, 400, 500];
    let b = blocks_to_converge(EstimatorMode::Blind, &grid);
    let s = blocks_to_converge(EstimatorMode::Semiblind, &grid);
    assert!(s <= b, "semi-blind needs {s} blocks, blind {b}");
}

#[test]
fn genie_phase_bounds_blind() {
    let cfg = SimConfig {
        snr_db: vec![10.0],
        ..baseline(EstimatorMode::Blind)
    };
    let genie = SimConfig {
        mode: EstimatorMode::GeniePhase,
        ..cfg.clone()
    };
    let b = sweep(&cfg, Execution::Parallel(None)).unwrap();
    let g = sweep(&genie, Execution::Parallel(None)).unwrap();
    for (rb, rg) in b.iter().zip(&g) {
        assert!(rg.nmse <= rb.nmse * (1.0 + 1e-12), "{rb:?} {rg:?}");
    }
}

#[test]
fn time_chain_sweep_agrees_with_freq_model() {
    let freq = SimConfig {
        runs: 10,
        snr_db: vec![20.0],
        blocks: vec![300],
        pdp: PdpKind::Uniform,
        ..SimConfig::default()
    };
    let time = SimConfig {
        path: SignalPath::Time,
        ..freq.clone()
    };
    let a = median_nmse(&sweep(&freq, Execution::Parallel(None)).unwrap(), 20.0, 300);
    let b = median_nmse(&sweep(&time, Execution::Parallel(None)).unwrap(), 20.0, 300);
    assert!((a / b - 1.0).abs() < 0.5, "freq {a} time {b}");
}

#[test]
fn sixty_row_sweep_round_trips_through_csv() {
    let cfg = SimConfig {
        subcarriers: 16,
        runs: 10,
        blocks: vec![30, 60],
        snr_db: vec![0.0, 10.0, 20.0],
        ..SimConfig::default()
    };
    let rows = sweep(&cfg, Execution::Parallel(Some(4))).unwrap();
    let text = sim::to_csv(&rows);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        reader
            .headers()
            .unwrap()
            .iter()
            .collect::<Vec<_>>()
            .join(","),
        sim::CSV_HEADER
    );
    let parsed: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(parsed.len(), 60);
    assert_eq!(text.lines().count(), 61);
    let mut prev = (f64::NEG_INFINITY, 0usize, 0usize);
    for (rec, row) in parsed.iter().zip(&rows) {
        let key = (
            rec[1].parse::<f64>().unwrap(),
            rec[2].parse::<usize>().unwrap(),
            rec[0].parse::<usize>().unwrap(),
        );
        assert!(key.0 > prev.0 || (key.0 == prev.0 && (key.1, key.2) > (prev.1, prev.2)));
        prev = key;
        assert_eq!(rec[5].parse::<f64>().unwrap(), row.nmse);
        assert_eq!(rec[6].parse::<f64>().unwrap(), row.phase_error);
    }
}

#[test]
fn estimated_noise_mode_runs() {
    let cfg = SimConfig {
        runs: 5,
        snr_db: vec![20.0],
        noise: blindofdm::sim::NoiseKnowledge::Estimated,
        ..SimConfig::default()
    };
    let rows = sweep(&cfg, Execution::Serial).unwrap();
    assert!(rows.iter().all(|r| r.nmse.is_finite()));
}
