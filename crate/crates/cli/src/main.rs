use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use blindofdm::sim::{self, run_point, run_selftest, sweep, Execution, Format, SimConfig};
use blindofdm::{Complex64, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_SELFTEST: u8 = 4;

#[derive(Parser)]
#[command(
    name = "blindofdm",
    version,
    about = "Blind channel estimation for precoded OFDM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run; prints the channel estimate as JSON.
    Estimate(EstimateArgs),
    /// Monte-Carlo sweep over SNR, block count and runs.
    Sweep(SweepArgs),
    /// Runs the built-in oracle checks.
    Selftest(SelftestArgs),
}

/// Every simulation field as a flag. Values are kept as text and applied
/// through the same parser as the config file.
#[derive(Args, Debug, Default)]
struct SimArgs {
    /// key=value file; flags given here override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Subcarriers M (even).
    #[arg(long)]
    subcarriers: Option<String>,
    /// Channel order L (L + 1 taps).
    #[arg(long)]
    taps: Option<String>,
    /// exp | uniform
    #[arg(long)]
    pdp: Option<String>,
    /// fixed | rayleigh
    #[arg(long)]
    channel_mode: Option<String>,
    /// Scale the channel to unit energy (true | false).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize_channel: Option<String>,
    /// Precoder weight in (0, 1).
    #[arg(long)]
    p: Option<String>,
    /// PAM order Q.
    #[arg(long)]
    pam_order: Option<String>,
    /// Block counts; repeat or comma-separate.
    #[arg(long)]
    blocks: Vec<String>,
    /// SNR values in dB; repeat or comma-separate. Mean per-subcarrier
    /// transmit power over noise power, for a unit-energy channel.
    #[arg(long, allow_hyphen_values = true)]
    snr: Vec<String>,
    /// Monte-Carlo runs per sweep point.
    #[arg(long)]
    runs: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
    /// blind | semiblind | genie
    #[arg(long)]
    mode: Option<String>,
    /// freq | time
    #[arg(long)]
    path: Option<String>,
    /// Cyclic prefix length; defaults to the channel order.
    #[arg(long)]
    cp_len: Option<String>,
    /// known | estimated
    #[arg(long)]
    noise: Option<String>,
    /// Project the estimate onto this many leading taps.
    #[arg(long)]
    denoise_taps: Option<String>,
    /// Record wall-clock time per run in elapsed_s.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Run index; selects the channel draw.
    #[arg(long, default_value_t = 0)]
    run: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Worker threads; 1 runs serially, 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl SimArgs {
    fn resolve(&self) -> Result<SimConfig, Error> {
        let mut cfg = SimConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_kv_text(&text)?;
        }
        let scalar = [
            ("subcarriers", &self.subcarriers),
            ("taps", &self.taps),
            ("pdp", &self.pdp),
            ("channel-mode", &self.channel_mode),
            ("normalize-channel", &self.normalize_channel),
            ("p", &self.p),
            ("pam-order", &self.pam_order),
            ("runs", &self.runs),
            ("seed", &self.seed),
            ("mode", &self.mode),
            ("path", &self.path),
            ("cp-len", &self.cp_len),
            ("noise", &self.noise),
            ("denoise-taps", &self.denoise_taps),
        ];
        for (key, value) in scalar {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for (key, values) in [("blocks", &self.blocks), ("snr", &self.snr)] {
            if !values.is_empty() {
                cfg.set(key, &values.join(","))?;
            }
        }
        if self.timing {
            cfg.timing = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn destination(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    config: &'a SimConfig,
    run: usize,
    snr_db: f64,
    n_blocks: usize,
    sigma_n2: f64,
    phi_est: f64,
    phi_true: f64,
    phase_error: f64,
    nmse: f64,
    ser: f64,
    /// `[re, im]` per subcarrier.
    h_estimate: Vec<[f64; 2]>,
    h_true: Vec<[f64; 2]>,
}

fn estimate(args: &EstimateArgs) -> Result<(), Error> {
    let cfg = args.sim.resolve()?;
    let outcome = run_point(&cfg, cfg.snr_db[0], cfg.blocks[0], args.run)?;
    let r = &outcome.result;
    let report = EstimateReport {
        config: &cfg,
        run: r.run,
        snr_db: r.snr_db,
        n_blocks: r.n_blocks,
        sigma_n2: outcome.sigma_n2,
        phi_est: outcome.estimate.phi_est,
        phi_true: outcome.phi_true,
        phase_error: r.phase_error,
        nmse: r.nmse,
        ser: r.ser,
        h_estimate: pairs(&outcome.estimate.h_estimate),
        h_true: pairs(&outcome.truth),
    };
    let mut dest = destination(&args.out)?;
    serde_json::to_writer_pretty(&mut dest, &report)?;
    writeln!(dest)?;
    dest.flush()?;
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> Result<(), Error> {
    let cfg = args.sim.resolve()?;
    let exec = match args.threads {
        1 => Execution::Serial,
        0 => Execution::Parallel(None),
        n => Execution::Parallel(Some(n)),
    };
    let results = sweep(&cfg, exec)?;
    let format = match args.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    sim::emit(&cfg, &results, format, destination(&args.out)?)
}

fn selftest(args: &SelftestArgs) -> Result<bool, Error> {
    let checks = run_selftest(args.seed)?;
    for c in &checks {
        println!("{c}");
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(args) => estimate(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Selftest(args) => match selftest(args) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_SELFTEST),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
