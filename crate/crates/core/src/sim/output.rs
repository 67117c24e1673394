use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::sim::config::SimConfig;
use crate::sim::run::RunResult;

pub const CSV_HEADER: &str = "run,snr_db,n_blocks,mode,pdp,nmse,phase_error,ser,elapsed_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// CSV text with a header row. Floats use the shortest round-trip form,
/// in exponent notation for very small or large magnitudes.
pub fn to_csv(results: &[RunResult]) -> String {
    let mut out = String::with_capacity(64 * (results.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in results {
        // Writing to a String cannot fail.
        let _ = writeln!(
            out,
            "{},{:?},{},{},{},{:?},{:?},{:?},{:?}",
            r.run,
            r.snr_db,
            r.n_blocks,
            r.mode.label(),
            r.pdp.label(),
            r.nmse,
            r.phase_error,
            r.ser,
            r.elapsed_s
        );
    }
    out
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a SimConfig,
    results: Vec<JsonRow<'a>>,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    run: usize,
    snr_db: f64,
    n_blocks: usize,
    mode: &'a str,
    pdp: &'a str,
    nmse: f64,
    phase_error: f64,
    ser: f64,
    elapsed_s: f64,
}

/// JSON document holding the resolved configuration and the result rows.
pub fn to_json(config: &SimConfig, results: &[RunResult]) -> Result<String> {
    let report = JsonReport {
        config,
        results: results
            .iter()
            .map(|r| JsonRow {
                run: r.run,
                snr_db: r.snr_db,
                n_blocks: r.n_blocks,
                mode: r.mode.label(),
                pdp: r.pdp.label(),
                nmse: r.nmse,
                phase_error: r.phase_error,
                ser: r.ser,
                elapsed_s: r.elapsed_s,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&report)?)
}

pub fn emit<W: Write>(
    config: &SimConfig,
    results: &[RunResult],
    format: Format,
    mut dest: W,
) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(results),
        Format::Json => to_json(config, results)? + "\n",
    };
    dest.write_all(text.as_bytes())?;
    dest.flush()?;
    Ok(())
}
