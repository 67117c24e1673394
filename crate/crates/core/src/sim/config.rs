use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMode, PdpKind};
use crate::error::{Error, Result};

/// How the phase ambiguity is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Constellation splitting, no pilots.
    Blind,
    /// Known symbol on subcarrier 0 of every frame.
    Semiblind,
    /// True least-squares alignment phase; calibration only.
    GeniePhase,
}

impl EstimatorMode {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorMode::Blind => "blind",
            EstimatorMode::Semiblind => "semiblind",
            EstimatorMode::GeniePhase => "genie",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalPath {
    /// Diagonal frequency-domain model.
    Freq,
    /// IDFT, cyclic prefix, convolution, DFT.
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKnowledge {
    Known,
    Estimated,
}

/// Monte-Carlo experiment description. Defaults reproduce the reference
/// setup: 64 subcarriers, 3-tap exponential channel, p = 0.5, split 8-PAM,
/// 500 blocks at 30 dB, 100 runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub subcarriers: usize,
    /// Channel order L; the channel has L + 1 taps.
    pub taps: usize,
    pub pdp: PdpKind,
    pub channel_mode: ChannelMode,
    pub normalize_channel: bool,
    pub p: f64,
    pub pam_order: u32,
    pub blocks: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub mode: EstimatorMode,
    /// Cyclic prefix length; `None` means the channel order.
    pub cp_len: Option<usize>,
    pub path: SignalPath,
    pub noise: NoiseKnowledge,
    pub denoise_taps: Option<usize>,
    /// Record wall-clock time per run. Off by default so that output files
    /// depend on the configuration alone.
    pub timing: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            subcarriers: 64,
            taps: 2,
            pdp: PdpKind::Exponential,
            channel_mode: ChannelMode::FixedMagnitude,
            normalize_channel: true,
            p: 0.5,
            pam_order: 8,
            blocks: vec![500],
            snr_db: vec![30.0],
            runs: 100,
            seed: 0x0fdb_5eed,
            mode: EstimatorMode::Blind,
            cp_len: None,
            path: SignalPath::Freq,
            noise: NoiseKnowledge::Known,
            denoise_taps: None,
            timing: false,
        }
    }
}

impl SimConfig {
    pub fn effective_cp_len(&self) -> usize {
        self.cp_len.unwrap_or(self.taps)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.subcarriers < 2 || !self.subcarriers.is_multiple_of(2) {
            return bad(format!(
                "subcarriers = {} must be even and >= 2",
                self.subcarriers
            ));
        }
        if self.taps + 1 > self.subcarriers {
            return bad(format!(
                "channel with {} taps does not fit {} subcarriers",
                self.taps + 1,
                self.subcarriers
            ));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad(format!("p = {} must lie in (0, 1)", self.p));
        }
        if self.pam_order < 2 || !self.pam_order.is_power_of_two() {
            return bad(format!(
                "pam-order = {} must be a power of two >= 2",
                self.pam_order
            ));
        }
        if self.blocks.is_empty() || self.blocks.contains(&0) {
            return bad("blocks must be a non-empty list of positive counts".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr must be a non-empty list of finite values".into());
        }
        if self.runs == 0 {
            return bad("runs must be positive".into());
        }
        let cp = self.effective_cp_len();
        if cp < self.taps {
            return bad(format!(
                "cp-len = {cp} is shorter than the channel order {}",
                self.taps
            ));
        }
        if cp > self.subcarriers {
            return bad(format!(
                "cp-len = {cp} exceeds the block length {}",
                self.subcarriers
            ));
        }
        if let Some(d) = self.denoise_taps {
            if d == 0 || d > self.subcarriers {
                return bad(format!(
                    "denoise-taps = {d} must lie in 1..={}",
                    self.subcarriers
                ));
            }
        }
        Ok(())
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_text(text)?;
        Ok(cfg)
    }

    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Sets one field by its flag name (`pam-order`, `snr`, ...). Underscores
    /// and dashes are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('_', "-");
        match key.as_str() {
            "subcarriers" => self.subcarriers = parse(&key, value)?,
            "taps" => self.taps = parse(&key, value)?,
            "pdp" => self.pdp = parse_pdp(value)?,
            "channel-mode" => self.channel_mode = parse_channel_mode(value)?,
            "normalize-channel" => self.normalize_channel = parse_bool(&key, value)?,
            "p" => self.p = parse(&key, value)?,
            "pam-order" => self.pam_order = parse(&key, value)?,
            "blocks" => self.blocks = parse_list(&key, value)?,
            "snr" | "snr-db" => self.snr_db = parse_list(&key, value)?,
            "runs" => self.runs = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "mode" => self.mode = parse_mode(value)?,
            "cp-len" => self.cp_len = parse_optional(&key, value)?,
            "path" => self.path = parse_path(value)?,
            "noise" => self.noise = parse_noise(value)?,
            "denoise-taps" => self.denoise_taps = parse_optional(&key, value)?,
            "timing" => self.timing = parse_bool(&key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    match value {
        "" | "none" | "auto" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected a boolean, got `{value}`"
        ))),
    }
}

pub fn parse_pdp(value: &str) -> Result<PdpKind> {
    match value {
        "exp" | "exponential" => Ok(PdpKind::Exponential),
        "uniform" => Ok(PdpKind::Uniform),
        _ => Err(Error::Config(format!(
            "pdp: expected exp|uniform, got `{value}`"
        ))),
    }
}

pub fn parse_channel_mode(value: &str) -> Result<ChannelMode> {
    match value {
        "fixed" | "fixed-magnitude" | "fixed_magnitude" => Ok(ChannelMode::FixedMagnitude),
        "rayleigh" => Ok(ChannelMode::Rayleigh),
        _ => Err(Error::Config(format!(
            "channel-mode: expected fixed|rayleigh, got `{value}`"
        ))),
    }
}

pub fn parse_mode(value: &str) -> Result<EstimatorMode> {
    match value {
        "blind" => Ok(EstimatorMode::Blind),
        "semiblind" | "semi-blind" => Ok(EstimatorMode::Semiblind),
        "genie" | "genie-phase" | "genie_phase" => Ok(EstimatorMode::GeniePhase),
        _ => Err(Error::Config(format!(
            "mode: expected blind|semiblind|genie, got `{value}`"
        ))),
    }
}

pub fn parse_path(value: &str) -> Result<SignalPath> {
    match value {
        "freq" => Ok(SignalPath::Freq),
        "time" => Ok(SignalPath::Time),
        _ => Err(Error::Config(format!(
            "path: expected freq|time, got `{value}`"
        ))),
    }
}

pub fn parse_noise(value: &str) -> Result<NoiseKnowledge> {
    match value {
        "known" => Ok(NoiseKnowledge::Known),
        "estimated" => Ok(NoiseKnowledge::Estimated),
        _ => Err(Error::Config(format!(
            "noise: expected known|estimated, got `{value}`"
        ))),
    }
}
