//! Flat `key = value` configuration files.
//!
//! Every key has a documented default (see [`KEYS`]); a file only lists what
//! it changes. Unknown or repeated keys are errors. `#` starts a comment.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cfrelay_core::channel::{ChannelParams, InterferenceModel};
use cfrelay_core::constellation::{Labeling, ModulationKind};
use cfrelay_core::joint::FinalStage;
use cfrelay_core::tcq::QuantizerFamily;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("{key}: {msg}")]
    Value { key: String, msg: String },
    #[error("invalid geometry: {0}")]
    Geometry(String),
}

fn bad(key: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError::Value { key: key.into(), msg: msg.to_string() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Trellis quantizer at the relay, joint decoding.
    TcqCf,
    /// Per-dimension Lloyd-Max quantizer at the relay, joint decoding.
    ScalarCf,
    /// No relay; multistage decoding of the direct link.
    DirectOnly,
    /// One equal-rate code over Gray-labeled, interleaved bits, with the
    /// trellis-quantizing relay.
    Bicm,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::TcqCf, Scheme::ScalarCf, Scheme::DirectOnly, Scheme::Bicm];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::TcqCf => "tcq_cf",
            Scheme::ScalarCf => "scalar_cf",
            Scheme::DirectOnly => "direct_only",
            Scheme::Bicm => "bicm",
        }
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| format!("unknown scheme `{}` (expected tcq_cf, scalar_cf, direct_only or bicm)", s.trim()))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RateSpec {
    Fixed(Vec<f64>),
    /// Assigned from mutual-information estimates at `rate_design_snr_db`.
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub enum QuantizerSource {
    /// Designed at every SNR point.
    Design,
    /// Loaded from a quantizer JSON file; the transition table is still
    /// recomputed for each SNR.
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantizerSearch {
    /// Nominal scale `h12 * sqrt(ps)`.
    None,
    /// Grid search maximizing the source rate under the relay constraint.
    Rate,
    /// Grid search minimizing relay distortion.
    Distortion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub modulation: ModulationKind,
    pub labeling: Labeling,
    /// `ps` and `pr` are overwritten per SNR point.
    pub channel: ChannelParams,
    pub pr_offset_db: f64,
    pub snr_db: Vec<f64>,
    pub symbols: usize,
    pub rates: RateSpec,
    pub available_rates: Vec<f64>,
    pub rate_margin: f64,
    pub rate_design_snr_db: f64,
    pub source_col_weight: usize,
    pub relay_col_weight: usize,
    pub source_alist: Vec<PathBuf>,
    pub relay_alist: Vec<PathBuf>,
    pub code_seed: u64,
    pub quantizer: QuantizerSource,
    pub quantizer_search: QuantizerSearch,
    pub quantizer_family: QuantizerFamily,
    pub choice_samples: usize,
    pub mi_samples: usize,
    pub trials: usize,
    pub blocks_per_trial: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub max_outer_iters: usize,
    pub final_iters: usize,
    pub final_stage: FinalStage,
}

/// `(key, default, description)` for every accepted key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("modulation", "qam16", "qam16 or psk16"),
    ("labeling", "set_partition", "labels of the multilevel schemes: set_partition or gray (bicm always uses gray)"),
    ("h13", "1", "source-destination amplitude gain"),
    ("h12", "2", "source-relay amplitude gain"),
    ("h23", "11", "relay-destination amplitude gain"),
    ("n2_var", "8", "relay noise variance per 2-D symbol, watts"),
    ("n3_var", "1", "destination noise variance per 2-D symbol, watts"),
    ("interference", "physical", "power charged on the relay-link view: physical (h13^2 ps) or source_relay_gain (h12^2 ps)"),
    ("pr_offset_db", "0", "relay power relative to source power, dB"),
    ("snr_db", "6,7,8", "SNR points, dB, defined as 10 log10(ps / n3_var)"),
    ("symbols", "4096", "symbols per block (length of each per-level source code)"),
    ("rates", "0.9,0.8,0.9,0.8", "per-level source code rates, level 1 first, or `auto`"),
    ("available_rates", "2/3,0.8,5/6,0.9", "code rates `auto` may choose from"),
    ("rate_margin", "0.02", "backoff below the level mutual information, bits"),
    ("rate_design_snr_db", "10", "SNR, dB, at which `auto` estimates the level rates"),
    ("source_col_weight", "3", "column weight of generated source codes"),
    ("relay_col_weight", "3", "column weight of generated relay codes"),
    ("source_alist", "", "comma-separated alist files replacing the generated source codes (one per level, or one for bicm)"),
    ("relay_alist", "", "comma-separated alist files replacing the generated relay codes (one per level)"),
    ("code_seed", "1", "seed of the code generator"),
    ("quantizer", "design", "`design` or the path of a quantizer JSON file"),
    ("quantizer_search", "none", "codebook search when designing: none, rate or distortion"),
    ("quantizer_family", "state_union", "scalar quantizers the trellis switches between: state_union or subset"),
    ("choice_samples", "2000", "relay observations per source symbol for the quantizer-choice probabilities"),
    ("mi_samples", "20000", "Monte Carlo samples per mutual-information estimate"),
    ("trials", "50", "trials per SNR point"),
    ("blocks_per_trial", "2", "consecutive source blocks per trial (the relay is silent in the first)"),
    ("seed", "1", "simulation seed"),
    ("schemes", "tcq_cf", "comma-separated schemes: tcq_cf, scalar_cf, direct_only, bicm"),
    ("max_outer_iters", "60", "outer iterations of the joint decoder"),
    ("final_iters", "20", "sum-product iterations of each final standalone decode"),
    ("final_stage", "multistage", "final decisions of the multilevel schemes: multistage or parallel"),
];

/// The default configuration as a commented file.
pub fn template() -> String {
    let mut out = String::new();
    for (key, default, doc) in KEYS {
        out.push_str(&format!("# {doc}\n{key} = {default}\n"));
    }
    out
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let v = v.trim();
    let x = match v.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| bad(key, format!("`{v}`: {e}")))?;
            let b: f64 = b.trim().parse().map_err(|e| bad(key, format!("`{v}`: {e}")))?;
            a / b
        }
        None => v.parse().map_err(|e| bad(key, format!("`{v}`: {e}")))?,
    };
    if !x.is_finite() {
        return Err(bad(key, format!("`{v}` is not finite")));
    }
    Ok(x)
}

fn parse_list<T>(key: &str, v: &str, one: impl Fn(&str, &str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| one(key, s)).collect()
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim().parse().map_err(|e| bad(key, format!("`{v}`: {e}")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64, ConfigError> {
    v.trim().parse().map_err(|e| bad(key, format!("`{v}`: {e}")))
}

fn parse_paths(v: &str) -> Vec<PathBuf> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect()
}

impl SimConfig {
    fn empty() -> Self {
        SimConfig {
            modulation: ModulationKind::Qam16,
            labeling: Labeling::SetPartition,
            channel: ChannelParams::default(),
            pr_offset_db: 0.0,
            snr_db: Vec::new(),
            symbols: 0,
            rates: RateSpec::Auto,
            available_rates: Vec::new(),
            rate_margin: 0.0,
            rate_design_snr_db: 0.0,
            source_col_weight: 0,
            relay_col_weight: 0,
            source_alist: Vec::new(),
            relay_alist: Vec::new(),
            code_seed: 0,
            quantizer: QuantizerSource::Design,
            quantizer_search: QuantizerSearch::None,
            quantizer_family: QuantizerFamily::StateUnion,
            choice_samples: 0,
            mi_samples: 0,
            trials: 0,
            blocks_per_trial: 0,
            seed: 0,
            schemes: Vec::new(),
            max_outer_iters: 0,
            final_iters: 0,
            final_stage: FinalStage::Multistage,
        }
    }

    fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<(), ConfigError> {
        let v = v.trim();
        match key {
            "modulation" => self.modulation = v.parse().map_err(|e| bad(key, e))?,
            "labeling" => {
                self.labeling = match v {
                    "set_partition" => Labeling::SetPartition,
                    "gray" => Labeling::Gray,
                    _ => return Err(bad(key, format!("`{v}` (expected set_partition or gray)"))),
                }
            }
            "h13" => self.channel.h13 = parse_f64(key, v)?,
            "h12" => self.channel.h12 = parse_f64(key, v)?,
            "h23" => self.channel.h23 = parse_f64(key, v)?,
            "n2_var" => self.channel.n2_var = parse_f64(key, v)?,
            "n3_var" => self.channel.n3_var = parse_f64(key, v)?,
            "interference" => {
                self.channel.interference = match v {
                    "physical" => InterferenceModel::Physical,
                    "source_relay_gain" => InterferenceModel::SourceRelayGain,
                    _ => return Err(bad(key, format!("`{v}` (expected physical or source_relay_gain)"))),
                }
            }
            "pr_offset_db" => self.pr_offset_db = parse_f64(key, v)?,
            "snr_db" => self.snr_db = parse_list(key, v, parse_f64)?,
            "symbols" => self.symbols = parse_usize(key, v)?,
            "rates" => {
                self.rates = if v == "auto" { RateSpec::Auto } else { RateSpec::Fixed(parse_list(key, v, parse_f64)?) }
            }
            "available_rates" => self.available_rates = parse_list(key, v, parse_f64)?,
            "rate_margin" => self.rate_margin = parse_f64(key, v)?,
            "rate_design_snr_db" => self.rate_design_snr_db = parse_f64(key, v)?,
            "source_col_weight" => self.source_col_weight = parse_usize(key, v)?,
            "relay_col_weight" => self.relay_col_weight = parse_usize(key, v)?,
            "source_alist" => self.source_alist = parse_paths(v).into_iter().map(|p| base.join(p)).collect(),
            "relay_alist" => self.relay_alist = parse_paths(v).into_iter().map(|p| base.join(p)).collect(),
            "code_seed" => self.code_seed = parse_u64(key, v)?,
            "quantizer" => {
                self.quantizer = if v == "design" { QuantizerSource::Design } else { QuantizerSource::File(base.join(v)) }
            }
            "quantizer_search" => {
                self.quantizer_search = match v {
                    "none" => QuantizerSearch::None,
                    "rate" => QuantizerSearch::Rate,
                    "distortion" => QuantizerSearch::Distortion,
                    _ => return Err(bad(key, format!("`{v}` (expected none, rate or distortion)"))),
                }
            }
            "quantizer_family" => {
                self.quantizer_family = match v {
                    "state_union" => QuantizerFamily::StateUnion,
                    "subset" => QuantizerFamily::Subset,
                    _ => return Err(bad(key, format!("`{v}` (expected state_union or subset)"))),
                }
            }
            "choice_samples" => self.choice_samples = parse_usize(key, v)?,
            "mi_samples" => self.mi_samples = parse_usize(key, v)?,
            "trials" => self.trials = parse_usize(key, v)?,
            "blocks_per_trial" => self.blocks_per_trial = parse_usize(key, v)?,
            "seed" => self.seed = parse_u64(key, v)?,
            "schemes" => self.schemes = parse_list(key, v, |k, s| s.parse().map_err(|e| bad(k, e)))?,
            "max_outer_iters" => self.max_outer_iters = parse_usize(key, v)?,
            "final_iters" => self.final_iters = parse_usize(key, v)?,
            "final_stage" => {
                self.final_stage = match v {
                    "multistage" => FinalStage::Multistage,
                    "parallel" => FinalStage::Parallel,
                    _ => return Err(bad(key, format!("`{v}` (expected multistage or parallel)"))),
                }
            }
            _ => unreachable!("key list and setter disagree on `{key}`"),
        }
        Ok(())
    }

    /// Parses configuration text. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::empty();
        for (key, default, _) in KEYS {
            cfg.set(key, default, base)?;
        }
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            if !KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(ConfigError::UnknownKey { line, key: key.into() });
            }
            if seen.contains(&key) {
                return Err(ConfigError::Duplicate { line, key: key.into() });
            }
            seen.push(key);
            cfg.set(key, value, base)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut ch = self.channel;
        ch.ps = 1.0;
        ch.pr = 1.0;
        ch.validate().map_err(|e| bad("channel", e))?;
        if self.snr_db.is_empty() {
            return Err(bad("snr_db", "at least one SNR point is required"));
        }
        if self.schemes.is_empty() {
            return Err(bad("schemes", "at least one scheme is required"));
        }
        if let RateSpec::Fixed(r) = &self.rates {
            if r.len() != 4 {
                return Err(bad("rates", format!("{} rates given for 4 levels", r.len())));
            }
            if r.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                return Err(bad("rates", "rates must lie strictly between 0 and 1"));
            }
        }
        if self.available_rates.is_empty() || self.available_rates.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(bad("available_rates", "need at least one rate strictly between 0 and 1"));
        }
        if self.rate_margin < 0.0 {
            return Err(bad("rate_margin", "must be non-negative"));
        }
        for (key, v) in [
            ("trials", self.trials),
            ("blocks_per_trial", self.blocks_per_trial),
            ("max_outer_iters", self.max_outer_iters),
            ("choice_samples", self.choice_samples),
            ("mi_samples", self.mi_samples),
            ("source_col_weight", self.source_col_weight),
            ("relay_col_weight", self.relay_col_weight),
        ] {
            if v == 0 {
                return Err(bad(key, "must be positive"));
            }
        }
        if self.symbols < 8 {
            return Err(ConfigError::Geometry(format!("{} symbols per block", self.symbols)));
        }
        if !self.source_alist.is_empty() && self.source_alist.len() != 4 && self.source_alist.len() != 1 {
            return Err(ConfigError::Geometry(format!("{} source alist files (expected 4, or 1 for bicm)", self.source_alist.len())));
        }
        if !self.relay_alist.is_empty() && self.relay_alist.len() != 4 {
            return Err(ConfigError::Geometry(format!("{} relay alist files (expected 4)", self.relay_alist.len())));
        }
        Ok(())
    }

    /// Channel at one SNR point: `ps = 10^(snr/10) * n3_var`, `pr` offset
    /// from `ps` by `pr_offset_db`.
    pub fn channel_at(&self, snr_db: f64) -> ChannelParams {
        let mut ch = self.channel.with_snr_db(snr_db);
        ch.pr = ch.ps * 10f64.powf(self.pr_offset_db / 10.0);
        ch
    }

    /// Effective settings as `key = value` lines.
    pub fn echo(&self) -> Vec<String> {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let paths = |v: &[PathBuf]| v.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
        vec![
            format!("modulation = {}", self.modulation.name()),
            format!("labeling = {}", match self.labeling {
                Labeling::SetPartition => "set_partition",
                Labeling::Gray => "gray",
            }),
            format!("h13 = {}", self.channel.h13),
            format!("h12 = {}", self.channel.h12),
            format!("h23 = {}", self.channel.h23),
            format!("n2_var = {}", self.channel.n2_var),
            format!("n3_var = {}", self.channel.n3_var),
            format!("interference = {}", match self.channel.interference {
                InterferenceModel::Physical => "physical",
                InterferenceModel::SourceRelayGain => "source_relay_gain",
            }),
            format!("pr_offset_db = {}", self.pr_offset_db),
            format!("snr_db = {}", list(&self.snr_db)),
            format!("symbols = {}", self.symbols),
            format!("rates = {}", match &self.rates {
                RateSpec::Auto => "auto".to_string(),
                RateSpec::Fixed(r) => list(r),
            }),
            format!("available_rates = {}", list(&self.available_rates)),
            format!("rate_margin = {}", self.rate_margin),
            format!("rate_design_snr_db = {}", self.rate_design_snr_db),
            format!("source_col_weight = {}", self.source_col_weight),
            format!("relay_col_weight = {}", self.relay_col_weight),
            format!("source_alist = {}", paths(&self.source_alist)),
            format!("relay_alist = {}", paths(&self.relay_alist)),
            format!("code_seed = {}", self.code_seed),
            format!("quantizer = {}", match &self.quantizer {
                QuantizerSource::Design => "design".to_string(),
                QuantizerSource::File(p) => p.display().to_string(),
            }),
            format!("quantizer_search = {}", match self.quantizer_search {
                QuantizerSearch::None => "none",
                QuantizerSearch::Rate => "rate",
                QuantizerSearch::Distortion => "distortion",
            }),
            format!("quantizer_family = {}", match self.quantizer_family {
                QuantizerFamily::StateUnion => "state_union",
                QuantizerFamily::Subset => "subset",
            }),
            format!("choice_samples = {}", self.choice_samples),
            format!("mi_samples = {}", self.mi_samples),
            format!("trials = {}", self.trials),
            format!("blocks_per_trial = {}", self.blocks_per_trial),
            format!("seed = {}", self.seed),
            format!("schemes = {}", self.schemes.iter().map(|s| s.name()).collect::<Vec<_>>().join(",")),
            format!("max_outer_iters = {}", self.max_outer_iters),
            format!("final_iters = {}", self.final_iters),
            format!("final_stage = {}", match self.final_stage {
                FinalStage::Multistage => "multistage",
                FinalStage::Parallel => "parallel",
            }),
        ]
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::parse("", Path::new(".")).expect("documented defaults are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_round_trip_through_echo() {
        let d = SimConfig::default();
        assert_eq!(d.symbols, 4096);
        assert_eq!(d.rates, RateSpec::Fixed(vec![0.9, 0.8, 0.9, 0.8]));
        assert!((d.available_rates[0] - 2.0 / 3.0).abs() < 1e-15);
        let again = SimConfig::parse(&d.echo().join("\n"), Path::new(".")).unwrap();
        assert_eq!(again, d);
        assert_eq!(SimConfig::parse(&template(), Path::new(".")).unwrap(), d);
    }

    #[test]
    fn every_key_has_a_setter() {
        let mut cfg = SimConfig::empty();
        for (key, default, _) in KEYS {
            cfg.set(key, default, Path::new(".")).unwrap();
        }
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let p = Path::new(".");
        assert!(matches!(SimConfig::parse("symbolz = 10", p), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(SimConfig::parse("seed = 1\nseed = 2", p), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(SimConfig::parse("# c\nseed", p), Err(ConfigError::Syntax { line: 2 })));
        assert!(matches!(SimConfig::parse("seed = x", p), Err(ConfigError::Value { .. })));
        assert!(matches!(SimConfig::parse("rates = 0.9,0.8", p), Err(ConfigError::Value { .. })));
        assert!(matches!(SimConfig::parse("schemes = tcq", p), Err(ConfigError::Value { .. })));
        assert!(matches!(SimConfig::parse("symbols = 2", p), Err(ConfigError::Geometry(_))));
        assert!(matches!(SimConfig::parse("n3_var = 0", p), Err(ConfigError::Value { .. })));
        assert!(matches!(SimConfig::parse("snr_db = ", p), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn values_comments_and_paths() {
        let cfg = SimConfig::parse(
            "rates = 1/2, 3/4,0.5 ,0.5 # inline\nschemes=tcq_cf,bicm\nquantizer = q.json\nsnr_db = 1.5",
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(cfg.rates, RateSpec::Fixed(vec![0.5, 0.75, 0.5, 0.5]));
        assert_eq!(cfg.schemes, vec![Scheme::TcqCf, Scheme::Bicm]);
        assert_eq!(cfg.quantizer, QuantizerSource::File(PathBuf::from("/cfg/q.json")));
        assert_eq!(cfg.snr_db, vec![1.5]);
        let ch = cfg.channel_at(10.0);
        assert!((ch.ps - 10.0).abs() < 1e-12 && (ch.pr - 10.0).abs() < 1e-12);
    }
}
