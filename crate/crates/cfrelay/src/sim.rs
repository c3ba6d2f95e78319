//! Block pipeline and Monte Carlo sweeps.
//!
//! A trial sends `blocks_per_trial` coded source blocks plus one trailing
//! uncoded block. The relay is silent during block 0 and during block `t + 1`
//! forwards the parity of its quantization of block `t`. Block `t` is
//! decoded from the direct-link view of `y3[t]` (the relay symbols decoded
//! with block `t - 1` cancelled) and from `y3[t + 1]`, which carries the
//! relay's description of block `t`. Relay decoding errors therefore
//! propagate through the cancellation, as they would on air.

use anyhow::{bail, Context, Result};
use cfrelay_core::channel::ChannelParams;
use cfrelay_core::constellation::{Constellation, Labeling};
use cfrelay_core::joint::{FinalStage, JointConfig, JointDecoder, RelayLayout, RelaySide, SourceLayout};
use cfrelay_core::ldpc::LdpcCode;
use cfrelay_core::mlc::{assign_rates, mi_source_levels, RateProfile, SystemModel};
use cfrelay_core::scalar::design_product_model;
use cfrelay_core::tcq::optimize::build_model;
use cfrelay_core::tcq::{
    optimize_boundaries, optimize_distortion, viterbi_quantize, CodebookParams, GeneratorMatrix, OptimizeSettings,
    PointTable, QuantizerModel, SearchGrid, Trellis,
};
use cfrelay_core::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{QuantizerSearch, QuantizerSource, RateSpec, Scheme, SimConfig};
use crate::files;

const LEVELS: usize = 4;
/// Outer ring over inner ring radius of the PSK reconstruction codebook.
const PSK_RING_RATIO: f64 = 1.5;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial. Depends only on the sweep seed and the trial's
/// coordinates, so results do not depend on scheduling, and all schemes see
/// the same source bits and noise at a given point.
pub fn trial_seed(seed: u64, snr_index: usize, trial: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ snr_index as u64) ^ trial as u64)
}

/// Exact integer tallies; merged in any order with the same result.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub bit_errors: u64,
    pub bits: u64,
    pub block_errors: u64,
    pub blocks: u64,
    pub iterations: u64,
    /// Sum over blocks of the squared bit-error count.
    pub squared_errors: u128,
}

impl Counts {
    pub fn merge(mut self, o: Counts) -> Counts {
        self.bit_errors += o.bit_errors;
        self.bits += o.bits;
        self.block_errors += o.block_errors;
        self.blocks += o.blocks;
        self.iterations += o.iterations;
        self.squared_errors += o.squared_errors;
        self
    }
}

/// Outcome of one decoded block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockReport {
    pub bit_errors: u64,
    pub iterations: usize,
    /// Every source code ended with a zero syndrome.
    pub converged: bool,
    /// Relay symbols whose re-encoded decision differs from what was sent;
    /// these are cancelled wrongly from the next block.
    pub relay_symbol_errors: usize,
    pub relay_converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub trials: usize,
    pub counts: Counts,
    pub ber: f64,
    /// Half-width of the 95% interval, from the spread of per-block error
    /// counts (bit errors cluster within blocks).
    pub ber_ci95: f64,
    pub fer: f64,
    pub fer_ci95: f64,
    pub mean_iters: f64,
}

impl SweepRow {
    pub fn new(scheme: Scheme, snr_db: f64, trials: usize, c: Counts) -> Self {
        let blocks = c.blocks as f64;
        let ber = if c.bits == 0 { 0.0 } else { c.bit_errors as f64 / c.bits as f64 };
        let fer = if c.blocks == 0 { 0.0 } else { c.block_errors as f64 / blocks };
        let (ber_ci95, fer_ci95) = if c.blocks < 2 {
            (f64::NAN, f64::NAN)
        } else {
            let per_block = c.bits as f64 / blocks;
            let sum = c.bit_errors as f64;
            let var = ((c.squared_errors as f64 - sum * sum / blocks) / (blocks - 1.0)).max(0.0);
            (
                1.96 * (var / blocks).sqrt() / per_block,
                1.96 * (fer * (1.0 - fer) / blocks).sqrt(),
            )
        };
        let mean_iters = if c.blocks == 0 { 0.0 } else { c.iterations as f64 / blocks };
        SweepRow { scheme, snr_db, trials, counts: c, ber, ber_ci95, fer, fer_ci95, mean_iters }
    }
}

/// Relay quantizer of one scheme at one SNR.
pub struct RelayModel {
    pub trellis: Trellis,
    pub model: QuantizerModel,
    pub table: PointTable,
}

impl RelayModel {
    /// Trellis quantizer for the observation of `source` symbols.
    pub fn tcq(cfg: &SimConfig, source: &Constellation, ch: &ChannelParams) -> Result<Self> {
        let settings = OptimizeSettings {
            family: cfg.quantizer_family,
            choice_samples_per_symbol: cfg.choice_samples,
            mi_samples: cfg.mi_samples,
            mse_samples: cfg.mi_samples,
            seed: cfg.seed,
        };
        let generator = GeneratorMatrix::relay_default();
        let (model, table) = match (&cfg.quantizer, cfg.quantizer_search) {
            (QuantizerSource::File(path), _) => {
                let mut model = files::load_quantizer(path, source.size())?;
                if model.params.kind != source.kind() {
                    bail!("{}: quantizer designed for {}", path.display(), model.params.kind.name());
                }
                if model.family.is_some() {
                    model.estimate_choice_probs(source, ch, cfg.choice_samples, cfg.seed)?;
                }
                let table = model.conditional_point_prob(source, ch)?;
                (model, table)
            }
            (QuantizerSource::Design, QuantizerSearch::None) => {
                let params = CodebookParams { kind: source.kind(), scale: ch.h12 * ch.ps.sqrt(), ring_ratio: PSK_RING_RATIO };
                build_model(&generator, params, source, ch, &settings)?
            }
            (QuantizerSource::Design, search) => {
                let grid = SearchGrid::default_for(source.kind());
                let opt = if search == QuantizerSearch::Rate {
                    optimize_boundaries(&generator, source, ch, &grid, &settings)?
                } else {
                    optimize_distortion(&generator, source, ch, &grid, &settings)?
                };
                (opt.model, opt.table)
            }
        };
        Ok(RelayModel { trellis: model.trellis()?, model, table })
    }

    /// Per-dimension Lloyd-Max quantizer with 2 bits per real dimension.
    pub fn scalar(cfg: &SimConfig, source: &Constellation, ch: &ChannelParams) -> Result<Self> {
        let model = design_product_model(source, ch, 4, cfg.mi_samples.max(10_000), cfg.seed)?;
        let table = model.conditional_point_prob(source, ch)?;
        Ok(RelayModel { trellis: model.trellis()?, model, table })
    }
}

/// Codes and layouts of one scheme; fixed across SNR points.
pub struct SchemeCodes {
    pub scheme: Scheme,
    pub constellation: Constellation,
    pub source: Vec<LdpcCode>,
    pub source_layout: SourceLayout,
    pub info_bits: usize,
}

pub struct RelayCodes {
    pub constellation: Constellation,
    pub codes: Vec<LdpcCode>,
    pub layout: RelayLayout,
}

fn build_constellation(cfg: &SimConfig, labeling: Labeling) -> Constellation {
    match labeling {
        Labeling::SetPartition => Constellation::build(cfg.modulation),
        Labeling::Gray => Constellation::build_gray(cfg.modulation),
    }
}

/// `k_i = round(R_i * n)`.
pub fn info_lengths(rates: &[f64], n: usize) -> Vec<usize> {
    rates.iter().map(|r| (r * n as f64).round() as usize).collect()
}

impl SchemeCodes {
    pub fn build(cfg: &SimConfig, scheme: Scheme, rates: &[f64]) -> Result<Self> {
        let n = cfg.symbols;
        let (constellation, source, source_layout) = if scheme == Scheme::Bicm {
            let c = build_constellation(cfg, Labeling::Gray);
            let code = if cfg.source_alist.len() == 1 {
                files::load_alist(&cfg.source_alist[0])?
            } else if !cfg.source_alist.is_empty() {
                bail!("invalid geometry: bicm takes one source alist file, got {}", cfg.source_alist.len());
            } else {
                let total: f64 = rates.iter().sum();
                let k = (total * n as f64).round() as usize;
                LdpcCode::gen_column_regular(LEVELS * n, k, cfg.source_col_weight, cfg.code_seed.wrapping_add(100))
                    .context("generating the bicm code")?
            };
            if code.n() != LEVELS * n {
                bail!("invalid geometry: bicm code length {} for {n} symbols", code.n());
            }
            let layout = SourceLayout::interleaved(n, LEVELS, 1, cfg.code_seed)?;
            (c, vec![code], layout)
        } else {
            let c = build_constellation(cfg, cfg.labeling);
            let codes = if cfg.source_alist.len() == LEVELS {
                cfg.source_alist.iter().map(|p| files::load_alist(p)).collect::<Result<Vec<_>, _>>()?
            } else if !cfg.source_alist.is_empty() {
                bail!("invalid geometry: {scheme} takes {LEVELS} source alist files, got {}", cfg.source_alist.len());
            } else {
                info_lengths(rates, n)
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| {
                        LdpcCode::gen_column_regular(n, k, cfg.source_col_weight, cfg.code_seed.wrapping_add(i as u64))
                            .with_context(|| format!("generating the level {} code", i + 1))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            if let Some(bad) = codes.iter().find(|c| c.n() != n) {
                bail!("invalid geometry: source code length {} for {n} symbols", bad.n());
            }
            (c, codes, SourceLayout::per_level(n, LEVELS))
        };
        let info_bits = source.iter().map(LdpcCode::k).sum();
        Ok(SchemeCodes { scheme, constellation, source, source_layout, info_bits })
    }
}

impl RelayCodes {
    pub fn build(cfg: &SimConfig) -> Result<Self> {
        let n = cfg.symbols;
        let codes = if cfg.relay_alist.is_empty() {
            (0..LEVELS)
                .map(|r| {
                    LdpcCode::gen_column_regular(2 * n, n, cfg.relay_col_weight, cfg.code_seed.wrapping_add(200 + r as u64))
                        .with_context(|| format!("generating relay code {}", r + 1))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            cfg.relay_alist.iter().map(|p| files::load_alist(p)).collect::<Result<Vec<_>, _>>()?
        };
        let layout = RelayLayout::per_level(&codes, n, LEVELS, LEVELS)
            .or_else(|_| RelayLayout::concatenated(&codes, n, LEVELS, LEVELS))
            .context("invalid geometry: relay codes")?;
        if layout.symbols != n {
            bail!("invalid geometry: relay parity fills {} symbols, expected {n}", layout.symbols);
        }
        Ok(RelayCodes { constellation: build_constellation(cfg, cfg.labeling), codes, layout })
    }
}

/// Source rates per level, with the profile when they were assigned from
/// mutual-information estimates.
pub fn resolve_rates(cfg: &SimConfig) -> Result<(Vec<f64>, Option<RateProfile>)> {
    match &cfg.rates {
        RateSpec::Fixed(r) => Ok((r.clone(), None)),
        RateSpec::Auto => {
            let c = build_constellation(cfg, cfg.labeling);
            let ch = cfg.channel_at(cfg.rate_design_snr_db);
            let relay = RelayModel::tcq(cfg, &c, &ch)?;
            let sys = SystemModel { constellation: &c, channel: ch, relay: Some((&relay.model, &relay.table)) };
            let mis = mi_source_levels(&sys, cfg.mi_samples, cfg.seed)?;
            let est: Vec<f64> = mis.levels.iter().map(|e| e.mi).collect();
            let profile = assign_rates(&est, &cfg.available_rates, cfg.rate_margin)?;
            Ok((profile.levels.clone(), Some(profile)))
        }
    }
}

/// Everything needed to simulate one scheme at one SNR point.
pub struct PointSetup<'a> {
    pub cfg: &'a SimConfig,
    pub codes: &'a SchemeCodes,
    pub relay_codes: &'a RelayCodes,
    pub relay: Option<RelayModel>,
    pub channel: ChannelParams,
}

impl<'a> PointSetup<'a> {
    pub fn new(cfg: &'a SimConfig, codes: &'a SchemeCodes, relay_codes: &'a RelayCodes, snr_db: f64) -> Result<Self> {
        let channel = cfg.channel_at(snr_db);
        let relay = match codes.scheme {
            Scheme::TcqCf | Scheme::Bicm => Some(RelayModel::tcq(cfg, &codes.constellation, &channel)?),
            Scheme::ScalarCf => Some(RelayModel::scalar(cfg, &codes.constellation, &channel)?),
            Scheme::DirectOnly => None,
        };
        Ok(PointSetup { cfg, codes, relay_codes, relay, channel })
    }

    pub fn decoder(&self) -> JointDecoder<'_> {
        let final_stage = if self.codes.scheme == Scheme::Bicm { FinalStage::Parallel } else { self.cfg.final_stage };
        JointDecoder {
            constellation: &self.codes.constellation,
            source_codes: &self.codes.source,
            source_layout: &self.codes.source_layout,
            relay: self.relay.as_ref().map(|r| RelaySide {
                constellation: &self.relay_codes.constellation,
                trellis: &r.trellis,
                table: &r.table,
                codes: &self.relay_codes.codes,
                layout: &self.relay_codes.layout,
            }),
            channel: self.channel,
            config: JointConfig {
                max_outer_iters: self.cfg.max_outer_iters,
                final_stage,
                relay_to_source: true,
                final_iters: self.cfg.final_iters,
            },
        }
    }

    /// Level rates above the estimated level mutual information.
    pub fn rate_warnings(&self, rates: &[f64]) -> Result<Vec<String>> {
        if self.codes.scheme == Scheme::Bicm {
            return Ok(Vec::new());
        }
        let sys = SystemModel {
            constellation: &self.codes.constellation,
            channel: self.channel,
            relay: self.relay.as_ref().map(|r| (&r.model, &r.table)),
        };
        let mis = mi_source_levels(&sys, self.cfg.mi_samples, self.cfg.seed)?;
        Ok(mis
            .levels
            .iter()
            .zip(rates)
            .enumerate()
            .filter(|(_, (e, &r))| r > e.mi)
            .map(|(i, (e, r))| format!("level {} rate {r} exceeds the estimated mutual information {:.4}", i + 1, e.mi))
            .collect())
    }

    /// One trial; see the module documentation for the block structure.
    pub fn run_trial(&self, rng: &mut ChaCha8Rng) -> Result<Counts> {
        let blocks = self.trial_blocks(rng)?;
        Ok(blocks.iter().fold(Counts::default(), |acc, b| {
            acc.merge(Counts {
                bit_errors: b.bit_errors,
                bits: self.codes.info_bits as u64,
                block_errors: u64::from(b.bit_errors > 0),
                blocks: 1,
                iterations: b.iterations as u64,
                squared_errors: u128::from(b.bit_errors) * u128::from(b.bit_errors),
            })
        }))
    }

    /// One trial with per-block details.
    pub fn trial_blocks(&self, rng: &mut ChaCha8Rng) -> Result<Vec<BlockReport>> {
        let n = self.cfg.symbols;
        let blocks = self.cfg.blocks_per_trial;
        let ch = &self.channel;
        let c = &self.codes.constellation;
        let rc = &self.relay_codes.constellation;

        let mut info = Vec::with_capacity(blocks + 1);
        let mut x1 = Vec::with_capacity(blocks + 1);
        for _ in 0..=blocks {
            let words: Vec<Vec<u8>> =
                self.codes.source.iter().map(|code| (0..code.k()).map(|_| rng.random_range(0..2u8)).collect()).collect();
            let cws = self.codes.source.iter().zip(&words).map(|(code, w)| code.encode(w)).collect::<Result<Vec<_>, _>>()?;
            let labels = self.codes.source_layout.labels(&cws);
            x1.push(labels.iter().map(|&l| c.map_label(l, ch.ps)).collect::<Vec<Point>>());
            info.push(words);
        }

        // relay_labels[t] is sent during block t + 1
        let mut relay_labels = Vec::with_capacity(blocks);
        let mut x2 = vec![vec![Point::ZERO; n]];
        for t in 0..blocks {
            match &self.relay {
                Some(r) => {
                    let y2 = ch.relay_observe(&x1[t], rng);
                    let q = viterbi_quantize(&r.trellis, &r.model.codebook, &y2)?;
                    let tilde = q.tilde_bits(r.trellis.inputs());
                    let labels = self.relay_codes.layout.encode(&self.relay_codes.codes, &tilde)?;
                    x2.push(labels.iter().map(|&l| rc.map_label(l, ch.pr)).collect());
                    relay_labels.push(labels);
                }
                None => x2.push(vec![Point::ZERO; n]),
            }
        }
        let y3 = (0..=blocks).map(|t| ch.destination_observe(&x1[t], &x2[t], rng)).collect::<Result<Vec<_>, _>>()?;

        let dec = self.decoder();
        let mut out_blocks = Vec::with_capacity(blocks);
        let mut x2_hat: Option<Vec<Point>> = None;
        for t in 0..blocks {
            let (out, relay_symbol_errors) = if self.relay.is_some() {
                let sic = ch.sic_decompose(&y3[t + 1], &y3[t], x2_hat.as_deref())?;
                let out = dec.run(&mut dec.init(&sic.y13, Some(&sic.y23))?)?;
                x2_hat = Some(out.relay_labels.iter().map(|&l| rc.map_label(l, ch.pr)).collect());
                let wrong = out.relay_labels.iter().zip(&relay_labels[t]).filter(|(a, b)| a != b).count();
                (out, wrong)
            } else {
                (dec.run(&mut dec.init(&y3[t], None)?)?, 0)
            };
            let bit_errors: u64 = out
                .info
                .iter()
                .zip(&info[t])
                .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count() as u64)
                .sum();
            out_blocks.push(BlockReport {
                bit_errors,
                iterations: out.iterations,
                converged: out.converged.iter().all(|&c| c),
                relay_symbol_errors,
                relay_converged: out.relay_converged,
            });
        }
        Ok(out_blocks)
    }

    /// All trials of one point, in parallel. Per-trial seeds make the result
    /// independent of the thread count.
    pub fn run_point(&self, snr_index: usize) -> Result<Counts> {
        let seed = self.cfg.seed;
        let per_trial = (0..self.cfg.trials)
            .into_par_iter()
            .map(|i| self.run_trial(&mut ChaCha8Rng::seed_from_u64(trial_seed(seed, snr_index, i))))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_trial.into_iter().fold(Counts::default(), Counts::merge))
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub rates: Vec<f64>,
    pub profile: Option<RateProfile>,
    pub warnings: Vec<String>,
}

/// Every scheme of `cfg` at every SNR point, rows in scheme-then-SNR order.
/// `progress` sees each row as it completes.
pub fn run_sweep(cfg: &SimConfig, mut progress: impl FnMut(&SweepRow)) -> Result<SweepResult> {
    cfg.validate()?;
    let (rates, profile) = resolve_rates(cfg)?;
    let relay_codes = RelayCodes::build(cfg)?;
    let mut out = SweepResult { rates: rates.clone(), profile, ..SweepResult::default() };
    for &scheme in &cfg.schemes {
        let codes = SchemeCodes::build(cfg, scheme, &rates)?;
        for (i, &snr) in cfg.snr_db.iter().enumerate() {
            let setup = PointSetup::new(cfg, &codes, &relay_codes, snr)?;
            for w in setup.rate_warnings(&rates)? {
                out.warnings.push(format!("{scheme} at {snr} dB: {w}"));
            }
            let row = SweepRow::new(scheme, snr, cfg.trials, setup.run_point(i)?);
            progress(&row);
            out.rows.push(row);
        }
    }
    Ok(out)
}

/// Runs several configurations over a shared channel and SNR grid and
/// merges their rows.
pub fn compare_baselines(cfgs: &[SimConfig], mut progress: impl FnMut(&SweepRow)) -> Result<SweepResult> {
    let Some(first) = cfgs.first() else {
        bail!("no configurations to compare");
    };
    for c in &cfgs[1..] {
        if c.snr_db != first.snr_db || c.channel != first.channel || c.pr_offset_db != first.pr_offset_db {
            bail!("configurations disagree on the channel or the SNR grid");
        }
    }
    let mut merged = SweepResult::default();
    for c in cfgs {
        let r = run_sweep(c, &mut progress)?;
        merged.rows.extend(r.rows);
        merged.warnings.extend(r.warnings);
        if merged.rates.is_empty() {
            merged.rates = r.rates;
            merged.profile = r.profile;
        }
    }
    Ok(merged)
}
