//! Exact bitwise MAP decoding of small instances by enumeration, used to
//! check the iterative decoder.
//!
//! The posterior of a source block is
//! `p(x1 | y) ∝ p(y13 | x1) * sum_u p(y23 | x2(u)) * prod_t T[x1_t][label_t(u)]`
//! where `u` runs over all quantizer bit sequences, `label_t(u)` is the
//! trellis output and `x2(u)` the relay codeword parity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::layout::{RelayLayout, SourceLayout};
use super::{JointConfig, JointDecoder, RelaySide};
use crate::channel::ChannelParams;
use crate::constellation::{Constellation, ModulationKind};
use crate::ldpc::LdpcCode;
use crate::math::{self, clamp_llr, complex_gaussian, llr_from_masses};
use crate::tcq::model::{PointTable, QuantizerFamily, QuantizerModel};
use crate::tcq::optimize::{build_model, OptimizeSettings};
use crate::tcq::trellis::{GeneratorMatrix, Trellis};
use crate::tcq::viterbi::viterbi_quantize;
use crate::tcq::CodebookParams;
use crate::{Error, Point, Result};

/// Largest instance accepted.
pub const MAX_SOURCE_INFO_BITS: usize = 12;
pub const MAX_STEPS: usize = 4;
pub const MAX_QUANTIZER_BITS: usize = 16;

/// Symbols per block of the toy instances.
pub const TOY_SYMBOLS: usize = 4;

/// Single parity-check code of length 4, one per level.
pub fn toy_source_codes(levels: usize) -> Vec<LdpcCode> {
    (0..levels)
        .map(|_| LdpcCode::from_checks(TOY_SYMBOLS, vec![vec![0, 1, 2, 3]]).expect("valid toy code"))
        .collect()
}

/// Systematic (8, 4) codes, information at 0..4, parity at 4..8.
pub fn toy_relay_codes(count: usize) -> Vec<LdpcCode> {
    let checks = vec![vec![0, 1, 4], vec![1, 2, 5], vec![2, 3, 6], vec![3, 0, 7]];
    (0..count)
        .map(|_| LdpcCode::from_checks(2 * TOY_SYMBOLS, checks.clone()).expect("valid toy code"))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapDecision {
    /// Posterior LLR of every source codeword bit, per code.
    pub llrs: Vec<Vec<f64>>,
    pub bits: Vec<Vec<u8>>,
}

fn normalized_likelihoods(
    constellation: &crate::constellation::Constellation,
    y: &[Point],
    gain: f64,
    power: f64,
    noise_var: f64,
) -> Vec<f64> {
    let size = constellation.size();
    let mut out = vec![0.0; y.len() * size];
    for (j, &v) in y.iter().enumerate() {
        let row = &mut out[j * size..(j + 1) * size];
        constellation.log_likelihoods_into(v, gain, power, noise_var, row);
        math::softmax_in_place(row);
    }
    out
}

fn all_codewords(code: &LdpcCode) -> Result<Vec<Vec<u8>>> {
    let k = code.k();
    (0..1usize << k)
        .map(|m| {
            let info: Vec<u8> = (0..k).map(|i| ((m >> i) & 1) as u8).collect();
            code.encode(&info)
        })
        .collect()
}

fn tilde_of_index(index: usize, count: usize) -> Vec<u8> {
    (0..count).map(|i| ((index >> i) & 1) as u8).collect()
}

/// Factor-graph weight of one joint configuration: direct-link likelihood,
/// transition table along the trellis path of `tilde`, and relay-link
/// likelihood of the relay codeword. Likelihoods are normalized per symbol.
pub fn factor_graph_weight(
    dec: &JointDecoder<'_>,
    y13: &[Point],
    y23: &[Point],
    source_labels: &[usize],
    tilde: &[u8],
) -> Result<f64> {
    let r = dec.relay.as_ref().ok_or(Error::InvalidParameter("no relay side".into()))?;
    let ch = &dec.channel;
    let c = dec.constellation;
    if source_labels.len() != y13.len() {
        return Err(Error::LengthMismatch { what: "source labels", expected: y13.len(), got: source_labels.len() });
    }
    let l13 = normalized_likelihoods(c, y13, ch.h13, ch.ps, ch.n3_var);
    let l23 = normalized_likelihoods(r.constellation, y23, ch.h23, ch.pr, ch.y23_noise_var());
    let k = r.trellis.inputs();
    let inputs = crate::tcq::viterbi::inputs_from_bits(tilde, k);
    let (labels, _) = r.trellis.encode(&inputs);
    let relay_labels = r.layout.encode(r.codes, tilde)?;
    let mut w = 1.0;
    for (j, &x) in source_labels.iter().enumerate() {
        w *= l13[j * c.size() + x] * r.table.get(x, labels[j]);
    }
    let rs = r.constellation.size();
    for (q, &l) in relay_labels.iter().enumerate() {
        w *= l23[q * rs + l];
    }
    Ok(w)
}

/// Exact bitwise MAP decisions for every source codeword bit.
pub fn map_rule_reference(dec: &JointDecoder<'_>, y13: &[Point], y23: Option<&[Point]>) -> Result<MapDecision> {
    dec.check(y13, y23)?;
    let info_bits: usize = dec.source_codes.iter().map(LdpcCode::k).sum();
    if info_bits > MAX_SOURCE_INFO_BITS {
        return Err(Error::TooLarge(format!("{info_bits} source information bits")));
    }
    let c = dec.constellation;
    let size = c.size();
    let ch = &dec.channel;
    let l13 = normalized_likelihoods(c, y13, ch.h13, ch.ps, ch.n3_var);

    // relay side contracted to a table indexed by the last symbols and the
    // first labels
    let relay = match (&dec.relay, y23) {
        (Some(r), Some(y23)) => {
            let steps = r.layout.steps;
            let k = r.trellis.inputs();
            if steps > MAX_STEPS || steps * k > MAX_QUANTIZER_BITS {
                return Err(Error::TooLarge(format!("{steps} trellis steps with {k} bits each")));
            }
            let nl = r.trellis.num_labels();
            let rs = r.constellation.size();
            let l23 = normalized_likelihoods(r.constellation, y23, ch.h23, ch.pr, ch.y23_noise_var());
            let a = steps / 2;
            let b = steps - a;
            let width = nl.pow(a as u32);
            let mut table = vec![0.0; size.pow(b as u32) * width];
            let mut tail = Vec::new();
            for index in 0..1usize << (steps * k) {
                let tilde = tilde_of_index(index, steps * k);
                let relay_labels = r.layout.encode(r.codes, &tilde)?;
                let w: f64 = relay_labels.iter().enumerate().map(|(q, &l)| l23[q * rs + l]).product();
                if w == 0.0 {
                    continue;
                }
                let inputs = crate::tcq::viterbi::inputs_from_bits(&tilde, k);
                let (labels, _) = r.trellis.encode(&inputs);
                let head = labels[..a].iter().rev().fold(0, |acc, &l| acc * nl + l);
                tail.clear();
                tail.push(w);
                for &l in &labels[a..] {
                    let prev = core::mem::take(&mut tail);
                    for x in 0..size {
                        let t = r.table.get(x, l);
                        tail.extend(prev.iter().map(|&p| p * t));
                    }
                }
                for (xb, &v) in tail.iter().enumerate() {
                    table[xb * width + head] += v;
                }
            }
            Some((r, a, width, table))
        }
        _ => None,
    };

    let codewords: Vec<Vec<Vec<u8>>> = dec.source_codes.iter().map(all_codewords).collect::<Result<_>>()?;
    let mut m0: Vec<Vec<f64>> = dec.source_codes.iter().map(|c| vec![0.0; c.n()]).collect();
    let mut m1 = m0.clone();
    let mut pick = vec![0usize; codewords.len()];
    let mut chosen: Vec<Vec<u8>> = codewords.iter().map(|c| c[0].clone()).collect();
    let mut head = Vec::new();
    loop {
        for (i, &p) in pick.iter().enumerate() {
            chosen[i].clone_from(&codewords[i][p]);
        }
        let labels = dec.source_layout.labels(&chosen);
        let mut w: f64 = labels.iter().enumerate().map(|(j, &x)| l13[j * size + x]).product();
        if w > 0.0 {
            if let Some((r, a, width, table)) = &relay {
                let tail_index = labels[*a..].iter().rev().fold(0, |acc, &x| acc * size + x);
                head.clear();
                head.push(1.0);
                for &x in &labels[..*a] {
                    let prev = core::mem::take(&mut head);
                    for &t in r.table.row(x) {
                        head.extend(prev.iter().map(|&p| p * t));
                    }
                }
                let row = &table[tail_index * width..(tail_index + 1) * width];
                w *= row.iter().zip(&head).map(|(m, h)| m * h).sum::<f64>();
            }
        }
        if w > 0.0 {
            for (cw, (z, o)) in chosen.iter().zip(m0.iter_mut().zip(m1.iter_mut())) {
                for (p, &bit) in cw.iter().enumerate() {
                    if bit == 0 {
                        z[p] += w;
                    } else {
                        o[p] += w;
                    }
                }
            }
        }
        // next combination
        let mut i = 0;
        while i < pick.len() {
            pick[i] += 1;
            if pick[i] < codewords[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
        if i == pick.len() {
            break;
        }
    }
    let llrs: Vec<Vec<f64>> = m0
        .iter()
        .zip(&m1)
        .map(|(z, o)| z.iter().zip(o).map(|(&a, &b)| clamp_llr(llr_from_masses(a, b))).collect())
        .collect();
    let bits = llrs.iter().map(|v| v.iter().map(|&l| u8::from(l < 0.0)).collect()).collect();
    Ok(MapDecision { llrs, bits })
}

/// Complete toy system: constellation, relay quantizer and the toy codes.
#[derive(Clone, Debug)]
pub struct ToySetup {
    pub constellation: Constellation,
    pub trellis: Trellis,
    pub model: QuantizerModel,
    pub table: PointTable,
    pub source_codes: Vec<LdpcCode>,
    pub source_layout: SourceLayout,
    pub relay_codes: Vec<LdpcCode>,
    pub relay_layout: RelayLayout,
    pub channel: ChannelParams,
}

/// One transmitted toy block and what the destination sees.
#[derive(Clone, Debug, PartialEq)]
pub struct ToySample {
    pub codewords: Vec<Vec<u8>>,
    pub tilde: Vec<u8>,
    pub y13: Vec<Point>,
    pub y23: Vec<Point>,
}

impl ToySetup {
    /// Relay quantizer on the default trellis with its codebook scaled to
    /// the relay observation.
    pub fn new(kind: ModulationKind, channel: ChannelParams, seed: u64) -> Result<Self> {
        let constellation = Constellation::build(kind);
        let generator = GeneratorMatrix::relay_default();
        let trellis = Trellis::build(&generator)?;
        let params = CodebookParams { kind, scale: channel.h12 * math::sqrt(channel.ps), ring_ratio: 1.5 };
        let settings = OptimizeSettings {
            family: QuantizerFamily::StateUnion,
            choice_samples_per_symbol: 2_000,
            seed,
            ..OptimizeSettings::default()
        };
        let (model, table) = build_model(&generator, params, &constellation, &channel, &settings)?;
        let levels = constellation.bits_per_symbol();
        let relay_codes = toy_relay_codes(trellis.inputs());
        let relay_layout = RelayLayout::per_level(&relay_codes, TOY_SYMBOLS, trellis.inputs(), levels)?;
        Ok(Self {
            source_codes: toy_source_codes(levels),
            source_layout: SourceLayout::per_level(TOY_SYMBOLS, levels),
            constellation,
            trellis,
            model,
            table,
            relay_codes,
            relay_layout,
            channel,
        })
    }

    pub fn decoder(&self, config: JointConfig) -> JointDecoder<'_> {
        JointDecoder {
            constellation: &self.constellation,
            source_codes: &self.source_codes,
            source_layout: &self.source_layout,
            relay: Some(RelaySide {
                constellation: &self.constellation,
                trellis: &self.trellis,
                table: &self.table,
                codes: &self.relay_codes,
                layout: &self.relay_layout,
            }),
            channel: self.channel,
            config,
        }
    }

    /// Random source block through the relay chain. The relay-link view
    /// carries the next source block as interference.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ToySample> {
        let ch = &self.channel;
        let codewords: Vec<Vec<u8>> = self
            .source_codes
            .iter()
            .map(|c| {
                let info: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2u8)).collect();
                c.encode(&info)
            })
            .collect::<Result<_>>()?;
        let labels = self.source_layout.labels(&codewords);
        let x1: Vec<Point> = labels.iter().map(|&l| self.constellation.map_label(l, ch.ps)).collect();
        let y2 = ch.relay_observe(&x1, rng);
        let q = viterbi_quantize(&self.trellis, &self.model.codebook, &y2)?;
        let tilde = q.tilde_bits(self.trellis.inputs());
        let relay_labels = self.relay_layout.encode(&self.relay_codes, &tilde)?;
        let y13 = x1.iter().map(|&x| x * ch.h13 + complex_gaussian(rng, ch.n3_var)).collect();
        let size = self.constellation.size();
        let y23 = relay_labels
            .iter()
            .map(|&l| {
                let next = self.constellation.map_label(rng.random_range(0..size), 1.0);
                self.constellation.map_label(l, ch.pr) * ch.h23
                    + next * math::sqrt(ch.interference_power())
                    + complex_gaussian(rng, ch.n3_var)
            })
            .collect();
        Ok(ToySample { codewords, tilde, y13, y23 })
    }
}
