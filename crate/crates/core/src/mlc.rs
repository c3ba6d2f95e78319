//! Multilevel bit-stream handling and Monte Carlo mutual-information
//! estimates used to pick per-level code rates.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::constellation::{level_llr_with_prefix, Constellation};
use crate::math::{self, complex_gaussian, MeanAccumulator};
use crate::tcq::model::{PointTable, QuantizerModel};
use crate::{Error, Point, Result};

/// Round-robin split: stream `i` holds the bits at positions `i mod m`.
pub fn split_streams(bits: &[u8], m: usize) -> Result<Vec<Vec<u8>>> {
    if m == 0 || bits.len() % m != 0 {
        return Err(Error::LengthMismatch {
            what: "bit stream (must be a multiple of the level count)",
            expected: bits.len().div_ceil(m.max(1)) * m.max(1),
            got: bits.len(),
        });
    }
    let mut streams = vec![Vec::with_capacity(bits.len() / m); m];
    for (i, &b) in bits.iter().enumerate() {
        streams[i % m].push(b);
    }
    Ok(streams)
}

/// Inverse of `split_streams`.
pub fn merge_streams(streams: &[Vec<u8>]) -> Result<Vec<u8>> {
    let len = streams.first().map(Vec::len).unwrap_or(0);
    if let Some(bad) = streams.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch { what: "stream", expected: len, got: bad.len() });
    }
    let mut out = Vec::with_capacity(len * streams.len());
    for j in 0..len {
        out.extend(streams.iter().map(|s| s[j]));
    }
    Ok(out)
}

/// A Monte Carlo estimate in bits with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub mi: f64,
    pub stderr: f64,
}

impl MiEstimate {
    fn from_acc(acc: &MeanAccumulator) -> Self {
        Self { mi: acc.mean(), stderr: acc.std_error() }
    }
}

/// What the destination observes about the source after interference
/// cancellation: the direct link and, optionally, the relay's
/// reconstruction label.
#[derive(Clone, Copy, Debug)]
pub struct SystemModel<'a> {
    pub constellation: &'a Constellation,
    pub channel: ChannelParams,
    pub relay: Option<(&'a QuantizerModel, &'a PointTable)>,
}

impl SystemModel<'_> {
    fn direct_gain(&self) -> f64 {
        self.channel.h13 * math::sqrt(self.channel.ps)
    }

    /// Log posterior (unnormalized) of each source symbol.
    fn log_post(&self, y13: Point, label: Option<usize>, out: &mut [f64]) {
        self.constellation
            .log_likelihoods_into(y13, self.channel.h13, self.channel.ps, self.channel.n3_var, out);
        if let (Some((_, table)), Some(l)) = (self.relay, label) {
            for (x, o) in out.iter_mut().enumerate() {
                *o += math::ln(table.get(x, l).max(1e-300));
            }
        }
    }
}

struct Sample {
    x: usize,
    y13: Point,
    y2: Point,
    label: Option<usize>,
}

fn draw(model: &SystemModel<'_>, rng: &mut ChaCha8Rng) -> Sample {
    let c = model.constellation;
    let ch = &model.channel;
    let x = rng.random_range(0..c.size());
    let p = c.point(x);
    let y13 = p * model.direct_gain() + complex_gaussian(rng, ch.n3_var);
    let y2 = p * (ch.h12 * math::sqrt(ch.ps)) + complex_gaussian(rng, ch.n2_var);
    let label = model.relay.map(|(q, _)| q.sample_label(x, y2, rng));
    Sample { x, y13, y2, label }
}

/// Per-level estimates of `I(A_i; Y_hat2, Y13 | A^{i-1})` (relay included
/// when the model has one) plus the symbol-wise total.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelMis {
    pub levels: Vec<MiEstimate>,
    pub total: MiEstimate,
}

pub fn mi_source_levels(model: &SystemModel<'_>, samples: usize, seed: u64) -> Result<LevelMis> {
    model.channel.validate()?;
    let c = model.constellation;
    let m = c.bits_per_symbol();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accs = vec![MeanAccumulator::new(); m];
    let mut total = MeanAccumulator::new();
    let mut post = vec![0.0; c.size()];
    for _ in 0..samples {
        let s = draw(model, &mut rng);
        model.log_post(s.y13, s.label, &mut post);
        math::softmax_in_place(&mut post);
        let mut sum_levels = 0.0;
        for (i, acc) in accs.iter_mut().enumerate() {
            let term = level_term(&post, s.x, i);
            sum_levels += term;
            acc.push(term);
        }
        total.push(sum_levels);
    }
    Ok(LevelMis {
        levels: accs.iter().map(MiEstimate::from_acc).collect(),
        total: MiEstimate::from_acc(&total),
    })
}

/// `1 + log2 P(a_i | y, a^{i-1})` for the true symbol `x`.
fn level_term(post: &[f64], x: usize, level: usize) -> f64 {
    let mask = (1usize << level) - 1;
    let prefix = x & mask;
    let bit = (x >> level) & 1;
    let (mut same, mut all) = (0.0, 0.0);
    for (l, &p) in post.iter().enumerate() {
        if l & mask == prefix {
            all += p;
            if (l >> level) & 1 == bit {
                same += p;
            }
        }
    }
    if all <= 0.0 {
        return 0.0;
    }
    1.0 + math::log2((same / all).max(1e-300))
}

/// Estimate of `I(A_i; Y_hat2, Y13 | A^{i-1})` for one level (1-based).
pub fn mi_source_level(level: usize, model: &SystemModel<'_>, samples: usize, seed: u64) -> Result<MiEstimate> {
    let m = model.constellation.bits_per_symbol();
    if level == 0 || level > m {
        return Err(Error::InvalidParameter(alloc::format!("level {level} outside 1..={m}")));
    }
    Ok(mi_source_levels(model, samples, seed)?.levels[level - 1])
}

/// Both sides of the relay-rate constraint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelayConstraint {
    /// Rate the destination needs to resolve the relay description given
    /// the direct link.
    pub lhs: MiEstimate,
    /// Rate the relay link supports.
    pub rhs: MiEstimate,
    pub feasible: bool,
}

/// `lhs = H(Y_hat | Y13) - H(Y_hat | Y2, X1)` over reconstruction labels and
/// `rhs = I(X2; Y23)` with the interference treated as Gaussian noise.
pub fn mi_relay_constraint(model: &SystemModel<'_>, samples: usize, seed: u64) -> Result<RelayConstraint> {
    model.channel.validate()?;
    let Some((quant, table)) = model.relay else {
        return Err(Error::InvalidParameter("relay constraint needs a quantizer model".into()));
    };
    let c = model.constellation;
    let ch = &model.channel;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lhs = MeanAccumulator::new();
    let mut rhs = MeanAccumulator::new();
    let mut post = vec![0.0; c.size()];
    let log_m = math::log2(c.size() as f64);
    let y23_var = ch.y23_noise_var();
    for _ in 0..samples {
        let s = draw(model, &mut rng);
        let label = s.label.expect("relay present");
        model.log_post(s.y13, None, &mut post);
        math::softmax_in_place(&mut post);
        let p_given_direct: f64 = post.iter().enumerate().map(|(x, &p)| p * table.get(x, label)).sum();
        let p_given_relay: f64 = quant.choice_probs[s.x]
            .iter()
            .enumerate()
            .filter(|&(i, _)| quant.quantize_with(i, s.y2) == label)
            .map(|(_, &w)| w)
            .sum();
        lhs.push(math::log2(p_given_relay.max(1e-300)) - math::log2(p_given_direct.max(1e-300)));

        let x2 = rng.random_range(0..c.size());
        let y23 = c.map_label(x2, ch.pr) * ch.h23 + complex_gaussian(&mut rng, y23_var);
        c.log_likelihoods_into(y23, ch.h23, ch.pr, y23_var, &mut post);
        math::softmax_in_place(&mut post);
        rhs.push(log_m + math::log2(post[x2].max(1e-300)));
    }
    let (l, r) = (MiEstimate::from_acc(&lhs), MiEstimate::from_acc(&rhs));
    let se = math::sqrt(l.stderr * l.stderr + r.stderr * r.stderr);
    Ok(RelayConstraint { lhs: l, rhs: r, feasible: l.mi <= r.mi + 2.0 * se })
}

/// Chain-rule check on a point-to-point AWGN link: per-level estimates from
/// `level_llr`, the symbol-wise estimate from the posterior, both on the
/// same samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainRuleReport {
    pub levels: Vec<MiEstimate>,
    pub joint: MiEstimate,
    pub level_sum: f64,
    pub deviation: f64,
    /// Standard error of the per-sample difference between the two sides.
    pub deviation_stderr: f64,
    /// Combined standard error of the two sides.
    pub combined_stderr: f64,
}

pub fn mi_chainrule_check(
    constellation: &Constellation,
    gain: f64,
    power: f64,
    noise_var: f64,
    samples: usize,
    seed: u64,
) -> Result<ChainRuleReport> {
    if !(noise_var > 0.0) {
        return Err(Error::NonPositiveNoise(noise_var));
    }
    let m = constellation.bits_per_symbol();
    let log_m = m as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accs = vec![MeanAccumulator::new(); m];
    let mut joint = MeanAccumulator::new();
    let mut diff = MeanAccumulator::new();
    let mut sum = MeanAccumulator::new();
    let mut post = vec![0.0; constellation.size()];
    for _ in 0..samples {
        let x = rng.random_range(0..constellation.size());
        let y = constellation.map_label(x, power) * gain + complex_gaussian(&mut rng, noise_var);
        constellation.log_likelihoods_into(y, gain, power, noise_var, &mut post);
        math::softmax_in_place(&mut post);
        let mut s = 0.0;
        for (i, acc) in accs.iter_mut().enumerate() {
            let llr = level_llr_with_prefix(&post, i, x & ((1 << i) - 1));
            let signed = if (x >> i) & 1 == 0 { llr } else { -llr };
            // log2 P(bit) = -softplus(-signed) / ln 2
            let term = 1.0 - math::softplus(-signed) / math::LN_2;
            s += term;
            acc.push(term);
        }
        let j = log_m + math::log2(post[x].max(1e-300));
        joint.push(j);
        sum.push(s);
        diff.push(s - j);
    }
    let levels: Vec<MiEstimate> = accs.iter().map(MiEstimate::from_acc).collect();
    let joint_est = MiEstimate::from_acc(&joint);
    let level_sum: f64 = levels.iter().map(|e| e.mi).sum();
    let (a, b) = (sum.std_error(), joint_est.stderr);
    let combined = math::sqrt(a * a + b * b);
    Ok(ChainRuleReport {
        levels,
        joint: joint_est,
        level_sum,
        deviation: (level_sum - joint_est.mi).abs(),
        deviation_stderr: diff.std_error(),
        combined_stderr: combined,
    })
}

/// Per-level rate assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub levels: Vec<f64>,
    pub total: f64,
    /// `mi - rate` per level.
    pub slack: Vec<f64>,
}

impl RateProfile {
    /// Profile from explicit rates, without reference estimates.
    pub fn fixed(levels: Vec<f64>) -> Result<Self> {
        if levels.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
            return Err(Error::InvalidParameter("rates must lie in [0, 1]".into()));
        }
        let total = levels.iter().sum();
        let slack = vec![0.0; levels.len()];
        Ok(Self { levels, total, slack })
    }
}

/// Picks, per level, the largest available rate not exceeding the estimate
/// minus `margin`.
pub fn assign_rates(mis: &[f64], available: &[f64], margin: f64) -> Result<RateProfile> {
    if available.is_empty() {
        return Err(Error::InvalidParameter("no available code rates".into()));
    }
    const TOL: f64 = 1e-12;
    let mut levels = Vec::with_capacity(mis.len());
    for (i, &mi) in mis.iter().enumerate() {
        let cap = mi - margin;
        let best = available
            .iter()
            .copied()
            .filter(|&r| r <= cap + TOL)
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
        match best {
            Some(r) => levels.push(r),
            None => return Err(Error::NoRateFits { level: i + 1, mi, margin }),
        }
    }
    let total = levels.iter().sum();
    let slack = mis.iter().zip(&levels).map(|(m, r)| m - r).collect();
    Ok(RateProfile { levels, total, slack })
}
