//! Destination decoder: the source codes and the relay codes are decoded
//! together, coupled through a BCJR pass over the quantizer trellis and the
//! transition table `p(y_hat | x1)`.
//!
//! One outer iteration runs, in order: a sum-product step on every source
//! code; source beliefs to reconstruction-point priors; BCJR to quantizer
//! bit beliefs; a sum-product step on every relay code; BCJR again with the
//! relay beliefs; and reconstruction-point beliefs back to the source
//! symbols. Every message carries extrinsic information only.

pub mod layout;
pub mod reference;

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::ChannelParams;
use crate::constellation::{level_llr_with_prefix, Constellation};
use crate::ldpc::{DecoderState, LdpcCode};
use crate::math::{self, clamp_llr, llr_from_masses, llr_to_p0};
use crate::tcq::bcjr::bcjr_soft;
use crate::tcq::model::PointTable;
use crate::tcq::trellis::Trellis;
use crate::{Error, Point, Result};

pub use layout::{RelayBit, RelayLayout, Slot, SourceLayout};

/// How the final hard decisions are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FinalStage {
    /// Levels in order, each conditioned on the decisions below it.
    Multistage,
    /// Every code from marginal bit beliefs, independently.
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointConfig {
    pub max_outer_iters: usize,
    pub final_stage: FinalStage,
    /// When false no information flows from the relay side to the source
    /// codes.
    pub relay_to_source: bool,
    /// Iteration budget of each standalone decode in the final stage.
    pub final_iters: usize,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 60,
            final_stage: FinalStage::Multistage,
            relay_to_source: true,
            final_iters: 20,
        }
    }
}

/// Relay side of the decoder.
#[derive(Clone, Copy, Debug)]
pub struct RelaySide<'a> {
    pub constellation: &'a Constellation,
    pub trellis: &'a Trellis,
    pub table: &'a PointTable,
    pub codes: &'a [LdpcCode],
    pub layout: &'a RelayLayout,
}

/// Everything the decoder needs that does not change between blocks.
#[derive(Clone, Copy, Debug)]
pub struct JointDecoder<'a> {
    pub constellation: &'a Constellation,
    pub source_codes: &'a [LdpcCode],
    pub source_layout: &'a SourceLayout,
    pub relay: Option<RelaySide<'a>>,
    pub channel: ChannelParams,
    pub config: JointConfig,
}

/// Per-block decoder state.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    symbols: usize,
    levels: usize,
    size: usize,
    /// Direct-link likelihoods, normalized per symbol.
    direct: Vec<f64>,
    /// Relay-side message to each source symbol, normalized.
    from_relay: Vec<f64>,
    src_states: Vec<DecoderState>,
    /// Latest source-code extrinsic per slot.
    src_ext: Vec<f64>,
    /// Latest message into each source slot (channel plus relay side).
    src_in: Vec<f64>,
    relay: Option<RelayState>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct RelayState {
    /// Relay-link likelihoods per relay symbol, normalized.
    likelihood: Vec<f64>,
    states: Vec<DecoderState>,
    /// Latest relay-code extrinsic per codeword position.
    ext: Vec<Vec<f64>>,
    /// Latest channel input per codeword position.
    channel: Vec<Vec<f64>>,
    /// Latest prior (from the trellis) per codeword position.
    prior: Vec<Vec<f64>>,
    /// Reconstruction-point priors per step, from the source side.
    point_priors: Vec<f64>,
}

/// Decisions for one block.
#[derive(Clone, Debug, PartialEq)]
pub struct JointOutput {
    pub codewords: Vec<Vec<u8>>,
    pub info: Vec<Vec<u8>>,
    pub converged: Vec<bool>,
    /// Every relay codeword decision has a zero syndrome (true without a relay).
    pub relay_converged: bool,
    pub iterations: usize,
    /// Labels of the relay symbols re-encoded from the decoded quantizer
    /// bits (empty without a relay).
    pub relay_labels: Vec<usize>,
    /// Decoded quantizer bits (empty without a relay).
    pub tilde_bits: Vec<u8>,
}

const POINT_PRIOR_FLOOR: f64 = 1e-30;

impl<'a> JointDecoder<'a> {
    fn check(&self, y13: &[Point], y23: Option<&[Point]>) -> Result<()> {
        self.channel.validate()?;
        self.source_layout.check_codes(self.source_codes)?;
        if y13.len() != self.source_layout.symbols {
            return Err(Error::LengthMismatch { what: "direct observations", expected: self.source_layout.symbols, got: y13.len() });
        }
        if self.source_layout.levels != self.constellation.bits_per_symbol() {
            return Err(Error::InvalidParameter("source layout levels differ from the constellation".into()));
        }
        if let Some(r) = &self.relay {
            let y23 = y23.ok_or(Error::InvalidParameter("relay side configured without relay observations".into()))?;
            if y23.len() != r.layout.symbols {
                return Err(Error::LengthMismatch { what: "relay observations", expected: r.layout.symbols, got: y23.len() });
            }
            if r.layout.steps != self.source_layout.symbols {
                return Err(Error::LengthMismatch { what: "quantizer steps", expected: self.source_layout.symbols, got: r.layout.steps });
            }
            if r.layout.bits_per_step != r.trellis.inputs() || r.table.labels != r.trellis.num_labels() {
                return Err(Error::InvalidParameter("relay layout, trellis and table disagree".into()));
            }
            if r.table.symbols != self.constellation.size() {
                return Err(Error::InvalidParameter("transition table and constellation disagree".into()));
            }
            for (code, bits) in r.codes.iter().zip(&r.layout.codes) {
                if code.n() != bits.len() {
                    return Err(Error::LengthMismatch { what: "relay code length", expected: bits.len(), got: code.n() });
                }
            }
        }
        Ok(())
    }

    /// Sets up the state from the interference-cancelled observations.
    pub fn init(&self, y13: &[Point], y23: Option<&[Point]>) -> Result<JointState> {
        self.check(y13, y23)?;
        let c = self.constellation;
        let ch = &self.channel;
        let size = c.size();
        let n = y13.len();
        let levels = c.bits_per_symbol();
        let mut direct = vec![0.0; n * size];
        for (j, &y) in y13.iter().enumerate() {
            let row = &mut direct[j * size..(j + 1) * size];
            c.log_likelihoods_into(y, ch.h13, ch.ps, ch.n3_var, row);
            math::softmax_in_place(row);
        }
        let relay = match (&self.relay, y23) {
            (Some(r), Some(y23)) => {
                let rs = r.constellation.size();
                let var = ch.y23_noise_var();
                let mut likelihood = vec![0.0; y23.len() * rs];
                for (q, &y) in y23.iter().enumerate() {
                    let row = &mut likelihood[q * rs..(q + 1) * rs];
                    r.constellation.log_likelihoods_into(y, ch.h23, ch.pr, var, row);
                    math::softmax_in_place(row);
                }
                let steps = r.layout.steps;
                let nl = r.trellis.num_labels();
                let mut st = RelayState {
                    likelihood,
                    states: r.codes.iter().map(DecoderState::new).collect(),
                    ext: r.codes.iter().map(|c| vec![0.0; c.n()]).collect(),
                    channel: r.codes.iter().map(|c| vec![0.0; c.n()]).collect(),
                    prior: r.codes.iter().map(|c| vec![0.0; c.n()]).collect(),
                    point_priors: vec![1.0 / nl as f64; steps * nl],
                };
                refresh_relay_channel(r, &mut st);
                Some(st)
            }
            _ => None,
        };
        let mut state = JointState {
            symbols: n,
            levels,
            size,
            direct,
            from_relay: vec![1.0 / size as f64; n * size],
            src_states: self.source_codes.iter().map(DecoderState::new).collect(),
            src_ext: vec![0.0; n * levels],
            src_in: vec![0.0; n * levels],
            relay,
            iterations: 0,
        };
        self.refresh_source_inputs(&mut state);
        Ok(state)
    }

    /// Marginal direct-link LLR of every source slot, `[symbol * levels + level]`.
    pub fn source_channel_llrs(&self, state: &JointState) -> Vec<f64> {
        let mut out = vec![0.0; state.symbols * state.levels];
        let zeros = vec![0.0; state.levels];
        let uniform = vec![1.0; state.size];
        for j in 0..state.symbols {
            let w = &state.direct[j * state.size..(j + 1) * state.size];
            slot_messages(w, &uniform, &zeros, &mut out[j * state.levels..(j + 1) * state.levels]);
        }
        out
    }

    /// Message into every source slot: direct link times relay side, with
    /// the other levels' code extrinsics as priors.
    fn refresh_source_inputs(&self, state: &mut JointState) {
        let (size, levels) = (state.size, state.levels);
        for j in 0..state.symbols {
            let w = &state.direct[j * size..(j + 1) * size];
            let r = &state.from_relay[j * size..(j + 1) * size];
            slot_messages(
                w,
                r,
                &state.src_ext[j * levels..(j + 1) * levels],
                &mut state.src_in[j * levels..(j + 1) * levels],
            );
        }
    }

    /// One outer iteration.
    pub fn outer_iteration(&self, state: &mut JointState) -> Result<()> {
        let levels = state.levels;
        // (1) source codes
        self.refresh_source_inputs(state);
        for (c, code) in self.source_codes.iter().enumerate() {
            let slots = &self.source_layout.codes[c];
            let ch: Vec<f64> = slots.iter().map(|s| state.src_in[s.symbol * levels + s.level]).collect();
            let zeros = vec![0.0; code.n()];
            let ext = code.spa_step(&mut state.src_states[c], &ch, &zeros)?;
            for (s, e) in slots.iter().zip(ext) {
                state.src_ext[s.symbol * levels + s.level] = e;
            }
        }
        let (Some(r), true) = (&self.relay, state.relay.is_some()) else {
            state.iterations += 1;
            return Ok(());
        };
        let size = state.size;
        let nl = r.trellis.num_labels();
        let k = r.trellis.inputs();
        let steps = r.layout.steps;
        let mut rs = state.relay.take().expect("checked above");

        // (2) source beliefs, without the relay's own message, to point priors
        let ones = vec![1.0; size];
        let mut nu = vec![0.0; size];
        for j in 0..steps {
            symbol_belief(
                &state.direct[j * size..(j + 1) * size],
                &ones,
                &state.src_ext[j * levels..(j + 1) * levels],
                &mut nu,
            );
            let pp = &mut rs.point_priors[j * nl..(j + 1) * nl];
            pp.iter_mut().for_each(|v| *v = 0.0);
            for (x, &w) in nu.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (l, p) in r.table.row(x).iter().enumerate() {
                    pp[l] += w * p;
                }
            }
            if math::normalize(pp) <= 0.0 {
                pp.iter_mut().for_each(|v| *v = 1.0 / nl as f64);
            }
            // Gaussian tails underflow to exact zeros, which can leave a
            // confident trellis with no surviving branch.
            pp.iter_mut().for_each(|v| *v = v.max(POINT_PRIOR_FLOOR));
            math::normalize(pp);
        }

        // (3) trellis: quantizer bit beliefs for the relay codes
        let relay_bit_priors = tilde_llrs(r, &rs.ext, steps * k);
        let fwd = bcjr_soft(r.trellis, &rs.point_priors, &relay_bit_priors)?;
        for (i, &e) in fwd.bit_ext.iter().enumerate() {
            let (c, p) = r.layout.tilde_owner(i);
            rs.prior[c][p] = e;
        }

        // (4) relay codes
        refresh_relay_channel(r, &mut rs);
        for (c, code) in r.codes.iter().enumerate() {
            rs.ext[c] = code.spa_step(&mut rs.states[c], &rs.channel[c], &rs.prior[c])?;
        }

        // (5) back through the trellis to the source symbols
        if self.config.relay_to_source {
            let relay_bit_priors = tilde_llrs(r, &rs.ext, steps * k);
            let back = bcjr_soft(r.trellis, &rs.point_priors, &relay_bit_priors)?;
            for j in 0..steps {
                let ext = &back.point_ext[j * nl..(j + 1) * nl];
                let out = &mut state.from_relay[j * size..(j + 1) * size];
                for (x, o) in out.iter_mut().enumerate() {
                    *o = r.table.row(x).iter().zip(ext).map(|(t, e)| t * e).sum();
                }
                if math::normalize(out) <= 0.0 {
                    out.iter_mut().for_each(|v| *v = 1.0 / size as f64);
                }
            }
        }
        if state.from_relay.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("relay-to-source message"));
        }
        state.relay = Some(rs);
        state.iterations += 1;
        Ok(())
    }

    /// Hard decisions of every source code from the current beliefs.
    fn source_hard(&self, state: &JointState) -> Vec<Vec<u8>> {
        let levels = state.levels;
        self.source_layout
            .codes
            .iter()
            .map(|slots| {
                slots
                    .iter()
                    .map(|s| {
                        let i = s.symbol * levels + s.level;
                        u8::from(state.src_in[i] + state.src_ext[i] < 0.0)
                    })
                    .collect()
            })
            .collect()
    }

    /// Iterates until every source code is satisfied or the budget runs out,
    /// then forms the final decisions.
    pub fn run(&self, state: &mut JointState) -> Result<JointOutput> {
        if self.config.max_outer_iters == 0 {
            return Err(Error::InvalidParameter("at least one outer iteration is required".into()));
        }
        let mut iterative = self.source_hard(state);
        for _ in 0..self.config.max_outer_iters {
            self.outer_iteration(state)?;
            self.refresh_source_inputs(state);
            iterative = self.source_hard(state);
            let done = self
                .source_codes
                .iter()
                .zip(&iterative)
                .all(|(c, b)| c.syndrome_weight(b) == 0);
            if done && self.relay_satisfied(state) {
                break;
            }
        }
        let iterative_ok: Vec<bool> = self
            .source_codes
            .iter()
            .zip(&iterative)
            .map(|(c, b)| c.syndrome_weight(b) == 0)
            .collect();

        let (codewords, converged) = match self.config.final_stage {
            FinalStage::Multistage if self.source_layout.is_per_level() => self.multistage(state, &iterative, &iterative_ok)?,
            _ => self.parallel(state, &iterative, &iterative_ok)?,
        };
        let info = self
            .source_codes
            .iter()
            .zip(&codewords)
            .map(|(c, cw)| c.extract_info(cw))
            .collect();
        let (relay_labels, tilde_bits) = match (&self.relay, &state.relay) {
            (Some(r), Some(rs)) => {
                let k = r.trellis.inputs();
                let tilde: Vec<u8> = (0..r.layout.steps * k)
                    .map(|i| {
                        let (c, p) = r.layout.tilde_owner(i);
                        u8::from(rs.channel[c][p] + rs.prior[c][p] + rs.ext[c][p] < 0.0)
                    })
                    .collect();
                (r.layout.encode(r.codes, &tilde)?, tilde)
            }
            _ => (Vec::new(), Vec::new()),
        };
        Ok(JointOutput {
            codewords,
            info,
            converged,
            relay_converged: self.relay_satisfied(state),
            iterations: state.iterations,
            relay_labels,
            tilde_bits,
        })
    }

    fn relay_satisfied(&self, state: &JointState) -> bool {
        match (&self.relay, &state.relay) {
            (Some(r), Some(rs)) => r.codes.iter().enumerate().all(|(c, code)| {
                let hard: Vec<u8> = (0..code.n())
                    .map(|p| u8::from(rs.channel[c][p] + rs.prior[c][p] + rs.ext[c][p] < 0.0))
                    .collect();
                code.syndrome_weight(&hard) == 0
            }),
            _ => true,
        }
    }

    fn finish_code(&self, c: usize, llrs: &[f64], iterative: &[Vec<u8>], iterative_ok: &[bool]) -> Result<(Vec<u8>, bool)> {
        let out = self.source_codes[c].decode(llrs, self.config.final_iters)?;
        Ok(if out.converged {
            (out.bits, true)
        } else if iterative_ok[c] {
            (iterative[c].clone(), true)
        } else {
            (out.bits, false)
        })
    }

    fn multistage(&self, state: &JointState, iterative: &[Vec<u8>], iterative_ok: &[bool]) -> Result<(Vec<Vec<u8>>, Vec<bool>)> {
        let (size, levels, n) = (state.size, state.levels, state.symbols);
        let mut prefix = vec![0usize; n];
        let mut codewords = Vec::with_capacity(levels);
        let mut converged = Vec::with_capacity(levels);
        let mut post = vec![0.0; size];
        for level in 0..levels {
            let llrs: Vec<f64> = (0..n)
                .map(|j| {
                    // higher levels enter through their code extrinsics
                    let mut ext = state.src_ext[j * levels..(j + 1) * levels].to_vec();
                    ext[..=level].iter_mut().for_each(|e| *e = 0.0);
                    symbol_belief(
                        &state.direct[j * size..(j + 1) * size],
                        &state.from_relay[j * size..(j + 1) * size],
                        &ext,
                        &mut post,
                    );
                    level_llr_with_prefix(&post, level, prefix[j])
                })
                .collect();
            let (bits, ok) = self.finish_code(level, &llrs, iterative, iterative_ok)?;
            for (j, &b) in bits.iter().enumerate() {
                prefix[j] |= ((b & 1) as usize) << level;
            }
            codewords.push(bits);
            converged.push(ok);
        }
        Ok((codewords, converged))
    }

    fn parallel(&self, state: &JointState, iterative: &[Vec<u8>], iterative_ok: &[bool]) -> Result<(Vec<Vec<u8>>, Vec<bool>)> {
        let (size, levels, n) = (state.size, state.levels, state.symbols);
        let mut slot = vec![0.0; n * levels];
        for j in 0..n {
            slot_messages(
                &state.direct[j * size..(j + 1) * size],
                &state.from_relay[j * size..(j + 1) * size],
                &state.src_ext[j * levels..(j + 1) * levels],
                &mut slot[j * levels..(j + 1) * levels],
            );
        }
        let mut codewords = Vec::new();
        let mut converged = Vec::new();
        for (c, slots) in self.source_layout.codes.iter().enumerate() {
            let llrs: Vec<f64> = slots.iter().map(|s| slot[s.symbol * levels + s.level]).collect();
            let (bits, ok) = self.finish_code(c, &llrs, iterative, iterative_ok)?;
            codewords.push(bits);
            converged.push(ok);
        }
        Ok((codewords, converged))
    }
}

impl JointState {
    /// Current belief over each source symbol (all information combined),
    /// `[symbol * size + label]`.
    pub fn source_posteriors(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.symbols * self.size];
        for j in 0..self.symbols {
            let s = j * self.size;
            symbol_belief(
                &self.direct[s..s + self.size],
                &self.from_relay[s..s + self.size],
                &self.src_ext[j * self.levels..(j + 1) * self.levels],
                &mut out[s..s + self.size],
            );
        }
        out
    }

    /// The relay-side message into each source symbol.
    pub fn relay_messages(&self) -> &[f64] {
        &self.from_relay
    }

    /// Reconstruction-point priors most recently sent to the trellis.
    pub fn point_priors(&self) -> Option<&[f64]> {
        self.relay.as_ref().map(|r| r.point_priors.as_slice())
    }

    /// Latest source-code extrinsics, `[symbol * levels + level]`.
    pub fn source_extrinsics(&self) -> &[f64] {
        &self.src_ext
    }

    /// Overrides the relay-side message (used to inject known relay
    /// information in experiments).
    pub fn set_relay_messages(&mut self, msgs: &[f64]) -> Result<()> {
        if msgs.len() != self.from_relay.len() {
            return Err(Error::LengthMismatch { what: "relay messages", expected: self.from_relay.len(), got: msgs.len() });
        }
        self.from_relay.copy_from_slice(msgs);
        Ok(())
    }
}

/// Relay-code extrinsics at information positions, in quantizer-bit order.
fn tilde_llrs(r: &RelaySide<'_>, ext: &[Vec<f64>], count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let (c, p) = r.layout.tilde_owner(i);
            ext[c][p]
        })
        .collect()
}

/// Channel inputs of the relay codes: parity positions get the relay-link
/// LLR of their slot with the other levels' code extrinsics as priors.
fn refresh_relay_channel(r: &RelaySide<'_>, st: &mut RelayState) {
    let levels = r.layout.levels;
    let rs = r.constellation.size();
    let ones = vec![1.0; rs];
    let mut ext = vec![0.0; levels];
    let mut out = vec![0.0; levels];
    for q in 0..r.layout.symbols {
        for (l, e) in ext.iter_mut().enumerate() {
            let (c, p) = r.layout.slot_owner(q, l);
            *e = st.ext[c][p];
        }
        slot_messages(&st.likelihood[q * rs..(q + 1) * rs], &ones, &ext, &mut out);
        for (l, &v) in out.iter().enumerate() {
            let (c, p) = r.layout.slot_owner(q, l);
            st.channel[c][p] = v;
        }
    }
}

/// For each level `i`, the LLR of bit `i` from weights `a(x) * b(x)` and
/// the extrinsic priors of all other levels.
fn slot_messages(a: &[f64], b: &[f64], ext: &[f64], out: &mut [f64]) {
    let levels = ext.len();
    let p0: Vec<f64> = ext.iter().map(|&e| llr_to_p0(e)).collect();
    for i in 0..levels {
        let (mut m0, mut m1) = (0.0, 0.0);
        for x in 0..a.len() {
            let mut w = a[x] * b[x];
            if w == 0.0 {
                continue;
            }
            for (l, &p) in p0.iter().enumerate() {
                if l != i {
                    w *= if (x >> l) & 1 == 0 { p } else { 1.0 - p };
                }
            }
            if (x >> i) & 1 == 0 {
                m0 += w;
            } else {
                m1 += w;
            }
        }
        out[i] = clamp_llr(llr_from_masses(m0, m1));
    }
}

/// Normalized symbol belief `a(x) * b(x) * prod_l P_l(x_l)`.
fn symbol_belief(a: &[f64], b: &[f64], ext: &[f64], out: &mut [f64]) {
    let p0: Vec<f64> = ext.iter().map(|&e| llr_to_p0(e)).collect();
    for x in 0..a.len() {
        let mut w = a[x] * b[x];
        for (l, &p) in p0.iter().enumerate() {
            w *= if (x >> l) & 1 == 0 { p } else { 1.0 - p };
        }
        out[x] = w;
    }
    if math::normalize(out) <= 0.0 {
        let u = 1.0 / out.len() as f64;
        out.iter_mut().for_each(|v| *v = u);
    }
}
