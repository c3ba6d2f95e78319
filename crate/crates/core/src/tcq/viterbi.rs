//! Minimum-distortion path search through the quantizer trellis.

use alloc::vec;
use alloc::vec::Vec;

use super::trellis::Trellis;
use crate::{Error, Point, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ViterbiOutput {
    /// Input word chosen at each step (bit `j` is input `j`).
    pub inputs: Vec<usize>,
    /// State occupied before each step.
    pub states: Vec<usize>,
    /// Output label of each chosen branch.
    pub labels: Vec<usize>,
    pub reconstruction: Vec<Point>,
    pub distortion: f64,
}

impl ViterbiOutput {
    /// The compressed bits, `bits_per_step` per step.
    pub fn tilde_bits(&self, bits_per_step: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.inputs.len() * bits_per_step);
        for &u in &self.inputs {
            out.extend((0..bits_per_step).map(|j| ((u >> j) & 1) as u8));
        }
        out
    }
}

/// Squared-error Viterbi quantization of `y`; `labeled` maps labels to
/// reconstruction points.
pub fn viterbi_quantize(trellis: &Trellis, labeled: &[Point], y: &[Point]) -> Result<ViterbiOutput> {
    viterbi_quantize_with(trellis, labeled, y.len(), |t, label| y[t].dist_sqr(labeled[label]))
}

/// Viterbi search with an arbitrary per-step branch metric
/// `metric(step, label)`. Ties go to the smaller predecessor state, then to
/// the smaller input; the final state is the smallest one with minimum
/// metric.
pub fn viterbi_quantize_with<F>(trellis: &Trellis, labeled: &[Point], len: usize, mut metric: F) -> Result<ViterbiOutput>
where
    F: FnMut(usize, usize) -> f64,
{
    if len == 0 {
        return Err(Error::EmptySequence);
    }
    if labeled.len() != trellis.num_labels() {
        return Err(Error::LengthMismatch {
            what: "labeled codebook",
            expected: trellis.num_labels(),
            got: labeled.len(),
        });
    }
    let ns = trellis.num_states();
    let nb = trellis.branches_per_state();
    let mut cost = vec![f64::INFINITY; ns];
    cost[0] = 0.0;
    let mut next_cost = vec![f64::INFINITY; ns];
    // survivor: (previous state, input) per step and state
    let mut surv = vec![(u32::MAX, 0u32); len * ns];
    let mut bm = vec![0.0; trellis.num_labels()];
    for t in 0..len {
        for (l, m) in bm.iter_mut().enumerate() {
            *m = metric(t, l);
        }
        next_cost.iter_mut().for_each(|c| *c = f64::INFINITY);
        let row = &mut surv[t * ns..(t + 1) * ns];
        for s in 0..ns {
            let c = cost[s];
            if c == f64::INFINITY {
                continue;
            }
            for u in 0..nb {
                let nx = trellis.next_state(s, u);
                let cand = c + bm[trellis.label(s, u)];
                if cand < next_cost[nx] {
                    next_cost[nx] = cand;
                    row[nx] = (s as u32, u as u32);
                }
            }
        }
        core::mem::swap(&mut cost, &mut next_cost);
    }
    let mut best = 0;
    for s in 1..ns {
        if cost[s] < cost[best] {
            best = s;
        }
    }
    let distortion = cost[best];
    let mut inputs = vec![0usize; len];
    let mut s = best;
    for t in (0..len).rev() {
        let (prev, u) = surv[t * ns + s];
        inputs[t] = u as usize;
        s = prev as usize;
    }
    let (labels, states) = trellis.encode(&inputs);
    let reconstruction = labels.iter().map(|&l| labeled[l]).collect();
    Ok(ViterbiOutput {
        inputs,
        states,
        labels,
        reconstruction,
        distortion,
    })
}

/// Re-walks the trellis from state 0 and returns the reconstruction.
pub fn reconstruct(trellis: &Trellis, labeled: &[Point], inputs: &[usize]) -> Vec<Point> {
    trellis.encode(inputs).0.iter().map(|&l| labeled[l]).collect()
}

/// Packs `bits_per_step` bits per step back into input words.
pub fn inputs_from_bits(bits: &[u8], bits_per_step: usize) -> Vec<usize> {
    bits.chunks(bits_per_step)
        .map(|c| c.iter().enumerate().fold(0, |acc, (j, &b)| acc | (((b & 1) as usize) << j)))
        .collect()
}
