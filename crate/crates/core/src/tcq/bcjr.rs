//! Forward-backward pass over the quantizer trellis.

use alloc::vec;
use alloc::vec::Vec;

use super::trellis::Trellis;
use crate::math::{llr_from_masses, llr_to_p0};
use crate::{Error, Result};

/// Per-step marginals. Bit arrays hold `inputs` LLRs per step; point arrays
/// hold one distribution over labels per step.
#[derive(Clone, Debug, PartialEq)]
pub struct BcjrOutput {
    pub steps: usize,
    pub inputs: usize,
    pub labels: usize,
    /// Posterior LLRs of the input bits given all priors.
    pub bit_post: Vec<f64>,
    /// Posterior LLRs excluding each bit's own prior.
    pub bit_ext: Vec<f64>,
    /// Posterior label distributions given all priors.
    pub point_post: Vec<f64>,
    /// Label distributions excluding the point prior of the same step.
    pub point_ext: Vec<f64>,
}

/// Runs BCJR from state 0 with a uniform final state. `point_priors` has
/// `steps * num_labels` entries, `bit_priors` has `steps * inputs` LLRs.
pub fn bcjr_soft(trellis: &Trellis, point_priors: &[f64], bit_priors: &[f64]) -> Result<BcjrOutput> {
    let nl = trellis.num_labels();
    let k = trellis.inputs();
    let ns = trellis.num_states();
    let nb = trellis.branches_per_state();
    if point_priors.len() % nl != 0 || point_priors.is_empty() {
        return Err(Error::LengthMismatch {
            what: "point priors",
            expected: nl,
            got: point_priors.len(),
        });
    }
    let steps = point_priors.len() / nl;
    if bit_priors.len() != steps * k {
        return Err(Error::LengthMismatch {
            what: "bit priors",
            expected: steps * k,
            got: bit_priors.len(),
        });
    }

    // per-step input-word weights from the bit priors
    let mut word_w = vec![0.0; steps * nb];
    for t in 0..steps {
        let p0: Vec<f64> = (0..k).map(|j| llr_to_p0(bit_priors[t * k + j])).collect();
        for u in 0..nb {
            let mut w = 1.0;
            for (j, &p) in p0.iter().enumerate() {
                w *= if (u >> j) & 1 == 0 { p } else { 1.0 - p };
            }
            word_w[t * nb + u] = w;
        }
    }

    let mut alpha = vec![0.0; (steps + 1) * ns];
    alpha[0] = 1.0;
    for t in 0..steps {
        let pp = &point_priors[t * nl..(t + 1) * nl];
        let (cur, nxt) = alpha.split_at_mut((t + 1) * ns);
        let cur = &cur[t * ns..];
        let nxt = &mut nxt[..ns];
        for s in 0..ns {
            let a = cur[s];
            if a == 0.0 {
                continue;
            }
            for u in 0..nb {
                nxt[trellis.next_state(s, u)] += a * pp[trellis.label(s, u)] * word_w[t * nb + u];
            }
        }
        let sum: f64 = nxt.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::ZeroPrior(t));
        }
        nxt.iter_mut().for_each(|v| *v /= sum);
    }

    let mut beta = vec![0.0; (steps + 1) * ns];
    for v in &mut beta[steps * ns..] {
        *v = 1.0 / ns as f64;
    }
    for t in (0..steps).rev() {
        let pp = &point_priors[t * nl..(t + 1) * nl];
        let (cur, nxt) = beta.split_at_mut((t + 1) * ns);
        let cur = &mut cur[t * ns..];
        for s in 0..ns {
            let mut acc = 0.0;
            for u in 0..nb {
                acc += pp[trellis.label(s, u)] * word_w[t * nb + u] * nxt[trellis.next_state(s, u)];
            }
            cur[s] = acc;
        }
        let sum: f64 = cur.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::ZeroPrior(t));
        }
        cur.iter_mut().for_each(|v| *v /= sum);
    }

    let mut bit_post = vec![0.0; steps * k];
    let mut bit_ext = vec![0.0; steps * k];
    let mut point_post = vec![0.0; steps * nl];
    let mut point_ext = vec![0.0; steps * nl];
    let mut q = vec![0.0; nb];
    for t in 0..steps {
        let pp = &point_priors[t * nl..(t + 1) * nl];
        let a = &alpha[t * ns..(t + 1) * ns];
        let b = &beta[(t + 1) * ns..(t + 2) * ns];
        let ww = &word_w[t * nb..(t + 1) * nb];
        let pe = &mut point_ext[t * nl..(t + 1) * nl];
        q.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..ns {
            if a[s] == 0.0 {
                continue;
            }
            for u in 0..nb {
                let ab = a[s] * b[trellis.next_state(s, u)];
                let l = trellis.label(s, u);
                q[u] += ab * pp[l];
                pe[l] += ab * ww[u];
            }
        }
        let p0: Vec<f64> = (0..k).map(|j| llr_to_p0(bit_priors[t * k + j])).collect();
        for j in 0..k {
            let (mut e0, mut e1, mut f0, mut f1) = (0.0, 0.0, 0.0, 0.0);
            for (u, &qu) in q.iter().enumerate() {
                let mut others = 1.0;
                for (i, &p) in p0.iter().enumerate() {
                    if i != j {
                        others *= if (u >> i) & 1 == 0 { p } else { 1.0 - p };
                    }
                }
                let own = if (u >> j) & 1 == 0 { p0[j] } else { 1.0 - p0[j] };
                if (u >> j) & 1 == 0 {
                    e0 += qu * others;
                    f0 += qu * others * own;
                } else {
                    e1 += qu * others;
                    f1 += qu * others * own;
                }
            }
            bit_ext[t * k + j] = llr_from_masses(e0, e1);
            bit_post[t * k + j] = llr_from_masses(f0, f1);
        }
        let post = &mut point_post[t * nl..(t + 1) * nl];
        for l in 0..nl {
            post[l] = pe[l] * pp[l];
        }
        crate::math::normalize(post);
        crate::math::normalize(pe);
    }
    Ok(BcjrOutput {
        steps,
        inputs: k,
        labels: nl,
        bit_post,
        bit_ext,
        point_post,
        point_ext,
    })
}
