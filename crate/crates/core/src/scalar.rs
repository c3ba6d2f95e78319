//! Scalar quantization: Lloyd-Max design and the product quantizer used by
//! the scalar compress-forward baseline.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::constellation::Constellation;
use crate::tcq::codebook::CodebookParams;
use crate::tcq::model::QuantizerModel;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarQuantizer {
    /// Reconstruction values, increasing.
    pub points: Vec<f64>,
    /// Inner cell boundaries, increasing; `points.len() - 1` of them.
    pub boundaries: Vec<f64>,
    /// Training mean squared error after each iteration.
    pub mse_history: Vec<f64>,
}

impl ScalarQuantizer {
    /// Uniform quantizer with `levels` points spaced `step` apart around 0.
    pub fn uniform(levels: usize, step: f64) -> Self {
        let points: Vec<f64> = (0..levels).map(|i| (i as f64 - (levels as f64 - 1.0) / 2.0) * step).collect();
        let boundaries = points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Self { points, boundaries, mse_history: Vec::new() }
    }

    pub fn levels(&self) -> usize {
        self.points.len()
    }

    /// Bits needed for a cell index.
    pub fn bits(&self) -> usize {
        self.points.len().next_power_of_two().trailing_zeros() as usize
    }

    /// Cell index of `y`; a value on a boundary goes to the lower cell.
    #[inline]
    pub fn index(&self, y: f64) -> usize {
        self.boundaries.partition_point(|&b| b < y)
    }

    /// Cell indices and reconstructions.
    pub fn quantize(&self, y: &[f64]) -> (Vec<usize>, Vec<f64>) {
        let idx: Vec<usize> = y.iter().map(|&v| self.index(v)).collect();
        let rec = idx.iter().map(|&i| self.points[i]).collect();
        (idx, rec)
    }

    /// Fixed-width bits (LSB first) of each cell index.
    pub fn index_bits(&self, indices: &[usize]) -> Vec<u8> {
        let w = self.bits();
        indices.iter().flat_map(|&i| (0..w).map(move |j| ((i >> j) & 1) as u8)).collect()
    }

    pub fn mse(&self, y: &[f64]) -> f64 {
        let mut acc = crate::math::CompensatedSum::new();
        for &v in y {
            let d = v - self.points[self.index(v)];
            acc.add(d * d);
        }
        acc.value() / y.len().max(1) as f64
    }
}

/// Lloyd-Max design on training samples. Starts from sample quantiles and
/// alternates midpoint boundaries with cell centroids until the relative
/// change in mean squared error drops below `tol`.
pub fn lloyd_max(samples: &[f64], levels: usize, tol: f64, max_iters: usize) -> Result<ScalarQuantizer> {
    if levels < 2 {
        return Err(Error::InvalidParameter("Lloyd-Max needs at least two levels".into()));
    }
    if samples.len() < levels {
        return Err(Error::InvalidParameter("fewer samples than levels".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mut s1 = Vec::with_capacity(n + 1);
    let mut s2 = Vec::with_capacity(n + 1);
    s1.push(0.0);
    s2.push(0.0);
    for &v in &sorted {
        s1.push(s1.last().unwrap() + v);
        s2.push(s2.last().unwrap() + v * v);
    }
    let mut points: Vec<f64> = (0..levels)
        .map(|j| sorted[(((j as f64 + 0.5) / levels as f64) * n as f64) as usize % n])
        .collect();
    let mut history = Vec::new();
    for _ in 0..max_iters.max(1) {
        let boundaries: Vec<f64> = points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut cuts = Vec::with_capacity(levels + 1);
        cuts.push(0);
        cuts.extend(boundaries.iter().map(|&b| sorted.partition_point(|&v| v <= b)));
        cuts.push(n);
        let mut total = 0.0;
        for j in 0..levels {
            let (lo, hi) = (cuts[j], cuts[j + 1]);
            if hi <= lo {
                return Err(Error::EmptyCell(j));
            }
            let cnt = (hi - lo) as f64;
            let sum = s1[hi] - s1[lo];
            let sq = s2[hi] - s2[lo];
            let c = sum / cnt;
            points[j] = c;
            total += (sq - sum * c).max(0.0);
        }
        let mse = total / n as f64;
        let prev = history.last().copied();
        history.push(mse);
        if let Some(p) = prev {
            if p <= 0.0 || (p - mse).abs() / p < tol {
                break;
            }
        }
    }
    let boundaries = points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    Ok(ScalarQuantizer { points, boundaries, mse_history: history })
}

/// Product quantizer for the relay observation: one Lloyd-Max design with
/// `levels` points, trained on both real dimensions of simulated `y2`, used
/// on each dimension.
pub fn design_product_model(
    constellation: &Constellation,
    channel: &ChannelParams,
    levels: usize,
    samples: usize,
    seed: u64,
) -> Result<QuantizerModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x1: Vec<_> = (0..samples)
        .map(|_| constellation.map_label(rng.random_range(0..constellation.size()), channel.ps))
        .collect();
    let y2 = channel.relay_observe(&x1, &mut rng);
    let train: Vec<f64> = y2.iter().flat_map(|p| [p.re, p.im]).collect();
    let q = lloyd_max(&train, levels, 1e-9, 500)?;
    let params = CodebookParams {
        kind: constellation.kind(),
        scale: channel.h12 * crate::math::sqrt(channel.ps),
        ring_ratio: 1.0,
    };
    QuantizerModel::product(&q.points, &q.boundaries, &q.points, &q.boundaries, params, constellation.size())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_tie_goes_low() {
        let q = ScalarQuantizer::uniform(4, 1.0);
        assert_eq!(q.boundaries, alloc::vec![-1.0, 0.0, 1.0]);
        assert_eq!(q.index(0.0), 1);
        assert_eq!(q.index(-1.0), 0);
        assert_eq!(q.index(1.0000001), 3);
        let (idx, rec) = q.quantize(&[-1.5, 0.5]);
        assert_eq!(idx, alloc::vec![0, 2]);
        assert_eq!(rec, alloc::vec![-1.5, 0.5]);
        assert_eq!(q.index_bits(&[2]), alloc::vec![0, 1]);
    }

    #[test]
    fn two_level_symmetric() {
        let samples: Vec<f64> = (0..20_000).map(|i| ((i as f64 + 0.5) / 20_000.0) * 2.0 - 1.0).collect();
        let q = lloyd_max(&samples, 2, 1e-12, 100).unwrap();
        assert!(q.boundaries[0].abs() < 1e-9);
        assert!((q.points[1] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn mse_never_increases() {
        let samples: Vec<f64> = (0..10_000).map(|i| libm::sin(i as f64 * 1.7) * (1.0 + (i % 7) as f64)).collect();
        let q = lloyd_max(&samples, 8, 1e-12, 200).unwrap();
        for w in q.mse_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn empty_cell_reported() {
        // all mass on two values: a third cell cannot be populated
        let mut samples = alloc::vec![0.0; 10_000];
        samples.iter_mut().skip(5000).for_each(|v| *v = 1.0);
        assert!(matches!(lloyd_max(&samples, 3, 1e-9, 50), Err(Error::EmptyCell(_))));
    }
}
