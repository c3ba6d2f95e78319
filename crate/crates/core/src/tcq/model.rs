//! Statistical model of the relay quantizer as seen by the destination: the
//! labeled codebook, the scalar quantizers the trellis switches between,
//! how often each is used per source symbol, and the resulting transition
//! table `p(y_hat | x1)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cells::{interval_mass, polygon_area, voronoi_cell, GaussianMass};
use super::codebook::{assign_labels, build_codebook, CodebookParams};
use super::trellis::{GeneratorMatrix, Trellis};
use super::viterbi::viterbi_quantize;
use crate::channel::ChannelParams;
use crate::constellation::Constellation;
use crate::math;
use crate::{Error, Point, Result};

pub const MODEL_FORMAT: &str = "cfrelay-quantizer";
pub const MODEL_VERSION: u32 = 1;

/// Which scalar quantizers the trellis is taken to switch between.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizerFamily {
    /// One quantizer per trellis state: nearest neighbour over the points on
    /// the branches leaving that state.
    StateUnion,
    /// One quantizer per coded subset: nearest neighbour over its points.
    Subset,
}

/// Cell description of the `K` scalar quantizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CellSpec {
    /// Quantizer `i` is nearest-neighbour over the labels in `sets[i]`.
    Voronoi { sets: Vec<Vec<usize>> },
    /// Single product quantizer: label `i + levels * q` covers
    /// `[re[i-1], re[i]] x [im[q-1], im[q]]` with open outer cells.
    Product { re: Vec<f64>, im: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizerModel {
    pub format: String,
    pub version: u32,
    /// Generator matrix rows, e.g. `"0 0 D 1 0"`.
    pub generator: Vec<String>,
    pub params: CodebookParams,
    /// Reconstruction points indexed by trellis output label.
    pub codebook: Vec<Point>,
    pub family: Option<QuantizerFamily>,
    pub cells: CellSpec,
    /// `choice_probs[x][i] = P(Q_i | x1 = x)`.
    pub choice_probs: Vec<Vec<f64>>,
}

impl QuantizerModel {
    /// Trellis quantizer with a parametric codebook; choice probabilities
    /// start uniform until estimated.
    pub fn tcq(
        generator: &GeneratorMatrix,
        params: CodebookParams,
        family: QuantizerFamily,
        symbols: usize,
    ) -> Result<Self> {
        let trellis = Trellis::build(generator)?;
        let codebook = assign_labels(&trellis, &build_codebook(&params)?)?;
        let sets = quantizer_sets(&trellis, family);
        let k = sets.len();
        Ok(Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            generator: generator.rows(),
            params,
            codebook,
            family: Some(family),
            cells: CellSpec::Voronoi { sets },
            choice_probs: vec![vec![1.0 / k as f64; k]; symbols],
        })
    }

    /// Product quantizer on a one-state trellis whose label is the cell
    /// index `i + levels * q`. `re_points`/`im_points` are the per-dimension
    /// reconstruction values, `re_bounds`/`im_bounds` the inner boundaries.
    pub fn product(
        re_points: &[f64],
        re_bounds: &[f64],
        im_points: &[f64],
        im_bounds: &[f64],
        params: CodebookParams,
        symbols: usize,
    ) -> Result<Self> {
        let levels = re_points.len();
        if !levels.is_power_of_two()
            || im_points.len() != levels
            || re_bounds.len() + 1 != levels
            || im_bounds.len() + 1 != levels
        {
            return Err(Error::Codebook("product quantizer dimensions disagree".into()));
        }
        let bits = 2 * levels.trailing_zeros() as usize;
        let generator = GeneratorMatrix::new(
            (0..bits)
                .map(|r| (0..bits).map(|c| if r == c { super::trellis::Polynomial::ONE } else { super::trellis::Polynomial::ZERO }).collect())
                .collect(),
        )?;
        let mut codebook = Vec::with_capacity(levels * levels);
        for q in 0..levels {
            for i in 0..levels {
                codebook.push(Point::new(re_points[i], im_points[q]));
            }
        }
        Ok(Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            generator: generator.rows(),
            params,
            codebook,
            family: None,
            cells: CellSpec::Product { re: re_bounds.to_vec(), im: im_bounds.to_vec() },
            choice_probs: vec![vec![1.0]; symbols],
        })
    }

    pub fn generator_matrix(&self) -> Result<GeneratorMatrix> {
        let rows: Vec<&str> = self.generator.iter().map(String::as_str).collect();
        GeneratorMatrix::parse_rows(&rows)
    }

    pub fn trellis(&self) -> Result<Trellis> {
        Trellis::build(&self.generator_matrix()?)
    }

    /// Number of scalar quantizers.
    pub fn num_quantizers(&self) -> usize {
        match &self.cells {
            CellSpec::Voronoi { sets } => sets.len(),
            CellSpec::Product { .. } => 1,
        }
    }

    pub fn num_labels(&self) -> usize {
        self.codebook.len()
    }

    /// Checks internal consistency after loading.
    pub fn validate(&self, symbols: usize) -> Result<()> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::Codebook(format!(
                "unsupported model format {} v{}",
                self.format, self.version
            )));
        }
        let trellis = self.trellis()?;
        if self.codebook.len() != trellis.num_labels() {
            return Err(Error::Codebook("codebook size does not match the trellis".into()));
        }
        if let CellSpec::Voronoi { sets } = &self.cells {
            if sets.iter().flatten().any(|&l| l >= self.codebook.len()) || sets.iter().any(Vec::is_empty) {
                return Err(Error::Codebook("quantizer set references an unknown label".into()));
            }
        }
        if self.choice_probs.len() != symbols {
            return Err(Error::Codebook(format!(
                "choice table has {} rows, expected {symbols}",
                self.choice_probs.len()
            )));
        }
        for row in &self.choice_probs {
            let s: f64 = row.iter().sum();
            if row.len() != self.num_quantizers() || (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::Codebook("choice table rows must be distributions".into()));
            }
        }
        Ok(())
    }

    /// Applies scalar quantizer `i` to `y`; returns a label.
    pub fn quantize_with(&self, i: usize, y: Point) -> usize {
        match &self.cells {
            CellSpec::Voronoi { sets } => {
                let mut best = (f64::INFINITY, 0);
                for &l in &sets[i] {
                    let d = y.dist_sqr(self.codebook[l]);
                    if d < best.0 {
                        best = (d, l);
                    }
                }
                best.1
            }
            CellSpec::Product { re, im } => {
                let ri = re.partition_point(|&b| b < y.re);
                let qi = im.partition_point(|&b| b < y.im);
                ri + (re.len() + 1) * qi
            }
        }
    }

    /// Which scalar quantizer the trellis used at a step, given the state
    /// occupied before the step and the chosen label.
    pub fn quantizer_index(&self, trellis: &Trellis, state: usize, label: usize) -> usize {
        match (self.family, &self.cells) {
            (Some(QuantizerFamily::StateUnion), _) => state,
            (Some(QuantizerFamily::Subset), _) => {
                let coded = trellis.outputs() - trellis.uncoded_inputs();
                trellis.label_to_partition(label) & ((1 << coded) - 1)
            }
            _ => 0,
        }
    }

    /// Monte Carlo estimate of `P(Q_i | x1)`: random source blocks pass
    /// through the relay link and the Viterbi quantizer, and each step is
    /// attributed to the quantizer selected by the trellis.
    pub fn estimate_choice_probs(
        &mut self,
        constellation: &Constellation,
        channel: &ChannelParams,
        samples_per_symbol: usize,
        seed: u64,
    ) -> Result<()> {
        let k = self.num_quantizers();
        let m = constellation.size();
        if k == 1 {
            self.choice_probs = vec![vec![1.0]; m];
            return Ok(());
        }
        const BLOCK: usize = 1024;
        let trellis = self.trellis()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = samples_per_symbol.max(1) * m;
        let mut counts = vec![vec![0u64; k]; m];
        let mut done = 0;
        let mut labels = Vec::with_capacity(BLOCK);
        let mut x1 = Vec::with_capacity(BLOCK);
        while done < total {
            let len = BLOCK.min(total - done);
            labels.clear();
            labels.extend((0..len).map(|_| rng.random_range(0..m)));
            x1.clear();
            x1.extend(labels.iter().map(|&l| constellation.map_label(l, channel.ps)));
            let y2 = channel.relay_observe(&x1, &mut rng);
            let out = viterbi_quantize(&trellis, &self.codebook, &y2)?;
            for t in 0..len {
                let i = self.quantizer_index(&trellis, out.states[t], out.labels[t]);
                counts[labels[t]][i] += 1;
            }
            done += len;
        }
        self.choice_probs = counts
            .iter()
            .map(|row| {
                let n: u64 = row.iter().sum();
                if n == 0 {
                    vec![1.0 / k as f64; k]
                } else {
                    row.iter().map(|&c| c as f64 / n as f64).collect()
                }
            })
            .collect();
        Ok(())
    }

    /// Transition table `p(y_hat | x1)` as a mixture over the scalar
    /// quantizers of the Gaussian mass of each cell.
    pub fn conditional_point_prob(&self, constellation: &Constellation, channel: &ChannelParams) -> Result<PointTable> {
        channel.validate()?;
        let m = constellation.size();
        let nl = self.codebook.len();
        if self.choice_probs.len() != m {
            return Err(Error::LengthMismatch {
                what: "choice table",
                expected: m,
                got: self.choice_probs.len(),
            });
        }
        let sigma = math::sqrt(channel.n2_var / 2.0);
        let gain = channel.h12 * math::sqrt(channel.ps);
        let means: Vec<Point> = constellation.points().iter().map(|&p| p * gain).collect();
        let mut p = vec![0.0; m * nl];
        match &self.cells {
            CellSpec::Product { re, im } => {
                let levels = re.len() + 1;
                let edges = |b: &[f64], i: usize| {
                    let lo = if i == 0 { f64::NEG_INFINITY } else { b[i - 1] };
                    let hi = if i == b.len() { f64::INFINITY } else { b[i] };
                    (lo, hi)
                };
                for (x, mu) in means.iter().enumerate() {
                    for q in 0..levels {
                        let (ilo, ihi) = edges(im, q);
                        let mq = interval_mass(ilo, ihi, mu.im, sigma);
                        for i in 0..levels {
                            let (rlo, rhi) = edges(re, i);
                            p[x * nl + i + levels * q] = interval_mass(rlo, rhi, mu.re, sigma) * mq;
                        }
                    }
                }
            }
            CellSpec::Voronoi { sets } => {
                let reach = self
                    .codebook
                    .iter()
                    .chain(&means)
                    .map(|q| q.re.abs().max(q.im.abs()))
                    .fold(0.0, f64::max);
                let half = reach + 40.0 * sigma + 1.0;
                let gm = GaussianMass::default();
                // identical point sets share one mass computation
                let mut cache: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
                for (i, set) in sets.iter().enumerate() {
                    let mut key = set.clone();
                    key.sort_unstable();
                    let masses = match cache.iter().find(|(k, _)| *k == key) {
                        Some((_, v)) => v.clone(),
                        None => {
                            let cells: Vec<_> = key.iter().map(|&l| voronoi_cell(&self.codebook, &key, l, half)).collect();
                            let area: f64 = cells.iter().map(|c| polygon_area(c)).sum();
                            let want = 4.0 * half * half;
                            if (area - want).abs() > 1e-9 * want || cells.iter().any(|c| polygon_area(c) <= 0.0) {
                                return Err(Error::Tiling(format!("quantizer {i}: cell areas sum to {area}, box has {want}")));
                            }
                            let mut v = vec![0.0; m * nl];
                            for (x, &mu) in means.iter().enumerate() {
                                for (c, &l) in cells.iter().zip(&key) {
                                    v[x * nl + l] = gm.polygon(c, mu, sigma);
                                }
                            }
                            cache.push((key, v.clone()));
                            v
                        }
                    };
                    for x in 0..m {
                        let w = self.choice_probs[x][i];
                        if w == 0.0 {
                            continue;
                        }
                        for l in 0..nl {
                            p[x * nl + l] += w * masses[x * nl + l];
                        }
                    }
                }
            }
        }
        for x in 0..m {
            let total = math::normalize(&mut p[x * nl..(x + 1) * nl]);
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::Tiling(format!("cell masses for symbol {x} sum to {total}")));
            }
        }
        Ok(PointTable { symbols: m, labels: nl, p })
    }

    /// Draws a reconstruction label for a relay observation `y2` given the
    /// source symbol, following the same model as the transition table.
    pub fn sample_label<R: Rng + ?Sized>(&self, x: usize, y2: Point, rng: &mut R) -> usize {
        let row = &self.choice_probs[x];
        let i = if row.len() == 1 {
            0
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = row.len() - 1;
            for (i, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        };
        self.quantize_with(i, y2)
    }

    /// Mean squared error of Viterbi quantization on the relay link.
    pub fn relay_mse(
        &self,
        constellation: &Constellation,
        channel: &ChannelParams,
        samples: usize,
        seed: u64,
    ) -> Result<f64> {
        let trellis = self.trellis()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = math::CompensatedSum::new();
        let mut done = 0;
        while done < samples {
            let len = 1024.min(samples - done);
            let x1: Vec<Point> = (0..len)
                .map(|_| constellation.map_label(rng.random_range(0..constellation.size()), channel.ps))
                .collect();
            let y2 = channel.relay_observe(&x1, &mut rng);
            let out = viterbi_quantize(&trellis, &self.codebook, &y2)?;
            acc.add(out.distortion);
            done += len;
        }
        Ok(acc.value() / samples.max(1) as f64)
    }
}

/// `p[x * labels + l] = p(y_hat = l | x1 = x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTable {
    pub symbols: usize,
    pub labels: usize,
    pub p: Vec<f64>,
}

impl PointTable {
    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.p[x * self.labels..(x + 1) * self.labels]
    }

    #[inline]
    pub fn get(&self, x: usize, label: usize) -> f64 {
        self.p[x * self.labels + label]
    }

    /// Table whose rows are all equal, i.e. a relay that carries no
    /// information about the source.
    pub fn uninformative(symbols: usize, labels: usize) -> Self {
        Self { symbols, labels, p: vec![1.0 / labels as f64; symbols * labels] }
    }
}

/// Label sets of the scalar quantizers for a family.
pub fn quantizer_sets(trellis: &Trellis, family: QuantizerFamily) -> Vec<Vec<usize>> {
    match family {
        QuantizerFamily::StateUnion => (0..trellis.num_states()).map(|s| trellis.labels_from(s)).collect(),
        QuantizerFamily::Subset => {
            let coded = trellis.outputs() - trellis.uncoded_inputs();
            let mask = (1 << coded) - 1;
            (0..1usize << coded)
                .map(|sub| (0..trellis.num_labels()).filter(|&l| trellis.label_to_partition(l) & mask == sub).collect())
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::ModulationKind;

    fn model(kind: ModulationKind) -> (QuantizerModel, Constellation, ChannelParams) {
        let ch = ChannelParams { ps: 4.0, pr: 4.0, ..Default::default() };
        let params = CodebookParams {
            kind,
            scale: ch.h12 * math::sqrt(ch.ps),
            ring_ratio: 1.5,
        };
        let m = QuantizerModel::tcq(&GeneratorMatrix::relay_default(), params, QuantizerFamily::StateUnion, 16).unwrap();
        (m, Constellation::build(kind), ch)
    }

    #[test]
    fn choice_rows_are_distributions_and_repeatable() {
        let (mut m, c, ch) = model(ModulationKind::Qam16);
        m.estimate_choice_probs(&c, &ch, 500, 3).unwrap();
        for row in &m.choice_probs {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let first = m.choice_probs.clone();
        m.estimate_choice_probs(&c, &ch, 500, 3).unwrap();
        assert_eq!(first, m.choice_probs);
        m.validate(16).unwrap();
    }

    #[test]
    fn table_rows_sum_to_one() {
        for kind in [ModulationKind::Qam16, ModulationKind::Psk16] {
            let (mut m, c, ch) = model(kind);
            m.estimate_choice_probs(&c, &ch, 200, 4).unwrap();
            let t = m.conditional_point_prob(&c, &ch).unwrap();
            for x in 0..16 {
                let raw: f64 = t.row(x).iter().sum();
                assert!((raw - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn duplicate_points_fail_tiling() {
        let (mut m, c, ch) = model(ModulationKind::Qam16);
        let CellSpec::Voronoi { sets } = &m.cells else { unreachable!() };
        let (a, b) = (sets[0][0], sets[0][1]);
        m.codebook[b] = m.codebook[a];
        assert!(matches!(m.conditional_point_prob(&c, &ch), Err(Error::Tiling(_))));
    }
}
