//! Labeled 16-ary signal sets and per-level soft demapping.
//!
//! Points are stored in label order. Bit `i` of a label (LSB first) is the
//! level-`i + 1` bit, so `A_1` is the first bit recovered by multistage
//! decoding.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use crate::math::{self, llr_from_masses};
use crate::partition::set_partition_labels;
use crate::{Error, Point, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulationKind {
    Qam16,
    Psk16,
}

impl ModulationKind {
    pub fn name(self) -> &'static str {
        match self {
            ModulationKind::Qam16 => "qam16",
            ModulationKind::Psk16 => "psk16",
        }
    }

    /// Unit-energy points in geometric order (row-major grid for QAM, angle
    /// order for PSK).
    pub fn geometric_points(self) -> Vec<Point> {
        match self {
            ModulationKind::Qam16 => {
                let s = 1.0 / math::sqrt(10.0);
                let levels = [-3.0, -1.0, 1.0, 3.0];
                let mut pts = Vec::with_capacity(16);
                for &im in &levels {
                    for &re in &levels {
                        pts.push(Point::new(re * s, im * s));
                    }
                }
                pts
            }
            ModulationKind::Psk16 => (0..16)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / 16.0;
                    Point::new(math::cos(a), math::sin(a))
                })
                .collect(),
        }
    }
}

impl core::str::FromStr for ModulationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qam16" | "16qam" | "16-qam" => Ok(ModulationKind::Qam16),
            "psk16" | "16psk" | "16-psk" => Ok(ModulationKind::Psk16),
            other => Err(Error::InvalidParameter(alloc::format!("unknown modulation '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labeling {
    SetPartition,
    Gray,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    kind: ModulationKind,
    labeling: Labeling,
    bits: usize,
    points: Vec<Point>,
}

impl Constellation {
    /// Set-partition labeled constellation.
    pub fn build(kind: ModulationKind) -> Self {
        let geo = kind.geometric_points();
        let labels = set_partition_labels(&geo).expect("16 points partition cleanly");
        Self::from_labels(kind, Labeling::SetPartition, &geo, &labels)
    }

    /// Gray-labeled constellation. Level 1 carries the most significant
    /// Gray bit (the half-plane decision), so multistage decoding resolves
    /// the most reliable bits first. QAM labels the in-phase axis with
    /// levels 1-2 and quadrature with levels 3-4.
    pub fn build_gray(kind: ModulationKind) -> Self {
        let geo = kind.geometric_points();
        let gray = |v: usize| v ^ (v >> 1);
        let reverse = |v: usize, width: u32| v.reverse_bits() >> (usize::BITS - width);
        let labels: Vec<usize> = match kind {
            ModulationKind::Qam16 => (0..16).map(|i| reverse(gray(i % 4), 2) | (reverse(gray(i / 4), 2) << 2)).collect(),
            ModulationKind::Psk16 => (0..16).map(|i| reverse(gray(i), 4)).collect(),
        };
        Self::from_labels(kind, Labeling::Gray, &geo, &labels)
    }

    fn from_labels(kind: ModulationKind, labeling: Labeling, geo: &[Point], labels: &[usize]) -> Self {
        let mut points = vec![Point::ZERO; geo.len()];
        for (g, &l) in labels.iter().enumerate() {
            points[l] = geo[g];
        }
        Self {
            kind,
            labeling,
            bits: geo.len().trailing_zeros() as usize,
            points,
        }
    }

    pub fn kind(&self) -> ModulationKind {
        self.kind
    }

    pub fn labeling(&self) -> Labeling {
        self.labeling
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Unit-energy points indexed by label.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    #[inline]
    pub fn point(&self, label: usize) -> Point {
        self.points[label]
    }

    #[inline]
    pub fn bit(label: usize, level: usize) -> u8 {
        ((label >> level) & 1) as u8
    }

    pub fn label_of_bits(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.bits {
            return Err(Error::BitLength {
                expected: self.bits,
                got: bits.len(),
            });
        }
        Ok(bits
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | (((b & 1) as usize) << i)))
    }

    pub fn bits_of_label(&self, label: usize) -> Vec<u8> {
        (0..self.bits).map(|i| Self::bit(label, i)).collect()
    }

    /// Maps `[A_1, .., A_m]` to the transmitted symbol at the given power.
    pub fn map_bits(&self, bits: &[u8], power: f64) -> Result<Point> {
        Ok(self.map_label(self.label_of_bits(bits)?, power))
    }

    #[inline]
    pub fn map_label(&self, label: usize, power: f64) -> Point {
        self.points[label] * math::sqrt(power)
    }

    /// Label of the point closest to `y / sqrt(power)`.
    pub fn nearest_label(&self, y: Point, power: f64) -> usize {
        let s = math::sqrt(power);
        let mut best = (f64::INFINITY, 0);
        for (l, &p) in self.points.iter().enumerate() {
            let d = y.dist_sqr(p * s);
            if d < best.0 {
                best = (d, l);
            }
        }
        best.1
    }

    /// Log-likelihoods `-|y - gain*sqrt(power)*x|^2 / noise_var` for every
    /// label, written into `out`.
    pub fn log_likelihoods_into(&self, y: Point, gain: f64, power: f64, noise_var: f64, out: &mut [f64]) {
        let a = gain * math::sqrt(power);
        let inv = 1.0 / noise_var;
        for (o, &p) in out.iter_mut().zip(&self.points) {
            *o = -y.dist_sqr(p * a) * inv;
        }
    }

    /// Posterior over labels under a uniform prior.
    pub fn symbol_posterior(&self, y: Point, gain: f64, power: f64, noise_var: f64) -> Result<Vec<f64>> {
        if !(noise_var > 0.0) {
            return Err(Error::NonPositiveNoise(noise_var));
        }
        let mut post = vec![0.0; self.size()];
        self.log_likelihoods_into(y, gain, power, noise_var, &mut post);
        math::softmax_in_place(&mut post);
        Ok(post)
    }

    /// LLR of the level-`level` bit (0-based) given the bits of all lower
    /// levels, from a posterior over labels. Clamped to `±LLR_CLAMP`.
    pub fn level_llr(&self, posterior: &[f64], level: usize, known_bits: &[u8]) -> Result<f64> {
        if level >= self.bits {
            return Err(Error::InvalidParameter(alloc::format!(
                "level {level} out of range for {} bits",
                self.bits
            )));
        }
        if known_bits.len() != level {
            return Err(Error::BitLength {
                expected: level,
                got: known_bits.len(),
            });
        }
        if posterior.len() != self.size() {
            return Err(Error::LengthMismatch {
                what: "posterior",
                expected: self.size(),
                got: posterior.len(),
            });
        }
        let prefix = known_bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| acc | (((b & 1) as usize) << i));
        Ok(level_llr_with_prefix(posterior, level, prefix))
    }
}

/// `level_llr` without validation; `prefix` holds the known lower bits.
#[inline]
pub fn level_llr_with_prefix(posterior: &[f64], level: usize, prefix: usize) -> f64 {
    let mask = (1usize << level) - 1;
    let (mut p0, mut p1) = (0.0, 0.0);
    for (label, &p) in posterior.iter().enumerate() {
        if label & mask != prefix {
            continue;
        }
        if (label >> level) & 1 == 0 {
            p0 += p;
        } else {
            p1 += p;
        }
    }
    llr_from_masses(p0, p1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::min_distance_sqr;

    #[test]
    fn psk_points_on_unit_circle() {
        let c = Constellation::build(ModulationKind::Psk16);
        for p in c.points() {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
        // every angle 2*pi*k/16 appears exactly once
        let mut seen = [false; 16];
        for p in c.points() {
            let k = math::round(math::atan2(p.im, p.re).rem_euclid(2.0 * PI) / (2.0 * PI / 16.0)) as usize % 16;
            assert!(!seen[k]);
            seen[k] = true;
        }
    }

    #[test]
    fn unit_mean_energy() {
        for kind in [ModulationKind::Qam16, ModulationKind::Psk16] {
            for c in [Constellation::build(kind), Constellation::build_gray(kind)] {
                let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / 16.0;
                assert!((e - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for kind in [ModulationKind::Qam16, ModulationKind::Psk16] {
            let c = Constellation::build_gray(kind);
            let all: Vec<usize> = (0..16).collect();
            let d = min_distance_sqr(c.points(), &all);
            for a in 0..16 {
                for b in a + 1..16 {
                    if (c.point(a) - c.point(b)).norm_sqr() < d + 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "{kind:?} {a} {b}");
                    }
                }
            }
        }
        // level 1 splits the circle into two half-planes
        let psk = Constellation::build_gray(ModulationKind::Psk16);
        for l in 0..16 {
            let p = psk.point(l);
            let k = math::round(math::atan2(p.im, p.re).rem_euclid(2.0 * PI) / (2.0 * PI / 16.0)) as usize % 16;
            assert_eq!(l & 1, usize::from(k >= 8));
        }
    }

    #[test]
    fn partition_distances_non_decreasing() {
        for kind in [ModulationKind::Qam16, ModulationKind::Psk16] {
            let c = Constellation::build(kind);
            let mut prev = 0.0;
            for level in 0..=3 {
                // worst subset with the lowest `level` bits fixed
                let mut worst = f64::INFINITY;
                for prefix in 0..(1 << level) {
                    let subset: Vec<usize> = (0..16).filter(|l| l & ((1 << level) - 1) == prefix).collect();
                    worst = worst.min(min_distance_sqr(c.points(), &subset));
                }
                assert!(worst >= prev - 1e-12, "{kind:?} level {level}");
                prev = worst;
            }
        }
    }

    #[test]
    fn qam_level_one_subsets_gain_distance() {
        let c = Constellation::build(ModulationKind::Qam16);
        let full = min_distance_sqr(c.points(), &(0..16).collect::<Vec<_>>());
        for b in 0..2 {
            let subset: Vec<usize> = (0..16).filter(|l| l & 1 == b).collect();
            let d = min_distance_sqr(c.points(), &subset);
            assert!(d >= full);
            assert!((d - 2.0 * full).abs() < 1e-12);
        }
    }

    #[test]
    fn map_bits_power_scaling_and_errors() {
        let c = Constellation::build(ModulationKind::Qam16);
        let b = [1, 0, 1, 1];
        let p1 = c.map_bits(&b, 1.0).unwrap();
        let p4 = c.map_bits(&b, 4.0).unwrap();
        assert!((p4.norm() - 2.0 * p1.norm()).abs() < 1e-12);
        assert_eq!(c.map_bits(&[1, 0], 1.0), Err(Error::BitLength { expected: 4, got: 2 }));
        let psk = Constellation::build(ModulationKind::Psk16);
        assert!((psk.map_bits(&[0, 0, 0, 0], 1.0).unwrap().norm() - 1.0).abs() < 1e-12);
        let avg: f64 = (0..16).map(|l| psk.map_label(l, 3.0).norm_sqr()).sum::<f64>() / 16.0;
        assert!((avg - 3.0).abs() < 1e-12);
    }

    #[test]
    fn label_bijection_round_trip() {
        for kind in [ModulationKind::Qam16, ModulationKind::Psk16] {
            let c = Constellation::build(kind);
            for label in 0..16 {
                let bits = c.bits_of_label(label);
                let y = c.map_bits(&bits, 2.5).unwrap();
                assert_eq!(c.nearest_label(y, 2.5), label);
            }
        }
    }

    #[test]
    fn posterior_edge_cases() {
        let c = Constellation::build(ModulationKind::Qam16);
        assert!(c.symbol_posterior(Point::ZERO, 1.0, 1.0, 0.0).is_err());
        let y = c.map_label(5, 1.0);
        let post = c.symbol_posterior(y, 1.0, 1.0, 1e-9).unwrap();
        assert!(post[5] > 0.999);
        // midpoint of two nearest neighbours
        let (a, b) = (c.point(0), {
            let mut best = (f64::INFINITY, 0);
            for l in 1..16 {
                let d = c.point(0).dist_sqr(c.point(l));
                if d < best.0 {
                    best = (d, l);
                }
            }
            c.point(best.1)
        });
        let mid = (a + b) * 0.5;
        let post = c.symbol_posterior(mid, 1.0, 1.0, 0.05).unwrap();
        let la = c.nearest_label(a, 1.0);
        let lb = c.nearest_label(b, 1.0);
        assert!((post[la] - post[lb]).abs() < 1e-12);
        let s: f64 = post.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn level_llr_limits() {
        let c = Constellation::build(ModulationKind::Psk16);
        let uniform = vec![1.0 / 16.0; 16];
        for level in 0..4 {
            let known = vec![0u8; level];
            assert!(c.level_llr(&uniform, level, &known).unwrap().abs() < 1e-12);
        }
        let mut ind = vec![0.0; 16];
        ind[0b0110] = 1.0;
        assert_eq!(c.level_llr(&ind, 0, &[]).unwrap(), math::LLR_CLAMP);
        assert_eq!(c.level_llr(&ind, 1, &[0]).unwrap(), -math::LLR_CLAMP);
        assert!(c.level_llr(&ind, 2, &[0]).is_err());
    }
}
