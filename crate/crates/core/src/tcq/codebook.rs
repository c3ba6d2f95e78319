//! Reconstruction codebooks with twice as many points as the modulation and
//! their assignment to trellis branch labels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use super::trellis::Trellis;
use crate::constellation::ModulationKind;
use crate::math;
use crate::partition::set_partition_labels;
use crate::{Error, Point, Result};

/// Shape of a 32-point codebook. For QAM only `scale` matters; for PSK the
/// two rings have radii `2/(1+ratio)` and `2*ratio/(1+ratio)` times `scale`,
/// so their mean radius is `scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookParams {
    pub kind: ModulationKind,
    pub scale: f64,
    pub ring_ratio: f64,
}

impl CodebookParams {
    pub fn ring_radii(&self) -> (f64, f64) {
        let r = self.ring_ratio;
        (self.scale * 2.0 / (1.0 + r), self.scale * 2.0 * r / (1.0 + r))
    }
}

/// Builds the codebook in geometric order.
///
/// QAM: the 16-QAM grid `{±1, ±3}^2 / sqrt(10)` plus the 16 innermost
/// even-coordinate points that complete it to a quincunx lattice, all
/// multiplied by `scale`. PSK: two angle-aligned 16-point rings.
pub fn build_codebook(params: &CodebookParams) -> Result<Vec<Point>> {
    if !(params.scale > 0.0) || !params.scale.is_finite() {
        return Err(Error::Codebook(format!("scale must be positive, got {}", params.scale)));
    }
    match params.kind {
        ModulationKind::Qam16 => {
            let s = params.scale / math::sqrt(10.0);
            let mut pts = Vec::with_capacity(32);
            for &im in &[-3.0, -1.0, 1.0, 3.0] {
                for &re in &[-3.0, -1.0, 1.0, 3.0] {
                    pts.push(Point::new(re * s, im * s));
                }
            }
            let even: [(f64, f64); 16] = [
                (2.0, 0.0),
                (0.0, 2.0),
                (-2.0, 0.0),
                (0.0, -2.0),
                (2.0, 2.0),
                (-2.0, 2.0),
                (-2.0, -2.0),
                (2.0, -2.0),
                (4.0, 2.0),
                (2.0, 4.0),
                (-2.0, 4.0),
                (-4.0, 2.0),
                (-4.0, -2.0),
                (-2.0, -4.0),
                (2.0, -4.0),
                (4.0, -2.0),
            ];
            pts.extend(even.iter().map(|&(re, im)| Point::new(re * s, im * s)));
            Ok(pts)
        }
        ModulationKind::Psk16 => {
            if !(params.ring_ratio > 0.0) || !params.ring_ratio.is_finite() {
                return Err(Error::Codebook(format!("ring ratio must be positive, got {}", params.ring_ratio)));
            }
            let (r_in, r_out) = params.ring_radii();
            two_rings(r_in, r_out)
        }
    }
}

/// Two concentric 16-point rings at angles `2*pi*k/16`.
pub fn two_rings(r_in: f64, r_out: f64) -> Result<Vec<Point>> {
    if !(r_in > 0.0) || !(r_out > 0.0) {
        return Err(Error::Codebook("ring radii must be positive".into()));
    }
    if (r_out - r_in).abs() <= 1e-9 * r_out.max(r_in) {
        return Err(Error::Codebook("equal ring radii give only 16 distinct points".into()));
    }
    let mut pts = Vec::with_capacity(32);
    for &r in &[r_in, r_out] {
        for k in 0..16 {
            let a = 2.0 * PI * k as f64 / 16.0;
            pts.push(Point::new(r * math::cos(a), r * math::sin(a)));
        }
    }
    Ok(pts)
}

/// Maps every trellis output label to a codebook point: the coded output
/// bits select a set-partition subset and the uncoded bits a point inside it.
/// The result is indexed by label.
pub fn assign_labels(trellis: &Trellis, codebook: &[Point]) -> Result<Vec<Point>> {
    if codebook.len() != trellis.num_labels() {
        return Err(Error::Codebook(format!(
            "codebook has {} points, trellis has {} labels",
            codebook.len(),
            trellis.num_labels()
        )));
    }
    let part = set_partition_labels(codebook)?;
    let mut by_partition = vec![Point::ZERO; codebook.len()];
    for (g, &p) in part.iter().enumerate() {
        by_partition[p] = codebook[g];
    }
    Ok((0..codebook.len())
        .map(|label| by_partition[trellis.label_to_partition(label)])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::min_distance_sqr;
    use crate::tcq::trellis::GeneratorMatrix;

    fn qam(scale: f64) -> CodebookParams {
        CodebookParams { kind: ModulationKind::Qam16, scale, ring_ratio: 1.0 }
    }

    #[test]
    fn qam_energy_scales_quadratically() {
        let e = |s: f64| build_codebook(&qam(s)).unwrap().iter().map(|p| p.norm_sqr()).sum::<f64>();
        assert!((e(3.0) / e(1.0) - 9.0).abs() < 1e-12);
        assert!(build_codebook(&qam(0.0)).is_err());
    }

    #[test]
    fn psk_degenerate_rings_rejected() {
        let p = CodebookParams { kind: ModulationKind::Psk16, scale: 1.0, ring_ratio: 1.0 };
        assert!(build_codebook(&p).is_err());
        let p = CodebookParams { ring_ratio: 1.5, ..p };
        let pts = build_codebook(&p).unwrap();
        assert_eq!(pts.len(), 32);
        let (a, b) = p.ring_radii();
        assert!(((a + b) / 2.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn labeled_subsets_gain_distance() {
        let t = Trellis::build(&GeneratorMatrix::relay_default()).unwrap();
        for params in [
            qam(2.0),
            CodebookParams { kind: ModulationKind::Psk16, scale: 2.0, ring_ratio: 1.4 },
        ] {
            let cb = build_codebook(&params).unwrap();
            let labeled = assign_labels(&t, &cb).unwrap();
            let full = min_distance_sqr(&labeled, &(0..32).collect::<Vec<_>>());
            // the three coded bits pick one of eight subsets of four points
            for subset in 0..8 {
                let members: Vec<usize> = (0..32).filter(|&l| t.label_to_partition(l) & 7 == subset).collect();
                assert_eq!(members.len(), 4);
                assert!(min_distance_sqr(&labeled, &members) >= full);
            }
            // bijection
            let mut sorted = labeled.clone();
            sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            sorted.dedup();
            assert_eq!(sorted.len(), 32);
        }
    }
}
