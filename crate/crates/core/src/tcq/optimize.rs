//! Discrete search over symmetric codebook shapes, scored by the achievable
//! rate of the whole relay chain rather than by quantization distortion.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::codebook::CodebookParams;
use super::model::{PointTable, QuantizerFamily, QuantizerModel};
use super::trellis::GeneratorMatrix;
use crate::channel::ChannelParams;
use crate::constellation::{Constellation, ModulationKind};
use crate::math;
use crate::mlc::{mi_relay_constraint, mi_source_levels, LevelMis, RelayConstraint, SystemModel};
use crate::{Error, Result};

/// Multipliers of the nominal scale `h12 * sqrt(ps)` and PSK ring ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub scales: Vec<f64>,
    pub ring_ratios: Vec<f64>,
}

impl SearchGrid {
    /// Scales 0.7..=1.3 step 0.1; ring ratios 1.0..=2.0 step 0.1 for PSK.
    pub fn default_for(kind: ModulationKind) -> Self {
        let scales = (7..=13).map(|i| i as f64 / 10.0).collect();
        let ring_ratios = match kind {
            ModulationKind::Qam16 => alloc::vec![1.0],
            ModulationKind::Psk16 => (10..=20).map(|i| i as f64 / 10.0).collect(),
        };
        Self { scales, ring_ratios }
    }

    pub fn single(scale: f64, ring_ratio: f64) -> Self {
        Self { scales: alloc::vec![scale], ring_ratios: alloc::vec![ring_ratio] }
    }

    /// Grid points in search order (scale ascending, then ratio ascending),
    /// skipping degenerate PSK shapes.
    pub fn points(&self, kind: ModulationKind, nominal: f64) -> Vec<CodebookParams> {
        let mut scales = self.scales.clone();
        scales.sort_by(f64::total_cmp);
        let mut ratios = self.ring_ratios.clone();
        ratios.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        for &s in &scales {
            for &r in &ratios {
                if kind == ModulationKind::Psk16 && (r - 1.0).abs() < 1e-9 {
                    continue;
                }
                out.push(CodebookParams { kind, scale: s * nominal, ring_ratio: r });
                if kind == ModulationKind::Qam16 {
                    break;
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSettings {
    pub family: QuantizerFamily,
    pub choice_samples_per_symbol: usize,
    pub mi_samples: usize,
    pub mse_samples: usize,
    pub seed: u64,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        Self {
            family: QuantizerFamily::StateUnion,
            choice_samples_per_symbol: 10_000,
            mi_samples: 100_000,
            mse_samples: 100_000,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridEvaluation {
    pub params: CodebookParams,
    pub mis: LevelMis,
    pub constraint: RelayConstraint,
    /// `lhs <= rhs` on the point estimates.
    pub feasible: bool,
    pub mse: f64,
}

impl GridEvaluation {
    pub fn objective(&self) -> f64 {
        self.mis.total.mi
    }
}

#[derive(Clone, Debug)]
pub struct Optimized {
    pub model: QuantizerModel,
    pub table: PointTable,
    pub best: usize,
    pub evaluations: Vec<GridEvaluation>,
}

/// Builds the model for one shape: codebook, choice probabilities and the
/// transition table. All shapes use the same seeds.
pub fn build_model(
    generator: &GeneratorMatrix,
    params: CodebookParams,
    constellation: &Constellation,
    channel: &ChannelParams,
    settings: &OptimizeSettings,
) -> Result<(QuantizerModel, PointTable)> {
    let mut model = QuantizerModel::tcq(generator, params, settings.family, constellation.size())?;
    model.estimate_choice_probs(constellation, channel, settings.choice_samples_per_symbol, settings.seed)?;
    let table = model.conditional_point_prob(constellation, channel)?;
    Ok((model, table))
}

/// Scores every grid point; common random numbers across points.
pub fn evaluate_grid(
    generator: &GeneratorMatrix,
    constellation: &Constellation,
    channel: &ChannelParams,
    grid: &SearchGrid,
    settings: &OptimizeSettings,
) -> Result<Vec<(QuantizerModel, PointTable, GridEvaluation)>> {
    let nominal = channel.h12 * math::sqrt(channel.ps);
    let points = grid.points(constellation.kind(), nominal);
    if points.is_empty() {
        return Err(Error::InvalidParameter("search grid has no usable points".into()));
    }
    let mut out = Vec::with_capacity(points.len());
    for params in points {
        let (model, table) = build_model(generator, params, constellation, channel, settings)?;
        let sys = SystemModel {
            constellation,
            channel: *channel,
            relay: Some((&model, &table)),
        };
        let mis = mi_source_levels(&sys, settings.mi_samples, settings.seed ^ 0x5A5A)?;
        let constraint = mi_relay_constraint(&sys, settings.mi_samples, settings.seed ^ 0xA5A5)?;
        let mse = model.relay_mse(constellation, channel, settings.mse_samples, settings.seed ^ 0x3C3C)?;
        let feasible = constraint.lhs.mi <= constraint.rhs.mi;
        out.push((model, table, GridEvaluation { params, mis, constraint, feasible, mse }));
    }
    Ok(out)
}

/// Grid point maximizing the end-to-end rate subject to the relay-rate
/// constraint. Ties go to the smaller scale.
pub fn optimize_boundaries(
    generator: &GeneratorMatrix,
    constellation: &Constellation,
    channel: &ChannelParams,
    grid: &SearchGrid,
    settings: &OptimizeSettings,
) -> Result<Optimized> {
    let evaluated = evaluate_grid(generator, constellation, channel, grid, settings)?;
    let mut best: Option<usize> = None;
    for (i, (_, _, e)) in evaluated.iter().enumerate() {
        if e.feasible && best.is_none_or(|b| e.objective() > evaluated[b].2.objective()) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        // report the infeasible point with the smallest violation
        let (index, e) = evaluated
            .iter()
            .map(|(_, _, e)| e)
            .enumerate()
            .min_by(|a, b| {
                let va = a.1.constraint.lhs.mi - a.1.constraint.rhs.mi;
                let vb = b.1.constraint.lhs.mi - b.1.constraint.rhs.mi;
                va.total_cmp(&vb)
            })
            .expect("grid is non-empty");
        return Err(Error::NoFeasiblePoint {
            index,
            objective: e.objective(),
            lhs: e.constraint.lhs.mi,
            rhs: e.constraint.rhs.mi,
        });
    };
    Ok(finish(evaluated, best))
}

/// Grid point with the smallest Viterbi quantization error, the classical
/// rate-distortion design.
pub fn optimize_distortion(
    generator: &GeneratorMatrix,
    constellation: &Constellation,
    channel: &ChannelParams,
    grid: &SearchGrid,
    settings: &OptimizeSettings,
) -> Result<Optimized> {
    let evaluated = evaluate_grid(generator, constellation, channel, grid, settings)?;
    let mut best = 0;
    for (i, (_, _, e)) in evaluated.iter().enumerate() {
        if e.mse < evaluated[best].2.mse {
            best = i;
        }
    }
    Ok(finish(evaluated, best))
}

fn finish(evaluated: Vec<(QuantizerModel, PointTable, GridEvaluation)>, best: usize) -> Optimized {
    let mut evaluations = Vec::with_capacity(evaluated.len());
    let mut chosen = None;
    for (i, (model, table, e)) in evaluated.into_iter().enumerate() {
        if i == best {
            chosen = Some((model, table));
        }
        evaluations.push(e);
    }
    let (model, table) = chosen.expect("best index in range");
    Optimized { model, table, best, evaluations }
}
