//! Full-duplex Gaussian relay channel and the destination-side interference
//! cancellation that splits each received block into a direct-link view and
//! a relay-link view.

use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math::complex_gaussian;
use crate::{Error, Point, Result};

/// Which power is charged as interference on the relay-link view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceModel {
    /// `h13^2 * ps`: the source signal arrives at the destination via `h13`.
    Physical,
    /// `h12^2 * ps`, the alternative reading of the interference term.
    SourceRelayGain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub h13: f64,
    pub h12: f64,
    pub h23: f64,
    /// Total noise variance per 2-D symbol at the relay.
    pub n2_var: f64,
    /// Total noise variance per 2-D symbol at the destination.
    pub n3_var: f64,
    pub ps: f64,
    pub pr: f64,
    pub interference: InterferenceModel,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            h13: 1.0,
            h12: 2.0,
            h23: 11.0,
            n2_var: 8.0,
            n3_var: 1.0,
            ps: 1.0,
            pr: 1.0,
            interference: InterferenceModel::Physical,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h13", self.h13), ("h12", self.h12), ("h23", self.h23)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!("gain {name} is not finite")));
            }
        }
        if !(self.n2_var > 0.0) {
            return Err(Error::NonPositiveNoise(self.n2_var));
        }
        if !(self.n3_var > 0.0) {
            return Err(Error::NonPositiveNoise(self.n3_var));
        }
        if !(self.ps >= 0.0) || !(self.pr >= 0.0) {
            return Err(Error::InvalidParameter("transmit powers must be non-negative".into()));
        }
        Ok(())
    }

    /// Sets `ps = pr` from an SNR in dB defined as `ps / n3_var`.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let p = crate::math::db_to_linear(snr_db) * self.n3_var;
        self.ps = p;
        self.pr = p;
        self
    }

    pub fn interference_power(&self) -> f64 {
        match self.interference {
            InterferenceModel::Physical => self.h13 * self.h13 * self.ps,
            InterferenceModel::SourceRelayGain => self.h12 * self.h12 * self.ps,
        }
    }

    /// Effective noise variance on the relay-link view.
    pub fn y23_noise_var(&self) -> f64 {
        self.n3_var + self.interference_power()
    }

    /// `y2 = h12 * x1 + n2`.
    pub fn relay_observe<R: Rng + ?Sized>(&self, x1: &[Point], rng: &mut R) -> Vec<Point> {
        x1.iter()
            .map(|&x| x * self.h12 + complex_gaussian(rng, self.n2_var))
            .collect()
    }

    /// `y3 = h13 * x1 + h23 * x2 + n3`.
    pub fn destination_observe<R: Rng + ?Sized>(&self, x1: &[Point], x2: &[Point], rng: &mut R) -> Result<Vec<Point>> {
        if x1.len() != x2.len() {
            return Err(Error::LengthMismatch {
                what: "relay symbols",
                expected: x1.len(),
                got: x2.len(),
            });
        }
        Ok(x1
            .iter()
            .zip(x2)
            .map(|(&a, &b)| a * self.h13 + b * self.h23 + complex_gaussian(rng, self.n3_var))
            .collect())
    }

    /// Removes the decoded relay signal of the block before last from the
    /// previous destination block. `x2_decoded_prev2 = None` means the relay
    /// was silent. Returns the direct-link view, the relay-link view (the
    /// current block unchanged) and the noise variance of the latter.
    pub fn sic_decompose(
        &self,
        y3_current: &[Point],
        y3_prev: &[Point],
        x2_decoded_prev2: Option<&[Point]>,
    ) -> Result<SicOutput> {
        let y13 = match x2_decoded_prev2 {
            None => y3_prev.to_vec(),
            Some(x2) => {
                if x2.len() != y3_prev.len() {
                    return Err(Error::LengthMismatch {
                        what: "decoded relay symbols",
                        expected: y3_prev.len(),
                        got: x2.len(),
                    });
                }
                y3_prev.iter().zip(x2).map(|(&y, &x)| y - x * self.h23).collect()
            }
        };
        Ok(SicOutput {
            y13,
            y23: y3_current.to_vec(),
            y23_noise_var: self.y23_noise_var(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SicOutput {
    pub y13: Vec<Point>,
    pub y23: Vec<Point>,
    pub y23_noise_var: f64,
}
