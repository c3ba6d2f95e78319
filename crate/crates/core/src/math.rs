//! Floating-point helpers backed by `libm`, plus a few numerical utilities
//! shared across modules.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Point;

/// Magnitude bound applied to every log-likelihood ratio.
pub const LLR_CLAMP: f64 = 40.0;

pub const LN_2: f64 = core::f64::consts::LN_2;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn atan(x: f64) -> f64 {
    libm::atan(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// Converts decibels to a linear power ratio.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    pow(10.0, db / 10.0)
}

/// Clamps an LLR to `±LLR_CLAMP`; NaN maps to 0.
#[inline]
pub fn clamp_llr(llr: f64) -> f64 {
    if llr.is_nan() {
        0.0
    } else {
        llr.clamp(-LLR_CLAMP, LLR_CLAMP)
    }
}

/// LLR `ln(p0 / p1)` from two unnormalized masses, clamped.
#[inline]
pub fn llr_from_masses(p0: f64, p1: f64) -> f64 {
    if p0 <= 0.0 && p1 <= 0.0 {
        0.0
    } else if p1 <= 0.0 {
        LLR_CLAMP
    } else if p0 <= 0.0 {
        -LLR_CLAMP
    } else {
        clamp_llr(ln(p0 / p1))
    }
}

/// Probability that the bit is 0 given its LLR.
#[inline]
pub fn llr_to_p0(llr: f64) -> f64 {
    1.0 / (1.0 + exp(-llr))
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        exp(x)
    } else {
        ln_1p(exp(x))
    }
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / core::f64::consts::SQRT_2)
}

/// Normalizes `v` to unit sum in place and returns the original sum. A zero
/// or non-finite sum leaves `v` untouched.
pub fn normalize(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        let inv = 1.0 / s;
        v.iter_mut().for_each(|x| *x *= inv);
    }
    s
}

/// Exponentiates log-weights in place after subtracting their maximum and
/// normalizes them to a probability vector.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
        return;
    }
    v.iter_mut().for_each(|x| *x = exp(*x - max));
    normalize(v);
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if abs(self.sum) >= abs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Running mean and standard error with compensated sums.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanAccumulator {
    n: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum.value() / self.n as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
        sqrt(var / n)
    }
}

/// Draws a circularly-symmetric complex Gaussian sample with the given total
/// variance (split equally between the two real dimensions).
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, total_var: f64) -> Point {
    let sd = sqrt(total_var / 2.0);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Point::new(sd * re, sd * im)
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        let n = order as f64;
        for i in 0..order {
            // Chebyshev initial guess, then Newton on P_n.
            let mut x = cos(core::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5));
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=order {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if abs(dx) < 1e-16 {
                    break;
                }
            }
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]` using `panels` equal sub-intervals.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            let half = 0.5 * h;
            let mut acc = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * f(mid + half * x);
            }
            total += acc * half;
        }
        total
    }
}
