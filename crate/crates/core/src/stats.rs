//! Replication statistics: means, normal-approximation 95% intervals and
//! empirical CDFs.

use serde::{Deserialize, Serialize};

pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Half-width of the 95% interval; NaN with fewer than two values.
    pub ci95: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let ci95 = if n < 2 {
            f64::NAN
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z_95 * (var / n as f64).sqrt()
        };
        Self { mean, ci95, n }
    }

    pub fn lo(&self) -> f64 {
        self.mean - self.ci95
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.ci95
    }

    /// True when this interval lies entirely above `other`'s.
    pub fn above(&self, other: &Estimate) -> bool {
        self.lo() > other.hi()
    }

    pub fn positive(&self) -> bool {
        self.lo() > 0.0
    }
}

/// Sorted samples with the step-function CDF `F(x) = #{s <= x} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// Fraction of samples in the closed interval `[lo, hi]`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let a = self.sorted.partition_point(|&s| s < lo);
        let b = self.sorted.partition_point(|&s| s <= hi);
        (b.saturating_sub(a)) as f64 / self.sorted.len() as f64
    }

    /// CDF on a regular grid from `lo` to `hi` inclusive.
    pub fn on_grid(&self, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
        (0..points)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                (x, self.eval(x))
            })
            .collect()
    }

    /// Bins of width `bin` on `(lo, hi]` that hold at least `min_mass` of the
    /// samples, as `(left edge, right edge, mass)`. Each qualifying bin is a
    /// point where the CDF rises steeply.
    pub fn steep_bins(&self, lo: f64, hi: f64, bin: f64, min_mass: f64) -> Vec<(f64, f64, f64)> {
        let bins = ((hi - lo) / bin).round() as usize;
        (0..bins)
            .filter_map(|i| {
                let right = hi - i as f64 * bin;
                let left = right - bin;
                let m = self.mass_half_open(left, right);
                (m >= min_mass).then_some((left, right, m))
            })
            .collect()
    }

    fn mass_half_open(&self, left: f64, right: f64) -> f64 {
        let a = self.sorted.partition_point(|&s| s <= left);
        let b = self.sorted.partition_point(|&s| s <= right);
        (b - a) as f64 / self.sorted.len() as f64
    }
}
