//! Uniform density grids.
//!
//! Limit-law densities are represented on uniform grids of at most
//! [`MAX_GRID`] points; convolutions are direct summations (O(N²), N ≤ 4096),
//! which keeps every value deterministic and free of FFT rounding surprises.

use crate::error::{Error, Result};

/// Hard cap on grid size.
pub const MAX_GRID: usize = 4096;

/// A density (or any function) sampled on a uniform symmetric grid
/// `y_i = -x + i·dy`, `i = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    /// half-width: the grid spans `[-x, x]`
    pub half_width: f64,
    /// sampled values
    pub values: Vec<f64>,
}

impl DensityGrid {
    /// Build a grid by sampling `f` at `n` equispaced points on `[-x, x]`.
    pub fn sample(f: &dyn Fn(f64) -> f64, half_width: f64, n: usize) -> Result<Self> {
        if n < 2 || n > MAX_GRID {
            return Err(Error::InvalidParameter(format!(
                "grid size {n} outside [2, {MAX_GRID}]"
            )));
        }
        let values = (0..n).map(|i| f(Self::point_at(half_width, n, i))).collect();
        Ok(DensityGrid { half_width, values })
    }

    /// Grid node `i`.
    pub fn point_at(half_width: f64, n: usize, i: usize) -> f64 {
        -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the grid is empty (never for constructed grids).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spacing `dy`.
    pub fn dy(&self) -> f64 {
        2.0 * self.half_width / (self.len() - 1) as f64
    }

    /// Node abscissae.
    pub fn points(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| Self::point_at(self.half_width, self.len(), i))
            .collect()
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let dy = self.dy();
        let inner: f64 = self.values[1..self.len() - 1].iter().sum();
        dy * (inner + 0.5 * (self.values[0] + self.values[self.len() - 1]))
    }

    /// Rescale values so the trapezoidal integral is 1.
    pub fn normalize(&mut self) -> Result<()> {
        let z = self.integral();
        if !(z > 0.0) {
            return Err(Error::InvalidParameter("cannot normalize a zero density".into()));
        }
        for v in &mut self.values {
            *v /= z;
        }
        Ok(())
    }

    /// Direct-summation convolution with the same-grid kernel `g`
    /// (`(f ∗ g)(y_i) ≈ Σ_j f(y_j) g(y_i − y_j) dy`), evaluated on this grid.
    pub fn convolve(&self, g: &dyn Fn(f64) -> f64) -> DensityGrid {
        let n = self.len();
        let dy = self.dy();
        let pts = self.points();
        let kernel: Vec<f64> = (0..(2 * n - 1))
            .map(|k| g((k as f64 - (n as f64 - 1.0)) * dy))
            .collect();
        let values = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    // y_i - y_j = (i - j) dy  →  kernel index (i - j) + (n-1)
                    acc += self.values[j] * kernel[i + (n - 1) - j];
                }
                acc * dy
            })
            .collect();
        let _ = pts;
        DensityGrid { half_width: self.half_width, values }
    }

    /// CDF at the grid nodes (trapezoidal accumulation, clipped to [0, 1]).
    pub fn cdf(&self) -> Vec<f64> {
        let dy = self.dy();
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(0.0);
        for j in 1..self.len() {
            acc += 0.5 * dy * (self.values[j - 1] + self.values[j]);
            out.push(acc);
        }
        let total = *out.last().unwrap();
        if total > 0.0 {
            for v in &mut out {
                *v = (*v / total).clamp(0.0, 1.0);
            }
        }
        out
    }

    /// Sup-norm distance between two CDFs on the same grid together with a
    /// second CDF provided as a callable (e.g. an analytic reference).
    pub fn ks_distance_to(&self, reference_cdf: &dyn Fn(f64) -> f64) -> f64 {
        let cdf = self.cdf();
        self.points()
            .iter()
            .zip(cdf.iter())
            .map(|(y, c)| (c - reference_cdf(*y)).abs())
            .fold(0.0, f64::max)
    }
}

/// Two-sample style KS distance between a weighted empirical sample and a
/// gridded reference CDF. `samples` are (value, weight) pairs.
pub fn weighted_ks(samples: &mut [(f64, f64)], grid: &DensityGrid) -> f64 {
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let cdf = grid.cdf();
    let pts = grid.points();
    let interp = |y: f64| -> f64 {
        if y <= pts[0] {
            return 0.0;
        }
        if y >= *pts.last().unwrap() {
            return 1.0;
        }
        let dy = grid.dy();
        let j = ((y - pts[0]) / dy).floor() as usize;
        let j = j.min(pts.len() - 2);
        let t = (y - pts[j]) / dy;
        cdf[j] * (1.0 - t) + cdf[j + 1] * t
    };
    let mut acc = 0.0;
    let mut ks: f64 = 0.0;
    for (y, w) in samples.iter() {
        acc += w / total;
        ks = ks.max((acc - interp(*y)).abs());
    }
    ks
}
