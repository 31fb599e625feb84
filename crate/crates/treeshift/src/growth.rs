//! Growth diagnostics: norms of compressions at increasing sizes and the slope rule
//! that turns them into a bounded/divergent verdict.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::vector::C64;

/// Default slope above which growth counts as divergence.
pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    BoundedSoFar,
    DivergenceDetected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    /// Truncation sizes (generation depths or section lengths).
    pub depths: Vec<usize>,
    /// Operator-norm estimates, one per entry of `depths`.
    pub norms: Vec<f64>,
    /// Fitted slope of `ln(norm)` against `ln(depth)` on the trailing window.
    pub slope: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

impl MembershipReport {
    pub fn from_norms(depths: Vec<usize>, norms: Vec<f64>, threshold: f64) -> Self {
        let slope = growth_slope(&depths, &norms);
        let verdict = if slope > threshold {
            Verdict::DivergenceDetected
        } else {
            Verdict::BoundedSoFar
        };
        MembershipReport {
            depths,
            norms,
            slope,
            threshold,
            verdict,
        }
    }
}

/// Least-squares slope of `ln(norm)` versus `ln(depth)` over the points with
/// `depth >= max_depth / 2`, widened to at least three trailing points.
///
/// A logarithmic depth axis keeps power-law and logarithmic growth visible at any scale;
/// exponential growth shows up as a slope that increases with depth. Identically zero
/// norms are bounded; a zero followed by positive norms counts as growth.
pub fn growth_slope(depths: &[usize], norms: &[f64]) -> f64 {
    let points: Vec<(f64, f64)> = depths
        .iter()
        .zip(norms)
        .filter(|(d, _)| **d > 0)
        .map(|(&d, &n)| (d as f64, n))
        .collect();
    if points.len() < 2 {
        return 0.0;
    }
    let max_depth = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let mut start = points
        .iter()
        .position(|p| p.0 >= max_depth / 2.0)
        .unwrap_or(0);
    start = start.min(points.len().saturating_sub(3));
    let window = &points[start..];
    let peak = window.iter().map(|p| p.1).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    if window.iter().any(|p| p.1 <= 0.0) {
        // a norm that leaves zero inside the window grows without a finite log-slope
        return f64::INFINITY;
    }
    let xs: Vec<f64> = window.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Below this size a full SVD is cheap enough; above it the Gram matrix is used.
const GRAM_THRESHOLD: usize = 48;

/// Largest singular value of a dense complex matrix.
pub fn largest_singular_value(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().all(|z| z.im == 0.0) {
        return largest_singular_value_real(&m.map(|z| z.re));
    }
    if m.nrows().min(m.ncols()) <= GRAM_THRESHOLD {
        return m.clone().singular_values().iter().copied().fold(0.0, f64::max);
    }
    let gram = if m.nrows() >= m.ncols() {
        m.adjoint() * m
    } else {
        m * m.adjoint()
    };
    gram.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(0.0)
        .sqrt()
}

/// Largest singular value of a dense real matrix.
pub fn largest_singular_value_real(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows().min(m.ncols()) <= GRAM_THRESHOLD {
        return m.clone().singular_values().iter().copied().fold(0.0, f64::max);
    }
    let gram = if m.nrows() >= m.ncols() {
        m.transpose() * m
    } else {
        m * m.transpose()
    };
    gram.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(0.0)
        .sqrt()
}
