//! Analytic model of a left-invertible shift: `f` is encoded by the kernel-valued
//! coefficients `P_E L^n f`, and the shift becomes multiplication by `z`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shift::{SeparatedBasis, ShiftOperator};
use crate::vector::{L2Vector, C64};

/// Tolerance on the forward residual accepted by [`reconstruct`].
pub const RECONSTRUCT_TOL: f64 = 1e-8;

/// Coefficients `n -> P_E L^n f`, each stored as coordinates in a [`SeparatedBasis`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffSeq {
    pub coeffs: Vec<Vec<C64>>,
    /// Largest `n` whose coefficient is exact for the input that produced the sequence.
    pub exact_to: usize,
}

impl CoeffSeq {
    pub fn zeros(dim: usize, len: usize) -> Self {
        CoeffSeq {
            coeffs: vec![vec![C64::new(0.0, 0.0); dim]; len],
            exact_to: len.saturating_sub(1),
        }
    }

    /// The sequence `(e, 0, 0, ...)` with `e` the `j`-th basis vector.
    pub fn basis_vector(dim: usize, len: usize, j: usize) -> Self {
        let mut c = Self::zeros(dim, len);
        c.coeffs[0][j] = C64::new(1.0, 0.0);
        c
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    /// Largest entrywise modulus of `self - other` over the common range.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    /// Largest coefficient modulus, floored at 1. Residuals of computations that pass through
    /// the model are measured relative to it, since `L^n` can amplify entries by `||L||^n`.
    pub fn magnitude(&self) -> f64 {
        self.coeffs.iter().flatten().map(|x| x.norm()).fold(1.0, f64::max)
    }

    /// Value of the analytic function `sum_n c(n) z^n` (coordinates in the basis).
    pub fn evaluate(&self, z: C64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for c in self.coeffs.iter().rev() {
            for (o, x) in out.iter_mut().zip(c) {
                *o = *o * z + x;
            }
        }
        out
    }
}

/// Coefficients `P_E L^n f` for `n = 0..=n_max`. Every coefficient is exact on the truncation.
pub fn analytic_coeffs(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    f: &L2Vector,
    n_max: usize,
) -> Result<CoeffSeq> {
    let mut g = f.clone();
    let mut coeffs = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        coeffs.push(basis.coords(&g));
        if n < n_max {
            g = shift.apply_left_inverse(&g)?;
        }
    }
    Ok(CoeffSeq {
        coeffs,
        exact_to: n_max,
    })
}

/// `sum_n S^n (sum_j c(n)_j e'_j)` restricted to the truncation.
pub fn synthesize_truncated(shift: &ShiftOperator, basis: &SeparatedBasis, c: &CoeffSeq) -> L2Vector {
    let mut g = shift.zeros();
    for coeff in c.coeffs.iter().rev() {
        g = shift.apply_shift_truncated(&g);
        basis.add_synthesis(&mut g, coeff);
    }
    g
}

/// Vector `g` supported in generations `<= support_depth` whose coefficients are `c`.
///
/// Coefficient maps are injective on the truncation and `sum_n S^n c(n)` inverts them,
/// so the solution is unique when it exists; it is returned after a forward check.
pub fn reconstruct(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    c: &CoeffSeq,
    support_depth: usize,
) -> Result<L2Vector> {
    let tree = shift.tree();
    let scale = c
        .coeffs
        .iter()
        .flatten()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1.0);
    let mut g = shift.zeros();
    for coeff in c.coeffs.iter().rev() {
        let spill: f64 = tree
            .generation_vertices(tree.depth())
            .iter()
            .map(|&v| g[v].norm())
            .fold(0.0, f64::max);
        if spill > RECONSTRUCT_TOL * scale {
            return Err(Error::Inconsistent { residual: spill });
        }
        g = shift.apply_shift_truncated(&g);
        basis.add_synthesis(&mut g, coeff);
    }
    let outside = (tree.count_up_to(support_depth)..g.len())
        .map(|v| g[v].norm())
        .fold(0.0, f64::max);
    if outside > RECONSTRUCT_TOL * scale {
        return Err(Error::Inconsistent { residual: outside });
    }
    let g = g.truncate_to(tree, support_depth);
    let back = analytic_coeffs(shift, basis, &g, c.len().saturating_sub(1))?;
    let residual = back.max_abs_diff(c);
    if residual > RECONSTRUCT_TOL * scale {
        return Err(Error::Inconsistent { residual });
    }
    Ok(g)
}

/// Model inner product: the `l^2` pairing of the reconstructed vectors.
pub fn model_inner(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    a: &CoeffSeq,
    b: &CoeffSeq,
) -> Result<C64> {
    let depth = shift.depth();
    let fa = reconstruct(shift, basis, a, depth)?;
    let fb = reconstruct(shift, basis, b, depth)?;
    Ok(fa.inner(&fb))
}

/// Growth data for powers of `L` on the truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    /// Estimate of the spectral radius of `L`.
    pub rho: f64,
    /// `K` with `||L^n|| <= K rho^n` for every computed `n`.
    pub growth_constant: f64,
    /// `||L^n||` for `n = 0..=depth`.
    pub power_norms: Vec<f64>,
    /// `||L^n||^(1/n)` for `n = 1..=depth`.
    pub roots: Vec<f64>,
}

impl RadiusEstimate {
    /// `sup_{|z| < 1/rho}`-type admissibility of a point.
    pub fn admits(&self, z: C64) -> bool {
        z.norm() * self.rho < 1.0
    }
}

/// Largest singular value of `L^n` by power iteration on `L*^n L^n`.
fn power_norm(shift: &ShiftOperator, n: usize, iterations: usize, rng: &mut ChaCha8Rng) -> f64 {
    let tree = shift.tree();
    let mut x = L2Vector::random(tree, tree.depth(), rng);
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let nx = x.norm();
        if nx == 0.0 {
            return 0.0;
        }
        x = x.scale(C64::new(1.0 / nx, 0.0));
        let mut y = x.clone();
        for _ in 0..n {
            y = shift.left_inverse(&y);
        }
        let next = y.norm();
        for _ in 0..n {
            y = shift.left_inverse_adjoint(&y);
        }
        x = y;
        let done = (next - estimate).abs() <= 1e-13 * next;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Estimates the spectral radius of `L` from `||L^n||^(1/n)` (max of the last five roots).
pub fn spectral_radius_estimate(shift: &ShiftOperator, iterations: usize) -> Result<RadiusEstimate> {
    if shift.lower_bound() <= 0.0 {
        return Err(Error::NotLeftInvertible {
            lower_bound: shift.lower_bound(),
        });
    }
    let depth = shift.depth();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut power_norms = vec![1.0];
    let mut roots = Vec::with_capacity(depth);
    for n in 1..=depth {
        let norm = power_norm(shift, n, iterations, &mut rng);
        power_norms.push(norm);
        roots.push(norm.powf(1.0 / n as f64));
    }
    let tail = roots.len().saturating_sub(5);
    let rho = roots[tail..].iter().copied().fold(0.0, f64::max);
    let growth_constant = if rho > 0.0 {
        power_norms
            .iter()
            .enumerate()
            .map(|(n, &p)| p / rho.powi(n as i32))
            .fold(0.0, f64::max)
    } else {
        1.0
    };
    Ok(RadiusEstimate {
        rho,
        growth_constant,
        power_norms,
        roots,
    })
}

/// Truncated reproducing kernel `sum_{m,n <= order} z^m conj(lam)^n P_E L^m L*^n` on `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelEval {
    pub z: C64,
    pub lambda: C64,
    /// `matrix[(i, j)] = <k(z, lam) e'_j, e'_i>`.
    pub matrix: nalgebra::DMatrix<C64>,
    pub order: usize,
    /// Bound on the neglected part of the double series.
    pub tail_bound: f64,
    /// `exact[j]`: column `j` sees no truncation effect (`k_j + order <= depth`).
    pub exact: Vec<bool>,
}

/// `sum_{n <= order} conj(w)^n L*^n e` for the kernel vector with coordinates `e`.
pub fn kernel_vector(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    e: &[C64],
    w: C64,
    order: usize,
) -> L2Vector {
    let mut term = basis.synthesize(e);
    let mut out = term.clone();
    let wc = w.conj();
    let mut power = C64::new(1.0, 0.0);
    for _ in 0..order {
        term = shift.left_inverse_adjoint(&term);
        power *= wc;
        out.axpy(power, &term);
    }
    out
}

pub fn kernel_matrix(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    radius: &RadiusEstimate,
    z: C64,
    lam: C64,
    order: usize,
) -> Result<KernelEval> {
    for p in [z, lam] {
        if !radius.admits(p) {
            return Err(Error::OutsideDisc {
                point: p.norm(),
                radius: 1.0 / radius.rho,
            });
        }
    }
    let dim = basis.dim();
    let mut matrix = nalgebra::DMatrix::<C64>::zeros(dim, dim);
    for j in 0..dim {
        let mut e = vec![C64::new(0.0, 0.0); dim];
        e[j] = C64::new(1.0, 0.0);
        let mut y = kernel_vector(shift, basis, &e, lam, order);
        let mut power = C64::new(1.0, 0.0);
        for m in 0..=order {
            let coords = basis.coords(&y);
            for (i, c) in coords.into_iter().enumerate() {
                matrix[(i, j)] += power * c;
            }
            if m < order {
                y = shift.left_inverse(&y);
                power *= z;
            }
        }
    }
    let a = radius.rho * z.norm();
    let b = radius.rho * lam.norm();
    let k2 = radius.growth_constant.powi(2);
    let o = order as i32 + 1;
    let tail_bound = k2 * (a.powi(o) / ((1.0 - a) * (1.0 - b)) + b.powi(o) / ((1.0 - b) * (1.0 - a)));
    let exact = basis
        .gen_indices()
        .iter()
        .map(|&k| k + order <= shift.depth())
        .collect();
    Ok(KernelEval {
        z,
        lambda: lam,
        matrix,
        order,
        tail_bound,
        exact,
    })
}

/// Residual of the eigenvalue equation for the adjoint of the model shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenResidual {
    /// `||S* g - lam g|| / ||g||` with `g` the truncated kernel vector at `conj(lam)`.
    pub residual: f64,
    /// `|lam| K (rho |lam|)^order`.
    pub bound: f64,
    /// Series order actually used (capped so that the kernel vector fits the truncation).
    pub order: usize,
}

pub fn eigenvector_residual(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    radius: &RadiusEstimate,
    lam: C64,
    e_index: usize,
    order: usize,
) -> Result<EigenResidual> {
    if !radius.admits(lam) {
        return Err(Error::OutsideDisc {
            point: lam.norm(),
            radius: 1.0 / radius.rho,
        });
    }
    let order = order.min(shift.depth() - basis.gen_index(e_index).min(shift.depth()));
    let mut e = vec![C64::new(0.0, 0.0); basis.dim()];
    e[e_index] = C64::new(1.0, 0.0);
    // the kernel at conj(lam) evaluates against conj(conj(lam)) = lam
    let g = kernel_vector(shift, basis, &e, lam.conj(), order);
    let image = shift.apply_adjoint(&g);
    let residual = image.distance(&g.scale(lam)) / g.norm();
    let bound = lam.norm()
        * radius.growth_constant
        * (radius.rho * lam.norm()).powi(order as i32);
    Ok(EigenResidual {
        residual,
        bound,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::ExampleName;

    #[test]
    fn kernel_vector_has_trivial_coefficients() {
        let s = ShiftOperator::from_example(ExampleName::T2, 6, &[0.5]).unwrap();
        let b = SeparatedBasis::new(&s);
        for j in 0..b.dim() {
            let c = analytic_coeffs(&s, &b, &b.vector(j), 6).unwrap();
            assert!(c.max_abs_diff(&CoeffSeq::basis_vector(b.dim(), 7, j)) < 1e-15);
        }
    }

    #[test]
    fn t2_coefficient_of_e12() {
        let alpha: f64 = 0.5;
        let s = ShiftOperator::from_example(ExampleName::T2, 6, &[alpha]).unwrap();
        let b = SeparatedBasis::new(&s);
        let f = s.unit(s.tree().vertex("(1,2)").unwrap());
        let c = analytic_coeffs(&s, &b, &f, 6).unwrap();
        let norm = (1.0 + alpha * alpha).sqrt();
        assert!(c.coeffs[1][0].norm() < 1e-15);
        assert!((c.coeffs[1][1] - C64::new(alpha / norm, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn radius_of_simple_chains() {
        let s = ShiftOperator::from_example(ExampleName::Unilateral, 10, &[]).unwrap();
        let r = spectral_radius_estimate(&s, 50).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-12);
        let s = ShiftOperator::from_example(ExampleName::Unilateral, 10, &[2.0; 10]).unwrap();
        assert!((spectral_radius_estimate(&s, 50).unwrap().rho - 0.5).abs() < 1e-12);
        let s = ShiftOperator::from_example(ExampleName::T2, 12, &[0.5]).unwrap();
        assert!(spectral_radius_estimate(&s, 200).unwrap().rho >= 2.0 - 1e-9);
    }

    #[test]
    fn reconstruct_rejects_overflowing_coefficients() {
        let s = ShiftOperator::from_example(ExampleName::Unilateral, 3, &[]).unwrap();
        let b = SeparatedBasis::new(&s);
        let mut c = CoeffSeq::zeros(1, 5);
        c.coeffs[4][0] = C64::new(1.0, 0.0);
        assert!(matches!(reconstruct(&s, &b, &c, 3), Err(Error::Inconsistent { .. })));
        let mut c = CoeffSeq::zeros(1, 4);
        c.coeffs[3][0] = C64::new(1.0, 0.0);
        assert!(matches!(reconstruct(&s, &b, &c, 2), Err(Error::Inconsistent { .. })));
        assert!(reconstruct(&s, &b, &c, 3).is_ok());
    }
}
