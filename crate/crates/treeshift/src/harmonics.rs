//! Rotations by unimodular scalars, Fejér kernels, Cesàro-smoothed multipliers and
//! circle averages evaluated with roots-of-unity quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{analytic_coeffs, synthesize_truncated, CoeffSeq};
use crate::multiplier::{
    compressed_multiplier_norm, convolve_with_coeffs, MembershipOptions, OpSymbol, SymbolCoeff,
};
use crate::shift::{SeparatedBasis, ShiftOperator};
use crate::tree::Tree;
use crate::vector::{CompensatedComplexSum, L2Vector, C64};

/// Allowed deviation of `|w|` from one.
pub const UNIMODULAR_TOL: f64 = 1e-12;

fn check_unimodular(w: C64) -> Result<()> {
    if (w.norm() - 1.0).abs() > UNIMODULAR_TOL {
        Err(Error::NotUnimodular { modulus: w.norm() })
    } else {
        Ok(())
    }
}

/// `w^k` for the generations `k = 0..=depth`.
fn powers(w: C64, depth: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(depth + 1);
    let mut p = C64::new(1.0, 0.0);
    for _ in 0..=depth {
        out.push(p);
        p *= w;
    }
    out
}

/// Phase operator `D_w` on the kernel: `D_w e'_j = w^{k_j} e'_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationDiagonal {
    pub w: C64,
    pub phases: Vec<C64>,
}

impl RotationDiagonal {
    pub fn new(basis: &SeparatedBasis, w: C64) -> Result<Self> {
        check_unimodular(w)?;
        let table = powers(w, basis.max_generation());
        Ok(RotationDiagonal {
            w,
            phases: basis.gen_indices().iter().map(|&k| table[k]).collect(),
        })
    }
}

/// `f_w(u) = w^{|u|} f(u)`.
pub fn rotate_vector(tree: &Tree, f: &L2Vector, w: C64) -> Result<L2Vector> {
    check_unimodular(w)?;
    let table = powers(w, tree.depth());
    let mut out = f.clone();
    for v in 0..tree.len() {
        out[v] *= table[tree.generation(v)];
    }
    Ok(out)
}

/// `n -> w^n D_w c(n)`.
pub fn rotate_coeffs(c: &CoeffSeq, basis: &SeparatedBasis, w: C64) -> Result<CoeffSeq> {
    let d = RotationDiagonal::new(basis, w)?;
    let mut wn = C64::new(1.0, 0.0);
    let mut coeffs = Vec::with_capacity(c.len());
    for cn in &c.coeffs {
        coeffs.push(cn.iter().zip(&d.phases).map(|(x, p)| x * p * wn).collect());
        wn *= w;
    }
    Ok(CoeffSeq {
        coeffs,
        exact_to: c.exact_to,
    })
}

/// `n -> w^n D_w phi(n) D_conj(w)`.
pub fn rotate_symbol(phi: &OpSymbol, basis: &SeparatedBasis, w: C64) -> Result<OpSymbol> {
    let d = RotationDiagonal::new(basis, w)?;
    let mut wn = C64::new(1.0, 0.0);
    let mut coeffs = Vec::with_capacity(phi.len());
    for c in &phi.coeffs {
        coeffs.push(match c {
            SymbolCoeff::Scalar(a) => SymbolCoeff::Scalar(a * wn),
            SymbolCoeff::Dense(m) => {
                let mut r = m.clone();
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        r[(i, j)] *= wn * d.phases[i] * d.phases[j].conj();
                    }
                }
                SymbolCoeff::Dense(r)
            }
        });
        wn *= w;
    }
    OpSymbol::new(phi.dim, coeffs)
}

/// Coefficients `1 - m/(n+1)` of the `n`-th Fejér kernel, `m = 0..=n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FejerSymbol {
    pub n: usize,
    pub coeffs: Vec<f64>,
}

impl FejerSymbol {
    /// `p_n(m)`, zero for `m > n`.
    pub fn get(&self, m: usize) -> f64 {
        self.coeffs.get(m).copied().unwrap_or(0.0)
    }

    /// Pointwise product `m -> p_n(m) phi(m)`.
    pub fn smooth(&self, phi: &OpSymbol) -> OpSymbol {
        let coeffs = phi
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let p = C64::new(self.get(m), 0.0);
                match c {
                    SymbolCoeff::Scalar(a) => SymbolCoeff::Scalar(a * p),
                    SymbolCoeff::Dense(mat) => SymbolCoeff::Dense(mat * p),
                }
            })
            .collect();
        OpSymbol {
            dim: phi.dim,
            coeffs,
        }
    }
}

pub fn fejer_symbol(n: usize) -> FejerSymbol {
    FejerSymbol {
        n,
        coeffs: (0..=n).map(|m| 1.0 - m as f64 / (n as f64 + 1.0)).collect(),
    }
}

/// `M_phi f` through the model: coefficients, convolution, synthesis on the truncation.
pub fn model_multiply(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    phi: &OpSymbol,
    f: &L2Vector,
) -> Result<L2Vector> {
    let c = analytic_coeffs(shift, basis, f, shift.depth())?;
    Ok(synthesize_truncated(shift, basis, &convolve_with_coeffs(phi, &c)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub order: usize,
    pub vector: usize,
    /// `||M_{p_n phi} f - M_phi f||`.
    pub error: f64,
    /// Compressed norm of `M_{p_n phi}` at the report's norm depth.
    pub norm_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Compressed norm of `M_phi` itself.
    pub base_norm: f64,
    pub norm_depth: usize,
}

impl ConvergenceReport {
    pub fn error(&self, order: usize, vector: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.order == order && r.vector == vector)
            .map(|r| r.error)
    }

    /// Largest `norm_estimate / base_norm` over all orders.
    pub fn worst_domination_ratio(&self) -> f64 {
        if self.base_norm == 0.0 {
            return if self.rows.iter().all(|r| r.norm_estimate == 0.0) { 0.0 } else { f64::INFINITY };
        }
        self.rows
            .iter()
            .map(|r| r.norm_estimate / self.base_norm)
            .fold(0.0, f64::max)
    }
}

fn require_scalar(phi: &OpSymbol) -> Result<()> {
    if phi.scalar_coeffs().is_none() {
        return Err(Error::PreconditionFailed(
            "symbol must be a multiple of the identity in every coefficient".into(),
        ));
    }
    Ok(())
}

/// Distance between Fejér-smoothed and plain multipliers on each test vector, and the
/// compressed norms of the smoothed multipliers at generation `norm_depth`.
pub fn cesaro_convergence_experiment(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    phi: &OpSymbol,
    orders: &[usize],
    test_vectors: &[L2Vector],
    norm_depth: usize,
    opts: &MembershipOptions,
) -> Result<ConvergenceReport> {
    require_scalar(phi)?;
    let base: Vec<L2Vector> = test_vectors
        .iter()
        .map(|f| model_multiply(shift, basis, phi, f))
        .collect::<Result<_>>()?;
    let base_norm = compressed_multiplier_norm(shift, basis, phi, norm_depth, opts)?;
    let mut rows = Vec::new();
    for &n in orders {
        let smoothed = fejer_symbol(n).smooth(phi);
        let norm_estimate = compressed_multiplier_norm(shift, basis, &smoothed, norm_depth, opts)?;
        for (id, (f, b)) in test_vectors.iter().zip(&base).enumerate() {
            let g = model_multiply(shift, basis, &smoothed, f)?;
            rows.push(ConvergenceRow {
                order: n,
                vector: id,
                error: g.distance(b),
                norm_estimate,
            });
        }
    }
    Ok(ConvergenceReport {
        rows,
        base_norm,
        norm_depth,
    })
}

/// Maximum over the test vectors of
/// `|| (1/Q) sum_q conj(w_q)^k M_{phi_{w_q}} f - M_{chi_k phi(k)} f ||` with `w_q` the
/// `Q`-th roots of unity, relative to the magnitude of the coefficients of `f`. `Q` defaults
/// to `len(phi) + |k| + 1`.
pub fn circle_integral_check(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    phi: &OpSymbol,
    k: i64,
    quadrature_points: Option<usize>,
    test_vectors: &[L2Vector],
) -> Result<f64> {
    require_scalar(phi)?;
    let degree = phi.len().saturating_sub(1) + k.unsigned_abs() as usize;
    let q = quadrature_points.unwrap_or(degree + 1 + 1);
    if q <= degree {
        return Err(Error::QuadratureTooCoarse { points: q, degree });
    }
    let target_symbol = {
        let mut coeffs = vec![SymbolCoeff::Scalar(C64::new(0.0, 0.0)); phi.len()];
        if k >= 0 && (k as usize) < phi.len() {
            coeffs[k as usize] = phi.coeffs[k as usize].clone();
        }
        OpSymbol::new(phi.dim, coeffs)?
    };
    let nodes: Vec<C64> = (0..q)
        .map(|j| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / q as f64))
        .collect();
    let rotated: Vec<OpSymbol> = nodes
        .iter()
        .map(|&w| rotate_symbol(phi, basis, w))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for f in test_vectors {
        let c = analytic_coeffs(shift, basis, f, shift.depth())?;
        let mut acc = vec![CompensatedComplexSum::default(); shift.len()];
        for (w, sym) in nodes.iter().zip(&rotated) {
            let weight = w.conj().powi(k as i32) / q as f64;
            let g = synthesize_truncated(shift, basis, &convolve_with_coeffs(sym, &c)?);
            for (a, z) in acc.iter_mut().zip(g.as_slice()) {
                a.add(weight * z);
            }
        }
        let average = L2Vector::from_vec(acc.iter().map(|a| a.value()).collect());
        let target = synthesize_truncated(shift, basis, &convolve_with_coeffs(&target_symbol, &c)?);
        worst = worst.max(average.distance(&target) / c.magnitude());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::ExampleName;

    #[test]
    fn fejer_coefficients() {
        assert_eq!(fejer_symbol(0).coeffs, vec![1.0]);
        let p = fejer_symbol(2);
        assert!((p.get(1) - 2.0 / 3.0).abs() < 1e-15 && (p.get(2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(fejer_symbol(4).get(5), 0.0);
    }

    #[test]
    fn rotation_rejects_non_unimodular() {
        let s = ShiftOperator::from_example(ExampleName::T2, 3, &[0.5]).unwrap();
        assert!(matches!(
            rotate_vector(s.tree(), &s.unit(0), C64::new(1.1, 0.0)),
            Err(Error::NotUnimodular { .. })
        ));
    }

    #[test]
    fn coarse_quadrature_is_rejected() {
        let s = ShiftOperator::from_example(ExampleName::T2, 4, &[0.5]).unwrap();
        let b = SeparatedBasis::new(&s);
        let phi = crate::multiplier::ScalarSymbol::from_real(&[1.0, 0.5, 0.25]).to_op(b.dim());
        assert!(matches!(
            circle_integral_check(&s, &b, &phi, 1, Some(3), &[s.unit(0)]),
            Err(Error::QuadratureTooCoarse { .. })
        ));
    }
}
