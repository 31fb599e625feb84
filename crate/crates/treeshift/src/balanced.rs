//! Shifts whose vertex norms depend only on the generation: layer decomposition,
//! weighted sequence spaces and the entrywise description of multipliers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{
    largest_singular_value, largest_singular_value_real, MembershipReport, Verdict,
};
use crate::multiplier::{membership_diagnostic, MembershipOptions, OpSymbol, ScalarSymbol};
use crate::shift::{SeparatedBasis, ShiftOperator};
use crate::tree::VertexId;
use crate::vector::{L2Vector, C64};

fn require_balanced(shift: &ShiftOperator) -> Result<()> {
    let check = shift.is_balanced();
    match check.witness {
        Some((u, v)) if !check.balanced => Err(Error::NotBalanced {
            u: shift.tree().label(u).to_string(),
            v: shift.tree().label(v).to_string(),
        }),
        _ => Ok(()),
    }
}

/// The single generation carrying `f`, `None` for the zero vector.
fn single_generation(shift: &ShiftOperator, f: &L2Vector) -> Result<Option<usize>> {
    let tree = shift.tree();
    let mut gen = None;
    for v in 0..f.len() {
        if f[v] != C64::new(0.0, 0.0) {
            let k = tree.generation(v);
            match gen {
                None => gen = Some(k),
                Some(g) if g != k => return Err(Error::WrongGeneration { expected: g }),
                _ => {}
            }
        }
    }
    Ok(gen)
}

/// `|<S^n f, S^n g> - prod_{j=1..n} ||S e_{par^j(u')}||^2 <f, g>|` for `f`, `g` in one
/// generation `k` and `u'` in generation `k + n`.
pub fn balanced_inner_product_check(
    shift: &ShiftOperator,
    f: &L2Vector,
    g: &L2Vector,
    n: usize,
    u_prime: VertexId,
) -> Result<f64> {
    require_balanced(shift)?;
    let tree = shift.tree();
    let k = match (single_generation(shift, f)?, single_generation(shift, g)?) {
        (Some(a), Some(b)) if a != b => return Err(Error::WrongGeneration { expected: a }),
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => tree.generation(u_prime).saturating_sub(n),
    };
    if tree.generation(u_prime) != k + n {
        return Err(Error::WrongGeneration { expected: k + n });
    }
    let lhs = shift.shift_power(f, n).inner(&shift.shift_power(g, n));
    let factor: f64 = (1..=n)
        .map(|j| shift.norm_square(tree.ancestor(u_prime, j).unwrap()))
        .product();
    Ok((lhs - f.inner(g) * factor).norm())
}

/// `f = sum_n S^n f_n` with `f_n` in the kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WoldDecomposition {
    /// `parts[n]` holds the basis coordinates of `f_n`.
    pub parts: Vec<Vec<C64>>,
    /// `||S^n f_n||^2`.
    pub layer_norms_sq: Vec<f64>,
    /// `||f - sum_n S^n f_n||`.
    pub residual: f64,
}

/// Projects `f` onto the layers `S^n E`: `<f, S^n e'_j> / ||S^n e'_j||^2`.
pub fn wold_decompose(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    f: &L2Vector,
) -> Result<WoldDecomposition> {
    require_balanced(shift)?;
    let depth = shift.depth();
    let dim = basis.dim();
    let mut parts = vec![vec![C64::new(0.0, 0.0); dim]; depth + 1];
    let mut layers = vec![shift.zeros(); depth + 1];
    for j in 0..dim {
        let mut v = basis.vector(j);
        for n in 0..=depth - basis.gen_index(j).min(depth) {
            let norm_sq = v.norm_sqr();
            if norm_sq > 0.0 {
                let a = f.inner(&v) / norm_sq;
                parts[n][j] = a;
                layers[n].axpy(a, &v);
            }
            v = shift.apply_shift_truncated(&v);
        }
    }
    let mut total = shift.zeros();
    for layer in &layers {
        total.axpy(C64::new(1.0, 0.0), layer);
    }
    Ok(WoldDecomposition {
        parts,
        layer_norms_sq: layers.iter().map(L2Vector::norm_sqr).collect(),
        residual: f.distance(&total),
    })
}

/// Positive weights `beta_n` of a weighted sequence space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaWeights {
    pub beta: Vec<f64>,
}

impl BetaWeights {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::BadParams(format!("weights must be positive, got {b}")));
        }
        Ok(BetaWeights { beta })
    }

    /// `beta_n = 1`.
    pub fn constant(len: usize) -> Self {
        BetaWeights {
            beta: vec![1.0; len],
        }
    }

    /// `beta_n = ||S^n e||^2` for `n` while `S^n e` stays inside the truncation.
    pub fn from_vector(shift: &ShiftOperator, e: &L2Vector, generation: usize) -> Result<Self> {
        let mut v = e.clone();
        let mut beta = Vec::new();
        for _ in 0..=shift.depth().saturating_sub(generation) {
            beta.push(v.norm_sqr());
            v = shift.apply_shift_truncated(&v);
        }
        Self::new(beta)
    }

    /// `beta_n = ||S^n e_root||^2`, `n = 0..=depth`.
    pub fn from_root(shift: &ShiftOperator) -> Result<Self> {
        Self::from_vector(shift, &shift.unit(shift.tree().root()), 0)
    }

    /// `beta_n = ||S^n e'_j||^2`.
    pub fn from_kernel_vector(shift: &ShiftOperator, basis: &SeparatedBasis, j: usize) -> Result<Self> {
        Self::from_vector(shift, &basis.vector(j), basis.gen_index(j))
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

/// Norm of `b -> a * b` from `l^2(beta1)` to `l^2(beta2)` on sequences of length `t`:
/// the lower-triangular matrix `sqrt(beta2_n) a_{n-k} / sqrt(beta1_k)`.
pub fn weighted_toeplitz_norm(
    a: &ScalarSymbol,
    beta1: &BetaWeights,
    beta2: &BetaWeights,
    t: usize,
) -> Result<f64> {
    if beta1.len() < t || beta2.len() < t {
        return Err(Error::BadParams(format!(
            "weights of length {} and {} do not cover truncation {t}",
            beta1.len(),
            beta2.len()
        )));
    }
    let entry = |n: usize, k: usize| -> C64 {
        if k > n {
            return C64::new(0.0, 0.0);
        }
        a.get(n - k) * (beta2.beta[n].sqrt() / beta1.beta[k].sqrt())
    };
    if a.coeffs.iter().all(|z| z.im == 0.0) {
        Ok(largest_singular_value_real(&DMatrix::from_fn(t, t, |n, k| entry(n, k).re)))
    } else {
        Ok(largest_singular_value(&DMatrix::from_fn(t, t, entry)))
    }
}

/// Weighted Toeplitz norms for each truncation and the slope verdict.
pub fn hinf_membership(
    a: &ScalarSymbol,
    beta1: &BetaWeights,
    beta2: &BetaWeights,
    truncs: &[usize],
    threshold: f64,
) -> Result<MembershipReport> {
    let norms = truncs
        .iter()
        .map(|&t| weighted_toeplitz_norm(a, beta1, beta2, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(MembershipReport::from_norms(truncs.to_vec(), norms, threshold))
}

/// `4, 8, 16, ...` up to and including `max` (which is appended if not a power of two).
pub fn doubling_truncations(max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut t = 4;
    while t < max {
        out.push(t);
        t *= 2;
    }
    out.push(max);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    /// Number of `(i, j, n)` triples covered.
    pub triples: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Largest relative excursion outside the allowed interval (zero when all hold).
    pub max_violation: f64,
    /// `c`, the lower bound of the shift.
    pub lower_bound: f64,
    /// `||S||` on the truncation.
    pub norm: f64,
}

impl RatioReport {
    pub fn holds(&self) -> bool {
        self.max_violation <= 1e-12
    }
}

/// `||S^n e'_i|| / ||S^n e'_j||` against `[(c/||S||)^{|k_i-k_j|}, (||S||/c)^{|k_i-k_j|}]`
/// for every pair and every `n <= depth - max(k_i, k_j)`.
///
/// Per generation and `n` only the extreme norms matter, so the pairs are covered
/// through per-generation minima and maxima.
pub fn ratio_bounds_check(shift: &ShiftOperator, basis: &SeparatedBasis) -> Result<RatioReport> {
    require_balanced(shift)?;
    let depth = shift.depth();
    let kmax = basis.max_generation();
    // extremes[k][n] = (min, max, count) of ||S^n e'_j|| over j with k_j = k
    let mut extremes = vec![vec![(f64::INFINITY, 0.0f64, 0usize); depth + 1]; kmax + 1];
    for j in 0..basis.dim() {
        let k = basis.gen_index(j);
        let mut v = basis.vector(j);
        for n in 0..=depth - k {
            let norm = v.norm();
            let e = &mut extremes[k][n];
            *e = (e.0.min(norm), e.1.max(norm), e.2 + 1);
            v = shift.apply_shift_truncated(&v);
        }
    }
    let c = shift.lower_bound();
    let s = shift.norm();
    let mut report = RatioReport {
        triples: 0,
        min_ratio: f64::INFINITY,
        max_ratio: 0.0,
        max_violation: 0.0,
        lower_bound: c,
        norm: s,
    };
    for ki in 0..=kmax {
        for kj in 0..=kmax {
            let gap = ki.abs_diff(kj) as i32;
            let (lo, hi) = ((c / s).powi(gap), (s / c).powi(gap));
            for n in 0..=depth - ki.max(kj) {
                let (a, b) = (extremes[ki][n], extremes[kj][n]);
                if a.2 == 0 || b.2 == 0 {
                    continue;
                }
                let (rmin, rmax) = (a.0 / b.1, a.1 / b.0);
                report.triples += a.2 * b.2;
                report.min_ratio = report.min_ratio.min(rmin);
                report.max_ratio = report.max_ratio.max(rmax);
                let violation = ((lo - rmin) / lo).max((rmax - hi) / hi).max(0.0);
                report.max_violation = report.max_violation.max(violation);
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub i: usize,
    pub j: usize,
    pub report: MembershipReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KomReport {
    /// Verdict from compressions of the multiplication operator.
    pub membership: MembershipReport,
    /// Per-entry weighted-Toeplitz verdicts (entries that vanish identically are omitted).
    pub entries: Vec<EntryReport>,
    /// Divergent iff some entry diverges.
    pub entry_verdict: Verdict,
    pub agree: bool,
}

/// Cross-checks the operator-side verdict against entrywise membership of
/// `n -> <phi(n) e'_j, e'_i>` in the space weighted by `||S^n e_root||^2`.
pub fn kom_characterization_check(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    phi: &OpSymbol,
    max_depth: usize,
    opts: &MembershipOptions,
) -> Result<KomReport> {
    if !shift.is_balanced().balanced {
        return Err(Error::PreconditionFailed("shift is not balanced".into()));
    }
    if shift.lower_bound() <= 0.0 {
        return Err(Error::PreconditionFailed("shift is not left-invertible".into()));
    }
    let membership = membership_diagnostic(shift, basis, phi, max_depth, opts)?;
    let beta = BetaWeights::from_root(shift)?;
    let truncs: Vec<usize> = membership.depths.iter().map(|d| d + 1).collect();
    let pairs: Vec<(usize, usize)> = if phi.scalar_coeffs().is_some() {
        (0..phi.dim).map(|i| (i, i)).collect()
    } else {
        (0..phi.dim)
            .flat_map(|i| (0..phi.dim).map(move |j| (i, j)))
            .collect()
    };
    let mut entries = Vec::new();
    for (i, j) in pairs {
        let seq = phi.entry_sequence(i, j);
        if seq.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            continue;
        }
        let report = hinf_membership(&ScalarSymbol::new(seq), &beta, &beta, &truncs, opts.threshold)?;
        entries.push(EntryReport { i, j, report });
    }
    let entry_verdict = if entries
        .iter()
        .any(|e| e.report.verdict == Verdict::DivergenceDetected)
    {
        Verdict::DivergenceDetected
    } else {
        Verdict::BoundedSoFar
    };
    Ok(KomReport {
        agree: membership.verdict == entry_verdict,
        membership,
        entries,
        entry_verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::ExampleName;

    #[test]
    fn chain_with_weights_two_and_three() {
        let s = ShiftOperator::from_example(ExampleName::Unilateral, 2, &[2.0, 3.0]).unwrap();
        let e = s.unit(0);
        let lhs = s.shift_power(&e, 2).norm_sqr();
        assert!((lhs - 36.0).abs() < 1e-12);
        assert!(balanced_inner_product_check(&s, &e, &e, 2, 2).unwrap() < 1e-12);
        assert!(matches!(
            balanced_inner_product_check(&s, &e, &e, 2, 1),
            Err(Error::WrongGeneration { .. })
        ));
    }

    #[test]
    fn unbalanced_shift_is_rejected() {
        let s = ShiftOperator::from_example(ExampleName::T2, 4, &[0.5]).unwrap();
        let b = SeparatedBasis::new(&s);
        assert!(matches!(wold_decompose(&s, &b, &s.unit(0)), Err(Error::NotBalanced { .. })));
    }

    #[test]
    fn identity_convolution_has_norm_one() {
        let beta = BetaWeights::constant(16);
        let r = hinf_membership(&ScalarSymbol::unit(1), &beta, &beta, &[4, 8, 16], 0.02).unwrap();
        assert!(r.norms.iter().all(|n| (n - 1.0).abs() < 1e-12));
        assert_eq!(r.verdict, Verdict::BoundedSoFar);
    }
}
