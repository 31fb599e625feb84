//! Scalar multipliers acting directly on the tree, operator-valued symbols acting on
//! model coefficients by Cauchy-type convolution, and commutant symbol extraction.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{largest_singular_value, MembershipReport, DEFAULT_SLOPE_THRESHOLD};
use crate::model::{analytic_coeffs, synthesize_truncated, CoeffSeq};
use crate::operator::LinearMap;
use crate::shift::{SeparatedBasis, ShiftOperator};
use crate::vector::{L2Vector, C64};

/// Largest kernel dimension for which symbols are stored as dense matrices.
pub const MAX_DENSE_SYMBOL_DIM: usize = 1024;

/// Tolerance for `||AS - SA||` in [`commutant_check`].
pub const COMMUTANT_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarSymbol {
    #[serde(with = "complex_list")]
    pub coeffs: Vec<C64>,
}

impl ScalarSymbol {
    pub fn new(coeffs: Vec<C64>) -> Self {
        ScalarSymbol { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        ScalarSymbol {
            coeffs: coeffs.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    /// `(1, 0, 0, ...)` of the given length.
    pub fn unit(len: usize) -> Self {
        Self::monomial(0, len)
    }

    /// `chi_n` padded to length `len`.
    pub fn monomial(n: usize, len: usize) -> Self {
        let mut coeffs = vec![ZERO; len.max(n + 1)];
        coeffs[n] = ONE;
        ScalarSymbol { coeffs }
    }

    /// `(1, r, r^2, ...)`.
    pub fn geometric(ratio: f64, len: usize) -> Self {
        ScalarSymbol::from_real(&(0..len).map(|k| ratio.powi(k as i32)).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, n: usize) -> C64 {
        self.coeffs.get(n).copied().unwrap_or(ZERO)
    }

    /// `n -> coeffs[n] I` on a kernel of dimension `dim`.
    pub fn to_op(&self, dim: usize) -> OpSymbol {
        OpSymbol {
            dim,
            coeffs: self.coeffs.iter().map(|&c| SymbolCoeff::Scalar(c)).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// One coefficient of an operator symbol.
#[derive(Clone, Debug, PartialEq)]
pub enum SymbolCoeff {
    /// `c I`, stored without the matrix.
    Scalar(C64),
    /// Matrix in separated-basis coordinates, `m[(i, j)] = <A e'_j, e'_i>`.
    Dense(DMatrix<C64>),
}

impl SymbolCoeff {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        match self {
            SymbolCoeff::Scalar(c) => x.iter().map(|z| z * c).collect(),
            SymbolCoeff::Dense(m) => {
                let v = m * nalgebra::DVector::from_column_slice(x);
                v.as_slice().to_vec()
            }
        }
    }

    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        match self {
            SymbolCoeff::Scalar(c) => x.iter().map(|z| z * c.conj()).collect(),
            SymbolCoeff::Dense(m) => {
                let v = m.adjoint() * nalgebra::DVector::from_column_slice(x);
                v.as_slice().to_vec()
            }
        }
    }

    pub fn to_dense(&self, dim: usize) -> DMatrix<C64> {
        match self {
            SymbolCoeff::Scalar(c) => DMatrix::identity(dim, dim) * *c,
            SymbolCoeff::Dense(m) => m.clone(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        match self {
            SymbolCoeff::Scalar(c) => {
                if i == j {
                    *c
                } else {
                    ZERO
                }
            }
            SymbolCoeff::Dense(m) => m[(i, j)],
        }
    }

    fn mul(&self, other: &Self) -> Self {
        match (self, other) {
            (SymbolCoeff::Scalar(a), SymbolCoeff::Scalar(b)) => SymbolCoeff::Scalar(a * b),
            (SymbolCoeff::Scalar(a), SymbolCoeff::Dense(m))
            | (SymbolCoeff::Dense(m), SymbolCoeff::Scalar(a)) => SymbolCoeff::Dense(m * *a),
            (SymbolCoeff::Dense(a), SymbolCoeff::Dense(b)) => SymbolCoeff::Dense(a * b),
        }
    }

    fn add(&self, other: &Self, dim: usize) -> Self {
        match (self, other) {
            (SymbolCoeff::Scalar(a), SymbolCoeff::Scalar(b)) => SymbolCoeff::Scalar(a + b),
            _ => SymbolCoeff::Dense(self.to_dense(dim) + other.to_dense(dim)),
        }
    }

    fn max_abs_diff(&self, other: &Self, dim: usize) -> f64 {
        match (self, other) {
            (SymbolCoeff::Scalar(a), SymbolCoeff::Scalar(b)) => (a - b).norm(),
            _ => (self.to_dense(dim) - other.to_dense(dim))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max),
        }
    }
}

/// Operator-valued symbol `n -> phi(n)` acting on the kernel space.
#[derive(Clone, Debug, PartialEq)]
pub struct OpSymbol {
    pub dim: usize,
    pub coeffs: Vec<SymbolCoeff>,
}

impl OpSymbol {
    pub fn new(dim: usize, coeffs: Vec<SymbolCoeff>) -> Result<Self> {
        for c in &coeffs {
            if let SymbolCoeff::Dense(m) = c {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: if m.nrows() != dim { m.nrows() } else { m.ncols() },
                    });
                }
            }
        }
        Ok(OpSymbol { dim, coeffs })
    }

    pub fn from_matrices(mats: Vec<DMatrix<C64>>) -> Result<Self> {
        let dim = mats.first().map_or(0, |m| m.nrows());
        Self::new(dim, mats.into_iter().map(SymbolCoeff::Dense).collect())
    }

    /// `chi_0 I` padded to length `len`.
    pub fn unit(dim: usize, len: usize) -> Self {
        ScalarSymbol::unit(len).to_op(dim)
    }

    /// `chi_n A`: the matrix `a` in position `n`, zero elsewhere, padded to `len`.
    pub fn single(a: DMatrix<C64>, n: usize, len: usize) -> Self {
        let dim = a.nrows();
        let mut coeffs = vec![SymbolCoeff::Scalar(ZERO); len.max(n + 1)];
        coeffs[n] = SymbolCoeff::Dense(a);
        OpSymbol { dim, coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient `n`, zero past the end.
    pub fn coeff(&self, n: usize) -> SymbolCoeff {
        self.coeffs
            .get(n)
            .cloned()
            .unwrap_or(SymbolCoeff::Scalar(ZERO))
    }

    /// `Some(a)` when every coefficient is `a_n I`.
    pub fn scalar_coeffs(&self) -> Option<Vec<C64>> {
        self.coeffs
            .iter()
            .map(|c| match c {
                SymbolCoeff::Scalar(a) => Some(*a),
                SymbolCoeff::Dense(m) => {
                    let a = if m.nrows() > 0 { m[(0, 0)] } else { ZERO };
                    let tol = 1e-14 * (1.0 + a.norm());
                    let scalar = m.iter().enumerate().all(|(k, z)| {
                        let (i, j) = (k % m.nrows(), k / m.nrows());
                        let want = if i == j { a } else { ZERO };
                        (z - want).norm() <= tol
                    });
                    scalar.then_some(a)
                }
            })
            .collect()
    }

    /// `n -> <phi(n) e'_j, e'_i>`.
    pub fn entry_sequence(&self, i: usize, j: usize) -> Vec<C64> {
        self.coeffs.iter().map(|c| c.entry(i, j)).collect()
    }

    /// Zero-padded (or cut) to length `len`.
    pub fn resized(&self, len: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(len, SymbolCoeff::Scalar(ZERO));
        OpSymbol {
            dim: self.dim,
            coeffs,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let len = self.len().max(other.len());
        (0..len)
            .map(|n| self.coeff(n).max_abs_diff(&other.coeff(n), self.dim))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let mats = self
            .coeffs
            .iter()
            .map(|c| {
                let m = c.to_dense(self.dim);
                let mut flat = Vec::with_capacity(self.dim * self.dim);
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        flat.push([m[(i, j)].re, m[(i, j)].im]);
                    }
                }
                flat
            })
            .collect();
        Ok(serde_json::to_string(&SymbolJson { dim: self.dim, mats })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SymbolJson = serde_json::from_str(text)?;
        let mut mats = Vec::with_capacity(raw.mats.len());
        for flat in raw.mats {
            if flat.len() != raw.dim * raw.dim {
                return Err(Error::DimensionMismatch {
                    expected: raw.dim * raw.dim,
                    got: flat.len(),
                });
            }
            mats.push(SymbolCoeff::Dense(DMatrix::from_row_iterator(
                raw.dim,
                raw.dim,
                flat.into_iter().map(|[re, im]| C64::new(re, im)),
            )));
        }
        Self::new(raw.dim, mats)
    }
}

#[derive(Serialize, Deserialize)]
struct SymbolJson {
    dim: usize,
    /// Row-major `[re, im]` entries, one list per coefficient.
    mats: Vec<Vec<[f64; 2]>>,
}

mod complex_list {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|z| [z.re, z.im])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let raw: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

/// Cauchy product `(a * b)(k) = sum_{j <= k} a(j) b(k - j)`, truncated to the shorter length.
pub fn convolve(a: &OpSymbol, b: &OpSymbol) -> Result<OpSymbol> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    let len = a.len().min(b.len());
    let coeffs = (0..len)
        .map(|k| {
            (0..=k).fold(SymbolCoeff::Scalar(ZERO), |acc, j| {
                acc.add(&a.coeffs[j].mul(&b.coeffs[k - j]), a.dim)
            })
        })
        .collect();
    Ok(OpSymbol { dim: a.dim, coeffs })
}

/// `(phi * c)(n) = sum_{k <= n} phi(k) c(n - k)`, same length as `c`.
pub fn convolve_with_coeffs(phi: &OpSymbol, c: &CoeffSeq) -> Result<CoeffSeq> {
    if phi.dim != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.dim,
            got: c.dim(),
        });
    }
    let coeffs = (0..c.len())
        .map(|n| {
            let mut out = vec![ZERO; phi.dim];
            for k in 0..=n.min(phi.len().saturating_sub(1)) {
                for (o, x) in out.iter_mut().zip(phi.coeffs[k].apply(&c.coeffs[n - k])) {
                    *o += x;
                }
            }
            out
        })
        .collect();
    Ok(CoeffSeq {
        coeffs,
        exact_to: c.exact_to,
    })
}

/// Adjoint of `c -> phi * c` on sequences of length `d.len()`.
fn convolve_adjoint(phi: &OpSymbol, d: &CoeffSeq) -> CoeffSeq {
    let len = d.len();
    let coeffs = (0..len)
        .map(|m| {
            let mut out = vec![ZERO; phi.dim];
            for n in m..len.min(m + phi.len()) {
                for (o, x) in out.iter_mut().zip(phi.coeffs[n - m].apply_adjoint(&d.coeffs[n])) {
                    *o += x;
                }
            }
            out
        })
        .collect();
    CoeffSeq {
        coeffs,
        exact_to: d.exact_to,
    }
}

/// `(M f)(v) = sum_{k <= |v|} lambda_{par^k(v)|v} phi(k) f(par^k(v))`, exact on the truncation.
pub fn scalar_mult_apply(shift: &ShiftOperator, phi: &ScalarSymbol, f: &L2Vector) -> L2Vector {
    let tree = shift.tree();
    let weights = shift.weights();
    let mut out = shift.zeros();
    for v in 0..tree.len() {
        let mut acc = phi.get(0) * f[v];
        let mut product = 1.0;
        let mut cur = v;
        for k in 1..=tree.generation(v).min(phi.len().saturating_sub(1)) {
            product *= weights.weight(cur);
            cur = tree.parent(cur).unwrap();
            acc += phi.coeffs[k] * f[cur] * product;
        }
        out[v] = acc;
    }
    out
}

/// `(M* g)(t) = sum_{w in Des(t)} lambda_{t|w} conj(phi(|w| - |t|)) g(w)`.
pub fn scalar_mult_adjoint(shift: &ShiftOperator, phi: &ScalarSymbol, g: &L2Vector) -> L2Vector {
    let tree = shift.tree();
    let weights = shift.weights();
    let mut out = shift.zeros();
    for w in 0..tree.len() {
        out[w] += phi.get(0).conj() * g[w];
        let mut product = 1.0;
        let mut cur = w;
        for k in 1..=tree.generation(w).min(phi.len().saturating_sub(1)) {
            product *= weights.weight(cur);
            cur = tree.parent(cur).unwrap();
            out[cur] += phi.coeffs[k].conj() * g[w] * product;
        }
    }
    out
}

/// Symbol of an operator read off the kernel basis, with per-column exactness.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedSymbol {
    pub symbol: OpSymbol,
    /// Column `j` of coefficient `m` is exact when `m <= exact_to[j] = depth - k_j`.
    pub exact_to: Vec<usize>,
}

/// `phi_A(m) = P_E L^m A |_E` for `m = 0..=orders`.
///
/// Coefficients that are multiples of the identity on every exact column come back as
/// [`SymbolCoeff::Scalar`]. Non-scalar symbols over kernels larger than
/// [`MAX_DENSE_SYMBOL_DIM`] are refused.
pub fn extract_symbol(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    a: &dyn LinearMap,
    orders: usize,
) -> Result<ExtractedSymbol> {
    check_dim(shift, a)?;
    let depth = shift.depth();
    let dim = basis.dim();
    let exact_to: Vec<usize> = basis
        .gen_indices()
        .iter()
        .map(|&k| depth.saturating_sub(k))
        .collect();
    let dense = dim <= MAX_DENSE_SYMBOL_DIM;
    let mut mats = if dense {
        vec![DMatrix::<C64>::zeros(dim, dim); orders + 1]
    } else {
        Vec::new()
    };
    let mut scalar: Vec<Option<C64>> = vec![None; orders + 1];
    let mut is_scalar = vec![true; orders + 1];
    for j in 0..dim {
        let mut y = a.apply(&basis.vector(j));
        for m in 0..=orders {
            if !dense && m > exact_to[j] {
                break;
            }
            let col = basis.coords(&y);
            if m <= exact_to[j] && is_scalar[m] {
                let c = *scalar[m].get_or_insert(col[j]);
                let tol = 1e-12 * (1.0 + c.norm());
                let ok = col.iter().enumerate().all(|(i, z)| {
                    let want = if i == j { c } else { ZERO };
                    (z - want).norm() <= tol
                });
                if !ok {
                    if !dense {
                        return Err(Error::SymbolTooLarge { dim });
                    }
                    is_scalar[m] = false;
                }
            }
            if dense {
                for (i, z) in col.into_iter().enumerate() {
                    mats[m][(i, j)] = z;
                }
            }
            if m < orders {
                y = shift.left_inverse(&y);
            }
        }
    }
    let coeffs = (0..=orders)
        .map(|m| {
            if is_scalar[m] {
                SymbolCoeff::Scalar(scalar[m].unwrap_or(ZERO))
            } else {
                SymbolCoeff::Dense(std::mem::replace(&mut mats[m], DMatrix::zeros(0, 0)))
            }
        })
        .collect();
    Ok(ExtractedSymbol {
        symbol: OpSymbol { dim, coeffs },
        exact_to,
    })
}

fn check_dim(shift: &ShiftOperator, a: &dyn LinearMap) -> Result<()> {
    if a.dim() != shift.len() {
        return Err(Error::DimensionMismatch {
            expected: shift.len(),
            got: a.dim(),
        });
    }
    Ok(())
}

/// Outcome of a randomized identity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Largest residual, relative to the magnitude of the model coefficients involved.
    pub max_residual: f64,
    /// Largest generation on which every compared quantity is exact.
    pub exactness_depth: usize,
    pub trials: usize,
}

/// `||A S f - S A f||` over unit probes (all of them on small trees) and random vectors.
pub fn commutator_norm(shift: &ShiftOperator, a: &dyn LinearMap, rng: &mut ChaCha8Rng) -> f64 {
    let tree = shift.tree();
    let mut probes: Vec<L2Vector> = if shift.len() <= 2048 {
        (0..shift.len()).map(|u| shift.unit(u)).collect()
    } else {
        vec![shift.unit(tree.root())]
    };
    for _ in 0..8 {
        probes.push(L2Vector::random(tree, tree.depth(), rng));
    }
    probes
        .iter()
        .map(|f| {
            let asf = a.apply(&shift.apply_shift_truncated(f));
            let saf = shift.apply_shift_truncated(&a.apply(f));
            asf.distance(&saf) / f.norm()
        })
        .fold(0.0, f64::max)
}

/// Checks `P_E L^n (A f) = (phi_A * f^)(n)` for random `f` wherever both sides are exact.
pub fn commutant_check(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    a: &dyn LinearMap,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    check_dim(shift, a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = commutator_norm(shift, a, &mut rng);
    if norm > COMMUTANT_TOL {
        return Err(Error::NotInCommutant { norm });
    }
    let depth = shift.depth();
    let symbol = extract_symbol(shift, basis, a, depth)?.symbol;
    let mut max_residual: f64 = 0.0;
    for _ in 0..trials {
        let f = L2Vector::random(shift.tree(), depth, &mut rng);
        let lhs = analytic_coeffs(shift, basis, &a.apply(&f), depth)?;
        let rhs = convolve_with_coeffs(&symbol, &analytic_coeffs(shift, basis, &f, depth)?)?;
        let scale = lhs.magnitude().max(rhs.magnitude());
        for n in 0..=depth {
            for j in 0..basis.dim() {
                if basis.gen_index(j) + n <= depth {
                    max_residual = max_residual.max((lhs.coeffs[n][j] - rhs.coeffs[n][j]).norm() / scale);
                }
            }
        }
    }
    Ok(VerificationReport {
        max_residual,
        exactness_depth: depth,
        trials,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembershipOptions {
    pub threshold: f64,
    pub min_depth: usize,
    /// Spacing of the depths visited by [`membership_diagnostic`].
    pub stride: usize,
    pub power_iterations: usize,
    pub power_tol: f64,
    pub seed: u64,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        MembershipOptions {
            threshold: DEFAULT_SLOPE_THRESHOLD,
            min_depth: 1,
            stride: 1,
            power_iterations: 500,
            power_tol: 1e-10,
            seed: 0,
        }
    }
}

/// The compression `x -> P_N U*(phi * Ux)` for `x` supported in generations `<= d`.
struct CompressedMultiplier<'a> {
    shift: &'a ShiftOperator,
    basis: &'a SeparatedBasis,
    phi: &'a OpSymbol,
    d: usize,
}

impl CompressedMultiplier<'_> {
    fn apply(&self, x: &L2Vector) -> Result<L2Vector> {
        let c = analytic_coeffs(self.shift, self.basis, x, self.shift.depth())?;
        Ok(synthesize_truncated(
            self.shift,
            self.basis,
            &convolve_with_coeffs(self.phi, &c)?,
        ))
    }

    fn apply_adjoint(&self, y: &L2Vector) -> L2Vector {
        let depth = self.shift.depth();
        let mut coeffs = Vec::with_capacity(depth + 1);
        let mut z = y.clone();
        for n in 0..=depth {
            coeffs.push(self.basis.coords(&z));
            if n < depth {
                z = self.shift.apply_adjoint(&z);
            }
        }
        let e = convolve_adjoint(
            self.phi,
            &CoeffSeq {
                coeffs,
                exact_to: depth,
            },
        );
        let mut x = self.shift.zeros();
        for coeff in e.coeffs.iter().rev() {
            x = self.shift.left_inverse_adjoint(&x);
            self.basis.add_synthesis(&mut x, coeff);
        }
        x.truncate_to(self.shift.tree(), self.d)
    }
}

fn dense_eligible(shift: &ShiftOperator, d: usize) -> bool {
    let domain = shift.tree().count_up_to(d);
    domain * shift.len() <= 2_000_000 && domain <= 1500
}

/// Largest singular value of the dense compression; `columns` caches images of unit vectors.
fn dense_norm(map: &CompressedMultiplier<'_>, columns: &mut Vec<L2Vector>, d: usize) -> Result<f64> {
    let shift = map.shift;
    let domain = shift.tree().count_up_to(d);
    while columns.len() < domain {
        columns.push(map.apply(&shift.unit(columns.len()))?);
    }
    let range = shift.len();
    let m = DMatrix::<C64>::from_fn(range, domain, |v, u| columns[u][v]);
    Ok(largest_singular_value(&m))
}

/// Operator norm of the compressed multiplication map on inputs supported in generations `<= d`.
///
/// Small problems use a dense SVD; larger ones use power iteration with the exact adjoint.
pub fn compressed_multiplier_norm(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    phi: &OpSymbol,
    d: usize,
    opts: &MembershipOptions,
) -> Result<f64> {
    if phi.dim != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: phi.dim,
        });
    }
    let map = CompressedMultiplier {
        shift,
        basis,
        phi,
        d,
    };
    if dense_eligible(shift, d) {
        let mut columns = Vec::new();
        return dense_norm(&map, &mut columns, d);
    }
    let tree = shift.tree();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (d as u64).wrapping_mul(0x9e37_79b9));
    let mut x = L2Vector::random(tree, d, &mut rng);
    let mut estimate = 0.0;
    for _ in 0..opts.power_iterations.max(1) {
        let nx = x.norm();
        if nx == 0.0 {
            return Ok(0.0);
        }
        x = x.scale(C64::new(1.0 / nx, 0.0));
        let y = map.apply(&x)?;
        let next = y.norm();
        x = map.apply_adjoint(&y);
        let converged = (next - estimate).abs() <= opts.power_tol * next;
        estimate = next;
        if converged {
            break;
        }
    }
    Ok(estimate)
}

/// Norms of the compressed multiplier for `d = min_depth, min_depth + stride, ...` up to
/// `max_depth` (always included) and the slope verdict.
pub fn membership_diagnostic(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    phi: &OpSymbol,
    max_depth: usize,
    opts: &MembershipOptions,
) -> Result<MembershipReport> {
    if phi.dim != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: phi.dim,
        });
    }
    let max_depth = max_depth.min(shift.depth());
    let mut depths: Vec<usize> = (opts.min_depth.max(1)..=max_depth)
        .step_by(opts.stride.max(1))
        .collect();
    if depths.last() != Some(&max_depth) && max_depth >= opts.min_depth.max(1) {
        depths.push(max_depth);
    }
    // columns of the dense compression do not depend on the depth, so they are shared
    let map = CompressedMultiplier {
        shift,
        basis,
        phi,
        d: max_depth,
    };
    let mut columns = Vec::new();
    let norms = depths
        .iter()
        .map(|&d| {
            if dense_eligible(shift, d) {
                dense_norm(&map, &mut columns, d)
            } else {
                compressed_multiplier_norm(shift, basis, phi, d, opts)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MembershipReport::from_norms(depths, norms, opts.threshold))
}

/// `phi * (psi * f^)` against `(phi * psi) * f^` for random `f`.
pub fn product_law_check(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    phi: &OpSymbol,
    psi: &OpSymbol,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let depth = shift.depth();
    let len = depth + 1;
    let (phi, psi) = (phi.resized(len), psi.resized(len));
    let product = convolve(&phi, &psi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual: f64 = 0.0;
    for _ in 0..trials {
        let f = L2Vector::random(shift.tree(), depth, &mut rng);
        let c = analytic_coeffs(shift, basis, &f, depth)?;
        let lhs = convolve_with_coeffs(&phi, &convolve_with_coeffs(&psi, &c)?)?;
        let rhs = convolve_with_coeffs(&product, &c)?;
        max_residual = max_residual.max(lhs.max_abs_diff(&rhs) / rhs.magnitude());
    }
    Ok(VerificationReport {
        max_residual,
        exactness_depth: depth,
        trials,
    })
}

/// Tree-side scalar multiplier against the model-side symbol `phi(n) I`.
pub fn scalar_equivalence_check(
    shift: &ShiftOperator,
    basis: &SeparatedBasis,
    phi: &ScalarSymbol,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let depth = shift.depth();
    let op = phi.to_op(basis.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual: f64 = 0.0;
    for _ in 0..trials {
        let f = L2Vector::random(shift.tree(), depth, &mut rng);
        let direct = scalar_mult_apply(shift, phi, &f);
        let c = analytic_coeffs(shift, basis, &f, depth)?;
        let model = synthesize_truncated(shift, basis, &convolve_with_coeffs(&op, &c)?);
        max_residual = max_residual.max(direct.distance(&model) / c.magnitude());
    }
    Ok(VerificationReport {
        max_residual,
        exactness_depth: depth,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::ExampleName;

    #[test]
    fn monomials_multiply() {
        let a = ScalarSymbol::monomial(2, 8).to_op(3);
        let b = ScalarSymbol::monomial(3, 8).to_op(3);
        let c = convolve(&a, &b).unwrap();
        assert_eq!(c.scalar_coeffs().unwrap(), ScalarSymbol::monomial(5, 8).coeffs);
    }

    #[test]
    fn json_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[ONE, C64::new(0.0, 2.0), ZERO, C64::new(-1.0, 0.5)]);
        let phi = OpSymbol::single(m, 1, 3);
        let back = OpSymbol::from_json(&phi.to_json().unwrap()).unwrap();
        assert!(back.max_abs_diff(&phi) == 0.0);
        let s = ScalarSymbol::from_real(&[1.0, 0.5]);
        assert_eq!(s.to_json().unwrap(), "{\"coeffs\":[[1.0,0.0],[0.5,0.0]]}");
        assert_eq!(ScalarSymbol::from_json(&s.to_json().unwrap()).unwrap(), s);
    }

    #[test]
    fn dimension_mismatch() {
        let a = OpSymbol::unit(2, 3);
        let b = OpSymbol::unit(3, 3);
        assert!(matches!(convolve(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn shift_symbol_is_the_shift() {
        let s = ShiftOperator::from_example(ExampleName::T2, 5, &[0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = L2Vector::random(s.tree(), 4, &mut rng);
        let g = scalar_mult_apply(&s, &ScalarSymbol::monomial(1, 3), &f);
        assert!(g.distance(&s.apply_shift(&f).unwrap()) < 1e-15);
    }

    #[test]
    fn dense_and_power_norms_agree() {
        let s = ShiftOperator::from_example(ExampleName::T2, 8, &[0.5]).unwrap();
        let b = SeparatedBasis::new(&s);
        let phi = ScalarSymbol::from_real(&[1.0, -0.5, 0.25]).to_op(b.dim());
        let map = CompressedMultiplier {
            shift: &s,
            basis: &b,
            phi: &phi,
            d: 5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = L2Vector::random(s.tree(), 5, &mut rng);
        let y = L2Vector::random(s.tree(), 8, &mut rng);
        let lhs = map.apply(&x).unwrap().inner(&y);
        let rhs = x.inner(&map.apply_adjoint(&y));
        assert!((lhs - rhs).norm() < 1e-12);
        let dense = compressed_multiplier_norm(&s, &b, &phi, 5, &MembershipOptions::default()).unwrap();
        let opts = MembershipOptions {
            power_iterations: 2000,
            power_tol: 1e-14,
            ..MembershipOptions::default()
        };
        let mut x = L2Vector::random(s.tree(), 5, &mut rng);
        let mut est = 0.0;
        for _ in 0..opts.power_iterations {
            x = x.scale(C64::new(1.0 / x.norm(), 0.0));
            let y = map.apply(&x).unwrap();
            est = y.norm();
            x = map.apply_adjoint(&y);
        }
        assert!((est - dense).abs() < 1e-8 * dense, "{est} vs {dense}");
    }
}
