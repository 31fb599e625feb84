//! Closed forms for the two-ray tree with weights `1` and `alpha`.
//!
//! Its kernel is spanned by `u0 = e_(0,0)` and `u1 = alpha e_(1,1) - e_(2,1)`. The separated
//! basis uses `u0` and `u1 / s` with `s = sqrt(1 + alpha^2)`, so a matrix written against
//! `(u0, u1)` is converted with `diag(1, s) M diag(1, 1/s)`.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::multiplier::{OpSymbol, SymbolCoeff};
use crate::shift::ShiftOperator;
use crate::vector::{L2Vector, C64};

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Matrix, in separated-basis coordinates, of the map with
/// `A u0 = a u0 + c u1` and `A u1 = b u0 + d u1`.
pub fn kernel_operator(alpha: f64, a: C64, b: C64, c: C64, d: C64) -> DMatrix<C64> {
    let s = (1.0 + alpha * alpha).sqrt();
    DMatrix::from_row_slice(2, 2, &[a, b / s, c * s, d])
}

/// The two-term symbol `(A_0, A_1, 0, ...)` of the bounded family determined by the
/// diagonal entries `a0, d0, a1, d1`:
/// `A_0 u0 = a0 u0 + ((d1 - a1) / alpha) u1`, `A_0 u1 = d0 u1`,
/// `A_1 u0 = a1 u0`, `A_1 u1 = (a0 - d0) alpha u0 + d1 u1`.
pub fn two_term_symbol(alpha: f64, a0: C64, d0: C64, a1: C64, d1: C64, len: usize) -> Result<OpSymbol> {
    let zero = re(0.0);
    let m0 = kernel_operator(alpha, a0, zero, (d1 - a1) / alpha, d0);
    let m1 = kernel_operator(alpha, a1, (a0 - d0) * alpha, zero, d1);
    let mut coeffs = vec![SymbolCoeff::Dense(m0), SymbolCoeff::Dense(m1)];
    coeffs.resize(len.max(2), SymbolCoeff::Scalar(zero));
    OpSymbol::new(2, coeffs)
}

/// `f(2, 3n) = alpha^(3n)`, zero elsewhere, restricted to the truncation.
pub fn divergence_witness(shift: &ShiftOperator, alpha: f64) -> Result<L2Vector> {
    let tree = shift.tree();
    let mut f = shift.zeros();
    for j in (3..=tree.depth()).step_by(3) {
        f[tree.vertex(&format!("(2,{j})"))?] = re(alpha.powi(j as i32));
    }
    Ok(f)
}

/// Coordinates of `P_E L^n f` against `(u0, u1)` for `n >= 1`, from the explicit formula.
/// Needs `f` on generations `n` and `n + 1`.
pub fn projected_power_closed_form(
    shift: &ShiftOperator,
    alpha: f64,
    f: &L2Vector,
    n: usize,
) -> Result<[C64; 2]> {
    let tree = shift.tree();
    let at = |i: usize, j: usize| -> Result<C64> {
        if j == 0 || j > tree.depth() {
            return Ok(re(0.0));
        }
        Ok(f[tree.vertex(&format!("({i},{j})"))?])
    };
    let q = 1.0 / (alpha * alpha + 1.0);
    let ni = n as i32;
    let c0 = (at(1, n)? + at(2, n)? * alpha.powi(2 - ni)) * q;
    let c1 = (at(1, n + 1)? * alpha - at(2, n + 1)? * alpha.powi(-ni)) * q;
    Ok([c0, c1])
}

/// Converts `(u0, u1)` coordinates to separated-basis coordinates.
pub fn to_basis_coords(alpha: f64, c: [C64; 2]) -> [C64; 2] {
    [c[0], c[1] * (1.0 + alpha * alpha).sqrt()]
}

/// `alpha^4 |a - d|^2 / (alpha^2 + 1)^2`, the square of `g(1, 3n)` for the witness.
pub fn witness_term(alpha: f64, a: C64, d: C64) -> f64 {
    alpha.powi(4) * (a - d).norm_sqr() / (alpha * alpha + 1.0).powi(2)
}
