//! Explicit linear maps on the truncated `l^2` space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::shift::ShiftOperator;
use crate::tree::VertexId;
use crate::vector::{L2Vector, C64};

/// A linear map on `l^2` of the truncated vertex set.
pub trait LinearMap {
    /// Number of vertices of the space acted on.
    fn dim(&self) -> usize;

    fn apply(&self, f: &L2Vector) -> L2Vector;
}

/// Matrix in the vertex basis: `matrix[(v, u)] = <A e_u, e_v>`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub matrix: DMatrix<C64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        Ok(DenseOperator { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        DenseOperator {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// Materializes any linear map column by column.
    pub fn from_map<M: LinearMap + ?Sized>(map: &M) -> Self {
        let n = map.dim();
        let mut matrix = DMatrix::zeros(n, n);
        for u in 0..n {
            let col = map.apply(&L2Vector::unit(n, u));
            for (v, z) in col.as_slice().iter().enumerate() {
                matrix[(v, u)] = *z;
            }
        }
        DenseOperator { matrix }
    }

    /// Orthogonal projection onto `span{e_v}`.
    pub fn coordinate_projection(dim: usize, v: VertexId) -> Self {
        let mut matrix = DMatrix::zeros(dim, dim);
        matrix[(v, v)] = C64::new(1.0, 0.0);
        DenseOperator { matrix }
    }

    pub fn compose(&self, other: &Self) -> Self {
        DenseOperator {
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Self {
        DenseOperator {
            matrix: self.matrix.map(|z| z * a) + other.matrix.map(|z| z * b),
        }
    }
}

impl LinearMap for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, f: &L2Vector) -> L2Vector {
        let x = nalgebra::DVector::from_column_slice(f.as_slice());
        L2Vector::from_vec((&self.matrix * x).as_slice().to_vec())
    }
}

/// Triplet-list operator: `(row, col, value)` means `<A e_col, e_row> += value`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    pub dim: usize,
    pub entries: Vec<(VertexId, VertexId, C64)>,
}

impl LinearMap for SparseOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, f: &L2Vector) -> L2Vector {
        let mut out = L2Vector::zeros(self.dim);
        for &(r, c, z) in &self.entries {
            out[r] += z * f[c];
        }
        out
    }
}

/// `p(S) = sum_k coeffs[k] S^k`, truncated.
#[derive(Clone, Debug)]
pub struct ShiftPolynomial<'a> {
    pub shift: &'a ShiftOperator,
    pub coeffs: Vec<C64>,
}

impl<'a> ShiftPolynomial<'a> {
    pub fn new(shift: &'a ShiftOperator, coeffs: Vec<C64>) -> Self {
        ShiftPolynomial { shift, coeffs }
    }

    /// `S^n`.
    pub fn monomial(shift: &'a ShiftOperator, n: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
        coeffs[n] = C64::new(1.0, 0.0);
        ShiftPolynomial { shift, coeffs }
    }

    /// Product of two polynomials in `S`.
    pub fn product(&self, other: &Self) -> Self {
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![C64::new(0.0, 0.0); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        ShiftPolynomial {
            shift: self.shift,
            coeffs,
        }
    }
}

impl LinearMap for ShiftPolynomial<'_> {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn apply(&self, f: &L2Vector) -> L2Vector {
        let mut out = self.shift.zeros();
        for c in self.coeffs.iter().rev() {
            out = self.shift.apply_shift_truncated(&out);
            out.axpy(*c, f);
        }
        out
    }
}

/// The truncated shift itself as a linear map.
impl LinearMap for ShiftOperator {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, f: &L2Vector) -> L2Vector {
        self.apply_shift_truncated(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::ExampleName;

    #[test]
    fn polynomial_matches_dense_powers() {
        let s = ShiftOperator::from_example(ExampleName::T2, 5, &[0.5]).unwrap();
        let dense_s = DenseOperator::from_map(&s);
        let p = ShiftPolynomial::new(&s, vec![C64::new(2.0, 0.0), C64::new(0.0, 0.0), C64::new(3.0, 0.0)]);
        let expected = DenseOperator::identity(s.len())
            .combine(C64::new(2.0, 0.0), &dense_s.compose(&dense_s), C64::new(3.0, 0.0));
        let got = DenseOperator::from_map(&p);
        assert!((got.matrix - expected.matrix).norm() < 1e-14);
    }
}
