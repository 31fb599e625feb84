//! Dense complex vectors indexed by tree vertices, plus compensated summation.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::Rng;

use crate::tree::{Tree, VertexId};

pub type C64 = Complex64;

/// Neumaier-compensated running sum of `f64` terms.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated sum of complex terms (real and imaginary parts tracked separately).
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl CompensatedComplexSum {
    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

pub fn compensated_complex_sum<I: IntoIterator<Item = C64>>(terms: I) -> C64 {
    let mut acc = CompensatedComplexSum::default();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// Element of `l^2` of the truncated vertex set, stored densely by [`VertexId`].
#[derive(Clone, Debug, PartialEq)]
pub struct L2Vector {
    entries: Vec<C64>,
}

impl L2Vector {
    pub fn zeros(len: usize) -> Self {
        L2Vector {
            entries: vec![C64::new(0.0, 0.0); len],
        }
    }

    /// Indicator `e_v`.
    pub fn unit(len: usize, v: VertexId) -> Self {
        let mut out = Self::zeros(len);
        out.entries[v] = C64::new(1.0, 0.0);
        out
    }

    pub fn from_vec(entries: Vec<C64>) -> Self {
        L2Vector { entries }
    }

    pub fn from_real(entries: &[f64]) -> Self {
        L2Vector {
            entries: entries.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    /// Random vector with independent standard-uniform real and imaginary parts in `[-1, 1)`,
    /// restricted to generations `<= max_generation`.
    pub fn random<R: Rng + ?Sized>(tree: &Tree, max_generation: usize, rng: &mut R) -> Self {
        let mut out = Self::zeros(tree.len());
        let end = tree.count_up_to(max_generation);
        for z in &mut out.entries[..end] {
            *z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.entries
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.entries
    }

    pub fn norm_sqr(&self) -> f64 {
        compensated_sum(self.entries.iter().map(|z| z.norm_sqr()))
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self, other> = sum self(v) conj(other(v))`.
    pub fn inner(&self, other: &Self) -> C64 {
        debug_assert_eq!(self.len(), other.len());
        compensated_complex_sum(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a * b.conj()),
        )
    }

    pub fn scale(&self, c: C64) -> Self {
        L2Vector {
            entries: self.entries.iter().map(|z| z * c).collect(),
        }
    }

    /// `self += c * x`.
    pub fn axpy(&mut self, c: C64, x: &Self) {
        for (a, b) in self.entries.iter_mut().zip(&x.entries) {
            *a += c * b;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other);
        out
    }

    /// `||self - other||`.
    pub fn distance(&self, other: &Self) -> f64 {
        compensated_sum(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| (a - b).norm_sqr()),
        )
        .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest generation carrying a nonzero entry, `None` for the zero vector.
    pub fn support_depth(&self, tree: &Tree) -> Option<usize> {
        self.entries
            .iter()
            .enumerate()
            .rev()
            .find(|(_, z)| **z != C64::new(0.0, 0.0))
            .map(|(v, _)| tree.generation(v))
    }

    /// Keeps only the generations `<= k`.
    pub fn truncate_to(&self, tree: &Tree, k: usize) -> Self {
        let mut out = self.clone();
        let end = tree.count_up_to(k);
        for z in &mut out.entries[end..] {
            *z = C64::new(0.0, 0.0);
        }
        out
    }
}

impl Index<VertexId> for L2Vector {
    type Output = C64;

    fn index(&self, v: VertexId) -> &C64 {
        &self.entries[v]
    }
}

impl IndexMut<VertexId> for L2Vector {
    fn index_mut(&mut self, v: VertexId) -> &mut C64 {
        &mut self.entries[v]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let terms = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(terms), 2.0);
    }

    #[test]
    fn inner_product_is_conjugate_linear_in_second_slot() {
        let f = L2Vector::from_vec(vec![C64::new(1.0, 2.0), C64::new(0.0, -1.0)]);
        let g = L2Vector::from_vec(vec![C64::new(0.5, 0.0), C64::new(3.0, 1.0)]);
        let i = C64::new(0.0, 1.0);
        let lhs = f.inner(&g.scale(i));
        assert!((lhs - i.conj() * f.inner(&g)).norm() < 1e-15);
        assert!((f.inner(&f).re - f.norm_sqr()).abs() < 1e-15);
    }
}
