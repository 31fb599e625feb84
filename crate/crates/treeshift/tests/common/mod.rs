//! Dense reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treeshift::shift::{SeparatedBasis, ShiftOperator};
use treeshift::tree::{random_tree, ExampleName};
use treeshift::vector::{L2Vector, C64};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `S` as a dense matrix, read straight from parents and weights.
pub fn dense_shift(s: &ShiftOperator) -> DMatrix<C64> {
    let tree = s.tree();
    let mut m = DMatrix::zeros(s.len(), s.len());
    for v in 0..s.len() {
        if let Some(p) = tree.parent(v) {
            m[(v, p)] = C64::new(s.weights().weight(v), 0.0);
        }
    }
    m
}

/// `(S*S)^+ S*` with the Gram matrix formed densely and inverted by LU on its nonsingular
/// block (vertices of the last generation have no children and drop out).
pub fn dense_left_inverse(s: &DMatrix<C64>) -> DMatrix<C64> {
    let gram = s.adjoint() * s;
    let n = gram.nrows();
    let idx: Vec<usize> = (0..n).filter(|&i| gram[(i, i)].norm() > 0.0).collect();
    let block = gram.select_rows(&idx).select_columns(&idx);
    let inv = block.lu().try_inverse().expect("Gram block is invertible");
    let mut full = DMatrix::zeros(n, n);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            full[(i, j)] = inv[(a, b)];
        }
    }
    full * s.adjoint()
}

/// Orthonormal basis of `N(S*)` from the singular vectors of `S*` with zero singular value.
pub fn null_space(s: &DMatrix<C64>) -> DMatrix<C64> {
    let adj = s.adjoint();
    let n = adj.ncols();
    let svd = adj.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let scale = svd.singular_values.max().max(1.0);
    let mut cols = Vec::new();
    for i in 0..n {
        if svd.singular_values[i] <= 1e-10 * scale {
            cols.push(v_t.row(i).adjoint());
        }
    }
    // SVD of a square matrix lists all n right singular vectors
    DMatrix::from_columns(&cols)
}

pub fn basis_matrix(b: &SeparatedBasis, len: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(len, b.dim());
    for j in 0..b.dim() {
        for &(v, x) in b.sparse(j) {
            m[(v, j)] = C64::new(x, 0.0);
        }
    }
    m
}

pub fn to_dense(f: &L2Vector) -> DVector<C64> {
    DVector::from_column_slice(f.as_slice())
}

pub fn from_dense(v: &DVector<C64>) -> L2Vector {
    L2Vector::from_vec(v.iter().copied().collect())
}

pub fn unit_random(s: &ShiftOperator, max_gen: usize, r: &mut ChaCha8Rng) -> L2Vector {
    let f = L2Vector::random(s.tree(), max_gen, r);
    let n = f.norm();
    f.scale(C64::new(1.0 / n, 0.0))
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value by full SVD.
pub fn top_singular(m: &DMatrix<C64>) -> f64 {
    m.clone().singular_values().max()
}

/// The trees used throughout: two-ray, fourfold, chains and seeded random trees.
pub fn test_trees(random: usize) -> Vec<(String, ShiftOperator)> {
    let mut out = vec![
        ("T2".to_string(), ShiftOperator::from_example(ExampleName::T2, 10, &[0.5]).unwrap()),
        ("T4".to_string(), ShiftOperator::from_example(ExampleName::T4, 3, &[]).unwrap()),
        ("chain".to_string(), ShiftOperator::from_example(ExampleName::Unilateral, 10, &[]).unwrap()),
        (
            "weighted chain".to_string(),
            ShiftOperator::from_example(
                ExampleName::Unilateral,
                6,
                &[2.0, 0.5, 1.5, 3.0, 0.75, 1.25],
            )
            .unwrap(),
        ),
    ];
    for seed in 0..random as u64 {
        let (tree, weights) = random_tree(&mut rng(1000 + seed), 8, 3, (0.5, 2.0)).unwrap();
        out.push((format!("random #{seed}"), ShiftOperator::new(tree, weights)));
    }
    out
}
