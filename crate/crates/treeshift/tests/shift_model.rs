mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{rng, unit_random, ONE};
use treeshift::model::{
    analytic_coeffs, kernel_matrix, kernel_vector, model_inner, reconstruct, spectral_radius_estimate, CoeffSeq,
};
use treeshift::shift::{SeparatedBasis, ShiftOperator};
use treeshift::tree::{random_tree, ExampleName};
use treeshift::vector::C64;
use treeshift::Error;

fn random_shift(seed: u64, depth: usize, branching: usize) -> ShiftOperator {
    let (t, w) = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), depth, branching, (0.5, 2.0)).unwrap();
    ShiftOperator::new(t, w)
}

#[test]
fn shift_refuses_to_leave_the_truncation() {
    let s = ShiftOperator::from_example(ExampleName::T2, 4, &[0.5]).unwrap();
    let f = s.unit(s.tree().vertex("(2,4)").unwrap());
    assert!(matches!(s.apply_shift(&f), Err(Error::SupportOverflow { .. })));
    assert_eq!(s.apply_shift_truncated(&f).norm(), 0.0);
}

#[test]
fn reconstruct_rejects_foreign_sequences() {
    let s = ShiftOperator::from_example(ExampleName::T2, 6, &[0.5]).unwrap();
    let b = SeparatedBasis::new(&s);
    // c(6) = e'_1 needs S^6 e'_1, which lives in generation 7
    let mut c = CoeffSeq::zeros(b.dim(), 7);
    c.coeffs[3][1] = ONE;
    assert!(reconstruct(&s, &b, &c, 6).is_ok());
    c.coeffs[6][1] = ONE;
    assert!(matches!(reconstruct(&s, &b, &c, 6), Err(Error::Inconsistent { .. })));
}

#[test]
fn kernel_is_hermitian_and_reproduces_the_origin() {
    let s = ShiftOperator::from_example(ExampleName::T2, 12, &[0.5]).unwrap();
    let b = SeparatedBasis::new(&s);
    let radius = spectral_radius_estimate(&s, 200).unwrap();
    let (z, lam) = (C64::new(0.2, 0.1), C64::new(-0.1, 0.25));
    let k1 = kernel_matrix(&s, &b, &radius, z, lam, 12).unwrap();
    let k2 = kernel_matrix(&s, &b, &radius, lam, z, 12).unwrap();
    assert!((k1.matrix.clone() - k2.matrix.adjoint()).camax() < 1e-12);
    let origin = kernel_matrix(&s, &b, &radius, C64::new(0.0, 0.0), C64::new(0.0, 0.0), 12).unwrap();
    let eye = nalgebra::DMatrix::<C64>::identity(b.dim(), b.dim());
    assert!((origin.matrix - eye).camax() < 1e-14);
    let far = C64::new(10.0 * radius.rho.max(1.0), 0.0);
    assert!(matches!(kernel_matrix(&s, &b, &radius, far, lam, 12), Err(Error::OutsideDisc { .. })));
}

#[test]
fn kernel_vectors_are_adjoint_eigenvectors() {
    let s = ShiftOperator::from_example(ExampleName::Rays, 60, &[3.0]).unwrap();
    let b = SeparatedBasis::new(&s);
    let lam = C64::new(0.3, -0.2);
    let e = [ONE, C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let g = kernel_vector(&s, &b, &e, lam.conj(), 59);
    // S* g = lam g up to the truncated tail lam^60 L*^59 e, far below rounding here
    let diff = s.apply_adjoint(&g).sub(&g.scale(lam));
    assert!(diff.norm() <= 1e-14 * g.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shift_identities(seed in any::<u64>(), depth in 2usize..6, branching in 1usize..4) {
        let s = random_shift(seed, depth, branching);
        let b = SeparatedBasis::new(&s);
        let mut r = rng(seed);
        let f = unit_random(&s, depth - 1, &mut r);
        let g = unit_random(&s, depth, &mut r);
        let sf = s.apply_shift(&f).unwrap();
        // S*S is diagonal with entries ||S e_u||^2
        let expected: f64 = (0..s.len()).map(|u| f[u].norm_sqr() * s.norm_square(u)).sum();
        prop_assert!((sf.norm_sqr() - expected).abs() <= 1e-12 * expected.max(1.0));
        prop_assert!(s.apply_left_inverse(&sf).unwrap().distance(&f) <= 1e-12);
        let pg = b.project(&g);
        prop_assert!(b.project(&pg).distance(&pg) <= 1e-12);
        prop_assert!((pg.inner(&g) - pg.inner(&pg)).norm() <= 1e-12);
        prop_assert!(s.apply_adjoint(&pg).norm() <= 1e-12);
        prop_assert!(b.orthonormality_defect(s.tree()) <= 1e-12);
        let t = s.tree();
        let expected_dim = 1 + (0..t.len())
            .filter(|&u| t.generation(u) < depth)
            .map(|u| t.children(u).len() - 1)
            .sum::<usize>();
        prop_assert_eq!(b.dim(), expected_dim);
        for j in 0..b.dim() {
            let v = b.vector(j);
            prop_assert_eq!(v.support_depth(t), Some(b.gen_index(j)));
        }
    }

    #[test]
    fn model_is_linear_and_isometric(seed in any::<u64>(), depth in 2usize..6, branching in 1usize..4) {
        let s = random_shift(seed, depth, branching);
        let b = SeparatedBasis::new(&s);
        let mut r = rng(seed ^ 0x55);
        let f = unit_random(&s, depth, &mut r);
        let g = unit_random(&s, depth, &mut r);
        let w = C64::new(0.3, -1.1);
        let cf = analytic_coeffs(&s, &b, &f, depth).unwrap();
        let cg = analytic_coeffs(&s, &b, &g, depth).unwrap();
        let combo = analytic_coeffs(&s, &b, &f.add(&g.scale(w)), depth).unwrap();
        for n in 0..=depth {
            for j in 0..b.dim() {
                let want = cf.coeffs[n][j] + w * cg.coeffs[n][j];
                prop_assert!((combo.coeffs[n][j] - want).norm() <= 1e-10);
            }
        }
        prop_assert!(reconstruct(&s, &b, &cf, depth).unwrap().distance(&f) <= 1e-10);
        let inner = model_inner(&s, &b, &cf, &cg).unwrap();
        prop_assert!((inner - f.inner(&g)).norm() <= 1e-10);
        // the value at the origin is the kernel component
        let at0 = cf.evaluate(C64::new(0.0, 0.0));
        let direct = b.coords(&f);
        for j in 0..b.dim() {
            prop_assert!((at0[j] - direct[j]).norm() <= 1e-12);
        }
    }
}
