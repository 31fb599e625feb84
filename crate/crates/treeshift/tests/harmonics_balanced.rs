mod common;

use common::{rng, unit_random, ONE};
use treeshift::balanced::{
    balanced_inner_product_check, doubling_truncations, hinf_membership, ratio_bounds_check,
    weighted_toeplitz_norm, wold_decompose, BetaWeights,
};
use treeshift::growth::Verdict;
use treeshift::harmonics::{circle_integral_check, fejer_symbol, model_multiply, rotate_symbol, rotate_vector};
use treeshift::multiplier::{scalar_mult_apply, OpSymbol, ScalarSymbol};
use treeshift::shift::{SeparatedBasis, ShiftOperator};
use treeshift::tree::{random_tree, ExampleName};
use treeshift::vector::C64;
use treeshift::Error;

#[test]
fn rotation_requires_a_unimodular_parameter() {
    let s = ShiftOperator::from_example(ExampleName::T2, 4, &[0.5]).unwrap();
    let f = s.unit(0);
    assert!(matches!(rotate_vector(s.tree(), &f, C64::new(1.1, 0.0)), Err(Error::NotUnimodular { .. })));
}

#[test]
fn rotation_by_one_is_the_identity() {
    let s = ShiftOperator::from_example(ExampleName::T2, 6, &[0.5]).unwrap();
    let b = SeparatedBasis::new(&s);
    let phi = ScalarSymbol::geometric(0.3, 7).to_op(2);
    assert_eq!(rotate_symbol(&phi, &b, ONE).unwrap().max_abs_diff(&phi), 0.0);
    let f = unit_random(&s, 6, &mut rng(1));
    assert_eq!(rotate_vector(s.tree(), &f, ONE).unwrap().distance(&f), 0.0);
}

#[test]
fn scalar_model_multiplication_matches_the_tree_side() {
    let s = ShiftOperator::from_example(ExampleName::Rays, 12, &[3.0, 1.0]).unwrap();
    let b = SeparatedBasis::new(&s);
    let phi = ScalarSymbol::new(vec![ONE, C64::new(0.5, -0.5), C64::new(0.0, 0.25)]);
    let f = unit_random(&s, 12, &mut rng(2));
    let via_model = model_multiply(&s, &b, &phi.to_op(b.dim()).resized(13), &f).unwrap();
    assert!(via_model.distance(&scalar_mult_apply(&s, &phi, &f)) < 1e-12);
}

#[test]
fn quadrature_must_resolve_the_degree() {
    let s = ShiftOperator::from_example(ExampleName::T2, 6, &[0.5]).unwrap();
    let b = SeparatedBasis::new(&s);
    let phi = ScalarSymbol::geometric(0.5, 7).to_op(2);
    let f = unit_random(&s, 6, &mut rng(3));
    let res = circle_integral_check(&s, &b, &phi, 2, Some(4), &[f]);
    assert!(matches!(res, Err(Error::QuadratureTooCoarse { points: 4, degree: 8 })));
}

#[test]
fn fejer_weights() {
    assert_eq!(fejer_symbol(3).coeffs, vec![1.0, 0.75, 0.5, 0.25]);
}

#[test]
fn balanced_routines_reject_unbalanced_input() {
    let (t, w) = random_tree(&mut rng(4), 4, 3, (0.5, 2.0)).unwrap();
    let s = ShiftOperator::new(t, w);
    assert!(!s.is_balanced().balanced);
    let b = SeparatedBasis::new(&s);
    let f = unit_random(&s, 4, &mut rng(5));
    assert!(matches!(wold_decompose(&s, &b, &f), Err(Error::NotBalanced { .. })));
    assert!(matches!(ratio_bounds_check(&s, &b), Err(Error::NotBalanced { .. })));
}

#[test]
fn inner_product_check_needs_a_single_generation() {
    let s = ShiftOperator::from_example(ExampleName::Rays, 6, &[3.0]).unwrap();
    let f = unit_random(&s, 3, &mut rng(6));
    let u = s.tree().generation_vertices(5)[0];
    assert!(matches!(
        balanced_inner_product_check(&s, &f, &f, 2, u),
        Err(Error::WrongGeneration { .. })
    ));
}

#[test]
fn toeplitz_norms() {
    assert_eq!(doubling_truncations(64), vec![4, 8, 16, 32, 64]);
    assert_eq!(doubling_truncations(100), vec![4, 8, 16, 32, 64, 100]);
    let beta = BetaWeights::constant(64);
    let unit = ScalarSymbol::unit(64);
    assert!((weighted_toeplitz_norm(&unit, &beta, &beta, 64).unwrap() - 1.0).abs() < 1e-12);
    // a_n = 1 on two terms: the norm of I + S on length t is 2 cos(pi / (2t + 1))
    let two = ScalarSymbol::from_real(&[1.0, 1.0]);
    let want = 2.0 * (std::f64::consts::PI / 17.0).cos();
    assert!((weighted_toeplitz_norm(&two, &beta, &beta, 8).unwrap() - want).abs() < 1e-12);
    assert!(BetaWeights::new(vec![1.0, 0.0]).is_err());
    let geo = ScalarSymbol::geometric(0.5, 64);
    let rep = hinf_membership(&geo, &beta, &beta, &doubling_truncations(64), 0.02).unwrap();
    assert_eq!(rep.verdict, Verdict::BoundedSoFar);
    let _ = OpSymbol::unit(1, 1);
}
