mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use common::{rng, test_trees, unit_random, ONE, ZERO};
use treeshift::growth::Verdict;
use treeshift::multiplier::{
    commutant_check, compressed_multiplier_norm, convolve, extract_symbol, membership_diagnostic,
    scalar_equivalence_check, scalar_mult_adjoint, scalar_mult_apply, MembershipOptions, OpSymbol, ScalarSymbol,
};
use treeshift::operator::{DenseOperator, ShiftPolynomial};
use treeshift::shift::{SeparatedBasis, ShiftOperator};
use treeshift::tree::ExampleName;
use treeshift::vector::C64;
use treeshift::Error;

fn t2() -> ShiftOperator {
    ShiftOperator::from_example(ExampleName::T2, 8, &[0.5]).unwrap()
}

#[test]
fn symbols_round_trip_through_json() {
    let phi = OpSymbol::from_matrices(vec![
        DMatrix::from_fn(2, 2, |i, j| C64::new(i as f64, j as f64 - 0.5)),
        DMatrix::identity(2, 2),
    ])
    .unwrap();
    let back = OpSymbol::from_json(&phi.to_json().unwrap()).unwrap();
    assert_eq!(back.max_abs_diff(&phi), 0.0);
    let a = ScalarSymbol::geometric(0.5, 6);
    assert_eq!(ScalarSymbol::from_json(&a.to_json().unwrap()).unwrap(), a);
}

#[test]
fn convolution_requires_matching_dimensions() {
    let a = OpSymbol::unit(2, 3);
    let b = OpSymbol::unit(3, 3);
    assert!(matches!(convolve(&a, &b), Err(Error::DimensionMismatch { expected: 2, got: 3 })));
}

#[test]
fn scalar_multipliers_are_polynomials_in_the_shift() {
    let mut r = rng(11);
    for (name, s) in test_trees(3) {
        let b = SeparatedBasis::new(&s);
        let coeffs = vec![C64::new(0.5, 0.0), C64::new(-1.0, 0.25), ZERO, C64::new(0.0, 2.0)];
        let phi = ScalarSymbol::new(coeffs.clone());
        let f = unit_random(&s, s.depth(), &mut r);
        let g = unit_random(&s, s.depth(), &mut r);
        let mut direct = s.zeros();
        for (k, x) in coeffs.iter().enumerate() {
            direct.axpy(*x, &s.shift_power(&f, k));
        }
        let mf = scalar_mult_apply(&s, &phi, &f);
        assert!(mf.distance(&direct) < 1e-12, "{name}");
        let pairing = mf.inner(&g) - f.inner(&scalar_mult_adjoint(&s, &phi, &g));
        assert!(pairing.norm() < 1e-12, "{name}");
        let rep = scalar_equivalence_check(&s, &b, &phi, 3, 1).unwrap();
        assert!(rep.max_residual < 1e-10, "{name}: {}", rep.max_residual);
    }
}

#[test]
fn commutant_rejects_a_generic_operator() {
    let s = t2();
    let b = SeparatedBasis::new(&s);
    let mut r = rng(12);
    let m = DMatrix::from_fn(s.len(), s.len(), |_, _| C64::new(rand::Rng::gen_range(&mut r, -1.0..1.0), 0.0));
    let op = DenseOperator::new(m).unwrap();
    match commutant_check(&s, &b, &op, 2, 0) {
        Err(Error::NotInCommutant { norm }) => assert!(norm > 1e-3),
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn identity_symbol_compresses_to_norm_one() {
    let s = t2();
    let b = SeparatedBasis::new(&s);
    let opts = MembershipOptions::default();
    for d in [2, 5, 8] {
        let n = compressed_multiplier_norm(&s, &b, &OpSymbol::unit(2, 9), d, &opts).unwrap();
        assert!((n - 1.0).abs() < 1e-9);
    }
    let rep = membership_diagnostic(&s, &b, &ScalarSymbol::geometric(0.5, 9).to_op(2), 8, &opts).unwrap();
    assert_eq!(rep.depths.len(), rep.norms.len());
    // ||M_phi|| <= sum_k 2^-k ||S||^k
    let bound = 1.0 / (1.0 - 0.5 * s.norm());
    assert!(rep.norms.iter().all(|&n| (1.0 - 1e-9..=bound).contains(&n)));
    assert!(rep.norms.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    let harmonic: Vec<f64> = (0..9).map(|k| 1.0 / (k as f64 + 1.0)).collect();
    let grows = membership_diagnostic(&s, &b, &ScalarSymbol::from_real(&harmonic).to_op(2), 8, &opts).unwrap();
    assert_eq!(grows.verdict, Verdict::DivergenceDetected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn products_of_shift_polynomials_have_convolved_symbols(
        p in prop::collection::vec(-2.0f64..2.0, 1..4),
        q in prop::collection::vec(-2.0f64..2.0, 1..4),
    ) {
        let s = t2();
        let b = SeparatedBasis::new(&s);
        let pc: Vec<C64> = p.iter().map(|&x| C64::new(x, 0.0)).collect();
        let qc: Vec<C64> = q.iter().map(|&x| C64::new(0.0, x)).collect();
        let (pp, qq) = (ShiftPolynomial::new(&s, pc.clone()), ShiftPolynomial::new(&s, qc.clone()));
        let ext = extract_symbol(&s, &b, &pp.product(&qq), 8).unwrap().symbol;
        let want = convolve(&ScalarSymbol::new(pc).to_op(2).resized(9), &ScalarSymbol::new(qc).to_op(2).resized(9)).unwrap();
        prop_assert!(ext.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn scalar_convolution_commutes(
        a in prop::collection::vec(-1.0f64..1.0, 1..6),
        b in prop::collection::vec(-1.0f64..1.0, 1..6),
    ) {
        let (x, y) = (ScalarSymbol::from_real(&a).to_op(1), ScalarSymbol::from_real(&b).to_op(1));
        let xy = convolve(&x, &y).unwrap();
        prop_assert!(xy.max_abs_diff(&convolve(&y, &x).unwrap()) < 1e-14);
        prop_assert_eq!(xy.len(), a.len().min(b.len()));
        let unit = OpSymbol::unit(1, a.len());
        prop_assert_eq!(convolve(&unit, &x).unwrap().max_abs_diff(&x), 0.0);
        let _ = ONE;
    }
}
