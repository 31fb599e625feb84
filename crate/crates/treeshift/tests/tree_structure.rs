use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use treeshift::tree::{
    build_tree, enumerate_paths, generate_example, lambda_product, random_tree, EdgeSpec, ExampleName,
    TreeSpec,
};
use treeshift::Error;

fn edge(from: &str, to: &str, weight: f64) -> EdgeSpec {
    EdgeSpec {
        from: from.into(),
        to: to.into(),
        weight,
    }
}

fn spec(edges: Vec<EdgeSpec>) -> TreeSpec {
    TreeSpec {
        depth: 3,
        root: "r".into(),
        edges,
    }
}

#[test]
fn example_sizes() {
    let (t2, _) = generate_example(ExampleName::T2, 6, &[0.5]).unwrap();
    assert_eq!(t2.len(), 13);
    let (t4, w4) = generate_example(ExampleName::T4, 3, &[]).unwrap();
    assert_eq!(t4.len(), 4165);
    assert_eq!(t4.generation_vertices(3).len(), 4096);
    let v = t4.generation_vertices(2)[17];
    assert_eq!(w4.weight(v), 0.25);
    let (rays, _) = generate_example(ExampleName::Rays, 10, &[3.0]).unwrap();
    assert_eq!(rays.len(), 31);
    let (chain, w) = generate_example(ExampleName::Unilateral, 3, &[2.0, 0.5, 4.0]).unwrap();
    assert_eq!(chain.len(), 4);
    assert_eq!(w.weight(chain.vertex("(3)").unwrap()), 4.0);
}

#[test]
fn example_parameter_errors() {
    assert!(matches!(generate_example(ExampleName::T4, 4, &[]), Err(Error::DepthTooLargeForMemory { .. })));
    assert!(matches!(generate_example(ExampleName::T2, 4, &[1.5]), Err(Error::BadParams(_))));
    assert!(matches!(generate_example(ExampleName::T2, 4, &[]), Err(Error::BadParams(_))));
    assert!(matches!("T9".parse::<ExampleName>(), Err(Error::UnknownExample(_))));
}

#[test]
fn t2_labels_and_weights() {
    let (t, w) = generate_example(ExampleName::T2, 4, &[0.25]).unwrap();
    let root = t.vertex("(0,0)").unwrap();
    assert_eq!(t.root(), root);
    let a = t.vertex("(1,3)").unwrap();
    let b = t.vertex("(2,3)").unwrap();
    assert_eq!(t.generation(b), 3);
    assert_eq!(lambda_product(&t, &w, root, a).unwrap(), 1.0);
    assert!((lambda_product(&t, &w, root, b).unwrap() - 0.25f64.powi(3)).abs() < 1e-15);
    assert!(matches!(lambda_product(&t, &w, a, b), Err(Error::NotDescendant { .. })));
    assert!(t.is_descendant(root, b));
    assert!(!t.is_descendant(a, b));
    assert_eq!(t.ancestor(b, 2), Some(t.vertex("(2,1)").unwrap()));
}

#[test]
fn spec_json_round_trip() {
    let (t, w) = generate_example(ExampleName::Rays, 5, &[3.0, 1.0]).unwrap();
    let json = TreeSpec::from_tree(&t, &w).to_json().unwrap();
    let (t2, w2) = build_tree(&TreeSpec::from_json(&json).unwrap()).unwrap();
    assert_eq!(t2.len(), t.len());
    assert_eq!(w2, w);
    for v in 0..t.len() {
        assert_eq!(t2.label(v), t.label(v));
    }
}

#[test]
fn malformed_specs_are_rejected() {
    let dup = spec(vec![edge("r", "a", 1.0), edge("r", "a", 1.0)]);
    assert!(matches!(build_tree(&dup), Err(Error::MalformedSpec(_))));
    let two_parents = spec(vec![edge("r", "a", 1.0), edge("r", "b", 1.0), edge("b", "a", 1.0)]);
    assert!(matches!(build_tree(&two_parents), Err(Error::MalformedSpec(_))));
    let into_root = spec(vec![edge("a", "r", 1.0)]);
    assert!(matches!(build_tree(&into_root), Err(Error::MalformedSpec(_))));
    let cycle = spec(vec![edge("r", "a", 1.0), edge("b", "c", 1.0), edge("c", "b", 1.0)]);
    assert!(matches!(build_tree(&cycle), Err(Error::MalformedSpec(_))));
    let bad_weight = spec(vec![edge("r", "a", 0.0)]);
    assert!(matches!(build_tree(&bad_weight), Err(Error::NonpositiveWeight { .. })));
    assert!(TreeSpec::from_json("{not json").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_trees_are_consistent(seed in any::<u64>(), depth in 1usize..6, branching in 1usize..4) {
        let (t, w) = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), depth, branching, (0.5, 2.0)).unwrap();
        prop_assert_eq!(t.depth(), depth);
        let mut counted = 0;
        for k in 0..=depth {
            counted += t.generation_vertices(k).len();
            prop_assert_eq!(t.count_up_to(k), counted);
        }
        prop_assert_eq!(counted, t.len());
        for v in 1..t.len() {
            let p = t.parent(v).unwrap();
            prop_assert!(p < v);
            prop_assert!(t.children(p).contains(&v));
            prop_assert_eq!(t.generation(v), t.generation(p) + 1);
            let wv = w.weight(v);
            prop_assert!((0.5..2.0).contains(&wv));
        }
        for v in 0..t.len() {
            prop_assert!(t.children(v).len() <= branching);
            prop_assert_eq!(t.children(v).is_empty(), t.generation(v) == depth);
        }
        let paths = enumerate_paths(&t);
        prop_assert_eq!(paths.len(), t.generation_vertices(depth).len());
        for p in &paths {
            prop_assert_eq!(p.vertices.len(), depth + 1);
            let leaf = *p.vertices.last().unwrap();
            let product: f64 = p.vertices[1..].iter().map(|&v| w.weight(v)).product();
            let lambda = lambda_product(&t, &w, t.root(), leaf).unwrap();
            prop_assert!((lambda - product).abs() <= 1e-14 * product);
        }
    }
}
