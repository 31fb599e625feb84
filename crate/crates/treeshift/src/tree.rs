//! Rooted directed trees truncated at a fixed generation depth.
//!
//! Vertices are stored generation by generation; within a generation they keep
//! the order in which their parents (and then the parents' child lists) appear.
//! Vertex `0` is always the root.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a vertex in a [`Tree`].
pub type VertexId = usize;

/// Largest T4 depth that is generated (depth 4 already has over a million vertices).
pub const T4_MAX_DEPTH: usize = 3;

#[derive(Clone, Debug)]
pub struct Tree {
    labels: Vec<String>,
    parent: Vec<Option<VertexId>>,
    children: Vec<Vec<VertexId>>,
    generation: Vec<usize>,
    generations: Vec<Vec<VertexId>>,
    depth: usize,
    index: HashMap<String, VertexId>,
}

/// Positive weights on the non-root vertices, indexed by [`VertexId`].
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap {
    weights: Vec<f64>,
}

/// A root-to-leaf chain of the truncated tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSubtree {
    pub vertices: Vec<VertexId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

/// File format for user-supplied trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub depth: usize,
    pub root: String,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExampleName {
    /// Two rays with weights 1 and `alpha`.
    T2,
    /// The rapidly branching isometric tree.
    T4,
    /// A single path.
    Unilateral,
    /// `b` rays hanging from the root with generation-constant norms (balanced).
    Rays,
}

impl FromStr for ExampleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T2" => Ok(ExampleName::T2),
            "T4" => Ok(ExampleName::T4),
            "UNILATERAL" | "CHAIN" => Ok(ExampleName::Unilateral),
            "RAYS" => Ok(ExampleName::Rays),
            _ => Err(Error::UnknownExample(s.to_string())),
        }
    }
}

impl serde::Serialize for ExampleName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for ExampleName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExampleName::T2 => "T2",
            ExampleName::T4 => "T4",
            ExampleName::Unilateral => "UNILATERAL",
            ExampleName::Rays => "RAYS",
        };
        f.write_str(name)
    }
}

impl Tree {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&self) -> VertexId {
        0
    }

    /// Truncation depth `N`: every stored vertex satisfies `|v| <= N`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent[v]
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.children[v]
    }

    /// Generation index `|v|`.
    pub fn generation(&self, v: VertexId) -> usize {
        self.generation[v]
    }

    /// Vertices of generation `k`, in storage order.
    pub fn generation_vertices(&self, k: usize) -> &[VertexId] {
        self.generations.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of vertices with `|v| <= k`.
    pub fn count_up_to(&self, k: usize) -> usize {
        self.generations.iter().take(k + 1).map(Vec::len).sum()
    }

    pub fn label(&self, v: VertexId) -> &str {
        &self.labels[v]
    }

    pub fn vertex(&self, label: &str) -> Result<VertexId> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(label.to_string()))
    }

    /// `par^k(v)`, if it exists.
    pub fn ancestor(&self, v: VertexId, k: usize) -> Option<VertexId> {
        let mut cur = v;
        for _ in 0..k {
            cur = self.parent[cur]?;
        }
        Some(cur)
    }

    /// Whether `v` lies in the subtree rooted at `u` (including `u` itself).
    pub fn is_descendant(&self, u: VertexId, v: VertexId) -> bool {
        let (gu, gv) = (self.generation[u], self.generation[v]);
        gv >= gu && self.ancestor(v, gv - gu) == Some(u)
    }

    /// Builds a tree from per-vertex child lists, re-indexing breadth first from `root`.
    fn from_children(
        root: &str,
        depth: usize,
        child_lists: &HashMap<String, Vec<String>>,
    ) -> Result<(Self, Vec<String>)> {
        let mut labels = vec![root.to_string()];
        let mut parent = vec![None];
        let mut generation = vec![0];
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            if let Some(kids) = child_lists.get(&labels[v]) {
                for kid in kids {
                    let id = labels.len();
                    labels.push(kid.clone());
                    parent.push(Some(v));
                    generation.push(generation[v] + 1);
                    queue.push_back(id);
                }
            }
        }
        let n = labels.len();
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(v);
            }
        }
        let max_gen = generation.iter().copied().max().unwrap_or(0);
        if max_gen > depth {
            return Err(Error::MalformedSpec(format!(
                "vertex at generation {max_gen} exceeds depth {depth}"
            )));
        }
        let mut generations = vec![Vec::new(); depth + 1];
        for v in 0..n {
            generations[generation[v]].push(v);
        }
        for v in 0..n {
            if generation[v] < depth && children[v].is_empty() {
                return Err(Error::MalformedSpec(format!(
                    "vertex `{}` at generation {} has no children above the truncation depth",
                    labels[v], generation[v]
                )));
            }
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        let tree = Tree {
            labels: labels.clone(),
            parent,
            children,
            generation,
            generations,
            depth,
            index,
        };
        Ok((tree, labels))
    }
}

impl WeightMap {
    /// Weight `lambda_v`; `None` at the root.
    pub fn get(&self, v: VertexId) -> Option<f64> {
        if v == 0 {
            None
        } else {
            Some(self.weights[v])
        }
    }

    /// Weight of a non-root vertex. Panics on the root.
    pub fn weight(&self, v: VertexId) -> f64 {
        assert!(v != 0, "the root carries no weight");
        self.weights[v]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl TreeSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Spec describing an already built tree.
    pub fn from_tree(tree: &Tree, weights: &WeightMap) -> Self {
        let edges = (1..tree.len())
            .map(|v| EdgeSpec {
                from: tree.label(tree.parent(v).unwrap()).to_string(),
                to: tree.label(v).to_string(),
                weight: weights.weight(v),
            })
            .collect();
        TreeSpec {
            depth: tree.depth(),
            root: tree.label(0).to_string(),
            edges,
        }
    }
}

/// Validates a spec and builds the tree and its weights.
pub fn build_tree(spec: &TreeSpec) -> Result<(Tree, WeightMap)> {
    let mut child_lists: HashMap<String, Vec<String>> = HashMap::new();
    let mut weight_of: HashMap<String, f64> = HashMap::new();
    let mut seen_edges = HashSet::new();
    for e in &spec.edges {
        if !seen_edges.insert((e.from.as_str(), e.to.as_str())) {
            return Err(Error::MalformedSpec(format!(
                "duplicate edge {} -> {}",
                e.from, e.to
            )));
        }
        if e.to == spec.root {
            return Err(Error::MalformedSpec(format!(
                "root `{}` has an incoming edge",
                spec.root
            )));
        }
        if weight_of.contains_key(&e.to) {
            return Err(Error::MalformedSpec(format!(
                "vertex `{}` has more than one parent",
                e.to
            )));
        }
        if !(e.weight.is_finite() && e.weight > 0.0) {
            return Err(Error::NonpositiveWeight {
                vertex: e.to.clone(),
                weight: e.weight,
            });
        }
        weight_of.insert(e.to.clone(), e.weight);
        child_lists
            .entry(e.from.clone())
            .or_default()
            .push(e.to.clone());
    }
    let (tree, labels) = Tree::from_children(&spec.root, spec.depth, &child_lists)?;
    if tree.len() != spec.edges.len() + 1 {
        // every edge target has one parent, so unreachable vertices sit on a cycle or an orphan chain
        return Err(Error::MalformedSpec(
            "graph is not connected to the root (cycle or orphan vertex)".into(),
        ));
    }
    let mut weights = vec![0.0; tree.len()];
    for (v, label) in labels.iter().enumerate().skip(1) {
        weights[v] = weight_of[label];
    }
    Ok((tree, WeightMap { weights }))
}

/// Generates one of the named example trees.
///
/// * `T2`: `params = [alpha]`, `0 < alpha < 1`; vertices are labelled `(i,j)` with ray `i`
///   and generation `j`, the root is `(0,0)`.
/// * `T4`: no parameters; vertex `(m,n)` is the `n`-th vertex of generation `m`, weights `2^-m`.
/// * `UNILATERAL`: `params` are the weights of generations `1..=depth` (empty means all ones).
/// * `RAYS`: `params = [b]` or `[b, p]`; `b` rays, generation norms `1 + p/(m+1)`
///   (isometric when `p` is absent or zero).
pub fn generate_example(
    name: ExampleName,
    depth: usize,
    params: &[f64],
) -> Result<(Tree, WeightMap)> {
    let spec = match name {
        ExampleName::T2 => t2_spec(depth, params)?,
        ExampleName::T4 => t4_spec(depth, params)?,
        ExampleName::Unilateral => unilateral_spec(depth, params)?,
        ExampleName::Rays => rays_spec(depth, params)?,
    };
    build_tree(&spec)
}

fn t2_spec(depth: usize, params: &[f64]) -> Result<TreeSpec> {
    let alpha = match params {
        [a] if *a > 0.0 && *a < 1.0 => *a,
        _ => {
            return Err(Error::BadParams(format!(
                "T2 expects a single alpha in (0, 1), got {params:?}"
            )))
        }
    };
    let mut edges = Vec::with_capacity(2 * depth);
    for j in 1..=depth {
        for (i, w) in [(1, 1.0), (2, alpha)] {
            let from = if j == 1 {
                "(0,0)".to_string()
            } else {
                format!("({i},{})", j - 1)
            };
            edges.push(EdgeSpec {
                from,
                to: format!("({i},{j})"),
                weight: w,
            });
        }
    }
    Ok(TreeSpec {
        depth,
        root: "(0,0)".into(),
        edges,
    })
}

fn t4_spec(depth: usize, params: &[f64]) -> Result<TreeSpec> {
    if !params.is_empty() {
        return Err(Error::BadParams("T4 takes no parameters".into()));
    }
    if depth > T4_MAX_DEPTH {
        return Err(Error::DepthTooLargeForMemory {
            example: "T4",
            depth,
            cap: T4_MAX_DEPTH,
        });
    }
    let mut edges = Vec::new();
    for m in 0..depth {
        let fan = 1usize << (2 * m + 2);
        let count = 1usize << (m * (m + 1));
        let weight = 0.5f64.powi(m as i32 + 1);
        for n in 0..count {
            for k in n * fan..(n + 1) * fan {
                edges.push(EdgeSpec {
                    from: format!("({m},{n})"),
                    to: format!("({},{k})", m + 1),
                    weight,
                });
            }
        }
    }
    Ok(TreeSpec {
        depth,
        root: "(0,0)".into(),
        edges,
    })
}

fn unilateral_spec(depth: usize, params: &[f64]) -> Result<TreeSpec> {
    let weights: Vec<f64> = if params.is_empty() {
        vec![1.0; depth]
    } else if params.len() == depth {
        params.to_vec()
    } else {
        return Err(Error::BadParams(format!(
            "UNILATERAL expects {depth} weights, got {}",
            params.len()
        )));
    };
    let edges = weights
        .iter()
        .enumerate()
        .map(|(k, &w)| EdgeSpec {
            from: format!("({k})"),
            to: format!("({})", k + 1),
            weight: w,
        })
        .collect();
    Ok(TreeSpec {
        depth,
        root: "(0)".into(),
        edges,
    })
}

fn rays_spec(depth: usize, params: &[f64]) -> Result<TreeSpec> {
    let (rays, p) = match params {
        [b] => (*b, 0.0),
        [b, p] => (*b, *p),
        _ => {
            return Err(Error::BadParams(format!(
                "RAYS expects [rays] or [rays, p], got {params:?}"
            )))
        }
    };
    if rays < 1.0 || rays.fract() != 0.0 || !(p >= 0.0 && p.is_finite()) {
        return Err(Error::BadParams(format!(
            "RAYS needs an integer ray count >= 1 and p >= 0, got {params:?}"
        )));
    }
    let rays = rays as usize;
    let gen_norm = |m: usize| 1.0 + p / (m as f64 + 1.0);
    // root weights proportional to 1..=b, rescaled so that ||S e_root|| = gen_norm(0)
    let scale = gen_norm(0) / ((1..=rays).map(|i| (i * i) as f64).sum::<f64>()).sqrt();
    let mut edges = Vec::new();
    for i in 1..=rays {
        edges.push(EdgeSpec {
            from: "(0,0)".into(),
            to: format!("({i},1)"),
            weight: scale * i as f64,
        });
        for j in 2..=depth {
            edges.push(EdgeSpec {
                from: format!("({i},{})", j - 1),
                to: format!("({i},{j})"),
                weight: gen_norm(j - 1),
            });
        }
    }
    Ok(TreeSpec {
        depth,
        root: "(0,0)".into(),
        edges,
    })
}

/// Random locally finite tree: every vertex above the truncation gets `1..=max_children`
/// children, weights uniform in `weight_range`.
pub fn random_tree<R: Rng + ?Sized>(
    rng: &mut R,
    depth: usize,
    max_children: usize,
    weight_range: (f64, f64),
) -> Result<(Tree, WeightMap)> {
    if max_children == 0 || !(weight_range.0 > 0.0 && weight_range.1 >= weight_range.0) {
        return Err(Error::BadParams(
            "random tree needs max_children >= 1 and a positive weight range".into(),
        ));
    }
    let mut edges = Vec::new();
    let mut frontier = vec!["r".to_string()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for v in &frontier {
            let kids = rng.gen_range(1..=max_children);
            for c in 0..kids {
                let label = format!("{v}.{c}");
                let weight = if weight_range.0 == weight_range.1 {
                    weight_range.0
                } else {
                    rng.gen_range(weight_range.0..weight_range.1)
                };
                edges.push(EdgeSpec {
                    from: v.clone(),
                    to: label.clone(),
                    weight,
                });
                next.push(label);
            }
        }
        frontier = next;
    }
    build_tree(&TreeSpec {
        depth,
        root: "r".into(),
        edges,
    })
}

/// `lambda_{u|v}`: product of the weights on the chain from `v` up to, but excluding, `u`.
pub fn lambda_product(tree: &Tree, weights: &WeightMap, u: VertexId, v: VertexId) -> Result<f64> {
    let mut product = 1.0;
    let mut cur = v;
    while cur != u {
        match tree.parent(cur) {
            Some(p) => {
                product *= weights.weight(cur);
                cur = p;
            }
            None => {
                return Err(Error::NotDescendant {
                    ancestor: tree.label(u).to_string(),
                    descendant: tree.label(v).to_string(),
                })
            }
        }
    }
    Ok(product)
}

/// All maximal root-to-leaf chains of the truncation, in depth-first child order.
pub fn enumerate_paths(tree: &Tree) -> Vec<PathSubtree> {
    let mut paths = Vec::new();
    let mut stack = vec![vec![tree.root()]];
    while let Some(path) = stack.pop() {
        let last = *path.last().unwrap();
        let kids = tree.children(last);
        if kids.is_empty() {
            paths.push(PathSubtree { vertices: path });
            continue;
        }
        for &c in kids.iter().rev() {
            let mut next = path.clone();
            next.push(c);
            stack.push(next);
        }
    }
    paths
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(depth: usize) -> TreeSpec {
        TreeSpec {
            depth,
            root: "a0".into(),
            edges: (0..depth)
                .map(|k| EdgeSpec {
                    from: format!("a{k}"),
                    to: format!("a{}", k + 1),
                    weight: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn unilateral_path_of_depth_four() {
        let (tree, _) = build_tree(&chain(4)).unwrap();
        assert_eq!(tree.len(), 5);
        assert_eq!(enumerate_paths(&tree).len(), 1);
    }

    #[test]
    fn t2_has_two_rays() {
        let (tree, _) = generate_example(ExampleName::T2, 6, &[0.5]).unwrap();
        assert_eq!(tree.len(), 13);
        assert_eq!(enumerate_paths(&tree).len(), 2);
        let (tree, w3) = generate_example(ExampleName::T2, 3, &[0.5]).unwrap();
        for j in 1..=3 {
            assert_eq!(w3.weight(tree.vertex(&format!("(1,{j})")).unwrap()), 1.0);
            assert_eq!(w3.weight(tree.vertex(&format!("(2,{j})")).unwrap()), 0.5);
        }
        assert_eq!(tree.len(), 7);
    }

    #[test]
    fn zero_weight_is_rejected() {
        let mut spec = chain(3);
        spec.edges[1].weight = 0.0;
        assert!(matches!(
            build_tree(&spec),
            Err(Error::NonpositiveWeight { .. })
        ));
    }

    #[test]
    fn malformed_specs_are_rejected() {
        let mut dup = chain(2);
        dup.edges.push(dup.edges[0].clone());
        assert!(matches!(build_tree(&dup), Err(Error::MalformedSpec(_))));

        let mut cycle = chain(2);
        cycle.edges.push(EdgeSpec { from: "x".into(), to: "y".into(), weight: 1.0 });
        cycle.edges.push(EdgeSpec { from: "y".into(), to: "x".into(), weight: 1.0 });
        assert!(matches!(build_tree(&cycle), Err(Error::MalformedSpec(_))));

        let mut two_parents = chain(2);
        two_parents.edges.push(EdgeSpec { from: "a0".into(), to: "a2".into(), weight: 1.0 });
        assert!(matches!(build_tree(&two_parents), Err(Error::MalformedSpec(_))));

        let mut leaf = chain(3);
        leaf.edges.pop();
        assert!(matches!(build_tree(&leaf), Err(Error::MalformedSpec(_))));
    }

    #[test]
    fn t4_generation_sizes() {
        let (tree, w) = generate_example(ExampleName::T4, 2, &[]).unwrap();
        assert_eq!(tree.generation_vertices(1).len(), 4);
        assert_eq!(tree.generation_vertices(2).len(), 64);
        for &v in tree.generation_vertices(1) {
            assert_eq!(w.weight(v), 0.5);
        }
        assert_eq!(enumerate_paths(&tree).len(), 64);
        let (tree3, _) = generate_example(ExampleName::T4, 3, &[]).unwrap();
        for m in 0..=3 {
            assert_eq!(tree3.generation_vertices(m).len(), 1 << (m * (m + 1)));
        }
        assert!(matches!(
            generate_example(ExampleName::T4, 4, &[]),
            Err(Error::DepthTooLargeForMemory { .. })
        ));
    }

    #[test]
    fn unilateral_and_bad_params() {
        let (tree, w) = generate_example(ExampleName::Unilateral, 2, &[1.0, 1.0]).unwrap();
        assert_eq!(tree.len(), 3);
        assert_eq!(w.weight(2), 1.0);
        assert!(matches!(
            generate_example(ExampleName::T2, 3, &[1.5]),
            Err(Error::BadParams(_))
        ));
        assert!(matches!("T7".parse::<ExampleName>(), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn lambda_products() {
        let (tree, w) = generate_example(ExampleName::T2, 3, &[0.5]).unwrap();
        let root = tree.root();
        let v = tree.vertex("(2,3)").unwrap();
        assert_eq!(lambda_product(&tree, &w, v, v).unwrap(), 1.0);
        assert_eq!(lambda_product(&tree, &w, root, v).unwrap(), 0.125);
        let other = tree.vertex("(1,1)").unwrap();
        assert!(matches!(
            lambda_product(&tree, &w, other, v),
            Err(Error::NotDescendant { .. })
        ));
    }

    #[test]
    fn telescoping_and_generation_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (tree, w) = random_tree(&mut rng, 6, 3, (0.3, 2.0)).unwrap();
        for v in 1..tree.len() {
            let p = tree.parent(v).unwrap();
            assert_eq!(tree.generation(p) + 1, tree.generation(v));
            for k in 1..=tree.generation(v) {
                let a = tree.ancestor(v, k).unwrap();
                let prev = tree.ancestor(v, k - 1).unwrap();
                let lhs = lambda_product(&tree, &w, a, v).unwrap();
                let rhs = lambda_product(&tree, &w, prev, v).unwrap() * w.weight(prev);
                assert!((lhs - rhs).abs() <= 1e-14 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn spec_json_roundtrip() {
        let (tree, w) = generate_example(ExampleName::T2, 4, &[0.5]).unwrap();
        let spec = TreeSpec::from_tree(&tree, &w);
        let back = TreeSpec::from_json(&spec.to_json().unwrap()).unwrap();
        let (tree2, w2) = build_tree(&back).unwrap();
        assert_eq!(tree2.len(), tree.len());
        assert_eq!(w2, w);
    }
}
