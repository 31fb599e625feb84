//! The weighted shift on a truncated tree, its adjoint, the canonical left inverse
//! `L = (S*S)^-1 S*`, and a kernel basis of `S*` whose vectors each live in one generation.

use crate::error::{Error, Result};
use crate::tree::{build_tree, generate_example, ExampleName, Tree, TreeSpec, VertexId, WeightMap};
use crate::vector::{compensated_complex_sum, L2Vector, C64};

/// Absolute tolerance used when comparing generation norms.
pub const BALANCE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ShiftOperator {
    tree: Tree,
    weights: WeightMap,
    norm_squares: Vec<f64>,
    lower_bound: f64,
}

/// Outcome of [`ShiftOperator::is_balanced`].
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceCheck {
    pub balanced: bool,
    /// Two vertices of one generation with different `||S e_u||`.
    pub witness: Option<(VertexId, VertexId)>,
}

impl ShiftOperator {
    pub fn new(tree: Tree, weights: WeightMap) -> Self {
        let norm_squares: Vec<f64> = (0..tree.len())
            .map(|u| {
                tree.children(u)
                    .iter()
                    .map(|&v| weights.weight(v).powi(2))
                    .sum()
            })
            .collect();
        let lower_bound = (0..tree.len())
            .filter(|&u| tree.generation(u) < tree.depth())
            .map(|u| norm_squares[u])
            .fold(f64::INFINITY, f64::min);
        let lower_bound = if lower_bound.is_finite() {
            lower_bound.sqrt()
        } else {
            0.0
        };
        ShiftOperator {
            tree,
            weights,
            norm_squares,
            lower_bound,
        }
    }

    pub fn from_spec(spec: &TreeSpec) -> Result<Self> {
        let (tree, weights) = build_tree(spec)?;
        Ok(Self::new(tree, weights))
    }

    pub fn from_example(name: ExampleName, depth: usize, params: &[f64]) -> Result<Self> {
        let (tree, weights) = generate_example(name, depth, params)?;
        Ok(Self::new(tree, weights))
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn weights(&self) -> &WeightMap {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    /// `||S e_u||^2`; zero on the last generation because its children are cut off.
    pub fn norm_square(&self, u: VertexId) -> f64 {
        self.norm_squares[u]
    }

    /// Largest `c` with `S*S >= c^2` on the truncation.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// `||S||` on the truncation.
    pub fn norm(&self) -> f64 {
        self.norm_squares.iter().copied().fold(0.0, f64::max).sqrt()
    }

    pub fn zeros(&self) -> L2Vector {
        L2Vector::zeros(self.len())
    }

    pub fn unit(&self, v: VertexId) -> L2Vector {
        L2Vector::unit(self.len(), v)
    }

    /// `(Sf)(v) = lambda_v f(par v)`; fails if `f` touches the last generation.
    pub fn apply_shift(&self, f: &L2Vector) -> Result<L2Vector> {
        let depth = self.depth();
        if self
            .tree
            .generation_vertices(depth)
            .iter()
            .any(|&v| f[v] != C64::new(0.0, 0.0))
        {
            return Err(Error::SupportOverflow {
                generation: depth,
                depth,
            });
        }
        Ok(self.apply_shift_truncated(f))
    }

    /// `S` followed by restriction to the truncation (mass pushed past the last generation is dropped).
    pub fn apply_shift_truncated(&self, f: &L2Vector) -> L2Vector {
        let mut out = self.zeros();
        for v in 1..self.len() {
            let p = self.tree.parent(v).unwrap();
            out[v] = f[p] * self.weights.weight(v);
        }
        out
    }

    /// `(S*f)(u) = sum_{v in Chi(u)} lambda_v f(v)`.
    pub fn apply_adjoint(&self, f: &L2Vector) -> L2Vector {
        let mut out = self.zeros();
        for u in 0..self.len() {
            let kids = self.tree.children(u);
            if !kids.is_empty() {
                out[u] =
                    compensated_complex_sum(kids.iter().map(|&v| f[v] * self.weights.weight(v)));
            }
        }
        out
    }

    fn require_left_invertible(&self) -> Result<()> {
        if self.lower_bound > 0.0 {
            Ok(())
        } else {
            Err(Error::NotLeftInvertible {
                lower_bound: self.lower_bound,
            })
        }
    }

    /// `(Lf)(u) = ||S e_u||^-2 sum_{v in Chi(u)} lambda_v f(v)`.
    pub fn apply_left_inverse(&self, f: &L2Vector) -> Result<L2Vector> {
        self.require_left_invertible()?;
        Ok(self.left_inverse(f))
    }

    /// `L*`, the Cauchy dual `S (S*S)^-1`: `(L*g)(v) = lambda_v g(par v) / ||S e_{par v}||^2`.
    pub fn apply_left_inverse_adjoint(&self, g: &L2Vector) -> Result<L2Vector> {
        self.require_left_invertible()?;
        Ok(self.left_inverse_adjoint(g))
    }

    pub(crate) fn left_inverse(&self, f: &L2Vector) -> L2Vector {
        let mut out = self.apply_adjoint(f);
        for u in 0..self.len() {
            let ns = self.norm_squares[u];
            out[u] = if ns > 0.0 { out[u] / ns } else { C64::new(0.0, 0.0) };
        }
        out
    }

    pub(crate) fn left_inverse_adjoint(&self, g: &L2Vector) -> L2Vector {
        let mut out = self.zeros();
        for v in 1..self.len() {
            let p = self.tree.parent(v).unwrap();
            out[v] = g[p] * (self.weights.weight(v) / self.norm_squares[p]);
        }
        out
    }

    /// `S^n` on the truncation.
    pub fn shift_power(&self, f: &L2Vector, n: usize) -> L2Vector {
        let mut g = f.clone();
        for _ in 0..n {
            g = self.apply_shift_truncated(&g);
        }
        g
    }

    /// `L^n` on the truncation.
    pub fn left_inverse_power(&self, f: &L2Vector, n: usize) -> Result<L2Vector> {
        self.require_left_invertible()?;
        let mut g = f.clone();
        for _ in 0..n {
            g = self.left_inverse(&g);
        }
        Ok(g)
    }

    /// Balanced means `||S e_u||` depends only on `|u|`; the last generation is not compared.
    pub fn is_balanced(&self) -> BalanceCheck {
        for k in 0..self.depth() {
            let gen = self.tree.generation_vertices(k);
            let first = gen[0];
            let reference = self.norm_squares[first].sqrt();
            if let Some(&other) = gen
                .iter()
                .find(|&&u| (self.norm_squares[u].sqrt() - reference).abs() > BALANCE_TOL)
            {
                return BalanceCheck {
                    balanced: false,
                    witness: Some((first, other)),
                };
            }
        }
        BalanceCheck {
            balanced: true,
            witness: None,
        }
    }

    /// `||S e_u||^2` for a representative `u` of each generation `0..depth`.
    pub fn generation_norm_squares(&self) -> Vec<f64> {
        (0..self.depth())
            .map(|k| self.norm_squares[self.tree.generation_vertices(k)[0]])
            .collect()
    }

    /// Orthogonal projection onto `N(S*)`, computed as `(I - S L) f`.
    pub fn kernel_projection_via_left_inverse(&self, f: &L2Vector) -> Result<L2Vector> {
        let lf = self.apply_left_inverse(f)?;
        Ok(f.sub(&self.apply_shift_truncated(&lf)))
    }
}

/// Sparse real vector, entries sorted by vertex.
pub type SparseReal = Vec<(VertexId, f64)>;

/// Orthonormal basis of `N(S*)` (or of its part below a generation cap) whose vectors
/// are each supported in a single generation.
#[derive(Clone, Debug)]
pub struct SeparatedBasis {
    vectors: Vec<SparseReal>,
    gen_index: Vec<usize>,
    vertex_count: usize,
    generation_cap: usize,
    /// Parent of every vertex (the root maps to itself).
    parent: Vec<VertexId>,
    /// Basis vectors built from the children of each vertex, as an index range.
    groups: Vec<std::ops::Range<usize>>,
}

impl SeparatedBasis {
    /// Full kernel basis of the truncated `S*`: `e_root` and, for every vertex with children,
    /// an orthonormal basis of the complement of its child-weight vector.
    pub fn new(shift: &ShiftOperator) -> Self {
        Self::up_to_generation(shift, shift.depth())
    }

    /// Only the basis vectors living in generations `<= cap`.
    pub fn up_to_generation(shift: &ShiftOperator, cap: usize) -> Self {
        let tree = shift.tree();
        let mut vectors = vec![vec![(tree.root(), 1.0)]];
        let mut gen_index = vec![0];
        let mut groups = vec![0..0; tree.len()];
        let cap = cap.min(shift.depth());
        for k in 0..cap {
            for &u in tree.generation_vertices(k) {
                let start = vectors.len();
                for v in complement_basis(tree.children(u), shift.weights()) {
                    vectors.push(v);
                    gen_index.push(k + 1);
                }
                groups[u] = start..vectors.len();
            }
        }
        let parent = (0..tree.len()).map(|v| tree.parent(v).unwrap_or(v)).collect();
        SeparatedBasis {
            vectors,
            gen_index,
            vertex_count: tree.len(),
            generation_cap: cap,
            parent,
            groups,
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Generation `k_j` carrying the `j`-th vector.
    pub fn gen_index(&self, j: usize) -> usize {
        self.gen_index[j]
    }

    pub fn gen_indices(&self) -> &[usize] {
        &self.gen_index
    }

    pub fn generation_cap(&self) -> usize {
        self.generation_cap
    }

    pub fn max_generation(&self) -> usize {
        self.gen_index.iter().copied().max().unwrap_or(0)
    }

    pub fn sparse(&self, j: usize) -> &SparseReal {
        &self.vectors[j]
    }

    pub fn vector(&self, j: usize) -> L2Vector {
        let mut out = L2Vector::zeros(self.vertex_count);
        for &(v, x) in &self.vectors[j] {
            out[v] = C64::new(x, 0.0);
        }
        out
    }

    /// Coordinates `<f, e'_j>`. Only sibling groups meeting the support of `f` are visited.
    pub fn coords(&self, f: &L2Vector) -> Vec<C64> {
        let zero = C64::new(0.0, 0.0);
        let mut out = vec![zero; self.dim()];
        let dot = |e: &SparseReal| compensated_complex_sum(e.iter().map(|&(v, x)| f[v] * x));
        out[0] = dot(&self.vectors[0]);
        let mut seen = vec![false; self.vertex_count];
        for v in 1..self.vertex_count {
            let p = self.parent[v];
            if f[v] != zero && !seen[p] {
                seen[p] = true;
                for j in self.groups[p].clone() {
                    out[j] = dot(&self.vectors[j]);
                }
            }
        }
        out
    }

    /// `sum_j c_j e'_j`.
    pub fn synthesize(&self, coords: &[C64]) -> L2Vector {
        let mut out = L2Vector::zeros(self.vertex_count);
        self.add_synthesis(&mut out, coords);
        out
    }

    pub(crate) fn add_synthesis(&self, out: &mut L2Vector, coords: &[C64]) {
        for (e, &c) in self.vectors.iter().zip(coords) {
            if c != C64::new(0.0, 0.0) {
                for &(v, x) in e {
                    out[v] += c * x;
                }
            }
        }
    }

    /// Largest deviation of the Gram matrix from the identity.
    ///
    /// Vectors whose supports have different parents are disjoint, so only sibling groups
    /// are compared; a vector whose support spans two parents is measured against everything.
    pub fn orthonormality_defect(&self, tree: &crate::tree::Tree) -> f64 {
        let dot = |a: &SparseReal, b: &SparseReal| -> f64 {
            let (mut i, mut j, mut s) = (0, 0, crate::vector::CompensatedSum::default());
            while i < a.len() && j < b.len() {
                match a[i].0.cmp(&b[j].0) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        s.add(a[i].1 * b[j].1);
                        i += 1;
                        j += 1;
                    }
                }
            }
            s.value()
        };
        let parent_of = |e: &SparseReal| -> Option<Option<VertexId>> {
            let p = tree.parent(e.first()?.0);
            e.iter().all(|&(v, _)| tree.parent(v) == p).then_some(p)
        };
        let mut groups: std::collections::BTreeMap<Option<VertexId>, Vec<usize>> = Default::default();
        let mut loose = Vec::new();
        for (j, e) in self.vectors.iter().enumerate() {
            match parent_of(e) {
                Some(p) => groups.entry(p).or_default().push(j),
                None => loose.push(j),
            }
        }
        let mut worst: f64 = 0.0;
        let mut compare = |i: usize, j: usize| {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(&self.vectors[i], &self.vectors[j]) - target).abs());
        };
        for members in groups.values() {
            for &i in members {
                for &j in members {
                    compare(i, j);
                }
            }
        }
        for &i in &loose {
            for j in 0..self.vectors.len() {
                compare(i, j);
            }
        }
        worst
    }

    /// `P_E f = sum_j <f, e'_j> e'_j`.
    pub fn project(&self, f: &L2Vector) -> L2Vector {
        self.synthesize(&self.coords(f))
    }
}

/// Orthonormal basis of the complement of `(lambda_c)_{c in kids}` inside `l^2(kids)`,
/// by modified Gram-Schmidt on `lambda_{c_k} e_{c_1} - lambda_{c_1} e_{c_k}`.
fn complement_basis(kids: &[VertexId], weights: &WeightMap) -> Vec<SparseReal> {
    let m = kids.len();
    if m < 2 {
        return Vec::new();
    }
    let lam: Vec<f64> = kids.iter().map(|&c| weights.weight(c)).collect();
    let mut done: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
    for k in 1..m {
        let mut v = vec![0.0; m];
        v[0] = lam[k];
        v[k] = -lam[0];
        for q in &done {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(q) {
                *a -= dot * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for a in &mut v {
            *a /= norm;
        }
        done.push(v);
    }
    done.into_iter()
        .map(|v| {
            kids.iter()
                .zip(v)
                .filter(|(_, x)| *x != 0.0)
                .map(|(&c, x)| (c, x))
                .collect()
        })
        .collect()
}
