//! Directed multigraphs whose incidence matrix `A` generates the interaction
//! matrix `C = A^t A`, with edges playing the role of components.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::ModelError;
use crate::model::{set_distance, InteractionMatrix, IntervalUnion, DEFAULT_TOL_PSD};

pub const DEFAULT_CYCLE_LIMIT: usize = 1024;

/// Beyond this many independent cycles the cycle space is not enumerated.
const MAX_CYCLE_BASIS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectedMultigraph {
    vertices: usize,
    /// `(tail, head)`, 0-indexed; edge `i` is component `i`.
    edges: Vec<(usize, usize)>,
}

impl DirectedMultigraph {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self, ModelError> {
        for &(u, v) in &edges {
            if u >= vertices || v >= vertices {
                return Err(ModelError::Dimension(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{vertices}"
                )));
            }
            if u == v {
                return Err(ModelError::Dimension(format!("self-loop at vertex {u}")));
            }
        }
        Ok(Self { vertices, edges })
    }

    /// Builds from 1-indexed `(tail, head)` pairs as written in configs.
    pub fn from_one_indexed(vertices: usize, edges: &[(usize, usize)]) -> Result<Self, ModelError> {
        if edges.iter().any(|&(u, v)| u == 0 || v == 0) {
            return Err(ModelError::Dimension("vertices are numbered from 1".into()));
        }
        Self::new(vertices, edges.iter().map(|&(u, v)| (u - 1, v - 1)).collect())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// The Nikishin chain `1 -> 2 -> ... -> d+1`.
    pub fn chain(edges: usize) -> Self {
        Self {
            vertices: edges + 1,
            edges: (0..edges).map(|i| (i, i + 1)).collect(),
        }
    }

    /// The Angelesco star: `d` edges out of a common root.
    pub fn star(edges: usize) -> Self {
        Self {
            vertices: edges + 1,
            edges: (1..=edges).map(|i| (0, i)).collect(),
        }
    }

    /// `n x d` incidence matrix: column `i` has `-1` at the tail and `+1` at the head.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.vertices, self.edges.len());
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            a[(u, i)] = -1.0;
            a[(v, i)] = 1.0;
        }
        a
    }

    pub fn incidence_rows(&self) -> Vec<Vec<f64>> {
        let a = self.incidence_matrix();
        (0..a.nrows())
            .map(|i| a.row(i).iter().copied().collect())
            .collect()
    }

    pub fn interaction(&self) -> Result<InteractionMatrix, ModelError> {
        let a = self.incidence_matrix();
        InteractionMatrix::factorize(&(a.transpose() * a), DEFAULT_TOL_PSD)
    }

    fn components(&self) -> (usize, Vec<usize>) {
        let mut uf = UnionFind::new(self.vertices);
        for &(u, v) in &self.edges {
            uf.union(u, v);
        }
        let roots: Vec<usize> = (0..self.vertices).map(|v| uf.find(v)).collect();
        let mut distinct = roots.clone();
        distinct.sort_unstable();
        distinct.dedup();
        (distinct.len(), roots)
    }

    /// An undirected cycle exists iff `|E| > |V| - #components`.
    pub fn has_undirected_cycle(&self) -> bool {
        let (k, _) = self.components();
        self.edges.len() + k > self.vertices
    }

    pub fn cycle_rank(&self) -> usize {
        let (k, _) = self.components();
        self.edges.len() + k - self.vertices
    }

    pub fn has_directed_cycle(&self) -> bool {
        // Kahn's algorithm
        let mut indeg = vec![0usize; self.vertices];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.vertices];
        for &(u, v) in &self.edges {
            indeg[v] += 1;
            out[u].push(v);
        }
        let mut stack: Vec<usize> = (0..self.vertices).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(u) = stack.pop() {
            seen += 1;
            for &v in &out[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    stack.push(v);
                }
            }
        }
        seen < self.vertices
    }

    /// Edge sets of all simple undirected cycles, as sorted edge indices.
    ///
    /// Enumerates the cycle space spanned by a fundamental cycle basis and
    /// keeps the elements that are single cycles. Stops after `limit` cycles.
    pub fn undirected_cycles(&self, limit: usize) -> CycleEnumeration {
        let d = self.edges.len();
        let mut uf = UnionFind::new(self.vertices);
        let mut tree = Vec::new();
        let mut chords = Vec::new();
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if uf.union(u, v) {
                tree.push(i);
            } else {
                chords.push(i);
            }
        }
        if chords.len() > MAX_CYCLE_BASIS {
            return CycleEnumeration {
                cycles: Vec::new(),
                overflow: true,
            };
        }
        let basis: Vec<Vec<bool>> = chords.iter().map(|&c| self.fundamental_cycle(c, &tree)).collect();
        let mut cycles = Vec::new();
        let mut overflow = false;
        for mask in 1u64..(1u64 << basis.len()) {
            let mut set = vec![false; d];
            for (b, cyc) in basis.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    for (s, &c) in set.iter_mut().zip(cyc) {
                        *s ^= c;
                    }
                }
            }
            if self.is_simple_cycle(&set) {
                if cycles.len() == limit {
                    overflow = true;
                    break;
                }
                cycles.push((0..d).filter(|&i| set[i]).collect());
            }
        }
        cycles.sort();
        CycleEnumeration { cycles, overflow }
    }

    fn fundamental_cycle(&self, chord: usize, tree: &[usize]) -> Vec<bool> {
        let (start, goal) = self.edges[chord];
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.vertices];
        for &e in tree {
            let (u, v) = self.edges[e];
            adj[u].push((v, e));
            adj[v].push((u, e));
        }
        let mut via: Vec<Option<(usize, usize)>> = vec![None; self.vertices];
        let mut visited = vec![false; self.vertices];
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(u) = stack.pop() {
            if u == goal {
                break;
            }
            for &(v, e) in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    via[v] = Some((u, e));
                    stack.push(v);
                }
            }
        }
        let mut set = vec![false; self.edges.len()];
        set[chord] = true;
        let mut cur = goal;
        while let Some((prev, e)) = via[cur] {
            set[e] = true;
            cur = prev;
        }
        set
    }

    fn is_simple_cycle(&self, set: &[bool]) -> bool {
        let mut deg = vec![0usize; self.vertices];
        let mut uf = UnionFind::new(self.vertices);
        let mut any = None;
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if set[i] {
                deg[u] += 1;
                deg[v] += 1;
                uf.union(u, v);
                any = Some(u);
            }
        }
        let Some(root) = any else {
            return false;
        };
        let root = uf.find(root);
        (0..self.vertices).all(|v| deg[v] == 0 || (deg[v] == 2 && uf.find(v) == root))
    }

    /// Relabels edges: edge `k` of the result is edge `perm[k]` here.
    pub fn permuted_edges(&self, perm: &[usize]) -> Self {
        Self {
            vertices: self.vertices,
            edges: perm.iter().map(|&p| self.edges[p]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleEnumeration {
    pub cycles: Vec<Vec<usize>>,
    pub overflow: bool,
}

/// Undirected graph on the components: `(i, j)` is an edge iff the sets touch.
pub fn intersection_graph(sets: &[IntervalUnion]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if set_distance(&sets[i], &sets[j]) == 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Connected-component label of each node of an undirected graph.
pub fn component_labels(nodes: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut uf = UnionFind::new(nodes);
    for &(u, v) in edges {
        uf.union(u, v);
    }
    let mut labels = vec![usize::MAX; nodes];
    let mut next = 0;
    let mut root_label = vec![usize::MAX; nodes];
    for v in 0..nodes {
        let r = uf.find(v);
        if root_label[r] == usize::MAX {
            root_label[r] = next;
            next += 1;
        }
        labels[v] = root_label[r];
    }
    labels
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
