//! Graphs, their 2-dimensional clique complexes, and the structure matrices
//! built on top of them.
//!
//! Every simplex is stored with its vertices in ascending order, and the edge
//! and triangle lists are sorted lexicographically. That ordering fixes both
//! the reference orientation and the row/column index of every simplex.

use crate::error::{Error, Result};
use crate::sparse::SparseStructure;

/// Simple undirected graph on `0..n_vertices`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Validates and canonicalizes: each pair is stored as `(min, max)` and the
    /// list is sorted. Self-loops, duplicates (in either orientation) and
    /// out-of-range endpoints are errors.
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) references a vertex >= {n_vertices}"
                )));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge {:?}", w[0])));
        }
        let mut neighbors = vec![Vec::new(); n_vertices];
        for &(u, v) in &canon {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        neighbors.iter_mut().for_each(|n| n.sort_unstable());
        Ok(Self {
            n_vertices,
            edges: canon,
            neighbors,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = (u.min(v), u.max(v));
        self.edges.binary_search(&(a, b)).is_ok()
    }
}

/// Vertices, edges and triangles of a clique complex truncated at dimension 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplicialComplex2 {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    triangles: Vec<(usize, usize, usize)>,
}

impl SimplicialComplex2 {
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn triangles(&self) -> &[(usize, usize, usize)] {
        &self.triangles
    }

    /// Number of simplices of dimension `k` (0 for `k > 2`).
    pub fn count(&self, k: usize) -> usize {
        match k {
            0 => self.n_vertices,
            1 => self.edges.len(),
            2 => self.triangles.len(),
            _ => 0,
        }
    }

    /// Canonical index of edge `{u, v}`.
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.edges.binary_search(&(u.min(v), u.max(v))).ok()
    }
}

/// All 3-cliques of `g`, together with its vertices and edges.
pub fn build_clique_complex(g: &Graph) -> SimplicialComplex2 {
    let mut triangles = Vec::new();
    // (u, v) ascending, then w ascending: the output is lexicographic.
    for &(u, v) in g.edges() {
        let nu = g.neighbors(u);
        let nv = g.neighbors(v);
        let (mut i, mut j) = (0, 0);
        while i < nu.len() && j < nv.len() {
            match nu[i].cmp(&nv[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if nu[i] > v {
                        triangles.push((u, v, nu[i]));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    SimplicialComplex2 {
        n_vertices: g.n_vertices(),
        edges: g.edges().to_vec(),
        triangles,
    }
}

/// Vertex adjacency `A_0`: symmetric, binary, zero diagonal.
pub fn adjacency_0(c: &SimplicialComplex2) -> SparseStructure {
    let n = c.n_vertices;
    let entries = c
        .edges
        .iter()
        .flat_map(|&(u, v)| [(u, v, 1.0), (v, u, 1.0)]);
    SparseStructure::from_triplets(n, n, entries).expect("edge list is canonical")
}

/// Signed node-edge incidence `B_1`; the boundary of `[u, v]` is `v - u`.
pub fn boundary_1(c: &SimplicialComplex2) -> SparseStructure {
    let entries = c
        .edges
        .iter()
        .enumerate()
        .flat_map(|(j, &(u, v))| [(u, j, -1.0), (v, j, 1.0)]);
    SparseStructure::from_triplets(c.n_vertices, c.edges.len(), entries)
        .expect("edge list is canonical")
}

/// Signed edge-triangle incidence `B_2`;
/// `∂[u, v, w] = [v, w] - [u, w] + [u, v]`.
pub fn boundary_2(c: &SimplicialComplex2) -> SparseStructure {
    let idx = |a, b| c.edge_index(a, b).expect("triangle edges present");
    let entries = c.triangles.iter().enumerate().flat_map(|(j, &(u, v, w))| {
        [(idx(v, w), j, 1.0), (idx(u, w), j, -1.0), (idx(u, v), j, 1.0)]
    });
    SparseStructure::from_triplets(c.edges.len(), c.triangles.len(), entries)
        .expect("triangle list is canonical")
}

/// Binary vertex-triangle incidence `B_{0,2}`.
pub fn incidence_0_2(c: &SimplicialComplex2) -> SparseStructure {
    let entries = c
        .triangles
        .iter()
        .enumerate()
        .flat_map(|(j, &(u, v, w))| [(u, j, 1.0), (v, j, 1.0), (w, j, 1.0)]);
    SparseStructure::from_triplets(c.n_vertices, c.triangles.len(), entries)
        .expect("triangle list is canonical")
}

/// Combinatorial Hodge Laplacian `L_k = B_kᵀ B_k + B_{k+1} B_{k+1}ᵀ`, with
/// `B_0` and `B_3` taken as zero maps.
pub fn hodge_laplacian(c: &SimplicialComplex2, k: usize) -> Result<SparseStructure> {
    match k {
        0 => {
            let b1 = boundary_1(c);
            b1.matmul(&b1.transpose())
        }
        1 => {
            let b1 = boundary_1(c);
            let b2 = boundary_2(c);
            let down = b1.transpose().matmul(&b1)?;
            let up = b2.matmul(&b2.transpose())?;
            down.add(&up)
        }
        2 => {
            let b2 = boundary_2(c);
            b2.transpose().matmul(&b2)
        }
        _ => Err(Error::InvalidArgument(format!(
            "Hodge Laplacian order {k} outside 0..=2"
        ))),
    }
}
