//! Undirected variable interaction graph (VIG).
//!
//! Vertices are variable indices; an edge connects two variables that are
//! directly dependent (they co-occur in a sub-function, or a nonzero learned
//! dependency strength connects them).

use alloc::vec;
use alloc::vec::Vec;

/// Undirected graph over variable indices `0..n` with O(1) adjacency tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vig {
    n: usize,
    adj: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Vig {
    pub fn new(n: usize) -> Self {
        Vig {
            n,
            adj: vec![false; n * n],
            neighbors: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    pub fn from_edges<I: IntoIterator<Item = (usize, usize)>>(n: usize, edges: I) -> Self {
        let mut g = Vig::new(n);
        for (u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Adds the undirected edge (u, v). Self-loops and duplicates are ignored.
    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u < self.n && v < self.n, "vertex out of range");
        if u == v || self.adj[u * self.n + v] {
            return;
        }
        self.adj[u * self.n + v] = true;
        self.adj[v * self.n + u] = true;
        let pos_u = self.neighbors[u].binary_search(&v).unwrap_err();
        self.neighbors[u].insert(pos_u, v);
        let pos_v = self.neighbors[v].binary_search(&u).unwrap_err();
        self.neighbors[v].insert(pos_v, u);
        self.edge_count += 1;
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v]
    }

    /// Neighbors of `v` in ascending index order.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    /// All edges as (min, max) pairs in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for u in 0..self.n {
            for &v in &self.neighbors[u] {
                if v > u {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// True when every pair of the given vertices is adjacent.
    pub fn is_clique(&self, vertices: &[usize]) -> bool {
        for (a, &u) in vertices.iter().enumerate() {
            for &v in &vertices[a + 1..] {
                if !self.has_edge(u, v) {
                    return false;
                }
            }
        }
        true
    }

    /// Connected components, ordered by their lowest vertex index; vertices
    /// within a component are sorted ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut queue = alloc::collections::VecDeque::new();
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}
