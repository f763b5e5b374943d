use super::FormationError;
use std::collections::BTreeSet;

/// Undirected formation graph over vertices `0..n`.
///
/// Edges are stored normalized as `(min, max)`. Construction rejects
/// self-loops, duplicates, out-of-range vertices and disconnected graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormationGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl FormationGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, FormationError> {
        if n == 0 {
            return Err(FormationError::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(FormationError::SelfLoop(i));
            }
            if i >= n || j >= n {
                return Err(FormationError::VertexOutOfRange { vertex: i.max(j), n });
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(FormationError::DuplicateEdge(i.min(j), i.max(j)));
            }
        }
        let graph = Self { n, edges: set };
        if !graph.is_connected() {
            return Err(FormationError::Disconnected);
        }
        Ok(graph)
    }

    /// Complete graph `K_n`.
    pub fn complete(n: usize) -> Result<Self, FormationError> {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::new(n, edges)
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self, FormationError> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(i, j)| i == v || j == v).count()
    }

    pub fn max_degree(&self) -> usize {
        let mut degrees = vec![0usize; self.n];
        for &(i, j) in &self.edges {
            degrees[i] += 1;
            degrees[j] += 1;
        }
        degrees.into_iter().max().unwrap_or(0)
    }

    /// Upper bound on the largest Laplacian eigenvalue (`2 * max degree`).
    pub fn spectral_bound(&self) -> f64 {
        2.0 * self.max_degree() as f64
    }

    fn is_connected(&self) -> bool {
        let mut adjacency = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> LaplacianMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for &(i, j) in &self.edges {
            data[i * n + j] = -1.0;
            data[j * n + i] = -1.0;
            data[i * n + i] += 1.0;
            data[j * n + j] += 1.0;
        }
        LaplacianMatrix { n, data }
    }
}

/// Dense row-major graph Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    n: usize,
    data: Vec<f64>,
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}
