//! Directed communication graphs.
//!
//! Nodes are zero-based internally. Edges keep the position they had in the
//! input list, and that position is the edge index used everywhere else.

use crate::error::ModelError;

/// A validated directed graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl DirectedGraph {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self, ModelError> {
        if node_count == 0 {
            return Err(ModelError::EmptyGraph);
        }
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        let mut out_edges = vec![Vec::new(); node_count];
        let mut in_edges = vec![Vec::new(); node_count];
        for (idx, &(from, to)) in edges.iter().enumerate() {
            if from >= node_count || to >= node_count {
                return Err(ModelError::EndpointOutOfRange {
                    from,
                    to,
                    node_count,
                });
            }
            if from == to {
                return Err(ModelError::SelfLoop { from, to });
            }
            if !seen.insert((from, to)) {
                return Err(ModelError::DuplicateEdge { from, to });
            }
            out_edges[from].push(idx);
            in_edges[to].push(idx);
        }
        Ok(Self {
            node_count,
            edges,
            out_edges,
            in_edges,
        })
    }

    /// Builds a graph from one-based node labels, as used in files and on
    /// the command line.
    pub fn from_one_based(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, ModelError> {
        let mut zero_based = Vec::with_capacity(edges.len());
        for &(from, to) in edges {
            if from == 0 || to == 0 {
                return Err(ModelError::EndpointOutOfRange {
                    from,
                    to,
                    node_count,
                });
            }
            zero_based.push((from - 1, to - 1));
        }
        Self::new(node_count, zero_based)
    }

    /// The six-node graph made of the cycles 1→2→3→5→1 and 2→4→6→2.
    pub fn two_cycles() -> Self {
        Self::from_one_based(6, &[(1, 2), (2, 3), (3, 5), (5, 1), (2, 4), (4, 6), (6, 2)])
            .expect("static graph is valid")
    }

    /// A directed ring 0→1→…→n-1→0.
    pub fn ring(node_count: usize) -> Result<Self, ModelError> {
        let edges = if node_count < 2 {
            Vec::new()
        } else {
            (0..node_count).map(|i| (i, (i + 1) % node_count)).collect()
        };
        Self::new(node_count, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> Result<(usize, usize), ModelError> {
        self.edges
            .get(idx)
            .copied()
            .ok_or(ModelError::EdgeOutOfRange(idx))
    }

    pub fn out_degree(&self, node: usize) -> Result<usize, ModelError> {
        self.out_edges
            .get(node)
            .map(Vec::len)
            .ok_or(ModelError::NodeOutOfRange(node))
    }

    pub fn max_out_degree(&self) -> usize {
        self.out_edges.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Indices of edges leaving `node`.
    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    /// Indices of edges entering `node`.
    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }

    /// True iff every node reaches every other node. Checks forward
    /// reachability from node 0 and reachability of node 0 from everyone.
    pub fn is_strongly_connected(&self) -> bool {
        let forward = self.reach_all(0, |n| self.out_edges[n].iter().map(|&e| self.edges[e].1));
        forward && self.reach_all(0, |n| self.in_edges[n].iter().map(|&e| self.edges[e].0))
    }

    fn reach_all<I, F>(&self, start: usize, next: F) -> bool
    where
        F: Fn(usize) -> I,
        I: Iterator<Item = usize>,
    {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(n) = stack.pop() {
            for m in next(n) {
                if !seen[m] {
                    seen[m] = true;
                    count += 1;
                    stack.push(m);
                }
            }
        }
        count == self.node_count
    }
}
