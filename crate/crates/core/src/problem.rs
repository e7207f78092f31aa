//! Problem instances: `min_x Σᵢ fᵢ(x) + ½‖x − x̄ᵢ‖²` over a directed graph.

use crate::error::ModelError;
use crate::graph::DirectedGraph;
use crate::oracle::{ConvexFunction, Vector};
use crate::potential;

/// KKT residual tolerance for a planted optimum.
pub const KKT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    graph: DirectedGraph,
    dim: usize,
    functions: Vec<ConvexFunction>,
    x_bar: Vec<Vector>,
    known_optimum: Option<Vector>,
}

impl ProblemInstance {
    /// Validates and assembles an instance. Fails if the graph is not
    /// strongly connected, if any dimension disagrees with `dim`, or if a
    /// supplied `known_optimum` does not satisfy the KKT conditions.
    pub fn new(
        graph: DirectedGraph,
        dim: usize,
        functions: Vec<ConvexFunction>,
        x_bar: Vec<Vector>,
        known_optimum: Option<Vector>,
    ) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::Invalid("dimension must be positive".into()));
        }
        let n = graph.node_count();
        if functions.len() != n || x_bar.len() != n {
            return Err(ModelError::Invalid(format!(
                "expected {n} functions and anchors, got {} and {}",
                functions.len(),
                x_bar.len()
            )));
        }
        if !graph.is_strongly_connected() {
            return Err(ModelError::NotStronglyConnected);
        }
        let mismatch = |actual: usize| ModelError::DimensionMismatch {
            expected: dim,
            actual,
        };
        for f in &functions {
            if let Some(m) = f.dim() {
                if m != dim {
                    return Err(mismatch(m));
                }
            }
        }
        for x in x_bar.iter().chain(known_optimum.iter()) {
            if x.len() != dim {
                return Err(mismatch(x.len()));
            }
        }
        let instance = Self {
            graph,
            dim,
            functions,
            x_bar,
            known_optimum,
        };
        if let Some(x) = &instance.known_optimum {
            let residual = potential::kkt_residual(&instance, x)?;
            if residual > KKT_TOLERANCE {
                return Err(ModelError::KktResidual(residual));
            }
        }
        Ok(instance)
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn functions(&self) -> &[ConvexFunction] {
        &self.functions
    }

    pub fn function(&self, node: usize) -> &ConvexFunction {
        &self.functions[node]
    }

    pub fn x_bar(&self) -> &[Vector] {
        &self.x_bar
    }

    pub fn known_optimum(&self) -> Option<&Vector> {
        self.known_optimum.as_ref()
    }

    /// Mean of the anchors `x̄ᵢ`.
    pub fn m_bar(&self) -> Vector {
        let sum = self
            .x_bar
            .iter()
            .fold(Vector::zeros(self.dim), |acc, x| acc + x);
        sum / self.node_count() as f64
    }
}
