//! JSON problem files.
//!
//! ```json
//! {
//!   "m": 2,
//!   "nodes": [
//!     {"x_bar": [1.0, 2.0], "function": {"kind": "zero"}},
//!     {"x_bar": [0.0, 1.0], "function": {"kind": "quadratic", "A": [[2, 0], [0, 2]], "b": [0, 1], "c": 0}},
//!     {"x_bar": [0.5, 0.5], "function": {"kind": "max_two_quadratics",
//!       "A": [[1, 0], [0, 1]], "b1": [1, 0], "c1": 0, "b2": [0, 1], "c2": 0}}
//!   ],
//!   "edges": [[1, 2], [2, 3], [3, 1]],
//!   "known_optimum": null
//! }
//! ```
//!
//! Matrices are lists of rows. Node labels in `edges` are one-based. Numbers
//! are written with the shortest representation that parses back to the
//! same `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::graph::DirectedGraph;
use crate::oracle::{ConvexFunction, Matrix, MaxOfQuadratics, QuadraticForm, Vector};
use crate::problem::ProblemInstance;

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid problem: {0}")]
    Invalid(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FunctionSpec {
    Zero,
    Quadratic {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: f64,
    },
    MaxTwoQuadratics {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b1: Vec<f64>,
        c1: f64,
        b2: Vec<f64>,
        c2: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct NodeSpec {
    x_bar: Vec<f64>,
    function: FunctionSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct ProblemSpec {
    m: usize,
    nodes: Vec<NodeSpec>,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    known_optimum: Option<Vec<f64>>,
}

fn rows(a: &Matrix) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], m: usize) -> Result<Matrix, ModelError> {
    if rows.len() != m {
        return Err(ModelError::DimensionMismatch {
            expected: m,
            actual: rows.len(),
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != m) {
        return Err(ModelError::DimensionMismatch {
            expected: m,
            actual: bad.len(),
        });
    }
    Ok(Matrix::from_fn(m, m, |i, j| rows[i][j]))
}

fn vector(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

impl FunctionSpec {
    fn from_function(f: &ConvexFunction) -> Self {
        match f {
            ConvexFunction::Zero => Self::Zero,
            ConvexFunction::Quadratic(q) => Self::Quadratic {
                a: rows(q.a()),
                b: q.b().iter().copied().collect(),
                c: q.c(),
            },
            ConvexFunction::MaxTwoQuadratics(q) => {
                let (b1, c1) = q.first();
                let (b2, c2) = q.second();
                Self::MaxTwoQuadratics {
                    a: rows(q.a()),
                    b1: b1.iter().copied().collect(),
                    c1,
                    b2: b2.iter().copied().collect(),
                    c2,
                }
            }
        }
    }

    fn into_function(self, m: usize) -> Result<ConvexFunction, ModelError> {
        Ok(match self {
            Self::Zero => ConvexFunction::Zero,
            Self::Quadratic { a, b, c } => {
                ConvexFunction::Quadratic(QuadraticForm::new(matrix(&a, m)?, vector(&b), c)?)
            }
            Self::MaxTwoQuadratics { a, b1, c1, b2, c2 } => ConvexFunction::MaxTwoQuadratics(
                MaxOfQuadratics::new(matrix(&a, m)?, vector(&b1), c1, vector(&b2), c2)?,
            ),
        })
    }
}

/// Serializes an instance to the JSON schema above.
pub fn problem_to_json(problem: &ProblemInstance) -> String {
    let spec = ProblemSpec {
        m: problem.dim(),
        nodes: problem
            .x_bar()
            .iter()
            .zip(problem.functions())
            .map(|(x, f)| NodeSpec {
                x_bar: x.iter().copied().collect(),
                function: FunctionSpec::from_function(f),
            })
            .collect(),
        edges: problem
            .graph()
            .edges()
            .iter()
            .map(|&(i, j)| [i + 1, j + 1])
            .collect(),
        known_optimum: problem.known_optimum().map(|x| x.iter().copied().collect()),
    };
    serde_json::to_string_pretty(&spec).expect("problem serializes")
}

/// Parses and validates a problem from JSON text.
pub fn problem_from_json(text: &str) -> Result<ProblemInstance, ProblemFileError> {
    let spec: ProblemSpec = serde_json::from_str(text).map_err(|e| ProblemFileError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let m = spec.m;
    let edges: Vec<(usize, usize)> = spec.edges.iter().map(|&[i, j]| (i, j)).collect();
    let graph = DirectedGraph::from_one_based(spec.nodes.len(), &edges)?;
    let mut functions = Vec::with_capacity(spec.nodes.len());
    let mut x_bar = Vec::with_capacity(spec.nodes.len());
    for node in spec.nodes {
        functions.push(node.function.into_function(m)?);
        x_bar.push(vector(&node.x_bar));
    }
    let known = spec.known_optimum.as_deref().map(vector);
    Ok(ProblemInstance::new(graph, m, functions, x_bar, known)?)
}

pub fn load_problem(path: &Path) -> Result<ProblemInstance, ProblemFileError> {
    let text = fs::read_to_string(path).map_err(|source| ProblemFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    problem_from_json(&text)
}

pub fn save_problem(problem: &ProblemInstance, path: &Path) -> Result<(), ProblemFileError> {
    fs::write(path, problem_to_json(problem) + "\n").map_err(|source| ProblemFileError::Io {
        path: path.display().to_string(),
        source,
    })
}
