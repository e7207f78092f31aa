//! Random test problems with a planted optimum at the all-ones vector.
//!
//! Subgradients `vᵢ` are drawn uniformly from `[-1, 1]^m` and the common
//! anchor is set to `x̄ = e + (1/|V|) Σ vᵢ`, so that `Σ vᵢ + |V|(e − x̄) = 0`
//! holds and `e` is optimal as soon as `vᵢ ∈ ∂fᵢ(e)`. Each `fᵢ` is then built
//! around its `vᵢ`:
//!
//! * smooth: `½xᵀAx + bᵀx` with `A = wwᵀ + rI` and `b = vᵢ − Ae`;
//! * nonsmooth: the max of two quadratics with the same `A`, linear terms
//!   `b ± d` (`‖d‖ = ½`) and constants chosen so both pieces agree at `e`.
//!   `vᵢ` is then the midpoint of the two piece gradients.
//!
//! `w` and `r` are uniform on `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::graph::DirectedGraph;
use crate::oracle::{ConvexFunction, Matrix, MaxOfQuadratics, QuadraticForm, Vector};
use crate::problem::ProblemInstance;
use crate::simulator::seeded_rng;

/// Stream used for problem generation.
pub const PROBLEM_STREAM: u64 = 1;

/// Redraw cap for degenerate random draws.
pub const MAX_ATTEMPTS: usize = 100;

/// Length of the offset between the two linear terms of a nonsmooth piece.
pub const PIECE_OFFSET: f64 = 0.5;

const MIN_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// All functions zero: plain averaging.
    Consensus,
    /// Strongly convex quadratics.
    Smooth,
    /// Maximum of two quadratics, kinked at the optimum.
    Nonsmooth,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Consensus => "consensus",
            Self::Smooth => "F-S",
            Self::Nonsmooth => "F-NS",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "consensus" => Ok(Self::Consensus),
            "f-s" | "fs" | "smooth" => Ok(Self::Smooth),
            "f-ns" | "fns" | "nonsmooth" => Ok(Self::Nonsmooth),
            other => Err(format!(
                "unknown problem kind `{other}` (expected consensus, F-S or F-NS)"
            )),
        }
    }
}

fn uniform_vector(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(m, |_, _| rng.random_range(lo..hi))
}

/// `wwᵀ + rI` with `w`, `r` uniform on `[0, 1]`.
fn random_hessian(rng: &mut ChaCha8Rng, m: usize) -> Result<Matrix, ModelError> {
    for _ in 0..MAX_ATTEMPTS {
        let w = uniform_vector(rng, m, 0.0, 1.0);
        let r: f64 = rng.random();
        if r > MIN_RIDGE {
            return Ok(&w * w.transpose() + Matrix::identity(m, m) * r);
        }
    }
    Err(ModelError::DegenerateDraw(MAX_ATTEMPTS))
}

fn random_direction(rng: &mut ChaCha8Rng, m: usize) -> Result<Vector, ModelError> {
    for _ in 0..MAX_ATTEMPTS {
        let g = uniform_vector(rng, m, -1.0, 1.0);
        let norm = g.norm();
        if norm > 1e-3 {
            return Ok(g / norm);
        }
    }
    Err(ModelError::DegenerateDraw(MAX_ATTEMPTS))
}

fn smooth_piece(
    rng: &mut ChaCha8Rng,
    v: &Vector,
    e: &Vector,
) -> Result<ConvexFunction, ModelError> {
    let a = random_hessian(rng, v.len())?;
    let b = v - &a * e;
    let q = QuadraticForm::new(a, b, 0.0)?;
    let err = (q.gradient(e) - v).amax();
    if err > 1e-10 {
        return Err(ModelError::Invalid(format!(
            "gradient at e misses v by {err:e}"
        )));
    }
    Ok(ConvexFunction::Quadratic(q))
}

fn nonsmooth_piece(
    rng: &mut ChaCha8Rng,
    v: &Vector,
    e: &Vector,
) -> Result<ConvexFunction, ModelError> {
    let a = random_hessian(rng, v.len())?;
    let d = random_direction(rng, v.len())? * PIECE_OFFSET;
    let base = v - &a * e;
    let shift = d.dot(e);
    let q = MaxOfQuadratics::new(a, &base + &d, -shift, &base - &d, shift)?;
    let (f1, f2) = q.piece_values(e);
    let (g1, g2) = q.piece_gradients(e);
    let mid_err = ((&g1 + &g2) * 0.5 - v).amax();
    if (f1 - f2).abs() > 1e-12 || mid_err > 1e-10 {
        return Err(ModelError::Invalid(format!(
            "pieces at e differ by {:e}, midpoint misses v by {mid_err:e}",
            (f1 - f2).abs()
        )));
    }
    if (&g1 - v).norm() < 1e-3 || (&g2 - v).norm() < 1e-3 {
        return Err(ModelError::Invalid(
            "piece gradient coincides with v".into(),
        ));
    }
    Ok(ConvexFunction::MaxTwoQuadratics(q))
}

/// Draws a problem of the given kind over `graph`. Same `(kind, m, graph,
/// seed)` gives the same instance.
pub fn generate_problem(
    kind: ProblemKind,
    m: usize,
    graph: DirectedGraph,
    seed: u64,
) -> Result<ProblemInstance, ModelError> {
    if m == 0 {
        return Err(ModelError::Invalid("dimension must be positive".into()));
    }
    let mut rng = seeded_rng(seed, PROBLEM_STREAM);
    let n = graph.node_count();
    match kind {
        ProblemKind::Consensus => {
            let x_bar: Vec<Vector> = (0..n)
                .map(|_| uniform_vector(&mut rng, m, 0.0, 1.0))
                .collect();
            let mean = x_bar.iter().fold(Vector::zeros(m), |acc, x| acc + x) / n as f64;
            ProblemInstance::new(graph, m, vec![ConvexFunction::Zero; n], x_bar, Some(mean))
        }
        ProblemKind::Smooth | ProblemKind::Nonsmooth => {
            let e = Vector::from_element(m, 1.0);
            let vs: Vec<Vector> = (0..n)
                .map(|_| uniform_vector(&mut rng, m, -1.0, 1.0))
                .collect();
            let v_sum = vs.iter().fold(Vector::zeros(m), |acc, v| acc + v);
            let anchor = &e + v_sum / n as f64;
            let functions = vs
                .iter()
                .map(|v| match kind {
                    ProblemKind::Smooth => smooth_piece(&mut rng, v, &e),
                    _ => nonsmooth_piece(&mut rng, v, &e),
                })
                .collect::<Result<Vec<_>, _>>()?;
            ProblemInstance::new(graph, m, functions, vec![anchor; n], Some(e))
        }
    }
}
