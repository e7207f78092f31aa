//! Global diagnostics of a protocol snapshot.
//!
//! `Val` is the dual objective evaluated at the snapshot:
//!
//! ```text
//! Val = Σᵢ fᵢ*(zᵢ) + Σ_α (s_α/2)‖x_α‖²,   x_α = y_α/s_α, sum over sites with s_α > 0
//! ```
//!
//! It never increases under any protocol operation. The duality gap against
//! the optimum `x*` is
//!
//! ```text
//! gap = (|V|/2)‖x* − m̄‖² − (|V|/2)‖m̄‖² + Σᵢ fᵢ(x*) + Val
//! ```
//!
//! and bounds the weighted squared distance `Σ_α (s_α/2)‖x* − x_α‖²` from
//! above.

use nalgebra::{DMatrix, DVector};

use crate::error::ModelError;
use crate::oracle::{ConvexFunction, Vector};
use crate::problem::ProblemInstance;
use crate::protocol::{ProtocolState, Site};

/// Iteration cap of the centralized reference solver.
pub const REFERENCE_MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub val: f64,
    pub duality_gap: f64,
    pub weighted_sq_dist: f64,
    pub consensus_spread: f64,
}

impl Diagnostics {
    pub fn compute(state: &ProtocolState, problem: &ProblemInstance, x_star: &Vector) -> Self {
        let val = val(state, problem);
        Self {
            val,
            duality_gap: gap_from_val(state, problem, x_star, val),
            weighted_sq_dist: weighted_sq_dist(state, x_star),
            consensus_spread: consensus_spread(state),
        }
    }

    /// True when some conjugate term is infinite.
    pub fn is_flagged(&self) -> bool {
        !self.val.is_finite()
    }
}

/// Sites holding mass, with their `(s, x)`; includes the auxiliary site.
fn occupied(state: &ProtocolState) -> impl Iterator<Item = (f64, Vector)> + '_ {
    let virt = state
        .virtual_estimate()
        .map(|x| (state.virtual_mass().1, x));
    state
        .sites()
        .filter_map(move |site| {
            let (y, s) = state.mass(site);
            (s > 0.0).then(|| (s, y / s))
        })
        .chain(virt)
}

/// Dual objective value of the snapshot.
pub fn val(state: &ProtocolState, problem: &ProblemInstance) -> f64 {
    let conj: f64 = state
        .nodes()
        .iter()
        .zip(problem.functions())
        .map(|(n, f)| {
            f.conjugate(&n.z)
                .expect("state and problem dimensions agree")
        })
        .sum();
    let kinetic: f64 = occupied(state)
        .map(|(s, x)| 0.5 * s * x.norm_squared())
        .sum();
    conj + kinetic
}

fn gap_from_val(
    state: &ProtocolState,
    problem: &ProblemInstance,
    x_star: &Vector,
    val: f64,
) -> f64 {
    let n = state.node_count() as f64;
    let m_bar = state.m_bar();
    let f_star: f64 = problem
        .functions()
        .iter()
        .map(|f| f.eval(x_star).expect("dimension"))
        .sum();
    0.5 * n * (x_star - m_bar).norm_squared() - 0.5 * n * m_bar.norm_squared() + f_star + val
}

/// Primal minus dual objective at the snapshot, for the optimum `x_star`.
pub fn duality_gap(state: &ProtocolState, problem: &ProblemInstance, x_star: &Vector) -> f64 {
    gap_from_val(state, problem, x_star, val(state, problem))
}

/// `Σ_α (s_α/2)‖x* − x_α‖²` over occupied sites.
pub fn weighted_sq_dist(state: &ProtocolState, x_star: &Vector) -> f64 {
    occupied(state)
        .map(|(s, x)| 0.5 * s * (x_star - x).norm_squared())
        .sum()
}

/// Largest pairwise distance between node estimates.
pub fn consensus_spread(state: &ProtocolState) -> f64 {
    let xs: Vec<Vector> = (0..state.node_count())
        .filter_map(|i| state.local_estimate(Site::Node(i)))
        .collect();
    let mut spread = 0.0f64;
    for (a, xa) in xs.iter().enumerate() {
        for xb in &xs[a + 1..] {
            spread = spread.max((xa - xb).norm());
        }
    }
    spread
}

/// `Σᵢ fᵢ(x) + ½‖x − x̄ᵢ‖²`.
pub fn primal_objective(problem: &ProblemInstance, x: &Vector) -> Result<f64, ModelError> {
    if x.len() != problem.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: problem.dim(),
            actual: x.len(),
        });
    }
    let mut total = 0.0;
    for (f, anchor) in problem.functions().iter().zip(problem.x_bar()) {
        total += f.eval(x)? + 0.5 * (x - anchor).norm_squared();
    }
    Ok(total)
}

/// Per-node affine pieces in a common frame: node `i` contributes
/// `½xᵀAᵢx + (bᵢ + λᵢdᵢ)ᵀx + cᵢ + λᵢδᵢ`, with `λᵢ` free in `[0, 1]` for
/// max-of-quadratics nodes and absent otherwise.
struct Pieces {
    hessian_sum: DMatrix<f64>,
    linear_sum: Vector,
    /// (node, d, δ) for every node with a free weight.
    free: Vec<(usize, Vector, f64)>,
}

fn collect_pieces(problem: &ProblemInstance) -> Pieces {
    let m = problem.dim();
    let mut hessian_sum = DMatrix::zeros(m, m);
    let mut linear_sum = Vector::zeros(m);
    let mut free = Vec::new();
    for (i, f) in problem.functions().iter().enumerate() {
        match f {
            ConvexFunction::Zero => {}
            ConvexFunction::Quadratic(q) => {
                hessian_sum += q.a();
                linear_sum += q.b();
            }
            ConvexFunction::MaxTwoQuadratics(q) => {
                let (b1, c1) = q.first();
                let (b2, c2) = q.second();
                hessian_sum += q.a();
                linear_sum += b2;
                free.push((i, b1 - b2, c1 - c2));
            }
        }
    }
    Pieces {
        hessian_sum,
        linear_sum,
        free,
    }
}

/// Minimizes `½λᵀQλ − pᵀλ` over the unit box. Accelerated projected
/// gradient, finished by an exact solve on the free coordinates once the
/// active set settles.
fn solve_box_qp(
    q: &DMatrix<f64>,
    p: &DVector<f64>,
    start: DVector<f64>,
) -> Result<DVector<f64>, ModelError> {
    let k = p.len();
    if k == 0 {
        return Ok(start);
    }
    let lipschitz = q
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    if lipschitz <= 0.0 {
        // Q = 0: linear objective, minimized at a vertex.
        return Ok(p.map(|v| if v > 0.0 { 1.0 } else { 0.0 }));
    }
    let scale = 1.0 + p.amax() + q.amax();
    let kkt_tol = 1e-12 * scale;
    let project = |v: DVector<f64>| v.map(|x| x.clamp(0.0, 1.0));
    let kkt_ok = |lam: &DVector<f64>| {
        let g = q * lam - p;
        lam.iter().zip(g.iter()).all(|(&l, &gi)| {
            if l <= 0.0 {
                gi >= -kkt_tol
            } else if l >= 1.0 {
                gi <= kkt_tol
            } else {
                gi.abs() <= kkt_tol
            }
        })
    };
    let polish = |lam: &DVector<f64>| -> Option<DVector<f64>> {
        let free: Vec<usize> = (0..k)
            .filter(|&i| lam[i] > 1e-12 && lam[i] < 1.0 - 1e-12)
            .collect();
        let mut fixed = lam.map(|x| if x >= 0.5 { 1.0 } else { 0.0 });
        if free.is_empty() {
            return kkt_ok(&fixed).then_some(fixed);
        }
        let q_ff = DMatrix::from_fn(free.len(), free.len(), |a, b| q[(free[a], free[b])]);
        for &i in &free {
            fixed[i] = 0.0;
        }
        let rhs_full = p - q * &fixed;
        let rhs = DVector::from_fn(free.len(), |a, _| rhs_full[free[a]]);
        let sol = q_ff.lu().solve(&rhs)?;
        let mut cand = fixed;
        for (a, &i) in free.iter().enumerate() {
            cand[i] = sol[a];
        }
        (cand.iter().all(|&x| (0.0..=1.0).contains(&x)) && kkt_ok(&cand)).then_some(cand)
    };

    let step = 1.0 / lipschitz;
    let mut lam = project(start);
    if kkt_ok(&lam) {
        return Ok(lam);
    }
    let mut momentum = lam.clone();
    let mut t = 1.0f64;
    for iter in 1..=REFERENCE_MAX_ITERATIONS {
        let grad = q * &momentum - p;
        let next = project(&momentum - grad * step);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = &next + (&next - &lam) * ((t - 1.0) / t_next);
        let moved = (&next - &lam).amax();
        lam = next;
        t = t_next;
        if iter % 25 == 0 || moved == 0.0 {
            if let Some(done) = polish(&lam) {
                return Ok(done);
            }
            if moved == 0.0 && kkt_ok(&lam) {
                return Ok(lam);
            }
        }
    }
    Err(ModelError::NoConvergence(REFERENCE_MAX_ITERATIONS))
}

/// Norm of `Σᵢ vᵢ + Σᵢ (x − x̄ᵢ)` for the best subgradient selection
/// `vᵢ ∈ ∂fᵢ(x)`. Zero exactly at the optimum.
pub fn kkt_residual(problem: &ProblemInstance, x: &Vector) -> Result<f64, ModelError> {
    let mut base = Vector::zeros(problem.dim());
    for anchor in problem.x_bar() {
        base += x - anchor;
    }
    let mut directions: Vec<Vector> = Vec::new();
    for f in problem.functions() {
        match f {
            ConvexFunction::Zero => {}
            ConvexFunction::Quadratic(q) => base += q.gradient(x),
            ConvexFunction::MaxTwoQuadratics(q) => {
                let (f1, f2) = q.piece_values(x);
                let (g1, g2) = q.piece_gradients(x);
                let tie = 1e-9 * (1.0 + f1.abs().max(f2.abs()));
                if (f1 - f2).abs() <= tie {
                    directions.push(&g1 - &g2);
                    base += g2;
                } else if f1 > f2 {
                    base += g1;
                } else {
                    base += g2;
                }
            }
        }
    }
    if directions.is_empty() {
        return Ok(base.norm());
    }
    // min over λ ∈ [0,1]^k of ½‖base + Dλ‖²
    let d = DMatrix::from_columns(&directions);
    let q = d.transpose() * &d;
    let p = -(d.transpose() * &base);
    let lam = solve_box_qp(&q, &p, DVector::from_element(directions.len(), 0.5))?;
    Ok((base + d * lam).norm())
}

/// The minimizer of the primal problem.
///
/// Instances with a planted optimum return it after the KKT check. Anything
/// else is solved centrally: the objective is a maximum over piece weights
/// `λ ∈ [0,1]^k` of strongly convex quadratics, so the inner minimum is one
/// linear solve and the weights come from a box-constrained quadratic
/// program.
pub fn solve_reference(problem: &ProblemInstance) -> Result<Vector, ModelError> {
    if let Some(x) = problem.known_optimum() {
        let residual = kkt_residual(problem, x)?;
        if residual > crate::problem::KKT_TOLERANCE {
            return Err(ModelError::KktResidual(residual));
        }
        return Ok(x.clone());
    }
    if problem
        .functions()
        .iter()
        .all(|f| *f == ConvexFunction::Zero)
    {
        return Ok(problem.m_bar());
    }
    let m = problem.dim();
    let n = problem.node_count() as f64;
    let pieces = collect_pieces(problem);
    let hessian = pieces.hessian_sum + DMatrix::identity(m, m) * n;
    let chol = hessian
        .cholesky()
        .ok_or_else(|| ModelError::Invalid("aggregate Hessian is not positive definite".into()))?;
    let anchors = problem
        .x_bar()
        .iter()
        .fold(Vector::zeros(m), |acc, x| acc + x);
    let r0 = anchors - pieces.linear_sum;
    if pieces.free.is_empty() {
        return Ok(chol.solve(&r0));
    }
    let d = DMatrix::from_columns(
        &pieces
            .free
            .iter()
            .map(|(_, d, _)| d.clone())
            .collect::<Vec<_>>(),
    );
    let delta = DVector::from_iterator(pieces.free.len(), pieces.free.iter().map(|(_, _, c)| *c));
    let h_inv_d = chol.solve(&d);
    let q = d.transpose() * &h_inv_d;
    let q = (&q + q.transpose()) * 0.5;
    let p = h_inv_d.transpose() * &r0 + delta;
    let lam = solve_box_qp(&q, &p, DVector::from_element(pieces.free.len(), 0.5))?;
    Ok(chol.solve(&(r0 - d * lam)))
}
