#![allow(dead_code)]

pub mod grid;

use dirdyk::{
    ConvexFunction, DirectedGraph, Event, Matrix, MaxOfQuadratics, ProblemInstance, ProtocolState,
    Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(m, |_, _| rng.random_range(lo..hi))
}

/// `wwᵀ + rI` with the ridge kept away from zero.
pub fn hessian(rng: &mut ChaCha8Rng, m: usize, min_ridge: f64) -> Matrix {
    let w = uniform(rng, m, 0.0, 1.0);
    let r = rng.random_range(min_ridge..1.0);
    &w * w.transpose() + Matrix::identity(m, m) * r
}

pub fn random_max(rng: &mut ChaCha8Rng, m: usize) -> MaxOfQuadratics {
    let a = hessian(rng, m, 0.05);
    let b1 = uniform(rng, m, -2.0, 2.0);
    let b2 = uniform(rng, m, -2.0, 2.0);
    let c1 = rng.random_range(-1.0..1.0);
    let c2 = rng.random_range(-1.0..1.0);
    MaxOfQuadratics::new(a, b1, c1, b2, c2).unwrap()
}

/// Random legal event.
pub fn random_event(rng: &mut ChaCha8Rng, graph: &DirectedGraph) -> Event {
    match rng.random_range(0..3) {
        0 => Event::Send(rng.random_range(0..graph.node_count())),
        1 => Event::Receive(rng.random_range(0..graph.edge_count())),
        _ => Event::DualStep(rng.random_range(0..graph.node_count())),
    }
}

/// State reached by a random legal schedule of the given length. Sends that
/// would take a node below `1e-6` are replaced by dual steps.
pub fn random_state(
    rng: &mut ChaCha8Rng,
    problem: &ProblemInstance,
    steps: usize,
) -> ProtocolState {
    let graph = problem.graph();
    let mut state = ProtocolState::new(problem);
    for _ in 0..steps {
        let mut ev = random_event(rng, graph);
        if let Event::Send(i) = ev {
            let deg = graph.out_degree(i).unwrap() as f64;
            if state.node(i).s / (deg + 1.0) < 1e-6 {
                ev = Event::DualStep(i);
            }
        }
        state.apply(ev, problem).unwrap();
    }
    state
}

pub fn is_zero(f: &ConvexFunction) -> bool {
    matches!(f, ConvexFunction::Zero)
}
