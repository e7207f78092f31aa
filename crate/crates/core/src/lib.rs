//! # dirdyk
//!
//! Asynchronous dual ascent for distributed optimization over a directed
//! graph whose links may delay messages arbitrarily (but never drop them).
//!
//! Every node `i` holds a private closed convex function `fᵢ` and an anchor
//! `x̄ᵢ`, and the network jointly solves
//!
//! ```text
//! min_x  Σᵢ fᵢ(x) + ½‖x − x̄ᵢ‖²
//! ```
//!
//! Nodes run a push-sum style mass exchange (send, receive) interleaved with
//! local proximal steps on their own functions. Each node's ratio `yᵢ/sᵢ`
//! converges to the minimizer. A dual objective evaluated on the network
//! snapshot, `Val`, never increases, and the duality gap bounds the weighted
//! distance of every local estimate to the optimum.
//!
//! ## Layout
//!
//! * [`graph`]: directed graphs and strong connectivity.
//! * [`oracle`]: zero, quadratic and max-of-two-quadratics functions with
//!   their proximal maps and conjugates.
//! * [`problem`], [`generate`], [`io`]: problem instances, random instances
//!   with a planted optimum, and the JSON file format.
//! * [`protocol`]: the per-node state and the send / receive / dual-step
//!   operations, plus the split / combine operations used to check `Val`.
//! * [`potential`]: `Val`, the duality gap, the weighted squared distance and
//!   a centralized reference solver.
//! * [`simulator`]: seeded schedulers, the run loop and CSV traces.
//! * [`experiment`]: presets and config-driven runs, used by the `dirdyk`
//!   binary.
//!
//! ## Example
//!
//! ```
//! use dirdyk::{generate_problem, run, DirectedGraph, ProblemKind, RunConfig, SchedulePolicy};
//!
//! let graph = DirectedGraph::two_cycles();
//! let problem = generate_problem(ProblemKind::Consensus, 1, graph.clone(), 7).unwrap();
//! let config = RunConfig::new(&graph, 2000, 7, SchedulePolicy::RoundRobin);
//! let trace = run(&problem, &config).unwrap();
//! assert!(trace.rows.last().unwrap().consensus_spread < 1e-9);
//! ```
//!
//! See the crate's `examples/` directory for one runnable program per
//! capability.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod generate;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod potential;
pub mod problem;
pub mod protocol;
pub mod simulator;

pub use error::{ModelError, ProtocolError};
pub use generate::{generate_problem, ProblemKind};
pub use graph::DirectedGraph;
pub use oracle::{ConvexFunction, Matrix, MaxOfQuadratics, QuadraticForm, Vector};
pub use potential::Diagnostics;
pub use problem::ProblemInstance;
pub use protocol::{Event, ProtocolState, Site};
pub use simulator::{check_liveness, run, RunConfig, SchedulePolicy, SimError, Trace, TraceRow};
