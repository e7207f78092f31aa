//! Quadratic objectives: the duality gap falls geometrically.

use dirdyk::{generate_problem, run, DirectedGraph, ProblemKind, RunConfig, SchedulePolicy};

fn main() {
    let graph = DirectedGraph::two_cycles();
    let problem = generate_problem(ProblemKind::Smooth, 6, graph.clone(), 8).expect("problem");
    let trace = run(
        &problem,
        &RunConfig::new(&graph, 1000, 8, SchedulePolicy::RoundRobin),
    )
    .expect("run");

    println!("{:>5} {:>12} {:>12}", "k", "gap", "wdist");
    for row in trace.rows.iter().filter(|r| r.k % 100 == 0) {
        println!(
            "{:5} {:12.4e} {:12.4e}",
            row.k, row.duality_gap, row.weighted_sq_dist
        );
    }
    println!("liveness window respected: {}", trace.liveness);
}
