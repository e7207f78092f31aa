//! Plain averaging: with every function zero, each node's ratio converges to
//! the mean of the anchors.

use dirdyk::{generate_problem, run, DirectedGraph, ProblemKind, RunConfig, SchedulePolicy, Site};

fn main() {
    let graph = DirectedGraph::two_cycles();
    let problem = generate_problem(ProblemKind::Consensus, 1, graph.clone(), 8).expect("problem");
    let mean = problem.m_bar()[0];

    let config = RunConfig::new(&graph, 5000, 8, SchedulePolicy::RoundRobin);
    let trace = run(&problem, &config).expect("run");

    for row in trace.rows.iter().filter(|r| r.k % 500 == 0) {
        println!("k = {:5}  spread = {:.3e}", row.k, row.consensus_spread);
    }
    println!("mean of anchors: {mean:.15}");
    for i in 0..graph.node_count() {
        let x = trace
            .final_state
            .local_estimate(Site::Node(i))
            .expect("positive mass")[0];
        println!("node {}: {x:.15}  (off by {:.1e})", i + 1, (x - mean).abs());
    }
}
