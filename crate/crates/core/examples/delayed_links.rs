//! Every link holds back its deliveries: an edge only delivers on every
//! tenth time the scheduler picks it. Consensus still arrives, later.

use dirdyk::{generate_problem, run, DirectedGraph, ProblemKind, RunConfig, SchedulePolicy};

fn main() {
    let graph = DirectedGraph::two_cycles();
    let problem = generate_problem(ProblemKind::Consensus, 1, graph.clone(), 8).expect("problem");

    for delay in [1, 10, 50] {
        let config = RunConfig::new(
            &graph,
            50_000,
            8,
            SchedulePolicy::AdversarialDelay { delay },
        );
        let trace = run(&problem, &config).expect("run");
        let reached = trace
            .rows
            .iter()
            .find(|r| r.consensus_spread <= 1e-6)
            .map(|r| r.k);
        println!(
            "delay {delay:3}: spread <= 1e-6 first at k = {:?}, final spread {:.2e}",
            reached,
            trace.rows.last().unwrap().consensus_spread
        );
    }
}
