//! Max-of-two-quadratics objectives kinked at the optimum: the gap decays
//! roughly like 1/k.

use dirdyk::{generate_problem, run, DirectedGraph, ProblemKind, RunConfig, SchedulePolicy};

fn main() {
    let graph = DirectedGraph::two_cycles();
    let problem = generate_problem(ProblemKind::Nonsmooth, 6, graph.clone(), 9).expect("problem");
    let trace = run(
        &problem,
        &RunConfig::new(&graph, 50_000, 9, SchedulePolicy::RoundRobin),
    )
    .expect("run");

    let mut next = 10;
    for row in &trace.rows {
        if row.k == next {
            println!(
                "k = {:6}  gap = {:.4e}  k*gap = {:.4}",
                row.k,
                row.duality_gap,
                row.k as f64 * row.duality_gap
            );
            next *= 2;
        }
    }

    // Log-log slope over the tail.
    let pts: Vec<(f64, f64)> = trace
        .rows
        .iter()
        .filter(|r| r.k >= 5000)
        .map(|r| ((r.k as f64).ln(), r.duality_gap.ln()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    println!("log-log slope over k >= 5000: {:.3}", num / den);
}
