//! Writing a problem to JSON, reading it back and checking the planted
//! optimum against the centralized solver.

use dirdyk::io::{load_problem, save_problem};
use dirdyk::potential::{kkt_residual, primal_objective, solve_reference};
use dirdyk::{generate_problem, DirectedGraph, ProblemKind};

fn main() {
    let graph = DirectedGraph::ring(4).expect("graph");
    let problem = generate_problem(ProblemKind::Nonsmooth, 2, graph, 3).expect("problem");

    let path = std::env::temp_dir().join("dirdyk-problem.json");
    save_problem(&problem, &path).expect("save");
    let loaded = load_problem(&path).expect("load");
    assert_eq!(loaded, problem);
    println!("round trip through {} ok", path.display());

    let x = solve_reference(&loaded).expect("solve");
    let planted = loaded.known_optimum().expect("planted optimum");
    println!("reference solution {:?}", x.as_slice());
    println!("distance to planted optimum {:.2e}", (&x - planted).norm());
    println!(
        "KKT residual {:.2e}",
        kkt_residual(&loaded, &x).expect("kkt")
    );
    println!(
        "objective {:.12}",
        primal_objective(&loaded, &x).expect("objective")
    );
}
