//! The auxiliary site: splitting mass off a site keeps `Val`, merging it
//! back never raises it.

use dirdyk::potential::val;
use dirdyk::{generate_problem, DirectedGraph, ProblemKind, ProtocolState, Site};

fn main() {
    let graph = DirectedGraph::two_cycles();
    let problem = generate_problem(ProblemKind::Smooth, 3, graph, 4).expect("problem");
    let mut state = ProtocolState::new(&problem);
    for i in 0..6 {
        state.send(i).expect("send");
        state.dual_step(i, &problem).expect("dual step");
    }
    state.receive(0).expect("receive");

    let before = val(&state, &problem);
    let s = state.mass(Site::Node(1)).1;
    state.split(Site::Node(1), 0.4 * s).expect("split");
    let split = val(&state, &problem);
    println!("Val before split  {before:.12}");
    println!("Val after split   {split:.12}");

    // Recombining into another site is allowed and can only lower Val.
    state.combine(Site::Edge(3)).expect("combine");
    let merged = val(&state, &problem);
    println!(
        "Val after merging into edge 4: {merged:.12}  (drop {:.3e})",
        split - merged
    );
    let (ds, dy) = state.conservation_error();
    println!("conservation error: s {ds:.1e}, y {dy:.1e}");
}
