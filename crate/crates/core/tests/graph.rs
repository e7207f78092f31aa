use dirdyk::DirectedGraph;

/// Strong connectivity by transitive closure over bit rows.
fn closure_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut reach: Vec<u32> = (0..n).map(|i| 1 << i).collect();
    for &(a, b) in edges {
        reach[a] |= 1 << b;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i] & (1 << k) != 0 {
                reach[i] |= reach[k];
            }
        }
    }
    let full = (1u32 << n) - 1;
    reach.iter().all(|&r| r == full)
}

#[test]
fn strong_connectivity_matches_closure_on_all_small_graphs() {
    for n in 1..=5usize {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        let mut connected = 0u32;
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &e)| e)
                .collect();
            let expected = closure_connected(n, &edges);
            let g = DirectedGraph::new(n, edges).unwrap();
            assert_eq!(
                g.is_strongly_connected(),
                expected,
                "n = {n}, mask = {mask:b}"
            );
            connected += expected as u32;
        }
        // Labelled strongly connected digraphs on n nodes (OEIS A003030).
        assert_eq!(connected, [1, 1, 18, 1606, 565080][n - 1], "n = {n}");
    }
}

#[test]
fn degrees_and_adjacency_agree() {
    let g = DirectedGraph::two_cycles();
    let total: usize = (0..g.node_count()).map(|i| g.out_degree(i).unwrap()).sum();
    assert_eq!(total, g.edge_count());
    for (idx, &(a, b)) in g.edges().iter().enumerate() {
        assert!(g.out_edges(a).contains(&idx));
        assert!(g.in_edges(b).contains(&idx));
    }
    assert_eq!(g.max_out_degree(), 2);
}
