//! Shortest paths against exhaustive enumeration of simple paths.

use proptest::prelude::*;

use trafficmcp_core::routing::{route_cost, Router};
use trafficmcp_core::{Edge, Node, RoadNetwork};

const MAX_NODES: usize = 6;

fn network(n: usize, raw: &[(usize, usize, u8, u8)]) -> RoadNetwork {
    let nodes = (0..n)
        .map(|i| Node {
            id: format!("n{i}"),
            x: i as f64,
            y: 0.0,
            signalized: false,
        })
        .collect();
    let speeds = [1.0, 2.0, 4.0, 5.0, 10.0];
    let edges = raw
        .iter()
        .enumerate()
        .filter(|(_, (a, b, _, _))| a % n != b % n)
        .map(|(i, &(a, b, len, sp))| Edge {
            id: format!("e{:02}", i),
            from: format!("n{}", a % n),
            to: format!("n{}", b % n),
            length_m: (1 + len % 8) as f64 * 10.0,
            speed_mps: speeds[sp as usize % speeds.len()],
            lanes: 1,
            sat_flow_vps: 0.5,
        })
        .collect();
    RoadNetwork { nodes, edges }
}

/// Minimum over every simple path of `(cost, edge-id sequence)`.
fn brute_force(net: &RoadNetwork, from: &str, to: &str) -> Option<(f64, Vec<String>)> {
    fn walk(
        net: &RoadNetwork,
        at: &str,
        to: &str,
        visited: &mut Vec<String>,
        path: &mut Vec<String>,
        best: &mut Option<(f64, Vec<String>)>,
    ) {
        if at == to {
            let cost = route_cost(net, path).unwrap();
            let better = match best {
                None => true,
                Some((c, p)) => cost < *c || (cost == *c && path < p),
            };
            if better {
                *best = Some((cost, path.clone()));
            }
            return;
        }
        for e in net.edges.iter().filter(|e| e.from == at) {
            if visited.contains(&e.to) {
                continue;
            }
            visited.push(e.to.clone());
            path.push(e.id.clone());
            walk(net, &e.to, to, visited, path, best);
            path.pop();
            visited.pop();
        }
    }
    let mut best = None;
    walk(
        net,
        from,
        to,
        &mut vec![from.to_string()],
        &mut Vec::new(),
        &mut best,
    );
    best
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn router_matches_exhaustive_search(
        n in 2..=MAX_NODES,
        raw in prop::collection::vec((0usize..MAX_NODES, 0usize..MAX_NODES, any::<u8>(), any::<u8>()), 1..16),
    ) {
        let net = network(n, &raw);
        let mut router = Router::new(&net);
        for a in &net.nodes {
            for b in &net.nodes {
                if a.id == b.id {
                    continue;
                }
                let got = router.shortest_path(&a.id, &b.id);
                let want = brute_force(&net, &a.id, &b.id);
                match (&got, &want) {
                    (Some((gc, gp)), Some((wc, wp))) => {
                        prop_assert_eq!(gc, wc);
                        prop_assert_eq!(gp, wp);
                        prop_assert_eq!(route_cost(&net, gp), Some(*gc));
                    }
                    (None, None) => {}
                    _ => prop_assert!(false, "{} -> {}: router {:?}, brute force {:?}", a.id, b.id, got, want),
                }
            }
        }
    }
}

#[test]
fn parallel_equal_cost_edges_break_ties_by_id() {
    let net = network(2, &[(0, 1, 3, 0), (0, 1, 3, 0), (0, 1, 3, 0)]);
    let (_, path) = Router::new(&net).shortest_path("n0", "n1").unwrap();
    assert_eq!(path, ["e00"]);
}

#[test]
fn equal_cost_detours_break_ties_lexicographically() {
    // n0 -> n1 -> n3 and n0 -> n2 -> n3 both cost 20 s.
    let net = RoadNetwork {
        nodes: (0..4)
            .map(|i| Node {
                id: format!("n{i}"),
                x: 0.0,
                y: 0.0,
                signalized: false,
            })
            .collect(),
        edges: [
            ("b", "n0", "n1"),
            ("z", "n1", "n3"),
            ("a", "n0", "n2"),
            ("y", "n2", "n3"),
        ]
        .iter()
        .map(|(id, f, t)| Edge {
            id: id.to_string(),
            from: f.to_string(),
            to: t.to_string(),
            length_m: 100.0,
            speed_mps: 10.0,
            lanes: 1,
            sat_flow_vps: 0.5,
        })
        .collect(),
    };
    let (cost, path) = Router::new(&net).shortest_path("n0", "n3").unwrap();
    assert_eq!(cost, 20.0);
    assert_eq!(path, ["a", "y"]);
}
