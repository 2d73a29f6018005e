//! Free-flow shortest-path routing of trips.
//!
//! Edge cost is `length_m / speed_mps`. Among equal-cost paths the one whose
//! edge-id sequence is lexicographically smallest wins. Labels are compared
//! on `(cost, edge-id sequence)`, which is preserved under extension when
//! edge costs are positive, so plain label-setting search yields that path.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::demand::{RoutePlan, TripTable};
use crate::network::RoadNetwork;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteFailure {
    pub trip: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoutingOutcome {
    pub plan: RoutePlan,
    pub failures: Vec<RouteFailure>,
}

/// Shortest-path trees computed on demand and cached per origin node.
pub struct Router<'a> {
    net: &'a RoadNetwork,
    /// Position of each edge when edges are sorted by id.
    rank: Vec<usize>,
    node_pos: HashMap<&'a str, usize>,
    edge_pos: HashMap<&'a str, usize>,
    out: Vec<Vec<usize>>,
    head: Vec<usize>,
    cost: Vec<f64>,
    trees: HashMap<usize, Tree>,
}

struct Tree {
    best: Vec<Option<(f64, Vec<usize>)>>,
}

struct Label {
    cost: f64,
    ranks: Vec<usize>,
    edges: Vec<usize>,
    node: usize,
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Label {}
impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Label {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.ranks.cmp(&self.ranks))
    }
}

impl<'a> Router<'a> {
    pub fn new(net: &'a RoadNetwork) -> Self {
        let mut order: Vec<usize> = (0..net.edges.len()).collect();
        order.sort_by(|&a, &b| net.edges[a].id.cmp(&net.edges[b].id));
        let mut rank = vec![0; net.edges.len()];
        for (r, &e) in order.iter().enumerate() {
            rank[e] = r;
        }
        let node_pos: HashMap<&str, usize> = net
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut out = vec![Vec::new(); net.nodes.len()];
        let mut head = vec![usize::MAX; net.edges.len()];
        for (i, e) in net.edges.iter().enumerate() {
            if let (Some(&a), Some(&b)) =
                (node_pos.get(e.from.as_str()), node_pos.get(e.to.as_str()))
            {
                out[a].push(i);
                head[i] = b;
            }
        }
        Router {
            net,
            rank,
            node_pos,
            edge_pos: net
                .edges
                .iter()
                .enumerate()
                .map(|(i, e)| (e.id.as_str(), i))
                .collect(),
            out,
            head,
            cost: net.edges.iter().map(|e| e.freeflow_s()).collect(),
            trees: HashMap::new(),
        }
    }

    fn tree(&mut self, origin: usize) -> &Tree {
        if !self.trees.contains_key(&origin) {
            let tree = self.search(origin);
            self.trees.insert(origin, tree);
        }
        &self.trees[&origin]
    }

    fn better(&self, a: (f64, &[usize]), b: (f64, &[usize])) -> bool {
        match a.0.total_cmp(&b.0) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => {
                let ra = a.1.iter().map(|&e| self.rank[e]);
                let rb = b.1.iter().map(|&e| self.rank[e]);
                ra.lt(rb)
            }
        }
    }

    fn search(&self, origin: usize) -> Tree {
        let n = self.net.nodes.len();
        let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        best[origin] = Some((0.0, Vec::new()));
        heap.push(Label {
            cost: 0.0,
            ranks: Vec::new(),
            edges: Vec::new(),
            node: origin,
        });
        while let Some(label) = heap.pop() {
            if settled[label.node] {
                continue;
            }
            settled[label.node] = true;
            for &e in &self.out[label.node] {
                let v = self.head[e];
                if settled[v] {
                    continue;
                }
                let cost = label.cost + self.cost[e];
                let mut edges = label.edges.clone();
                edges.push(e);
                let improves = match &best[v] {
                    None => true,
                    Some((c, path)) => self.better((cost, &edges), (*c, path)),
                };
                if improves {
                    let mut ranks = label.ranks.clone();
                    ranks.push(self.rank[e]);
                    best[v] = Some((cost, edges.clone()));
                    heap.push(Label {
                        cost,
                        ranks,
                        edges,
                        node: v,
                    });
                }
            }
        }
        Tree { best }
    }

    /// Cheapest path between two nodes as `(cost, edge ids)`.
    pub fn shortest_path(&mut self, from_node: &str, to_node: &str) -> Option<(f64, Vec<String>)> {
        let a = *self.node_pos.get(from_node)?;
        let b = *self.node_pos.get(to_node)?;
        let net = self.net;
        let (cost, edges) = self.tree(a).best[b].clone()?;
        Some((
            cost,
            edges.into_iter().map(|e| net.edges[e].id.clone()).collect(),
        ))
    }

    /// Full route from one edge to another: the given edges plus the cheapest
    /// connection between them.
    pub fn route(&mut self, from_edge: &str, to_edge: &str) -> Result<Vec<String>, String> {
        let net = self.net;
        let find = |id: &str| self.edge_pos.get(id).map(|&i| &net.edges[i]);
        let from = find(from_edge).ok_or_else(|| format!("unknown edge `{from_edge}`"))?;
        let to = find(to_edge).ok_or_else(|| format!("unknown edge `{to_edge}`"))?;
        if from.id == to.id {
            return Err("origin and destination edge are the same".into());
        }
        let (_, middle) = self
            .shortest_path(&from.to, &to.from)
            .ok_or_else(|| format!("no path from `{from_edge}` to `{to_edge}`"))?;
        let mut route = Vec::with_capacity(middle.len() + 2);
        route.push(from.id.clone());
        route.extend(middle);
        route.push(to.id.clone());
        Ok(route)
    }
}

/// Routes every trip. Trips that cannot be routed are listed in
/// `failures`; the rest are still planned.
pub fn route_trips(net: &RoadNetwork, trips: &TripTable) -> RoutingOutcome {
    let mut router = Router::new(net);
    let mut outcome = RoutingOutcome::default();
    for t in &trips.trips {
        match router.route(&t.from_edge, &t.to_edge) {
            Ok(route) => {
                outcome.plan.routes.insert(t.id.clone(), route);
            }
            Err(reason) => outcome.failures.push(RouteFailure {
                trip: t.id.clone(),
                reason,
            }),
        }
    }
    outcome
}

/// Sum of free-flow edge times along a route, accumulated left to right.
pub fn route_cost(net: &RoadNetwork, route: &[String]) -> Option<f64> {
    let idx = net.index();
    route
        .iter()
        .try_fold(0.0, |acc, id| Some(acc + idx.edge(id)?.freeflow_s()))
}

/// Checks that consecutive edges share a node and the route matches the trip.
pub fn route_is_connected(net: &RoadNetwork, route: &[String]) -> bool {
    let idx = net.index();
    route
        .windows(2)
        .all(|w| match (idx.edge(&w[0]), idx.edge(&w[1])) {
            (Some(a), Some(b)) => a.to == b.from,
            _ => false,
        })
        && route.iter().all(|e| idx.edge(e).is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Trip;
    use crate::network::{Edge, Node};

    fn node(id: &str) -> Node {
        Node {
            id: id.into(),
            x: 0.0,
            y: 0.0,
            signalized: false,
        }
    }

    fn edge(id: &str, from: &str, to: &str, length_m: f64) -> Edge {
        Edge {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length_m,
            speed_mps: 10.0,
            lanes: 1,
            sat_flow_vps: 0.5,
        }
    }

    fn trip(id: &str, from: &str, to: &str) -> TripTable {
        TripTable {
            trips: vec![Trip {
                id: id.into(),
                depart_s: 0.0,
                from_edge: from.into(),
                to_edge: to.into(),
            }],
        }
    }

    #[test]
    fn triangle_prefers_two_short_hops() {
        // s->A feeds the triangle, C->t leaves it.
        let net = RoadNetwork {
            nodes: ["s", "A", "B", "C", "t"].map(node).to_vec(),
            edges: vec![
                edge("in", "s", "A", 10.0),
                edge("AB", "A", "B", 100.0),
                edge("BC", "B", "C", 100.0),
                edge("AC", "A", "C", 250.0),
                edge("out", "C", "t", 10.0),
            ],
        };
        let out = route_trips(&net, &trip("x", "in", "out"));
        assert_eq!(out.plan.routes["x"], ["in", "AB", "BC", "out"]);
        assert_eq!(route_cost(&net, &out.plan.routes["x"]), Some(22.0));
    }

    #[test]
    fn adjacent_edges_make_a_two_edge_route() {
        let net = RoadNetwork {
            nodes: ["a", "b", "c"].map(node).to_vec(),
            edges: vec![edge("ab", "a", "b", 50.0), edge("bc", "b", "c", 50.0)],
        };
        let out = route_trips(&net, &trip("x", "ab", "bc"));
        assert_eq!(out.plan.routes["x"], ["ab", "bc"]);
    }

    #[test]
    fn equal_cost_parallel_edges_pick_smallest_id() {
        let net = RoadNetwork {
            nodes: ["s", "u", "v", "t"].map(node).to_vec(),
            edges: vec![
                edge("in", "s", "u", 10.0),
                edge("b", "u", "v", 100.0),
                edge("a", "u", "v", 100.0),
                edge("out", "v", "t", 10.0),
            ],
        };
        let out = route_trips(&net, &trip("x", "in", "out"));
        assert_eq!(out.plan.routes["x"], ["in", "a", "out"]);
    }

    #[test]
    fn unroutable_trip_is_collected_not_fatal() {
        let net = RoadNetwork {
            nodes: ["a", "b", "c", "d"].map(node).to_vec(),
            edges: vec![
                edge("ab", "a", "b", 50.0),
                edge("cd", "c", "d", 50.0),
                edge("bc", "b", "c", 50.0),
            ],
        };
        let trips = TripTable {
            trips: vec![
                Trip {
                    id: "ok".into(),
                    depart_s: 0.0,
                    from_edge: "ab".into(),
                    to_edge: "cd".into(),
                },
                Trip {
                    id: "bad".into(),
                    depart_s: 1.0,
                    from_edge: "cd".into(),
                    to_edge: "ab".into(),
                },
            ],
        };
        let out = route_trips(&net, &trips);
        assert_eq!(out.plan.routes.len(), 1);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].trip, "bad");
        assert!(route_is_connected(&net, &out.plan.routes["ok"]));
    }
}
