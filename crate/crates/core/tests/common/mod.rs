#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use trafficmcp_core::demand::{random_trips, RoutePlan, TripTable};
use trafficmcp_core::network::generate_grid;
use trafficmcp_core::routing::route_trips;
use trafficmcp_core::signal::{default_phase_groups, fixed_plan, SignalController, SignalPlan};
use trafficmcp_core::sim::{run_simulation, SimConfig, SimOutput};
use trafficmcp_core::{Edge, Node, RoadNetwork};

pub fn node(id: &str, x: f64, y: f64, signalized: bool) -> Node {
    Node {
        id: id.into(),
        x,
        y,
        signalized,
    }
}

pub fn edge(id: &str, from: &str, to: &str, length_m: f64, speed_mps: f64) -> Edge {
    Edge {
        id: id.into(),
        from: from.into(),
        to: to.into(),
        length_m,
        speed_mps,
        lanes: 1,
        sat_flow_vps: 0.5,
    }
}

/// West-east arterial `w -> j0 -> ... -> j{n-1} -> e` with a side street
/// feeding each junction from the south. Main edges are `m{i}` (into
/// `j{i}`), side edges `c{i}`, exit edge `out`.
pub fn arterial(n: usize, spacing_m: f64, speed_mps: f64) -> RoadNetwork {
    let mut nodes = vec![node("w", -spacing_m, 0.0, false)];
    let mut edges = Vec::new();
    for i in 0..n {
        let x = i as f64 * spacing_m;
        let j = format!("j{i}");
        nodes.push(node(&j, x, 0.0, true));
        nodes.push(node(&format!("s{i}"), x, -spacing_m, false));
        let prev = if i == 0 {
            "w".to_string()
        } else {
            format!("j{}", i - 1)
        };
        edges.push(edge(&format!("m{i}"), &prev, &j, spacing_m, speed_mps));
        edges.push(edge(
            &format!("c{i}"),
            &format!("s{i}"),
            &j,
            spacing_m,
            speed_mps,
        ));
    }
    nodes.push(node("e", n as f64 * spacing_m, 0.0, false));
    edges.push(edge(
        "out",
        &format!("j{}", n - 1),
        "e",
        spacing_m,
        speed_mps,
    ));
    RoadNetwork { nodes, edges }
}

pub fn arterial_plans(n: usize, cycle: u32) -> Vec<SignalPlan> {
    (0..n)
        .map(|i| {
            let groups = vec![
                BTreeSet::from([format!("m{i}")]),
                BTreeSet::from([format!("c{i}")]),
            ];
            fixed_plan(&format!("j{i}"), groups, cycle, 4).unwrap()
        })
        .collect()
}

pub fn static_controllers(plans: &[SignalPlan]) -> BTreeMap<String, SignalController> {
    plans
        .iter()
        .map(|p| (p.junction.clone(), SignalController::Static(p.clone())))
        .collect()
}

pub fn equal_split(net: &RoadNetwork, cycle: u32) -> Vec<SignalPlan> {
    net.signalized_nodes()
        .map(|n| fixed_plan(&n.id, default_phase_groups(net, &n.id).unwrap(), cycle, 4).unwrap())
        .collect()
}

pub struct Scenario {
    pub net: RoadNetwork,
    pub trips: TripTable,
    pub routes: RoutePlan,
    pub plans: Vec<SignalPlan>,
}

/// `n x n` grid with `count` random trips over one hour.
pub fn random_grid(n: u32, count: usize, seed: u64) -> Scenario {
    let net = generate_grid(n, n, 200.0, 13.9).unwrap();
    let trips = random_trips(&net, count, seed, 0.0, 3600.0).unwrap();
    let outcome = route_trips(&net, &trips);
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
    let plans = equal_split(&net, 60);
    Scenario {
        net,
        trips,
        routes: outcome.plan,
        plans,
    }
}

impl Scenario {
    pub fn run(&self, config: &SimConfig) -> SimOutput {
        run_simulation(
            &self.net,
            &self.trips,
            &self.routes,
            &static_controllers(&self.plans),
            config,
        )
        .unwrap()
    }
}

pub fn assert_conservation_and_delay(out: &SimOutput) {
    let t = &out.totals;
    assert_eq!(t.inserted, t.arrived + t.active, "conservation");
    assert_eq!(out.vehicles.len() as u64, t.inserted);
    for v in &out.vehicles {
        assert!(v.waiting_s >= 0.0, "{}: negative waiting", v.id);
        if let Some(d) = v.delay_s() {
            assert!(
                d + 1e-9 >= v.waiting_s,
                "{}: delay {d} < waiting {}",
                v.id,
                v.waiting_s
            );
        }
    }
}
