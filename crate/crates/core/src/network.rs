//! Road network model, grid synthesis, districts and validation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discharge rate of one lane at a green signal, 1800 veh/h.
pub const SAT_FLOW_PER_LANE_VPS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub signalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_m: f64,
    pub speed_mps: f64,
    pub lanes: u32,
    pub sat_flow_vps: f64,
}

impl Edge {
    pub fn freeflow_s(&self) -> f64 {
        self.length_m / self.speed_mps
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl RoadNetwork {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::parse("network JSON", Some(e.line()), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn index(&self) -> NetworkIndex<'_> {
        NetworkIndex::new(self)
    }

    pub fn signalized_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.signalized)
    }
}

/// Lookup tables over a borrowed network. Incoming and outgoing lists keep
/// the network's edge order.
#[derive(Debug)]
pub struct NetworkIndex<'a> {
    pub net: &'a RoadNetwork,
    nodes: HashMap<&'a str, usize>,
    edges: HashMap<&'a str, usize>,
    incoming: HashMap<&'a str, Vec<usize>>,
    outgoing: HashMap<&'a str, Vec<usize>>,
}

impl<'a> NetworkIndex<'a> {
    fn new(net: &'a RoadNetwork) -> Self {
        let mut incoming: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut outgoing: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut edges = HashMap::new();
        for (i, e) in net.edges.iter().enumerate() {
            edges.entry(e.id.as_str()).or_insert(i);
            incoming.entry(e.to.as_str()).or_default().push(i);
            outgoing.entry(e.from.as_str()).or_default().push(i);
        }
        let mut nodes = HashMap::new();
        for (i, n) in net.nodes.iter().enumerate() {
            nodes.entry(n.id.as_str()).or_insert(i);
        }
        NetworkIndex {
            net,
            nodes,
            edges,
            incoming,
            outgoing,
        }
    }

    pub fn node(&self, id: &str) -> Option<&'a Node> {
        self.nodes.get(id).map(|&i| &self.net.nodes[i])
    }

    pub fn node_pos(&self, id: &str) -> Option<usize> {
        self.nodes.get(id).copied()
    }

    pub fn edge(&self, id: &str) -> Option<&'a Edge> {
        self.edges.get(id).map(|&i| &self.net.edges[i])
    }

    pub fn edge_pos(&self, id: &str) -> Option<usize> {
        self.edges.get(id).copied()
    }

    pub fn incoming(&self, node: &str) -> impl Iterator<Item = &'a Edge> + '_ {
        self.incoming
            .get(node)
            .into_iter()
            .flatten()
            .map(|&i| &self.net.edges[i])
    }

    pub fn outgoing(&self, node: &str) -> impl Iterator<Item = &'a Edge> + '_ {
        self.outgoing
            .get(node)
            .into_iter()
            .flatten()
            .map(|&i| &self.net.edges[i])
    }

    pub fn require_edge(&self, id: &str, param: &str) -> Result<&'a Edge> {
        self.edge(id)
            .ok_or_else(|| Error::invalid(param, format!("unknown edge `{id}`")))
    }
}

/// Builds a `rows` x `cols` lattice with bidirectional edges between
/// neighbours. Interior nodes are signalized.
pub fn generate_grid(rows: u32, cols: u32, spacing_m: f64, speed_mps: f64) -> Result<RoadNetwork> {
    if rows < 2 {
        return Err(Error::invalid("rows", "must be at least 2"));
    }
    if cols < 2 {
        return Err(Error::invalid("cols", "must be at least 2"));
    }
    if !(spacing_m > 0.0 && spacing_m.is_finite()) {
        return Err(Error::invalid("spacing_m", "must be positive"));
    }
    if !(speed_mps > 0.0 && speed_mps.is_finite()) {
        return Err(Error::invalid("speed_mps", "must be positive"));
    }
    let id = |r: u32, c: u32| format!("n_{r}_{c}");
    let mut nodes = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            let interior = r > 0 && r + 1 < rows && c > 0 && c + 1 < cols;
            nodes.push(Node {
                id: id(r, c),
                x: c as f64 * spacing_m,
                y: r as f64 * spacing_m,
                signalized: interior,
            });
        }
    }
    let mut edges = Vec::new();
    let mut link = |a: String, b: String| {
        for (from, to) in [(&a, &b), (&b, &a)] {
            edges.push(Edge {
                id: format!("e_{from}_{to}"),
                from: from.clone(),
                to: to.clone(),
                length_m: spacing_m,
                speed_mps,
                lanes: 1,
                sat_flow_vps: SAT_FLOW_PER_LANE_VPS,
            });
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                link(id(r, c), id(r, c + 1));
            }
            if r + 1 < rows {
                link(id(r, c), id(r + 1, c));
            }
        }
    }
    Ok(RoadNetwork { nodes, edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Empty,
    DuplicateId,
    DanglingEndpoint,
    SelfLoop,
    NonPositiveLength,
    InvalidAttribute,
    NonFiniteCoordinate,
    UnderApproachedSignal,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    fn new(kind: DiagnosticKind, subject: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            subject: subject.to_string(),
            message: message.into(),
        }
    }
}

/// Checks structural soundness. An empty result means the network is valid.
pub fn validate_network(net: &RoadNetwork) -> Vec<Diagnostic> {
    use DiagnosticKind::*;
    let mut out = Vec::new();
    if net.nodes.is_empty() {
        out.push(Diagnostic::new(Empty, "", "network has no nodes"));
        return out;
    }

    let mut seen = HashSet::new();
    for n in &net.nodes {
        if !seen.insert(n.id.as_str()) {
            out.push(Diagnostic::new(DuplicateId, &n.id, "duplicate node id"));
        }
        if !(n.x.is_finite() && n.y.is_finite()) {
            out.push(Diagnostic::new(
                NonFiniteCoordinate,
                &n.id,
                "coordinates must be finite",
            ));
        }
    }
    let mut seen_edges = HashSet::new();
    for e in &net.edges {
        if !seen_edges.insert(e.id.as_str()) {
            out.push(Diagnostic::new(DuplicateId, &e.id, "duplicate edge id"));
        }
        for end in [&e.from, &e.to] {
            if !seen.contains(end.as_str()) {
                out.push(Diagnostic::new(
                    DanglingEndpoint,
                    &e.id,
                    format!("endpoint `{end}` is not a node"),
                ));
            }
        }
        if e.from == e.to {
            out.push(Diagnostic::new(
                SelfLoop,
                &e.id,
                "edge starts and ends at the same node",
            ));
        }
        if !(e.length_m > 0.0 && e.length_m.is_finite()) {
            out.push(Diagnostic::new(
                NonPositiveLength,
                &e.id,
                format!("length_m = {}", e.length_m),
            ));
        }
        if !(e.speed_mps > 0.0 && e.speed_mps.is_finite()) {
            out.push(Diagnostic::new(
                InvalidAttribute,
                &e.id,
                format!("speed_mps = {}", e.speed_mps),
            ));
        }
        if !(e.sat_flow_vps > 0.0 && e.sat_flow_vps.is_finite()) {
            out.push(Diagnostic::new(
                InvalidAttribute,
                &e.id,
                format!("sat_flow_vps = {}", e.sat_flow_vps),
            ));
        }
        if e.lanes == 0 {
            out.push(Diagnostic::new(
                InvalidAttribute,
                &e.id,
                "lanes must be positive",
            ));
        }
    }

    let idx = net.index();
    for n in net.signalized_nodes() {
        let approaches = idx.incoming(&n.id).count();
        if approaches < 2 {
            out.push(Diagnostic::new(
                UnderApproachedSignal,
                &n.id,
                format!("signalized node has {approaches} incoming edge(s), needs 2"),
            ));
        }
    }

    for id in unreachable_nodes(net) {
        out.push(Diagnostic::new(
            Unreachable,
            &id,
            "node cannot be reached from the largest strongly connected component",
        ));
    }
    out
}

/// Nodes not reachable from the largest strongly connected component. Ties
/// between equally large components go to the one holding the smallest id.
fn unreachable_nodes(net: &RoadNetwork) -> Vec<String> {
    let mut graph = DiGraph::<&str, ()>::new();
    let mut pos = HashMap::new();
    for n in &net.nodes {
        pos.entry(n.id.as_str())
            .or_insert_with(|| graph.add_node(n.id.as_str()));
    }
    for e in &net.edges {
        if let (Some(&a), Some(&b)) = (pos.get(e.from.as_str()), pos.get(e.to.as_str())) {
            graph.add_edge(a, b, ());
        }
    }
    let sccs = tarjan_scc(&graph);
    let Some(largest) = sccs.iter().max_by(|a, b| {
        let min_id = |c: &Vec<_>| c.iter().map(|&i| graph[i]).min().unwrap_or("");
        a.len().cmp(&b.len()).then_with(|| min_id(b).cmp(min_id(a)))
    }) else {
        return Vec::new();
    };
    let mut reached = HashSet::new();
    let mut queue: VecDeque<_> = largest.iter().copied().collect();
    reached.extend(largest.iter().copied());
    while let Some(u) = queue.pop_front() {
        for v in graph.neighbors(u) {
            if reached.insert(v) {
                queue.push_back(v);
            }
        }
    }
    let mut out: Vec<String> = graph
        .node_indices()
        .filter(|i| !reached.contains(i))
        .map(|i| graph[i].to_string())
        .collect();
    out.sort();
    out
}

/// Named origin/destination zones, each a set of edges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistrictSet {
    pub districts: BTreeMap<String, Vec<String>>,
}

impl DistrictSet {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::parse("districts JSON", Some(e.line()), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("districts serialize")
    }

    pub fn edges(&self, district: &str) -> Option<&[String]> {
        self.districts.get(district).map(Vec::as_slice)
    }
}

pub fn define_districts(
    net: &RoadNetwork,
    assignments: BTreeMap<String, Vec<String>>,
) -> Result<DistrictSet> {
    if assignments.is_empty() {
        return Err(Error::invalid(
            "assignments",
            "at least one district is required",
        ));
    }
    let known: BTreeSet<&str> = net.edges.iter().map(|e| e.id.as_str()).collect();
    for (name, edges) in &assignments {
        if edges.is_empty() {
            return Err(Error::invalid(
                "assignments",
                format!("district `{name}` is empty"),
            ));
        }
        if let Some(ghost) = edges.iter().find(|e| !known.contains(e.as_str())) {
            return Err(Error::invalid(
                "assignments",
                format!("district `{name}` references unknown edge `{ghost}`"),
            ));
        }
    }
    Ok(DistrictSet {
        districts: assignments,
    })
}
