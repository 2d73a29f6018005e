//! Travel demand: random trips, OD-matrix expansion and turn-ratio routes.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DistrictSet, RoadNetwork};
use crate::rng::{DetRng, Stream};

/// Redraw budget for random trips, as a multiple of the requested count.
pub const RANDOM_TRIP_RETRY_FACTOR: usize = 10;
pub const MAX_TURN_HOPS: usize = 100;
const RATIO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: String,
    pub depart_s: f64,
    #[serde(rename = "from")]
    pub from_edge: String,
    #[serde(rename = "to")]
    pub to_edge: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TripTable {
    pub trips: Vec<Trip>,
}

impl TripTable {
    /// Orders trips by departure (stable) and checks id uniqueness.
    pub fn new(mut trips: Vec<Trip>) -> Result<Self> {
        trips.sort_by(|a, b| a.depart_s.total_cmp(&b.depart_s));
        let mut seen = HashSet::new();
        for t in &trips {
            if !seen.insert(t.id.as_str()) {
                return Err(Error::invalid(
                    "trips",
                    format!("duplicate trip id `{}`", t.id),
                ));
            }
            if !(t.depart_s >= 0.0 && t.depart_s.is_finite()) {
                return Err(Error::invalid(
                    "trips",
                    format!("trip `{}` has invalid depart_s", t.id),
                ));
            }
        }
        Ok(TripTable { trips })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: TripTable = serde_json::from_str(text)
            .map_err(|e| Error::parse("trips JSON", Some(e.line()), e.to_string()))?;
        TripTable::new(raw.trips)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trips serialize")
    }

    pub fn len(&self) -> usize {
        self.trips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trips.is_empty()
    }
}

/// Sequentially numbered ids in departure order.
fn number(mut trips: Vec<(f64, String, String)>, prefix: &str) -> TripTable {
    trips.sort_by(|a, b| a.0.total_cmp(&b.0));
    TripTable {
        trips: trips
            .into_iter()
            .enumerate()
            .map(|(i, (depart_s, from_edge, to_edge))| Trip {
                id: format!("{prefix}{i}"),
                depart_s,
                from_edge,
                to_edge,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdCell {
    pub origin: String,
    pub destination: String,
    pub vehicles: u32,
    pub begin_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OdMatrix {
    pub cells: Vec<OdCell>,
}

pub const OD_CSV_HEADER: [&str; 5] = ["origin", "destination", "vehicles", "begin_s", "end_s"];

impl OdMatrix {
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::parse("OD CSV", Some(1), e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != OD_CSV_HEADER {
            return Err(Error::parse(
                "OD CSV",
                Some(1),
                format!("header must be `{}`", OD_CSV_HEADER.join(",")),
            ));
        }
        let mut cells = Vec::new();
        for row in reader.deserialize::<OdCell>() {
            let cell = row.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize);
                Error::parse("OD CSV", line, e.to_string())
            })?;
            let line = cells.len() + 2;
            if !(cell.begin_s >= 0.0 && cell.begin_s < cell.end_s) {
                return Err(Error::parse(
                    "OD CSV",
                    Some(line),
                    "begin_s must be >= 0 and < end_s",
                ));
            }
            cells.push(cell);
        }
        Ok(OdMatrix { cells })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(OD_CSV_HEADER).expect("in-memory write");
        for c in &self.cells {
            w.serialize((&c.origin, &c.destination, c.vehicles, c.begin_s, c.end_s))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn total_vehicles(&self) -> u64 {
        self.cells.iter().map(|c| c.vehicles as u64).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub routes: BTreeMap<String, Vec<String>>,
}

impl RoutePlan {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::parse("routes JSON", Some(e.line()), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("routes serialize")
    }
}

/// Probability of leaving each incoming edge by each outgoing edge.
pub type TurnRatios = BTreeMap<String, BTreeMap<String, f64>>;

/// `reach[a][b]`: node `b` is reachable from node `a` (reflexive).
fn node_reachability(net: &RoadNetwork) -> Vec<Vec<bool>> {
    let idx = net.index();
    let n = net.nodes.len();
    let succ: Vec<Vec<usize>> = net
        .nodes
        .iter()
        .map(|node| {
            idx.outgoing(&node.id)
                .filter_map(|e| idx.node_pos(&e.to))
                .collect()
        })
        .collect();
    (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &succ[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Draws `count` trips with origin and destination edges weighted by length
/// and departures uniform on `[begin_s, end_s)`. Pairs without a connecting
/// path are redrawn, up to [`RANDOM_TRIP_RETRY_FACTOR`]` * count` times.
///
/// Draw order per attempt: origin, destination, then departure if accepted.
pub fn random_trips(
    net: &RoadNetwork,
    count: usize,
    seed: u64,
    begin_s: f64,
    end_s: f64,
) -> Result<TripTable> {
    if count == 0 {
        return Err(Error::invalid("count", "must be positive"));
    }
    if !(begin_s >= 0.0 && begin_s < end_s) {
        return Err(Error::invalid("end_s", "need 0 <= begin_s < end_s"));
    }
    if net.edges.len() < 2 {
        return Err(Error::invalid("network", "needs at least two edges"));
    }
    let idx = net.index();
    let reach = node_reachability(net);
    let node_of = |id: &str| idx.node_pos(id);
    let mut cumulative = Vec::with_capacity(net.edges.len());
    let mut total = 0.0;
    for e in &net.edges {
        total += e.length_m.max(0.0);
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(Error::invalid("network", "edges have no length"));
    }

    let mut rng = DetRng::new(seed, Stream::RandomTrips);
    let budget = RANDOM_TRIP_RETRY_FACTOR * count;
    let mut redraws = 0;
    let mut rejected = Vec::new();
    let mut trips = Vec::with_capacity(count);
    while trips.len() < count {
        let o = &net.edges[rng.weighted(&cumulative)];
        let d = &net.edges[rng.weighted(&cumulative)];
        let routable = o.id != d.id
            && match (node_of(&o.to), node_of(&d.from)) {
                (Some(a), Some(b)) => reach[a][b],
                _ => false,
            };
        if routable {
            trips.push((rng.uniform(begin_s, end_s), o.id.clone(), d.id.clone()));
            continue;
        }
        redraws += 1;
        if o.id != d.id && rejected.len() < 10 {
            rejected.push((o.id.clone(), d.id.clone()));
        }
        if redraws > budget {
            return Err(Error::Unroutable {
                message: format!(
                    "gave up after {redraws} redraws with {} of {count} trips placed",
                    trips.len()
                ),
                pairs: rejected,
            });
        }
    }
    Ok(number(trips, "r"))
}

/// Expands every OD cell into exactly `vehicles` trips with uniformly chosen
/// district edges and departures.
pub fn od_to_trips(od: &OdMatrix, districts: &DistrictSet, seed: u64) -> Result<TripTable> {
    let mut rng = DetRng::new(seed, Stream::OdTrips);
    let mut trips = Vec::with_capacity(od.total_vehicles() as usize);
    for (i, cell) in od.cells.iter().enumerate() {
        let lookup = |name: &str| {
            districts
                .edges(name)
                .filter(|e| !e.is_empty())
                .ok_or_else(|| {
                    Error::invalid(
                        "od",
                        format!(
                            "cell {i} ({}->{}): unknown district `{name}`",
                            cell.origin, cell.destination
                        ),
                    )
                })
        };
        let origins = lookup(&cell.origin)?;
        let dests = lookup(&cell.destination)?;
        if !(cell.begin_s < cell.end_s) {
            return Err(Error::invalid(
                "od",
                format!("cell {i}: begin_s must be < end_s"),
            ));
        }
        for _ in 0..cell.vehicles {
            // Origin and destination are redrawn together until they differ.
            let mut attempts = 0;
            let (o, d) = loop {
                let o = &origins[rng.below(origins.len())];
                let d = &dests[rng.below(dests.len())];
                if o != d {
                    break (o, d);
                }
                attempts += 1;
                if attempts >= 1000 {
                    return Err(Error::invalid(
                        "od",
                        format!("cell {i}: cannot draw distinct origin and destination edges"),
                    ));
                }
            };
            trips.push((rng.uniform(cell.begin_s, cell.end_s), o.clone(), d.clone()));
        }
    }
    Ok(number(trips, "od"))
}

fn check_ratios(net: &RoadNetwork, ratios: &TurnRatios) -> Result<()> {
    let idx = net.index();
    for (incoming, row) in ratios {
        let inc = idx.require_edge(incoming, "ratios")?;
        let mut sum = 0.0;
        for (out, &p) in row {
            let o = idx.require_edge(out, "ratios")?;
            if o.from != inc.to {
                return Err(Error::invalid(
                    "ratios",
                    format!("`{out}` does not leave the end of `{incoming}`"),
                ));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::invalid(
                    "ratios",
                    format!("row `{incoming}` has a negative probability"),
                ));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > RATIO_TOLERANCE {
            return Err(Error::invalid(
                "ratios",
                format!("row `{incoming}` sums to {sum}, expected 1"),
            ));
        }
    }
    Ok(())
}

/// Walks each inflow vehicle through the network by sampling turn ratios
/// until it reaches an edge without a ratio row, or [`MAX_TURN_HOPS`] hops.
pub fn turn_ratio_routes(
    net: &RoadNetwork,
    ratios: &TurnRatios,
    inflows: &BTreeMap<String, u32>,
    seed: u64,
    begin_s: f64,
    end_s: f64,
) -> Result<(TripTable, RoutePlan)> {
    if !(begin_s >= 0.0 && begin_s < end_s) {
        return Err(Error::invalid("end_s", "need 0 <= begin_s < end_s"));
    }
    check_ratios(net, ratios)?;
    let idx = net.index();
    let rows: BTreeMap<&str, (Vec<&str>, Vec<f64>)> = ratios
        .iter()
        .map(|(inc, row)| {
            let mut acc = 0.0;
            let (outs, cum) = row
                .iter()
                .map(|(o, p)| {
                    acc += p;
                    (o.as_str(), acc)
                })
                .unzip();
            (inc.as_str(), (outs, cum))
        })
        .collect();
    for source in inflows.keys() {
        idx.require_edge(source, "inflows")?;
        if !rows.contains_key(source.as_str()) {
            return Err(Error::invalid(
                "inflows",
                format!("source `{source}` has no turn ratios and would never leave"),
            ));
        }
    }

    let mut rng = DetRng::new(seed, Stream::TurnRatios);
    let mut walks = Vec::new();
    for (source, &n) in inflows {
        for _ in 0..n {
            let mut route = vec![source.clone()];
            while route.len() <= MAX_TURN_HOPS {
                let current = route.last().expect("non-empty").as_str();
                let Some((outs, cum)) = rows.get(current) else {
                    break;
                };
                route.push(outs[rng.weighted(cum)].to_string());
            }
            walks.push((rng.uniform(begin_s, end_s), route));
        }
    }
    walks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut trips = Vec::with_capacity(walks.len());
    let mut plan = RoutePlan::default();
    for (i, (depart_s, route)) in walks.into_iter().enumerate() {
        let id = format!("tr{i}");
        trips.push(Trip {
            id: id.clone(),
            depart_s,
            from_edge: route[0].clone(),
            to_edge: route.last().expect("non-empty").clone(),
        });
        plan.routes.insert(id, route);
    }
    Ok((TripTable { trips }, plan))
}
