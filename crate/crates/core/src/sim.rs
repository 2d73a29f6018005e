//! Deterministic discrete-time point-queue simulator.
//!
//! Time advances in steps of `step_s`; step `k` covers `[k*step_s, (k+1)*step_s)`.
//! Within a step the order is fixed:
//!
//! 1. trips whose departure falls in `((k-1)*step_s, k*step_s]` enter their
//!    first edge (insertion step `ceil(depart_s / step_s)`);
//! 2. vehicles whose edge traversal ends at `k` either finish (last edge),
//!    pass an unsignalized node instantly onto their next edge, or join the
//!    FIFO queue of their edge at a signalized node;
//! 3. every signal controller is evaluated at `t = k*step_s`;
//! 4. each approach gains `sat_flow_vps * step_s` discharge credit, capped at
//!    `max(1, ceil(sat_flow_vps * step_s))`; on green, queue heads leave one
//!    per whole credit onto their next edge;
//! 5. queue lengths are recorded.
//!
//! Traversing an edge takes `ceil(length_m / speed_mps / step_s)` whole steps
//! (at least one). A vehicle's `waiting_s` is the time it spent queued and
//! `freeflow_s` is the sum of its edges' traversal steps, so
//! `arrive_s - depart_s - freeflow_s - waiting_s` is only the insertion
//! alignment, which is never negative.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::demand::{RoutePlan, TripTable};
use crate::error::{Error, Result};
use crate::network::RoadNetwork;
use crate::signal::{ActuatedParams, SignalController, SignalPlan};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub step_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub detector_edges: Vec<String>,
    pub detector_interval_s: f64,
}

impl SimConfig {
    pub fn new(end_s: f64) -> Self {
        SimConfig {
            step_s: 1.0,
            end_s,
            detector_edges: Vec::new(),
            detector_interval_s: 60.0,
        }
    }

    fn steps(&self) -> Result<u64> {
        if !(self.step_s > 0.0 && self.step_s.is_finite()) {
            return Err(Error::invalid("step_s", "must be positive"));
        }
        if !(self.end_s >= 0.0 && self.end_s.is_finite()) {
            return Err(Error::invalid("end_s", "must be non-negative"));
        }
        let ratio = self.end_s / self.step_s;
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::invalid("end_s", "must be a multiple of step_s"));
        }
        if !(self.detector_interval_s > 0.0) {
            return Err(Error::invalid("detector_interval_s", "must be positive"));
        }
        Ok(ratio.round() as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: String,
    pub depart_s: f64,
    /// `None` while the vehicle is still in the network at the end.
    pub arrive_s: Option<f64>,
    pub waiting_s: f64,
    pub freeflow_s: f64,
}

impl VehicleRecord {
    pub fn travel_time_s(&self) -> Option<f64> {
        self.arrive_s.map(|a| a - self.depart_s)
    }

    pub fn delay_s(&self) -> Option<f64> {
        self.travel_time_s().map(|t| t - self.freeflow_s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub inserted: u64,
    pub arrived: u64,
    pub active: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub step_s: f64,
    pub end_s: f64,
    pub detector_interval_s: f64,
    pub vehicles: Vec<VehicleRecord>,
    /// Queue length after each step, per signalized node and incoming edge.
    pub junction_queues: BTreeMap<String, BTreeMap<String, Vec<u32>>>,
    /// Vehicles released by each signalized approach over the run.
    pub junction_discharges: BTreeMap<String, BTreeMap<String, u64>>,
    /// Vehicles entering each detector edge per interval.
    pub detectors: BTreeMap<String, Vec<u64>>,
    pub totals: Totals,
}

impl SimOutput {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("output serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::parse("simulation output JSON", Some(e.line()), e.to_string()))
    }
}

fn traversal_steps(length_m: f64, speed_mps: f64, step_s: f64) -> u64 {
    ((length_m / speed_mps / step_s - EPS).ceil() as u64).max(1)
}

enum ControllerState<'a> {
    Static(&'a SignalPlan),
    Actuated {
        params: &'a ActuatedParams,
        phase: usize,
        in_clearance: bool,
        since: f64,
        green_until: f64,
    },
}

struct Junction<'a> {
    id: &'a str,
    /// Incoming edge positions, network order.
    approaches: Vec<usize>,
    /// For each phase, which entries of `approaches` it serves.
    phase_members: Vec<Vec<bool>>,
    state: ControllerState<'a>,
}

impl Junction<'_> {
    /// Phase index showing green at `t` (after advancing actuated logic).
    fn green_phase(&mut self, t: f64, queues: &[VecDeque<(usize, u64)>]) -> Option<usize> {
        match &mut self.state {
            ControllerState::Static(plan) => plan.green_phase_at(t),
            ControllerState::Actuated {
                params,
                phase,
                in_clearance,
                since,
                green_until,
            } => {
                if *in_clearance {
                    if t + EPS >= *since + params.clearance_s {
                        *phase = (*phase + 1) % params.phases.len();
                        *in_clearance = false;
                        *since = t;
                        *green_until = t + params.min_green_s;
                    } else {
                        return None;
                    }
                }
                let demand = self
                    .approaches
                    .iter()
                    .enumerate()
                    .any(|(i, &e)| self.phase_members[*phase][i] && !queues[e].is_empty());
                let cap = *since + params.max_green_s;
                if demand {
                    *green_until = green_until.max((t + params.gap_s).min(cap));
                }
                if t + EPS >= *green_until {
                    *in_clearance = true;
                    *since = t;
                    if params.clearance_s <= 0.0 {
                        *phase = (*phase + 1) % params.phases.len();
                        *in_clearance = false;
                        *green_until = t + params.min_green_s;
                        return Some(*phase);
                    }
                    return None;
                }
                Some(*phase)
            }
        }
    }
}

struct Vehicle {
    route: Vec<usize>,
    pos: usize,
    insert_step: u64,
    waiting_steps: u64,
    freeflow_steps: u64,
    arrive_step: Option<u64>,
    inserted: bool,
}

/// Runs the simulation. `controllers` must hold one entry per signalized
/// node; every trip needs a connected route starting and ending on its
/// trip edges.
pub fn run_simulation(
    net: &RoadNetwork,
    trips: &TripTable,
    routes: &RoutePlan,
    controllers: &BTreeMap<String, SignalController>,
    config: &SimConfig,
) -> Result<SimOutput> {
    let total_steps = config.steps()?;
    let step = config.step_s;
    let idx = net.index();

    // Static structure.
    let travel: Vec<u64> = net
        .edges
        .iter()
        .map(|e| traversal_steps(e.length_m, e.speed_mps, step))
        .collect();
    let head_signalized: Vec<bool> = net
        .edges
        .iter()
        .map(|e| idx.node(&e.to).is_some_and(|n| n.signalized))
        .collect();

    let mut junctions = Vec::new();
    for node in net.signalized_nodes() {
        let ctrl = controllers.get(&node.id).ok_or_else(|| {
            Error::Config(format!("signalized node `{}` has no controller", node.id))
        })?;
        ctrl.check_against(net, &node.id)?;
        let approaches: Vec<usize> = idx
            .incoming(&node.id)
            .map(|e| idx.edge_pos(&e.id).expect("indexed"))
            .collect();
        let groups: Vec<_> = match ctrl {
            SignalController::Static(p) => p.phases.iter().map(|p| &p.green_edges).collect(),
            SignalController::Actuated(a) => a.phases.iter().collect(),
        };
        let phase_members = groups
            .iter()
            .map(|g| {
                approaches
                    .iter()
                    .map(|&e| g.contains(&net.edges[e].id))
                    .collect()
            })
            .collect();
        let state = match ctrl {
            SignalController::Static(p) => ControllerState::Static(p),
            SignalController::Actuated(a) => ControllerState::Actuated {
                params: a,
                phase: 0,
                in_clearance: false,
                since: 0.0,
                green_until: a.min_green_s,
            },
        };
        junctions.push(Junction {
            id: &node.id,
            approaches,
            phase_members,
            state,
        });
    }
    if let Some(extra) = controllers
        .keys()
        .find(|k| !idx.node(k).is_some_and(|n| n.signalized))
    {
        return Err(Error::Config(format!(
            "controller given for `{extra}`, which is not a signalized node"
        )));
    }

    let mut vehicles = Vec::with_capacity(trips.len());
    for t in &trips.trips {
        let route = routes
            .routes
            .get(&t.id)
            .ok_or_else(|| Error::Config(format!("trip `{}` has no route", t.id)))?;
        let mut positions = Vec::with_capacity(route.len());
        for e in route {
            positions.push(idx.edge_pos(e).ok_or_else(|| {
                Error::Config(format!("trip `{}` uses unknown edge `{e}`", t.id))
            })?);
        }
        let connected = positions
            .windows(2)
            .all(|w| net.edges[w[0]].to == net.edges[w[1]].from);
        if positions.is_empty()
            || !connected
            || route.first() != Some(&t.from_edge)
            || route.last() != Some(&t.to_edge)
        {
            return Err(Error::Config(format!(
                "route of trip `{}` does not connect its origin and destination",
                t.id
            )));
        }
        vehicles.push(Vehicle {
            freeflow_steps: positions.iter().map(|&e| travel[e]).sum(),
            route: positions,
            pos: 0,
            insert_step: ((t.depart_s / step - EPS).ceil().max(0.0)) as u64,
            waiting_steps: 0,
            arrive_step: None,
            inserted: false,
        });
    }
    let mut insertion_order: Vec<usize> = (0..vehicles.len()).collect();
    insertion_order.sort_by_key(|&v| vehicles[v].insert_step);

    // Detectors.
    let mut detector_slot: Vec<Option<usize>> = vec![None; net.edges.len()];
    let buckets = ((config.end_s / config.detector_interval_s) - EPS)
        .ceil()
        .max(0.0) as usize;
    let mut detector_counts = Vec::new();
    for (i, e) in config.detector_edges.iter().enumerate() {
        let pos = idx
            .edge_pos(e)
            .ok_or_else(|| Error::invalid("detector_edges", format!("unknown edge `{e}`")))?;
        detector_slot[pos] = Some(i);
        detector_counts.push(vec![0u64; buckets]);
    }
    let bucket_of = |k: u64| -> usize {
        ((k as f64 * step / config.detector_interval_s + EPS).floor() as usize)
            .min(buckets.saturating_sub(1))
    };

    // Dynamic state.
    let mut transit: Vec<VecDeque<(usize, u64)>> = vec![VecDeque::new(); net.edges.len()];
    let mut queues: Vec<VecDeque<(usize, u64)>> = vec![VecDeque::new(); net.edges.len()];
    let credit_cap: Vec<f64> = net
        .edges
        .iter()
        .map(|e| (e.sat_flow_vps * step).ceil().max(1.0))
        .collect();
    let mut credit = credit_cap.clone();
    let mut discharged = vec![0u64; net.edges.len()];
    let mut queue_series: Vec<Vec<Vec<u32>>> = junctions
        .iter()
        .map(|j| vec![Vec::with_capacity(total_steps as usize); j.approaches.len()])
        .collect();

    let enter = |vehicles: &mut [Vehicle],
                 transit: &mut [VecDeque<(usize, u64)>],
                 detector_counts: &mut [Vec<u64>],
                 v: usize,
                 k: u64| {
        let e = vehicles[v].route[vehicles[v].pos];
        transit[e].push_back((v, k + travel[e]));
        if let Some(slot) = detector_slot[e] {
            if buckets > 0 {
                detector_counts[slot][bucket_of(k)] += 1;
            }
        }
    };

    let mut next_insert = 0;
    let mut inserted = 0u64;
    let mut arrived = 0u64;
    for k in 0..total_steps {
        let t = k as f64 * step;

        while next_insert < insertion_order.len()
            && vehicles[insertion_order[next_insert]].insert_step <= k
        {
            let v = insertion_order[next_insert];
            vehicles[v].inserted = true;
            inserted += 1;
            enter(&mut vehicles, &mut transit, &mut detector_counts, v, k);
            next_insert += 1;
        }

        for e in 0..net.edges.len() {
            while let Some(&(v, exit)) = transit[e].front() {
                if exit > k {
                    break;
                }
                transit[e].pop_front();
                let veh = &mut vehicles[v];
                if veh.pos + 1 == veh.route.len() {
                    veh.arrive_step = Some(k);
                    arrived += 1;
                } else if head_signalized[e] {
                    queues[e].push_back((v, k));
                } else {
                    veh.pos += 1;
                    enter(&mut vehicles, &mut transit, &mut detector_counts, v, k);
                }
            }
        }

        for (j, junction) in junctions.iter_mut().enumerate() {
            let green = junction.green_phase(t, &queues);
            for (a, &e) in junction.approaches.iter().enumerate() {
                credit[e] = (credit[e] + net.edges[e].sat_flow_vps * step).min(credit_cap[e]);
                let is_green = green.is_some_and(|p| junction.phase_members[p][a]);
                if is_green {
                    while credit[e] >= 1.0 - EPS {
                        let Some((v, since)) = queues[e].pop_front() else {
                            break;
                        };
                        credit[e] -= 1.0;
                        discharged[e] += 1;
                        vehicles[v].waiting_steps += k - since;
                        vehicles[v].pos += 1;
                        enter(&mut vehicles, &mut transit, &mut detector_counts, v, k);
                    }
                }
                queue_series[j][a].push(queues[e].len() as u32);
            }
        }
    }

    // Vehicles still queued have waited until the end of the run.
    for q in &queues {
        for &(v, since) in q {
            vehicles[v].waiting_steps += total_steps - since;
        }
    }

    let records = trips
        .trips
        .iter()
        .zip(&vehicles)
        .filter(|(_, v)| v.inserted)
        .map(|(t, v)| VehicleRecord {
            id: t.id.clone(),
            depart_s: t.depart_s,
            arrive_s: v.arrive_step.map(|k| k as f64 * step),
            waiting_s: v.waiting_steps as f64 * step,
            freeflow_s: v.freeflow_steps as f64 * step,
        })
        .collect();

    let mut junction_queues = BTreeMap::new();
    let mut junction_discharges = BTreeMap::new();
    for (j, junction) in junctions.iter().enumerate() {
        let mut per_edge = BTreeMap::new();
        let mut counts = BTreeMap::new();
        for (a, &e) in junction.approaches.iter().enumerate() {
            per_edge.insert(
                net.edges[e].id.clone(),
                std::mem::take(&mut queue_series[j][a]),
            );
            counts.insert(net.edges[e].id.clone(), discharged[e]);
        }
        junction_queues.insert(junction.id.to_string(), per_edge);
        junction_discharges.insert(junction.id.to_string(), counts);
    }

    Ok(SimOutput {
        step_s: step,
        end_s: config.end_s,
        detector_interval_s: config.detector_interval_s,
        vehicles: records,
        junction_queues,
        junction_discharges,
        detectors: config
            .detector_edges
            .iter()
            .cloned()
            .zip(detector_counts)
            .collect(),
        totals: Totals {
            inserted,
            arrived,
            active: inserted - arrived,
        },
    })
}

/// Re-buckets detector counts to `interval_s`, which must be a whole
/// multiple of the interval the simulation recorded.
pub fn extract_detector_counts(
    output: &SimOutput,
    edges: &[String],
    interval_s: f64,
) -> Result<BTreeMap<String, Vec<u64>>> {
    let base = output.detector_interval_s;
    let factor = interval_s / base;
    if !(interval_s > 0.0) || (factor - factor.round()).abs() > 1e-6 || factor.round() < 1.0 {
        return Err(Error::invalid(
            "interval_s",
            format!("must be a positive multiple of the recorded interval {base} s"),
        ));
    }
    let factor = factor.round() as usize;
    let mut out = BTreeMap::new();
    for e in edges {
        let counts = output.detectors.get(e).ok_or_else(|| {
            Error::invalid(
                "edges",
                format!("edge `{e}` was not configured as a detector"),
            )
        })?;
        out.insert(
            e.clone(),
            counts.chunks(factor).map(|c| c.iter().sum()).collect(),
        );
    }
    Ok(out)
}
