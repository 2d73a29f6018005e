use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::RoadNetwork;
use crate::signal::plan::SignalPlan;
use crate::signal::timing::{
    greenwave_offsets, rescale_to_cycle, webster_plan, ApproachFlow, TimingWarning,
};
use crate::sim::SimOutput;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    /// Vehicle-seconds spent queued, summed over approaches.
    pub queue_time_vehs: f64,
    /// Longest single-approach queue observed, in vehicles.
    pub max_queue_veh: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionEntry {
    pub junction: String,
    pub queue_time_vehs: f64,
    pub max_queue_veh: u32,
}

pub fn junction_queue_stats(output: &SimOutput) -> BTreeMap<String, QueueStats> {
    output
        .junction_queues
        .iter()
        .map(|(j, per_edge)| {
            let mut stats = QueueStats::default();
            let mut total: u64 = 0;
            for series in per_edge.values() {
                total += series.iter().map(|&q| q as u64).sum::<u64>();
                stats.max_queue_veh = stats
                    .max_queue_veh
                    .max(series.iter().copied().max().unwrap_or(0));
            }
            stats.queue_time_vehs = total as f64 * output.step_s;
            (j.clone(), stats)
        })
        .collect()
}

/// The `k` junctions with the most queue time, descending, ties by id.
pub fn detect_congestion(output: &SimOutput, k: usize) -> Vec<CongestionEntry> {
    let mut entries: Vec<CongestionEntry> = junction_queue_stats(output)
        .into_iter()
        .map(|(junction, s)| CongestionEntry {
            junction,
            queue_time_vehs: s.queue_time_vehs,
            max_queue_veh: s.max_queue_veh,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.queue_time_vehs
            .total_cmp(&a.queue_time_vehs)
            .then_with(|| a.junction.cmp(&b.junction))
    });
    entries.truncate(k);
    entries
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanChange {
    pub junction: String,
    pub old_cycle_s: u32,
    pub new_cycle_s: u32,
    pub old_greens: Vec<u32>,
    pub new_greens: Vec<u32>,
    pub old_offset_s: u32,
    pub new_offset_s: u32,
    pub warnings: Vec<TimingWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimization {
    /// All plans, in input order; only changed junctions differ.
    pub plans: Vec<SignalPlan>,
    pub changes: Vec<PlanChange>,
    /// Junctions ranked for optimization.
    pub selected: Vec<String>,
    /// Coordinated chain, first junction first. Empty when none was found.
    pub corridor: Vec<String>,
    pub notes: Vec<String>,
}

/// Measured demand per approach: vehicles released plus those still queued
/// at the end, over `horizon_s`.
pub fn approach_flows(
    net: &RoadNetwork,
    output: &SimOutput,
    plan: &SignalPlan,
    horizon_s: f64,
) -> Vec<Vec<ApproachFlow>> {
    let idx = net.index();
    let discharges = output.junction_discharges.get(&plan.junction);
    let queues = output.junction_queues.get(&plan.junction);
    plan.phases
        .iter()
        .map(|phase| {
            phase
                .green_edges
                .iter()
                .map(|e| {
                    let released = discharges.and_then(|d| d.get(e)).copied().unwrap_or(0);
                    let residual = queues
                        .and_then(|q| q.get(e))
                        .and_then(|s| s.last())
                        .copied()
                        .unwrap_or(0) as u64;
                    ApproachFlow {
                        edge: e.clone(),
                        flow_vps: (released + residual) as f64 / horizon_s,
                        sat_flow_vps: idx.edge(e).map(|x| x.sat_flow_vps).unwrap_or(f64::NAN),
                    }
                })
                .collect()
        })
        .collect()
}

/// Connecting edge between two junctions, smallest id when parallel.
fn link<'a>(net: &'a RoadNetwork, a: &str, b: &str) -> Option<&'a crate::network::Edge> {
    net.edges
        .iter()
        .filter(|e| e.from == a && e.to == b)
        .min_by(|x, y| x.id.cmp(&y.id))
}

/// Longest simple directed chain through `members` along direct edges.
/// Ties go to the lexicographically smallest junction sequence.
fn longest_chain(net: &RoadNetwork, members: &BTreeSet<String>) -> Vec<String> {
    fn extend(
        net: &RoadNetwork,
        members: &BTreeSet<String>,
        path: &mut Vec<String>,
        best: &mut Vec<String>,
    ) {
        if path.len() > best.len() || (path.len() == best.len() && *path < *best) {
            *best = path.clone();
        }
        let last = path.last().expect("non-empty").clone();
        for next in members {
            if !path.contains(next) && link(net, &last, next).is_some() {
                path.push(next.clone());
                extend(net, members, path, best);
                path.pop();
            }
        }
    }
    let mut best = Vec::new();
    for start in members {
        let mut path = vec![start.clone()];
        extend(net, members, &mut path, &mut best);
    }
    best
}

/// Incoming edge of `junction` whose direction best matches the vector
/// towards `toward`; ties by id.
fn aligned_incoming(net: &RoadNetwork, junction: &str, toward: &str) -> Option<String> {
    let idx = net.index();
    let j = idx.node(junction)?;
    let t = idx.node(toward)?;
    let (dx, dy) = (t.x - j.x, t.y - j.y);
    let norm = (dx * dx + dy * dy).sqrt().max(f64::MIN_POSITIVE);
    let mut best: Option<(f64, &str)> = None;
    for e in idx.incoming(junction) {
        let f = idx.node(&e.from)?;
        let (ex, ey) = (j.x - f.x, j.y - f.y);
        let en = (ex * ex + ey * ey).sqrt().max(f64::MIN_POSITIVE);
        let cos = (ex * dx + ey * dy) / (en * norm);
        let better = match best {
            None => true,
            Some((c, id)) => cos > c + 1e-12 || ((cos - c).abs() <= 1e-12 && e.id.as_str() < id),
        };
        if better {
            best = Some((cos, &e.id));
        }
    }
    best.map(|(_, id)| id.to_string())
}

/// Junction sequence along direct edges with cumulative distances and the
/// approach each junction's green wave should serve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub junctions: Vec<String>,
    pub positions_m: Vec<f64>,
    pub through: Vec<String>,
}

/// Positions and through edges for a chain of at least two junctions
/// joined by direct edges. The first junction's through edge is its
/// incoming edge best aligned with the chain.
pub fn corridor_geometry(net: &RoadNetwork, junctions: &[String]) -> Result<Corridor> {
    if junctions.len() < 2 {
        return Err(Error::invalid(
            "corridor",
            "a corridor needs at least two junctions",
        ));
    }
    let mut positions_m = vec![0.0];
    let mut through = Vec::with_capacity(junctions.len());
    through.push(
        aligned_incoming(net, &junctions[0], &junctions[1]).ok_or_else(|| {
            Error::invalid(
                "corridor",
                format!("junction `{}` has no approach", junctions[0]),
            )
        })?,
    );
    for w in junctions.windows(2) {
        let e = link(net, &w[0], &w[1]).ok_or_else(|| {
            Error::invalid("corridor", format!("no edge from `{}` to `{}`", w[0], w[1]))
        })?;
        positions_m.push(positions_m.last().expect("non-empty") + e.length_m);
        through.push(e.id.clone());
    }
    Ok(Corridor {
        junctions: junctions.to_vec(),
        positions_m,
        through,
    })
}

/// Straight run of signalized junctions carrying the most traffic.
///
/// Seeds on the signalized-to-signalized edge with the highest discharge
/// count at its head junction, then extends forwards and backwards while an
/// edge to another signalized junction continues in nearly the same
/// direction. Empty when no two signalized junctions are adjacent.
pub fn highest_flow_corridor(net: &RoadNetwork, output: &SimOutput) -> Vec<String> {
    const STRAIGHT_COS: f64 = 0.9;
    let idx = net.index();
    let signalized = |id: &str| idx.node(id).is_some_and(|n| n.signalized);
    let released = |e: &crate::network::Edge| {
        output
            .junction_discharges
            .get(&e.to)
            .and_then(|d| d.get(&e.id))
            .copied()
            .unwrap_or(0)
    };
    let Some(seed) = net
        .edges
        .iter()
        .filter(|e| e.from != e.to && signalized(&e.from) && signalized(&e.to))
        .max_by(|a, b| released(a).cmp(&released(b)).then_with(|| b.id.cmp(&a.id)))
    else {
        return Vec::new();
    };
    let dir = |a: &str, b: &str| {
        let (p, q) = (
            idx.node(a).expect("known node"),
            idx.node(b).expect("known node"),
        );
        let (dx, dy) = (q.x - p.x, q.y - p.y);
        let n = (dx * dx + dy * dy).sqrt().max(f64::MIN_POSITIVE);
        (dx / n, dy / n)
    };
    let heading = dir(&seed.from, &seed.to);
    let straight = |a: &str, b: &str| {
        let d = dir(a, b);
        d.0 * heading.0 + d.1 * heading.1 >= STRAIGHT_COS
    };
    let mut chain = vec![seed.from.clone(), seed.to.clone()];
    loop {
        let last = chain.last().expect("non-empty").clone();
        let next = idx
            .outgoing(&last)
            .filter(|e| signalized(&e.to) && !chain.contains(&e.to) && straight(&last, &e.to))
            .map(|e| e.to.clone())
            .min();
        match next {
            Some(n) => chain.push(n),
            None => break,
        }
    }
    loop {
        let first = chain[0].clone();
        let prev = idx
            .incoming(&first)
            .filter(|e| {
                signalized(&e.from) && !chain.contains(&e.from) && straight(&e.from, &first)
            })
            .map(|e| e.from.clone())
            .min();
        match prev {
            Some(p) => chain.insert(0, p),
            None => break,
        }
    }
    chain
}

/// Re-times the `k` most congested junctions with Webster from measured
/// flows and, where at least two of them lie on a chain of direct edges,
/// coordinates the longest chain as a green wave.
///
/// `horizon_s` is the demand window used to turn counts into flows; it
/// defaults to the simulated duration.
pub fn optimize_signals(
    net: &RoadNetwork,
    output: &SimOutput,
    plans: &[SignalPlan],
    k: usize,
    progression_speed_mps: f64,
    horizon_s: Option<f64>,
) -> Result<Optimization> {
    let horizon = horizon_s.unwrap_or(output.end_s);
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon_s", "must be positive"));
    }
    if !(progression_speed_mps > 0.0 && progression_speed_mps.is_finite()) {
        return Err(Error::invalid("progression_speed_mps", "must be positive"));
    }
    let mut out = plans.to_vec();
    let pos: BTreeMap<&str, usize> = plans
        .iter()
        .enumerate()
        .map(|(i, p)| (p.junction.as_str(), i))
        .collect();
    let mut notes = Vec::new();
    let ranking = detect_congestion(output, k);
    let selected: Vec<String> = ranking
        .iter()
        .filter(|c| c.queue_time_vehs > 0.0)
        .map(|c| c.junction.clone())
        .collect();
    if selected.len() < ranking.len() {
        notes.push(format!(
            "{} ranked junction(s) had no queueing and were left unchanged",
            ranking.len() - selected.len()
        ));
    }

    let mut warnings: BTreeMap<String, Vec<TimingWarning>> = BTreeMap::new();
    let mut replaced = BTreeSet::new();
    for j in &selected {
        let &i = pos.get(j.as_str()).ok_or_else(|| {
            Error::invalid(
                "plans",
                format!("no static plan for congested junction `{j}`"),
            )
        })?;
        let flows = approach_flows(net, output, &out[i], horizon);
        if flows.iter().flatten().all(|a| a.flow_vps == 0.0) {
            notes.push(format!(
                "junction `{j}` has no measured demand; plan unchanged"
            ));
            continue;
        }
        let timed = webster_plan(j, &flows, out[i].clearance_s)?;
        out[i] = timed.plan;
        warnings.insert(j.clone(), timed.warnings);
        replaced.insert(j.clone());
    }

    let corridor = if replaced.len() >= 2 {
        longest_chain(net, &replaced)
    } else {
        Vec::new()
    };
    let corridor = if corridor.len() >= 2 {
        let cycle = corridor
            .iter()
            .map(|j| out[pos[j.as_str()]].cycle_s)
            .max()
            .expect("non-empty");
        let mut chain_plans = Vec::with_capacity(corridor.len());
        for j in &corridor {
            chain_plans.push(rescale_to_cycle(&out[pos[j.as_str()]], cycle)?);
        }
        let geo = corridor_geometry(net, &corridor)?;
        let coordinated = greenwave_offsets(
            &chain_plans,
            &geo.positions_m,
            progression_speed_mps,
            Some(&geo.through),
        )?;
        for p in coordinated {
            let i = pos[p.junction.as_str()];
            out[i] = p;
        }
        notes.push(format!(
            "green wave along {} at {progression_speed_mps} m/s, cycle {cycle} s",
            corridor.join(" -> ")
        ));
        corridor
    } else {
        if replaced.len() >= 2 {
            notes.push("re-timed junctions share no direct edge; offsets unchanged".into());
        }
        Vec::new()
    };

    let changes = selected
        .iter()
        .filter(|j| replaced.contains(*j))
        .map(|j| {
            let i = pos[j.as_str()];
            let (old, new) = (&plans[i], &out[i]);
            PlanChange {
                junction: j.clone(),
                old_cycle_s: old.cycle_s,
                new_cycle_s: new.cycle_s,
                old_greens: old.greens(),
                new_greens: new.greens(),
                old_offset_s: old.offset_s,
                new_offset_s: new.offset_s,
                warnings: warnings.remove(j).unwrap_or_default(),
            }
        })
        .collect();

    Ok(Optimization {
        plans: out,
        changes,
        selected,
        corridor,
        notes,
    })
}
