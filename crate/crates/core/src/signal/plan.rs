use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::RoadNetwork;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub green_edges: BTreeSet<String>,
    pub duration_s: u32,
}

/// Static timing for one junction. Each phase's green is followed by
/// `clearance_s` of all-red, so `cycle_s = sum(duration_s) + phases * clearance_s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalPlan {
    pub junction: String,
    pub cycle_s: u32,
    pub offset_s: u32,
    pub clearance_s: u32,
    pub phases: Vec<Phase>,
}

impl SignalPlan {
    pub fn lost_time_s(&self) -> u32 {
        self.phases.len() as u32 * self.clearance_s
    }

    pub fn greens(&self) -> Vec<u32> {
        self.phases.iter().map(|p| p.duration_s).collect()
    }

    /// Internal consistency: non-empty phases, positive greens, cycle sum
    /// and offset range.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| {
            Err(Error::invalid(
                "plans",
                format!("junction `{}`: {m}", self.junction),
            ))
        };
        if self.phases.is_empty() {
            return bad("plan has no phases".into());
        }
        if let Some(i) = self.phases.iter().position(|p| p.duration_s == 0) {
            return bad(format!("phase {i} has zero duration"));
        }
        if let Some(i) = self.phases.iter().position(|p| p.green_edges.is_empty()) {
            return bad(format!("phase {i} serves no edges"));
        }
        let total: u64 = self.phases.iter().map(|p| p.duration_s as u64).sum::<u64>()
            + self.lost_time_s() as u64;
        if total != self.cycle_s as u64 {
            return bad(format!(
                "durations plus clearances give {total} s but cycle_s is {}",
                self.cycle_s
            ));
        }
        if self.offset_s >= self.cycle_s {
            return bad(format!(
                "offset_s {} is not below cycle_s {}",
                self.offset_s, self.cycle_s
            ));
        }
        Ok(())
    }

    /// Checks the plan against the junction it controls: the node exists, is
    /// signalized, every green edge enters it, and every entering edge is
    /// served by some phase.
    pub fn check_against(&self, net: &RoadNetwork) -> Result<()> {
        self.check()?;
        check_grouping(
            net,
            &self.junction,
            self.phases.iter().map(|p| &p.green_edges),
        )
    }

    /// Index of the phase showing green at time `t`, or `None` during a
    /// clearance interval.
    pub fn green_phase_at(&self, t: f64) -> Option<usize> {
        let tau = (t - self.offset_s as f64).rem_euclid(self.cycle_s as f64);
        let mut start = 0.0;
        for (i, p) in self.phases.iter().enumerate() {
            let green_end = start + p.duration_s as f64;
            if tau < green_end {
                return Some(i);
            }
            start = green_end + self.clearance_s as f64;
            if tau < start {
                return None;
            }
        }
        None
    }
}

pub(crate) fn check_grouping<'a>(
    net: &RoadNetwork,
    junction: &str,
    groups: impl Iterator<Item = &'a BTreeSet<String>>,
) -> Result<()> {
    let idx = net.index();
    let node = idx
        .node(junction)
        .ok_or_else(|| Error::invalid("junction", format!("unknown node `{junction}`")))?;
    if !node.signalized {
        return Err(Error::invalid(
            "junction",
            format!("node `{junction}` is not signalized"),
        ));
    }
    let incoming: BTreeSet<&str> = idx.incoming(junction).map(|e| e.id.as_str()).collect();
    let mut served = BTreeSet::new();
    for group in groups {
        for e in group {
            if !incoming.contains(e.as_str()) {
                return Err(Error::invalid(
                    "phases",
                    format!("edge `{e}` does not enter junction `{junction}`"),
                ));
            }
            served.insert(e.as_str());
        }
    }
    if let Some(missing) = incoming.difference(&served).next() {
        return Err(Error::invalid(
            "phases",
            format!("incoming edge `{missing}` of junction `{junction}` is never green"),
        ));
    }
    Ok(())
}

/// Splits a junction's approaches into an east-west and a north-south
/// group by the direction they arrive from. Empty groups are dropped.
pub fn default_phase_groups(net: &RoadNetwork, junction: &str) -> Result<Vec<BTreeSet<String>>> {
    let idx = net.index();
    let node = idx
        .node(junction)
        .ok_or_else(|| Error::invalid("junction", format!("unknown node `{junction}`")))?;
    let mut east_west = BTreeSet::new();
    let mut north_south = BTreeSet::new();
    for e in idx.incoming(junction) {
        let (dx, dy) = idx
            .node(&e.from)
            .map(|f| (node.x - f.x, node.y - f.y))
            .unwrap_or((1.0, 0.0));
        if dx.abs() >= dy.abs() {
            east_west.insert(e.id.clone());
        } else {
            north_south.insert(e.id.clone());
        }
    }
    let groups: Vec<_> = [east_west, north_south]
        .into_iter()
        .filter(|g| !g.is_empty())
        .collect();
    if groups.is_empty() {
        return Err(Error::invalid(
            "junction",
            format!("node `{junction}` has no incoming edges"),
        ));
    }
    Ok(groups)
}

/// Gap-out actuated control. A phase holds green for at least
/// `min_green_s`, is extended by `gap_s` while its approaches have queued
/// vehicles, and never exceeds `max_green_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatedParams {
    pub phases: Vec<BTreeSet<String>>,
    pub min_green_s: f64,
    pub max_green_s: f64,
    pub gap_s: f64,
    pub clearance_s: f64,
}

impl ActuatedParams {
    pub const DEFAULT_MIN_GREEN_S: f64 = 5.0;
    pub const DEFAULT_MAX_GREEN_S: f64 = 60.0;
    pub const DEFAULT_GAP_S: f64 = 3.0;

    pub fn with_defaults(phases: Vec<BTreeSet<String>>, clearance_s: f64) -> Self {
        ActuatedParams {
            phases,
            min_green_s: Self::DEFAULT_MIN_GREEN_S,
            max_green_s: Self::DEFAULT_MAX_GREEN_S,
            gap_s: Self::DEFAULT_GAP_S,
            clearance_s,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::invalid("actuated", "no phases"));
        }
        if !(self.min_green_s > 0.0 && self.min_green_s <= self.max_green_s) {
            return Err(Error::invalid(
                "actuated",
                "need 0 < min_green_s <= max_green_s",
            ));
        }
        if !(self.gap_s > 0.0) || self.clearance_s < 0.0 {
            return Err(Error::invalid(
                "actuated",
                "gap_s must be positive and clearance_s non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SignalController {
    Static(SignalPlan),
    Actuated(ActuatedParams),
}

impl SignalController {
    pub fn check_against(&self, net: &RoadNetwork, junction: &str) -> Result<()> {
        match self {
            SignalController::Static(plan) => {
                if plan.junction != junction {
                    return Err(Error::Config(format!(
                        "plan for `{}` registered under junction `{junction}`",
                        plan.junction
                    )));
                }
                plan.check_against(net)
            }
            SignalController::Actuated(params) => {
                params.check()?;
                check_grouping(net, junction, params.phases.iter())
            }
        }
    }
}
