use std::collections::BTreeMap;

use serde_json::{json, Value};

use trafficmcp_core::signal::{
    default_phase_groups, fixed_plan, ActuatedParams, SignalController, SignalPlan,
};
use trafficmcp_core::sim::{run_simulation, SimConfig};
use trafficmcp_core::RoadNetwork;

use super::traffic_signal::{DEFAULT_CLEARANCE_S, DEFAULT_CYCLE_S};
use super::{deliver, to_value, unknown_tool, ModuleSpec, ToolDef, ToolModule};
use crate::context::Context;
use crate::error::{ToolError, ToolResult};
use crate::params::{opt, req, Args, ParamType as T};

pub const SPEC: ModuleSpec = ModuleSpec {
    name: "simulation",
    description: "Deterministic point-queue simulation under static or actuated control",
    tools: &[ToolDef {
        name: "run_simulation",
        description: "Simulate routed trips and record vehicle, queue and detector outputs",
        params: &[
            req("network", T::Document),
            req("trips", T::Document),
            req("routes", T::Document),
            opt("plans", T::Document),
            opt("control", T::String),
            opt("step_s", T::Number),
            req("end_s", T::Number),
            opt("detector_edges", T::Array),
            opt("detector_interval_s", T::Number),
            opt("output", T::String),
        ],
    }],
    factory: || Box::new(Simulation),
};

struct Simulation;

/// One controller per signalized node. Junctions without a supplied plan
/// get the default equal-split plan; actuated control reuses a plan's
/// phase grouping and clearance when one is given.
pub fn controllers(
    net: &RoadNetwork,
    plans: Option<Vec<SignalPlan>>,
    actuated: bool,
) -> ToolResult<BTreeMap<String, SignalController>> {
    let mut given: BTreeMap<String, SignalPlan> = BTreeMap::new();
    for p in plans.unwrap_or_default() {
        if net.signalized_nodes().all(|n| n.id != p.junction) {
            return Err(ToolError::invalid(
                "plans",
                format!(
                    "`{}` is not a signalized junction of the network",
                    p.junction
                ),
            ));
        }
        given.insert(p.junction.clone(), p);
    }
    let mut out = BTreeMap::new();
    for node in net.signalized_nodes() {
        let plan = match given.remove(&node.id) {
            Some(p) => p,
            None => {
                let groups = default_phase_groups(net, &node.id)?;
                fixed_plan(&node.id, groups, DEFAULT_CYCLE_S, DEFAULT_CLEARANCE_S)?
            }
        };
        let ctrl = if actuated {
            let phases = plan.phases.iter().map(|p| p.green_edges.clone()).collect();
            SignalController::Actuated(ActuatedParams::with_defaults(
                phases,
                plan.clearance_s as f64,
            ))
        } else {
            SignalController::Static(plan)
        };
        out.insert(node.id.clone(), ctrl);
    }
    Ok(out)
}

impl ToolModule for Simulation {
    fn call(&mut self, tool: &str, args: &Args, _ctx: &Context) -> ToolResult<Value> {
        match tool {
            "run_simulation" => {
                let net = args.network("network")?;
                let trips = args.trips("trips")?;
                let routes = args.routes("routes")?;
                let plans = if args.has("plans") {
                    Some(args.plans("plans")?)
                } else {
                    None
                };
                let actuated = match args.opt_str("control")?.unwrap_or("static") {
                    "static" => false,
                    "actuated" => true,
                    other => {
                        return Err(ToolError::invalid(
                            "control",
                            format!("control must be `static` or `actuated`, not `{other}`"),
                        ))
                    }
                };
                let ctrls = controllers(&net, plans, actuated)?;
                let mut config = SimConfig::new(args.f64("end_s")?);
                config.step_s = args.f64_or("step_s", config.step_s)?;
                config.detector_interval_s =
                    args.f64_or("detector_interval_s", config.detector_interval_s)?;
                if args.has("detector_edges") {
                    config.detector_edges = args.strings("detector_edges")?;
                }
                let out = run_simulation(&net, &trips, &routes, &ctrls, &config)?;
                deliver(
                    args,
                    || to_value(&out),
                    || out.to_json(),
                    json!({ "totals": to_value(&out.totals) }),
                )
            }
            other => Err(unknown_tool("simulation", other)),
        }
    }
}
