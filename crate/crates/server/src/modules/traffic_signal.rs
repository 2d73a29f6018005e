use std::collections::BTreeSet;

use serde_json::{json, Value};

use trafficmcp_core::signal::{
    default_phase_groups, detect_congestion, fixed_plan, greenwave_offsets, optimize_signals,
    plans_to_csv, webster_plan, ApproachFlow, SignalPlan,
};

use super::{deliver, to_value, unknown_tool, ModuleSpec, ToolDef, ToolModule};
use crate::context::Context;
use crate::error::{ToolError, ToolResult};
use crate::params::{opt, req, Args, ParamType as T};

pub const DEFAULT_CYCLE_S: u32 = 60;
pub const DEFAULT_CLEARANCE_S: u32 = 4;
pub const DEFAULT_PROGRESSION_MPS: f64 = 13.9;

pub const SPEC: ModuleSpec = ModuleSpec {
    name: "traffic_signal",
    description:
        "Signal timing strategies, congestion ranking, optimization and plan CSV interchange",
    tools: &[
        ToolDef {
            name: "fixed_plan",
            description: "Equal-split fixed-time plans for one or all signalized junctions",
            params: &[
                req("network", T::Document),
                opt("junction", T::String),
                opt("groups", T::Array),
                opt("cycle_s", T::Integer),
                opt("clearance_s", T::Integer),
                opt("output", T::String),
            ],
        },
        ToolDef {
            name: "webster_plan",
            description: "Webster cycle and green split from approach flows grouped by phase",
            params: &[
                req("junction", T::String),
                req("phases", T::Array),
                opt("clearance_s", T::Integer),
                opt("output", T::String),
            ],
        },
        ToolDef {
            name: "greenwave_offsets",
            description:
                "Offsets for plans along an arterial so a platoon meets each through green",
            params: &[
                req("plans", T::Document),
                req("positions", T::Array),
                req("progression_speed_mps", T::Number),
                opt("through", T::Array),
                opt("output", T::String),
            ],
        },
        ToolDef {
            name: "tls_to_csv",
            description: "Render signal plans as CSV",
            params: &[req("plans", T::Document), opt("output", T::String)],
        },
        ToolDef {
            name: "csv_to_tls",
            description: "Parse signal plans from CSV",
            params: &[req("csv", T::Document), opt("output", T::String)],
        },
        ToolDef {
            name: "detect_congestion",
            description: "Rank junctions by accumulated queue time",
            params: &[req("simulation", T::Document), req("k", T::Integer)],
        },
        ToolDef {
            name: "optimize_signals",
            description: "Re-time the k most congested junctions and coordinate adjacent ones",
            params: &[
                req("network", T::Document),
                req("simulation", T::Document),
                req("plans", T::Document),
                req("k", T::Integer),
                opt("progression_speed_mps", T::Number),
                opt("horizon_s", T::Number),
                opt("output", T::String),
            ],
        },
    ],
    factory: || Box::new(TrafficSignal),
};

struct TrafficSignal;

fn deliver_plans(args: &Args, plans: Vec<SignalPlan>) -> ToolResult<Value> {
    deliver(
        args,
        || json!({ "plans": to_value(&plans) }),
        || plans_to_csv(&plans),
        json!({ "junctions": plans.len() }),
    )
}

impl ToolModule for TrafficSignal {
    fn call(&mut self, tool: &str, args: &Args, _ctx: &Context) -> ToolResult<Value> {
        match tool {
            "fixed_plan" => {
                let net = args.network("network")?;
                let cycle = args.u32_or("cycle_s", DEFAULT_CYCLE_S)?;
                let clearance = args.u32_or("clearance_s", DEFAULT_CLEARANCE_S)?;
                let junctions: Vec<String> = match args.opt_str("junction")? {
                    Some(j) => vec![j.to_string()],
                    None => net.signalized_nodes().map(|n| n.id.clone()).collect(),
                };
                let explicit: Option<Vec<BTreeSet<String>>> = args.opt_typed("groups")?;
                if explicit.is_some() && junctions.len() != 1 {
                    return Err(ToolError::invalid(
                        "groups",
                        "`groups` needs a single `junction`",
                    ));
                }
                let mut plans = Vec::with_capacity(junctions.len());
                for j in &junctions {
                    let groups = match &explicit {
                        Some(g) => g.clone(),
                        None => default_phase_groups(&net, j)?,
                    };
                    let plan = fixed_plan(j, groups, cycle, clearance)?;
                    plan.check_against(&net)?;
                    plans.push(plan);
                }
                deliver_plans(args, plans)
            }
            "webster_plan" => {
                let phases: Vec<Vec<ApproachFlow>> = args.typed("phases")?;
                let timed = webster_plan(
                    args.str("junction")?,
                    &phases,
                    args.u32_or("clearance_s", DEFAULT_CLEARANCE_S)?,
                )?;
                deliver(
                    args,
                    || to_value(&timed),
                    || plans_to_csv(std::slice::from_ref(&timed.plan)),
                    json!({ "cycle_s": timed.plan.cycle_s, "warnings": to_value(&timed.warnings) }),
                )
            }
            "greenwave_offsets" => {
                let plans = args.plans("plans")?;
                let positions: Vec<f64> = args.typed("positions")?;
                let through: Option<Vec<String>> = args.opt_typed("through")?;
                let out = greenwave_offsets(
                    &plans,
                    &positions,
                    args.f64("progression_speed_mps")?,
                    through.as_deref(),
                )?;
                deliver_plans(args, out)
            }
            "tls_to_csv" => {
                let plans = args.plans("plans")?;
                let csv = plans_to_csv(&plans);
                deliver(
                    args,
                    || json!({ "csv": csv }),
                    || csv.clone(),
                    json!({ "junctions": plans.len() }),
                )
            }
            "csv_to_tls" => {
                let text = args.text("csv")?;
                let plans = trafficmcp_core::signal::plans_from_csv(&text)
                    .map_err(|e| ToolError::from_core_param("csv", e))?;
                deliver(
                    args,
                    || json!({ "plans": to_value(&plans) }),
                    || json!({ "plans": to_value(&plans) }).to_string(),
                    json!({ "junctions": plans.len() }),
                )
            }
            "detect_congestion" => {
                let out = args.sim_output("simulation")?;
                let k = args.u64("k")? as usize;
                Ok(json!({ "ranking": to_value(&detect_congestion(&out, k)) }))
            }
            "optimize_signals" => {
                let net = args.network("network")?;
                let out = args.sim_output("simulation")?;
                let plans = args.plans("plans")?;
                let opt = optimize_signals(
                    &net,
                    &out,
                    &plans,
                    args.u64("k")? as usize,
                    args.f64_or("progression_speed_mps", DEFAULT_PROGRESSION_MPS)?,
                    args.opt_f64("horizon_s")?,
                )?;
                deliver(
                    args,
                    || to_value(&opt),
                    || plans_to_csv(&opt.plans),
                    json!({
                        "changes": to_value(&opt.changes),
                        "selected": opt.selected,
                        "corridor": opt.corridor,
                        "notes": opt.notes,
                    }),
                )
            }
            other => Err(unknown_tool("traffic_signal", other)),
        }
    }
}
