use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::{json, Value};

use trafficmcp_core::demand::{
    od_to_trips, random_trips, turn_ratio_routes, TripTable, TurnRatios,
};
use trafficmcp_core::routing::route_trips;

use super::{deliver, to_value, unknown_tool, ModuleSpec, ToolDef, ToolModule};
use crate::context::Context;
use crate::error::ToolResult;
use crate::params::{opt, req, write_file, Args, ParamType as T};

pub const DEFAULT_END_S: f64 = 3600.0;

pub const SPEC: ModuleSpec = ModuleSpec {
    name: "route",
    description: "Demand generation (random, OD, turn ratios) and shortest-path routing",
    tools: &[
        ToolDef {
            name: "random_trips",
            description: "Draw trips between length-weighted random edges",
            params: &[
                req("network", T::Document),
                req("count", T::Integer),
                opt("seed", T::Integer),
                opt("begin_s", T::Number),
                opt("end_s", T::Number),
                opt("output", T::String),
            ],
        },
        ToolDef {
            name: "od_to_trips",
            description: "Expand an OD matrix CSV into trips using district edge sets",
            params: &[
                req("od", T::Document),
                req("districts", T::Document),
                opt("seed", T::Integer),
                opt("output", T::String),
            ],
        },
        ToolDef {
            name: "route_trips",
            description: "Route every trip along its free-flow fastest path",
            params: &[
                req("network", T::Document),
                req("trips", T::Document),
                opt("output", T::String),
            ],
        },
        ToolDef {
            name: "turn_ratio_routes",
            description: "Generate routes by walking turn ratios from source edges",
            params: &[
                req("network", T::Document),
                req("ratios", T::Document),
                req("inflows", T::Object),
                opt("seed", T::Integer),
                opt("begin_s", T::Number),
                opt("end_s", T::Number),
                opt("trips_output", T::String),
                opt("routes_output", T::String),
            ],
        },
    ],
    factory: || Box::new(Route),
};

struct Route;

fn deliver_trips(args: &Args, trips: TripTable) -> ToolResult<Value> {
    deliver(
        args,
        || to_value(&trips),
        || trips.to_json(),
        json!({ "count": trips.len() }),
    )
}

impl ToolModule for Route {
    fn call(&mut self, tool: &str, args: &Args, _ctx: &Context) -> ToolResult<Value> {
        match tool {
            "random_trips" => {
                let net = args.network("network")?;
                let count = args.u64("count")? as usize;
                let trips = random_trips(
                    &net,
                    count,
                    args.u64_or("seed", 0)?,
                    args.f64_or("begin_s", 0.0)?,
                    args.f64_or("end_s", DEFAULT_END_S)?,
                )?;
                deliver_trips(args, trips)
            }
            "od_to_trips" => {
                let od = args.od("od")?;
                let districts = args.districts("districts")?;
                let trips = od_to_trips(&od, &districts, args.u64_or("seed", 0)?)?;
                deliver_trips(args, trips)
            }
            "route_trips" => {
                let net = args.network("network")?;
                let trips = args.trips("trips")?;
                let outcome = route_trips(&net, &trips);
                let failures = to_value(&outcome.failures);
                deliver(
                    args,
                    || json!({ "routes": outcome.plan.routes, "failures": failures }),
                    || outcome.plan.to_json(),
                    json!({ "routed": outcome.plan.routes.len(), "failures": failures }),
                )
            }
            "turn_ratio_routes" => {
                let net = args.network("network")?;
                let ratios: TurnRatios = args.document("ratios")?;
                let inflows: BTreeMap<String, u32> = args.typed("inflows")?;
                let (trips, routes) = turn_ratio_routes(
                    &net,
                    &ratios,
                    &inflows,
                    args.u64_or("seed", 0)?,
                    args.f64_or("begin_s", 0.0)?,
                    args.f64_or("end_s", DEFAULT_END_S)?,
                )?;
                let trips_out = args.opt_str("trips_output")?.map(PathBuf::from);
                let routes_out = args.opt_str("routes_output")?.map(PathBuf::from);
                if trips_out.is_none() && routes_out.is_none() {
                    return Ok(json!({ "trips": to_value(&trips.trips), "routes": routes.routes }));
                }
                let mut out = json!({ "count": trips.len() });
                if let Some(p) = trips_out {
                    write_file(&p, &trips.to_json())?;
                    out["trips_path"] = json!(p.to_string_lossy());
                }
                if let Some(p) = routes_out {
                    write_file(&p, &routes.to_json())?;
                    out["routes_path"] = json!(p.to_string_lossy());
                }
                Ok(out)
            }
            other => Err(unknown_tool("route", other)),
        }
    }
}
