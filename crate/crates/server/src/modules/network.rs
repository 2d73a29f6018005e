use serde_json::{json, Value};

use trafficmcp_core::network::{generate_grid, validate_network};
use trafficmcp_core::osm::convert_osm;

use super::{deliver, to_value, unknown_tool, ModuleSpec, ToolDef, ToolModule};
use crate::context::Context;
use crate::error::{ToolError, ToolResult};
use crate::params::{opt, req, Args, ParamType as T};

pub const DEFAULT_SPACING_M: f64 = 200.0;
pub const DEFAULT_SPEED_MPS: f64 = 13.9;

pub const SPEC: ModuleSpec = ModuleSpec {
    name: "network",
    description: "Road network synthesis, OSM conversion and validation",
    tools: &[
        ToolDef {
            name: "generate_grid",
            description: "Generate a rows x cols lattice network with signalized interior nodes",
            params: &[
                req("rows", T::Integer),
                req("cols", T::Integer),
                opt("spacing_m", T::Number),
                opt("speed_mps", T::Number),
                opt("output", T::String),
            ],
        },
        ToolDef {
            name: "convert_osm",
            description: "Convert an OSM XML extract into a road network",
            params: &[req("osm", T::Document), opt("output", T::String)],
        },
        ToolDef {
            name: "validate_network",
            description: "List structural problems of a network; empty means valid",
            params: &[req("network", T::Document)],
        },
    ],
    factory: || Box::new(Network),
};

struct Network;

fn summary(net: &trafficmcp_core::RoadNetwork) -> Value {
    json!({
        "nodes": net.nodes.len(),
        "edges": net.edges.len(),
        "signalized": net.signalized_nodes().count(),
    })
}

impl ToolModule for Network {
    fn call(&mut self, tool: &str, args: &Args, _ctx: &Context) -> ToolResult<Value> {
        let net = match tool {
            "generate_grid" => generate_grid(
                args.u32("rows")?,
                args.u32("cols")?,
                args.f64_or("spacing_m", DEFAULT_SPACING_M)?,
                args.f64_or("speed_mps", DEFAULT_SPEED_MPS)?,
            )?,
            "convert_osm" => {
                let text = args.text("osm")?;
                convert_osm(&text).map_err(|e| match e {
                    trafficmcp_core::Error::Parse { .. } => ToolError::from_core_param("osm", e),
                    other => ToolError::from(other),
                })?
            }
            "validate_network" => {
                let net = args.network("network")?;
                let diagnostics = validate_network(&net);
                return Ok(json!({
                    "valid": diagnostics.is_empty(),
                    "diagnostics": to_value(&diagnostics),
                }));
            }
            other => return Err(unknown_tool("network", other)),
        };
        deliver(args, || to_value(&net), || net.to_json(), summary(&net))
    }
}
