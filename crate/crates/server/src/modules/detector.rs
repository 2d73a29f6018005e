use serde_json::{json, Value};

use trafficmcp_core::sim::extract_detector_counts;

use super::{unknown_tool, ModuleSpec, ToolDef, ToolModule};
use crate::context::Context;
use crate::error::ToolResult;
use crate::params::{req, Args, ParamType as T};

pub const SPEC: ModuleSpec = ModuleSpec {
    name: "detector",
    description: "Edge detector counts from simulation output",
    tools: &[ToolDef {
        name: "extract_detector_counts",
        description: "Per-interval entry counts for detector edges",
        params: &[
            req("simulation", T::Document),
            req("edges", T::Array),
            req("interval_s", T::Number),
        ],
    }],
    factory: || Box::new(Detector),
};

struct Detector;

impl ToolModule for Detector {
    fn call(&mut self, tool: &str, args: &Args, _ctx: &Context) -> ToolResult<Value> {
        match tool {
            "extract_detector_counts" => {
                let out = args.sim_output("simulation")?;
                let counts = extract_detector_counts(
                    &out,
                    &args.strings("edges")?,
                    args.f64("interval_s")?,
                )?;
                Ok(json!({ "counts": counts }))
            }
            other => Err(unknown_tool("detector", other)),
        }
    }
}
