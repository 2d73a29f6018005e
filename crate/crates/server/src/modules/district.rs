use std::collections::BTreeMap;

use serde_json::{json, Value};

use trafficmcp_core::network::define_districts;

use super::{deliver, to_value, unknown_tool, ModuleSpec, ToolDef, ToolModule};
use crate::context::Context;
use crate::error::ToolResult;
use crate::params::{opt, req, Args, ParamType as T};

pub const SPEC: ModuleSpec = ModuleSpec {
    name: "district",
    description: "Named edge sets used as OD zones",
    tools: &[ToolDef {
        name: "define_districts",
        description: "Validate district edge assignments against a network",
        params: &[
            req("network", T::Document),
            req("assignments", T::Object),
            opt("output", T::String),
        ],
    }],
    factory: || Box::new(District),
};

struct District;

impl ToolModule for District {
    fn call(&mut self, tool: &str, args: &Args, _ctx: &Context) -> ToolResult<Value> {
        match tool {
            "define_districts" => {
                let net = args.network("network")?;
                let assignments: BTreeMap<String, Vec<String>> = args.typed("assignments")?;
                let set = define_districts(&net, assignments)?;
                deliver(
                    args,
                    || to_value(&set),
                    || set.to_json(),
                    json!({ "districts": set.districts.len() }),
                )
            }
            other => Err(unknown_tool("district", other)),
        }
    }
}
