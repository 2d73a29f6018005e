use serde_json::{json, Value};

use super::{unknown_tool, ModuleSpec, ToolDef, ToolModule};
use crate::context::Context;
use crate::error::ToolResult;
use crate::osm_client::{Bbox, RegionQuery, DEFAULT_TIMEOUT_S};
use crate::params::{opt, Args, ParamType as T};

pub const SPEC: ModuleSpec = ModuleSpec {
    name: "import_tool",
    description: "OpenStreetMap extract download",
    tools: &[ToolDef {
        name: "osm_download",
        description: "Download road data for a bounding box or named place into the workspace",
        params: &[
            opt("bbox", T::Object),
            opt("place_name", T::String),
            opt("region", T::String),
            opt("timeout_s", T::Number),
        ],
    }],
    factory: || Box::new(ImportTool),
};

struct ImportTool;

impl ToolModule for ImportTool {
    fn call(&mut self, tool: &str, args: &Args, ctx: &Context) -> ToolResult<Value> {
        match tool {
            "osm_download" => {
                let query = RegionQuery {
                    bbox: args.opt_typed::<Bbox>("bbox")?,
                    place_name: args.opt_str("place_name")?.map(String::from),
                    region: args.opt_str("region")?.map(String::from),
                    timeout_s: args.f64_or("timeout_s", DEFAULT_TIMEOUT_S)?,
                };
                let (d, document) = ctx.osm.download(&query, &ctx.workspace)?;
                Ok(json!({
                    "region": d.region,
                    "path": d.path.to_string_lossy(),
                    "ways": d.ways,
                    "bytes": d.bytes,
                    "document": document,
                }))
            }
            other => Err(unknown_tool("import_tool", other)),
        }
    }
}
