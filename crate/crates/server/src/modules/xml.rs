use std::path::Path;

use serde_json::{json, Value};

use trafficmcp_core::netxml;

use super::{to_value, unknown_tool, ModuleSpec, ToolDef, ToolModule};
use crate::context::Context;
use crate::error::{ToolError, ToolResult};
use crate::params::{opt, read_file, req, write_file, Args, ParamType as T};

pub const SPEC: ModuleSpec = ModuleSpec {
    name: "xml",
    description: "Network file reading, writing and JSON/XML conversion",
    tools: &[
        ToolDef {
            name: "read_network",
            description: "Read a network file in JSON or XML form",
            params: &[req("path", T::String)],
        },
        ToolDef {
            name: "write_network",
            description: "Write a network as JSON or XML",
            params: &[
                req("network", T::Document),
                req("path", T::String),
                opt("format", T::String),
            ],
        },
        ToolDef {
            name: "convert_network_format",
            description: "Convert a network document between JSON and XML",
            params: &[req("network", T::Document), req("to", T::String)],
        },
    ],
    factory: || Box::new(Xml),
};

struct Xml;

fn format_param(name: &str, value: &str) -> ToolResult<bool> {
    match value {
        "json" => Ok(false),
        "xml" => Ok(true),
        other => Err(ToolError::invalid(
            name,
            format!("format must be `json` or `xml`, not `{other}`"),
        )),
    }
}

impl ToolModule for Xml {
    fn call(&mut self, tool: &str, args: &Args, _ctx: &Context) -> ToolResult<Value> {
        match tool {
            "read_network" => {
                let path = args.str("path")?;
                let text = read_file("path", Path::new(path))?;
                let net = if text.trim_start().starts_with('<') {
                    netxml::from_xml(&text)
                } else {
                    trafficmcp_core::RoadNetwork::from_json(&text)
                }
                .map_err(|e| ToolError::from_core_param("path", e))?;
                Ok(to_value(&net))
            }
            "write_network" => {
                let net = args.network("network")?;
                let path = args.str("path")?;
                let xml = match args.opt_str("format")? {
                    Some(f) => format_param("format", f)?,
                    None => path.ends_with(".xml"),
                };
                let text = if xml {
                    netxml::to_xml(&net)
                } else {
                    net.to_json()
                };
                write_file(Path::new(path), &text)?;
                Ok(json!({ "path": path, "format": if xml { "xml" } else { "json" } }))
            }
            "convert_network_format" => {
                let net = args.network("network")?;
                let document = if format_param("to", args.str("to")?)? {
                    netxml::to_xml(&net)
                } else {
                    net.to_json()
                };
                Ok(json!({ "document": document }))
            }
            other => Err(unknown_tool("xml", other)),
        }
    }
}
