//! The importable tool modules and their static descriptors.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::context::Context;
use crate::error::{ToolError, ToolResult};
use crate::params::{opt, req, write_file, Args, ParamSpec, ParamType as T};
use crate::registry::ToolDescriptor;

mod detector;
mod district;
mod import_tool;
mod metrics;
mod network;
mod route;
mod simulation;
mod traffic_signal;
mod xml;

pub use simulation::controllers;
pub use traffic_signal::{DEFAULT_CLEARANCE_S, DEFAULT_CYCLE_S, DEFAULT_PROGRESSION_MPS};

pub struct ToolDef {
    pub name: &'static str,
    pub description: &'static str,
    pub params: &'static [ParamSpec],
}

impl ToolDef {
    pub fn descriptor(&self, module: &'static str) -> ToolDescriptor {
        ToolDescriptor {
            name: self.name,
            module,
            description: self.description,
            parameters: self.params,
        }
    }
}

/// An imported module's live object.
pub trait ToolModule: Send {
    fn call(&mut self, tool: &str, args: &Args, ctx: &Context) -> ToolResult<Value>;
}

pub struct ModuleSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub tools: &'static [ToolDef],
    pub factory: fn() -> Box<dyn ToolModule>,
}

pub const BASE: &[ToolDef] = &[
    ToolDef {
        name: "get_module_description",
        description: "List every module with its status and tool names",
        params: &[],
    },
    ToolDef {
        name: "import_module",
        description: "Load modules so that their tools become callable",
        params: &[req("names", T::Array)],
    },
    ToolDef {
        name: "workflow_sim_eval",
        description: "Build a network and demand, simulate each signal strategy and compare them",
        params: &[
            opt("grid", T::Object),
            opt("osm", T::Object),
            opt("network", T::Document),
            req("demand", T::Object),
            opt("strategies", T::Array),
            opt("horizon_s", T::Number),
            opt("cycle_s", T::Integer),
            opt("clearance_s", T::Integer),
            opt("progression_speed_mps", T::Number),
        ],
    },
    ToolDef {
        name: "workflow_signal_opt",
        description: "Simulate OD demand under given plans, re-time the most congested junctions and report the change",
        params: &[
            req("network", T::Document),
            req("od", T::Document),
            req("districts", T::Document),
            req("tls", T::Document),
            opt("k", T::Integer),
            opt("horizon_s", T::Number),
            opt("progression_speed_mps", T::Number),
            opt("seed", T::Integer),
        ],
    },
];

pub const CATALOGUE: &[ModuleSpec] = &[
    network::SPEC,
    route::SPEC,
    traffic_signal::SPEC,
    detector::SPEC,
    district::SPEC,
    xml::SPEC,
    import_tool::SPEC,
    simulation::SPEC,
    metrics::SPEC,
];

/// Creates a module object outside the registry, for composite tools.
pub fn instantiate(module: &str) -> Option<Box<dyn ToolModule>> {
    CATALOGUE
        .iter()
        .find(|s| s.name == module)
        .map(|s| (s.factory)())
}

/// Module and schema of a catalogued tool.
pub fn find_tool(tool: &str) -> Option<(&'static ModuleSpec, &'static ToolDef)> {
    CATALOGUE
        .iter()
        .find_map(|s| s.tools.iter().find(|t| t.name == tool).map(|t| (s, t)))
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Returns `payload`, or writes `artifact` to the `output` path and returns
/// `summary` with that path added.
pub(crate) fn deliver(
    args: &Args,
    payload: impl FnOnce() -> Value,
    artifact: impl FnOnce() -> String,
    summary: Value,
) -> ToolResult<Value> {
    match args.output()? {
        None => Ok(payload()),
        Some(path) => {
            write_file(&path, &artifact())?;
            Ok(with_path(summary, &path))
        }
    }
}

pub(crate) fn with_path(summary: Value, path: &Path) -> Value {
    let mut m = match summary {
        Value::Object(m) => m,
        _ => Default::default(),
    };
    m.insert("path".into(), json!(path.to_string_lossy()));
    Value::Object(m)
}

pub(crate) fn unknown_tool(module: &str, tool: &str) -> ToolError {
    ToolError::new(
        crate::error::ErrorKind::UnknownTool,
        format!("module `{module}` has no tool `{tool}`"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn tool_names_are_unique() {
        let mut seen = BTreeSet::new();
        for t in BASE
            .iter()
            .chain(CATALOGUE.iter().flat_map(|s| s.tools.iter()))
        {
            assert!(seen.insert(t.name), "duplicate tool {}", t.name);
        }
    }

    #[test]
    fn every_tool_dispatches() {
        // Calling with no arguments must fail on schema or content, never
        // with "no such tool".
        let ctx = Context::for_tests();
        for s in CATALOGUE {
            let mut m = (s.factory)();
            for t in s.tools {
                let r = m.call(t.name, &Args::default(), &ctx);
                if let Err(e) = r {
                    assert_ne!(e.kind, crate::error::ErrorKind::UnknownTool, "{}", t.name);
                }
            }
        }
    }
}
