//! Module catalogue and on-demand import.
//!
//! Until a module is imported the registry holds only its static
//! descriptors and a factory function; the module object is created by
//! `import_module` and kept for the life of the registry.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::context::Context;
use crate::error::{ErrorKind, ToolError, ToolResult};
use crate::modules::{self, ModuleSpec, ToolModule};
use crate::params::{Args, ParamSpec};

/// Base tools, callable without any import.
pub const BASE_TOOLS: [&str; 4] = [
    "get_module_description",
    "import_module",
    "workflow_sim_eval",
    "workflow_signal_opt",
];

/// Names that import another module.
pub const ALIASES: [(&str, &str); 1] = [("turn_defs", "route")];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToolDescriptor {
    pub name: &'static str,
    pub module: &'static str,
    pub description: &'static str,
    pub parameters: &'static [ParamSpec],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleStatus {
    Available,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogueEntry {
    pub description: &'static str,
    pub status: ModuleStatus,
    pub tool_names: Vec<&'static str>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImportResult {
    pub imported: Vec<String>,
    pub already: Vec<String>,
    pub tools_added: Vec<ToolDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegistryEvent {
    ModuleLoaded { module: String },
    ToolExecuted { tool: String, module: String },
}

pub type Observer = Box<dyn Fn(&RegistryEvent) + Send>;

pub struct Registry {
    specs: &'static [ModuleSpec],
    loaded: BTreeMap<&'static str, Box<dyn ToolModule>>,
    observer: Option<Observer>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new()
    }
}

pub fn base_descriptors() -> Vec<ToolDescriptor> {
    modules::BASE.iter().map(|t| t.descriptor("base")).collect()
}

pub fn resolve_alias(name: &str) -> &str {
    ALIASES
        .iter()
        .find(|(a, _)| *a == name)
        .map_or(name, |(_, target)| target)
}

impl Registry {
    pub fn new() -> Self {
        Registry {
            specs: modules::CATALOGUE,
            loaded: BTreeMap::new(),
            observer: None,
        }
    }

    /// Installs a hook that sees every module load and tool execution.
    pub fn set_observer(&mut self, observer: Observer) {
        self.observer = Some(observer);
    }

    fn emit(&self, event: RegistryEvent) {
        if let Some(o) = &self.observer {
            o(&event);
        }
    }

    fn spec(&self, module: &str) -> Option<&'static ModuleSpec> {
        self.specs.iter().find(|s| s.name == module)
    }

    pub fn is_imported(&self, module: &str) -> bool {
        self.loaded.contains_key(resolve_alias(module))
    }

    /// Number of module objects that exist; zero on a fresh registry.
    pub fn instantiated_count(&self) -> usize {
        self.loaded.len()
    }

    pub fn catalogue(&self) -> BTreeMap<&'static str, CatalogueEntry> {
        self.specs
            .iter()
            .map(|s| {
                let entry = CatalogueEntry {
                    description: s.description,
                    status: if self.loaded.contains_key(s.name) {
                        ModuleStatus::Imported
                    } else {
                        ModuleStatus::Available
                    },
                    tool_names: s.tools.iter().map(|t| t.name).collect(),
                    aliases: ALIASES
                        .iter()
                        .filter(|(_, t)| *t == s.name)
                        .map(|(a, _)| *a)
                        .collect(),
                };
                (s.name, entry)
            })
            .collect()
    }

    pub fn catalogue_json(&self) -> Value {
        json!({ "modules": self.catalogue() })
    }

    /// Imports each named module. Valid names are imported even when the
    /// list also contains unknown ones; the first unknown name is then
    /// reported as an error.
    pub fn import(&mut self, names: &[String]) -> ToolResult<ImportResult> {
        if names.is_empty() {
            return Err(ToolError::invalid(
                "names",
                "at least one module name is required",
            ));
        }
        let mut result = ImportResult {
            imported: Vec::new(),
            already: Vec::new(),
            tools_added: Vec::new(),
        };
        let mut unknown = None;
        for name in names {
            let Some(spec) = self.spec(resolve_alias(name)) else {
                unknown.get_or_insert_with(|| name.clone());
                continue;
            };
            if self.loaded.contains_key(spec.name) {
                result.already.push(name.clone());
                continue;
            }
            self.loaded.insert(spec.name, (spec.factory)());
            self.emit(RegistryEvent::ModuleLoaded {
                module: spec.name.to_string(),
            });
            result.imported.push(spec.name.to_string());
            result
                .tools_added
                .extend(spec.tools.iter().map(|t| t.descriptor(spec.name)));
        }
        match unknown {
            Some(bad) => {
                let known: Vec<&str> = self.specs.iter().map(|s| s.name).collect();
                Err(
                    ToolError::new(ErrorKind::UnknownModule, format!("unknown module `{bad}`"))
                        .with_module(&bad)
                        .retryable(format!("known modules: {}", known.join(", "))),
                )
            }
            None => Ok(result),
        }
    }

    /// Base tools followed by the tools of imported modules, catalogue order.
    pub fn list_tools(&self) -> Vec<ToolDescriptor> {
        let mut out = base_descriptors();
        for s in self.specs {
            if self.loaded.contains_key(s.name) {
                out.extend(s.tools.iter().map(|t| t.descriptor(s.name)));
            }
        }
        out
    }

    /// Module owning `tool`, imported or not.
    pub fn owner(&self, tool: &str) -> Option<&'static ModuleSpec> {
        self.specs
            .iter()
            .find(|s| s.tools.iter().any(|t| t.name == tool))
    }

    /// Calls a module tool. Base tools are handled by the server.
    pub fn call(&mut self, tool: &str, raw_args: &Value, ctx: &Context) -> ToolResult<Value> {
        let spec = self.owner(tool).ok_or_else(|| {
            ToolError::new(ErrorKind::UnknownTool, format!("unknown tool `{tool}`")).with_tool(tool)
        })?;
        let def = spec
            .tools
            .iter()
            .find(|t| t.name == tool)
            .expect("owner has tool");
        let Some(module) = self.loaded.get_mut(spec.name) else {
            return Err(ToolError::new(
                ErrorKind::NotImported,
                format!(
                    "tool `{tool}` belongs to module `{}`, which is not imported",
                    spec.name
                ),
            )
            .with_tool(tool)
            .with_module(spec.name)
            .retryable("import_module first"));
        };
        let args = Args::validate(def.params, raw_args).map_err(|e| e.with_tool(tool))?;
        let out = module.call(tool, &args, ctx).map_err(|e| e.with_tool(tool));
        self.emit(RegistryEvent::ToolExecuted {
            tool: tool.to_string(),
            module: spec.name.to_string(),
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex};

    #[test]
    fn fresh_catalogue_is_all_available() {
        let r = Registry::new();
        let c = r.catalogue();
        assert_eq!(c.len(), 9);
        assert!(c.values().all(|e| e.status == ModuleStatus::Available));
        assert_eq!(c["route"].aliases, ["turn_defs"]);
        assert_eq!(r.instantiated_count(), 0);
        assert_eq!(r.list_tools().len(), BASE_TOOLS.len());
    }

    #[test]
    fn import_is_idempotent_and_reports_repeats() {
        let mut r = Registry::new();
        let out = r.import(&["network".into(), "network".into()]).unwrap();
        assert_eq!(out.imported, ["network"]);
        assert_eq!(out.already, ["network"]);
        let names: Vec<_> = out.tools_added.iter().map(|t| t.name).collect();
        assert_eq!(names, ["generate_grid", "convert_osm", "validate_network"]);
        let before = r.list_tools();
        r.import(&["network".into()]).unwrap();
        assert_eq!(r.list_tools(), before);
    }

    #[test]
    fn alias_imports_target() {
        let mut r = Registry::new();
        let out = r.import(&["turn_defs".into()]).unwrap();
        assert_eq!(out.imported, ["route"]);
        assert!(r.is_imported("route"));
    }

    #[test]
    fn unknown_module_keeps_valid_imports() {
        let mut r = Registry::new();
        let err = r
            .import(&["xml".into(), "nosuchmodule".into()])
            .unwrap_err();
        assert_eq!(err.code(), crate::error::UNKNOWN_MODULE);
        assert_eq!(err.module.as_deref(), Some("nosuchmodule"));
        assert!(r.is_imported("xml"));
        let mut fresh = Registry::new();
        assert!(fresh.import(&["nosuchmodule".into()]).is_err());
        assert_eq!(fresh.catalogue(), Registry::new().catalogue());
    }

    #[test]
    fn unimported_tool_never_runs() {
        let events = Arc::new(Mutex::new(Vec::new()));
        let sink = events.clone();
        let mut r = Registry::new();
        r.set_observer(Box::new(move |e| sink.lock().unwrap().push(e.clone())));
        let ctx = Context::for_tests();
        let err = r
            .call("generate_grid", &json!({"rows": 3, "cols": 3}), &ctx)
            .unwrap_err();
        assert_eq!(err.code(), crate::error::TOOL_NOT_IMPORTED);
        assert_eq!(err.module.as_deref(), Some("network"));
        assert!(events.lock().unwrap().is_empty());
        r.import(&["network".into()]).unwrap();
        r.call("generate_grid", &json!({"rows": 3, "cols": 3}), &ctx)
            .unwrap();
        assert_eq!(
            *events.lock().unwrap(),
            [
                RegistryEvent::ModuleLoaded {
                    module: "network".into()
                },
                RegistryEvent::ToolExecuted {
                    tool: "generate_grid".into(),
                    module: "network".into()
                },
            ]
        );
    }
}
