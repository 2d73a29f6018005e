//! Parameter schemas and typed access to tool arguments.
//!
//! Document-valued parameters (networks, trips, plans, ...) accept either
//! the document inline or a path to a file holding it. A string is taken as
//! inline content when it contains a newline or starts with `{`, `[` or `<`.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use trafficmcp_core::demand::{OdMatrix, RoutePlan, TripTable};
use trafficmcp_core::metrics::MetricsReport;
use trafficmcp_core::signal::{plans_from_csv, SignalPlan};
use trafficmcp_core::sim::SimOutput;
use trafficmcp_core::{netxml, DistrictSet, RoadNetwork};

use crate::error::{ToolError, ToolResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Integer,
    Number,
    String,
    Boolean,
    Object,
    Array,
    /// Inline document or file path.
    Document,
}

impl ParamType {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::Integer => "integer",
            ParamType::Number => "number",
            ParamType::String => "string",
            ParamType::Boolean => "boolean",
            ParamType::Object => "object",
            ParamType::Array => "array",
            ParamType::Document => "document",
        }
    }

    fn accepts(self, v: &Value) -> bool {
        match self {
            ParamType::Integer => v.as_i64().is_some() || v.as_u64().is_some(),
            ParamType::Number => v.is_number(),
            ParamType::String => v.is_string(),
            ParamType::Boolean => v.is_boolean(),
            ParamType::Object => v.is_object(),
            ParamType::Array => v.is_array(),
            ParamType::Document => v.is_string() || v.is_object() || v.is_array(),
        }
    }
}

impl Serialize for ParamType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
}

pub const fn req(name: &'static str, ty: ParamType) -> ParamSpec {
    ParamSpec {
        name,
        ty,
        required: true,
    }
}

pub const fn opt(name: &'static str, ty: ParamType) -> ParamSpec {
    ParamSpec {
        name,
        ty,
        required: false,
    }
}

/// Arguments of one call, already checked against the tool's schema.
#[derive(Debug, Clone, Default)]
pub struct Args {
    map: Map<String, Value>,
}

fn looks_inline(s: &str) -> bool {
    let t = s.trim_start();
    s.contains('\n') || t.starts_with('{') || t.starts_with('[') || t.starts_with('<')
}

impl Args {
    pub fn validate(specs: &[ParamSpec], raw: &Value) -> ToolResult<Args> {
        let map = match raw {
            Value::Null => Map::new(),
            Value::Object(m) => m.clone(),
            _ => {
                return Err(ToolError::invalid(
                    "arguments",
                    "arguments must be an object",
                ))
            }
        };
        for key in map.keys() {
            if !specs.iter().any(|s| s.name == key) {
                return Err(ToolError::invalid(
                    key,
                    format!("unknown parameter `{key}`"),
                ));
            }
        }
        for s in specs {
            match map.get(s.name) {
                None | Some(Value::Null) if s.required => {
                    return Err(ToolError::invalid(
                        s.name,
                        format!("missing required parameter `{}`", s.name),
                    ));
                }
                Some(v) if !v.is_null() && !s.ty.accepts(v) => {
                    return Err(ToolError::invalid(
                        s.name,
                        format!("parameter `{}` must be of type {}", s.name, s.ty.as_str()),
                    ));
                }
                _ => {}
            }
        }
        Ok(Args { map })
    }

    pub fn from_map(map: Map<String, Value>) -> Self {
        Args { map }
    }

    pub fn raw(&self) -> &Map<String, Value> {
        &self.map
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.map.get(name).filter(|v| !v.is_null())
    }

    pub fn has(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    fn need(&self, name: &str) -> ToolResult<&Value> {
        self.get(name)
            .ok_or_else(|| ToolError::invalid(name, format!("missing required parameter `{name}`")))
    }

    pub fn u64(&self, name: &str) -> ToolResult<u64> {
        self.need(name)?.as_u64().ok_or_else(|| {
            ToolError::invalid(name, format!("`{name}` must be a non-negative integer"))
        })
    }

    pub fn u64_or(&self, name: &str, default: u64) -> ToolResult<u64> {
        if self.has(name) {
            self.u64(name)
        } else {
            Ok(default)
        }
    }

    pub fn u32(&self, name: &str) -> ToolResult<u32> {
        u32::try_from(self.u64(name)?)
            .map_err(|_| ToolError::invalid(name, format!("`{name}` is too large")))
    }

    pub fn u32_or(&self, name: &str, default: u32) -> ToolResult<u32> {
        if self.has(name) {
            self.u32(name)
        } else {
            Ok(default)
        }
    }

    pub fn f64(&self, name: &str) -> ToolResult<f64> {
        self.need(name)?
            .as_f64()
            .ok_or_else(|| ToolError::invalid(name, format!("`{name}` must be a number")))
    }

    pub fn f64_or(&self, name: &str, default: f64) -> ToolResult<f64> {
        if self.has(name) {
            self.f64(name)
        } else {
            Ok(default)
        }
    }

    pub fn opt_f64(&self, name: &str) -> ToolResult<Option<f64>> {
        if self.has(name) {
            self.f64(name).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn str(&self, name: &str) -> ToolResult<&str> {
        self.need(name)?
            .as_str()
            .ok_or_else(|| ToolError::invalid(name, format!("`{name}` must be a string")))
    }

    pub fn opt_str(&self, name: &str) -> ToolResult<Option<&str>> {
        if self.has(name) {
            self.str(name).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn bool_or(&self, name: &str, default: bool) -> ToolResult<bool> {
        match self.get(name) {
            None => Ok(default),
            Some(v) => v
                .as_bool()
                .ok_or_else(|| ToolError::invalid(name, format!("`{name}` must be a boolean"))),
        }
    }

    /// Deserializes a structured (non-document) parameter.
    pub fn typed<T: DeserializeOwned>(&self, name: &str) -> ToolResult<T> {
        serde_json::from_value(self.need(name)?.clone())
            .map_err(|e| ToolError::invalid(name, format!("`{name}`: {e}")))
    }

    pub fn opt_typed<T: DeserializeOwned>(&self, name: &str) -> ToolResult<Option<T>> {
        if self.has(name) {
            self.typed(name).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn strings(&self, name: &str) -> ToolResult<Vec<String>> {
        self.typed(name)
    }

    /// Document text: inline content, serialized JSON, or file contents.
    pub fn text(&self, name: &str) -> ToolResult<String> {
        match self.need(name)? {
            Value::String(s) if looks_inline(s) => Ok(s.clone()),
            Value::String(path) => read_file(name, Path::new(path)),
            v => Ok(v.to_string()),
        }
    }

    fn json_doc(&self, name: &str) -> ToolResult<Value> {
        match self.need(name)? {
            Value::String(_) => {
                let text = self.text(name)?;
                serde_json::from_str(&text).map_err(|e| {
                    ToolError::invalid(
                        name,
                        format!("`{name}` is not valid JSON (line {}): {e}", e.line()),
                    )
                })
            }
            v => Ok(v.clone()),
        }
    }

    pub fn document<T: DeserializeOwned>(&self, name: &str) -> ToolResult<T> {
        serde_json::from_value(self.json_doc(name)?)
            .map_err(|e| ToolError::invalid(name, format!("`{name}` has the wrong shape: {e}")))
    }

    pub fn network(&self, name: &str) -> ToolResult<RoadNetwork> {
        if let Some(Value::String(_)) = self.get(name) {
            let text = self.text(name)?;
            if text.trim_start().starts_with('<') {
                return netxml::from_xml(&text).map_err(|e| ToolError::from_core_param(name, e));
            }
        }
        self.document(name)
    }

    pub fn trips(&self, name: &str) -> ToolResult<TripTable> {
        let t: TripTable = self.document(name)?;
        TripTable::new(t.trips).map_err(|e| ToolError::from_core_param(name, e))
    }

    pub fn routes(&self, name: &str) -> ToolResult<RoutePlan> {
        self.document(name)
    }

    pub fn districts(&self, name: &str) -> ToolResult<DistrictSet> {
        self.document(name)
    }

    pub fn sim_output(&self, name: &str) -> ToolResult<SimOutput> {
        self.document(name)
    }

    pub fn metrics(&self, name: &str) -> ToolResult<MetricsReport> {
        self.document(name)
    }

    pub fn od(&self, name: &str) -> ToolResult<OdMatrix> {
        OdMatrix::from_csv(&self.text(name)?).map_err(|e| ToolError::from_core_param(name, e))
    }

    /// Signal plans as CSV, a JSON list, or `{"plans": [...]}`.
    pub fn plans(&self, name: &str) -> ToolResult<Vec<SignalPlan>> {
        let v = match self.need(name)? {
            Value::String(_) => {
                let text = self.text(name)?;
                let t = text.trim_start();
                if !(t.starts_with('[') || t.starts_with('{')) {
                    return plans_from_csv(&text).map_err(|e| ToolError::from_core_param(name, e));
                }
                serde_json::from_str(&text).map_err(|e| {
                    ToolError::invalid(name, format!("`{name}` is not valid JSON: {e}"))
                })?
            }
            v => v.clone(),
        };
        let list = match v {
            Value::Object(mut m) => m.remove("plans").unwrap_or(Value::Null),
            other => other,
        };
        let plans: Vec<SignalPlan> = serde_json::from_value(list)
            .map_err(|e| ToolError::invalid(name, format!("`{name}` has the wrong shape: {e}")))?;
        for p in &plans {
            p.check().map_err(|e| ToolError::from_core_param(name, e))?;
        }
        Ok(plans)
    }

    pub fn output(&self) -> ToolResult<Option<PathBuf>> {
        Ok(self.opt_str("output")?.map(PathBuf::from))
    }
}

pub fn read_file(param: &str, path: &Path) -> ToolResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| ToolError::invalid(param, format!("cannot read `{}`: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: &str) -> ToolResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| ToolError::failed(format!("cannot create `{}`: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| ToolError::failed(format!("cannot write `{}`: {e}", path.display())))
}
