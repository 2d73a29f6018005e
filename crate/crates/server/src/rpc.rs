//! JSON-RPC 2.0 message handling and the tool-server method surface.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::context::Context;
use crate::error::{
    ToolError, ToolResult, INVALID_PARAMS, INVALID_REQUEST, METHOD_NOT_FOUND, PARSE_ERROR,
};
use crate::modules::{self, to_value};
use crate::params::Args;
use crate::registry::Registry;
use crate::workflows;

pub const PROTOCOL_VERSION: &str = "2024-11-05";
pub const SERVER_NAME: &str = "trafficmcp";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RpcId {
    Num(i64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcRequest {
    pub jsonrpc: String,
    /// `None` marks a notification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<RpcId>,
    pub method: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
}

impl RpcRequest {
    pub fn new(id: impl Into<Option<RpcId>>, method: &str, params: Value) -> Self {
        RpcRequest {
            jsonrpc: "2.0".into(),
            id: id.into(),
            method: method.into(),
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

impl From<&ToolError> for RpcError {
    fn from(e: &ToolError) -> Self {
        RpcError {
            code: e.code(),
            message: e.message.clone(),
            data: Some(e.data()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Result(Value),
    Error(RpcError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcResponse {
    pub jsonrpc: String,
    pub id: Option<RpcId>,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl RpcResponse {
    pub fn result(id: Option<RpcId>, result: Value) -> Self {
        RpcResponse {
            jsonrpc: "2.0".into(),
            id,
            outcome: Outcome::Result(result),
        }
    }

    pub fn error(
        id: Option<RpcId>,
        code: i64,
        message: impl Into<String>,
        data: Option<Value>,
    ) -> Self {
        let error = RpcError {
            code,
            message: message.into(),
            data,
        };
        RpcResponse {
            jsonrpc: "2.0".into(),
            id,
            outcome: Outcome::Error(error),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}

/// Registry plus context; one instance serves one connection at a time.
pub struct Server {
    registry: Registry,
    ctx: Context,
}

impl Server {
    pub fn new(ctx: Context) -> Self {
        Server {
            registry: Registry::new(),
            ctx,
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut Registry {
        &mut self.registry
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    /// Handles one raw message. Returns `None` for notifications.
    pub fn handle_bytes(&mut self, raw: &[u8]) -> Option<String> {
        let resp = match std::str::from_utf8(raw) {
            Ok(text) => return self.handle_line(text),
            Err(e) => RpcResponse::error(
                None,
                PARSE_ERROR,
                format!("message is not UTF-8: {e}"),
                None,
            ),
        };
        Some(resp.to_line())
    }

    pub fn handle_line(&mut self, line: &str) -> Option<String> {
        let msg: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                return Some(
                    RpcResponse::error(None, PARSE_ERROR, format!("parse error: {e}"), None)
                        .to_line(),
                )
            }
        };
        self.handle_value(msg).map(|r| r.to_line())
    }

    pub fn handle_value(&mut self, msg: Value) -> Option<RpcResponse> {
        let obj = match msg {
            Value::Object(o) => o,
            Value::Array(_) => {
                return Some(RpcResponse::error(
                    None,
                    INVALID_REQUEST,
                    "batch requests are not supported",
                    None,
                ))
            }
            _ => {
                return Some(RpcResponse::error(
                    None,
                    INVALID_REQUEST,
                    "request must be an object",
                    None,
                ))
            }
        };
        let is_notification = !obj.contains_key("id");
        let id = match obj.get("id") {
            None | Some(Value::Null) => None,
            Some(v) => match serde_json::from_value::<RpcId>(v.clone()) {
                Ok(id) if !matches!(v, Value::Number(n) if !n.is_i64()) => Some(id),
                _ => {
                    return Some(RpcResponse::error(
                        None,
                        INVALID_REQUEST,
                        "id must be an integer or a string",
                        None,
                    ))
                }
            },
        };
        let invalid = |msg: &str| Some(RpcResponse::error(id.clone(), INVALID_REQUEST, msg, None));
        if obj.get("jsonrpc").and_then(Value::as_str) != Some("2.0") {
            return invalid("`jsonrpc` must be \"2.0\"");
        }
        let method = match obj.get("method").and_then(Value::as_str) {
            Some(m) if !m.is_empty() => m.to_string(),
            _ => return invalid("`method` must be a non-empty string"),
        };
        let params = obj.get("params").cloned().unwrap_or(Value::Null);
        if !matches!(params, Value::Null | Value::Object(_) | Value::Array(_)) {
            return invalid("`params` must be an object or an array");
        }
        let outcome = self.dispatch(&method, params);
        if is_notification {
            return None;
        }
        Some(match outcome {
            Ok(v) => RpcResponse::result(id, v),
            Err(e) => RpcResponse {
                jsonrpc: "2.0".into(),
                id,
                outcome: Outcome::Error(e),
            },
        })
    }

    fn dispatch(&mut self, method: &str, params: Value) -> Result<Value, RpcError> {
        match method {
            "initialize" => Ok(json!({
                "protocolVersion": PROTOCOL_VERSION,
                "serverInfo": { "name": SERVER_NAME, "version": env!("CARGO_PKG_VERSION") },
                "capabilities": { "tools": {} },
            })),
            "notifications/initialized" | "ping" => Ok(json!({})),
            "tools/list" => Ok(json!({ "tools": to_value(&self.registry.list_tools()) })),
            "tools/call" => {
                let (name, args) = call_params(params)?;
                self.call_tool(&name, &args).map_err(|e| RpcError::from(&e))
            }
            other => Err(RpcError {
                code: METHOD_NOT_FOUND,
                message: format!("unknown method `{other}`"),
                data: None,
            }),
        }
    }

    /// Runs a base tool or a tool of an imported module.
    pub fn call_tool(&mut self, name: &str, args: &Value) -> ToolResult<Value> {
        let Some(def) = modules::BASE.iter().find(|t| t.name == name) else {
            return self.registry.call(name, args, &self.ctx);
        };
        let args = Args::validate(def.params, args).map_err(|e| e.with_tool(name))?;
        let out = match name {
            "get_module_description" => Ok(self.registry.catalogue_json()),
            "import_module" => {
                let names = args.strings("names")?;
                self.registry.import(&names).map(|r| to_value(&r))
            }
            "workflow_sim_eval" => workflows::sim_eval(&args, &self.ctx),
            "workflow_signal_opt" => workflows::signal_opt(&args, &self.ctx),
            _ => unreachable!("every base tool is dispatched"),
        };
        out.map_err(|e| e.with_tool(name))
    }
}

fn call_params(params: Value) -> Result<(String, Value), RpcError> {
    let bad = |message: &str, param: &str| RpcError {
        code: INVALID_PARAMS,
        message: message.into(),
        data: Some(json!({ "param": param, "retryable": false })),
    };
    let mut obj: Map<String, Value> = match params {
        Value::Object(o) => o,
        _ => {
            return Err(bad(
                "tools/call needs an object with `name` and `arguments`",
                "params",
            ))
        }
    };
    let name = match obj.remove("name") {
        Some(Value::String(s)) => s,
        _ => return Err(bad("tools/call needs a string `name`", "name")),
    };
    let args = obj.remove("arguments").unwrap_or(Value::Null);
    Ok((name, args))
}
