use serde_json::{json, Map, Value};
use thiserror::Error;

use trafficmcp_core::Error as CoreError;

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const TOOL_FAILED: i64 = -32000;
pub const TOOL_NOT_IMPORTED: i64 = -32001;
pub const UNKNOWN_MODULE: i64 = -32002;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    InvalidParams,
    UnknownTool,
    NotImported,
    UnknownModule,
    Failed,
}

impl ErrorKind {
    pub fn code(self) -> i64 {
        match self {
            ErrorKind::InvalidParams => INVALID_PARAMS,
            ErrorKind::UnknownTool => METHOD_NOT_FOUND,
            ErrorKind::NotImported => TOOL_NOT_IMPORTED,
            ErrorKind::UnknownModule => UNKNOWN_MODULE,
            ErrorKind::Failed => TOOL_FAILED,
        }
    }
}

/// A failed tool call, carrying what a client needs to react: the offending
/// parameter or module and whether retrying can help.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message}")]
pub struct ToolError {
    pub kind: ErrorKind,
    pub message: String,
    pub tool: Option<String>,
    pub param: Option<String>,
    pub module: Option<String>,
    pub retryable: bool,
    pub hint: Option<String>,
    /// Machine-readable parameter adjustments for a retry.
    pub adjust: Option<Value>,
    /// Step log of an aborted workflow.
    pub steps: Option<Value>,
}

impl ToolError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ToolError {
            kind,
            message: message.into(),
            tool: None,
            param: None,
            module: None,
            retryable: false,
            hint: None,
            adjust: None,
            steps: None,
        }
    }

    pub fn invalid(param: &str, message: impl Into<String>) -> Self {
        let mut e = ToolError::new(ErrorKind::InvalidParams, message);
        e.param = Some(param.to_string());
        e
    }

    pub fn failed(message: impl Into<String>) -> Self {
        ToolError::new(ErrorKind::Failed, message)
    }

    pub fn retryable(mut self, hint: impl Into<String>) -> Self {
        self.retryable = true;
        self.hint = Some(hint.into());
        self
    }

    pub fn with_tool(mut self, tool: &str) -> Self {
        self.tool.get_or_insert_with(|| tool.to_string());
        self
    }

    pub fn with_module(mut self, module: &str) -> Self {
        self.module = Some(module.to_string());
        self
    }

    pub fn with_adjust(mut self, adjust: Value) -> Self {
        self.adjust = Some(adjust);
        self
    }

    /// A core error raised while reading parameter `param`.
    pub fn from_core_param(param: &str, e: CoreError) -> Self {
        match e {
            CoreError::InvalidParams { param: p, message } => {
                ToolError::invalid(&p, format!("invalid parameter `{p}`: {message}"))
            }
            other => ToolError::invalid(param, other.to_string()),
        }
    }

    pub fn code(&self) -> i64 {
        self.kind.code()
    }

    pub fn data(&self) -> Value {
        let mut m = Map::new();
        let mut put = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), json!(v));
            }
        };
        put("tool", &self.tool);
        put("param", &self.param);
        put("module", &self.module);
        put("hint", &self.hint);
        m.insert("retryable".into(), json!(self.retryable));
        if let Some(a) = &self.adjust {
            m.insert("adjust".into(), a.clone());
        }
        if let Some(s) = &self.steps {
            m.insert("steps".into(), s.clone());
        }
        Value::Object(m)
    }
}

impl From<CoreError> for ToolError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::InvalidParams { param, .. } => {
                ToolError::invalid(&param.clone(), e.to_string())
            }
            _ => ToolError::failed(e.to_string()),
        }
    }
}

pub type ToolResult<T = Value> = Result<T, ToolError>;
