//! JSON-RPC tool server for traffic studies.
//!
//! Tools are grouped into modules that are imported on demand. Only the
//! base tools are visible until a client calls `import_module`.

pub mod context;
pub mod error;
pub mod modules;
pub mod osm_client;
pub mod params;
pub mod registry;
pub mod rpc;
pub mod transport;
pub mod workflows;

pub use context::Context;
pub use error::{ErrorKind, ToolError, ToolResult};
pub use registry::Registry;
pub use rpc::Server;
