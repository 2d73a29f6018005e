use std::path::PathBuf;

use crate::osm_client::OsmClient;

/// Process-level settings shared by every tool call.
pub struct Context {
    /// Root for downloads and workflow run directories.
    pub workspace: PathBuf,
    pub osm: OsmClient,
}

impl Context {
    pub fn new(workspace: impl Into<PathBuf>, osm: OsmClient) -> Self {
        Context {
            workspace: workspace.into(),
            osm,
        }
    }

    /// `TRAFFICMCP_WORKSPACE` (default `./trafficmcp-workspace`) plus the
    /// OSM client's own environment.
    pub fn from_env() -> Self {
        let workspace = std::env::var_os("TRAFFICMCP_WORKSPACE")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("trafficmcp-workspace"));
        Context::new(workspace, OsmClient::from_env())
    }

    #[cfg(test)]
    pub(crate) fn for_tests() -> Self {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;

        use crate::osm_client::HttpTransport;

        static N: AtomicUsize = AtomicUsize::new(0);
        let dir = std::env::temp_dir().join(format!(
            "trafficmcp-unit-{}-{}",
            std::process::id(),
            N.fetch_add(1, Ordering::SeqCst)
        ));
        Context::new(
            dir,
            OsmClient::new("http://127.0.0.1:9", true, Arc::new(HttpTransport)),
        )
    }
}
