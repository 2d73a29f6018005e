//! OSM extract download from an Overpass-compatible endpoint, with an
//! offline store of recorded extracts keyed by region name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{ToolError, ToolResult};
use crate::params::write_file;

pub const DEFAULT_ENDPOINT: &str = "https://overpass-api.de/api/interpreter";
pub const DEFAULT_TIMEOUT_S: f64 = 60.0;
/// Linear growth applied to a bounding box that returned no roads.
pub const BBOX_RETRY_SCALE: f64 = 1.2;

const EMBEDDED: [(&str, &str); 2] = [
    (
        "grid_small",
        include_str!("../fixtures/osm/grid_small.osm.xml"),
    ),
    (
        "chaoyang_district_beijing",
        include_str!("../fixtures/osm/chaoyang_district_beijing.osm.xml"),
    ),
];

#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    Timeout,
    Status(u16),
    Other(String),
}

/// Sends one Overpass query and returns the response body.
pub trait OverpassTransport: Send + Sync {
    fn fetch(
        &self,
        endpoint: &str,
        query: &str,
        timeout: Duration,
    ) -> Result<String, TransportError>;
}

/// Real HTTP transport (form-encoded POST).
pub struct HttpTransport;

impl OverpassTransport for HttpTransport {
    fn fetch(
        &self,
        endpoint: &str,
        query: &str,
        timeout: Duration,
    ) -> Result<String, TransportError> {
        let response = ureq::post(endpoint)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .send_form([("data", query)]);
        match response {
            Ok(mut r) => r.body_mut().read_to_string().map_err(map_ureq),
            Err(e) => Err(map_ureq(e)),
        }
    }
}

fn map_ureq(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::StatusCode(code) => TransportError::Status(code),
        ureq::Error::Timeout(_) => TransportError::Timeout,
        other => TransportError::Other(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl Bbox {
    pub fn check(&self) -> ToolResult<()> {
        let finite = [self.south, self.west, self.north, self.east]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.south.abs() > 90.0 || self.north.abs() > 90.0 {
            return Err(ToolError::invalid(
                "bbox",
                "coordinates must be finite degrees",
            ));
        }
        if !(self.south < self.north) {
            return Err(ToolError::invalid("bbox", "south must be below north"));
        }
        if !(self.west < self.east) {
            return Err(ToolError::invalid("bbox", "west must be below east"));
        }
        Ok(())
    }

    /// Same centre, each side scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Bbox {
        let (cy, cx) = (
            (self.south + self.north) / 2.0,
            (self.west + self.east) / 2.0,
        );
        let (hy, hx) = (
            (self.north - self.south) / 2.0 * factor,
            (self.east - self.west) / 2.0 * factor,
        );
        Bbox {
            south: cy - hy,
            west: cx - hx,
            north: cy + hy,
            east: cx + hx,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionQuery {
    pub bbox: Option<Bbox>,
    pub place_name: Option<String>,
    /// Name used for the saved file and the offline lookup.
    pub region: Option<String>,
    pub timeout_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Download {
    pub region: String,
    pub path: PathBuf,
    pub ways: usize,
    pub bytes: usize,
}

pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

pub fn overpass_query(q: &RegionQuery) -> String {
    let timeout = q.timeout_s.ceil() as u64;
    match (&q.bbox, &q.place_name) {
        (Some(b), _) => format!(
            "[out:xml][timeout:{timeout}];way[\"highway\"]({},{},{},{});(._;>;);out body;",
            b.south, b.west, b.north, b.east
        ),
        (None, Some(place)) => format!(
            "[out:xml][timeout:{timeout}];area[\"name\"=\"{}\"]->.a;way[\"highway\"](area.a);(._;>;);out body;",
            place.replace('"', "\\\"")
        ),
        (None, None) => String::new(),
    }
}

fn count_ways(doc: &str) -> usize {
    doc.matches("<way ").count() + doc.matches("<way>").count()
}

pub struct OsmClient {
    endpoint: String,
    offline: bool,
    transport: Arc<dyn OverpassTransport>,
    fixtures: BTreeMap<String, String>,
    fixture_dir: Option<PathBuf>,
}

impl OsmClient {
    pub fn new(
        endpoint: impl Into<String>,
        offline: bool,
        transport: Arc<dyn OverpassTransport>,
    ) -> Self {
        OsmClient {
            endpoint: endpoint.into(),
            offline,
            transport,
            fixtures: EMBEDDED
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            fixture_dir: None,
        }
    }

    /// Offline client answering only from the bundled fixtures.
    pub fn offline() -> Self {
        OsmClient::new(DEFAULT_ENDPOINT, true, Arc::new(HttpTransport))
    }

    /// Reads `TRAFFICMCP_OSM_ENDPOINT`, `TRAFFICMCP_OFFLINE` and
    /// `TRAFFICMCP_OSM_FIXTURES`.
    pub fn from_env() -> Self {
        let endpoint =
            std::env::var("TRAFFICMCP_OSM_ENDPOINT").unwrap_or_else(|_| DEFAULT_ENDPOINT.into());
        let offline = std::env::var("TRAFFICMCP_OFFLINE")
            .is_ok_and(|v| v == "1" || v.eq_ignore_ascii_case("true"));
        let mut c = OsmClient::new(endpoint, offline, Arc::new(HttpTransport));
        c.fixture_dir = std::env::var_os("TRAFFICMCP_OSM_FIXTURES").map(PathBuf::from);
        c
    }

    pub fn with_fixture(mut self, region: &str, document: &str) -> Self {
        self.fixtures
            .insert(region.to_string(), document.to_string());
        self
    }

    pub fn is_offline(&self) -> bool {
        self.offline
    }

    fn fixture(&self, region: &str) -> Option<String> {
        if let Some(dir) = &self.fixture_dir {
            if let Ok(text) = std::fs::read_to_string(dir.join(format!("{region}.osm.xml"))) {
                return Some(text);
            }
        }
        self.fixtures.get(region).cloned()
    }

    pub fn region_name(q: &RegionQuery) -> String {
        if let Some(r) = &q.region {
            return slug(r);
        }
        match (&q.place_name, &q.bbox) {
            (Some(p), _) => slug(p),
            (None, Some(b)) => slug(&format!(
                "bbox {} {} {} {}",
                b.south, b.west, b.north, b.east
            )),
            (None, None) => String::new(),
        }
    }

    /// Fetches the extract and saves it as `<workspace>/<region>.osm.xml`.
    pub fn download(&self, q: &RegionQuery, workspace: &Path) -> ToolResult<(Download, String)> {
        match (&q.bbox, &q.place_name) {
            (Some(b), None) => b.check()?,
            (None, Some(p)) if !p.trim().is_empty() => {}
            (None, Some(_)) => return Err(ToolError::invalid("place_name", "must not be empty")),
            _ => {
                return Err(ToolError::invalid(
                    "bbox",
                    "give exactly one of `bbox` and `place_name`",
                ))
            }
        }
        if !(q.timeout_s > 0.0 && q.timeout_s.is_finite()) {
            return Err(ToolError::invalid("timeout_s", "must be positive"));
        }
        let region = Self::region_name(q);
        if region.is_empty() {
            return Err(ToolError::invalid(
                "region",
                "region name is empty after normalisation",
            ));
        }

        let document = if self.offline {
            self.fixture(&region).ok_or_else(|| {
                let mut known: Vec<String> = self.fixtures.keys().cloned().collect();
                known.sort();
                ToolError::failed(format!(
                    "offline mode has no recorded extract for region `{region}` (recorded: {})",
                    known.join(", ")
                ))
            })?
        } else {
            let query = overpass_query(q);
            self.transport
                .fetch(&self.endpoint, &query, Duration::from_secs_f64(q.timeout_s))
                .map_err(|e| match e {
                    TransportError::Timeout => ToolError::failed(format!(
                        "request to {} timed out after {} s",
                        self.endpoint, q.timeout_s
                    ))
                    .retryable("retry with a longer timeout")
                    .with_adjust(json!({ "timeout_s": q.timeout_s * 2.0 })),
                    TransportError::Status(code @ (429 | 502 | 503 | 504)) => {
                        ToolError::failed(format!("endpoint answered HTTP {code}"))
                            .retryable("endpoint busy; retry")
                    }
                    TransportError::Status(code) => {
                        ToolError::failed(format!("endpoint answered HTTP {code}"))
                    }
                    TransportError::Other(m) => ToolError::failed(format!("request failed: {m}")),
                })?
        };

        let ways = count_ways(&document);
        if ways == 0 {
            let err = ToolError::failed(format!("no roads found for region `{region}`"));
            return Err(match &q.bbox {
                Some(b) => err
                    .retryable("enlarge bbox by 20%")
                    .with_adjust(json!({ "bbox": b.scaled(BBOX_RETRY_SCALE) })),
                None => err,
            });
        }
        let path = workspace.join(format!("{region}.osm.xml"));
        write_file(&path, &document)?;
        let bytes = document.len();
        Ok((
            Download {
                region,
                path,
                ways,
                bytes,
            },
            document,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize, Result<String, TransportError>);

    impl OverpassTransport for Counting {
        fn fetch(&self, _: &str, _: &str, _: Duration) -> Result<String, TransportError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            self.1.clone()
        }
    }

    fn query_bbox(region: Option<&str>) -> RegionQuery {
        RegionQuery {
            bbox: Some(Bbox {
                south: 39.89,
                west: 116.39,
                north: 39.91,
                east: 116.41,
            }),
            place_name: None,
            region: region.map(String::from),
            timeout_s: 5.0,
        }
    }

    #[test]
    fn slugs() {
        assert_eq!(
            slug("Chaoyang District, Beijing"),
            "chaoyang_district_beijing"
        );
        assert_eq!(slug("  grid_small "), "grid_small");
    }

    #[test]
    fn offline_never_uses_transport() {
        let t = Arc::new(Counting(AtomicUsize::new(0), Err(TransportError::Timeout)));
        let c = OsmClient::new("http://unused", true, t.clone());
        let dir = std::env::temp_dir().join(format!("trafficmcp-osm-{}", std::process::id()));
        let (d, doc) = c.download(&query_bbox(Some("grid_small")), &dir).unwrap();
        assert_eq!(d.ways, 2);
        assert!(doc.contains("<way"));
        assert_eq!(
            std::fs::read_to_string(dir.join("grid_small.osm.xml")).unwrap(),
            doc
        );
        assert_eq!(t.0.load(Ordering::SeqCst), 0);
        let _ = std::fs::remove_dir_all(dir);
    }

    #[test]
    fn bad_bbox_is_rejected_before_any_request() {
        let t = Arc::new(Counting(AtomicUsize::new(0), Ok(String::new())));
        let c = OsmClient::new("http://unused", false, t.clone());
        let mut q = query_bbox(None);
        q.bbox = Some(Bbox {
            south: 40.0,
            west: 116.0,
            north: 39.0,
            east: 117.0,
        });
        let e = c.download(&q, Path::new("/nonexistent")).unwrap_err();
        assert_eq!(e.param.as_deref(), Some("bbox"));
        assert_eq!(t.0.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn timeout_is_retryable() {
        let t = Arc::new(Counting(AtomicUsize::new(0), Err(TransportError::Timeout)));
        let c = OsmClient::new("http://mock", false, t);
        let e = c
            .download(&query_bbox(None), Path::new("/nonexistent"))
            .unwrap_err();
        assert!(e.retryable);
        assert_eq!(e.adjust.unwrap()["timeout_s"], 10.0);
    }

    #[test]
    fn empty_bbox_suggests_enlarging() {
        let t = Arc::new(Counting(AtomicUsize::new(0), Ok("<osm></osm>".into())));
        let c = OsmClient::new("http://mock", false, t);
        let e = c
            .download(&query_bbox(None), Path::new("/nonexistent"))
            .unwrap_err();
        assert!(e.retryable);
        assert_eq!(e.hint.as_deref(), Some("enlarge bbox by 20%"));
        let b: Bbox = serde_json::from_value(e.adjust.unwrap()["bbox"].clone()).unwrap();
        assert!((b.north - b.south - 0.024).abs() < 1e-9);
    }

    #[test]
    fn queries_follow_template() {
        let q = overpass_query(&query_bbox(None));
        assert!(q.contains("way[\"highway\"](39.89,116.39,39.91,116.41);(._;>;);out body;"));
        let p = RegionQuery {
            bbox: None,
            place_name: Some("Chaoyang District".into()),
            region: None,
            timeout_s: 30.0,
        };
        assert!(overpass_query(&p).contains("area[\"name\"=\"Chaoyang District\"]"));
    }
}
