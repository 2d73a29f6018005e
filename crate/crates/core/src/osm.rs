//! Conversion of an OpenStreetMap XML extract into a [`RoadNetwork`].
//!
//! Only `node`, `way`, `nd` and `tag` elements are read. Ways whose `highway`
//! tag is in [`HIGHWAY_CLASSES`] are kept; every consecutive node pair of a
//! kept way becomes one edge per permitted direction. Coordinates are
//! projected equirectangularly about the centre of the kept nodes' bounding
//! box.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::network::{Edge, Node, RoadNetwork, SAT_FLOW_PER_LANE_VPS};

const EARTH_RADIUS_M: f64 = 6_371_000.0;
const MIN_EDGE_LENGTH_M: f64 = 1.0;

pub const HIGHWAY_CLASSES: [&str; 6] = [
    "motorway",
    "primary",
    "secondary",
    "tertiary",
    "residential",
    "unclassified",
];

pub fn default_speed_mps(highway: &str) -> f64 {
    match highway {
        "motorway" => 27.8,
        "primary" => 16.7,
        "secondary" => 13.9,
        "tertiary" => 11.1,
        _ => 8.3,
    }
}

/// Parses `maxspeed` values such as `50`, `50 km/h` or `30 mph`.
pub fn parse_maxspeed(raw: &str) -> Option<f64> {
    let raw = raw.trim();
    let end = raw
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(raw.len());
    let value: f64 = raw[..end].parse().ok()?;
    if value <= 0.0 {
        return None;
    }
    let unit = raw[end..].trim();
    let kmh = if unit.eq_ignore_ascii_case("mph") {
        value * 1.609_344
    } else if unit.is_empty()
        || unit.eq_ignore_ascii_case("km/h")
        || unit.eq_ignore_ascii_case("kmh")
    {
        value
    } else {
        return None;
    };
    Some(kmh / 3.6)
}

struct OsmNode {
    id: String,
    lat: f64,
    lon: f64,
    traffic_signals: bool,
}

struct OsmWay {
    id: String,
    refs: Vec<String>,
    highway: String,
    oneway: Direction,
    maxspeed: Option<f64>,
    lanes: Option<u32>,
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Both,
    Forward,
    Backward,
}

fn line_of(doc: &roxmltree::Document, node: roxmltree::Node) -> usize {
    doc.text_pos_at(node.range().start).row as usize
}

fn attr<'a>(
    doc: &roxmltree::Document,
    node: roxmltree::Node<'a, 'a>,
    name: &str,
) -> Result<&'a str> {
    node.attribute(name).ok_or_else(|| {
        Error::parse(
            "OSM XML",
            Some(line_of(doc, node)),
            format!("<{}> lacks attribute `{name}`", node.tag_name().name()),
        )
    })
}

fn coord(doc: &roxmltree::Document, node: roxmltree::Node, name: &str) -> Result<f64> {
    let raw = attr(doc, node, name)?;
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            Error::parse(
                "OSM XML",
                Some(line_of(doc, node)),
                format!("`{name}` is not a number: {raw:?}"),
            )
        })
}

fn tags<'a>(node: roxmltree::Node<'a, 'a>) -> HashMap<&'a str, &'a str> {
    node.children()
        .filter(|c| c.has_tag_name("tag"))
        .filter_map(|c| Some((c.attribute("k")?, c.attribute("v")?)))
        .collect()
}

pub fn convert_osm(document: &str) -> Result<RoadNetwork> {
    let doc = roxmltree::Document::parse(document)
        .map_err(|e| Error::parse("OSM XML", Some(e.pos().row as usize), e.to_string()))?;

    let mut nodes: Vec<OsmNode> = Vec::new();
    let mut ways: Vec<OsmWay> = Vec::new();
    for el in doc.root_element().children().filter(|n| n.is_element()) {
        match el.tag_name().name() {
            "node" => {
                let t = tags(el);
                nodes.push(OsmNode {
                    id: attr(&doc, el, "id")?.to_string(),
                    lat: coord(&doc, el, "lat")?,
                    lon: coord(&doc, el, "lon")?,
                    traffic_signals: t.get("highway") == Some(&"traffic_signals"),
                });
            }
            "way" => {
                let t = tags(el);
                let Some(&highway) = t.get("highway") else {
                    continue;
                };
                if !HIGHWAY_CLASSES.contains(&highway) {
                    continue;
                }
                let refs = el
                    .children()
                    .filter(|c| c.has_tag_name("nd"))
                    .map(|c| attr(&doc, c, "ref").map(str::to_string))
                    .collect::<Result<Vec<_>>>()?;
                let oneway = match t.get("oneway").copied() {
                    Some("yes" | "true" | "1") => Direction::Forward,
                    Some("-1" | "reverse") => Direction::Backward,
                    Some("no" | "false" | "0") => Direction::Both,
                    _ if highway == "motorway" => Direction::Forward,
                    _ => Direction::Both,
                };
                ways.push(OsmWay {
                    id: attr(&doc, el, "id")?.to_string(),
                    refs,
                    highway: highway.to_string(),
                    oneway,
                    maxspeed: t.get("maxspeed").and_then(|v| parse_maxspeed(v)),
                    lanes: t
                        .get("lanes")
                        .and_then(|v| v.trim().parse().ok())
                        .filter(|&l| l > 0),
                });
            }
            _ => {}
        }
    }

    let by_id: HashMap<&str, &OsmNode> = nodes.iter().map(|n| (n.id.as_str(), n)).collect();
    for way in &mut ways {
        way.refs.retain(|r| by_id.contains_key(r.as_str()));
        way.refs.dedup();
    }
    ways.retain(|w| w.refs.len() >= 2);
    if ways.is_empty() {
        return Err(Error::EmptyNetwork(
            "document contains no highway ways with at least two known nodes".into(),
        ));
    }

    let used: BTreeSet<&str> = ways
        .iter()
        .flat_map(|w| w.refs.iter().map(String::as_str))
        .collect();
    let kept: Vec<&OsmNode> = nodes
        .iter()
        .filter(|n| used.contains(n.id.as_str()))
        .collect();
    let (mut lat_min, mut lat_max, mut lon_min, mut lon_max) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for n in &kept {
        lat_min = lat_min.min(n.lat);
        lat_max = lat_max.max(n.lat);
        lon_min = lon_min.min(n.lon);
        lon_max = lon_max.max(n.lon);
    }
    let lat0 = (lat_min + lat_max) / 2.0;
    let lon0 = (lon_min + lon_max) / 2.0;
    let cos0 = lat0.to_radians().cos();
    let project = |n: &OsmNode| {
        (
            EARTH_RADIUS_M * (n.lon - lon0).to_radians() * cos0,
            EARTH_RADIUS_M * (n.lat - lat0).to_radians(),
        )
    };
    let xy: HashMap<&str, (f64, f64)> = kept.iter().map(|n| (n.id.as_str(), project(n))).collect();

    let mut edges = Vec::new();
    for way in &ways {
        let speed = way
            .maxspeed
            .unwrap_or_else(|| default_speed_mps(&way.highway));
        let lanes = match (way.lanes, way.oneway) {
            (Some(l), Direction::Both) => (l / 2).max(1),
            (Some(l), _) => l,
            (None, _) => 1,
        };
        for (seg, pair) in way.refs.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            let (ax, ay) = xy[a.as_str()];
            let (bx, by) = xy[b.as_str()];
            let length = ((bx - ax).powi(2) + (by - ay).powi(2))
                .sqrt()
                .max(MIN_EDGE_LENGTH_M);
            let make = |id: String, from: &String, to: &String| Edge {
                id,
                from: from.clone(),
                to: to.clone(),
                length_m: length,
                speed_mps: speed,
                lanes,
                sat_flow_vps: lanes as f64 * SAT_FLOW_PER_LANE_VPS,
            };
            if way.oneway != Direction::Backward {
                edges.push(make(format!("w{}_{seg}", way.id), a, b));
            }
            if way.oneway != Direction::Forward {
                edges.push(make(format!("w{}_{seg}_r", way.id), b, a));
            }
        }
    }

    let mut way_count: HashMap<&str, usize> = HashMap::new();
    for way in &ways {
        let distinct: BTreeSet<&str> = way.refs.iter().map(String::as_str).collect();
        for r in distinct {
            *way_count.entry(r).or_default() += 1;
        }
    }
    let mut legs: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    let mut incoming: HashMap<&str, usize> = HashMap::new();
    for e in &edges {
        legs.entry(e.from.as_str())
            .or_default()
            .insert(e.to.as_str());
        legs.entry(e.to.as_str())
            .or_default()
            .insert(e.from.as_str());
        *incoming.entry(e.to.as_str()).or_default() += 1;
    }

    let out_nodes = kept
        .iter()
        .map(|n| {
            let id = n.id.as_str();
            let signalized = n.traffic_signals
                && way_count.get(id).copied().unwrap_or(0) >= 2
                && legs.get(id).map_or(0, BTreeSet::len) >= 3
                && incoming.get(id).copied().unwrap_or(0) >= 2;
            let (x, y) = xy[id];
            Node {
                id: n.id.clone(),
                x,
                y,
                signalized,
            }
        })
        .collect();

    Ok(RoadNetwork {
        nodes: out_nodes,
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate_network;

    const THREE_NODES: &str = include_str!("../fixtures/osm/grid_small.osm.xml");
    const THREE_NODES_ONEWAY: &str = include_str!("../fixtures/osm/grid_small_oneway.osm.xml");
    const CROSSING: &str = include_str!("../fixtures/osm/signal_crossing.osm.xml");

    #[test]
    fn two_residential_ways_meeting_in_the_middle() {
        let net = convert_osm(THREE_NODES).unwrap();
        assert_eq!(net.nodes.len(), 3);
        assert_eq!(net.edges.len(), 4);
        assert!(net.nodes.iter().all(|n| !n.signalized));
        assert!(net.edges.iter().all(|e| e.speed_mps == 8.3));
        assert!(validate_network(&net).is_empty());
    }

    #[test]
    fn oneway_way_emits_single_direction() {
        let net = convert_osm(THREE_NODES_ONEWAY).unwrap();
        assert_eq!(net.edges.len(), 3);
        assert!(validate_network(&net).is_empty());
    }

    #[test]
    fn traffic_signal_tag_at_four_way_crossing() {
        let net = convert_osm(CROSSING).unwrap();
        let centre = net.nodes.iter().find(|n| n.id == "100").unwrap();
        assert!(centre.signalized);
        assert_eq!(net.signalized_nodes().count(), 1);
        assert!(validate_network(&net).is_empty());
    }

    #[test]
    fn projection_is_metric() {
        let net = convert_osm(THREE_NODES).unwrap();
        // 0.001 degrees of latitude is about 111 m.
        let e = &net.edges[0];
        assert!((e.length_m - 111.19).abs() < 0.1, "{}", e.length_m);
    }

    #[test]
    fn maxspeed_units() {
        assert_eq!(parse_maxspeed("36"), Some(10.0));
        assert_eq!(parse_maxspeed("36 km/h"), Some(10.0));
        assert!((parse_maxspeed("30 mph").unwrap() - 13.4112).abs() < 1e-9);
        assert_eq!(parse_maxspeed("signals"), None);
    }

    #[test]
    fn no_highways_is_an_empty_network() {
        let doc = r#"<osm><node id="1" lat="0" lon="0"/><way id="2"><nd ref="1"/><tag k="building" v="yes"/></way></osm>"#;
        assert!(matches!(convert_osm(doc), Err(Error::EmptyNetwork(_))));
    }

    #[test]
    fn malformed_xml_names_the_line() {
        let doc = "<osm>\n<node id=\"1\" lat=\"0\" lon=\"0\">\n</osm>";
        match convert_osm(doc) {
            Err(Error::Parse { line: Some(l), .. }) => assert!(l >= 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_coordinate_names_the_line() {
        let doc = "<osm>\n<node id=\"1\" lat=\"x\" lon=\"0\"/>\n</osm>";
        match convert_osm(doc) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, Some(2));
                assert!(message.contains("lat"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
