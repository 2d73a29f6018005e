//! Plain-XML rendering of a [`RoadNetwork`], the interchange format of the
//! `xml` tool module.
//!
//! ```xml
//! <net>
//!   <node id="n_0_0" x="0" y="0" signalized="false"/>
//!   <edge id="e1" from="a" to="b" length_m="100" speed_mps="10" lanes="1" sat_flow_vps="0.5"/>
//! </net>
//! ```

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::network::{Edge, Node, RoadNetwork};

fn escape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn to_xml(net: &RoadNetwork) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<net>\n");
    for n in &net.nodes {
        let _ = writeln!(
            out,
            "  <node id=\"{}\" x=\"{}\" y=\"{}\" signalized=\"{}\"/>",
            escape(&n.id),
            n.x,
            n.y,
            n.signalized
        );
    }
    for e in &net.edges {
        let _ = writeln!(
            out,
            "  <edge id=\"{}\" from=\"{}\" to=\"{}\" length_m=\"{}\" speed_mps=\"{}\" lanes=\"{}\" sat_flow_vps=\"{}\"/>",
            escape(&e.id),
            escape(&e.from),
            escape(&e.to),
            e.length_m,
            e.speed_mps,
            e.lanes,
            e.sat_flow_vps
        );
    }
    out.push_str("</net>\n");
    out
}

pub fn from_xml(text: &str) -> Result<RoadNetwork> {
    let doc = roxmltree::Document::parse(text)
        .map_err(|e| Error::parse("network XML", Some(e.pos().row as usize), e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("net") {
        return Err(Error::parse(
            "network XML",
            Some(1),
            "root element must be <net>",
        ));
    }
    let field = |el: roxmltree::Node, name: &str| -> Result<String> {
        el.attribute(name).map(str::to_string).ok_or_else(|| {
            Error::parse(
                "network XML",
                Some(doc.text_pos_at(el.range().start).row as usize),
                format!("<{}> lacks `{name}`", el.tag_name().name()),
            )
        })
    };
    let parsed = |el: roxmltree::Node, name: &str| -> Result<f64> {
        let raw = field(el, name)?;
        raw.parse().map_err(|_| {
            Error::parse(
                "network XML",
                Some(doc.text_pos_at(el.range().start).row as usize),
                format!("`{name}` is not a number: {raw:?}"),
            )
        })
    };

    let mut net = RoadNetwork::default();
    for el in root.children().filter(|c| c.is_element()) {
        match el.tag_name().name() {
            "node" => net.nodes.push(Node {
                id: field(el, "id")?,
                x: parsed(el, "x")?,
                y: parsed(el, "y")?,
                signalized: field(el, "signalized")? == "true",
            }),
            "edge" => net.edges.push(Edge {
                id: field(el, "id")?,
                from: field(el, "from")?,
                to: field(el, "to")?,
                length_m: parsed(el, "length_m")?,
                speed_mps: parsed(el, "speed_mps")?,
                lanes: parsed(el, "lanes")? as u32,
                sat_flow_vps: parsed(el, "sat_flow_vps")?,
            }),
            _ => {}
        }
    }
    Ok(net)
}
