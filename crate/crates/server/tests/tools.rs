use serde_json::{json, Value};

use trafficmcp_server::osm_client::OsmClient;
use trafficmcp_server::{Context, Server};

fn server(dir: &tempfile::TempDir) -> Server {
    let mut s = Server::new(Context::new(dir.path(), OsmClient::offline()));
    let all = [
        "network",
        "route",
        "traffic_signal",
        "detector",
        "district",
        "xml",
        "import_tool",
        "simulation",
        "metrics",
    ];
    s.call_tool("import_module", &json!({ "names": all }))
        .unwrap();
    s
}

fn path(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

#[test]
fn output_writes_the_artifact_and_returns_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = server(&dir);
    let inline = s
        .call_tool("generate_grid", &json!({"rows": 3, "cols": 4}))
        .unwrap();
    let out = path(&dir, "g.json");
    let summary = s
        .call_tool(
            "generate_grid",
            &json!({"rows": 3, "cols": 4, "output": out}),
        )
        .unwrap();
    assert_eq!(summary["path"], out);
    assert!(summary.get("nodes").is_none_or(|n| !n.is_array()));
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written, inline);
    assert_eq!(inline["nodes"].as_array().unwrap().len(), 12);
    assert_eq!(
        inline["edges"].as_array().unwrap().len(),
        2 * (3 * 3 + 4 * 2)
    );
}

#[test]
fn network_survives_write_and_read_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = server(&dir);
    let net = s
        .call_tool(
            "generate_grid",
            &json!({"rows": 3, "cols": 3, "spacing_m": 173.25}),
        )
        .unwrap();
    for name in ["n.xml", "n.json"] {
        let p = path(&dir, name);
        s.call_tool("write_network", &json!({"network": net, "path": p}))
            .unwrap();
        let back = s.call_tool("read_network", &json!({"path": p})).unwrap();
        assert_eq!(back, net, "{name}");
    }
    let xml = s
        .call_tool(
            "convert_network_format",
            &json!({"network": net, "to": "xml"}),
        )
        .unwrap();
    let again = s
        .call_tool(
            "convert_network_format",
            &json!({"network": xml["document"], "to": "json"}),
        )
        .unwrap();
    let parsed: Value = serde_json::from_str(again["document"].as_str().unwrap()).unwrap();
    assert_eq!(parsed, net);
}

#[test]
fn plan_csv_roundtrip_through_tools() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = server(&dir);
    let net = s
        .call_tool("generate_grid", &json!({"rows": 4, "cols": 3}))
        .unwrap();
    let plans = s
        .call_tool("fixed_plan", &json!({"network": net, "cycle_s": 72}))
        .unwrap();
    let csv = s.call_tool("tls_to_csv", &json!({"plans": plans})).unwrap();
    let back = s
        .call_tool("csv_to_tls", &json!({"csv": csv["csv"]}))
        .unwrap();
    assert_eq!(back, plans);
    assert_eq!(plans["plans"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_plan_csv_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = server(&dir);
    let csv = "junction,cycle_s,offset_s,clearance_s,phase_index,green_edges,duration_s\nj,60,0,4,0,a,26\nj,60,0,4,1,b,x\n";
    let e = s.call_tool("csv_to_tls", &json!({"csv": csv})).unwrap_err();
    assert_eq!(e.param.as_deref(), Some("csv"));
    assert!(
        e.message.contains("row 3") || e.message.contains("line 3"),
        "{}",
        e.message
    );
}

#[test]
fn offline_osm_download_converts_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = server(&dir);
    let dl = s
        .call_tool(
            "osm_download",
            &json!({"place_name": "Chaoyang District, Beijing"}),
        )
        .unwrap();
    let file = dl["path"].as_str().unwrap();
    assert!(
        file.ends_with("chaoyang_district_beijing.osm.xml"),
        "{file}"
    );
    assert!(std::path::Path::new(file).exists());
    let net = s.call_tool("convert_osm", &json!({"osm": file})).unwrap();
    let v = s
        .call_tool("validate_network", &json!({"network": net}))
        .unwrap();
    assert_eq!(v["valid"], true, "{}", v["diagnostics"]);
    assert!(net["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n["signalized"] == true));

    let e = s
        .call_tool("osm_download", &json!({"place_name": "Atlantis"}))
        .unwrap_err();
    assert!(!e.retryable);
}

#[test]
fn simulate_measure_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = server(&dir);
    let net = path(&dir, "net.json");
    s.call_tool(
        "generate_grid",
        &json!({"rows": 3, "cols": 3, "output": net}),
    )
    .unwrap();
    let trips = s
        .call_tool(
            "random_trips",
            &json!({"network": net, "count": 80, "seed": 3, "end_s": 600}),
        )
        .unwrap();
    let routes = s
        .call_tool("route_trips", &json!({"network": net, "trips": trips}))
        .unwrap();
    assert_eq!(routes["failures"], json!([]));
    let edge = routes["routes"]
        .as_object()
        .unwrap()
        .values()
        .next()
        .unwrap()[0]
        .clone();

    let mut reports = serde_json::Map::new();
    for control in ["static", "actuated"] {
        let sim = s
            .call_tool(
                "run_simulation",
                &json!({
                    "network": net, "trips": trips, "routes": {"routes": routes["routes"]},
                    "control": control, "end_s": 1800, "detector_edges": [edge], "detector_interval_s": 300,
                }),
            )
            .unwrap();
        assert_eq!(sim["totals"]["inserted"], 80);
        let counts = s
            .call_tool(
                "extract_detector_counts",
                &json!({"simulation": sim, "edges": [edge], "interval_s": 300}),
            )
            .unwrap();
        let total: u64 = counts["counts"][edge.as_str().unwrap()]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c.as_u64().unwrap())
            .sum();
        assert!(total > 0);
        let m = s
            .call_tool("cal_metrics", &json!({"simulation": sim}))
            .unwrap();
        assert!(m["avg_delay_s"].as_f64().unwrap() >= m["avg_waiting_time_s"].as_f64().unwrap());
        reports.insert(control.into(), m);
    }
    let cmp = s
        .call_tool("compare_metrics", &json!({"reports": reports}))
        .unwrap();
    assert_eq!(
        cmp["methods"]
            .as_object()
            .unwrap()
            .keys()
            .collect::<Vec<_>>(),
        ["static", "actuated"]
    );
    assert!(cmp["markdown"].as_str().unwrap().contains("| static |"));

    let same = s
        .call_tool(
            "improvement_report",
            &json!({"before": reports["static"], "after": reports["static"]}),
        )
        .unwrap();
    for cell in same["overall"].as_object().unwrap().values() {
        assert_eq!(cell["improvement_pct"], 0.0);
    }
}

#[test]
fn districts_are_checked_against_the_network() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = server(&dir);
    let net = s
        .call_tool("generate_grid", &json!({"rows": 2, "cols": 2}))
        .unwrap();
    let e0 = net["edges"][0]["id"].clone();
    let ok = s
        .call_tool(
            "define_districts",
            &json!({"network": net, "assignments": {"A": [e0], "B": [net["edges"][1]["id"]]}}),
        )
        .unwrap();
    assert_eq!(ok["districts"]["A"], json!([e0]));
    let e = s
        .call_tool(
            "define_districts",
            &json!({"network": net, "assignments": {"A": []}}),
        )
        .unwrap_err();
    assert!(e.message.contains("empty"), "{}", e.message);
}
