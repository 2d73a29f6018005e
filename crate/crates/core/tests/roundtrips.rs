use std::collections::BTreeSet;

use proptest::prelude::*;

use trafficmcp_core::demand::{OdCell, OdMatrix};
use trafficmcp_core::netxml::{from_xml, to_xml};
use trafficmcp_core::signal::{plans_from_csv, plans_to_csv, Phase, SignalPlan, TLS_CSV_HEADER};
use trafficmcp_core::{Edge, Node, RoadNetwork};

const ID: &str = "[a-zA-Z0-9_&<>\"' .:,#-]{1,10}";

fn phase() -> impl Strategy<Value = Phase> {
    (
        prop::collection::btree_set("[a-z0-9_,\" .-]{1,8}", 1..4),
        1u32..90,
    )
        .prop_map(|(green_edges, duration_s)| Phase {
            green_edges,
            duration_s,
        })
}

fn plan() -> impl Strategy<Value = SignalPlan> {
    (prop::collection::vec(phase(), 1..5), 0u32..8, any::<u32>()).prop_map(
        |(phases, clearance_s, off)| {
            let cycle_s = phases.iter().map(|p| p.duration_s).sum::<u32>()
                + phases.len() as u32 * clearance_s;
            SignalPlan {
                junction: String::new(),
                cycle_s,
                offset_s: off % cycle_s,
                clearance_s,
                phases,
            }
        },
    )
}

fn plans() -> impl Strategy<Value = Vec<SignalPlan>> {
    (
        prop::collection::btree_set(ID, 0..6),
        prop::collection::vec(plan(), 6),
    )
        .prop_map(|(ids, plans)| {
            ids.into_iter()
                .zip(plans)
                .map(|(junction, p)| SignalPlan { junction, ..p })
                .collect()
        })
}

fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        Just(0.0),
        Just(-0.0),
        Just(1e-300),
        Just(123456.789)
    ]
}

fn network() -> impl Strategy<Value = RoadNetwork> {
    prop::collection::btree_set(ID, 1..8)
        .prop_flat_map(|ids| {
            let ids: Vec<String> = ids.into_iter().collect();
            let n = ids.len();
            let nodes = prop::collection::vec((coord(), coord(), any::<bool>()), n);
            let edges = prop::collection::vec(
                (
                    ID,
                    0..n,
                    0..n,
                    1e-3..5e3f64,
                    0.5..40.0f64,
                    1u32..5,
                    0.05..1.0f64,
                ),
                0..12,
            );
            (Just(ids), nodes, edges)
        })
        .prop_map(|(ids, nodes, edges)| RoadNetwork {
            nodes: ids
                .iter()
                .zip(nodes)
                .map(|(id, (x, y, signalized))| Node {
                    id: id.clone(),
                    x,
                    y,
                    signalized,
                })
                .collect(),
            edges: edges
                .into_iter()
                .map(
                    |(id, a, b, length_m, speed_mps, lanes, sat_flow_vps)| Edge {
                        id,
                        from: ids[a].clone(),
                        to: ids[b].clone(),
                        length_m,
                        speed_mps,
                        lanes,
                        sat_flow_vps,
                    },
                )
                .collect(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn plan_csv_roundtrip(p in plans()) {
        let csv = plans_to_csv(&p);
        prop_assert_eq!(plans_from_csv(&csv).unwrap(), p);
    }

    #[test]
    fn network_xml_roundtrip(net in network()) {
        prop_assert_eq!(from_xml(&to_xml(&net)).unwrap(), net);
    }

    #[test]
    fn network_json_roundtrip(net in network()) {
        prop_assert_eq!(RoadNetwork::from_json(&net.to_json()).unwrap(), net);
    }

    #[test]
    fn od_csv_roundtrip(cells in prop::collection::vec(("[A-Za-z0-9_]{1,6}", "[A-Za-z0-9_]{1,6}", 0u32..1000, 0.0..1800.0f64, 1.0..1800.0f64), 0..8)) {
        let od = OdMatrix {
            cells: cells
                .into_iter()
                .map(|(origin, destination, vehicles, begin_s, len)| OdCell { origin, destination, vehicles, begin_s, end_s: begin_s + len })
                .collect(),
        };
        prop_assert_eq!(OdMatrix::from_csv(&od.to_csv()).unwrap(), od);
    }
}

#[test]
fn empty_plan_list_is_header_only() {
    let csv = plans_to_csv(&[]);
    assert_eq!(csv.trim_end(), TLS_CSV_HEADER.join(","));
    assert!(plans_from_csv(&csv).unwrap().is_empty());
}

#[test]
fn cycle_sum_violation_names_the_row() {
    let csv = "junction,cycle_s,offset_s,clearance_s,phase_index,green_edges,duration_s\n\
               a,60,0,4,0,x,26\n\
               a,60,0,4,1,y,26\n\
               b,60,0,4,0,x,30\n\
               b,60,0,4,1,y,25\n";
    let err = plans_from_csv(csv).unwrap_err().to_string();
    assert!(err.contains("line 5"), "{err}");
    assert!(err.contains("63"), "{err}");
}

#[test]
fn phase_sets_keep_order_independent_identity() {
    let p = SignalPlan {
        junction: "j".into(),
        cycle_s: 10,
        offset_s: 0,
        clearance_s: 0,
        phases: vec![Phase {
            green_edges: BTreeSet::from(["b".into(), "a".into()]),
            duration_s: 10,
        }],
    };
    assert!(plans_to_csv(std::slice::from_ref(&p)).contains("a|b"));
}
