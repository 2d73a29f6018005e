mod common;

use std::collections::BTreeMap;

use trafficmcp_core::demand::{od_to_trips, OdCell, OdMatrix, RoutePlan, Trip, TripTable};
use trafficmcp_core::network::{define_districts, generate_grid};
use trafficmcp_core::routing::route_trips;
use trafficmcp_core::signal::{greenwave_offsets, ActuatedParams, SignalController};
use trafficmcp_core::sim::{run_simulation, SimConfig};

use common::*;

#[test]
fn conservation_and_delay_identity_on_grids() {
    for (n, count, seed) in [(3, 500, 1), (4, 800, 2), (5, 300, 3)] {
        let sc = random_grid(n, count, seed);
        // A short horizon leaves vehicles on the network.
        for end in [600.0, 4500.0] {
            let out = sc.run(&SimConfig::new(end));
            assert_conservation_and_delay(&out);
        }
        let actuated: BTreeMap<_, _> = sc
            .plans
            .iter()
            .map(|p| {
                let phases = p.phases.iter().map(|ph| ph.green_edges.clone()).collect();
                (
                    p.junction.clone(),
                    SignalController::Actuated(ActuatedParams::with_defaults(phases, 4.0)),
                )
            })
            .collect();
        let out = run_simulation(
            &sc.net,
            &sc.trips,
            &sc.routes,
            &actuated,
            &SimConfig::new(4500.0),
        )
        .unwrap();
        assert_conservation_and_delay(&out);
    }
}

#[test]
fn identical_inputs_give_identical_output() {
    let sc = random_grid(3, 500, 1);
    let a = sc.run(&SimConfig::new(4500.0)).to_json();
    let b = random_grid(3, 500, 1)
        .run(&SimConfig::new(4500.0))
        .to_json();
    assert_eq!(a, b);
}

#[test]
fn queue_discharge_is_first_in_first_out() {
    let net = arterial(1, 200.0, 10.0);
    let plans = arterial_plans(1, 60);
    let trips: Vec<Trip> = (0..40)
        .map(|i| Trip {
            id: format!("v{i:02}"),
            depart_s: (i * 7 % 120) as f64 + (i / 20) as f64 * 0.5,
            from_edge: "m0".into(),
            to_edge: "out".into(),
        })
        .collect();
    let trips = TripTable::new(trips).unwrap();
    let routes = RoutePlan {
        routes: trips
            .trips
            .iter()
            .map(|t| (t.id.clone(), vec!["m0".into(), "out".into()]))
            .collect(),
    };
    let out = run_simulation(
        &net,
        &trips,
        &routes,
        &static_controllers(&plans),
        &SimConfig::new(600.0),
    )
    .unwrap();
    let mut order: Vec<_> = out.vehicles.iter().collect();
    order.sort_by(|a, b| a.depart_s.total_cmp(&b.depart_s).then(a.id.cmp(&b.id)));
    for w in order.windows(2) {
        assert!(
            w[0].arrive_s.unwrap() <= w[1].arrive_s.unwrap(),
            "{} overtaken by {}",
            w[0].id,
            w[1].id
        );
    }
}

#[test]
fn doubling_demand_never_reduces_total_waiting() {
    for seed in 1..=5 {
        let sc = random_grid(3, 300, seed);
        let base = sc.run(&SimConfig::new(4500.0));
        let mut doubled = sc.trips.trips.clone();
        let mut routes = sc.routes.clone();
        for t in &sc.trips.trips {
            let id = format!("{}_dup", t.id);
            routes
                .routes
                .insert(id.clone(), sc.routes.routes[&t.id].clone());
            doubled.push(Trip { id, ..t.clone() });
        }
        let doubled = TripTable::new(doubled).unwrap();
        let heavy = run_simulation(
            &sc.net,
            &doubled,
            &routes,
            &static_controllers(&sc.plans),
            &SimConfig::new(4500.0),
        )
        .unwrap();
        let total = |o: &trafficmcp_core::sim::SimOutput| {
            o.vehicles.iter().map(|v| v.waiting_s).sum::<f64>()
        };
        assert!(
            total(&heavy) >= total(&base),
            "seed {seed}: {} < {}",
            total(&heavy),
            total(&base)
        );
    }
}

#[test]
fn halving_the_step_moves_waits_by_at_most_one_step() {
    // Single signalized junction: the 3 x 3 grid.
    let net = generate_grid(3, 3, 250.0, 12.5).unwrap();
    let e = |a: (u32, u32), b: (u32, u32)| format!("e_n_{}_{}_n_{}_{}", a.0, a.1, b.0, b.1);
    let districts = define_districts(
        &net,
        BTreeMap::from([
            ("W".to_string(), vec![e((1, 0), (1, 1))]),
            ("E".to_string(), vec![e((1, 1), (1, 2))]),
            ("N".to_string(), vec![e((0, 1), (1, 1))]),
            ("S".to_string(), vec![e((1, 1), (2, 1))]),
        ]),
    )
    .unwrap();
    let cell = |o: &str, d: &str, vehicles| OdCell {
        origin: o.into(),
        destination: d.into(),
        vehicles,
        begin_s: 0.0,
        end_s: 3600.0,
    };
    let od = OdMatrix {
        cells: vec![cell("W", "E", 600), cell("N", "S", 200)],
    };
    // Departures on whole seconds, so both step sizes insert every vehicle
    // at the same instant.
    let drawn = od_to_trips(&od, &districts, 1).unwrap();
    let trips = TripTable::new(
        drawn
            .trips
            .into_iter()
            .map(|t| Trip {
                depart_s: t.depart_s.floor(),
                ..t
            })
            .collect(),
    )
    .unwrap();
    let routes = route_trips(&net, &trips).plan;
    let ctrl = static_controllers(&equal_split(&net, 60));
    let coarse = run_simulation(&net, &trips, &routes, &ctrl, &SimConfig::new(4500.0)).unwrap();
    let mut fine_cfg = SimConfig::new(4500.0);
    fine_cfg.step_s = 0.5;
    let fine = run_simulation(&net, &trips, &routes, &ctrl, &fine_cfg).unwrap();
    assert_conservation_and_delay(&fine);
    for (a, b) in coarse.vehicles.iter().zip(&fine.vehicles) {
        assert_eq!(a.id, b.id);
        assert!(
            (a.waiting_s - b.waiting_s).abs() <= 1.0 + 1e-9,
            "{}: {} s at 1 s steps, {} s at 0.5 s steps",
            a.id,
            a.waiting_s,
            b.waiting_s
        );
    }
}

#[test]
fn greenwave_probe_never_stops() {
    let speed = 12.0;
    let net = arterial(4, 300.0, speed);
    let through: Vec<String> = (0..4).map(|i| format!("m{i}")).collect();
    let plans = greenwave_offsets(
        &arterial_plans(4, 60),
        &[0.0, 300.0, 600.0, 900.0],
        speed,
        Some(&through),
    )
    .unwrap();
    let offsets: Vec<u32> = plans.iter().map(|p| p.offset_s).collect();
    assert_eq!(offsets, [0, 25, 50, 15]);
    // Released onto m0 so that it reaches j0 as the through green starts at 60 s.
    let trips = TripTable::new(vec![Trip {
        id: "probe".into(),
        depart_s: 35.0,
        from_edge: "m0".into(),
        to_edge: "out".into(),
    }])
    .unwrap();
    let routes = RoutePlan {
        routes: BTreeMap::from([(
            "probe".into(),
            vec!["m0", "m1", "m2", "m3", "out"]
                .into_iter()
                .map(String::from)
                .collect(),
        )]),
    };
    let out = run_simulation(
        &net,
        &trips,
        &routes,
        &static_controllers(&plans),
        &SimConfig::new(600.0),
    )
    .unwrap();
    let v = &out.vehicles[0];
    assert_eq!(v.waiting_s, 0.0);
    assert_eq!(v.delay_s(), Some(0.0));
}
