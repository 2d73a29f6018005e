//! Regenerates the bundled scenarios under `scenarios/`.
//!
//! Each scenario is a square grid with one district per boundary approach,
//! a directional OD matrix and equal-split 60 s plans.
//!
//!     cargo run -p trafficmcp-server --example make_scenarios

use std::collections::BTreeMap;
use std::path::Path;

use trafficmcp_core::demand::{OdCell, OdMatrix};
use trafficmcp_core::network::{define_districts, generate_grid};
use trafficmcp_core::signal::{default_phase_groups, fixed_plan, plans_to_csv};

const SPACING_M: f64 = 250.0;
const SPEED_MPS: f64 = 12.5;
const HORIZON_S: f64 = 3600.0;

struct Demand {
    /// West-to-east vehicles per interior row, top to bottom.
    eastbound: &'static [u32],
    westbound: u32,
    southbound: u32,
    northbound: u32,
}

fn edge(a: (u32, u32), b: (u32, u32)) -> String {
    format!("e_n_{}_{}_n_{}_{}", a.0, a.1, b.0, b.1)
}

fn write(dir: &Path, n: u32, demand: &Demand) -> std::io::Result<()> {
    let net = generate_grid(n, n, SPACING_M, SPEED_MPS).expect("valid grid");
    let last = n - 1;
    let mut d = BTreeMap::new();
    for r in 1..last {
        d.insert(format!("W{r}"), vec![edge((r, 0), (r, 1))]);
        d.insert(format!("E{r}"), vec![edge((r, last - 1), (r, last))]);
        d.insert(format!("Wx{r}"), vec![edge((r, 1), (r, 0))]);
        d.insert(format!("Ex{r}"), vec![edge((r, last), (r, last - 1))]);
    }
    for c in 1..last {
        d.insert(format!("N{c}"), vec![edge((0, c), (1, c))]);
        d.insert(format!("S{c}"), vec![edge((last - 1, c), (last, c))]);
        d.insert(format!("Nx{c}"), vec![edge((1, c), (0, c))]);
        d.insert(format!("Sx{c}"), vec![edge((last, c), (last - 1, c))]);
    }
    let districts = define_districts(&net, d).expect("districts on grid edges");

    let cell = |o: String, d: String, vehicles| OdCell {
        origin: o,
        destination: d,
        vehicles,
        begin_s: 0.0,
        end_s: HORIZON_S,
    };
    let mut cells = Vec::new();
    for r in 1..last {
        cells.push(cell(
            format!("W{r}"),
            format!("E{r}"),
            demand.eastbound[(r - 1) as usize],
        ));
        cells.push(cell(format!("Ex{r}"), format!("Wx{r}"), demand.westbound));
    }
    for c in 1..last {
        cells.push(cell(format!("N{c}"), format!("S{c}"), demand.southbound));
        cells.push(cell(format!("Sx{c}"), format!("Nx{c}"), demand.northbound));
    }
    let od = OdMatrix { cells };

    let plans: Vec<_> = net
        .signalized_nodes()
        .map(|j| {
            fixed_plan(
                &j.id,
                default_phase_groups(&net, &j.id).expect("grid junction"),
                60,
                4,
            )
            .expect("plan")
        })
        .collect();

    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("network.json"), net.to_json())?;
    std::fs::write(dir.join("districts.json"), districts.to_json())?;
    std::fs::write(dir.join("od.csv"), od.to_csv())?;
    std::fs::write(dir.join("plans.csv"), plans_to_csv(&plans))?;
    Ok(())
}

fn main() -> std::io::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    write(
        &root.join("grid3"),
        3,
        &Demand {
            eastbound: &[600],
            westbound: 600,
            southbound: 200,
            northbound: 200,
        },
    )?;
    write(
        &root.join("grid5"),
        5,
        &Demand {
            eastbound: &[600, 450, 300],
            westbound: 150,
            southbound: 150,
            northbound: 100,
        },
    )?;
    Ok(())
}
