//! `trafficmcp`: run the tool server or drive it from the command line.

mod client;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use thiserror::Error;

use client::{Client, ClientError};
use trafficmcp_server::transport::{serve_stdio, serve_tcp};
use trafficmcp_server::{Context, Server};

#[derive(Parser)]
#[command(
    name = "trafficmcp",
    version,
    about = "Traffic simulation tool server and client"
)]
struct Cli {
    /// Attach to a running server instead of starting one, e.g. tcp://127.0.0.1:7700
    #[arg(long, global = true, value_name = "URL")]
    connect: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the protocol on stdio, or on TCP with --tcp
    Serve {
        #[arg(long, value_name = "ADDR")]
        tcp: Option<String>,
    },
    /// List callable tools, or the tools of one module after importing it
    Tools {
        #[arg(long)]
        module: Option<String>,
    },
    /// Import modules and print the import result
    Import {
        #[arg(required = true)]
        modules: Vec<String>,
    },
    /// Call one tool and print its result JSON
    Call {
        tool: String,
        /// Tool arguments as a JSON object
        #[arg(long, default_value = "{}")]
        json: String,
        /// Modules to import before the call
        #[arg(long = "import", value_name = "MODULE")]
        imports: Vec<String>,
    },
    /// Run a predefined workflow
    #[command(subcommand)]
    Workflow(Workflow),
}

#[derive(Subcommand)]
enum Workflow {
    /// Simulate every signal strategy and compare them
    SimEval(SimEvalArgs),
    /// Re-time the most congested junctions and report the improvement
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct SimEvalArgs {
    /// Generated grid as ROWSxCOLS
    #[arg(long, value_name = "ROWSxCOLS", group = "source")]
    grid: Option<String>,
    /// OpenStreetMap place name to download
    #[arg(long, value_name = "NAME", group = "source")]
    place: Option<String>,
    /// Bounding box as south,west,north,east
    #[arg(long, value_name = "S,W,N,E", group = "source")]
    bbox: Option<String>,
    /// Network file (JSON or XML)
    #[arg(long, group = "source")]
    network: Option<PathBuf>,
    /// Number of random trips
    #[arg(long, conflicts_with = "od")]
    count: Option<u64>,
    /// OD matrix CSV
    #[arg(long)]
    od: Option<PathBuf>,
    /// District file; defaults to districts.json next to the OD file
    #[arg(long, requires = "od")]
    districts: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of fixed,actuated,webster,greenwave
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    cycle: Option<u32>,
    #[arg(long)]
    progression_speed: Option<f64>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    od: PathBuf,
    /// Defaults to districts.json next to the OD file
    #[arg(long)]
    districts: Option<PathBuf>,
    /// Signal plan CSV
    #[arg(long)]
    tls: PathBuf,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    progression_speed: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn connect(url: Option<&str>) -> Result<Client, CliError> {
    match url {
        None => Ok(Client::spawn()?),
        Some(u) => {
            let addr = u
                .strip_prefix("tcp://")
                .ok_or_else(|| usage(format!("--connect expects tcp://HOST:PORT, got `{u}`")))?;
            Ok(Client::connect(addr)?)
        }
    }
}

/// Absolute form of a path the server will open, so that a server with a
/// different working directory still finds it.
fn absolute(p: &Path) -> Result<String, CliError> {
    let abs = std::path::absolute(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    Ok(abs.to_string_lossy().into_owned())
}

fn districts_for(od: &Path, explicit: Option<&Path>) -> Result<String, CliError> {
    match explicit {
        Some(d) => absolute(d),
        None => absolute(&od.parent().unwrap_or(Path::new(".")).join("districts.json")),
    }
}

fn sim_eval_args(a: &SimEvalArgs) -> Result<Value, CliError> {
    let mut m = Map::new();
    if let Some(g) = &a.grid {
        let (r, c) = g
            .split_once(['x', 'X'])
            .and_then(|(r, c)| Some((r.trim().parse::<u32>().ok()?, c.trim().parse::<u32>().ok()?)))
            .ok_or_else(|| usage(format!("--grid expects ROWSxCOLS, got `{g}`")))?;
        m.insert("grid".into(), json!({"rows": r, "cols": c}));
    } else if let Some(p) = &a.place {
        m.insert("osm".into(), json!({"place_name": p}));
    } else if let Some(b) = &a.bbox {
        let v: Vec<f64> = b
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| usage(format!("--bbox expects four numbers, got `{b}`")))?;
        let [south, west, north, east] = v[..] else {
            return Err(usage(format!("--bbox expects four numbers, got `{b}`")));
        };
        m.insert(
            "osm".into(),
            json!({"bbox": {"south": south, "west": west, "north": north, "east": east}}),
        );
    } else if let Some(n) = &a.network {
        m.insert("network".into(), json!(absolute(n)?));
    } else {
        return Err(usage("give one of --grid, --place, --bbox or --network"));
    }
    let demand = match (&a.count, &a.od) {
        (Some(n), None) => json!({"count": n, "seed": a.seed}),
        (None, Some(od)) => json!({
            "od": absolute(od)?,
            "districts": districts_for(od, a.districts.as_deref())?,
            "seed": a.seed,
        }),
        _ => return Err(usage("give one of --count or --od")),
    };
    m.insert("demand".into(), demand);
    if !a.strategies.is_empty() {
        m.insert("strategies".into(), json!(a.strategies));
    }
    for (k, v) in [
        ("horizon_s", a.horizon.map(|x| json!(x))),
        ("cycle_s", a.cycle.map(|x| json!(x))),
    ] {
        if let Some(v) = v {
            m.insert(k.into(), v);
        }
    }
    if let Some(s) = a.progression_speed {
        m.insert("progression_speed_mps".into(), json!(s));
    }
    Ok(Value::Object(m))
}

fn optimize_args(a: &OptimizeArgs) -> Result<Value, CliError> {
    let mut m = Map::new();
    m.insert("network".into(), json!(absolute(&a.network)?));
    m.insert("od".into(), json!(absolute(&a.od)?));
    m.insert(
        "districts".into(),
        json!(districts_for(&a.od, a.districts.as_deref())?),
    );
    m.insert("tls".into(), json!(absolute(&a.tls)?));
    let optional = [
        ("k", a.k.map(|x| json!(x))),
        ("horizon_s", a.horizon.map(|x| json!(x))),
        (
            "progression_speed_mps",
            a.progression_speed.map(|x| json!(x)),
        ),
        ("seed", a.seed.map(|x| json!(x))),
    ];
    for (k, v) in optional {
        if let Some(v) = v {
            m.insert(k.into(), v);
        }
    }
    Ok(Value::Object(m))
}

/// Prints the report path and any warnings of a finished workflow.
fn print_workflow(raw: &str) -> Result<(), CliError> {
    let v: Value = serde_json::from_str(raw).map_err(|e| ClientError::Malformed(e.to_string()))?;
    for w in v["warnings"].as_array().into_iter().flatten() {
        eprintln!("warning: {}", w.as_str().unwrap_or_default());
    }
    println!("{}", v["report_path"].as_str().unwrap_or_default());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let url = cli.connect.as_deref();
    match cli.command {
        Command::Serve { tcp } => {
            let mut server = Server::new(Context::from_env());
            match tcp {
                None => serve_stdio(&mut server)?,
                Some(addr) => {
                    let handle = serve_tcp(server, addr.as_str())?;
                    eprintln!("listening on tcp://{}", handle.local_addr());
                    handle.join();
                }
            }
        }
        Command::Tools { module } => {
            let mut c = connect(url)?;
            let names: Vec<String> = match module {
                None => {
                    let list: Value = serde_json::from_str(&c.request("tools/list", json!({}))?)
                        .map_err(|e| ClientError::Malformed(e.to_string()))?;
                    list["tools"]
                        .as_array()
                        .into_iter()
                        .flatten()
                        .map(|t| {
                            format!(
                                "{}\t{}",
                                t["name"].as_str().unwrap_or_default(),
                                t["module"].as_str().unwrap_or_default()
                            )
                        })
                        .collect()
                }
                Some(m) => {
                    c.call_tool("import_module", json!({"names": [m]}))?;
                    let list: Value = serde_json::from_str(&c.request("tools/list", json!({}))?)
                        .map_err(|e| ClientError::Malformed(e.to_string()))?;
                    let module = trafficmcp_server::registry::resolve_alias(&m).to_string();
                    list["tools"]
                        .as_array()
                        .into_iter()
                        .flatten()
                        .filter(|t| t["module"] == module.as_str())
                        .map(|t| format!("{}\t{}", t["name"].as_str().unwrap_or_default(), module))
                        .collect()
                }
            };
            for n in names {
                println!("{n}");
            }
        }
        Command::Import { modules } => {
            let out = connect(url)?.call_tool("import_module", json!({"names": modules}))?;
            println!("{out}");
        }
        Command::Call {
            tool,
            json: raw,
            imports,
        } => {
            let args: Value = serde_json::from_str(&raw)
                .map_err(|e| usage(format!("--json is not valid JSON: {e}")))?;
            if !args.is_object() {
                return Err(usage("--json must be a JSON object"));
            }
            let mut c = connect(url)?;
            if !imports.is_empty() {
                c.call_tool("import_module", json!({"names": imports}))?;
            }
            println!("{}", c.call_tool(&tool, args)?);
        }
        Command::Workflow(Workflow::SimEval(a)) => {
            let args = sim_eval_args(&a)?;
            print_workflow(&connect(url)?.call_tool("workflow_sim_eval", args)?)?;
        }
        Command::Workflow(Workflow::Optimize(a)) => {
            let args = optimize_args(&a)?;
            print_workflow(&connect(url)?.call_tool("workflow_signal_opt", args)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Client(ClientError::Rpc(f)) => {
                    eprintln!("error {}: {}", f.code, f.message);
                    let body = json!({"code": f.code, "message": f.message, "data": f.data});
                    eprintln!("{body}");
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
