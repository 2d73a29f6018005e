//! The two composite workflows. Each runs the catalogue tools in a fixed
//! order inside a run directory named by a digest of its inputs, logging
//! every attempt and retrying a step once when its error says that may help.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use trafficmcp_core::metrics::{single_method_report, MetricsReport};
use trafficmcp_core::network::DiagnosticKind;
use trafficmcp_core::signal::{
    approach_flows, corridor_geometry, highest_flow_corridor, plans_from_csv, rescale_to_cycle,
    SignalPlan,
};
use trafficmcp_core::sim::SimOutput;
use trafficmcp_core::RoadNetwork;

use crate::context::Context;
use crate::error::{ToolError, ToolResult};
use crate::modules::{self, to_value, ToolModule};
use crate::params::{read_file, write_file, Args};

/// Extra simulated time after the demand window so late trips can finish.
pub const DRAIN_S: f64 = 900.0;
pub const DEFAULT_HORIZON_S: f64 = 3600.0;
pub const DEFAULT_K: u64 = 4;
pub const STRATEGIES: [&str; 4] = ["fixed", "actuated", "webster", "greenwave"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub tool: String,
    pub args_digest: String,
    pub status: StepStatus,
    pub retry: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn args_digest(args: &Value) -> String {
    sha256_hex(args.to_string().as_bytes())[..16].to_string()
}

/// Calls catalogue tools on private module instances, so the server's
/// import state is never touched.
struct Runner<'c> {
    ctx: &'c Context,
    modules: BTreeMap<&'static str, Box<dyn ToolModule>>,
    steps: Vec<Step>,
}

impl<'c> Runner<'c> {
    fn new(ctx: &'c Context) -> Self {
        Runner {
            ctx,
            modules: BTreeMap::new(),
            steps: Vec::new(),
        }
    }

    fn call(&mut self, tool: &str, args: Value) -> ToolResult<Value> {
        let (spec, def) = modules::find_tool(tool).expect("workflows only call catalogued tools");
        let mut args = args;
        let mut retry = 0;
        loop {
            let module = self
                .modules
                .entry(spec.name)
                .or_insert_with(|| (spec.factory)());
            let out = Args::validate(def.params, &args)
                .and_then(|a| module.call(tool, &a, self.ctx))
                .map_err(|e| e.with_tool(tool));
            self.steps.push(Step {
                tool: tool.to_string(),
                args_digest: args_digest(&args),
                status: if out.is_ok() {
                    StepStatus::Ok
                } else {
                    StepStatus::Error
                },
                retry,
                error: out.as_ref().err().map(|e| e.message.clone()),
            });
            match out {
                Err(e) if retry == 0 && e.retryable => match &e.adjust {
                    Some(Value::Object(adj)) => {
                        for (k, v) in adj {
                            args[k] = v.clone();
                        }
                        retry += 1;
                    }
                    _ => return Err(e),
                },
                other => return other,
            }
        }
    }

    fn steps_json(&self) -> Value {
        to_value(&self.steps)
    }
}

/// Attaches the step log to an error and leaves a copy in the run dir.
fn abort(runner: &Runner, run: &RunDir, e: ToolError) -> ToolError {
    let _ = write_file(&run.path("steps.json"), &runner.steps_json().to_string());
    let mut e = e;
    e.steps = Some(runner.steps_json());
    e
}

struct RunDir {
    dir: PathBuf,
    artifacts: Map<String, Value>,
}

impl RunDir {
    fn create(ctx: &Context, workflow: &str, inputs: &Value) -> ToolResult<Self> {
        let digest = sha256_hex(format!("{workflow}\n{inputs}").as_bytes());
        let dir = ctx.workspace.join("runs").join(&digest[..16]);
        std::fs::create_dir_all(&dir)
            .map_err(|e| ToolError::failed(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RunDir {
            dir,
            artifacts: Map::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Path string for an artifact, recorded under `key`.
    fn artifact(&mut self, key: &str, name: &str) -> String {
        let p = self.path(name).to_string_lossy().into_owned();
        self.artifacts.insert(key.to_string(), json!(p));
        p
    }

    fn stage(&mut self, key: &str, name: &str, contents: &str) -> ToolResult<String> {
        let p = self.artifact(key, name);
        write_file(Path::new(&p), contents)?;
        Ok(p)
    }
}

fn load<T>(path: &str, parse: impl FnOnce(&str) -> trafficmcp_core::Result<T>) -> ToolResult<T> {
    let text = read_file("path", Path::new(path))?;
    parse(&text).map_err(ToolError::from)
}

fn read_json(path: &str) -> ToolResult<Value> {
    let text = read_file("path", Path::new(path))?;
    serde_json::from_str(&text).map_err(|e| ToolError::failed(format!("{path}: {e}")))
}

fn network_ext(text: &str) -> &'static str {
    if text.trim_start().starts_with('<') {
        "network.xml"
    } else {
        "network.json"
    }
}

fn route_or_abort(
    runner: &mut Runner,
    run: &mut RunDir,
    network: &str,
    trips: &str,
) -> ToolResult<String> {
    let routes = run.artifact("routes", "routes.json");
    let out = runner.call(
        "route_trips",
        json!({ "network": network, "trips": trips, "output": routes }),
    )?;
    let failures = out["failures"].as_array().map_or(0, Vec::len);
    if failures > 0 {
        return Err(
            ToolError::failed(format!("{failures} trip(s) cannot be routed"))
                .with_adjust(json!({ "failures": out["failures"] })),
        );
    }
    Ok(routes)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    rows: u32,
    cols: u32,
    spacing_m: Option<f64>,
    speed_mps: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandSpec {
    count: Option<u64>,
    od: Option<String>,
    districts: Option<String>,
    #[serde(default)]
    seed: u64,
}

/// Resolves a document value that may be a path.
fn doc_text(param: &str, value: &str) -> ToolResult<String> {
    let mut m = Map::new();
    m.insert(param.to_string(), json!(value));
    Args::from_map(m).text(param)
}

/// Network, demand, one simulation per signal strategy, and a comparison
/// report.
pub fn sim_eval(args: &Args, ctx: &Context) -> ToolResult<Value> {
    let horizon = args.f64_or("horizon_s", DEFAULT_HORIZON_S)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ToolError::invalid("horizon_s", "must be positive"));
    }
    let end_s = horizon + DRAIN_S;
    let cycle = args.u32_or("cycle_s", crate::modules::DEFAULT_CYCLE_S)?;
    let clearance = args.u32_or("clearance_s", crate::modules::DEFAULT_CLEARANCE_S)?;
    let speed = args.f64_or(
        "progression_speed_mps",
        crate::modules::DEFAULT_PROGRESSION_MPS,
    )?;

    let strategies: Vec<String> = if args.has("strategies") {
        let mut seen = BTreeSet::new();
        let list: Vec<String> = args
            .strings("strategies")?
            .into_iter()
            .filter(|s| seen.insert(s.clone()))
            .collect();
        if let Some(bad) = list.iter().find(|s| !STRATEGIES.contains(&s.as_str())) {
            return Err(ToolError::invalid(
                "strategies",
                format!(
                    "unknown strategy `{bad}`; expected one of {}",
                    STRATEGIES.join(", ")
                ),
            ));
        }
        list
    } else {
        STRATEGIES.iter().map(|s| s.to_string()).collect()
    };
    if strategies.is_empty() {
        return Err(ToolError::invalid(
            "strategies",
            "at least one strategy is required",
        ));
    }

    let sources = ["grid", "osm", "network"]
        .iter()
        .filter(|s| args.has(s))
        .count();
    if sources != 1 {
        return Err(ToolError::invalid(
            "network",
            "give exactly one of `grid`, `osm` or `network`",
        ));
    }
    let demand: DemandSpec = args.typed("demand")?;
    let od_text = match (&demand.count, &demand.od, &demand.districts) {
        (Some(_), None, None) => None,
        (None, Some(od), Some(d)) => Some((doc_text("od", od)?, doc_text("districts", d)?)),
        _ => {
            return Err(ToolError::invalid(
                "demand",
                "demand needs either `count` or both `od` and `districts`",
            ))
        }
    };
    let network_text = match args.has("network") {
        true => Some(args.text("network")?),
        false => None,
    };

    // Inputs resolved to content for the run digest.
    let mut inputs = args.raw().clone();
    if let Some(t) = &network_text {
        inputs.insert("network".into(), json!(t));
    }
    if let Some((od, d)) = &od_text {
        inputs.insert(
            "demand".into(),
            json!({ "od": od, "districts": d, "seed": demand.seed }),
        );
    }
    let mut run = RunDir::create(ctx, "sim_eval", &Value::Object(inputs))?;
    let mut runner = Runner::new(ctx);

    let result = (|| -> ToolResult<Value> {
        // Network.
        let network = if args.has("grid") {
            let g: GridSpec = args.typed("grid")?;
            let path = run.artifact("network", "network.json");
            let mut a = json!({ "rows": g.rows, "cols": g.cols, "output": path });
            if let Some(s) = g.spacing_m {
                a["spacing_m"] = json!(s);
            }
            if let Some(s) = g.speed_mps {
                a["speed_mps"] = json!(s);
            }
            runner.call("generate_grid", a)?;
            path
        } else if let Some(Value::Object(osm)) = args.get("osm") {
            let dl = runner.call("osm_download", Value::Object(osm.clone()))?;
            run.artifacts.insert("osm".into(), dl["path"].clone());
            let path = run.artifact("network", "network.json");
            runner.call("convert_osm", json!({ "osm": dl["path"], "output": path }))?;
            path
        } else {
            let text = network_text.as_deref().expect("network source checked");
            let path = run.stage("network", network_ext(text), text)?;
            let v = runner.call("validate_network", json!({ "network": path }))?;
            let fatal: Vec<&Value> = v["diagnostics"]
                .as_array()
                .map(|d| {
                    d.iter()
                        .filter(|x| x["kind"] != to_value(&DiagnosticKind::Unreachable))
                        .collect()
                })
                .unwrap_or_default();
            if !fatal.is_empty() {
                return Err(ToolError::invalid(
                    "network",
                    format!("network is invalid: {}", json!(fatal)),
                ));
            }
            path
        };

        // Demand and routes.
        let trips = run.artifact("trips", "trips.json");
        match &od_text {
            None => runner.call(
                "random_trips",
                json!({
                    "network": network,
                    "count": demand.count.expect("demand checked"),
                    "seed": demand.seed,
                    "begin_s": 0.0,
                    "end_s": horizon,
                    "output": trips,
                }),
            )?,
            Some((od, d)) => {
                let od = run.stage("od", "od.csv", od)?;
                let d = run.stage("districts", "districts.json", d)?;
                runner.call(
                    "od_to_trips",
                    json!({ "od": od, "districts": d, "seed": demand.seed, "output": trips }),
                )?
            }
        };
        let routes = route_or_abort(&mut runner, &mut run, &network, &trips)?;

        // Fixed plans and, when needed, the fixed run whose flows seed Webster.
        let fixed_csv = run.artifact("plans_fixed", "plans_fixed.csv");
        runner.call(
            "fixed_plan",
            json!({ "network": network, "cycle_s": cycle, "clearance_s": clearance, "output": fixed_csv }),
        )?;
        let sim_args = |plans: &str, control: &str, output: &str| {
            json!({
                "network": network,
                "trips": trips,
                "routes": routes,
                "plans": plans,
                "control": control,
                "end_s": end_s,
                "output": output,
            })
        };
        let wants = |s: &str| strategies.iter().any(|x| x == s);
        let mut sims: BTreeMap<String, String> = BTreeMap::new();
        let mut warnings = Vec::new();
        if wants("fixed") || wants("webster") || wants("greenwave") {
            let out = run.artifact("sim_fixed", "sim_fixed.json");
            runner.call("run_simulation", sim_args(&fixed_csv, "static", &out))?;
            sims.insert("fixed".into(), out);
        }

        let mut plan_files: BTreeMap<&str, (String, &str)> = BTreeMap::new();
        plan_files.insert("actuated", (fixed_csv.clone(), "actuated"));
        if wants("webster") || wants("greenwave") {
            let net = load(&network, |t| match t.trim_start().starts_with('<') {
                true => trafficmcp_core::netxml::from_xml(t),
                false => RoadNetwork::from_json(t),
            })?;
            let fixed_run = load(&sims["fixed"], SimOutput::from_json)?;
            let fixed_plans = load(&fixed_csv, plans_from_csv)?;
            let mut webster = Vec::with_capacity(fixed_plans.len());
            for p in &fixed_plans {
                let flows = approach_flows(&net, &fixed_run, p, horizon);
                let timed = runner.call(
                    "webster_plan",
                    json!({ "junction": p.junction, "phases": to_value(&flows), "clearance_s": p.clearance_s }),
                )?;
                let plan: SignalPlan = serde_json::from_value(timed["plan"].clone())
                    .map_err(|e| ToolError::failed(format!("webster_plan result: {e}")))?;
                webster.push(plan);
            }
            let csv = run.artifact("plans_webster", "plans_webster.csv");
            runner.call(
                "tls_to_csv",
                json!({ "plans": to_value(&webster), "output": csv }),
            )?;
            plan_files.insert("webster", (csv, "static"));

            if wants("greenwave") {
                let corridor = highest_flow_corridor(&net, &fixed_run);
                let mut coordinated = webster.clone();
                if corridor.len() >= 2 {
                    let geo = corridor_geometry(&net, &corridor)?;
                    let pos: BTreeMap<&str, usize> = webster
                        .iter()
                        .enumerate()
                        .map(|(i, p)| (p.junction.as_str(), i))
                        .collect();
                    let cycle = corridor
                        .iter()
                        .map(|j| webster[pos[j.as_str()]].cycle_s)
                        .max()
                        .expect("non-empty");
                    let chain: Vec<SignalPlan> = corridor
                        .iter()
                        .map(|j| rescale_to_cycle(&webster[pos[j.as_str()]], cycle))
                        .collect::<trafficmcp_core::Result<_>>()?;
                    let out = runner.call(
                        "greenwave_offsets",
                        json!({
                            "plans": to_value(&chain),
                            "positions": geo.positions_m,
                            "progression_speed_mps": speed,
                            "through": geo.through,
                        }),
                    )?;
                    let chain: Vec<SignalPlan> = serde_json::from_value(out["plans"].clone())
                        .map_err(|e| ToolError::failed(format!("greenwave_offsets result: {e}")))?;
                    for p in chain {
                        let i = pos[p.junction.as_str()];
                        coordinated[i] = p;
                    }
                } else {
                    warnings.push(
                        "no two adjacent signalized junctions; greenwave equals webster"
                            .to_string(),
                    );
                }
                run.artifacts.insert("corridor".into(), json!(corridor));
                let csv = run.artifact("plans_greenwave", "plans_greenwave.csv");
                runner.call(
                    "tls_to_csv",
                    json!({ "plans": to_value(&coordinated), "output": csv }),
                )?;
                plan_files.insert("greenwave", (csv, "static"));
            }
        }

        // The remaining runs are independent of each other.
        let batch: Vec<(String, String, String, String)> = strategies
            .iter()
            .filter(|s| !sims.contains_key(s.as_str()))
            .map(|s| {
                let (plans, control) = plan_files[s.as_str()].clone();
                let out = run.artifact(&format!("sim_{s}"), &format!("sim_{s}.json"));
                (s.clone(), plans, control.to_string(), out)
            })
            .collect();
        let results: Vec<(Vec<Step>, ToolResult<Value>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|(_, plans, control, out)| {
                    let a = sim_args(plans, control, out);
                    scope.spawn(move || {
                        let mut r = Runner::new(ctx);
                        let res = r.call("run_simulation", a);
                        (r.steps, res)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation thread"))
                .collect()
        });
        for ((s, _, _, out), (steps, res)) in batch.iter().zip(results) {
            runner.steps.extend(steps);
            res?;
            sims.insert(s.clone(), out.clone());
        }

        // Metrics and comparison.
        let mut reports = Map::new();
        for s in &strategies {
            let path = run.artifact(&format!("metrics_{s}"), &format!("metrics_{s}.json"));
            runner.call(
                "cal_metrics",
                json!({ "simulation": sims[s.as_str()], "output": path }),
            )?;
            reports.insert(s.clone(), json!(path));
        }
        let report_path = run.artifact("report", "report.json");
        let (report, markdown) = if strategies.len() >= 2 {
            let out = runner.call(
                "compare_metrics",
                json!({ "reports": reports, "output": report_path }),
            )?;
            let report: Value = read_json(&report_path)?;
            (
                report,
                out["markdown"].as_str().unwrap_or_default().to_string(),
            )
        } else {
            let name = &strategies[0];
            let m: MetricsReport = load(
                reports[name].as_str().expect("path"),
                MetricsReport::from_json,
            )?;
            let report = single_method_report(name, &m);
            write_file(Path::new(&report_path), &report.to_json())?;
            (to_value(&report), report.to_markdown())
        };
        let mut markdown = markdown;
        for w in &warnings {
            markdown.push_str(&format!("\n- Warning: {w}\n"));
        }
        let md_path = run.stage("report_markdown", "report.md", &markdown)?;
        Ok(json!({
            "report": report,
            "report_path": report_path,
            "markdown_path": md_path,
            "warnings": warnings,
        }))
    })();
    finish(result, runner, run)
}

fn finish(result: ToolResult<Value>, runner: Runner, run: RunDir) -> ToolResult<Value> {
    match result {
        Err(e) => Err(abort(&runner, &run, e)),
        Ok(mut v) => {
            write_file(&run.path("steps.json"), &runner.steps_json().to_string())?;
            v["run_dir"] = json!(run.dir.to_string_lossy());
            v["artifacts"] = Value::Object(run.artifacts);
            v["steps"] = runner.steps_json();
            Ok(v)
        }
    }
}

/// Baseline simulation from OD demand and given plans, re-timing of the
/// `k` most congested junctions, a second simulation and an improvement
/// report.
pub fn signal_opt(args: &Args, ctx: &Context) -> ToolResult<Value> {
    let horizon = args.f64_or("horizon_s", DEFAULT_HORIZON_S)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ToolError::invalid("horizon_s", "must be positive"));
    }
    let k = args.u64_or("k", DEFAULT_K)?;
    let speed = args.f64_or(
        "progression_speed_mps",
        crate::modules::DEFAULT_PROGRESSION_MPS,
    )?;
    let seed = args.u64_or("seed", 0)?;
    let network_text = args.text("network")?;
    let od_text = args.text("od")?;
    let districts_text = args.text("districts")?;
    let tls_text = args.text("tls")?;
    let tls_name = match args.opt_str("tls")? {
        Some(s) if !s.contains('\n') => s.to_string(),
        _ => "tls".to_string(),
    };

    let inputs = json!({
        "network": network_text,
        "od": od_text,
        "districts": districts_text,
        "tls": tls_text,
        "k": k,
        "horizon_s": horizon,
        "progression_speed_mps": speed,
        "seed": seed,
    });
    let mut run = RunDir::create(ctx, "signal_opt", &inputs)?;
    let mut runner = Runner::new(ctx);

    let result = (|| -> ToolResult<Value> {
        let network = run.stage("network", network_ext(&network_text), &network_text)?;
        let od = run.stage("od", "od.csv", &od_text)?;
        let districts = run.stage("districts", "districts.json", &districts_text)?;
        let initial = run.stage("plans_initial", "plans_initial.csv", &tls_text)?;

        let parsed = runner
            .call("csv_to_tls", json!({ "csv": initial }))
            .map_err(|mut e| {
                e.message = format!("{tls_name}: {}", e.message);
                e.param = Some("tls".into());
                e
            })?;
        let plans: Vec<SignalPlan> = serde_json::from_value(parsed["plans"].clone())
            .map_err(|e| ToolError::failed(format!("csv_to_tls result: {e}")))?;
        let net = load(&network, |t| match t.trim_start().starts_with('<') {
            true => trafficmcp_core::netxml::from_xml(t),
            false => RoadNetwork::from_json(t),
        })
        .map_err(|e| ToolError::invalid("network", e.message))?;
        let covered: BTreeSet<&str> = plans.iter().map(|p| p.junction.as_str()).collect();
        let missing: Vec<&str> = net
            .signalized_nodes()
            .map(|n| n.id.as_str())
            .filter(|j| !covered.contains(j))
            .collect();
        if !missing.is_empty() {
            return Err(ToolError::invalid(
                "tls",
                format!(
                    "{tls_name}: no plan for signalized junction(s) {}",
                    missing.join(", ")
                ),
            ));
        }

        let trips = run.artifact("trips", "trips.json");
        let t = runner.call(
            "od_to_trips",
            json!({ "od": od, "districts": districts, "seed": seed, "output": trips }),
        )?;
        if t["count"] == json!(0) {
            return Err(ToolError::invalid(
                "od",
                "OD matrix yields no vehicles; nothing to simulate",
            ));
        }
        let routes = route_or_abort(&mut runner, &mut run, &network, &trips)?;

        let sim = |plans: &str, output: &str| {
            json!({
                "network": network,
                "trips": trips,
                "routes": routes,
                "plans": plans,
                "end_s": horizon + DRAIN_S,
                "output": output,
            })
        };
        let baseline = run.artifact("sim_baseline", "sim_baseline.json");
        runner.call("run_simulation", sim(&initial, &baseline))?;
        let before = run.artifact("metrics_baseline", "metrics_baseline.json");
        runner.call(
            "cal_metrics",
            json!({ "simulation": baseline, "output": before }),
        )?;
        let ranking = runner.call(
            "detect_congestion",
            json!({ "simulation": baseline, "k": k }),
        )?;

        let optimized = run.artifact("plans_optimized", "plans_optimized.csv");
        let opt = runner.call(
            "optimize_signals",
            json!({
                "network": network,
                "simulation": baseline,
                "plans": initial,
                "k": k,
                "progression_speed_mps": speed,
                "horizon_s": horizon,
                "output": optimized,
            }),
        )?;
        let after_sim = run.artifact("sim_optimized", "sim_optimized.json");
        runner.call("run_simulation", sim(&optimized, &after_sim))?;
        let after = run.artifact("metrics_optimized", "metrics_optimized.json");
        runner.call(
            "cal_metrics",
            json!({ "simulation": after_sim, "output": after }),
        )?;

        let report_path = run.artifact("report", "report.json");
        let out = runner.call(
            "improvement_report",
            json!({
                "before": before,
                "after": after,
                "selected": opt["selected"],
                "changes": opt["changes"],
                "output": report_path,
            }),
        )?;
        let markdown = out["markdown"].as_str().unwrap_or_default().to_string();
        let md_path = run.stage("report_markdown", "report.md", &markdown)?;
        let report: Value = read_json(&report_path)?;
        Ok(json!({
            "report": report,
            "report_path": report_path,
            "markdown_path": md_path,
            "ranking": ranking["ranking"],
            "selected": opt["selected"],
            "corridor": opt["corridor"],
            "notes": opt["notes"],
        }))
    })();
    finish(result, runner, run)
}
