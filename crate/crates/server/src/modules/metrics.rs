use indexmap::IndexMap;
use serde_json::{json, Map, Value};

use trafficmcp_core::metrics::{cal_metrics, compare_metrics, improvement_report, MetricsReport};
use trafficmcp_core::signal::PlanChange;

use super::{deliver, to_value, unknown_tool, ModuleSpec, ToolDef, ToolModule};
use crate::context::Context;
use crate::error::{ToolError, ToolResult};
use crate::params::{opt, read_file, req, Args, ParamType as T};

pub const SPEC: ModuleSpec = ModuleSpec {
    name: "metrics",
    description: "Travel, waiting and delay metrics and comparison reports",
    tools: &[
        ToolDef {
            name: "cal_metrics",
            description: "Average travel time, waiting time and delay of a simulation",
            params: &[req("simulation", T::Document), opt("output", T::String)],
        },
        ToolDef {
            name: "compare_metrics",
            description: "Side-by-side comparison of named metric reports",
            params: &[req("reports", T::Object), opt("output", T::String)],
        },
        ToolDef {
            name: "improvement_report",
            description: "Before/after change of metrics and of selected junction queues",
            params: &[
                req("before", T::Document),
                req("after", T::Document),
                opt("selected", T::Array),
                opt("changes", T::Array),
                opt("output", T::String),
            ],
        },
    ],
    factory: || Box::new(Metrics),
};

struct Metrics;

/// Report values may be inline objects or paths to report JSON.
fn report_map(args: &Args) -> ToolResult<IndexMap<String, MetricsReport>> {
    let raw: Map<String, Value> = args.typed("reports")?;
    let mut out = IndexMap::with_capacity(raw.len());
    for (name, v) in raw {
        let report = match v {
            Value::String(path) => {
                let text = read_file("reports", std::path::Path::new(&path))?;
                MetricsReport::from_json(&text)
                    .map_err(|e| ToolError::from_core_param("reports", e))?
            }
            other => serde_json::from_value(other)
                .map_err(|e| ToolError::invalid("reports", format!("report `{name}`: {e}")))?,
        };
        out.insert(name, report);
    }
    Ok(out)
}

fn with_markdown(v: Value, md: String) -> Value {
    let mut v = v;
    v["markdown"] = json!(md);
    v
}

impl ToolModule for Metrics {
    fn call(&mut self, tool: &str, args: &Args, _ctx: &Context) -> ToolResult<Value> {
        match tool {
            "cal_metrics" => {
                let out = args.sim_output("simulation")?;
                let report = cal_metrics(&out);
                deliver(
                    args,
                    || to_value(&report),
                    || serde_json::to_string_pretty(&report).expect("serializable"),
                    json!({
                        "avg_travel_time_s": report.avg_travel_time_s,
                        "finished": report.finished,
                        "unfinished": report.unfinished,
                    }),
                )
            }
            "compare_metrics" => {
                let report = compare_metrics(&report_map(args)?)?;
                let md = report.to_markdown();
                deliver(
                    args,
                    || with_markdown(to_value(&report), md.clone()),
                    || report.to_json(),
                    json!({ "best": to_value(&report.best), "markdown": md }),
                )
            }
            "improvement_report" => {
                let before = args.metrics("before")?;
                let after = args.metrics("after")?;
                let selected = if args.has("selected") {
                    args.strings("selected")?
                } else {
                    Vec::new()
                };
                let changes: Vec<PlanChange> = args.opt_typed("changes")?.unwrap_or_default();
                let report = improvement_report(&before, &after, &selected, &changes)?;
                let md = report.to_markdown();
                deliver(
                    args,
                    || with_markdown(to_value(&report), md.clone()),
                    || report.to_json(),
                    json!({ "overall": to_value(&report.overall), "markdown": md }),
                )
            }
            other => Err(unknown_tool("metrics", other)),
        }
    }
}
