//! Aggregates over simulation output, method comparison and before/after
//! improvement reports. Each report has a JSON form and a Markdown rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{junction_queue_stats, PlanChange, QueueStats};
use crate::sim::SimOutput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Averages over finished vehicles; `None` when nothing finished.
    pub avg_travel_time_s: Option<f64>,
    pub avg_waiting_time_s: Option<f64>,
    pub avg_delay_s: Option<f64>,
    pub finished: u64,
    pub unfinished: u64,
    pub per_junction: BTreeMap<String, QueueStats>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::parse("metrics JSON", Some(e.line()), e.to_string()))
    }

    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::AvgTravelTime => self.avg_travel_time_s,
            Metric::AvgWaitingTime => self.avg_waiting_time_s,
            Metric::AvgDelay => self.avg_delay_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "avg_travel_time_s")]
    AvgTravelTime,
    #[serde(rename = "avg_waiting_time_s")]
    AvgWaitingTime,
    #[serde(rename = "avg_delay_s")]
    AvgDelay,
}

impl Metric {
    pub const ALL: [Metric; 3] = [
        Metric::AvgTravelTime,
        Metric::AvgWaitingTime,
        Metric::AvgDelay,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::AvgTravelTime => "avg_travel_time_s",
            Metric::AvgWaitingTime => "avg_waiting_time_s",
            Metric::AvgDelay => "avg_delay_s",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::AvgTravelTime => "Avg Travel Time (s)",
            Metric::AvgWaitingTime => "Avg Waiting Time (s/veh)",
            Metric::AvgDelay => "Avg Delay (s/veh)",
        }
    }
}

pub fn cal_metrics(output: &SimOutput) -> MetricsReport {
    let mut n = 0u64;
    let (mut travel, mut waiting, mut delay) = (0.0, 0.0, 0.0);
    for v in &output.vehicles {
        if let Some(arrive) = v.arrive_s {
            n += 1;
            travel += arrive - v.depart_s;
            waiting += v.waiting_s;
            delay += arrive - v.depart_s - v.freeflow_s;
        }
    }
    let avg = |s: f64| (n > 0).then(|| s / n as f64);
    let mut warnings = Vec::new();
    if n == 0 {
        warnings.push("no vehicle finished; averages are n/a".to_string());
    }
    MetricsReport {
        avg_travel_time_s: avg(travel),
        avg_waiting_time_s: avg(waiting),
        avg_delay_s: avg(delay),
        finished: n,
        unfinished: output.vehicles.len() as u64 - n,
        per_junction: junction_queue_stats(output),
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub avg_travel_time_s: Option<f64>,
    pub avg_waiting_time_s: Option<f64>,
    pub avg_delay_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub methods: IndexMap<String, MethodRow>,
    pub best: BTreeMap<Metric, String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into())
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Signal control comparison\n\n| Method |");
        for m in Metric::ALL {
            let _ = write!(s, " {} |", m.label());
        }
        s.push_str("\n|---|---:|---:|---:|\n");
        for (name, row) in &self.methods {
            let _ = write!(s, "| {name} |");
            for (m, v) in Metric::ALL.into_iter().zip([
                row.avg_travel_time_s,
                row.avg_waiting_time_s,
                row.avg_delay_s,
            ]) {
                let cell = fmt_value(v);
                if self.best.get(&m) == Some(name) {
                    let _ = write!(s, " **{cell}** |");
                } else {
                    let _ = write!(s, " {cell} |");
                }
            }
            s.push('\n');
        }
        s.push('\n');
        for m in Metric::ALL {
            let _ = writeln!(
                s,
                "- Best {}: {}",
                m.label(),
                self.best.get(&m).map_or("n/a", String::as_str)
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "\n> Warning: {w}");
        }
        s
    }
}

fn build_comparison(reports: &IndexMap<String, MetricsReport>) -> ComparisonReport {
    let methods: IndexMap<String, MethodRow> = reports
        .iter()
        .map(|(name, r)| {
            (
                name.clone(),
                MethodRow {
                    avg_travel_time_s: r.avg_travel_time_s,
                    avg_waiting_time_s: r.avg_waiting_time_s,
                    avg_delay_s: r.avg_delay_s,
                },
            )
        })
        .collect();
    let mut best = BTreeMap::new();
    for m in Metric::ALL {
        let winner = reports
            .iter()
            .filter_map(|(name, r)| r.metric(m).map(|v| (v, name)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        if let Some((_, name)) = winner {
            best.insert(m, name.clone());
        }
    }
    ComparisonReport {
        methods,
        best,
        warnings: Vec::new(),
    }
}

/// Side-by-side table with the best (lowest) method per metric. Ties go to
/// the lexicographically smaller method name.
pub fn compare_metrics(reports: &IndexMap<String, MetricsReport>) -> Result<ComparisonReport> {
    if reports.len() < 2 {
        return Err(Error::invalid(
            "reports",
            "at least two methods are needed to compare",
        ));
    }
    Ok(build_comparison(reports))
}

/// Report for a single method, flagged with a warning.
pub fn single_method_report(name: &str, report: &MetricsReport) -> ComparisonReport {
    let mut reports = IndexMap::new();
    reports.insert(name.to_string(), report.clone());
    let mut c = build_comparison(&reports);
    c.warnings.push(format!(
        "only `{name}` was evaluated; nothing to compare against"
    ));
    c
}

/// Percentage change from `before` to `after`; positive means lower is
/// better was achieved. `None` when `before` is missing or zero.
pub fn improvement_pct(before: Option<f64>, after: Option<f64>) -> Option<f64> {
    match (before, after) {
        (Some(b), Some(a)) if b > 0.0 => {
            let pct = (b - a) / b * 100.0;
            Some(if pct == 0.0 { 0.0 } else { pct })
        }
        _ => None,
    }
}

fn fmt_pct(p: Option<f64>) -> String {
    match p {
        Some(x) => {
            let s = format!("{x:.2}");
            if s == "-0.00" {
                "0.00".into()
            } else {
                s
            }
        }
        None => "n/a".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementCell {
    pub before: Option<f64>,
    pub after: Option<f64>,
    pub improvement_pct: Option<f64>,
}

impl ImprovementCell {
    fn new(before: Option<f64>, after: Option<f64>) -> Self {
        ImprovementCell {
            before,
            after,
            improvement_pct: improvement_pct(before, after),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionImprovement {
    pub junction: String,
    pub queue_time: ImprovementCell,
    pub max_queue: ImprovementCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub overall: BTreeMap<Metric, ImprovementCell>,
    pub junctions: Vec<JunctionImprovement>,
    pub changes: Vec<PlanChange>,
}

impl ImprovementReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Signal optimization results\n\n| Metric | Before | After | Improvement (%) |\n|---|---:|---:|---:|\n");
        for (m, c) in &self.overall {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} |",
                m.label(),
                fmt_value(c.before),
                fmt_value(c.after),
                fmt_pct(c.improvement_pct)
            );
        }
        s.push_str("\n## Key intersections\n\n| Junction | Queue Time (%) | Queue Length (%) |\n|---|---:|---:|\n");
        for j in &self.junctions {
            let _ = writeln!(
                s,
                "| {} | {} | {} |",
                j.junction,
                fmt_pct(j.queue_time.improvement_pct),
                fmt_pct(j.max_queue.improvement_pct)
            );
        }
        s.push_str("\n## Signal changes\n\n| Junction | Cycle (s) | Greens (s) | Offset (s) |\n|---|---|---|---|\n");
        let join = |g: &[u32]| g.iter().map(u32::to_string).collect::<Vec<_>>().join("/");
        for c in &self.changes {
            let _ = writeln!(
                s,
                "| {} | {} -> {} | {} -> {} | {} -> {} |",
                c.junction,
                c.old_cycle_s,
                c.new_cycle_s,
                join(&c.old_greens),
                join(&c.new_greens),
                c.old_offset_s,
                c.new_offset_s
            );
        }
        s
    }
}

pub fn improvement_report(
    before: &MetricsReport,
    after: &MetricsReport,
    selected: &[String],
    changes: &[PlanChange],
) -> Result<ImprovementReport> {
    let overall = Metric::ALL
        .into_iter()
        .map(|m| (m, ImprovementCell::new(before.metric(m), after.metric(m))))
        .collect();
    let mut junctions = Vec::with_capacity(selected.len());
    for j in selected {
        let (b, a) = match (before.per_junction.get(j), after.per_junction.get(j)) {
            (Some(b), Some(a)) => (b, a),
            _ => {
                return Err(Error::invalid(
                    "selected",
                    format!("junction `{j}` is missing from one of the reports"),
                ))
            }
        };
        junctions.push(JunctionImprovement {
            junction: j.clone(),
            queue_time: ImprovementCell::new(Some(b.queue_time_vehs), Some(a.queue_time_vehs)),
            max_queue: ImprovementCell::new(
                Some(b.max_queue_veh as f64),
                Some(a.max_queue_veh as f64),
            ),
        });
    }
    Ok(ImprovementReport {
        overall,
        junctions,
        changes: changes.to_vec(),
    })
}
