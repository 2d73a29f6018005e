use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::signal::plan::{Phase, SignalPlan};

pub const TLS_CSV_HEADER: [&str; 7] = [
    "junction",
    "cycle_s",
    "offset_s",
    "clearance_s",
    "phase_index",
    "green_edges",
    "duration_s",
];

const WHAT: &str = "signal plan CSV";

/// One row per phase, junctions in the given order.
pub fn plans_to_csv(plans: &[SignalPlan]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TLS_CSV_HEADER).expect("in-memory write");
    for p in plans {
        for (i, phase) in p.phases.iter().enumerate() {
            let edges: Vec<&str> = phase.green_edges.iter().map(String::as_str).collect();
            w.write_record([
                p.junction.clone(),
                p.cycle_s.to_string(),
                p.offset_s.to_string(),
                p.clearance_s.to_string(),
                i.to_string(),
                edges.join("|"),
                phase.duration_s.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("").trim();
    raw.parse().map_err(|_| {
        Error::parse(
            WHAT,
            Some(line),
            format!("column `{}` has invalid value `{raw}`", TLS_CSV_HEADER[i]),
        )
    })
}

/// Parses plans, checking each junction's cycle sum once its last row is
/// read. Line numbers count the header as line 1.
pub fn plans_from_csv(text: &str) -> Result<Vec<SignalPlan>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::parse(WHAT, Some(1), e.to_string()))?,
        None => return Err(Error::parse(WHAT, Some(1), "missing header")),
    };
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != TLS_CSV_HEADER {
        return Err(Error::parse(
            WHAT,
            Some(1),
            format!("header must be `{}`", TLS_CSV_HEADER.join(",")),
        ));
    }

    let mut plans: Vec<SignalPlan> = Vec::new();
    let mut last_line = 1;
    let mut seen = BTreeSet::new();
    let finish = |plan: &SignalPlan, line: usize| {
        plan.check()
            .map_err(|e| Error::parse(WHAT, Some(line), e.to_string()))
    };
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            Error::parse(WHAT, line, e.to_string())
        })?;
        let line = rec
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(last_line + 1);
        if rec.len() != TLS_CSV_HEADER.len() {
            return Err(Error::parse(
                WHAT,
                Some(line),
                format!(
                    "expected {} columns, found {}",
                    TLS_CSV_HEADER.len(),
                    rec.len()
                ),
            ));
        }
        // Ids are taken verbatim so that any id survives a roundtrip.
        let junction = rec[0].to_string();
        if junction.is_empty() {
            return Err(Error::parse(WHAT, Some(line), "empty junction id"));
        }
        let cycle_s: u32 = field(&rec, 1, line)?;
        let offset_s: u32 = field(&rec, 2, line)?;
        let clearance_s: u32 = field(&rec, 3, line)?;
        let phase_index: usize = field(&rec, 4, line)?;
        let green_edges: BTreeSet<String> = rec[5]
            .split('|')
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        let duration_s: u32 = field(&rec, 6, line)?;

        let continues = plans.last().is_some_and(|p| p.junction == junction);
        if !continues {
            if let Some(prev) = plans.last() {
                finish(prev, last_line)?;
            }
            if !seen.insert(junction.clone()) {
                return Err(Error::parse(
                    WHAT,
                    Some(line),
                    format!("rows of junction `{junction}` are not contiguous"),
                ));
            }
            plans.push(SignalPlan {
                junction: junction.clone(),
                cycle_s,
                offset_s,
                clearance_s,
                phases: Vec::new(),
            });
        }
        let plan = plans.last_mut().expect("pushed above");
        if (plan.cycle_s, plan.offset_s, plan.clearance_s) != (cycle_s, offset_s, clearance_s) {
            return Err(Error::parse(
                WHAT,
                Some(line),
                format!("cycle, offset or clearance differs from earlier rows of `{junction}`"),
            ));
        }
        if phase_index != plan.phases.len() {
            return Err(Error::parse(
                WHAT,
                Some(line),
                format!(
                    "expected phase_index {}, found {phase_index}",
                    plan.phases.len()
                ),
            ));
        }
        plan.phases.push(Phase {
            green_edges,
            duration_s,
        });
        last_line = line;
    }
    if let Some(prev) = plans.last() {
        finish(prev, last_line)?;
    }
    Ok(plans)
}
