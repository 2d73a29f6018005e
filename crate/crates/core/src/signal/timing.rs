use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::plan::{Phase, SignalPlan};

pub const MIN_CYCLE_S: f64 = 30.0;
pub const MAX_CYCLE_S: f64 = 120.0;
/// Flow-ratio sum above which the Webster cycle is evaluated at this value.
pub const Y_CLAMP: f64 = 0.9;
/// Webster greens are topped up to this where the green budget allows.
pub const WEBSTER_MIN_GREEN_S: u32 = 5;

/// Splits `total` whole seconds in proportion to `weights` (Hamilton's
/// method). Remaining seconds go to the largest fractional parts, earlier
/// index first on ties. All-zero weights split evenly.
pub fn largest_remainder(total: u32, weights: &[f64]) -> Vec<u32> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| total as f64 * w / sum).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut out: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut assigned: i64 = out.iter().map(|&v| v as i64).sum();
    let mut k = 0;
    while assigned < total as i64 {
        out[order[k % order.len()]] += 1;
        assigned += 1;
        k += 1;
    }
    // Float error can overshoot by a second; take it back from the smallest
    // fractional parts.
    let mut k = order.len();
    while assigned > total as i64 {
        k -= 1;
        let i = order[k % order.len()];
        if out[i] > 0 {
            out[i] -= 1;
            assigned -= 1;
        }
        if k == 0 {
            k = order.len();
        }
    }
    out
}

/// Moves seconds from the longest phases to any phase below `min` as long as
/// the donor stays at or above `min`. The total is unchanged.
fn enforce_min_green(durations: &mut [u32], min: u32) {
    loop {
        let Some(short) = durations.iter().position(|&d| d < min) else {
            return;
        };
        let donor = (0..durations.len())
            .filter(|&i| durations[i] > min)
            .max_by(|&a, &b| durations[a].cmp(&durations[b]).then(b.cmp(&a)));
        match donor {
            Some(d) => {
                durations[d] -= 1;
                durations[short] += 1;
            }
            None => return,
        }
    }
}

fn phases_from(groups: Vec<BTreeSet<String>>, durations: Vec<u32>) -> Vec<Phase> {
    groups
        .into_iter()
        .zip(durations)
        .map(|(green_edges, duration_s)| Phase {
            green_edges,
            duration_s,
        })
        .collect()
}

/// Equal-split fixed-time plan with offset 0.
pub fn fixed_plan(
    junction: &str,
    groups: Vec<BTreeSet<String>>,
    cycle_s: u32,
    clearance_s: u32,
) -> Result<SignalPlan> {
    if groups.is_empty() || groups.iter().any(BTreeSet::is_empty) {
        return Err(Error::invalid(
            "groups",
            "every phase needs at least one edge",
        ));
    }
    let n = groups.len() as u32;
    let lost = n * clearance_s;
    if cycle_s < lost + n {
        return Err(Error::invalid(
            "cycle_s",
            format!("cycle {cycle_s} s leaves no green after {n} clearances of {clearance_s} s"),
        ));
    }
    let durations = largest_remainder(cycle_s - lost, &vec![1.0; groups.len()]);
    Ok(SignalPlan {
        junction: junction.to_string(),
        cycle_s,
        offset_s: 0,
        clearance_s,
        phases: phases_from(groups, durations),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachFlow {
    pub edge: String,
    pub flow_vps: f64,
    pub sat_flow_vps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingWarning {
    Oversaturated,
    NoDemand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedPlan {
    pub plan: SignalPlan,
    /// Critical flow ratio of each phase.
    pub flow_ratios: Vec<f64>,
    pub warnings: Vec<TimingWarning>,
}

/// Webster's optimum cycle `(1.5 L + 5) / (1 - Y)` for lost time `L`,
/// with `Y` clamped at [`Y_CLAMP`], bounded to
/// [[`MIN_CYCLE_S`], [`MAX_CYCLE_S`]] and rounded to whole seconds.
pub fn webster_cycle(flow_ratio_sum: f64, lost_time_s: f64) -> (u32, Vec<TimingWarning>) {
    if flow_ratio_sum <= 0.0 {
        return (MIN_CYCLE_S as u32, vec![TimingWarning::NoDemand]);
    }
    let mut warnings = Vec::new();
    let y = if flow_ratio_sum >= Y_CLAMP {
        warnings.push(TimingWarning::Oversaturated);
        Y_CLAMP
    } else {
        flow_ratio_sum
    };
    let optimum = (1.5 * lost_time_s + 5.0) / (1.0 - y);
    (
        optimum.clamp(MIN_CYCLE_S, MAX_CYCLE_S).round() as u32,
        warnings,
    )
}

/// Webster timing for one junction. Each phase's critical ratio is the
/// largest flow/saturation ratio among its approaches; green time is split
/// in proportion to those ratios.
pub fn webster_plan(
    junction: &str,
    phases: &[Vec<ApproachFlow>],
    clearance_s: u32,
) -> Result<TimedPlan> {
    if phases.is_empty() {
        return Err(Error::invalid("phases", "at least one phase is required"));
    }
    let mut ratios = Vec::with_capacity(phases.len());
    for (i, phase) in phases.iter().enumerate() {
        if phase.is_empty() {
            return Err(Error::invalid(
                "phases",
                format!("phase {i} has no approaches"),
            ));
        }
        let mut y: f64 = 0.0;
        for a in phase {
            if !(a.flow_vps >= 0.0 && a.flow_vps.is_finite()) {
                return Err(Error::invalid(
                    "flow_vps",
                    format!("`{}` has invalid flow", a.edge),
                ));
            }
            if !(a.sat_flow_vps > 0.0) {
                return Err(Error::invalid(
                    "sat_flow_vps",
                    format!("`{}` has non-positive saturation flow", a.edge),
                ));
            }
            y = y.max(a.flow_vps / a.sat_flow_vps);
        }
        ratios.push(y);
    }
    let n = phases.len() as u32;
    let lost = n * clearance_s;
    let total_y: f64 = ratios.iter().sum();
    let (mut cycle, warnings) = webster_cycle(total_y, lost as f64);
    if cycle < lost + n {
        if lost + n > MAX_CYCLE_S as u32 {
            return Err(Error::invalid(
                "clearance_s",
                "clearances leave no room for green",
            ));
        }
        cycle = lost + n;
    }
    let mut greens = largest_remainder(cycle - lost, &ratios);
    enforce_min_green(&mut greens, WEBSTER_MIN_GREEN_S);
    enforce_min_green(&mut greens, 1);
    let groups = phases
        .iter()
        .map(|p| p.iter().map(|a| a.edge.clone()).collect())
        .collect();
    Ok(TimedPlan {
        plan: SignalPlan {
            junction: junction.to_string(),
            cycle_s: cycle,
            offset_s: 0,
            clearance_s,
            phases: phases_from(groups, greens),
        },
        flow_ratios: ratios,
        warnings,
    })
}

/// Stretches or shrinks a plan to `cycle_s`, keeping clearances and
/// splitting the new green budget in proportion to the old greens.
pub fn rescale_to_cycle(plan: &SignalPlan, cycle_s: u32) -> Result<SignalPlan> {
    let lost = plan.lost_time_s();
    let n = plan.phases.len() as u32;
    if cycle_s < lost + n {
        return Err(Error::invalid(
            "cycle_s",
            format!("cycle {cycle_s} s is too short for `{}`", plan.junction),
        ));
    }
    let weights: Vec<f64> = plan.phases.iter().map(|p| p.duration_s as f64).collect();
    let mut greens = largest_remainder(cycle_s - lost, &weights);
    enforce_min_green(&mut greens, 1);
    let mut out = plan.clone();
    out.cycle_s = cycle_s;
    out.offset_s %= cycle_s;
    for (p, g) in out.phases.iter_mut().zip(greens) {
        p.duration_s = g;
    }
    Ok(out)
}

/// Offsets for a chain of junctions so that a platoon travelling at
/// `progression_speed_mps` meets the start of each through green.
///
/// `positions` are cumulative distances from the first junction.
/// `through` optionally names, per junction, the incoming edge carrying the
/// progression; the phase serving it is rotated to the front.
pub fn greenwave_offsets(
    plans: &[SignalPlan],
    positions: &[f64],
    progression_speed_mps: f64,
    through: Option<&[String]>,
) -> Result<Vec<SignalPlan>> {
    if plans.is_empty() {
        return Err(Error::invalid("plans", "no plans given"));
    }
    if positions.len() != plans.len() {
        return Err(Error::invalid("positions", "need one position per plan"));
    }
    if positions[0] != 0.0 {
        return Err(Error::invalid("positions", "first position must be 0"));
    }
    if positions.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("positions", "must be strictly increasing"));
    }
    if !(progression_speed_mps > 0.0 && progression_speed_mps.is_finite()) {
        return Err(Error::invalid("progression_speed_mps", "must be positive"));
    }
    if let Some(t) = through {
        if t.len() != plans.len() {
            return Err(Error::invalid("through", "need one through edge per plan"));
        }
    }
    let cycle = plans[0].cycle_s;
    let odd: Vec<&str> = plans
        .iter()
        .filter(|p| p.cycle_s != cycle)
        .map(|p| p.junction.as_str())
        .collect();
    if !odd.is_empty() {
        return Err(Error::invalid(
            "plans",
            format!(
                "cycle lengths differ from `{}` ({cycle} s) at: {}",
                plans[0].junction,
                odd.join(", ")
            ),
        ));
    }

    let mut out = Vec::with_capacity(plans.len());
    for (j, plan) in plans.iter().enumerate() {
        let mut p = plan.clone();
        if let Some(t) = through {
            let edge = &t[j];
            let pos = p
                .phases
                .iter()
                .position(|ph| ph.green_edges.contains(edge))
                .ok_or_else(|| {
                    Error::invalid(
                        "through",
                        format!("no phase of `{}` serves `{edge}`", p.junction),
                    )
                })?;
            p.phases.rotate_left(pos);
        }
        let travel = positions[j] / progression_speed_mps;
        let offset = travel.rem_euclid(cycle as f64).round() as u32 % cycle;
        p.offset_s = offset;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn groups(n: usize) -> Vec<BTreeSet<String>> {
        (0..n).map(|i| BTreeSet::from([format!("e{i}")])).collect()
    }

    fn flows(ys: &[f64]) -> Vec<Vec<ApproachFlow>> {
        ys.iter()
            .enumerate()
            .map(|(i, &y)| {
                vec![ApproachFlow {
                    edge: format!("e{i}"),
                    flow_vps: y * 0.5,
                    sat_flow_vps: 0.5,
                }]
            })
            .collect()
    }

    #[test]
    fn fixed_plan_examples() {
        assert_eq!(
            fixed_plan("j", groups(2), 60, 4).unwrap().greens(),
            [26, 26]
        );
        assert_eq!(
            fixed_plan("j", groups(3), 60, 4).unwrap().greens(),
            [16, 16, 16]
        );
        let err = fixed_plan("j", groups(2), 8, 4).unwrap_err();
        assert_eq!(err.param(), Some("cycle_s"));
    }

    #[test]
    fn fixed_plan_remainder_goes_to_first_phases() {
        let p = fixed_plan("j", groups(3), 61, 4).unwrap();
        assert_eq!(p.greens(), [17, 16, 16]);
        p.check().unwrap();
    }

    #[test]
    fn webster_reference_case() {
        // L = 8, Y = 0.5: (1.5*8 + 5) / 0.5 = 34; 26 s of green split 15.6 / 10.4.
        let t = webster_plan("j", &flows(&[0.3, 0.2]), 4).unwrap();
        assert_eq!(t.plan.cycle_s, 34);
        assert_eq!(t.plan.greens(), [16, 10]);
        assert!(t.warnings.is_empty());
        t.plan.check().unwrap();
    }

    #[test]
    fn webster_clamps_oversaturation() {
        // Y = 0.9: 17 / 0.1 = 170, bounded to 120.
        let t = webster_plan("j", &flows(&[0.45, 0.45]), 4).unwrap();
        assert_eq!(t.plan.cycle_s, 120);
        assert_eq!(t.warnings, [TimingWarning::Oversaturated]);
        assert_eq!(t.plan.greens(), [56, 56]);
    }

    #[test]
    fn webster_without_demand_splits_evenly() {
        let t = webster_plan("j", &flows(&[0.0, 0.0]), 4).unwrap();
        assert_eq!(t.plan.cycle_s, 30);
        assert_eq!(t.plan.greens(), [11, 11]);
        assert_eq!(t.warnings, [TimingWarning::NoDemand]);
    }

    #[test]
    fn webster_uses_the_critical_approach() {
        let phases = vec![
            vec![
                ApproachFlow {
                    edge: "a".into(),
                    flow_vps: 0.05,
                    sat_flow_vps: 0.5,
                },
                ApproachFlow {
                    edge: "b".into(),
                    flow_vps: 0.15,
                    sat_flow_vps: 0.5,
                },
            ],
            vec![ApproachFlow {
                edge: "c".into(),
                flow_vps: 0.1,
                sat_flow_vps: 0.5,
            }],
        ];
        let t = webster_plan("j", &phases, 4).unwrap();
        assert_eq!(t.flow_ratios, [0.3, 0.2]);
        assert_eq!(t.plan.cycle_s, 34);
    }

    #[test]
    fn webster_tops_up_starved_phase() {
        let t = webster_plan("j", &flows(&[0.5, 0.0]), 4).unwrap();
        let g = t.plan.greens();
        assert_eq!(g.iter().sum::<u32>(), t.plan.cycle_s - 8);
        assert!(g[1] >= WEBSTER_MIN_GREEN_S);
    }

    #[test]
    fn greenwave_reference_offsets() {
        let plans: Vec<_> = (0..3)
            .map(|i| {
                let mut p = fixed_plan(&format!("j{i}"), groups(2), 60, 4).unwrap();
                p.junction = format!("j{i}");
                p
            })
            .collect();
        let out = greenwave_offsets(&plans, &[0.0, 300.0, 600.0], 12.0, None).unwrap();
        assert_eq!(
            out.iter().map(|p| p.offset_s).collect::<Vec<_>>(),
            [0, 25, 50]
        );

        let out = greenwave_offsets(&plans[..2], &[0.0, 720.0], 12.0, None).unwrap();
        assert_eq!(out[1].offset_s, 0);
    }

    #[test]
    fn greenwave_rejects_mixed_cycles() {
        let a = fixed_plan("a", groups(2), 60, 4).unwrap();
        let b = fixed_plan("b", groups(2), 70, 4).unwrap();
        let err = greenwave_offsets(&[a, b], &[0.0, 300.0], 12.0, None).unwrap_err();
        assert!(
            err.to_string().contains("`b`") || err.to_string().contains(" b"),
            "{err}"
        );
    }

    #[test]
    fn greenwave_rotates_through_phase_first() {
        let a = fixed_plan("a", groups(2), 60, 4).unwrap();
        let b = fixed_plan("b", groups(2), 60, 4).unwrap();
        let through = ["e0".to_string(), "e1".to_string()];
        let out = greenwave_offsets(&[a, b], &[0.0, 300.0], 12.0, Some(&through)).unwrap();
        assert!(out[1].phases[0].green_edges.contains("e1"));
        assert_eq!(out[1].greens(), [26, 26]);
    }

    #[test]
    fn rescale_preserves_proportions() {
        let p = webster_plan("j", &flows(&[0.3, 0.2]), 4).unwrap().plan;
        let q = rescale_to_cycle(&p, 60).unwrap();
        q.check().unwrap();
        assert_eq!(q.greens(), [32, 20]);
    }

    proptest! {
        #[test]
        fn largest_remainder_sums_exactly(total in 0u32..500, ws in prop::collection::vec(0.0f64..10.0, 1..8)) {
            let out = largest_remainder(total, &ws);
            prop_assert_eq!(out.iter().sum::<u32>(), total);
        }

        #[test]
        fn webster_greens_fill_the_cycle(ys in prop::collection::vec(0.0f64..0.6, 1..5), clearance in 0u32..6) {
            let t = webster_plan("j", &flows(&ys), clearance).unwrap();
            let p = &t.plan;
            prop_assert_eq!(p.greens().iter().sum::<u32>(), p.cycle_s - p.lost_time_s());
            prop_assert!(p.check().is_ok());
        }

        #[test]
        fn webster_cycle_is_monotone_in_y(a in 0.01f64..0.89, b in 0.01f64..0.89, l in 0.0f64..20.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let raw = |y: f64| (1.5 * l + 5.0) / (1.0 - y);
            prop_assert!(raw(lo) <= raw(hi));
            prop_assert!(webster_cycle(lo, l).0 <= webster_cycle(hi, l).0);
        }

        #[test]
        fn offsets_ignore_whole_cycles(m in 0u32..5, d1 in 1u32..50, d2 in 1u32..50) {
            let plans: Vec<_> = (0..3).map(|i| fixed_plan(&format!("j{i}"), groups(2), 60, 4).unwrap()).collect();
            // Distances in whole metres at 12 m/s; one cycle is 720 m.
            let base = [0.0, d1 as f64 * 12.0, (d1 + d2) as f64 * 12.0];
            let shifted = [0.0, base[1] + (m * 720) as f64, base[2] + (m * 720) as f64];
            let a = greenwave_offsets(&plans, &base, 12.0, None).unwrap();
            let b = greenwave_offsets(&plans, &shifted, 12.0, None).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
