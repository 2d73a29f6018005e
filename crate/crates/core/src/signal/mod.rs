//! Signal plans and the four control strategies: fixed-time, actuated,
//! Webster and green-wave coordination. Also congestion ranking, plan
//! optimization from simulation output, and CSV interchange.

mod congestion;
mod plan;
mod timing;
mod tls_csv;

pub use congestion::{
    approach_flows, corridor_geometry, detect_congestion, highest_flow_corridor,
    junction_queue_stats, optimize_signals, CongestionEntry, Corridor, Optimization, PlanChange,
    QueueStats,
};
pub use plan::{default_phase_groups, ActuatedParams, Phase, SignalController, SignalPlan};
pub use timing::{
    fixed_plan, greenwave_offsets, largest_remainder, rescale_to_cycle, webster_cycle,
    webster_plan, ApproachFlow, TimedPlan, TimingWarning, MAX_CYCLE_S, MIN_CYCLE_S,
    WEBSTER_MIN_GREEN_S, Y_CLAMP,
};
pub use tls_csv::{plans_from_csv, plans_to_csv, TLS_CSV_HEADER};
