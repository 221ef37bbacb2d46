//! Per-job reconfiguration state machine.
//!
//! A running malleable job is in `Steady` phase until an iteration
//! boundary passes the inhibitor gates. Deciding a resize moves it through
//! `AwaitingDecision` into `Spawning` and `Redistributing`, where it serves
//! the priced spawn and transfer overhead, then `Resuming` returns it to
//! `Steady` at the new process count with its remaining iterations intact.

use serde::Deserialize;
use thiserror::Error;

use crate::redist::{self, RedistributionPlan};

#[derive(Debug, Error)]
pub enum ReconfigError {
    #[error("resize rejected: {0}")]
    PolicyViolation(String),
    #[error("a reconfiguration is already in flight")]
    Busy,
}

/// Resize decision for a running job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeAction {
    Expand { to: u32 },
    Shrink { to: u32 },
    None,
}

impl ResizeAction {
    pub fn target(&self) -> Option<u32> {
        match *self {
            ResizeAction::Expand { to } | ResizeAction::Shrink { to } => Some(to),
            ResizeAction::None => None,
        }
    }
}

/// Where a job stands in its reconfiguration cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum ReconfigPhase {
    Steady,
    AwaitingDecision,
    Spawning { target: u32 },
    Redistributing { plan: RedistributionPlan, remaining: f64 },
    Resuming,
}

impl ReconfigPhase {
    pub fn is_steady(&self) -> bool {
        matches!(self, ReconfigPhase::Steady)
    }
}

/// Spawn/destroy and transfer pricing knobs.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OverheadParams {
    /// Fixed seconds per spawn operation.
    pub spawn_base_s: f64,
    /// Additional seconds per spawned target process.
    pub spawn_per_proc_s: f64,
    pub bandwidth_bytes_per_s: f64,
    pub latency_s_per_transfer: f64,
}

impl Default for OverheadParams {
    fn default() -> Self {
        Self {
            spawn_base_s: 1.0,
            spawn_per_proc_s: 0.05,
            bandwidth_bytes_per_s: 12.5e9,
            latency_s_per_transfer: 0.001,
        }
    }
}

impl OverheadParams {
    /// All-free resizes: zero spawn and latency cost, infinite bandwidth.
    pub fn zero() -> Self {
        Self {
            spawn_base_s: 0.0,
            spawn_per_proc_s: 0.0,
            bandwidth_bytes_per_s: f64::INFINITY,
            latency_s_per_transfer: 0.0,
        }
    }
}

/// Seconds to spawn a group of `target_procs` processes, affine in the
/// target count.
pub fn spawn_cost(params: &OverheadParams, target_procs: u32) -> f64 {
    params.spawn_base_s + params.spawn_per_proc_s * f64::from(target_procs)
}

/// Inhibitor gate: true when both the period and the iteration inhibitor
/// have elapsed since the last check. Comparisons are boundary-inclusive
/// and a zero setting always passes.
pub fn should_check(
    now: f64,
    last_check_time: f64,
    iterations_since_check: u64,
    inhibitor_period_s: f64,
    inhibitor_iterations: u64,
) -> bool {
    now - last_check_time >= inhibitor_period_s && iterations_since_check >= inhibitor_iterations
}

/// Per-job reconfiguration bookkeeping owned by the simulation engine.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconfigState {
    phase: ReconfigPhase,
    pub last_check_time: f64,
    pub last_check_iteration: u64,
}

impl ReconfigState {
    pub fn new(start_time: f64) -> Self {
        Self {
            phase: ReconfigPhase::Steady,
            last_check_time: start_time,
            last_check_iteration: 0,
        }
    }

    pub fn phase(&self) -> &ReconfigPhase {
        &self.phase
    }

    /// Steps the machine, asserting the move is one of the legal
    /// transitions: Steady -> AwaitingDecision -> (Steady | Spawning ->
    /// Redistributing -> Resuming -> Steady).
    fn transition(&mut self, next: ReconfigPhase) {
        use ReconfigPhase::*;
        let legal = matches!(
            (&self.phase, &next),
            (Steady, AwaitingDecision)
                | (AwaitingDecision, Steady)
                | (AwaitingDecision, Spawning { .. })
                | (Spawning { .. }, Redistributing { .. })
                | (Redistributing { .. }, Resuming)
                | (Resuming, Steady)
        );
        debug_assert!(legal, "illegal phase transition {:?} -> {next:?}", self.phase);
        self.phase = next;
    }

    pub fn mark_check(&mut self, now: f64, iterations_done: u64) {
        self.transition(ReconfigPhase::AwaitingDecision);
        self.last_check_time = now;
        self.last_check_iteration = iterations_done;
    }

    pub fn decline(&mut self) {
        self.transition(ReconfigPhase::Steady);
    }

    /// Validates the action against the multiple/divisible rule and the
    /// job's malleability bounds, builds the redistribution plan over the
    /// job's modeled data footprint, and prices the overhead. On success
    /// the job is left in `Redistributing` holding the plan; the returned
    /// seconds are spawn plus transfer cost.
    pub fn begin_resize(
        &mut self,
        current_procs: u32,
        action: ResizeAction,
        lower: u32,
        upper: u32,
        total_data_bytes: u64,
        costs: &OverheadParams,
    ) -> Result<f64, ReconfigError> {
        if !matches!(
            self.phase,
            ReconfigPhase::Steady | ReconfigPhase::AwaitingDecision
        ) {
            return Err(ReconfigError::Busy);
        }
        let target = match action {
            ResizeAction::None => {
                return Err(ReconfigError::PolicyViolation(
                    "a resize must change the process count".into(),
                ))
            }
            ResizeAction::Expand { to } => {
                if to <= current_procs || to % current_procs != 0 {
                    return Err(ReconfigError::PolicyViolation(format!(
                        "expansion from {current_procs} to {to} is not an integer multiple"
                    )));
                }
                if to > upper {
                    return Err(ReconfigError::PolicyViolation(format!(
                        "expansion to {to} exceeds the upper limit {upper}"
                    )));
                }
                to
            }
            ResizeAction::Shrink { to } => {
                if to >= current_procs || current_procs % to != 0 {
                    return Err(ReconfigError::PolicyViolation(format!(
                        "shrink from {current_procs} to {to} is not an integer divisor"
                    )));
                }
                if to < lower {
                    return Err(ReconfigError::PolicyViolation(format!(
                        "shrink to {to} falls below the lower limit {lower}"
                    )));
                }
                to
            }
        };
        let plan = redist::plan_default(total_data_bytes, current_procs, target)
            .map_err(|e| ReconfigError::PolicyViolation(e.to_string()))?;
        let overhead = spawn_cost(costs, target)
            + redist::transfer_cost(
                &plan,
                1,
                costs.bandwidth_bytes_per_s,
                costs.latency_s_per_transfer,
            )
            .map_err(|e| ReconfigError::PolicyViolation(e.to_string()))?;
        if self.phase.is_steady() {
            self.transition(ReconfigPhase::AwaitingDecision);
        }
        self.transition(ReconfigPhase::Spawning { target });
        self.transition(ReconfigPhase::Redistributing {
            plan,
            remaining: overhead,
        });
        Ok(overhead)
    }

    /// Finishes the in-flight resize, returning the new process count.
    pub fn complete_resize(&mut self) -> u32 {
        let target = match &self.phase {
            ReconfigPhase::Redistributing { plan, .. } => plan.new_procs,
            other => panic!("complete_resize in phase {other:?}"),
        };
        self.transition(ReconfigPhase::Resuming);
        self.transition(ReconfigPhase::Steady);
        target
    }
}
