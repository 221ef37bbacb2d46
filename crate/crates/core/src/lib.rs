//! Deterministic discrete-event simulation of malleable batch workloads on
//! an HPC cluster.
//!
//! The crate is organized around the life of a job:
//!
//! - [`profiles`] holds measured application scalability data and derives
//!   per-application malleability parameters from the gain-difference
//!   heuristic.
//! - [`redist`] plans and (for verification) applies the data movement
//!   between the old and the new process group of a resize, and prices its
//!   transfer cost.
//! - [`reconfig`] is the per-job reconfiguration state machine with
//!   inhibitor gating and resize-overhead pricing.
//! - [`scheduler`] models the resource manager: a priority queue with
//!   backfill, moldable initial allocation, and the resize policy.
//! - [`workload`] generates reproducible synthetic job streams.
//! - [`sim`] binds everything into a deterministic event loop producing a
//!   [`sim::SimulationTrace`].
//! - [`metrics`] derives waiting/execution/completion statistics, resource
//!   allocation rate, throughput, and energy from a trace.

pub mod config;
pub mod metrics;
pub mod output;
pub mod profiles;
pub mod reconfig;
pub mod redist;
pub mod scheduler;
pub mod sim;
pub mod workload;
