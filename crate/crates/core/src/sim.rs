//! Deterministic discrete-event engine.
//!
//! Events are processed in (time, kind rank, job id, sequence) order with
//! the kind ranking Arrival < ReconfigDone < IterationBoundary < JobDone <
//! SchedulerTick, so all state is settled before scheduling decisions run.
//! Running jobs advance check-to-check: between resize checks a job jumps
//! whole batches of iterations in a single event, with the batch size
//! chosen so inhibitor semantics stay exact. Boundary times are computed
//! from the iteration count anchored at the last resize, so a job that
//! never resizes finishes exactly at its analytic execution time.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::config::RunConfig;
use crate::profiles::{IterationRule, MalleabilityParams, ProfileSet};
use crate::reconfig::{self, ReconfigState, ResizeAction};
use crate::scheduler::{
    resize_decision, schedule_pass, ClusterState, JobId, PendingJob, PendingQueue, QueueEntry,
    ResizeQuery, StartMode,
};
use crate::workload::{JobClass, JobSubmission, Submission};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("job {job_id} cannot be scheduled: {reason}")]
    Unschedulable { job_id: JobId, reason: String },
    #[error("job {job_id} uses unknown application `{app}`")]
    UnknownApplication { job_id: JobId, app: String },
    #[error("job {job_id}: {reason}")]
    InvalidJob { job_id: JobId, reason: String },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(#[from] crate::config::ConfigError),
    #[error("internal invariant violated at t={time}: {reason}")]
    InvariantViolation { time: f64, reason: String },
}

/// One resize of one job, as recorded in the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ResizeRecord {
    pub decided_at: f64,
    pub completed_at: f64,
    pub from_procs: u32,
    pub to_procs: u32,
    pub overhead_s: f64,
    /// Pending job promoted by this shrink, if any.
    pub promoted_job: Option<JobId>,
}

/// Per-job trace record.
#[derive(Debug, Clone, PartialEq)]
pub struct JobRecord {
    pub job_id: JobId,
    pub app: String,
    pub class: JobClass,
    pub submit: f64,
    pub start: f64,
    pub end: f64,
    /// Allocated node count as a step function of time; changes only at
    /// start and resize events.
    pub allocation_history: Vec<(f64, u32)>,
    pub resizes: Vec<ResizeRecord>,
    pub iterations: u64,
}

/// Cluster-wide counters sampled at every change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub time: f64,
    pub allocated_nodes: u32,
    pub running_jobs: u32,
    pub completed_jobs: u32,
}

/// Timestamped event log of one run; all metrics derive from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub total_nodes: u32,
    pub seed: u64,
    pub jobs: Vec<JobRecord>,
    pub series: Vec<SeriesPoint>,
    /// Integral of allocated nodes over time.
    pub allocated_node_seconds: f64,
    /// Earliest submit time (0 for an empty workload).
    pub start_time: f64,
    /// Latest completion time.
    pub end_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrival(JobId),
    ReconfigDone(JobId),
    IterationBoundary(JobId),
    JobDone(JobId),
    SchedulerTick,
}

impl EventKind {
    fn rank(self) -> u8 {
        match self {
            EventKind::Arrival(_) => 0,
            EventKind::ReconfigDone(_) => 1,
            EventKind::IterationBoundary(_) => 2,
            EventKind::JobDone(_) => 3,
            EventKind::SchedulerTick => 4,
        }
    }

    fn job(self) -> JobId {
        match self {
            EventKind::Arrival(j)
            | EventKind::ReconfigDone(j)
            | EventKind::IterationBoundary(j)
            | EventKind::JobDone(j) => j,
            EventKind::SchedulerTick => 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct QueuedEvent {
    time: f64,
    kind: EventKind,
    seq: u64,
}

impl QueuedEvent {
    fn key(&self) -> (f64, u8, JobId, u64) {
        (self.time, self.kind.rank(), self.kind.job(), self.seq)
    }
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for QueuedEvent {}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we pop the earliest event
        other
            .key()
            .partial_cmp(&self.key())
            .expect("event times are finite")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunState {
    Pending,
    Running,
    Finished,
}

/// Runtime state of one job, with the profile data it needs resolved up
/// front so the event handlers stay borrow-free.
struct JobRuntime {
    sub: JobSubmission,
    timings: BTreeMap<u32, f64>,
    reference_iterations: u64,
    iteration_rule: IterationRule,
    inhibitor_period_s: f64,
    inhibitor_iterations: u64,
    data_bytes: u64,
    valid_configs: Vec<u32>,
    state: RunState,
    allocation: u32,
    iterations_total: u64,
    iterations_done: u64,
    /// Time and iteration count at the start of the current compute
    /// segment (job start or last resize completion).
    anchor_time: f64,
    anchor_iteration: u64,
    /// Full-run seconds at the current process count.
    run_timing_s: f64,
    /// Iterations the next scheduled event will credit.
    iters_at_next_event: u64,
    reconfig: ReconfigState,
    last_decision_time: Option<f64>,
    record: JobRecord,
}

impl JobRuntime {
    fn start_mode(&self) -> StartMode {
        match self.sub.submission() {
            Submission::Rigid => StartMode::Rigid {
                nodes: self.sub.request,
            },
            Submission::Moldable => StartMode::Moldable {
                configs: self.valid_configs.clone(),
            },
        }
    }

    fn min_start_need(&self) -> u32 {
        self.start_mode().min_need()
    }

    /// Exact time of iteration boundary `n`, anchored at the last resize.
    fn boundary_time(&self, n: u64) -> f64 {
        self.anchor_time
            + self.run_timing_s * (n - self.anchor_iteration) as f64
                / self.reference_iterations as f64
    }
}

struct Engine<'a> {
    config: &'a RunConfig,
    seed: u64,
    jobs: Vec<JobRuntime>,
    cluster: ClusterState,
    queue: PendingQueue,
    events: BinaryHeap<QueuedEvent>,
    seq: u64,
    now: f64,
    unfinished: usize,
    completed: u32,
    series: Vec<SeriesPoint>,
    node_seconds: f64,
    integral_mark: f64,
}

/// Runs a workload to completion and returns its trace. The run is fully
/// deterministic for fixed inputs; the seed is carried into the trace for
/// bookkeeping.
pub fn run(
    workload: &[JobSubmission],
    profiles: &ProfileSet,
    config: &RunConfig,
    seed: u64,
) -> Result<SimulationTrace, SimError> {
    config.validate()?;
    let mut engine = Engine::new(workload, profiles, config, seed)?;
    engine.run_loop()?;
    engine.into_trace()
}

impl<'a> Engine<'a> {
    fn new(
        workload: &[JobSubmission],
        profiles: &ProfileSet,
        config: &'a RunConfig,
        seed: u64,
    ) -> Result<Self, SimError> {
        let total_nodes = config.cluster.total_nodes;
        let mut jobs = Vec::with_capacity(workload.len());
        for (idx, sub) in workload.iter().enumerate() {
            let job_id = sub.job_id;
            if job_id != idx as u64 {
                return Err(SimError::InvalidJob {
                    job_id,
                    reason: format!("ids must be dense and ascending, found {job_id} at row {idx}"),
                });
            }
            let profile = profiles.get(&sub.app).ok_or_else(|| SimError::UnknownApplication {
                job_id,
                app: sub.app.clone(),
            })?;
            let MalleabilityParams { lower, upper, preferred } = sub.params;
            if !(lower <= preferred && preferred <= upper) {
                return Err(SimError::InvalidJob {
                    job_id,
                    reason: format!("bounds {lower}/{preferred}/{upper} are not ordered"),
                });
            }
            for (what, procs) in [("lower", lower), ("upper", upper), ("preferred", preferred)] {
                if !profile.is_measured(procs) {
                    return Err(SimError::InvalidJob {
                        job_id,
                        reason: format!("{what} limit {procs} is not a measured configuration"),
                    });
                }
            }
            if lower > total_nodes {
                return Err(SimError::Unschedulable {
                    job_id,
                    reason: format!("lower limit {lower} exceeds the {total_nodes}-node cluster"),
                });
            }
            let valid_configs = profile.valid_configs(lower, upper);
            match sub.submission() {
                Submission::Rigid => {
                    if sub.request > total_nodes {
                        return Err(SimError::Unschedulable {
                            job_id,
                            reason: format!(
                                "request {} exceeds the {total_nodes}-node cluster",
                                sub.request
                            ),
                        });
                    }
                    if !profile.is_measured(sub.request) {
                        return Err(SimError::InvalidJob {
                            job_id,
                            reason: format!(
                                "request {} is not a measured configuration",
                                sub.request
                            ),
                        });
                    }
                }
                Submission::Moldable => {
                    if valid_configs.is_empty() {
                        return Err(SimError::InvalidJob {
                            job_id,
                            reason: "no measured configuration inside [lower, upper]".into(),
                        });
                    }
                }
            }
            if sub.malleable() && config.scheduler.enable_malleability {
                let largest = *valid_configs.last().unwrap_or(&sub.request);
                let data = profile.total_data_bytes();
                if data % u64::from(largest) != 0 {
                    return Err(SimError::InvalidJob {
                        job_id,
                        reason: format!(
                            "data footprint {data} B is not divisible by the largest \
                             configuration {largest}; resize plans need uniform chunks"
                        ),
                    });
                }
            }
            jobs.push(JobRuntime {
                sub: sub.clone(),
                timings: profile.measured_timings().clone(),
                reference_iterations: profile.reference_iterations(),
                iteration_rule: profile.job_iterations(),
                inhibitor_period_s: profile.inhibitor_period_s(),
                inhibitor_iterations: profile.inhibitor_iterations(),
                data_bytes: profile.total_data_bytes(),
                valid_configs,
                state: RunState::Pending,
                allocation: 0,
                iterations_total: 0,
                iterations_done: 0,
                anchor_time: 0.0,
                anchor_iteration: 0,
                run_timing_s: 0.0,
                iters_at_next_event: 0,
                reconfig: ReconfigState::new(0.0),
                last_decision_time: None,
                record: JobRecord {
                    job_id,
                    app: sub.app.clone(),
                    class: sub.class,
                    submit: sub.submit_time,
                    start: 0.0,
                    end: 0.0,
                    allocation_history: Vec::new(),
                    resizes: Vec::new(),
                    iterations: 0,
                },
            });
        }

        let unfinished = jobs.len();
        let mut engine = Engine {
            config,
            seed,
            jobs,
            cluster: ClusterState::new(total_nodes),
            queue: PendingQueue::new(),
            events: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            unfinished,
            completed: 0,
            series: Vec::new(),
            node_seconds: 0.0,
            integral_mark: 0.0,
        };
        for job in 0..engine.jobs.len() {
            let time = engine.jobs[job].sub.submit_time;
            engine.push_event(time, EventKind::Arrival(job as JobId));
        }
        if !engine.jobs.is_empty() {
            engine.push_event(0.0, EventKind::SchedulerTick);
        }
        Ok(engine)
    }

    fn push_event(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.events.push(QueuedEvent {
            time,
            kind,
            seq: self.seq,
        });
    }

    fn invariant(&self, reason: String) -> SimError {
        SimError::InvariantViolation {
            time: self.now,
            reason,
        }
    }

    fn run_loop(&mut self) -> Result<(), SimError> {
        while let Some(event) = self.events.pop() {
            debug_assert!(event.time >= self.now - 1e-9, "time went backwards");
            self.advance_integral(event.time);
            self.now = event.time;
            match event.kind {
                EventKind::Arrival(job) => self.on_arrival(job),
                EventKind::SchedulerTick => self.on_tick(),
                EventKind::IterationBoundary(job) => self.on_boundary(job)?,
                EventKind::ReconfigDone(job) => self.on_reconfig_done(job),
                EventKind::JobDone(job) => self.on_job_done(job)?,
            }
            self.cluster
                .check_conservation()
                .map_err(|reason| self.invariant(reason))?;
            self.touch_series();
        }
        if self.unfinished > 0 {
            return Err(self.invariant(format!("{} jobs never finished", self.unfinished)));
        }
        Ok(())
    }

    fn advance_integral(&mut self, to: f64) {
        let allocated = f64::from(self.cluster.allocated_nodes());
        self.node_seconds += allocated * (to - self.integral_mark);
        self.integral_mark = to;
    }

    fn touch_series(&mut self) {
        let point = SeriesPoint {
            time: self.now,
            allocated_nodes: self.cluster.allocated_nodes(),
            running_jobs: self.cluster.running_jobs(),
            completed_jobs: self.completed,
        };
        match self.series.last_mut() {
            Some(last) if last.time == point.time => *last = point,
            Some(last)
                if (last.allocated_nodes, last.running_jobs, last.completed_jobs)
                    == (point.allocated_nodes, point.running_jobs, point.completed_jobs) => {}
            _ => self.series.push(point),
        }
    }

    fn on_arrival(&mut self, job: JobId) {
        self.queue.push(QueueEntry {
            job_id: job,
            priority: 0,
            enqueue_time: self.now,
        });
    }

    fn on_tick(&mut self) {
        let starts = {
            let jobs = &self.jobs;
            schedule_pass(&mut self.cluster, &mut self.queue, |id| {
                jobs[id as usize].start_mode()
            })
        };
        for (job, nodes) in starts {
            self.start_job(job, nodes);
        }
        if self.unfinished > 0 {
            let next = self.now + self.config.scheduler.tick_interval_s;
            self.push_event(next, EventKind::SchedulerTick);
        }
    }

    fn start_job(&mut self, job: JobId, nodes: u32) {
        let now = self.now;
        let j = &mut self.jobs[job as usize];
        debug_assert_eq!(j.state, RunState::Pending);
        j.state = RunState::Running;
        j.allocation = nodes;
        j.iterations_total = j.iteration_rule.for_allocation(nodes);
        j.iterations_done = 0;
        j.run_timing_s = j.timings[&nodes];
        j.anchor_time = now;
        j.anchor_iteration = 0;
        j.reconfig = ReconfigState::new(now);
        j.last_decision_time = None;
        j.record.start = now;
        j.record.allocation_history.push((now, nodes));
        self.schedule_progress(job);
    }

    /// Schedules the next event of a running job: either its completion or
    /// the earliest iteration boundary at which both inhibitors and the
    /// once-per-tick decision gate will pass.
    fn schedule_progress(&mut self, job: JobId) {
        let tick = self.config.scheduler.tick_interval_s;
        let malleability = self.config.scheduler.enable_malleability;
        let now = self.now;
        let (time, kind) = {
            let j = &mut self.jobs[job as usize];
            let remaining = j.iterations_total - j.iterations_done;
            if remaining == 0 {
                j.iters_at_next_event = 0;
                (now, EventKind::JobDone(job))
            } else if !(j.sub.malleable() && malleability) {
                j.iters_at_next_event = remaining;
                (j.boundary_time(j.iterations_total), EventKind::JobDone(job))
            } else {
                let dt = j.run_timing_s / j.reference_iterations as f64;
                let since_iters = j.iterations_done - j.reconfig.last_check_iteration;
                let iters_to_go = |deadline: f64| -> u64 {
                    let gap = deadline - now;
                    if gap <= 0.0 {
                        0
                    } else {
                        (gap / dt).ceil() as u64
                    }
                };
                let k_period = iters_to_go(j.reconfig.last_check_time + j.inhibitor_period_s);
                let k_gate = j.last_decision_time.map_or(0, |t| iters_to_go(t + tick));
                let k_iters = j.inhibitor_iterations.saturating_sub(since_iters);
                let mut k = k_period.max(k_gate).max(k_iters).max(1);
                while k < remaining {
                    let at = j.boundary_time(j.iterations_done + k);
                    let inhibitors_pass = reconfig::should_check(
                        at,
                        j.reconfig.last_check_time,
                        since_iters + k,
                        j.inhibitor_period_s,
                        j.inhibitor_iterations,
                    );
                    let gate_pass = j.last_decision_time.is_none_or(|t| at - t >= tick);
                    if inhibitors_pass && gate_pass {
                        break;
                    }
                    k += 1;
                }
                if k >= remaining {
                    j.iters_at_next_event = remaining;
                    (j.boundary_time(j.iterations_total), EventKind::JobDone(job))
                } else {
                    j.iters_at_next_event = k;
                    (
                        j.boundary_time(j.iterations_done + k),
                        EventKind::IterationBoundary(job),
                    )
                }
            }
        };
        self.push_event(time, kind);
    }

    fn on_boundary(&mut self, job: JobId) -> Result<(), SimError> {
        let now = self.now;
        let tick = self.config.scheduler.tick_interval_s;
        let check_passes = {
            let j = &mut self.jobs[job as usize];
            debug_assert_eq!(j.state, RunState::Running);
            j.iterations_done += j.iters_at_next_event;
            j.iters_at_next_event = 0;
            debug_assert!(j.iterations_done < j.iterations_total);
            let since_iters = j.iterations_done - j.reconfig.last_check_iteration;
            reconfig::should_check(
                now,
                j.reconfig.last_check_time,
                since_iters,
                j.inhibitor_period_s,
                j.inhibitor_iterations,
            ) && j.last_decision_time.is_none_or(|t| now - t >= tick)
                && j.reconfig.phase().is_steady()
        };
        if !check_passes {
            self.schedule_progress(job);
            return Ok(());
        }

        let current = {
            let j = &mut self.jobs[job as usize];
            let done = j.iterations_done;
            j.reconfig.mark_check(now, done);
            j.last_decision_time = Some(now);
            j.allocation
        };
        let pending: Vec<PendingJob> = self
            .queue
            .iter()
            .map(|e| PendingJob {
                job_id: e.job_id,
                min_need: self.jobs[e.job_id as usize].min_start_need(),
            })
            .collect();
        let decision = {
            let j = &self.jobs[job as usize];
            let query = ResizeQuery {
                current,
                params: j.sub.params,
                valid_configs: &j.valid_configs,
            };
            resize_decision(&query, &self.cluster, &pending)
        };

        match decision.action {
            ResizeAction::None => {
                self.jobs[job as usize].reconfig.decline();
                self.schedule_progress(job);
            }
            action => {
                let target = action.target().unwrap();
                let (lower, upper, data_bytes) = {
                    let j = &self.jobs[job as usize];
                    (j.sub.params.lower, j.sub.params.upper, j.data_bytes)
                };
                let overheads = self.config.overheads;
                let result = self.jobs[job as usize].reconfig.begin_resize(
                    current, action, lower, upper, data_bytes, &overheads,
                );
                let overhead = match result {
                    Ok(overhead) => overhead,
                    Err(e) => {
                        return Err(self.invariant(format!("policy produced invalid action: {e}")))
                    }
                };
                if target > current {
                    // expansion nodes are allocated from the decision on
                    self.cluster.resize(job, target);
                    let j = &mut self.jobs[job as usize];
                    j.allocation = target;
                    j.record.allocation_history.push((now, target));
                }
                if let Some(promoted) = decision.promote {
                    let need = self.jobs[promoted as usize].min_start_need();
                    self.queue.promote(promoted);
                    self.cluster.reserve(promoted, need);
                }
                self.jobs[job as usize].record.resizes.push(ResizeRecord {
                    decided_at: now,
                    completed_at: now + overhead,
                    from_procs: current,
                    to_procs: target,
                    overhead_s: overhead,
                    promoted_job: decision.promote,
                });
                self.push_event(now + overhead, EventKind::ReconfigDone(job));
            }
        }
        Ok(())
    }

    fn on_reconfig_done(&mut self, job: JobId) {
        let now = self.now;
        let j = &mut self.jobs[job as usize];
        let target = j.reconfig.complete_resize();
        if target < j.allocation {
            // shrink: parents hold their nodes until redistribution ends
            self.cluster.resize(job, target);
            j.allocation = target;
            j.record.allocation_history.push((now, target));
        }
        j.run_timing_s = j.timings[&target];
        j.anchor_time = now;
        j.anchor_iteration = j.iterations_done;
        self.schedule_progress(job);
    }

    fn on_job_done(&mut self, job: JobId) -> Result<(), SimError> {
        let j = &mut self.jobs[job as usize];
        debug_assert_eq!(j.state, RunState::Running);
        j.iterations_done += j.iters_at_next_event;
        j.iters_at_next_event = 0;
        if j.iterations_done != j.iterations_total {
            let (done, total) = (j.iterations_done, j.iterations_total);
            return Err(self.invariant(format!(
                "job {job} finished with {done}/{total} iterations"
            )));
        }
        let j = &mut self.jobs[job as usize];
        j.state = RunState::Finished;
        j.record.end = self.now;
        j.record.iterations = j.iterations_done;
        self.cluster.release(job);
        self.unfinished -= 1;
        self.completed += 1;
        Ok(())
    }

    fn into_trace(self) -> Result<SimulationTrace, SimError> {
        let start_time = self
            .jobs
            .iter()
            .map(|j| j.sub.submit_time)
            .fold(f64::INFINITY, f64::min);
        let start_time = if start_time.is_finite() { start_time } else { 0.0 };
        let end_time = self
            .jobs
            .iter()
            .map(|j| j.record.end)
            .fold(start_time, f64::max);
        Ok(SimulationTrace {
            total_nodes: self.config.cluster.total_nodes,
            seed: self.seed,
            jobs: self.jobs.into_iter().map(|j| j.record).collect(),
            series: self.series,
            allocated_node_seconds: self.node_seconds,
            start_time,
            end_time,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ProfileSet;
    use crate::workload::{classify, JobClass};

    fn job(
        job_id: u64,
        submit: f64,
        app: &str,
        class: JobClass,
        params: (u32, u32, u32),
    ) -> JobSubmission {
        JobSubmission {
            job_id,
            submit_time: submit,
            app: app.into(),
            class,
            params: MalleabilityParams {
                lower: params.0,
                upper: params.1,
                preferred: params.2,
            },
            request: params.1,
        }
    }

    fn zero_overhead_config() -> RunConfig {
        let mut config = RunConfig::default();
        config.overheads = crate::reconfig::OverheadParams::zero();
        config
    }

    #[test]
    fn single_rigid_job_runs_alone() {
        let profiles = ProfileSet::builtin();
        let config = zero_overhead_config();
        let workload = vec![job(0, 0.0, "cg", JobClass::Fixed, (2, 32, 16))];
        let trace = run(&workload, &profiles, &config, 1).unwrap();
        let j = &trace.jobs[0];
        assert_eq!(j.start, 0.0);
        assert_eq!(j.end, 30.0);
        assert_eq!(j.iterations, 10_000);
        assert_eq!(j.allocation_history, vec![(0.0, 32)]);
    }

    #[test]
    fn waiting_is_bounded_by_the_tick() {
        let profiles = ProfileSet::builtin();
        let config = zero_overhead_config();
        let workload = vec![job(0, 3.5, "cg", JobClass::Fixed, (2, 32, 16))];
        let trace = run(&workload, &profiles, &config, 1).unwrap();
        let j = &trace.jobs[0];
        assert_eq!(j.start, 10.0);
        assert!(j.start - j.submit <= config.scheduler.tick_interval_s);
    }

    #[test]
    fn second_rigid_job_waits_for_the_first() {
        let profiles = ProfileSet::builtin();
        let mut config = zero_overhead_config();
        config.cluster.total_nodes = 32;
        let workload = vec![
            job(0, 0.0, "cg", JobClass::Fixed, (2, 32, 16)),
            job(1, 0.0, "cg", JobClass::Fixed, (2, 32, 16)),
        ];
        let trace = run(&workload, &profiles, &config, 1).unwrap();
        assert_eq!(trace.jobs[0].start, 0.0);
        assert_eq!(trace.jobs[0].end, 30.0);
        // first tick at or after t=30
        assert_eq!(trace.jobs[1].start, 30.0);
        assert_eq!(trace.jobs[1].end, 60.0);
    }

    #[test]
    fn shrink_admits_pending_job_and_promotes_it() {
        let profiles = ProfileSet::builtin();
        let mut config = zero_overhead_config();
        config.cluster.total_nodes = 32;
        // flexible nbody holds all 32 nodes above its preferred count of 1;
        // a fixed 16-node job arrives and only fits after the shrink
        let workload = vec![
            job(0, 0.0, "nbody", JobClass::Flexible, (1, 32, 1)),
            job(1, 5.0, "nbody", JobClass::Fixed, (1, 16, 1)),
        ];
        let trace = run(&workload, &profiles, &config, 1).unwrap();
        let shrinks: Vec<&ResizeRecord> = trace.jobs[0]
            .resizes
            .iter()
            .filter(|r| r.to_procs < r.from_procs)
            .collect();
        assert!(!shrinks.is_empty(), "expected a shrink in {:?}", trace.jobs[0].resizes);
        let shrink = shrinks[0];
        assert_eq!(shrink.promoted_job, Some(1));
        assert_eq!(shrink.to_procs, 1);
        let promoted_start = trace.jobs[1].start;
        assert!(
            promoted_start >= shrink.completed_at
                && promoted_start <= shrink.completed_at + config.scheduler.tick_interval_s + 1e-9,
            "promoted job started at {promoted_start}, shrink completed at {}",
            shrink.completed_at
        );
    }

    #[test]
    fn zero_overhead_run_matches_analytic_time_despite_checks() {
        // flexible job alone on a cluster its own size: every check decides
        // nothing, so the end time must equal the analytic execution time
        let profiles = ProfileSet::builtin();
        let mut config = zero_overhead_config();
        config.cluster.total_nodes = 12;
        config.cluster.max_nodes_per_job = 12;
        let workload = vec![job(0, 0.0, "hpg", JobClass::PureMalleable, (6, 12, 6))];
        let trace = run(&workload, &profiles, &config, 1).unwrap();
        let j = &trace.jobs[0];
        // hpg at 12 nodes with preferred 6 and nothing pending shrinks only
        // for pending jobs; branch 2 needs pending jobs, branches 3/4 need
        // free nodes, so the job stays at 12 for its 40 iterations
        assert_eq!(j.end - j.start, 840.0);
        assert!(j.resizes.is_empty());
    }

    #[test]
    fn malleable_flag_alone_changes_nothing_when_policy_is_off() {
        let profiles = ProfileSet::builtin();
        let mut config = zero_overhead_config();
        config.scheduler.enable_malleability = false;
        let fixed: Vec<JobSubmission> = (0..20)
            .map(|i| job(i, i as f64 * 3.0, "jacobi", JobClass::Fixed, (2, 32, 4)))
            .collect();
        let malleable: Vec<JobSubmission> = fixed
            .iter()
            .map(|j| JobSubmission {
                class: classify(j.submission(), true),
                ..j.clone()
            })
            .collect();
        let a = run(&fixed, &profiles, &config, 1).unwrap();
        let b = run(&malleable, &profiles, &config, 1).unwrap();
        for (x, y) in a.jobs.iter().zip(&b.jobs) {
            assert_eq!(x.start, y.start);
            assert_eq!(x.end, y.end);
            assert_eq!(x.allocation_history, y.allocation_history);
        }
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn identical_inputs_produce_identical_traces() {
        let profiles = ProfileSet::builtin();
        let config = RunConfig::default();
        let spec = crate::workload::WorkloadSpec {
            num_jobs: 120,
            app_mix: vec![
                ("cg".into(), 0.25),
                ("jacobi".into(), 0.25),
                ("nbody".into(), 0.25),
                ("hpg".into(), 0.25),
            ],
            class_policy: crate::workload::ClassPolicy::Uniform(JobClass::Flexible),
            arrival_mean_s: 10.0,
            seed: 5,
        };
        let jobs = crate::workload::generate(&spec, &profiles, 10.0, 32).unwrap();
        let a = run(&jobs, &profiles, &config, 5).unwrap();
        let b = run(&jobs, &profiles, &config, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_job_is_unschedulable_at_submit() {
        let profiles = ProfileSet::builtin();
        let mut config = RunConfig::default();
        config.cluster.total_nodes = 16;
        config.cluster.max_nodes_per_job = 16;
        let workload = vec![job(0, 0.0, "cg", JobClass::Fixed, (2, 32, 16))];
        assert!(matches!(
            run(&workload, &profiles, &config, 1),
            Err(SimError::Unschedulable { job_id: 0, .. })
        ));
    }

    #[test]
    fn empty_workload_yields_empty_trace() {
        let profiles = ProfileSet::builtin();
        let trace = run(&[], &profiles, &RunConfig::default(), 1).unwrap();
        assert!(trace.jobs.is_empty());
        assert_eq!(trace.start_time, 0.0);
        assert_eq!(trace.end_time, 0.0);
        assert_eq!(trace.allocated_node_seconds, 0.0);
    }

    #[test]
    fn inhibitor_period_spaces_resize_checks() {
        let profiles = ProfileSet::builtin();
        let mut config = zero_overhead_config();
        config.cluster.total_nodes = 64;
        // cg alone on a big cluster expands at every opportunity the
        // inhibitor allows; decisions must be at least 10 s apart
        let workload = vec![job(0, 0.0, "cg", JobClass::Flexible, (2, 32, 16))];
        let trace = run(&workload, &profiles, &config, 1).unwrap();
        let decisions: Vec<f64> = trace.jobs[0].resizes.iter().map(|r| r.decided_at).collect();
        for pair in decisions.windows(2) {
            assert!(pair[1] - pair[0] >= 10.0 - 1e-9, "{decisions:?}");
        }
    }
}
