//! The simulated resource manager.
//!
//! A single pending queue ordered by (priority desc, enqueue time asc, job
//! id asc) is walked on every scheduling tick. Jobs that fit start, jobs
//! that do not are skipped so later entries can backfill. Moldable jobs
//! take the largest valid configuration that fits; rigid jobs take exactly
//! their request. The resize policy is evaluated when a running malleable
//! job checks in between ticks.
//!
//! A shrink decision names a concrete pending job that only becomes
//! startable thanks to the freed nodes. That job is promoted to maximum
//! priority and its minimum node need is reserved until it starts, so
//! expansions decided in the meantime cannot consume the freed capacity.
//! At most one such reservation is outstanding at a time, which guarantees
//! the promoted job starts at the first pass after the shrink completes.

use std::collections::BTreeMap;

use crate::profiles::MalleabilityParams;
use crate::reconfig::ResizeAction;

pub type JobId = u64;

/// Whole-node cluster accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    total_nodes: u32,
    free_nodes: u32,
    allocations: BTreeMap<JobId, u32>,
    reservation: Option<Reservation>,
}

/// Nodes promised to a promoted pending job by an in-flight shrink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reservation {
    pub job_id: JobId,
    pub nodes: u32,
}

impl ClusterState {
    pub fn new(total_nodes: u32) -> Self {
        Self {
            total_nodes,
            free_nodes: total_nodes,
            allocations: BTreeMap::new(),
            reservation: None,
        }
    }

    pub fn total_nodes(&self) -> u32 {
        self.total_nodes
    }

    pub fn free_nodes(&self) -> u32 {
        self.free_nodes
    }

    pub fn allocated_nodes(&self) -> u32 {
        self.total_nodes - self.free_nodes
    }

    pub fn allocation_of(&self, job: JobId) -> Option<u32> {
        self.allocations.get(&job).copied()
    }

    pub fn running_jobs(&self) -> u32 {
        self.allocations.len() as u32
    }

    /// Free nodes not promised to a promoted pending job.
    pub fn unreserved_free(&self) -> u32 {
        let reserved = self.reservation.map_or(0, |r| r.nodes);
        self.free_nodes.saturating_sub(reserved)
    }

    /// Free nodes usable by `job` in a scheduling pass: a promoted job may
    /// spend its own reservation.
    pub fn usable_for(&self, job: JobId) -> u32 {
        match self.reservation {
            Some(r) if r.job_id != job => self.free_nodes.saturating_sub(r.nodes),
            _ => self.free_nodes,
        }
    }

    pub fn reservation(&self) -> Option<Reservation> {
        self.reservation
    }

    pub fn reserve(&mut self, job_id: JobId, nodes: u32) {
        debug_assert!(self.reservation.is_none(), "a reservation is already outstanding");
        self.reservation = Some(Reservation { job_id, nodes });
    }

    pub fn clear_reservation(&mut self, job_id: JobId) {
        if self.reservation.is_some_and(|r| r.job_id == job_id) {
            self.reservation = None;
        }
    }

    pub fn allocate(&mut self, job: JobId, nodes: u32) {
        assert!(nodes >= 1 && nodes <= self.free_nodes, "over-allocation for job {job}");
        assert!(!self.allocations.contains_key(&job));
        self.free_nodes -= nodes;
        self.allocations.insert(job, nodes);
    }

    /// Adjusts a running job's allocation up (taking free nodes) or down
    /// (releasing them).
    pub fn resize(&mut self, job: JobId, new_nodes: u32) {
        let current = self.allocations[&job];
        if new_nodes > current {
            let delta = new_nodes - current;
            assert!(delta <= self.free_nodes, "over-expansion for job {job}");
            self.free_nodes -= delta;
        } else {
            self.free_nodes += current - new_nodes;
        }
        self.allocations.insert(job, new_nodes);
    }

    pub fn release(&mut self, job: JobId) {
        let nodes = self.allocations.remove(&job).expect("release of unknown job");
        self.free_nodes += nodes;
    }

    /// Node conservation: free plus allocated equals the cluster size.
    pub fn check_conservation(&self) -> Result<(), String> {
        let allocated: u64 = self.allocations.values().map(|&n| u64::from(n)).sum();
        if allocated + u64::from(self.free_nodes) != u64::from(self.total_nodes) {
            return Err(format!(
                "node conservation violated: {} allocated + {} free != {} total",
                allocated, self.free_nodes, self.total_nodes
            ));
        }
        if self.allocations.values().any(|&n| n == 0) {
            return Err("zero-node allocation present".into());
        }
        Ok(())
    }
}

/// Queue entry; higher priority runs first, ties break on enqueue time
/// then job id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueEntry {
    pub job_id: JobId,
    pub priority: u32,
    pub enqueue_time: f64,
}

impl QueueEntry {
    fn sort_key(&self) -> (std::cmp::Reverse<u32>, f64, JobId) {
        (std::cmp::Reverse(self.priority), self.enqueue_time, self.job_id)
    }
}

/// Pending queue kept in scheduling order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PendingQueue {
    entries: Vec<QueueEntry>,
}

impl PendingQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: QueueEntry) {
        let pos = self.entries.partition_point(|e| e.sort_key() <= entry.sort_key());
        self.entries.insert(pos, entry);
    }

    /// One-shot promotion to maximum priority.
    pub fn promote(&mut self, job_id: JobId) {
        if let Some(entry) = self.entries.iter_mut().find(|e| e.job_id == job_id) {
            entry.priority = u32::MAX;
        }
        self.entries.sort_by(|a, b| {
            a.sort_key()
                .partial_cmp(&b.sort_key())
                .expect("queue keys are totally ordered")
        });
    }

    pub fn remove(&mut self, job_id: JobId) {
        self.entries.retain(|e| e.job_id != job_id);
    }

    pub fn iter(&self) -> impl Iterator<Item = &QueueEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// How a pending job may be started.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StartMode {
    Rigid { nodes: u32 },
    /// Valid start configurations, ascending (measured counts within the
    /// job's [lower, upper] range).
    Moldable { configs: Vec<u32> },
}

impl StartMode {
    /// Smallest node count that could ever start this job.
    pub fn min_need(&self) -> u32 {
        match self {
            StartMode::Rigid { nodes } => *nodes,
            StartMode::Moldable { configs } => configs.first().copied().unwrap_or(u32::MAX),
        }
    }
}

/// Picks the start allocation: rigid jobs fit exactly or defer, moldable
/// jobs take the largest valid configuration that fits (deferring below
/// their lower limit).
pub fn initial_allocation(mode: &StartMode, free_nodes: u32) -> Option<u32> {
    match mode {
        StartMode::Rigid { nodes } => (*nodes <= free_nodes).then_some(*nodes),
        StartMode::Moldable { configs } => {
            configs.iter().rev().find(|&&c| c <= free_nodes).copied()
        }
    }
}

/// Walks the queue in priority order and starts every job that fits,
/// backfilling past entries that do not. Started jobs are allocated in the
/// cluster and removed from the queue; their reservation, if any, is
/// cleared. Returns the (job, allocation) starts in order.
pub fn schedule_pass(
    cluster: &mut ClusterState,
    queue: &mut PendingQueue,
    start_mode: impl Fn(JobId) -> StartMode,
) -> Vec<(JobId, u32)> {
    let mut starts = Vec::new();
    let snapshot: Vec<QueueEntry> = queue.entries.clone();
    for entry in snapshot {
        let usable = cluster.usable_for(entry.job_id);
        if let Some(nodes) = initial_allocation(&start_mode(entry.job_id), usable) {
            cluster.clear_reservation(entry.job_id);
            cluster.allocate(entry.job_id, nodes);
            queue.remove(entry.job_id);
            starts.push((entry.job_id, nodes));
        }
    }
    starts
}

/// A running malleable job as seen by the resize policy.
#[derive(Debug, Clone)]
pub struct ResizeQuery<'a> {
    pub current: u32,
    pub params: MalleabilityParams,
    /// Measured configurations within [lower, upper], ascending.
    pub valid_configs: &'a [u32],
}

/// A pending job as seen by the resize policy, in queue order.
#[derive(Debug, Clone, Copy)]
pub struct PendingJob {
    pub job_id: JobId,
    pub min_need: u32,
}

/// Outcome of a resize decision: the action plus the pending job promoted
/// by a shrink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action: ResizeAction,
    pub promote: Option<JobId>,
}

impl Decision {
    fn none() -> Self {
        Decision {
            action: ResizeAction::None,
            promote: None,
        }
    }

    fn expand(to: Option<u32>) -> Self {
        Decision {
            action: match to {
                Some(to) => ResizeAction::Expand { to },
                None => ResizeAction::None,
            },
            promote: None,
        }
    }
}

/// Largest valid configuration that is a multiple of the current count,
/// within the upper limit, and whose extra nodes fit in the free pool.
fn expand_target(job: &ResizeQuery<'_>, free_nodes: u32) -> Option<u32> {
    job.valid_configs
        .iter()
        .rev()
        .copied()
        .find(|&c| {
            c > job.current
                && c % job.current == 0
                && c <= job.params.upper
                && c - job.current <= free_nodes
        })
}

/// The resize policy, evaluated for a steady malleable job that passed its
/// inhibitors. Branches in precedence order:
///
/// 1. below preferred and free nodes exist: expand;
/// 2. above preferred, and shrinking to preferred would let the
///    highest-priority pending job start that cannot start today: shrink
///    to preferred and promote that job;
/// 3. above preferred with no such beneficiary, free nodes exist, and no
///    pending job can be initiated with them: expand;
/// 4. no pending jobs and free nodes exist: expand;
/// 5. otherwise no action.
///
/// While jobs are pending, a job sitting at its preferred count stays
/// there and free nodes a pending job could start on are left alone; the
/// next scheduling pass will hand them over. Expansion picks
/// `expand_target`; when no larger valid configuration fits the action
/// degrades to none.
pub fn resize_decision(
    job: &ResizeQuery<'_>,
    cluster: &ClusterState,
    pending: &[PendingJob],
) -> Decision {
    let free = cluster.unreserved_free();

    if job.current < job.params.preferred {
        if free > 0 {
            return Decision::expand(expand_target(job, free));
        }
        return Decision::none();
    }

    if !pending.is_empty() {
        if job.current > job.params.preferred {
            if cluster.reservation().is_none() {
                let freed = job.current - job.params.preferred;
                let beneficiary = pending
                    .iter()
                    .find(|p| p.min_need > free && p.min_need <= free + freed);
                if let Some(p) = beneficiary {
                    return Decision {
                        action: ResizeAction::Shrink {
                            to: job.params.preferred,
                        },
                        promote: Some(p.job_id),
                    };
                }
            }
            let any_startable = pending.iter().any(|p| p.min_need <= free);
            if !any_startable && free > 0 {
                return Decision::expand(expand_target(job, free));
            }
        }
        return Decision::none();
    }

    if free > 0 {
        return Decision::expand(expand_target(job, free));
    }
    Decision::none()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lower: u32, upper: u32, preferred: u32) -> MalleabilityParams {
        MalleabilityParams {
            lower,
            upper,
            preferred,
        }
    }

    #[test]
    fn rigid_allocation_is_all_or_nothing() {
        assert_eq!(initial_allocation(&StartMode::Rigid { nodes: 32 }, 31), None);
        assert_eq!(initial_allocation(&StartMode::Rigid { nodes: 32 }, 32), Some(32));
    }

    #[test]
    fn moldable_allocation_takes_largest_fit() {
        let mode = StartMode::Moldable {
            configs: vec![2, 4, 8, 16, 32],
        };
        assert_eq!(initial_allocation(&mode, 13), Some(8));
        assert_eq!(initial_allocation(&mode, 1), None);
        let hpg = StartMode::Moldable { configs: vec![6, 12] };
        assert_eq!(initial_allocation(&hpg, 5), None);
    }

    #[test]
    fn schedule_pass_empty_queue_starts_nothing() {
        let mut cluster = ClusterState::new(128);
        let mut queue = PendingQueue::new();
        let starts = schedule_pass(&mut cluster, &mut queue, |_| StartMode::Rigid { nodes: 1 });
        assert!(starts.is_empty());
    }

    #[test]
    fn schedule_pass_backfills_past_blocked_head() {
        let mut cluster = ClusterState::new(16);
        let mut queue = PendingQueue::new();
        queue.push(QueueEntry { job_id: 0, priority: 0, enqueue_time: 0.0 });
        queue.push(QueueEntry { job_id: 1, priority: 0, enqueue_time: 1.0 });
        let starts = schedule_pass(&mut cluster, &mut queue, |id| match id {
            0 => StartMode::Rigid { nodes: 32 },
            _ => StartMode::Rigid { nodes: 16 },
        });
        assert_eq!(starts, vec![(1, 16)]);
        assert_eq!(queue.len(), 1);
        assert_eq!(cluster.free_nodes(), 0);
    }

    #[test]
    fn schedule_pass_moldable_jobs_share_sequentially() {
        let mut cluster = ClusterState::new(6);
        let mut queue = PendingQueue::new();
        queue.push(QueueEntry { job_id: 0, priority: 0, enqueue_time: 0.0 });
        queue.push(QueueEntry { job_id: 1, priority: 0, enqueue_time: 1.0 });
        let configs = vec![2u32, 4, 8, 16, 32];
        let starts = schedule_pass(&mut cluster, &mut queue, |_| StartMode::Moldable {
            configs: configs.clone(),
        });
        assert_eq!(starts, vec![(0, 4), (1, 2)]);
    }

    #[test]
    fn queue_orders_by_priority_then_age_then_id() {
        let mut queue = PendingQueue::new();
        queue.push(QueueEntry { job_id: 3, priority: 0, enqueue_time: 5.0 });
        queue.push(QueueEntry { job_id: 1, priority: 0, enqueue_time: 5.0 });
        queue.push(QueueEntry { job_id: 2, priority: 7, enqueue_time: 9.0 });
        let order: Vec<JobId> = queue.iter().map(|e| e.job_id).collect();
        assert_eq!(order, vec![2, 1, 3]);
        queue.promote(3);
        let order: Vec<JobId> = queue.iter().map(|e| e.job_id).collect();
        assert_eq!(order, vec![3, 2, 1]);
    }

    #[test]
    fn decision_expands_toward_preferred_first() {
        // current 4, preferred 16, 20 free: 32 needs 28 extra, 16 needs 12
        let mut cluster = ClusterState::new(24);
        cluster.allocate(9, 4);
        let configs = [2, 4, 8, 16, 32];
        let job = ResizeQuery {
            current: 4,
            params: params(2, 32, 16),
            valid_configs: &configs,
        };
        let d = resize_decision(&job, &cluster, &[]);
        assert_eq!(d.action, ResizeAction::Expand { to: 16 });
    }

    #[test]
    fn decision_shrinks_for_startable_pending_job() {
        let mut cluster = ClusterState::new(32);
        cluster.allocate(0, 32);
        let configs = [2, 4, 8, 16, 32];
        let job = ResizeQuery {
            current: 32,
            params: params(2, 32, 16),
            valid_configs: &configs,
        };
        let pending = [PendingJob { job_id: 5, min_need: 12 }];
        let d = resize_decision(&job, &cluster, &pending);
        assert_eq!(d.action, ResizeAction::Shrink { to: 16 });
        assert_eq!(d.promote, Some(5));
    }

    #[test]
    fn decision_none_when_settled() {
        let mut cluster = ClusterState::new(16);
        cluster.allocate(0, 16);
        let configs = [2, 4, 8, 16, 32];
        let job = ResizeQuery {
            current: 16,
            params: params(2, 32, 16),
            valid_configs: &configs,
        };
        assert_eq!(resize_decision(&job, &cluster, &[]), Decision::none());
    }

    #[test]
    fn decision_branch_one_beats_later_branches() {
        // below preferred with free nodes and pending jobs: expand wins
        let mut cluster = ClusterState::new(32);
        cluster.allocate(0, 4);
        let configs = [2, 4, 8, 16, 32];
        let job = ResizeQuery {
            current: 4,
            params: params(2, 32, 16),
            valid_configs: &configs,
        };
        let pending = [PendingJob { job_id: 7, min_need: 30 }];
        let d = resize_decision(&job, &cluster, &pending);
        assert!(matches!(d.action, ResizeAction::Expand { .. }), "{d:?}");
        assert_eq!(d.promote, None);
    }

    #[test]
    fn decision_shrink_beats_expand_when_both_apply() {
        // above preferred, pending job needs the shrink, free nodes exist
        let mut cluster = ClusterState::new(40);
        cluster.allocate(0, 32);
        let configs = [2, 4, 8, 16, 32];
        let job = ResizeQuery {
            current: 32,
            params: params(2, 32, 16),
            valid_configs: &configs,
        };
        let pending = [PendingJob { job_id: 3, min_need: 20 }];
        let d = resize_decision(&job, &cluster, &pending);
        assert_eq!(d.action, ResizeAction::Shrink { to: 16 });
        assert_eq!(d.promote, Some(3));
    }

    #[test]
    fn decision_skips_shrink_for_already_startable_job() {
        let mut cluster = ClusterState::new(64);
        cluster.allocate(0, 32);
        let configs = [2, 4, 8, 16, 32];
        let job = ResizeQuery {
            current: 32,
            params: params(2, 32, 16),
            valid_configs: &configs,
        };
        // pending job fits in today's 32 free nodes: no shrink, and no
        // expansion stealing the nodes it will start on
        let pending = [PendingJob { job_id: 3, min_need: 20 }];
        let d = resize_decision(&job, &cluster, &pending);
        assert_eq!(d, Decision::none());
    }

    #[test]
    fn decision_expand_degrades_to_none_without_valid_target() {
        let mut cluster = ClusterState::new(33);
        cluster.allocate(0, 32);
        let configs = [2, 4, 8, 16, 32];
        let job = ResizeQuery {
            current: 32,
            params: params(2, 32, 16),
            valid_configs: &configs,
        };
        // free nodes exist but no multiple of 32 fits
        assert_eq!(resize_decision(&job, &cluster, &[]), Decision::none());
    }

    #[test]
    fn reservation_blocks_expansions_but_not_owner() {
        let mut cluster = ClusterState::new(16);
        cluster.allocate(0, 8);
        cluster.reserve(4, 8);
        assert_eq!(cluster.unreserved_free(), 0);
        assert_eq!(cluster.usable_for(4), 8);
        assert_eq!(cluster.usable_for(9), 0);
        cluster.clear_reservation(4);
        assert_eq!(cluster.unreserved_free(), 8);
    }

    #[test]
    fn conservation_check_catches_mismatch() {
        let mut cluster = ClusterState::new(8);
        cluster.allocate(0, 4);
        assert!(cluster.check_conservation().is_ok());
        cluster.release(0);
        assert!(cluster.check_conservation().is_ok());
    }
}
