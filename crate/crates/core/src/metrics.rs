//! Metrics derived from a simulation trace: per-job waiting, execution,
//! and completion times, cluster-level allocation rate and throughput,
//! speedup between runs, and the energy estimate.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::EnergyConfig;
use crate::sim::SimulationTrace;
use crate::workload::JobClass;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("reports cover different job sets and cannot be compared")]
    IncomparableRuns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobMetrics {
    pub job_id: u64,
    pub app: String,
    pub class: JobClass,
    pub submit: f64,
    pub start: f64,
    pub end: f64,
    pub waiting: f64,
    pub execution: f64,
    /// Response time; always exactly `waiting + execution`.
    pub completion: f64,
    pub resizes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AppAverages {
    pub jobs: u64,
    pub avg_waiting: f64,
    pub avg_execution: f64,
    pub avg_completion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub jobs: Vec<JobMetrics>,
    /// Last completion minus first submission.
    pub makespan: f64,
    pub avg_waiting: f64,
    pub avg_execution: f64,
    pub avg_completion: f64,
    pub per_app: BTreeMap<String, AppAverages>,
    /// Allocated node-time over total node-time, percent.
    pub allocation_rate_pct: f64,
    pub throughput_jobs_per_hour: f64,
    /// Completed-job counter over time.
    pub throughput_series: Vec<(f64, u32)>,
    pub energy_kwh: f64,
}

/// Energy to run the trace window with `idle_w`/`loaded_w` watts per idle
/// and loaded node. Nodes mid-redistribution count as loaded.
pub fn energy(trace: &SimulationTrace, idle_w: f64, loaded_w: f64) -> f64 {
    let window = trace.end_time - trace.start_time;
    let total_node_seconds = f64::from(trace.total_nodes) * window;
    let loaded_ws = trace.allocated_node_seconds * loaded_w;
    let idle_ws = (total_node_seconds - trace.allocated_node_seconds) * idle_w;
    (loaded_ws + idle_ws) / 3_600_000.0
}

/// Summarizes a complete trace.
pub fn summarize(trace: &SimulationTrace, energy_config: &EnergyConfig) -> MetricsReport {
    let jobs: Vec<JobMetrics> = trace
        .jobs
        .iter()
        .map(|j| {
            let waiting = j.start - j.submit;
            let execution = j.end - j.start;
            JobMetrics {
                job_id: j.job_id,
                app: j.app.clone(),
                class: j.class,
                submit: j.submit,
                start: j.start,
                end: j.end,
                waiting,
                execution,
                completion: waiting + execution,
                resizes: j.resizes.len() as u32,
            }
        })
        .collect();

    let n = jobs.len() as f64;
    let mean = |f: fn(&JobMetrics) -> f64| {
        if jobs.is_empty() {
            0.0
        } else {
            jobs.iter().map(f).sum::<f64>() / n
        }
    };
    let avg_waiting = mean(|j| j.waiting);
    let avg_execution = mean(|j| j.execution);
    let avg_completion = mean(|j| j.completion);

    let mut per_app: BTreeMap<String, AppAverages> = BTreeMap::new();
    for j in &jobs {
        let entry = per_app.entry(j.app.clone()).or_default();
        entry.jobs += 1;
        entry.avg_waiting += j.waiting;
        entry.avg_execution += j.execution;
        entry.avg_completion += j.completion;
    }
    for stats in per_app.values_mut() {
        let n = stats.jobs as f64;
        stats.avg_waiting /= n;
        stats.avg_execution /= n;
        stats.avg_completion /= n;
    }

    let makespan = trace.end_time - trace.start_time;
    let allocation_rate_pct = if makespan > 0.0 {
        trace.allocated_node_seconds / (f64::from(trace.total_nodes) * makespan) * 100.0
    } else {
        0.0
    };
    let throughput_jobs_per_hour = if makespan > 0.0 {
        jobs.len() as f64 / (makespan / 3600.0)
    } else {
        0.0
    };
    let mut throughput_series = Vec::new();
    let mut last_completed = u32::MAX;
    for point in &trace.series {
        if point.completed_jobs != last_completed {
            throughput_series.push((point.time, point.completed_jobs));
            last_completed = point.completed_jobs;
        }
    }

    MetricsReport {
        jobs,
        makespan,
        avg_waiting,
        avg_execution,
        avg_completion,
        per_app,
        allocation_rate_pct,
        throughput_jobs_per_hour,
        throughput_series,
        energy_kwh: energy(trace, energy_config.idle_watts, energy_config.loaded_watts),
    }
}

/// Per-metric speedup of run `b` over baseline `a`:
/// `metric(a) / metric(b)` for the waiting, execution, and completion
/// averages. Identical zero metrics count as speedup 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupReport {
    pub waiting: f64,
    pub execution: f64,
    pub completion: f64,
}

pub fn speedup(
    baseline: &MetricsReport,
    improved: &MetricsReport,
) -> Result<SpeedupReport, MetricsError> {
    if baseline.jobs.len() != improved.jobs.len() {
        return Err(MetricsError::IncomparableRuns);
    }
    for (a, b) in baseline.jobs.iter().zip(&improved.jobs) {
        if a.job_id != b.job_id || a.app != b.app {
            return Err(MetricsError::IncomparableRuns);
        }
    }
    let ratio = |a: f64, b: f64| {
        if a == b {
            1.0
        } else {
            a / b
        }
    };
    Ok(SpeedupReport {
        waiting: ratio(baseline.avg_waiting, improved.avg_waiting),
        execution: ratio(baseline.avg_execution, improved.avg_execution),
        completion: ratio(baseline.avg_completion, improved.avg_completion),
    })
}
