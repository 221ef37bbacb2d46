//! CSV emission. Schemas are stable and pinned by golden tests:
//!
//! - trace.csv: `job_id,app,class,submit,start,end,waiting,execution,completion,resizes`
//! - series.csv: `t,allocated_nodes,running_jobs,completed_jobs`
//! - metrics.csv: `metric,value` summary rows

use std::fmt::Write as _;

use crate::metrics::MetricsReport;
use crate::sim::SimulationTrace;

pub const TRACE_HEADER: &str =
    "job_id,app,class,submit,start,end,waiting,execution,completion,resizes";
pub const SERIES_HEADER: &str = "t,allocated_nodes,running_jobs,completed_jobs";
pub const METRICS_HEADER: &str = "metric,value";

/// Per-job metrics CSV.
pub fn trace_csv(report: &MetricsReport) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for j in &report.jobs {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            j.job_id,
            j.app,
            j.class,
            j.submit,
            j.start,
            j.end,
            j.waiting,
            j.execution,
            j.completion,
            j.resizes
        )
        .unwrap();
    }
    out
}

/// Cluster time-series CSV, the data behind allocation/running/completed
/// plots.
pub fn series_csv(trace: &SimulationTrace) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for p in &trace.series {
        writeln!(
            out,
            "{},{},{},{}",
            p.time, p.allocated_nodes, p.running_jobs, p.completed_jobs
        )
        .unwrap();
    }
    out
}

/// Summary CSV: workload-level averages, allocation rate, throughput, and
/// energy, followed by per-application averages.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    writeln!(out, "jobs,{}", report.jobs.len()).unwrap();
    writeln!(out, "makespan_s,{}", report.makespan).unwrap();
    writeln!(out, "avg_waiting_s,{}", report.avg_waiting).unwrap();
    writeln!(out, "avg_execution_s,{}", report.avg_execution).unwrap();
    writeln!(out, "avg_completion_s,{}", report.avg_completion).unwrap();
    writeln!(out, "allocation_rate_pct,{}", report.allocation_rate_pct).unwrap();
    writeln!(out, "throughput_jobs_per_hour,{}", report.throughput_jobs_per_hour).unwrap();
    writeln!(out, "energy_kwh,{}", report.energy_kwh).unwrap();
    for (app, stats) in &report.per_app {
        writeln!(out, "app_jobs[{app}],{}", stats.jobs).unwrap();
        writeln!(out, "app_avg_waiting_s[{app}],{}", stats.avg_waiting).unwrap();
        writeln!(out, "app_avg_execution_s[{app}],{}", stats.avg_execution).unwrap();
        writeln!(out, "app_avg_completion_s[{app}],{}", stats.avg_completion).unwrap();
    }
    out
}
