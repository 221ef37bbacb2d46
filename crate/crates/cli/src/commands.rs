use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use malsim_core::config::RunConfig;
use malsim_core::metrics::{self, MetricsReport};
use malsim_core::output;
use malsim_core::profiles::{
    derive_malleability_params, gain_difference, ApplicationProfile, ProfileSet,
};
use malsim_core::sim::{self, SimError, SimulationTrace};
use malsim_core::workload::{
    self, ClassPolicy, JobClass, Submission, WorkloadSpec, WorkloadSpecFile,
};

/// Errors split by exit code: 1 for bad input, 2 for a broken internal
/// invariant.
pub enum CliError {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Input(err)
    }
}

fn classify_sim_error(err: SimError) -> CliError {
    match err {
        SimError::InvariantViolation { .. } => CliError::Internal(err.into()),
        other => CliError::Input(other.into()),
    }
}

#[derive(Parser)]
#[command(
    name = "malsim",
    version,
    about = "Discrete-event simulation of malleable batch workloads on an HPC cluster"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print an application's gain table and derived malleability parameters
    Profile {
        /// Profile TOML file
        profile: PathBuf,
        /// Gain threshold percentage (default from config, 10%)
        #[arg(long)]
        threshold: Option<f64>,
        /// Run configuration TOML
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a workload file from a spec
    Gen {
        /// Workload spec TOML file
        spec: PathBuf,
        /// Generator seed (required here or in the spec file)
        #[arg(long)]
        seed: Option<u64>,
        /// Output workload file
        #[arg(long)]
        out: PathBuf,
        /// Gain threshold percentage override
        #[arg(long)]
        threshold: Option<f64>,
        /// Override: percentage of malleable jobs
        #[arg(long)]
        malleable_fraction: Option<f64>,
        /// Override: comma-separated list of malleable applications
        #[arg(long, value_delimiter = ',')]
        malleable_apps: Option<Vec<String>>,
    },
    /// Simulate a workload file and write trace/series/metrics CSVs
    Sim {
        /// Workload file produced by `gen`
        workload: PathBuf,
        /// Run seed (recorded in the trace; runs are deterministic)
        #[arg(long)]
        seed: u64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Run configuration TOML
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one base job list under several class variants and compare
    Sweep {
        /// Workload spec TOML file
        spec: PathBuf,
        /// Generator seed (required here or in the spec file)
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Run configuration TOML
        #[arg(long)]
        config: Option<PathBuf>,
        /// Class variants to run (fixed and pure_moldable always run as
        /// references)
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<String>>,
        /// Extra heterogeneous variants: malleable percentages
        #[arg(long, value_delimiter = ',')]
        malleable_fraction: Option<Vec<f64>>,
        /// Extra per-application variants: app names
        #[arg(long, value_delimiter = ',')]
        malleable_apps: Option<Vec<String>>,
    },
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Profile {
            profile,
            threshold,
            config,
        } => cmd_profile(&profile, threshold, config.as_deref()),
        Command::Gen {
            spec,
            seed,
            out,
            threshold,
            malleable_fraction,
            malleable_apps,
        } => cmd_gen(&spec, seed, &out, threshold, malleable_fraction, malleable_apps),
        Command::Sim {
            workload,
            seed,
            out,
            config,
        } => cmd_sim(&workload, seed, &out, config.as_deref()),
        Command::Sweep {
            spec,
            seed,
            out,
            config,
            classes,
            malleable_fraction,
            malleable_apps,
        } => cmd_sweep(
            &spec,
            seed,
            &out,
            config.as_deref(),
            classes,
            malleable_fraction,
            malleable_apps,
        ),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(path) => RunConfig::from_path(path).map_err(|e| anyhow!(e)),
        None => Ok(RunConfig::default()),
    }
}

fn load_profiles(config: &RunConfig, extra: &[PathBuf]) -> Result<ProfileSet> {
    let mut set = ProfileSet::builtin();
    for path in config.profiles.paths.iter().chain(extra) {
        set.insert_from_path(path)
            .map_err(|e| anyhow!(e))
            .with_context(|| format!("loading profile {}", path.display()))?;
    }
    Ok(set)
}

fn cmd_profile(path: &Path, threshold: Option<f64>, config: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(config)?;
    let threshold = threshold.unwrap_or(config.malleability.threshold_pct);
    let cap = config.cluster.max_nodes_per_job;
    let profile = ApplicationProfile::from_path(path).map_err(|e| anyhow!(e))?;

    println!("profile: {}", profile.name());
    println!("procs seconds");
    for (procs, seconds) in profile.measured_timings() {
        println!("{procs} {seconds}");
    }
    let curve = gain_difference(&profile).map_err(|e| anyhow!(e))?;
    println!("gain (threshold {threshold}%):");
    println!("procs gain_pct");
    for (procs, gain) in curve.entries() {
        println!("{procs} {gain:.3}");
    }
    let params =
        derive_malleability_params(&curve, threshold, cap).map_err(|e| anyhow!(e))?;
    println!("params: {params}");
    Ok(())
}

/// Applies the gen/sweep command-line overrides to the spec file's class
/// policy.
fn override_policy(
    file: &WorkloadSpecFile,
    base: ClassPolicy,
    malleable_fraction: Option<f64>,
    malleable_apps: Option<Vec<String>>,
) -> Result<ClassPolicy> {
    let submission = match (file.submission, &base) {
        (Some(s), _) => s,
        (None, ClassPolicy::Uniform(class)) => class.submission(),
        (None, ClassPolicy::Heterogeneous { submission, .. })
        | (None, ClassPolicy::PerApp { submission, .. }) => *submission,
    };
    match (malleable_fraction, malleable_apps) {
        (None, None) => Ok(base),
        (Some(fraction), None) => Ok(ClassPolicy::Heterogeneous {
            submission,
            malleable_fraction: fraction,
        }),
        (None, Some(apps)) => Ok(ClassPolicy::PerApp {
            submission,
            malleable_apps: apps.into_iter().collect(),
        }),
        (Some(_), Some(_)) => {
            bail!("--malleable-fraction and --malleable-apps are mutually exclusive")
        }
    }
}

fn cmd_gen(
    spec_path: &Path,
    seed: Option<u64>,
    out: &Path,
    threshold: Option<f64>,
    malleable_fraction: Option<f64>,
    malleable_apps: Option<Vec<String>>,
) -> Result<(), CliError> {
    let file = WorkloadSpecFile::from_path(spec_path).map_err(|e| anyhow!(e))?;
    let mut spec = file.to_spec(seed).map_err(|e| anyhow!(e))?;
    spec.class_policy = override_policy(
        &file,
        spec.class_policy,
        malleable_fraction,
        malleable_apps,
    )?;
    let threshold = threshold.unwrap_or(file.threshold_pct);
    let profiles = load_profiles(&RunConfig::default(), &file.profiles.paths)?;
    let jobs = workload::generate(&spec, &profiles, threshold, file.cluster_cap)
        .map_err(|e| anyhow!(e))?;
    let text = workload::write_workload(&jobs);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} jobs to {}", jobs.len(), out.display());
    Ok(())
}

fn write_run_outputs(
    dir: &Path,
    trace: &SimulationTrace,
    report: &MetricsReport,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("trace.csv"), output::trace_csv(report))?;
    fs::write(dir.join("series.csv"), output::series_csv(trace))?;
    fs::write(dir.join("metrics.csv"), output::metrics_csv(report))?;
    Ok(())
}

fn cmd_sim(
    workload_path: &Path,
    seed: u64,
    out: &Path,
    config: Option<&Path>,
) -> Result<(), CliError> {
    let config = load_config(config)?;
    let profiles = load_profiles(&config, &[])?;
    let jobs = workload::load_workload(workload_path).map_err(|e| anyhow!(e))?;
    let trace = sim::run(&jobs, &profiles, &config, seed).map_err(classify_sim_error)?;
    let report = metrics::summarize(&trace, &config.energy);
    write_run_outputs(out, &trace, &report)?;
    println!(
        "{} jobs, makespan {:.1} s, avg completion {:.1} s, allocation {:.2}%, {:.2} kWh",
        report.jobs.len(),
        report.makespan,
        report.avg_completion,
        report.allocation_rate_pct,
        report.energy_kwh
    );
    Ok(())
}

struct Variant {
    name: String,
    policy: ClassPolicy,
}

fn class_variants(requested: Option<Vec<String>>) -> Result<Vec<JobClass>> {
    let mut classes: Vec<JobClass> = match requested {
        None => JobClass::ALL.to_vec(),
        Some(tokens) => {
            let mut set: BTreeSet<JobClass> = [JobClass::Fixed, JobClass::PureMoldable].into();
            for token in tokens {
                set.insert(token.parse().map_err(|e: String| anyhow!(e))?);
            }
            set.into_iter().collect()
        }
    };
    classes.sort();
    Ok(classes)
}

fn cmd_sweep(
    spec_path: &Path,
    seed: Option<u64>,
    out: &Path,
    config: Option<&Path>,
    classes: Option<Vec<String>>,
    malleable_fraction: Option<Vec<f64>>,
    malleable_apps: Option<Vec<String>>,
) -> Result<(), CliError> {
    let config = load_config(config)?;
    let file = WorkloadSpecFile::from_path(spec_path).map_err(|e| anyhow!(e))?;
    let base_spec = file.to_spec(seed).map_err(|e| anyhow!(e))?;
    let profiles = load_profiles(&config, &file.profiles.paths)?;

    let mut variants: Vec<Variant> = class_variants(classes)?
        .into_iter()
        .map(|class| Variant {
            name: class.to_string(),
            policy: ClassPolicy::Uniform(class),
        })
        .collect();
    for fraction in malleable_fraction.unwrap_or_default() {
        for submission in [Submission::Rigid, Submission::Moldable] {
            let tag = match submission {
                Submission::Rigid => "rigid",
                Submission::Moldable => "moldable",
            };
            variants.push(Variant {
                name: format!("{tag}_malleable_{fraction}pct"),
                policy: ClassPolicy::Heterogeneous {
                    submission,
                    malleable_fraction: fraction,
                },
            });
        }
    }
    for app in malleable_apps.unwrap_or_default() {
        for submission in [Submission::Rigid, Submission::Moldable] {
            let tag = match submission {
                Submission::Rigid => "rigid",
                Submission::Moldable => "moldable",
            };
            variants.push(Variant {
                name: format!("{tag}_only_{app}"),
                policy: ClassPolicy::PerApp {
                    submission,
                    malleable_apps: [app.clone()].into(),
                },
            });
        }
    }

    let mut reports: Vec<(String, MetricsReport)> = Vec::new();
    for variant in &variants {
        let spec = WorkloadSpec {
            class_policy: variant.policy.clone(),
            ..base_spec.clone()
        };
        let jobs = workload::generate(&spec, &profiles, file.threshold_pct, file.cluster_cap)
            .map_err(|e| anyhow!(e))?;
        let trace = sim::run(&jobs, &profiles, &config, spec.seed).map_err(classify_sim_error)?;
        let report = metrics::summarize(&trace, &config.energy);
        write_run_outputs(&out.join(&variant.name), &trace, &report)?;
        println!(
            "{}: makespan {:.1} s, avg completion {:.1} s, allocation {:.2}%, {:.2} kWh",
            variant.name, report.makespan, report.avg_completion, report.allocation_rate_pct,
            report.energy_kwh
        );
        reports.push((variant.name.clone(), report));
    }

    let fixed = reports.iter().find(|(n, _)| n == "fixed").map(|(_, r)| r.clone());
    let moldable = reports
        .iter()
        .find(|(n, _)| n == "pure_moldable")
        .map(|(_, r)| r.clone());

    let mut csv = String::from(
        "variant,jobs,makespan_s,avg_waiting_s,avg_execution_s,avg_completion_s,\
         allocation_rate_pct,energy_kwh,speedup_waiting_vs_fixed,speedup_execution_vs_fixed,\
         speedup_completion_vs_fixed,speedup_completion_vs_pure_moldable,\
         makespan_pct_of_fixed,energy_pct_of_fixed\n",
    );
    for (name, report) in &reports {
        let vs_fixed = fixed
            .as_ref()
            .map(|f| metrics::speedup(f, report))
            .transpose()
            .map_err(|e| CliError::Internal(e.into()))?;
        let vs_moldable = moldable
            .as_ref()
            .map(|m| metrics::speedup(m, report))
            .transpose()
            .map_err(|e| CliError::Internal(e.into()))?;
        let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.4}"));
        let pct_of = |value: f64, reference: Option<f64>| {
            reference.map(|r| if r == 0.0 { 100.0 } else { value / r * 100.0 })
        };
        csv.push_str(&format!(
            "{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.4},{},{},{},{},{},{}\n",
            name,
            report.jobs.len(),
            report.makespan,
            report.avg_waiting,
            report.avg_execution,
            report.avg_completion,
            report.allocation_rate_pct,
            report.energy_kwh,
            fmt(vs_fixed.map(|s| s.waiting)),
            fmt(vs_fixed.map(|s| s.execution)),
            fmt(vs_fixed.map(|s| s.completion)),
            fmt(vs_moldable.map(|s| s.completion)),
            fmt(pct_of(report.makespan, fixed.as_ref().map(|f| f.makespan))),
            fmt(pct_of(report.energy_kwh, fixed.as_ref().map(|f| f.energy_kwh))),
        ));
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let sweep_path = out.join("sweep.csv");
    fs::write(&sweep_path, csv).with_context(|| format!("writing {}", sweep_path.display()))?;
    println!("wrote {}", sweep_path.display());
    Ok(())
}
