//! Reproducible synthetic workload generation.
//!
//! Jobs draw an application from a weighted mix and arrive with
//! exponentially distributed inter-arrival gaps. The class policy fixes
//! each job's submission mode (rigid at the upper limit, or moldable over
//! [lower, upper]) and its malleable flag. Arrival and app draws come from
//! one seeded stream and flag draws from an independent stream, so every
//! class policy over the same seed sees the same base job list.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Deserialize;
use thiserror::Error;

use crate::profiles::{
    derive_malleability_params, gain_difference, MalleabilityParams, ProfileSet,
};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error("workload line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Profile(#[from] crate::profiles::ProfileError),
}

/// How the node count is requested at submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Submission {
    Rigid,
    Moldable,
}

/// The four job classes: submission mode crossed with the malleable flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JobClass {
    Fixed,
    PureMoldable,
    PureMalleable,
    Flexible,
}

impl JobClass {
    pub const ALL: [JobClass; 4] = [
        JobClass::Fixed,
        JobClass::PureMoldable,
        JobClass::PureMalleable,
        JobClass::Flexible,
    ];

    pub fn submission(self) -> Submission {
        match self {
            JobClass::Fixed | JobClass::PureMalleable => Submission::Rigid,
            JobClass::PureMoldable | JobClass::Flexible => Submission::Moldable,
        }
    }

    pub fn malleable(self) -> bool {
        matches!(self, JobClass::PureMalleable | JobClass::Flexible)
    }
}

/// The class of a (submission mode, malleable flag) pair.
pub fn classify(submission: Submission, malleable: bool) -> JobClass {
    match (submission, malleable) {
        (Submission::Rigid, false) => JobClass::Fixed,
        (Submission::Moldable, false) => JobClass::PureMoldable,
        (Submission::Rigid, true) => JobClass::PureMalleable,
        (Submission::Moldable, true) => JobClass::Flexible,
    }
}

impl fmt::Display for JobClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let token = match self {
            JobClass::Fixed => "fixed",
            JobClass::PureMoldable => "pure_moldable",
            JobClass::PureMalleable => "pure_malleable",
            JobClass::Flexible => "flexible",
        };
        f.write_str(token)
    }
}

impl FromStr for JobClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(JobClass::Fixed),
            "pure_moldable" => Ok(JobClass::PureMoldable),
            "pure_malleable" => Ok(JobClass::PureMalleable),
            "flexible" => Ok(JobClass::Flexible),
            other => Err(format!("unknown job class `{other}`")),
        }
    }
}

/// How classes are assigned across the generated jobs.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassPolicy {
    /// Every job gets the same class.
    Uniform(JobClass),
    /// A seeded fraction of jobs (percent) is malleable; nested across
    /// fractions under the same seed.
    Heterogeneous {
        submission: Submission,
        malleable_fraction: f64,
    },
    /// Only jobs of the listed applications are malleable.
    PerApp {
        submission: Submission,
        malleable_apps: BTreeSet<String>,
    },
}

/// Generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub num_jobs: u64,
    /// (application name, weight) pairs; weights must sum to 1.
    pub app_mix: Vec<(String, f64)>,
    pub class_policy: ClassPolicy,
    pub arrival_mean_s: f64,
    pub seed: u64,
}

/// One generated job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobSubmission {
    pub job_id: u64,
    pub submit_time: f64,
    pub app: String,
    pub class: JobClass,
    pub params: MalleabilityParams,
    /// Node request of a rigid submission (the upper limit).
    pub request: u32,
}

impl JobSubmission {
    pub fn submission(&self) -> Submission {
        self.class.submission()
    }

    pub fn malleable(&self) -> bool {
        self.class.malleable()
    }
}

/// Generates the job list for a spec. Identical (spec, seed) pairs yield
/// byte-identical lists; class policies only touch the flag stream, so the
/// arrival times and applications are shared across policies.
pub fn generate(
    spec: &WorkloadSpec,
    profiles: &ProfileSet,
    threshold_pct: f64,
    cluster_cap: u32,
) -> Result<Vec<JobSubmission>, WorkloadError> {
    if spec.app_mix.is_empty() {
        return Err(WorkloadError::InvalidSpec("empty application mix".into()));
    }
    let weight_sum: f64 = spec.app_mix.iter().map(|(_, w)| w).sum();
    if (weight_sum - 1.0).abs() > 1e-6 {
        return Err(WorkloadError::InvalidSpec(format!(
            "application weights sum to {weight_sum}, expected 1"
        )));
    }
    if spec.app_mix.iter().any(|(_, w)| *w < 0.0) {
        return Err(WorkloadError::InvalidSpec("negative application weight".into()));
    }
    if !(spec.arrival_mean_s > 0.0) {
        return Err(WorkloadError::InvalidSpec(
            "arrival_mean_s must be > 0".into(),
        ));
    }
    if let ClassPolicy::Heterogeneous {
        malleable_fraction, ..
    } = spec.class_policy
    {
        if !(0.0..=100.0).contains(&malleable_fraction) {
            return Err(WorkloadError::InvalidSpec(format!(
                "malleable_fraction {malleable_fraction} outside [0, 100]"
            )));
        }
    }

    let mut app_params = BTreeMap::new();
    for (name, _) in &spec.app_mix {
        let profile = profiles.get(name).ok_or_else(|| {
            WorkloadError::InvalidSpec(format!("unknown application `{name}`"))
        })?;
        let curve = gain_difference(profile)?;
        let params = derive_malleability_params(&curve, threshold_pct, cluster_cap)?;
        app_params.insert(name.clone(), params);
    }

    let mut arrivals = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut flags = ChaCha8Rng::seed_from_u64(spec.seed);
    flags.set_stream(1);
    let gap = Exp::new(1.0 / spec.arrival_mean_s)
        .map_err(|e| WorkloadError::InvalidSpec(e.to_string()))?;

    let mut jobs = Vec::with_capacity(spec.num_jobs as usize);
    let mut now = 0.0;
    for job_id in 0..spec.num_jobs {
        now += gap.sample(&mut arrivals);
        let pick: f64 = arrivals.random();
        let app = pick_app(&spec.app_mix, weight_sum, pick);
        let flag_draw: f64 = flags.random();
        let (submission, malleable) = match &spec.class_policy {
            ClassPolicy::Uniform(class) => (class.submission(), class.malleable()),
            ClassPolicy::Heterogeneous {
                submission,
                malleable_fraction,
            } => (*submission, flag_draw * 100.0 < *malleable_fraction),
            ClassPolicy::PerApp {
                submission,
                malleable_apps,
            } => (*submission, malleable_apps.contains(app)),
        };
        let params = app_params[app];
        jobs.push(JobSubmission {
            job_id,
            submit_time: now,
            app: app.to_string(),
            class: classify(submission, malleable),
            params,
            request: params.upper,
        });
    }
    Ok(jobs)
}

fn pick_app(mix: &[(String, f64)], weight_sum: f64, draw: f64) -> &str {
    let target = draw * weight_sum;
    let mut acc = 0.0;
    for (name, weight) in mix {
        acc += weight;
        if target < acc {
            return name;
        }
    }
    &mix.last().unwrap().0
}

/// Serializes jobs to the line-oriented workload format:
/// `job_id submit_time app class lower upper preferred request`.
pub fn write_workload(jobs: &[JobSubmission]) -> String {
    let mut out = String::from("# job_id submit_time app class lower upper preferred request\n");
    for j in jobs {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            j.job_id,
            j.submit_time,
            j.app,
            j.class,
            j.params.lower,
            j.params.upper,
            j.params.preferred,
            j.request
        ));
    }
    out
}

/// Parses the line-oriented workload format, ignoring `#` comment lines.
pub fn parse_workload(text: &str) -> Result<Vec<JobSubmission>, WorkloadError> {
    let mut jobs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| WorkloadError::Parse {
            line: idx + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", fields.len())));
        }
        let parse_u32 = |s: &str, what: &str| {
            s.parse::<u32>()
                .map_err(|_| err(format!("invalid {what} `{s}`")))
        };
        let job = JobSubmission {
            job_id: fields[0]
                .parse()
                .map_err(|_| err(format!("invalid job id `{}`", fields[0])))?,
            submit_time: fields[1]
                .parse()
                .map_err(|_| err(format!("invalid submit time `{}`", fields[1])))?,
            app: fields[2].to_string(),
            class: fields[3].parse().map_err(|e: String| err(e))?,
            params: MalleabilityParams {
                lower: parse_u32(fields[4], "lower limit")?,
                upper: parse_u32(fields[5], "upper limit")?,
                preferred: parse_u32(fields[6], "preferred count")?,
            },
            request: parse_u32(fields[7], "request")?,
        };
        if !job.submit_time.is_finite() || job.submit_time < 0.0 {
            return Err(err(format!("invalid submit time `{}`", fields[1])));
        }
        jobs.push(job);
    }
    Ok(jobs)
}

pub fn load_workload(path: impl AsRef<Path>) -> Result<Vec<JobSubmission>, WorkloadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_workload(&text)
}

/// On-disk workload spec document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpecFile {
    pub num_jobs: u64,
    #[serde(default = "default_arrival_mean")]
    pub arrival_mean_s: f64,
    pub class: String,
    #[serde(default)]
    pub submission: Option<Submission>,
    #[serde(default)]
    pub malleable_fraction: Option<f64>,
    #[serde(default)]
    pub malleable_apps: Option<Vec<String>>,
    #[serde(default = "default_threshold")]
    pub threshold_pct: f64,
    #[serde(default = "default_cap")]
    pub cluster_cap: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub apps: BTreeMap<String, f64>,
    #[serde(default)]
    pub profiles: ProfilePaths,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilePaths {
    #[serde(default)]
    pub paths: Vec<PathBuf>,
}

fn default_arrival_mean() -> f64 {
    10.0
}

fn default_threshold() -> f64 {
    10.0
}

fn default_cap() -> u32 {
    32
}

impl WorkloadSpecFile {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, WorkloadError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, WorkloadError> {
        toml::from_str(text).map_err(|e| WorkloadError::InvalidSpec(e.to_string()))
    }

    pub fn class_policy(&self) -> Result<ClassPolicy, WorkloadError> {
        let submission = || {
            self.submission.ok_or_else(|| {
                WorkloadError::InvalidSpec(format!(
                    "class `{}` requires a `submission` field",
                    self.class
                ))
            })
        };
        match self.class.as_str() {
            "heterogeneous" => Ok(ClassPolicy::Heterogeneous {
                submission: submission()?,
                malleable_fraction: self.malleable_fraction.ok_or_else(|| {
                    WorkloadError::InvalidSpec(
                        "class `heterogeneous` requires `malleable_fraction`".into(),
                    )
                })?,
            }),
            "per_app" => Ok(ClassPolicy::PerApp {
                submission: submission()?,
                malleable_apps: self
                    .malleable_apps
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .collect(),
            }),
            other => {
                let class: JobClass = other.parse().map_err(WorkloadError::InvalidSpec)?;
                Ok(ClassPolicy::Uniform(class))
            }
        }
    }

    /// The generation spec with class policy and seed resolved. A seed
    /// passed on the command line wins over the file's.
    pub fn to_spec(&self, seed_override: Option<u64>) -> Result<WorkloadSpec, WorkloadError> {
        let seed = seed_override.or(self.seed).ok_or_else(|| {
            WorkloadError::InvalidSpec(
                "no seed: pass --seed or set `seed` in the spec file".into(),
            )
        })?;
        Ok(WorkloadSpec {
            num_jobs: self.num_jobs,
            app_mix: self
                .apps
                .iter()
                .map(|(name, &weight)| (name.clone(), weight))
                .collect(),
            class_policy: self.class_policy()?,
            arrival_mean_s: self.arrival_mean_s,
            seed,
        })
    }
}
