//! Application scalability profiles and the gain-difference heuristic.
//!
//! A profile stores the measured completion time of an application for a
//! ladder of process counts (whole nodes, one process per node). From the
//! consecutive timing improvements we compute a *gain curve* and derive the
//! three malleability parameters (lower limit, preferred, upper limit) by
//! scanning that curve against a percentage threshold.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile `{0}`: at least two measured process counts are required")]
    InsufficientData(String),
    #[error("profile `{name}`: {procs} processes is not a measured configuration")]
    UnknownConfiguration { name: String, procs: u32 },
    #[error("profile field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("cannot read profile `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse profile `{path}`: {reason}")]
    Parse { path: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ProfileError {
    ProfileError::InvalidField {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// How many computational steps a job of this application performs.
///
/// Most applications run a fixed count. Producer/consumer applications run
/// a number of steps proportional to their initial worker count, where a
/// few ranks are reserved for I/O duties and do not compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationRule {
    Fixed(u64),
    PerWorker { per_worker: u64, overhead_ranks: u32 },
}

impl IterationRule {
    /// Iteration count for a job started with `procs` processes.
    pub fn for_allocation(&self, procs: u32) -> u64 {
        match *self {
            IterationRule::Fixed(n) => n,
            IterationRule::PerWorker {
                per_worker,
                overhead_ranks,
            } => u64::from(procs.saturating_sub(overhead_ranks)) * per_worker,
        }
    }
}

/// Measured per-process-count timing curve plus the application settings
/// the simulator needs: data footprint, iteration counts, and inhibitors.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplicationProfile {
    name: String,
    /// Completion seconds for `reference_iterations` steps, keyed by
    /// process count. Keys are strictly increasing and each key is an
    /// integer multiple of its predecessor.
    measured_timings: BTreeMap<u32, f64>,
    reference_iterations: u64,
    /// Data footprint per rank at the smallest measured configuration;
    /// the global footprint is this value times that process count.
    bytes_per_process: u64,
    min_feasible_procs: u32,
    inhibitor_period_s: f64,
    inhibitor_iterations: u64,
    job_iterations: IterationRule,
}

impl ApplicationProfile {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        measured_timings: BTreeMap<u32, f64>,
        reference_iterations: u64,
        bytes_per_process: u64,
        min_feasible_procs: u32,
        inhibitor_period_s: f64,
        inhibitor_iterations: u64,
        job_iterations: Option<IterationRule>,
    ) -> Result<Self, ProfileError> {
        let name = name.into();
        if name.is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if measured_timings.is_empty() {
            return Err(invalid("timings", "at least one measured configuration is required"));
        }
        let mut prev: Option<u32> = None;
        for (&procs, &secs) in &measured_timings {
            if procs < 1 {
                return Err(invalid("timings", "process counts must be >= 1"));
            }
            if !secs.is_finite() || secs <= 0.0 {
                return Err(invalid(
                    "timings",
                    format!("timing for {procs} processes must be finite and > 0"),
                ));
            }
            if let Some(p) = prev {
                if procs % p != 0 {
                    return Err(invalid(
                        "timings",
                        format!("{procs} is not an integer multiple of the previous count {p}"),
                    ));
                }
            }
            prev = Some(procs);
        }
        if reference_iterations == 0 {
            return Err(invalid("reference_iterations", "must be >= 1"));
        }
        if min_feasible_procs < 1 {
            return Err(invalid("min_feasible_procs", "must be >= 1"));
        }
        let smallest = *measured_timings.keys().next().unwrap();
        if smallest < min_feasible_procs {
            return Err(invalid(
                "timings",
                format!(
                    "smallest measured count {smallest} is below min_feasible_procs {min_feasible_procs}"
                ),
            ));
        }
        if !inhibitor_period_s.is_finite() || inhibitor_period_s < 0.0 {
            return Err(invalid("inhibitor_period_s", "must be finite and >= 0"));
        }
        let job_iterations = job_iterations.unwrap_or(IterationRule::Fixed(reference_iterations));
        if let IterationRule::PerWorker { per_worker, .. } = job_iterations {
            if per_worker == 0 {
                return Err(invalid("job_iterations.per_worker", "must be >= 1"));
            }
        }
        Ok(Self {
            name,
            measured_timings,
            reference_iterations,
            bytes_per_process,
            min_feasible_procs,
            inhibitor_period_s,
            inhibitor_iterations,
            job_iterations,
        })
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ProfileError> {
        let raw: ProfileFile = toml::from_str(text).map_err(|e| ProfileError::Parse {
            path: origin.to_string(),
            reason: e.to_string(),
        })?;
        raw.into_profile()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ProfileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn measured_timings(&self) -> &BTreeMap<u32, f64> {
        &self.measured_timings
    }

    pub fn reference_iterations(&self) -> u64 {
        self.reference_iterations
    }

    pub fn bytes_per_process(&self) -> u64 {
        self.bytes_per_process
    }

    pub fn min_feasible_procs(&self) -> u32 {
        self.min_feasible_procs
    }

    pub fn inhibitor_period_s(&self) -> f64 {
        self.inhibitor_period_s
    }

    pub fn inhibitor_iterations(&self) -> u64 {
        self.inhibitor_iterations
    }

    pub fn job_iterations(&self) -> IterationRule {
        self.job_iterations
    }

    pub fn smallest_procs(&self) -> u32 {
        *self.measured_timings.keys().next().unwrap()
    }

    pub fn largest_procs(&self) -> u32 {
        *self.measured_timings.keys().next_back().unwrap()
    }

    pub fn is_measured(&self, procs: u32) -> bool {
        self.measured_timings.contains_key(&procs)
    }

    /// Global data footprint: per-rank bytes at the smallest measured
    /// configuration times that process count.
    pub fn total_data_bytes(&self) -> u64 {
        self.bytes_per_process * u64::from(self.smallest_procs())
    }

    /// Measured configurations inside `[lower, upper]`, ascending.
    pub fn valid_configs(&self, lower: u32, upper: u32) -> Vec<u32> {
        self.measured_timings
            .range(lower..=upper)
            .map(|(&p, _)| p)
            .collect()
    }

    /// Full-run seconds at `procs` for the reference iteration count.
    pub fn timing(&self, procs: u32) -> Result<f64, ProfileError> {
        self.measured_timings
            .get(&procs)
            .copied()
            .ok_or_else(|| ProfileError::UnknownConfiguration {
                name: self.name.clone(),
                procs,
            })
    }
}

/// Seconds needed to run `iterations` steps at a measured process count.
/// No interpolation: `procs` must be a measured configuration.
pub fn execution_time(
    profile: &ApplicationProfile,
    procs: u32,
    iterations: u64,
) -> Result<f64, ProfileError> {
    let total = profile.timing(procs)?;
    Ok(total * iterations as f64 / profile.reference_iterations as f64)
}

/// Per-configuration relative timing improvement,
/// `s(p) = (t(p_prev) - t(p)) / t(p_min) * 100`, defined for every measured
/// configuration except the smallest.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    base_procs: u32,
    entries: BTreeMap<u32, f64>,
}

impl GainCurve {
    /// Builds a curve from raw gain entries. `base_procs` is the smallest
    /// measured configuration (the reference point without a gain value).
    pub fn from_entries(base_procs: u32, entries: BTreeMap<u32, f64>) -> Self {
        debug_assert!(entries.keys().all(|&p| p > base_procs));
        Self { base_procs, entries }
    }

    pub fn base_procs(&self) -> u32 {
        self.base_procs
    }

    pub fn entries(&self) -> &BTreeMap<u32, f64> {
        &self.entries
    }

    pub fn gain(&self, procs: u32) -> Option<f64> {
        self.entries.get(&procs).copied()
    }
}

/// Computes the gain curve of a profile.
pub fn gain_difference(profile: &ApplicationProfile) -> Result<GainCurve, ProfileError> {
    let timings = &profile.measured_timings;
    if timings.len() < 2 {
        return Err(ProfileError::InsufficientData(profile.name.clone()));
    }
    let t_min = *timings.values().next().unwrap();
    let base_procs = *timings.keys().next().unwrap();
    let mut entries = BTreeMap::new();
    let mut prev_time = t_min;
    for (&procs, &time) in timings.iter().skip(1) {
        entries.insert(procs, (prev_time - time) / t_min * 100.0);
        prev_time = time;
    }
    Ok(GainCurve { base_procs, entries })
}

/// Lower limit, upper limit, and preferred process count of a malleable
/// application. All three are measured configurations and
/// `lower <= preferred <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MalleabilityParams {
    pub lower: u32,
    pub upper: u32,
    pub preferred: u32,
}

impl fmt::Display for MalleabilityParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lower={} preferred={} upper={}",
            self.lower, self.preferred, self.upper
        )
    }
}

/// Derives malleability parameters from a gain curve:
///
/// - upper limit: last configuration before the gain drops below zero
///   (largest measured configuration within the cap when it never does);
/// - lower limit: first configuration whose gain exceeds `threshold_pct`;
/// - preferred: last configuration of the run starting at the lower limit
///   whose gain has not yet dropped below `threshold_pct`.
///
/// When no configuration exceeds the threshold, lower and preferred both
/// collapse to the smallest measured configuration. All candidates are
/// restricted to configurations within `cluster_cap`.
pub fn derive_malleability_params(
    curve: &GainCurve,
    threshold_pct: f64,
    cluster_cap: u32,
) -> Result<MalleabilityParams, ProfileError> {
    if curve.entries.is_empty() {
        return Err(ProfileError::InsufficientData(format!(
            "gain curve based at {} processes",
            curve.base_procs
        )));
    }
    if !(threshold_pct > 0.0) {
        return Err(invalid("threshold_pct", "must be > 0"));
    }
    if cluster_cap < curve.base_procs {
        return Err(invalid(
            "cluster_cap",
            format!(
                "cap {cluster_cap} is below the smallest measured configuration {}",
                curve.base_procs
            ),
        ));
    }

    let capped: Vec<(u32, f64)> = curve
        .entries
        .range(..=cluster_cap)
        .map(|(&p, &g)| (p, g))
        .collect();

    let mut upper = curve.base_procs;
    for &(procs, gain) in &capped {
        if gain < 0.0 {
            break;
        }
        upper = procs;
    }

    let mut lower = None;
    for &(procs, gain) in capped.iter().filter(|&&(p, _)| p <= upper) {
        if gain > threshold_pct {
            lower = Some(procs);
            break;
        }
    }

    let (lower, preferred) = match lower {
        None => (curve.base_procs, curve.base_procs),
        Some(lo) => {
            let mut preferred = lo;
            for &(procs, gain) in capped.iter().filter(|&&(p, _)| p > lo && p <= upper) {
                if gain >= threshold_pct {
                    preferred = procs;
                } else {
                    break;
                }
            }
            (lo, preferred)
        }
    };

    Ok(MalleabilityParams {
        lower,
        upper,
        preferred,
    })
}

/// Named collection of profiles, keyed by application name.
#[derive(Debug, Clone, Default)]
pub struct ProfileSet {
    profiles: BTreeMap<String, ApplicationProfile>,
}

impl ProfileSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// The four applications shipped with the repository.
    pub fn builtin() -> Self {
        let mut set = Self::new();
        for (name, text) in [
            ("cg", include_str!("../../../fixtures/profiles/cg.toml")),
            ("jacobi", include_str!("../../../fixtures/profiles/jacobi.toml")),
            ("nbody", include_str!("../../../fixtures/profiles/nbody.toml")),
            ("hpg", include_str!("../../../fixtures/profiles/hpg.toml")),
        ] {
            let profile = ApplicationProfile::from_toml_str(text, name)
                .unwrap_or_else(|e| panic!("builtin profile {name}: {e}"));
            set.insert(profile);
        }
        set
    }

    pub fn insert(&mut self, profile: ApplicationProfile) {
        self.profiles.insert(profile.name().to_string(), profile);
    }

    pub fn insert_from_path(&mut self, path: impl AsRef<Path>) -> Result<(), ProfileError> {
        self.insert(ApplicationProfile::from_path(path)?);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ApplicationProfile> {
        self.profiles.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    name: String,
    reference_iterations: u64,
    bytes_per_process: u64,
    #[serde(default)]
    min_feasible_procs: Option<u32>,
    #[serde(default)]
    inhibitor_period_s: f64,
    #[serde(default)]
    inhibitor_iterations: u64,
    #[serde(default)]
    job_iterations: Option<JobIterationsSpec>,
    timings: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JobIterationsSpec {
    Fixed(u64),
    PerWorker { per_worker: u64, overhead_ranks: u32 },
}

impl ProfileFile {
    fn into_profile(self) -> Result<ApplicationProfile, ProfileError> {
        let mut timings = BTreeMap::new();
        for (key, secs) in self.timings {
            let procs: u32 = key.parse().map_err(|_| {
                invalid("timings", format!("`{key}` is not a valid process count"))
            })?;
            timings.insert(procs, secs);
        }
        let job_iterations = self.job_iterations.map(|spec| match spec {
            JobIterationsSpec::Fixed(n) => IterationRule::Fixed(n),
            JobIterationsSpec::PerWorker {
                per_worker,
                overhead_ranks,
            } => IterationRule::PerWorker {
                per_worker,
                overhead_ranks,
            },
        });
        ApplicationProfile::new(
            self.name,
            timings,
            self.reference_iterations,
            self.bytes_per_process,
            self.min_feasible_procs.unwrap_or(1),
            self.inhibitor_period_s,
            self.inhibitor_iterations,
            job_iterations,
        )
    }
}
