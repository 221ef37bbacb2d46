use malsim_core::config::RunConfig;
use malsim_core::metrics;
use malsim_core::profiles::ProfileSet;
use malsim_core::sim;
use malsim_core::workload::{generate, ClassPolicy, JobClass, Submission, WorkloadSpec};

fn main() {
    let profiles = ProfileSet::builtin();
    let config = RunConfig::default();
    let base = WorkloadSpec {
        num_jobs: 1000,
        app_mix: vec![
            ("cg".into(), 0.25),
            ("jacobi".into(), 0.25),
            ("nbody".into(), 0.25),
            ("hpg".into(), 0.25),
        ],
        class_policy: ClassPolicy::Uniform(JobClass::Fixed),
        arrival_mean_s: 10.0,
        seed: 42,
    };

    let mut reports = Vec::new();
    for class in JobClass::ALL {
        let spec = WorkloadSpec {
            class_policy: ClassPolicy::Uniform(class),
            ..base.clone()
        };
        let jobs = generate(&spec, &profiles, 10.0, 32).unwrap();
        let t0 = std::time::Instant::now();
        let trace = sim::run(&jobs, &profiles, &config, 42).unwrap();
        // per-app node-seconds and resize counts
        let mut per_app: std::collections::BTreeMap<String, (f64, usize, usize)> =
            Default::default();
        for j in &trace.jobs {
            let entry = per_app.entry(j.app.clone()).or_default();
            let mut ns = 0.0;
            for w in j.allocation_history.windows(2) {
                ns += f64::from(w[0].1) * (w[1].0 - w[0].0);
            }
            if let Some(&(t, n)) = j.allocation_history.last() {
                ns += f64::from(n) * (j.end - t);
            }
            entry.0 += ns;
            entry.1 += j.resizes.iter().filter(|r| r.to_procs > r.from_procs).count();
            entry.2 += j.resizes.iter().filter(|r| r.to_procs < r.from_procs).count();
        }
        for (app, (ns, expands, shrinks)) in &per_app {
            println!(
                "    {app:<8} node-s {ns:>12.0}  expands {expands:>5}  shrinks {shrinks:>5}"
            );
        }
        let report = metrics::summarize(&trace, &config.energy);
        println!(
            "{class:<16} makespan {:>10.1}  wait {:>9.1}  exec {:>8.1}  compl {:>9.1}  alloc {:>6.2}%  {:>8.2} kWh  events in {:?}",
            report.makespan,
            report.avg_waiting,
            report.avg_execution,
            report.avg_completion,
            report.allocation_rate_pct,
            report.energy_kwh,
            t0.elapsed()
        );
        reports.push((class, report));
    }
    let get = |c: JobClass| &reports.iter().find(|(x, _)| *x == c).unwrap().1;
    let fixed = get(JobClass::Fixed);
    let moldable = get(JobClass::PureMoldable);
    let malleable = get(JobClass::PureMalleable);
    let flexible = get(JobClass::Flexible);
    println!();
    println!(
        "6a completion speedup malleable vs fixed:   {:.2} (need >= 2.0)",
        fixed.avg_completion / malleable.avg_completion
    );
    println!(
        "6b completion speedup flexible vs moldable: {:.2} (need >= 1.2)",
        moldable.avg_completion / flexible.avg_completion
    );
    println!(
        "6c energy flexible/fixed:                   {:.2}% (need <= 50%)",
        flexible.energy_kwh / fixed.energy_kwh * 100.0
    );
    let wait_speedup = fixed.avg_waiting / malleable.avg_waiting;
    let compl_speedup = fixed.avg_completion / malleable.avg_completion;
    println!(
        "6d rigid wait vs compl speedup: {:.3} vs {:.3} rel diff {:.1}% (need <= 20%)",
        wait_speedup,
        compl_speedup,
        (wait_speedup - compl_speedup).abs() / compl_speedup * 100.0
    );

    println!();
    for fraction in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let spec = WorkloadSpec {
            class_policy: ClassPolicy::Heterogeneous {
                submission: Submission::Rigid,
                malleable_fraction: fraction,
            },
            ..base.clone()
        };
        let jobs = generate(&spec, &profiles, 10.0, 32).unwrap();
        let trace = sim::run(&jobs, &profiles, &config, 42).unwrap();
        let report = metrics::summarize(&trace, &config.energy);
        println!(
            "rigid {fraction:>5.1}% malleable: makespan {:>10.1}  compl {:>9.1}",
            report.makespan, report.avg_completion
        );
    }
}
