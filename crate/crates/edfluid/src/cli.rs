//! Subcommands. Each one resolves its inputs, writes a manifest into the
//! output directory and only then computes; `rerun` replays a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use edfluid_core::example::{ExampleCase, ExampleParams};
use edfluid_core::fluid::{self, refinement_gap, EmptyingTime};
use edfluid_core::sim::{build_initial_state, run, RandomSource};
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::AppError;
use crate::export;
use crate::harness::{self, replication_seed, ConfigSource, ExperimentPlan};
use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "edfluid", version, about = "EDF queue with deadlines: simulator, fluid limit and convergence checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one run of the N-th system and export its trace.
    Simulate(SimulateArgs),
    /// Solve the fluid model and export its curves.
    Fluid(FluidArgs),
    /// Run a convergence experiment; exit 4 if a check fails.
    Compare(CompareArgs),
    /// Closed-form curves of the exponential worked example.
    Example(ExampleArgs),
    /// Repeat a command from its manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set mu=0.9` or `--set initial_measure.mass=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scale N; defaults to the largest entry of N_list.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FluidArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Number of grid steps on [0, T].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Start of the frontier window.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Experiment plan (JSON).
    #[arg(long, visible_alias = "config")]
    pub plan: PathBuf,
    /// Override a key of the plan's run configuration.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExampleArgs {
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub theta: f64,
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = fluid::DEFAULT_STEPS)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; defaults to the one recorded in the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate(a) => {
            let mut cfg = Config::load(&a.config, &a.set)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            let n = a.n.unwrap_or(*cfg.n_list.last().expect("validated nonempty"));
            simulate(&cfg, n, &a.set, &a.out)
        }
        Command::Fluid(a) => {
            let cfg = Config::load(&a.config, &a.set)?;
            fluid_cmd(&cfg, a.grid, a.kappa, &a.set, &a.out)
        }
        Command::Compare(a) => {
            let (plan, base) = ExperimentPlan::load(&a.plan)?;
            let mut cfg = plan.resolve_config(&base, &a.set)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            compare(&plan, &cfg, &a.set, &a.out)
        }
        Command::Example(a) => example(a.mu, a.theta, a.horizon, a.grid, &a.out),
        Command::Rerun(a) => rerun(&a.manifest, a.out.as_deref()),
    }
}

fn prepare(dir: &Path, manifest: &RunManifest) -> Result<(), AppError> {
    fs::create_dir_all(dir)?;
    manifest.write(dir)
}

pub fn simulate(cfg: &Config, n: u64, overrides: &[String], out: &Path) -> Result<(), AppError> {
    let mut m = RunManifest::new("simulate", out);
    m.config = Some(cfg.to_value());
    m.overrides = overrides.to_vec();
    m.args.insert("n".into(), json!(n));
    m.seeds = vec![cfg.seed];
    prepare(out, &m)?;

    let params = cfg.system_params(n, cfg.seed)?;
    let mut source = RandomSource::new(&params, cfg.arrival_law.to_spec()?, cfg.service_law.to_spec()?, cfg.patience()?)?;
    let state = build_initial_state(&cfg.initial_condition()?, &params, &mut source)?;
    let trace = run(state, &mut source, &cfg.run_config(n)?)?;

    export::write_events(&out.join("events.csv"), &trace.events)?;
    export::write_paths(&out.join("paths.csv"), &trace.paths)?;
    export::write_snapshots(&out.join("snapshots"), &trace.snapshots)?;
    let frontier_sup = trace.frontier_jumps.iter().map(|(t, s)| s - t).fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "N": n,
        "seed": cfg.seed,
        "initial_in_system": trace.initial_in_system,
        "arrivals": trace.arrivals,
        "departures": trace.departures,
        "reneged": trace.reneged,
        "in_system_at_horizon": trace.in_system,
        "busy_time": trace.busy_time,
        "event_count": trace.event_count,
        "first_queue_empty": trace.first_queue_empty,
        "frontier_sup": frontier_sup,
    });
    export::write_json(&out.join("summary.json"), &summary)?;
    println!(
        "simulated N = {n}, seed = {}: {} arrivals, {} departures, {} reneged, {} events",
        cfg.seed, trace.arrivals, trace.departures, trace.reneged, trace.event_count
    );
    Ok(())
}

pub fn fluid_cmd(
    cfg: &Config,
    grid: Option<usize>,
    kappa: Option<f64>,
    overrides: &[String],
    out: &Path,
) -> Result<(), AppError> {
    let mut m = RunManifest::new("fluid", out);
    m.config = Some(cfg.to_value());
    m.overrides = overrides.to_vec();
    m.args.insert("grid".into(), json!(grid));
    m.args.insert("kappa".into(), json!(kappa));
    prepare(out, &m)?;

    let problem = cfg.fluid_problem(grid)?;
    let sol = fluid::solve(&problem, kappa)?;
    let (dphi, deta, df) = refinement_gap(&problem, kappa)?;
    export::write_fluid(&out.join("fluid.csv"), &sol)?;
    export::write_fluid_measures(&out.join("measures"), &sol, 11)?;
    let y_star = problem.patience.y_star(problem.lambda, problem.mu)?;
    let summary = json!({
        "regime": format!("{:?}", problem.regime()),
        "steps": problem.steps,
        "step": problem.step(),
        "kappa": sol.frontier.as_ref().map(|f| f.kappa),
        "y_star": y_star.is_finite().then(|| y_star.value()),
        "emptying_time": sol.emptying_time.and_then(EmptyingTime::value),
        "refinement_gap": {"phi": dphi, "eta": deta, "F": df},
    });
    export::write_json(&out.join("summary.json"), &summary)?;
    match sol.emptying_time {
        Some(EmptyingTime::At(t)) => println!("underloaded: fluid queue empties at T_bar = {t}"),
        Some(EmptyingTime::BeyondHorizon) => println!("underloaded: fluid queue stays positive up to the horizon"),
        None => println!("{:?} regime, phi(T) = {}", problem.regime(), sol.phi[sol.phi.len() - 1]),
    }
    Ok(())
}

pub fn compare(plan: &ExperimentPlan, cfg: &Config, overrides: &[String], out: &Path) -> Result<(), AppError> {
    let mut resolved = plan.clone();
    resolved.config = ConfigSource::Inline(Box::new(cfg.to_value()));
    resolved.overrides = Vec::new();
    let mut m = RunManifest::new("compare", out);
    m.plan = Some(serde_json::to_value(&resolved).expect("plan serializes"));
    m.overrides = overrides.to_vec();
    m.seeds = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..plan.replications).map(move |r| replication_seed(cfg.seed, n, r)))
        .collect();
    prepare(out, &m)?;

    let report = harness::run_experiment(&resolved, cfg)?;
    harness::write_report(out, &report)?;
    for level in &report.levels {
        let cell = |k: &str| level.metrics.get(k).map_or("-".to_string(), |s| format!("{:.4}", s.mean));
        println!(
            "N = {:>6}: err_q {}  err_r {}  err_f {}  err_m {}  cf_mass {}",
            level.n,
            cell("err_q"),
            cell("err_r"),
            cell("err_f"),
            cell("err_m"),
            cell("cf_mass")
        );
    }
    for c in &report.checks {
        println!("[{}] {:?}: {}", if c.pass { "PASS" } else { "FAIL" }, c.check, c.detail);
    }
    if report.pass {
        Ok(())
    } else {
        let failed = report.checks.iter().filter(|c| !c.pass).count();
        Err(AppError::VerdictFailed(format!("{failed} of {} checks failed", report.checks.len())))
    }
}

pub fn example(mu: f64, theta: f64, horizon: f64, grid: usize, out: &Path) -> Result<(), AppError> {
    let params = ExampleParams::new(mu, theta)?;
    if !(horizon.is_finite() && horizon > 0.0) || grid == 0 {
        return Err(AppError::Config("horizon must be > 0 and grid >= 1".into()));
    }
    let mut m = RunManifest::new("example", out);
    m.args.insert("mu".into(), json!(mu));
    m.args.insert("theta".into(), json!(theta));
    m.args.insert("horizon".into(), json!(horizon));
    m.args.insert("grid".into(), json!(grid));
    prepare(out, &m)?;

    let case = params.case();
    let roots = match case {
        ExampleCase::Case3b => Some(params.find_a1_a2()?),
        _ => None,
    };
    let rows = params.curves(horizon, grid)?;
    export::write_oracle(&out.join("oracle.csv"), &rows)?;
    let summary = json!({
        "mu": mu,
        "theta": theta,
        "case": case.as_str(),
        "a1": roots.map(|r| r.0),
        "a2": roots.map(|r| r.1),
    });
    export::write_json(&out.join("summary.json"), &summary)?;
    println!("case: {}", case.as_str());
    match (case, roots) {
        (ExampleCase::Case2, _) => println!("phi = 1 and eta = 0 for all t"),
        (_, Some((a1, a2))) => println!("a1 = {a1}\na2 = {a2}"),
        _ => {}
    }
    Ok(())
}

pub fn rerun(manifest_path: &Path, out: Option<&Path>) -> Result<(), AppError> {
    let m = RunManifest::load(manifest_path)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&m.output_dir));
    let config = || -> Result<Config, AppError> {
        let v = m.config.clone().ok_or_else(|| AppError::Config("manifest has no config".into()))?;
        Config::from_value(v)
    };
    let need = |key: &str| -> Result<Value, AppError> {
        m.args
            .get(key)
            .cloned()
            .ok_or_else(|| AppError::Config(format!("manifest lacks argument `{key}`")))
    };
    match m.command.as_str() {
        "simulate" => {
            let n = m.arg::<u64>("n")?.ok_or_else(|| AppError::Config("manifest lacks `n`".into()))?;
            simulate(&config()?, n, &m.overrides, &out)
        }
        "fluid" => fluid_cmd(&config()?, m.arg("grid")?, m.arg("kappa")?, &m.overrides, &out),
        "compare" => {
            let v = m.plan.clone().ok_or_else(|| AppError::Config("manifest has no plan".into()))?;
            let plan: ExperimentPlan =
                serde_json::from_value(v).map_err(|e| AppError::Config(format!("manifest plan: {e}")))?;
            let cfg = plan.resolve_config(Path::new("."), &[])?;
            compare(&plan, &cfg, &m.overrides, &out)
        }
        "example" => {
            let num = |key: &str| -> Result<f64, AppError> {
                need(key)?.as_f64().ok_or_else(|| AppError::Config(format!("manifest argument `{key}` is not a number")))
            };
            let grid = need("grid")?
                .as_u64()
                .ok_or_else(|| AppError::Config("manifest argument `grid` is not an integer".into()))?;
            example(num("mu")?, num("theta")?, num("horizon")?, grid as usize, &out)
        }
        other => Err(AppError::Config(format!("unknown command `{other}` in manifest"))),
    }
}
