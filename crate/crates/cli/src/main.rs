use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use mhmr_core::scenario::{
    builtin, run_scenario_in, sweep_parallel, RunRecord, ScenarioScript, SweepAxis,
};
use mhmr_core::RobotId;

/// Writes a stdout line, ignoring a closed pipe (e.g. `mhmr run ... | head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Team sizes at or above this need --long-running in a sweep.
const LONG_RUN_TEAM_SIZE: f64 = 500.0;
/// Root for output directories when --out is not given.
const OUT_ROOT_VAR: &str = "MHMR_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "mhmr",
    version,
    about = "Condition-aware workload allocation for patrol teams"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its run directory.
    Run {
        /// Script file, or a bundled scenario name (s1..s4).
        #[arg(long)]
        script: String,
        /// Run directory. Defaults to `$MHMR_OUT_DIR/<name>` (or `runs/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a script field, e.g. `params.k=3` (repeatable).
        #[arg(long, visible_alias = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Record robot positions every N simulation steps.
        #[arg(long, value_name = "N")]
        trajectory: Option<usize>,
    },
    /// Run a scenario once per value of K or team size m.
    Sweep {
        #[arg(long)]
        script: String,
        /// K or m.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 1,3,5,10.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Sweep directory. Defaults to `$MHMR_OUT_DIR/<name>_sweep_<axis>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, visible_alias = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Allow team sizes of 500 or more.
        #[arg(long)]
        long_running: bool,
    },
    /// Check a script without running it.
    Validate {
        #[arg(long)]
        script: String,
    },
    /// Run a bundled scenario and report its headline check.
    Demo {
        /// s1, s2, s3 or s4.
        name: String,
        /// Also write run directories under this root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure split by exit code: 1 for bad input, 2 for a failed run.
enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

fn input<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Input)
}

fn runtime<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Loads a script file, falling back to a bundled scenario name. Returns
/// the directory relative trace paths resolve against.
fn load_script(
    source: &str,
    overrides: &[String],
) -> anyhow::Result<(ScenarioScript, Option<PathBuf>)> {
    let path = Path::new(source);
    let (script, base) = if path.exists() {
        let s = ScenarioScript::load(path).with_context(|| format!("loading {source}"))?;
        (s, path.parent().map(Path::to_path_buf))
    } else if let Some(s) = builtin::by_name(source) {
        (s, None)
    } else {
        bail!(
            "no script file '{source}' and no bundled scenario by that name (bundled: {})",
            builtin::names().join(", ")
        );
    };
    let script = script.with_overrides(overrides)?;
    script.validate()?;
    Ok((script, base))
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            script,
            out,
            overrides,
            trajectory,
        } => {
            let (mut script, base) = input(load_script(&script, &overrides))?;
            if let Some(n) = trajectory {
                script.params.trajectory_every = n;
            }
            let dir = out.unwrap_or_else(|| out_root().join(&script.name));
            input(prepare_dir(&dir))?;
            let record =
                runtime(run_scenario_in(&script, base.as_deref()).context("running scenario"))?;
            runtime(record.write_dir(&dir).context("writing run directory"))?;
            print_summary(&record, &dir);
            Ok(())
        }
        Command::Sweep {
            script,
            axis,
            values,
            out,
            overrides,
            jobs,
            long_running,
        } => {
            let (script, base) = input(load_script(&script, &overrides))?;
            let axis: SweepAxis = input(axis.parse().map_err(anyhow::Error::from))?;
            if axis == SweepAxis::M
                && !long_running
                && values.iter().any(|v| *v >= LONG_RUN_TEAM_SIZE)
            {
                return Err(Failure::Input(anyhow::anyhow!(
                    "team sizes of {LONG_RUN_TEAM_SIZE} or more take a long time; pass --long-running"
                )));
            }
            let dir =
                out.unwrap_or_else(|| out_root().join(format!("{}_sweep_{}", script.name, axis)));
            input(prepare_dir(&dir))?;
            let result = sweep_parallel(&script, axis, &values, jobs, base.as_deref())
                .context("running sweep");
            let result = match result {
                Ok(r) => r,
                Err(e) if is_input_error(&e) => return Err(Failure::Input(e)),
                Err(e) => return Err(Failure::Runtime(e)),
            };
            runtime(result.write_dir(&dir).context("writing sweep directory"))?;
            say!("out_dir={}", dir.display());
            for p in &result.points {
                let s = &p.record.summary;
                say!(
                    "{axis}={} convergence_time_s={} initial_error={} final_error={}",
                    p.value,
                    opt(s.convergence_time_s),
                    opt(s.initial_error),
                    opt(s.final_error)
                );
            }
            Ok(())
        }
        Command::Validate { script } => {
            let (script, _) = input(load_script(&script, &[]))?;
            say!(
                "valid=true name={} events={}",
                script.name,
                script.events.len()
            );
            Ok(())
        }
        Command::Demo { name, out } => demo(&name, out.as_deref()),
    }
}

fn out_root() -> PathBuf {
    std::env::var_os(OUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

/// Creates the output directory up front so an unwritable location is
/// reported before any simulation time is spent.
fn prepare_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let probe = dir.join(".mhmr_write_check");
    std::fs::write(&probe, b"")
        .and_then(|_| std::fs::remove_file(&probe))
        .with_context(|| format!("output directory {} is not writable", dir.display()))
}

fn is_input_error(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<mhmr_core::Error>(),
        Some(mhmr_core::Error::Config(_) | mhmr_core::Error::Validation(_))
    )
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x}"))
}

fn print_summary(record: &RunRecord, dir: &Path) {
    let s = &record.summary;
    say!("out_dir={}", dir.display());
    say!("name={}", s.name);
    say!("cycles={}", s.cycles_run);
    say!("initial_error={}", opt(s.initial_error));
    say!("final_error={}", opt(s.final_error));
    say!("convergence_time_s={}", opt(s.convergence_time_s));
    say!("max_t_l_s={}", opt(s.max_t_l_s));
    say!("no_capable_agent_cycles={}", s.no_capable_agent_cycles);
    print_sigma(&s.final_sigma);
}

fn print_sigma(sigma: &[f64]) {
    let parts: Vec<String> = sigma.iter().map(|x| format!("{x:.6}")).collect();
    say!("final_sigma={}", parts.join(","));
}

fn run_builtin(script: &ScenarioScript, out: Option<&Path>) -> Result<RunRecord, Failure> {
    let record = runtime(run_scenario_in(script, None).context("running scenario"))?;
    if let Some(out) = out {
        let dir = out.join(&script.name);
        input(prepare_dir(&dir))?;
        runtime(record.write_dir(&dir).context("writing run directory"))?;
        say!("out_dir={}", dir.display());
    }
    Ok(record)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn demo(name: &str, out: Option<&Path>) -> Result<(), Failure> {
    let Some(script) = builtin::by_name(name) else {
        return Err(Failure::Input(anyhow::anyhow!(
            "unknown demo '{name}' (expected one of {})",
            builtin::names().join(", ")
        )));
    };
    match script.name.as_str() {
        "s1" => {
            let mut without = script.clone();
            without.name = "s1_no_allocation".into();
            without.params.allocation = false;
            let with = run_builtin(&script, out)?;
            let without = run_builtin(&without, out)?;
            // Compare laps finished while O1 is degraded, before its recovery ramp.
            let [first_event, _, dip] = builtin::S1_EVENT_TIMES;
            let recovery = dip + 10.0;
            let mut ok = true;
            let mut compared = 0;
            for lap in &with.summary.patrol_laps {
                let (Some(a), Some(b)) = (lap.t_l_s, without.patrol_time(lap.lap)) else {
                    continue;
                };
                let finished = with
                    .laps
                    .iter()
                    .filter(|l| l.lap == lap.lap)
                    .map(|l| l.completed_at_s)
                    .fold(0.0, f64::max);
                let window = if finished <= first_event + 1e-6 {
                    "healthy"
                } else if finished <= recovery {
                    "degraded"
                } else {
                    "recovery"
                };
                say!(
                    "lap={} t_l_with_s={a:.2} t_l_without_s={b:.2} window={window}",
                    lap.lap
                );
                if window == "degraded" {
                    compared += 1;
                    ok &= a <= b + 1e-9;
                }
            }
            say!("compared_laps={compared}");
            say!("t_l_with_le_without={}", verdict(ok && compared > 0));
        }
        "s2" => {
            let record = run_builtin(&script, out)?;
            let s = &record.summary;
            let r3 = s.robots.iter().position(|r| *r == RobotId(3));
            let sigma3 = r3.map(|i| s.final_sigma[i]).unwrap_or(f64::NAN);
            let survivors: f64 = s
                .final_sigma
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != r3)
                .map(|(_, x)| x)
                .sum();
            print_sigma(&s.final_sigma);
            say!("sigma_r3={sigma3:e}");
            say!("sigma_survivors={survivors:.12}");
            say!(
                "r3_share_to_zero={}",
                verdict(sigma3 < 1e-6 && (survivors - 1.0).abs() < 1e-6)
            );
        }
        "s3" => {
            let record = run_builtin(&script, out)?;
            let s = &record.summary;
            let gap = s
                .final_sigma_proposed
                .as_ref()
                .map(|p| {
                    p.iter()
                        .zip(&s.final_sigma)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .unwrap_or(f64::INFINITY);
            print_sigma(&s.final_sigma);
            say!("convergence_time_s={}", opt(s.convergence_time_s));
            say!("max_abs_gap={gap:e}");
            say!("equilibrium_reached={}", verdict(gap <= 1e-6));
        }
        _ => {
            let record = run_builtin(&script, out)?;
            let s = &record.summary;
            let sigma3 = s.final_sigma[2];
            print_sigma(&s.final_sigma);
            say!("sigma_r3={sigma3:e}");
            say!("max_sum_deviation={:e}", s.max_sum_deviation);
            say!("r3_share_exactly_zero={}", verdict(sigma3 == 0.0));
        }
    }
    Ok(())
}
