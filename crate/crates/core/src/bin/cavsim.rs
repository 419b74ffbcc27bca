use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cavsim::config::{parse_config, ScenarioConfig};
use cavsim::feasibility::{feasibility_map, PredecessorContext, DEFAULT_TOLERANCE};
use cavsim::ocp::{solve_with_constraints, BoundaryConditions};
use cavsim::output::{
    arcs_csv, events_jsonl, raster_csv, schedule_csv, solve_csv, to_json, trajectory_csv,
    write_file,
};
use cavsim::sim::{self, RunOutput};
use cavsim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cavsim",
    version,
    about = "Coordinated intersection crossing of automated vehicles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling step for trajectories and monitors, seconds.
    #[arg(long)]
    sample_step: Option<f64>,
    /// Admit arrivals even when the rear-end gap check fails.
    #[arg(long)]
    no_enforce: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Coordinated run: trajectories, schedule, events and metrics.
    Simulate(Common),
    /// Fixed-cycle signal run on the same arrivals.
    Baseline(Common),
    /// Both runs plus improvement ratios.
    Compare(Common),
    /// Schedule table only.
    Schedule(Common),
    /// Print the validated config back out.
    EchoConfig {
        #[arg(long, short)]
        config: PathBuf,
    },
    /// Solve one boundary-value problem. Prints the arc table, a blank line,
    /// then the sampled trajectory; `--out` writes both as files instead.
    Solve {
        #[arg(long)]
        t0: f64,
        #[arg(long)]
        v0: f64,
        #[arg(long)]
        tm: f64,
        /// Takes limits and control-zone length from this scenario.
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        sample_step: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Raster of the feasible arrival region behind a constant-speed lead vehicle.
    FeasibilityMap {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        lead_t0: f64,
        #[arg(long, default_value_t = 10.0)]
        lead_speed: f64,
        #[arg(long, num_args = 2, default_values_t = [0.0, 50.0])]
        tau: Vec<f64>,
        #[arg(long, num_args = 2, default_values_t = [1.0, 13.0])]
        upsilon: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        #[arg(long, short, default_value = "out/feasibility.csv")]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let mut cfg = parse_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(step) = common.sample_step {
        cfg.sample_step = step;
    }
    if common.no_enforce {
        cfg.policy.enforce_feasibility = false;
    }
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs.join("\n")));
    }
    Ok(cfg)
}

fn write_run(dir: &Path, cfg: &ScenarioConfig, out: &RunOutput) -> Result<()> {
    write_file(
        &dir.join("trajectories.csv"),
        &trajectory_csv(&out.records, cfg.sample_step),
    )?;
    write_file(&dir.join("schedule.csv"), &schedule_csv(&out.schedule))?;
    write_file(&dir.join("events.jsonl"), &events_jsonl(&out.events)?)?;
    write_file(&dir.join("metrics.json"), &to_json(&out.metrics)?)?;
    write_file(&dir.join("config.toml"), &cfg.to_toml_string())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load(&c)?;
            let out = sim::run(&cfg)?;
            write_run(&c.out, &cfg, &out)?;
            println!(
                "{} vehicles admitted, {} rejected, mean travel time {:.3} s, mean fuel {:.6} l",
                out.counters.admitted,
                out.counters.rejected,
                out.metrics.mean_travel_time,
                out.metrics.mean_fuel
            );
            out.ensure_safe()
        }
        Command::Baseline(c) => {
            let cfg = load(&c)?;
            let m = sim::run_baseline(&cfg)?;
            write_file(&c.out.join("baseline_metrics.json"), &to_json(&m)?)?;
            println!(
                "{} vehicles, mean travel time {:.3} s, mean fuel {:.6} l",
                m.vehicles, m.mean_travel_time, m.mean_fuel
            );
            Ok(())
        }
        Command::Compare(c) => {
            let cfg = load(&c)?;
            let (out, cmp) = sim::compare(&cfg)?;
            write_run(&c.out, &cfg, &out)?;
            write_file(&c.out.join("comparison.json"), &to_json(&cmp)?)?;
            println!(
                "fuel improvement {:.1}% (reference {:.1}%), travel time improvement {:.1}% (reference {:.1}%)",
                100.0 * cmp.fuel_improvement,
                100.0 * cmp.reference_fuel_improvement,
                100.0 * cmp.travel_time_improvement,
                100.0 * cmp.reference_travel_time_improvement
            );
            out.ensure_safe()
        }
        Command::Schedule(c) => {
            let cfg = load(&c)?;
            let out = sim::run(&cfg)?;
            write_file(&c.out.join("schedule.csv"), &schedule_csv(&out.schedule))?;
            print!("{}", schedule_csv(&out.schedule));
            Ok(())
        }
        Command::EchoConfig { config } => {
            print!("{}", parse_config(&config)?.to_toml_string());
            Ok(())
        }
        Command::Solve {
            t0,
            v0,
            tm,
            config,
            sample_step,
            out,
        } => {
            if !(sample_step > 0.0) {
                return Err(Error::Config(format!(
                    "sample_step must be positive, got {sample_step}"
                )));
            }
            let cfg = parse_config(&config)?;
            let l = cfg.geometry.cz_length;
            let traj =
                solve_with_constraints(&BoundaryConditions::new(t0, v0, tm, l), &cfg.limits)?;
            match out {
                Some(dir) => {
                    write_file(&dir.join("arcs.csv"), &arcs_csv(&traj))?;
                    write_file(&dir.join("trajectory.csv"), &solve_csv(&traj, sample_step))?;
                    print!("{}", arcs_csv(&traj));
                }
                None => print!("{}\n{}", arcs_csv(&traj), solve_csv(&traj, sample_step)),
            }
            Ok(())
        }
        Command::FeasibilityMap {
            config,
            lead_t0,
            lead_speed,
            tau,
            upsilon,
            resolution,
            out,
        } => {
            let cfg = parse_config(&config)?;
            let g = &cfg.geometry;
            let lead = solve_with_constraints(
                &BoundaryConditions::new(
                    lead_t0,
                    lead_speed,
                    lead_t0 + g.cz_length / lead_speed,
                    g.cz_length,
                ),
                &cfg.limits,
            )?;
            let ctx =
                PredecessorContext::new(lead, g.cz_length, g.mz_side, g.safe_distance, cfg.limits)?;
            let cells = feasibility_map(
                &ctx,
                (tau[0], tau[1]),
                (upsilon[0], upsilon[1]),
                (resolution, resolution),
                DEFAULT_TOLERANCE,
            )?;
            write_file(&out, &raster_csv(&cells))?;
            let feasible = cells.iter().filter(|c| c.feasible).count();
            println!("{feasible} of {} grid points feasible", cells.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Io(_) => 1,
                Error::MonitorViolation(_) => 2,
                _ => 3,
            })
        }
    }
}
