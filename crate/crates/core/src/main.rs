use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dedpoz::dispatch::{solve_ded_no_loss, solve_ded_with_loss, DispatchReport, IaConfig, SolveConfig, Termination};
use dedpoz::instance::{evaluate_violations_with_tol, Schedule};
use dedpoz::io::{
    duplicate_system, load_instance, read_schedule_csv, scaled_cpu_time, write_report_json, write_schedule_csv,
    CSV_AUDIT_TOL,
};
use dedpoz::model::{build_milp1, write_lp};
use dedpoz::Error;

#[derive(Parser)]
#[command(name = "dedpoz", version, about = "Dynamic economic dispatch with prohibited operating zones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Milp1,
    MilpIa,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Time limit per MILP solve, seconds.
    #[arg(long = "time-limit", default_value_t = 300.0)]
    time_limit: f64,
    /// Relative optimality gap.
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    /// Tangent intervals per segment.
    #[arg(long, default_value_t = 4)]
    tangents: usize,
}

impl SolveArgs {
    fn config(&self, record_log: bool) -> SolveConfig {
        SolveConfig {
            tangents: self.tangents,
            gap: self.gap,
            time_limit_s: self.time_limit,
            node_limit: None,
            record_log,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "milp1")]
        mode: Mode,
        /// Balance violation threshold for milp-ia, MW.
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long = "max-iter", default_value_t = 5)]
        max_iter: usize,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long = "schedule-out")]
        schedule_out: Option<PathBuf>,
        #[arg(long = "report-out")]
        report_out: Option<PathBuf>,
        /// Accepted for reproducible scripts; the solver has no randomized steps.
        #[arg(long)]
        seed: Option<u64>,
        /// Branch-and-bound node log of the final MILP solve, one line per node.
        #[arg(long = "node-log")]
        node_log: Option<PathBuf>,
        /// Write the lossless MILP in LP text format.
        #[arg(long = "lp-out")]
        lp_out: Option<PathBuf>,
    },
    /// Check an instance file.
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Audit a schedule CSV against an instance; prints the report as JSON.
    Audit {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve copies of the lossless system at several duplication factors.
    Bench {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long = "duplicate-factors", value_delimiter = ',', default_values_t = vec![1usize, 5, 10, 20, 30])]
        duplicate_factors: Vec<usize>,
        #[command(flatten)]
        solve: SolveArgs,
        /// Clock speed of this machine, GHz, for scaled times.
        #[arg(long = "cpu-ghz")]
        cpu_ghz: Option<f64>,
        #[arg(long = "base-ghz", default_value_t = 2.0)]
        base_ghz: f64,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Infeasible { .. } | Error::IterationInfeasible { .. } => 2,
        Error::NoIncumbent { .. } => 4,
        e if e.is_input_error() => 3,
        _ => 1,
    }
}

fn print_summary(report: &DispatchReport) {
    println!("mode: {}", report.mode);
    println!("cost: {:.6}", report.cost);
    println!("surrogate_objective: {:.6}", report.surrogate_objective);
    println!("rel_gap: {:.3e}", report.rel_gap);
    println!("max_violation_mw: {:.6}", report.max_violation);
    println!("total_violation_mw: {:.6}", report.total_violation);
    if let Some(t) = report.terminated_by {
        let name = match t {
            Termination::Epsilon => "epsilon",
            Termination::IterMax => "iter_max",
        };
        println!("terminated_by: {name} (k = {})", report.selected_k);
    }
    println!("feasible: {}", report.feasibility.linear_constraints_ok());
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Solve {
            instance,
            mode,
            epsilon,
            max_iter,
            solve,
            schedule_out,
            report_out,
            seed,
            node_log,
            lp_out,
        } => {
            if let Some(seed) = seed {
                log::debug!("seed {seed} recorded; no randomized tie-breaks are used");
            }
            let inst = load_instance(&instance)?;
            if let Some(path) = lp_out {
                let (model, _) = build_milp1(&inst, solve.tangents)?;
                let mut w = BufWriter::new(File::create(path)?);
                write_lp(&model, &mut w)?;
                w.flush()?;
            }
            let config = solve.config(node_log.is_some());
            let report = match mode {
                Mode::Milp1 => solve_ded_no_loss(&inst, &config)?,
                Mode::MilpIa => solve_ded_with_loss(
                    &inst,
                    &IaConfig {
                        epsilon,
                        iter_max: max_iter,
                        solve: config,
                    },
                )?,
            };
            let audited = match mode {
                Mode::Milp1 => dedpoz::SystemInstance {
                    loss_model: None,
                    ..inst.clone()
                },
                Mode::MilpIa => inst.clone(),
            };
            if let Some(path) = schedule_out {
                write_schedule_csv(File::create(path)?, &audited, &report.schedule)?;
            }
            if let Some(path) = report_out {
                let mut w = BufWriter::new(File::create(path)?);
                write_report_json(&mut w, &report)?;
                writeln!(w)?;
            }
            if let Some(path) = node_log {
                let mut w = BufWriter::new(File::create(path)?);
                for entry in &report.node_log {
                    writeln!(w, "{entry}")?;
                }
            }
            print_summary(&report);
            let limits = report.limit_hit || report.terminated_by == Some(Termination::IterMax);
            Ok(if limits { 4 } else { 0 })
        }
        Command::Validate { instance } => {
            let inst = load_instance(&instance)?;
            let zones: usize = inst.units.iter().map(|u| u.prohibited_zones.len()).sum();
            println!(
                "ok: {} units, {} periods, {zones} prohibited zones, loss model: {}",
                inst.num_units(),
                inst.num_periods(),
                if inst.loss_model.is_some() { "yes" } else { "no" }
            );
            Ok(0)
        }
        Command::Audit { instance, schedule, out } => {
            let inst = load_instance(&instance)?;
            let p = read_schedule_csv(File::open(schedule)?, &inst)?;
            let sched = Schedule::with_max_reserve(&inst, p);
            let report = evaluate_violations_with_tol(&inst, &sched, CSV_AUDIT_TOL)?;
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => std::fs::write(path, text + "\n")?,
                None => println!("{text}"),
            }
            Ok(0)
        }
        Command::Bench {
            instance,
            duplicate_factors,
            solve,
            cpu_ghz,
            base_ghz,
        } => {
            let inst = load_instance(&instance)?;
            let config = solve.config(false);
            println!("factor,units,cost,rel_gap,nodes,time_s,scaled_time_s");
            let mut code = 0;
            for f in duplicate_factors {
                let dup = duplicate_system(&inst, f)?;
                let dup = dedpoz::SystemInstance { loss_model: None, ..dup };
                let report = solve_ded_no_loss(&dup, &config)?;
                let time = report.timings.total_s;
                let scaled = match cpu_ghz {
                    Some(g) => format!("{:.4}", scaled_cpu_time(g, base_ghz, time)?),
                    None => String::new(),
                };
                println!(
                    "{f},{},{:.4},{:.3e},{},{:.4},{scaled}",
                    dup.num_units(),
                    report.cost,
                    report.rel_gap,
                    report.nodes,
                    time
                );
                if report.limit_hit {
                    code = 4;
                }
            }
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
