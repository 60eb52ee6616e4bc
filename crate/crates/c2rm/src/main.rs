//! `c2rm` command line: scenario-driven solvers, sweeps, artifact emission,
//! and the built-in verification battery.
//!
//! Every error exits nonzero and prints a single machine-readable JSON line
//! to stderr: `{"category":"...","message":"..."}`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use c2rm::comm_rm::algorithm1_solve;
use c2rm::comp_rm::solve_computation_rm;
use c2rm::emit::{sweep_csv, sweep_svg, timeline_csv};
use c2rm::joint_rm::{algorithm2_solve, JointOptions};
use c2rm::model::{convergence_bound, ConvergenceBoundInput, DeviceProfile, SystemConfig};
use c2rm::oracles::run_verification;
use c2rm::scenario::Scenario;
use c2rm::scheduling::{random_schedule, schedule};
use c2rm::spectrum_sharing::{sharing_gain, simulate_round};
use c2rm::sweep::{assert_dominance, run_sweep};

#[derive(Parser)]
#[command(
    name = "c2rm",
    version,
    about = "Joint computation-and-communication resource management for \
             energy-efficient federated edge learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form workload split and speed scaling per device.
    CompRm {
        #[arg(long)]
        scenario: PathBuf,
        /// Channel seed for distribution-driven scenarios.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Compute deadline; defaults to half the round latency.
        #[arg(long)]
        compute_time: Option<f64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equal-price bandwidth partition at fixed upload windows.
    CommRm {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Upload window; defaults to half the round latency.
        #[arg(long)]
        tx_time: Option<f64>,
        /// Override the price-spread tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full joint allocation: bandwidth, time division, splits, speeds.
    Joint {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the joint stationarity tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy-ranked device selection (with the random baseline alongside).
    Schedule {
        #[arg(long)]
        scenario: PathBuf,
        /// Subset size; defaults to the scenario's num_scheduled.
        #[arg(long)]
        num_scheduled: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Slotted spectrum-sharing simulation and its energy gain.
    Share {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Slot length in seconds; defaults to the scenario's slotting.
        #[arg(long)]
        slot_dt: Option<f64>,
        /// Write the slot-by-slot timeline CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every requested scheme over the scenario's sweep grid.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Write the artifact here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        /// Fail (nonzero exit) if the scheme-energy ordering is violated.
        #[arg(long)]
        assert_dominance: bool,
    },
    /// Run the independent verification battery.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate the optimality-gap bound for M-of-K scheduling.
    Bound {
        #[arg(long)]
        num_rounds: usize,
        #[arg(long)]
        num_devices: usize,
        #[arg(long)]
        num_scheduled: usize,
        /// Gradient-variance bound sigma^2.
        #[arg(long)]
        variance: f64,
        /// Smoothness constant of the per-device losses.
        #[arg(long)]
        smoothness: f64,
        /// Initial squared distance to the optimum.
        #[arg(long)]
        init_dist_sq: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// CLI failure with a stable category token and exit code.
struct CliError {
    category: &'static str,
    message: String,
    code: u8,
}

impl CliError {
    fn new(category: &'static str, code: u8, message: impl ToString) -> Self {
        CliError {
            category,
            code,
            message: message.to_string(),
        }
    }

    fn scenario(message: impl ToString) -> Self {
        Self::new("scenario", 3, message)
    }

    fn solver(message: impl ToString) -> Self {
        Self::new("solver", 4, message)
    }

    fn emit(message: impl ToString) -> Self {
        Self::new("emit", 5, message)
    }

    fn io(message: impl ToString) -> Self {
        Self::new("io", 6, message)
    }

    fn verification(message: impl ToString) -> Self {
        Self::new("verification", 7, message)
    }

    fn usage(message: impl ToString) -> Self {
        Self::new("usage", 8, message)
    }

    fn dominance(message: impl ToString) -> Self {
        Self::new("dominance", 9, message)
    }
}

fn load(scenario: &Path) -> Result<Scenario, CliError> {
    Scenario::load(scenario).map_err(CliError::scenario)
}

fn instance(
    scenario: &Scenario,
    seed: u64,
) -> Result<(SystemConfig, Vec<DeviceProfile>), CliError> {
    let config = scenario.system_config();
    let devices = scenario.devices_for_seed(seed).map_err(CliError::scenario)?;
    Ok((config, devices))
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::io(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    write_output(out, &text)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::CompRm {
            scenario,
            seed,
            compute_time,
            out,
        } => {
            let scenario = load(&scenario)?;
            let (config, devices) = instance(&scenario, seed)?;
            let deadline = compute_time.unwrap_or(0.5 * config.round_latency);
            let budgets = vec![deadline; devices.len()];
            let (plans, rates) = solve_computation_rm(&devices, &budgets, config.total_workload)
                .map_err(CliError::solver)?;
            let total: f64 = plans.iter().map(|p| p.energy).sum();
            let report = json!({
                "compute_time_s": deadline,
                "sum_energy_j": total,
                "devices": devices.iter().zip(&plans).zip(&rates).map(|((d, p), &rate)| {
                    json!({
                        "id": d.id,
                        "cpu_load": p.cpu_load,
                        "gpu_load": p.gpu_load,
                        "cpu_speed": p.cpu_speed,
                        "gpu_speed": p.gpu_speed,
                        "energy_j": p.energy,
                        "energy_time_rate": rate,
                    })
                }).collect::<Vec<_>>(),
            });
            emit_json(out.as_deref(), &report)
        }
        Command::CommRm {
            scenario,
            seed,
            tx_time,
            tol,
            out,
        } => {
            let scenario = load(&scenario)?;
            let (config, devices) = instance(&scenario, seed)?;
            let window = tx_time.unwrap_or(0.5 * config.round_latency);
            let tolerance = tol.unwrap_or(scenario.tolerances.inner_tol);
            let budgets = vec![window; devices.len()];
            let (widths, nu, trace) =
                algorithm1_solve(&devices, &budgets, &config, tolerance, None)
                    .map_err(CliError::solver)?;
            let energies: Vec<f64> = devices
                .iter()
                .zip(&widths)
                .map(|(d, &w)| {
                    c2rm::model::comm_energy(
                        w,
                        window,
                        d.channel_gain,
                        config.noise_psd,
                        config.gradient_bits,
                    )
                    .map_err(CliError::solver)
                })
                .collect::<Result<_, _>>()?;
            let report = json!({
                "tx_time_s": window,
                "price": nu,
                "iterations": trace.iterations,
                "final_spread": trace.final_spread,
                "sum_energy_j": energies.iter().sum::<f64>(),
                "devices": devices.iter().zip(&widths).zip(&energies).map(|((d, &w), &e)| {
                    json!({ "id": d.id, "bandwidth_hz": w, "energy_j": e })
                }).collect::<Vec<_>>(),
            });
            emit_json(out.as_deref(), &report)
        }
        Command::Joint {
            scenario,
            seed,
            tol,
            out,
        } => {
            let scenario = load(&scenario)?;
            let (config, devices) = instance(&scenario, seed)?;
            let mut options = JointOptions {
                tol: scenario.tolerances.joint_tol,
                inner_tol: scenario.tolerances.inner_tol,
                certify_tol: scenario.tolerances.certify_tol,
                ..JointOptions::default()
            };
            if let Some(t) = tol {
                options.tol = t;
            }
            let (allocation, diagnostics, trace) =
                algorithm2_solve(&devices, &config, &options).map_err(CliError::solver)?;
            let report = json!({
                "sum_energy_j": allocation.sum_energy,
                "comp_energy_j": allocation.comp_energy(),
                "comm_energy_j": allocation.comm_energy(),
                "outer_iterations": trace.outer_iterations,
                "residual_time": diagnostics.residual_time,
                "residual_nu": diagnostics.residual_nu,
                "residual_workload": diagnostics.residual_workload,
                "residual_speed": diagnostics.residual_speed,
                "certified": diagnostics.pass,
                "devices": (0..devices.len()).map(|k| {
                    let comp = &allocation.computation[k];
                    let comm = &allocation.communication[k];
                    json!({
                        "id": devices[k].id,
                        "bandwidth_hz": comm.bandwidth,
                        "tx_time_s": comm.tx_time,
                        "tx_psd_w_per_hz": comm.tx_psd,
                        "compute_time_s": comp.compute_time,
                        "cpu_load": comp.cpu_load,
                        "gpu_load": comp.gpu_load,
                        "cpu_speed": comp.cpu_speed,
                        "gpu_speed": comp.gpu_speed,
                        "comp_energy_j": comp.energy,
                        "comm_energy_j": comm.energy,
                        "price": diagnostics.nu[k],
                    })
                }).collect::<Vec<_>>(),
            });
            emit_json(out.as_deref(), &report)
        }
        Command::Schedule {
            scenario,
            num_scheduled,
            seed,
            out,
        } => {
            let scenario = load(&scenario)?;
            let (config, devices) = instance(&scenario, seed)?;
            let m = num_scheduled
                .or(scenario.num_scheduled)
                .ok_or_else(|| {
                    CliError::usage("--num-scheduled required (scenario sets none)")
                })?;
            let ranked = schedule(&devices, &config, m).map_err(CliError::solver)?;
            let random = random_schedule(&devices, m, seed).map_err(CliError::solver)?;
            let report = json!({
                "num_scheduled": m,
                "selected": ranked.selected,
                "infeasible": ranked.infeasible,
                "random_baseline_selected": random.selected,
                "candidates": devices.iter().enumerate().map(|(k, d)| {
                    json!({
                        "id": d.id,
                        "metric_energy_j": ranked.metrics[k],
                        "upload_window_s": ranked.roots[k],
                    })
                }).collect::<Vec<_>>(),
            });
            emit_json(out.as_deref(), &report)
        }
        Command::Share {
            scenario,
            seed,
            slot_dt,
            out,
        } => {
            let scenario = load(&scenario)?;
            let (config, devices) = instance(&scenario, seed)?;
            let slot = slot_dt.unwrap_or_else(|| scenario.slot_duration(config.round_latency));
            let gain = sharing_gain(&devices, &config, slot).map_err(CliError::solver)?;
            if let Some(path) = out.as_deref() {
                let options = JointOptions {
                    tol: scenario.tolerances.joint_tol,
                    inner_tol: scenario.tolerances.inner_tol,
                    certify_tol: scenario.tolerances.certify_tol,
                    ..JointOptions::default()
                };
                let (allocation, _, _) =
                    algorithm2_solve(&devices, &config, &options).map_err(CliError::solver)?;
                let timeline = simulate_round(&allocation, &devices, &config, slot)
                    .map_err(CliError::solver)?;
                let csv = timeline_csv(&timeline).map_err(CliError::emit)?;
                write_output(Some(path), &csv)?;
            }
            let report = json!({
                "slot_duration_s": slot,
                "energy_without_sharing_j": gain.energy_without,
                "energy_with_sharing_j": gain.energy_with,
                "relative_gain": gain.relative_gain,
            });
            emit_json(None, &report)
        }
        Command::Sweep {
            scenario,
            out,
            format,
            assert_dominance: check,
        } => {
            let scenario = load(&scenario)?;
            let outcome = run_sweep(&scenario).map_err(CliError::solver)?;
            for record in &outcome.errors {
                eprintln!(
                    "{}",
                    json!({
                        "category": "row-error",
                        "sweep_value": record.sweep_value,
                        "scheme": record.scheme.name(),
                        "seed": record.seed,
                        "message": record.message,
                    })
                );
            }
            let artifact = match format {
                Format::Csv => sweep_csv(&outcome.rows).map_err(CliError::emit)?,
                Format::Svg => {
                    let axis = scenario
                        .sweep
                        .as_ref()
                        .map(|s| s.axis.name())
                        .unwrap_or("sweep value");
                    sweep_svg(&outcome.rows, axis).map_err(CliError::emit)?
                }
            };
            write_output(out.as_deref(), &artifact)?;
            if check {
                assert_dominance(&outcome.rows).map_err(CliError::dominance)?;
            }
            Ok(())
        }
        Command::Verify { seed } => {
            let report = run_verification(seed)
                .map_err(|e| CliError::verification(format!("battery aborted: {e}")))?;
            for entry in &report.entries {
                let verdict = if entry.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {} — {}", entry.name, entry.detail);
            }
            if report.all_passed() {
                println!("all {} checks passed", report.entries.len());
                Ok(())
            } else {
                Err(CliError::verification("one or more checks failed"))
            }
        }
        Command::Bound {
            num_rounds,
            num_devices,
            num_scheduled,
            variance,
            smoothness,
            init_dist_sq,
            out,
        } => {
            let input = ConvergenceBoundInput {
                num_rounds,
                num_devices,
                num_scheduled,
                variance_bound: variance,
                smoothness,
                init_dist_sq,
            };
            let bound = convergence_bound(&input).map_err(CliError::usage)?;
            let report = json!({
                "num_rounds": num_rounds,
                "num_devices": num_devices,
                "num_scheduled": num_scheduled,
                "learning_rate": bound.learning_rate,
                "bound_value": bound.bound_value,
            });
            emit_json(out.as_deref(), &report)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!(
                "{}",
                json!({ "category": err.category, "message": err.message })
            );
            ExitCode::from(err.code)
        }
    }
}
