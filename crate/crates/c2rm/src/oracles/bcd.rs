//! Block-coordinate-descent baseline for the joint problem: a slow,
//! structurally different path to the same optimum as the master solver.
//!
//! The three blocks are each minimised exactly per sweep:
//! workload splits (closed form, time-independent), the bandwidth partition
//! (fixed point at the current time divisions), and the per-device time
//! division at fixed bandwidth (1-D monotone root of
//! `xi(B_k, T~) = xi'(T - T~)`, clamped to the feasible interval when the
//! root escapes it). Exact block minimisation makes the objective sequence
//! provably non-increasing; joint convexity takes it to the global optimum.

use super::OracleError;
use crate::comm_rm::algorithm1_solve;
use crate::comp_rm::optimal_workload_split;
use crate::model::{
    comm_energy, comm_energy_time_rate, comp_energy_given_time, comp_energy_time_rate,
    Allocation, CommunicationPlan, ComputationPlan, DeviceProfile, SystemConfig, TIME_MARGIN,
};
use crate::numerics::{bisect_monotone, RootBracket};

const MAX_SWEEPS: usize = 10_000;

/// Solves the joint problem by cyclic exact block minimisation and returns
/// the allocation together with the objective value after every sweep.
///
/// Stops when one sweep improves the total energy by less than
/// `tol * max(energy, 1)`.
pub fn bcd_solve_p4(
    devices: &[DeviceProfile],
    config: &SystemConfig,
    tol: f64,
) -> Result<(Allocation, Vec<f64>), OracleError> {
    config.validate()?;
    if !(tol > 0.0) {
        return Err(OracleError::Config {
            what: format!("tol = {tol}"),
        });
    }
    let t = config.round_latency;
    let (lo, hi) = (TIME_MARGIN * t, (1.0 - TIME_MARGIN) * t);
    let w = config.total_workload;

    // Workload splits are independent of everything else: solve once.
    let splits: Vec<(f64, f64)> = devices
        .iter()
        .map(|d| optimal_workload_split(d.cpu_coeff, d.gpu_coeff, w))
        .collect::<Result<_, _>>()?;

    let mut times = vec![0.5 * t; devices.len()];
    let mut widths = vec![config.total_bandwidth / devices.len() as f64; devices.len()];
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    let mut converged = false;

    for _sweep in 0..MAX_SWEEPS {
        // Bandwidth block: exact partition at the current time divisions.
        let (new_widths, _nu, _trace) = algorithm1_solve(devices, &times, config, 1e-12, None)?;
        widths = new_widths;

        // Time block: per-device 1-D root at fixed bandwidth.
        for (i, dev) in devices.iter().enumerate() {
            let (w_c, w_g) = splits[i];
            let g = |tt: f64| {
                let comm = comm_energy_time_rate(
                    widths[i],
                    tt,
                    dev.channel_gain,
                    config.noise_psd,
                    config.gradient_bits,
                )
                .unwrap_or(f64::NAN);
                let comp =
                    comp_energy_time_rate(dev.cpu_coeff, dev.gpu_coeff, w_c, w_g, t - tt)
                        .unwrap_or(f64::NAN);
                comm - comp
            };
            let (g_lo, g_hi) = (g(lo), g(hi));
            times[i] = if g_lo >= 0.0 {
                lo
            } else if g_hi <= 0.0 {
                hi
            } else {
                let bracket = RootBracket::new(lo, hi, g_lo, g_hi)?;
                bisect_monotone(g, bracket, 1e-13 * t)?.0
            };
        }

        let mut energy = 0.0;
        for (i, dev) in devices.iter().enumerate() {
            let (w_c, w_g) = splits[i];
            energy +=
                comp_energy_given_time(dev.cpu_coeff, dev.gpu_coeff, w_c, w_g, t - times[i])?;
            energy += comm_energy(
                widths[i],
                times[i],
                dev.channel_gain,
                config.noise_psd,
                config.gradient_bits,
            )?;
        }
        history.push(energy);
        if (prev - energy).abs() <= tol * energy.max(1.0) {
            converged = true;
            break;
        }
        prev = energy;
    }
    if !converged {
        let n = history.len();
        return Err(OracleError::NoConvergence {
            what: "block coordinate descent".into(),
            residual: if n >= 2 {
                (history[n - 2] - history[n - 1]).abs()
            } else {
                f64::INFINITY
            },
        });
    }

    let comp_plans: Vec<ComputationPlan> = devices
        .iter()
        .zip(&splits)
        .zip(&times)
        .map(|((dev, &(w_c, w_g)), &tt)| ComputationPlan::new(dev, w_c, w_g, t - tt))
        .collect::<Result<_, _>>()?;
    let comm_plans: Vec<CommunicationPlan> = devices
        .iter()
        .zip(&widths)
        .zip(&times)
        .map(|((dev, &b), &tt)| CommunicationPlan::new(dev, config, b, tt))
        .collect::<Result<_, _>>()?;
    let allocation = Allocation::new(comp_plans, comm_plans, config)?;
    Ok((allocation, history))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
