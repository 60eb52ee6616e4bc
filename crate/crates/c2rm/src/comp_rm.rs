//! Computation-side resource management: the closed-form optimal CPU/GPU
//! workload split and deadline-matching speed scaling for each device.
//!
//! For a device with coefficients `C`, `G` and workload `W` finishing in
//! `t'` seconds, computation energy `(C W_cpu^3 + G W_gpu^3) / t'^2` is
//! minimised by
//!
//! ```text
//! W_cpu = sqrt(G) / (sqrt(C) + sqrt(G)) * W
//! W_gpu = sqrt(C) / (sqrt(C) + sqrt(G)) * W
//! ```
//!
//! with speeds `f = W_cpu / t'`, `f' = W_gpu / t'`. At this split the
//! marginal load energies equalise (`3 C W_cpu^2 = 3 G W_gpu^2`) and the
//! minimum energy collapses to `a W^3 / t'^2` with
//! `a = C G / (sqrt(C) + sqrt(G))^2`.
//!
//! ## Example
//!
//! ```
//! use c2rm::comp_rm::optimal_workload_split;
//!
//! // sqrt(C) = 2, sqrt(G) = 1: one third of the work goes to the CPU.
//! let (wc, wg) = optimal_workload_split(4.0, 1.0, 3.0).unwrap();
//! assert!((wc - 1.0).abs() < 1e-12 && (wg - 2.0).abs() < 1e-12);
//! ```

use crate::model::{
    comp_energy_time_rate, ComputationPlan, DeviceProfile, ModelError,
};

/// Energy-optimal workload split `(W_cpu, W_gpu)` for coefficients
/// `(cpu_coeff, gpu_coeff)` and total workload `total_workload >= 0`.
///
/// Both shares are strictly positive for a positive workload: however weak
/// one processor is, parking all work on the other is never optimal under
/// cubic power.
pub fn optimal_workload_split(
    cpu_coeff: f64,
    gpu_coeff: f64,
    total_workload: f64,
) -> Result<(f64, f64), ModelError> {
    if !(cpu_coeff > 0.0 && cpu_coeff.is_finite()) {
        return Err(ModelError::NonPositive {
            name: "cpu_coeff",
            value: cpu_coeff,
        });
    }
    if !(gpu_coeff > 0.0 && gpu_coeff.is_finite()) {
        return Err(ModelError::NonPositive {
            name: "gpu_coeff",
            value: gpu_coeff,
        });
    }
    if !(total_workload >= 0.0) || !total_workload.is_finite() {
        return Err(ModelError::Negative {
            name: "total_workload",
            value: total_workload,
        });
    }
    let s = cpu_coeff.sqrt() + gpu_coeff.sqrt();
    Ok((
        gpu_coeff.sqrt() / s * total_workload,
        cpu_coeff.sqrt() / s * total_workload,
    ))
}

/// Deadline-matching speeds `(load / budget)` for the given loads; a zero
/// load maps to speed zero. `compute_budget` must be positive when any load
/// is positive.
pub fn optimal_speeds(
    cpu_load: f64,
    gpu_load: f64,
    compute_budget: f64,
) -> Result<(f64, f64), ModelError> {
    if !(cpu_load >= 0.0) {
        return Err(ModelError::Negative {
            name: "cpu_load",
            value: cpu_load,
        });
    }
    if !(gpu_load >= 0.0) {
        return Err(ModelError::Negative {
            name: "gpu_load",
            value: gpu_load,
        });
    }
    if cpu_load + gpu_load > 0.0 && !(compute_budget > 0.0 && compute_budget.is_finite()) {
        return Err(ModelError::NonPositive {
            name: "compute_budget",
            value: compute_budget,
        });
    }
    let f = if cpu_load > 0.0 { cpu_load / compute_budget } else { 0.0 };
    let fp = if gpu_load > 0.0 { gpu_load / compute_budget } else { 0.0 };
    Ok((f, fp))
}

/// Solves the computation subproblem for every device: optimal split and
/// speeds against per-device compute budgets `T'_k`.
///
/// Returns the per-device [`ComputationPlan`]s and the marginal compute
/// energies `xi'_k = dE_cmp/dt'` at those budgets.
pub fn solve_computation_rm(
    devices: &[DeviceProfile],
    compute_budgets: &[f64],
    total_workload: f64,
) -> Result<(Vec<ComputationPlan>, Vec<f64>), ModelError> {
    if devices.len() != compute_budgets.len() {
        return Err(ModelError::Inconsistent {
            what: format!(
                "{} devices vs {} compute budgets",
                devices.len(),
                compute_budgets.len()
            ),
        });
    }
    let mut plans = Vec::with_capacity(devices.len());
    let mut xi_comp = Vec::with_capacity(devices.len());
    for (dev, &budget) in devices.iter().zip(compute_budgets) {
        let (wc, wg) = optimal_workload_split(dev.cpu_coeff, dev.gpu_coeff, total_workload)?;
        let plan = ComputationPlan::new(dev, wc, wg, budget)?;
        xi_comp.push(comp_energy_time_rate(
            dev.cpu_coeff,
            dev.gpu_coeff,
            wc,
            wg,
            budget,
        )?);
        plans.push(plan);
    }
    Ok((plans, xi_comp))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
