//! Joint computation-and-communication resource management: the master
//! solver that optimises per-device time divisions on top of the closed-form
//! computation subproblem and the bandwidth fixed point.
//!
//! For time divisions `T~_k` (upload windows; compute deadlines are
//! `T - T~_k`), the subproblems are solved exactly, and the master gradient
//! of the total energy reduces to the marginal-rate gap `xi_k - xi'_k` by
//! the envelope argument: re-optimising the bandwidth split contributes
//! nothing to first order because the widths always sum to the fixed budget.
//! [`algorithm2_solve`] therefore runs projected gradient descent
//!
//! ```text
//! T~_k  <-  clamp( T~_k - eta (xi_k - xi'_k),  [dT, (1-d)T] )
//! ```
//!
//! with a halving line search on the total energy, stopping when the scaled
//! residual `||xi' - xi||^2 / max|xi|^2` drops below the tolerance. Each
//! outer step warm-starts the bandwidth fixed point with the budget-weighted
//! price `nu0 = -(1/B) sum_k T~_k xi'_k`, which converges to the equilibrium
//! price as the residual vanishes.

use std::fmt;

use crate::comm_rm::{algorithm1_solve, CommError};
use crate::comp_rm::solve_computation_rm;
use crate::model::{
    comm_energy_time_rate, Allocation, CommunicationPlan, ComputationPlan, DeviceProfile,
    EquilibriumDiagnostics, ModelError, SystemConfig, TIME_MARGIN,
};

/// Tuning knobs for [`algorithm2_solve`]; `Default` matches the solver's
/// documented behaviour.
#[derive(Debug, Clone)]
pub struct JointOptions {
    /// Outer stop tolerance on `||xi' - xi||^2 / max|xi|^2`.
    pub tol: f64,
    /// Tolerance handed to the inner bandwidth fixed point.
    pub inner_tol: f64,
    /// Tolerance the returned diagnostics are evaluated at.
    pub certify_tol: f64,
    /// Cap on subproblem evaluations (accepted or rejected steps).
    pub max_outer: usize,
    /// Initial master step; `None` auto-scales it from the first gradient.
    pub step_init: Option<f64>,
    /// Initial time divisions; `None` starts from the uniform split `T/2`.
    pub time_init: Option<Vec<f64>>,
}

impl Default for JointOptions {
    fn default() -> Self {
        JointOptions {
            tol: 1e-10,
            inner_tol: 1e-12,
            certify_tol: 1e-4,
            max_outer: 20_000,
            step_init: None,
            time_init: None,
        }
    }
}

/// Convergence record of one [`algorithm2_solve`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSolveTrace {
    /// Accepted outer iterations (equals history length minus one).
    pub outer_iterations: usize,
    /// Scaled time residual at every accepted iterate.
    pub residual_time_history: Vec<f64>,
    /// Total energy at every accepted iterate; non-increasing up to a few
    /// ulps by the line-search acceptance rule.
    pub sum_energy_history: Vec<f64>,
    /// Warm-start price handed to the bandwidth fixed point per iterate.
    pub nu_warm_starts: Vec<f64>,
}

/// Failures of the joint solver.
#[derive(Debug, Clone)]
pub enum JointError {
    Model(ModelError),
    Comm(CommError),
    /// Evaluation budget exhausted or the line-search step collapsed before
    /// the residual target was met.
    NoConvergence {
        residual: f64,
        trace: JointSolveTrace,
    },
    /// An allocation handed to certification is infeasible.
    Infeasible { what: String },
}

impl fmt::Display for JointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JointError::Model(e) => write!(f, "{e}"),
            JointError::Comm(e) => write!(f, "{e}"),
            JointError::NoConvergence { residual, trace } => write!(
                f,
                "joint solver stalled after {} accepted steps (residual {residual:e})",
                trace.outer_iterations
            ),
            JointError::Infeasible { what } => write!(f, "infeasible allocation: {what}"),
        }
    }
}

impl std::error::Error for JointError {}

impl From<ModelError> for JointError {
    fn from(e: ModelError) -> Self {
        JointError::Model(e)
    }
}

impl From<CommError> for JointError {
    fn from(e: CommError) -> Self {
        JointError::Comm(e)
    }
}

// ---------------------------------------------------------------------------
// Warm start
// ---------------------------------------------------------------------------

/// Budget-weighted warm-start price for the bandwidth fixed point:
/// `nu0 = -(1/B) sum_k T~_k xi'_k`.
///
/// At a joint equilibrium the per-device identities `nu = -xi_k T~_k / B_k`
/// and `xi_k = xi'_k` make this exactly the equilibrium price; away from it
/// the expression still lands on the right scale, which is what a warm start
/// needs.
pub fn warm_start_nu(
    tx_budgets: &[f64],
    xi_comp: &[f64],
    total_bandwidth: f64,
) -> Result<f64, ModelError> {
    if tx_budgets.len() != xi_comp.len() {
        return Err(ModelError::Inconsistent {
            what: format!(
                "{} tx budgets vs {} compute marginals",
                tx_budgets.len(),
                xi_comp.len()
            ),
        });
    }
    if !(total_bandwidth > 0.0) || !total_bandwidth.is_finite() {
        return Err(ModelError::NonPositive {
            name: "total_bandwidth",
            value: total_bandwidth,
        });
    }
    let mut acc = 0.0;
    for (&t, &xc) in tx_budgets.iter().zip(xi_comp) {
        acc += t * xc;
    }
    Ok(-acc / total_bandwidth)
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

/// One fully-evaluated master iterate.
struct Iterate {
    time_division: Vec<f64>,
    comp_plans: Vec<ComputationPlan>,
    comm_plans: Vec<CommunicationPlan>,
    xi_comp: Vec<f64>,
    xi_comm: Vec<f64>,
    nu_warm: f64,
    energy: f64,
    residual: f64,
}

fn evaluate(
    devices: &[DeviceProfile],
    config: &SystemConfig,
    time_division: Vec<f64>,
    inner_tol: f64,
) -> Result<Iterate, JointError> {
    let t = config.round_latency;
    let compute_budgets: Vec<f64> = time_division.iter().map(|&tt| t - tt).collect();
    let (comp_plans, xi_comp) =
        solve_computation_rm(devices, &compute_budgets, config.total_workload)?;
    let nu_warm = warm_start_nu(&time_division, &xi_comp, config.total_bandwidth)?;
    let (widths, _nu_star, _trace) =
        algorithm1_solve(devices, &time_division, config, inner_tol, Some(nu_warm))?;

    let mut comm_plans = Vec::with_capacity(devices.len());
    let mut xi_comm = Vec::with_capacity(devices.len());
    let mut energy = 0.0;
    for ((dev, &width), (&tt, cp)) in devices
        .iter()
        .zip(&widths)
        .zip(time_division.iter().zip(&comp_plans))
    {
        let mp = CommunicationPlan::new(dev, config, width, tt)?;
        xi_comm.push(comm_energy_time_rate(
            width,
            tt,
            dev.channel_gain,
            config.noise_psd,
            config.gradient_bits,
        )?);
        energy += cp.energy + mp.energy;
        comm_plans.push(mp);
    }

    let scale = xi_comm
        .iter()
        .chain(xi_comp.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1e-300);
    let mut residual = 0.0;
    for (&xc, &xm) in xi_comp.iter().zip(&xi_comm) {
        let d = (xc - xm) / scale;
        residual += d * d;
    }
    Ok(Iterate {
        time_division,
        comp_plans,
        comm_plans,
        xi_comp,
        xi_comm,
        nu_warm,
        energy,
        residual,
    })
}

/// Solves the joint resource-management problem for one round.
///
/// Returns the optimal [`Allocation`], its [`EquilibriumDiagnostics`]
/// (evaluated at `opts.certify_tol`), and the outer-iteration trace.
pub fn algorithm2_solve(
    devices: &[DeviceProfile],
    config: &SystemConfig,
    opts: &JointOptions,
) -> Result<(Allocation, EquilibriumDiagnostics, JointSolveTrace), JointError> {
    config.validate()?;
    if devices.len() != config.num_devices {
        return Err(JointError::Model(ModelError::Inconsistent {
            what: format!(
                "{} devices vs num_devices {}",
                devices.len(),
                config.num_devices
            ),
        }));
    }
    if !(opts.tol > 0.0) || !(opts.inner_tol > 0.0) {
        return Err(JointError::Model(ModelError::NonPositive {
            name: "tol",
            value: opts.tol.min(opts.inner_tol),
        }));
    }
    let t = config.round_latency;
    let (lo, hi) = (TIME_MARGIN * t, (1.0 - TIME_MARGIN) * t);
    let init = match &opts.time_init {
        Some(v) => {
            if v.len() != devices.len() {
                return Err(JointError::Model(ModelError::Inconsistent {
                    what: format!("{} initial times vs {} devices", v.len(), devices.len()),
                }));
            }
            v.iter().map(|&x| x.clamp(lo, hi)).collect()
        }
        None => vec![0.5 * t; devices.len()],
    };

    let mut state = evaluate(devices, config, init, opts.inner_tol)?;
    let mut trace = JointSolveTrace {
        outer_iterations: 0,
        residual_time_history: vec![state.residual],
        sum_energy_history: vec![state.energy],
        nu_warm_starts: vec![state.nu_warm],
    };

    // Auto-scale the initial step so the first move shifts the worst device
    // by a few percent of the round.
    let grad_scale = state
        .xi_comm
        .iter()
        .zip(&state.xi_comp)
        .fold(0.0f64, |acc, (m, c)| acc.max((m - c).abs()))
        .max(1e-300);
    let mut eta = opts.step_init.unwrap_or(0.02 * t / grad_scale);
    let eta_floor = eta * 1e-15;

    let mut evals = 1usize;
    while state.residual > opts.tol {
        if evals >= opts.max_outer || eta < eta_floor {
            return Err(JointError::NoConvergence {
                residual: state.residual,
                trace,
            });
        }
        let candidate: Vec<f64> = state
            .time_division
            .iter()
            .zip(state.xi_comm.iter().zip(&state.xi_comp))
            .map(|(&tt, (m, c))| (tt - eta * (m - c)).clamp(lo, hi))
            .collect();
        let cand = evaluate(devices, config, candidate, opts.inner_tol)?;
        evals += 1;
        // Accept anything that does not increase the energy beyond a few
        // ulps; grow the step only on strict decrease.
        if cand.energy <= state.energy * (1.0 + 1e-13) {
            if cand.energy < state.energy {
                eta *= 1.25;
            }
            state = cand;
            trace.outer_iterations += 1;
            trace.residual_time_history.push(state.residual);
            trace.sum_energy_history.push(state.energy);
            trace.nu_warm_starts.push(state.nu_warm);
        } else {
            eta *= 0.5;
        }
    }

    let allocation = Allocation::new(state.comp_plans, state.comm_plans, config)?;
    let diagnostics =
        EquilibriumDiagnostics::evaluate(&allocation, devices, config, opts.certify_tol)?;
    Ok((allocation, diagnostics, trace))
}

/// Re-validates an allocation and evaluates its equilibrium residuals at
/// `tol`.
///
/// Feasibility violations (latency, bandwidth, or workload budgets) come
/// back as [`JointError::Infeasible`]; equilibrium quality is reported
/// through the returned diagnostics' `pass` flag, not as an error.
pub fn certify_equilibrium(
    allocation: &Allocation,
    devices: &[DeviceProfile],
    config: &SystemConfig,
    tol: f64,
) -> Result<EquilibriumDiagnostics, JointError> {
    Allocation::new(
        allocation.computation.clone(),
        allocation.communication.clone(),
        config,
    )
    .map_err(|e| JointError::Infeasible { what: e.to_string() })?;
    EquilibriumDiagnostics::evaluate(allocation, devices, config, tol).map_err(JointError::Model)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn config(k: usize, bandwidth: f64, latency: f64) -> SystemConfig {
        SystemConfig {
            total_bandwidth: bandwidth,
            noise_psd: 1e-9,
            round_latency: latency,
            gradient_bits: 3.49e5,
            total_workload: 9.75,
            num_devices: k,
            samples_per_device: None,
            flops_per_sample: None,
            rng_seed: 0,
        }
    }

    fn device(id: usize, c: f64, g: f64, h_sq: f64) -> DeviceProfile {
        DeviceProfile {
            id,
            cpu_coeff: c,
            gpu_coeff: g,
            channel_gain: h_sq.sqrt(),
        }
    }

    fn random_devices(rng: &mut ChaCha12Rng, k: usize) -> Vec<DeviceProfile> {
        (0..k)
            .map(|id| {
                device(
                    id,
                    rng.random_range(0.02..0.04),
                    rng.random_range(0.001..0.01),
                    10f64.powf(rng.random_range(-3.7..-2.3)),
                )
            })
            .collect()
    }

    #[test]
    fn identical_devices_get_identical_allocations() {
        let cfg = config(4, 4e6, 1.0);
        let devs: Vec<_> = (0..4).map(|i| device(i, 0.03, 0.005, 1e-3)).collect();
        let (alloc, diag, _) = algorithm2_solve(&devs, &cfg, &JointOptions::default()).unwrap();
        for mp in &alloc.communication[1..] {
            assert!((mp.bandwidth - alloc.communication[0].bandwidth).abs() <= 1e-6);
            assert!((mp.tx_time - alloc.communication[0].tx_time).abs() <= 1e-9);
        }
        assert!(diag.pass, "diagnostics: {diag:?}");
        assert!(diag.residual_time <= 1e-4);
        assert!(diag.residual_nu <= 1e-4);
    }

    #[test]
    fn converged_run_is_an_equilibrium() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let cfg = config(6, 5e6, 1.0);
        let devs = random_devices(&mut rng, 6);
        let (alloc, diag, trace) =
            algorithm2_solve(&devs, &cfg, &JointOptions::default()).unwrap();
        assert!(diag.pass, "diagnostics: {diag:?}");
        // Upload windows partition the round against the compute deadlines.
        for (cp, mp) in alloc.computation.iter().zip(&alloc.communication) {
            assert!((cp.compute_time + mp.tx_time - 1.0).abs() <= 1e-12);
        }
        // Full budget used.
        let bw: f64 = alloc.communication.iter().map(|m| m.bandwidth).sum();
        assert!((bw - 5e6).abs() <= 1e-9 * 5e6);
        // Residual history ends below tolerance.
        assert!(*trace.residual_time_history.last().unwrap() <= 1e-10);
    }

    #[test]
    fn energy_history_is_monotone() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let cfg = config(5, 5e6, 1.0);
        let devs = random_devices(&mut rng, 5);
        let (_, _, trace) = algorithm2_solve(&devs, &cfg, &JointOptions::default()).unwrap();
        for w in trace.sum_energy_history.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12),
                "energy increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn joint_no_worse_than_uniform_time_division() {
        // The first iterate IS the uniform split with both subproblems
        // solved, so convergence must end at or below it.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..5 {
            let k = rng.random_range(2..6);
            let cfg = config(k, 5e6, 1.0);
            let devs = random_devices(&mut rng, k);
            let (alloc, _, trace) =
                algorithm2_solve(&devs, &cfg, &JointOptions::default()).unwrap();
            assert!(alloc.sum_energy <= trace.sum_energy_history[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn longer_round_never_costs_more() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let devs = random_devices(&mut rng, 4);
        let mut last = f64::INFINITY;
        for &t in &[0.6, 1.0, 1.5, 2.0] {
            let cfg = config(4, 5e6, t);
            let (alloc, _, _) = algorithm2_solve(&devs, &cfg, &JointOptions::default()).unwrap();
            assert!(alloc.sum_energy < last);
            last = alloc.sum_energy;
        }
    }

    #[test]
    fn warm_start_fixed_point_at_convergence() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let cfg = config(5, 5e6, 1.0);
        let devs = random_devices(&mut rng, 5);
        let (alloc, diag, trace) =
            algorithm2_solve(&devs, &cfg, &JointOptions::default()).unwrap();
        let xi_comp: Vec<f64> = diag.xi_comp.clone();
        let nu0 = warm_start_nu(&alloc.time_division, &xi_comp, cfg.total_bandwidth).unwrap();
        let nu_star = diag.nu[0];
        assert!(
            (nu0 - nu_star).abs() <= 1e-4 * nu_star,
            "warm start {nu0} vs equilibrium {nu_star}"
        );
        // The recorded warm starts converge to the same value.
        let last_warm = *trace.nu_warm_starts.last().unwrap();
        assert!((last_warm - nu_star).abs() <= 1e-4 * nu_star);
    }

    #[test]
    fn warm_start_scales_linearly() {
        let nu = warm_start_nu(&[0.5, 0.5], &[-10.0, -30.0], 1e6).unwrap();
        assert!((nu - 2e-5).abs() <= 1e-18);
        let nu2 = warm_start_nu(&[0.5, 0.5], &[-20.0, -60.0], 1e6).unwrap();
        assert!((nu2 - 2.0 * nu).abs() <= 1e-18);
        assert!(warm_start_nu(&[0.5], &[-1.0, -2.0], 1e6).is_err());
    }

    #[test]
    fn certify_accepts_solution_and_rejects_perturbation() {
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        let cfg = config(3, 3e6, 1.0);
        let devs = random_devices(&mut rng, 3);
        let (alloc, _, _) = algorithm2_solve(&devs, &cfg, &JointOptions::default()).unwrap();
        let diag = certify_equilibrium(&alloc, &devs, &cfg, 1e-4).unwrap();
        assert!(diag.pass);

        // Shuffle bandwidth between two devices: prices split apart.
        let mut bad = alloc.clone();
        let shift = 0.2 * bad.communication[0].bandwidth;
        let b0 = bad.communication[0].bandwidth - shift;
        let b1 = bad.communication[1].bandwidth + shift;
        bad.communication[0] =
            CommunicationPlan::new(&devs[0], &cfg, b0, bad.communication[0].tx_time).unwrap();
        bad.communication[1] =
            CommunicationPlan::new(&devs[1], &cfg, b1, bad.communication[1].tx_time).unwrap();
        let diag = certify_equilibrium(&bad, &devs, &cfg, 1e-4).unwrap();
        assert!(!diag.pass);
        assert!(diag.residual_nu > 1e-4);
    }

    #[test]
    fn certify_flags_infeasible_budget() {
        let cfg = config(2, 2e6, 1.0);
        let devs = vec![device(0, 0.03, 0.005, 1e-3), device(1, 0.03, 0.005, 1e-3)];
        let (alloc, _, _) = algorithm2_solve(&devs, &cfg, &JointOptions::default()).unwrap();
        let mut tight = cfg.clone();
        tight.total_bandwidth = 1e6; // the solution no longer fits
        assert!(matches!(
            certify_equilibrium(&alloc, &devs, &tight, 1e-4),
            Err(JointError::Infeasible { .. })
        ));
    }

    #[test]
    fn deterministic_across_runs() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let cfg = config(4, 5e6, 1.0);
        let devs = random_devices(&mut rng, 4);
        let (a1, _, _) = algorithm2_solve(&devs, &cfg, &JointOptions::default()).unwrap();
        let (a2, _, _) = algorithm2_solve(&devs, &cfg, &JointOptions::default()).unwrap();
        assert_eq!(a1.sum_energy.to_bits(), a2.sum_energy.to_bits());
        for (x, y) in a1.communication.iter().zip(&a2.communication) {
            assert_eq!(x.bandwidth.to_bits(), y.bandwidth.to_bits());
        }
    }
}
