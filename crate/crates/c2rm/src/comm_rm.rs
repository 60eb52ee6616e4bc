//! Communication-side resource management: optimal FDMA bandwidth allocation
//! for fixed per-device transmit windows.
//!
//! At the optimum every device sees the same bandwidth price
//! `nu = -dE_cmm/dB`; inverting that condition with the principal Lambert W
//! branch gives the per-device sub-band width
//!
//! ```text
//! B_k(nu) = L ln 2 / ( T_k [ 1 + W0( (h_k^2 nu - T_k N0) / (T_k N0 e) ) ] )
//! ```
//!
//! [`algorithm1_solve`] finds the shared price by a normalise-and-requote
//! fixed point: evaluate `B_k(nu)`, rescale the widths onto the budget `B`,
//! re-quote each device's price at its rescaled width, then move `nu` to the
//! max or min quote. Which extreme is used is frozen up front from the sign
//! of `sum B_k(nu0) - B`, which makes the iterate sequence one-sided and
//! monotone; iteration stops when the relative spread of the quotes falls
//! below the tolerance.
//!
//! ## Example
//!
//! ```
//! use c2rm::comm_rm::algorithm1_solve;
//! use c2rm::model::{DeviceProfile, SystemConfig};
//!
//! let config = SystemConfig {
//!     total_bandwidth: 2e6, noise_psd: 1e-9, round_latency: 1.0,
//!     gradient_bits: 3.49e5, total_workload: 9.75, num_devices: 2,
//!     samples_per_device: None, flops_per_sample: None, rng_seed: 0,
//! };
//! let devices: Vec<DeviceProfile> = (0..2)
//!     .map(|id| DeviceProfile {
//!         id, cpu_coeff: 0.03, gpu_coeff: 0.005,
//!         channel_gain: (1e-3f64).sqrt(),
//!     })
//!     .collect();
//! let (bands, _nu, _trace) =
//!     algorithm1_solve(&devices, &[0.5, 0.5], &config, 1e-10, None).unwrap();
//! assert!((bands[0] - 1e6).abs() < 1.0); // identical devices split evenly
//! ```

use std::fmt;

use crate::model::{energy_bandwidth_rate, DeviceProfile, ModelError, SystemConfig};
use crate::numerics::{lambert_w0, relative_spread, NumericsError};

/// Default price iterate when no warm start is supplied.
pub const DEFAULT_NU_INIT: f64 = 1.0;

/// Iteration cap for [`algorithm1_solve`].
pub const MAX_ITERS: usize = 10_000;

// ---------------------------------------------------------------------------
// Errors and trace
// ---------------------------------------------------------------------------

/// Which side of the equilibrium price the frozen iteration approaches from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `nu0` overshot the equilibrium: iterates decrease towards it.
    Above,
    /// `nu0` undershot (or hit) the equilibrium: iterates increase.
    Below,
}

/// Convergence record of one [`algorithm1_solve`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct Algorithm1Trace {
    /// Completed fixed-point iterations.
    pub iterations: usize,
    /// Price iterates, starting with the initial value.
    pub nu_sequence: Vec<f64>,
    /// Approach side frozen from the initial bandwidth-sum sign.
    pub side: Side,
    /// Relative spread of the per-device quotes at the last iteration.
    pub final_spread: f64,
}

/// Failures of the bandwidth solver.
#[derive(Debug, Clone, PartialEq)]
pub enum CommError {
    Model(ModelError),
    Numerics(NumericsError),
    /// Iteration cap hit; the trace shows where the iterates stalled.
    NoConvergence {
        spread: f64,
        trace: Algorithm1Trace,
    },
}

impl fmt::Display for CommError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommError::Model(e) => write!(f, "{e}"),
            CommError::Numerics(e) => write!(f, "{e}"),
            CommError::NoConvergence { spread, trace } => write!(
                f,
                "bandwidth fixed point stalled after {} iterations (spread {spread:e})",
                trace.iterations
            ),
        }
    }
}

impl std::error::Error for CommError {}

impl From<ModelError> for CommError {
    fn from(e: ModelError) -> Self {
        CommError::Model(e)
    }
}

impl From<NumericsError> for CommError {
    fn from(e: NumericsError) -> Self {
        CommError::Numerics(e)
    }
}

// ---------------------------------------------------------------------------
// Closed-form bandwidth quote
// ---------------------------------------------------------------------------

/// Sub-band width at which a device's bandwidth price equals `nu`.
///
/// Decreasing in `nu` and decreasing in the channel power gain `h^2` at a
/// fixed price: the weaker the channel, the wider the sub-band a shared
/// price awards it. Requires `nu > 0`; the price of a finite width is
/// strictly positive, so a non-positive price has no finite preimage.
pub fn bandwidth_from_nu(
    nu: f64,
    device: &DeviceProfile,
    tx_budget: f64,
    config: &SystemConfig,
) -> Result<f64, CommError> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(CommError::Model(ModelError::NonPositive {
            name: "nu",
            value: nu,
        }));
    }
    if !(tx_budget > 0.0) || !tx_budget.is_finite() {
        return Err(CommError::Model(ModelError::NonPositive {
            name: "tx_budget",
            value: tx_budget,
        }));
    }
    device.validate()?;
    let t_n0 = tx_budget * config.noise_psd;
    let arg = (device.gain_sq() * nu - t_n0) / (t_n0 * std::f64::consts::E);
    let w = lambert_w0(arg)?;
    let denom = tx_budget * (1.0 + w);
    if !(denom > 0.0) {
        // nu so small that the quote diverges; treat as out of domain.
        return Err(CommError::Model(ModelError::NonPositive {
            name: "bandwidth_from_nu denominator",
            value: denom,
        }));
    }
    Ok(config.gradient_bits * std::f64::consts::LN_2 / denom)
}

/// Sign of `sum_k B_k(nu) - B`: `-1` when the quotes underfill the budget
/// (price above equilibrium), `+1` otherwise.
pub fn bandwidth_sum_sign(
    nu: f64,
    devices: &[DeviceProfile],
    tx_budgets: &[f64],
    config: &SystemConfig,
) -> Result<i8, CommError> {
    if devices.len() != tx_budgets.len() {
        return Err(CommError::Model(ModelError::Inconsistent {
            what: format!(
                "{} devices vs {} tx budgets",
                devices.len(),
                tx_budgets.len()
            ),
        }));
    }
    let mut sum = 0.0;
    for (dev, &t) in devices.iter().zip(tx_budgets) {
        sum += bandwidth_from_nu(nu, dev, t, config)?;
    }
    Ok(if sum - config.total_bandwidth < 0.0 { -1 } else { 1 })
}

// ---------------------------------------------------------------------------
// Fixed-point solver
// ---------------------------------------------------------------------------

/// Solves the bandwidth-allocation subproblem for fixed transmit windows.
///
/// Returns the per-device widths (summing to `config.total_bandwidth`
/// exactly up to rounding), the equilibrium price `nu`, and the iteration
/// trace. `tol` bounds the relative spread of the per-device price quotes at
/// exit; `nu_init` warm-starts the price (default [`DEFAULT_NU_INIT`]).
pub fn algorithm1_solve(
    devices: &[DeviceProfile],
    tx_budgets: &[f64],
    config: &SystemConfig,
    tol: f64,
    nu_init: Option<f64>,
) -> Result<(Vec<f64>, f64, Algorithm1Trace), CommError> {
    if devices.is_empty() {
        return Err(CommError::Model(ModelError::Inconsistent {
            what: "no devices".into(),
        }));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(CommError::Model(ModelError::NonPositive {
            name: "tol",
            value: tol,
        }));
    }
    let nu0 = nu_init.unwrap_or(DEFAULT_NU_INIT);
    if !(nu0 > 0.0) || !nu0.is_finite() {
        return Err(CommError::Model(ModelError::NonPositive {
            name: "nu_init",
            value: nu0,
        }));
    }

    // The approach side is frozen from the initial sign and reused for every
    // update; this is what makes the iterate sequence one-sided.
    let side = if bandwidth_sum_sign(nu0, devices, tx_budgets, config)? < 0 {
        Side::Above
    } else {
        Side::Below
    };

    let mut nu = nu0;
    let mut nu_sequence = vec![nu0];
    let mut quotes = vec![0.0f64; devices.len()];
    let mut widths = vec![0.0f64; devices.len()];
    for iteration in 1..=MAX_ITERS {
        // Phase 1: quote widths at the current price and rescale them onto
        // the budget.
        let mut sum = 0.0;
        for (w, (dev, &t)) in widths.iter_mut().zip(devices.iter().zip(tx_budgets)) {
            *w = bandwidth_from_nu(nu, dev, t, config)?;
            sum += *w;
        }
        if !sum.is_finite() {
            return Err(CommError::Model(ModelError::Inconsistent {
                what: format!("bandwidth quotes overflow at nu = {nu:e}"),
            }));
        }
        let scale = config.total_bandwidth / sum;
        for w in widths.iter_mut() {
            *w *= scale;
        }

        // Phase 2: re-quote each device's price at its rescaled width.
        for (q, (dev, (&t, &w))) in quotes
            .iter_mut()
            .zip(devices.iter().zip(tx_budgets.iter().zip(widths.iter())))
        {
            *q = -energy_bandwidth_rate(
                w,
                t,
                dev.channel_gain,
                config.noise_psd,
                config.gradient_bits,
            )?;
        }
        let spread = relative_spread(&quotes)?;
        nu = match side {
            Side::Above => quotes.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Side::Below => quotes.iter().cloned().fold(f64::INFINITY, f64::min),
        };
        nu_sequence.push(nu);
        if spread < tol {
            let trace = Algorithm1Trace {
                iterations: iteration,
                nu_sequence,
                side,
                final_spread: spread,
            };
            return Ok((widths, nu, trace));
        }
    }

    let spread = relative_spread(&quotes)?;
    Err(CommError::NoConvergence {
        spread,
        trace: Algorithm1Trace {
            iterations: MAX_ITERS,
            nu_sequence,
            side,
            final_spread: spread,
        },
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
