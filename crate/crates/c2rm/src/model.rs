//! System model for one federated-edge-learning round: configuration and
//! per-device types, plus the closed-form energy and marginal-rate
//! expressions every solver in this crate builds on.
//!
//! A round lasts at most `T = round_latency` seconds. Each device splits its
//! local workload `W` between a CPU and a GPU, runs both at the constant
//! speeds that just meet its compute deadline `t'`, then uploads `L`
//! gradient bits over an FDMA sub-band of width `B_k` for `t` seconds.
//!
//! With cubic dynamic-voltage-frequency-scaling power (`P = C f^3` on the
//! CPU, `P = G f'^3` on the GPU):
//!
//! * computation energy   `E_cmp = C W_cpu f^2 + G W_gpu f'^2`
//! * upload energy        `E_cmm = B t N0 / h^2 (2^(L / (B t)) - 1)`
//!
//! where the transmit power is expressed as a spectral density (W/Hz), so
//! energy is `bandwidth * psd * time`. The marginal rates `nu = -dE/dB`,
//! `xi = dE_cmm/dt`, `xi' = dE_cmp/dt'` and the curvature `phi = d2E/dB2`
//! drive the equilibrium solvers in the `comm_rm` and `joint_rm` modules.
//!
//! Units are SI throughout: Hz, s, W, J, bit, and a workload unit (per-device
//! work `W`, speeds in work-units per second). The coefficients `C`, `G`
//! carry W/(unit/s)^3 and absorb any cycles-per-operation conversion, so the
//! formulas below are unit-consistent for whatever workload unit a scenario
//! adopts.

use std::fmt;

use crate::numerics::relative_spread;

/// Margin keeping time splits away from the interval ends: splits live in
/// `[TIME_MARGIN * T, (1 - TIME_MARGIN) * T]`.
pub const TIME_MARGIN: f64 = 1e-4;

/// Relative slack allowed on the bandwidth budget when validating an
/// [`Allocation`].
pub const BANDWIDTH_SLACK: f64 = 1e-9;

const LN_2: f64 = std::f64::consts::LN_2;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Domain and consistency failures of the model layer.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A quantity that must be strictly positive was zero, negative, NaN, or
    /// (where finiteness is required) infinite.
    NonPositive { name: &'static str, value: f64 },
    /// A quantity that must be non-negative was negative or NaN.
    Negative { name: &'static str, value: f64 },
    /// Cross-field consistency failure (budget overruns, loads that do not
    /// sum to the workload, mismatched lengths, ...).
    Inconsistent { what: String },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::NonPositive { name, value } => {
                write!(f, "{name} must be strictly positive, got {value}")
            }
            ModelError::Negative { name, value } => {
                write!(f, "{name} must be non-negative, got {value}")
            }
            ModelError::Inconsistent { what } => write!(f, "inconsistent input: {what}"),
        }
    }
}

impl std::error::Error for ModelError {}

fn require_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

fn require_non_negative(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value >= 0.0 && !value.is_nan() {
        Ok(())
    } else {
        Err(ModelError::Negative { name, value })
    }
}

// ---------------------------------------------------------------------------
// Configuration and device types
// ---------------------------------------------------------------------------

/// Round-level system parameters shared by every device.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Total uplink bandwidth `B` shared by the scheduled devices (Hz).
    pub total_bandwidth: f64,
    /// One-sided noise power spectral density `N0` (W/Hz).
    pub noise_psd: f64,
    /// Round latency budget `T` (s).
    pub round_latency: f64,
    /// Gradient upload size `L` (bit).
    pub gradient_bits: f64,
    /// Per-device workload `W` for one local update (workload units).
    pub total_workload: f64,
    /// Number of devices `K` an allocation covers.
    pub num_devices: usize,
    /// Optional mini-batch size `D`; with `flops_per_sample` set,
    /// `total_workload` must equal their product.
    pub samples_per_device: Option<f64>,
    /// Optional per-sample work; see `samples_per_device`.
    pub flops_per_sample: Option<f64>,
    /// Seed for channel draws in scenario-driven experiments.
    pub rng_seed: u64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        require_positive("total_bandwidth", self.total_bandwidth)?;
        require_positive("noise_psd", self.noise_psd)?;
        require_positive("round_latency", self.round_latency)?;
        require_positive("gradient_bits", self.gradient_bits)?;
        require_positive("total_workload", self.total_workload)?;
        if self.num_devices == 0 {
            return Err(ModelError::NonPositive {
                name: "num_devices",
                value: 0.0,
            });
        }
        if let (Some(d), Some(per)) = (self.samples_per_device, self.flops_per_sample) {
            require_positive("samples_per_device", d)?;
            require_positive("flops_per_sample", per)?;
            let product = d * per;
            if (product - self.total_workload).abs() > 1e-9 * self.total_workload {
                return Err(ModelError::Inconsistent {
                    what: format!(
                        "total_workload {} != samples_per_device * flops_per_sample = {}",
                        self.total_workload, product
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Per-device hardware and channel description.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub id: usize,
    /// CPU energy coefficient `C` (W per (unit/s)^3).
    pub cpu_coeff: f64,
    /// GPU energy coefficient `G` (W per (unit/s)^3).
    pub gpu_coeff: f64,
    /// Channel amplitude `h`; the formulas use the power gain `h^2`.
    pub channel_gain: f64,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<(), ModelError> {
        require_positive("cpu_coeff", self.cpu_coeff)?;
        require_positive("gpu_coeff", self.gpu_coeff)?;
        require_positive("channel_gain", self.channel_gain)?;
        Ok(())
    }

    /// Channel power gain `h^2`.
    pub fn gain_sq(&self) -> f64 {
        self.channel_gain * self.channel_gain
    }

    /// Composite coefficient `a = C G / (sqrt(C) + sqrt(G))^2`, the energy
    /// prefactor at the optimal CPU/GPU workload split:
    /// `E_cmp = a W^3 / t'^2`.
    pub fn composite_coeff(&self) -> f64 {
        let s = self.cpu_coeff.sqrt() + self.gpu_coeff.sqrt();
        self.cpu_coeff * self.gpu_coeff / (s * s)
    }
}

// ---------------------------------------------------------------------------
// Plans and allocations
// ---------------------------------------------------------------------------

/// One device's computation-side decision: loads, speeds, deadline, energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputationPlan {
    /// CPU share of the workload (units).
    pub cpu_load: f64,
    /// GPU share of the workload (units).
    pub gpu_load: f64,
    /// CPU speed `f = cpu_load / compute_time` (units/s); 0 for a zero load.
    pub cpu_speed: f64,
    /// GPU speed `f' = gpu_load / compute_time` (units/s); 0 for a zero load.
    pub gpu_speed: f64,
    /// Compute deadline `t'` the speeds are sized for (s).
    pub compute_time: f64,
    /// Computation energy (J).
    pub energy: f64,
}

impl ComputationPlan {
    /// Builds the plan that finishes `cpu_load + gpu_load` in exactly
    /// `compute_time`, choosing speeds `load / time` (a zero load runs at
    /// speed zero) and the matching energy.
    pub fn new(
        device: &DeviceProfile,
        cpu_load: f64,
        gpu_load: f64,
        compute_time: f64,
    ) -> Result<Self, ModelError> {
        device.validate()?;
        require_non_negative("cpu_load", cpu_load)?;
        require_non_negative("gpu_load", gpu_load)?;
        if cpu_load + gpu_load > 0.0 {
            require_positive("compute_time", compute_time)?;
        } else {
            require_non_negative("compute_time", compute_time)?;
        }
        let cpu_speed = if cpu_load > 0.0 { cpu_load / compute_time } else { 0.0 };
        let gpu_speed = if gpu_load > 0.0 { gpu_load / compute_time } else { 0.0 };
        let energy = comp_energy(
            device.cpu_coeff,
            device.gpu_coeff,
            cpu_load,
            gpu_load,
            cpu_speed,
            gpu_speed,
        )?;
        Ok(ComputationPlan {
            cpu_load,
            gpu_load,
            cpu_speed,
            gpu_speed,
            compute_time,
            energy,
        })
    }
}

/// One device's upload-side decision: sub-band, time, power density, energy.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunicationPlan {
    /// Sub-band width `B_k` (Hz).
    pub bandwidth: f64,
    /// Transmit window `t` (s).
    pub tx_time: f64,
    /// Transmit power spectral density (W/Hz) that delivers the gradient in
    /// exactly `tx_time`.
    pub tx_psd: f64,
    /// Upload energy `bandwidth * tx_psd * tx_time` (J).
    pub energy: f64,
}

impl CommunicationPlan {
    /// Builds the plan that uploads `config.gradient_bits` over `bandwidth`
    /// in exactly `tx_time`.
    pub fn new(
        device: &DeviceProfile,
        config: &SystemConfig,
        bandwidth: f64,
        tx_time: f64,
    ) -> Result<Self, ModelError> {
        let tx_psd = required_tx_psd(
            bandwidth,
            tx_time,
            device.channel_gain,
            config.noise_psd,
            config.gradient_bits,
        )?;
        Ok(CommunicationPlan {
            bandwidth,
            tx_time,
            tx_psd,
            energy: bandwidth * tx_psd * tx_time,
        })
    }
}

/// A complete per-round decision for a set of devices.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub computation: Vec<ComputationPlan>,
    pub communication: Vec<CommunicationPlan>,
    /// Upload windows `T~_k = communication[k].tx_time` (s), kept as an
    /// explicit vector because the solvers iterate on it.
    pub time_division: Vec<f64>,
    /// Total energy over all devices (J).
    pub sum_energy: f64,
}

impl Allocation {
    /// Assembles and validates an allocation: per-device rounds must fit the
    /// latency budget, sub-bands must fit the shared bandwidth (within
    /// [`BANDWIDTH_SLACK`]), and loads must sum to the per-device workload.
    pub fn new(
        computation: Vec<ComputationPlan>,
        communication: Vec<CommunicationPlan>,
        config: &SystemConfig,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        if computation.len() != communication.len() || computation.len() != config.num_devices {
            return Err(ModelError::Inconsistent {
                what: format!(
                    "plan counts ({}, {}) do not match num_devices {}",
                    computation.len(),
                    communication.len(),
                    config.num_devices
                ),
            });
        }
        let t = config.round_latency;
        let mut band_sum = 0.0;
        let mut sum_energy = 0.0;
        for (k, (cp, mp)) in computation.iter().zip(&communication).enumerate() {
            if cp.compute_time + mp.tx_time > t * (1.0 + 1e-12) {
                return Err(ModelError::Inconsistent {
                    what: format!(
                        "device {k}: compute_time + tx_time = {} exceeds round latency {t}",
                        cp.compute_time + mp.tx_time
                    ),
                });
            }
            let load = cp.cpu_load + cp.gpu_load;
            if (load - config.total_workload).abs() > 1e-9 * config.total_workload {
                return Err(ModelError::Inconsistent {
                    what: format!(
                        "device {k}: loads sum to {load}, workload is {}",
                        config.total_workload
                    ),
                });
            }
            band_sum += mp.bandwidth;
            sum_energy += cp.energy + mp.energy;
        }
        if band_sum > config.total_bandwidth * (1.0 + BANDWIDTH_SLACK) {
            return Err(ModelError::Inconsistent {
                what: format!(
                    "bandwidth sum {band_sum} exceeds budget {}",
                    config.total_bandwidth
                ),
            });
        }
        let time_division = communication.iter().map(|m| m.tx_time).collect();
        Ok(Allocation {
            computation,
            communication,
            time_division,
            sum_energy,
        })
    }

    /// Total computation energy (J).
    pub fn comp_energy(&self) -> f64 {
        self.computation.iter().map(|p| p.energy).sum()
    }

    /// Total upload energy (J).
    pub fn comm_energy(&self) -> f64 {
        self.communication.iter().map(|p| p.energy).sum()
    }
}

// ---------------------------------------------------------------------------
// Equilibrium diagnostics
// ---------------------------------------------------------------------------

/// Marginal rates and scaled equilibrium residuals of an [`Allocation`].
///
/// An allocation is a joint optimum exactly when
/// (1) per-device time splits equalise `xi' = xi`,
/// (2) all devices share one bandwidth price `nu`,
/// (3) each device's workload split equalises the marginal load energies
///     `3 C W_cpu^2 = 3 G W_gpu^2`, and
/// (4) each device's speeds equalise the marginal speed energies
///     `2 C W_cpu f = 2 G W_gpu f'`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumDiagnostics {
    /// Per-device bandwidth price `nu_k = -dE_cmm/dB` (J/Hz).
    pub nu: Vec<f64>,
    /// Per-device upload marginal `xi_k = dE_cmm/dt` (J/s, negative).
    pub xi_comm: Vec<f64>,
    /// Per-device compute marginal `xi'_k = dE_cmp/dt'` (J/s, negative).
    pub xi_comp: Vec<f64>,
    /// Per-device curvature `phi_k = d2E_cmm/dB2` (J/Hz^2, positive).
    pub phi: Vec<f64>,
    /// `max_k |xi'_k - xi_k|` over the magnitude of the largest marginal.
    pub residual_time: f64,
    /// Relative spread of `{nu_k}`.
    pub residual_nu: f64,
    /// Worst per-device relative gap in the workload-split marginal balance
    /// `3 C W_c^2 = 3 G W_g^2`.
    pub residual_workload: f64,
    /// Worst per-device relative gap in the speed marginal balance
    /// `2 C W_c f = 2 G W_g f'`.
    pub residual_speed: f64,
    /// True iff every residual is within the tolerance it was checked at.
    pub pass: bool,
}

impl EquilibriumDiagnostics {
    /// Computes all four residual families for `allocation` and compares them
    /// against `tol`.
    pub fn evaluate(
        allocation: &Allocation,
        devices: &[DeviceProfile],
        config: &SystemConfig,
        tol: f64,
    ) -> Result<Self, ModelError> {
        require_positive("tol", tol)?;
        if devices.len() != allocation.computation.len() {
            return Err(ModelError::Inconsistent {
                what: format!(
                    "{} devices vs {} plans",
                    devices.len(),
                    allocation.computation.len()
                ),
            });
        }
        let mut nu = Vec::with_capacity(devices.len());
        let mut xi_comm = Vec::with_capacity(devices.len());
        let mut xi_comp = Vec::with_capacity(devices.len());
        let mut phi = Vec::with_capacity(devices.len());
        let mut residual_workload = 0.0f64;
        let mut residual_speed = 0.0f64;
        for (dev, (cp, mp)) in devices
            .iter()
            .zip(allocation.computation.iter().zip(&allocation.communication))
        {
            let (xc, xm) = energy_time_rates(cp, mp, dev, config)?;
            xi_comp.push(xc);
            xi_comm.push(xm);
            nu.push(-energy_bandwidth_rate(
                mp.bandwidth,
                mp.tx_time,
                dev.channel_gain,
                config.noise_psd,
                config.gradient_bits,
            )?);
            phi.push(acceleration_rate(
                mp.bandwidth,
                mp.tx_time,
                dev.channel_gain,
                config.noise_psd,
                config.gradient_bits,
            )?);

            let load_cpu = 3.0 * dev.cpu_coeff * cp.cpu_load * cp.cpu_load;
            let load_gpu = 3.0 * dev.gpu_coeff * cp.gpu_load * cp.gpu_load;
            let load_scale = load_cpu.max(load_gpu);
            if load_scale > 0.0 {
                residual_workload = residual_workload.max((load_cpu - load_gpu).abs() / load_scale);
            }
            let speed_cpu = 2.0 * dev.cpu_coeff * cp.cpu_load * cp.cpu_speed;
            let speed_gpu = 2.0 * dev.gpu_coeff * cp.gpu_load * cp.gpu_speed;
            let speed_scale = speed_cpu.max(speed_gpu);
            if speed_scale > 0.0 {
                residual_speed = residual_speed.max((speed_cpu - speed_gpu).abs() / speed_scale);
            }
        }
        let xi_scale = xi_comm
            .iter()
            .chain(xi_comp.iter())
            .fold(0.0f64, |acc, x| acc.max(x.abs()))
            .max(1e-300);
        let residual_time = xi_comp
            .iter()
            .zip(&xi_comm)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
            / xi_scale;
        let residual_nu = relative_spread(&nu).map_err(|e| ModelError::Inconsistent {
            what: format!("nu spread: {e}"),
        })?;
        let pass = residual_time <= tol
            && residual_nu <= tol
            && residual_workload <= tol
            && residual_speed <= tol;
        Ok(EquilibriumDiagnostics {
            nu,
            xi_comm,
            xi_comp,
            phi,
            residual_time,
            residual_nu,
            residual_workload,
            residual_speed,
            pass,
        })
    }
}

// ---------------------------------------------------------------------------
// Energy formulas
// ---------------------------------------------------------------------------

/// Computation energy `C W_cpu f^2 + G W_gpu f'^2` (J).
///
/// A zero load contributes zero energy and permits a zero speed; a positive
/// load requires a positive speed.
pub fn comp_energy(
    cpu_coeff: f64,
    gpu_coeff: f64,
    cpu_load: f64,
    gpu_load: f64,
    cpu_speed: f64,
    gpu_speed: f64,
) -> Result<f64, ModelError> {
    require_positive("cpu_coeff", cpu_coeff)?;
    require_positive("gpu_coeff", gpu_coeff)?;
    require_non_negative("cpu_load", cpu_load)?;
    require_non_negative("gpu_load", gpu_load)?;
    require_non_negative("cpu_speed", cpu_speed)?;
    require_non_negative("gpu_speed", gpu_speed)?;
    if cpu_load > 0.0 && cpu_speed == 0.0 {
        return Err(ModelError::NonPositive {
            name: "cpu_speed",
            value: cpu_speed,
        });
    }
    if gpu_load > 0.0 && gpu_speed == 0.0 {
        return Err(ModelError::NonPositive {
            name: "gpu_speed",
            value: gpu_speed,
        });
    }
    let cpu = if cpu_load > 0.0 {
        cpu_coeff * cpu_load * cpu_speed * cpu_speed
    } else {
        0.0
    };
    let gpu = if gpu_load > 0.0 {
        gpu_coeff * gpu_load * gpu_speed * gpu_speed
    } else {
        0.0
    };
    Ok(cpu + gpu)
}

/// Computation energy at deadline-matching speeds:
/// `(C W_cpu^3 + G W_gpu^3) / t'^2` (J). Zero loads give zero energy.
pub fn comp_energy_given_time(
    cpu_coeff: f64,
    gpu_coeff: f64,
    cpu_load: f64,
    gpu_load: f64,
    compute_time: f64,
) -> Result<f64, ModelError> {
    require_positive("cpu_coeff", cpu_coeff)?;
    require_positive("gpu_coeff", gpu_coeff)?;
    require_non_negative("cpu_load", cpu_load)?;
    require_non_negative("gpu_load", gpu_load)?;
    if cpu_load + gpu_load == 0.0 {
        require_non_negative("compute_time", compute_time)?;
        return Ok(0.0);
    }
    require_positive("compute_time", compute_time)?;
    let num = cpu_coeff * cpu_load.powi(3) + gpu_coeff * gpu_load.powi(3);
    Ok(num / (compute_time * compute_time))
}

/// Transmit power spectral density (W/Hz) that uploads `bits` over
/// `bandwidth` in exactly `tx_time`:
/// `psd = (2^(bits / (bandwidth * tx_time)) - 1) * noise_psd / h^2`.
///
/// Inverts the Shannon rate `r = B log2(1 + psd h^2 / N0)` at `r = bits / t`.
/// `bits = 0` needs no power. The value saturates to `inf` when the exponent
/// overflows `f64` (extremely small time-bandwidth products).
pub fn required_tx_psd(
    bandwidth: f64,
    tx_time: f64,
    channel_gain: f64,
    noise_psd: f64,
    bits: f64,
) -> Result<f64, ModelError> {
    require_positive("bandwidth", bandwidth)?;
    require_positive("tx_time", tx_time)?;
    require_positive("channel_gain", channel_gain)?;
    require_positive("noise_psd", noise_psd)?;
    require_non_negative("bits", bits)?;
    if bits == 0.0 {
        return Ok(0.0);
    }
    let u = bits / (bandwidth * tx_time);
    Ok((u.exp2() - 1.0) * noise_psd / (channel_gain * channel_gain))
}

/// Upload energy `bandwidth * required_tx_psd * tx_time` (J); equals
/// `B t N0 / h^2 (2^(L / (B t)) - 1)`.
pub fn comm_energy(
    bandwidth: f64,
    tx_time: f64,
    channel_gain: f64,
    noise_psd: f64,
    bits: f64,
) -> Result<f64, ModelError> {
    let psd = required_tx_psd(bandwidth, tx_time, channel_gain, noise_psd, bits)?;
    Ok(bandwidth * psd * tx_time)
}

/// Marginal upload energy in bandwidth,
/// `dE_cmm/dB = t N0 / h^2 (2^u (1 - u ln 2) - 1)` with `u = L / (B t)`.
///
/// Strictly negative for `bits > 0`: widening a sub-band always saves energy.
/// The negated value is the bandwidth price `nu`.
pub fn energy_bandwidth_rate(
    bandwidth: f64,
    tx_time: f64,
    channel_gain: f64,
    noise_psd: f64,
    bits: f64,
) -> Result<f64, ModelError> {
    require_positive("bandwidth", bandwidth)?;
    require_positive("tx_time", tx_time)?;
    require_positive("channel_gain", channel_gain)?;
    require_positive("noise_psd", noise_psd)?;
    require_non_negative("bits", bits)?;
    if bits == 0.0 {
        return Ok(0.0);
    }
    let u = bits / (bandwidth * tx_time);
    // Factored so that an overflowing 2^u yields -inf instead of inf - inf.
    let bracket = u.exp2() * (1.0 - u * LN_2) - 1.0;
    Ok(tx_time * noise_psd / (channel_gain * channel_gain) * bracket)
}

/// Marginal upload energy in transmit time,
/// `xi = dE_cmm/dt = B N0 / h^2 (2^u (1 - u ln 2) - 1)` (negative).
pub fn comm_energy_time_rate(
    bandwidth: f64,
    tx_time: f64,
    channel_gain: f64,
    noise_psd: f64,
    bits: f64,
) -> Result<f64, ModelError> {
    require_positive("bandwidth", bandwidth)?;
    require_positive("tx_time", tx_time)?;
    require_positive("channel_gain", channel_gain)?;
    require_positive("noise_psd", noise_psd)?;
    require_non_negative("bits", bits)?;
    if bits == 0.0 {
        return Ok(0.0);
    }
    let u = bits / (bandwidth * tx_time);
    let bracket = u.exp2() * (1.0 - u * LN_2) - 1.0;
    Ok(bandwidth * noise_psd / (channel_gain * channel_gain) * bracket)
}

/// Marginal computation energy in the compute deadline,
/// `xi' = dE_cmp/dt' = -2 (C W_cpu^3 + G W_gpu^3) / t'^3` (negative).
pub fn comp_energy_time_rate(
    cpu_coeff: f64,
    gpu_coeff: f64,
    cpu_load: f64,
    gpu_load: f64,
    compute_time: f64,
) -> Result<f64, ModelError> {
    require_positive("cpu_coeff", cpu_coeff)?;
    require_positive("gpu_coeff", gpu_coeff)?;
    require_non_negative("cpu_load", cpu_load)?;
    require_non_negative("gpu_load", gpu_load)?;
    if cpu_load + gpu_load == 0.0 {
        return Ok(0.0);
    }
    require_positive("compute_time", compute_time)?;
    let num = cpu_coeff * cpu_load.powi(3) + gpu_coeff * gpu_load.powi(3);
    Ok(-2.0 * num / compute_time.powi(3))
}

/// Both time marginals of a device's plans: `(xi', xi)` in J/s.
pub fn energy_time_rates(
    comp: &ComputationPlan,
    comm: &CommunicationPlan,
    device: &DeviceProfile,
    config: &SystemConfig,
) -> Result<(f64, f64), ModelError> {
    let xi_comp = comp_energy_time_rate(
        device.cpu_coeff,
        device.gpu_coeff,
        comp.cpu_load,
        comp.gpu_load,
        comp.compute_time,
    )?;
    let xi_comm = comm_energy_time_rate(
        comm.bandwidth,
        comm.tx_time,
        device.channel_gain,
        config.noise_psd,
        config.gradient_bits,
    )?;
    Ok((xi_comp, xi_comm))
}

/// Upload-energy curvature in bandwidth,
/// `phi = d2E_cmm/dB2 = 2^u L^2 N0 (ln 2)^2 / (B^3 t h^2)` with
/// `u = L / (B t)`.
///
/// Strictly positive: the per-device upload energy is convex in its sub-band
/// width, so marginal bandwidth savings shrink as a sub-band grows. Used to
/// pick the device that benefits most from spare spectrum.
pub fn acceleration_rate(
    bandwidth: f64,
    tx_time: f64,
    channel_gain: f64,
    noise_psd: f64,
    bits: f64,
) -> Result<f64, ModelError> {
    require_positive("bandwidth", bandwidth)?;
    require_positive("tx_time", tx_time)?;
    require_positive("channel_gain", channel_gain)?;
    require_positive("noise_psd", noise_psd)?;
    require_positive("bits", bits)?;
    let u = bits / (bandwidth * tx_time);
    let num = u.exp2() * bits * bits * noise_psd * LN_2 * LN_2;
    Ok(num / (bandwidth.powi(3) * tx_time * channel_gain * channel_gain))
}

// ---------------------------------------------------------------------------
// Aggregation convergence bound
// ---------------------------------------------------------------------------

/// Inputs of [`convergence_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceBoundInput {
    /// Number of training rounds `N`.
    pub num_rounds: usize,
    /// Device population `K`.
    pub num_devices: usize,
    /// Devices scheduled per round `M`.
    pub num_scheduled: usize,
    /// Gradient-variance bound `sigma^2`.
    pub variance_bound: f64,
    /// Smoothness constant `beta` of the per-device losses.
    pub smoothness: f64,
    /// Initial squared distance to the optimum, `||w0 - w*||^2`.
    pub init_dist_sq: f64,
}

/// Evaluated optimality-gap bound for `M`-of-`K` scheduling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceBound {
    pub input: ConvergenceBoundInput,
    /// Learning rate `1 / sqrt(N)` the bound assumes.
    pub learning_rate: f64,
    /// `(1 / sqrt(N)) [ ||w0 - w*||^2 + sigma^2 (K - M) / ((K - 1) M) ]`.
    pub bound_value: f64,
}

/// Average-optimality-gap bound after `N` rounds of federated training with
/// `M` of `K` devices scheduled uniformly per round and learning rate
/// `eta = 1 / sqrt(N)`:
///
/// `(1 / sqrt(N)) [ ||w0 - w*||^2 + sigma^2 (K - M) / ((K - 1) M) ]`
///
/// Requires `eta <= 1 / (2 beta)`, i.e. `sqrt(N) >= 2 beta`. With `M = K`
/// the sampling term vanishes and only the deterministic part remains.
pub fn convergence_bound(input: &ConvergenceBoundInput) -> Result<ConvergenceBound, ModelError> {
    if input.num_rounds == 0 {
        return Err(ModelError::NonPositive {
            name: "num_rounds",
            value: 0.0,
        });
    }
    if input.num_devices < 2 {
        return Err(ModelError::Inconsistent {
            what: format!("num_devices must be >= 2, got {}", input.num_devices),
        });
    }
    if input.num_scheduled == 0 || input.num_scheduled > input.num_devices {
        return Err(ModelError::Inconsistent {
            what: format!(
                "num_scheduled {} outside 1..={}",
                input.num_scheduled, input.num_devices
            ),
        });
    }
    require_non_negative("variance_bound", input.variance_bound)?;
    require_positive("smoothness", input.smoothness)?;
    require_non_negative("init_dist_sq", input.init_dist_sq)?;
    let n = input.num_rounds as f64;
    let learning_rate = 1.0 / n.sqrt();
    if learning_rate > 1.0 / (2.0 * input.smoothness) {
        return Err(ModelError::Inconsistent {
            what: format!(
                "learning rate 1/sqrt(N) = {learning_rate} exceeds 1/(2 beta) = {}",
                1.0 / (2.0 * input.smoothness)
            ),
        });
    }
    let k = input.num_devices as f64;
    let m = input.num_scheduled as f64;
    let sampling = input.variance_bound * (k - m) / ((k - 1.0) * m);
    Ok(ConvergenceBound {
        input: *input,
        learning_rate,
        bound_value: learning_rate * (input.init_dist_sq + sampling),
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn device(c: f64, g: f64, h_sq: f64) -> DeviceProfile {
        DeviceProfile {
            id: 0,
            cpu_coeff: c,
            gpu_coeff: g,
            channel_gain: h_sq.sqrt(),
        }
    }

    fn config() -> SystemConfig {
        SystemConfig {
            total_bandwidth: 5e6,
            noise_psd: 1e-9,
            round_latency: 1.0,
            gradient_bits: 3.49e5,
            total_workload: 9.75,
            num_devices: 1,
            samples_per_device: None,
            flops_per_sample: None,
            rng_seed: 0,
        }
    }

    #[test]
    fn comp_energy_basic() {
        assert_eq!(comp_energy(0.02, 0.01, 1.0, 1.0, 1.0, 1.0).unwrap(), 0.03);
        // Idle CPU: only the GPU term remains.
        let e = comp_energy(0.02, 0.01, 0.0, 2.0, 0.0, 3.0).unwrap();
        assert_eq!(e, 0.01 * 2.0 * 9.0);
        // Cross-check against the deadline form.
        let a = comp_energy(4.0, 1.0, 1.0, 2.0, 1.0, 2.0).unwrap();
        let b = comp_energy_given_time(4.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(a, 12.0);
        assert!((a - b).abs() <= 1e-15 * a);
    }

    #[test]
    fn comp_energy_rejects_zero_speed_under_load() {
        assert!(comp_energy(1.0, 1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(comp_energy(-1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn comp_energy_given_time_cases() {
        assert_eq!(comp_energy_given_time(1.0, 1.0, 0.0, 0.0, 0.5).unwrap(), 0.0);
        let e = comp_energy_given_time(1.0, 1.0, 3.0, 3.0, 2.0).unwrap();
        assert!((e - 13.5).abs() < 1e-12);
        assert!(comp_energy_given_time(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn psd_inverts_shannon_rate() {
        // u = 1: psd = N0 / h^2.
        let p = required_tx_psd(2.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p, 1.0);
        // Paper-scale point: B = 1 MHz, t = 0.349 s, h^2 = 1e-3, L = 3.49e5.
        let (b, t, h_sq, n0, l) = (1e6, 0.349, 1e-3f64, 1e-9, 3.49e5);
        let p = required_tx_psd(b, t, h_sq.sqrt(), n0, l).unwrap();
        assert!((p - 1e-6).abs() < 1e-18);
        // Round-trip: the Shannon rate at this psd delivers L bits in t.
        let rate = b * (1.0 + p * h_sq / n0).log2();
        assert!((rate * t - l).abs() <= 1e-12 * l);
        // No bits, no power.
        assert_eq!(required_tx_psd(b, t, 1.0, n0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn comm_energy_is_psd_composition() {
        let (b, t, h, n0, l) = (1.7e5, 0.41, 0.03, 1e-9, 3.49e5);
        let e = comm_energy(b, t, h, n0, l).unwrap();
        let psd = required_tx_psd(b, t, h, n0, l).unwrap();
        assert_eq!(e, b * psd * t); // bit-equal by construction
        assert_eq!(comm_energy(b, t, h, n0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bandwidth_rate_negative_and_matches_difference_quotient() {
        let (b, t, h, n0, l) = (2e5, 0.45, 0.02, 1e-9, 3.49e5);
        let rate = energy_bandwidth_rate(b, t, h, n0, l).unwrap();
        assert!(rate < 0.0);
        let db = 1e-6 * b;
        let num = (comm_energy(b + db, t, h, n0, l).unwrap()
            - comm_energy(b - db, t, h, n0, l).unwrap())
            / (2.0 * db);
        assert!(
            (rate - num).abs() <= 1e-4 * num.abs(),
            "analytic {rate} vs numeric {num}"
        );
    }

    #[test]
    fn bandwidth_rate_vanishes_with_bits() {
        assert_eq!(energy_bandwidth_rate(1e5, 0.5, 0.03, 1e-9, 0.0).unwrap(), 0.0);
        // Small-L limit drives the rate to zero.
        let small = energy_bandwidth_rate(1e5, 0.5, 0.03, 1e-9, 1e-4).unwrap();
        assert!(small.abs() < 1e-12);
    }

    #[test]
    fn time_rates_match_difference_quotients() {
        let (b, t, h, n0, l) = (1.2e5, 0.52, 0.04, 1e-9, 3.49e5);
        let xi = comm_energy_time_rate(b, t, h, n0, l).unwrap();
        assert!(xi < 0.0);
        let dt = 1e-6 * t;
        let num = (comm_energy(b, t + dt, h, n0, l).unwrap()
            - comm_energy(b, t - dt, h, n0, l).unwrap())
            / (2.0 * dt);
        assert!((xi - num).abs() <= 1e-4 * num.abs());

        // xi' for loads (1, 2), C = 4, G = 1, t' = 1: -2 (4 + 8) / 1 = -24.
        let xc = comp_energy_time_rate(4.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(xc, -24.0);
        let dtp = 1e-6;
        let num = (comp_energy_given_time(4.0, 1.0, 1.0, 2.0, 1.0 + dtp).unwrap()
            - comp_energy_given_time(4.0, 1.0, 1.0, 2.0, 1.0 - dtp).unwrap())
            / (2.0 * dtp);
        assert!((xc - num).abs() <= 1e-4 * num.abs());
    }

    #[test]
    fn acceleration_rate_positive_and_matches_second_difference() {
        let (b, t, h, n0, l) = (1.5e5, 0.48, 0.025, 1e-9, 3.49e5);
        let phi = acceleration_rate(b, t, h, n0, l).unwrap();
        assert!(phi > 0.0);
        let db = 1e-4 * b;
        let num = (comm_energy(b + db, t, h, n0, l).unwrap()
            + comm_energy(b - db, t, h, n0, l).unwrap()
            - 2.0 * comm_energy(b, t, h, n0, l).unwrap())
            / (db * db);
        assert!(
            (phi - num).abs() <= 1e-3 * num.abs(),
            "analytic {phi} vs numeric {num}"
        );
        // Doubling h^2 halves phi.
        let phi2 = acceleration_rate(b, t, (2.0 * h * h).sqrt(), n0, l).unwrap();
        assert!((phi2 - 0.5 * phi).abs() <= 1e-12 * phi);
    }

    #[test]
    fn rates_saturate_without_nan() {
        // Tiny time-bandwidth products overflow 2^u; the rates must come back
        // as signed infinities, never NaN.
        let xi = comm_energy_time_rate(1e5, 1e-4, 0.03, 1e-9, 3.49e5).unwrap();
        assert!(xi == f64::NEG_INFINITY);
        let nu = -energy_bandwidth_rate(1e5, 1e-4, 0.03, 1e-9, 3.49e5).unwrap();
        assert!(nu == f64::INFINITY);
    }

    #[test]
    fn plan_constructors_are_consistent() {
        let dev = device(0.03, 0.005, 1e-3);
        let cfg = config();
        let cp = ComputationPlan::new(&dev, 4.0, 6.0, 0.5).unwrap();
        assert_eq!(cp.cpu_speed, 8.0);
        assert_eq!(cp.gpu_speed, 12.0);
        let direct = comp_energy_given_time(0.03, 0.005, 4.0, 6.0, 0.5).unwrap();
        assert!((cp.energy - direct).abs() <= 1e-12 * direct);

        let mp = CommunicationPlan::new(&dev, &cfg, 1e5, 0.5).unwrap();
        assert_eq!(mp.energy, mp.bandwidth * mp.tx_psd * mp.tx_time);
    }

    #[test]
    fn zero_load_plan_reports_zero_speed() {
        let dev = device(0.03, 0.005, 1e-3);
        let cp = ComputationPlan::new(&dev, 0.0, 9.75, 0.5).unwrap();
        assert_eq!(cp.cpu_speed, 0.0);
        assert!(cp.gpu_speed > 0.0);
    }

    #[test]
    fn allocation_validates_budgets() {
        let dev = device(0.03, 0.005, 1e-3);
        let mut cfg = config();
        cfg.num_devices = 1;
        let cp = ComputationPlan::new(&dev, 4.875, 4.875, 0.5).unwrap();
        let mp = CommunicationPlan::new(&dev, &cfg, 1e5, 0.5).unwrap();
        let alloc = Allocation::new(vec![cp.clone()], vec![mp.clone()], &cfg).unwrap();
        assert!((alloc.sum_energy - (cp.energy + mp.energy)).abs() <= 1e-12 * alloc.sum_energy);

        // Over-long round is rejected.
        let late = CommunicationPlan::new(&dev, &cfg, 1e5, 0.6).unwrap();
        assert!(Allocation::new(vec![cp.clone()], vec![late], &cfg).is_err());
        // Bandwidth overrun is rejected.
        let wide = CommunicationPlan::new(&dev, &cfg, 6e6, 0.5).unwrap();
        assert!(Allocation::new(vec![cp], vec![wide], &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = config();
        cfg.samples_per_device = Some(20.0);
        cfg.flops_per_sample = Some(9.75 / 20.0);
        cfg.validate().unwrap();
        cfg.flops_per_sample = Some(1.0);
        assert!(cfg.validate().is_err());
        cfg.flops_per_sample = None;
        cfg.total_bandwidth = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bound_formula_spot_values() {
        let mut input = ConvergenceBoundInput {
            num_rounds: 1,
            num_devices: 10,
            num_scheduled: 5,
            variance_bound: 1.0,
            smoothness: 0.5,
            init_dist_sq: 0.0,
        };
        let b = convergence_bound(&input).unwrap();
        assert!((b.bound_value - 1.0 / 9.0).abs() < 1e-15);

        // Full participation removes the sampling term.
        input.num_scheduled = 10;
        input.init_dist_sq = 2.0;
        input.num_rounds = 4;
        let b = convergence_bound(&input).unwrap();
        assert!((b.bound_value - 1.0).abs() < 1e-15);

        // Quadrupling N halves the bound.
        input.num_rounds = 16;
        let b2 = convergence_bound(&input).unwrap();
        assert!((b2.bound_value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bound_rejects_bad_shapes() {
        let base = ConvergenceBoundInput {
            num_rounds: 100,
            num_devices: 10,
            num_scheduled: 5,
            variance_bound: 1.0,
            smoothness: 1.0,
            init_dist_sq: 1.0,
        };
        let mut x = base;
        x.num_scheduled = 11;
        assert!(convergence_bound(&x).is_err());
        x = base;
        x.num_devices = 1;
        x.num_scheduled = 1;
        assert!(convergence_bound(&x).is_err());
        x = base;
        x.num_rounds = 1; // eta = 1 > 1/(2 beta)
        assert!(convergence_bound(&x).is_err());
    }

    #[test]
    fn diagnostics_pass_on_manufactured_equilibrium() {
        // Single device at its exact per-device optimum: split by the
        // closed form, time split at the marginal-rate crossing.
        let dev = device(0.03, 0.005, 1e-3);
        let mut cfg = config();
        cfg.num_devices = 1;
        let w = cfg.total_workload;
        let s = dev.cpu_coeff.sqrt() + dev.gpu_coeff.sqrt();
        let wc = dev.gpu_coeff.sqrt() * w / s;
        let wg = dev.cpu_coeff.sqrt() * w / s;
        let bw = cfg.total_bandwidth;
        // Find the time split where xi' = xi by bisection.
        let t = cfg.round_latency;
        let f = |tt: f64| {
            let xi = comm_energy_time_rate(bw, tt, dev.channel_gain, cfg.noise_psd, cfg.gradient_bits)
                .unwrap();
            let xc = comp_energy_time_rate(dev.cpu_coeff, dev.gpu_coeff, wc, wg, t - tt).unwrap();
            xi - xc
        };
        let (mut lo, mut hi) = (1e-4, 1.0 - 1e-4);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tt = 0.5 * (lo + hi);
        let cp = ComputationPlan::new(&dev, wc, wg, t - tt).unwrap();
        let mp = CommunicationPlan::new(&dev, &cfg, bw, tt).unwrap();
        let alloc = Allocation::new(vec![cp], vec![mp], &cfg).unwrap();
        let diag = EquilibriumDiagnostics::evaluate(&alloc, &[dev], &cfg, 1e-4).unwrap();
        assert!(diag.pass, "residuals: {diag:?}");
        assert!(diag.residual_workload <= 1e-12);
        assert!(diag.residual_speed <= 1e-12);
        assert!(diag.residual_nu == 0.0); // single device
    }
}
