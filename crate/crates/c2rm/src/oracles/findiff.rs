//! Finite-difference verification of every analytic rate the solvers rely
//! on, plus the envelope identity behind the master gradient.

use super::OracleError;
use crate::comp_rm::optimal_workload_split;
use crate::model::{
    acceleration_rate, comm_energy, comm_energy_time_rate, comp_energy_given_time,
    comp_energy_time_rate, energy_bandwidth_rate, DeviceProfile, SystemConfig, TIME_MARGIN,
};
use crate::numerics::{bisect_monotone, RootBracket};

/// One analytic rate to check, together with the point to check it at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateQuery {
    /// `dE_cmm/dB` against a central difference in bandwidth.
    NuBandwidth {
        bandwidth: f64,
        tx_time: f64,
        channel_gain: f64,
        noise_psd: f64,
        bits: f64,
    },
    /// `dE_cmm/dt` against a central difference in the upload window.
    XiCommTime {
        bandwidth: f64,
        tx_time: f64,
        channel_gain: f64,
        noise_psd: f64,
        bits: f64,
    },
    /// `d2E_cmm/dB2` against a second central difference in bandwidth.
    PhiBandwidth {
        bandwidth: f64,
        tx_time: f64,
        channel_gain: f64,
        noise_psd: f64,
        bits: f64,
    },
    /// `dE_cmp/dt'` against a central difference in the compute deadline.
    XiCompTime {
        cpu_coeff: f64,
        gpu_coeff: f64,
        cpu_load: f64,
        gpu_load: f64,
        compute_time: f64,
    },
}

fn require_step(point: f64, step: f64) -> Result<(), OracleError> {
    if !(step > 0.0) || point + step == point || point - step == point {
        return Err(OracleError::StepUnderflow { point, step });
    }
    Ok(())
}

/// Compares the queried analytic rate against its finite-difference
/// estimate with the given absolute step; returns the relative error.
pub fn finite_difference_check(query: &RateQuery, step: f64) -> Result<f64, OracleError> {
    let (analytic, numeric) = match *query {
        RateQuery::NuBandwidth {
            bandwidth,
            tx_time,
            channel_gain,
            noise_psd,
            bits,
        } => {
            require_step(bandwidth, step)?;
            let analytic =
                energy_bandwidth_rate(bandwidth, tx_time, channel_gain, noise_psd, bits)?;
            let up = comm_energy(bandwidth + step, tx_time, channel_gain, noise_psd, bits)?;
            let dn = comm_energy(bandwidth - step, tx_time, channel_gain, noise_psd, bits)?;
            (analytic, (up - dn) / (2.0 * step))
        }
        RateQuery::XiCommTime {
            bandwidth,
            tx_time,
            channel_gain,
            noise_psd,
            bits,
        } => {
            require_step(tx_time, step)?;
            let analytic =
                comm_energy_time_rate(bandwidth, tx_time, channel_gain, noise_psd, bits)?;
            let up = comm_energy(bandwidth, tx_time + step, channel_gain, noise_psd, bits)?;
            let dn = comm_energy(bandwidth, tx_time - step, channel_gain, noise_psd, bits)?;
            (analytic, (up - dn) / (2.0 * step))
        }
        RateQuery::PhiBandwidth {
            bandwidth,
            tx_time,
            channel_gain,
            noise_psd,
            bits,
        } => {
            require_step(bandwidth, step)?;
            let analytic = acceleration_rate(bandwidth, tx_time, channel_gain, noise_psd, bits)?;
            let up = comm_energy(bandwidth + step, tx_time, channel_gain, noise_psd, bits)?;
            let mid = comm_energy(bandwidth, tx_time, channel_gain, noise_psd, bits)?;
            let dn = comm_energy(bandwidth - step, tx_time, channel_gain, noise_psd, bits)?;
            (analytic, (up - 2.0 * mid + dn) / (step * step))
        }
        RateQuery::XiCompTime {
            cpu_coeff,
            gpu_coeff,
            cpu_load,
            gpu_load,
            compute_time,
        } => {
            require_step(compute_time, step)?;
            let analytic =
                comp_energy_time_rate(cpu_coeff, gpu_coeff, cpu_load, gpu_load, compute_time)?;
            let up =
                comp_energy_given_time(cpu_coeff, gpu_coeff, cpu_load, gpu_load, compute_time + step)?;
            let dn =
                comp_energy_given_time(cpu_coeff, gpu_coeff, cpu_load, gpu_load, compute_time - step)?;
            (analytic, (up - dn) / (2.0 * step))
        }
    };
    Ok((numeric - analytic).abs() / analytic.abs().max(1e-300))
}

/// Outcome of one envelope-identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    /// Central difference of the device's re-optimised round energy in its
    /// bandwidth.
    pub fd_derivative: f64,
    /// Analytic upload marginal `dE_cmm/dB` at the inner optimum.
    pub analytic_rate: f64,
    pub relative_error: f64,
}

/// Per-device round energy minimised over the time division at fixed
/// bandwidth, via the 1-D monotone root `xi(B, T~) = xi'(T - T~)`.
fn min_energy_at_bandwidth(
    device: &DeviceProfile,
    config: &SystemConfig,
    bandwidth: f64,
) -> Result<(f64, f64), OracleError> {
    let t = config.round_latency;
    let (lo, hi) = (TIME_MARGIN * t, (1.0 - TIME_MARGIN) * t);
    let (w_c, w_g) = optimal_workload_split(
        device.cpu_coeff,
        device.gpu_coeff,
        config.total_workload,
    )?;
    let g = |tt: f64| {
        let comm = comm_energy_time_rate(
            bandwidth,
            tt,
            device.channel_gain,
            config.noise_psd,
            config.gradient_bits,
        )
        .unwrap_or(f64::NAN);
        let comp = comp_energy_time_rate(device.cpu_coeff, device.gpu_coeff, w_c, w_g, t - tt)
            .unwrap_or(f64::NAN);
        comm - comp
    };
    let (g_lo, g_hi) = (g(lo), g(hi));
    let tt = if g_lo >= 0.0 {
        lo
    } else if g_hi <= 0.0 {
        hi
    } else {
        bisect_monotone(g, RootBracket::new(lo, hi, g_lo, g_hi)?, 1e-13 * t)?.0
    };
    let energy = comm_energy(
        bandwidth,
        tt,
        device.channel_gain,
        config.noise_psd,
        config.gradient_bits,
    )? + comp_energy_given_time(device.cpu_coeff, device.gpu_coeff, w_c, w_g, t - tt)?;
    Ok((energy, tt))
}

/// Verifies that the derivative of the device's *re-optimised* round energy
/// in its bandwidth equals the plain upload marginal at the optimum — the
/// inner time division contributes nothing to first order.
///
/// This is the identity that lets the master solver treat the bandwidth
/// price as the gradient of the whole subproblem.
pub fn envelope_check(
    device: &DeviceProfile,
    config: &SystemConfig,
    bandwidth: f64,
    rel_step: f64,
) -> Result<EnvelopeReport, OracleError> {
    let step = bandwidth * rel_step;
    require_step(bandwidth, step)?;
    let (_, tt_star) = min_energy_at_bandwidth(device, config, bandwidth)?;
    let analytic = energy_bandwidth_rate(
        bandwidth,
        tt_star,
        device.channel_gain,
        config.noise_psd,
        config.gradient_bits,
    )?;
    let (up, _) = min_energy_at_bandwidth(device, config, bandwidth + step)?;
    let (dn, _) = min_energy_at_bandwidth(device, config, bandwidth - step)?;
    let fd = (up - dn) / (2.0 * step);
    Ok(EnvelopeReport {
        fd_derivative: fd,
        analytic_rate: analytic,
        relative_error: (fd - analytic).abs() / analytic.abs().max(1e-300),
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
