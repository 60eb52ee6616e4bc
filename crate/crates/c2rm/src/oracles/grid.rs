//! Exhaustive grid-search references for the closed-form and fixed-point
//! solvers. Slow and dumb on purpose: nothing here knows any optimality
//! condition, only how to evaluate energies.

use super::OracleError;
use crate::model::{comm_energy, comp_energy_given_time, DeviceProfile, SystemConfig, TIME_MARGIN};

/// Brute-force scan of the CPU/GPU workload split for one device.
///
/// Evaluates `resolution + 1` equispaced candidate CPU loads in `[0, W]` and
/// returns the cheapest `(cpu_load, gpu_load)` pair together with its
/// computation energy under deadline `compute_time`.
pub fn grid_search_p1(
    device: &DeviceProfile,
    total_workload: f64,
    compute_time: f64,
    resolution: usize,
) -> Result<((f64, f64), f64), OracleError> {
    device.validate()?;
    if resolution < 1000 {
        return Err(OracleError::Unsupported {
            what: format!("resolution {resolution} below 1000"),
        });
    }
    let mut best = (f64::INFINITY, (0.0, 0.0));
    for i in 0..=resolution {
        let cpu = total_workload * i as f64 / resolution as f64;
        // Guard the complementary load against one-ulp overshoot.
        let gpu = (total_workload - cpu).max(0.0);
        let energy = comp_energy_given_time(
            device.cpu_coeff,
            device.gpu_coeff,
            cpu,
            gpu,
            compute_time,
        )?;
        if energy < best.0 {
            best = (energy, (cpu, gpu));
        }
    }
    Ok((best.1, best.0))
}

/// Brute-force scan of the bandwidth split for two or three devices.
///
/// Scans the open simplex `{B_k > 0, sum B_k = B}` at the given resolution
/// and returns the cheapest widths and their total upload energy given
/// per-device upload windows `tx_budgets`.
pub fn grid_search_p3(
    devices: &[DeviceProfile],
    tx_budgets: &[f64],
    config: &SystemConfig,
    resolution: usize,
) -> Result<(Vec<f64>, f64), OracleError> {
    if devices.len() < 2 || devices.len() > 3 {
        return Err(OracleError::Unsupported {
            what: format!("simplex scan supports 2 or 3 devices, got {}", devices.len()),
        });
    }
    if devices.len() != tx_budgets.len() {
        return Err(OracleError::Unsupported {
            what: format!(
                "{} devices vs {} upload windows",
                devices.len(),
                tx_budgets.len()
            ),
        });
    }
    if resolution < 100 {
        return Err(OracleError::Unsupported {
            what: format!("resolution {resolution} below 100"),
        });
    }
    let b = config.total_bandwidth;
    let n = resolution;
    let energy_of = |widths: &[f64]| -> Result<f64, OracleError> {
        let mut total = 0.0;
        for ((dev, &w), &t) in devices.iter().zip(widths).zip(tx_budgets) {
            total += comm_energy(w, t, dev.channel_gain, config.noise_psd, config.gradient_bits)?;
        }
        Ok(total)
    };

    let mut best = (f64::INFINITY, Vec::new());
    if devices.len() == 2 {
        for i in 1..n {
            let w0 = b * i as f64 / n as f64;
            let widths = vec![w0, b - w0];
            let e = energy_of(&widths)?;
            if e < best.0 {
                best = (e, widths);
            }
        }
    } else {
        for i in 1..n {
            for j in 1..n - i {
                let w0 = b * i as f64 / n as f64;
                let w1 = b * j as f64 / n as f64;
                let widths = vec![w0, w1, b - w0 - w1];
                let e = energy_of(&widths)?;
                if e < best.0 {
                    best = (e, widths);
                }
            }
        }
    }
    Ok((best.1, best.0))
}

/// Brute-force scan of the two-device joint problem over the pair of time
/// divisions.
///
/// For every `(T~_0, T~_1)` pair on a `time_resolution x time_resolution`
/// grid, the bandwidth split is scanned exhaustively with
/// [`grid_search_p3`] at `bw_resolution` and the workload split uses the
/// closed form (itself grid-verified by [`grid_search_p1`]); the reference
/// never touches the fixed-point or master solvers. Returns the best time
/// divisions and the total round energy.
pub fn grid_search_p4_two_devices(
    devices: &[DeviceProfile],
    config: &SystemConfig,
    time_resolution: usize,
    bw_resolution: usize,
) -> Result<(Vec<f64>, f64), OracleError> {
    if devices.len() != 2 {
        return Err(OracleError::Unsupported {
            what: format!("two-device scan got {} devices", devices.len()),
        });
    }
    let t = config.round_latency;
    let (lo, hi) = (TIME_MARGIN * t, (1.0 - TIME_MARGIN) * t);
    let grid_time = |i: usize| lo + (hi - lo) * i as f64 / time_resolution as f64;

    // Per-device computation energy along the grid, via the closed-form
    // split (independent of the other device).
    let mut comp = vec![Vec::with_capacity(time_resolution + 1); 2];
    for (d, dev) in devices.iter().enumerate() {
        let (w_c, w_g) = crate::comp_rm::optimal_workload_split(
            dev.cpu_coeff,
            dev.gpu_coeff,
            config.total_workload,
        )?;
        for i in 0..=time_resolution {
            comp[d].push(comp_energy_given_time(
                dev.cpu_coeff,
                dev.gpu_coeff,
                w_c,
                w_g,
                t - grid_time(i),
            )?);
        }
    }

    let mut best = (f64::INFINITY, vec![0.0, 0.0]);
    for i in 0..=time_resolution {
        let t0 = grid_time(i);
        for j in 0..=time_resolution {
            let t1 = grid_time(j);
            let (_, comm) = grid_search_p3(devices, &[t0, t1], config, bw_resolution)?;
            let total = comp[0][i] + comp[1][j] + comm;
            if total < best.0 {
                best = (total, vec![t0, t1]);
            }
        }
    }
    Ok((best.1, best.0))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
