//! Energy-aware device scheduling: rank devices by the energy each would
//! spend in a round under an equal bandwidth share, then keep the cheapest.
//!
//! With every candidate given `B_bar = B / K`, a device's best achievable
//! round energy decouples from the others. Its optimal time division solves
//! the strictly increasing marginal-balance equation
//!
//! ```text
//! f(t) = xi(B_bar, t) + 2 a W^3 / (T - t)^3 = 0
//! ```
//!
//! (upload marginal plus compute marginal at the optimal workload split,
//! `a = C G / (sqrt(C) + sqrt(G))^2`), found here by bisection. The metric
//! is the energy at that root; [`schedule`] keeps the `M` smallest-metric
//! devices and [`random_schedule`] is the seeded uniform baseline.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::comp_rm::optimal_workload_split;
use crate::model::{
    comm_energy, comm_energy_time_rate, comp_energy_given_time, DeviceProfile, ModelError,
    SystemConfig, TIME_MARGIN,
};
use crate::numerics::{bisect_monotone, NumericsError, RootBracket};

/// Relative bisection tolerance on the time-split root, as a fraction of the
/// round latency.
pub const ROOT_TOL_REL: f64 = 1e-12;

/// Outcome of a selection pass.
///
/// `roots` and `metrics` are parallel to the input device slice;
/// entries are `None` for infeasible devices and for decisions (like the
/// random baseline) that never computed them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleDecision {
    /// Ids of the selected devices, ascending.
    pub selected: Vec<usize>,
    /// Optimal equal-bandwidth upload window per candidate.
    pub roots: Vec<Option<f64>>,
    /// Equal-bandwidth round energy per candidate (the ranking key).
    pub metrics: Vec<Option<f64>>,
    /// Ids of devices excluded because their root equation has no solution.
    pub infeasible: Vec<usize>,
}

impl ScheduleDecision {
    /// Membership indicator parallel to the input device slice.
    pub fn indicator(&self, devices: &[DeviceProfile]) -> Vec<bool> {
        devices
            .iter()
            .map(|d| self.selected.binary_search(&d.id).is_ok())
            .collect()
    }
}

/// Failures of the scheduling operations.
#[derive(Debug, Clone)]
pub enum ScheduleError {
    Model(ModelError),
    Numerics(NumericsError),
    /// The marginal-balance equation has no interior root for this device:
    /// it cannot operate efficiently within the round latency.
    Infeasible { device_id: usize },
    /// The requested selection size is outside `1..=K`.
    BadCount { requested: usize, available: usize },
    /// Fewer feasible devices than requested.
    NotEnoughFeasible {
        needed: usize,
        feasible: usize,
        infeasible_ids: Vec<usize>,
    },
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleError::Model(e) => write!(f, "{e}"),
            ScheduleError::Numerics(e) => write!(f, "{e}"),
            ScheduleError::Infeasible { device_id } => {
                write!(f, "device {device_id}: time-split equation has no root")
            }
            ScheduleError::BadCount {
                requested,
                available,
            } => write!(
                f,
                "cannot select {requested} devices out of {available}"
            ),
            ScheduleError::NotEnoughFeasible {
                needed,
                feasible,
                infeasible_ids,
            } => write!(
                f,
                "need {needed} devices but only {feasible} are feasible \
                 (infeasible ids: {infeasible_ids:?})"
            ),
        }
    }
}

impl std::error::Error for ScheduleError {}

impl From<ModelError> for ScheduleError {
    fn from(e: ModelError) -> Self {
        ScheduleError::Model(e)
    }
}

impl From<NumericsError> for ScheduleError {
    fn from(e: NumericsError) -> Self {
        ScheduleError::Numerics(e)
    }
}

/// The marginal-balance function `f(t)` whose root is the device's optimal
/// upload window under bandwidth `equal_bandwidth`.
fn marginal_balance(
    device: &DeviceProfile,
    config: &SystemConfig,
    equal_bandwidth: f64,
    t: f64,
) -> f64 {
    let comm = comm_energy_time_rate(
        equal_bandwidth,
        t,
        device.channel_gain,
        config.noise_psd,
        config.gradient_bits,
    )
    .unwrap_or(f64::NAN);
    let a = device.composite_coeff();
    let compute_window = config.round_latency - t;
    let w = config.total_workload;
    comm + 2.0 * a * w * w * w / (compute_window * compute_window * compute_window)
}

/// Solves the device's optimal upload window under an equal bandwidth share
/// by bisection on `[dT, (1-d)T]`.
///
/// Errors with [`ScheduleError::Infeasible`] when the function does not
/// change sign over the bracket, i.e. the device's best operating point is
/// pinned to a boundary and it cannot run efficiently inside the round.
pub fn metric_time_split(
    device: &DeviceProfile,
    config: &SystemConfig,
    equal_bandwidth: f64,
) -> Result<f64, ScheduleError> {
    device.validate()?;
    config.validate()?;
    if !(equal_bandwidth > 0.0) || !equal_bandwidth.is_finite() {
        return Err(ScheduleError::Model(ModelError::NonPositive {
            name: "equal_bandwidth",
            value: equal_bandwidth,
        }));
    }
    let t = config.round_latency;
    let (lo, hi) = (TIME_MARGIN * t, (1.0 - TIME_MARGIN) * t);
    let f = |tt: f64| marginal_balance(device, config, equal_bandwidth, tt);
    let bracket = RootBracket::new(lo, hi, f(lo), f(hi)).map_err(|_| ScheduleError::Infeasible {
        device_id: device.id,
    })?;
    let (root, _evals) = bisect_monotone(f, bracket, ROOT_TOL_REL * t)?;
    Ok(root)
}

/// Energy the device would spend in one round under bandwidth
/// `equal_bandwidth` with its time division at the [`metric_time_split`]
/// root — the ranking key for selection.
///
/// Composed literally from the model energies (upload energy at the root
/// plus compute energy at the optimal workload split over the remaining
/// window), so it is bit-identical to evaluating those directly.
pub fn scheduling_metric(
    device: &DeviceProfile,
    config: &SystemConfig,
    equal_bandwidth: f64,
) -> Result<f64, ScheduleError> {
    let root = metric_time_split(device, config, equal_bandwidth)?;
    metric_at(device, config, equal_bandwidth, root)
}

fn metric_at(
    device: &DeviceProfile,
    config: &SystemConfig,
    equal_bandwidth: f64,
    root: f64,
) -> Result<f64, ScheduleError> {
    let comm = comm_energy(
        equal_bandwidth,
        root,
        device.channel_gain,
        config.noise_psd,
        config.gradient_bits,
    )?;
    let (w_c, w_g) = optimal_workload_split(
        device.cpu_coeff,
        device.gpu_coeff,
        config.total_workload,
    )?;
    let comp = comp_energy_given_time(
        device.cpu_coeff,
        device.gpu_coeff,
        w_c,
        w_g,
        config.round_latency - root,
    )?;
    Ok(comm + comp)
}

/// Selects the `num_scheduled` devices with the smallest equal-bandwidth
/// round energy; ties broken by ascending device id.
///
/// The bandwidth share is `B / K` over **all** candidates, so the ranking
/// is independent of how many devices end up selected. Infeasible devices
/// are excluded before ranking; if that leaves fewer than `num_scheduled`,
/// the error lists the excluded ids.
pub fn schedule(
    devices: &[DeviceProfile],
    config: &SystemConfig,
    num_scheduled: usize,
) -> Result<ScheduleDecision, ScheduleError> {
    if num_scheduled == 0 || num_scheduled > devices.len() {
        return Err(ScheduleError::BadCount {
            requested: num_scheduled,
            available: devices.len(),
        });
    }
    config.validate()?;
    let equal_bandwidth = config.total_bandwidth / devices.len() as f64;

    let mut roots = Vec::with_capacity(devices.len());
    let mut metrics = Vec::with_capacity(devices.len());
    let mut infeasible = Vec::new();
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(devices.len());
    for dev in devices {
        match metric_time_split(dev, config, equal_bandwidth) {
            Ok(root) => {
                let metric = metric_at(dev, config, equal_bandwidth, root)?;
                roots.push(Some(root));
                metrics.push(Some(metric));
                ranked.push((metric, dev.id));
            }
            Err(ScheduleError::Infeasible { device_id }) => {
                roots.push(None);
                metrics.push(None);
                infeasible.push(device_id);
            }
            Err(e) => return Err(e),
        }
    }
    if ranked.len() < num_scheduled {
        return Err(ScheduleError::NotEnoughFeasible {
            needed: num_scheduled,
            feasible: ranked.len(),
            infeasible_ids: infeasible,
        });
    }
    ranked.sort_by(|a, b| a.partial_cmp(b).expect("metrics are finite"));
    let mut selected: Vec<usize> = ranked[..num_scheduled].iter().map(|&(_, id)| id).collect();
    selected.sort_unstable();
    Ok(ScheduleDecision {
        selected,
        roots,
        metrics,
        infeasible,
    })
}

/// Seeded uniform baseline: a random `num_scheduled`-subset without
/// replacement, deterministic per seed.
pub fn random_schedule(
    devices: &[DeviceProfile],
    num_scheduled: usize,
    seed: u64,
) -> Result<ScheduleDecision, ScheduleError> {
    if num_scheduled == 0 || num_scheduled > devices.len() {
        return Err(ScheduleError::BadCount {
            requested: num_scheduled,
            available: devices.len(),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, devices.len(), num_scheduled);
    let mut selected: Vec<usize> = picks.iter().map(|i| devices[i].id).collect();
    selected.sort_unstable();
    Ok(ScheduleDecision {
        selected,
        roots: vec![None; devices.len()],
        metrics: vec![None; devices.len()],
        infeasible: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
