//! Versioned JSON scenario schema: system constants, a device population
//! (explicit list or a seeded distribution), scheme selection, an optional
//! sweep axis, and solver tolerances.
//!
//! Determinism contract: a scenario plus a round seed fully determines the
//! device population. Hardware coefficients are drawn once from the
//! distribution seed (a device's silicon does not change between rounds);
//! channel power gains are exponentially distributed with the configured mean
//! and are redrawn independently for every round seed. Explicit device lists
//! are fixed and ignore the round seed.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::model::{DeviceProfile, SystemConfig};

/// Schema version accepted by this build.
pub const SCENARIO_VERSION: u32 = 1;

/// Relative slack when checking `total_workload = samples * flops_per_sample`.
const WORKLOAD_PRODUCT_TOL: f64 = 1e-9;

/// Failures while loading, saving, or validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    Io { path: String, message: String },
    Parse { message: String },
    Invalid { what: String },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Io { path, message } => write!(f, "io error on {path}: {message}"),
            ScenarioError::Parse { message } => write!(f, "scenario parse error: {message}"),
            ScenarioError::Invalid { what } => write!(f, "invalid scenario: {what}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// Resource-management scheme names as they appear in scenario files and CSV
/// output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Even bandwidth, halved latency, halved workload split: no optimization.
    NoRm,
    /// Optimal workload split and speeds; communication left unoptimized.
    CompOnly,
    /// Optimal bandwidth partition; computation left unoptimized.
    CommOnly,
    /// Both sides optimized separately at a fixed 50/50 time division.
    Separate,
    /// Full joint optimization of bandwidth, time division, splits, speeds.
    Joint,
    /// Joint optimization plus slotted spectrum-hole reassignment.
    JointSharing,
    /// Energy-ranked device selection followed by joint optimization.
    ScheduleC2,
    /// Uniformly random device selection followed by joint optimization.
    ScheduleRandom,
}

impl Scheme {
    /// Every scheme, in canonical CSV/report order.
    pub const ALL: [Scheme; 8] = [
        Scheme::NoRm,
        Scheme::CompOnly,
        Scheme::CommOnly,
        Scheme::Separate,
        Scheme::Joint,
        Scheme::JointSharing,
        Scheme::ScheduleC2,
        Scheme::ScheduleRandom,
    ];

    /// The kebab-case name used in scenario files and CSV rows.
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::NoRm => "no-rm",
            Scheme::CompOnly => "comp-only",
            Scheme::CommOnly => "comm-only",
            Scheme::Separate => "separate",
            Scheme::Joint => "joint",
            Scheme::JointSharing => "joint-sharing",
            Scheme::ScheduleC2 => "schedule-c2",
            Scheme::ScheduleRandom => "schedule-random",
        }
    }

    /// True for the two schemes that run on a selected device subset.
    pub fn is_scheduling(&self) -> bool {
        matches!(self, Scheme::ScheduleC2 | Scheme::ScheduleRandom)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .iter()
            .copied()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| ScenarioError::Invalid {
                what: format!("unknown scheme '{s}'"),
            })
    }
}

/// System-wide constants; field names carry SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub total_bandwidth_hz: f64,
    pub noise_psd_w_per_hz: f64,
    pub round_latency_s: f64,
    pub gradient_bits: f64,
    /// Per-device workload for one local update, in `workload_unit`s.
    pub total_workload: f64,
    /// Informational label for the workload unit (e.g. "MFLOP").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload_unit: Option<String>,
    pub num_devices: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_device: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops_per_sample: Option<f64>,
}

/// One explicitly listed device. `channel_gain_sq` is the channel power gain
/// `h^2` (the squared amplitude).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceEntry {
    pub id: usize,
    pub cpu_coeff: f64,
    pub gpu_coeff: f64,
    pub channel_gain_sq: f64,
}

/// Seeded random device population: coefficients sampled uniformly from the
/// choice sets once per scenario, channel power gains exponential with mean
/// `avg_channel_gain_sq` redrawn per round seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDistribution {
    pub cpu_coeff_choices: Vec<f64>,
    pub gpu_coeff_choices: Vec<f64>,
    pub avg_channel_gain_sq: f64,
    pub seed: u64,
}

/// Exactly one source for the device population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum DeviceSpec {
    Explicit(Vec<DeviceEntry>),
    Distribution(DeviceDistribution),
}

/// Which scalar the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    RoundLatencyS,
    TotalBandwidthHz,
    NumScheduled,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::RoundLatencyS => "round_latency_s",
            SweepAxis::TotalBandwidthHz => "total_bandwidth_hz",
            SweepAxis::NumScheduled => "num_scheduled",
        }
    }

    /// Writes the sweep value into a config; `num_scheduled` is applied at
    /// scheme-evaluation time instead and leaves the config untouched.
    pub fn apply(&self, config: &mut SystemConfig, value: f64) {
        match self {
            SweepAxis::RoundLatencyS => config.round_latency = value,
            SweepAxis::TotalBandwidthHz => config.total_bandwidth = value,
            SweepAxis::NumScheduled => {}
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sweep axis, grid, and the number of independent channel seeds per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// Strictly increasing grid of sweep values.
    pub values: Vec<f64>,
    pub num_seeds: u64,
}

/// Solver tolerances; every field has a sensible default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Stationarity tolerance for the joint solve.
    pub joint_tol: f64,
    /// Price-spread tolerance for the bandwidth fixed point.
    pub inner_tol: f64,
    /// Residual tolerance for the equilibrium certificate.
    pub certify_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            joint_tol: 1e-10,
            inner_tol: 1e-12,
            certify_tol: 1e-4,
        }
    }
}

fn default_slots_per_round() -> u32 {
    1000
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub system: SystemSpec,
    pub devices: DeviceSpec,
    pub schemes: Vec<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Subset size for the scheduling schemes when the sweep axis is not
    /// `num_scheduled`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_scheduled: Option<usize>,
    /// Slot count for the sharing simulation; the slot length is the round
    /// latency divided by this, so it always divides the round exactly.
    #[serde(default = "default_slots_per_round")]
    pub slots_per_round: u32,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn positive(name: &str, value: f64) -> Result<(), ScenarioError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(ScenarioError::Invalid {
            what: format!("{name} must be positive and finite, got {value}"),
        });
    }
    Ok(())
}

impl Scenario {
    /// Parses and validates a scenario from JSON text.
    pub fn from_json_str(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
                message: e.to_string(),
            })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenario serializes");
        text.push('\n');
        text
    }

    /// Loads and validates a scenario file.
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Scenario::from_json_str(&text)
    }

    /// Writes the scenario as pretty JSON.
    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_json_string()).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Full structural validation; every constructor path runs this.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCENARIO_VERSION {
            return Err(ScenarioError::Invalid {
                what: format!(
                    "unsupported version {} (this build reads {SCENARIO_VERSION})",
                    self.version
                ),
            });
        }
        let sys = &self.system;
        positive("system.total_bandwidth_hz", sys.total_bandwidth_hz)?;
        positive("system.noise_psd_w_per_hz", sys.noise_psd_w_per_hz)?;
        positive("system.round_latency_s", sys.round_latency_s)?;
        positive("system.gradient_bits", sys.gradient_bits)?;
        positive("system.total_workload", sys.total_workload)?;
        if sys.num_devices == 0 {
            return Err(ScenarioError::Invalid {
                what: "system.num_devices must be at least 1".into(),
            });
        }
        match (sys.samples_per_device, sys.flops_per_sample) {
            (None, None) => {}
            (Some(s), Some(fps)) => {
                positive("system.samples_per_device", s)?;
                positive("system.flops_per_sample", fps)?;
                let product = s * fps;
                if (product - sys.total_workload).abs()
                    > WORKLOAD_PRODUCT_TOL * sys.total_workload
                {
                    return Err(ScenarioError::Invalid {
                        what: format!(
                            "total_workload {} != samples_per_device * flops_per_sample = {product}",
                            sys.total_workload
                        ),
                    });
                }
            }
            _ => {
                return Err(ScenarioError::Invalid {
                    what: "samples_per_device and flops_per_sample must be set together".into(),
                });
            }
        }

        match &self.devices {
            DeviceSpec::Explicit(list) => {
                if list.len() != sys.num_devices {
                    return Err(ScenarioError::Invalid {
                        what: format!(
                            "explicit device list has {} entries but num_devices is {}",
                            list.len(),
                            sys.num_devices
                        ),
                    });
                }
                for (index, entry) in list.iter().enumerate() {
                    if entry.id != index {
                        return Err(ScenarioError::Invalid {
                            what: format!(
                                "device ids must be 0..K in order; entry {index} has id {}",
                                entry.id
                            ),
                        });
                    }
                    positive(&format!("devices[{index}].cpu_coeff"), entry.cpu_coeff)?;
                    positive(&format!("devices[{index}].gpu_coeff"), entry.gpu_coeff)?;
                    positive(
                        &format!("devices[{index}].channel_gain_sq"),
                        entry.channel_gain_sq,
                    )?;
                }
            }
            DeviceSpec::Distribution(dist) => {
                if dist.cpu_coeff_choices.is_empty() || dist.gpu_coeff_choices.is_empty() {
                    return Err(ScenarioError::Invalid {
                        what: "coefficient choice sets must be non-empty".into(),
                    });
                }
                for (name, values) in [
                    ("cpu_coeff_choices", &dist.cpu_coeff_choices),
                    ("gpu_coeff_choices", &dist.gpu_coeff_choices),
                ] {
                    for (i, &v) in values.iter().enumerate() {
                        positive(&format!("devices.distribution.{name}[{i}]"), v)?;
                    }
                }
                positive(
                    "devices.distribution.avg_channel_gain_sq",
                    dist.avg_channel_gain_sq,
                )?;
            }
        }

        if self.schemes.is_empty() {
            return Err(ScenarioError::Invalid {
                what: "schemes must list at least one scheme".into(),
            });
        }

        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(ScenarioError::Invalid {
                    what: "sweep.values must be non-empty".into(),
                });
            }
            if sweep.num_seeds == 0 {
                return Err(ScenarioError::Invalid {
                    what: "sweep.num_seeds must be at least 1".into(),
                });
            }
            for pair in sweep.values.windows(2) {
                if !(pair[1] > pair[0]) {
                    return Err(ScenarioError::Invalid {
                        what: format!(
                            "sweep.values must be strictly increasing; {} !> {}",
                            pair[1], pair[0]
                        ),
                    });
                }
            }
            for (i, &v) in sweep.values.iter().enumerate() {
                positive(&format!("sweep.values[{i}]"), v)?;
                if sweep.axis == SweepAxis::NumScheduled {
                    let rounded = v.round();
                    if (v - rounded).abs() > 1e-9 || rounded < 1.0 {
                        return Err(ScenarioError::Invalid {
                            what: format!("num_scheduled sweep value {v} is not a positive integer"),
                        });
                    }
                    if rounded > sys.num_devices as f64 {
                        return Err(ScenarioError::Invalid {
                            what: format!(
                                "num_scheduled sweep value {v} exceeds num_devices {}",
                                sys.num_devices
                            ),
                        });
                    }
                }
            }
        }

        if let Some(m) = self.num_scheduled {
            if m == 0 || m > sys.num_devices {
                return Err(ScenarioError::Invalid {
                    what: format!(
                        "num_scheduled {m} outside 1..={}",
                        sys.num_devices
                    ),
                });
            }
        }
        let axis_is_m = self
            .sweep
            .as_ref()
            .is_some_and(|s| s.axis == SweepAxis::NumScheduled);
        if self.schemes.iter().any(Scheme::is_scheduling) && !axis_is_m && self.num_scheduled.is_none()
        {
            return Err(ScenarioError::Invalid {
                what: "scheduling schemes need num_scheduled (or a num_scheduled sweep axis)"
                    .into(),
            });
        }

        if self.slots_per_round < 10 || self.slots_per_round > 1_000_000 {
            return Err(ScenarioError::Invalid {
                what: format!(
                    "slots_per_round {} outside 10..=1000000",
                    self.slots_per_round
                ),
            });
        }
        positive("tolerances.joint_tol", self.tolerances.joint_tol)?;
        positive("tolerances.inner_tol", self.tolerances.inner_tol)?;
        positive("tolerances.certify_tol", self.tolerances.certify_tol)?;
        Ok(())
    }

    /// The solver-facing config at the scenario's base operating point.
    pub fn system_config(&self) -> SystemConfig {
        let seed = match &self.devices {
            DeviceSpec::Explicit(_) => 0,
            DeviceSpec::Distribution(dist) => dist.seed,
        };
        SystemConfig {
            total_bandwidth: self.system.total_bandwidth_hz,
            noise_psd: self.system.noise_psd_w_per_hz,
            round_latency: self.system.round_latency_s,
            gradient_bits: self.system.gradient_bits,
            total_workload: self.system.total_workload,
            num_devices: self.system.num_devices,
            samples_per_device: self.system.samples_per_device,
            flops_per_sample: self.system.flops_per_sample,
            rng_seed: seed,
        }
    }

    /// Slot length used by the sharing simulation for a given round latency.
    pub fn slot_duration(&self, round_latency: f64) -> f64 {
        round_latency / f64::from(self.slots_per_round)
    }

    /// The device population for one round.
    pub fn devices_for_seed(&self, round_seed: u64) -> Result<Vec<DeviceProfile>, ScenarioError> {
        match &self.devices {
            DeviceSpec::Explicit(list) => Ok(list
                .iter()
                .map(|entry| DeviceProfile {
                    id: entry.id,
                    cpu_coeff: entry.cpu_coeff,
                    gpu_coeff: entry.gpu_coeff,
                    channel_gain: entry.channel_gain_sq.sqrt(),
                })
                .collect()),
            DeviceSpec::Distribution(dist) => {
                let mut coeff_rng = ChaCha12Rng::seed_from_u64(dist.seed);
                let mut profiles: Vec<DeviceProfile> = (0..self.system.num_devices)
                    .map(|id| DeviceProfile {
                        id,
                        cpu_coeff: dist.cpu_coeff_choices
                            [coeff_rng.random_range(0..dist.cpu_coeff_choices.len())],
                        gpu_coeff: dist.gpu_coeff_choices
                            [coeff_rng.random_range(0..dist.gpu_coeff_choices.len())],
                        channel_gain: 0.0,
                    })
                    .collect();
                let mut channel_rng =
                    ChaCha12Rng::seed_from_u64(mix_seeds(dist.seed, round_seed));
                let exp = Exp::new(1.0 / dist.avg_channel_gain_sq).map_err(|e| {
                    ScenarioError::Invalid {
                        what: format!("bad channel distribution: {e}"),
                    }
                })?;
                for profile in &mut profiles {
                    // A zero draw has measure zero but would break the model's
                    // positive-gain invariant; skip it deterministically.
                    let gain_sq = loop {
                        let draw: f64 = channel_rng.sample(exp);
                        if draw > 0.0 {
                            break draw;
                        }
                    };
                    profile.channel_gain = gain_sq.sqrt();
                }
                Ok(profiles)
            }
        }
    }
}

/// SplitMix64-style finalizer combining the scenario seed with a round seed so
/// nearby round indices produce unrelated channel streams.
fn mix_seeds(scenario_seed: u64, round_seed: u64) -> u64 {
    let mut z = scenario_seed ^ round_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn distribution_scenario() -> Scenario {
        Scenario {
            version: 1,
            system: SystemSpec {
                total_bandwidth_hz: 5e6,
                noise_psd_w_per_hz: 1e-9,
                round_latency_s: 1.0,
                gradient_bits: 3.49e5,
                total_workload: 9.75,
                workload_unit: Some("MFLOP".into()),
                num_devices: 8,
                samples_per_device: Some(20.0),
                flops_per_sample: Some(0.4875),
            },
            devices: DeviceSpec::Distribution(DeviceDistribution {
                cpu_coeff_choices: vec![0.02, 0.03, 0.04],
                gpu_coeff_choices: vec![0.001, 0.005, 0.01],
                avg_channel_gain_sq: 1e-3,
                seed: 42,
            }),
            schemes: vec![Scheme::NoRm, Scheme::Joint],
            sweep: Some(SweepSpec {
                axis: SweepAxis::RoundLatencyS,
                values: vec![0.6, 1.0, 1.5],
                num_seeds: 3,
            }),
            num_scheduled: None,
            slots_per_round: 1000,
            tolerances: Tolerances::default(),
        }
    }

    fn explicit_scenario() -> Scenario {
        let mut scenario = distribution_scenario();
        scenario.system.num_devices = 2;
        scenario.devices = DeviceSpec::Explicit(vec![
            DeviceEntry {
                id: 0,
                cpu_coeff: 0.02,
                gpu_coeff: 0.004,
                channel_gain_sq: 2e-3,
            },
            DeviceEntry {
                id: 1,
                cpu_coeff: 0.03,
                gpu_coeff: 0.008,
                channel_gain_sq: 5e-4,
            },
        ]);
        scenario
    }

    #[test]
    fn round_trip_preserves_scenario() {
        for scenario in [distribution_scenario(), explicit_scenario()] {
            let text = scenario.to_json_string();
            let back = Scenario::from_json_str(&text).unwrap();
            assert_eq!(back, scenario);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut value: serde_json::Value =
            serde_json::from_str(&distribution_scenario().to_json_string()).unwrap();
        value["surprise"] = serde_json::json!(1);
        let err = Scenario::from_json_str(&value.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { .. }));

        let mut value: serde_json::Value =
            serde_json::from_str(&distribution_scenario().to_json_string()).unwrap();
        value["system"]["bandwidth_mhz"] = serde_json::json!(5.0);
        let err = Scenario::from_json_str(&value.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { .. }));
    }

    #[test]
    fn validation_catches_structural_errors() {
        let mut s = explicit_scenario();
        s.system.num_devices = 3;
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid { .. })));

        let mut s = distribution_scenario();
        s.sweep.as_mut().unwrap().values = vec![1.0, 1.0];
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid { .. })));

        let mut s = distribution_scenario();
        s.system.total_bandwidth_hz = 0.0;
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid { .. })));

        let mut s = distribution_scenario();
        s.schemes.clear();
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid { .. })));

        let mut s = distribution_scenario();
        s.schemes.push(Scheme::ScheduleC2);
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid { .. })));
        s.num_scheduled = Some(4);
        assert!(s.validate().is_ok());

        let mut s = distribution_scenario();
        s.system.samples_per_device = Some(21.0);
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid { .. })));

        let mut s = distribution_scenario();
        s.system.flops_per_sample = None;
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid { .. })));

        let mut s = distribution_scenario();
        s.version = 2;
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid { .. })));
    }

    #[test]
    fn explicit_devices_ignore_round_seed() {
        let scenario = explicit_scenario();
        let a = scenario.devices_for_seed(0).unwrap();
        let b = scenario.devices_for_seed(123).unwrap();
        assert_eq!(a, b);
        assert!((a[0].channel_gain - (2e-3f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distribution_keeps_coefficients_and_redraws_channels() {
        let scenario = distribution_scenario();
        let a = scenario.devices_for_seed(0).unwrap();
        let a_again = scenario.devices_for_seed(0).unwrap();
        let b = scenario.devices_for_seed(1).unwrap();
        assert_eq!(a, a_again);
        assert_eq!(a.len(), 8);
        for (da, db) in a.iter().zip(&b) {
            assert_eq!(da.cpu_coeff, db.cpu_coeff);
            assert_eq!(da.gpu_coeff, db.gpu_coeff);
            assert!(da.channel_gain > 0.0 && db.channel_gain > 0.0);
            assert_ne!(da.channel_gain, db.channel_gain);
        }
        let choices = [0.02, 0.03, 0.04];
        for d in &a {
            assert!(choices.contains(&d.cpu_coeff));
        }
    }

    #[test]
    fn channel_power_matches_configured_mean() {
        let mut scenario = distribution_scenario();
        scenario.system.num_devices = 4000;
        let devices = scenario.devices_for_seed(5).unwrap();
        let mean_gain_sq: f64 =
            devices.iter().map(|d| d.channel_gain * d.channel_gain).sum::<f64>()
                / devices.len() as f64;
        assert!(
            (mean_gain_sq - 1e-3).abs() < 1e-4,
            "sample mean {mean_gain_sq:.3e}"
        );
    }

    #[test]
    fn scheme_names_round_trip() {
        for scheme in Scheme::ALL {
            let json = serde_json::to_string(&scheme).unwrap();
            assert_eq!(json, format!("\"{}\"", scheme.name()));
            let parsed: Scheme = serde_json::from_str(&json).unwrap();
            assert_eq!(parsed, scheme);
            let from_str: Scheme = scheme.name().parse().unwrap();
            assert_eq!(from_str, scheme);
        }
        assert!("warp-drive".parse::<Scheme>().is_err());
    }

    #[test]
    fn config_mirrors_system_spec() {
        let scenario = distribution_scenario();
        let config = scenario.system_config();
        assert_eq!(config.total_bandwidth, 5e6);
        assert_eq!(config.num_devices, 8);
        assert_eq!(config.rng_seed, 42);
        assert_eq!(scenario.slot_duration(1.0), 1e-3);
    }
}
