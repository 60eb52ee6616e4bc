//! Canned verification battery: runs every oracle family on small fixed
//! instances and reports one pass/fail line each. This is what the CLI's
//! `verify` subcommand prints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{
    bcd_solve_p4, envelope_check, finite_difference_check, grid_search_p1, grid_search_p3,
    toy_feel_train, verify_sampling_identities, OracleError, RateQuery,
};
use crate::comm_rm::algorithm1_solve;
use crate::comp_rm::optimal_workload_split;
use crate::joint_rm::{algorithm2_solve, JointOptions};
use crate::model::{comm_energy, comp_energy_given_time, DeviceProfile, SystemConfig};

/// One verification check and its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationEntry {
    pub name: String,
    pub passed: bool,
    /// Human-readable numbers behind the verdict.
    pub detail: String,
}

/// Outcome of the full battery.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub entries: Vec<VerificationEntry>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

fn config(k: usize, bandwidth: f64) -> SystemConfig {
    SystemConfig {
        total_bandwidth: bandwidth,
        noise_psd: 1e-9,
        round_latency: 1.0,
        gradient_bits: 3.49e5,
        total_workload: 9.75,
        num_devices: k,
        samples_per_device: None,
        flops_per_sample: None,
        rng_seed: 0,
    }
}

fn random_devices(rng: &mut ChaCha12Rng, k: usize) -> Vec<DeviceProfile> {
    (0..k)
        .map(|id| DeviceProfile {
            id,
            cpu_coeff: rng.random_range(0.02..0.04),
            gpu_coeff: rng.random_range(0.001..0.01),
            channel_gain: 10f64.powf(rng.random_range(-3.5..-2.5)).sqrt(),
        })
        .collect()
}

/// Runs the whole battery with a fixed seed; a few seconds of work.
pub fn run_verification(seed: u64) -> Result<VerificationReport, OracleError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut entries = Vec::new();

    // 1. Closed-form workload split vs exhaustive scan.
    {
        let mut worst: f64 = 0.0;
        for id in 0..5 {
            let dev = DeviceProfile {
                id,
                cpu_coeff: rng.random_range(0.5..5.0),
                gpu_coeff: rng.random_range(0.5..5.0),
                channel_gain: 1.0,
            };
            let w = rng.random_range(1.0..10.0);
            let tp = rng.random_range(0.2..2.0);
            let (_, grid) = grid_search_p1(&dev, w, tp, 2000)?;
            let (w_c, w_g) = optimal_workload_split(dev.cpu_coeff, dev.gpu_coeff, w)?;
            let closed = comp_energy_given_time(dev.cpu_coeff, dev.gpu_coeff, w_c, w_g, tp)?;
            worst = worst.max((grid - closed) / closed);
            if closed > grid * (1.0 + 1e-12) {
                worst = f64::INFINITY;
            }
        }
        entries.push(VerificationEntry {
            name: "workload split vs grid".into(),
            passed: worst <= 1e-4,
            detail: format!("worst relative gap {worst:.2e} (grid above closed form)"),
        });
    }

    // 2. Bandwidth fixed point vs simplex scan on pairs.
    {
        let mut worst: f64 = 0.0;
        for _ in 0..3 {
            let cfg = config(2, rng.random_range(1e6..4e6));
            let devs = random_devices(&mut rng, 2);
            let budgets = [rng.random_range(0.3..0.7), rng.random_range(0.3..0.7)];
            let (_, grid) = grid_search_p3(&devs, &budgets, &cfg, 1000)?;
            let (widths, _, _) = algorithm1_solve(&devs, &budgets, &cfg, 1e-12, None)?;
            let solver: f64 = devs
                .iter()
                .zip(&widths)
                .zip(&budgets)
                .map(|((d, &w), &t)| {
                    comm_energy(w, t, d.channel_gain, cfg.noise_psd, cfg.gradient_bits).unwrap()
                })
                .sum();
            worst = worst.max((grid - solver) / solver);
            if solver > grid * (1.0 + 1e-9) {
                worst = f64::INFINITY;
            }
        }
        entries.push(VerificationEntry {
            name: "bandwidth partition vs grid".into(),
            passed: worst <= 2e-3,
            detail: format!("worst relative gap {worst:.2e} (grid above fixed point)"),
        });
    }

    // 3. Master solver vs block coordinate descent.
    {
        let mut worst: f64 = 0.0;
        for _ in 0..3 {
            let k = rng.random_range(2..7);
            let cfg = config(k, 5e6);
            let devs = random_devices(&mut rng, k);
            let (bcd, _) = bcd_solve_p4(&devs, &cfg, 1e-12)?;
            let (joint, _, _) = algorithm2_solve(&devs, &cfg, &JointOptions::default())?;
            worst = worst.max((bcd.sum_energy - joint.sum_energy).abs() / joint.sum_energy);
        }
        entries.push(VerificationEntry {
            name: "joint solver vs coordinate descent".into(),
            passed: worst <= 5e-3,
            detail: format!("worst relative energy gap {worst:.2e}"),
        });
    }

    // 4. Analytic rates vs finite differences.
    {
        let bandwidth = 8e5;
        let tx_time = 0.45;
        let channel_gain = (1e-3f64).sqrt();
        let queries = [
            (
                "upload/bandwidth",
                RateQuery::NuBandwidth {
                    bandwidth,
                    tx_time,
                    channel_gain,
                    noise_psd: 1e-9,
                    bits: 3.49e5,
                },
                1e-6 * bandwidth,
                1e-4,
            ),
            (
                "upload/time",
                RateQuery::XiCommTime {
                    bandwidth,
                    tx_time,
                    channel_gain,
                    noise_psd: 1e-9,
                    bits: 3.49e5,
                },
                1e-6 * tx_time,
                1e-4,
            ),
            (
                "compute/time",
                RateQuery::XiCompTime {
                    cpu_coeff: 0.03,
                    gpu_coeff: 0.005,
                    cpu_load: 2.8,
                    gpu_load: 6.95,
                    compute_time: 0.55,
                },
                1e-6 * 0.55,
                1e-4,
            ),
            (
                "upload curvature",
                RateQuery::PhiBandwidth {
                    bandwidth,
                    tx_time,
                    channel_gain,
                    noise_psd: 1e-9,
                    bits: 3.49e5,
                },
                1e-4 * bandwidth,
                1e-3,
            ),
        ];
        let mut detail = String::new();
        let mut passed = true;
        for (name, q, step, tol) in queries {
            let err = finite_difference_check(&q, step)?;
            passed &= err <= tol;
            detail.push_str(&format!("{name} {err:.1e}; "));
        }
        entries.push(VerificationEntry {
            name: "derivatives vs finite differences".into(),
            passed,
            detail,
        });
    }

    // 5. Envelope identity.
    {
        let cfg = config(1, 5e6);
        let dev = random_devices(&mut rng, 1).pop().expect("one device");
        let report = envelope_check(&dev, &cfg, 8e5, 1e-5)?;
        entries.push(VerificationEntry {
            name: "envelope derivative".into(),
            passed: report.relative_error <= 1e-2,
            detail: format!(
                "fd {:.6e} vs analytic {:.6e} (rel {:.1e})",
                report.fd_derivative, report.analytic_rate, report.relative_error
            ),
        });
    }

    // 6. Subset sampling identities.
    {
        let vectors: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let report = verify_sampling_identities(&vectors, 4, 200_000, seed ^ 0x5eed)?;
        entries.push(VerificationEntry {
            name: "subset sampling identities".into(),
            passed: report.pass,
            detail: format!(
                "subset {:.4} vs {:.4} (se {:.1e}), cross {:.4} vs {:.4} (se {:.1e})",
                report.subset_estimate,
                report.subset_closed,
                report.subset_std_error,
                report.cross_estimate,
                report.cross_closed,
                report.cross_std_error
            ),
        });
    }

    // 7. Training bound on the synthetic task.
    {
        let report = toy_feel_train(10, 4, 100, seed, seed.wrapping_add(1))?;
        entries.push(VerificationEntry {
            name: "training gap under bound".into(),
            passed: report.average_gap <= report.bound.bound_value,
            detail: format!(
                "average gap {:.4e} vs bound {:.4e}",
                report.average_gap, report.bound.bound_value
            ),
        });
    }

    Ok(VerificationReport { entries })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
