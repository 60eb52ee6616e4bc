//! Deterministic artifact emission: sweep results as CSV, sweep plots as
//! static SVG, and sharing timelines as CSV.
//!
//! Every float is formatted with 17 significant digits (`{:.16e}`), which
//! round-trips `f64` exactly, so identical runs yield byte-identical files.
//! Wall times never appear in serialized output.

use std::fmt;
use std::fmt::Write as _;

use crate::scenario::Scheme;
use crate::spectrum_sharing::SpectrumTimeline;
use crate::sweep::ResultRow;

/// Fixed leading columns of the sweep CSV; per-device energy columns follow.
pub const SWEEP_CSV_COLUMNS: [&str; 9] = [
    "sweep_value",
    "scheme",
    "seed",
    "sum_energy_j",
    "comp_energy_j",
    "comm_energy_j",
    "residual_time",
    "residual_nu",
    "iterations",
];

/// Fixed columns of the timeline CSV.
pub const TIMELINE_CSV_COLUMNS: [&str; 7] = [
    "slot_index",
    "start_s",
    "device_id",
    "bandwidth_hz",
    "psd_w_per_hz",
    "bits_remaining",
    "energy_j",
];

/// Line color per scheme, indexed by canonical scheme order.
const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];

/// Failures while assembling an artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmitError {
    Empty,
    Inconsistent { what: String },
}

impl fmt::Display for EmitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmitError::Empty => write!(f, "nothing to emit"),
            EmitError::Inconsistent { what } => write!(f, "inconsistent results: {what}"),
        }
    }
}

impl std::error::Error for EmitError {}

fn float(value: f64) -> String {
    format!("{value:.16e}")
}

/// Renders sweep rows as CSV with the documented fixed column order.
pub fn sweep_csv(rows: &[ResultRow]) -> Result<String, EmitError> {
    let first = rows.first().ok_or(EmitError::Empty)?;
    let num_devices = first.device_energy.len();
    let mut out = String::new();
    out.push_str(&SWEEP_CSV_COLUMNS.join(","));
    for k in 0..num_devices {
        write!(out, ",device_{k}_energy_j").expect("string write");
    }
    out.push('\n');
    for row in rows {
        if row.device_energy.len() != num_devices {
            return Err(EmitError::Inconsistent {
                what: format!(
                    "row for scheme {} has {} device energies, expected {num_devices}",
                    row.scheme,
                    row.device_energy.len()
                ),
            });
        }
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            float(row.sweep_value),
            row.scheme,
            row.seed,
            float(row.sum_energy),
            float(row.comp_energy),
            float(row.comm_energy),
            float(row.residual_time),
            float(row.residual_nu),
            row.iterations,
        )
        .expect("string write");
        for &e in &row.device_energy {
            write!(out, ",{}", float(e)).expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Mean sum energy per (scheme, sweep value), schemes in first-appearance
/// order.
fn scheme_series(rows: &[ResultRow]) -> Vec<(Scheme, Vec<(f64, f64)>)> {
    let mut order: Vec<Scheme> = Vec::new();
    for row in rows {
        if !order.contains(&row.scheme) {
            order.push(row.scheme);
        }
    }
    order
        .into_iter()
        .map(|scheme| {
            let mut series: Vec<(f64, f64)> = Vec::new();
            for row in rows.iter().filter(|r| r.scheme == scheme) {
                match series.last_mut() {
                    Some((value, _)) if *value == row.sweep_value => {}
                    _ => series.push((row.sweep_value, 0.0)),
                }
            }
            for point in &mut series {
                let energies: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.scheme == scheme && r.sweep_value == point.0)
                    .map(|r| r.sum_energy)
                    .collect();
                point.1 = energies.iter().sum::<f64>() / energies.len() as f64;
            }
            (scheme, series)
        })
        .collect()
}

/// Renders a static line plot (sweep value on x, per-scheme mean sum energy
/// on y) with one polyline per scheme.
pub fn sweep_svg(rows: &[ResultRow], axis_label: &str) -> Result<String, EmitError> {
    if rows.is_empty() {
        return Err(EmitError::Empty);
    }
    let series = scheme_series(rows);

    let (width, height) = (640.0, 440.0);
    let (left, right, top, bottom) = (80.0, 610.0, 40.0, 390.0);
    let x_min = rows
        .iter()
        .map(|r| r.sweep_value)
        .fold(f64::INFINITY, f64::min);
    let x_max = rows
        .iter()
        .map(|r| r.sweep_value)
        .fold(f64::NEG_INFINITY, f64::max);
    let y_max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .fold(0.0f64, f64::max)
        * 1.05;
    let x_span = x_max - x_min;
    let to_x = |v: f64| {
        if x_span > 0.0 {
            left + (v - x_min) / x_span * (right - left)
        } else {
            0.5 * (left + right)
        }
    };
    let to_y = |e: f64| bottom - e / y_max * (bottom - top);

    let mut out = String::new();
    write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n\
         <line x1=\"{left}\" y1=\"{bottom}\" x2=\"{right}\" y2=\"{bottom}\" stroke=\"black\"/>\n\
         <line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{bottom}\" stroke=\"black\"/>\n"
    )
    .expect("string write");
    write!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{axis_label}</text>\n\
         <text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {})\">sum energy (J)</text>\n",
        0.5 * (left + right),
        height - 8.0,
        0.5 * (top + bottom),
        0.5 * (top + bottom),
    )
    .expect("string write");
    write!(
        out,
        "<text x=\"{left}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{right}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n\
         <text x=\"{}\" y=\"{top}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        bottom + 16.0,
        format!("{x_min:.3e}"),
        bottom + 16.0,
        format!("{x_max:.3e}"),
        left - 6.0,
        bottom,
        "0",
        left - 6.0,
        format!("{y_max:.3e}"),
    )
    .expect("string write");

    for (index, (scheme, points)) in series.iter().enumerate() {
        let color = PALETTE[Scheme::ALL
            .iter()
            .position(|s| s == scheme)
            .expect("known scheme")
            % PALETTE.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(v, e)| format!("{:.3},{:.3}", to_x(v), to_y(e)))
            .collect();
        write!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        )
        .expect("string write");
        write!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{scheme}</text>\n",
            right - 140.0,
            top + 16.0 * index as f64 + 4.0,
        )
        .expect("string write");
        let _ = index;
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders a sharing timeline as CSV: one row per slot per device, device
/// columns indexed by position in the simulated population.
pub fn timeline_csv(timeline: &SpectrumTimeline) -> Result<String, EmitError> {
    if timeline.slots.is_empty() {
        return Err(EmitError::Empty);
    }
    let num_devices = timeline.slots[0].bandwidth.len();
    let mut out = String::new();
    out.push_str(&TIMELINE_CSV_COLUMNS.join(","));
    out.push('\n');
    for slot in &timeline.slots {
        if slot.bandwidth.len() != num_devices {
            return Err(EmitError::Inconsistent {
                what: format!("slot {} has inconsistent device count", slot.index),
            });
        }
        for device in 0..num_devices {
            writeln!(
                out,
                "{},{},{device},{},{},{},{}",
                slot.index,
                float(slot.start),
                float(slot.bandwidth[device]),
                float(slot.psd[device]),
                float(slot.bits_remaining[device]),
                float(slot.energy[device]),
            )
            .expect("string write");
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint_rm::{algorithm2_solve, JointOptions};
    use crate::model::{DeviceProfile, SystemConfig};
    use crate::spectrum_sharing::simulate_round;

    fn sample_rows() -> Vec<ResultRow> {
        let mut rows = Vec::new();
        for &value in &[0.8, 1.0] {
            for seed in 0..2u64 {
                for (i, scheme) in [Scheme::NoRm, Scheme::Joint].into_iter().enumerate() {
                    rows.push(ResultRow {
                        sweep_value: value,
                        scheme,
                        seed,
                        sum_energy: 3.0 - i as f64 + 0.1 * seed as f64,
                        comp_energy: 1.0,
                        comm_energy: 2.0 - i as f64 + 0.1 * seed as f64,
                        residual_time: 1e-11,
                        residual_nu: 1e-13,
                        iterations: 42,
                        wall_time_s: 0.5,
                        device_energy: vec![1.5 - 0.5 * i as f64, 1.5 - 0.5 * i as f64],
                    });
                }
            }
        }
        rows
    }

    #[test]
    fn csv_has_documented_header_and_roundtrips_floats() {
        let rows = sample_rows();
        let csv = sweep_csv(&rows).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sweep_value,scheme,seed,sum_energy_j,comp_energy_j,comm_energy_j,\
             residual_time,residual_nu,iterations,device_0_energy_j,device_1_energy_j"
        );
        assert_eq!(csv.lines().count(), rows.len() + 1);
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 11);
        assert_eq!(fields[1], "no-rm");
        let reparsed: f64 = fields[3].parse().unwrap();
        assert_eq!(reparsed.to_bits(), rows[0].sum_energy.to_bits());
    }

    #[test]
    fn csv_is_deterministic_and_wall_time_free() {
        let mut rows = sample_rows();
        let a = sweep_csv(&rows).unwrap();
        for row in &mut rows {
            row.wall_time_s *= 10.0;
        }
        let b = sweep_csv(&rows).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_rejects_empty_and_ragged_input() {
        assert_eq!(sweep_csv(&[]), Err(EmitError::Empty));
        let mut rows = sample_rows();
        rows[1].device_energy.push(0.0);
        assert!(matches!(
            sweep_csv(&rows),
            Err(EmitError::Inconsistent { .. })
        ));
    }

    #[test]
    fn svg_has_one_polyline_per_scheme() {
        let rows = sample_rows();
        let svg = sweep_svg(&rows, "round latency (s)").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("round latency (s)"));
        assert!(svg.contains("no-rm"));
        assert!(svg.contains("joint"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn timeline_csv_covers_every_slot_and_device() {
        let config = SystemConfig {
            total_bandwidth: 1e6,
            noise_psd: 1e-9,
            round_latency: 1.0,
            gradient_bits: 3.49e5,
            total_workload: 9.75,
            num_devices: 2,
            samples_per_device: None,
            flops_per_sample: None,
            rng_seed: 0,
        };
        let devices = vec![
            DeviceProfile {
                id: 0,
                cpu_coeff: 0.02,
                gpu_coeff: 0.002,
                channel_gain: (2e-3f64).sqrt(),
            },
            DeviceProfile {
                id: 1,
                cpu_coeff: 0.04,
                gpu_coeff: 0.008,
                channel_gain: (4e-4f64).sqrt(),
            },
        ];
        let (allocation, _, _) =
            algorithm2_solve(&devices, &config, &JointOptions::default()).unwrap();
        let timeline = simulate_round(&allocation, &devices, &config, 1e-3).unwrap();
        let csv = timeline_csv(&timeline).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TIMELINE_CSV_COLUMNS.join(","));
        assert_eq!(csv.lines().count(), timeline.slots.len() * 2 + 1);
        for line in lines {
            assert_eq!(line.split(',').count(), 7);
        }
    }
}
