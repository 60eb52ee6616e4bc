//! Python bindings for the `c2rm` library.
//!
//! Exposes the device/system model plus the main solver entry points —
//! workload splitting, bandwidth partitioning, the joint equilibrium solve,
//! device scheduling, slotted spectrum sharing, and the training-convergence
//! bound — as a CPython extension module named `c2rm_py`. Channel quality is
//! passed as the power gain `h^2` everywhere, matching the scenario-file
//! convention; solver results come back as plain dictionaries.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use c2rm::comm_rm::algorithm1_solve;
use c2rm::comp_rm::solve_computation_rm;
use c2rm::joint_rm::{algorithm2_solve, JointOptions};
use c2rm::model::{self, ConvergenceBoundInput};
use c2rm::numerics;
use c2rm::scheduling;
use c2rm::spectrum_sharing;

fn value_error<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One edge device: CPU/GPU energy coefficients and its uplink channel.
#[pyclass(name = "DeviceProfile", from_py_object)]
#[derive(Clone)]
struct PyDeviceProfile {
    inner: model::DeviceProfile,
}

#[pymethods]
impl PyDeviceProfile {
    #[new]
    fn new(id: usize, cpu_coeff: f64, gpu_coeff: f64, channel_gain_sq: f64) -> PyResult<Self> {
        if !(channel_gain_sq.is_finite() && channel_gain_sq > 0.0) {
            return Err(PyValueError::new_err(format!(
                "channel_gain_sq must be positive and finite, got {channel_gain_sq}"
            )));
        }
        let inner = model::DeviceProfile {
            id,
            cpu_coeff,
            gpu_coeff,
            channel_gain: channel_gain_sq.sqrt(),
        };
        inner.validate().map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> usize {
        self.inner.id
    }

    #[getter]
    fn cpu_coeff(&self) -> f64 {
        self.inner.cpu_coeff
    }

    #[getter]
    fn gpu_coeff(&self) -> f64 {
        self.inner.gpu_coeff
    }

    #[getter]
    fn channel_gain_sq(&self) -> f64 {
        self.inner.channel_gain * self.inner.channel_gain
    }

    fn __repr__(&self) -> String {
        format!(
            "DeviceProfile(id={}, cpu_coeff={}, gpu_coeff={}, channel_gain_sq={})",
            self.inner.id,
            self.inner.cpu_coeff,
            self.inner.gpu_coeff,
            self.channel_gain_sq()
        )
    }
}

/// Shared round parameters: bandwidth, noise, latency, upload size, workload.
#[pyclass(name = "SystemConfig", from_py_object)]
#[derive(Clone)]
struct PySystemConfig {
    inner: model::SystemConfig,
}

#[pymethods]
impl PySystemConfig {
    #[new]
    #[pyo3(signature = (
        total_bandwidth,
        noise_psd,
        round_latency,
        gradient_bits,
        total_workload,
        num_devices,
        samples_per_device=None,
        flops_per_sample=None,
        rng_seed=0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        total_bandwidth: f64,
        noise_psd: f64,
        round_latency: f64,
        gradient_bits: f64,
        total_workload: f64,
        num_devices: usize,
        samples_per_device: Option<f64>,
        flops_per_sample: Option<f64>,
        rng_seed: u64,
    ) -> PyResult<Self> {
        let inner = model::SystemConfig {
            total_bandwidth,
            noise_psd,
            round_latency,
            gradient_bits,
            total_workload,
            num_devices,
            samples_per_device,
            flops_per_sample,
            rng_seed,
        };
        inner.validate().map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn total_bandwidth(&self) -> f64 {
        self.inner.total_bandwidth
    }

    #[getter]
    fn noise_psd(&self) -> f64 {
        self.inner.noise_psd
    }

    #[getter]
    fn round_latency(&self) -> f64 {
        self.inner.round_latency
    }

    #[getter]
    fn gradient_bits(&self) -> f64 {
        self.inner.gradient_bits
    }

    #[getter]
    fn total_workload(&self) -> f64 {
        self.inner.total_workload
    }

    #[getter]
    fn num_devices(&self) -> usize {
        self.inner.num_devices
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemConfig(total_bandwidth={}, noise_psd={}, round_latency={}, \
             gradient_bits={}, total_workload={}, num_devices={})",
            self.inner.total_bandwidth,
            self.inner.noise_psd,
            self.inner.round_latency,
            self.inner.gradient_bits,
            self.inner.total_workload,
            self.inner.num_devices
        )
    }
}

fn unwrap_devices(devices: &[PyDeviceProfile]) -> Vec<model::DeviceProfile> {
    devices.iter().map(|d| d.inner.clone()).collect()
}

/// Principal branch of the product-log (Lambert W) function.
#[pyfunction]
fn lambert_w0(x: f64) -> PyResult<f64> {
    numerics::lambert_w0(x).map_err(value_error)
}

/// Computation energy `(C W_cpu^3 + G W_gpu^3) / t'^2` at deadline-matching
/// processor speeds.
#[pyfunction]
fn comp_energy(
    cpu_coeff: f64,
    gpu_coeff: f64,
    cpu_load: f64,
    gpu_load: f64,
    compute_time: f64,
) -> PyResult<f64> {
    model::comp_energy_given_time(cpu_coeff, gpu_coeff, cpu_load, gpu_load, compute_time)
        .map_err(value_error)
}

/// Upload energy for sending `bits` over `bandwidth` Hz in `tx_time` seconds
/// on a channel with power gain `channel_gain_sq`.
#[pyfunction]
fn comm_energy(
    bandwidth: f64,
    tx_time: f64,
    channel_gain_sq: f64,
    noise_psd: f64,
    bits: f64,
) -> PyResult<f64> {
    if !(channel_gain_sq.is_finite() && channel_gain_sq > 0.0) {
        return Err(PyValueError::new_err(format!(
            "channel_gain_sq must be positive and finite, got {channel_gain_sq}"
        )));
    }
    model::comm_energy(bandwidth, tx_time, channel_gain_sq.sqrt(), noise_psd, bits)
        .map_err(value_error)
}

/// Optimal CPU/GPU workload split per device at the given compute deadlines.
#[pyfunction]
fn solve_computation(
    py: Python<'_>,
    devices: Vec<PyDeviceProfile>,
    compute_times: Vec<f64>,
    total_workload: f64,
) -> PyResult<Py<PyDict>> {
    let devs = unwrap_devices(&devices);
    let (plans, rates) =
        solve_computation_rm(&devs, &compute_times, total_workload).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item(
        "cpu_loads",
        plans.iter().map(|p| p.cpu_load).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "gpu_loads",
        plans.iter().map(|p| p.gpu_load).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "cpu_speeds",
        plans.iter().map(|p| p.cpu_speed).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "gpu_speeds",
        plans.iter().map(|p| p.gpu_speed).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "energies",
        plans.iter().map(|p| p.energy).collect::<Vec<_>>(),
    )?;
    out.set_item("workload_rates", rates)?;
    out.set_item("sum_energy", plans.iter().map(|p| p.energy).sum::<f64>())?;
    Ok(out.unbind())
}

/// Equal-marginal-price bandwidth partition at fixed upload windows.
#[pyfunction]
#[pyo3(signature = (devices, tx_times, config, tol=1e-12, nu_init=None))]
fn solve_bandwidth(
    py: Python<'_>,
    devices: Vec<PyDeviceProfile>,
    tx_times: Vec<f64>,
    config: PySystemConfig,
    tol: f64,
    nu_init: Option<f64>,
) -> PyResult<Py<PyDict>> {
    let devs = unwrap_devices(&devices);
    let (bandwidths, price, trace) =
        algorithm1_solve(&devs, &tx_times, &config.inner, tol, nu_init).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("bandwidths", bandwidths)?;
    out.set_item("price", price)?;
    out.set_item("iterations", trace.iterations)?;
    out.set_item("final_spread", trace.final_spread)?;
    Ok(out.unbind())
}

/// Full joint solve: bandwidth, time division, workload split, and speeds.
#[pyfunction]
#[pyo3(signature = (devices, config, tol=1e-10))]
fn solve_joint(
    py: Python<'_>,
    devices: Vec<PyDeviceProfile>,
    config: PySystemConfig,
    tol: f64,
) -> PyResult<Py<PyDict>> {
    let devs = unwrap_devices(&devices);
    let opts = JointOptions {
        tol,
        ..JointOptions::default()
    };
    let (allocation, diagnostics, trace) =
        algorithm2_solve(&devs, &config.inner, &opts).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("sum_energy", allocation.sum_energy)?;
    out.set_item("comp_energy", allocation.comp_energy())?;
    out.set_item("comm_energy", allocation.comm_energy())?;
    out.set_item(
        "bandwidths",
        allocation
            .communication
            .iter()
            .map(|p| p.bandwidth)
            .collect::<Vec<_>>(),
    )?;
    out.set_item(
        "tx_times",
        allocation
            .communication
            .iter()
            .map(|p| p.tx_time)
            .collect::<Vec<_>>(),
    )?;
    out.set_item(
        "compute_times",
        allocation
            .computation
            .iter()
            .map(|p| p.compute_time)
            .collect::<Vec<_>>(),
    )?;
    out.set_item(
        "cpu_loads",
        allocation
            .computation
            .iter()
            .map(|p| p.cpu_load)
            .collect::<Vec<_>>(),
    )?;
    out.set_item(
        "gpu_loads",
        allocation
            .computation
            .iter()
            .map(|p| p.gpu_load)
            .collect::<Vec<_>>(),
    )?;
    out.set_item("prices", diagnostics.nu)?;
    out.set_item("residual_time", diagnostics.residual_time)?;
    out.set_item("residual_nu", diagnostics.residual_nu)?;
    out.set_item("residual_workload", diagnostics.residual_workload)?;
    out.set_item("residual_speed", diagnostics.residual_speed)?;
    out.set_item("certified", diagnostics.pass)?;
    out.set_item("outer_iterations", trace.outer_iterations)?;
    Ok(out.unbind())
}

/// Energy-ranked device selection under an equal-share bandwidth estimate.
#[pyfunction]
fn schedule(
    py: Python<'_>,
    devices: Vec<PyDeviceProfile>,
    config: PySystemConfig,
    num_scheduled: usize,
) -> PyResult<Py<PyDict>> {
    let devs = unwrap_devices(&devices);
    let decision =
        scheduling::schedule(&devs, &config.inner, num_scheduled).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("selected", decision.selected)?;
    out.set_item("infeasible", decision.infeasible)?;
    out.set_item("metrics", decision.metrics)?;
    out.set_item("roots", decision.roots)?;
    Ok(out.unbind())
}

/// Uniform random device selection, for baseline comparisons.
#[pyfunction]
fn random_schedule(
    py: Python<'_>,
    devices: Vec<PyDeviceProfile>,
    num_scheduled: usize,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let devs = unwrap_devices(&devices);
    let decision =
        scheduling::random_schedule(&devs, num_scheduled, seed).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("selected", decision.selected)?;
    Ok(out.unbind())
}

/// Round energy with and without granting idle spectrum to the device with
/// the smallest energy-bandwidth curvature, under identical slotting.
#[pyfunction]
fn sharing_gain(
    py: Python<'_>,
    devices: Vec<PyDeviceProfile>,
    config: PySystemConfig,
    slot_duration: f64,
) -> PyResult<Py<PyDict>> {
    let devs = unwrap_devices(&devices);
    let gain =
        spectrum_sharing::sharing_gain(&devs, &config.inner, slot_duration).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("energy_without", gain.energy_without)?;
    out.set_item("energy_with", gain.energy_with)?;
    out.set_item("relative_gain", gain.relative_gain)?;
    Ok(out.unbind())
}

/// Average-optimality-gap bound for `num_rounds` of federated training with
/// `num_scheduled` of `num_devices` clients sampled per round.
#[pyfunction]
fn convergence_bound(
    py: Python<'_>,
    num_rounds: usize,
    num_devices: usize,
    num_scheduled: usize,
    variance_bound: f64,
    smoothness: f64,
    init_dist_sq: f64,
) -> PyResult<Py<PyDict>> {
    let bound = model::convergence_bound(&ConvergenceBoundInput {
        num_rounds,
        num_devices,
        num_scheduled,
        variance_bound,
        smoothness,
        init_dist_sq,
    })
    .map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("learning_rate", bound.learning_rate)?;
    out.set_item("bound_value", bound.bound_value)?;
    Ok(out.unbind())
}

#[pymodule]
fn c2rm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDeviceProfile>()?;
    m.add_class::<PySystemConfig>()?;
    m.add_function(wrap_pyfunction!(lambert_w0, m)?)?;
    m.add_function(wrap_pyfunction!(comp_energy, m)?)?;
    m.add_function(wrap_pyfunction!(comm_energy, m)?)?;
    m.add_function(wrap_pyfunction!(solve_computation, m)?)?;
    m.add_function(wrap_pyfunction!(solve_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(solve_joint, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(random_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(sharing_gain, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_bound, m)?)?;
    Ok(())
}
