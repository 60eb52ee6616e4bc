//! Energy-optimal resource management for one round of federated edge
//! learning over heterogeneous CPU+GPU devices sharing an FDMA uplink.
//!
//! Each participating device must finish a local gradient computation and
//! upload the result within a common round latency `T`. Its controls are the
//! CPU/GPU workload split (with deadline-matched processor speeds, so power
//! grows cubically in speed), the division of `T` into compute and transmit
//! windows, and its share of the total uplink bandwidth `B`. Computation
//! energy falls as windows lengthen while upload energy rises steeply when
//! either the transmit window or the sub-band shrinks, so the round-energy
//! minimum is an equilibrium where marginal rates balance: per device the
//! compute and transmit time marginals agree, and across devices the
//! bandwidth marginals equal a single shared price.
//!
//! Module map:
//!
//! - [`model`] — device/system parameters, energy formulas and their
//!   analytic marginal rates, allocation containers, equilibrium residual
//!   diagnostics, and the training-convergence bound.
//! - [`numerics`] — scalar kernels: principal-branch product-log (Lambert
//!   W), bracketed bisection, and a least-squares line fit.
//! - [`comp_rm`] — closed-form optimal CPU/GPU workload split per device.
//! - [`comm_rm`] — single-price bandwidth fixed point at fixed upload
//!   windows; the price sequence approaches the equilibrium monotonically
//!   from one side.
//! - [`joint_rm`] — projected-gradient master loop over the time division
//!   with the bandwidth fixed point as inner solver; returns a certified
//!   equilibrium.
//! - [`scheduling`] — energy-ranked selection of a device subset under an
//!   equal-share bandwidth estimate, plus a seeded random baseline.
//! - [`spectrum_sharing`] — slotted round simulation that grants idle
//!   spectrum (devices still computing) to the active device with the
//!   smallest energy-bandwidth curvature; never increases round energy.
//! - [`oracles`] — independent verification: grid searches, a
//!   block-coordinate-descent baseline, finite-difference derivative
//!   checks, Monte-Carlo subset-sampling identities, and a toy convex
//!   federated trainer measured against the convergence bound.
//! - [`scenario`] — versioned JSON experiment descriptions (explicit or
//!   seeded-random device populations).
//! - [`sweep`] — parallel evaluation of management schemes over a parameter
//!   sweep with order-stable, byte-deterministic results, plus the
//!   scheme-dominance assertion.
//! - [`emit`] — CSV and SVG emission with a fixed column order and
//!   round-trip-exact float formatting.
//!
//! The companion binary (`c2rm`) exposes these as subcommands; see the
//! repository README for the command-line surface and scenario schema.

pub mod comm_rm;
pub mod comp_rm;
pub mod emit;
pub mod joint_rm;
pub mod model;
pub mod numerics;
pub mod oracles;
pub mod scenario;
pub mod scheduling;
pub mod spectrum_sharing;
pub mod sweep;
