//! Scalar numerical kernels shared by the solvers: the principal branch of
//! the Lambert W function, a guarded bisection routine, and a handful of
//! small statistics helpers (relative spread, mean/variance, line fit).
//!
//! Everything here is deterministic and allocation-free so the solvers built
//! on top inherit bitwise reproducibility.
//!
//! ## Example
//!
//! ```
//! use c2rm::numerics::lambert_w0;
//!
//! // w e^w = x  =>  w = W0(x)
//! let w = lambert_w0(std::f64::consts::E).unwrap();
//! assert!((w - 1.0).abs() < 1e-14);
//! ```

use std::fmt;

/// Left edge of the principal-branch domain, -1/e.
pub const NEG_INV_E: f64 = -0.367_879_441_171_442_33;

/// Residual target for [`lambert_w0`]: |w e^w - x| <= IDENTITY_TOL * (1 + |x|).
pub const IDENTITY_TOL: f64 = 1e-12;

const HALLEY_MAX_ITERS: usize = 50;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Failure modes of the scalar kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum NumericsError {
    /// Argument outside the mathematical domain of the function.
    OutOfDomain { what: &'static str, value: f64 },
    /// Bracket endpoints that do not straddle a sign change, are not ordered,
    /// or contain NaN.
    InvalidBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    /// The function under a root search returned NaN inside the bracket.
    NanEvaluation { x: f64 },
    /// Iteration budget exhausted before the residual target was met.
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// A statistic of an empty sample was requested.
    EmptySample,
    /// Paired inputs of mismatched length.
    LengthMismatch { left: usize, right: usize },
}

impl fmt::Display for NumericsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericsError::OutOfDomain { what, value } => {
                write!(f, "{what}: argument {value} outside domain")
            }
            NumericsError::InvalidBracket { lo, hi, f_lo, f_hi } => write!(
                f,
                "invalid bracket [{lo}, {hi}] with f(lo) = {f_lo}, f(hi) = {f_hi}"
            ),
            NumericsError::NanEvaluation { x } => {
                write!(f, "function evaluated to NaN at x = {x}")
            }
            NumericsError::NoConvergence {
                what,
                iterations,
                residual,
            } => write!(
                f,
                "{what}: no convergence after {iterations} iterations (residual {residual:e})"
            ),
            NumericsError::EmptySample => write!(f, "statistic of an empty sample"),
            NumericsError::LengthMismatch { left, right } => {
                write!(f, "paired inputs of lengths {left} and {right}")
            }
        }
    }
}

impl std::error::Error for NumericsError {}

// ---------------------------------------------------------------------------
// Lambert W, principal branch
// ---------------------------------------------------------------------------

/// Principal branch `W0` of the Lambert W function: the solution `w >= -1`
/// of `w e^w = x`, defined for `x >= -1/e`.
///
/// Uses a fourth-order series around the branch point and Halley iteration
/// elsewhere (initial guess `ln(1 + x)` for moderate `x >= 0`, the asymptotic
/// `ln x - ln ln x` for large `x`). The result satisfies
/// `|w e^w - x| <= 1e-12 * (1 + |x|)`.
///
/// Arguments below `-1/e` (beyond a few-ulp rounding guard) are rejected.
pub fn lambert_w0(x: f64) -> Result<f64, NumericsError> {
    if x.is_nan() {
        return Err(NumericsError::OutOfDomain {
            what: "lambert_w0",
            value: x,
        });
    }
    if x < NEG_INV_E {
        // Tolerate arguments that land a hair below -1/e through rounding of
        // an expression that is mathematically >= -1/e.
        if x > NEG_INV_E * (1.0 + 1e-12) {
            return Ok(-1.0);
        }
        return Err(NumericsError::OutOfDomain {
            what: "lambert_w0",
            value: x,
        });
    }

    // Distance from the branch point, p = sqrt(2 (1 + e x)).
    let p = (2.0 * (1.0 + std::f64::consts::E * x)).max(0.0).sqrt();
    if p < 1e-3 {
        // Series around w(-1/e) = -1; truncation error is O(p^5) here, far
        // below the residual target.
        return Ok(branch_series(p));
    }

    let mut w = if x >= 3.0 {
        let l = x.ln();
        l - l.ln()
    } else if x >= 0.0 {
        x.ln_1p()
    } else {
        branch_series(p)
    };

    // Halley's method is cubically convergent, so driving the step below
    // ulp scale costs at most one or two extra iterations over a looser
    // residual target and keeps downstream price round-trips exact to
    // machine precision.
    for _ in 0..HALLEY_MAX_ITERS {
        let ew = w.exp();
        let residual = w * ew - x;
        if residual == 0.0 {
            return Ok(w);
        }
        let wp1 = w + 1.0;
        // Halley step: w <- w - f / (f' - f f'' / (2 f')).
        let denom = ew * wp1 - (w + 2.0) * residual / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = residual / denom;
        w -= step;
        if step.abs() <= 2.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }

    let residual = (w * w.exp() - x).abs();
    if residual <= IDENTITY_TOL * (1.0 + x.abs()) {
        Ok(w)
    } else {
        Err(NumericsError::NoConvergence {
            what: "lambert_w0",
            iterations: HALLEY_MAX_ITERS,
            residual,
        })
    }
}

/// Branch-point series w = -1 + p - p²/3 + 11p³/72 - 43p⁴/540.
fn branch_series(p: f64) -> f64 {
    -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0))))
}

// ---------------------------------------------------------------------------
// Bisection
// ---------------------------------------------------------------------------

/// A validated sign-change bracket for a scalar root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl RootBracket {
    /// Builds a bracket, requiring `lo < hi` (both finite) and endpoint values
    /// of opposite sign (zero and infinite endpoint values are allowed; NaN is
    /// not).
    pub fn new(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self, NumericsError> {
        let bad = !(lo < hi)
            || !lo.is_finite()
            || !hi.is_finite()
            || f_lo.is_nan()
            || f_hi.is_nan()
            || (f_lo > 0.0 && f_hi > 0.0)
            || (f_lo < 0.0 && f_hi < 0.0);
        if bad {
            return Err(NumericsError::InvalidBracket { lo, hi, f_lo, f_hi });
        }
        Ok(RootBracket { lo, hi, f_lo, f_hi })
    }
}

/// Bisection on a function with a single sign change inside `bracket`.
///
/// Returns the root estimate and the number of function evaluations. The
/// search stops once the interval width is at most `tol` (or an exact zero is
/// hit), so the evaluation count is bounded by
/// `ceil(log2((hi - lo) / tol)) + 2`. Infinite function values participate
/// through their sign only; NaN aborts the search.
pub fn bisect_monotone<F>(
    f: F,
    bracket: RootBracket,
    tol: f64,
) -> Result<(f64, usize), NumericsError>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(NumericsError::OutOfDomain {
            what: "bisect_monotone tol",
            value: tol,
        });
    }
    if bracket.f_lo == 0.0 {
        return Ok((bracket.lo, 0));
    }
    if bracket.f_hi == 0.0 {
        return Ok((bracket.hi, 0));
    }

    let hi_positive = bracket.f_hi > 0.0;
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let mut evals = 0usize;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval no longer representable
        }
        let fm = f(mid);
        if fm.is_nan() {
            return Err(NumericsError::NanEvaluation { x: mid });
        }
        evals += 1;
        if fm == 0.0 {
            return Ok((mid, evals));
        }
        if (fm > 0.0) == hi_positive {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi), evals))
}

// ---------------------------------------------------------------------------
// Statistics helpers
// ---------------------------------------------------------------------------

/// Dimensionless spread of a sample: `(max - min) / max(|mean|, 1e-300)`.
///
/// A constant sample has spread exactly 0. The floor keeps the quotient
/// defined for samples centred on zero.
pub fn relative_spread(values: &[f64]) -> Result<f64, NumericsError> {
    if values.is_empty() {
        return Err(NumericsError::EmptySample);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in values {
        if v.is_nan() {
            return Err(NumericsError::OutOfDomain {
                what: "relative_spread",
                value: v,
            });
        }
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    let mean = sum / values.len() as f64;
    Ok((hi - lo) / mean.abs().max(1e-300))
}

/// Arithmetic mean.
pub fn mean(values: &[f64]) -> Result<f64, NumericsError> {
    if values.is_empty() {
        return Err(NumericsError::EmptySample);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Population variance (normalised by `n`).
pub fn variance(values: &[f64]) -> Result<f64, NumericsError> {
    let m = mean(values)?;
    let ss = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    Ok(ss / values.len() as f64)
}

/// Least-squares line fit `y ~ slope * x + intercept`; returns
/// `(slope, intercept, r_squared)`. A degenerate fit with zero total variance
/// reports `r_squared = 1`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64), NumericsError> {
    if xs.len() != ys.len() {
        return Err(NumericsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(NumericsError::EmptySample);
    }
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(NumericsError::OutOfDomain {
            what: "linear_fit: zero x variance",
            value: mx,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let e = y - (slope * x + intercept);
        ss_res += e * e;
        ss_tot += (y - my) * (y - my);
    }
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, intercept, r2))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
