//! Monte-Carlo verification of the two uniform-subset sampling identities
//! the convergence bound rests on: for a uniform `M`-subset `S` of `K`
//! fixed vectors with global mean `w_bar` and scatter
//! `S_tot = sum_k ||w_k - w_bar||^2`,
//!
//! ```text
//! E[ sum_{k in S} ||w_k - w_bar||^2 ]                    = (M/K) S_tot
//! E[ sum_{k != l in S} <w_k - w_bar, w_l - w_bar> ]      = -(M(M-1))/(K(K-1)) S_tot
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::OracleError;

/// Monte-Carlo estimates against the closed forms, with per-draw standard
/// errors; `pass` requires both gaps within four standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingReport {
    pub num_draws: usize,
    pub subset_estimate: f64,
    pub subset_closed: f64,
    pub subset_std_error: f64,
    pub cross_estimate: f64,
    pub cross_closed: f64,
    pub cross_std_error: f64,
    pub pass: bool,
}

/// Draws `num_draws` uniform `m`-subsets of the given vectors and compares
/// both subset statistics to their closed forms.
pub fn verify_sampling_identities(
    vectors: &[Vec<f64>],
    m: usize,
    num_draws: usize,
    seed: u64,
) -> Result<SamplingReport, OracleError> {
    let k = vectors.len();
    if k < 2 {
        return Err(OracleError::Config {
            what: format!("need at least 2 vectors, got {k}"),
        });
    }
    if m == 0 || m > k {
        return Err(OracleError::Config {
            what: format!("subset size {m} outside 1..={k}"),
        });
    }
    if num_draws == 0 {
        return Err(OracleError::Config {
            what: "zero draws".into(),
        });
    }
    let dim = vectors[0].len();
    if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
        return Err(OracleError::Config {
            what: "vectors must share a positive dimension".into(),
        });
    }

    let mean: Vec<f64> = (0..dim)
        .map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / k as f64)
        .collect();
    let deviations: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, mu)| x - mu).collect())
        .collect();
    let norms_sq: Vec<f64> = deviations
        .iter()
        .map(|d| d.iter().map(|x| x * x).sum())
        .collect();
    let scatter: f64 = norms_sq.iter().sum();

    let subset_closed = scatter * m as f64 / k as f64;
    let cross_closed = -scatter * (m * (m - 1)) as f64 / (k * (k - 1)) as f64;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sum_x = 0.0;
    let mut sum_x2 = 0.0;
    let mut sum_y = 0.0;
    let mut sum_y2 = 0.0;
    let mut subset_sum = vec![0.0; dim];
    for _ in 0..num_draws {
        let picks = rand::seq::index::sample(&mut rng, k, m);
        subset_sum.fill(0.0);
        let mut x = 0.0;
        for idx in picks.iter() {
            x += norms_sq[idx];
            for (acc, &v) in subset_sum.iter_mut().zip(&deviations[idx]) {
                *acc += v;
            }
        }
        // sum_{k != l} <d_k, d_l> = ||sum d_k||^2 - sum ||d_k||^2.
        let y = subset_sum.iter().map(|v| v * v).sum::<f64>() - x;
        sum_x += x;
        sum_x2 += x * x;
        sum_y += y;
        sum_y2 += y * y;
    }

    let n = num_draws as f64;
    let subset_estimate = sum_x / n;
    let cross_estimate = sum_y / n;
    let var_x = (sum_x2 / n - subset_estimate * subset_estimate).max(0.0);
    let var_y = (sum_y2 / n - cross_estimate * cross_estimate).max(0.0);
    let subset_std_error = (var_x / n).sqrt();
    let cross_std_error = (var_y / n).sqrt();

    // When the statistic is deterministic (full subset, or zero scatter) the
    // standard error collapses to zero and only summation-order rounding
    // remains; a rounding-level floor keeps the gate meaningful there while
    // being negligible against any genuine Monte-Carlo standard error.
    let floor = 1e-12 * scatter;
    let pass = (subset_estimate - subset_closed).abs() <= 4.0 * subset_std_error + floor
        && (cross_estimate - cross_closed).abs() <= 4.0 * cross_std_error + floor;
    Ok(SamplingReport {
        num_draws,
        subset_estimate,
        subset_closed,
        subset_std_error,
        cross_estimate,
        cross_closed,
        cross_std_error,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
