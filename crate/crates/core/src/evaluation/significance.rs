use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationResult {
    pub p_value: f64,
    pub significant: bool,
    /// True when every sign assignment was enumerated.
    pub exact: bool,
}

fn abs_mean(d: &[f64], signs: impl Fn(usize) -> bool) -> f64 {
    let sum: f64 = d
        .iter()
        .enumerate()
        .map(|(i, &x)| if signs(i) { -x } else { x })
        .sum();
    (sum / d.len() as f64).abs()
}

/// Paired two-sided permutation test on the mean difference.
///
/// Each pair's difference keeps or flips its sign. All `2^n` assignments
/// are enumerated when that is at most `iterations`; otherwise
/// `iterations` assignments are sampled with `seed` and the p-value is
/// `(1 + hits) / (1 + iterations)`.
pub fn permutation_test(
    a: &[f64],
    b: &[f64],
    iterations: usize,
    alpha: f64,
    seed: u64,
) -> Result<PermutationResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(PermutationResult {
            p_value: 1.0,
            significant: false,
            exact: true,
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed = abs_mean(&d, |_| false);
    let tol = 1e-12 * observed.max(1.0);
    let n = d.len();

    let exact = n < 63 && (1usize << n) <= iterations.max(1);
    let p_value = if exact {
        let total = 1usize << n;
        let hits = (0..total)
            .filter(|mask| abs_mean(&d, |i| mask >> i & 1 == 1) >= observed - tol)
            .count();
        hits as f64 / total as f64
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flips = vec![false; n];
        let mut hits = 0usize;
        for _ in 0..iterations {
            for f in flips.iter_mut() {
                *f = rng.gen();
            }
            if abs_mean(&d, |i| flips[i]) >= observed - tol {
                hits += 1;
            }
        }
        (1 + hits) as f64 / (1 + iterations) as f64
    };
    Ok(PermutationResult {
        p_value,
        significant: p_value < alpha,
        exact,
    })
}
