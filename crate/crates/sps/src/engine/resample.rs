//! Within-group resampling: residual and multinomial schemes.
//!
//! Both operate on one group at a time and return per-particle offspring
//! counts summing to the group size. Residual resampling first takes the
//! deterministic copies `⌊N·w̃_n⌋`, then draws the remainder multinomially
//! from the fractional parts — lower variance than pure multinomial
//! sampling for the same weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Resampling scheme used in the selection phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    Residual,
    Multinomial,
}

impl std::str::FromStr for Resampling {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "residual" => Ok(Resampling::Residual),
            "multinomial" => Ok(Resampling::Multinomial),
            other => Err(format!("unknown resampling scheme '{other}'")),
        }
    }
}

impl std::fmt::Display for Resampling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Resampling::Residual => write!(f, "residual"),
            Resampling::Multinomial => write!(f, "multinomial"),
        }
    }
}

/// Draw `draws` indices from the categorical distribution proportional to
/// `weights`, returning aggregated counts. Uses one uniform per draw and a
/// binary search over the cumulative sums, so the stream consumption is
/// fixed at `draws` values.
pub fn multinomial_counts<R: Rng>(weights: &[f64], draws: usize, rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let mut counts = vec![0usize; n];
    if draws == 0 {
        return counts;
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut total = 0.0;
    for &w in weights {
        total += w;
        cumulative.push(total);
    }
    debug_assert!(total > 0.0);
    for _ in 0..draws {
        let u: f64 = rng.gen::<f64>() * total;
        // First index with cumulative > u.
        let mut lo = 0usize;
        let mut hi = n - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if cumulative[mid] > u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        counts[lo] += 1;
    }
    counts
}

/// Residual resampling counts: `⌊N·w̃_n⌋` deterministic copies plus a
/// multinomial draw of the remainder from the fractional parts.
///
/// `weights` need not be normalized. When the fractional mass is zero the
/// result is fully deterministic and no randomness is consumed.
pub fn residual_counts<R: Rng>(weights: &[f64], target: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0);
    let tf = target as f64;
    let mut counts = Vec::with_capacity(weights.len());
    let mut residuals = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for &w in weights {
        let scaled = tf * w / total;
        let floor = scaled.floor();
        counts.push(floor as usize);
        residuals.push(scaled - floor);
        assigned += floor as usize;
    }
    let remainder = target - assigned;
    if remainder > 0 {
        let residual_mass: f64 = residuals.iter().sum();
        debug_assert!(residual_mass > 0.0);
        let extra = multinomial_counts(&residuals, remainder, rng);
        for (c, e) in counts.iter_mut().zip(extra) {
            *c += e;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Phase};
    use proptest::prelude::*;

    #[test]
    fn residual_uniform_weights_copies_everyone_once() {
        let mut r = stream(1, 1, Phase::Selection, 0, 0, 0);
        let counts = residual_counts(&[0.25; 4], 4, &mut r);
        assert_eq!(counts, vec![1, 1, 1, 1]);
    }

    #[test]
    fn residual_no_fractional_mass_is_deterministic() {
        // N = 4, weights {0.5, 0.5, 0, 0} → counts {2, 2, 0, 0} with no draws.
        let mut r = stream(2, 1, Phase::Selection, 0, 0, 0);
        let counts = residual_counts(&[0.5, 0.5, 0.0, 0.0], 4, &mut r);
        assert_eq!(counts, vec![2, 2, 0, 0]);
    }

    #[test]
    fn expected_counts_match_weights() {
        // Binomial sampling oracle: over many replications the mean count of
        // particle n is N·w̃_n within 3 standard errors.
        let weights = [0.4, 0.3, 0.2, 0.1];
        let target = 8usize;
        let reps = 10_000u32;
        for scheme in [Resampling::Residual, Resampling::Multinomial] {
            let mut sums = [0.0f64; 4];
            for rep in 0..reps {
                let mut r = stream(3, rep, Phase::Selection, 0, 0, 0);
                let counts = match scheme {
                    Resampling::Residual => residual_counts(&weights, target, &mut r),
                    Resampling::Multinomial => multinomial_counts(&weights, target, &mut r),
                };
                assert_eq!(counts.iter().sum::<usize>(), target);
                for (s, c) in sums.iter_mut().zip(&counts) {
                    *s += *c as f64;
                }
            }
            for (i, &w) in weights.iter().enumerate() {
                let expected = target as f64 * w;
                let observed = sums[i] / reps as f64;
                // Count variance is at most the multinomial one.
                let se = (target as f64 * w * (1.0 - w) / reps as f64).sqrt();
                assert!(
                    (observed - expected).abs() <= 3.0 * se.max(1e-3),
                    "{scheme}: particle {i}: observed {observed}, expected {expected}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn counts_always_sum_to_target(
            raw in prop::collection::vec(0.0..1.0f64, 3..12),
            target in 1..64usize,
            seed in 0..1000u64,
        ) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let mut r = stream(seed, 0, Phase::Selection, 0, 0, 0);
            let res = residual_counts(&raw, target, &mut r);
            prop_assert_eq!(res.iter().sum::<usize>(), target);
            let mut r = stream(seed, 1, Phase::Selection, 0, 0, 0);
            let mult = multinomial_counts(&raw, target, &mut r);
            prop_assert_eq!(mult.iter().sum::<usize>(), target);

            // Residual scheme: deterministic part is the elementwise floor.
            let total: f64 = raw.iter().sum();
            for (i, &w) in raw.iter().enumerate() {
                let floor = (target as f64 * w / total).floor() as usize;
                prop_assert!(res[i] >= floor);
            }
        }
    }
}
