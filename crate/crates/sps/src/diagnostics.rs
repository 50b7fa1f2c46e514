//! Grouped-particle moment approximation, numerical standard errors,
//! relative numerical efficiency, and marginal-likelihood accumulation.
//!
//! The sampler carries `J` independent groups of `N` particles. A posterior
//! moment is approximated by the grand mean of the per-group means; the
//! dispersion of the group means yields a simulation-consistent variance
//! estimate
//!
//! ```text
//! v̂ = [N/(J−1)] Σ_j (ḡ_j − ḡ)²,     NSE = [v̂/(J·N)]^{1/2},
//! RNE = (JN)^{−1} ΣΣ (g_jn − ḡ)² / v̂.
//! ```
//!
//! RNE near one means the particles carry close to iid information; RNE
//! below one means dependence is inflating the numerical error. All
//! reductions run in a fixed sequential order (groups outer, particles
//! inner) so results are bitwise reproducible regardless of worker count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-group arithmetic means of a `J×N` value array (group-major layout).
pub fn group_means(values: &[f64], groups: usize, per_group: usize) -> Vec<f64> {
    debug_assert_eq!(values.len(), groups * per_group);
    let mut means = Vec::with_capacity(groups);
    for j in 0..groups {
        let mut sum = 0.0;
        for n in 0..per_group {
            sum += values[j * per_group + n];
        }
        means.push(sum / per_group as f64);
    }
    means
}

/// Grand mean and numerical standard error from per-group means.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NseEstimate {
    pub grand_mean: f64,
    /// Estimate of the per-particle asymptotic variance, `[N/(J−1)]Σ(ḡ_j−ḡ)²`.
    pub vhat: f64,
    /// `[v̂/(J·N)]^{1/2}`: the standard error of the grand mean.
    pub nse: f64,
}

/// Compute the grand mean, `v̂`, and NSE from group means.
///
/// Requires `J ≥ 2`; with a single group the variance is undefined.
pub fn nse(group_means: &[f64], per_group: usize) -> Result<NseEstimate> {
    let j = group_means.len();
    if j < 2 {
        return Err(Error::Config(format!(
            "NSE needs at least 2 groups, got {j}"
        )));
    }
    let jf = j as f64;
    let mut grand = 0.0;
    for m in group_means {
        grand += m;
    }
    grand /= jf;
    let mut ss = 0.0;
    for m in group_means {
        ss += (m - grand) * (m - grand);
    }
    let vhat = per_group as f64 / (jf - 1.0) * ss;
    let nse = (vhat / (jf * per_group as f64)).sqrt();
    Ok(NseEstimate {
        grand_mean: grand,
        vhat,
        nse,
    })
}

/// Relative numerical efficiency `(JN)^{−1}ΣΣ(g_jn − ḡ)² / v̂`.
///
/// Returns `None` when `v̂ = 0` (all group means identical): dependence
/// cannot be detected, so no number is reported.
pub fn rne(values: &[f64], groups: usize, per_group: usize, est: &NseEstimate) -> Option<f64> {
    if est.vhat == 0.0 {
        return None;
    }
    let mut ss = 0.0;
    for j in 0..groups {
        for n in 0..per_group {
            let d = values[j * per_group + n] - est.grand_mean;
            ss += d * d;
        }
    }
    Some(ss / (groups * per_group) as f64 / est.vhat)
}

/// Full moment summary for one scalar function of the parameter.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MomentReport {
    pub name: String,
    /// Grand mean `ḡ^(J,N)`.
    pub mean: f64,
    /// Posterior standard deviation estimate, `[(JN)^{−1}ΣΣ(g−ḡ)²]^{1/2}`.
    pub sd: f64,
    pub nse: f64,
    /// `None` when `v̂ = 0` and the efficiency is undefined.
    pub rne: Option<f64>,
    pub group_means: Vec<f64>,
    /// Degrees of freedom of the t interval for the grand mean, `J−1`.
    pub dof: usize,
}

/// Build a [`MomentReport`] from a `J×N` array of function values.
pub fn moment_report(
    name: &str,
    values: &[f64],
    groups: usize,
    per_group: usize,
) -> Result<MomentReport> {
    let means = group_means(values, groups, per_group);
    let est = nse(&means, per_group)?;
    let mut ss = 0.0;
    for v in values {
        let d = v - est.grand_mean;
        ss += d * d;
    }
    let pop_var = ss / (groups * per_group) as f64;
    let rne_val = if est.vhat == 0.0 {
        None
    } else {
        Some(pop_var / est.vhat)
    };
    Ok(MomentReport {
        name: name.to_string(),
        mean: est.grand_mean,
        sd: pop_var.sqrt(),
        nse: est.nse,
        rne: rne_val,
        group_means: means,
        dof: groups - 1,
    })
}

/// Marginal-likelihood accumulator.
///
/// Each completed correction phase contributes the log of the mean particle
/// weight: pooled across all particles for the reported value, and per group
/// for the standard error. The accumulation is invariant to any constant
/// shift of the log-weights (the shift cancels between the max-subtraction
/// and the restored constant).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MlReport {
    groups: usize,
    per_group: usize,
    /// Per-cycle pooled terms `log[(JN)^{−1}ΣΣ w]`.
    pub cycle_terms: Vec<f64>,
    /// Running per-group totals of `log[N^{−1}Σ_n w]`.
    pub group_cumulative: Vec<f64>,
}

impl MlReport {
    pub fn new(groups: usize, per_group: usize) -> Self {
        Self {
            groups,
            per_group,
            cycle_terms: Vec::new(),
            group_cumulative: vec![0.0; groups],
        }
    }

    /// Cumulative log marginal likelihood: the sum of per-cycle pooled terms.
    pub fn log_ml(&self) -> f64 {
        self.cycle_terms.iter().sum()
    }

    /// NSE of the log marginal likelihood, from the dispersion of the
    /// per-group cumulative values across the `J` groups.
    pub fn nse(&self) -> Result<f64> {
        Ok(nse(&self.group_cumulative, self.per_group)?.nse)
    }

    pub fn cycles(&self) -> usize {
        self.cycle_terms.len()
    }
}

/// Absorb one completed correction phase into the accumulator.
///
/// `log_weights` is the `J×N` group-major array at the end of the C phase,
/// before resampling resets it.
pub fn accumulate_log_ml(log_weights: &[f64], report: &mut MlReport) -> Result<()> {
    let (j, n) = (report.groups, report.per_group);
    debug_assert_eq!(log_weights.len(), j * n);

    let mut pooled_max = f64::NEG_INFINITY;
    for &lw in log_weights {
        if !lw.is_finite() {
            return Err(Error::Data(format!(
                "non-finite log-weight in marginal likelihood accumulation: {lw}"
            )));
        }
        pooled_max = pooled_max.max(lw);
    }
    let mut pooled_sum = 0.0;
    for &lw in log_weights {
        pooled_sum += (lw - pooled_max).exp();
    }
    if pooled_sum <= 0.0 || !pooled_sum.is_finite() {
        return Err(Error::Data("all particle weights vanished in ML accumulation".into()));
    }
    report
        .cycle_terms
        .push(pooled_max + (pooled_sum / (j * n) as f64).ln());

    for g in 0..j {
        let slice = &log_weights[g * n..(g + 1) * n];
        let m = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for &lw in slice {
            s += (lw - m).exp();
        }
        report.group_cumulative[g] += m + (s / n as f64).ln();
    }
    Ok(())
}
