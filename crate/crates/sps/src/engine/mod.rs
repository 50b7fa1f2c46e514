//! The sequential posterior sampler: particle system, correction /
//! selection / mutation phases, the adaptive cycle rule, and schedule
//! replay.
//!
//! A run carries `J` independent groups of `N` particles through the data
//! one cycle at a time. Each cycle absorbs observations into the importance
//! weights until the pooled effective sample size falls below a threshold
//! (correction), resamples within each group (selection), and then applies
//! Metropolis random-walk steps targeting the current posterior until the
//! particles are close to independent again (mutation). The proposal
//! covariance at every step is `h·V` with `V` the pooled particle variance
//! and `h` a scaling factor nudged up or down to chase a 25% acceptance
//! rate.
//!
//! Determinism contract: every random draw comes from a stream keyed by
//! (seed, cycle, phase, step, group, particle), per-particle work writes
//! only to the particle's own slot, and every floating-point reduction runs
//! sequentially in a fixed order. Reports are therefore bitwise identical
//! across worker counts.

mod resample;
mod schedule;

pub use resample::{multinomial_counts, residual_counts, Resampling};
pub use schedule::{CycleSchedule, RecordedCycle};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, accumulate_log_ml, MlReport};
use crate::error::{Error, Result};
use crate::model::{log_likelihood_range, log_predictive, GaussianPrior, LogitData};
use crate::report::{CycleTrace, LogMlSummary, RunReport, ScheduleSummary, REPORT_SCHEMA_VERSION};
use crate::rng::{derived_seed, stream, Phase};

/// Label used to derive the fresh seed for the second pass of the two-pass
/// algorithm.
const TWO_PASS_SEED_LABEL: u64 = 2;

/// A scalar test function of the parameter vector, evaluated over all
/// particles to monitor mixing and to report posterior moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Monitor {
    /// `θ_c' x̄`: the log odds of category `c` against the normalized
    /// category, evaluated at the covariate mean.
    MeanCovariateLogOdds { category: usize },
    /// Mean of all parameter coordinates.
    CoordinateMean,
    /// A single parameter coordinate (0-based).
    Coordinate { index: usize },
}

impl Monitor {
    pub fn name(&self) -> String {
        match self {
            Monitor::MeanCovariateLogOdds { category } => format!("logodds[{category}]@xbar"),
            Monitor::CoordinateMean => "coord_mean".to_string(),
            Monitor::Coordinate { index } => format!("coord[{index}]"),
        }
    }

    #[inline]
    fn evaluate(&self, theta: &[f64], xbar: &[f64]) -> f64 {
        match self {
            Monitor::MeanCovariateLogOdds { category } => {
                let k = xbar.len();
                let block = &theta[(category - 1) * k..category * k];
                block.iter().zip(xbar).map(|(a, b)| a * b).sum()
            }
            Monitor::CoordinateMean => theta.iter().sum::<f64>() / theta.len() as f64,
            Monitor::Coordinate { index } => theta[*index],
        }
    }

    fn validate(&self, dim: usize, k: usize, outcomes: usize) -> Result<()> {
        match self {
            Monitor::MeanCovariateLogOdds { category } => {
                if *category < 1 || *category >= outcomes {
                    return Err(Error::Config(format!(
                        "monitor category {category} outside 1..={}",
                        outcomes - 1
                    )));
                }
                if category * k > dim {
                    return Err(Error::Config(format!(
                        "monitor category {category} exceeds parameter dimension {dim}"
                    )));
                }
            }
            Monitor::Coordinate { index } => {
                if *index >= dim {
                    return Err(Error::Config(format!(
                        "monitor coordinate {index} outside parameter dimension {dim}"
                    )));
                }
            }
            Monitor::CoordinateMean => {}
        }
        Ok(())
    }
}

impl std::str::FromStr for Monitor {
    type Err = String;

    /// Parse `"logodds:C"`, `"coord:I"`, or `"coordmean"`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "coordmean" {
            return Ok(Monitor::CoordinateMean);
        }
        if let Some(rest) = s.strip_prefix("logodds:") {
            let category = rest
                .parse()
                .map_err(|_| format!("bad monitor category '{rest}'"))?;
            return Ok(Monitor::MeanCovariateLogOdds { category });
        }
        if let Some(rest) = s.strip_prefix("coord:") {
            let index = rest
                .parse()
                .map_err(|_| format!("bad monitor coordinate '{rest}'"))?;
            return Ok(Monitor::Coordinate { index });
        }
        Err(format!(
            "unknown monitor '{s}' (expected 'logodds:C', 'coord:I' or 'coordmean')"
        ))
    }
}

/// Default monitors: the `C−1` mean-covariate log-odds plus the coordinate
/// mean. Cheap to evaluate, spans all coefficient blocks, and coincides with
/// the functionals usually reported.
pub fn default_monitors(outcomes: usize) -> Vec<Monitor> {
    let mut monitors: Vec<Monitor> = (1..outcomes)
        .map(|category| Monitor::MeanCovariateLogOdds { category })
        .collect();
    monitors.push(Monitor::CoordinateMean);
    monitors
}

/// All tunable parameters of a run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    /// Number of independent particle groups `J`.
    pub groups: usize,
    /// Particles per group `N`.
    pub per_group: usize,
    pub seed: u64,
    /// Cycle break when `ESS/(J·N)` drops below this.
    pub ess_threshold: f64,
    /// RNE target ending the mutation phase of intermediate cycles.
    pub rne_inter: f64,
    /// RNE target for the final cycle.
    pub rne_final: f64,
    pub h_init: f64,
    pub h_step: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Acceptance rate above which `h` is increased.
    pub accept_target: f64,
    pub resampling: Resampling,
    /// Test functions monitored during mutation; empty picks
    /// [`default_monitors`] at run start.
    pub monitors: Vec<Monitor>,
    /// Safety cap on mutation steps per cycle.
    pub max_m_steps: usize,
}

impl RunConfig {
    /// Configuration with the standard constants: ESS threshold 0.5,
    /// RNE targets 0.35 / 0.9, `h` starting at 0.5 stepped by 0.01 within
    /// [0.1, 1.0], residual resampling, and a 1000-step mutation cap.
    pub fn new(groups: usize, per_group: usize, seed: u64) -> Self {
        Self {
            groups,
            per_group,
            seed,
            ess_threshold: 0.5,
            rne_inter: 0.35,
            rne_final: 0.9,
            h_init: 0.5,
            h_step: 0.01,
            h_min: 0.1,
            h_max: 1.0,
            accept_target: 0.25,
            resampling: Resampling::Residual,
            monitors: Vec::new(),
            max_m_steps: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups < 2 || self.per_group < 2 {
            return Err(Error::Config(format!(
                "need at least 2 groups of 2 particles, got {}×{}",
                self.groups, self.per_group
            )));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold < 1.0) {
            return Err(Error::Config(format!(
                "ESS threshold must lie in (0, 1), got {}",
                self.ess_threshold
            )));
        }
        if !(self.rne_inter > 0.0 && self.rne_inter <= self.rne_final && self.rne_final < 1.0) {
            return Err(Error::Config(format!(
                "RNE targets must satisfy 0 < inter ≤ final < 1, got ({}, {})",
                self.rne_inter, self.rne_final
            )));
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(Error::Config(format!(
                "step-size bounds must satisfy 0 < min ≤ init ≤ max, got ({}, {}, {})",
                self.h_min, self.h_init, self.h_max
            )));
        }
        if self.h_step <= 0.0 || self.h_step.is_nan() {
            return Err(Error::Config(format!("h_step must be positive, got {}", self.h_step)));
        }
        if !(self.accept_target > 0.0 && self.accept_target < 1.0) {
            return Err(Error::Config(format!(
                "acceptance target must lie in (0, 1), got {}",
                self.accept_target
            )));
        }
        if self.max_m_steps == 0 {
            return Err(Error::Config("max_m_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// `J` groups of `N` particles with their log-weights and bookkeeping.
///
/// Particles are stored group-major: particle `(j, n)` occupies the slice
/// `[(j·N + n)·d, (j·N + n + 1)·d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSystem {
    pub(crate) dim: usize,
    pub(crate) groups: usize,
    pub(crate) per_group: usize,
    pub(crate) seed: u64,
    pub(crate) particles: Vec<f64>,
    pub(crate) log_weights: Vec<f64>,
    /// Observations absorbed so far (`s` in cycle terms).
    pub(crate) obs_absorbed: usize,
    /// Current step-size scaling factor.
    pub(crate) h: f64,
    /// Cycle counter; 0 before the first correction phase.
    pub(crate) cycle: usize,
}

impl ParticleSystem {
    /// Draw all `J·N` particles iid from the prior (cycle 0, init streams).
    pub fn init_from_prior(prior: &GaussianPrior, cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let d = prior.dim();
        let (j, n) = (cfg.groups, cfg.per_group);
        let mut particles = vec![0.0; j * n * d];
        let seed = cfg.seed;
        particles
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(idx, slot)| {
                let mut rng = stream(seed, 0, Phase::Init, 0, (idx / n) as u32, (idx % n) as u32);
                let draw = prior.sample(&mut rng);
                slot.copy_from_slice(draw.as_slice());
            });
        Ok(Self {
            dim: d,
            groups: j,
            per_group: n,
            seed,
            particles,
            log_weights: vec![0.0; j * n],
            obs_absorbed: 0,
            h: cfg.h_init,
            cycle: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn per_group(&self) -> usize {
        self.per_group
    }

    /// Total particle count `J·N`.
    pub fn len(&self) -> usize {
        self.groups * self.per_group
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn obs_absorbed(&self) -> usize {
        self.obs_absorbed
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Flat group-major particle storage.
    pub fn particles_raw(&self) -> &[f64] {
        &self.particles
    }

    /// Parameter vector of particle `(j, n)`.
    pub fn particle(&self, group: usize, index: usize) -> &[f64] {
        let start = (group * self.per_group + index) * self.dim;
        &self.particles[start..start + self.dim]
    }

    /// Pooled effective sample size of the current weights.
    pub fn ess(&self) -> f64 {
        ess(&self.log_weights)
    }
}

/// Effective sample size `(Σw)²/Σw²` of log-domain weights, computed after
/// subtracting the maximum (the ratio is scale-invariant, so the shift is
/// exact). Equal weights give `J·N`; one dominant weight gives 1.
pub fn ess(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &lw in log_weights {
        let w = (lw - max).exp();
        sum += w;
        sum_sq += w * w;
    }
    sum * sum / sum_sq
}

/// Correction phase: absorb observations one at a time, multiplying each
/// particle's weight by its predictive density, until `ESS/(J·N)` falls
/// below the threshold or the data are exhausted. Returns the stop point
/// `t_ℓ` (number of observations absorbed so far).
pub fn c_phase(ps: &mut ParticleSystem, data: &LogitData, cfg: &RunConfig) -> Result<usize> {
    let jn = ps.len() as f64;
    let total = data.t();
    if ps.obs_absorbed >= total {
        return Err(Error::Config("correction phase called with no observations left".into()));
    }
    debug_assert!(ps.log_weights.iter().all(|&w| w == 0.0), "weights must be reset at cycle start");
    loop {
        absorb_observation(ps, data)?;
        if ps.ess() / jn < cfg.ess_threshold || ps.obs_absorbed == total {
            return Ok(ps.obs_absorbed);
        }
    }
}

/// Replay variant of the correction phase: absorb exactly up to `breakpoint`
/// with no ESS checks.
pub fn c_phase_to(ps: &mut ParticleSystem, data: &LogitData, breakpoint: usize) -> Result<()> {
    if breakpoint <= ps.obs_absorbed || breakpoint > data.t() {
        return Err(Error::Schedule(format!(
            "breakpoint {breakpoint} incompatible with {} observations absorbed of {}",
            ps.obs_absorbed,
            data.t()
        )));
    }
    while ps.obs_absorbed < breakpoint {
        absorb_observation(ps, data)?;
    }
    Ok(())
}

/// Multiply every particle's weight by the predictive density of the next
/// observation (log-domain addition).
fn absorb_observation(ps: &mut ParticleSystem, data: &LogitData) -> Result<()> {
    let s = ps.obs_absorbed;
    let d = ps.dim;
    let n = ps.per_group;
    let evals: Vec<std::result::Result<f64, ()>> = ps
        .particles
        .par_chunks(d)
        .map(|theta| log_predictive(theta, data, s).map_err(|_| ()))
        .collect();
    for (idx, ev) in evals.iter().enumerate() {
        match ev {
            Ok(lp) => ps.log_weights[idx] += lp,
            Err(()) => {
                return Err(Error::Evaluation {
                    group: idx / n,
                    particle: idx % n,
                    obs: s,
                })
            }
        }
    }
    ps.obs_absorbed = s + 1;
    Ok(())
}

/// Selection phase: within each group independently, resample particles
/// proportional to their weights and reset the weights to one.
pub fn s_phase(ps: &mut ParticleSystem, cfg: &RunConfig) -> Result<()> {
    let (j_count, n_count, d) = (ps.groups, ps.per_group, ps.dim);
    let mut new_particles = vec![0.0; ps.particles.len()];
    for j in 0..j_count {
        let lw = &ps.log_weights[j * n_count..(j + 1) * n_count];
        let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::WeightCollapse {
                group: j,
                cycle: ps.cycle,
                t: ps.obs_absorbed,
            });
        }
        let weights: Vec<f64> = lw.iter().map(|&w| (w - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::WeightCollapse {
                group: j,
                cycle: ps.cycle,
                t: ps.obs_absorbed,
            });
        }
        let mut rng = stream(ps.seed, ps.cycle as u32, Phase::Selection, 0, j as u32, 0);
        let counts = match cfg.resampling {
            Resampling::Residual => residual_counts(&weights, n_count, &mut rng),
            Resampling::Multinomial => multinomial_counts(&weights, n_count, &mut rng),
        };
        let mut write = j * n_count;
        for (src, &count) in counts.iter().enumerate() {
            let src_start = (j * n_count + src) * d;
            for _ in 0..count {
                new_particles[write * d..(write + 1) * d]
                    .copy_from_slice(&ps.particles[src_start..src_start + d]);
                write += 1;
            }
        }
        debug_assert_eq!(write, (j + 1) * n_count);
    }
    ps.particles = new_particles;
    ps.log_weights.fill(0.0);
    Ok(())
}

/// Pooled sample covariance of all particles (denominator `J·N − 1`),
/// accumulated in a fixed sequential order.
pub fn pooled_covariance(ps: &ParticleSystem) -> DMatrix<f64> {
    let d = ps.dim;
    let jn = ps.len();
    let mut mean = vec![0.0; d];
    for idx in 0..jn {
        let theta = &ps.particles[idx * d..(idx + 1) * d];
        for (m, v) in mean.iter_mut().zip(theta) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= jn as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for idx in 0..jn {
        let theta = &ps.particles[idx * d..(idx + 1) * d];
        for c in 0..d {
            diff[c] = theta[c] - mean[c];
        }
        for r in 0..d {
            for c in r..d {
                cov[(r, c)] += diff[r] * diff[c];
            }
        }
    }
    let denom = (jn - 1) as f64;
    for r in 0..d {
        for c in r..d {
            cov[(r, c)] /= denom;
            cov[(c, r)] = cov[(r, c)];
        }
    }
    cov
}

/// Lower Cholesky factor of a proposal covariance, retrying once with a
/// small ridge (`1e−8·tr/d`) before giving up. A failure after the ridge
/// means the particle population has degenerated.
fn proposal_chol(sigma: &DMatrix<f64>, cycle: usize, step: u32) -> Result<DMatrix<f64>> {
    if let Some(chol) = nalgebra::Cholesky::new(sigma.clone()) {
        return Ok(chol.l());
    }
    let d = sigma.nrows();
    let ridge = 1e-8 * sigma.trace() / d as f64;
    if ridge > 0.0 {
        let mut fixed = sigma.clone();
        for i in 0..d {
            fixed[(i, i)] += ridge;
        }
        if let Some(chol) = nalgebra::Cholesky::new(fixed) {
            return Ok(chol.l());
        }
    }
    Err(Error::SingularProposal {
        cycle,
        step: step as usize,
    })
}

/// Log posterior kernel (prior × likelihood of the first `upto`
/// observations) for every particle, in particle order.
fn compute_targets(
    ps: &ParticleSystem,
    data: &LogitData,
    prior: &GaussianPrior,
    upto: usize,
) -> Result<Vec<f64>> {
    let d = ps.dim;
    let n = ps.per_group;
    let evals: Vec<std::result::Result<f64, usize>> = ps
        .particles
        .par_chunks(d)
        .map(|theta| {
            let lik = log_likelihood_range(theta, data, 0..upto).map_err(|e| match e {
                Error::NonFiniteLikelihood { obs } => obs,
                _ => upto,
            })?;
            Ok(prior.log_density(theta) + lik)
        })
        .collect();
    let mut targets = Vec::with_capacity(evals.len());
    for (idx, ev) in evals.into_iter().enumerate() {
        match ev {
            Ok(v) => targets.push(v),
            Err(obs) => {
                return Err(Error::Evaluation {
                    group: idx / n,
                    particle: idx % n,
                    obs,
                })
            }
        }
    }
    Ok(targets)
}

/// One Metropolis random-walk step over all particles with proposal
/// covariance `sigma`. Returns the pooled acceptance rate.
///
/// `step` is the 1-based step index within the current cycle (it keys the
/// random streams). Each particle proposes `θ* = θ + L·z`, with `L` the
/// Cholesky factor of `sigma`, and accepts with probability
/// `min(1, exp(target(θ*) − target(θ)))`.
pub fn m_step(
    ps: &mut ParticleSystem,
    data: &LogitData,
    prior: &GaussianPrior,
    upto: usize,
    sigma: &DMatrix<f64>,
    step: u32,
) -> Result<f64> {
    let chol = proposal_chol(sigma, ps.cycle, step)?;
    let mut targets = compute_targets(ps, data, prior, upto)?;
    m_step_inner(ps, data, prior, upto, &chol, step, &mut targets)
}

/// Mutation step against a cached per-particle log-target. The cache is
/// updated in place for accepted moves, so repeated steps within a phase
/// evaluate each particle's target exactly once.
fn m_step_inner(
    ps: &mut ParticleSystem,
    data: &LogitData,
    prior: &GaussianPrior,
    upto: usize,
    chol_l: &DMatrix<f64>,
    step: u32,
    targets: &mut [f64],
) -> Result<f64> {
    let d = ps.dim;
    let n = ps.per_group;
    let seed = ps.seed;
    let cycle = ps.cycle as u32;

    let outcomes: Vec<std::result::Result<bool, usize>> = ps
        .particles
        .par_chunks_mut(d)
        .zip(targets.par_iter_mut())
        .enumerate()
        .map(|(idx, (theta, target))| {
            let mut rng = stream(
                seed,
                cycle,
                Phase::Mutation,
                step,
                (idx / n) as u32,
                (idx % n) as u32,
            );
            // z first (coordinate order), then the row-by-row triangular
            // multiply; the draw order is part of the determinism contract.
            let mut z = vec![0.0; d];
            for zc in z.iter_mut() {
                *zc = rng.sample::<f64, _>(StandardNormal);
            }
            let mut proposal = vec![0.0; d];
            for r in 0..d {
                let mut acc = 0.0;
                for c in 0..=r {
                    acc += chol_l[(r, c)] * z[c];
                }
                proposal[r] = theta[r] + acc;
            }
            let lik = log_likelihood_range(&proposal, data, 0..upto).map_err(|e| match e {
                Error::NonFiniteLikelihood { obs } => obs,
                _ => upto,
            })?;
            let proposed_target = prior.log_density(&proposal) + lik;
            let u: f64 = rng.gen();
            let accept = u.ln() < proposed_target - *target;
            if accept {
                theta.copy_from_slice(&proposal);
                *target = proposed_target;
            }
            Ok(accept)
        })
        .collect();

    let mut accepted = 0usize;
    for (idx, outcome) in outcomes.iter().enumerate() {
        match outcome {
            Ok(true) => accepted += 1,
            Ok(false) => {}
            Err(obs) => {
                return Err(Error::Evaluation {
                    group: idx / n,
                    particle: idx % n,
                    obs: *obs,
                })
            }
        }
    }
    Ok(accepted as f64 / ps.len() as f64)
}

/// Step-size update: up by `h_step` (capped) when the acceptance rate
/// exceeds the target, down (floored) otherwise.
pub fn adapt_h(h: f64, alpha: f64, cfg: &RunConfig) -> f64 {
    if alpha > cfg.accept_target {
        (h + cfg.h_step).min(cfg.h_max)
    } else {
        (h - cfg.h_step).max(cfg.h_min)
    }
}

/// Monitor values over all particles, in particle order.
pub fn monitor_values(ps: &ParticleSystem, monitor: &Monitor, xbar: &[f64]) -> Vec<f64> {
    ps.particles
        .par_chunks(ps.dim)
        .map(|theta| monitor.evaluate(theta, xbar))
        .collect()
}

/// Result of one adaptive mutation phase.
pub struct MPhaseOutcome {
    pub steps: usize,
    pub proposal_covs: Vec<DMatrix<f64>>,
    pub h_values: Vec<f64>,
    /// Smallest defined monitor RNE at exit (`None` if every monitor had
    /// zero between-group variance).
    pub exit_min_rne: Option<f64>,
    pub last_acceptance: f64,
}

/// Adaptive mutation phase: repeat Metropolis steps with `Σ = h·V` until
/// the RNE of every monitor reaches `k_target`, adapting `h` after each
/// step. Records the covariances actually used so the phase can be
/// replayed.
#[allow(clippy::too_many_arguments)]
pub fn m_phase(
    ps: &mut ParticleSystem,
    data: &LogitData,
    prior: &GaussianPrior,
    upto: usize,
    k_target: f64,
    cfg: &RunConfig,
    monitors: &[Monitor],
    xbar: &[f64],
) -> Result<MPhaseOutcome> {
    let (j, n) = (ps.groups, ps.per_group);
    let mut targets = compute_targets(ps, data, prior, upto)?;
    let mut covs = Vec::new();
    let mut h_values = Vec::new();
    let mut rne_trace = Vec::new();

    for step in 1..=cfg.max_m_steps {
        let pooled = pooled_covariance(ps);
        let sigma = &pooled * ps.h;
        let chol = proposal_chol(&sigma, ps.cycle, step as u32)?;
        h_values.push(ps.h);
        let alpha = m_step_inner(ps, data, prior, upto, &chol, step as u32, &mut targets)?;
        covs.push(sigma);
        ps.h = adapt_h(ps.h, alpha, cfg);

        let mut all_met = true;
        let mut min_rne: Option<f64> = None;
        for monitor in monitors {
            let values = monitor_values(ps, monitor, xbar);
            let means = diagnostics::group_means(&values, j, n);
            let est = diagnostics::nse(&means, n)?;
            match diagnostics::rne(&values, j, n, &est) {
                // Zero between-group variance: dependence is undetectable,
                // treat the criterion as met.
                None => {}
                Some(r) => {
                    min_rne = Some(min_rne.map_or(r, |m| m.min(r)));
                    if r < k_target {
                        all_met = false;
                    }
                }
            }
        }
        rne_trace.push(min_rne.unwrap_or(f64::INFINITY));
        if all_met {
            return Ok(MPhaseOutcome {
                steps: step,
                proposal_covs: covs,
                h_values,
                exit_min_rne: min_rne,
                last_acceptance: alpha,
            });
        }
    }

    let min_rne = rne_trace.last().copied().unwrap_or(f64::NAN);
    Err(Error::MixingFailure {
        cycle: ps.cycle,
        steps: cfg.max_m_steps,
        min_rne,
        target: k_target,
        rne_trace,
    })
}

/// Replay the mutation phase of a recorded cycle: exactly `R_ℓ` steps with
/// the recorded covariances, no RNE checks, no step-size adaptation.
pub fn m_phase_replay(
    ps: &mut ParticleSystem,
    data: &LogitData,
    prior: &GaussianPrior,
    upto: usize,
    recorded: &RecordedCycle,
) -> Result<Option<f64>> {
    if recorded.proposal_covs.is_empty() {
        return Ok(None);
    }
    let mut targets = compute_targets(ps, data, prior, upto)?;
    let mut last = None;
    for (i, sigma) in recorded.proposal_covs.iter().enumerate() {
        let step = (i + 1) as u32;
        let chol = proposal_chol(sigma, ps.cycle, step)?;
        last = Some(m_step_inner(ps, data, prior, upto, &chol, step, &mut targets)?);
    }
    Ok(last)
}

fn resolve_monitors(cfg: &RunConfig, data: &LogitData, dim: usize) -> Result<Vec<Monitor>> {
    let monitors = if cfg.monitors.is_empty() {
        default_monitors(data.outcomes())
    } else {
        cfg.monitors.clone()
    };
    for m in &monitors {
        m.validate(dim, data.k(), data.outcomes())?;
    }
    Ok(monitors)
}

fn check_model(data: &LogitData, prior: &GaussianPrior) -> Result<()> {
    if prior.dim() != data.param_dim() {
        return Err(Error::Config(format!(
            "prior dimension {} does not match model parameter dimension {}",
            prior.dim(),
            data.param_dim()
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    algorithm: &str,
    ps: &ParticleSystem,
    cfg: &RunConfig,
    monitors: &[Monitor],
    xbar: &[f64],
    ml: &MlReport,
    schedule: &CycleSchedule,
    cycle_trace: Vec<CycleTrace>,
    warnings: Vec<String>,
) -> Result<RunReport> {
    let mut functions = Vec::with_capacity(monitors.len());
    for monitor in monitors {
        let values = monitor_values(ps, monitor, xbar);
        functions.push(diagnostics::moment_report(
            &monitor.name(),
            &values,
            ps.groups,
            ps.per_group,
        )?);
    }
    let final_h = schedule
        .cycles
        .last()
        .and_then(|c| c.h_values.last())
        .copied()
        .unwrap_or(cfg.h_init);
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        algorithm: algorithm.to_string(),
        config: cfg.clone(),
        functions,
        log_ml: LogMlSummary {
            value: ml.log_ml(),
            nse: ml.nse()?,
            cycle_terms: ml.cycle_terms.clone(),
        },
        schedule_summary: ScheduleSummary {
            cycles: schedule.cycles.len(),
            breakpoints: schedule.breakpoints(),
            m_steps: schedule.m_step_counts(),
            final_h,
        },
        cycle_trace,
        warnings,
    })
}

/// Run the adaptive sampler end to end: particles from the prior, then
/// correction / selection / mutation cycles until all observations are
/// absorbed and the final-cycle RNE target is met.
///
/// Returns the final particle system, the learned schedule (for replay),
/// and the report.
pub fn run_adaptive(
    data: &LogitData,
    prior: &GaussianPrior,
    cfg: &RunConfig,
) -> Result<(ParticleSystem, CycleSchedule, RunReport)> {
    cfg.validate()?;
    check_model(data, prior)?;
    let dim = prior.dim();
    let monitors = resolve_monitors(cfg, data, dim)?;
    let xbar_vec = data.covariate_mean();
    let xbar = xbar_vec.as_slice();

    let mut warnings = Vec::new();
    if cfg.groups * cfg.per_group < 2 * dim {
        warnings.push(format!(
            "particle count {} is below twice the parameter dimension {dim}; moment approximations may be unreliable",
            cfg.groups * cfg.per_group
        ));
    }

    let mut ps = ParticleSystem::init_from_prior(prior, cfg)?;
    let mut ml = MlReport::new(cfg.groups, cfg.per_group);
    let mut schedule = CycleSchedule::new(dim);
    let mut cycle_trace = Vec::new();
    let total = data.t();

    loop {
        ps.cycle += 1;
        let breakpoint = c_phase(&mut ps, data, cfg)?;
        let ess_fraction = ps.ess() / ps.len() as f64;
        accumulate_log_ml(ps.log_weights(), &mut ml)?;
        s_phase(&mut ps, cfg)?;
        let k_target = if breakpoint == total {
            cfg.rne_final
        } else {
            cfg.rne_inter
        };
        let outcome = m_phase(&mut ps, data, prior, breakpoint, k_target, cfg, &monitors, xbar)?;
        cycle_trace.push(CycleTrace {
            breakpoint,
            m_steps: outcome.steps,
            ess_fraction,
            log_ml_term: *ml.cycle_terms.last().expect("cycle term recorded"),
            h_last: *outcome.h_values.last().expect("at least one mutation step"),
            exit_min_rne: outcome.exit_min_rne,
            last_acceptance: Some(outcome.last_acceptance),
        });
        schedule.cycles.push(RecordedCycle {
            breakpoint,
            proposal_covs: outcome.proposal_covs,
            h_values: outcome.h_values,
        });
        if breakpoint == total {
            break;
        }
    }

    let report = build_report(
        "adaptive",
        &ps,
        cfg,
        &monitors,
        xbar,
        &ml,
        &schedule,
        cycle_trace,
        warnings,
    )?;
    Ok((ps, schedule, report))
}

/// Run the nonadaptive sampler: identical flow, but cycles end exactly at
/// the recorded breakpoints and each mutation phase replays the recorded
/// covariances. Fresh particles and randomness come from `cfg.seed`.
pub fn run_nonadaptive(
    data: &LogitData,
    prior: &GaussianPrior,
    cfg: &RunConfig,
    schedule: &CycleSchedule,
) -> Result<(ParticleSystem, RunReport)> {
    cfg.validate()?;
    check_model(data, prior)?;
    let dim = prior.dim();
    schedule.validate(dim, data.t())?;
    let monitors = resolve_monitors(cfg, data, dim)?;
    let xbar_vec = data.covariate_mean();
    let xbar = xbar_vec.as_slice();

    let mut warnings = Vec::new();
    if cfg.groups * cfg.per_group < 2 * dim {
        warnings.push(format!(
            "particle count {} is below twice the parameter dimension {dim}; moment approximations may be unreliable",
            cfg.groups * cfg.per_group
        ));
    }

    let mut ps = ParticleSystem::init_from_prior(prior, cfg)?;
    let mut ml = MlReport::new(cfg.groups, cfg.per_group);
    let mut cycle_trace = Vec::new();

    for recorded in &schedule.cycles {
        ps.cycle += 1;
        c_phase_to(&mut ps, data, recorded.breakpoint)?;
        let ess_fraction = ps.ess() / ps.len() as f64;
        accumulate_log_ml(ps.log_weights(), &mut ml)?;
        s_phase(&mut ps, cfg)?;
        let last_acceptance = m_phase_replay(&mut ps, data, prior, recorded.breakpoint, recorded)?;
        if let Some(h) = recorded.h_values.last() {
            ps.h = *h;
        }
        cycle_trace.push(CycleTrace {
            breakpoint: recorded.breakpoint,
            m_steps: recorded.m_steps(),
            ess_fraction,
            log_ml_term: *ml.cycle_terms.last().expect("cycle term recorded"),
            h_last: recorded.h_values.last().copied().unwrap_or(cfg.h_init),
            exit_min_rne: None,
            last_acceptance,
        });
    }

    let report = build_report(
        "nonadaptive",
        &ps,
        cfg,
        &monitors,
        xbar,
        &ml,
        schedule,
        cycle_trace,
        warnings,
    )?;
    Ok((ps, report))
}

/// Result of the two-pass algorithm.
pub struct TwoPassRun {
    pub pass1: RunReport,
    pub pass2: RunReport,
    /// The schedule learned in pass 1 and replayed in pass 2.
    pub schedule: CycleSchedule,
}

/// Two-pass algorithm: run the adaptive sampler, discard its particles,
/// keep the schedule, and replay it nonadaptively with fresh particles and
/// randomness. The second pass has fixed design parameters, so the grouped
/// NSE machinery stands on the standard central limit theorem.
pub fn run_two_pass(data: &LogitData, prior: &GaussianPrior, cfg: &RunConfig) -> Result<TwoPassRun> {
    let (_, schedule, pass1) = run_adaptive(data, prior, cfg)?;
    let mut cfg2 = cfg.clone();
    cfg2.seed = derived_seed(cfg.seed, TWO_PASS_SEED_LABEL);
    let (_, pass2) = run_nonadaptive(data, prior, &cfg2, &schedule)?;
    Ok(TwoPassRun {
        pass1,
        pass2,
        schedule,
    })
}
