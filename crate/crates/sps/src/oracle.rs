//! Independent slow-but-exact references used for verification.
//!
//! Two oracles live here, deliberately kept in the shipped library so an
//! installed binary can verify itself on small models:
//!
//! * [`quadrature_posterior`] — deterministic tensor-product Gauss–Legendre
//!   integration of the posterior for models with at most two parameters.
//! * [`scalar_cycle_reference`] / [`scalar_run_reference`] — a plain-loop,
//!   unparallelized replay of the sampler that must reproduce the engine
//!   bitwise. Any divergence pinpoints a defect in the engine's parallel
//!   path or reduction ordering.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::engine::{CycleSchedule, ParticleSystem, RecordedCycle, Resampling, RunConfig};
use crate::error::{Error, Result};
use crate::model::{log_likelihood_range, log_predictive, GaussianPrior, LogitData};
use crate::rng::{stream, Phase};

/// Result of a quadrature pass over the posterior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult {
    /// Posterior expectation of the supplied functional.
    pub mean: f64,
    /// Log of the integral of prior × likelihood (the marginal likelihood).
    pub log_ml: f64,
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
///
/// Newton iteration on the Legendre recurrence; nodes are symmetric and the
/// weights sum to 2.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and its derivative at x.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let delta = p1 / dp;
            x -= delta;
            if delta.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Deterministic quadrature over the posterior of a `d ≤ 2` model.
///
/// Integrates prior × likelihood (of the first `upto` observations) over a
/// box of ±10 prior standard deviations per axis with a tensor-product
/// Gauss–Legendre rule of `nodes_per_axis` points. Returns the normalized
/// posterior expectation of `functional` and the log marginal likelihood.
pub fn quadrature_posterior<F: Fn(&[f64]) -> f64>(
    data: &LogitData,
    prior: &GaussianPrior,
    functional: F,
    upto: usize,
    nodes_per_axis: usize,
) -> Result<QuadratureResult> {
    let d = prior.dim();
    if d > 2 {
        return Err(Error::Config(format!(
            "quadrature oracle supports at most 2 parameters, model has {d}"
        )));
    }
    if d != data.param_dim() {
        return Err(Error::Config(format!(
            "prior dimension {d} does not match model dimension {}",
            data.param_dim()
        )));
    }
    if upto > data.t() {
        return Err(Error::Config(format!(
            "cannot condition on {upto} observations of {}",
            data.t()
        )));
    }
    if nodes_per_axis < 401 {
        return Err(Error::Config(format!(
            "need at least 401 nodes per axis, got {nodes_per_axis}"
        )));
    }

    let (nodes, weights) = gauss_legendre_rule(nodes_per_axis);
    let half_widths: Vec<f64> = (0..d).map(|i| 10.0 * prior.cov()[(i, i)].sqrt()).collect();
    let centers: Vec<f64> = (0..d).map(|i| prior.mean()[i]).collect();

    // Two passes: find the max log-integrand for stability, then accumulate
    // the normalizing constant and the functional moment.
    let eval = |theta: &[f64]| -> Result<f64> {
        Ok(prior.log_density(theta) + log_likelihood_range(theta, data, 0..upto)?)
    };

    let mut max_term = f64::NEG_INFINITY;
    let mut grid: Vec<(Vec<f64>, f64)> = Vec::new(); // (theta, log weight + log integrand)
    match d {
        1 => {
            for (x, w) in nodes.iter().zip(&weights) {
                let theta = [centers[0] + half_widths[0] * x];
                let term = (w * half_widths[0]).ln() + eval(&theta)?;
                max_term = max_term.max(term);
                grid.push((theta.to_vec(), term));
            }
        }
        2 => {
            for (x0, w0) in nodes.iter().zip(&weights) {
                let t0 = centers[0] + half_widths[0] * x0;
                let lw0 = (w0 * half_widths[0]).ln();
                for (x1, w1) in nodes.iter().zip(&weights) {
                    let theta = [t0, centers[1] + half_widths[1] * x1];
                    let term = lw0 + (w1 * half_widths[1]).ln() + eval(&theta)?;
                    max_term = max_term.max(term);
                    grid.push((theta.to_vec(), term));
                }
            }
        }
        _ => unreachable!(),
    }

    let mut normalizer = 0.0;
    let mut moment = 0.0;
    for (theta, term) in &grid {
        let p = (term - max_term).exp();
        normalizer += p;
        moment += p * functional(theta);
    }
    Ok(QuadratureResult {
        mean: moment / normalizer,
        log_ml: max_term + normalizer.ln(),
    })
}

/// Maximum number of particles the scalar reference will accept.
const SCALAR_REFERENCE_LIMIT: usize = 100;

/// Draw the initial particle population with plain loops, using the same
/// per-particle streams as the engine.
pub fn scalar_init_reference(prior: &GaussianPrior, cfg: &RunConfig) -> Result<ParticleSystem> {
    cfg.validate()?;
    check_size(cfg)?;
    let d = prior.dim();
    let (j_count, n_count) = (cfg.groups, cfg.per_group);
    let mut particles = vec![0.0; j_count * n_count * d];
    for j in 0..j_count {
        for n in 0..n_count {
            let mut rng = stream(cfg.seed, 0, Phase::Init, 0, j as u32, n as u32);
            let draw = prior.sample(&mut rng);
            let start = (j * n_count + n) * d;
            particles[start..start + d].copy_from_slice(draw.as_slice());
        }
    }
    Ok(ParticleSystem {
        dim: d,
        groups: j_count,
        per_group: n_count,
        seed: cfg.seed,
        particles,
        log_weights: vec![0.0; j_count * n_count],
        obs_absorbed: 0,
        h: cfg.h_init,
        cycle: 0,
    })
}

/// Execute one recorded correction / selection / mutation cycle with
/// straightforward sequential loops.
///
/// Consumes the same keyed streams as the engine and must match it bitwise;
/// any difference in particles or weights is an engine defect.
pub fn scalar_cycle_reference(
    ps: &ParticleSystem,
    data: &LogitData,
    prior: &GaussianPrior,
    cfg: &RunConfig,
    recorded: &RecordedCycle,
) -> Result<ParticleSystem> {
    check_size(cfg)?;
    let mut ps = ps.clone();
    let d = ps.dim;
    let (j_count, n_count) = (ps.groups, ps.per_group);
    ps.cycle += 1;

    // Correction: absorb observations one at a time, particles in order.
    while ps.obs_absorbed < recorded.breakpoint {
        let s = ps.obs_absorbed;
        for idx in 0..j_count * n_count {
            let theta = ps.particles[idx * d..(idx + 1) * d].to_vec();
            let lp = log_predictive(&theta, data, s).map_err(|_| Error::Evaluation {
                group: idx / n_count,
                particle: idx % n_count,
                obs: s,
            })?;
            ps.log_weights[idx] += lp;
        }
        ps.obs_absorbed = s + 1;
    }

    // Selection: per group, normalized weights, counts, expansion in source
    // order. The multinomial part draws one uniform per remaining slot and
    // locates it by linear scan over the cumulative weights.
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
        let mut counts = vec![0usize; n_count];
        match cfg.resampling {
            Resampling::Residual => {
                let mut residuals = vec![0.0; n_count];
                let mut assigned = 0usize;
                for (n, &w) in weights.iter().enumerate() {
                    let scaled = n_count as f64 * w / total;
                    let floor = scaled.floor();
                    counts[n] = floor as usize;
                    residuals[n] = scaled - floor;
                    assigned += counts[n];
                }
                for _ in 0..n_count - assigned {
                    let residual_total: f64 = residuals.iter().sum();
                    let u: f64 = rng.gen::<f64>() * residual_total;
                    let mut acc = 0.0;
                    let mut pick = n_count - 1;
                    for (n, &r) in residuals.iter().enumerate() {
                        acc += r;
                        if acc > u {
                            pick = n;
                            break;
                        }
                    }
                    counts[pick] += 1;
                }
            }
            Resampling::Multinomial => {
                for _ in 0..n_count {
                    let u: f64 = rng.gen::<f64>() * total;
                    let mut acc = 0.0;
                    let mut pick = n_count - 1;
                    for (n, &w) in weights.iter().enumerate() {
                        acc += w;
                        if acc > u {
                            pick = n;
                            break;
                        }
                    }
                    counts[pick] += 1;
                }
            }
        }
        let mut write = j * n_count;
        for (src, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                let from = (j * n_count + src) * d;
                new_particles[write * d..(write + 1) * d]
                    .copy_from_slice(&ps.particles[from..from + d]);
                write += 1;
            }
        }
    }
    ps.particles = new_particles;
    ps.log_weights.fill(0.0);

    // Mutation: recorded covariances, one particle at a time, recomputing
    // the current target from scratch at every step (no caching).
    let upto = recorded.breakpoint;
    for (i, sigma) in recorded.proposal_covs.iter().enumerate() {
        let step = (i + 1) as u32;
        let chol = nalgebra::Cholesky::new(sigma.clone())
            .map(|c| c.l())
            .or_else(|| {
                let ridge = 1e-8 * sigma.trace() / d as f64;
                if ridge > 0.0 {
                    let mut fixed = sigma.clone();
                    for i in 0..d {
                        fixed[(i, i)] += ridge;
                    }
                    nalgebra::Cholesky::new(fixed).map(|c| c.l())
                } else {
                    None
                }
            })
            .ok_or(Error::SingularProposal {
                cycle: ps.cycle,
                step: step as usize,
            })?;
        for idx in 0..j_count * n_count {
            let mut rng = stream(
                ps.seed,
                ps.cycle as u32,
                Phase::Mutation,
                step,
                (idx / n_count) as u32,
                (idx % n_count) as u32,
            );
            let theta = ps.particles[idx * d..(idx + 1) * d].to_vec();
            let mut z = vec![0.0; d];
            for zc in z.iter_mut() {
                *zc = rng.sample::<f64, _>(StandardNormal);
            }
            let mut proposal = vec![0.0; d];
            for r in 0..d {
                let mut acc = 0.0;
                for c in 0..=r {
                    acc += chol[(r, c)] * z[c];
                }
                proposal[r] = theta[r] + acc;
            }
            let current = prior.log_density(&theta)
                + log_likelihood_range(&theta, data, 0..upto)?;
            let proposed = prior.log_density(&proposal)
                + log_likelihood_range(&proposal, data, 0..upto)?;
            let u: f64 = rng.gen();
            if u.ln() < proposed - current {
                ps.particles[idx * d..(idx + 1) * d].copy_from_slice(&proposal);
            }
        }
    }
    if let Some(h) = recorded.h_values.last() {
        ps.h = *h;
    }
    Ok(ps)
}

/// Full nonadaptive run with the scalar reference: initialization plus one
/// [`scalar_cycle_reference`] per recorded cycle.
pub fn scalar_run_reference(
    data: &LogitData,
    prior: &GaussianPrior,
    cfg: &RunConfig,
    schedule: &CycleSchedule,
) -> Result<ParticleSystem> {
    schedule.validate(prior.dim(), data.t())?;
    let mut ps = scalar_init_reference(prior, cfg)?;
    for recorded in &schedule.cycles {
        ps = scalar_cycle_reference(&ps, data, prior, cfg, recorded)?;
    }
    Ok(ps)
}

fn check_size(cfg: &RunConfig) -> Result<()> {
    if cfg.groups * cfg.per_group > SCALAR_REFERENCE_LIMIT {
        return Err(Error::Config(format!(
            "scalar reference is for small instances (J·N ≤ {SCALAR_REFERENCE_LIMIT}), got {}",
            cfg.groups * cfg.per_group
        )));
    }
    Ok(())
}
