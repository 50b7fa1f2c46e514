//! Run the adaptive sampler on a synthetic three-outcome dataset and print
//! posterior moment approximations with their numerical standard errors.
//!
//! ```bash
//! cargo run --release --example posterior_moments
//! ```

use nalgebra::DMatrix;
use rand::Rng;
use sps::cli::render_report;
use sps::engine::{run_adaptive, RunConfig};
use sps::model::{GaussianPrior, LogitData};
use sps::rng::{stream, Phase};

fn main() -> sps::Result<()> {
    // Synthetic data: 200 observations, three outcomes, intercept + slope.
    let truth = [0.5, 1.0, -0.4, -0.8];
    let mut rng = stream(2024, 0, Phase::Init, 0, 0, 0);
    let t = 200;
    let mut rows = Vec::with_capacity(2 * t);
    let mut labels = Vec::with_capacity(t);
    for _ in 0..t {
        let x: f64 = rng.gen_range(-1.5..1.5);
        let preds = [truth[0] + truth[1] * x, truth[2] + truth[3] * x, 0.0];
        let max = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = preds.iter().map(|p| (p - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut label = 3;
        for (c, w) in weights.iter().enumerate() {
            acc += w;
            if acc > u {
                label = c + 1;
                break;
            }
        }
        labels.push(label);
        rows.push(1.0);
        rows.push(x);
    }
    let data = LogitData::new(labels, DMatrix::from_row_slice(t, 2, &rows), 3)?;

    // Zellner g-prior with g = 1/4: prior log-odds standard deviation
    // sqrt(2g) ≈ 0.71 per covariate direction.
    let prior = GaussianPrior::g_prior(data.covariates(), 3, 0.25)?;

    let cfg = RunConfig::new(10, 1000, 7);
    let (_, schedule, report) = run_adaptive(&data, &prior, &cfg)?;

    print!("{}", render_report(&report));
    println!();
    println!("cycle breakpoints: {:?}", schedule.breakpoints());
    println!(
        "mutation steps per cycle: {:?}",
        schedule.m_step_counts()
    );
    Ok(())
}
