//! Two-pass validation: run the adaptive sampler, freeze its schedule,
//! replay it with fresh randomness, and check that both passes agree.
//!
//! The adaptive pass picks cycle breakpoints and proposal covariances from
//! the particles themselves, which voids the usual central limit theorem
//! for its numerical standard errors. The second pass replays the frozen
//! schedule as a fully nonadaptive run, restoring the CLT. Agreement
//! between the passes is evidence the adaptive shortcuts did no harm.
//!
//! ```bash
//! cargo run --release --example two_pass_validation
//! ```

use nalgebra::DMatrix;
use rand::Rng;
use sps::engine::{run_two_pass, RunConfig};
use sps::model::{GaussianPrior, LogitData};
use sps::rng::{stream, Phase};

fn main() -> sps::Result<()> {
    let mut rng = stream(99, 0, Phase::Init, 0, 0, 0);
    let t = 120;
    let mut xs = Vec::with_capacity(t);
    let mut labels = Vec::with_capacity(t);
    for _ in 0..t {
        let x: f64 = rng.gen_range(-2.0..2.0);
        let p = 1.0 / (1.0 + (-(0.3 + 1.1 * x)).exp());
        labels.push(if rng.gen::<f64>() < p { 1 } else { 2 });
        xs.push(x);
    }
    let mut rows = Vec::with_capacity(2 * t);
    for x in &xs {
        rows.push(1.0);
        rows.push(*x);
    }
    let data = LogitData::new(labels, DMatrix::from_row_slice(t, 2, &rows), 2)?;
    let prior = GaussianPrior::g_prior(data.covariates(), 2, 0.25)?;

    let cfg = RunConfig::new(10, 1000, 42);
    let two = run_two_pass(&data, &prior, &cfg)?;

    println!(
        "schedule: {} cycles, breakpoints {:?}",
        two.schedule.cycles.len(),
        two.schedule.breakpoints()
    );
    println!();
    println!("{:<18} {:>12} {:>12} {:>12} {:>8}", "functional", "pass 1", "pass 2", "|diff|", "3×NSE");
    for (f1, f2) in two.pass1.functions.iter().zip(&two.pass2.functions) {
        let combined = (f1.nse * f1.nse + f2.nse * f2.nse).sqrt();
        let diff = (f1.mean - f2.mean).abs();
        println!(
            "{:<18} {:>12.5} {:>12.5} {:>12.5} {:>8.5} {}",
            f1.name,
            f1.mean,
            f2.mean,
            diff,
            3.0 * combined,
            if diff <= 3.0 * combined { "ok" } else { "DISAGREE" }
        );
    }
    let ml_combined = (two.pass1.log_ml.nse.powi(2) + two.pass2.log_ml.nse.powi(2)).sqrt();
    let ml_diff = (two.pass1.log_ml.value - two.pass2.log_ml.value).abs();
    println!(
        "{:<18} {:>12.4} {:>12.4} {:>12.5} {:>8.5} {}",
        "log ML",
        two.pass1.log_ml.value,
        two.pass2.log_ml.value,
        ml_diff,
        3.0 * ml_combined,
        if ml_diff <= 3.0 * ml_combined { "ok" } else { "DISAGREE" }
    );
    Ok(())
}
