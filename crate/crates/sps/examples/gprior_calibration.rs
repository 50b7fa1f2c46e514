//! The substantive meaning of the g-prior: under `Σ = g·T·(X'X)^{−1}`,
//! a log odds ratio evaluated at a covariate drawn from the sample rows is
//! centered at zero with standard deviation √(2g). Draw from the prior and
//! check the 95% interval against `(log(1/4), log 4)` for g = 1/4.
//!
//! ```bash
//! cargo run --release --example gprior_calibration
//! ```

use nalgebra::DMatrix;
use rand::Rng;
use sps::model::{log_odds, GaussianPrior};
use sps::rng::{stream, Phase};

fn main() -> sps::Result<()> {
    let g = 0.25;
    let t = 50;
    let mut rng = stream(31337, 0, Phase::Init, 0, 0, 0);
    let xs: Vec<f64> = (0..t).map(|_| rng.gen_range(0.25..2.5)).collect();
    let x = DMatrix::from_column_slice(t, 1, &xs);
    let prior = GaussianPrior::g_prior(&x, 2, g)?;

    let draws = 200_000;
    let mut sums = vec![0.0; t];
    let mut squares = vec![0.0; t];
    for _ in 0..draws {
        let theta = prior.sample(&mut rng);
        for (i, &xv) in xs.iter().enumerate() {
            let lo = log_odds(theta.as_slice(), &[xv], 1, 2, 2)?;
            sums[i] += lo;
            squares[i] += lo * lo;
        }
    }
    let mut avg_var = 0.0;
    for i in 0..t {
        let mean = sums[i] / draws as f64;
        avg_var += squares[i] / draws as f64 - mean * mean;
    }
    avg_var /= t as f64;

    println!("g = {g}");
    println!("mean-over-rows prior variance of the log odds: {avg_var:.5}");
    println!("target 2g = {:.5}  (relative error {:.4})", 2.0 * g, (avg_var - 2.0 * g).abs() / (2.0 * g));
    let sd = avg_var.sqrt();
    println!(
        "implied 95% interval: ({:.4}, {:.4});  (log 1/4, log 4) = ({:.4}, {:.4})",
        -1.96 * sd,
        1.96 * sd,
        (0.25f64).ln(),
        4.0f64.ln()
    );
    Ok(())
}
