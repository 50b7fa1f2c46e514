//! Record a cycle schedule, write it to a versioned JSON file, reload it,
//! and replay it as a nonadaptive run — the workflow that lets pass 2 run
//! in a separate process (or on a different machine) from pass 1.
//!
//! ```bash
//! cargo run --release --example schedule_replay
//! ```

use nalgebra::DMatrix;
use rand::Rng;
use sps::engine::{run_adaptive, run_nonadaptive, CycleSchedule, RunConfig};
use sps::model::{GaussianPrior, LogitData};
use sps::rng::{stream, Phase};

fn main() -> sps::Result<()> {
    let mut rng = stream(512, 0, Phase::Init, 0, 0, 0);
    let t = 80;
    let mut xs = Vec::with_capacity(t);
    let mut labels = Vec::with_capacity(t);
    for _ in 0..t {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let p = 1.0 / (1.0 + (-1.4 * x).exp());
        labels.push(if rng.gen::<f64>() < p { 1 } else { 2 });
        xs.push(x);
    }
    let data = LogitData::new(labels, DMatrix::from_column_slice(t, 1, &xs), 2)?;
    let prior = GaussianPrior::g_prior(data.covariates(), 2, 1.0)?;

    // Pass 1: adapt, keep the schedule, discard the particles.
    let cfg = RunConfig::new(8, 500, 2718);
    let (_, schedule, pass1) = run_adaptive(&data, &prior, &cfg)?;
    let path = std::env::temp_dir().join("sps_example_schedule.json");
    std::fs::write(&path, schedule.to_json()?)?;
    println!(
        "recorded {} cycles ({} mutation steps) -> {}",
        schedule.cycles.len(),
        schedule.total_m_steps(),
        path.display()
    );

    // Pass 2, possibly elsewhere: reload and replay with fresh randomness.
    let reloaded = CycleSchedule::from_json(&std::fs::read_to_string(&path)?)?;
    let mut cfg2 = cfg.clone();
    cfg2.seed = 31415;
    let (_, pass2) = run_nonadaptive(&data, &prior, &cfg2, &reloaded)?;

    println!(
        "pass 1 (adaptive):    E[θ'x̄] = {:.5} [{:.5}]   log ML = {:.4} [{:.4}]",
        pass1.functions[0].mean,
        pass1.functions[0].nse,
        pass1.log_ml.value,
        pass1.log_ml.nse
    );
    println!(
        "pass 2 (replay):      E[θ'x̄] = {:.5} [{:.5}]   log ML = {:.4} [{:.4}]",
        pass2.functions[0].mean,
        pass2.functions[0].nse,
        pass2.log_ml.value,
        pass2.log_ml.nse
    );
    std::fs::remove_file(&path).ok();
    Ok(())
}
