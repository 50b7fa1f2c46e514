//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `--nocapture` to see them). Criterion 7 needs the real
//! benchmark dataset files and is skipped, with a notice, when the
//! fixtures are not supplied.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng as _;

use sps::cli::toy_dataset;
use sps::data::{self, DatasetSpec, LoadOptions};
use sps::engine::{run_adaptive, run_nonadaptive, run_two_pass, Resampling, RunConfig};
use sps::model::{log_odds, GaussianPrior, LogitData};
use sps::oracle::{quadrature_posterior, scalar_run_reference, QuadratureResult};
use sps::report::RunReport;
use sps::rng::{stream, Phase};

const TOY_SEEDS: std::ops::Range<u64> = 101..121;

struct ToyBattery {
    variant: &'static str,
    quadrature: QuadratureResult,
    reports: Vec<RunReport>,
    elapsed: Duration,
}

fn run_battery(variant: &'static str) -> ToyBattery {
    let start = Instant::now();
    let (dataset, prior) = toy_dataset(variant).expect("toy model");
    let xbar = dataset.covariate_mean();
    let quadrature = quadrature_posterior(
        &dataset,
        &prior,
        |theta| theta.iter().zip(xbar.iter()).map(|(a, b)| a * b).sum(),
        dataset.t(),
        401,
    )
    .expect("quadrature");
    let reports = TOY_SEEDS
        .map(|seed| {
            let cfg = RunConfig::new(10, 1000, seed);
            let (_, _, report) = run_adaptive(&dataset, &prior, &cfg).expect("adaptive run");
            report
        })
        .collect();
    ToyBattery {
        variant,
        quadrature,
        reports,
        elapsed: start.elapsed(),
    }
}

fn batteries() -> &'static [ToyBattery; 2] {
    static CACHE: OnceLock<[ToyBattery; 2]> = OnceLock::new();
    CACHE.get_or_init(|| [run_battery("binomial"), run_battery("binomial-intercept")])
}

#[test]
fn acceptance_1_oracle_moment_equivalence() {
    let mut total_elapsed = Duration::ZERO;
    for battery in batteries() {
        let mut hits = 0;
        for report in &battery.reports {
            let moment = &report.functions[0];
            if (moment.mean - battery.quadrature.mean).abs() <= 3.0 * moment.nse {
                hits += 1;
            }
        }
        total_elapsed += battery.elapsed;
        println!(
            "ACCEPTANCE 1 (oracle moment equivalence, {}): {} — {hits}/20 runs within 3×NSE of quadrature mean {:.6}",
            battery.variant,
            if hits >= 18 { "PASS" } else { "FAIL" },
            battery.quadrature.mean
        );
        assert!(hits >= 18, "{}: only {hits}/20 within 3×NSE", battery.variant);
    }
    println!("ACCEPTANCE 1 runtime: {:.1}s (limit 60s)", total_elapsed.as_secs_f64());
    assert!(total_elapsed < Duration::from_secs(60));
}

#[test]
fn acceptance_2_oracle_log_ml_equivalence() {
    for battery in batteries() {
        let mut hits = 0;
        for report in &battery.reports {
            if (report.log_ml.value - battery.quadrature.log_ml).abs() <= 3.0 * report.log_ml.nse
            {
                hits += 1;
            }
        }
        println!(
            "ACCEPTANCE 2 (oracle log-ML equivalence, {}): {} — {hits}/20 runs within 3×NSE of quadrature log ML {:.4}",
            battery.variant,
            if hits >= 18 { "PASS" } else { "FAIL" },
            battery.quadrature.log_ml
        );
        assert!(hits >= 18, "{}: only {hits}/20 within 3×NSE", battery.variant);
    }
}

#[test]
fn acceptance_3_nse_calibration() {
    let start = Instant::now();
    let (dataset, prior) = toy_dataset("binomial").expect("toy model");
    let mut means = Vec::new();
    let mut nses = Vec::new();
    for seed in 301..317u64 {
        let cfg = RunConfig::new(10, 1000, seed);
        let (_, _, report) = run_adaptive(&dataset, &prior, &cfg).expect("adaptive run");
        means.push(report.functions[0].mean);
        nses.push(report.functions[0].nse);
    }
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let std = (means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let nse_mean = nses.iter().sum::<f64>() / n;
    let ratio = std / nse_mean;
    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE 3 (NSE calibration): {} — empirical std / mean NSE = {ratio:.3} over 16 runs (band [0.6, 1.7]), {:.1}s",
        if (0.6..=1.7).contains(&ratio) { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!((0.6..=1.7).contains(&ratio), "calibration ratio {ratio}");
    assert!(elapsed < Duration::from_secs(120));
}

/// Synthetic three-outcome dataset written to a CSV file and loaded through
/// the regular ingestion path.
fn multinomial_fixture(dir: &std::path::Path) -> LogitData {
    let t = 60;
    let truth = [0.5, 0.9, -0.4, -0.7];
    let mut rng = stream(0xF1C, 0, Phase::Init, 0, 0, 0);
    let mut csv = String::new();
    for _ in 0..t {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let preds = [truth[0] + truth[1] * x, truth[2] + truth[3] * x, 0.0];
        let m = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = preds.iter().map(|p| (p - m).exp()).collect();
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
        csv.push_str(&format!("{label},1.0,{x:.12}\n"));
    }
    let path = dir.join("synthetic_multinomial.csv");
    std::fs::write(&path, csv).unwrap();
    let spec = DatasetSpec::ad_hoc("synthetic_multinomial", 3);
    data::load_csv(&path, &spec, LoadOptions::default()).expect("fixture loads")
}

struct TwoPassBattery {
    pass_pairs: Vec<(RunReport, RunReport)>,
}

fn two_pass_battery() -> &'static TwoPassBattery {
    static CACHE: OnceLock<TwoPassBattery> = OnceLock::new();
    CACHE.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let dataset = multinomial_fixture(dir.path());
        let prior = GaussianPrior::g_prior(dataset.covariates(), 3, 0.25).unwrap();
        let pass_pairs = (401..411u64)
            .map(|seed| {
                let cfg = RunConfig::new(10, 1000, seed);
                let two = run_two_pass(&dataset, &prior, &cfg).expect("two-pass run");
                assert_eq!(
                    two.pass1.schedule_summary, two.pass2.schedule_summary,
                    "replay must preserve the schedule"
                );
                (two.pass1, two.pass2)
            })
            .collect();
        TwoPassBattery { pass_pairs }
    })
}

#[test]
fn acceptance_4_one_pass_two_pass_consistency() {
    let battery = two_pass_battery();
    let mut total = 0;
    let mut hits = 0;
    for (pass1, pass2) in &battery.pass_pairs {
        for (f1, f2) in pass1.functions.iter().zip(&pass2.functions) {
            let combined = (f1.nse * f1.nse + f2.nse * f2.nse).sqrt();
            total += 1;
            if (f1.mean - f2.mean).abs() <= 3.0 * combined {
                hits += 1;
            }
        }
        let combined =
            (pass1.log_ml.nse.powi(2) + pass2.log_ml.nse.powi(2)).sqrt();
        total += 1;
        if (pass1.log_ml.value - pass2.log_ml.value).abs() <= 3.0 * combined {
            hits += 1;
        }
    }
    let rate = hits as f64 / total as f64;
    println!(
        "ACCEPTANCE 4 (one-pass/two-pass consistency): {} — {hits}/{total} functionals within 3×combined NSE over 10 seeds",
        if rate >= 0.95 { "PASS" } else { "FAIL" }
    );
    assert!(rate >= 0.95, "only {hits}/{total} within 3×combined NSE");
}

#[test]
fn acceptance_5_final_cycle_rne_contract() {
    let mut checked = 0;
    for battery in batteries() {
        for report in &battery.reports {
            let min_rne = report.min_function_rne();
            if let Some(r) = min_rne {
                assert!(
                    r >= 0.9,
                    "{} seed {}: final min RNE {r} below 0.9",
                    battery.variant,
                    report.config.seed
                );
            }
            checked += 1;
        }
    }
    for (pass1, _) in &two_pass_battery().pass_pairs {
        if let Some(r) = pass1.min_function_rne() {
            assert!(r >= 0.9, "two-pass seed {}: final min RNE {r}", pass1.config.seed);
        }
        checked += 1;
    }
    println!(
        "ACCEPTANCE 5 (final-cycle RNE ≥ 0.9): PASS — verified on {checked} completed adaptive runs"
    );
}

#[test]
fn acceptance_6_g_prior_scale() {
    // Monte Carlo check that the average over observations of the prior
    // log-odds variance equals 2g (single-covariate design).
    let g = 0.37;
    let t = 12;
    let mut rng = stream(0x6607, 0, Phase::Init, 0, 0, 0);
    let xs: Vec<f64> = (0..t).map(|_| rng.gen_range(0.2..2.0)).collect();
    let x = DMatrix::from_column_slice(t, 1, &xs);
    let prior = GaussianPrior::g_prior(&x, 2, g).unwrap();

    let draws = 200_000;
    let mut sums = vec![0.0; t];
    let mut sq_sums = vec![0.0; t];
    for _ in 0..draws {
        let theta = prior.sample(&mut rng);
        for (i, &xv) in xs.iter().enumerate() {
            let lo = log_odds(theta.as_slice(), &[xv], 1, 2, 2).unwrap();
            sums[i] += lo;
            sq_sums[i] += lo * lo;
        }
    }
    let mut avg_var = 0.0;
    for i in 0..t {
        let mean = sums[i] / draws as f64;
        avg_var += sq_sums[i] / draws as f64 - mean * mean;
    }
    avg_var /= t as f64;
    let rel_err = (avg_var - 2.0 * g).abs() / (2.0 * g);
    println!(
        "ACCEPTANCE 6 (g-prior log-odds scale): {} — mean-over-t variance {avg_var:.5} vs 2g = {:.5} (rel. err {rel_err:.4}, limit 0.02)",
        if rel_err < 0.02 { "PASS" } else { "FAIL" },
        2.0 * g
    );
    assert!(rel_err < 0.02, "relative error {rel_err}");
}

fn fixtures_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("SPS_FIXTURES") {
        return PathBuf::from(dir);
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn acceptance_7_benchmark_reproduction() {
    let dir = fixtures_dir();
    let cars_path = dir.join("cars.csv");
    let caesarean_path = dir.join("caesarean1.csv");
    if !cars_path.exists() || !caesarean_path.exists() {
        println!(
            "ACCEPTANCE 7 (benchmark reproduction): SKIP — fixtures not supplied (expected {} and {}; see README)",
            cars_path.display(),
            caesarean_path.display()
        );
        return;
    }

    // Cars, g = 1/4, J = 40, N = 2500.
    let cars_spec = data::registry_lookup("Cars").unwrap();
    let cars = data::load_csv(&cars_path, &cars_spec, LoadOptions::default()).expect("cars loads");
    let prior = GaussianPrior::g_prior(cars.covariates(), 3, 0.25).unwrap();
    let cfg = RunConfig::new(40, 2500, 20260810);
    let (_, _, report) = run_adaptive(&cars, &prior, &cfg).expect("cars run");

    let theta1 = &report.functions[0];
    let theta2 = &report.functions[1];
    let t1_tol = 3.0 * (theta1.nse.powi(2) + 0.0005f64.powi(2)).sqrt();
    let t2_tol = 3.0 * (theta2.nse.powi(2) + 0.0006f64.powi(2)).sqrt();
    let t1_ok = (theta1.mean - 0.685).abs() <= t1_tol;
    let t2_ok = (theta2.mean - (-0.388)).abs() <= t2_tol;
    let ml_ok = (report.log_ml.value - (-253.62)).abs() <= 0.09;
    let cycles = report.schedule_summary.cycles;
    let cycles_ok = (17..=31).contains(&cycles); // 24 ± 30%

    // Caesarean 1, g = 1.
    let caesarean_spec = data::registry_lookup("Caesarean1").unwrap();
    let caesarean =
        data::load_csv(&caesarean_path, &caesarean_spec, LoadOptions::default()).expect("loads");
    let c_prior = GaussianPrior::g_prior(caesarean.covariates(), 3, 1.0).unwrap();
    let c_cfg = RunConfig::new(40, 2500, 20260811);
    let (_, _, c_report) = run_adaptive(&caesarean, &c_prior, &c_cfg).expect("caesarean run");
    let c_ml_ok = (c_report.log_ml.value - (-177.29)).abs() <= 0.09;

    let pass = t1_ok && t2_ok && ml_ok && cycles_ok && c_ml_ok;
    println!(
        "ACCEPTANCE 7 (benchmark reproduction): {} — cars E(θ1'x̄) {:.4} (target 0.685±{t1_tol:.4}), E(θ2'x̄) {:.4} (target −0.388±{t2_tol:.4}), log ML {:.2} (target −253.62±0.09), cycles {cycles} (target 24±30%), M iterations {}; caesarean1 log ML {:.2} (target −177.29±0.09)",
        if pass { "PASS" } else { "FAIL" },
        theta1.mean,
        theta2.mean,
        report.log_ml.value,
        report.total_m_steps(),
        c_report.log_ml.value
    );
    assert!(pass);
}

#[test]
fn acceptance_8_thread_count_determinism() {
    let (dataset, prior) = toy_dataset("binomial").expect("toy model");
    let cfg = RunConfig::new(4, 200, 808);
    let run = || {
        let (_, schedule, report) = run_adaptive(&dataset, &prior, &cfg).expect("run");
        (report.to_json().unwrap(), schedule.to_json().unwrap())
    };
    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let (report1, schedule1) = pool1.install(run);
    let (report8, schedule8) = pool8.install(run);
    let pass = report1 == report8 && schedule1 == schedule8;
    println!(
        "ACCEPTANCE 8 (worker-count determinism): {} — report and schedule bytes identical under 1 and 8 threads",
        if pass { "PASS" } else { "FAIL" }
    );
    assert_eq!(report1, report8);
    assert_eq!(schedule1, schedule8);
}

#[test]
fn acceptance_9_engine_scalar_bitwise_equivalence() {
    let mut checked = 0;
    for seed in 1..=50u64 {
        // Fresh tiny dataset per seed.
        let mut rng = stream(seed, 0, Phase::Init, 0, 55, 55);
        let t = 5;
        let mut xs = Vec::with_capacity(t);
        let mut ys = Vec::with_capacity(t);
        for _ in 0..t {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let p = 1.0 / (1.0 + (-x).exp());
            ys.push(if rng.gen::<f64>() < p { 1 } else { 2 });
            xs.push(x);
        }
        let data = LogitData::new(ys, DMatrix::from_column_slice(t, 1, &xs), 2).unwrap();
        let prior = GaussianPrior::new(
            nalgebra::DVector::zeros(1),
            DMatrix::from_row_slice(1, 1, &[1.5]),
        )
        .unwrap();

        let mut cfg = RunConfig::new(2, 5, seed);
        cfg.resampling = if seed % 2 == 0 {
            Resampling::Multinomial
        } else {
            Resampling::Residual
        };
        // Loose mutation targets: tiny instances only need a valid schedule.
        cfg.rne_inter = 0.3;
        cfg.rne_final = 0.5;
        cfg.max_m_steps = 2000;

        let (_, schedule, _) = run_adaptive(&data, &prior, &cfg).expect("recording run");
        let (engine_ps, _) = run_nonadaptive(&data, &prior, &cfg, &schedule).expect("replay");
        let reference = scalar_run_reference(&data, &prior, &cfg, &schedule).expect("reference");
        assert_eq!(
            engine_ps.particles_raw(),
            reference.particles_raw(),
            "seed {seed}: particle mismatch"
        );
        assert_eq!(
            engine_ps.log_weights(),
            reference.log_weights(),
            "seed {seed}: weight mismatch"
        );
        assert_eq!(engine_ps.obs_absorbed(), reference.obs_absorbed());
        checked += 1;
    }
    println!(
        "ACCEPTANCE 9 (engine vs scalar oracle): PASS — bitwise equality on {checked}/50 seeds (both resampling schemes)"
    );
}
