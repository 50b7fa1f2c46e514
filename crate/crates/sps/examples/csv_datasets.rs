//! Dataset ingestion: CSV loading with validation, the benchmark registry,
//! and the empty-cell design supplement for saturated indicator models.
//!
//! ```bash
//! cargo run --release --example csv_datasets
//! ```

use nalgebra::DMatrix;
use sps::data::{design_supplement, load_csv, registry, DatasetSpec, LoadOptions};
use sps::model::GaussianPrior;

fn main() -> sps::Result<()> {
    // The registry: expected dimensions and default prior scale per dataset.
    println!("{:<16} {:>6} {:>4} {:>3} {:>8}", "dataset", "T", "k", "C", "modal g");
    for spec in registry() {
        println!(
            "{:<16} {:>6} {:>4} {:>3} {:>8}",
            spec.name,
            spec.t.unwrap(),
            spec.k.unwrap(),
            spec.outcomes,
            spec.modal_g.unwrap()
        );
    }
    println!();

    // Ad hoc loading: outcome label first, covariates after, no header.
    let path = std::env::temp_dir().join("sps_example_data.csv");
    std::fs::write(&path, "1,0.5,1.2\n2,-0.3,0.8\n1,1.1,-0.4\n3,0.0,0.9\n")?;
    let spec = DatasetSpec::ad_hoc("demo", 3).with_intercept();
    let data = load_csv(&path, &spec, LoadOptions::default())?;
    println!(
        "loaded {}: T = {}, k = {} (intercept added), C = {}, d = {}",
        path.display(),
        data.t(),
        data.k(),
        data.outcomes(),
        data.param_dim()
    );
    std::fs::remove_file(&path).ok();

    // Saturated indicator design with an empty cell: X'X is singular, so
    // the prior is built from a supplemented matrix carrying one indicator
    // row for the empty cell. The likelihood keeps the actual data.
    let x = DMatrix::from_row_slice(6, 3, &[
        1.0, 0.0, 0.0,
        1.0, 0.0, 0.0,
        0.0, 1.0, 0.0,
        0.0, 1.0, 0.0,
        0.0, 1.0, 0.0,
        1.0, 0.0, 0.0,
    ]);
    println!();
    println!("saturated design: X'X singular? {}", GaussianPrior::g_prior(&x, 2, 1.0).is_err());
    let mut saturated = DatasetSpec::ad_hoc("saturated", 2);
    saturated.supplement_empty_cell = true;
    let supplemented = design_supplement(&x, &saturated);
    println!(
        "supplement added {} row(s): prior matrix has {} rows, likelihood keeps {}",
        supplemented.added_rows,
        supplemented.matrix.nrows(),
        x.nrows()
    );
    let prior = GaussianPrior::g_prior(&supplemented.matrix, 2, 1.0)?;
    println!("supplemented prior is positive definite, d = {}", prior.dim());
    Ok(())
}
