//! Fixtures shared by the benchmarks.

use wsi_core::sim::{generate_dataset, DgpConfig};
use wsi_core::{fit_mle, Dataset, MleFit};

/// Simulated logistic data with a weak fourth covariate, plus its MLE.
pub fn logistic_fixture(n: usize, p: usize, seed: u64) -> (Dataset, MleFit) {
    let cfg = DgpConfig::new(n, p, 0.3, 0.4, seed);
    let data = generate_dataset(&cfg, seed).expect("fixture data");
    let mle = fit_mle(&cfg.family, &data).expect("fixture fit");
    (data, mle)
}
