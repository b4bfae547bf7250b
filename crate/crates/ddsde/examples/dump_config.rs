//! Prints a ready-to-edit `picard` experiment config (zero drift) to
//! stdout: `cargo run -p ddsde --example dump_config > picard.json`.

use ddsde::drift::{DriftSpec, RegimeParams, TimeProfile};
use ddsde::experiments::{ExperimentConfig, PicardConfig};
use ddsde::fbm::TimeGrid;
use ddsde::field::SpectralField;
use ddsde::solver::{InitialLaw, SamplerKind, SolverConfig};

fn main() {
    let period = 2.0 * std::f64::consts::PI;
    let cfg = ExperimentConfig::Picard(PicardConfig {
        drift: DriftSpec::convolutional(
            SpectralField::zero(1, period, 1),
            SpectralField::zero(1, period, 1),
            TimeProfile::Constant(1.0),
        )
        .unwrap(),
        params: RegimeParams { hurst: 0.3, alpha: 1.0, q: None, p: 1.0, beta: None },
        solver: SolverConfig {
            grid: TimeGrid::new(0.5, 128).unwrap(),
            n_particles: 1024,
            mollify_level: None,
            seed: 7,
            sampler: SamplerKind::Circulant,
            common_random_numbers: true,
            thin_stride: None,
        },
        initial: InitialLaw::Gaussian { mean: vec![0.0], std: 0.5 },
        tol: 1e-6,
        max_iter: 25,
    });
    println!("{}", serde_json::to_string_pretty(&cfg).unwrap());
}
