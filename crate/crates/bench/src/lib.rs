//! Shared fixtures for the benchmarks.

use watchlab_core::estimator::{fit_all_groups, smooth_curves};
use watchlab_core::synth::generate;
use watchlab_core::{BiasNoiseCurves, Dataset, GmmOptions, GroupFits, SynthConfig};

pub struct Fixture {
    pub dataset: Dataset,
    pub interest: Vec<bool>,
    pub fits: GroupFits,
    pub curves: BiasNoiseCurves,
}

/// Default synthetic log with `n` rows, its fitted and smoothed curves.
pub fn fixture(n: usize) -> Fixture {
    let config = SynthConfig {
        n_interactions: n,
        seed: 1,
        ..SynthConfig::default()
    };
    let (dataset, truth) = generate(&config).expect("default config is valid");
    let fits = fit_all_groups(&dataset, &GmmOptions::default()).expect("groups fit");
    let curves = smooth_curves(&fits, 3).expect("curves smooth");
    Fixture {
        dataset,
        interest: truth.iter().map(|t| t.r_sample).collect(),
        fits,
        curves,
    }
}
