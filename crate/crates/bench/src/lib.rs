//! Fixtures shared by the kernel benchmarks.

use cyclesym_core::section::condition_datasets;
use cyclesym_core::synth::reference_model;
use cyclesym_core::{estimate_fixed_points, gen_sections, residuals, PairedDataset, TransitionKind};

/// Step-condition (normal, mirrored) datasets from the reference model.
pub fn step_datasets(n_strides: usize, seed: u64) -> (PairedDataset, PairedDataset) {
    let model = reference_model(seed);
    let sections = gen_sections(&model, n_strides, seed).expect("reference model is valid");
    let fp = estimate_fixed_points(&sections).expect("both labels present");
    let res = residuals(&sections, &fp).expect("matching dimensions");
    condition_datasets(&res, TransitionKind::LR, &model.mirror).expect("enough pairs")
}

/// A smooth 200 Hz test signal with some high-frequency content.
pub fn signal(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / 200.0;
            (2.0 * std::f64::consts::PI * t).sin() + 0.1 * (2.0 * std::f64::consts::PI * 37.0 * t).sin()
        })
        .collect()
}
