//! Benchmark fixtures: fixed-seed instances shared by the criterion benches.

use cilp_core::data::{generate, GeneratorConfig};
use cilp_core::lp::build_grid_sp;
use cilp_core::{Dataset, KktProjector, LinearModel, LpInstance, PreparedSet};

/// 5x5 shortest-path instance with 40 edges.
pub fn grid_instance() -> LpInstance {
    build_grid_sp(5).expect("grid instance")
}

/// Shortest-path dataset with `n` samples.
pub fn sp_dataset(n: usize) -> Dataset {
    generate(&GeneratorConfig::sp_synth(0), n).expect("sp dataset")
}

/// Portfolio dataset with `n` samples.
pub fn portfolio_dataset(n: usize) -> Dataset {
    generate(&GeneratorConfig::portfolio(0), n).expect("portfolio dataset")
}

/// Training set with the default margin of its problem.
pub fn prepared(ds: &Dataset) -> PreparedSet {
    PreparedSet::new(ds, ds.problem.default_margin()).expect("prepared set")
}

/// Projector of the first sample and a cost to project onto its set.
pub fn projection_case(ds: &Dataset) -> (KktProjector, Vec<f64>) {
    let s = &ds.samples[0];
    let projector = ds
        .problem
        .projector(&s.x_star, ds.problem.default_margin())
        .expect("projector");
    let q = (0..ds.problem.dim()).map(|j| (j % 7) as f64 * 0.3 - 1.0).collect();
    (projector, q)
}

pub fn zero_model(set: &PreparedSet) -> LinearModel {
    LinearModel::zeros(set.features(), set.dim())
}
