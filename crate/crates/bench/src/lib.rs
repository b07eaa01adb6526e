//! Benchmark fixtures.

use svie_core::{CoefficientSet, HilbertPoint, InitialCondition, LevyModel, Scenario, WeightFunction};

/// Mean-reverting scalar scenario on a one-cell grid.
pub fn ou(dt: f64) -> Scenario {
    Scenario::new(
        CoefficientSet::ornstein_uhlenbeck(1.0, 0.3, 0.5, 1, 1),
        LevyModel::brownian(1),
        WeightFunction::exponential(2.0).expect("valid weight"),
        InitialCondition::Constant(HilbertPoint(vec![1.0])),
        dt,
    )
}

/// Exponentially fading kernels in dimension `d`, which need a long grid.
pub fn fading(dt: f64, d: usize) -> Scenario {
    Scenario::new(
        CoefficientSet::exponential(0.25, 0.25, 1.0, d, d),
        LevyModel::brownian(d),
        WeightFunction::exponential(1.0).expect("valid weight"),
        InitialCondition::Constant(HilbertPoint::splat(d, 1.0)),
        dt,
    )
}
