use svie_core::*;

/// Mean of `max_t |X(t)|^2` over `n` paths.
fn max_square_mean(scenario: &Scenario, n: u64) -> f64 {
    let ens = scenario.solver(5.0).unwrap().run_max_square(7, 0..n, 1).unwrap();
    assert_eq!(ens.diverged(), 0);
    ens.completed().sum::<f64>() / n as f64
}

#[test]
fn running_maximum_second_moment_is_stable() {
    let x0 = InitialCondition::Constant(HilbertPoint(vec![1.0]));
    let scenarios = [
        Scenario::new(
            CoefficientSet::ornstein_uhlenbeck(1.0, 0.3, 0.5, 1, 1),
            LevyModel::brownian(1),
            WeightFunction::exponential(2.0).unwrap(),
            x0.clone(),
            1.0 / 64.0,
        ),
        Scenario::new(
            CoefficientSet::exponential(0.25, 0.25, 1.0, 1, 1),
            LevyModel::brownian(1),
            WeightFunction::exponential(1.0).unwrap(),
            x0.clone(),
            1.0 / 16.0,
        ),
        Scenario::new(
            CoefficientSet::power_law(0.25, 0.25, 3.0, 1, 1),
            LevyModel::brownian(1),
            WeightFunction::polynomial(2.0).unwrap(),
            x0,
            1.0 / 16.0,
        ),
    ];
    for sc in &scenarios {
        let (a, b) = (max_square_mean(sc, 400), max_square_mean(sc, 800));
        assert!(a.is_finite() && b.is_finite());
        let ratio = b / a;
        assert!((0.5..=2.0).contains(&ratio), "{}: {a} vs {b}", sc.coeffs.describe());
    }
}
