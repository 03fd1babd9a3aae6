use decum_core::dp::{FourierPropagator, Propagator, StateGrid, TimeSide, ValueGrid};
use decum_core::*;

// E[s' + b'] at each node against a Monte Carlo estimate of the mean gross
// returns from the exact sampler.
#[test]
fn wealth_expectation_matches_sampled_returns() {
    let market = MarketParams::crsp_1926_2018();
    let grid = StateGrid::new(&GridSpec::square(256)).unwrap();
    let prop = FourierPropagator::new(&grid, &market, 1.0, 0.5).unwrap();
    let mut v = vec![ValueGrid::from_wealth_fn(&grid, 1, TimeSide::Before, |w| w)];
    prop.propagate(&mut v).unwrap();

    let mut rng = path_rng(11, 0);
    let n = 1_000_000;
    let (mut ms, mut mb) = (0.0, 0.0);
    for _ in 0..n {
        let r = sample_period_returns(&market, 1.0, &mut rng).unwrap();
        ms += r.r_s;
        mb += r.r_b;
    }
    let (ms, mb) = (ms / n as f64, mb / n as f64);
    for i in (64..192).step_by(16) {
        for j in (64..192).step_by(16) {
            let mc = grid.x(i).exp() * ms + grid.y(j).exp() * mb;
            let got = v[0].main[grid.index(i, j)];
            assert!(
                (got / mc - 1.0).abs() < 1e-3,
                "node ({i},{j}): {got} vs {mc}"
            );
        }
    }
}

#[test]
fn debt_grows_at_the_bond_rate_plus_spread() {
    let mut market = MarketParams::frozen();
    market.mu_b = 0.01;
    market.mu_c_b = 0.03;
    let grid = StateGrid::new(&GridSpec::square(128)).unwrap();
    let prop = FourierPropagator::new(&grid, &market, 1.0, 0.5).unwrap();
    let mut v = vec![ValueGrid::from_wealth_fn(&grid, 1, TimeSide::Before, |w| w)];
    prop.propagate(&mut v).unwrap();
    for j in (20..100).step_by(10) {
        let exact = -grid.y(j).exp() * 0.04f64.exp();
        // the shift is a fraction of a node, so linear interpolation error applies
        assert!(
            (v[0].debt[j] / exact - 1.0).abs() < grid.dy * grid.dy,
            "{} vs {exact}",
            v[0].debt[j]
        );
    }
}
