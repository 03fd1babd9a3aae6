use decum_core::dp::{LatticeOutcome, LatticePropagator, StateGrid};
use decum_core::*;

fn frozen_scenario(w0: f64, q: f64, m: usize) -> Scenario {
    Scenario::new(
        MarketParams::frozen(),
        WithdrawalRule::constant(q, m),
        w0,
        m as f64,
        m,
    )
    .unwrap()
}

fn toy_grid() -> GridSpec {
    GridSpec {
        n_x: 128,
        n_y: 128,
        n_p: None,
        center: 30.0,
        half_width: 6.0,
        extension: 0.5,
    }
}

#[test]
fn frozen_market_value_is_cash_accounting_below_terminal_wealth() {
    // W* below W_T: the shortfall term is kappa W* at every node near W_T
    let sc = frozen_scenario(1000.0, 40.0, 5);
    let obj = ObjectiveParams {
        kappa: 2.5,
        alpha: 0.05,
        epsilon: 0.0,
    };
    let s = Solver::new(&sc, &toy_grid(), obj).unwrap();
    let sol = s.solve_auxiliary(500.0).unwrap();
    assert!(
        (sol.value - (240.0 + 2.5 * 500.0)).abs() < 1e-9,
        "{}",
        sol.value
    );
    assert!((sol.ew - 240.0).abs() < 1e-9);
    assert!((sol.es - 500.0).abs() < 1e-9);
    assert_eq!(sol.p0, 0.0);
}

#[test]
fn frozen_market_value_above_terminal_wealth_within_grid_tolerance() {
    let sc = frozen_scenario(1000.0, 40.0, 5);
    let obj = ObjectiveParams::new(1.0);
    let s = Solver::new(&sc, &toy_grid(), obj).unwrap();
    let w_star = 800.0;
    let sol = s.solve_auxiliary(w_star).unwrap();
    let exact = 240.0 + (w_star + (760.0 - w_star) / 0.05) + obj.epsilon * 760.0;
    // Linear interpolation in log wealth overstates wealth by at most
    // w dy^2 / 8 per date; the shortfall term multiplies that by 1/alpha.
    let dy = StateGrid::new(&toy_grid()).unwrap().dy;
    let bound = 5.0 * 760.0 * dy * dy / 8.0;
    let ew = sol.expected_terminal_wealth;
    assert!(ew >= 760.0 - 1e-9 && ew - 760.0 < bound, "{ew}");
    assert!(
        (sol.value - exact).abs() < bound / 0.05,
        "{} vs {exact}",
        sol.value
    );
}

#[test]
fn frozen_market_optimal_target_is_terminal_wealth_to_one_cell() {
    let sc = frozen_scenario(1000.0, 40.0, 5);
    let spec = toy_grid();
    let s = Solver::new(&sc, &spec, ObjectiveParams::new(1.0)).unwrap();
    let p = s.solve_precommitment(&SearchConfig::default()).unwrap();
    let dy = StateGrid::new(&spec).unwrap().dy;
    assert!(
        p.w_star <= 760.0 + 0.01 && p.w_star >= 760.0 * (-dy).exp(),
        "W* = {}",
        p.w_star
    );
    assert_eq!(p.table.dates(), 5);
    // the stored controls reproduce the cash accounting exactly
    let src = decum_core::sim::SyntheticSource::new(&sc.market, 1.0, 5, 10, 0).unwrap();
    let out = simulate_strategy(&src, &Strategy::ControlTable(p.table), &sc).unwrap();
    assert!(out.terminal.iter().all(|&w| w == 760.0));
}

#[test]
fn optimum_on_the_bracket_edge_is_an_error() {
    let sc = frozen_scenario(1000.0, 40.0, 2);
    let s = Solver::new(&sc, &toy_grid(), ObjectiveParams::new(1.0)).unwrap();
    let search = SearchConfig {
        lo: -100.0,
        hi: 300.0,
        scan_points: 9,
        tolerance: 0.1,
    };
    let err = s.solve_precommitment(&search).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Numerics);
}

// One period on a two-outcome lattice with three candidate fractions,
// against direct enumeration.
#[test]
fn single_period_lattice_matches_enumeration() {
    let dx = std::f64::consts::LN_2 / 4.0;
    let (q, w0) = (10.0, 110.0);
    let spec = GridSpec {
        n_x: 257,
        n_y: 257,
        n_p: Some(3),
        center: 50.0,
        half_width: 128.0 * dx,
        extension: 0.5,
    };
    let grid = StateGrid::new(&spec).unwrap();
    assert!((grid.dx - dx).abs() < 1e-15);
    // up: stock doubles, bond flat; down: stock halves, bond gains 2^(1/4)
    let probs = [0.4, 0.6];
    let rets = [(2.0, 1.0), (0.5, 2f64.powf(0.25))];
    let outcomes = vec![
        LatticeOutcome {
            prob: probs[0],
            shift_x: 4,
            shift_y: 0,
            shift_debt: 0,
        },
        LatticeOutcome {
            prob: probs[1],
            shift_x: -4,
            shift_y: 1,
            shift_debt: 1,
        },
    ];
    let sc = frozen_scenario(w0, q, 1);
    for (w_star, kappa) in [(50.0, 1.0), (100.0, 2.5), (140.0, 0.5), (180.0, 10.0)] {
        let obj = ObjectiveParams {
            kappa,
            alpha: 0.05,
            epsilon: -1e-4,
        };
        let prop = LatticePropagator::new(&grid, outcomes.clone()).unwrap();
        let solver = Solver::with_propagator(&sc, &spec, obj, Box::new(prop)).unwrap();
        let sol = solver.solve_auxiliary(w_star).unwrap();

        let g = |w1: f64| {
            q + kappa * (w_star + (w1 - q - w_star).min(0.0) / 0.05) + obj.epsilon * (w1 - q)
        };
        let w = w0 - q;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for p in [0.0, 0.5, 1.0] {
            let v: f64 = probs
                .iter()
                .zip(&rets)
                .map(|(pr, (rs, rb))| pr * g(w * (p * rs + (1.0 - p) * rb)))
                .sum();
            if v > best.0 + 1e-12 {
                best = (v, p);
            }
        }
        assert!(
            (sol.value - (q + best.0)).abs() < 1e-5,
            "W*={w_star}: {} vs {}",
            sol.value,
            q + best.0
        );
        assert_eq!(sol.p0, best.1, "W*={w_star}");
    }
}

#[test]
fn propagator_must_match_the_grid_spec() {
    let sc = frozen_scenario(1000.0, 40.0, 2);
    let other = StateGrid::new(&GridSpec::square(16)).unwrap();
    let prop = LatticePropagator::new(
        &other,
        vec![LatticeOutcome {
            prob: 1.0,
            shift_x: 0,
            shift_y: 0,
            shift_debt: 0,
        }],
    )
    .unwrap();
    assert!(Solver::with_propagator(
        &sc,
        &GridSpec::square(32),
        ObjectiveParams::new(1.0),
        Box::new(prop)
    )
    .is_err());
}

#[test]
fn value_is_non_decreasing_in_initial_wealth() {
    let sc = Scenario::base(&MortalityTable::standin_male()).unwrap();
    let obj = ObjectiveParams {
        kappa: 2.5,
        alpha: 0.05,
        epsilon: 0.0,
    };
    let s = Solver::new(&sc, &GridSpec::square(64), obj).unwrap();
    let sol = s.solve_auxiliary(200.0).unwrap();
    let mut last = f64::NEG_INFINITY;
    for k in 0..50 {
        let w0 = 100.0 + 40.0 * k as f64;
        let v = s.value_at_initial_wealth(&sol, w0);
        assert!(v >= last - 1e-9 * last.abs(), "V({w0}) = {v} < {last}");
        last = v;
    }
}
