use decum_core::history::ReturnSeries;
use decum_core::sim::{BootstrapSource, PathSource, SyntheticSource};
use decum_core::Strategy as Policy;
use decum_core::*;
use proptest::prelude::*;

/// Rockafellar-Uryasev form: the supremum over W of W + E[min(X - W, 0)] / alpha,
/// attained at a sample point.
fn es_dual(x: &[f64], alpha: f64) -> f64 {
    let n = x.len() as f64;
    x.iter()
        .map(|&w| w + x.iter().map(|&v| (v - w).min(0.0)).sum::<f64>() / (n * alpha))
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #[test]
    fn es_equals_its_dual(x in prop::collection::vec(-1e3f64..1e3, 1..200), alpha in 0.01f64..0.99) {
        let es = expected_shortfall(&x, alpha).unwrap();
        let dual = es_dual(&x, alpha);
        prop_assert!((es - dual).abs() <= 1e-9 * (1.0 + dual.abs()), "{es} vs {dual}");
    }

    #[test]
    fn es_is_below_the_mean(x in prop::collection::vec(-1e3f64..1e3, 1..200), alpha in 0.01f64..0.99) {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        prop_assert!(expected_shortfall(&x, alpha).unwrap() <= mean + 1e-9 * (1.0 + mean.abs()));
    }

    #[test]
    fn withdrawals_respect_bounds(w in -1e4f64..1e5, a in 0.0f64..1.0, lo in 0.0f64..100.0, span in 0.0f64..100.0) {
        let q = arva_withdrawal(w, a, lo, lo + span);
        prop_assert!(q >= lo && q <= lo + span);
    }

    #[test]
    fn wealth_accounting_holds_on_every_path(p in 0.0f64..=1.0, seed in 0u64..1000, w0 in 100.0f64..2000.0) {
        let rule = WithdrawalRule { fractions: vec![0.04; 11], q_min: 30.0, q_max: 80.0 };
        let sc = Scenario::new(MarketParams::crsp_1926_2018(), rule, w0, 10.0, 10).unwrap();
        let src = SyntheticSource::new(&sc.market, 1.0, 10, 64, seed).unwrap();
        let out = simulate_strategy(&src, &Policy::ConstantWeightArva { p }, &sc).unwrap();
        let spread = (sc.market.mu_c_b).exp();
        let mut rets = Vec::new();
        for path in 0..64 {
            src.fill_path(path, &mut rets);
            let (q, wb, ws) = (out.withdrawals_of(path), out.wealth_before_of(path), out.weights_of(path));
            prop_assert_eq!(wb[0], w0);
            for n in 0..10 {
                prop_assert!(q[n] >= 30.0 && q[n] <= 80.0);
                let w_plus = wb[n] - q[n];
                let next = if w_plus > 0.0 {
                    w_plus * (ws[n] * rets[n].r_s + (1.0 - ws[n]) * rets[n].r_b)
                } else {
                    prop_assert_eq!(ws[n], 0.0);
                    w_plus * rets[n].r_b * spread
                };
                prop_assert_eq!(wb[n + 1], next);
            }
            prop_assert_eq!(out.terminal[path], wb[10] - q[10]);
        }
    }

    #[test]
    fn debt_never_recovers_without_returns(w0 in 1.0f64..60.0) {
        // once insolvent the position is all bond debt and keeps paying the floor
        let mut market = MarketParams::crsp_1926_2018();
        market.mu_c_b = 0.02;
        let rule = WithdrawalRule { fractions: vec![0.05; 6], q_min: 30.0, q_max: 80.0 };
        let sc = Scenario::new(market, rule, w0, 5.0, 5).unwrap();
        let src = SyntheticSource::new(&sc.market, 1.0, 5, 32, 5).unwrap();
        let out = simulate_strategy(&src, &Policy::ConstantWeightArva { p: 1.0 }, &sc).unwrap();
        for path in 0..32 {
            let wb = out.wealth_before_of(path);
            let Some(first) = wb[..5].iter().position(|&w| w - 30.0 <= 0.0) else { continue };
            for n in first..5 {
                prop_assert_eq!(out.weights_of(path)[n], 0.0);
                prop_assert!(wb[n + 1] < 0.0);
                prop_assert_eq!(out.withdrawals_of(path)[n], 30.0);
            }
        }
    }

    #[test]
    fn bootstrap_months_come_from_history(
        s in prop::collection::vec(-0.2f64..0.2, 12..120),
        b_hat in 0.1f64..5.0,
        seed in 0u64..100,
    ) {
        let b: Vec<f64> = s.iter().map(|x| 0.5 * x + 0.001).collect();
        let h = history::PairedHistory::new(ReturnSeries::from_returns(s.clone()), ReturnSeries::from_returns(b.clone())).unwrap();
        let src = BootstrapSource::new(&h, b_hat, 1.0, 3, 4, seed).unwrap();
        for path in 0..4 {
            for (x, y) in src.monthly_path(path) {
                prop_assert!(s.iter().zip(&b).any(|(&u, &v)| u == x && v == y));
            }
        }
    }

    #[test]
    fn detected_jumps_are_a_fixed_point(seed in 0u64..10_000) {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = path_rng(seed, 3);
        let x: Vec<f64> = (0..240)
            .map(|k| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.005 + 0.04 * z + if k % 37 == 0 { -0.25 } else { 0.0 }
            })
            .collect();
        let series = ReturnSeries::from_returns(x.clone());
        let d = detect_jumps(&series, 3.0).unwrap();
        for (k, &r) in x.iter().enumerate() {
            prop_assert_eq!(d.exceeds(r, 3.0, series.dt), d.jump_indices.contains(&k));
        }
    }

    #[test]
    fn percentiles_are_monotone(mut x in prop::collection::vec(-1e3f64..1e3, 1..100), a in 0.0f64..100.0, b in 0.0f64..100.0) {
        x.sort_by(f64::total_cmp);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(sim::stats::percentile_sorted(&x, lo) <= sim::stats::percentile_sorted(&x, hi));
    }
}
