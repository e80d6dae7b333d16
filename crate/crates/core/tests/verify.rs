use kellerpath::green::GreenPair;
use kellerpath::monotone::{solve, Direction};
use kellerpath::params::{Domain, Params};
use kellerpath::verify::*;
use kellerpath::Error;

fn sol(n: usize, mu: f64) -> kellerpath::monotone::MonotoneSolution {
    solve(&Params::ball(n, mu).unwrap(), Direction::Increasing).unwrap()
}

fn rung_extra(rep: &CheckReport, key: &str) -> Vec<f64> {
    rep.extra["rungs"].as_array().unwrap().iter().map(|r| r["extra"][key].as_f64().unwrap()).collect()
}

#[test]
fn pohozaev_trend_and_balance() {
    let rep = pohozaev_ladder(&Domain::ball(3).unwrap(), &LADDER).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.trend.as_ref().unwrap().len() == 3);
    let single = pohozaev_check(&sol(3, 200.0)).unwrap();
    assert!(single.extra["balance_rel"].as_f64().unwrap() <= 1e-6);
    let uni = pohozaev_uniform(3, 0.0, &[0.8, 0.9, 1.0], &LADDER).unwrap();
    assert!(uni.pass);
}

#[test]
fn pohozaev_balance_holds_on_an_annulus_and_for_decreasing_solutions() {
    for dir in [Direction::Increasing, Direction::Decreasing] {
        let s = solve(&Params::new(3, 150.0, 0.4, 1.0).unwrap(), dir).unwrap();
        let (l, r) = pohozaev_balance(&s);
        assert!((l - r).abs() <= 1e-6 * l.abs(), "{dir:?}: {l} vs {r}");
    }
}

#[test]
fn blowup_trend_endpoint_and_width() {
    let rep = blowup_ladder(&Domain::ball(3).unwrap(), &LADDER, BLOWUP_WINDOW).unwrap();
    assert!(rep.pass);
    for v in rung_extra(&rep, "endpoint_value") {
        assert_eq!(v, 0.0);
    }
    for v in rung_extra(&rep, "endpoint_slope") {
        assert!(v.abs() < 1e-8);
    }
    for w in rung_extra(&rep, "width_ratio") {
        assert!((w - 1.0).abs() < 0.2, "{w}");
    }
    assert_eq!(liouville_bubble(0.0), 0.0);
}

#[test]
fn bubble_tail_slope() {
    let fit = |lo: f64| {
        let xs: Vec<f64> = (0..=100).map(|i| lo + i as f64 / 100.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| liouville_bubble(x)).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 101.0, ys.iter().sum::<f64>() / 101.0);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    };
    let s2 = std::f64::consts::SQRT_2;
    assert!((fit(-5.0) - s2).abs() < 1e-2);
    assert!((fit(-10.0) - s2).abs() < 1e-3);
}

#[test]
fn blowup_window_limit() {
    let s = sol(3, 100.0);
    assert!(matches!(blowup_profile(&s, 1e6), Err(Error::WindowTooWide { .. })));
    assert!(blowup_profile(&solve(&Params::new(3, 100.0, 0.4, 1.0).unwrap(), Direction::Decreasing).unwrap(), 1.0).is_err());
}

#[test]
fn limit_profile_trend() {
    let rep = limit_ladder(&Domain::ball(3).unwrap(), &[150.0, 300.0]).unwrap();
    assert!(rep.pass, "{rep:?}");
    for r in rung_extra(&rep, "amplitude_residual") {
        assert!(r <= 1e-10);
    }
}

#[test]
fn sensitivity_trend_and_correlation() {
    let d = Domain::ball(3).unwrap();
    let rep = sensitivity_ladder(&d, &[100.0, 200.0], SENSITIVITY_STEP).unwrap();
    assert!(rep.pass, "{rep:?}");
    let uni = sensitivity_uniform(3, 0.0, &[0.9, 1.0], &[100.0, 200.0], SENSITIVITY_STEP).unwrap();
    assert!(uni.pass);
    // the limit itself from an independent finite difference of the limit profile
    let pair = GreenPair::new(d).unwrap();
    let h = 1e-4;
    let u = pair.u_inf_plus();
    let second = (u.value(1.0) - 2.0 * u.value(1.0 - h) + u.value(1.0 - 2.0 * h)) / (h * h);
    let p = pair.u_inf_plus_slope();
    let rhs = 2.0 * (second - p * p) / p;
    assert!((rhs - sensitivity_limit(&d).unwrap()).abs() < 1e-2 * rhs.abs());
}

#[test]
fn nondegeneracy_and_control() {
    for n in [2usize, 3] {
        let rep = nondegeneracy_check(&sol(n, 200.0)).unwrap();
        assert!(rep.pass);
        assert!(rep.extra["mesh_variation"].as_f64().unwrap() < 0.1);
        assert_eq!(rep.extra["morse_index"], 1);
        let ctl = kernel_control(&Domain::ball(n).unwrap(), 4001).unwrap();
        assert!(ctl.pass && ctl.gap <= 1e-6, "{ctl:?}");
    }
    assert_eq!(nondegeneracy_check(&sol(3, 100.0)).unwrap().extra["morse_index"], 1);
}

#[test]
fn green_identities() {
    for (n, a) in [(3usize, 0.0), (3, 0.3), (2, 0.3)] {
        let rep = green_identity_check(&GreenPair::new(Domain::new(n, a, 1.0).unwrap()).unwrap()).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn suites_are_deterministic_and_consistent() {
    let a = run_suite(Suite::All, 3).unwrap();
    let b = run_suite(Suite::All, 3).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    for r in &a {
        assert_eq!(r.gap, (r.lhs - r.rhs).abs(), "{}", r.name);
        if let Some(t) = &r.trend {
            let g: Vec<f64> = t.iter().map(|x| x.1).collect();
            assert!(strictly_decreasing(&g), "{}", r.name);
        }
        assert!(r.pass, "{}", r.name);
    }
    assert_eq!(run_suite(Suite::Green, 2).unwrap().len(), 1);
    assert!("bogus".parse::<Suite>().is_err());
    assert_eq!("nondeg".parse::<Suite>().unwrap(), Suite::Nondeg);
}
