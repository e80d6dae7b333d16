use kellerpath::continuation::*;
use kellerpath::monotone::lyapunov_violation;
use kellerpath::params::{Domain, Params};
use kellerpath::radial::Profile;
use kellerpath::spectrum::eigenvalues;
use kellerpath::Error;

fn ball(n: usize) -> Domain<f64> {
    Domain::ball(n).unwrap()
}

#[test]
fn analytic_and_jacobian_crossings_agree() {
    let d = ball(2);
    let lams = eigenvalues(&d, 4).unwrap();
    let found = detect_bifurcation(&d, 1.0, 60.0).unwrap();
    assert_eq!(found.len(), 2);
    for (f, l) in found.iter().zip(&lams[1..]) {
        assert!((f - l).abs() < 1e-6);
    }
    let det = jacobian_crossings(&d, 1.0, 60.0, 4001, 0.25).unwrap();
    assert_eq!(det.len(), 2, "{det:?}");
    for (f, l) in det.iter().zip(&found) {
        assert!((f - l).abs() < 1e-4, "{f} vs {l}");
    }
    assert!(detect_bifurcation(&d, 1.0, lams[1] - 0.01).unwrap().is_empty());
}

#[test]
fn branch_start_tends_to_the_eigenvalue() {
    let d = ball(2);
    let lam = eigenvalues(&d, 2).unwrap()[1];
    let (m1, p1) = branch_start(&d, 2, 1e-4, 2001).unwrap();
    let (m2, _) = branch_start(&d, 2, 2e-4, 2001).unwrap();
    // mu - lambda is linear in the amplitude (transcritical), so extrapolate to zero amplitude
    let extrapolated = 2.0 * m1 - m2;
    assert!((extrapolated - lam).abs() < 1e-4, "{m1} {m2} {lam}");
    assert!(p1.u.iter().all(|&u| (u - 1.0).abs() < 1e-3));
}

#[test]
fn minus_branch_three_keeps_two_zeros() {
    let d = ball(3);
    let lam3 = eigenvalues(&d, 3).unwrap()[2];
    let b = trace_branch(&Params::on(d, lam3).unwrap(), 3, Sign::Minus, 2.0 * lam3).unwrap();
    assert!(b.records.len() > 5);
    assert!(b.violations().is_empty(), "{:?}", b.violations());
    assert!(b.records.iter().all(|r| r.zeros_of_u_minus_1 == 2));
    assert_eq!(b.stop, StopReason::MuMax);
}

#[test]
fn transcritical_direction_in_three_dimensions() {
    let d = ball(3);
    let lam2 = eigenvalues(&d, 2).unwrap()[1];
    let b = trace_branch_with(&d, 2, Sign::Minus, lam2 + 10.0, &TraceOptions::default()).unwrap();
    let r = &b.records[0];
    assert!(r.mu > lam2 && r.u0 < 1.0, "{} {}", r.mu, r.u0);
}

#[test]
fn minus_branch_two_records() {
    let d = ball(3);
    let b = trace_branch_with(&d, 2, Sign::Minus, 200.0, &TraceOptions::default()).unwrap();
    for (k, r) in b.records.iter().enumerate() {
        assert_eq!(r.zeros_of_u_minus_1, 1);
        assert_eq!(r.critical_points, 0, "record {k} at mu {}", r.mu);
        assert!(r.c1_norm - r.sup_norm <= 1.0 + 1e-6);
        assert!(r.interlaced && r.nonsimple_zero.is_none());
    }
    for (k, p) in b.profiles.iter().enumerate().step_by(5) {
        assert!(lyapunov_violation(p, b.records[k].mu) <= 1e-10);
    }
    let csv = b.to_csv_string();
    assert!(csv.starts_with("mu,u0,sup_norm,c1_norm,zeros,min_eig\n"));
    assert_eq!(csv.lines().count(), b.records.len() + 1);
}

#[test]
fn branches_do_not_intersect() {
    let d = ball(3);
    let opts = TraceOptions { max_steps: 40, ..TraceOptions::default() };
    let b2 = trace_branch_with(&d, 2, Sign::Minus, 150.0, &opts).unwrap();
    let b3 = trace_branch_with(&d, 3, Sign::Minus, 150.0, &opts).unwrap();
    let z2: Vec<usize> = b2.records.iter().map(|r| r.zeros_of_u_minus_1).collect();
    let z3: Vec<usize> = b3.records.iter().map(|r| r.zeros_of_u_minus_1).collect();
    assert!(z2.iter().all(|z| !z3.contains(z)));
}

#[test]
fn two_dimensional_branches_stay_bounded() {
    let d = ball(2);
    for (i, sign) in [(2, Sign::Minus), (2, Sign::Plus), (3, Sign::Minus)] {
        let b = trace_branch_with(&d, i, sign, 150.0, &TraceOptions { max_steps: 60, ..TraceOptions::default() }).unwrap();
        let q = (b.records.len() / 4).max(1);
        let early = b.records[..q].iter().map(|r| r.sup_norm).fold(0.0, f64::max);
        assert!(b.records.iter().all(|r| r.sup_norm.is_finite() && r.sup_norm <= 10.0 * early), "{}", b.id());
        assert!(b.violations().is_empty(), "{}: {:?}", b.id(), b.violations());
    }
}

#[test]
fn plus_branch_reports_its_stop() {
    let d = ball(3);
    let b = trace_branch(&Params::on(d, 30.0).unwrap(), 2, Sign::Plus, 300.0).unwrap();
    assert!(b.records.iter().all(|r| r.u0 > 1.0));
    assert!(matches!(b.stop, StopReason::C1Ceiling | StopReason::MuMin | StopReason::MuMax | StopReason::MaxSteps | StopReason::MinStep));
    assert_eq!(b.id(), "b2plus");
}

#[test]
fn constant_profile_rejected() {
    let p = Profile::from_fn(vec![0.0, 0.5, 1.0], ball(3), |_| (1.0, 0.0)).unwrap();
    assert!(matches!(classify(&p, 30.0), Err(Error::MalformedProfile(_))));
}

#[test]
fn mu_max_must_exceed_lambda() {
    assert!(trace_branch_with(&ball(3), 2, Sign::Minus, 10.0, &TraceOptions::default()).is_err());
}
