//! Numerical checks of the asymptotic identities. Limits are tested as strictly decreasing gaps
//! along a ladder of `mu` values; exact finite-`mu` identities are tested directly.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gluing::{self, LayerSolution};
use crate::green::GreenPair;
use crate::linearized::Linearized;
use crate::monotone::{self, Direction, MonotoneSolution};
use crate::params::{Domain, Params};
use crate::radial::{hermite, uniform_grid};
use crate::spectrum::lambda2;

/// Default ladder for trend checks.
pub const LADDER: [f64; 3] = [100.0, 200.0, 400.0];
/// `|sigma_min|` above this counts as kernel-free.
pub const KERNEL_THRESHOLD: f64 = 1e-3;
/// Blow-up window `[-R, 0]`.
pub const BLOWUP_WINDOW: f64 = 5.0;
/// Boundary displacement of the sensitivity quotient.
pub const SENSITIVITY_STEP: f64 = 1e-4;

/// One check: `gap = |lhs - rhs|`, optional gap trend along `mu`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub inputs: BTreeMap<String, Value>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub trend: Option<Vec<(f64, f64)>>,
    pub pass: bool,
    /// Secondary quantities (reported, some asserted by `pass`).
    pub extra: BTreeMap<String, Value>,
}

impl CheckReport {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        CheckReport {
            name: name.into(),
            inputs: BTreeMap::new(),
            lhs,
            rhs,
            gap: (lhs - rhs).abs(),
            trend: None,
            pass: true,
            extra: BTreeMap::new(),
        }
    }

    fn input(mut self, key: &str, v: Value) -> Self {
        self.inputs.insert(key.into(), v);
        self
    }

    fn extra(&mut self, key: &str, v: Value) {
        self.extra.insert(key.into(), v);
    }
}

/// Strictly decreasing sequence.
pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn domain_inputs(d: &Domain<f64>) -> [(String, Value); 3] {
    [("dim".into(), json!(d.dim)), ("a".into(), json!(d.a)), ("b".into(), json!(d.b))]
}

/// Collapses a ladder of single-`mu` reports into one trend report (the last rung supplies
/// `lhs`, `rhs`, `gap`). Passes iff every rung passed and the gaps strictly decrease.
fn ladder_report(name: &str, rungs: Vec<CheckReport>) -> CheckReport {
    let last = rungs.last().cloned().expect("non-empty ladder");
    let trend: Vec<(f64, f64)> = rungs.iter().map(|r| (r.inputs["mu"].as_f64().unwrap_or(f64::NAN), r.gap)).collect();
    let gaps: Vec<f64> = trend.iter().map(|t| t.1).collect();
    let mut rep = CheckReport { name: name.into(), trend: Some(trend), ..last };
    rep.inputs.remove("mu");
    rep.inputs.insert("ladder".into(), json!(rungs.iter().map(|r| r.inputs["mu"].clone()).collect::<Vec<_>>()));
    rep.extra = BTreeMap::new();
    rep.extra("rungs", serde_json::to_value(&rungs).unwrap_or(Value::Null));
    rep.pass = strictly_decreasing(&gaps) && rungs.iter().all(|r| r.pass);
    rep
}

/// Both sides of the exact radial Pohozaev identity at finite `mu` (multiplier `r u'`, Neumann
/// ends, `F(u) = e^(mu (u - 1)) / mu`):
/// `b |dB_b| F(u_b) - a |dB_a| F(u_a) = b |dB_b| u_b^2/2 - a |dB_a| u_a^2/2 + N int F - (N/2) int u^2 - ((N-2)/2) int |u'|^2`.
/// Both boundary `F` terms sit on the left so it carries the dominant term in either direction.
pub fn pohozaev_balance(sol: &MonotoneSolution) -> (f64, f64) {
    let p = &sol.profile;
    let mu = sol.mu;
    let d = p.domain;
    let n = d.dim as i32;
    let nf = d.dim as f64;
    let nm1 = d.nm1();
    let len = p.len();
    let (mut f, mut df) = (Vec::with_capacity(len), Vec::with_capacity(len));
    let (mut g, mut dg) = (Vec::with_capacity(len), Vec::with_capacity(len));
    let (mut h, mut dh) = (Vec::with_capacity(len), Vec::with_capacity(len));
    for i in 0..len {
        let (r, u, du) = (p.grid[i], p.u[i], p.du[i]);
        let e = (mu * (u - 1.0)).exp();
        let ddu = if r == 0.0 { (u - e) / nf } else { u - e - nm1 * du / r };
        let w = d.weight(r);
        let dw = if r == 0.0 { if n == 2 { 1.0 } else { 0.0 } } else { nm1 * r.powi(n - 2) };
        f.push(e / mu * w);
        df.push(e * du * w + e / mu * dw);
        g.push(u * u * w);
        dg.push(2.0 * u * du * w + u * u * dw);
        h.push(du * du * w);
        dh.push(2.0 * du * ddu * w + du * du * dw);
    }
    let om = d.omega();
    let int_f = om * hermite(&p.grid, &f, &df);
    let int_u2 = om * hermite(&p.grid, &g, &dg);
    let int_grad = om * hermite(&p.grid, &h, &dh);
    let big_f = |u: f64| (mu * (u - 1.0)).exp() / mu;
    let (ua, ub) = (p.u[0], p.u[len - 1]);
    let area = |r: f64| om * d.weight(r);
    let lhs = d.b * area(d.b) * big_f(ub) - d.a * area(d.a) * big_f(ua);
    let rhs = d.b * area(d.b) * ub * ub / 2.0 - d.a * area(d.a) * ua * ua / 2.0 + nf * int_f
        - nf / 2.0 * int_u2
        - (nf - 2.0) / 2.0 * int_grad;
    (lhs, rhs)
}

/// `e^(mu (u(b) - 1)) / mu` against `u_inf,+'(b)^2 / 2` (mirrored at `a` for decreasing
/// solutions), with the finite-`mu` balance as an extra.
pub fn pohozaev_check(sol: &MonotoneSolution) -> Result<CheckReport> {
    let d = sol.profile.domain;
    let pair = GreenPair::new(d)?;
    let slope = match sol.direction {
        Direction::Increasing => pair.u_inf_plus_slope(),
        Direction::Decreasing => pair.u_inf_minus_slope(),
    };
    let lhs = (sol.mu * (sol.boundary_value - 1.0)).exp() / sol.mu;
    let rhs = slope * slope / 2.0;
    let (bl, br) = pohozaev_balance(sol);
    let rel = (bl - br).abs() / bl.abs();
    let mut rep = CheckReport::new("pohozaev", lhs, rhs).input("mu", json!(sol.mu)).input("direction", json!(sol.direction.name()));
    for (k, v) in domain_inputs(&d) {
        rep.inputs.insert(k, v);
    }
    rep.extra("balance_lhs", json!(bl));
    rep.extra("balance_rhs", json!(br));
    rep.extra("balance_rel", json!(rel));
    rep.pass = rel <= 1e-6;
    Ok(rep)
}

fn ladder<T: Send>(mus: &[f64], f: impl Fn(f64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    mus.par_iter().map(|&mu| f(mu)).collect()
}

/// Pohozaev gap along the ladder on `domain`.
pub fn pohozaev_ladder(domain: &Domain<f64>, mus: &[f64]) -> Result<CheckReport> {
    let rungs = ladder(mus, |mu| pohozaev_check(&monotone::solve(&Params { domain: *domain, mu }, Direction::Increasing)?))?;
    Ok(ladder_report("pohozaev", rungs))
}

/// Largest Pohozaev gap over several outer radii, along the ladder.
pub fn pohozaev_uniform(dim: usize, a: f64, radii: &[f64], mus: &[f64]) -> Result<CheckReport> {
    let rungs = ladder(mus, |mu| {
        let reps: Vec<CheckReport> = radii
            .iter()
            .map(|&b| pohozaev_check(&monotone::solve(&Params::new(dim, mu, a, b)?, Direction::Increasing)?))
            .collect::<Result<_>>()?;
        let worst = reps.iter().max_by(|x, y| x.gap.total_cmp(&y.gap)).cloned().expect("radii");
        let mut r = CheckReport::new("pohozaev_uniform", worst.lhs, worst.rhs).input("mu", json!(mu));
        r.extra("worst_b", worst.inputs["b"].clone());
        r.pass = reps.iter().all(|x| x.pass);
        Ok(r)
    })?;
    let mut rep = ladder_report("pohozaev_uniform", rungs);
    rep.inputs.insert("dim".into(), json!(dim));
    rep.inputs.insert("a".into(), json!(a));
    rep.inputs.insert("radii".into(), json!(radii));
    Ok(rep)
}

/// `log(4 e^(sqrt2 r) / (1 + e^(sqrt2 r))^2)`, written to stay finite for large `|r|`.
pub fn liouville_bubble(r: f64) -> f64 {
    let t = std::f64::consts::SQRT_2 * r;
    // log 4 + t - 2 log(1 + e^t) = log 4 - |t| - 2 log(1 + e^-|t|)
    4f64.ln() - t.abs() - 2.0 * (-t.abs()).exp().ln_1p()
}

/// Rescaled profile `mu [u(b + r / (k mu)) - u(b)]`, `k = u_inf,+'(b) / sqrt2`, against the
/// bubble on `[-window, 0]`.
pub fn blowup_profile(sol: &MonotoneSolution, window: f64) -> Result<CheckReport> {
    if sol.direction != Direction::Increasing {
        return Err(Error::InvalidParams("blow-up profile needs an increasing solution".into()));
    }
    let p = &sol.profile;
    let d = p.domain;
    let mu = sol.mu;
    let k = GreenPair::new(d)?.u_inf_plus_slope() / std::f64::consts::SQRT_2;
    let max = (d.b - d.a) * k * mu;
    if !(window > 0.0 && window <= max) {
        return Err(Error::WindowTooWide { window, max });
    }
    let ub = p.u[p.len() - 1];
    let scaled = |r: f64| -> Result<f64> { Ok(mu * (p.eval(d.b + r / (k * mu))?.0 - ub)) };
    let samples = 2001;
    let mut gap = 0.0f64;
    let (mut xs, mut ys, mut es) = (Vec::with_capacity(samples), Vec::with_capacity(samples), Vec::with_capacity(samples));
    for i in 0..samples {
        let r = -window + window * i as f64 / (samples - 1) as f64;
        let v = scaled(r)?;
        gap = gap.max((v - liouville_bubble(r)).abs());
        xs.push(r);
        ys.push(v);
        es.push(v.exp());
    }
    let mass = crate::radial::simpson(&xs, &es);
    // fitted layer width: where the rescaled profile reaches the bubble value at -1
    let target = liouville_bubble(-1.0);
    let mut width = f64::NAN;
    for i in 1..samples {
        if (ys[i - 1] - target) * (ys[i] - target) <= 0.0 {
            let t = (target - ys[i - 1]) / (ys[i] - ys[i - 1]);
            let r = xs[i - 1] + t * (xs[i] - xs[i - 1]);
            // physical distance from b over the predicted width 1 / (k mu)
            width = -r;
            break;
        }
    }
    let mut rep = CheckReport::new("blowup", gap, 0.0).input("mu", json!(mu)).input("window", json!(window));
    for (kk, v) in domain_inputs(&d) {
        rep.inputs.insert(kk, v);
    }
    rep.extra("k", json!(k));
    rep.extra("window_mass", json!(mass));
    rep.extra("mass_rel_gap", json!((mass - std::f64::consts::SQRT_2).abs() / std::f64::consts::SQRT_2));
    rep.extra("width_ratio", json!(width));
    rep.extra("endpoint_value", json!(scaled(0.0)?));
    // d/dr of the rescaled profile at 0 is u'(b) / k
    rep.extra("endpoint_slope", json!(p.du[p.len() - 1] / k));
    Ok(rep)
}

/// Blow-up gap along the ladder; passes on a strictly decreasing gap.
pub fn blowup_ladder(domain: &Domain<f64>, mus: &[f64], window: f64) -> Result<CheckReport> {
    let rungs = ladder(mus, |mu| blowup_profile(&monotone::solve(&Params { domain: *domain, mu }, Direction::Increasing)?, window))?;
    Ok(ladder_report("blowup", rungs))
}

/// Sup distance to `sum_j A_j G(., alpha_j)` away from the layers (distance >= 0.1).
pub fn limit_profile_check(layer: &LayerSolution) -> Result<CheckReport> {
    let gap = layer.limit_gap(0.1)?;
    let mut rep = CheckReport::new("limit", gap, 0.0).input("mu", json!(layer.mu)).input("k", json!(layer.k));
    for (kk, v) in domain_inputs(&layer.params.domain) {
        rep.inputs.insert(kk, v);
    }
    rep.extra("amplitude_residual", json!(layer.limit.residual));
    rep.extra("alphas", json!(layer.alphas));
    rep.extra("limit_alphas", json!(layer.limit.alphas));
    rep.pass = layer.limit.residual <= 1e-10 && layer.converged;
    Ok(rep)
}

/// One-layer limit gap along a ladder.
pub fn limit_ladder(domain: &Domain<f64>, mus: &[f64]) -> Result<CheckReport> {
    let rungs = ladder(mus, |mu| limit_profile_check(&gluing::one_layer(&Params { domain: *domain, mu })?))?;
    Ok(ladder_report("limit", rungs))
}

/// `2 (u_inf,+''(b) - u_inf,+'(b)^2) / u_inf,+'(b)`.
pub fn sensitivity_limit(domain: &Domain<f64>) -> Result<f64> {
    let pair = GreenPair::new(*domain)?;
    let p = pair.u_inf_plus_slope();
    Ok(2.0 * (pair.u_inf_plus_second() - p * p) / p)
}

/// `mu [u_+(b + delta; a, b + delta) - u_+(b; a, b)] / delta` against its limit; the interior
/// field is correlated with `-u_inf,+'(b) u_inf,+`.
pub fn boundary_sensitivity(params: &Params<f64>, delta: f64) -> Result<CheckReport> {
    let d = params.domain;
    let mu = params.mu;
    let moved = Params::new(d.dim, mu, d.a, d.b + delta)?;
    let (s0, s1) = rayon::join(|| monotone::solve(params, Direction::Increasing), || monotone::solve(&moved, Direction::Increasing));
    let (s0, s1) = (s0?, s1?);
    let lhs = mu * (s1.boundary_value - s0.boundary_value) / delta;
    let rhs = sensitivity_limit(&d)?;
    // interior field on [a, b - 0.1]
    let pair = GreenPair::new(d)?;
    let lim = pair.u_inf_plus();
    let c_b = -pair.u_inf_plus_slope();
    let grid = uniform_grid(d.a, d.b - 0.1, 401);
    let field: Vec<f64> = grid.iter().map(|&r| (s1.profile.value(r) - s0.profile.value(r)) / delta).collect();
    let model: Vec<f64> = grid.iter().map(|&r| c_b * lim.value(r)).collect();
    let mut rep = CheckReport::new("sensitivity", lhs, rhs).input("mu", json!(mu)).input("delta", json!(delta));
    for (kk, v) in domain_inputs(&d) {
        rep.inputs.insert(kk, v);
    }
    rep.extra("correlation", json!(correlation(&field, &model)));
    Ok(rep)
}

/// Uncentred correlation `<x, y> / (|x| |y|)`.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let xx: f64 = x.iter().map(|a| a * a).sum();
    let yy: f64 = y.iter().map(|a| a * a).sum();
    xy / (xx.sqrt() * yy.sqrt())
}

/// Sensitivity gap along the ladder; also requires the interior correlation to be positive and
/// nondecreasing.
pub fn sensitivity_ladder(domain: &Domain<f64>, mus: &[f64], delta: f64) -> Result<CheckReport> {
    let rungs = ladder(mus, |mu| boundary_sensitivity(&Params { domain: *domain, mu }, delta))?;
    let cors: Vec<f64> = rungs.iter().map(|r| r.extra["correlation"].as_f64().unwrap_or(f64::NAN)).collect();
    let mut rep = ladder_report("sensitivity", rungs);
    let ok = cors.iter().all(|&c| c > 0.0) && cors.windows(2).all(|w| w[1] >= w[0]);
    rep.extra("correlations", json!(cors));
    rep.pass &= ok;
    Ok(rep)
}

/// Largest sensitivity gap over several outer radii, along the ladder.
pub fn sensitivity_uniform(dim: usize, a: f64, radii: &[f64], mus: &[f64], delta: f64) -> Result<CheckReport> {
    let rungs = ladder(mus, |mu| {
        let reps: Vec<CheckReport> = radii.iter().map(|&b| boundary_sensitivity(&Params::new(dim, mu, a, b)?, delta)).collect::<Result<_>>()?;
        let worst = reps.iter().max_by(|x, y| x.gap.total_cmp(&y.gap)).cloned().expect("radii");
        let mut r = CheckReport::new("sensitivity_uniform", worst.lhs, worst.rhs).input("mu", json!(mu));
        r.extra("worst_b", worst.inputs["b"].clone());
        Ok(r)
    })?;
    let mut rep = ladder_report("sensitivity_uniform", rungs);
    rep.inputs.insert("dim".into(), json!(dim));
    rep.inputs.insert("radii".into(), json!(radii));
    Ok(rep)
}

/// Smallest-magnitude eigenvalue of `-Δ + 1 - mu e^(mu (u - 1))` at the solution; passes iff
/// `|sigma_min| > KERNEL_THRESHOLD`. Reports the Morse index and a uniform-mesh study.
pub fn nondegeneracy_check(sol: &MonotoneSolution) -> Result<CheckReport> {
    let lin = Linearized::at(&sol.profile, sol.mu)?;
    let sigma = lin.sigma_min()?;
    let meshes = [2001usize, 4001, 8001];
    let study: Vec<f64> = meshes
        .par_iter()
        .map(|&n| Linearized::uniform(&sol.profile, sol.mu, n)?.sigma_min())
        .collect::<Result<_>>()?;
    let lo = study.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = study.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let variation = (hi - lo) / study[study.len() - 1].abs();
    let mut rep = CheckReport::new("nondeg", sigma.abs(), 0.0).input("mu", json!(sol.mu));
    for (kk, v) in domain_inputs(&sol.profile.domain) {
        rep.inputs.insert(kk, v);
    }
    rep.extra("sigma_min", json!(sigma));
    rep.extra("morse_index", json!(lin.morse_index()));
    rep.extra("mesh_nodes", json!(meshes));
    rep.extra("mesh_sigma", json!(study));
    rep.extra("mesh_variation", json!(variation));
    rep.pass = sigma.abs() > KERNEL_THRESHOLD;
    Ok(rep)
}

/// `sigma_min` at the constant solution with `mu = lambda_2`, Richardson-extrapolated from
/// `nodes` and `2 nodes - 1` uniform nodes (the P1 error is `O(h^2)`).
pub fn kernel_control(domain: &Domain<f64>, nodes: usize) -> Result<CheckReport> {
    let lam = lambda2(domain)?;
    let coarse = Linearized::at_one(domain, lam, nodes)?.sigma_min()?;
    let fine = Linearized::at_one(domain, lam, 2 * nodes - 1)?.sigma_min()?;
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    let mut rep = CheckReport::new("nondeg_control", extrapolated.abs(), 0.0).input("mu", json!(lam)).input("nodes", json!(nodes));
    for (kk, v) in domain_inputs(domain) {
        rep.inputs.insert(kk, v);
    }
    rep.extra("sigma_coarse", json!(coarse));
    rep.extra("sigma_fine", json!(fine));
    rep.pass = extrapolated.abs() <= 1e-6;
    Ok(rep)
}

/// Both integral identities of the limit profile `u_inf,+`; gap = largest relative imbalance.
pub fn green_identity_check(pair: &GreenPair<f64>) -> Result<CheckReport> {
    let d = pair.domain;
    if d.dim == 2 && d.a == 0.0 {
        return Err(Error::SingularIntegrand("the r^(N-3) integrand is singular at the origin for N = 2; use an annulus".into()));
    }
    let (l1, r1, l2, r2) = pair.integral_identities();
    let rel1 = (l1 - r1).abs() / l1.abs().max(r1.abs()).max(1e-300);
    let rel2 = (l2 - r2).abs() / l2.abs().max(r2.abs()).max(1e-300);
    // sides of the worse identity, scaled so that gap is the relative imbalance
    let (l, r) = if rel1 >= rel2 { (l1, r1) } else { (l2, r2) };
    let scale = l.abs().max(r.abs()).max(1e-300);
    let mut rep = CheckReport::new("green", l / scale, r / scale);
    for (kk, v) in domain_inputs(&d) {
        rep.inputs.insert(kk, v);
    }
    rep.extra("identity1", json!([l1, r1, rel1]));
    rep.extra("identity2", json!([l2, r2, rel2]));
    rep.pass = rep.gap <= 1e-7;
    Ok(rep)
}

/// Suites of the `verify` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Pohozaev,
    Blowup,
    Limit,
    Sensitivity,
    Nondeg,
    Green,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pohozaev" => Suite::Pohozaev,
            "blowup" => Suite::Blowup,
            "limit" => Suite::Limit,
            "sensitivity" => Suite::Sensitivity,
            "nondeg" => Suite::Nondeg,
            "green" => Suite::Green,
            "all" => Suite::All,
            other => return Err(Error::InvalidParams(format!("unknown suite {other:?}"))),
        })
    }
}

/// Runs a suite on the unit ball of dimension `dim` (annuli `[0.3, 1]` for the Green check).
pub fn run_suite(suite: Suite, dim: usize) -> Result<Vec<CheckReport>> {
    let ball = Domain::ball(dim)?;
    let want = |s: Suite| suite == s || suite == Suite::All;
    let mut out = Vec::new();
    if want(Suite::Pohozaev) {
        out.push(pohozaev_ladder(&ball, &LADDER)?);
        out.push(pohozaev_uniform(dim, 0.0, &[0.8, 0.9, 1.0], &LADDER)?);
    }
    if want(Suite::Blowup) {
        out.push(blowup_ladder(&ball, &LADDER, BLOWUP_WINDOW)?);
    }
    if want(Suite::Limit) {
        out.push(limit_ladder(&ball, &[150.0, 300.0])?);
    }
    if want(Suite::Sensitivity) {
        out.push(sensitivity_ladder(&ball, &[100.0, 200.0], SENSITIVITY_STEP)?);
        out.push(sensitivity_uniform(dim, 0.0, &[0.9, 1.0], &[100.0, 200.0], SENSITIVITY_STEP)?);
    }
    if want(Suite::Nondeg) {
        out.push(nondegeneracy_check(&monotone::solve(&Params { domain: ball, mu: 200.0 }, Direction::Increasing)?)?);
        out.push(kernel_control(&ball, 4001)?);
    }
    if want(Suite::Green) {
        let mut cases = vec![Domain::new(dim, 0.3, 1.0)?];
        if dim != 2 {
            cases.insert(0, ball);
        }
        for d in cases {
            out.push(green_identity_check(&GreenPair::new(d)?)?);
        }
    }
    Ok(out)
}
