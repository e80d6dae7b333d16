//! Monotone solutions `u_{mu,+}` (increasing) and `u_{mu,-}` (decreasing), the constant
//! states, energies and the Nehari projection.

use serde::{Deserialize, Serialize};

use crate::collocation::{fitted_grid, Collocation, NewtonOptions};
use crate::error::{Error, Result};
use crate::params::{Domain, Params};
use crate::radial::{dopri5, hermite, integrate_with, series_start, simpson, Control, OdeOptions, Profile, State};
use crate::spectrum::lambda2;

/// Base node count of the collocation grid.
pub const BASE_NODES: usize = 4001;
/// Largest mu handled by default.
pub const MU_CAP: f64 = 500.0;
/// Shortest admissible interval.
pub const MIN_WIDTH: f64 = 1e-3;

/// The two constant solutions `lower < 1 = upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantStates {
    pub mu: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ConstantStates {
    /// `h(x) = x - e^(mu (x - 1))`, positive exactly between the two states.
    pub fn h(&self, x: f64) -> f64 {
        x - (self.mu * (x - 1.0)).exp()
    }
}

/// Solves `x = e^(mu (x - 1))`, `x < 1`, by Newton from 0 (monotone since `h` is concave).
pub fn constant_states(mu: f64) -> Result<ConstantStates> {
    if !(mu > 1.0) || !mu.is_finite() {
        return Err(Error::InvalidParams(format!("mu must exceed 1, got {mu}")));
    }
    let top = 1.0 - mu.ln() / mu;
    let mut x = 0.0f64;
    for _ in 0..200 {
        let e = (mu * (x - 1.0)).exp();
        let step = (x - e) / (1.0 - mu * e);
        let next = (x - step).min(top);
        if (next - x).abs() <= 1e-16 * next.abs().max(f64::MIN_POSITIVE) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(ConstantStates { mu, lower: x, upper: 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Increasing => "increasing",
            Direction::Decreasing => "decreasing",
        }
    }
}

/// Converged monotone solution.
#[derive(Debug, Clone)]
pub struct MonotoneSolution {
    pub direction: Direction,
    pub params: Params<f64>,
    pub profile: Profile<f64>,
    pub mu: f64,
    /// Value at the maximum end (`b` for increasing, `a` for decreasing).
    pub boundary_value: f64,
    /// Value at the minimum end.
    pub start_value: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub lower: f64,
}

/// Result of the shooting stage alone.
#[derive(Debug, Clone)]
pub struct Shot {
    pub direction: Direction,
    /// Value at the start end.
    pub c: f64,
    pub profile: Profile<f64>,
    /// Value and slope at the far end.
    pub end_value: f64,
    pub end_slope: f64,
    pub bisections: usize,
}

enum Outcome {
    Turned,
    Reached { u: f64, p: f64 },
}

fn ode_opts() -> OdeOptions<f64> {
    let mut o = OdeOptions::with_tol(1e-12);
    o.atol = 1e-14;
    o
}

fn start_state(domain: &Domain<f64>, mu: f64, dir: Direction, c: f64) -> (f64, [f64; 2], f64) {
    let g = move |u: f64| (mu * (u - 1.0)).exp();
    match dir {
        Direction::Increasing => {
            if domain.a == 0.0 {
                let h = 1e-4f64.min(domain.b / 4.0);
                (h, series_start(domain.dim, &g, c, h), domain.b)
            } else {
                (domain.a, [c, 0.0], domain.b)
            }
        }
        Direction::Decreasing => (domain.b, [c, 0.0], domain.a),
    }
}

/// One trajectory from the minimum end with value `c`. With `stop_at_turn` the run ends at the
/// first point where `u'` loses the declared sign.
fn fire(domain: &Domain<f64>, mu: f64, dir: Direction, c: f64, stop_at_turn: bool) -> Result<Outcome> {
    let nm1 = domain.nm1();
    let (r0, y0, end) = start_state(domain, mu, dir, c);
    let sg = dir.sign();
    let mut turned = false;
    let opts = ode_opts();
    let res = dopri5(
        |r, y: &[f64; 2]| [y[1], y[0] - (mu * (y[0] - 1.0)).exp() - nm1 * y[1] / r],
        r0,
        y0,
        end,
        &[],
        &opts,
        |s| {
            if s.y1[0].abs() > opts.u_cap {
                return Err(Error::BlowUp { r: s.r0 });
            }
            if stop_at_turn && sg * s.y1[1] <= 0.0 {
                turned = true;
                return Ok(Control::Stop);
            }
            Ok(Control::Continue)
        },
    );
    match res {
        Ok((_, y)) if !turned => Ok(Outcome::Reached { u: y[0], p: y[1] }),
        Ok(_) => Ok(Outcome::Turned),
        // a runaway trajectory overshoots just like an early turn
        Err(Error::BlowUp { .. }) => Ok(Outcome::Turned),
        Err(e) => Err(e),
    }
}

/// Whether the trajectory started at `c` turns (or blows up) before the far end.
pub fn turns_early(params: &Params<f64>, dir: Direction, c: f64) -> Result<bool> {
    Ok(matches!(fire(&params.domain, params.mu, dir, c, true)?, Outcome::Turned))
}

fn check_domain(params: &Params<f64>, dir: Direction) -> Result<()> {
    let d = &params.domain;
    if d.b - d.a < MIN_WIDTH {
        return Err(Error::DegenerateInterval { a: d.a, b: d.b });
    }
    if dir == Direction::Decreasing && d.a == 0.0 {
        return Err(Error::InvalidParams("decreasing solutions need an annulus (a > 0)".into()));
    }
    if params.mu > MU_CAP {
        return Err(Error::InvalidParams(format!("mu = {} above the desk-scale cap {MU_CAP}", params.mu)));
    }
    Ok(())
}

/// Fails with `BelowThreshold` unless `mu > lambda_2(a, b)`.
pub fn check_threshold(params: &Params<f64>) -> Result<f64> {
    let l2 = lambda2(&params.domain)?;
    if params.mu <= l2 {
        return Err(Error::BelowThreshold { mu: params.mu, lambda2: l2 });
    }
    Ok(l2)
}

/// Number of start values classified before bisection.
pub const SCAN_POINTS: usize = 40;

/// Shooting stage. Start values `c in (lower, 1)` are classified by whether `u'` turns before
/// the far end (too large) or not (too small). A coarse scan, refined geometrically toward 1, locates the lowest
/// transition, which is then bisected to machine width. `seed in (0, 1)` shifts the scan lattice.
pub fn shoot(params: &Params<f64>, dir: Direction, seed: Option<f64>) -> Result<Shot> {
    check_domain(params, dir)?;
    let mu = params.mu;
    let d = params.domain;
    let cs = constant_states(mu)?;
    let span = 1.0 - cs.lower;
    let offset = seed.filter(|s| *s > 0.0 && *s < 1.0).unwrap_or(0.5);
    let mut lo = cs.lower;
    let mut hi = None;
    let mut count = 0;
    for i in 0..SCAN_POINTS {
        let c = cs.lower + span * (i as f64 + offset) / SCAN_POINTS as f64;
        count += 1;
        match fire(&d, mu, dir, c, true)? {
            Outcome::Turned => {
                hi = Some(c);
                break;
            }
            Outcome::Reached { .. } => lo = c,
        }
    }
    // near the threshold only start values close to 1 turn
    let mut gap = span / SCAN_POINTS as f64;
    while hi.is_none() && gap > 1e-14 {
        gap *= 0.25;
        let c = 1.0 - gap;
        if c <= lo {
            continue;
        }
        count += 1;
        match fire(&d, mu, dir, c, true)? {
            Outcome::Turned => hi = Some(c),
            Outcome::Reached { .. } => lo = c,
        }
    }
    let Some(hi) = hi else {
        return Err(Error::ShootingCollapse(format!(
            "no start value in ({:e}, 1) turns before the far end ({count} trials)",
            cs.lower
        )));
    };
    if lo <= cs.lower {
        return Err(Error::ShootingCollapse(format!("every start value turned; bracket [{lo:e}, {hi:e}]")));
    }
    finish(params, dir, lo, hi, count)
}

/// Second monotone solution on the small-amplitude branch. Between a fold and the linear
/// threshold the start values near 1 reach the far end again; the highest transition is
/// bisected.
pub fn shoot_upper(params: &Params<f64>, dir: Direction) -> Result<Shot> {
    let lower = shoot(params, dir, None)?;
    let (d, mu) = (params.domain, params.mu);
    let mut reached = None;
    let mut count = lower.bisections;
    let mut gap = 4.0 * f64::EPSILON;
    // probe downward from 1 so the noisy neighbourhood of the lower transition is never used
    while 1.0 - gap > lower.c {
        let c = 1.0 - gap;
        count += 1;
        match (fire(&d, mu, dir, c, true)?, reached) {
            (Outcome::Reached { .. }, _) => reached = Some(c),
            (Outcome::Turned, Some(r)) => {
                let shot = finish(params, dir, r, c, count)?;
                if 1.0 - shot.c < 1e-10 {
                    break;
                }
                return Ok(shot);
            }
            (Outcome::Turned, None) => break,
        }
        gap *= 2.0;
    }
    Err(Error::ShootingCollapse(format!("no second transition above c = {}", lower.c)))
}

/// Bisects between a start value `reached` that reaches the far end and one that turns, then
/// integrates the better neighbour.
fn finish(params: &Params<f64>, dir: Direction, reached: f64, turned: f64, mut count: usize) -> Result<Shot> {
    let (d, mu) = (params.domain, params.mu);
    let (mut lo, mut hi) = (reached, turned);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        count += 1;
        match fire(&d, mu, dir, mid, true)? {
            Outcome::Turned => hi = mid,
            Outcome::Reached { .. } => lo = mid,
        }
    }
    let c_lo = lo;
    // the undershoot and overshoot neighbours bracket p(end) = 0; keep the smaller miss
    let at = |c: f64| -> Result<(f64, f64)> {
        match fire(&d, mu, dir, c, false)? {
            Outcome::Reached { u, p } => Ok((u, p)),
            Outcome::Turned => Err(Error::ShootingCollapse(format!("trajectory from c = {c} blew up"))),
        }
    };
    let (u_lo, p_lo) = at(c_lo)?;
    let (u_hi, p_hi) = at(hi)?;
    let (c, end_value, end_slope) = if p_hi.abs() < p_lo.abs() { (hi, u_hi, p_hi) } else { (c_lo, u_lo, p_lo) };
    let profile = trajectory(&d, mu, dir, c)?;
    Ok(Shot { direction: dir, c, profile, end_value, end_slope, bisections: count })
}

/// Profile of the trajectory started at `c`, with the Neumann end imposed exactly (the miss is at
/// most the shooting resolution).
fn trajectory(d: &Domain<f64>, mu: f64, dir: Direction, c: f64) -> Result<Profile<f64>> {
    let (from, to) = match dir {
        Direction::Increasing => (State::new(d.a, c, 0.0), d.b),
        Direction::Decreasing => (State::new(d.b, c, 0.0), d.a),
    };
    let mut opts = ode_opts();
    opts.h_max = Some((d.b - d.a) / 200.0);
    let mut profile = integrate_with(d, move |u: f64| (mu * (u - 1.0)).exp(), from, to, &[], &opts)?;
    let n = profile.len();
    match dir {
        Direction::Increasing => profile.du[n - 1] = 0.0,
        Direction::Decreasing => profile.du[0] = 0.0,
    }
    Ok(profile)
}

/// Shot with a known start value `c` (e.g. from [`first_turn`]).
pub fn shot_from(params: &Params<f64>, dir: Direction, c: f64) -> Result<Shot> {
    check_domain(params, dir)?;
    let (d, mu) = (params.domain, params.mu);
    let (end_value, end_slope) = match fire(&d, mu, dir, c, false)? {
        Outcome::Reached { u, p } => (u, p),
        Outcome::Turned => return Err(Error::ShootingCollapse(format!("trajectory from c = {c} blew up"))),
    };
    let profile = trajectory(&d, mu, dir, c)?;
    Ok(Shot { direction: dir, c, profile, end_value, end_slope, bisections: 0 })
}

/// First interior radius where the trajectory started at `c` has `u' = 0`, with the value there.
/// `None` when it reaches the far end of `domain` without turning.
pub fn first_turn(domain: &Domain<f64>, mu: f64, dir: Direction, c: f64) -> Result<Option<(f64, f64)>> {
    let nm1 = domain.nm1();
    let (r0, y0, end) = start_state(domain, mu, dir, c);
    let sg = dir.sign();
    let rhs = |r: f64, y: &[f64; 2]| [y[1], y[0] - (mu * (y[0] - 1.0)).exp() - nm1 * y[1] / r];
    let mut opts = ode_opts();
    opts.h_max = Some((domain.b - domain.a) / 200.0);
    let mut hit = None;
    let res = dopri5(rhs, r0, y0, end, &[], &opts, |st| {
        if st.y1[0].abs() > opts.u_cap {
            return Err(Error::BlowUp { r: st.r0 });
        }
        if sg * st.y1[1] <= 0.0 {
            let (mut a, mut b) = (st.r0, st.r1);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if sg * st.dense(1, m).0 > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            hit = Some(0.5 * (a + b));
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    });
    match res {
        Ok(_) => {}
        Err(Error::BlowUp { .. }) if hit.is_none() => return Ok(None),
        Err(e) => return Err(e),
    }
    let Some(mut s) = hit else { return Ok(None) };
    // polish p(s) = 0 by Newton with p' = u'' from the equation
    let mut u = f64::NAN;
    for _ in 0..4 {
        let (_, y) = dopri5(rhs, r0, y0, s, &[], &opts, |_| Ok(Control::Continue))?;
        u = y[0];
        let dp = rhs(s, &y)[1];
        if dp == 0.0 {
            break;
        }
        let ds = y[1] / dp;
        s -= ds;
        if ds.abs() < 1e-15 * s.abs().max(1.0) {
            break;
        }
    }
    Ok(Some((s, u)))
}

/// Shooting followed by collocation-Newton refinement on a fitted grid.
pub fn solve(params: &Params<f64>, dir: Direction) -> Result<MonotoneSolution> {
    check_domain(params, dir)?;
    check_threshold(params)?;
    solve_seeded(params, dir, None)
}

/// [`solve`] without the threshold check, with an optional first bisection midpoint.
pub fn solve_seeded(params: &Params<f64>, dir: Direction, seed: Option<f64>) -> Result<MonotoneSolution> {
    let shot = shoot(params, dir, seed)?;
    refine(params, dir, &shot.profile)
}

/// Small-amplitude solution past a fold (see [`shoot_upper`]), refined by collocation.
pub fn solve_upper(params: &Params<f64>, dir: Direction) -> Result<MonotoneSolution> {
    let shot = shoot_upper(params, dir)?;
    refine(params, dir, &shot.profile)
}

/// Shot from a known start value, refined by collocation.
pub fn solve_from(params: &Params<f64>, dir: Direction, c: f64) -> Result<MonotoneSolution> {
    let shot = shot_from(params, dir, c)?;
    refine(params, dir, &shot.profile)
}

/// Collocation-Newton refinement of an approximate monotone solution.
pub fn refine(params: &Params<f64>, dir: Direction, guess: &Profile<f64>) -> Result<MonotoneSolution> {
    refine_with(params, dir, guess, BASE_NODES)
}

pub fn refine_with(params: &Params<f64>, dir: Direction, guess: &Profile<f64>, base_nodes: usize) -> Result<MonotoneSolution> {
    let mu = params.mu;
    let grid = fitted_grid(&params.domain, mu, guess, base_nodes);
    let coll = Collocation::new(params.domain, grid)?;
    let x0 = coll.pack(guess)?;
    let sol = coll.solve(x0, mu, &NewtonOptions::default())?;
    let profile = coll.unpack(&sol.x);
    let cs = constant_states(mu)?;
    let n = profile.len();
    let (start_value, boundary_value) = match dir {
        Direction::Increasing => (profile.u[0], profile.u[n - 1]),
        Direction::Decreasing => (profile.u[n - 1], profile.u[0]),
    };
    let sg = dir.sign();
    if profile.du[1..n - 1].iter().any(|&p| sg * p < 0.0) || !(start_value < 1.0 && boundary_value > 1.0) {
        return Err(Error::ShootingCollapse(format!(
            "refined profile lost monotonicity (u at ends {start_value}, {boundary_value})"
        )));
    }
    let z = shifted(&profile, cs.lower);
    let energy = energy(&z, mu)?;
    Ok(MonotoneSolution {
        direction: dir,
        params: *params,
        profile,
        mu,
        boundary_value,
        start_value,
        energy,
        residual: sol.residual,
        iterations: sol.iterations,
        lower: cs.lower,
    })
}

pub fn solve_increasing(params: &Params<f64>) -> Result<MonotoneSolution> {
    solve(params, Direction::Increasing)
}

pub fn solve_decreasing(params: &Params<f64>) -> Result<MonotoneSolution> {
    solve(params, Direction::Decreasing)
}

/// `u - shift` with the same derivative.
pub fn shifted(p: &Profile<f64>, shift: f64) -> Profile<f64> {
    Profile { grid: p.grid.clone(), u: p.u.iter().map(|v| v - shift).collect(), du: p.du.clone(), domain: p.domain }
}

/// `E_mu(z) = omega int (z'^2/2 + z^2/2 + l (z - e^(mu z)/mu) + l^2/2) r^(N-1) dr`, `l = lower`.
pub fn energy(z: &Profile<f64>, mu: f64) -> Result<f64> {
    let l = constant_states(mu)?.lower;
    let d = z.domain;
    let f: Vec<f64> = (0..z.len())
        .map(|i| {
            let (v, dv) = (z.u[i], z.du[i]);
            (0.5 * dv * dv + 0.5 * v * v + l * (v - (mu * v).exp() / mu) + 0.5 * l * l) * d.weight(z.grid[i])
        })
        .collect();
    Ok(d.omega() * simpson(&z.grid, &f))
}

struct Ray {
    a: f64,
    b: f64,
    l: f64,
    mu: f64,
    grid: Vec<f64>,
    wz: Vec<f64>,
    z: Vec<f64>,
}

impl Ray {
    fn new(z: &Profile<f64>, mu: f64) -> Result<Ray> {
        let l = constant_states(mu)?.lower;
        let d = z.domain;
        let wz: Vec<f64> = z.grid.iter().map(|&r| d.weight(r)).collect();
        let quad = |f: &dyn Fn(usize) -> f64| simpson(&z.grid, &(0..z.len()).map(|i| f(i) * wz[i]).collect::<Vec<_>>());
        let a = quad(&|i| z.du[i] * z.du[i] + z.u[i] * z.u[i]);
        let b = quad(&|i| z.u[i]);
        Ok(Ray { a, b, l, mu, grid: z.grid.clone(), wz, z: z.u.clone() })
    }

    fn quad_exp(&self, t: f64, power: i32) -> f64 {
        if self.mu * t * self.z.iter().fold(0.0f64, |m, &v| m.max(v)) > 700.0 {
            return f64::INFINITY;
        }
        let f: Vec<f64> = self
            .z
            .iter()
            .zip(&self.wz)
            .map(|(&v, &w)| if w == 0.0 { 0.0 } else { v.powi(power) * (self.mu * t * v).exp() * w })
            .collect();
        simpson(&self.grid, &f)
    }

    /// `E(tz)` up to the constant `l^2/2` volume term, without `omega`.
    fn value(&self, t: f64) -> f64 {
        0.5 * t * t * self.a + self.l * t * self.b - self.l / self.mu * self.quad_exp(t, 0)
    }

    fn slope(&self, t: f64) -> f64 {
        t * self.a + self.l * self.b - self.l * self.quad_exp(t, 1)
    }

    fn curvature(&self, t: f64) -> f64 {
        self.a - self.l * self.mu * self.quad_exp(t, 2)
    }
}

/// The unique `t > 0` maximizing `t -> E_mu(t z)`.
pub fn nehari_project(z: &Profile<f64>, mu: f64) -> Result<f64> {
    if z.u.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroFunction);
    }
    let ray = Ray::new(z, mu)?;
    // t = 0 is a critical point with positive curvature; walk right until the slope turns negative
    let mut hi = 1.0;
    let mut guard = 0;
    while !(ray.slope(hi) < 0.0) {
        hi *= 2.0;
        guard += 1;
        if guard > 200 || !hi.is_finite() {
            return Err(Error::ZeroFunction);
        }
    }
    let mut lo = 0.0;
    // golden section on the unimodal ray energy
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - gr * (hi - lo), lo + gr * (hi - lo));
    let (mut f1, mut f2) = (ray.value(x1), ray.value(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-8 * hi {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = ray.value(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = ray.value(x1);
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..50 {
        let c = ray.curvature(t);
        if !(c < 0.0) {
            break;
        }
        let step = ray.slope(t) / c;
        t -= step;
        if step.abs() <= 1e-15 * t.abs() {
            break;
        }
    }
    Ok(t)
}

/// `omega int (u - e^(mu (u - 1))) r^(N-1) dr` by the corrected trapezoid rule
/// (the same rule the collocation flux rows use, so it vanishes on discrete solutions).
pub fn mass_balance(p: &Profile<f64>, mu: f64) -> f64 {
    let d = p.domain;
    let n = d.dim as i32;
    let mut f = Vec::with_capacity(p.len());
    let mut df = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let (r, u, du) = (p.grid[i], p.u[i], p.du[i]);
        let e = (mu * (u - 1.0)).exp();
        let w = d.weight(r);
        let dw = if r == 0.0 { if n == 2 { 1.0 } else { 0.0 } } else { d.nm1() * r.powi(n - 2) };
        f.push((u - e) * w);
        df.push((1.0 - mu * e) * du * w + (u - e) * dw);
    }
    d.omega() * hermite(&p.grid, &f, &df)
}

/// `L(r) = u'^2/2 - u^2/2 + e^(mu (u - 1))/mu` on the grid.
pub fn lyapunov(p: &Profile<f64>, mu: f64) -> Vec<f64> {
    p.u.iter().zip(&p.du).map(|(&u, &du)| 0.5 * du * du - 0.5 * u * u + (mu * (u - 1.0)).exp() / mu).collect()
}

/// Largest increase of `L` between consecutive nodes (0 when nonincreasing).
pub fn lyapunov_violation(p: &Profile<f64>, mu: f64) -> f64 {
    lyapunov(p, mu).windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Largest amount by which `u` dips below `lower`.
pub fn barrier_violation(p: &Profile<f64>, lower: f64) -> f64 {
    p.u.iter().map(|&u| lower - u).fold(0.0, f64::max)
}

pub fn max_slope(p: &Profile<f64>) -> f64 {
    p.du.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Flux residual of the discretized equation for an arbitrary profile on its own grid.
pub fn residual_of(p: &Profile<f64>, mu: f64) -> Result<f64> {
    let c = Collocation::new(p.domain, p.grid.clone())?;
    let mut x = Vec::with_capacity(2 * p.len());
    for i in 0..p.len() {
        x.push(p.u[i]);
        x.push(p.du[i]);
    }
    Ok(c.pde_residual(&x, mu))
}

/// Invariant report of a monotone solution.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub residual: f64,
    pub mass_balance: f64,
    pub lyapunov_violation: f64,
    pub barrier_violation: f64,
    pub max_slope: f64,
    pub end_slopes: (f64, f64),
}

impl MonotoneSolution {
    pub fn diagnostics(&self) -> Diagnostics {
        let p = &self.profile;
        Diagnostics {
            residual: self.residual,
            mass_balance: mass_balance(p, self.mu),
            lyapunov_violation: lyapunov_violation(p, self.mu),
            barrier_violation: barrier_violation(p, self.lower),
            max_slope: max_slope(p),
            end_slopes: (p.du[0], p.du[p.len() - 1]),
        }
    }

    /// `z = u - lower`.
    pub fn z(&self) -> Profile<f64> {
        shifted(&self.profile, self.lower)
    }

    /// Sup distance to another solution on the union of both grids.
    pub fn distance(&self, other: &MonotoneSolution) -> f64 {
        let a = self.profile.grid.iter().map(|&r| (self.profile.value(r) - other.profile.value(r)).abs());
        let b = other.profile.grid.iter().map(|&r| (self.profile.value(r) - other.profile.value(r)).abs());
        a.chain(b).fold(0.0, f64::max)
    }
}

/// Solves from every seed and returns the largest pairwise sup distance.
pub fn multistart_spread(params: &Params<f64>, dir: Direction, seeds: &[f64]) -> Result<f64> {
    use rayon::prelude::*;
    let sols: Vec<MonotoneSolution> =
        seeds.par_iter().map(|&s| solve_seeded(params, dir, Some(s))).collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            worst = worst.max(sols[i].distance(&sols[j]));
        }
    }
    Ok(worst)
}
