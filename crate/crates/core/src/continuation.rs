//! Bifurcation branches out of the constant solution `(lambda_i, 1)`: start by an amplitude
//! condition along the eigenfunction, follow by pseudo-arclength on the collocation system.

use serde::{Deserialize, Serialize};

use crate::collocation::Collocation;
use crate::error::{Error, Result};
use crate::linalg::BandedLu;
use crate::linearized::Linearized;
use crate::params::{Domain, Params};
use crate::radial::{uniform_grid, Profile};
use crate::spectrum::{count_sign_changes, eigenvalues, radial_neumann_eigs};

/// Nodes of the continuation grid.
pub const NODES: usize = 4001;
/// Arclength step bounds.
pub const STEP_MIN: f64 = 1e-4;
pub const STEP_MAX: f64 = 0.5;
/// Sup-norm amplitude of the first point along the eigenfunction.
pub const START_AMPLITUDE: f64 = 0.05;
/// Weight of `mu` in the arclength metric (`mu / MU_SCALE` against the RMS of `u`).
pub const MU_SCALE: f64 = 10.0;
/// Residual target of the corrector (scaled rows).
const CORRECTOR_TOL: f64 = 1e-9;

/// Side of `1` taken by `u` at the inner end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sign::Minus => "minus",
            Sign::Plus => "plus",
        }
    }
}

/// Classification of one solution.
#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub mu: f64,
    /// Value at the inner end (`r = 0` or `r = a`).
    pub u0: f64,
    pub sup_norm: f64,
    pub c1_norm: f64,
    pub zeros_of_u_minus_1: usize,
    /// Interior sign changes of `u'`.
    pub critical_points: usize,
    /// Every interior critical point lies between two zeros of `u - 1`.
    pub interlaced: bool,
    /// A zero of `u - 1` with `|u'| < 1e-10` was seen.
    pub nonsimple_zero: Option<f64>,
    pub min_linearized_eig: f64,
    pub profile_ref: String,
}

/// Why a trace ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MuMax,
    MuMin,
    C1Ceiling,
    MaxSteps,
    /// The corrector failed below the minimum step.
    MinStep,
    /// Amplitude decayed back onto the constant solution.
    Trivial,
}

/// A traced branch.
#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub i: usize,
    pub sign: Sign,
    pub domain: Domain<f64>,
    pub lambda: f64,
    pub records: Vec<BranchRecord>,
    /// Arclength steps between consecutive records.
    pub steps: Vec<f64>,
    /// Parameter values where `d mu / ds` changed sign.
    pub folds: Vec<f64>,
    pub stop: StopReason,
    pub truncated: bool,
    #[serde(skip)]
    pub profiles: Vec<Profile<f64>>,
}

impl Branch {
    pub fn id(&self) -> String {
        format!("b{}{}", self.i, self.sign.name())
    }

    /// Records violating the branch invariants (zero count `i - 1`, consistent side of 1).
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for r in &self.records {
            if r.zeros_of_u_minus_1 != self.i - 1 {
                v.push(format!("{}: {} zeros of u - 1 at mu = {}", r.profile_ref, r.zeros_of_u_minus_1, r.mu));
            }
            if (r.u0 - 1.0) * self.sign.factor() <= 0.0 {
                v.push(format!("{}: u0 = {} on the wrong side of 1", r.profile_ref, r.u0));
            }
        }
        v
    }

    /// Rows `mu,u0,sup_norm,c1_norm,zeros,min_eig`.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("mu,u0,sup_norm,c1_norm,zeros,min_eig\n");
        for r in &self.records {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}\n",
                r.mu, r.u0, r.sup_norm, r.c1_norm, r.zeros_of_u_minus_1, r.min_linearized_eig
            ));
        }
        s
    }
}

/// Tuning of a trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub nodes: usize,
    pub max_steps: usize,
    pub initial_step: f64,
    /// Stop once `||u||_inf + ||u'||_inf` exceeds this.
    pub c1_ceiling: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { nodes: NODES, max_steps: 100, initial_step: 0.02, c1_ceiling: 50.0 }
    }
}

/// Classifies a converged solution.
pub fn classify(profile: &Profile<f64>, mu: f64) -> Result<BranchRecord> {
    let dev = profile.u.iter().fold(0.0f64, |m, &u| m.max((u - 1.0).abs()));
    if dev < 1e-12 {
        return Err(Error::MalformedProfile("constant profile: zeros of u - 1 are undefined".into()));
    }
    let n = profile.len();
    let mut zeros = Vec::new();
    let mut nonsimple = None;
    let mut last: Option<(usize, f64)> = None;
    for i in 0..n {
        let v = profile.u[i] - 1.0;
        if v == 0.0 {
            continue;
        }
        if let Some((j, w)) = last {
            if w.signum() != v.signum() {
                // linear interpolation of the crossing and of u' there
                let t = w / (w - v);
                let r = profile.grid[j] + t * (profile.grid[i] - profile.grid[j]);
                let du = profile.du[j] + t * (profile.du[i] - profile.du[j]);
                if du.abs() < 1e-10 && nonsimple.is_none() {
                    nonsimple = Some(r);
                }
                zeros.push(r);
            }
        }
        last = Some((i, v));
    }
    let interior = &profile.du[1..n - 1];
    let critical_points = count_sign_changes(interior);
    let mut crit = Vec::new();
    let mut prev: Option<(usize, f64)> = None;
    for i in 1..n - 1 {
        let d = profile.du[i];
        if d == 0.0 {
            continue;
        }
        if let Some((j, e)) = prev {
            if e.signum() != d.signum() {
                crit.push(0.5 * (profile.grid[i] + profile.grid[j]));
            }
        }
        prev = Some((i, d));
    }
    let interlaced = crit.iter().all(|&c| zeros.iter().any(|&z| z < c) && zeros.iter().any(|&z| z > c));
    let sup = profile.sup_norm();
    let dsup = profile.du.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    let lin = Linearized::at(profile, mu)?;
    Ok(BranchRecord {
        mu,
        u0: profile.u[0],
        sup_norm: sup,
        c1_norm: sup + dsup,
        zeros_of_u_minus_1: zeros.len(),
        critical_points,
        interlaced,
        nonsimple_zero: nonsimple,
        min_linearized_eig: lin.sigma_min()?,
        profile_ref: String::new(),
    })
}

/// Branch points in `(lo, hi)`: the eigenvalues `lambda_i` (i >= 2) of the linearization at
/// `u = 1`.
pub fn detect_bifurcation(domain: &Domain<f64>, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(hi > lo) {
        return Err(Error::InvalidParams(format!("empty range ({lo}, {hi})")));
    }
    let mut count = 2;
    loop {
        let lams = eigenvalues(domain, count)?;
        if *lams.last().unwrap() >= hi || count > 200 {
            return Ok(lams.into_iter().skip(1).filter(|&l| l > lo && l < hi).collect());
        }
        count += 4;
    }
}

/// Sign of the determinant of the collocation Jacobian at `u = 1`.
fn det_sign(coll: &Collocation, one: &[f64], mu: f64) -> Result<f64> {
    // an exactly singular point (mu = 1 is lambda_1) is nudged off
    let (lu, _) = coll.factor(one, mu).or_else(|_| coll.factor(one, mu * (1.0 + 1e-9)))?;
    Ok(lu.log_det().0)
}

/// Independent check of [`detect_bifurcation`]: sign changes of `det J(1, mu)` of the
/// discretized problem, scanned with step `scan` and bisected.
pub fn jacobian_crossings(domain: &Domain<f64>, lo: f64, hi: f64, nodes: usize, scan: f64) -> Result<Vec<f64>> {
    let coll = Collocation::new(*domain, uniform_grid(domain.a, domain.b, nodes))?;
    let one: Vec<f64> = (0..coll.dim()).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect();
    let steps = ((hi - lo) / scan).ceil().max(1.0) as usize;
    let mut out = Vec::new();
    let mut a = lo;
    let mut sa = det_sign(&coll, &one, a)?;
    for k in 1..=steps {
        let b = lo + (hi - lo) * k as f64 / steps as f64;
        let sb = det_sign(&coll, &one, b)?;
        if sa != sb {
            let (mut x, mut y) = (a, b);
            for _ in 0..60 {
                let m = 0.5 * (x + y);
                if det_sign(&coll, &one, m)? == sa {
                    x = m;
                } else {
                    y = m;
                }
            }
            out.push(0.5 * (x + y));
        }
        a = b;
        sa = sb;
    }
    Ok(out)
}

/// Weighted inner product on the `u` components plus `mu / scale`.
struct Metric {
    n: usize,
    scale: f64,
}

impl Metric {
    fn dot(&self, x: &[f64], m: f64, y: &[f64], nu: f64) -> f64 {
        let s: f64 = x.iter().step_by(2).zip(y.iter().step_by(2)).map(|(a, b)| a * b).sum();
        s / self.n as f64 + m * nu / (self.scale * self.scale)
    }

    fn normalize(&self, x: &mut [f64], m: &mut f64) {
        let nrm = self.dot(x, *m, x, *m).sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
        *m /= nrm;
    }
}

/// Solves the bordered system `[J dmu; c^T cm] [y; ym] = [r; rm]`.
fn bordered(lu: &BandedLu<f64>, dmu: &[f64], c: &[f64], cm: f64, r: &[f64], rm: f64) -> Result<(Vec<f64>, f64)> {
    let mut a = r.to_vec();
    lu.solve(&mut a);
    let mut b = dmu.to_vec();
    lu.solve(&mut b);
    let ca: f64 = c.iter().zip(&a).map(|(x, y)| x * y).sum();
    let cb: f64 = c.iter().zip(&b).map(|(x, y)| x * y).sum();
    let den = cm - cb;
    if !den.is_finite() || den == 0.0 {
        return Err(Error::SingularSystem { cond: f64::INFINITY });
    }
    let ym = (rm - ca) / den;
    let y = a.iter().zip(&b).map(|(ai, bi)| ai - bi * ym).collect();
    Ok((y, ym))
}

/// Newton on `R(x, mu) = 0` plus one linear constraint `c . x + cm mu = target`.
fn corrector(coll: &Collocation, mut x: Vec<f64>, mut mu: f64, c: &[f64], cm: f64, target: f64, tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
    for it in 0..max_iter {
        let r = coll.residual(&x, mu);
        let g: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + cm * mu - target;
        let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !rn.is_finite() {
            break;
        }
        if rn <= tol && g.abs() <= 1e-12 {
            return Ok((x, mu, it));
        }
        let (lu, dmu) = coll.factor(&x, mu)?;
        let (dx, dm) = bordered(&lu, &dmu, c, cm, &r, g)?;
        x.iter_mut().zip(&dx).for_each(|(a, d)| *a -= d);
        mu -= dm;
        if !(mu > 1.0) {
            break;
        }
    }
    Err(Error::CorrectorDivergence { mu })
}

fn eigen_direction(domain: &Domain<f64>, coll: &Collocation, i: usize) -> Result<(f64, Vec<f64>)> {
    if i < 2 {
        return Err(Error::InvalidParams(format!("branch index {i} < 2")));
    }
    let pairs = radial_neumann_eigs(domain, i)?;
    let e = &pairs[i - 1];
    let phi = coll.pack(&e.phi)?;
    let sup = e.phi.sup_norm();
    Ok((e.lam, phi.iter().map(|v| v / sup).collect()))
}

/// Solution on branch `i` with `(u - 1, phi) = amp (phi, phi)` (`phi` scaled to sup-norm 1); `mu`
/// is an unknown. Small `amp` lands next to the branch point.
pub fn branch_start(domain: &Domain<f64>, i: usize, amp: f64, nodes: usize) -> Result<(f64, Profile<f64>)> {
    let coll = Collocation::new(*domain, uniform_grid(domain.a, domain.b, nodes))?;
    let (lam, phi) = eigen_direction(domain, &coll, i)?;
    let (x, mu) = start_point(&coll, lam, &phi, amp)?;
    Ok((mu, coll.unpack(&x)))
}

fn start_point(coll: &Collocation, lam: f64, phi: &[f64], amp: f64) -> Result<(Vec<f64>, f64)> {
    let c = u_only(phi);
    let x0: Vec<f64> = phi.iter().enumerate().map(|(k, p)| if k % 2 == 0 { 1.0 + amp * p } else { amp * p }).collect();
    let target = dot(&c, &x0);
        // the guess residual is O(amp^2), so the tolerance must sit below it
    let tol = CORRECTOR_TOL.min(1e-3 * amp * amp).max(1e-15);
    let (x, mu, _) = corrector(coll, x0, lam, &c, 0.0, target, tol, 40)?;
    Ok((x, mu))
}

/// `phi` with the derivative slots zeroed (the constraint acts on `u` only).
fn u_only(phi: &[f64]) -> Vec<f64> {
    phi.iter().enumerate().map(|(k, p)| if k % 2 == 0 { *p } else { 0.0 }).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Traces branch `i` on the side `sign` up to `mu_max`.
pub fn trace_branch(params: &Params<f64>, i: usize, sign: Sign, mu_max: f64) -> Result<Branch> {
    trace_branch_with(&params.domain, i, sign, mu_max, &TraceOptions::default())
}

pub fn trace_branch_with(domain: &Domain<f64>, i: usize, sign: Sign, mu_max: f64, opts: &TraceOptions) -> Result<Branch> {
    let coll = Collocation::new(*domain, uniform_grid(domain.a, domain.b, opts.nodes))?;
    let (lam, phi) = eigen_direction(domain, &coll, i)?;
    if !(mu_max > lam) {
        return Err(Error::InvalidParams(format!("mu_max = {mu_max} not above lambda_{i} = {lam}")));
    }
    // phi(a) > 0, so the amplitude sign is the side of u(a)
    let amp = sign.factor() * START_AMPLITUDE;
    let (mut x, mut mu) = start_point(&coll, lam, &phi, amp)?;
    let metric = Metric { n: opts.nodes, scale: MU_SCALE };
    // initial tangent: amplitude growing
    let c = u_only(&phi);
    let (lu, dmu) = coll.factor(&x, mu)?;
    let zero = vec![0.0; x.len()];
    let (mut tx, mut tm) = bordered(&lu, &dmu, &c, 0.0, &zero, amp.signum())?;
    metric.normalize(&mut tx, &mut tm);

    let mut branch = Branch {
        i,
        sign,
        domain: *domain,
        lambda: lam,
        records: Vec::new(),
        steps: Vec::new(),
        folds: Vec::new(),
        stop: StopReason::MaxSteps,
        truncated: false,
        profiles: Vec::new(),
    };
    let push = |branch: &mut Branch, x: &[f64], mu: f64, ds: f64| -> Result<f64> {
        let p = coll.unpack(x);
        let mut rec = classify(&p, mu)?;
        rec.profile_ref = format!("{}-{:04}", branch.id(), branch.records.len());
        let c1 = rec.c1_norm;
        branch.records.push(rec);
        branch.steps.push(ds);
        branch.profiles.push(p);
        Ok(c1)
    };
    push(&mut branch, &x, mu, 0.0)?;
    let mut ds = opts.initial_step;
    let mut steps = 0;
    loop {
        if steps >= opts.max_steps {
            branch.stop = StopReason::MaxSteps;
            break;
        }
        let xp: Vec<f64> = x.iter().zip(&tx).map(|(a, t)| a + ds * t).collect();
        let mp = mu + ds * tm;
        // arclength plane through the prediction, normal to the tangent
        let cw: Vec<f64> = tx.iter().enumerate().map(|(k, t)| if k % 2 == 0 { t / metric.n as f64 } else { 0.0 }).collect();
        let cm = tm / (metric.scale * metric.scale);
        let target = dot(&cw, &xp) + cm * mp;
        match corrector(&coll, xp, mp, &cw, cm, target, CORRECTOR_TOL, 12) {
            Ok((xn, mn, iters)) => {
                // new tangent bordered by the old one
                let (lu, dmu) = coll.factor(&xn, mn)?;
                let (mut nx, mut nm) = bordered(&lu, &dmu, &cw, cm, &zero, 1.0)?;
                metric.normalize(&mut nx, &mut nm);
                let cos = metric.dot(&nx, nm, &tx, tm);
                if cos < 0.0 {
                    nx.iter_mut().for_each(|v| *v = -*v);
                    nm = -nm;
                }
                if cos.abs() < 0.9 && ds > STEP_MIN {
                    ds = (ds * 0.5).max(STEP_MIN);
                    continue;
                }
                if nm * tm < 0.0 {
                    branch.folds.push(mn);
                }
                x = xn;
                mu = mn;
                tx = nx;
                tm = nm;
                steps += 1;
                let c1 = push(&mut branch, &x, mu, ds)?;
                let dev = x.iter().step_by(2).fold(0.0f64, |m, &u| m.max((u - 1.0).abs()));
                if mu >= mu_max {
                    branch.stop = StopReason::MuMax;
                    break;
                }
                if mu <= 1.0 + 1e-6 {
                    branch.stop = StopReason::MuMin;
                    break;
                }
                if c1 > opts.c1_ceiling {
                    branch.stop = StopReason::C1Ceiling;
                    break;
                }
                if dev < 1e-6 {
                    branch.stop = StopReason::Trivial;
                    break;
                }
                if iters <= 3 {
                    ds = (ds * 1.5).min(STEP_MAX);
                } else if iters >= 7 {
                    ds = (ds * 0.7).max(STEP_MIN);
                }
            }
            Err(Error::CorrectorDivergence { .. }) | Err(Error::SingularSystem { .. }) => {
                if ds <= STEP_MIN {
                    branch.stop = StopReason::MinStep;
                    branch.truncated = true;
                    break;
                }
                ds = (ds * 0.5).max(STEP_MIN);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(branch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profiles_are_rejected() {
        let d = Domain::ball(3).unwrap();
        let p = Profile::from_fn(uniform_grid(0.0, 1.0, 11), d, |_| (1.0, 0.0)).unwrap();
        assert!(matches!(classify(&p, 30.0), Err(Error::MalformedProfile(_))));
    }

    #[test]
    fn range_below_lambda2_is_empty() {
        let d = Domain::ball(2).unwrap();
        assert!(detect_bifurcation(&d, 1.0, 10.0).unwrap().is_empty());
    }
}
